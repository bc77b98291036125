//! Per-node contact storage: `b` k-buckets ordered least- to most-recently seen.

use crate::id::{Distance, NodeId};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contact {
    pub id: NodeId,
    pub last_seen: SimTime,
    /// Consecutive failed exchanges since the last success.
    pub failure_count: u32,
}

/// One k-bucket. The head of `entries` is the least recently seen contact.
#[derive(Clone, Debug, Default)]
pub struct KBucket {
    entries: Vec<Contact>,
}

impl KBucket {
    pub fn entries(&self) -> &[Contact] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&Contact> {
        self.entries.first()
    }

    fn position(&self, id: &NodeId) -> Option<usize> {
        self.entries.iter().position(|c| c.id == *id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Refreshed,
    /// The bucket is at capacity; `head` is the least recently seen entry.
    BucketFull { head: NodeId },
    RejectedSelf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureOutcome {
    Retained,
    Removed,
    Absent,
}

#[derive(Clone, Debug)]
pub struct RoutingTable {
    owner: NodeId,
    k: usize,
    buckets: Vec<KBucket>,
    len: usize,
    /// Bit `i` set iff bucket `i` is non-empty.
    nonempty: [u64; 4],
}

impl RoutingTable {
    pub fn new(owner: NodeId, k: usize) -> RoutingTable {
        assert!(k >= 1, "bucket capacity must be positive");
        let buckets = (0..owner.bits()).map(|_| KBucket::default()).collect();
        RoutingTable { owner, k, buckets, len: 0, nonempty: [0; 4] }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn buckets(&self) -> &[KBucket] {
        &self.buckets
    }

    fn note_removal(&mut self, b: usize) {
        if self.buckets[b].entries.is_empty() {
            self.nonempty[b / 64] &= !(1 << (b % 64));
        }
    }

    fn bucket_of(&self, id: &NodeId) -> Option<usize> {
        self.owner.distance_unchecked(id).bucket().map(|b| b as usize)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.get(id).is_some()
    }

    pub fn get(&self, id: &NodeId) -> Option<&Contact> {
        let b = self.bucket_of(id)?;
        self.buckets[b].entries.iter().find(|c| c.id == *id)
    }

    /// Records that `id` was heard from at `now`.
    pub fn observe_contact(&mut self, id: NodeId, now: SimTime) -> InsertOutcome {
        assert_eq!(id.bits(), self.owner.bits(), "contact width differs from owner width");
        let Some(b) = self.bucket_of(&id) else {
            return InsertOutcome::RejectedSelf;
        };
        let k = self.k;
        let bucket = &mut self.buckets[b];
        if let Some(pos) = bucket.position(&id) {
            let mut contact = bucket.entries.remove(pos);
            contact.last_seen = now;
            contact.failure_count = 0;
            bucket.entries.push(contact);
            return InsertOutcome::Refreshed;
        }
        if bucket.entries.len() >= k {
            return InsertOutcome::BucketFull { head: bucket.entries[0].id };
        }
        bucket.entries.push(Contact { id, last_seen: now, failure_count: 0 });
        self.len += 1;
        self.nonempty[b / 64] |= 1 << (b % 64);
        InsertOutcome::Inserted
    }

    /// Counts one failed exchange with `id`; removes it on the `limit`-th
    /// consecutive failure.
    pub fn record_failure(&mut self, id: &NodeId, limit: u32) -> FailureOutcome {
        assert!(limit >= 1, "staleness limit must be positive");
        let Some(b) = self.bucket_of(id) else {
            return FailureOutcome::Absent;
        };
        let bucket = &mut self.buckets[b];
        let Some(pos) = bucket.position(id) else {
            return FailureOutcome::Absent;
        };
        bucket.entries[pos].failure_count += 1;
        if bucket.entries[pos].failure_count >= limit {
            bucket.entries.remove(pos);
            self.len -= 1;
            self.note_removal(b);
            FailureOutcome::Removed
        } else {
            FailureOutcome::Retained
        }
    }

    pub fn remove(&mut self, id: &NodeId) -> bool {
        let Some(b) = self.bucket_of(id) else {
            return false;
        };
        let bucket = &mut self.buckets[b];
        match bucket.position(id) {
            Some(pos) => {
                bucket.entries.remove(pos);
                self.len -= 1;
                self.note_removal(b);
                true
            }
            None => false,
        }
    }

    /// Up to `count` contact ids, ascending by XOR distance to `target`.
    ///
    /// Every bucket covers one contiguous distance interval relative to any
    /// target, so buckets are visited in interval order and only the last
    /// partially needed ones are sorted.
    pub fn closest_contacts(&self, target: &NodeId, count: usize) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(count.min(self.len) + self.k);
        if count == 0 || self.len == 0 {
            return out;
        }
        let x = self.owner.distance_unchecked(target);
        let mut order: Vec<u32> = Vec::with_capacity(16);
        for (w, &word) in self.nonempty.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                order.push(w as u32 * 64 + word.trailing_zeros());
                word &= word - 1;
            }
        }
        order.sort_unstable_by_key(|&i| bucket_rank(&x, i));
        for b in order {
            let start = out.len();
            out.extend(self.buckets[b as usize].entries.iter().map(|c| c.id));
            out[start..].sort_unstable_by_key(|a| a.distance_unchecked(target));
            if out.len() >= count {
                out.truncate(count);
                break;
            }
        }
        out
    }

    pub fn contacts(&self) -> impl Iterator<Item = &Contact> + '_ {
        self.buckets.iter().flat_map(|b| b.entries.iter())
    }

    /// Every contact id, bucket by bucket.
    pub fn dump_contacts(&self) -> Vec<NodeId> {
        self.contacts().map(|c| c.id).collect()
    }

    /// Checks the bucket invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut total = 0;
        for (i, bucket) in self.buckets.iter().enumerate() {
            if bucket.entries.len() > self.k {
                return Err(format!("bucket {i} holds {} > k", bucket.entries.len()));
            }
            for (j, c) in bucket.entries.iter().enumerate() {
                if c.id == self.owner {
                    return Err("owner stored in its own table".into());
                }
                if self.bucket_of(&c.id) != Some(i) {
                    return Err(format!("{} filed under bucket {i}", c.id));
                }
                if bucket.entries[..j].iter().any(|o| o.id == c.id) {
                    return Err(format!("duplicate {}", c.id));
                }
            }
            total += bucket.entries.len();
        }
        for (i, bucket) in self.buckets.iter().enumerate() {
            if (self.nonempty[i / 64] >> (i % 64) & 1 == 1) == bucket.entries.is_empty() {
                return Err(format!("occupancy mask wrong for bucket {i}"));
            }
        }
        if total != self.len {
            return Err(format!("cached length {} != {}", self.len, total));
        }
        Ok(())
    }
}

/// Sort key placing bucket `i` by its distance interval to a target whose
/// distance from the owner is `x`.
///
/// Bucket `j = msb(x)` holds the distances below `2^j`. A lower bucket `i`
/// maps to distances sharing `x` above bit `i` with bit `i` flipped, which is
/// closer when `x` has bit `i` set. Higher buckets keep their own magnitude.
fn bucket_rank(x: &Distance, i: u32) -> (u8, i64) {
    match x.bucket() {
        None => (3, i as i64),
        Some(j) if i == j => (0, 0),
        Some(j) if i > j => (3, i as i64),
        Some(_) if x.bit(i) => (1, -(i as i64)),
        Some(_) => (2, i as i64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id4(v: u64) -> NodeId {
        NodeId::from_u64(v, 4).unwrap()
    }

    fn t(m: u64) -> SimTime {
        SimTime::from_minutes(m)
    }

    #[test]
    fn first_insert_lands_in_bucket() {
        let mut table = RoutingTable::new(id4(0), 2);
        assert_eq!(table.observe_contact(id4(9), t(0)), InsertOutcome::Inserted);
        assert_eq!(table.buckets()[3].len(), 1);
    }

    #[test]
    fn full_bucket_reports_head() {
        // 8, 9, 10 are all at distance [8, 16) from 0.
        let mut table = RoutingTable::new(id4(0), 2);
        assert_eq!(table.observe_contact(id4(8), t(0)), InsertOutcome::Inserted);
        assert_eq!(table.observe_contact(id4(9), t(1)), InsertOutcome::Inserted);
        assert_eq!(
            table.observe_contact(id4(10), t(2)),
            InsertOutcome::BucketFull { head: id4(8) }
        );
        assert!(!table.contains(&id4(10)));
    }

    #[test]
    fn refresh_moves_to_tail_without_growing() {
        let mut table = RoutingTable::new(id4(0), 2);
        table.observe_contact(id4(8), t(0));
        table.observe_contact(id4(9), t(1));
        assert_eq!(table.observe_contact(id4(8), t(2)), InsertOutcome::Refreshed);
        assert_eq!(table.len(), 2);
        assert_eq!(table.buckets()[3].head().unwrap().id, id4(9));
        assert_eq!(
            table.observe_contact(id4(10), t(3)),
            InsertOutcome::BucketFull { head: id4(9) }
        );
    }

    #[test]
    fn owner_is_rejected() {
        let mut table = RoutingTable::new(id4(5), 3);
        assert_eq!(table.observe_contact(id4(5), t(0)), InsertOutcome::RejectedSelf);
        assert!(table.is_empty());
    }

    #[test]
    fn single_failure_removes_with_limit_one() {
        let mut table = RoutingTable::new(id4(0), 3);
        table.observe_contact(id4(3), t(0));
        assert_eq!(table.record_failure(&id4(3), 1), FailureOutcome::Removed);
        assert!(table.is_empty());
    }

    #[test]
    fn success_resets_failure_streak() {
        let mut table = RoutingTable::new(id4(0), 3);
        table.observe_contact(id4(3), t(0));
        for _ in 0..4 {
            assert_eq!(table.record_failure(&id4(3), 5), FailureOutcome::Retained);
        }
        table.observe_contact(id4(3), t(1));
        for _ in 0..4 {
            assert_eq!(table.record_failure(&id4(3), 5), FailureOutcome::Retained);
        }
        assert!(table.contains(&id4(3)));
    }

    #[test]
    fn five_consecutive_failures_remove() {
        let mut table = RoutingTable::new(id4(0), 3);
        table.observe_contact(id4(3), t(0));
        for _ in 0..4 {
            table.record_failure(&id4(3), 5);
        }
        assert_eq!(table.record_failure(&id4(3), 5), FailureOutcome::Removed);
        assert_eq!(table.record_failure(&id4(3), 5), FailureOutcome::Absent);
    }

    #[test]
    fn closest_contacts_examples() {
        let mut table = RoutingTable::new(id4(0), 4);
        assert!(table.closest_contacts(&id4(3), 2).is_empty());
        for v in [1, 2, 3] {
            table.observe_contact(id4(v), t(0));
        }
        assert_eq!(table.closest_contacts(&id4(3), 2), vec![id4(3), id4(2)]);
    }

    #[test]
    fn dump_lists_every_contact() {
        let mut table = RoutingTable::new(id4(0), 4);
        assert!(table.dump_contacts().is_empty());
        for v in [1, 2, 4] {
            table.observe_contact(id4(v), t(0));
        }
        let mut dump = table.dump_contacts();
        dump.sort();
        assert_eq!(dump, vec![id4(1), id4(2), id4(4)]);
        let per_bucket: usize = table.buckets().iter().map(|b| b.len()).sum();
        assert_eq!(per_bucket, dump.len());
    }

    #[derive(Clone, Debug)]
    enum Op {
        Observe(u8),
        Fail(u8),
        Remove(u8),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            3 => any::<u8>().prop_map(Op::Observe),
            2 => any::<u8>().prop_map(Op::Fail),
            1 => any::<u8>().prop_map(Op::Remove),
        ]
    }

    proptest! {
        #[test]
        fn invariants_hold_under_any_sequence(
            owner in any::<u8>(),
            k in 1usize..5,
            s in 1u32..4,
            ops in proptest::collection::vec(op(), 0..200),
        ) {
            let id8 = |v: u8| NodeId::from_u64(v as u64, 8).unwrap();
            let mut table = RoutingTable::new(id8(owner), k);
            let mut streak = std::collections::HashMap::new();
            for (step, o) in ops.into_iter().enumerate() {
                match o {
                    Op::Observe(v) => {
                        match table.observe_contact(id8(v), SimTime(step as u64)) {
                            InsertOutcome::Inserted | InsertOutcome::Refreshed => { streak.insert(v, 0u32); }
                            _ => {}
                        }
                    }
                    Op::Fail(v) => {
                        let before = table.contains(&id8(v));
                        let out = table.record_failure(&id8(v), s);
                        if before {
                            let n = streak.entry(v).or_insert(0);
                            *n += 1;
                            prop_assert_eq!(out == FailureOutcome::Removed, *n >= s);
                            if out == FailureOutcome::Removed { streak.remove(&v); }
                        } else {
                            prop_assert_eq!(out, FailureOutcome::Absent);
                        }
                    }
                    Op::Remove(v) => { table.remove(&id8(v)); streak.remove(&v); }
                }
                prop_assert!(table.check_invariants().is_ok(), "{:?}", table.check_invariants());
            }
            prop_assert!(table.len() <= 8 * k);
        }

        #[test]
        fn closest_equals_full_sort(
            owner in any::<u8>(),
            ids in proptest::collection::vec(any::<u8>(), 0..60),
            target in any::<u8>(),
            count in 1usize..20,
        ) {
            let id8 = |v: u8| NodeId::from_u64(v as u64, 8).unwrap();
            let mut table = RoutingTable::new(id8(owner), 6);
            for v in ids { table.observe_contact(id8(v), SimTime::ZERO); }
            let mut oracle: Vec<u8> = table.dump_contacts().iter().map(|c| c.low_u64() as u8).collect();
            oracle.sort_by_key(|v| v ^ target);
            oracle.truncate(count);
            let got: Vec<u8> = table.closest_contacts(&id8(target), count).iter().map(|c| c.low_u64() as u8).collect();
            prop_assert_eq!(got, oracle);
        }
    }

    #[test]
    fn bucket_order_sorts_intervals_for_every_8bit_pair() {
        for owner in 0u64..256 {
            for target in 0u64..256 {
                let o = NodeId::from_u64(owner, 8).unwrap();
                let x = o.distance_unchecked(&NodeId::from_u64(target, 8).unwrap());
                let mut order: Vec<u32> = (0..8).collect();
                order.sort_by_key(|&i| bucket_rank(&x, i));
                // Smallest distance to target reachable in each bucket, in visit order.
                let lows: Vec<u64> = order
                    .iter()
                    .map(|&b| ((1u64 << b)..(2u64 << b)).map(|d| (owner ^ d) ^ target).min().unwrap())
                    .collect();
                assert!(lows.windows(2).all(|w| w[0] < w[1]), "owner {owner} target {target}: {order:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn closest_matches_full_sort_at_160_bits(seed in any::<u64>(), count in 1usize..40) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let owner = NodeId::random(&mut rng, 160).unwrap();
            let target = NodeId::random(&mut rng, 160).unwrap();
            let mut table = RoutingTable::new(owner, 4);
            for i in 0..300 {
                let b = (i % 12) as u32 + 148;
                table.observe_contact(owner.random_in_bucket(b, &mut rng).unwrap(), SimTime::ZERO);
                table.observe_contact(NodeId::random(&mut rng, 160).unwrap(), SimTime::ZERO);
            }
            let mut oracle = table.dump_contacts();
            oracle.sort_by_key(|c| c.distance(&target).unwrap());
            oracle.truncate(count);
            prop_assert_eq!(table.closest_contacts(&target, count), oracle);
        }
    }
}
