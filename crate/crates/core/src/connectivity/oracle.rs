use super::graph::DiGraph;
use crate::error::GraphError;

/// Largest graph the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Smallest vertex set, excluding `v` and `w`, whose removal leaves no
/// `v -> w` path. Tries every subset, so it is independent of any flow code.
pub fn brute_force_kappa_pair(g: &DiGraph, v: usize, w: usize) -> Result<u32, GraphError> {
    let n = g.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(GraphError::TooLarge { limit: BRUTE_FORCE_LIMIT, actual: n });
    }
    for x in [v, w] {
        if x >= n {
            return Err(GraphError::VertexOutOfRange(x));
        }
    }
    if v == w {
        return Err(GraphError::SameEndpoints(v));
    }
    if g.has_edge(v, w) {
        return Err(GraphError::Adjacent(v, w));
    }
    let endpoints = (1u32 << v) | (1u32 << w);
    let mut best = u32::MAX;
    for removed in 0u32..(1 << n) {
        if removed & endpoints != 0 || removed.count_ones() >= best {
            continue;
        }
        if !reaches(g, v, w, removed) {
            best = removed.count_ones();
        }
    }
    Ok(best)
}

fn reaches(g: &DiGraph, from: usize, to: usize, removed: u32) -> bool {
    let mut seen = removed | (1 << from);
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        for &y in g.successors(x) {
            let y = y as usize;
            if y == to {
                return true;
            }
            if seen & (1 << y) == 0 {
                seen |= 1 << y;
                stack.push(y);
            }
        }
    }
    false
}
