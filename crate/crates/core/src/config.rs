//! Scenario configuration and the flat `key = value` stanza format.
//!
//! ```text
//! # one scenario per blank-line separated stanza
//! size = 250
//! churn = 10/10
//! traffic = on
//! k = 10, 20      # comma lists expand into one scenario per value
//! seed = 1, 2, 3
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::protocol::ProtocolParams;

/// Node removals and additions per simulated minute during the churn phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Churn {
    None,
    /// Label `0/1`: one removal per minute, no additions.
    RemoveOne,
    /// Label `1/1`.
    OneOne,
    /// Label `10/10`.
    TenTen,
}

impl Churn {
    pub fn removals(self) -> u32 {
        match self {
            Churn::None => 0,
            Churn::RemoveOne | Churn::OneOne => 1,
            Churn::TenTen => 10,
        }
    }

    pub fn additions(self) -> u32 {
        match self {
            Churn::None | Churn::RemoveOne => 0,
            Churn::OneOne => 1,
            Churn::TenTen => 10,
        }
    }

    pub fn is_active(self) -> bool {
        self != Churn::None
    }

    pub fn label(self) -> &'static str {
        match self {
            Churn::None => "none",
            Churn::RemoveOne => "0/1",
            Churn::OneOne => "1/1",
            Churn::TenTen => "10/10",
        }
    }
}

impl fmt::Display for Churn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Churn {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Churn::None),
            "0/1" => Ok(Churn::RemoveOne),
            "1/1" => Ok(Churn::OneOne),
            "10/10" => Ok(Churn::TenTen),
            other => Err(format!("unknown churn scenario {other:?} (none, 0/1, 1/1, 10/10)")),
        }
    }
}

/// Channel loss scenario; every one-way message is dropped independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Loss {
    None,
    Low,
    Medium,
    High,
}

impl Loss {
    pub fn one_way(self) -> f64 {
        match self {
            Loss::None => 0.0,
            Loss::Low => 0.025,
            Loss::Medium => 0.134,
            Loss::High => 0.293,
        }
    }

    /// Probability that a request/response exchange fails.
    pub fn two_way(self) -> f64 {
        let p = self.one_way();
        1.0 - (1.0 - p) * (1.0 - p)
    }

    pub fn label(self) -> &'static str {
        match self {
            Loss::None => "none",
            Loss::Low => "low",
            Loss::Medium => "medium",
            Loss::High => "high",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Loss {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Loss::None),
            "low" => Ok(Loss::Low),
            "medium" => Ok(Loss::Medium),
            "high" => Ok(Loss::High),
            other => Err(format!("unknown loss scenario {other:?} (none, low, medium, high)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub size: usize,
    pub churn: Churn,
    pub traffic: bool,
    pub loss: Loss,
    pub k: usize,
    pub alpha: usize,
    pub b: u32,
    /// Staleness limit; `None` picks the scenario default (see [`ScenarioConfig::staleness`]).
    pub s: Option<u32>,
    pub seed: u64,
    /// Simulated minutes.
    pub duration: f64,
    /// Simulated minutes between snapshots.
    pub snapshot_interval: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            size: 250,
            churn: Churn::None,
            traffic: false,
            loss: Loss::None,
            k: 20,
            alpha: 3,
            b: 160,
            s: None,
            seed: 0,
            duration: 120.0,
            snapshot_interval: 10.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.size < 2 {
            return bad(format!("size must be at least 2, got {}", self.size));
        }
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if self.alpha < 1 {
            return bad("alpha must be at least 1".into());
        }
        if self.b == 0 || !self.b.is_multiple_of(8) || self.b > crate::id::MAX_BITS {
            return bad(format!("b must be a multiple of 8 in 8..=256, got {}", self.b));
        }
        if self.s == Some(0) {
            return bad("s must be at least 1".into());
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.snapshot_interval.is_finite() && self.snapshot_interval > 0.0) {
            return bad(format!("snapshot_interval must be positive, got {}", self.snapshot_interval));
        }
        Ok(())
    }

    /// Effective staleness limit: the explicit value, else 1 for churn runs
    /// without loss and 5 otherwise.
    pub fn staleness(&self) -> u32 {
        match self.s {
            Some(s) => s,
            None if self.churn.is_active() && self.loss == Loss::None => 1,
            None => 5,
        }
    }

    pub fn protocol(&self) -> ProtocolParams {
        ProtocolParams { k: self.k, alpha: self.alpha, staleness: self.staleness() }
    }

    /// Greppable name encoding every dimension plus the seed,
    /// e.g. `n250_c10-10_traffic_lnone_k20_a3_b160_s1_seed7`.
    pub fn tag(&self) -> String {
        format!(
            "n{}_c{}_{}_l{}_k{}_a{}_b{}_s{}_seed{}",
            self.size,
            self.churn.label().replace('/', "-"),
            if self.traffic { "traffic" } else { "notraffic" },
            self.loss,
            self.k,
            self.alpha,
            self.b,
            self.staleness(),
            self.seed
        )
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        match key {
            "size" => self.size = num(key, value)?,
            "churn" => self.churn = value.parse()?,
            "traffic" => {
                self.traffic = match value {
                    "on" | "true" | "yes" | "1" => true,
                    "off" | "false" | "no" | "0" => false,
                    other => return Err(format!("traffic: expected on/off, got {other:?}")),
                }
            }
            "loss" => self.loss = value.parse()?,
            "k" => self.k = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "s" => self.s = if value == "auto" { None } else { Some(num(key, value)?) },
            "seed" => self.seed = num(key, value)?,
            "duration" => self.duration = num(key, value)?,
            "snapshot_interval" => self.snapshot_interval = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }
}

/// Parses a config file into scenarios, one per stanza, with comma lists
/// expanded as a cartesian product in key order of appearance.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioConfig>, ConfigError> {
    let mut out = Vec::new();
    let mut stanza: Vec<(usize, String, Vec<String>)> = Vec::new();
    let lines = text.lines().map(Some).chain(std::iter::once(None));
    for (idx, line) in lines.enumerate() {
        let content = line.map(|l| l.split('#').next().unwrap_or("").trim());
        match content {
            Some(c) if !c.is_empty() => {
                let (key, value) = c.split_once('=').ok_or_else(|| ConfigError::Parse {
                    line: idx + 1,
                    message: format!("expected key = value, got {c:?}"),
                })?;
                let key = key.trim().to_string();
                if stanza.iter().any(|(_, k, _)| *k == key) {
                    return Err(ConfigError::Parse { line: idx + 1, message: format!("duplicate key {key:?}") });
                }
                let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
                if values.iter().any(String::is_empty) {
                    return Err(ConfigError::Parse { line: idx + 1, message: format!("empty value for {key:?}") });
                }
                stanza.push((idx + 1, key, values));
            }
            _ => {
                if !stanza.is_empty() {
                    expand(&stanza, &mut out)?;
                    stanza.clear();
                }
            }
        }
    }
    Ok(out)
}

fn expand(stanza: &[(usize, String, Vec<String>)], out: &mut Vec<ScenarioConfig>) -> Result<(), ConfigError> {
    let mut partial = vec![ScenarioConfig::default()];
    for (line, key, values) in stanza {
        let mut next = Vec::with_capacity(partial.len() * values.len());
        for base in &partial {
            for v in values {
                let mut cfg = base.clone();
                cfg.set(key, v).map_err(|message| ConfigError::Parse { line: *line, message })?;
                next.push(cfg);
            }
        }
        partial = next;
    }
    for cfg in &partial {
        cfg.validate()?;
    }
    out.extend(partial);
    Ok(())
}
