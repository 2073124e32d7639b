//! Sweep reports: tabulated estimates against oracles plus verdicts.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// The standard errors are too large to decide; a larger ensemble is needed.
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One estimate with its standard error and reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub observable: String,
    pub epsilon: Option<f64>,
    pub t: Option<f64>,
    pub k: Option<f64>,
    pub estimate: f64,
    pub se: f64,
    pub oracle: f64,
}

impl ReportRow {
    pub fn new(observable: impl Into<String>, estimate: f64, se: f64, oracle: f64) -> Self {
        Self {
            observable: observable.into(),
            epsilon: None,
            t: None,
            k: None,
            estimate,
            se,
            oracle,
        }
    }

    pub fn eps(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn at(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn mode(mut self, k: f64) -> Self {
        self.k = Some(k);
        self
    }

    /// `|estimate - oracle| / se`, infinite when `se = 0` and they differ.
    pub fn z_score(&self) -> f64 {
        let d = (self.estimate - self.oracle).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub test: String,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub ensemble: usize,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl SweepReport {
    pub fn new<C: Serialize>(test: &str, config: &C, seed: u64, ensemble: usize) -> Self {
        let config = serde_json::to_value(config).expect("configs serialize");
        Self {
            test: test.into(),
            config_hash: config_hash(&config),
            config,
            seed,
            ensemble,
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn row(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn check(&mut self, name: &str, verdict: Verdict, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            detail: detail.into(),
        });
    }

    /// `Fail` if any check failed, else `Inconclusive` if any was, else `Pass`.
    pub fn verdict(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per row; every line repeats the ensemble size, seed and config hash.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "test,observable,epsilon,t,k,estimate,se,oracle,ensemble,seed,config_hash")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{},{}",
                self.test,
                r.observable,
                opt(r.epsilon),
                opt(r.t),
                opt(r.k),
                r.estimate,
                r.se,
                r.oracle,
                self.ensemble,
                self.seed,
                self.config_hash
            )?;
        }
        Ok(())
    }

    /// Human-readable verdict lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{:<12} {}: {}\n", c.verdict.to_string(), c.name, c.detail));
        }
        s.push_str(&format!("{:<12} {} (overall)\n", self.verdict().to_string(), self.test));
        s
    }
}

/// `true` when every element is strictly below its predecessor.
pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}
