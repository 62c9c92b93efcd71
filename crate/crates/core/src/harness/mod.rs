//! Experiment driver: SLLN, geometric-law and variance-scaling runs with
//! machine-readable verdicts.

pub mod config;
pub mod geometric;
pub mod slln;
pub mod stats;
pub mod variance;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::gamma::GammaEstimate;
use crate::theory::Prediction;

pub use config::{Config, Experiment, GammaSource, Tolerances};
pub use geometric::run_geometric;
pub use slln::run_slln;
pub use stats::{fit_exponent, tv_distance, FitResult, RefLaw};
pub use variance::variance_scan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Slln,
    Geometric,
    VarianceScan,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Slln => "slln",
            ExperimentKind::Geometric => "geometric",
            ExperimentKind::VarianceScan => "variance_scan",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    LessThan,
    AtMost,
    GreaterThan,
    AtLeast,
}

impl Rule {
    pub fn holds(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Rule::LessThan => statistic < threshold,
            Rule::AtMost => statistic <= threshold,
            Rule::GreaterThan => statistic > threshold,
            Rule::AtLeast => statistic >= threshold,
        }
    }
}

/// One pass/fail comparison. `pass` is derived from the other fields only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub statistic: f64,
    pub rule: Rule,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, seed: Option<u64>, statistic: f64, rule: Rule, threshold: f64) -> Self {
        Check {
            name: name.into(),
            seed,
            statistic,
            rule,
            threshold,
            pass: rule.holds(statistic, threshold),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub checks: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub law: String,
    pub seeds: Vec<u64>,
    pub params: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaEstimate>,
    pub theory: Vec<Prediction>,
    pub statistics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub tables: BTreeMap<String, Table>,
}

impl ExperimentReport {
    pub fn new(experiment: ExperimentKind, law: String, seeds: &[u64]) -> Self {
        ExperimentReport {
            experiment,
            law,
            seeds: seeds.to_vec(),
            params: BTreeMap::new(),
            gamma: None,
            theory: Vec::new(),
            statistics: BTreeMap::new(),
            checks: Vec::new(),
            verdict: Verdict { pass: true, checks: 0, failed: 0 },
            tables: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn stat(&mut self, key: &str, value: impl Serialize) {
        self.statistics.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Recomputes the verdict from the checks.
    pub fn finish(mut self) -> Self {
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        self.verdict = Verdict {
            pass: failed == 0,
            checks: self.checks.len(),
            failed,
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["name", "seed", "statistic", "rule", "threshold", "pass"]);
        for c in &self.checks {
            t.push(vec![
                Value::String(c.name.clone()),
                c.seed.map_or(Value::Null, Value::from),
                Value::from(c.statistic),
                serde_json::to_value(c.rule).expect("serializable"),
                Value::from(c.threshold),
                Value::from(c.pass),
            ]);
        }
        t
    }

    /// Writes the report into `dir`; returns the files written. JSON output
    /// is the full report plus one CSV per table; CSV output is the tables
    /// and the checks.
    pub fn write_to(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.experiment.name();
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> Result<()> {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path)?;
            f.write_all(body.as_bytes())?;
            written.push(path);
            Ok(())
        };
        match format {
            OutputFormat::Json => put(format!("{stem}.json"), &self.to_json())?,
            OutputFormat::Csv => put(format!("{stem}_checks.csv"), &self.checks_table().to_csv())?,
        }
        for (name, table) in &self.tables {
            put(format!("{stem}_{name}.csv"), &table.to_csv())?;
        }
        Ok(written)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(crate::Error::BadParam(format!("unknown format `{s}`"))),
        }
    }
}

/// Runs the experiment a configuration describes.
pub fn run_config(cfg: &Config) -> Result<ExperimentReport> {
    cfg.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_checks() {
        let mut r = ExperimentReport::new(ExperimentKind::Slln, "x".into(), &[1]);
        r.check(Check::new("a", None, 0.01, Rule::AtMost, 0.05));
        assert!(r.clone().finish().passed());
        r.check(Check::new("b", Some(1), 0.5, Rule::LessThan, 0.02));
        let r = r.finish();
        assert!(!r.passed());
        assert_eq!(r.verdict.failed, 1);
        assert!(r.checks_table().to_csv().starts_with("name,seed,statistic,rule,threshold,pass\n"));
    }

    #[test]
    fn rules() {
        assert!(Rule::AtMost.holds(1.0, 1.0));
        assert!(!Rule::LessThan.holds(1.0, 1.0));
        assert!(Rule::AtLeast.holds(2.0, 2.0));
        assert!(!Rule::GreaterThan.holds(f64::NAN, 0.0));
        assert!(!Rule::AtMost.holds(f64::NAN, 0.0));
    }
}
