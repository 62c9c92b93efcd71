//! JSON experiment configuration: `{law, experiment, seeds, tolerances}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::geometric::GeometricTolerances;
use super::variance::SAFETY_FACTOR;
use super::{run_geometric, run_slln, variance_scan, ExperimentReport};
use crate::error::{Error, Result};
use crate::gamma::{green_at_origin, mc_escape, taboo_estimate, GammaEstimate, TailMode};
use crate::steps::{law_label, LawSpec, StepLaw};

pub const DEFAULT_GREEN_HORIZON: usize = 4096;

fn default_green_horizon() -> usize {
    DEFAULT_GREEN_HORIZON
}

/// Where the γ used by an experiment comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSource {
    Fixed {
        value: f64,
    },
    Green {
        #[serde(default = "default_green_horizon")]
        horizon: usize,
        #[serde(default)]
        tail: TailMode,
    },
    Dp {
        horizon: usize,
    },
    Mc {
        n: u64,
        replicas: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl Default for GammaSource {
    fn default() -> Self {
        GammaSource::Green {
            horizon: DEFAULT_GREEN_HORIZON,
            tail: TailMode::Auto,
        }
    }
}

impl GammaSource {
    /// `seed` is used by the Monte Carlo source when it has none of its own.
    pub fn resolve(&self, law: &StepLaw, seed: u64) -> Result<GammaEstimate> {
        match self {
            GammaSource::Fixed { value } => GammaEstimate::fixed(*value),
            GammaSource::Green { horizon, tail } => green_at_origin(law, *horizon, *tail),
            GammaSource::Dp { horizon } => taboo_estimate(law, *horizon),
            GammaSource::Mc { n, replicas, seed: own } => mc_escape(law, *n, *replicas, own.unwrap_or(seed)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Slln {
        alphas: Vec<f64>,
        checkpoints: Vec<u64>,
        #[serde(default)]
        gamma: GammaSource,
    },
    Geometric {
        n: u64,
        m: usize,
        #[serde(default)]
        gamma: GammaSource,
    },
    VarianceScan {
        alpha: u32,
        grid: Vec<u64>,
        m: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative band on the final SLLN ratios.
    pub slln_band: f64,
    pub tv: f64,
    pub chi_square_p: f64,
    pub variance_safety: f64,
    pub max_slope: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            slln_band: 0.05,
            tv: 0.02,
            chi_square_p: 1e-4,
            variance_safety: SAFETY_FACTOR,
            max_slope: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub law: Value,
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        self.law_spec()?;
        Ok(())
    }

    pub fn law_spec(&self) -> Result<LawSpec> {
        LawSpec::from_value(&self.law)
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let spec = self.law_spec()?;
        let law = spec.build()?;
        let label = law_label(&spec);
        let tol = &self.tolerances;
        let first = self.seeds[0];
        let mut report = match &self.experiment {
            Experiment::Slln { alphas, checkpoints, gamma } => {
                let g = gamma.resolve(&law, first)?;
                run_slln(&law, &label, alphas, checkpoints, &self.seeds, &g, tol.slln_band)?
            }
            Experiment::Geometric { n, m, gamma } => {
                let g = gamma.resolve(&law, first)?;
                let t = GeometricTolerances { tv: tol.tv, p_value: tol.chi_square_p };
                run_geometric(&law, &label, *n, *m, &self.seeds, &g, t)?
            }
            Experiment::VarianceScan { alpha, grid, m } => {
                variance_scan(&law, &label, *alpha, grid, *m, &self.seeds, tol.variance_safety, tol.max_slope)?
            }
        };
        report.param("law_spec", &self.law);
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
        "law": {"family": "bernoulli", "p": "7/10"},
        "experiment": {"kind": "slln", "alphas": [0, 2], "checkpoints": [100, 1000],
                       "gamma": {"method": "fixed", "value": 0.4}},
        "seeds": [1, 2]
    }"#;

    #[test]
    fn parses_and_runs() {
        let cfg = Config::from_json(GOOD).unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        let r = cfg.run().unwrap();
        assert_eq!(r.law, "bernoulli(7/10)");
        assert_eq!(r.seeds, vec![1, 2]);
    }

    #[test]
    fn rejects_unknown_keys() {
        for bad in [
            GOOD.replace("\"seeds\"", "\"extra\": 1, \"seeds\""),
            GOOD.replace("\"kind\": \"slln\",", "\"kind\": \"slln\", \"bogus\": 3,"),
            GOOD.replace("\"value\": 0.4", "\"value\": 0.4, \"x\": 1"),
            GOOD.replace("\"seeds\": [1, 2]", "\"seeds\": [1], \"tolerances\": {\"tvv\": 1}"),
            GOOD.replace("\"p\": \"7/10\"", "\"p\": \"7/10\", \"q\": 1"),
        ] {
            assert!(Config::from_json(&bad).is_err(), "{bad}");
        }
        let unknown = GOOD.replace("bernoulli", "levy");
        assert!(matches!(Config::from_json(&unknown), Err(Error::UnknownFamily(_))));
        assert!(Config::from_json(&GOOD.replace("[1, 2]", "[]")).is_err());
    }

    #[test]
    fn gamma_sources() {
        let law = crate::steps::bernoulli(0.7).unwrap();
        let g: GammaSource = serde_json::from_str(r#"{"method": "green", "horizon": 200}"#).unwrap();
        assert!((g.resolve(&law, 0).unwrap().value - 0.4).abs() < 1e-6);
        let g: GammaSource = serde_json::from_str(r#"{"method": "mc", "n": 100, "replicas": 1000}"#).unwrap();
        assert_eq!(g.resolve(&law, 9).unwrap().seed, Some(9));
    }
}
