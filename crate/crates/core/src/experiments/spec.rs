use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::InitKind;
use crate::potential::RieszSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Theorem2Stability,
    Theorem3Meanfield,
    Theorem1Mollify,
    LemmaMinCheck,
    PotentialAccuracy,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "theorem2_stability" => Self::Theorem2Stability,
            "theorem3_meanfield" => Self::Theorem3Meanfield,
            "theorem1_mollify" => Self::Theorem1Mollify,
            "lemma_min_check" => Self::LemmaMinCheck,
            "potential_accuracy" => Self::PotentialAccuracy,
            _ => return Err(Error::Parse(format!("unknown experiment kind `{s}`"))),
        })
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem2Stability => "theorem2_stability",
            Self::Theorem3Meanfield => "theorem3_meanfield",
            Self::Theorem1Mollify => "theorem1_mollify",
            Self::LemmaMinCheck => "lemma_min_check",
            Self::PotentialAccuracy => "potential_accuracy",
        }
    }
}

/// Where the configuration for one row comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigSource {
    Minimized,
    EquallySpaced,
    Lattice,
    PerturbedLattice,
    Random,
    /// Uniform in the ball of radius 0.1 about the center of the cube.
    Clustered,
}

impl FromStr for ConfigSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "minimized" => Self::Minimized,
            "equally_spaced" => Self::EquallySpaced,
            "lattice" => Self::Lattice,
            "perturbed_lattice" => Self::PerturbedLattice,
            "random" => Self::Random,
            "clustered" => Self::Clustered,
            _ => return Err(Error::Parse(format!("unknown configuration source `{s}`"))),
        })
    }
}

fn parse_init(s: &str) -> Result<InitKind> {
    Ok(match s {
        "lattice" => InitKind::Lattice,
        "random" => InitKind::Random,
        "perturbed_lattice" => InitKind::PerturbedLattice,
        _ => return Err(Error::Parse(format!("unknown init `{s}`"))),
    })
}

/// Everything a run needs. Pass/fail thresholds live here, not in the runners.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub d: usize,
    pub s: f64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub source: ConfigSource,
    /// Extra sources sampled by the stability run.
    pub sources: Vec<ConfigSource>,
    /// Transport grid `m ≈ grid_scale · N^{1/d}`; `None` uses the default rule.
    pub grid_scale: Option<f64>,
    pub lambda: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    /// Depth `M` of the logarithmic ladder.
    #[serde(rename = "M")]
    pub depth: f64,
    pub ewald_tol: f64,
    pub restarts: usize,
    pub init: InitKind,
    pub max_iters: usize,
    /// Minimizer stopping rule; 1e-8 sits at the roundoff floor of `E_N` for `N` in the tens.
    pub gradient_tol: f64,
    /// Accepted slope range; `None` means `[-1/d - 0.15, -λγ + 0.15]`.
    pub corridor: Option<[f64; 2]>,
    pub slope_target: Option<f64>,
    pub slope_tol: f64,
    /// Largest allowed max/min ratio of a normalized quantity across `N`.
    pub ratio_max: f64,
    /// Gap allowed in exact identities.
    pub identity_tol: f64,
    /// Closed-form accuracy of the potential.
    pub closed_form_tol: f64,
    /// Split-parameter invariance of the potential.
    pub split_tol: f64,
    /// Random configurations or points per check.
    pub samples: usize,
    /// Also run the minimal-energy curve in the lemma check.
    pub curve: bool,
    pub n_cap: usize,
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, d: usize, s: f64) -> Self {
        Self {
            kind,
            d,
            s,
            n_list: Vec::new(),
            seeds: vec![0],
            source: ConfigSource::Minimized,
            sources: vec![ConfigSource::PerturbedLattice, ConfigSource::Random, ConfigSource::Clustered],
            grid_scale: None,
            lambda: None,
            a: None,
            depth: 2.0,
            ewald_tol: 1e-10,
            restarts: 1,
            init: InitKind::PerturbedLattice,
            max_iters: 20_000,
            gradient_tol: 1e-7,
            corridor: None,
            slope_target: None,
            slope_tol: 0.05,
            ratio_max: 3.0,
            identity_tol: 1e-10,
            closed_form_tol: 1e-8,
            split_tol: 2e-10,
            samples: 50,
            curve: true,
            n_cap: 4096,
            out_dir: None,
            svg: false,
        }
    }

    /// Sets one field from its `key=value` spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{key}={value}: {e}"));
        fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, T::Err> {
            v.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
        }
        let opt = |v: &str| -> Result<Option<f64>> {
            if v == "none" || v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|e| bad(&e))
            }
        };
        match key {
            "kind" => self.kind = value.parse()?,
            "d" => self.d = value.parse().map_err(|e| bad(&e))?,
            "s" => self.s = value.parse().map_err(|e| bad(&e))?,
            "N_list" | "n_list" => self.n_list = list(value).map_err(|e| bad(&e))?,
            "seeds" => self.seeds = list(value).map_err(|e| bad(&e))?,
            "source" => self.source = value.parse()?,
            "sources" => self.sources = list(value)?,
            "grid_scale" => self.grid_scale = opt(value)?,
            "lambda" => self.lambda = opt(value)?,
            "A" | "a" => self.a = opt(value)?,
            "M" | "depth" => self.depth = value.parse().map_err(|e| bad(&e))?,
            "ewald_tol" => self.ewald_tol = value.parse().map_err(|e| bad(&e))?,
            "restarts" => self.restarts = value.parse().map_err(|e| bad(&e))?,
            "init" => self.init = parse_init(value)?,
            "max_iters" => self.max_iters = value.parse().map_err(|e| bad(&e))?,
            "gradient_tol" => self.gradient_tol = value.parse().map_err(|e| bad(&e))?,
            "corridor" => {
                self.corridor = match list::<f64>(value).map_err(|e| bad(&e))?.as_slice() {
                    [] => None,
                    [lo, hi] if lo < hi => Some([*lo, *hi]),
                    _ => return Err(bad(&"corridor needs `lo,hi` with lo < hi")),
                }
            }
            "slope_target" => self.slope_target = opt(value)?,
            "slope_tol" => self.slope_tol = value.parse().map_err(|e| bad(&e))?,
            "ratio_max" => self.ratio_max = value.parse().map_err(|e| bad(&e))?,
            "identity_tol" => self.identity_tol = value.parse().map_err(|e| bad(&e))?,
            "closed_form_tol" => self.closed_form_tol = value.parse().map_err(|e| bad(&e))?,
            "split_tol" => self.split_tol = value.parse().map_err(|e| bad(&e))?,
            "samples" => self.samples = value.parse().map_err(|e| bad(&e))?,
            "curve" => self.curve = value.parse().map_err(|e| bad(&e))?,
            "n_cap" => self.n_cap = value.parse().map_err(|e| bad(&e))?,
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "svg" => self.svg = value.parse().map_err(|e| bad(&e))?,
            _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key=value", no + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::new(ExperimentKind::PotentialAccuracy, 1, 0.0);
        spec.apply_text(text)?;
        Ok(spec)
    }

    pub fn riesz(&self) -> Result<RieszSpec> {
        RieszSpec::new(self.d, self.s)
    }

    pub fn validate(&self) -> Result<()> {
        self.riesz()?;
        let needs_n = !matches!(self.kind, ExperimentKind::PotentialAccuracy);
        if needs_n && self.n_list.is_empty() {
            return Err(Error::Usage(format!("{} needs a nonempty N_list", self.kind.name())));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2 || n > self.n_cap) {
            return Err(Error::Usage(format!("N = {n} outside [2, {}]; raise n_cap to go further", self.n_cap)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Usage("at least one seed is required".into()));
        }
        if self.kind == ExperimentKind::Theorem2Stability && self.sources.is_empty() {
            return Err(Error::Usage("stability runs need at least one source".into()));
        }
        if self.restarts == 0 || self.samples == 0 {
            return Err(Error::Usage("restarts and samples must be positive".into()));
        }
        if let Some(g) = self.grid_scale {
            if !(g > 0.0) {
                return Err(Error::Usage("grid_scale must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_file_overrides_defaults() {
        let text = "kind = theorem3_meanfield\nd=2\ns=1  # comment\nN_list=16, 36,64\nseeds=1,2\ncorridor=-0.65,-0.2\nlambda=0.05\n";
        let spec = ExperimentSpec::from_text(text).unwrap();
        assert_eq!(spec.kind, ExperimentKind::Theorem3Meanfield);
        assert_eq!((spec.d, spec.s), (2, 1.0));
        assert_eq!(spec.n_list, vec![16, 36, 64]);
        assert_eq!(spec.seeds, vec![1, 2]);
        assert_eq!(spec.corridor, Some([-0.65, -0.2]));
        assert_eq!(spec.lambda, Some(0.05));
        spec.validate().unwrap();
    }

    #[test]
    fn bad_input_is_a_parse_or_usage_error() {
        assert!(matches!(ExperimentSpec::from_text("kind=nope"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentSpec::from_text("d"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentSpec::from_text("corridor=1,0"), Err(Error::Parse(_))));
        let spec = ExperimentSpec::from_text("kind=theorem3_meanfield\nd=1\ns=1").unwrap();
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(ExperimentKind::Theorem3Meanfield, 1, 0.0);
        spec.n_list = vec![8, 5000];
        assert!(matches!(spec.validate(), Err(Error::Usage(_))));
    }
}
