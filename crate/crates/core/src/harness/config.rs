use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{pauli, LocalOperator};
use crate::error::{Error, Result};
use crate::interaction::{self, CoeffPath, Interaction};
use crate::lattice::{build_chain, build_torus, SiteGraph};
use crate::spectra::SplitRule;

/// A run configuration. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSpec,
    pub model: ModelSpec,
    #[serde(default = "default_split")]
    pub split: SplitRule,
    /// Smallest acceptable gap for the split.
    #[serde(default)]
    pub min_gap: f64,
    pub experiment: ExperimentSpec,
}

fn default_split() -> SplitRule {
    SplitRule::LowestK { k: 1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Chain { n: usize, #[serde(default)] periodic: bool },
    Torus { lx: usize, ly: usize },
}

/// A coefficient: a plain number or a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Constant(f64),
    Path(CoeffPath),
}

impl Coeff {
    pub fn path(&self) -> CoeffPath {
        match self {
            Coeff::Constant(c) => CoeffPath::constant(*c),
            Coeff::Path(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `-J Σ ZZ - g Σ X`.
    Tfim { j: Coeff, g: Coeff },
    /// `J Σ (XX + YY)/2 + h Σ q`.
    XyCharge { j: Coeff, h: f64 },
}

/// A Pauli string on explicit sites, e.g. `{"pauli": "ZZ", "sites": [0, 1]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub pauli: String,
    pub sites: Vec<usize>,
}

impl ObservableSpec {
    pub fn build(&self, g: &SiteGraph) -> Result<LocalOperator> {
        for &s in &self.sites {
            g.check_site(s).map_err(|e| Error::Config(e.to_string()))?;
        }
        pauli::string(&self.pauli, &self.sites).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiouvillianCheck {
    /// `‖I_β(L(A)) - A‖` against `‖P‖₁‖A‖e^{-γ²/4β²}`.
    Residual,
    /// `‖I_β(A) - I(A)‖` against the same bound over `γ`.
    Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Almost,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Commutator growth against the Lieb-Robinson bound.
    Lr {
        b: f64,
        b_prime: f64,
        a: ObservableSpec,
        b_obs: ObservableSpec,
        t_max: f64,
        points: usize,
    },
    /// Gaussian-error estimates for the almost inverse Liouvillian, on
    /// a seeded random Hermitian observable.
    Liouvillian {
        check: LiouvillianCheck,
        beta_grid: Vec<f64>,
    },
    /// `‖[I_β(A), B]‖` against the locality estimate.
    Locality {
        b: f64,
        b_prime: f64,
        a: ObservableSpec,
        b_obs: ObservableSpec,
        beta_grid: Vec<f64>,
    },
    /// Intertwining error of the flow along the model path.
    Flow {
        #[serde(default = "default_flow_kind")]
        generator: FlowKind,
        /// Required for the almost generator, ignored by the exact one.
        #[serde(default)]
        beta_grid: Vec<f64>,
        #[serde(default = "default_s_steps")]
        s_steps: usize,
        #[serde(default = "default_s_end")]
        s_end: f64,
        observable: ObservableSpec,
    },
    /// Ground-state response to a local perturbation switched on along `s`.
    Lppl {
        perturbation: ObservableSpec,
        strength: f64,
        observables: Vec<ObservableSpec>,
        #[serde(default = "default_gap_samples")]
        gap_samples: usize,
    },
    /// Correlation decay across the gap.
    Cluster {
        pairs: Vec<(ObservableSpec, ObservableSpec)>,
        #[serde(default = "default_random_states")]
        random_states: usize,
    },
    /// Flux threading and the transported-charge trace.
    Qhe {
        beta: Option<f64>,
        strip_width: Option<usize>,
        #[serde(default)]
        phi_grid: Vec<f64>,
    },
}

fn default_flow_kind() -> FlowKind {
    FlowKind::Almost
}

fn default_s_steps() -> usize {
    200
}

fn default_s_end() -> f64 {
    1.0
}

fn default_gap_samples() -> usize {
    3
}

fn default_random_states() -> usize {
    5
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Lr { .. } => "lr",
            ExperimentSpec::Liouvillian { .. } => "liouvillian",
            ExperimentSpec::Locality { .. } => "locality",
            ExperimentSpec::Flow { .. } => "flow",
            ExperimentSpec::Lppl { .. } => "lppl",
            ExperimentSpec::Cluster { .. } => "cluster",
            ExperimentSpec::Qhe { .. } => "qhe",
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Config(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

fn grid(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    xs.iter().try_for_each(|&x| positive(name, x))
}

fn lr_pair(b: f64, b_prime: f64) -> Result<()> {
    positive("b", b)?;
    if !(b_prime > b) {
        return Err(Error::Config(format!("b_prime must exceed b (got b = {b}, b_prime = {b_prime})")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks every constraint that the schema alone does not express.
    pub fn validate(&self) -> Result<()> {
        match self.graph {
            GraphSpec::Chain { n, .. } if n == 0 || n > 14 => {
                return Err(Error::Config(format!("chain length must be in 1..=14, got {n}")));
            }
            GraphSpec::Torus { lx, ly } if lx < 2 || ly < 2 || lx * ly > 14 => {
                return Err(Error::Config(format!("torus {lx}x{ly} is outside 2..=14 sites")));
            }
            _ => {}
        }
        if !(self.min_gap >= 0.0) {
            return Err(Error::Config(format!("min_gap must be nonnegative, got {}", self.min_gap)));
        }
        match &self.split {
            SplitRule::LowestK { k } if *k == 0 => return Err(Error::Config("split k must be at least 1".into())),
            SplitRule::Window { lo, hi } if !(lo <= hi) => {
                return Err(Error::Config(format!("split window needs lo <= hi, got [{lo}, {hi}]")));
            }
            _ => {}
        }
        match &self.experiment {
            ExperimentSpec::Lr { b, b_prime, t_max, points, .. } => {
                lr_pair(*b, *b_prime)?;
                positive("t_max", *t_max)?;
                if *points < 2 {
                    return Err(Error::Config("points must be at least 2".into()));
                }
            }
            ExperimentSpec::Liouvillian { beta_grid, .. } => grid("beta_grid", beta_grid)?,
            ExperimentSpec::Locality { b, b_prime, beta_grid, .. } => {
                lr_pair(*b, *b_prime)?;
                grid("beta_grid", beta_grid)?;
            }
            ExperimentSpec::Flow {
                generator,
                beta_grid,
                s_steps,
                s_end,
                ..
            } => {
                if *generator == FlowKind::Almost {
                    grid("beta_grid", beta_grid)?;
                }
                positive("s_end", *s_end)?;
                if *s_steps == 0 {
                    return Err(Error::Config("s_steps must be at least 1".into()));
                }
            }
            ExperimentSpec::Lppl { strength, observables, .. } => {
                if !strength.is_finite() {
                    return Err(Error::Config("strength must be finite".into()));
                }
                if observables.is_empty() {
                    return Err(Error::Config("observables must not be empty".into()));
                }
            }
            ExperimentSpec::Cluster { pairs, .. } => {
                if pairs.is_empty() {
                    return Err(Error::Config("pairs must not be empty".into()));
                }
            }
            ExperimentSpec::Qhe { beta, phi_grid, .. } => {
                if let Some(beta) = beta {
                    positive("beta", *beta)?;
                }
                if phi_grid.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Config("phi_grid must be finite".into()));
                }
                if !matches!(self.graph, GraphSpec::Torus { .. }) || !matches!(self.model, ModelSpec::XyCharge { .. }) {
                    return Err(Error::Config("qhe needs a torus graph and the xy_charge model".into()));
                }
            }
        }
        Ok(())
    }

    pub fn build_graph(&self) -> Result<SiteGraph> {
        match self.graph {
            GraphSpec::Chain { n, periodic } => build_chain(n, periodic),
            GraphSpec::Torus { lx, ly } => build_torus(lx, ly),
        }
    }

    pub fn build_model(&self, g: &SiteGraph) -> Result<Interaction> {
        match &self.model {
            ModelSpec::Tfim { j, g: field } => interaction::tfim(g, j.path(), field.path()),
            ModelSpec::XyCharge { j, h } => interaction::xy_charge(g, j.path(), *h),
        }
    }
}
