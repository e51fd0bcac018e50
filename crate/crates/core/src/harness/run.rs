use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentSpec, FlowKind, LiouvillianCheck};
use super::curve::{Abscissa, DecayCurve, ExpFit, DEFAULT_FLOOR, FLOW_FLOOR};
use crate::algebra::{self, Space};
use crate::clustering;
use crate::dynamics::{self, LrParams};
use crate::error::{Error, Result};
use crate::filtering::{self, Method};
use crate::flow::{self, FlowGenerator, GeneratorKind};
use crate::lattice::{GraphKind, Region};
use crate::linalg::{self, CMat, C64};
use crate::qhe;
use crate::spectra::{diagonalize, split_spectrum};

/// One output row: abscissa, measured value and an optional bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub x: f64,
    pub value: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub min_margin: f64,
}

impl Verdict {
    fn from_rows(rows: &[Row]) -> Option<Verdict> {
        let margins: Vec<f64> = rows.iter().filter_map(|r| r.bound.map(|b| b - r.value)).collect();
        if margins.is_empty() {
            return None;
        }
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        Some(Verdict {
            holds: min_margin >= 0.0,
            min_margin,
        })
    }
}

/// Everything an experiment produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub fit: Option<ExpFit>,
    pub verdict: Option<Verdict>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub kind: String,
    pub seed: u64,
    pub fit: Option<ExpFit>,
    pub verdict: Option<Verdict>,
    pub details: Value,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the seed in the configuration.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// File stem of the outputs.
    pub stem: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

/// Process exit status for an error: 2 for configuration problems, 3 for
/// violated physical assumptions, 4 for violated bounds, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::SiteOutOfRange { .. }
        | Error::Overlap
        | Error::Dimension { .. } => 2,
        Error::Assumption(_)
        | Error::GapTooSmall { .. }
        | Error::EmptyPatch
        | Error::EverythingSelected
        | Error::InconsistentSplit { .. }
        | Error::NotChargeConserving { .. }
        | Error::NotInRange { .. }
        | Error::DegeneratePolar { .. } => 3,
        Error::BoundViolated(_) => 4,
        _ => 1,
    }
}

/// `x,value,bound,margin` with 17 significant digits; empty cells where
/// no bound applies.
pub fn render_csv(rows: &[Row]) -> String {
    let mut out = String::from("x,value,bound,margin\n");
    for r in rows {
        let _ = write!(out, "{:.16e},{:.16e}", r.x, r.value);
        match r.bound {
            Some(b) => {
                let _ = writeln!(out, ",{:.16e},{:.16e}", b, b - r.value);
            }
            None => out.push_str(",,\n"),
        }
    }
    out
}

/// Runs the configured experiment and writes `<stem>.csv` and
/// `<stem>.json` into the output directory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let outcome = match opts.threads {
        Some(k) => {
            if k == 0 {
                return Err(Error::Config("threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| execute(&cfg))?
        }
        None => execute(&cfg)?,
    };
    std::fs::create_dir_all(&opts.out_dir)?;
    let csv_path = opts.out_dir.join(format!("{}.csv", opts.stem));
    let summary_path = opts.out_dir.join(format!("{}.json", opts.stem));
    std::fs::write(&csv_path, render_csv(&outcome.rows))?;
    let summary = Summary {
        kind: cfg.experiment.kind().to_string(),
        seed: cfg.seed,
        fit: outcome.fit,
        verdict: outcome.verdict,
        details: outcome.details,
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&summary_path, text + "\n")?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        summary,
    })
}

/// Default output stem: the configuration file name without extension.
pub fn default_stem(config_path: &Path) -> String {
    config_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string()
}

fn optional_fit(curve: &DecayCurve) -> Option<ExpFit> {
    curve.fit().ok()
}

/// A Hermitian matrix with independent standard normal entries.
pub fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut m = CMat::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..=i {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if i == j { 0.0 } else { StandardNormal.sample(rng) };
            m[[i, j]] = C64::new(re, im);
            m[[j, i]] = C64::new(re, -im);
        }
    }
    m
}

/// Runs the experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let g = cfg.build_graph()?;
    let phi = cfg.build_model(&g)?;
    let space: Space = phi.space();
    match &cfg.experiment {
        ExperimentSpec::Lr {
            b,
            b_prime,
            a,
            b_obs,
            t_max,
            points,
        } => {
            let (a, bo) = (a.build(&g)?, b_obs.build(&g)?);
            let sd = diagonalize(&phi.assemble_hamiltonian(0.0)?)?;
            let params = LrParams::for_interaction(*b, *b_prime, &phi)?;
            let times: Vec<f64> = (0..*points).map(|k| t_max * k as f64 / (*points - 1) as f64).collect();
            let report = dynamics::lr_experiment(&sd, &space, &g, &a, &bo, &times, &params)?;
            let rows: Vec<Row> = report
                .times
                .iter()
                .zip(&report.measured)
                .zip(&report.bound)
                .map(|((&x, &value), &bound)| Row {
                    x,
                    value,
                    bound: Some(bound),
                })
                .collect();
            let x = Region::new(&g, a.support().iter().copied())?;
            let y = Region::new(&g, bo.support().iter().copied())?;
            Ok(Outcome {
                verdict: Verdict::from_rows(&rows),
                rows,
                fit: None,
                details: json!({
                    "distance": g.distance_between(&x, &y),
                    "velocity": params.velocity,
                    "volume_constant": params.volume,
                    "interaction_norm": params.interaction_norm,
                    "min_ratio": report.min_ratio,
                }),
            })
        }
        ExperimentSpec::Liouvillian { check, beta_grid } => {
            let sd = diagonalize(&phi.assemble_hamiltonian(0.0)?)?;
            let split = split_spectrum(&sd, &cfg.split, cfg.min_gap)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let a = filtering::cross_patch_part(&sd, &split, &random_hermitian(sd.dim(), &mut rng))?;
            let mut betas = beta_grid.clone();
            betas.sort_by(|x, y| y.total_cmp(x));
            let checks = betas
                .par_iter()
                .map(|&beta| match check {
                    LiouvillianCheck::Residual => filtering::inverse_residual_check(&sd, &split, beta, &a),
                    LiouvillianCheck::Comparison => filtering::exact_comparison_check(&sd, &split, beta, &a),
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Row> = betas
                .iter()
                .zip(&checks)
                .map(|(&beta, c)| Row {
                    x: beta.powi(-2),
                    value: c.lhs.iter().copied().fold(0.0, f64::max),
                    bound: Some(c.rhs),
                })
                .collect();
            let commutators_hold = checks
                .iter()
                .all(|c| c.commutator_lhs.iter().all(|&l| l <= c.commutator_rhs));
            let curve = DecayCurve::new(
                Abscissa::InverseBetaSquared,
                rows.iter().map(|r| r.x).collect(),
                rows.iter().map(|r| r.value).collect(),
                DEFAULT_FLOOR,
            )?;
            let mut verdict = Verdict::from_rows(&rows);
            if let Some(v) = verdict.as_mut() {
                v.holds &= commutators_hold;
            }
            Ok(Outcome {
                rows,
                fit: optional_fit(&curve),
                verdict,
                details: json!({
                    "gap": split.gap,
                    "expected_rate": split.gap * split.gap / 4.0,
                    "patch_rank": split.rank,
                    "commutator_variant_holds": commutators_hold,
                }),
            })
        }
        ExperimentSpec::Locality {
            b,
            b_prime,
            a,
            b_obs,
            beta_grid,
        } => {
            let (a, bo) = (a.build(&g)?, b_obs.build(&g)?);
            let sd = diagonalize(&phi.assemble_hamiltonian(0.0)?)?;
            let params = LrParams::for_interaction(*b, *b_prime, &phi)?;
            let x = Region::new(&g, a.support().iter().copied())?;
            let y = Region::new(&g, bo.support().iter().copied())?;
            let (ga, gb) = (algebra::embed(&a, &space)?, algebra::embed(&bo, &space)?);
            let (na, nb) = (a.norm()?, bo.norm()?);
            let mut betas = beta_grid.clone();
            betas.sort_by(f64::total_cmp);
            let rows = betas
                .par_iter()
                .map(|&beta| {
                    let ia = filtering::almost_inverse_liouvillian(&sd, beta, &ga, Method::Spectral)?;
                    let value = linalg::operator_norm(&linalg::commutator(&ia, &gb))?;
                    let bound = filtering::locality_bound(&params, beta, &g, &x, &y, na, nb)?;
                    Ok(Row {
                        x: beta,
                        value,
                        bound: Some(bound.grid_inf),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome {
                verdict: Verdict::from_rows(&rows),
                rows,
                fit: None,
                details: json!({
                    "distance": g.distance_between(&x, &y),
                    "velocity": params.velocity,
                }),
            })
        }
        ExperimentSpec::Flow {
            generator,
            beta_grid,
            s_steps,
            s_end,
            observable,
        } => {
            let a = algebra::embed(&observable.build(&g)?, &space)?;
            match generator {
                FlowKind::Almost => {
                    let curve = flow::automorphic_equivalence_experiment(
                        &phi, &cfg.split, cfg.min_gap, &a, beta_grid, *s_end, *s_steps, None,
                    )?;
                    let rows = curve
                        .x
                        .iter()
                        .zip(&curve.values)
                        .map(|(&x, &value)| Row { x, value, bound: None })
                        .collect();
                    Ok(Outcome {
                        rows,
                        fit: optional_fit(&curve),
                        verdict: None,
                        details: json!({ "floor": FLOW_FLOOR, "abscissa": "inverse_beta_squared" }),
                    })
                }
                FlowKind::Exact => {
                    let gen = FlowGenerator::new(&phi, GeneratorKind::Exact, cfg.split.clone(), cfg.min_gap)?;
                    let run = flow::integrate_flow(&gen, &flow::uniform_grid(*s_end, *s_steps), std::slice::from_ref(&a))?;
                    let rows = run
                        .s_grid
                        .iter()
                        .zip(run.instantaneous.iter().zip(&run.pulled_back))
                        .map(|(&x, (i, p))| Row {
                            x,
                            value: (i[0] - p[0]).norm(),
                            bound: None,
                        })
                        .collect();
                    Ok(Outcome {
                        rows,
                        fit: None,
                        verdict: None,
                        details: json!({ "max_error": run.max_error(), "abscissa": "s" }),
                    })
                }
            }
        }
        ExperimentSpec::Lppl {
            perturbation,
            strength,
            observables,
            gap_samples,
        } => {
            let op = perturbation.build(&g)?;
            let obs = observables.iter().map(|o| o.build(&g)).collect::<Result<Vec<_>>>()?;
            let report =
                flow::local_perturbation_experiment(&phi, op, *strength, &cfg.split, cfg.min_gap, &obs, *gap_samples)?;
            let curve = &report.curve;
            let rows = curve
                .x
                .iter()
                .zip(&curve.values)
                .map(|(&x, &value)| Row { x, value, bound: None })
                .collect();
            Ok(Outcome {
                rows,
                fit: optional_fit(curve),
                verdict: None,
                details: json!({ "min_gap_along_path": report.min_gap_seen, "abscissa": "distance" }),
            })
        }
        ExperimentSpec::Cluster { pairs, random_states } => {
            let pairs = pairs
                .iter()
                .map(|(a, b)| Ok((a.build(&g)?, b.build(&g)?)))
                .collect::<Result<Vec<_>>>()?;
            let sd = diagonalize(&phi.assemble_hamiltonian(0.0)?)?;
            let split = split_spectrum(&sd, &cfg.split, cfg.min_gap)?;
            let res = clustering::cluster_experiment(&sd, &split, &g, &space, &pairs, *random_states, cfg.seed)?;
            let rows = res
                .curve
                .x
                .iter()
                .zip(&res.curve.values)
                .map(|(&x, &value)| Row { x, value, bound: None })
                .collect();
            let min_margin = res
                .points
                .iter()
                .map(|p| (p.second_bound - p.max_second).min(p.third_bound - p.max_third))
                .fold(f64::INFINITY, f64::min);
            let identity_holds = res.points.iter().all(|p| p.max_sum_defect <= 1e-10);
            let points: Vec<Value> = res
                .points
                .iter()
                .map(|p| {
                    json!({
                        "distance": p.distance,
                        "beta": p.beta,
                        "correlation": p.max_correlation,
                        "second": p.max_second,
                        "second_bound": p.second_bound,
                        "third": p.max_third,
                        "third_bound": p.third_bound,
                        "sum_defect": p.max_sum_defect,
                    })
                })
                .collect();
            Ok(Outcome {
                rows,
                fit: optional_fit(&res.curve),
                verdict: Some(Verdict {
                    holds: min_margin >= 0.0 && identity_holds,
                    min_margin,
                }),
                details: json!({ "gap": split.gap, "points": points }),
            })
        }
        ExperimentSpec::Qhe {
            beta,
            strip_width,
            phi_grid,
        } => {
            let GraphKind::Torus { lx, ly } = g.kind() else {
                return Err(Error::Config("qhe needs a torus graph".into()));
            };
            let beta = beta.unwrap_or((lx.min(ly) as f64).powf(-0.5));
            let geometry = qhe::ChargeGeometry::new(&g, *strip_width)?;
            let sd = diagonalize(&phi.assemble_hamiltonian(0.0)?)?;
            let split = split_spectrum(&sd, &cfg.split, cfg.min_gap)?;
            let data = qhe::flux_pipeline(&phi, &sd, &split, &geometry, beta)?;
            let q_right = qhe::region_charge(&geometry.right, &space)?;
            let dressed_right = qhe::dressed_charge(&sd, beta, &q_right)?;
            let mut grid = phi_grid.clone();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let rows = grid
                .iter()
                .map(|&angle| {
                    let z = qhe::z_phase_operator(&sd, &split, &data.flux.lower, &dressed_right, angle, &geometry, &space)?;
                    Ok(Row {
                        x: angle,
                        value: z.commutator,
                        bound: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome {
                rows,
                fit: None,
                verdict: None,
                details: json!({
                    "beta": beta,
                    "trace": data.quantization.trace,
                    "integer": data.quantization.integer,
                    "residual": data.quantization.residual,
                    "bare_commutator": data.bare_commutator,
                    "dressed_commutator": data.dressed_commutator,
                    "factorization_residual": data.flux.factorization_residual,
                    "splitting_residual": data.transport.splitting_residual,
                    "trace_defect": data.transport.trace_defect,
                    "strips_disjoint": geometry.strips_disjoint(),
                    "patch_rank": split.rank,
                    "gap": split.gap,
                }),
            })
        }
    }
}
