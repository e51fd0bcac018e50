//! Spectral flows along interaction paths: exact, Gaussian-filtered and
//! distance-modulated generators, their integration, generator
//! localization, and the two flow experiments.

use std::collections::BTreeMap;
use std::f64::consts::E;

use rayon::prelude::*;

use crate::algebra::{self, GlobalOperator, LocalOperator, Space};
use crate::dynamics::{self, LrParams};
use crate::error::{Error, Result};
use crate::filtering::{almost_inverse_liouvillian, exact_inverse_liouvillian, Method};
use crate::harness::{Abscissa, DecayCurve, DEFAULT_FLOOR, FLOW_FLOOR};
use crate::interaction::{self, CoeffPath, Interaction};
use crate::lattice::{fatten, Region, SiteGraph};
use crate::linalg::{self, CMat, C64};
use crate::spectra::{self, diagonalize, split_spectrum, SpectralData, SpectralSplit, SplitRule};

/// Hermiticity tolerance for generators, relative to the largest entry.
const HERMITICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// `K(s) = I_{H(s)}(Ḣ(s))`.
    Exact,
    /// `K(s) = I_{H(s),β}(Ḣ(s))`.
    Almost { beta: f64 },
    /// `K(s) = Σ_Z I_{H(s),β_{X,Z}}(Φ̇(s, Z))` with widths from [`modulated_width`].
    Modulated { beta: f64, x: Region, ell: f64 },
}

/// `β_{X,Z}` from `1/β_{X,Z}² = 1/β² + 1_{d ≥ ℓ}·d`, `d = d(X, Z)`.
pub fn modulated_width(beta: f64, d: f64, ell: f64) -> f64 {
    if d >= ell {
        (1.0 / (beta * beta) + d).powf(-0.5)
    } else {
        beta
    }
}

/// A generator evaluator along an interaction path.
#[derive(Debug, Clone)]
pub struct FlowGenerator<'a> {
    path: &'a Interaction,
    kind: GeneratorKind,
    rule: SplitRule,
    min_gap: f64,
}

/// The spectral data at `s` together with `K(s)`.
#[derive(Debug, Clone)]
pub struct GeneratorSample {
    pub spectral: SpectralData,
    pub split: SpectralSplit,
    pub generator: GlobalOperator,
}

impl<'a> FlowGenerator<'a> {
    pub fn new(path: &'a Interaction, kind: GeneratorKind, rule: SplitRule, min_gap: f64) -> Result<Self> {
        match &kind {
            GeneratorKind::Exact => {}
            GeneratorKind::Almost { beta } | GeneratorKind::Modulated { beta, .. } if !(*beta > 0.0) => {
                return Err(Error::InvalidParameter(format!("flow width must be positive, got {beta}")));
            }
            GeneratorKind::Modulated { ell, .. } if !(*ell >= 0.0) => {
                return Err(Error::InvalidParameter(format!("cutoff length must be nonnegative, got {ell}")));
            }
            _ => {}
        }
        Ok(FlowGenerator {
            path,
            kind,
            rule,
            min_gap,
        })
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn path(&self) -> &Interaction {
        self.path
    }

    pub fn sample(&self, s: f64) -> Result<GeneratorSample> {
        let sd = diagonalize(&self.path.assemble_hamiltonian(s)?)?;
        let split = split_spectrum(&sd, &self.rule, self.min_gap)?;
        let k = match &self.kind {
            GeneratorKind::Exact => exact_inverse_liouvillian(&sd, &split, &self.path.assemble_derivative(s)?)?,
            GeneratorKind::Almost { beta } => {
                almost_inverse_liouvillian(&sd, *beta, &self.path.assemble_derivative(s)?, Method::Spectral)?
            }
            GeneratorKind::Modulated { beta, x, ell } => self.modulated(&sd, s, *beta, x, *ell)?,
        };
        let defect = linalg::hermiticity_defect(&k);
        if defect > HERMITICITY_TOL * linalg::max_abs(&k).max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(GeneratorSample {
            spectral: sd,
            split,
            generator: linalg::hermitian_part(&k),
        })
    }

    fn modulated(&self, sd: &SpectralData, s: f64, beta: f64, x: &Region, ell: f64) -> Result<GlobalOperator> {
        let space = self.path.space();
        let g = self.path.graph();
        let mut by_width: BTreeMap<u64, CMat> = BTreeMap::new();
        for term in self.path.derivative_snapshot(s) {
            let z = Region::new(g, term.support().iter().copied())?;
            let width = modulated_width(beta, g.distance_between(x, &z) as f64, ell);
            let acc = by_width
                .entry(width.to_bits())
                .or_insert_with(|| CMat::zeros((space.dim(), space.dim())));
            algebra::embed_into(acc, &term, C64::new(1.0, 0.0), &space)?;
        }
        let mut k = CMat::zeros((space.dim(), space.dim()));
        for (bits, part) in by_width {
            k += &almost_inverse_liouvillian(sd, f64::from_bits(bits), &part, Method::Spectral)?;
        }
        Ok(k)
    }
}

/// `K(s)` for a single `s`.
pub fn make_generator(path: &Interaction, kind: GeneratorKind, rule: &SplitRule, min_gap: f64, s: f64) -> Result<GlobalOperator> {
    Ok(FlowGenerator::new(path, kind, rule.clone(), min_gap)?.sample(s)?.generator)
}

/// Result of integrating `V' = i K(s) V` over a grid.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub s_grid: Vec<f64>,
    /// `α_{0,s}(A_j) = V(s)* A_j V(s)`, indexed `[grid point][observable]`.
    pub transported: Vec<Vec<GlobalOperator>>,
    /// `ω_s(A_j)` in the instantaneous patch state.
    pub instantaneous: Vec<Vec<C64>>,
    /// `ω_0(α_{0,s}(A_j))`.
    pub pulled_back: Vec<Vec<C64>>,
}

impl FlowRun {
    /// `max_s |ω_s(A_j) - ω_0(α_{0,s}(A_j))|` per observable.
    pub fn intertwining_errors(&self) -> Vec<f64> {
        let n_obs = self.instantaneous.first().map_or(0, Vec::len);
        (0..n_obs)
            .map(|j| {
                self.instantaneous
                    .iter()
                    .zip(&self.pulled_back)
                    .map(|(a, b)| (a[j] - b[j]).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn max_error(&self) -> f64 {
        self.intertwining_errors().into_iter().fold(0.0, f64::max)
    }
}

/// `steps + 1` equally spaced points on `[0, s_end]`.
pub fn uniform_grid(s_end: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| s_end * k as f64 / steps as f64).collect()
}

/// Integrates the flow with RK4 on the given grid, evaluating `K` at the
/// grid points and interval midpoints.
pub fn integrate_flow(gen: &FlowGenerator<'_>, s_grid: &[f64], observables: &[GlobalOperator]) -> Result<FlowRun> {
    if s_grid.is_empty() {
        return Err(Error::InvalidParameter("flow grid is empty".into()));
    }
    if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("flow grid must be strictly increasing".into()));
    }
    let space = gen.path().space();
    for a in observables {
        space.check(a)?;
    }
    let first = gen.sample(s_grid[0])?;
    let (sd0, split0) = (first.spectral.clone(), first.split.clone());
    let mut v = space.identity();
    let mut current = first;
    let mut run = FlowRun {
        s_grid: s_grid.to_vec(),
        transported: Vec::with_capacity(s_grid.len()),
        instantaneous: Vec::with_capacity(s_grid.len()),
        pulled_back: Vec::with_capacity(s_grid.len()),
    };
    let mut record = |v: &CMat, sample: &GeneratorSample| -> Result<()> {
        let vd = linalg::dagger(v);
        let mut transported = Vec::with_capacity(observables.len());
        let mut inst = Vec::with_capacity(observables.len());
        let mut back = Vec::with_capacity(observables.len());
        for a in observables {
            let alpha = vd.dot(a).dot(v);
            inst.push(spectra::patch_expectation(&sample.spectral, &sample.split, a)?);
            back.push(spectra::patch_expectation(&sd0, &split0, &alpha)?);
            transported.push(alpha);
        }
        run.transported.push(transported);
        run.instantaneous.push(inst);
        run.pulled_back.push(back);
        Ok(())
    };
    record(&v, &current)?;
    for w in s_grid.windows(2) {
        let h = w[1] - w[0];
        let mid = gen.sample(w[0] + h / 2.0)?;
        let next = gen.sample(w[1])?;
        v = dynamics::rk4_step_with(
            &(-&current.generator),
            &(-&mid.generator),
            &(-&next.generator),
            &v,
            h,
        );
        record(&v, &next)?;
        current = next;
    }
    dynamics::check_unitarity(&v, s_grid[s_grid.len() - 1] - s_grid[0])?;
    Ok(run)
}

/// The widest filter for which the almost-flow estimate applies,
/// `min{1, √(2b)·v}`.
pub fn admissible_width(params: &LrParams) -> f64 {
    ((2.0 * params.b).sqrt() * params.velocity).min(1.0)
}

/// Intertwining error of the almost flow as a function of `β^{-2}`.
#[allow(clippy::too_many_arguments)]
pub fn automorphic_equivalence_experiment(
    path: &Interaction,
    rule: &SplitRule,
    min_gap: f64,
    a: &GlobalOperator,
    beta_grid: &[f64],
    s_end: f64,
    steps: usize,
    window: Option<&LrParams>,
) -> Result<DecayCurve> {
    if let Some(params) = window {
        let limit = admissible_width(params);
        if let Some(&beta) = beta_grid.iter().find(|&&b| !(b < limit)) {
            return Err(Error::InvalidParameter(format!(
                "filter width {beta} is outside the admissible window (below {limit:.4})"
            )));
        }
    }
    let grid = uniform_grid(s_end, steps);
    let samples = beta_grid
        .par_iter()
        .map(|&beta| {
            let gen = FlowGenerator::new(path, GeneratorKind::Almost { beta }, rule.clone(), min_gap)?;
            let run = integrate_flow(&gen, &grid, std::slice::from_ref(a))?;
            Ok((beta.powi(-2), run.max_error()))
        })
        .collect::<Result<Vec<_>>>()?;
    DecayCurve::from_unsorted(Abscissa::InverseBetaSquared, samples, FLOW_FLOOR)
}

/// Local observables whose ground-state response is measured.
#[derive(Debug, Clone)]
pub struct LocalPerturbationReport {
    pub curve: DecayCurve,
    /// Smallest gap seen along the path.
    pub min_gap_seen: f64,
}

/// `|ω_1(A) - ω_0(A)|` as a function of `d(supp A, supp perturbation)`,
/// where `ω_s` is the patch state of `H + s·strength·op`.
#[allow(clippy::too_many_arguments)]
pub fn local_perturbation_experiment(
    base: &Interaction,
    op: LocalOperator,
    strength: f64,
    rule: &SplitRule,
    min_gap: f64,
    observables: &[LocalOperator],
    gap_samples: usize,
) -> Result<LocalPerturbationReport> {
    let g = base.graph();
    let pert_region = Region::new(g, op.support().iter().copied())?;
    let phi = interaction::local_perturbation(base, op, CoeffPath::linear(0.0, strength))?;
    let space = phi.space();
    let distances = observables
        .iter()
        .map(|a| Ok(g.distance_between(&Region::new(g, a.support().iter().copied())?, &pert_region)))
        .collect::<Result<Vec<_>>>()?;

    let endpoint = |s: f64| -> Result<(Vec<C64>, SpectralSplit)> {
        let sd = diagonalize(&phi.assemble_hamiltonian(s)?)?;
        let split = split_spectrum(&sd, rule, min_gap)?;
        let values = observables
            .iter()
            .map(|a| spectra::patch_local_expectation(&sd, &split, a, &space))
            .collect::<Result<Vec<_>>>()?;
        Ok((values, split))
    };
    let (before, split0) = endpoint(0.0)?;
    let mut min_gap_seen = split0.gap;
    for k in 1..=gap_samples {
        let s = k as f64 / (gap_samples + 1) as f64;
        let e = linalg::eigvalsh(&phi.assemble_hamiltonian(s)?)?;
        let gap = e[split0.rank] - e[split0.rank - 1];
        if gap < min_gap {
            return Err(Error::GapTooSmall { gap, min_gap });
        }
        min_gap_seen = min_gap_seen.min(gap);
    }
    let (after, split1) = endpoint(1.0)?;
    if split1.rank != split0.rank {
        return Err(Error::Assumption(format!(
            "patch rank changes along the path ({} to {})",
            split0.rank, split1.rank
        )));
    }
    min_gap_seen = min_gap_seen.min(split1.gap);

    let mut by_distance: BTreeMap<usize, f64> = BTreeMap::new();
    for ((d, b), a) in distances.iter().zip(&before).zip(&after) {
        let e = by_distance.entry(*d).or_insert(0.0);
        *e = e.max((a - b).norm());
    }
    let curve = DecayCurve::from_unsorted(
        Abscissa::Distance,
        by_distance.into_iter().map(|(d, v)| (d as f64, v)).collect(),
        DEFAULT_FLOOR,
    )?;
    Ok(LocalPerturbationReport { curve, min_gap_seen })
}

/// The terms `Ψ_β(Z)` of a localized generator.
#[derive(Debug, Clone)]
pub struct LocalizedGenerator {
    pub pieces: Vec<(Region, GlobalOperator)>,
    /// `‖Δ_k‖` for each input term, `k = 0, 1, ...`.
    pub shell_norms: Vec<Vec<f64>>,
}

impl LocalizedGenerator {
    /// `Σ_Z Ψ_β(Z)`.
    pub fn resum(&self, dim: usize) -> GlobalOperator {
        let mut acc = CMat::zeros((dim, dim));
        for (_, p) in &self.pieces {
            acc += p;
        }
        acc
    }

    /// Largest `‖Δ_k‖` over the input terms, per shell `k`.
    pub fn max_shell_norms(&self) -> Vec<f64> {
        let depth = self.shell_norms.iter().map(Vec::len).max().unwrap_or(0);
        (0..depth)
            .map(|k| {
                self.shell_norms
                    .iter()
                    .filter_map(|n| n.get(k))
                    .fold(0.0, |m: f64, &x| m.max(x))
            })
            .collect()
    }
}

/// Splits `I_{H,β}(Σ terms)` into pieces supported on fattened supports
/// `Ω_k`: `Δ_0 = E_{Ω_0}(I_β(term))`, `Δ_k = E_{Ω_k}(I_β(term)) - E_{Ω_{k-1}}(I_β(term))`.
pub fn localize_generator(
    sd: &SpectralData,
    beta: f64,
    terms: &[LocalOperator],
    g: &SiteGraph,
    space: &Space,
) -> Result<LocalizedGenerator> {
    let mut pieces: BTreeMap<Vec<usize>, GlobalOperator> = BTreeMap::new();
    let mut shell_norms = Vec::with_capacity(terms.len());
    for term in terms {
        let full = almost_inverse_liouvillian(sd, beta, &algebra::embed(term, space)?, Method::Spectral)?;
        let support = Region::new(g, term.support().iter().copied())?;
        let mut norms = Vec::new();
        let mut previous: Option<GlobalOperator> = None;
        for k in 0.. {
            let region = fatten(g, &support, k)?;
            let whole = region.len() == g.n_sites();
            let current = if whole {
                full.clone()
            } else {
                algebra::conditional_expectation(&full, &region, space)?
            };
            let delta = match previous.take() {
                Some(p) => &current - &p,
                None => current.clone(),
            };
            norms.push(linalg::operator_norm(&delta)?);
            let slot = pieces
                .entry(region.sites().to_vec())
                .or_insert_with(|| CMat::zeros(delta.raw_dim()));
            *slot += &delta;
            if whole {
                break;
            }
            previous = Some(current);
        }
        shell_norms.push(norms);
    }
    let pieces = pieces
        .into_iter()
        .map(|(sites, op)| Ok((Region::new(g, sites)?, op)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalizedGenerator { pieces, shell_norms })
}

/// `sup_{r>0} r^p e^{-c r} = (p/e)^p c^{-p}`.
pub fn sup_poly_exp(p: f64, c: f64) -> Result<f64> {
    if !(p > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter(format!("need p, c > 0, got p = {p}, c = {c}")));
    }
    Ok((p / E).powf(p) * c.powf(-p))
}

/// `(e^c / c)·e^{-c⌈L⌉}`, an upper bound for `Σ_{n ≥ L} e^{-c n}`.
pub fn tail_geom(c: f64, l: f64) -> Result<f64> {
    if !(c > 0.0) || !(l >= 0.0) {
        return Err(Error::InvalidParameter(format!("need c > 0 and L >= 0, got c = {c}, L = {l}")));
    }
    Ok(c.exp() / c * (-c * l.ceil()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::pauli;
    use crate::interaction::tfim;
    use crate::lattice::build_chain;
    use crate::linalg::{ONE, ZERO};
    use ndarray::array;

    fn tfim_path(n: usize) -> Interaction {
        let g = build_chain(n, false).unwrap();
        tfim(&g, CoeffPath::constant(1.0), CoeffPath::linear(2.0, 3.0)).unwrap()
    }

    fn site_op(letters: &str, sites: &[usize], space: &Space) -> GlobalOperator {
        algebra::embed(&pauli::string(letters, sites).unwrap(), space).unwrap()
    }

    #[test]
    fn constant_path_has_zero_generator() {
        let g = build_chain(4, false).unwrap();
        let phi = tfim(&g, CoeffPath::constant(1.0), CoeffPath::constant(2.0)).unwrap();
        let rule = SplitRule::LowestK { k: 1 };
        for kind in [GeneratorKind::Exact, GeneratorKind::Almost { beta: 0.5 }] {
            let k = make_generator(&phi, kind, &rule, 0.0, 0.3).unwrap();
            assert_eq!(linalg::max_abs(&k), 0.0);
        }
        let gen = FlowGenerator::new(&phi, GeneratorKind::Exact, rule, 0.0).unwrap();
        let a = site_op("X", &[1], &phi.space());
        let run = integrate_flow(&gen, &uniform_grid(1.0, 5), std::slice::from_ref(&a)).unwrap();
        for t in &run.transported {
            assert!(linalg::max_abs(&(&t[0] - &a)) < 1e-14);
        }
    }

    #[test]
    fn commuting_derivative_gives_zero_almost_generator() {
        let g = build_chain(4, false).unwrap();
        let phi = tfim(&g, CoeffPath::linear(1.0, 2.0), CoeffPath::constant(0.0)).unwrap();
        let k = make_generator(&phi, GeneratorKind::Almost { beta: 0.7 }, &SplitRule::LowestK { k: 2 }, 0.0, 0.5).unwrap();
        assert!(linalg::max_abs(&k) < 1e-12);
    }

    #[test]
    fn two_level_generator_closed_form() {
        // H(s) = diag(0, 1) + s σx / 10 at s = 0: Ḣ = σx / 10.
        let g = build_chain(1, false).unwrap();
        let mut phi = Interaction::new(&g, 2);
        let z_part = array![[ZERO, ZERO], [ZERO, ONE]];
        phi.push(LocalOperator::qubit(vec![0], z_part).unwrap(), CoeffPath::constant(1.0)).unwrap();
        phi.push(LocalOperator::qubit(vec![0], pauli::x()).unwrap(), CoeffPath::linear(0.0, 0.1)).unwrap();
        let rule = SplitRule::LowestK { k: 1 };
        let exact = make_generator(&phi, GeneratorKind::Exact, &rule, 0.0, 0.0).unwrap();
        // (μ, ν) = (0, 1): i/(0 - 1)·0.1; (1, 0): i/(1 - 0)·0.1.
        assert!((exact[[0, 1]] - C64::new(0.0, -0.1)).norm() < 1e-15);
        assert!((exact[[1, 0]] - C64::new(0.0, 0.1)).norm() < 1e-15);
        let beta = 0.6;
        let almost = make_generator(&phi, GeneratorKind::Almost { beta }, &rule, 0.0, 0.0).unwrap();
        let damp = 1.0 - (-1.0 / (4.0 * beta * beta)).exp();
        assert!((almost[[1, 0]] - C64::new(0.0, 0.1 * damp)).norm() < 1e-15);
    }

    #[test]
    fn exact_flow_intertwines_ground_states() {
        let phi = tfim_path(4);
        let space = phi.space();
        let gen = FlowGenerator::new(&phi, GeneratorKind::Exact, SplitRule::LowestK { k: 1 }, 0.1).unwrap();
        let obs = [site_op("Z", &[1], &space), site_op("X", &[2], &space), site_op("XX", &[0, 1], &space)];
        let run = integrate_flow(&gen, &uniform_grid(1.0, 40), &obs).unwrap();
        assert!(run.max_error() < 1e-8, "{:?}", run.intertwining_errors());
        // The check is not vacuous: the ground-state expectation moves.
        let moved = run.instantaneous.last().unwrap()[1] - run.instantaneous[0][1];
        assert!(moved.norm() > 1e-3);
    }

    #[test]
    fn modulation_reduces_to_almost_beyond_diameter() {
        let phi = tfim_path(4);
        let g = phi.graph();
        let x = Region::new(g, [0]).unwrap();
        let rule = SplitRule::LowestK { k: 1 };
        let almost = make_generator(&phi, GeneratorKind::Almost { beta: 0.8 }, &rule, 0.0, 0.4).unwrap();
        let ell = g.diameter() as f64 + 1.0;
        let modulated = make_generator(&phi, GeneratorKind::Modulated { beta: 0.8, x, ell }, &rule, 0.0, 0.4).unwrap();
        assert!(linalg::max_abs(&(almost - modulated)) < 1e-12);
        assert_eq!(modulated_width(0.8, 2.0, 3.0), 0.8);
        assert!(modulated_width(0.8, 3.0, 3.0) < 0.8);
    }

    #[test]
    fn localization_resums() {
        let phi = tfim_path(5);
        let sd = diagonalize(&phi.assemble_hamiltonian(0.0).unwrap()).unwrap();
        let terms = phi.derivative_snapshot(0.0);
        let loc = localize_generator(&sd, 0.7, &terms, phi.graph(), &phi.space()).unwrap();
        let direct = almost_inverse_liouvillian(&sd, 0.7, &phi.assemble_derivative(0.0).unwrap(), Method::Spectral).unwrap();
        assert!(linalg::max_abs(&(loc.resum(sd.dim()) - direct)) < 1e-10);
        for (z, p) in &loc.pieces {
            let e = algebra::conditional_expectation(p, z, &phi.space()).unwrap();
            assert!(linalg::max_abs(&(e - p)) < 1e-12);
        }
    }

    #[test]
    fn helper_bounds() {
        assert!((sup_poly_exp(1.0, 1.0).unwrap() - 1.0 / E).abs() < 1e-15);
        let scan = (1..10_000).map(|k| {
            let r = k as f64 * 1e-3;
            r * (-r).exp()
        });
        assert!(scan.fold(0.0, f64::max) <= sup_poly_exp(1.0, 1.0).unwrap());
        let geo = (-3.0f64).exp() / (1.0 - (-1.0f64).exp());
        assert!(tail_geom(1.0, 3.0).unwrap() >= geo);
        let full = 1.0 / (1.0 - (-0.4f64).exp());
        assert!(tail_geom(0.4, 0.0).unwrap() >= full);
        assert!(sup_poly_exp(0.0, 1.0).is_err());
        assert!(tail_geom(-1.0, 1.0).is_err());
    }
}
