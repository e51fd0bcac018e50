//! Ground-state correlation decay across a spectral gap and the three-term
//! decomposition built from the erf-step map.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{LocalOperator, Space};
use crate::error::{Error, Result};
use crate::filtering::erf_step;
use crate::harness::{Abscissa, DecayCurve, DEFAULT_FLOOR};
use crate::lattice::{Region, SiteGraph};
use crate::linalg::{self, CVec, C64, ZERO};
use crate::spectra::{SpectralData, SpectralSplit};

/// Tolerance for `Ω ∈ Ran P` and `‖Ω‖ = 1`.
const STATE_TOL: f64 = 1e-10;

/// The three terms of the decomposition and the correlation they sum to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationTerms {
    /// `⟨Ω, [J(A), B] Ω⟩`.
    pub first: C64,
    /// `⟨Ω, B J(A) Ω⟩`.
    pub second: C64,
    /// `⟨Ω, (P A P^⊥ - P J(A)) B P Ω⟩`.
    pub third: C64,
    /// `⟨Ω, A B Ω⟩ - ⟨Ω, A P B Ω⟩`, computed directly.
    pub correlation: C64,
}

impl CorrelationTerms {
    pub fn sum(&self) -> C64 {
        self.first + self.second + self.third
    }

    pub fn sum_defect(&self) -> f64 {
        (self.sum() - self.correlation).norm()
    }
}

fn adjoint(a: &LocalOperator) -> Result<LocalOperator> {
    LocalOperator::new(a.support().to_vec(), linalg::dagger(a.matrix()), a.q())
}

/// Decomposes the correlation of `A` and `B` in `Ω ∈ Ran P` with the
/// erf-step map at width `beta`, using matrix-vector products only.
pub fn decompose_correlation(
    sd: &SpectralData,
    split: &SpectralSplit,
    beta: f64,
    a: &LocalOperator,
    b: &LocalOperator,
    omega: &CVec,
    space: &Space,
) -> Result<CorrelationTerms> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("filter width must be positive, got {beta}")));
    }
    if omega.len() != sd.dim() {
        return Err(Error::Dimension {
            expected: sd.dim(),
            found: omega.len(),
        });
    }
    let basis = sd.basis();
    let e = sd.energies();
    let gamma = split.gap;
    let omega_e = basis.vec_to_eigenbasis(omega);
    let outside = split
        .sigma1
        .iter()
        .map(|&k| omega_e[k].norm_sqr())
        .sum::<f64>()
        .sqrt();
    if outside > STATE_TOL || (linalg::vec_norm(omega) - 1.0).abs() > STATE_TOL {
        return Err(Error::NotInRange { residual: outside });
    }
    let a_dag = adjoint(a)?;
    let b_dag = adjoint(b)?;

    // J(A)Ω and J(A)†Ω in eigen-coordinates; only columns or rows of Â
    // indexed by σ₀ are needed since Ω lives there.
    let n = sd.dim();
    let mut j_omega = CVec::zeros(n);
    let mut j_dag_omega = CVec::zeros(n);
    for &p in &split.sigma0 {
        let c = omega_e[p];
        if c == ZERO {
            continue;
        }
        let v = sd.eigenvector(p);
        let col = basis.vec_to_eigenbasis(&a.apply_to_vector(space, &v)?);
        let row_conj = basis.vec_to_eigenbasis(&a_dag.apply_to_vector(space, &v)?);
        for k in 0..n {
            j_omega[k] += erf_step(e[p] - e[k], gamma, beta) * col[k] * c;
            j_dag_omega[k] += erf_step(e[k] - e[p], gamma, beta) * row_conj[k] * c;
        }
    }
    let b_omega = b.apply_to_vector(space, omega)?;
    let u_e = basis.vec_to_eigenbasis(&b_omega);
    let b_dag_omega_e = basis.vec_to_eigenbasis(&b_dag.apply_to_vector(space, omega)?);
    let a_dag_omega = a_dag.apply_to_vector(space, omega)?;
    let a_dag_omega_e = basis.vec_to_eigenbasis(&a_dag_omega);

    let j_b = linalg::inner(&j_dag_omega, &u_e);
    let b_j = linalg::inner(&b_dag_omega_e, &j_omega);
    let across: C64 = split.sigma1.iter().map(|&k| a_dag_omega_e[k].conj() * u_e[k]).sum();
    let within: C64 = split.sigma0.iter().map(|&k| a_dag_omega_e[k].conj() * u_e[k]).sum();
    Ok(CorrelationTerms {
        first: j_b - b_j,
        second: b_j,
        third: across - j_b,
        correlation: linalg::inner(&a_dag_omega, &b_omega) - within,
    })
}

/// `(4|σ₀|/√π)(β/γ) e^{-(γ/β)²/64} ‖A‖‖B‖`.
pub fn second_term_bound(distinct: usize, beta: f64, gamma: f64, norm_a: f64, norm_b: f64) -> f64 {
    4.0 * distinct as f64 / PI.sqrt() * (beta / gamma) * (-(gamma / beta).powi(2) / 64.0).exp() * norm_a * norm_b
}

/// `(6|σ₀|/√π)(β/γ) e^{-(γ/β)²/64} ‖A‖‖B‖`.
pub fn third_term_bound(distinct: usize, beta: f64, gamma: f64, norm_a: f64, norm_b: f64) -> f64 {
    1.5 * second_term_bound(distinct, beta, gamma, norm_a, norm_b)
}

/// `β = γ / (2√d)`.
pub fn clustering_width(gamma: f64, d: usize) -> f64 {
    gamma / (2.0 * (d as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPoint {
    pub distance: usize,
    pub beta: f64,
    /// Terms for the lowest patch eigenvector.
    pub ground: CorrelationTerms,
    /// Largest `|correlation|` over the lowest eigenvector and the random
    /// patch states.
    pub max_correlation: f64,
    /// Largest `|II|` and `|III|` over the same states.
    pub max_second: f64,
    pub max_third: f64,
    /// Largest `|correlation| - (|I| + |II| + |III|)`.
    pub triangle_excess: f64,
    /// Largest sum defect over the states.
    pub max_sum_defect: f64,
    pub second_bound: f64,
    pub third_bound: f64,
}

impl ClusterPoint {
    pub fn bounds_hold(&self) -> bool {
        self.max_second <= self.second_bound && self.max_third <= self.third_bound
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub points: Vec<ClusterPoint>,
    /// Largest correlation per distance.
    pub curve: DecayCurve,
}

/// `n` random unit vectors in `Ran P`.
pub fn random_patch_states(sd: &SpectralData, split: &SpectralSplit, n: usize, seed: u64) -> Vec<CVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut coeffs = CVec::zeros(sd.dim());
            for &k in &split.sigma0 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                coeffs[k] = C64::new(re, im);
            }
            let norm = linalg::vec_norm(&coeffs);
            sd.basis().vec_from_eigenbasis(&coeffs.mapv(|z| z / norm))
        })
        .collect()
}

/// Correlations of `(A, B)` pairs in the lowest patch eigenvector and in
/// `n_random` random patch states, with `β = γ/(2√d)` per pair.
pub fn cluster_experiment(
    sd: &SpectralData,
    split: &SpectralSplit,
    g: &SiteGraph,
    space: &Space,
    pairs: &[(LocalOperator, LocalOperator)],
    n_random: usize,
    seed: u64,
) -> Result<ClusterResult> {
    split.check_isolated_below()?;
    let mut states = vec![sd.eigenvector(split.sigma0[0])];
    states.extend(random_patch_states(sd, split, n_random, seed));
    let mut points = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let x = Region::new(g, a.support().iter().copied())?;
        let y = Region::new(g, b.support().iter().copied())?;
        if !x.is_disjoint(&y) {
            return Err(Error::Overlap);
        }
        let d = g.distance_between(&x, &y);
        let beta = clustering_width(split.gap, d);
        let (na, nb) = (a.norm()?, b.norm()?);
        let mut point = ClusterPoint {
            distance: d,
            beta,
            ground: CorrelationTerms {
                first: ZERO,
                second: ZERO,
                third: ZERO,
                correlation: ZERO,
            },
            max_correlation: 0.0,
            max_second: 0.0,
            max_third: 0.0,
            triangle_excess: f64::NEG_INFINITY,
            max_sum_defect: 0.0,
            second_bound: second_term_bound(split.distinct, beta, split.gap, na, nb),
            third_bound: third_term_bound(split.distinct, beta, split.gap, na, nb),
        };
        for (i, omega) in states.iter().enumerate() {
            let t = decompose_correlation(sd, split, beta, a, b, omega, space)?;
            if i == 0 {
                point.ground = t;
            }
            point.max_correlation = point.max_correlation.max(t.correlation.norm());
            point.max_second = point.max_second.max(t.second.norm());
            point.max_third = point.max_third.max(t.third.norm());
            point.max_sum_defect = point.max_sum_defect.max(t.sum_defect());
            let excess = t.correlation.norm() - (t.first.norm() + t.second.norm() + t.third.norm());
            point.triangle_excess = point.triangle_excess.max(excess);
        }
        points.push(point);
    }
    let mut by_distance: BTreeMap<usize, f64> = BTreeMap::new();
    for p in &points {
        let e = by_distance.entry(p.distance).or_insert(0.0);
        *e = e.max(p.max_correlation);
    }
    let curve = DecayCurve::new(
        Abscissa::Distance,
        by_distance.keys().map(|&d| d as f64).collect(),
        by_distance.values().copied().collect(),
        DEFAULT_FLOOR,
    )?;
    Ok(ClusterResult { points, curve })
}
