//! Heisenberg evolution, filtered time averages and Lieb-Robinson bounds.
//!
//! Convention: `τ_{s,t}(A) = U(t,s)* A U(t,s)` with `∂_t U(t,s) = -i H(t) U(t,s)`,
//! so for constant `H`, `τ_t(A) = e^{iHt} A e^{-iHt}`. The group law reads
//! `τ_{s,u} = τ_{s,t} ∘ τ_{t,u}`.

use crate::algebra::{GlobalOperator, LocalOperator, Space};
use crate::error::{Error, Result};
use crate::interaction::{DensePath, Interaction};
use crate::lattice::{volume_constant, Region, SiteGraph};
use crate::linalg::{self, CMat, C64, I};
use crate::spectra::SpectralData;

/// Per unit time, the largest tolerated unitarity defect of a propagator.
pub const UNITARITY_TOL: f64 = 1e-8;

/// How to evolve: from a fixed eigendecomposition, or by integrating the
/// time-dependent Schrödinger equation with a fixed-step RK4 scheme.
#[derive(Debug, Clone, Copy)]
pub enum EvolutionSpec<'a> {
    Spectral(&'a SpectralData),
    TimeDependent { path: &'a DensePath, step: f64 },
}

/// `τ_{s,t}(A)`.
pub fn evolve(spec: EvolutionSpec<'_>, a: &GlobalOperator, s: f64, t: f64) -> Result<GlobalOperator> {
    match spec {
        EvolutionSpec::Spectral(sd) => {
            let dt = t - s;
            if dt == 0.0 {
                sd.to_eigenbasis(a)?;
                return Ok(a.clone());
            }
            sd.apply_kernel(a, |em, en, _, _| (I * (em - en) * dt).exp())
        }
        EvolutionSpec::TimeDependent { path, step } => {
            if a.nrows() != path.dim() {
                return Err(Error::Dimension {
                    expected: path.dim(),
                    found: a.nrows(),
                });
            }
            let u = propagator(path, s, t, step)?;
            Ok(linalg::dagger(&u).dot(a).dot(&u))
        }
    }
}

/// `U(t, s)` by classical RK4 with steps of at most `step`.
pub fn propagator(path: &DensePath, s: f64, t: f64, step: f64) -> Result<CMat> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("integrator step must be positive, got {step}")));
    }
    let n_steps = ((t - s).abs() / step).ceil() as usize;
    let mut u = linalg::eye(path.dim());
    if n_steps == 0 {
        return Ok(u);
    }
    let h = (t - s) / n_steps as f64;
    for k in 0..n_steps {
        let tau = s + h * k as f64;
        u = rk4_step(&|x| path.hamiltonian(x), &u, tau, h);
    }
    check_unitarity(&u, (t - s).abs())?;
    Ok(u)
}

/// One RK4 step of `U' = -i H(τ) U`.
pub(crate) fn rk4_step<F: Fn(f64) -> CMat>(hamiltonian: &F, u: &CMat, tau: f64, h: f64) -> CMat {
    let h0 = hamiltonian(tau);
    let hm = hamiltonian(tau + h / 2.0);
    let h1 = hamiltonian(tau + h);
    rk4_step_with(&h0, &hm, &h1, u, h)
}

/// RK4 step of `U' = -i H U` given `H` at the start, midpoint and end.
pub(crate) fn rk4_step_with(h0: &CMat, hm: &CMat, h1: &CMat, u: &CMat, h: f64) -> CMat {
    let f = |hh: &CMat, x: &CMat| hh.dot(x).mapv(|z| -I * z);
    let half = C64::new(h / 2.0, 0.0);
    let full = C64::new(h, 0.0);
    let k1 = f(h0, u);
    let mut tmp = u.clone();
    tmp.scaled_add(half, &k1);
    let k2 = f(hm, &tmp);
    tmp.assign(u);
    tmp.scaled_add(half, &k2);
    let k3 = f(hm, &tmp);
    tmp.assign(u);
    tmp.scaled_add(full, &k3);
    let k4 = f(h1, &tmp);
    let mut out = u.clone();
    let sixth = C64::new(h / 6.0, 0.0);
    out.scaled_add(sixth, &k1);
    out.scaled_add(sixth * 2.0, &k2);
    out.scaled_add(sixth * 2.0, &k3);
    out.scaled_add(sixth, &k4);
    out
}

pub(crate) fn check_unitarity(u: &CMat, elapsed: f64) -> Result<()> {
    let defect = linalg::unitarity_defect(u);
    let tolerance = UNITARITY_TOL * elapsed.max(1.0);
    if defect > tolerance {
        return Err(Error::IntegratorDrift { defect, tolerance });
    }
    Ok(())
}

/// A real filter function used to average the dynamics over time.
pub trait Filter: Sync {
    fn eval(&self, t: f64) -> f64;
    /// A time `T` with `∫_{|t|>T} |f| <= 1e-10 ∫ |f|`, if known.
    fn truncation(&self) -> Option<f64>;
    /// The time scale on which `f` varies; sets the quadrature density.
    fn time_scale(&self) -> f64;
}

/// Composite Simpson nodes and weights on `[a, b]` with an even number of
/// intervals of width at most `h`.
pub fn simpson_nodes(a: f64, b: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut n = ((b - a) / h).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let dx = (b - a) / n as f64;
    let nodes = (0..=n).map(|k| a + dx * k as f64).collect();
    let weights = (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * dx / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Quadrature step for averaging oscillations up to frequency `omega_max`
/// against a filter of time scale `scale`.
pub fn quadrature_step(scale: f64, omega_max: f64) -> f64 {
    let by_filter = scale / 40.0;
    if omega_max > 0.0 {
        by_filter.min(0.1 / omega_max)
    } else {
        by_filter
    }
}

/// `τ_f(A) = ∫ f(t) τ_t(A) dt` by composite Simpson over `|t| <= T`.
pub fn smear(spec: EvolutionSpec<'_>, f: &dyn Filter, a: &GlobalOperator) -> Result<GlobalOperator> {
    let t_max = f.truncation().ok_or(Error::NoTailBound)?;
    match spec {
        EvolutionSpec::Spectral(sd) => {
            let h = quadrature_step(f.time_scale(), sd.bandwidth());
            let (nodes, weights) = simpson_nodes(-t_max, t_max, h);
            let fw: Vec<f64> = nodes.iter().zip(&weights).map(|(&t, &w)| w * f.eval(t)).collect();
            sd.apply_kernel(a, |em, en, _, _| {
                let omega = em - en;
                nodes
                    .iter()
                    .zip(&fw)
                    .map(|(&t, &w)| (I * omega * t).exp() * w)
                    .sum()
            })
        }
        EvolutionSpec::TimeDependent { path, step } => {
            let omega_max = 2.0 * path.norm_bound(&[0.0])?;
            let h = quadrature_step(f.time_scale(), omega_max);
            let (nodes, weights) = simpson_nodes(-t_max, t_max, h);
            let mid = nodes.len() / 2;
            let mut acc = CMat::zeros(a.raw_dim());
            for dir in [1isize, -1] {
                let mut u = linalg::eye(path.dim());
                let mut k = mid as isize;
                let mut prev = 0.0;
                loop {
                    let t = nodes[k as usize];
                    u = propagate(path, &u, prev, t, step);
                    prev = t;
                    if dir == 1 || k as usize != mid {
                        let w = weights[k as usize] * f.eval(t);
                        let ta = linalg::dagger(&u).dot(a).dot(&u);
                        acc.scaled_add(C64::new(w, 0.0), &ta);
                    }
                    k += dir;
                    if k < 0 || k as usize >= nodes.len() {
                        break;
                    }
                }
                check_unitarity(&u, t_max)?;
            }
            Ok(acc)
        }
    }
}

fn propagate(path: &DensePath, u: &CMat, from: f64, to: f64, step: f64) -> CMat {
    let n = ((to - from).abs() / step).ceil() as usize;
    let mut u = u.clone();
    if n == 0 {
        return u;
    }
    let h = (to - from) / n as f64;
    for k in 0..n {
        u = rk4_step(&|x| path.hamiltonian(x), &u, from + h * k as f64, h);
    }
    u
}

/// Constants of the Lieb-Robinson bound for a pair `b' > b > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrParams {
    pub b: f64,
    pub b_prime: f64,
    /// `‖Φ‖_{b'}`.
    pub interaction_norm: f64,
    /// The volume constant with decay rate `b' - b` and power 1.
    pub volume: f64,
    /// `v = 2 C ‖Φ‖_{b'} / b`.
    pub velocity: f64,
}

impl LrParams {
    pub fn new(b: f64, b_prime: f64, interaction_norm: f64, graph: &SiteGraph) -> Result<Self> {
        if !(b > 0.0) || !(b_prime > b) {
            return Err(Error::InvalidParameter(format!(
                "Lieb-Robinson parameters need b' > b > 0, got b = {b}, b' = {b_prime}"
            )));
        }
        if !(interaction_norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lieb-Robinson velocity needs a nonzero interaction, got norm {interaction_norm}"
            )));
        }
        let volume = volume_constant(b_prime - b, 1.0, graph.dimension(), graph.c_vol())?;
        Ok(LrParams {
            b,
            b_prime,
            interaction_norm,
            volume,
            velocity: 2.0 * volume * interaction_norm / b,
        })
    }

    pub fn for_interaction(b: f64, b_prime: f64, phi: &Interaction) -> Result<Self> {
        LrParams::new(b, b_prime, phi.default_norm(b_prime)?, phi.graph())
    }
}

/// `min{Σ_{x∈X} e^{-b d(x,Y)}, Σ_{y∈Y} e^{-b d(y,X)}}`.
pub fn separation_weight(g: &SiteGraph, x: &Region, y: &Region, b: f64) -> f64 {
    let one_side = |from: &Region, to: &Region| {
        from.sites()
            .iter()
            .map(|&s| (-b * g.distance_to(s, to) as f64).exp())
            .sum::<f64>()
    };
    one_side(x, y).min(one_side(y, x))
}

/// Right-hand side of the Lieb-Robinson bound for `‖[τ_{s,t}(A), B]‖`.
pub fn lr_bound(
    params: &LrParams,
    g: &SiteGraph,
    x: &Region,
    y: &Region,
    norm_a: f64,
    norm_b: f64,
    elapsed: f64,
) -> Result<f64> {
    if !x.is_disjoint(y) {
        return Err(Error::Overlap);
    }
    let growth = (params.b * params.velocity * elapsed.abs()).exp_m1();
    Ok(2.0 / params.volume * norm_a * norm_b * growth * separation_weight(g, x, y, params.b))
}

#[derive(Debug, Clone)]
pub struct LrReport {
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    pub bound: Vec<f64>,
    /// Smallest `bound / measured` over points with a nonzero measurement.
    pub min_ratio: f64,
}

impl LrReport {
    pub fn holds(&self) -> bool {
        self.measured.iter().zip(&self.bound).all(|(m, b)| m <= b)
    }
}

/// Measures `‖[τ_t(A), B]‖` on a time grid and compares with [`lr_bound`].
pub fn lr_experiment(
    sd: &SpectralData,
    space: &Space,
    g: &SiteGraph,
    a: &LocalOperator,
    b: &LocalOperator,
    times: &[f64],
    params: &LrParams,
) -> Result<LrReport> {
    let x = Region::new(g, a.support().iter().copied())?;
    let y = Region::new(g, b.support().iter().copied())?;
    if !x.is_disjoint(&y) {
        return Err(Error::Overlap);
    }
    let (na, nb) = (a.norm()?, b.norm()?);
    let ga = crate::algebra::embed(a, space)?;
    let gb = crate::algebra::embed(b, space)?;
    let a_eig = sd.to_eigenbasis(&ga)?;
    let e = sd.energies();
    let mut measured = Vec::with_capacity(times.len());
    let mut bound = Vec::with_capacity(times.len());
    for &t in times {
        // τ_0 is the identity; skip the basis round trip so t = 0 stays exact.
        let at = if t == 0.0 {
            ga.clone()
        } else {
            let mut m = a_eig.clone();
            for ((mu, nu), z) in m.indexed_iter_mut() {
                *z *= (I * (e[mu] - e[nu]) * t).exp();
            }
            sd.from_eigenbasis(&m)
        };
        measured.push(linalg::operator_norm(&linalg::commutator(&at, &gb))?);
        bound.push(lr_bound(params, g, &x, &y, na, nb, t)?);
    }
    let min_ratio = measured
        .iter()
        .zip(&bound)
        .filter(|(m, _)| **m > 1e-14)
        .map(|(m, b)| b / m)
        .fold(f64::INFINITY, f64::min);
    Ok(LrReport {
        times: times.to_vec(),
        measured,
        bound,
        min_ratio,
    })
}
