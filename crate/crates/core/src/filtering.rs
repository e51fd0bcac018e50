//! The Gaussian filter and the spectral maps built from it: the almost
//! inverse Liouvillian, the exact inverse Liouvillian on cross-patch blocks,
//! and the erf-step map used for correlation estimates.

use std::f64::consts::PI;

use crate::algebra::{self, GlobalOperator};
use crate::dynamics::{self, Filter, LrParams};
use crate::error::{Error, Result};
use crate::lattice::{Region, SiteGraph};
use crate::linalg::{self, CMat, C64, I, ZERO};
use crate::spectra::{SpectralData, SpectralSplit};

/// `φ_β(t) = (β/√π) e^{-β²t²}`, a unit-mass Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFilter {
    beta: f64,
}

impl GaussianFilter {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("filter width must be positive, got {beta}")));
        }
        Ok(GaussianFilter { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `(2π)^{-1/2} ∫ φ_β(t) e^{-itω} dt = (2π)^{-1/2} e^{-ω²/4β²}`.
    pub fn fourier(&self, omega: f64) -> f64 {
        (-omega * omega / (4.0 * self.beta * self.beta)).exp() / (2.0 * PI).sqrt()
    }
}

impl Filter for GaussianFilter {
    fn eval(&self, t: f64) -> f64 {
        self.beta / PI.sqrt() * (-(self.beta * t).powi(2)).exp()
    }

    fn truncation(&self) -> Option<f64> {
        Some(8.0 / self.beta)
    }

    fn time_scale(&self) -> f64 {
        1.0 / self.beta
    }
}

/// `k_β(ω) = i(1 - e^{-ω²/4β²})/ω`, with `k_β(0) = 0`.
pub fn almost_inverse_kernel(omega: f64, beta: f64) -> C64 {
    if omega == 0.0 {
        return ZERO;
    }
    let x = omega * omega / (4.0 * beta * beta);
    I * (-(-x).exp_m1() / omega)
}

/// `ĝ_β(ω) = ½(1 + erf((ω - γ/2)/(2β)))`, evaluated through `erfc` so the
/// lower tail keeps relative accuracy.
pub fn erf_step(omega: f64, gamma: f64, beta: f64) -> f64 {
    0.5 * libm::erfc((gamma / 2.0 - omega) / (2.0 * beta))
}

/// The tail estimate `β/(√π|ω-γ/2|) e^{-(ω-γ/2)²/4β²}` that bounds `ĝ_β`
/// below the step and `1 - ĝ_β` above it.
pub fn erf_step_tail(omega: f64, gamma: f64, beta: f64) -> f64 {
    let z = omega - gamma / 2.0;
    beta / (PI.sqrt() * z.abs()) * (-z * z / (4.0 * beta * beta)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Multiply eigenbasis entries by `k_β(E_μ - E_ν)`.
    Spectral,
    /// Evaluate the double time integral with RK4 propagators and
    /// composite Simpson quadrature in both times.
    Quadrature,
}

/// `I_{H,β}(A) = ∫ dt φ_β(t) ∫_0^t ds τ_s(A)`.
pub fn almost_inverse_liouvillian(sd: &SpectralData, beta: f64, a: &GlobalOperator, method: Method) -> Result<GlobalOperator> {
    GaussianFilter::new(beta)?;
    match method {
        Method::Spectral => sd.apply_kernel(a, |em, en, _, _| almost_inverse_kernel(em - en, beta)),
        Method::Quadrature => almost_inverse_by_quadrature(sd, beta, a),
    }
}

fn almost_inverse_by_quadrature(sd: &SpectralData, beta: f64, a: &GlobalOperator) -> Result<GlobalOperator> {
    let filter = GaussianFilter::new(beta)?;
    let h_mat = sd.hamiltonian();
    if a.dim() != h_mat.dim() {
        return Err(Error::Dimension {
            expected: h_mat.nrows(),
            found: a.nrows(),
        });
    }
    let t_max = filter.truncation().expect("Gaussian tail is known");
    let omega_max = sd.bandwidth();
    let step = if omega_max > 0.0 {
        (1.0 / (40.0 * beta)).min(0.05 / omega_max)
    } else {
        1.0 / (40.0 * beta)
    };
    let half_intervals = ((t_max / step).ceil() as usize).max(2).next_multiple_of(2);
    let h = t_max / half_intervals as f64;
    let h_norm = linalg::operator_norm(h_mat)?;
    // Outer Simpson weight at node `t = ±kh`; the node `t = 0` carries
    // `F(0) = 0` and is skipped.
    let outer_w = |k: usize| {
        let c = if k == half_intervals { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        c * h / 3.0
    };

    let mut acc = CMat::zeros(a.raw_dim());
    for dir in [1.0f64, -1.0] {
        // Propagator over half an outer step, e^{-iH h/2} for dir = +1.
        let half = dir * h / 2.0;
        let sub = ((h_norm * half.abs() / 0.01).ceil() as usize).max(1);
        let mut s = linalg::eye(h_mat.nrows());
        for _ in 0..sub {
            s = dynamics::rk4_step_with(h_mat, h_mat, h_mat, &s, half / sub as f64);
        }
        let s_dag = linalg::dagger(&s);
        let conj = |u: &CMat, ud: &CMat| ud.dot(a).dot(u);

        let mut u = linalg::eye(h_mat.nrows());
        let mut ud = u.clone();
        let mut tau_prev = a.clone();
        let mut inner = CMat::zeros(a.raw_dim());
        for k in 0..half_intervals {
            u = s.dot(&u);
            ud = ud.dot(&s_dag);
            let tau_mid = conj(&u, &ud);
            u = s.dot(&u);
            ud = ud.dot(&s_dag);
            let tau_next = conj(&u, &ud);
            let w = dir * h / 6.0;
            inner.scaled_add(C64::new(w, 0.0), &tau_prev);
            inner.scaled_add(C64::new(4.0 * w, 0.0), &tau_mid);
            inner.scaled_add(C64::new(w, 0.0), &tau_next);
            tau_prev = tau_next;
            let t = dir * h * (k + 1) as f64;
            acc.scaled_add(C64::new(outer_w(k + 1) * filter.eval(t), 0.0), &inner);
        }
        dynamics::check_unitarity(&u, t_max)?;
    }
    Ok(acc)
}

/// The exact inverse Liouvillian on cross-patch blocks: entries between
/// `σ₀` and `σ₁` are multiplied by `i/(E_μ - E_ν)`, all others vanish.
pub fn exact_inverse_liouvillian(sd: &SpectralData, split: &SpectralSplit, a: &GlobalOperator) -> Result<GlobalOperator> {
    check_split(sd, split)?;
    sd.apply_kernel(a, |em, en, mu, nu| {
        if split.in_patch(mu) != split.in_patch(nu) {
            I / (em - en)
        } else {
            ZERO
        }
    })
}

fn check_split(sd: &SpectralData, split: &SpectralSplit) -> Result<()> {
    if split.mask().len() != sd.dim() {
        return Err(Error::Dimension {
            expected: sd.dim(),
            found: split.mask().len(),
        });
    }
    let e = sd.energies();
    let lowest_cross = split
        .sigma0
        .iter()
        .flat_map(|&i| split.sigma1.iter().map(move |&j| (e[i] - e[j]).abs()))
        .fold(f64::INFINITY, f64::min);
    if lowest_cross < split.gap / 2.0 {
        return Err(Error::InconsistentSplit {
            frequency: lowest_cross,
            gap: split.gap,
        });
    }
    Ok(())
}

/// `J_{H,β}(A)`: the eigenbasis entry `(μ, ν)` is multiplied by
/// `ĝ_β(E_ν - E_μ)`, with the step placed at half the gap of `split`.
pub fn erf_step_map(sd: &SpectralData, split: &SpectralSplit, beta: f64, a: &GlobalOperator) -> Result<GlobalOperator> {
    GaussianFilter::new(beta)?;
    let gamma = split.gap;
    sd.apply_kernel(a, |em, en, _, _| C64::new(erf_step(en - em, gamma, beta), 0.0))
}

/// Off-diagonal part `P A P^⊥ + P^⊥ A P`.
pub fn cross_patch_part(sd: &SpectralData, split: &SpectralSplit, a: &GlobalOperator) -> Result<GlobalOperator> {
    sd.apply_kernel(a, |_, _, mu, nu| {
        if split.in_patch(mu) != split.in_patch(nu) {
            C64::new(1.0, 0.0)
        } else {
            ZERO
        }
    })
}

/// Measured sides and the bound of a Gaussian-error estimate, for the
/// Schatten indices `1, 2, ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub lhs: [f64; 3],
    pub rhs: f64,
    pub commutator_lhs: [f64; 3],
    pub commutator_rhs: f64,
}

pub const SCHATTEN_INDICES: [f64; 3] = [1.0, 2.0, f64::INFINITY];

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs.iter().all(|&l| l <= self.rhs) && self.commutator_lhs.iter().all(|&l| l <= self.commutator_rhs)
    }
}

fn schatten_triple(m: &CMat) -> Result<[f64; 3]> {
    Ok([
        algebra::schatten_norm(m, 1.0)?,
        algebra::schatten_norm(m, 2.0)?,
        algebra::schatten_norm(m, f64::INFINITY)?,
    ])
}

fn gaussian_factor(gamma: f64, beta: f64) -> f64 {
    (-gamma * gamma / (4.0 * beta * beta)).exp()
}

/// `‖I_{H,β}(L_H(A)) - A‖_p` against `‖P‖₁ ‖A‖ e^{-γ²/4β²}`, for a
/// cross-patch `A`; the commutator variant uses `A` as given.
pub fn inverse_residual_check(sd: &SpectralData, split: &SpectralSplit, beta: f64, a: &GlobalOperator) -> Result<BoundCheck> {
    check_split(sd, split)?;
    let p = split.projector(sd);
    let p_trace = algebra::schatten_norm(&p, 1.0)?;
    let norm_a = linalg::operator_norm(a)?;
    let residual = |x: &CMat| -> Result<CMat> {
        let lx = algebra::liouvillian_apply(sd.hamiltonian(), x)?;
        Ok(almost_inverse_liouvillian(sd, beta, &lx, Method::Spectral)? - x)
    };
    let r = residual(a)?;
    let rhs = p_trace * norm_a * gaussian_factor(split.gap, beta);
    let rc = linalg::commutator(&r, &p);
    Ok(BoundCheck {
        lhs: schatten_triple(&r)?,
        rhs,
        commutator_lhs: schatten_triple(&rc)?,
        commutator_rhs: 2.0 * rhs,
    })
}

/// `‖I_{H,β}(A) - I_H(A)‖_p` against `‖P‖₁ ‖A‖ γ^{-1} e^{-γ²/4β²}`.
pub fn exact_comparison_check(sd: &SpectralData, split: &SpectralSplit, beta: f64, a: &GlobalOperator) -> Result<BoundCheck> {
    let p = split.projector(sd);
    let p_trace = algebra::schatten_norm(&p, 1.0)?;
    let norm_a = linalg::operator_norm(a)?;
    let diff = almost_inverse_liouvillian(sd, beta, a, Method::Spectral)? - exact_inverse_liouvillian(sd, split, a)?;
    let rhs = p_trace * norm_a * gaussian_factor(split.gap, beta) / split.gap;
    let dc = linalg::commutator(&diff, &p);
    Ok(BoundCheck {
        lhs: schatten_triple(&diff)?,
        rhs,
        commutator_lhs: schatten_triple(&dc)?,
        commutator_rhs: 2.0 * rhs,
    })
}

/// Locality estimate for `‖[I_{H,β}(A), B]‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityBound {
    /// Infimum over the time grid of the two-part estimate.
    pub grid_inf: f64,
    /// The time at which the grid infimum is attained.
    pub t_opt: f64,
    /// Closed form at `T = d/(2v)` with rate `min{b/2, β²/(4v²)}`.
    pub closed_form: f64,
}

/// Two-part estimate at cut-off time `T`.
pub fn locality_estimate(params: &LrParams, beta: f64, d: f64, prefactor: f64, t: f64) -> f64 {
    let (b, v) = (params.b, params.velocity);
    let sqrt_pi = PI.sqrt();
    prefactor
        * (2.0 * beta / (sqrt_pi * b * b * v * v) * (b * (v * t - d)).exp() + (-(beta * t).powi(2)).exp() / (sqrt_pi * beta))
}

pub fn locality_bound(
    params: &LrParams,
    beta: f64,
    g: &SiteGraph,
    x: &Region,
    y: &Region,
    norm_a: f64,
    norm_b: f64,
) -> Result<LocalityBound> {
    GaussianFilter::new(beta)?;
    if !x.is_disjoint(y) || x.is_empty() || y.is_empty() {
        return Err(Error::Overlap);
    }
    let d = g.distance_between(x, y) as f64;
    let v = params.velocity;
    let prefactor = 2.0 * x.len().min(y.len()) as f64 * norm_a * norm_b;
    let t_half = d / (2.0 * v);
    let (lo, hi) = (t_half * 1e-3, (t_half * 1e3).max(50.0 / beta));
    let n = 400;
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut best = (locality_estimate(params, beta, d, prefactor, t_half), t_half);
    for k in 0..=n {
        let t = lo * ratio.powi(k);
        let val = locality_estimate(params, beta, d, prefactor, t);
        if val < best.0 {
            best = (val, t);
        }
    }
    let rate = (params.b / 2.0).min(beta * beta / (4.0 * v * v));
    let sqrt_pi = PI.sqrt();
    let closed_form = prefactor
        * (2.0 * beta / (sqrt_pi * params.b * params.b * v * v) + 1.0 / (sqrt_pi * beta))
        * (-rate * d).exp();
    Ok(LocalityBound {
        grid_inf: best.0,
        t_opt: best.1,
        closed_form,
    })
}
