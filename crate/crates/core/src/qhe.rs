//! Flux threading on a small torus: dressed half-torus charges, the flux
//! unitary, the charge transport operator and its trace in the patch.

use std::f64::consts::PI;

use crate::algebra::{self, GlobalOperator, Space};
use crate::error::{Error, Result};
use crate::filtering::{almost_inverse_liouvillian, exact_inverse_liouvillian, Method};
use crate::interaction::{local_charge, Interaction};
use crate::lattice::{GraphKind, Region, SiteGraph};
use crate::linalg::{self, CMat, C64};
use crate::spectra::{SpectralData, SpectralSplit};

/// Largest allowed `‖[H, Q]‖_max` for a charge-conserving model.
const CHARGE_TOL: f64 = 1e-12;
/// Smallest singular value below which re-unitarization is refused.
const POLAR_TOL: f64 = 1e-6;

/// `Σ_{x ∈ X} q_x` on the full space.
pub fn region_charge(region: &Region, space: &Space) -> Result<GlobalOperator> {
    let mut q = CMat::zeros((space.dim(), space.dim()));
    for &x in region.sites() {
        algebra::embed_into(&mut q, &local_charge(x)?, C64::new(1.0, 0.0), space)?;
    }
    Ok(q)
}

/// Fails unless every `H(s)` on the sample grid commutes with the total charge.
pub fn check_charge_conservation(phi: &Interaction) -> Result<()> {
    let total = region_charge(&Region::all(phi.graph()), &phi.space())?;
    let defect = phi.charge_defect(&total, &phi.time_grid(3))?;
    if defect > CHARGE_TOL {
        return Err(Error::NotChargeConserving { defect });
    }
    Ok(())
}

/// Half-torus regions and the strips around their boundaries.
#[derive(Debug, Clone)]
pub struct ChargeGeometry {
    pub upper: Region,
    pub lower_strip: Region,
    pub upper_strip: Region,
    pub right: Region,
    pub left_strip: Region,
    pub right_strip: Region,
    pub strip_width: usize,
}

/// Indices `from - before, ..., from + after` modulo `n`, deduplicated.
fn cyclic_band(from: isize, before: usize, after: usize, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (-(before as isize)..=after as isize)
        .map(|k| (from + k).rem_euclid(n as isize) as usize)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl ChargeGeometry {
    /// Upper half: rows `⌊ly/2⌋..ly`; right half: columns `⌊lx/2⌋..lx`.
    /// Each strip holds the two rows (columns) adjacent to a boundary line
    /// plus `strip_width` more on either side. The default width is
    /// `⌊min(lx, ly)/4⌋`.
    pub fn new(g: &SiteGraph, strip_width: Option<usize>) -> Result<Self> {
        let GraphKind::Torus { lx, ly } = g.kind() else {
            return Err(Error::InvalidParameter("charge transport needs a torus".into()));
        };
        let w = strip_width.unwrap_or(lx.min(ly) / 4);
        let rows = |ys: &[usize]| Region::new(g, ys.iter().flat_map(|&y| (0..lx).map(move |x| x + lx * y)));
        let cols = |xs: &[usize]| Region::new(g, xs.iter().flat_map(|&x| (0..ly).map(move |y| x + lx * y)));
        let (y0, x0) = (ly / 2, lx / 2);
        let upper_rows: Vec<usize> = (y0..ly).collect();
        let right_cols: Vec<usize> = (x0..lx).collect();
        Ok(ChargeGeometry {
            upper: rows(&upper_rows)?,
            lower_strip: rows(&cyclic_band(y0 as isize - 1, w, w + 1, ly))?,
            upper_strip: rows(&cyclic_band(ly as isize - 1, w, w + 1, ly))?,
            right: cols(&right_cols)?,
            left_strip: cols(&cyclic_band(x0 as isize - 1, w, w + 1, lx))?,
            right_strip: cols(&cyclic_band(lx as isize - 1, w, w + 1, lx))?,
            strip_width: w,
        })
    }

    pub fn strips_disjoint(&self) -> bool {
        self.lower_strip.is_disjoint(&self.upper_strip) && self.left_strip.is_disjoint(&self.right_strip)
    }

    /// Every term crossing the boundary of `half` must lie inside one of the
    /// two strips; fails naming the first term that does not.
    pub fn check_terms(&self, phi: &Interaction) -> Result<()> {
        let g = phi.graph();
        let halves = [
            (&self.upper, &self.lower_strip, &self.upper_strip),
            (&self.right, &self.left_strip, &self.right_strip),
        ];
        for s in phi.time_grid(3) {
            for term in phi.snapshot(s) {
                let z = Region::new(g, term.support().iter().copied())?;
                for (half, a, b) in halves {
                    let inside = z.sites().iter().filter(|&&x| half.contains(x)).count();
                    let crosses = inside > 0 && inside < z.len();
                    if crosses && !z.is_subset(a) && !z.is_subset(b) {
                        return Err(Error::Assumption(format!(
                            "term on sites {:?} crosses a half-torus boundary outside both strips",
                            z.sites()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `Q - I_{H,β}(L_H(Q))`.
pub fn dressed_charge(sd: &SpectralData, beta: f64, q: &GlobalOperator) -> Result<GlobalOperator> {
    let lq = algebra::liouvillian_apply(sd.hamiltonian(), q)?;
    let d = almost_inverse_liouvillian(sd, beta, &lq, Method::Spectral)?;
    Ok(linalg::hermitian_part(&(q - &d)))
}

/// `Q - I_H(L_H(Q))`, which commutes with the patch projector.
pub fn dressed_charge_exact(sd: &SpectralData, split: &SpectralSplit, q: &GlobalOperator) -> Result<GlobalOperator> {
    let lq = algebra::liouvillian_apply(sd.hamiltonian(), q)?;
    let d = exact_inverse_liouvillian(sd, split, &lq)?;
    Ok(linalg::hermitian_part(&(q - &d)))
}

/// `e^{2πi x}` with the argument reduced first, so integers map to exactly 1.
fn full_turn(x: f64) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * (x - x.round()))
}

/// The factor of `W` on a region: conditional expectation followed by
/// polar re-unitarization.
fn local_factor(w: &CMat, region: &Region, space: &Space) -> Result<CMat> {
    let e = algebra::conditional_expectation(w, region, space)?;
    let (u, smallest) = linalg::polar_unitary(&e)?;
    if smallest < POLAR_TOL {
        return Err(Error::DegeneratePolar { smallest });
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct FluxUnitary {
    /// `W = e^{2πi Q̄_U}`.
    pub full: CMat,
    /// The factor on the lower strip.
    pub lower: CMat,
    /// `‖W - U_lower U_upper‖`, with the upper factor extracted from
    /// `U_lower* W`.
    pub factorization_residual: f64,
}

/// `U = (e^{2πi Q̄_U})_lower`.
pub fn flux_unitary(dressed_upper: &GlobalOperator, geometry: &ChargeGeometry, space: &Space) -> Result<FluxUnitary> {
    let w = linalg::hermitian_function(dressed_upper, full_turn)?;
    let lower = local_factor(&w, &geometry.lower_strip, space)?;
    let upper = local_factor(&linalg::dagger(&lower).dot(&w), &geometry.upper_strip, space)?;
    let factorization_residual = linalg::operator_norm(&(&w - &lower.dot(&upper)))?;
    Ok(FluxUnitary {
        full: w,
        lower,
        factorization_residual,
    })
}

#[derive(Debug, Clone)]
pub struct Transport {
    /// `T = sym(E_left(U* Q_R U - Q_R))`.
    pub operator: GlobalOperator,
    /// `‖Δ - left - right‖` with both parts taken the same way.
    pub splitting_residual: f64,
    /// `|Tr Δ|`.
    pub trace_defect: f64,
}

/// `T = ((U)* Q_R U - Q_R)_left`.
pub fn transport_operator(u: &CMat, q_right: &GlobalOperator, geometry: &ChargeGeometry, space: &Space) -> Result<Transport> {
    let delta = linalg::dagger(u).dot(q_right).dot(u) - q_right;
    let part = |r: &Region| -> Result<CMat> {
        Ok(linalg::hermitian_part(&algebra::conditional_expectation(&delta, r, space)?))
    };
    let left = part(&geometry.left_strip)?;
    let right = part(&geometry.right_strip)?;
    let splitting_residual = linalg::operator_norm(&(&delta - &left - &right))?;
    Ok(Transport {
        operator: left,
        splitting_residual,
        trace_defect: linalg::trace(&delta).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantization {
    pub trace: f64,
    pub integer: i64,
    pub residual: f64,
}

/// `Tr(P T)`, its nearest integer and the distance to it.
pub fn quantization_check(sd: &SpectralData, split: &SpectralSplit, t: &GlobalOperator) -> Result<Quantization> {
    let tr: C64 = split.sigma0.iter().map(|&k| sd.diagonal_element(t, k)).sum();
    if tr.im.abs() > 1e-8 * tr.re.abs().max(1.0) {
        return Err(Error::NotHermitian { defect: tr.im.abs() });
    }
    let integer = tr.re.round();
    Ok(Quantization {
        trace: tr.re,
        integer: integer as i64,
        residual: (tr.re - integer).abs(),
    })
}

/// Diagnostics of `Z(φ) = U* e^{iφ Q̄_R} U e^{-iφ Q̄_R}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDiagnostics {
    pub phi: f64,
    /// `‖[Z(φ), P]‖`.
    pub commutator: f64,
    /// `|det_P(P Z_left P) - 1|`.
    pub det_defect: f64,
}

pub fn z_phase_operator(
    sd: &SpectralData,
    split: &SpectralSplit,
    u: &CMat,
    dressed_right: &GlobalOperator,
    phi: f64,
    geometry: &ChargeGeometry,
    space: &Space,
) -> Result<PhaseDiagnostics> {
    let rot = linalg::hermitian_function(dressed_right, |x| C64::from_polar(1.0, phi * x))?;
    let z = linalg::dagger(u).dot(&rot).dot(u).dot(&linalg::dagger(&rot));
    let p = split.projector(sd);
    let commutator = linalg::operator_norm(&linalg::commutator(&z, &p))?;
    let z_left = local_factor(&z, &geometry.left_strip, space)?;
    let vecs: Vec<_> = split.sigma0.iter().map(|&k| sd.eigenvector(k)).collect();
    let r = vecs.len();
    let m = CMat::from_shape_fn((r, r), |(i, j)| linalg::inner(&vecs[i], &z_left.dot(&vecs[j])));
    Ok(PhaseDiagnostics {
        phi,
        commutator,
        det_defect: (determinant(&m) - C64::new(1.0, 0.0)).norm(),
    })
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(m: &CMat) -> C64 {
    let mut a = m.clone();
    let n = a.nrows();
    let mut det = C64::new(1.0, 0.0);
    for c in 0..n {
        let pivot = (c..n).max_by(|&i, &j| a[[i, c]].norm().total_cmp(&a[[j, c]].norm())).unwrap();
        if a[[pivot, c]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != c {
            for k in 0..n {
                a.swap([pivot, k], [c, k]);
            }
            det = -det;
        }
        det *= a[[c, c]];
        for i in c + 1..n {
            let f = a[[i, c]] / a[[c, c]];
            for k in c..n {
                let v = a[[c, k]];
                a[[i, k]] -= f * v;
            }
        }
    }
    det
}

/// Everything measured by one run of the flux-threading pipeline.
#[derive(Debug, Clone)]
pub struct FluxData {
    pub beta: f64,
    /// `‖[Q_U, P]‖` and `‖[Q̄_U, P]‖`.
    pub bare_commutator: f64,
    pub dressed_commutator: f64,
    pub flux: FluxUnitary,
    pub transport: Transport,
    pub quantization: Quantization,
}

/// Runs dressing, flux unitary, transport and the trace check.
pub fn flux_pipeline(
    phi: &Interaction,
    sd: &SpectralData,
    split: &SpectralSplit,
    geometry: &ChargeGeometry,
    beta: f64,
) -> Result<FluxData> {
    check_charge_conservation(phi)?;
    geometry.check_terms(phi)?;
    let space = phi.space();
    let q_upper = region_charge(&geometry.upper, &space)?;
    let q_right = region_charge(&geometry.right, &space)?;
    let dressed = dressed_charge(sd, beta, &q_upper)?;
    let p = split.projector(sd);
    let bare_commutator = linalg::operator_norm(&linalg::commutator(&q_upper, &p))?;
    let dressed_commutator = linalg::operator_norm(&linalg::commutator(&dressed, &p))?;
    let flux = flux_unitary(&dressed, geometry, &space)?;
    let transport = transport_operator(&flux.lower, &q_right, geometry, &space)?;
    let quantization = quantization_check(sd, split, &transport.operator)?;
    Ok(FluxData {
        beta,
        bare_commutator,
        dressed_commutator,
        flux,
        transport,
        quantization,
    })
}
