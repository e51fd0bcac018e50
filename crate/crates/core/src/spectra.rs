//! Exact diagonalization and spectral patch splitting.

use serde::{Deserialize, Serialize};

use crate::algebra::{GlobalOperator, LocalOperator, Space};
use crate::error::{Error, Result};
use crate::linalg::{self, Basis, CMat, CVec, C64};

/// Eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Eigendecomposition `H = V diag(E) V†` with ascending energies.
#[derive(Debug, Clone)]
pub struct SpectralData {
    energies: Vec<f64>,
    basis: Basis,
    hamiltonian: GlobalOperator,
}

/// Diagonalizes a Hermitian matrix; rejects inputs whose Hermiticity defect
/// exceeds `1e-10` relative to the largest entry.
pub fn diagonalize(h: &GlobalOperator) -> Result<SpectralData> {
    let scale = linalg::max_abs(h).max(1.0);
    let defect = linalg::hermiticity_defect(h);
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian { defect });
    }
    let sym = if defect == 0.0 { h.clone() } else { linalg::hermitian_part(h) };
    let (energies, basis) = linalg::eigh(&sym)?;
    Ok(SpectralData {
        energies,
        basis,
        hamiltonian: sym,
    })
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &GlobalOperator {
        &self.hamiltonian
    }

    /// Largest `|E_μ - E_ν|`.
    pub fn bandwidth(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn to_eigenbasis(&self, a: &CMat) -> Result<CMat> {
        self.check(a)?;
        Ok(self.basis.to_eigenbasis(a))
    }

    pub fn from_eigenbasis(&self, m: &CMat) -> CMat {
        self.basis.from_eigenbasis(m)
    }

    fn check(&self, a: &CMat) -> Result<()> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: a.nrows(),
            });
        }
        Ok(())
    }

    /// Multiplies the eigenbasis entry `(μ, ν)` of `A` by
    /// `kernel(E_μ, E_ν, μ, ν)`.
    pub fn apply_kernel<K>(&self, a: &CMat, kernel: K) -> Result<CMat>
    where
        K: Fn(f64, f64, usize, usize) -> C64,
    {
        let mut m = self.to_eigenbasis(a)?;
        for ((mu, nu), z) in m.indexed_iter_mut() {
            *z *= kernel(self.energies[mu], self.energies[nu], mu, nu);
        }
        Ok(self.from_eigenbasis(&m))
    }

    pub fn eigenvector(&self, k: usize) -> CVec {
        self.basis.column(k)
    }

    /// `⟨v_k, A v_k⟩`.
    pub fn diagonal_element(&self, a: &CMat, k: usize) -> C64 {
        let v = self.eigenvector(k);
        linalg::inner(&v, &a.dot(&v))
    }

    /// Levels as `(first index, one past last index)` ranges of
    /// numerically degenerate eigenvalues.
    pub fn levels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.energies.len() {
            if i == self.energies.len() || self.energies[i] - self.energies[i - 1] > DEGENERACY_TOL {
                out.push((start, i));
                start = i;
            }
        }
        out
    }
}

/// How to choose the patch `σ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitRule {
    /// The lowest `k` eigenvalues, extended to whole degenerate levels.
    LowestK { k: usize },
    /// All eigenvalues in `[lo, hi]`, extended to whole degenerate levels.
    Window { lo: f64, hi: f64 },
    /// Everything below the widest gap between consecutive levels whose
    /// lower edge is below `energy`.
    LargestGapBelow { energy: f64 },
}

/// A patch `σ₀` of the spectrum and its complement `σ₁`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub sigma0: Vec<usize>,
    pub sigma1: Vec<usize>,
    /// `dist(σ₁, σ₀)`.
    pub gap: f64,
    /// `diam σ₀`.
    pub width: f64,
    /// `Tr P`.
    pub rank: usize,
    /// Number of distinct levels in `σ₀`.
    pub distinct: usize,
    mask: Vec<bool>,
    lo: f64,
    hi: f64,
    sigma1_min_above: Option<f64>,
    sigma1_has_below: bool,
}

pub fn split_spectrum(sd: &SpectralData, rule: &SplitRule, min_gap: f64) -> Result<SpectralSplit> {
    let levels = sd.levels();
    let e = sd.energies();
    let chosen: Vec<bool> = match rule {
        SplitRule::LowestK { k } => {
            if *k == 0 {
                return Err(Error::EmptyPatch);
            }
            let mut count = 0;
            levels
                .iter()
                .map(|&(a, b)| {
                    let take = count < *k;
                    count += b - a;
                    take
                })
                .collect()
        }
        SplitRule::Window { lo, hi } => levels
            .iter()
            .map(|&(a, b)| e[a..b].iter().any(|&x| x >= *lo && x <= *hi))
            .collect(),
        SplitRule::LargestGapBelow { energy } => {
            let mut best: Option<(f64, usize)> = None;
            for w in 0..levels.len().saturating_sub(1) {
                let lower = e[levels[w].1 - 1];
                if lower >= *energy {
                    break;
                }
                let g = e[levels[w + 1].0] - lower;
                if best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, w));
                }
            }
            let Some((_, w)) = best else {
                return Err(Error::EmptyPatch);
            };
            (0..levels.len()).map(|i| i <= w).collect()
        }
    };
    let mut mask = vec![false; sd.dim()];
    for (&(a, b), &take) in levels.iter().zip(&chosen) {
        for m in &mut mask[a..b] {
            *m = take;
        }
    }
    from_mask(sd, mask, min_gap)
}

/// Builds a split from an explicit membership mask over eigenvalue indices.
pub fn from_mask(sd: &SpectralData, mask: Vec<bool>, min_gap: f64) -> Result<SpectralSplit> {
    let e = sd.energies();
    let sigma0: Vec<usize> = (0..e.len()).filter(|&i| mask[i]).collect();
    let sigma1: Vec<usize> = (0..e.len()).filter(|&i| !mask[i]).collect();
    if sigma0.is_empty() {
        return Err(Error::EmptyPatch);
    }
    if sigma1.is_empty() {
        return Err(Error::EverythingSelected);
    }
    let lo = e[sigma0[0]];
    let hi = e[*sigma0.last().expect("non-empty")];
    let gap = sigma1
        .iter()
        .map(|&i| sigma0.iter().map(|&j| (e[i] - e[j]).abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    if !(gap >= min_gap) || gap <= 0.0 {
        return Err(Error::GapTooSmall { gap, min_gap });
    }
    let mut distinct = 0;
    let mut prev = f64::NEG_INFINITY;
    for &i in &sigma0 {
        if e[i] - prev > DEGENERACY_TOL {
            distinct += 1;
        }
        prev = e[i];
    }
    let sigma1_min_above = sigma1.iter().map(|&i| e[i]).filter(|&x| x > hi).reduce(f64::min);
    let sigma1_has_below = sigma1.iter().any(|&i| e[i] < lo);
    Ok(SpectralSplit {
        rank: sigma0.len(),
        sigma0,
        sigma1,
        gap,
        width: hi - lo,
        distinct,
        mask,
        lo,
        hi,
        sigma1_min_above,
        sigma1_has_below,
    })
}

impl SpectralSplit {
    pub fn in_patch(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `(inf σ₀, sup σ₀)`.
    pub fn patch_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `P = Σ_{μ ∈ σ₀} |v_μ⟩⟨v_μ|`.
    pub fn projector(&self, sd: &SpectralData) -> GlobalOperator {
        let n = sd.dim();
        let mut d = CMat::zeros((n, n));
        for &i in &self.sigma0 {
            d[[i, i]] = C64::new(1.0, 0.0);
        }
        sd.from_eigenbasis(&d)
    }

    /// The patch lies strictly below the rest of the spectrum with
    /// `inf σ₁ - sup σ₀ >= γ` and `Δ < γ/4`.
    pub fn check_isolated_below(&self) -> Result<()> {
        if self.sigma1_has_below {
            return Err(Error::Assumption("part of the complement lies below the patch".into()));
        }
        let sep = self.sigma1_min_above.unwrap_or(f64::INFINITY) - self.hi;
        if sep < self.gap {
            return Err(Error::Assumption(format!(
                "separation {sep:.3e} below the gap {:.3e}",
                self.gap
            )));
        }
        if !(self.width < self.gap / 4.0) {
            return Err(Error::Assumption(format!(
                "patch width {:.3e} is not below a quarter of the gap {:.3e}",
                self.width, self.gap
            )));
        }
        Ok(())
    }
}

/// `ω(A) = Tr(P A) / Tr P`.
pub fn patch_expectation(sd: &SpectralData, split: &SpectralSplit, a: &CMat) -> Result<C64> {
    sd.check(a)?;
    let sum: C64 = split.sigma0.iter().map(|&k| sd.diagonal_element(a, k)).sum();
    Ok(sum / split.rank as f64)
}

/// [`patch_expectation`] of a local operator, through matrix-vector
/// products only.
pub fn patch_local_expectation(sd: &SpectralData, split: &SpectralSplit, a: &LocalOperator, space: &Space) -> Result<C64> {
    let mut sum = C64::new(0.0, 0.0);
    for &k in &split.sigma0 {
        sum += a.expectation(space, &sd.eigenvector(k))?;
    }
    Ok(sum / split.rank as f64)
}
