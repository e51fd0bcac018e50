use serde::Serialize;

use crate::error::{Error, Result};

/// Floor for integrator-limited flow experiments.
pub const FLOW_FLOOR: f64 = 1e-12;
/// Floor for everything else.
pub const DEFAULT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    Distance,
    InverseBetaSquared,
    Time,
}

/// Samples `(x, value)` of a nonnegative quantity, with an optional bound
/// per sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub abscissa: Abscissa,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub bound: Option<Vec<f64>>,
    pub floor: f64,
}

impl DecayCurve {
    pub fn new(abscissa: Abscissa, x: Vec<f64>, values: Vec<f64>, floor: f64) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                found: values.len(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("curve abscissae must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("curve values must be finite and nonnegative".into()));
        }
        Ok(DecayCurve {
            abscissa,
            x,
            values,
            bound: None,
            floor,
        })
    }

    /// Builds a curve from unordered samples.
    pub fn from_unsorted(abscissa: Abscissa, mut samples: Vec<(f64, f64)>, floor: f64) -> Result<Self> {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, values) = samples.into_iter().unzip();
        DecayCurve::new(abscissa, x, values, floor)
    }

    pub fn with_bound(mut self, bound: Vec<f64>) -> Result<Self> {
        if bound.len() != self.x.len() {
            return Err(Error::Dimension {
                expected: self.x.len(),
                found: bound.len(),
            });
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Samples strictly above the floor, in order.
    pub fn above_floor(&self) -> Vec<(f64, f64)> {
        self.x
            .iter()
            .zip(&self.values)
            .filter(|(_, &v)| v > self.floor)
            .map(|(&x, &v)| (x, v))
            .collect()
    }

    /// `bound - value` per sample, if a bound is attached.
    pub fn margins(&self) -> Option<Vec<f64>> {
        self.bound
            .as_ref()
            .map(|b| b.iter().zip(&self.values).map(|(b, v)| b - v).collect())
    }

    pub fn fit(&self) -> Result<ExpFit> {
        fit_exponential(self)
    }
}

/// `value ≈ prefactor · e^{-rate·x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least squares on `(x, ln value)` using the samples above the floor.
pub fn fit_exponential(curve: &DecayCurve) -> Result<ExpFit> {
    let pts = curve.above_floor();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, v) in &pts {
        let (dx, dy) = (x - mx, v.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|&(x, v)| (v.ln() - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(ExpFit {
        rate: -slope,
        prefactor: intercept.exp(),
        r_squared,
        points_used: pts.len(),
    })
}
