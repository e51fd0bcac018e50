//! Time-dependent interactions, their weighted norms and a model library.
//!
//! Interactions are parameterized by `s` in a compact interval (by default
//! `[0, 1]`); every term is a fixed Hermitian local operator times a scalar
//! coefficient path with an analytic derivative.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::{self, pauli, GlobalOperator, LocalOperator, Space};
use crate::error::{Error, Result};
use crate::lattice::{Region, SiteGraph};
use crate::linalg::{self, CMat, C64};

/// A smooth scalar path `c(s)` with its exact derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoeffPath {
    /// `c0 + c1 s + c2 s^2 + ...`
    Poly(Vec<f64>),
    /// `from + (to - from) sin^2(pi s / 2)`, flat at `s = 0` and `s = 1`.
    SinRamp { from: f64, to: f64 },
}

impl CoeffPath {
    pub fn constant(c: f64) -> Self {
        CoeffPath::Poly(vec![c])
    }

    /// `from + (to - from) s`.
    pub fn linear(from: f64, to: f64) -> Self {
        CoeffPath::Poly(vec![from, to - from])
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            CoeffPath::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * s + a),
            CoeffPath::SinRamp { from, to } => from + (to - from) * (PI * s / 2.0).sin().powi(2),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            CoeffPath::Poly(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &a)| acc * s + k as f64 * a),
            CoeffPath::SinRamp { from, to } => (to - from) * (PI / 2.0) * (PI * s).sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            CoeffPath::Poly(c) => c.iter().skip(1).all(|&a| a == 0.0),
            CoeffPath::SinRamp { from, to } => from == to,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub op: LocalOperator,
    pub coeff: CoeffPath,
}

/// `Φ(s, Z) = Σ_{terms with support Z} c(s) · op`.
#[derive(Debug, Clone)]
pub struct Interaction {
    graph: SiteGraph,
    space: Space,
    terms: Vec<Term>,
    interval: (f64, f64),
}

impl Interaction {
    pub fn new(graph: &SiteGraph, q: usize) -> Self {
        Interaction {
            graph: graph.clone(),
            space: Space {
                n_sites: graph.n_sites(),
                q,
            },
            terms: Vec::new(),
            interval: (0.0, 1.0),
        }
    }

    pub fn with_interval(mut self, from: f64, to: f64) -> Result<Self> {
        if !(to > from) {
            return Err(Error::InvalidParameter(format!("empty interval [{from}, {to}]")));
        }
        self.interval = (from, to);
        Ok(self)
    }

    /// Adds `coeff(s) · op`; `op` must be Hermitian and supported in the graph.
    pub fn push(&mut self, op: LocalOperator, coeff: CoeffPath) -> Result<()> {
        let defect = linalg::hermiticity_defect(op.matrix());
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect });
        }
        if op.q() != self.space.q {
            return Err(Error::Dimension {
                expected: self.space.q,
                found: op.q(),
            });
        }
        for &s in op.support() {
            self.graph.check_site(s)?;
        }
        self.terms.push(Term { op, coeff });
        Ok(())
    }

    pub fn graph(&self) -> &SiteGraph {
        &self.graph
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_constant())
    }

    fn grouped<F: Fn(&CoeffPath) -> f64>(&self, weight: F) -> Vec<LocalOperator> {
        let mut groups: BTreeMap<Vec<usize>, CMat> = BTreeMap::new();
        for term in &self.terms {
            let c = weight(&term.coeff);
            let entry = groups
                .entry(term.op.support().to_vec())
                .or_insert_with(|| CMat::zeros(term.op.matrix().raw_dim()));
            entry.scaled_add(C64::new(c, 0.0), term.op.matrix());
        }
        groups
            .into_iter()
            .map(|(support, m)| LocalOperator::new(support, m, self.space.q).expect("grouped term is consistent"))
            .collect()
    }

    /// The operators `Φ(s, Z)`, one per distinct support.
    pub fn snapshot(&self, s: f64) -> Vec<LocalOperator> {
        self.grouped(|c| c.value(s))
    }

    /// The operators `∂_s Φ(s, Z)`, one per distinct support.
    pub fn derivative_snapshot(&self, s: f64) -> Vec<LocalOperator> {
        self.grouped(|c| c.derivative(s))
    }

    /// `H(s) = Σ_Z Φ(s, Z)`.
    pub fn assemble_hamiltonian(&self, s: f64) -> Result<GlobalOperator> {
        self.assemble(|c| c.value(s))
    }

    /// `Ḣ(s) = Σ_Z ∂_s Φ(s, Z)`.
    pub fn assemble_derivative(&self, s: f64) -> Result<GlobalOperator> {
        self.assemble(|c| c.derivative(s))
    }

    fn assemble<F: Fn(&CoeffPath) -> f64>(&self, weight: F) -> Result<GlobalOperator> {
        let mut h = CMat::zeros((self.space.dim(), self.space.dim()));
        for term in &self.terms {
            let c = weight(&term.coeff);
            if c != 0.0 {
                algebra::embed_into(&mut h, &term.op, C64::new(c, 0.0), &self.space)?;
            }
        }
        Ok(h)
    }

    /// Evenly spaced sample times over the interval, endpoints included.
    pub fn time_grid(&self, points: usize) -> Vec<f64> {
        let (a, b) = self.interval;
        if points <= 1 {
            return vec![a];
        }
        (0..points).map(|k| a + (b - a) * k as f64 / (points - 1) as f64).collect()
    }

    /// `sup_s sup_z Σ_{Z ∋ z} ‖Φ(s, Z)‖ e^{b diam Z}` over the sample times.
    pub fn norm(&self, b: f64, t_samples: &[f64]) -> Result<f64> {
        norm_of(&self.graph, b, t_samples.iter().map(|&s| self.snapshot(s)))
    }

    /// Same weighted norm for the derivative interaction.
    pub fn derivative_norm(&self, b: f64, t_samples: &[f64]) -> Result<f64> {
        norm_of(&self.graph, b, t_samples.iter().map(|&s| self.derivative_snapshot(s)))
    }

    /// `‖Φ‖_b` on the default 21-point time grid.
    pub fn default_norm(&self, b: f64) -> Result<f64> {
        self.norm(b, &self.time_grid(21))
    }

    /// Largest entry of `[H(s), Q]` over the sample times, `Q` the total charge.
    pub fn charge_defect(&self, charge: &GlobalOperator, t_samples: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &s in t_samples {
            let h = self.assemble_hamiltonian(s)?;
            worst = worst.max(linalg::max_abs(&linalg::commutator(&h, charge)));
        }
        Ok(worst)
    }
}

/// Dense `H(s) = Σ_j c_j(s) H_j`, with terms sharing a coefficient path
/// pre-summed so that evaluation is a short linear combination.
#[derive(Debug, Clone)]
pub struct DensePath {
    components: Vec<(CoeffPath, CMat)>,
    dim: usize,
}

impl DensePath {
    pub fn new(phi: &Interaction) -> Result<Self> {
        let space = phi.space();
        let mut components: Vec<(CoeffPath, CMat)> = Vec::new();
        for term in phi.terms() {
            let idx = match components.iter().position(|(c, _)| *c == term.coeff) {
                Some(i) => i,
                None => {
                    components.push((term.coeff.clone(), CMat::zeros((space.dim(), space.dim()))));
                    components.len() - 1
                }
            };
            algebra::embed_into(&mut components[idx].1, &term.op, C64::new(1.0, 0.0), &space)?;
        }
        Ok(DensePath {
            components,
            dim: space.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self, s: f64) -> CMat {
        self.combine(|c| c.value(s))
    }

    pub fn derivative(&self, s: f64) -> CMat {
        self.combine(|c| c.derivative(s))
    }

    /// An upper bound on `sup_s ‖H(s)‖` over the sample times.
    pub fn norm_bound(&self, t_samples: &[f64]) -> Result<f64> {
        let norms = self
            .components
            .iter()
            .map(|(_, m)| linalg::operator_norm(m))
            .collect::<Result<Vec<_>>>()?;
        Ok(t_samples
            .iter()
            .map(|&s| {
                self.components
                    .iter()
                    .zip(&norms)
                    .map(|((c, _), n)| c.value(s).abs() * n)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max))
    }

    fn combine<F: Fn(&CoeffPath) -> f64>(&self, weight: F) -> CMat {
        let mut h = CMat::zeros((self.dim, self.dim));
        for (c, m) in &self.components {
            let w = weight(c);
            if w != 0.0 {
                h.scaled_add(C64::new(w, 0.0), m);
            }
        }
        h
    }
}

fn norm_of<I: Iterator<Item = Vec<LocalOperator>>>(g: &SiteGraph, b: f64, snapshots: I) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!("interaction norm needs b >= 0, got {b}")));
    }
    let mut sup = 0.0f64;
    for snap in snapshots {
        let mut per_site = vec![0.0f64; g.n_sites()];
        for op in &snap {
            let region = Region::new(g, op.support().iter().copied())?;
            let w = op.norm()? * (b * region.diameter() as f64).exp();
            for &z in op.support() {
                per_site[z] += w;
            }
        }
        sup = per_site.iter().copied().fold(sup, f64::max);
    }
    Ok(sup)
}

/// Transverse-field Ising model `-J Σ σ^z σ^z - g Σ σ^x` on the edges and
/// sites of `graph`.
pub fn tfim(graph: &SiteGraph, j: CoeffPath, g: CoeffPath) -> Result<Interaction> {
    let mut phi = Interaction::new(graph, 2);
    for (a, b) in graph.edges() {
        phi.push(pauli::string("ZZ", &[a, b])?.scaled(C64::new(-1.0, 0.0)), j.clone())?;
    }
    for x in 0..graph.n_sites() {
        phi.push(pauli::string("X", &[x])?.scaled(C64::new(-1.0, 0.0)), g.clone())?;
    }
    Ok(phi)
}

/// Onsite charge `q_x = (1 - σ^z)/2`, spectrum `{0, 1}`.
pub fn local_charge(site: usize) -> Result<LocalOperator> {
    let m = (linalg::eye(2) - pauli::z()).mapv(|z| z * 0.5);
    LocalOperator::qubit(vec![site], m)
}

/// Charge-conserving XY model `J Σ (σ^x σ^x + σ^y σ^y)/2 + h Σ q_x`.
pub fn xy_charge(graph: &SiteGraph, j: CoeffPath, h: f64) -> Result<Interaction> {
    let mut phi = Interaction::new(graph, 2);
    let hop = (linalg::kron(&pauli::x(), &pauli::x()) + linalg::kron(&pauli::y(), &pauli::y())).mapv(|z| z * 0.5);
    for (a, b) in graph.edges() {
        phi.push(LocalOperator::qubit(vec![a, b], hop.clone())?, j.clone())?;
    }
    for x in 0..graph.n_sites() {
        phi.push(local_charge(x)?, CoeffPath::constant(h))?;
    }
    Ok(phi)
}

/// `base + strength(s) · op`.
pub fn local_perturbation(base: &Interaction, op: LocalOperator, strength: CoeffPath) -> Result<Interaction> {
    let mut phi = base.clone();
    phi.push(op, strength)?;
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_chain, build_torus};

    #[test]
    fn coefficient_paths() {
        let p = CoeffPath::Poly(vec![0.0, 0.0, 1.0]);
        assert!((p.derivative(0.3) - 0.6).abs() < 1e-15);
        let fd = (p.value(0.3 + 1e-5) - p.value(0.3 - 1e-5)) / 2e-5;
        assert!((fd - 0.6).abs() < 1e-7);
        assert_eq!(CoeffPath::constant(2.0).derivative(0.4), 0.0);
        assert_eq!(CoeffPath::linear(0.0, 1.0).derivative(0.7), 1.0);
        assert!((CoeffPath::linear(2.0, 3.0).value(0.5) - 2.5).abs() < 1e-15);
        let r = CoeffPath::SinRamp { from: 1.0, to: 2.0 };
        for s in [0.1, 0.5, 0.9] {
            let fd = (r.value(s + 1e-5) - r.value(s - 1e-5)) / 2e-5;
            assert!((fd - r.derivative(s)).abs() < 1e-7);
        }
        assert_eq!(r.value(0.0), 1.0);
        assert!((r.value(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn norm_examples() {
        let g = build_chain(4, true).unwrap();
        let mut field = Interaction::new(&g, 2);
        for x in 0..4 {
            field.push(pauli::string("Z", &[x]).unwrap().scaled(C64::new(0.7, 0.0)), CoeffPath::constant(1.0))
                .unwrap();
        }
        assert!((field.default_norm(1.3).unwrap() - 0.7).abs() < 1e-12);

        let ising = tfim(&g, CoeffPath::constant(1.5), CoeffPath::constant(0.0)).unwrap();
        let b = 0.4;
        assert!((ising.default_norm(b).unwrap() - 2.0 * 1.5 * b.exp()).abs() < 1e-12);

        assert_eq!(Interaction::new(&g, 2).default_norm(1.0).unwrap(), 0.0);
    }

    #[test]
    fn tfim_two_sites_spectrum() {
        let g = build_chain(2, false).unwrap();
        let phi = tfim(&g, CoeffPath::constant(1.0), CoeffPath::constant(2.0)).unwrap();
        let h = phi.assemble_hamiltonian(0.0).unwrap();
        let zz = linalg::kron(&pauli::z(), &pauli::z());
        let xs = linalg::kron(&pauli::x(), &pauli::identity()) + linalg::kron(&pauli::identity(), &pauli::x());
        let expected = -zz - xs.mapv(|z| z * 2.0);
        assert!(linalg::max_abs(&(&h - &expected)) < 1e-15);
        // Spectrum is {±sqrt(17), ±1}.
        let w = linalg::eigvalsh(&h).unwrap();
        assert!((w[0] + 17f64.sqrt()).abs() < 1e-12);
        assert!((w[3] - 17f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_site_tfim_is_field_only() {
        let g = build_chain(1, false).unwrap();
        let phi = tfim(&g, CoeffPath::constant(1.0), CoeffPath::constant(0.8)).unwrap();
        let h = phi.assemble_hamiltonian(0.3).unwrap();
        assert!(linalg::max_abs(&(h + pauli::x().mapv(|z| z * 0.8))) < 1e-15);
    }

    #[test]
    fn xy_charge_conserves_charge() {
        let g = build_torus(2, 2).unwrap();
        let phi = xy_charge(&g, CoeffPath::linear(0.0, 0.3), 1.0).unwrap();
        let space = phi.space();
        let mut q = CMat::zeros((space.dim(), space.dim()));
        for x in 0..g.n_sites() {
            algebra::embed_into(&mut q, &local_charge(x).unwrap(), C64::new(1.0, 0.0), &space).unwrap();
        }
        assert!(phi.charge_defect(&q, &phi.time_grid(11)).unwrap() < 1e-12);
    }

    #[test]
    fn perturbation_adds_a_term() {
        let g = build_chain(3, false).unwrap();
        let base = tfim(&g, CoeffPath::constant(1.0), CoeffPath::constant(2.0)).unwrap();
        let op = pauli::string("Z", &[0]).unwrap();
        let pert = local_perturbation(&base, op.clone(), CoeffPath::linear(0.0, 0.3)).unwrap();
        let diff = pert.assemble_hamiltonian(1.0).unwrap() - base.assemble_hamiltonian(1.0).unwrap();
        let expected = algebra::embed(&op, &base.space()).unwrap().mapv(|z| z * 0.3);
        assert!(linalg::max_abs(&(diff - expected)) < 1e-15);
        let hdot = pert.assemble_derivative(0.5).unwrap();
        assert!((linalg::max_abs(&hdot) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_terms() {
        let g = build_chain(2, false).unwrap();
        let mut phi = Interaction::new(&g, 2);
        let mut m = CMat::zeros((2, 2));
        m[[0, 1]] = C64::new(1.0, 0.0);
        assert!(phi.push(LocalOperator::qubit(vec![0], m).unwrap(), CoeffPath::constant(1.0)).is_err());
    }
}
