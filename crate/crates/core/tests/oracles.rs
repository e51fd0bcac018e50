//! Library results against independent oracles: closed forms, free-fermion
//! spectra, power iteration and hand-evaluated formulas.

use std::f64::consts::PI;

use filterlab::algebra::{self, pauli};
use filterlab::dynamics::{self, EvolutionSpec, LrParams};
use filterlab::filtering::{self, Method};
use filterlab::interaction::{tfim, CoeffPath, DensePath, Interaction};
use filterlab::lattice::{build_chain, Region};
use filterlab::linalg::{self, CMat, CVec, C64};
use filterlab::spectra::{diagonalize, split_spectrum, SplitRule};

fn chain_tfim(n: usize, periodic: bool, g: f64) -> Interaction {
    tfim(&build_chain(n, periodic).unwrap(), CoeffPath::constant(1.0), CoeffPath::constant(g)).unwrap()
}

/// Lowest eigenvalue of `h` by power iteration on `shift - h`, optionally
/// deflating known eigenvectors.
fn power_lowest(h: &CMat, deflate: &[CVec]) -> (f64, CVec) {
    let n = h.nrows();
    let shift = h.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut v = CVec::from_shape_fn(n, |i| C64::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
    let project = |v: &mut CVec| {
        for d in deflate {
            let c = linalg::inner(d, v);
            v.zip_mut_with(d, |x, &y| *x -= c * y);
        }
    };
    for _ in 0..200_000 {
        project(&mut v);
        let norm = linalg::vec_norm(&v);
        v.mapv_inplace(|z| z / norm);
        let hv = h.dot(&v);
        let energy = linalg::inner(&v, &hv).re;
        let residual = linalg::vec_norm(&(&hv - &v.mapv(|z| z * energy)));
        if residual < 1e-11 {
            return (energy, v);
        }
        let mut w = v.mapv(|z| z * shift) - hv;
        project(&mut w);
        v = w;
    }
    panic!("power iteration did not converge")
}

#[test]
fn two_site_spectrum_in_closed_form() {
    // Symmetric sector [[-1, -2g], [-2g, 1]] gives ±√(1 + 4g²); the
    // antisymmetric states sit at ±1.
    let phi = chain_tfim(2, false, 2.0);
    let sd = diagonalize(&phi.assemble_hamiltonian(0.0).unwrap()).unwrap();
    let expected = [-(17f64.sqrt()), -1.0, 1.0, 17f64.sqrt()];
    for (e, x) in sd.energies().iter().zip(expected) {
        assert!((e - x).abs() < 1e-12, "{e} vs {x}");
    }
}

#[test]
fn single_site_is_a_field() {
    let phi = chain_tfim(1, false, 1.5);
    let h = phi.assemble_hamiltonian(0.0).unwrap();
    assert!(linalg::max_abs(&(h + pauli::x().mapv(|z| z * 1.5))) < 1e-15);
}

#[test]
fn ground_energy_matches_power_iteration() {
    let phi = chain_tfim(4, false, 2.0);
    let h = phi.assemble_hamiltonian(0.0).unwrap();
    let sd = diagonalize(&h).unwrap();
    let (e0, _) = power_lowest(&h, &[]);
    assert!((sd.energies()[0] - e0).abs() < 1e-8);
}

#[test]
fn periodic_chain_matches_free_fermions() {
    // With antiperiodic fermion momenta k = π(2m+1)/n the even-parity
    // ground energy is -Σ_k √(1 + g² - 2g cos k).
    let (n, g) = (8usize, 2.0f64);
    let dispersion = |k: f64| (1.0 + g * g - 2.0 * g * k.cos()).sqrt();
    let e0: f64 = -(0..n).map(|m| dispersion(PI * (2 * m + 1) as f64 / n as f64)).sum::<f64>();
    let phi = chain_tfim(n, true, g);
    let h = phi.assemble_hamiltonian(0.0).unwrap();
    let sd = diagonalize(&h).unwrap();
    assert!((sd.energies()[0] - e0).abs() < 1e-10);

    // The gap from the library agrees with a deflated power iteration.
    let split = split_spectrum(&sd, &SplitRule::LowestK { k: 1 }, 0.0).unwrap();
    let (g0, v0) = power_lowest(&h, &[]);
    let (g1, _) = power_lowest(&h, &[v0]);
    assert!((split.gap - (g1 - g0)).abs() < 1e-7, "{} vs {}", split.gap, g1 - g0);
    assert!(split.gap > 0.0);
}

#[test]
fn ground_expectation_from_eigenvector() {
    let phi = chain_tfim(6, false, 2.0);
    let space = phi.space();
    let h = phi.assemble_hamiltonian(0.0).unwrap();
    let sd = diagonalize(&h).unwrap();
    let split = split_spectrum(&sd, &SplitRule::LowestK { k: 1 }, 0.0).unwrap();
    let (_, v) = power_lowest(&h, &[]);
    for letters in ["Z", "X"] {
        let a = pauli::string(letters, &[3]).unwrap();
        let lib = filterlab::spectra::patch_local_expectation(&sd, &split, &a, &space).unwrap();
        let oracle = linalg::inner(&v, &algebra::embed(&a, &space).unwrap().dot(&v));
        assert!((lib - oracle).norm() < 1e-8, "{letters}: {lib} vs {oracle}");
    }
}

#[test]
fn lieb_robinson_bound_by_hand() {
    let phi = chain_tfim(10, false, 2.0);
    let g = phi.graph();
    let params = LrParams::for_interaction(0.5, 1.0, &phi).unwrap();
    // Interior site: field 2 plus two bonds of diameter 1.
    let norm = 2.0 + 2.0 * 1f64.exp();
    assert!((params.interaction_norm - norm).abs() < 1e-12);
    // max_r |B_x(r)|/(r + 1) on ten sites is 9/5, at the centre with r = 4;
    // b' - b = 1/2 <= D selects the closed form.
    assert!((g.c_vol() - 1.8).abs() < 1e-15);
    let c = 1.8 / std::f64::consts::E * 2.0 * 0.5f64.exp();
    assert!((params.volume - c).abs() < 1e-12);
    let v = 2.0 * c * norm / 0.5;
    assert!((params.velocity - v).abs() < 1e-12);
    let x = Region::new(g, [0]).unwrap();
    let y = Region::new(g, [5]).unwrap();
    let expected = 2.0 / c * ((0.5 * v).exp() - 1.0) * (-2.5f64).exp();
    let got = dynamics::lr_bound(&params, g, &x, &y, 1.0, 1.0, 1.0).unwrap();
    assert!((got - expected).abs() < 1e-12 * expected);
}

#[test]
fn time_dependent_evolution_matches_spectral() {
    let phi = chain_tfim(4, false, 1.3);
    let space = phi.space();
    let sd = diagonalize(&phi.assemble_hamiltonian(0.0).unwrap()).unwrap();
    let path = DensePath::new(&phi).unwrap();
    let a = algebra::embed(&pauli::string("XZ", &[0, 1]).unwrap(), &space).unwrap();
    for t in [0.5, 2.0] {
        let spectral = dynamics::evolve(EvolutionSpec::Spectral(&sd), &a, 0.0, t).unwrap();
        let stepped = dynamics::evolve(EvolutionSpec::TimeDependent { path: &path, step: 1e-3 }, &a, 0.0, t).unwrap();
        assert!(linalg::max_abs(&(spectral - stepped)) < 1e-8);
    }
}

#[test]
fn two_level_kernel_values() {
    // H = diag(0, 1), A = |1⟩⟨0|: the single entry is i(1 - e^{-1/4β²}).
    let h = ndarray::array![[C64::new(0.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let a = ndarray::array![[C64::new(0.0, 0.0), C64::new(0.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
    let sd = diagonalize(&h).unwrap();
    for beta in [0.5, 1.0, 2.0] {
        let expected = 1.0 - (-1.0f64 / (4.0 * beta * beta)).exp();
        for method in [Method::Spectral, Method::Quadrature] {
            let out = filtering::almost_inverse_liouvillian(&sd, beta, &a, method).unwrap();
            let dev = (out[[1, 0]] - C64::new(0.0, expected)).norm();
            assert!(dev < 1e-8, "β = {beta}, {method:?}: {} vs {expected}", out[[1, 0]]);
        }
    }
}
