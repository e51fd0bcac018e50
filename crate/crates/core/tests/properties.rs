use filterlab::algebra::{self, pauli, LocalOperator, Space};
use filterlab::clustering;
use filterlab::dynamics::{self, EvolutionSpec};
use filterlab::filtering::{self, Method};
use filterlab::harness::{self, fit_exponential, Abscissa, DecayCurve, Row};
use filterlab::interaction::{tfim, xy_charge, CoeffPath};
use filterlab::lattice::{build_chain, build_torus, fatten, Region, SiteGraph};
use filterlab::linalg::{self, CMat, C64};
use filterlab::qhe;
use filterlab::spectra::{diagonalize, split_spectrum, SplitRule};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graphs() -> Vec<SiteGraph> {
    vec![
        build_chain(7, false).unwrap(),
        build_chain(8, true).unwrap(),
        build_torus(3, 3).unwrap(),
        build_torus(3, 4).unwrap(),
    ]
}

fn random_local(support: Vec<usize>, rng: &mut ChaCha8Rng) -> LocalOperator {
    let dim = 1 << support.len();
    let re = harness::random_hermitian(dim, rng);
    let im = harness::random_hermitian(dim, rng);
    LocalOperator::qubit(support, re + im.mapv(|z| z * C64::new(0.0, 1.0))).unwrap()
}

fn random_region(g: &SiteGraph, rng: &mut ChaCha8Rng) -> Region {
    let n = g.n_sites();
    let size = rng.random_range(1..=n.min(4));
    let mut sites: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        sites.swap(i, j);
    }
    Region::new(g, sites[..size].iter().copied()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balls_obey_the_volume_inequality(gi in 0usize..4) {
        let g = &graphs()[gi];
        let d = g.dimension() as i32;
        for x in 0..g.n_sites() {
            for r in 0..=g.diameter() + 1 {
                prop_assert!(g.ball_size(x, r) as f64 <= g.c_vol() * ((r + 1) as f64).powi(d) + 1e-12);
            }
        }
    }

    #[test]
    fn volume_constant_dominates(gi in 0usize..4, b in 0.2f64..3.0, k in 1u32..3, seed in any::<u64>()) {
        let g = &graphs()[gi];
        let c = filterlab::lattice::volume_constant(b, k as f64, g.dimension(), g.c_vol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            let z = random_region(g, &mut rng);
            let lhs = (z.len() as f64).powi(k as i32) * (-b * z.diameter() as f64).exp();
            prop_assert!(lhs <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fattening_composes(gi in 0usize..4, j in 0usize..3, k in 0usize..3, seed in any::<u64>()) {
        let g = &graphs()[gi];
        let x = random_region(g, &mut ChaCha8Rng::seed_from_u64(seed));
        let once = fatten(g, &x, j + k).unwrap();
        let twice = fatten(g, &fatten(g, &x, j).unwrap(), k).unwrap();
        prop_assert_eq!(once.sites(), twice.sites());
        prop_assert!(x.is_subset(&fatten(g, &x, j).unwrap()));
    }

    #[test]
    fn embedding_is_multiplicative(seed in any::<u64>(), site in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = Space::qubits(5);
        let support = vec![site, site + 1];
        let a = random_local(support.clone(), &mut rng);
        let b = random_local(support.clone(), &mut rng);
        let ab = LocalOperator::qubit(support, a.matrix().dot(b.matrix())).unwrap();
        let lhs = algebra::embed(&ab, &space).unwrap();
        let rhs = algebra::embed(&a, &space).unwrap().dot(&algebra::embed(&b, &space).unwrap());
        prop_assert!(linalg::max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn conditional_expectation_is_a_projection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = build_chain(5, false).unwrap();
        let space = Space::qubits(5);
        let x = random_region(&g, &mut rng);
        let a = harness::random_hermitian(space.dim(), &mut rng);
        let once = algebra::conditional_expectation(&a, &x, &space).unwrap();
        let twice = algebra::conditional_expectation(&once, &x, &space).unwrap();
        prop_assert!(linalg::max_abs(&(&twice - &once)) < 1e-12);
        let local = random_local(x.sites().to_vec(), &mut rng);
        let embedded = algebra::embed(&local, &space).unwrap();
        let kept = algebra::conditional_expectation(&embedded, &x, &space).unwrap();
        prop_assert!(linalg::max_abs(&(kept - embedded)) < 1e-12);
    }

    #[test]
    fn holder_inequality(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = harness::random_hermitian(6, &mut rng);
        let b = harness::random_hermitian(6, &mut rng);
        let lhs = algebra::schatten_norm(&a.dot(&b), 1.0).unwrap();
        let rhs = algebra::schatten_norm(&a, 1.0).unwrap() * algebra::schatten_norm(&b, f64::INFINITY).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn interaction_norm_grows_with_decay_rate(b in 0.1f64..2.0, db in 0.0f64..1.0, g in 0.5f64..3.0) {
        let chain = build_chain(6, false).unwrap();
        let phi = tfim(&chain, CoeffPath::constant(1.0), CoeffPath::constant(g)).unwrap();
        prop_assert!(phi.default_norm(b).unwrap() <= phi.default_norm(b + db).unwrap());
    }

    #[test]
    fn assembly_ignores_term_order(seed in any::<u64>()) {
        let chain = build_chain(5, false).unwrap();
        let phi = tfim(&chain, CoeffPath::constant(1.0), CoeffPath::linear(2.0, 3.0)).unwrap();
        let mut order: Vec<usize> = (0..phi.terms().len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut shuffled = filterlab::interaction::Interaction::new(&chain, 2);
        for &i in &order {
            let t = &phi.terms()[i];
            shuffled.push(t.op.clone(), t.coeff.clone()).unwrap();
        }
        for s in [0.0, 0.4, 1.0] {
            let a = phi.assemble_hamiltonian(s).unwrap();
            let b = shuffled.assemble_hamiltonian(s).unwrap();
            prop_assert!(linalg::max_abs(&(a - b)) < 1e-13);
        }
    }

    #[test]
    fn hopping_conserves_charge(j in -1.0f64..1.0, h in 0.0f64..2.0) {
        let g = build_torus(2, 3).unwrap();
        let phi = xy_charge(&g, CoeffPath::linear(j, -j), h).unwrap();
        let q = qhe::region_charge(&Region::all(&g), &phi.space()).unwrap();
        prop_assert!(phi.charge_defect(&q, &[0.0, 0.3, 1.0]).unwrap() < 1e-12);
    }

    #[test]
    fn patch_projector_and_blocks(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = harness::random_hermitian(8, &mut rng);
        let sd = diagonalize(&h).unwrap();
        let split = split_spectrum(&sd, &SplitRule::LowestK { k }, 0.0).unwrap();
        let p = split.projector(&sd);
        let mut outer = CMat::zeros((8, 8));
        for &mu in &split.sigma0 {
            let v = sd.eigenvector(mu);
            for i in 0..8 {
                for j in 0..8 {
                    outer[[i, j]] += v[i] * v[j].conj();
                }
            }
        }
        prop_assert!(linalg::max_abs(&(&p - &outer)) < 1e-10);
        prop_assert!((algebra::schatten_norm(&p, 1.0).unwrap() - split.rank as f64).abs() < 1e-10);
        let q = linalg::eye(8) - &p;
        let a = harness::random_hermitian(8, &mut rng);
        let blocks = p.dot(&a).dot(&p) + p.dot(&a).dot(&q) + q.dot(&a).dot(&p) + q.dot(&a).dot(&q);
        prop_assert!(linalg::max_abs(&(blocks - a)) < 1e-12);
    }

    #[test]
    fn evolution_group_law(seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = diagonalize(&harness::random_hermitian(4, &mut rng)).unwrap();
        let a = harness::random_hermitian(4, &mut rng);
        let spec = EvolutionSpec::Spectral(&sd);
        let two_step = dynamics::evolve(spec, &dynamics::evolve(spec, &a, t, s + t).unwrap(), 0.0, t).unwrap();
        let direct = dynamics::evolve(spec, &a, 0.0, s + t).unwrap();
        prop_assert!(linalg::max_abs(&(two_step - direct)) < 1e-10);
    }

    #[test]
    fn smearing_is_linear(seed in any::<u64>(), c in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = diagonalize(&harness::random_hermitian(4, &mut rng)).unwrap();
        let a = harness::random_hermitian(4, &mut rng);
        let b = harness::random_hermitian(4, &mut rng);
        let f = filtering::GaussianFilter::new(0.8).unwrap();
        let spec = EvolutionSpec::Spectral(&sd);
        let combined = dynamics::smear(spec, &f, &(&a + &b.mapv(|z| z * c))).unwrap();
        let separate = dynamics::smear(spec, &f, &a).unwrap() + dynamics::smear(spec, &f, &b).unwrap().mapv(|z| z * c);
        prop_assert!(linalg::max_abs(&(combined - separate)) < 1e-10);
    }

    #[test]
    fn liouvillian_maps_are_linear_and_hermitian(seed in any::<u64>(), beta in 0.3f64..2.0, c in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = diagonalize(&harness::random_hermitian(6, &mut rng)).unwrap();
        let split = split_spectrum(&sd, &SplitRule::LowestK { k: 1 }, 0.0).unwrap();
        let a = harness::random_hermitian(6, &mut rng);
        let b = harness::random_hermitian(6, &mut rng);
        let mix = &a + &b.mapv(|z| z * c);
        let almost = |x: &CMat| filtering::almost_inverse_liouvillian(&sd, beta, x, Method::Spectral).unwrap();
        let step = |x: &CMat| filtering::erf_step_map(&sd, &split, beta, x).unwrap();
        prop_assert!(linalg::max_abs(&(almost(&mix) - almost(&a) - almost(&b).mapv(|z| z * c))) < 1e-10);
        prop_assert!(linalg::max_abs(&(step(&mix) - step(&a) - step(&b).mapv(|z| z * c))) < 1e-10);
        prop_assert!(linalg::hermiticity_defect(&almost(&a)) < 1e-10);
        // The exact map needs a split whose cross frequencies clear γ/2.
        if split.gap > 1e-3 {
            let x = filtering::cross_patch_part(&sd, &split, &a).unwrap();
            let exact = filtering::exact_inverse_liouvillian(&sd, &split, &x).unwrap();
            prop_assert!(linalg::hermiticity_defect(&exact) < 1e-10);
        }
    }

    #[test]
    fn kernel_distance_to_inverse(omega in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0], beta in 0.05f64..3.0) {
        let k = filtering::almost_inverse_kernel(omega, beta);
        let gap = (k - C64::new(0.0, 1.0 / omega)).norm();
        let expected = (-omega * omega / (4.0 * beta * beta)).exp() / omega.abs();
        prop_assert!((gap - expected).abs() <= 1e-12 * (1.0 / omega.abs()));
    }

    #[test]
    fn correlation_terms_sum_to_correlation(seed in any::<u64>(), d in 1usize..4) {
        let chain = build_chain(6, false).unwrap();
        let phi = tfim(&chain, CoeffPath::constant(1.0), CoeffPath::constant(2.0)).unwrap();
        let space = phi.space();
        let sd = diagonalize(&phi.assemble_hamiltonian(0.0).unwrap()).unwrap();
        let split = split_spectrum(&sd, &SplitRule::LowestK { k: 2 }, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_local(vec![0], &mut rng);
        let b = random_local(vec![d + 1], &mut rng);
        let beta = clustering::clustering_width(split.gap, d);
        for omega in clustering::random_patch_states(&sd, &split, 2, seed) {
            let t = clustering::decompose_correlation(&sd, &split, beta, &a, &b, &omega, &space).unwrap();
            prop_assert!(t.sum_defect() < 1e-10);
        }
    }

    #[test]
    fn csv_round_trips_exactly(values in prop::collection::vec((-1e6f64..1e6, 0.0f64..1e3, prop::option::of(0.0f64..1e3)), 1..20)) {
        let rows: Vec<Row> = values.iter().map(|&(x, value, bound)| Row { x, value, bound }).collect();
        let csv = harness::render_csv(&rows);
        for (line, row) in csv.lines().skip(1).zip(&rows) {
            let cells: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(cells[0].parse::<f64>().unwrap(), row.x);
            prop_assert_eq!(cells[1].parse::<f64>().unwrap(), row.value);
            match row.bound {
                Some(b) => prop_assert_eq!(cells[2].parse::<f64>().unwrap(), b),
                None => prop_assert_eq!(cells[2], ""),
            }
        }
    }

    #[test]
    fn fit_recovers_exponentials(rate in -2.0f64..2.0, pre in 0.1f64..10.0, n in 3usize..12) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.5).collect();
        let values = x.iter().map(|&t| pre * (-rate * t).exp()).collect();
        let curve = DecayCurve::new(Abscissa::Distance, x, values, 0.0).unwrap();
        let fit = fit_exponential(&curve).unwrap();
        prop_assert!((fit.rate - rate).abs() < 1e-9);
        prop_assert!((fit.prefactor - pre).abs() < 1e-9 * pre);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r_squared));
    }
}

#[test]
fn pauli_strings_square_to_identity() {
    let space = Space::qubits(3);
    for s in ["X", "Y", "Z"] {
        let p = algebra::embed(&pauli::string(s, &[1]).unwrap(), &space).unwrap();
        assert!(linalg::max_abs(&(p.dot(&p) - space.identity())) < 1e-15);
    }
}
