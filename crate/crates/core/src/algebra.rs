//! Tensor-product operator algebra on `q`-level sites.
//!
//! Global indices follow site order with site 0 as the most significant
//! digit: `i = sum_s d_s q^{N-1-s}`. A local operator's matrix uses the same
//! convention restricted to its (sorted) support.

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::linalg::{self, CMat, CVec, C64, I, ONE, ZERO};

pub type GlobalOperator = CMat;

/// The tensor-product Hilbert space of `n_sites` sites with `q` levels each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space {
    pub n_sites: usize,
    pub q: usize,
}

impl Space {
    pub fn qubits(n_sites: usize) -> Self {
        Space { n_sites, q: 2 }
    }

    pub fn dim(&self) -> usize {
        self.q.pow(self.n_sites as u32)
    }

    pub fn identity(&self) -> GlobalOperator {
        linalg::eye(self.dim())
    }

    pub fn check(&self, a: &CMat) -> Result<()> {
        let d = self.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: a.nrows(),
            });
        }
        Ok(())
    }

    /// Offsets for embedding operators on `support`: one offset per local
    /// basis state and one per basis state of the complement.
    fn offsets(&self, support: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = self.n_sites;
        let q = self.q;
        let weight = |s: usize| q.pow((n - 1 - s) as u32);
        let rest: Vec<usize> = (0..n).filter(|s| support.binary_search(s).is_err()).collect();
        (digit_offsets(support, q, weight), digit_offsets(&rest, q, weight))
    }
}

fn digit_offsets(sites: &[usize], q: usize, weight: impl Fn(usize) -> usize) -> Vec<usize> {
    let count = q.pow(sites.len() as u32);
    (0..count)
        .map(|mut a| {
            let mut off = 0;
            for &s in sites.iter().rev() {
                off += (a % q) * weight(s);
                a /= q;
            }
            off
        })
        .collect()
}

/// A dense operator on a finite set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    support: Vec<usize>,
    matrix: CMat,
    q: usize,
}

impl LocalOperator {
    /// Builds an operator whose matrix legs follow the order of `support`.
    /// The support is sorted and the legs permuted to match.
    pub fn new(support: Vec<usize>, matrix: CMat, q: usize) -> Result<Self> {
        let k = support.len();
        let d = q.pow(k as u32);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| support[i]);
        let sorted: Vec<usize> = order.iter().map(|&i| support[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("support has repeated sites".into()));
        }
        let matrix = if order.iter().enumerate().all(|(i, &o)| i == o) {
            matrix
        } else {
            permute_legs(&matrix, &order, q)
        };
        Ok(LocalOperator {
            support: sorted,
            matrix,
            q,
        })
    }

    pub fn qubit(support: Vec<usize>, matrix: CMat) -> Result<Self> {
        LocalOperator::new(support, matrix, 2)
    }

    /// As [`LocalOperator::new`], additionally requiring Hermiticity to 1e-12.
    pub fn hermitian(support: Vec<usize>, matrix: CMat, q: usize) -> Result<Self> {
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect });
        }
        LocalOperator::new(support, matrix, q)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn scaled(&self, c: C64) -> LocalOperator {
        LocalOperator {
            support: self.support.clone(),
            matrix: self.matrix.mapv(|z| z * c),
            q: self.q,
        }
    }

    pub fn norm(&self) -> Result<f64> {
        linalg::operator_norm(&self.matrix)
    }

    fn check_in(&self, space: &Space) -> Result<()> {
        if self.q != space.q {
            return Err(Error::Dimension {
                expected: space.q,
                found: self.q,
            });
        }
        if let Some(&s) = self.support.iter().find(|&&s| s >= space.n_sites) {
            return Err(Error::SiteOutOfRange {
                site: s,
                n_sites: space.n_sites,
            });
        }
        Ok(())
    }

    /// `(A ⊗ 1) x` without forming the global matrix.
    pub fn apply_to_vector(&self, space: &Space, x: &CVec) -> Result<CVec> {
        self.check_in(space)?;
        if x.len() != space.dim() {
            return Err(Error::Dimension {
                expected: space.dim(),
                found: x.len(),
            });
        }
        let (loc, rest) = space.offsets(&self.support);
        let mut y = CVec::zeros(x.len());
        let mut buf = vec![ZERO; loc.len()];
        for &r in &rest {
            for (b, &lb) in loc.iter().enumerate() {
                buf[b] = x[lb + r];
            }
            for (a, &la) in loc.iter().enumerate() {
                let mut acc = ZERO;
                for (b, &xb) in buf.iter().enumerate() {
                    acc += self.matrix[[a, b]] * xb;
                }
                y[la + r] = acc;
            }
        }
        Ok(y)
    }

    /// `<x, (A ⊗ 1) x>`.
    pub fn expectation(&self, space: &Space, x: &CVec) -> Result<C64> {
        Ok(linalg::inner(x, &self.apply_to_vector(space, x)?))
    }
}

/// Reorders tensor legs: output leg `i` is input leg `order[i]`.
fn permute_legs(m: &CMat, order: &[usize], q: usize) -> CMat {
    let k = order.len();
    let d = m.nrows();
    let map: Vec<usize> = (0..d)
        .map(|new| {
            let mut digits = vec![0usize; k];
            let mut a = new;
            for i in (0..k).rev() {
                digits[i] = a % q;
                a /= q;
            }
            let mut old_digits = vec![0usize; k];
            for i in 0..k {
                old_digits[order[i]] = digits[i];
            }
            old_digits.iter().fold(0, |acc, &dg| acc * q + dg)
        })
        .collect();
    CMat::from_shape_fn((d, d), |(i, j)| m[[map[i], map[j]]])
}

/// `A ⊗ 1` on the full space.
pub fn embed(a: &LocalOperator, space: &Space) -> Result<GlobalOperator> {
    let mut out = CMat::zeros((space.dim(), space.dim()));
    embed_into(&mut out, a, ONE, space)?;
    Ok(out)
}

/// `acc += c · (A ⊗ 1)`.
pub fn embed_into(acc: &mut CMat, a: &LocalOperator, c: C64, space: &Space) -> Result<()> {
    a.check_in(space)?;
    space.check(acc)?;
    let (loc, rest) = space.offsets(&a.support);
    for (i, &li) in loc.iter().enumerate() {
        for (j, &lj) in loc.iter().enumerate() {
            let v = a.matrix[[i, j]] * c;
            if v == ZERO {
                continue;
            }
            for &r in &rest {
                acc[[li + r, lj + r]] += v;
            }
        }
    }
    Ok(())
}

/// Normalized partial trace over the complement of `x`, returned as an
/// operator on `x`.
pub fn reduce(a: &GlobalOperator, x: &Region, space: &Space) -> Result<LocalOperator> {
    space.check(a)?;
    if let Some(&s) = x.sites().iter().find(|&&s| s >= space.n_sites) {
        return Err(Error::SiteOutOfRange {
            site: s,
            n_sites: space.n_sites,
        });
    }
    let (loc, rest) = space.offsets(x.sites());
    let norm = 1.0 / rest.len() as f64;
    let reduced = CMat::from_shape_fn((loc.len(), loc.len()), |(i, j)| {
        let s: C64 = rest.iter().map(|&r| a[[loc[i] + r, loc[j] + r]]).sum();
        s * norm
    });
    Ok(LocalOperator {
        support: x.sites().to_vec(),
        matrix: reduced,
        q: space.q,
    })
}

/// `E_X(A) = (q^{-|X^c|} Tr_{X^c} A) ⊗ 1`.
pub fn conditional_expectation(a: &GlobalOperator, x: &Region, space: &Space) -> Result<GlobalOperator> {
    embed(&reduce(a, x, space)?, space)
}

/// Schatten `p`-norm; `p = f64::INFINITY` is the operator norm.
pub fn schatten_norm(a: &CMat, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Schatten index must be >= 1, got {p}")));
    }
    if p == 2.0 {
        return Ok(a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    if p.is_infinite() {
        return linalg::operator_norm(a);
    }
    let s = singular_values_fast(a)?;
    Ok(s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p))
}

fn singular_values_fast(a: &CMat) -> Result<Vec<f64>> {
    let scale = linalg::max_abs(a);
    if scale > 0.0 && a.nrows() == a.ncols() && linalg::hermiticity_defect(a) <= 1e-13 * scale {
        let w = linalg::eigvalsh(&linalg::hermitian_part(a))?;
        return Ok(w.iter().map(|x| x.abs()).collect());
    }
    linalg::singular_values(a)
}

/// `L_H(A) = -i[H, A]`.
pub fn liouvillian_apply(h: &GlobalOperator, a: &GlobalOperator) -> Result<GlobalOperator> {
    if h.dim() != a.dim() {
        return Err(Error::Dimension {
            expected: h.nrows(),
            found: a.nrows(),
        });
    }
    Ok(linalg::commutator(h, a).mapv(|z| -I * z))
}

pub mod pauli {
    use super::*;
    use ndarray::array;

    pub fn identity() -> CMat {
        linalg::eye(2)
    }

    pub fn x() -> CMat {
        array![[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn y() -> CMat {
        array![[ZERO, -I], [I, ZERO]]
    }

    pub fn z() -> CMat {
        array![[ONE, ZERO], [ZERO, -ONE]]
    }

    pub fn by_name(c: char) -> Result<CMat> {
        match c.to_ascii_uppercase() {
            'I' => Ok(identity()),
            'X' => Ok(x()),
            'Y' => Ok(y()),
            'Z' => Ok(z()),
            other => Err(Error::InvalidParameter(format!("unknown Pauli letter '{other}'"))),
        }
    }

    /// Tensor product of Pauli letters placed on `sites`, e.g. `("ZZ", [3, 4])`.
    pub fn string(letters: &str, sites: &[usize]) -> Result<LocalOperator> {
        let chars: Vec<char> = letters.chars().collect();
        if chars.len() != sites.len() || chars.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "Pauli string '{letters}' does not match {} sites",
                sites.len()
            )));
        }
        let mut m = by_name(chars[0])?;
        for &c in &chars[1..] {
            m = linalg::kron(&m, &by_name(c)?);
        }
        LocalOperator::qubit(sites.to_vec(), m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_chain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_shape_fn((d, d), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// Partial trace by explicit digit summation, keeping `keep` (sorted).
    fn partial_trace_oracle(a: &CMat, n: usize, keep: &[usize]) -> CMat {
        let k = keep.len();
        let dk = 1usize << k;
        let mut out = CMat::zeros((dk, dk));
        let digit = |i: usize, s: usize| (i >> (n - 1 - s)) & 1;
        for i in 0..(1usize << n) {
            for j in 0..(1usize << n) {
                let traced_equal = (0..n).filter(|s| !keep.contains(s)).all(|s| digit(i, s) == digit(j, s));
                if !traced_equal {
                    continue;
                }
                let li = keep.iter().fold(0, |acc, &s| acc * 2 + digit(i, s));
                let lj = keep.iter().fold(0, |acc, &s| acc * 2 + digit(j, s));
                out[[li, lj]] += a[[i, j]];
            }
        }
        out.mapv(|z| z / (1usize << (n - k)) as f64)
    }

    #[test]
    fn sigma_z_on_first_site_is_most_significant() {
        let space = Space::qubits(2);
        let z0 = embed(&pauli::string("Z", &[0]).unwrap(), &space).unwrap();
        let d: Vec<f64> = z0.diag().iter().map(|c| c.re).collect();
        assert_eq!(d, vec![1.0, 1.0, -1.0, -1.0]);
        let z1 = embed(&pauli::string("Z", &[1]).unwrap(), &space).unwrap();
        let d: Vec<f64> = z1.diag().iter().map(|c| c.re).collect();
        assert_eq!(d, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn unsorted_support_is_permuted() {
        let space = Space::qubits(3);
        let a = pauli::string("XZ", &[2, 0]).unwrap();
        assert_eq!(a.support(), &[0, 2]);
        let direct = embed(&pauli::string("ZX", &[0, 2]).unwrap(), &space).unwrap();
        assert_eq!(embed(&a, &space).unwrap(), direct);
    }

    #[test]
    fn identity_and_disjoint_commutation() {
        let space = Space::qubits(3);
        let id = LocalOperator::qubit(vec![1], linalg::eye(2)).unwrap();
        assert_eq!(embed(&id, &space).unwrap(), space.identity());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = embed(&LocalOperator::qubit(vec![0], random_matrix(2, &mut rng)).unwrap(), &space).unwrap();
        let b = embed(&LocalOperator::qubit(vec![1, 2], random_matrix(4, &mut rng)).unwrap(), &space).unwrap();
        assert!(linalg::max_abs(&linalg::commutator(&a, &b)) < 1e-14);
    }

    #[test]
    fn conditional_expectation_matches_partial_trace_oracle() {
        let g = build_chain(3, false).unwrap();
        let space = Space::qubits(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(8, &mut rng);
        for keep in [vec![0], vec![1], vec![0, 2], vec![]] {
            let x = Region::new(&g, keep.clone()).unwrap();
            let red = reduce(&a, &x, &space).unwrap();
            let oracle = partial_trace_oracle(&a, 3, &keep);
            assert!(linalg::max_abs(&(red.matrix() - &oracle)) < 1e-14);
        }
    }

    #[test]
    fn conditional_expectation_examples() {
        let g = build_chain(3, false).unwrap();
        let space = Space::qubits(3);
        let x = Region::new(&g, [0, 1]).unwrap();
        let inside = embed(&pauli::string("XY", &[0, 1]).unwrap(), &space).unwrap();
        assert!(linalg::max_abs(&(conditional_expectation(&inside, &x, &space).unwrap() - &inside)) < 1e-15);
        let outside = embed(&pauli::string("X", &[2]).unwrap(), &space).unwrap();
        assert!(linalg::max_abs(&conditional_expectation(&outside, &x, &space).unwrap()) < 1e-15);
    }

    #[test]
    fn schatten_examples() {
        let mut p = CMat::zeros((4, 4));
        p[[0, 0]] = ONE;
        p[[2, 2]] = ONE;
        assert!((schatten_norm(&p, 1.0).unwrap() - 2.0).abs() < 1e-13);
        assert!((schatten_norm(&p, f64::INFINITY).unwrap() - 1.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(8, &mut rng);
        let s = linalg::singular_values(&a).unwrap();
        assert!((schatten_norm(&a, 1.0).unwrap() - s.iter().sum::<f64>()).abs() < 1e-12);
        assert!((schatten_norm(&a, f64::INFINITY).unwrap() - s[0]).abs() < 1e-12);
        assert!(schatten_norm(&a, 0.5).is_err());
    }

    #[test]
    fn liouvillian_two_level() {
        let mut h = CMat::zeros((2, 2));
        h[[1, 1]] = ONE;
        let mut a = CMat::zeros((2, 2));
        a[[1, 0]] = ONE;
        let l = liouvillian_apply(&h, &a).unwrap();
        assert!(linalg::max_abs(&(l - a.mapv(|z| -I * z))) < 1e-15);
        assert!(liouvillian_apply(&h, &linalg::eye(4)).is_err());
    }

    #[test]
    fn apply_to_vector_matches_embedding() {
        let space = Space::qubits(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = LocalOperator::qubit(vec![3, 1], random_matrix(4, &mut rng)).unwrap();
        let x = CVec::from_shape_fn(16, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let y = op.apply_to_vector(&space, &x).unwrap();
        let z = embed(&op, &space).unwrap().dot(&x);
        assert!((&y - &z).iter().all(|c| c.norm() < 1e-13));
    }
}
