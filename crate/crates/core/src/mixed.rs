//! The first-level PSD witness for the mixed hierarchy: the matrix of pair
//! values `Z = (x_{ij})` and its spectrum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{QuarticField, Rational, Surd};
use crate::graph::Graph;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix has dimension 0")]
    Empty,
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
}

/// Dense symmetric matrix stored as its lower triangle, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    lower: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix { dim, lower: vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymmetricMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymmetricMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(i: usize, j: usize) -> usize {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        a * (a + 1) / 2 + b
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lower[Self::index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.lower[Self::index(i, j)] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    fn check(&self) -> Result<(), MatrixError> {
        if self.dim == 0 {
            return Err(MatrixError::Empty);
        }
        for i in 0..self.dim {
            for j in 0..=i {
                if !self.get(i, j).is_finite() {
                    return Err(MatrixError::NonFinite(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn adjacency(g: &Graph) -> Self {
        SymmetricMatrix::from_fn(g.n(), |i, j| g.has_edge(i as u32, j as u32) as u8 as f64)
    }
}

/// Ascending eigenvalues.
pub fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>, MatrixError> {
    m.check()?;
    let mut ev: Vec<f64> = m.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn min_eigenvalue(m: &SymmetricMatrix) -> Result<f64, MatrixError> {
    Ok(eigenvalues(m)?[0])
}

/// Relative Frobenius error of `Q Λ Qᵀ` against the input.
pub fn reconstruction_error(m: &SymmetricMatrix) -> Result<f64, MatrixError> {
    m.check()?;
    let dense = m.to_dense();
    let eig = dense.clone().symmetric_eigen();
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
    let norm = dense.norm().max(f64::MIN_POSITIVE);
    Ok((rebuilt - dense).norm() / norm)
}

/// `Z = (1/L)[J/(nL) + I/√n + A/(n^{3/4} L)]`, written entrywise.
pub fn build_z(g: &Graph, level: usize) -> SymmetricMatrix {
    let n = g.n() as f64;
    let l = level as f64;
    let diag = n.powf(-0.5) / l;
    let edge = n.powf(-0.75) / (l * l);
    let non_edge = 1.0 / (n * l * l);
    SymmetricMatrix::from_fn(g.n(), |i, j| {
        if i == j {
            diag
        } else if g.has_edge(i as u32, j as u32) {
            edge
        } else {
            non_edge
        }
    })
}

/// Exact entry of `Z` in `Q(n^{1/4})`.
pub fn z_entry_exact(g: &Graph, level: usize, i: u32, j: u32) -> Surd {
    let f = QuarticField::new(g.n() as u64);
    let l = Rational::from_integer(level.into());
    let inv = |r: &Rational| r.recip();
    if i == j {
        f.theta_pow(-2).mul_rational(&inv(&l))
    } else if g.has_edge(i, j) {
        f.theta_pow(-3).mul_rational(&inv(&(&l * &l)))
    } else {
        f.theta_pow(-4).mul_rational(&inv(&(&l * &l)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    #[serde(rename = "lambda_min_Z")]
    pub lambda_min_z: f64,
    #[serde(rename = "lambda_min_A")]
    pub lambda_min_a: f64,
    #[serde(rename = "bound_A")]
    pub bound_a: f64,
    #[serde(rename = "pass_Z")]
    pub pass_z: bool,
    #[serde(rename = "pass_A")]
    pub pass_a: bool,
    /// `(1/L)(n^{-1/2} + n^{-3/4} λ_min(A)/L)`, the lower bound on `λ_min(Z)`
    /// obtained by dropping the `J` term.
    pub decomposition_bound: f64,
}

impl PsdVerdict {
    pub fn pass(&self) -> bool {
        self.pass_z && self.pass_a
    }
}

/// `-4 n^{1/4} √(ln n)`.
pub fn adjacency_bound(n: usize) -> f64 {
    let n = n as f64;
    -4.0 * n.powf(0.25) * n.ln().sqrt()
}

/// Smallest level at which `A ⪰ adjacency_bound(n)·I` alone forces
/// `I/√n + A/(n^{3/4} L) ⪰ 0`, hence `Z ⪰ 0`: `⌈4 √(ln n)⌉`.
pub fn certified_level(n: usize) -> usize {
    (4.0 * (n as f64).ln().max(0.0).sqrt()).ceil().max(1.0) as usize
}

pub fn check_mixed_psd(g: &Graph, level: usize, tol: f64) -> Result<PsdVerdict, MatrixError> {
    let lz = min_eigenvalue(&build_z(g, level))?;
    let la = min_eigenvalue(&SymmetricMatrix::adjacency(g))?;
    let bound_a = adjacency_bound(g.n());
    let n = g.n() as f64;
    let l = level as f64;
    Ok(PsdVerdict {
        lambda_min_z: lz,
        lambda_min_a: la,
        bound_a,
        pass_z: lz >= -tol,
        pass_a: la >= bound_a,
        decomposition_bound: (n.powf(-0.5) + n.powf(-0.75) * la / l) / l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_gnp, GnpParams};
    use crate::sa::{build_sa_solution, SaValues};
    use proptest::prelude::*;

    #[test]
    fn small_spectra() {
        assert!((min_eigenvalue(&SymmetricMatrix::identity(5)).unwrap() - 1.0).abs() < 1e-12);
        let j = SymmetricMatrix::from_fn(4, |_, _| 1.0);
        assert!(min_eigenvalue(&j).unwrap().abs() < 1e-12);
        let x = SymmetricMatrix::from_fn(2, |i, j| (i != j) as u8 as f64);
        assert!((min_eigenvalue(&x).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(min_eigenvalue(&SymmetricMatrix::zeros(0)), Err(MatrixError::Empty));
        let mut bad = SymmetricMatrix::identity(2);
        bad.set(1, 0, f64::NAN);
        assert_eq!(min_eigenvalue(&bad), Err(MatrixError::NonFinite(1, 0)));
    }

    #[test]
    fn z_on_empty_pair() {
        let g = Graph::empty(2);
        let z = build_z(&g, 1);
        assert!((z.get(0, 0) - 2f64.powf(-0.5)).abs() < 1e-15);
        assert!((z.get(0, 1) - 0.5).abs() < 1e-15);
        let big = Graph::empty(10_000);
        assert!((z_entry_exact(&big, 10, 3, 3).to_f64() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn clique_and_matching_pass() {
        let v = check_mixed_psd(&Graph::complete(30), 3, 1e-8).unwrap();
        assert!(v.pass());
        let v = check_mixed_psd(&Graph::perfect_matching(500), 2, 1e-8).unwrap();
        assert!((v.lambda_min_a + 1.0).abs() < 1e-9);
        assert!(v.pass());
    }

    #[test]
    fn z_matches_pair_values() {
        let g = gen_gnp(GnpParams::standard(500, 4)).unwrap();
        let sol = build_sa_solution(&g, 3).unwrap();
        for i in 0..500u32 {
            assert_eq!(z_entry_exact(&g, 3, i, i), sol.value(&[i]).unwrap());
        }
        // Off-diagonal equality needs a common neighbour for every non-edge.
        for i in (0..500u32).step_by(7) {
            for j in i + 1..500 {
                assert_eq!(z_entry_exact(&g, 3, i, j), sol.value(&[i, j]).unwrap(), "({i}, {j})");
            }
        }
    }

    #[test]
    fn decomposition_bound_holds() {
        let g = gen_gnp(GnpParams::standard(200, 9)).unwrap();
        let v = check_mixed_psd(&g, 3, 1e-8).unwrap();
        assert!(v.lambda_min_z >= v.decomposition_bound - 1e-10);
    }

    #[test]
    fn level_three_is_below_the_certified_level() {
        assert_eq!(certified_level(500), 10);
        assert_eq!(certified_level(1000), 11);
        let g = gen_gnp(GnpParams::standard(500, 1)).unwrap();
        let low = check_mixed_psd(&g, 3, 1e-8).unwrap();
        assert!(low.pass_a && !low.pass_z, "{low:?}");
        let high = check_mixed_psd(&g, certified_level(500), 1e-8).unwrap();
        assert!(high.pass(), "{high:?}");
        assert!(high.decomposition_bound > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reconstruction_is_accurate(entries in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let m = SymmetricMatrix::from_fn(8, |i, j| entries[(i * 8 + j) % 36]);
            prop_assert!(reconstruction_error(&m).unwrap() <= 1e-8);
        }
    }
}
