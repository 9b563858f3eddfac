//! The affine space of assignments satisfying every constraint of a CSP whose
//! code is linear.

use num_bigint::BigUint;
use rand::Rng as _;

use super::LasserreError;
use crate::codes::field::{Arith, Field};
use crate::codes::linalg::{self, Matrix};
use crate::csp::CspInstance;

/// `A = p + span(B)` inside `F_q^n`, with `B` in reduced row echelon form.
#[derive(Clone, Debug)]
pub struct SolutionSpace {
    field: Field,
    n: usize,
    rank: usize,
    particular: Vec<u32>,
    basis: Matrix,
}

impl SolutionSpace {
    /// Each constraint `x|_T + b ∈ C` becomes `H x|_T = -H b`.
    pub fn from_instance(inst: &CspInstance) -> Result<Self, LasserreError> {
        let f = inst.code().field().clone();
        let n = inst.n();
        let mut rows: Matrix = Vec::new();
        let mut rhs = Vec::new();
        for c in inst.constraints() {
            for h in inst.code().parity() {
                let mut row = vec![0u32; n];
                let mut b = 0;
                for ((&v, &hv), &s) in c.vars.iter().zip(h).zip(&c.shift) {
                    row[v as usize] = f.add(row[v as usize], hv);
                    b = f.add(b, f.mul(hv, s));
                }
                rows.push(row);
                rhs.push(f.neg(b));
            }
        }
        SolutionSpace::from_system(f, n, &rows, &rhs)
    }

    /// Solutions of `rows · x = rhs`.
    pub fn from_system(field: Field, n: usize, rows: &[Vec<u32>], rhs: &[u32]) -> Result<Self, LasserreError> {
        let particular = if rows.is_empty() {
            vec![0; n]
        } else {
            linalg::solve(&field, rows, rhs, n).ok_or(LasserreError::EmptySpace)?
        };
        let rank = if rows.is_empty() { 0 } else { linalg::rank(&field, rows) };
        let basis = if rows.is_empty() {
            (0..n).map(|i| (0..n).map(|j| (i == j) as u32).collect()).collect()
        } else {
            linalg::nullspace(&field, rows, n)
        };
        Ok(SolutionSpace { field, n, rank, particular, basis })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `n - rank`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `|A| = q^{dim}`.
    pub fn size(&self) -> BigUint {
        BigUint::from(self.field.q()).pow(self.dim() as u32)
    }

    pub fn particular(&self) -> &[u32] {
        &self.particular
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn element(&self, coeffs: &[u32]) -> Vec<u32> {
        let f = &self.field;
        let mut x = self.particular.clone();
        for (c, row) in coeffs.iter().zip(&self.basis) {
            for (xi, &b) in x.iter_mut().zip(row) {
                *xi = f.add(*xi, f.mul(*c, b));
            }
        }
        x
    }

    pub fn sample(&self, rng: &mut crate::rng::Rng) -> Vec<u32> {
        let coeffs: Vec<u32> = (0..self.dim()).map(|_| rng.gen_range(0..self.field.q())).collect();
        self.element(&coeffs)
    }

    /// For the partial assignment `pairs` (distinct variables), the rank `r`
    /// of the induced system on basis coefficients, so that a `q^{-r}`
    /// fraction of `A` agrees with it; `None` when no element agrees.
    pub fn agreement_rank(&self, pairs: &[(u32, u32)]) -> Option<usize> {
        let f = &self.field;
        let d = self.dim();
        if d == 0 {
            return pairs.iter().all(|&(v, x)| self.particular[v as usize] == x).then_some(0);
        }
        // incremental elimination; each stored row has a unit pivot
        let w = d + 1;
        let mut echelon: Vec<u32> = Vec::with_capacity(w * d.min(pairs.len()));
        let mut pivots: Vec<usize> = Vec::with_capacity(d);
        let mut row = vec![0u32; w];
        for &(v, x) in pairs {
            for (k, b) in self.basis.iter().enumerate() {
                row[k] = b[v as usize];
            }
            row[d] = f.sub(x, self.particular[v as usize]);
            for (e, &p) in echelon.chunks(w).zip(&pivots) {
                let c = row[p];
                if c != 0 {
                    for (r, &y) in row.iter_mut().zip(e) {
                        *r = f.sub(*r, f.mul(c, y));
                    }
                }
            }
            match row[..d].iter().position(|&c| c != 0) {
                None if row[d] != 0 => return None,
                None => {}
                Some(p) => {
                    let inv = f.inv(row[p]).expect("nonzero pivot");
                    for r in row.iter_mut() {
                        *r = f.mul(*r, inv);
                    }
                    // keep earlier rows reduced at the new pivot
                    for e in echelon.chunks_mut(w) {
                        let c = e[p];
                        if c != 0 {
                            for (y, &r) in e.iter_mut().zip(&row) {
                                *y = f.sub(*y, f.mul(c, r));
                            }
                        }
                    }
                    echelon.extend_from_slice(&row);
                    pivots.push(p);
                }
            }
        }
        Some(pivots.len())
    }

    /// Every element, for spaces with at most `limit` elements.
    pub fn elements(&self, limit: usize) -> Option<Vec<Vec<u32>>> {
        let q = self.field.q() as usize;
        let total = q.checked_pow(self.dim() as u32)?;
        if total > limit {
            return None;
        }
        Some(
            (0..total)
                .map(|mut idx| {
                    let coeffs: Vec<u32> = (0..self.dim())
                        .map(|_| {
                            let d = (idx % q) as u32;
                            idx /= q;
                            d
                        })
                        .collect();
                    self.element(&coeffs)
                })
                .collect(),
        )
    }
}
