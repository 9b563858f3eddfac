//! Gaussian elimination over a finite field.

use super::field::Arith;

pub type Matrix = Vec<Vec<u32>>;

/// Reduced row echelon form; returns the nonzero rows and their pivot columns.
pub fn rref<F: Arith>(f: &F, rows: &[Vec<u32>]) -> (Matrix, Vec<usize>) {
    let mut m: Matrix = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(pr) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, pr);
        let inv = f.inv(m[r][c]).expect("pivot is nonzero");
        for x in m[r].iter_mut() {
            *x = f.mul(*x, inv);
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let factor = row[c];
                for (x, &y) in row.iter_mut().zip(&pivot_row) {
                    *x = f.sub(*x, f.mul(factor, y));
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank<F: Arith>(f: &F, rows: &[Vec<u32>]) -> usize {
    rref(f, rows).0.len()
}

/// Basis of `{x : A x = 0}` for `A` with `cols` columns, in reduced form.
pub fn nullspace<F: Arith>(f: &F, rows: &[Vec<u32>], cols: usize) -> Matrix {
    let (r, pivots) = rref(f, rows);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis: Matrix = free
        .iter()
        .map(|&fc| {
            let mut v = vec![0u32; cols];
            v[fc] = 1;
            for (row, &pc) in r.iter().zip(&pivots) {
                v[pc] = f.neg(row[fc]);
            }
            v
        })
        .collect();
    if !basis.is_empty() {
        basis = rref(f, &basis).0;
    }
    basis
}

/// `A · x`.
pub fn mat_vec<F: Arith>(f: &F, a: &[Vec<u32>], x: &[u32]) -> Vec<u32> {
    a.iter()
        .map(|row| row.iter().zip(x).fold(0, |acc, (&r, &v)| f.add(acc, f.mul(r, v))))
        .collect()
}

/// `A · Bᵀ`.
pub fn mat_mul_t<F: Arith>(f: &F, a: &[Vec<u32>], b: &[Vec<u32>]) -> Matrix {
    a.iter().map(|row| mat_vec(f, b, row)).collect()
}

/// One solution of `A x = b` (free variables zero), or `None`.
pub fn solve<F: Arith>(f: &F, a: &[Vec<u32>], b: &[u32], cols: usize) -> Option<Vec<u32>> {
    let aug: Matrix = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    let (r, pivots) = rref(f, &aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let mut x = vec![0u32; cols];
    for (row, &pc) in r.iter().zip(&pivots) {
        x[pc] = row[cols];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::field::Field;
    use proptest::prelude::*;

    #[test]
    fn small_system() {
        let f = Field::new(3).unwrap();
        let a = vec![vec![1, 1, 0], vec![0, 1, 1]];
        assert_eq!(rank(&f, &a), 2);
        let ns = nullspace(&f, &a, 3);
        assert_eq!(ns.len(), 1);
        assert!(mat_vec(&f, &a, &ns[0]).iter().all(|&x| x == 0));
        let x = solve(&f, &a, &[1, 2], 3).unwrap();
        assert_eq!(mat_vec(&f, &a, &x), vec![1, 2]);
        assert!(solve(&f, &[vec![1, 1], vec![1, 1]], &[0, 1], 2).is_none());
    }

    proptest! {
        #[test]
        fn rank_nullity(q in prop::sample::select(vec![2u32, 3, 4, 5, 7]), rows in 1usize..6, cols in 1usize..8, seed in proptest::collection::vec(0u32..1000, 48)) {
            let f = Field::new(q).unwrap();
            let a: Matrix = (0..rows).map(|i| (0..cols).map(|j| seed[(i * 8 + j) % 48] % q).collect()).collect();
            let ns = nullspace(&f, &a, cols);
            prop_assert_eq!(rank(&f, &a) + ns.len(), cols);
            for v in &ns {
                prop_assert!(mat_vec(&f, &a, v).iter().all(|&x| x == 0));
            }
        }
    }
}
