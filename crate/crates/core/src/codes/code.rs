//! Linear codes over `F_q`, the generalized BCH construction and exact
//! minimum-distance computation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::field::{Arith, Field, FieldError, QuadraticExtension};
use super::linalg::{self, Matrix};
use crate::rng;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("designed distance must be at least 3, got {0}")]
    DistanceTooSmall(usize),
    #[error("dimension K - 2D + 3 = {0} is not positive")]
    NonPositiveDimension(i64),
    #[error("enumerating {count} codewords exceeds budget {budget}")]
    BudgetExceeded { count: f64, budget: u64 },
    #[error("code file: {0}")]
    Format(String),
}

/// A linear code with generator rows and parity-check rows over `F_q`.
#[derive(Clone, Debug)]
pub struct LinearCode {
    field: Field,
    length: usize,
    generator: Matrix,
    parity: Matrix,
}

impl PartialEq for LinearCode {
    fn eq(&self, other: &Self) -> bool {
        self.field.q() == other.field.q()
            && self.length == other.length
            && self.generator == other.generator
            && self.parity == other.parity
    }
}

impl LinearCode {
    /// Code spanned by `rows`; the generator is stored in reduced form.
    pub fn from_generator(field: Field, length: usize, rows: &[Vec<u32>]) -> Self {
        let generator = if rows.is_empty() { Vec::new() } else { linalg::rref(&field, rows).0 };
        let parity = linalg::nullspace(&field, &generator, length);
        LinearCode { field, length, generator, parity }
    }

    /// Code cut out by the parity rows.
    pub fn from_parity(field: Field, length: usize, rows: &[Vec<u32>]) -> Self {
        LinearCode::from_generator(field, length, rows).dual()
    }

    pub fn full_space(field: Field, length: usize) -> Self {
        let rows: Matrix = (0..length)
            .map(|i| (0..length).map(|j| (i == j) as u32).collect())
            .collect();
        LinearCode::from_generator(field, length, &rows)
    }

    pub fn repetition(field: Field, length: usize) -> Self {
        LinearCode::from_generator(field, length, &[vec![1; length]])
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn q(&self) -> u32 {
        self.field.q()
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.generator.len()
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn parity(&self) -> &Matrix {
        &self.parity
    }

    /// Number of codewords `q^dim`.
    pub fn size(&self) -> u128 {
        (self.q() as u128).pow(self.dim() as u32)
    }

    /// The orthogonal complement: generator and parity swap roles.
    pub fn dual(&self) -> LinearCode {
        LinearCode {
            field: self.field.clone(),
            length: self.length,
            generator: self.parity.clone(),
            parity: self.generator.clone(),
        }
    }

    pub fn contains(&self, word: &[u32]) -> bool {
        word.len() == self.length && linalg::mat_vec(&self.field, &self.parity, word).iter().all(|&x| x == 0)
    }

    /// `G · Hᵀ = 0`.
    pub fn orthogonality_holds(&self) -> bool {
        linalg::mat_mul_t(&self.field, &self.generator, &self.parity)
            .iter()
            .all(|row| row.iter().all(|&x| x == 0))
    }

    pub fn ranks_consistent(&self) -> bool {
        linalg::rank(&self.field, &self.generator) == self.dim()
            && (self.parity.is_empty() || linalg::rank(&self.field, &self.parity) == self.length - self.dim())
            && self.parity.len() == self.length - self.dim()
    }

    /// Same row space.
    pub fn same_code(&self, other: &LinearCode) -> bool {
        self.length == other.length
            && self.dim() == other.dim()
            && linalg::rref(&self.field, &self.generator).0 == linalg::rref(&other.field, &other.generator).0
    }

    /// `Σ coeffs[i] · G[i]`.
    pub fn encode(&self, coeffs: &[u32]) -> Vec<u32> {
        let mut word = vec![0u32; self.length];
        for (c, row) in coeffs.iter().zip(&self.generator) {
            if *c == 0 {
                continue;
            }
            for (w, &g) in word.iter_mut().zip(row) {
                *w = self.field.add(*w, self.field.mul(*c, g));
            }
        }
        word
    }

    /// Every codeword, in order of the base-`q` coefficient counter (least
    /// significant digit first).
    pub fn codewords(&self) -> Vec<Vec<u32>> {
        let q = self.q();
        let total = self.size() as usize;
        (0..total)
            .map(|mut idx| {
                let coeffs: Vec<u32> = (0..self.dim())
                    .map(|_| {
                        let d = (idx % q as usize) as u32;
                        idx /= q as usize;
                        d
                    })
                    .collect();
                self.encode(&coeffs)
            })
            .collect()
    }

    pub fn to_file(&self) -> CodeFile {
        CodeFile {
            q: self.q(),
            modulus: self.field.modulus().to_vec(),
            k: self.length,
            dim: self.dim(),
            generator: self.generator.iter().flatten().copied().collect(),
            parity: self.parity.iter().flatten().copied().collect(),
        }
    }

    pub fn from_file(file: &CodeFile) -> Result<Self, CodeError> {
        let field = Field::new(file.q)?;
        if field.modulus() != file.modulus.as_slice() {
            return Err(CodeError::Format(format!(
                "modulus {:?} differs from the reference modulus {:?}",
                file.modulus,
                field.modulus()
            )));
        }
        let k = file.k;
        if file.generator.len() != file.dim * k || file.parity.len() != (k - file.dim.min(k)) * k {
            return Err(CodeError::Format("matrix sizes do not match K and dim".into()));
        }
        if file.generator.iter().chain(&file.parity).any(|&x| x >= file.q) {
            return Err(CodeError::Format("entry outside F_q".into()));
        }
        let rows = |flat: &[u32]| -> Matrix { flat.chunks(k.max(1)).map(<[u32]>::to_vec).collect() };
        let code = LinearCode { field, length: k, generator: rows(&file.generator), parity: rows(&file.parity) };
        if !code.orthogonality_holds() || !code.ranks_consistent() {
            return Err(CodeError::Format("generator and parity are not complementary".into()));
        }
        Ok(code)
    }
}

/// On-disk code: matrices flattened row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeFile {
    pub q: u32,
    pub modulus: Vec<u32>,
    #[serde(rename = "K")]
    pub k: usize,
    pub dim: usize,
    pub generator: Vec<u32>,
    pub parity: Vec<u32>,
}

/// Generalized BCH code of length `q² - 1` with designed distance `D`.
///
/// Codewords `(c_1, …, c_K)` satisfy `Σ_i c_i γ^{ij} = 0` for `j = 0..D-2`,
/// each condition split into `F_q` rows (one row for `j = 0`, two otherwise).
/// A larger solution space is cut to dimension `K - 2D + 3` by keeping the
/// leading rows of its reduced basis.
pub fn build_generalized_bch(q: u32, distance: usize) -> Result<LinearCode, CodeError> {
    if distance < 3 {
        return Err(CodeError::DistanceTooSmall(distance));
    }
    let field = Field::new(q)?;
    let k = (q * q - 1) as usize;
    let target = k as i64 - 2 * distance as i64 + 3;
    if target <= 0 {
        return Err(CodeError::NonPositiveDimension(target));
    }
    let ext = QuadraticExtension::new(field.clone());
    let rows = bch_constraints(&ext, distance);
    let mut generator = linalg::nullspace(&field, &rows, k);
    generator.truncate(target as usize);
    Ok(LinearCode::from_generator(field, k, &generator))
}

fn bch_constraints(ext: &QuadraticExtension, distance: usize) -> Matrix {
    let q = ext.base().q();
    let k = (q * q - 1) as usize;
    let gamma = ext.gamma();
    let mut rows = vec![vec![1u32; k]];
    for j in 1..=(distance - 2) as u64 {
        let step = ext.pow(gamma, j);
        let mut re = Vec::with_capacity(k);
        let mut im = Vec::with_capacity(k);
        let mut power = step;
        for _ in 1..=k {
            let (a, b) = ext.split(power);
            re.push(a);
            im.push(b);
            power = ext.mul(power, step);
        }
        rows.push(re);
        rows.push(im);
    }
    rows
}

/// Minimum weight over nonzero codewords; `length + 1` for the zero code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distance {
    pub distance: usize,
    pub degenerate: bool,
    pub method: DistanceMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    CodewordEnumeration,
    DependentColumns,
}

pub const DEFAULT_CODEWORD_BUDGET: u64 = 10_000_000;

/// Exhaustive over all `q^dim` codewords.
pub fn min_distance_bruteforce(code: &LinearCode, budget: u64) -> Result<Distance, CodeError> {
    let count = (code.q() as f64).powi(code.dim() as i32);
    if count > budget as f64 {
        return Err(CodeError::BudgetExceeded { count, budget });
    }
    if code.dim() == 0 {
        return Ok(Distance { distance: code.length() + 1, degenerate: true, method: DistanceMethod::CodewordEnumeration });
    }
    let f = code.field();
    let mut best = code.length();
    let mut word = vec![0u32; code.length()];
    enumerate_words(f, code.generator(), 0, &mut word, true, &mut best);
    Ok(Distance { distance: best, degenerate: false, method: DistanceMethod::CodewordEnumeration })
}

fn enumerate_words(f: &Field, gen: &Matrix, row: usize, word: &mut Vec<u32>, all_zero: bool, best: &mut usize) {
    if row == gen.len() {
        if !all_zero {
            let w = word.iter().filter(|&&x| x != 0).count();
            *best = (*best).min(w);
        }
        return;
    }
    let saved = word.clone();
    for c in 0..f.q() {
        for ((w, &base), &g) in word.iter_mut().zip(&saved).zip(&gen[row]) {
            *w = f.add(base, f.mul(c, g));
        }
        enumerate_words(f, gen, row + 1, word, all_zero && c == 0, best);
    }
    *word = saved;
}

/// Smallest `w` such that some `w` columns of the parity matrix admit a
/// dependency with all coefficients nonzero; exhaustive over supports.
pub fn min_distance_by_columns(code: &LinearCode, budget: u64) -> Result<Distance, CodeError> {
    let f = code.field();
    let n = code.length();
    if code.dim() == 0 {
        return Ok(Distance { distance: n + 1, degenerate: true, method: DistanceMethod::DependentColumns });
    }
    let h = code.parity();
    let cols: Vec<Vec<u32>> = (0..n).map(|c| h.iter().map(|row| row[c]).collect()).collect();
    let q = f.q() as u64;
    let mut spent: u64 = 0;
    for w in 1..=n {
        // supports of size w, first coefficient normalized to 1
        let cost = crate::graph::binomial(n, w) * (q as f64 - 1.0).powi(w as i32 - 1);
        spent += cost as u64;
        if spent > budget {
            return Err(CodeError::BudgetExceeded { count: spent as f64, budget });
        }
        let mut support = Vec::with_capacity(w);
        if dependent_support(f, &cols, w, 0, &mut support) {
            return Ok(Distance { distance: w, degenerate: false, method: DistanceMethod::DependentColumns });
        }
    }
    unreachable!("a nonzero code has a nonzero codeword")
}

fn dependent_support(f: &Field, cols: &[Vec<u32>], w: usize, start: usize, support: &mut Vec<usize>) -> bool {
    if support.len() == w {
        let rows = cols.first().map_or(0, Vec::len);
        let mut acc = vec![0u32; rows];
        return nonzero_combination(f, cols, support, 0, &mut acc);
    }
    for c in start..cols.len() {
        support.push(c);
        if dependent_support(f, cols, w, c + 1, support) {
            return true;
        }
        support.pop();
    }
    false
}

fn nonzero_combination(f: &Field, cols: &[Vec<u32>], support: &[usize], i: usize, acc: &mut Vec<u32>) -> bool {
    if i == support.len() {
        return acc.iter().all(|&x| x == 0);
    }
    let coeffs: Vec<u32> = if i == 0 { vec![1] } else { (1..f.q()).collect() };
    for c in coeffs {
        let saved = acc.clone();
        for (a, &h) in acc.iter_mut().zip(&cols[support[i]]) {
            *a = f.add(*a, f.mul(c, h));
        }
        if nonzero_combination(f, cols, support, i + 1, acc) {
            return true;
        }
        *acc = saved;
    }
    false
}

/// Exact minimum distance by whichever exhaustive route fits the budget.
pub fn min_distance(code: &LinearCode, budget: u64) -> Result<Distance, CodeError> {
    match min_distance_bruteforce(code, budget) {
        Err(CodeError::BudgetExceeded { .. }) => min_distance_by_columns(code, budget),
        other => other,
    }
}

/// For `trials` random sets of at most `D - 1` distinct positions, the
/// matrix `(γ^{i_l · j})_{j < D-1}` over `F_{q²}` has full column rank.
pub fn vandermonde_spot_check(q: u32, distance: usize, trials: usize, seed: u64) -> Result<bool, CodeError> {
    let ext = QuadraticExtension::new(Field::new(q)?);
    let k = (q * q - 1) as usize;
    let gamma = ext.gamma();
    let mut rng = rng::stream(seed, rng::purpose::CODES);
    for _ in 0..trials {
        let w = rng.gen_range(1..=(distance - 1).min(k));
        let positions = rng::sorted_subset(&mut rng, k, w);
        let m: Matrix = (0..distance as u64 - 1)
            .map(|j| positions.iter().map(|&i| ext.pow(gamma, (i as u64 + 1) * j)).collect())
            .collect();
        if linalg::rank(&ext, &m) != w {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bch_rejects_degenerate_parameters() {
        assert!(matches!(build_generalized_bch(2, 3), Err(CodeError::NonPositiveDimension(0))));
        assert!(matches!(build_generalized_bch(3, 2), Err(CodeError::DistanceTooSmall(2))));
    }

    #[test]
    fn bch_q3_d3() {
        let c = build_generalized_bch(3, 3).unwrap();
        assert_eq!((c.length(), c.dim()), (8, 5));
        assert!(c.orthogonality_holds() && c.ranks_consistent());
        let d = min_distance_bruteforce(&c, DEFAULT_CODEWORD_BUDGET).unwrap();
        assert!(d.distance >= 3);
        assert_eq!(c.dual().size(), 27);
    }

    #[test]
    fn bch_q3_d4() {
        let c = build_generalized_bch(3, 4).unwrap();
        assert_eq!((c.length(), c.dim()), (8, 3));
        assert!(min_distance_bruteforce(&c, DEFAULT_CODEWORD_BUDGET).unwrap().distance >= 4);
    }

    #[test]
    fn trivial_codes() {
        let f = Field::new(3).unwrap();
        let rep = LinearCode::repetition(f.clone(), 3);
        assert_eq!(min_distance_bruteforce(&rep, 100).unwrap().distance, 3);
        let full = LinearCode::full_space(f.clone(), 4);
        let zero = full.dual();
        assert_eq!(zero.dim(), 0);
        assert_eq!(zero.size(), 1);
        let d = min_distance_bruteforce(&zero, 100).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.distance, 5);
        assert!(full.dual().dual().same_code(&full));
    }

    #[test]
    fn both_distance_routes_agree() {
        for (q, d) in [(3, 3), (3, 4), (4, 3), (4, 4), (2, 4)] {
            let Ok(c) = build_generalized_bch(q, d) else { continue };
            let by_cols = min_distance_by_columns(&c, DEFAULT_CODEWORD_BUDGET).unwrap();
            if let Ok(by_words) = min_distance_bruteforce(&c, 20_000_000) {
                assert_eq!(by_cols.distance, by_words.distance, "q={q} D={d}");
            }
            let dual = c.dual();
            if let Ok(by_words) = min_distance_bruteforce(&dual, DEFAULT_CODEWORD_BUDGET) {
                if let Ok(by_cols) = min_distance_by_columns(&dual, DEFAULT_CODEWORD_BUDGET) {
                    assert_eq!(by_cols.distance, by_words.distance);
                }
            }
        }
    }

    #[test]
    fn vandermonde_full_rank() {
        for (q, d) in [(3, 3), (3, 4), (4, 3), (5, 3), (5, 5)] {
            assert!(vandermonde_spot_check(q, d, 50, 1).unwrap());
        }
    }

    #[test]
    fn membership_by_parity_matches_span() {
        for (q, d) in [(3, 4), (3, 5)] {
            let c = build_generalized_bch(q, d).unwrap();
            assert!(c.size() <= 10_000);
            let words = c.codewords();
            let mut sorted = words.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len() as u128, c.size());
            // every vector of F_3^8 is a member iff it is in the span
            let total = 3usize.pow(8);
            for idx in 0..total {
                let mut x = idx;
                let v: Vec<u32> = (0..8).map(|_| { let d = (x % 3) as u32; x /= 3; d }).collect();
                assert_eq!(c.contains(&v), sorted.binary_search(&v).is_ok());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let c = build_generalized_bch(4, 3).unwrap();
        let file = c.to_file();
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.contains("\"K\":15"));
        let back = LinearCode::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, c);
        let mut bad = file.clone();
        bad.generator[0] = 7;
        assert!(LinearCode::from_file(&bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn duality_is_an_involution(q in prop::sample::select(vec![2u32, 3, 4, 5]), len in 2usize..7, raw in proptest::collection::vec(0u32..100, 1..5)) {
            let f = Field::new(q).unwrap();
            let rows: Matrix = raw.iter().enumerate().map(|(i, &s)| (0..len).map(|j| (s + (i * 7 + j * 3) as u32 * (s % 5 + 1)) % q).collect()).collect();
            let c = LinearCode::from_generator(f, len, &rows);
            prop_assert!(c.orthogonality_holds());
            prop_assert!(c.ranks_consistent());
            prop_assert!(c.dual().dual().same_code(&c));
            prop_assert_eq!(c.dual().dim(), len - c.dim());
            prop_assert!(c.dual().orthogonality_holds());
        }
    }
}
