//! Max K-CSP(C) instances: every constraint asks that a shifted K-tuple of
//! variables lands in the linear code C.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::code::{CodeError, CodeFile, LinearCode};
use crate::codes::field::Arith;
use crate::exact::{format_rational, Rational};
use crate::graph::binomial;
use crate::rng::{self, purpose};

#[derive(Debug, Error)]
pub enum CspError {
    #[error("need n >= K, got n = {n}, K = {k}")]
    TooFewVariables { n: usize, k: usize },
    #[error("constraint {index}: {reason}")]
    BadConstraint { index: usize, reason: String },
    #[error("assignment: {0}")]
    BadAssignment(String),
    #[error("{what}: {count} cases exceed budget {budget}")]
    BudgetExceeded { what: &'static str, count: f64, budget: u64 },
    #[error("expansion needs s >= 2, got r = {0}")]
    BadRange(usize),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub vars: Vec<u32>,
    pub shift: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct CspInstance {
    n: usize,
    code: LinearCode,
    constraints: Vec<Constraint>,
    seed: Option<u64>,
}

impl CspInstance {
    pub fn new(n: usize, code: LinearCode, constraints: Vec<Constraint>, seed: Option<u64>) -> Result<Self, CspError> {
        let k = code.length();
        let q = code.q();
        for (index, c) in constraints.iter().enumerate() {
            let bad = |reason: String| CspError::BadConstraint { index, reason };
            if c.vars.len() != k || c.shift.len() != k {
                return Err(bad(format!("expected {k} variables and shifts")));
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v as usize >= n) {
                return Err(bad(format!("variable {v} out of range")));
            }
            let mut sorted = c.vars.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(bad("repeated variable".into()));
            }
            if c.shift.iter().any(|&b| b >= q) {
                return Err(bad("shift outside F_q".into()));
            }
        }
        Ok(CspInstance { n, code, constraints, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn q(&self) -> u32 {
        self.code.q()
    }

    /// Arity `K`.
    pub fn arity(&self) -> usize {
        self.code.length()
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, i: usize) -> &Constraint {
        &self.constraints[i]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `m / n` as an exact rational.
    pub fn density(&self) -> Rational {
        Rational::new(self.m().into(), self.n.max(1).into())
    }

    pub fn check_assignment(&self, a: &[u32]) -> Result<(), CspError> {
        if a.len() != self.n {
            return Err(CspError::BadAssignment(format!("length {} != n = {}", a.len(), self.n)));
        }
        if a.iter().any(|&x| x >= self.q()) {
            return Err(CspError::BadAssignment("value outside F_q".into()));
        }
        Ok(())
    }

    /// Is `(a|_{T_i} + b^{(i)})` a codeword?
    pub fn constraint_satisfied(&self, i: usize, a: &[u32]) -> bool {
        let c = &self.constraints[i];
        let f = self.code.field();
        let word: Vec<u32> = c.vars.iter().zip(&c.shift).map(|(&v, &b)| f.add(a[v as usize], b)).collect();
        self.code.contains(&word)
    }

    pub fn satisfied_count(&self, a: &[u32]) -> usize {
        (0..self.m()).filter(|&i| self.constraint_satisfied(i, a)).count()
    }

    /// Local assignments `α` to `T_i` with `α + b^{(i)} ∈ C`, one per codeword
    /// in the code's enumeration order.
    pub fn satisfying_patterns(&self, i: usize) -> Vec<Vec<u32>> {
        let f = self.code.field();
        let shift = &self.constraints[i].shift;
        self.code
            .codewords()
            .into_iter()
            .map(|c| c.iter().zip(shift).map(|(&x, &b)| f.sub(x, b)).collect())
            .collect()
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n,
            q: self.q(),
            code: self.code.to_file(),
            constraints: self.constraints.clone(),
            seed: self.seed,
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self, CspError> {
        let code = LinearCode::from_file(&file.code)?;
        if code.q() != file.q {
            return Err(CspError::Code(CodeError::Format(format!("q = {} but code is over F_{}", file.q, code.q()))));
        }
        CspInstance::new(file.n, code, file.constraints, file.seed)
    }
}

/// On-disk instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub q: u32,
    pub code: CodeFile,
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn sample_tuples(n: usize, m: usize, k: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = rng::stream(seed, purpose::CSP_TUPLES);
    (0..m).map(|_| rng::partial_fisher_yates(&mut rng, n, k)).collect()
}

/// Tuples by partial Fisher-Yates on one stream, shifts uniform on another.
pub fn sample_random_instance(n: usize, m: usize, code: LinearCode, seed: u64) -> Result<CspInstance, CspError> {
    let k = code.length();
    if n < k {
        return Err(CspError::TooFewVariables { n, k });
    }
    let q = code.q();
    let tuples = sample_tuples(n, m, k, seed);
    let mut rng = rng::stream(seed, purpose::CSP_SHIFTS);
    let constraints = tuples
        .into_iter()
        .map(|vars| Constraint { vars, shift: (0..k).map(|_| rng.gen_range(0..q)).collect() })
        .collect();
    CspInstance::new(n, code, constraints, Some(seed))
}

/// Same tuples as [`sample_random_instance`]; the hidden assignment is
/// uniform and each shift is `c - a*|_{T_i}` for a uniform codeword `c`.
pub fn plant_satisfiable_instance(
    n: usize,
    m: usize,
    code: LinearCode,
    seed: u64,
) -> Result<(CspInstance, Vec<u32>), CspError> {
    let k = code.length();
    if n < k {
        return Err(CspError::TooFewVariables { n, k });
    }
    let q = code.q();
    let tuples = sample_tuples(n, m, k, seed);
    let mut rng = rng::stream(seed, purpose::CSP_SHIFTS | 1);
    let hidden: Vec<u32> = (0..n).map(|_| rng.gen_range(0..q)).collect();
    let f = code.field().clone();
    let constraints = tuples
        .into_iter()
        .map(|vars| {
            let coeffs: Vec<u32> = (0..code.dim()).map(|_| rng.gen_range(0..q)).collect();
            let word = code.encode(&coeffs);
            let shift = vars.iter().zip(&word).map(|(&v, &c)| f.sub(c, hidden[v as usize])).collect();
            Constraint { vars, shift }
        })
        .collect();
    let inst = CspInstance::new(n, code, constraints, Some(seed))?;
    for i in 0..inst.m() {
        assert!(inst.constraint_satisfied(i, &hidden), "planted constraint {i} not satisfied");
    }
    Ok((inst, hidden))
}

/// Fraction of `trials` uniform assignments satisfying constraint
/// `trial mod m`, with the exact probability `|C| / q^K` and its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub trials: usize,
    pub hits: usize,
    pub frequency: f64,
    pub expected: f64,
    pub sigma: f64,
    pub within_3_sigma: bool,
}

pub fn satisfaction_frequency(inst: &CspInstance, trials: usize, seed: u64) -> FrequencyReport {
    let q = inst.q();
    let mut rng = rng::stream(seed, purpose::CSP_TRIALS);
    let mut hits = 0;
    if inst.m() > 0 {
        for trial in 0..trials {
            let a: Vec<u32> = (0..inst.n()).map(|_| rng.gen_range(0..q)).collect();
            hits += inst.constraint_satisfied(trial % inst.m(), &a) as usize;
        }
    }
    let expected = (q as f64).powi(inst.code().dim() as i32 - inst.arity() as i32);
    let sigma = (expected * (1.0 - expected) / trials.max(1) as f64).sqrt();
    let frequency = hits as f64 / trials.max(1) as f64;
    FrequencyReport { trials, hits, frequency, expected, sigma, within_3_sigma: (frequency - expected).abs() <= 3.0 * sigma }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ExpansionMode {
    Exhaustive { budget: u64 },
    Sampled { samples: usize, seed: u64 },
}

pub const DEFAULT_EXPANSION_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLevel {
    pub s: usize,
    pub checked: u64,
    pub min_union: usize,
    /// `(K - δ) s` as `"num/den"`.
    pub threshold: String,
    pub pass: bool,
    /// Constraint indices attaining `min_union`.
    pub witness: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionVerdict {
    pub r: usize,
    pub delta: String,
    pub method: String,
    pub levels: Vec<ExpansionLevel>,
    pub pass: bool,
}

fn union_size(inst: &CspInstance, set: &[usize], mark: &mut [u32], stamp: u32) -> usize {
    let mut count = 0;
    for &i in set {
        for &v in &inst.constraints[i].vars {
            if mark[v as usize] != stamp {
                mark[v as usize] = stamp;
                count += 1;
            }
        }
    }
    count
}

/// Advance `c` to the next `s`-combination of `0..m` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], m: usize) -> bool {
    let s = c.len();
    for i in (0..s).rev() {
        if c[i] < m - s + i {
            c[i] += 1;
            for j in i + 1..s {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// For each `s` in `2..=r`, the fewest variables touched by `s` constraints.
/// Levels with `s > m` are vacuous and omitted.
pub fn audit_expansion(inst: &CspInstance, r: usize, delta: &Rational, mode: ExpansionMode) -> Result<ExpansionVerdict, CspError> {
    if r < 2 {
        return Err(CspError::BadRange(r));
    }
    let m = inst.m();
    let top = r.min(m);
    let method = match mode {
        ExpansionMode::Exhaustive { budget } => {
            let total: f64 = (2..=top).map(|s| binomial(m, s)).sum();
            if total > budget as f64 {
                return Err(CspError::BudgetExceeded { what: "constraint sets", count: total, budget });
            }
            "exact".to_string()
        }
        ExpansionMode::Sampled { samples, .. } => format!("sampled({samples})"),
    };
    let k = Rational::from_integer(inst.arity().into());
    let mut mark = vec![0u32; inst.n()];
    let mut stamp = 0u32;
    let mut levels = Vec::new();
    for s in 2..=top {
        let threshold = (&k - delta) * Rational::from_integer(s.into());
        let mut best: Option<(usize, Vec<usize>)> = None;
        let mut checked = 0u64;
        let mut visit = |set: &[usize]| {
            stamp += 1;
            let u = union_size(inst, set, &mut mark, stamp);
            checked += 1;
            if best.as_ref().is_none_or(|(b, _)| u < *b) {
                best = Some((u, set.to_vec()));
            }
        };
        match mode {
            ExpansionMode::Exhaustive { .. } => {
                let mut c: Vec<usize> = (0..s).collect();
                loop {
                    visit(&c);
                    if !next_combination(&mut c, m) {
                        break;
                    }
                }
            }
            ExpansionMode::Sampled { samples, seed } => {
                let mut rng = rng::stream(seed, purpose::AUDIT | s as u64);
                for _ in 0..samples {
                    let set: Vec<usize> = rng::sorted_subset(&mut rng, m, s).into_iter().map(|x| x as usize).collect();
                    visit(&set);
                }
            }
        }
        let (min_union, witness) = best.unwrap_or((usize::MAX, Vec::new()));
        let pass = Rational::from_integer(min_union.into()) > threshold;
        levels.push(ExpansionLevel { s, checked, min_union, threshold: format_rational(&threshold), pass, witness });
    }
    let pass = levels.iter().all(|l| l.pass);
    Ok(ExpansionVerdict { r, delta: format_rational(delta), method, levels, pass })
}

pub const DEFAULT_ASSIGNMENT_BUDGET: u64 = 10_000_000;

/// Exhaustive maximum of satisfied constraints; ties go to the first
/// assignment in base-`q` counter order (variable 0 least significant).
pub fn best_assignment_bruteforce(inst: &CspInstance, budget: u64) -> Result<(Vec<u32>, usize), CspError> {
    let q = inst.q();
    let count = (q as f64).powi(inst.n() as i32);
    if count > budget as f64 {
        return Err(CspError::BudgetExceeded { what: "assignments", count, budget });
    }
    let mut a = vec![0u32; inst.n()];
    let mut best = (a.clone(), inst.satisfied_count(&a));
    loop {
        let mut i = 0;
        while i < a.len() {
            a[i] += 1;
            if a[i] < q {
                break;
            }
            a[i] = 0;
            i += 1;
        }
        if i == a.len() || best.1 == inst.m() {
            break;
        }
        let s = inst.satisfied_count(&a);
        if s > best.1 {
            best = (a.clone(), s);
        }
    }
    Ok(best)
}

/// `δ = D / 2` for a code of designed distance `D`.
pub fn delta_from_distance(distance: usize) -> Rational {
    Rational::new(distance.into(), 2.into())
}

impl ExpansionVerdict {
    pub fn is_vacuous(&self) -> bool {
        self.levels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::code::build_generalized_bch;
    use crate::exact::rational;
    use proptest::prelude::*;

    /// `C` for `q = 3`, `K = 8`, `2δ = 3`: the 27-word dual of the `[8, 5]` code.
    fn code27() -> LinearCode {
        build_generalized_bch(3, 3).unwrap().dual()
    }

    #[test]
    fn tuple_covers_all_variables_when_n_equals_k() {
        let inst = sample_random_instance(8, 1, code27(), 5).unwrap();
        let mut vars = inst.constraint(0).vars.clone();
        vars.sort_unstable();
        assert_eq!(vars, (0..8).collect::<Vec<_>>());
        assert!(matches!(sample_random_instance(7, 1, code27(), 5), Err(CspError::TooFewVariables { .. })));
    }

    #[test]
    fn zero_shift_and_zero_assignment() {
        let c = code27();
        let inst = CspInstance::new(8, c.clone(), vec![Constraint { vars: (0..8).collect(), shift: vec![0; 8] }], None).unwrap();
        assert!(inst.constraint_satisfied(0, &[0; 8]));
        assert!(inst.constraint_satisfied(0, &c.generator()[0]));
    }

    #[test]
    fn exhaustive_local_count_equals_code_size() {
        let inst = sample_random_instance(12, 1, code27(), 2).unwrap();
        let vars = inst.constraint(0).vars.clone();
        let mut count = 0;
        let mut a = vec![0u32; 12];
        for idx in 0..3usize.pow(8) {
            let mut x = idx;
            for &v in &vars {
                a[v as usize] = (x % 3) as u32;
                x /= 3;
            }
            count += inst.constraint_satisfied(0, &a) as usize;
        }
        assert_eq!(count, 27);
        assert_eq!(inst.satisfying_patterns(0).len(), 27);
    }

    #[test]
    fn planted_instances() {
        let (inst, hidden) = plant_satisfiable_instance(10, 0, code27(), 1).unwrap();
        assert_eq!(inst.m(), 0);
        assert_eq!(best_assignment_bruteforce(&inst, DEFAULT_ASSIGNMENT_BUDGET).unwrap().1, 0);
        assert_eq!(hidden.len(), 10);
        let (inst, hidden) = plant_satisfiable_instance(10, 2, code27(), 3).unwrap();
        assert_eq!(inst.satisfied_count(&hidden), 2);
        assert_eq!(best_assignment_bruteforce(&inst, DEFAULT_ASSIGNMENT_BUDGET).unwrap().1, 2);
        let random = sample_random_instance(10, 2, code27(), 3).unwrap();
        let tuples = |i: &CspInstance| i.constraints().iter().map(|c| c.vars.clone()).collect::<Vec<_>>();
        assert_eq!(tuples(&inst), tuples(&random));
    }

    #[test]
    fn bruteforce_matches_reverse_enumeration() {
        let inst = sample_random_instance(8, 4, code27(), 11).unwrap();
        let (a, best) = best_assignment_bruteforce(&inst, DEFAULT_ASSIGNMENT_BUDGET).unwrap();
        assert_eq!(inst.satisfied_count(&a), best);
        let mut oracle = 0;
        for idx in (0..3usize.pow(8)).rev() {
            let mut x = idx;
            let a: Vec<u32> = (0..8).map(|_| { let d = (x % 3) as u32; x /= 3; d }).rev().collect();
            oracle = oracle.max(inst.satisfied_count(&a));
        }
        assert_eq!(best, oracle);
    }

    #[test]
    fn expansion_edge_cases() {
        let c = code27();
        let disjoint = CspInstance::new(
            16,
            c.clone(),
            vec![
                Constraint { vars: (0..8).collect(), shift: vec![0; 8] },
                Constraint { vars: (8..16).collect(), shift: vec![0; 8] },
            ],
            None,
        )
        .unwrap();
        let v = audit_expansion(&disjoint, 2, &rational(3, 2), ExpansionMode::Exhaustive { budget: 100 }).unwrap();
        assert!(v.pass);
        assert_eq!(v.levels[0].min_union, 16);
        let same = CspInstance::new(
            8,
            c,
            vec![Constraint { vars: (0..8).collect(), shift: vec![0; 8] }, Constraint { vars: (0..8).rev().collect(), shift: vec![1; 8] }],
            None,
        )
        .unwrap();
        let v = audit_expansion(&same, 2, &rational(3, 2), ExpansionMode::Exhaustive { budget: 100 }).unwrap();
        assert!(!v.pass);
        assert_eq!(v.levels[0].witness, vec![0, 1]);
        // threshold is strict and exact: 8 variables, K = 8, δ = 4 gives (8-4)*2 = 8
        let v = audit_expansion(&same, 2, &rational(4, 1), ExpansionMode::Exhaustive { budget: 100 }).unwrap();
        assert!(!v.pass);
        assert!(matches!(audit_expansion(&same, 1, &rational(1, 1), ExpansionMode::Exhaustive { budget: 100 }), Err(CspError::BadRange(1))));
        assert!(matches!(audit_expansion(&same, 2, &rational(1, 1), ExpansionMode::Exhaustive { budget: 0 }), Err(CspError::BudgetExceeded { .. })));
    }

    #[test]
    fn expansion_matches_recount() {
        let inst = sample_random_instance(40, 7, code27(), 8).unwrap();
        let v = audit_expansion(&inst, 4, &rational(3, 2), ExpansionMode::Exhaustive { budget: DEFAULT_EXPANSION_BUDGET }).unwrap();
        for level in &v.levels {
            // independent recount over bitmasks of constraints
            let mut best = usize::MAX;
            for mask in 0u32..(1 << inst.m()) {
                if mask.count_ones() as usize != level.s {
                    continue;
                }
                let mut vars: Vec<u32> = (0..inst.m()).filter(|i| mask >> i & 1 == 1).flat_map(|i| inst.constraint(i).vars.clone()).collect();
                vars.sort_unstable();
                vars.dedup();
                best = best.min(vars.len());
            }
            assert_eq!(level.min_union, best);
            assert_eq!(level.checked as f64, binomial(7, level.s));
        }
    }

    #[test]
    fn frequency_is_near_exact_probability() {
        let inst = sample_random_instance(200, 10, code27(), 1).unwrap();
        let r = satisfaction_frequency(&inst, 10_000, 1);
        assert!((r.expected - 1.0 / 243.0).abs() < 1e-15);
        assert!(r.within_3_sigma, "{r:?}");
    }

    #[test]
    fn file_round_trip() {
        let (inst, _) = plant_satisfiable_instance(10, 3, code27(), 4).unwrap();
        let json = serde_json::to_string(&inst.to_file()).unwrap();
        let back = CspInstance::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.constraints(), inst.constraints());
        assert_eq!(back.code(), inst.code());
        let mut bad: serde_json::Value = serde_json::from_str(&json).unwrap();
        bad["constraints"][0]["vars"][1] = bad["constraints"][0]["vars"][0].clone();
        assert!(CspInstance::from_file(serde_json::from_value(bad).unwrap()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn local_patterns_are_exactly_the_code(seed in 0u64..1000, q in prop::sample::select(vec![3u32, 4])) {
            let code = build_generalized_bch(q, 3).unwrap().dual();
            let inst = sample_random_instance(code.length() + 3, 2, code.clone(), seed).unwrap();
            for i in 0..2 {
                let pats = inst.satisfying_patterns(i);
                prop_assert_eq!(pats.len() as u128, code.size());
                let mut a = vec![0u32; inst.n()];
                for p in &pats {
                    for (&v, &x) in inst.constraint(i).vars.iter().zip(p) {
                        a[v as usize] = x;
                    }
                    prop_assert!(inst.constraint_satisfied(i, &a));
                }
            }
        }
    }
}
