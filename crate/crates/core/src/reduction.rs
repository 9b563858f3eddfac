//! Reduction from Max K-CSP(C) to Densest k-Subgraph: the constraint/variable
//! bipartite graph with replicated right side, plus soundness-side searches.
//!
//! Vertex ids: left vertex `(C_i, α_p)` is `i·|C| + p` where `p` indexes the
//! satisfying patterns of constraint `i`; base right label `(x_j, v)` is
//! `j·q + v`; right vertex `(x_j, v, c)` of the replicated graph is
//! `c·n·q + j·q + v`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{next_combination, CspError, CspInstance, InstanceFile};
use crate::exact::{format_rational, Rational};
use crate::graph::binomial;
use crate::rng::{self, purpose};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("replication factor must be at least 1")]
    BadBeta,
    #[error("m = {m} constraints but beta * n = {beta_n}; the reduction needs m = beta * n so that k = 2m balances both sides")]
    Unbalanced { m: usize, beta_n: usize },
    #[error("{count} left sets exceed budget {budget}")]
    BudgetExceeded { count: f64, budget: u64 },
    #[error("side sizes ({left}, {right}) exceed the graph ({max_left}, {max_right})")]
    BadSides { left: usize, right: usize, max_left: usize, max_right: usize },
    #[error("bipartite file: {0}")]
    Format(String),
    #[error(transparent)]
    Csp(#[from] CspError),
}

#[derive(Clone, Debug)]
pub struct BipartiteInstance {
    inst: CspInstance,
    beta: usize,
    patterns_per_constraint: usize,
    /// Left vertex id to its pattern on `T_i`.
    patterns: Vec<Vec<u32>>,
    /// Left vertex id to its `K` base right labels.
    left_adj: Vec<Vec<u32>>,
    /// Base right label to its left neighbours.
    right_adj: Vec<Vec<u32>>,
}

impl BipartiteInstance {
    pub fn instance(&self) -> &CspInstance {
        &self.inst
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// `k = 2m`.
    pub fn k(&self) -> usize {
        2 * self.inst.m()
    }

    pub fn left_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn base_right_count(&self) -> usize {
        self.inst.n() * self.inst.q() as usize
    }

    pub fn right_count(&self) -> usize {
        self.beta * self.base_right_count()
    }

    /// `N = m|C| + βnq`.
    pub fn vertex_count(&self) -> usize {
        self.left_count() + self.right_count()
    }

    pub fn edge_count(&self) -> usize {
        self.beta * self.left_adj.iter().map(Vec::len).sum::<usize>()
    }

    pub fn left_id(&self, constraint: usize, pattern: usize) -> usize {
        constraint * self.patterns_per_constraint + pattern
    }

    /// `(constraint, pattern index)`.
    pub fn left_label(&self, id: usize) -> (usize, usize) {
        (id / self.patterns_per_constraint, id % self.patterns_per_constraint)
    }

    pub fn pattern(&self, id: usize) -> &[u32] {
        &self.patterns[id]
    }

    pub fn base_label(&self, var: u32, value: u32) -> u32 {
        var * self.inst.q() + value
    }

    pub fn right_id(&self, var: u32, value: u32, copy: usize) -> usize {
        copy * self.base_right_count() + self.base_label(var, value) as usize
    }

    /// `(var, value, copy)`.
    pub fn right_label(&self, id: usize) -> (u32, u32, usize) {
        let base = self.base_right_count();
        let (copy, b) = (id / base, (id % base) as u32);
        (b / self.inst.q(), b % self.inst.q(), copy)
    }

    pub fn left_neighbors(&self, id: usize) -> &[u32] {
        &self.left_adj[id]
    }

    pub fn base_right_neighbors(&self, label: u32) -> &[u32] {
        &self.right_adj[label as usize]
    }

    pub fn left_degree(&self, id: usize) -> usize {
        self.beta * self.left_adj[id].len()
    }

    /// Edge list of the replicated graph, `(left id, right id)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let base = self.base_right_count();
        let mut out = Vec::with_capacity(self.edge_count());
        for (l, adj) in self.left_adj.iter().enumerate() {
            for c in 0..self.beta {
                out.extend(adj.iter().map(|&r| (l, c * base + r as usize)));
            }
        }
        out
    }

    /// Edges between `left` and `right` (right ids in the replicated graph).
    pub fn induced_edges(&self, left: &[usize], right: &[usize]) -> usize {
        let base = self.base_right_count();
        let mut in_right = vec![false; base];
        let mut weight = vec![0usize; base];
        for &r in right {
            in_right[r % base] = true;
            weight[r % base] += 1;
        }
        left.iter()
            .map(|&l| self.left_adj[l].iter().filter(|&&b| in_right[b as usize]).map(|&b| weight[b as usize]).sum::<usize>())
            .sum()
    }

    pub fn to_file(&self) -> BipartiteFile {
        BipartiteFile {
            beta: self.beta,
            k: self.k(),
            instance: self.inst.to_file(),
            left: (0..self.left_count())
                .map(|id| {
                    let (constraint, _) = self.left_label(id);
                    LeftLabel { constraint, pattern: self.patterns[id].clone() }
                })
                .collect(),
            right: (0..self.right_count())
                .map(|id| {
                    let (var, value, copy) = self.right_label(id);
                    RightLabel { var, value, copy }
                })
                .collect(),
            edges: self.edges(),
        }
    }

    /// Rebuilds from the embedded instance and checks every table against it.
    pub fn from_file(file: BipartiteFile) -> Result<Self, ReductionError> {
        let bi = build_reduction(CspInstance::from_file(file.instance.clone())?, file.beta)?;
        let expected = bi.to_file();
        if expected != file {
            return Err(ReductionError::Format("labels or edges differ from the reduction of the embedded instance".into()));
        }
        Ok(bi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeftLabel {
    pub constraint: usize,
    pub pattern: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RightLabel {
    pub var: u32,
    pub value: u32,
    pub copy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipartiteFile {
    pub beta: usize,
    pub k: usize,
    pub instance: InstanceFile,
    pub left: Vec<LeftLabel>,
    pub right: Vec<RightLabel>,
    pub edges: Vec<(usize, usize)>,
}

pub fn build_reduction(inst: CspInstance, beta: usize) -> Result<BipartiteInstance, ReductionError> {
    if beta == 0 {
        return Err(ReductionError::BadBeta);
    }
    if inst.m() != beta * inst.n() {
        return Err(ReductionError::Unbalanced { m: inst.m(), beta_n: beta * inst.n() });
    }
    let q = inst.q();
    let patterns_per_constraint = inst.code().size() as usize;
    let mut patterns = Vec::with_capacity(inst.m() * patterns_per_constraint);
    let mut left_adj = Vec::with_capacity(inst.m() * patterns_per_constraint);
    let mut right_adj = vec![Vec::new(); inst.n() * q as usize];
    for i in 0..inst.m() {
        let vars = &inst.constraint(i).vars;
        for alpha in inst.satisfying_patterns(i) {
            let id = patterns.len() as u32;
            let adj: Vec<u32> = vars.iter().zip(&alpha).map(|(&v, &a)| v * q + a).collect();
            for &r in &adj {
                right_adj[r as usize].push(id);
            }
            left_adj.push(adj);
            patterns.push(alpha);
        }
    }
    Ok(BipartiteInstance { inst, beta, patterns_per_constraint, patterns, left_adj, right_adj })
}

/// Per constraint, the largest agreement of a satisfying pattern with `r`
/// and whether it stays at most `8K/q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoorlySatisfied {
    pub max_agreement: Vec<usize>,
    pub poorly: Vec<bool>,
}

/// `r` holds base right labels `(x_j, v)`.
pub fn classify_poorly_satisfied(bi: &BipartiteInstance, r: &[u32]) -> PoorlySatisfied {
    let mut in_r = vec![false; bi.base_right_count()];
    for &x in r {
        in_r[x as usize] = true;
    }
    let inst = bi.instance();
    let k = inst.arity();
    let q = inst.q() as usize;
    let max_agreement: Vec<usize> = (0..inst.m())
        .map(|i| {
            (0..bi.patterns_per_constraint)
                .map(|p| bi.left_neighbors(bi.left_id(i, p)).iter().filter(|&&b| in_r[b as usize]).count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let poorly = max_agreement.iter().map(|&a| a * q <= 8 * k).collect();
    PoorlySatisfied { max_agreement, poorly }
}

/// Best `right_size` right vertices for a fixed left set: copies of the base
/// labels taken in order of decreasing degree into `left` (ties by id).
pub fn best_right_for_left(bi: &BipartiteInstance, left: &[usize], right_size: usize) -> (Vec<usize>, usize) {
    let mut deg = vec![0usize; bi.base_right_count()];
    for &l in left {
        for &b in bi.left_neighbors(l) {
            deg[b as usize] += 1;
        }
    }
    let mut order: Vec<usize> = (0..bi.right_count()).collect();
    let base = bi.base_right_count();
    order.sort_by(|&a, &b| deg[b % base].cmp(&deg[a % base]).then(a.cmp(&b)));
    order.truncate(right_size);
    let edges = order.iter().map(|&r| deg[r % base]).sum();
    order.sort_unstable();
    (order, edges)
}

fn objective(deg: &[usize], beta: usize, right_size: usize, scratch: &mut Vec<usize>) -> usize {
    scratch.clear();
    scratch.extend_from_slice(deg);
    scratch.sort_unstable_by(|a, b| b.cmp(a));
    let mut left = right_size;
    let mut total = 0;
    for &d in scratch.iter() {
        if left == 0 || d == 0 {
            break;
        }
        let take = beta.min(left);
        total += take * d;
        left -= take;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BalancedMode {
    Exhaustive { budget: u64 },
    /// Random left sets, then swap local search from the best `restarts`.
    Search { samples: usize, restarts: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSubgraph {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub edges: usize,
    pub method: String,
}

/// Densest subgraph with `left_size` left and `right_size` right vertices.
pub fn densest_balanced_subgraph(
    bi: &BipartiteInstance,
    left_size: usize,
    right_size: usize,
    mode: BalancedMode,
) -> Result<BalancedSubgraph, ReductionError> {
    if left_size > bi.left_count() || right_size > bi.right_count() {
        return Err(ReductionError::BadSides {
            left: left_size,
            right: right_size,
            max_left: bi.left_count(),
            max_right: bi.right_count(),
        });
    }
    let (left, method) = match mode {
        BalancedMode::Exhaustive { budget } => {
            let count = binomial(bi.left_count(), left_size);
            if count > budget as f64 {
                return Err(ReductionError::BudgetExceeded { count, budget });
            }
            (exhaustive_left(bi, left_size, right_size), "exact".to_string())
        }
        BalancedMode::Search { samples, restarts, seed } => {
            (search_left(bi, left_size, right_size, samples, restarts, seed), "local-search".to_string())
        }
    };
    let (right, edges) = best_right_for_left(bi, &left, right_size);
    Ok(BalancedSubgraph { left, right, edges, method })
}

fn exhaustive_left(bi: &BipartiteInstance, left_size: usize, right_size: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..left_size).collect();
    let mut best = (0, c.clone());
    let mut deg = vec![0usize; bi.base_right_count()];
    let mut scratch = Vec::new();
    let mut first = true;
    loop {
        deg.iter_mut().for_each(|d| *d = 0);
        for &l in &c {
            for &b in bi.left_neighbors(l) {
                deg[b as usize] += 1;
            }
        }
        let value = objective(&deg, bi.beta(), right_size, &mut scratch);
        if first || value > best.0 {
            best = (value, c.clone());
            first = false;
        }
        if left_size == 0 || !next_combination(&mut c, bi.left_count()) {
            break;
        }
    }
    best.1
}

fn search_left(bi: &BipartiteInstance, left_size: usize, right_size: usize, samples: usize, restarts: usize, seed: u64) -> Vec<usize> {
    let total = bi.left_count();
    let mut rng = rng::stream(seed, purpose::BALANCED);
    let mut scratch = Vec::new();
    let eval = |set: &[usize], scratch: &mut Vec<usize>| {
        let mut deg = vec![0usize; bi.base_right_count()];
        for &l in set {
            for &b in bi.left_neighbors(l) {
                deg[b as usize] += 1;
            }
        }
        objective(&deg, bi.beta(), right_size, scratch)
    };
    let mut starts: Vec<(usize, Vec<usize>)> = Vec::new();
    // one start per constraint: its first patterns, which share variables
    for i in 0..bi.instance().m() {
        let own = (0..total).filter(|&l| bi.left_label(l).0 == i);
        let rest = (0..total).filter(|&l| bi.left_label(l).0 != i);
        let mut set: Vec<usize> = own.chain(rest).take(left_size).collect();
        set.sort_unstable();
        starts.push((eval(&set, &mut scratch), set));
    }
    for _ in 0..samples {
        let set: Vec<usize> = rng::sorted_subset(&mut rng, total, left_size).into_iter().map(|x| x as usize).collect();
        starts.push((eval(&set, &mut scratch), set));
    }
    if starts.is_empty() {
        starts.push((0, (0..left_size).collect()));
    }
    starts.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    starts.truncate(restarts.max(1));
    let mut best: Option<(usize, Vec<usize>)> = None;
    for (_, start) in starts {
        let improved = swap_search(bi, start, right_size, &mut rng, &mut scratch);
        let better = match &best {
            None => true,
            Some((v, s)) => improved.0 > *v || (improved.0 == *v && improved.1 < *s),
        };
        if better {
            best = Some(improved);
        }
    }
    best.expect("at least one start").1
}

fn swap_search(
    bi: &BipartiteInstance,
    mut set: Vec<usize>,
    right_size: usize,
    rng: &mut rng::Rng,
    scratch: &mut Vec<usize>,
) -> (usize, Vec<usize>) {
    let mut member = vec![false; bi.left_count()];
    let mut deg = vec![0usize; bi.base_right_count()];
    for &l in &set {
        member[l] = true;
        for &b in bi.left_neighbors(l) {
            deg[b as usize] += 1;
        }
    }
    let mut value = objective(&deg, bi.beta(), right_size, scratch);
    loop {
        let mut improved = false;
        let offset = if set.is_empty() { 0 } else { rng.gen_range(0..set.len()) };
        'outer: for step in 0..set.len() {
            let pos = (offset + step) % set.len();
            let out = set[pos];
            for &b in bi.left_neighbors(out) {
                deg[b as usize] -= 1;
            }
            for cand in 0..bi.left_count() {
                if member[cand] {
                    continue;
                }
                for &b in bi.left_neighbors(cand) {
                    deg[b as usize] += 1;
                }
                let v = objective(&deg, bi.beta(), right_size, scratch);
                if v > value {
                    value = v;
                    member[out] = false;
                    member[cand] = true;
                    set[pos] = cand;
                    improved = true;
                    break 'outer;
                }
                for &b in bi.left_neighbors(cand) {
                    deg[b as usize] -= 1;
                }
            }
            for &b in bi.left_neighbors(out) {
                deg[b as usize] += 1;
            }
        }
        if !improved {
            break;
        }
    }
    set.sort_unstable();
    (value, set)
}

/// Edges of the completeness witness: the hidden assignment's pattern on every
/// constraint and every copy of its right labels.
pub fn planted_witness(bi: &BipartiteInstance, hidden: &[u32]) -> Option<(Vec<usize>, Vec<usize>, usize)> {
    let inst = bi.instance();
    let mut left = Vec::with_capacity(inst.m());
    for i in 0..inst.m() {
        let local: Vec<u32> = inst.constraint(i).vars.iter().map(|&v| hidden[v as usize]).collect();
        let p = (0..bi.patterns_per_constraint).find(|&p| bi.pattern(bi.left_id(i, p)) == local.as_slice())?;
        left.push(bi.left_id(i, p));
    }
    let right: Vec<usize> = (0..bi.beta())
        .flat_map(|c| (0..inst.n() as u32).map(move |j| (j, c)))
        .map(|(j, c)| bi.right_id(j, hidden[j as usize], c))
        .collect();
    let edges = bi.induced_edges(&left, &right);
    Some((left, right, edges))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoundnessStatus {
    Pass,
    Fail,
    Informational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub q: u32,
    #[serde(rename = "K")]
    pub k_arity: usize,
    pub m: usize,
    pub beta: usize,
    pub best_edges: usize,
    pub best_method: String,
    /// `βmK`.
    pub completeness: usize,
    /// `17βmK/q` as `"num/den"`.
    pub bound: String,
    pub bound_f64: f64,
    /// `completeness / best_edges`.
    pub ratio: Option<f64>,
    pub q_over_17: f64,
    pub status: SoundnessStatus,
}

/// Compares the best found value with `17βmK/q`; the comparison is a verdict
/// only when `q > 1000` and `K > q²/2`.
pub fn soundness_report(bi: &BipartiteInstance, best: &BalancedSubgraph) -> SoundnessReport {
    let inst = bi.instance();
    let (q, k, m, beta) = (inst.q(), inst.arity(), inst.m(), bi.beta());
    let completeness = beta * m * k;
    let bound = Rational::new((17 * completeness).into(), q.into());
    let in_regime = q > 1000 && 2 * k > (q as usize).pow(2);
    let status = if !in_regime {
        SoundnessStatus::Informational
    } else if Rational::from_integer(best.edges.into()) <= bound {
        SoundnessStatus::Pass
    } else {
        SoundnessStatus::Fail
    };
    SoundnessReport {
        q,
        k_arity: k,
        m,
        beta,
        best_edges: best.edges,
        best_method: best.method.clone(),
        completeness,
        bound: format_rational(&bound),
        bound_f64: crate::exact::rational_to_f64(&bound),
        ratio: (best.edges > 0).then(|| completeness as f64 / best.edges as f64),
        q_over_17: q as f64 / 17.0,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::code::{build_generalized_bch, LinearCode};
    use crate::codes::field::Field;
    use crate::csp::{plant_satisfiable_instance, sample_random_instance};

    fn code27() -> LinearCode {
        build_generalized_bch(3, 3).unwrap().dual()
    }

    #[test]
    fn preset_sizes() {
        let (inst, hidden) = plant_satisfiable_instance(10, 10, code27(), 1).unwrap();
        let bi = build_reduction(inst, 1).unwrap();
        assert_eq!((bi.left_count(), bi.right_count(), bi.vertex_count(), bi.k()), (270, 30, 300, 20));
        assert!((0..bi.left_count()).all(|l| bi.left_degree(l) == 8));
        assert_eq!(bi.edge_count(), 10 * 27 * 8);
        let (left, right, edges) = planted_witness(&bi, &hidden).unwrap();
        assert_eq!((left.len(), right.len(), edges), (10, 10, 80));
    }

    #[test]
    fn rejects_bad_parameters() {
        let inst = sample_random_instance(10, 9, code27(), 1).unwrap();
        assert!(matches!(build_reduction(inst.clone(), 1), Err(ReductionError::Unbalanced { m: 9, beta_n: 10 })));
        assert!(matches!(build_reduction(inst, 0), Err(ReductionError::BadBeta)));
        let empty = sample_random_instance(0, 0, LinearCode::repetition(Field::new(3).unwrap(), 0), 1);
        let bi = build_reduction(empty.unwrap(), 2).unwrap();
        assert_eq!((bi.left_count(), bi.vertex_count()), (0, 0));
    }

    #[test]
    fn copies_share_neighbourhoods() {
        let inst = sample_random_instance(9, 18, code27(), 4).unwrap();
        let bi = build_reduction(inst, 2).unwrap();
        assert_eq!(bi.edge_count(), 2 * 18 * 27 * 8);
        let edges = bi.edges();
        assert_eq!(edges.len(), bi.edge_count());
        let base = bi.base_right_count();
        let nbrs = |r: usize| {
            let mut v: Vec<usize> = edges.iter().filter(|e| e.1 == r).map(|e| e.0).collect();
            v.sort_unstable();
            v
        };
        for r in 0..base {
            assert_eq!(nbrs(r), nbrs(r + base));
            let (var, value, copy) = bi.right_label(r + base);
            assert_eq!((bi.right_id(var, value, copy), copy), (r + base, 1));
        }
        for (l, r) in edges {
            let (i, _) = bi.left_label(l);
            let (var, value, _) = bi.right_label(r);
            let pos = bi.instance().constraint(i).vars.iter().position(|&v| v == var).unwrap();
            assert_eq!(bi.pattern(l)[pos], value);
        }
    }

    #[test]
    fn poorly_satisfied_extremes_and_recount() {
        let inst = sample_random_instance(10, 10, code27(), 2).unwrap();
        let bi = build_reduction(inst.clone(), 1).unwrap();
        let none = classify_poorly_satisfied(&bi, &[]);
        assert!(none.poorly.iter().all(|&p| p));
        let all: Vec<u32> = (0..30).collect();
        let full = classify_poorly_satisfied(&bi, &all);
        assert!(full.max_agreement.iter().all(|&a| a == 8));
        assert!(full.poorly.iter().all(|&p| p), "q = 3 <= 8");
        let mut rng = rng::stream(7, 0);
        for _ in 0..10 {
            let r = rng::sorted_subset(&mut rng, 30, 20);
            let got = classify_poorly_satisfied(&bi, &r);
            for i in 0..10 {
                let c = &inst.constraint(i);
                let mut best = 0;
                for codeword in inst.code().codewords() {
                    let alpha: Vec<u32> = codeword.iter().zip(&c.shift).map(|(&x, &b)| (x + 3 - b) % 3).collect();
                    let agr = c.vars.iter().zip(&alpha).filter(|&(&v, &a)| r.contains(&(v * 3 + a))).count();
                    best = best.max(agr);
                }
                assert_eq!(got.max_agreement[i], best);
                assert_eq!(got.poorly[i], best * 3 <= 64);
            }
        }
    }

    /// `q = 3`, `K = 3`, code = span{(1, 1, 1)}.
    fn tiny(n: usize, beta: usize, seed: u64) -> BipartiteInstance {
        let code = LinearCode::repetition(Field::new(3).unwrap(), 3);
        build_reduction(sample_random_instance(n, beta * n, code, seed).unwrap(), beta).unwrap()
    }

    #[test]
    fn greedy_right_equals_exhaustive_right() {
        for seed in 0..6 {
            let bi = tiny(3, 2, seed);
            assert!(bi.right_count() <= 20);
            let mut rng = rng::stream(seed, 1);
            for right_size in [1, 4, 7, 12] {
                let left: Vec<usize> = rng::sorted_subset(&mut rng, bi.left_count(), 5).into_iter().map(|x| x as usize).collect();
                let (_, greedy) = best_right_for_left(&bi, &left, right_size);
                let mut best = 0;
                let mut c: Vec<usize> = (0..right_size).collect();
                loop {
                    best = best.max(bi.induced_edges(&left, &c));
                    if !next_combination(&mut c, bi.right_count()) {
                        break;
                    }
                }
                assert_eq!(greedy, best, "seed {seed} size {right_size}");
            }
        }
    }

    #[test]
    fn search_matches_exhaustive_on_tiny() {
        for seed in 0..4 {
            let bi = tiny(4, 1, seed);
            let exact = densest_balanced_subgraph(&bi, 4, 4, BalancedMode::Exhaustive { budget: 1_000_000 }).unwrap();
            let found = densest_balanced_subgraph(&bi, 4, 4, BalancedMode::Search { samples: 200, restarts: 8, seed }).unwrap();
            assert!(found.edges <= exact.edges);
            assert_eq!(bi.induced_edges(&exact.left, &exact.right), exact.edges);
            assert_eq!(found.edges, exact.edges, "seed {seed}");
        }
        let one = densest_balanced_subgraph(&tiny(3, 1, 0), 1, 1, BalancedMode::Exhaustive { budget: 100 }).unwrap();
        assert_eq!(one.edges, 1);
    }

    #[test]
    fn soundness_is_informational_at_small_q() {
        let (inst, _) = plant_satisfiable_instance(10, 10, code27(), 1).unwrap();
        let bi = build_reduction(inst, 1).unwrap();
        let best = densest_balanced_subgraph(&bi, 20, 20, BalancedMode::Search { samples: 50, restarts: 2, seed: 1 }).unwrap();
        let report = soundness_report(&bi, &best);
        assert_eq!(report.completeness, 80);
        assert_eq!(report.bound, "1360/3");
        assert_eq!(report.status, SoundnessStatus::Informational);
    }

    #[test]
    fn file_round_trip() {
        let (inst, _) = plant_satisfiable_instance(10, 10, code27(), 3).unwrap();
        let bi = build_reduction(inst, 1).unwrap();
        let file = bi.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back = BipartiteInstance::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.edges(), bi.edges());
        let mut bad = file;
        bad.edges.pop();
        assert!(BipartiteInstance::from_file(bad).is_err());
    }
}
