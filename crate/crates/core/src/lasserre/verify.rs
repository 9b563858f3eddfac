//! Exact verdicts for the constraints a Lasserre vector family claims.

use std::collections::{BTreeMap, HashMap};

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::oracle::{CspLabel, Label, MomentOracle, VertexSet};
use super::LasserreError;
use crate::csp::CspInstance;
use crate::exact::{format_rational, rational_to_f64, Rational};
use crate::mixed::{min_eigenvalue, SymmetricMatrix};
use crate::reduction::BipartiteInstance;
use crate::rng::{self, purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub checked: u64,
    pub method: String,
    pub witness: Option<String>,
}

impl Check {
    fn new(name: &str, method: &str) -> Self {
        Check { name: name.into(), pass: true, checked: 0, method: method.into(), witness: None }
    }

    fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            if self.pass {
                self.witness = Some(witness());
            }
            self.pass = false;
        }
    }

    fn error(&mut self, e: LasserreError) {
        self.record(false, || e.to_string());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub checks: Vec<Check>,
    /// Reported quantities, exact values as `"num/den"`.
    pub values: BTreeMap<String, String>,
    pub pass: bool,
}

impl Verdict {
    fn new(checks: Vec<Check>, values: BTreeMap<String, String>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Verdict { checks, values, pass }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn zero() -> Rational {
    Rational::zero()
}

fn one() -> Rational {
    Rational::from_integer(1.into())
}

fn int(x: usize) -> Rational {
    Rational::from_integer(x.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PairEnumeration {
    All,
    Sampled { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspVerifyOptions {
    pub max_label_size: usize,
    pub union_samples: usize,
    pub seed: u64,
    pub psd_tol: f64,
}

impl Default for CspVerifyOptions {
    fn default() -> Self {
        CspVerifyOptions { max_label_size: 2, union_samples: 10_000, seed: 1, psd_tol: 1e-8 }
    }
}

/// `∅`, then every label on at most `max_size` variables, by size then lex.
pub fn csp_labels(n: usize, q: u32, max_size: usize) -> Vec<CspLabel> {
    let mut out = vec![CspLabel::empty()];
    if max_size >= 1 {
        for v in 0..n as u32 {
            for x in 0..q {
                out.push(CspLabel::single(v, x));
            }
        }
    }
    if max_size >= 2 {
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                for x in 0..q {
                    for y in 0..q {
                        out.push(CspLabel::new(vec![(u, x), (v, y)]).unwrap());
                    }
                }
            }
        }
    }
    out
}

fn gram_lambda_min<O: MomentOracle>(oracle: &O, labels: &[O::Label], check: &mut Check, tol: f64) -> Option<f64> {
    let d = labels.len();
    let mut m = SymmetricMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            match oracle.inner(&labels[i], &labels[j]) {
                Ok(v) => m.set(i, j, rational_to_f64(&v)),
                Err(e) => {
                    check.error(e);
                    return None;
                }
            }
        }
    }
    match min_eigenvalue(&m) {
        Ok(lambda) => {
            check.record(lambda >= -tol, || format!("lambda_min = {lambda:e}"));
            Some(lambda)
        }
        Err(e) => {
            check.record(false, || e.to_string());
            None
        }
    }
}

/// Random second decomposition `u = l3 ∪ l4` with both parts of size at most
/// `cap`.
fn split<L: Label>(u: &L, cap: usize, rng: &mut rng::Rng) -> Option<(L, L)> {
    let items = u.items();
    for _ in 0..100 {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for it in items {
            match rng.gen_range(0..3) {
                0 => a.push(it.clone()),
                1 => b.push(it.clone()),
                _ => {
                    a.push(it.clone());
                    b.push(it.clone());
                }
            }
        }
        if a.len() <= cap && b.len() <= cap {
            return Some((L::from_items(a)?, L::from_items(b)?));
        }
    }
    None
}

/// `⟨V_1, V_2⟩ = ⟨V_3, V_4⟩` whenever the two pairs have the same union:
/// every pair of labels of size at most 1 is grouped by union; larger labels
/// are checked on random second decompositions.
fn union_consistency<O: MomentOracle>(
    oracle: &O,
    labels: &[O::Label],
    samples: usize,
    seed: u64,
    cap: usize,
) -> Check {
    let mut check = Check::new("union-consistent", "exact");
    let small: Vec<&O::Label> = labels.iter().filter(|l| l.size() <= 1).collect();
    let mut seen: HashMap<O::Label, (Rational, usize, usize)> = HashMap::new();
    for (i, a) in small.iter().enumerate() {
        for (j, b) in small.iter().enumerate().skip(i) {
            let Some(u) = a.union(b) else { continue };
            let v = match oracle.inner(a, b) {
                Ok(v) => v,
                Err(e) => {
                    check.error(e);
                    continue;
                }
            };
            match seen.get(&u) {
                Some((w, x, y)) => {
                    let (w, x, y) = (w.clone(), *x, *y);
                    check.record(v == w, || format!("<{:?},{:?}> != <{:?},{:?}>", a, b, small[x], small[y]));
                }
                None => {
                    seen.insert(u, (v, i, j));
                }
            }
        }
    }
    if samples == 0 || labels.iter().all(|l| l.size() <= 1) {
        return check;
    }
    check.method = format!("exact+sampled({samples})");
    let mut rng = rng::stream(seed, purpose::LASSERRE);
    let positive: Vec<&O::Label> = labels
        .iter()
        .filter(|l| oracle.norm2(l).map(|v| v.is_positive()).unwrap_or(false))
        .collect();
    let pool: Vec<&O::Label> = labels.iter().collect();
    let mut done = 0;
    let mut attempts = 0;
    while done < samples && attempts < 50 * samples {
        attempts += 1;
        let source = if rng.gen_bool(0.5) && !positive.is_empty() { &positive } else { &pool };
        let a = *source.choose(&mut rng).unwrap();
        let b = *source.choose(&mut rng).unwrap();
        if a.size().max(b.size()) < 2 {
            continue;
        }
        let Some(u) = a.union(b) else { continue };
        let Some((c, d)) = split(&u, cap, &mut rng) else { continue };
        if !oracle.serves(&c) || !oracle.serves(&d) {
            continue;
        }
        done += 1;
        match (oracle.inner(a, b), oracle.inner(&c, &d)) {
            (Ok(x), Ok(y)) => check.record(x == y, || format!("<{a:?},{b:?}> = {x} but <{c:?},{d:?}> = {y}")),
            (Err(e), _) | (_, Err(e)) => check.error(e),
        }
    }
    check
}

/// The perfect-solution properties of a CSP vector family.
pub fn verify_csp_properties<O: MomentOracle<Label = CspLabel>>(
    oracle: &O,
    inst: &CspInstance,
    opts: &CspVerifyOptions,
) -> Verdict {
    let q = inst.q();
    let cap = opts.max_label_size.min(oracle.round_bound());
    let labels: Vec<CspLabel> = match oracle.labels() {
        Some(served) => {
            let mut ls: Vec<CspLabel> = served.into_iter().filter(|l| l.size() <= cap).collect();
            ls.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
            ls
        }
        None => csp_labels(inst.n(), q, cap),
    };
    let empty = CspLabel::empty();
    let mut values = BTreeMap::new();

    let mut empty_norm = Check::new("empty-norm", "exact");
    match oracle.norm2(&empty) {
        Ok(v) => empty_norm.record(v == one(), || format!("<V_0, V_0> = {v}")),
        Err(e) => empty_norm.error(e),
    }

    let mut perfect = Check::new("perfect-value", "exact");
    let mut residual = Check::new("perfect-residual", "exact");
    for i in 0..inst.m() {
        let vars = &inst.constraint(i).vars;
        let pats: Vec<CspLabel> = inst
            .satisfying_patterns(i)
            .into_iter()
            .map(|a| CspLabel::new(vars.iter().copied().zip(a).collect()).expect("distinct tuple"))
            .collect();
        let norms: Result<Vec<Rational>, _> = pats.iter().map(|p| oracle.norm2(p)).collect();
        match norms {
            Ok(ns) => {
                let total: Rational = ns.iter().sum();
                perfect.record(total == one(), || format!("constraint {i}: value {total}"));
            }
            Err(e) => perfect.error(e),
        }
        // ‖Σ_α V_α - V_∅‖² expanded through pairwise products
        let mut acc = Ok(one());
        for a in &pats {
            for b in &pats {
                acc = acc.and_then(|s| Ok(s + oracle.inner(a, b)?));
            }
            acc = acc.and_then(|s| Ok(s - int(2) * oracle.inner(a, &empty)?));
        }
        acc = acc.and_then(|s| Ok(s - one() + oracle.norm2(&empty)?));
        match acc {
            Ok(r) => residual.record(r.is_zero(), || format!("constraint {i}: residual {r}")),
            Err(e) => residual.error(e),
        }
    }

    let mut nonneg = Check::new("nonnegative", "exact");
    let mut conflict = Check::new("conflict-zero", "exact");
    let mut symmetric = Check::new("symmetric", "exact");
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i..] {
            let v = match oracle.inner(a, b) {
                Ok(v) => v,
                Err(e) => {
                    nonneg.error(e);
                    continue;
                }
            };
            nonneg.record(!v.is_negative(), || format!("<{a:?},{b:?}> = {v}"));
            if !a.consistent(b) {
                conflict.record(v.is_zero(), || format!("<{a:?},{b:?}> = {v}"));
            }
            if a.size() <= 1 && b.size() <= 1 {
                match oracle.inner(b, a) {
                    Ok(w) => symmetric.record(v == w, || format!("<{a:?},{b:?}> = {v}, reversed {w}")),
                    Err(e) => symmetric.error(e),
                }
            }
        }
    }

    let union = union_consistency(oracle, &labels, opts.union_samples, opts.seed, cap);

    let mut marginals = Check::new("variable-marginals", "exact");
    for v in 0..inst.n() as u32 {
        let total: Result<Rational, _> = (0..q).map(|x| oracle.norm2(&CspLabel::single(v, x))).sum();
        match total {
            Ok(t) => marginals.record(t == one(), || format!("variable {v}: {t}")),
            Err(e) => marginals.error(e),
        }
    }

    let mut psd = Check::new("gram-psd", &format!("float-tol({:e})", opts.psd_tol));
    let singles: Vec<CspLabel> = labels.iter().filter(|l| l.size() <= 1).cloned().collect();
    if let Some(lambda) = gram_lambda_min(oracle, &singles, &mut psd, opts.psd_tol) {
        values.insert("gram_lambda_min".into(), format!("{lambda:e}"));
    }
    values.insert("labels".into(), labels.len().to_string());

    Verdict::new(vec![empty_norm, perfect, residual, nonneg, conflict, symmetric, union, marginals, psd], values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DksVerifyOptions {
    /// Defaults to `2m`.
    pub k: Option<usize>,
    pub max_label_size: usize,
    pub pairs: PairEnumeration,
    pub union_samples: usize,
    pub seed: u64,
}

impl Default for DksVerifyOptions {
    fn default() -> Self {
        DksVerifyOptions { k: None, max_label_size: 2, pairs: PairEnumeration::All, union_samples: 10_000, seed: 1 }
    }
}

/// Sets `S` checked by the DkS verifiers: `∅`, singletons and (all or
/// sampled) pairs, or the oracle's own labels of that size when finite.
pub fn dks_sets<O: MomentOracle<Label = VertexSet>>(oracle: &O, vertices: usize, max_size: usize, pairs: PairEnumeration) -> Vec<VertexSet> {
    if let Some(served) = oracle.labels() {
        let mut ls: Vec<VertexSet> = served.into_iter().filter(|l| l.size() <= max_size).collect();
        ls.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        return ls;
    }
    let mut out = vec![VertexSet::empty()];
    if max_size >= 1 {
        out.extend((0..vertices).map(|v| VertexSet::new(vec![v])));
    }
    if max_size >= 2 {
        match pairs {
            PairEnumeration::All => {
                for u in 0..vertices {
                    for v in u + 1..vertices {
                        out.push(VertexSet::new(vec![u, v]));
                    }
                }
            }
            PairEnumeration::Sampled { count, seed } => {
                // half uniform, half among vertices of positive norm
                let positive: Vec<usize> = (0..vertices)
                    .filter(|&v| oracle.norm2(&VertexSet::new(vec![v])).map(|x| x.is_positive()).unwrap_or(false))
                    .collect();
                let mut rng = rng::stream(seed, purpose::LASSERRE | 1);
                for i in 0..count {
                    let pair = if i % 2 == 1 && positive.len() >= 2 {
                        rng::sorted_subset(&mut rng, positive.len(), 2).into_iter().map(|x| positive[x as usize]).collect()
                    } else {
                        rng::sorted_subset(&mut rng, vertices, 2).into_iter().map(|x| x as usize).collect()
                    };
                    out.push(VertexSet::new(pair));
                }
            }
        }
    }
    out
}

/// Global DkS vertex id of right vertex `r`.
fn right_vertex(bi: &BipartiteInstance, r: usize) -> usize {
    bi.left_count() + r
}

/// The constraints of the DkS relaxation for the lifted family.
pub fn verify_dks_lasserre<O: MomentOracle<Label = VertexSet>>(oracle: &O, bi: &BipartiteInstance, opts: &DksVerifyOptions) -> Verdict {
    let k = opts.k.unwrap_or(bi.k());
    let nv = bi.vertex_count();
    let cap = opts.max_label_size.min(oracle.round_bound());
    let sets = dks_sets(oracle, nv, cap, opts.pairs);
    let singles: Vec<VertexSet> = (0..nv).map(|v| VertexSet::new(vec![v])).collect();
    let inst = bi.instance();
    let per_side = int(inst.m() + bi.beta() * inst.n());
    let mut values = BTreeMap::new();

    let mut empty_norm = Check::new("empty-norm", "exact");
    match oracle.norm2(&VertexSet::empty()) {
        Ok(v) => empty_norm.record(v == one(), || format!("|U_0|^2 = {v}")),
        Err(e) => empty_norm.error(e),
    }

    let method = match opts.pairs {
        PairEnumeration::All => "exact".to_string(),
        PairEnumeration::Sampled { count, .. } => format!("exact on sampled({count}) pairs"),
    };
    let mut nonneg = Check::new("nonnegative", &method);
    let mut size = Check::new("size-constraint", &method);
    let mut identity = Check::new("size-identity", &method);
    for s in &sets {
        let norm = match oracle.norm2(s) {
            Ok(v) => v,
            Err(e) => {
                size.error(e);
                continue;
            }
        };
        nonneg.record(!norm.is_negative(), || format!("|U_{s:?}|^2 = {norm}"));
        let mut total = zero();
        let mut failed = false;
        for v in &singles {
            match oracle.inner(v, s) {
                Ok(x) => {
                    nonneg.record(!x.is_negative(), || format!("<U_{v:?}, U_{s:?}> = {x}"));
                    total += x;
                }
                Err(e) => {
                    size.error(e);
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            continue;
        }
        let bound = int(k) * &norm;
        size.record(total <= bound, || format!("S = {s:?}: sum {total} > k |U_S|^2 = {bound}"));
        let expected = &per_side * &norm;
        identity.record(total == expected, || format!("S = {s:?}: sum {total} != (m + beta n) |U_S|^2 = {expected}"));
    }
    values.insert("m_plus_beta_n".into(), format_rational(&per_side));
    values.insert("k".into(), k.to_string());
    values.insert("sets".into(), sets.len().to_string());

    let mut objective = Check::new("objective", "exact");
    let completeness = int(bi.beta() * inst.m() * inst.arity());
    let mut total = zero();
    // ⟨U_l, U_r⟩, which union-consistency equates with |U_{l,r}|^2
    for (l, r) in bi.edges() {
        match oracle.inner(&VertexSet::new(vec![l]), &VertexSet::new(vec![right_vertex(bi, r)])) {
            Ok(x) => total += x,
            Err(e) => objective.error(e),
        }
    }
    objective.record(total == completeness, || format!("objective {total} != beta m K = {completeness}"));
    values.insert("objective".into(), format_rational(&total));
    values.insert("beta_m_k".into(), format_rational(&completeness));

    let mut copies = Check::new("copy-invariance", "exact");
    let base = bi.base_right_count();
    let probes: Vec<&VertexSet> = sets.iter().filter(|s| s.size() <= 1).collect();
    for b in 0..base {
        let first = VertexSet::new(vec![right_vertex(bi, b)]);
        for c in 1..bi.beta() {
            let other = VertexSet::new(vec![right_vertex(bi, c * base + b)]);
            for s in &probes {
                match (oracle.inner(&first, s), oracle.inner(&other, s)) {
                    (Ok(x), Ok(y)) => copies.record(x == y, || format!("copies of right label {b} differ at {s:?}")),
                    (Err(e), _) | (_, Err(e)) => copies.error(e),
                }
            }
        }
    }

    let union = union_consistency(oracle, &sets, opts.union_samples, opts.seed, cap);
    Verdict::new(vec![empty_norm, nonneg, size, identity, objective, copies, union], values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinDegreeOptions {
    /// Required degree; defaults to the realized minimum factor.
    pub d: Option<Rational>,
    pub max_label_size: usize,
    pub pairs: PairEnumeration,
}

impl Default for MinDegreeOptions {
    fn default() -> Self {
        MinDegreeOptions { d: None, max_label_size: 2, pairs: PairEnumeration::Sampled { count: 2000, seed: 1 } }
    }
}

/// `Σ_{v ∈ Γ(u)} ⟨U_{u,v}, U_S⟩ ≥ d ⟨U_u, U_S⟩`, with the exact factors the
/// lifted family realizes: `βK` at left vertices and the number of
/// constraints on the variable at right vertices.
pub fn verify_min_degree<O: MomentOracle<Label = VertexSet>>(oracle: &O, bi: &BipartiteInstance, opts: &MinDegreeOptions) -> Verdict {
    let inst = bi.instance();
    let nv = bi.vertex_count();
    let nl = bi.left_count();
    let base = bi.base_right_count();
    let cap = opts.max_label_size.min(oracle.round_bound());
    let sets = dks_sets(oracle, nv, cap, opts.pairs);
    let mut occurrences = vec![0usize; inst.n()];
    for c in inst.constraints() {
        for &v in &c.vars {
            occurrences[v as usize] += 1;
        }
    }
    let neighbours = |u: usize| -> Vec<usize> {
        if u < nl {
            (0..bi.beta())
                .flat_map(|c| bi.left_neighbors(u).iter().map(move |&b| nl + c * base + b as usize))
                .collect()
        } else {
            bi.base_right_neighbors(((u - nl) % base) as u32).iter().map(|&l| l as usize).collect()
        }
    };
    let adjacency: Vec<Vec<usize>> = (0..nv).map(neighbours).collect();
    let factor = |u: usize| -> usize {
        if u < nl {
            bi.beta() * inst.arity()
        } else {
            occurrences[((u - nl) % base) / inst.q() as usize]
        }
    };

    let method = match opts.pairs {
        PairEnumeration::All => "exact".to_string(),
        PairEnumeration::Sampled { count, .. } => format!("exact on sampled({count}) pairs"),
    };
    let mut left = Check::new("left-factor", &method);
    let mut right = Check::new("right-factor", &method);
    let mut nonneg_zero = Check::new("zero-denominator", &method);
    let mut min_pos: Option<Rational> = None;
    let mut max_neg: Option<Rational> = None;
    for s in &sets {
        #[allow(clippy::needless_range_loop)]
        for u in 0..nv {
            let uset = VertexSet::new(vec![u]);
            let den = match oracle.inner(&uset, s) {
                Ok(x) => x,
                Err(e) => {
                    left.error(e);
                    continue;
                }
            };
            let mut sum = zero();
            let mut failed = false;
            for &v in &adjacency[u] {
                match oracle.inner(&VertexSet::new(vec![u, v]), s) {
                    Ok(x) => sum += x,
                    Err(e) => {
                        left.error(e);
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                continue;
            }
            let f = int(factor(u));
            let check = if u < nl { &mut left } else { &mut right };
            check.record(sum == &f * &den, || format!("u = {u}, S = {s:?}: sum {sum} != {f} * {den}"));
            if den.is_zero() {
                nonneg_zero.record(!sum.is_negative(), || format!("u = {u}, S = {s:?}: sum {sum} < 0"));
            } else {
                let ratio = &sum / &den;
                if den.is_positive() {
                    if min_pos.as_ref().is_none_or(|m| ratio < *m) {
                        min_pos = Some(ratio);
                    }
                } else if max_neg.as_ref().is_none_or(|m| ratio > *m) {
                    max_neg = Some(ratio);
                }
            }
        }
    }
    let d_star = min_pos.clone().unwrap_or_else(zero);
    let d = opts.d.clone().unwrap_or_else(|| d_star.clone());
    let mut inequality = Check::new("min-degree", &method);
    inequality.record(min_pos.as_ref().is_none_or(|m| *m >= d), || format!("realized factor {d_star} < d = {d}"));
    inequality.record(max_neg.as_ref().is_none_or(|m| *m <= d), || "negative denominator violates the bound".into());

    // Σ_{α: α(x_j) = v} U_{(C_i, α)} = U_{(x_j, v)} as vectors
    let mut vector_identity = Check::new("marginal-identity", "exact");
    for i in 0..inst.m() {
        let pats: Vec<usize> = (0..inst.code().size() as usize).map(|p| bi.left_id(i, p)).collect();
        for (pos, &var) in inst.constraint(i).vars.iter().enumerate() {
            for value in 0..inst.q() {
                let group: Vec<VertexSet> =
                    pats.iter().filter(|&&l| bi.pattern(l)[pos] == value).map(|&l| VertexSet::new(vec![l])).collect();
                let r = VertexSet::new(vec![nl + bi.right_id(var, value, 0)]);
                let mut acc = Ok(zero());
                for a in &group {
                    for b in &group {
                        acc = acc.and_then(|t| Ok(t + oracle.inner(a, b)?));
                    }
                    acc = acc.and_then(|t| Ok(t - int(2) * oracle.inner(a, &r)?));
                }
                acc = acc.and_then(|t| Ok(t + oracle.norm2(&r)?));
                match acc {
                    Ok(t) => vector_identity.record(t.is_zero(), || format!("constraint {i}, x_{var} = {value}: residual {t}")),
                    Err(e) => vector_identity.error(e),
                }
            }
        }
    }

    let mut values = BTreeMap::new();
    values.insert("d_star".into(), format_rational(&d_star));
    values.insert("d".into(), format_rational(&d));
    values.insert("beta_k".into(), (bi.beta() * inst.arity()).to_string());
    values.insert("min_occurrences".into(), occurrences.iter().min().copied().unwrap_or(0).to_string());
    values.insert("sets".into(), sets.len().to_string());
    Verdict::new(vec![left, right, nonneg_zero, inequality, vector_identity], values)
}
