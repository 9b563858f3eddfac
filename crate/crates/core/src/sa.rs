//! Sherali-Adams value tables for Densest k-Subgraph and exact verification of
//! the size, density and inclusion-exclusion constraint families.
//!
//! The Steiner-tree solution sets `x_S = n^{-(st(S)+1)/4} · L^{-|S|}` with
//! `x_∅ = 1` and `x_S = 0` when `S` is disconnected. All sums are evaluated in
//! `Q(n^{1/4})`, so verdicts are exact.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::One;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{parse_surd, QuarticField, Rational, Surd};
use crate::graph::{audit_properties, Graph, PropertyReport};
use crate::rng::{self, purpose};
use crate::steiner::{self, SteinerError};

#[derive(Debug, Error)]
pub enum SaError {
    #[error("no value stored for subset {0:?}")]
    MissingValue(Vec<u32>),
    #[error("S and T overlap in {0:?}")]
    Overlap(Vec<u32>),
    #[error("level must be at least 1")]
    BadLevel,
    #[error("{0}")]
    Parameter(String),
    #[error(transparent)]
    Steiner(#[from] SteinerError),
    #[error("table file: {0}")]
    Table(String),
}

/// Read access to a Sherali-Adams assignment. Sets are sorted and duplicate-free.
pub trait SaValues: Send + Sync {
    fn n(&self) -> usize;
    fn level(&self) -> usize;
    fn field(&self) -> QuarticField;
    fn value(&self, set: &[u32]) -> Result<Surd, SaError>;

    /// `Σ_{v ∈ over} x_{set ∪ {v}}`.
    fn sum_extensions(&self, set: &[u32], over: &[u32]) -> Result<Surd, SaError> {
        let mut acc = self.field().zero();
        for &v in over {
            acc = &acc + &self.value(&with(set, v))?;
        }
        Ok(acc)
    }

    /// `Σ_{v ∈ V} x_{set ∪ {v}}`.
    fn sum_all_extensions(&self, set: &[u32]) -> Result<Surd, SaError> {
        let all: Vec<u32> = (0..self.n() as u32).collect();
        self.sum_extensions(set, &all)
    }
}

/// `set ∪ {v}`, kept sorted.
pub fn with(set: &[u32], v: u32) -> Vec<u32> {
    match set.binary_search(&v) {
        Ok(_) => set.to_vec(),
        Err(pos) => {
            let mut out = Vec::with_capacity(set.len() + 1);
            out.extend_from_slice(&set[..pos]);
            out.push(v);
            out.extend_from_slice(&set[pos..]);
            out
        }
    }
}

fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Largest level at which feasibility is guaranteed, `ln n / (10 ln ln n)`.
pub fn feasible_level_bound(n: usize) -> f64 {
    let ln = (n as f64).ln();
    ln / (10.0 * ln.ln())
}

/// `st(S ∪ {v})` for every `v`, or `None` when `S` is disconnected.
type Extensions = Arc<Option<Vec<Option<u16>>>>;

#[derive(Default)]
struct Cache {
    ext: HashMap<Vec<u32>, Extensions>,
    st: HashMap<Vec<u32>, Option<usize>>,
}

const EXT_CACHE_LIMIT: usize = 2048;

/// The Steiner-tree assignment on a fixed graph, evaluated lazily.
pub struct SteinerSolution<'g> {
    graph: &'g Graph,
    level: usize,
    field: QuarticField,
    cache: Mutex<Cache>,
    pub warnings: Vec<String>,
    pub audit: Option<PropertyReport>,
}

/// Build the assignment after auditing the graph; audit failures and levels
/// beyond the guaranteed range are recorded as warnings, not errors.
pub fn build_sa_solution(g: &Graph, level: usize) -> Result<SteinerSolution<'_>, SaError> {
    let audit = audit_properties(g);
    build_sa_solution_with(g, level, Some(audit))
}

pub fn build_sa_solution_with(
    g: &Graph,
    level: usize,
    audit: Option<PropertyReport>,
) -> Result<SteinerSolution<'_>, SaError> {
    if level == 0 {
        return Err(SaError::BadLevel);
    }
    let mut warnings = Vec::new();
    if let Some(a) = &audit {
        if !a.all_pass() {
            warnings.push("graph fails the random-graph property audit; feasibility is not promised".into());
        }
    }
    let bound = feasible_level_bound(g.n());
    if level as f64 > bound {
        warnings.push(format!("level {level} exceeds ln n/(10 ln ln n) = {bound:.3}"));
    }
    Ok(SteinerSolution {
        graph: g,
        level,
        field: QuarticField::new(g.n() as u64),
        cache: Mutex::new(Cache::default()),
        warnings,
        audit,
    })
}

impl<'g> SteinerSolution<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// `st(S ∪ {v})` for all `v`, or `None` when `S` is disconnected.
    fn extensions(&self, set: &[u32]) -> Result<Extensions, SaError> {
        if let Some(hit) = self.cache.lock().unwrap().ext.get(set) {
            return Ok(hit.clone());
        }
        let computed = match steiner::extension_sizes(self.graph, set) {
            Ok(v) => Some(v),
            Err(SteinerError::Disconnected { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let arc = Arc::new(computed);
        let mut cache = self.cache.lock().unwrap();
        if cache.ext.len() >= EXT_CACHE_LIMIT {
            cache.ext.clear();
        }
        cache.ext.insert(set.to_vec(), arc.clone());
        Ok(arc)
    }

    /// Steiner size of `set`, `None` when disconnected.
    pub fn steiner(&self, set: &[u32]) -> Result<Option<usize>, SaError> {
        match set.len() {
            0 => return Ok(Some(0)),
            1 => return Ok(Some(1)),
            _ => {}
        }
        if let Some(&hit) = self.cache.lock().unwrap().st.get(set) {
            return Ok(hit);
        }
        let (last, rest) = set.split_last().unwrap();
        let ext = self.extensions(rest)?;
        let st = ext.as_ref().as_ref().and_then(|e| e[*last as usize]).map(|s| s as usize);
        self.cache.lock().unwrap().st.insert(set.to_vec(), st);
        Ok(st)
    }

    fn l_pow_inv(&self, size: usize) -> Rational {
        Rational::new(BigInt::one(), num_traits::pow(BigInt::from(self.level), size))
    }

    /// `n^{-(st+1)/4} · L^{-size}`.
    pub fn formula(&self, st: usize, size: usize) -> Surd {
        self.field.theta_pow(-(st as i64 + 1)).mul_rational(&self.l_pow_inv(size))
    }

    /// Extension sums split by Steiner growth, used by the size profile.
    pub fn extension_buckets(&self, set: &[u32]) -> Result<Option<ExtensionBuckets>, SaError> {
        let Some(st) = self.steiner(set)? else { return Ok(None) };
        let ext = self.extensions(set)?;
        let ext = ext.as_ref().as_ref().expect("connected set has extensions");
        let mut b = ExtensionBuckets { st, members: set.len(), ..Default::default() };
        for (v, s) in ext.iter().enumerate() {
            if set.binary_search(&(v as u32)).is_ok() {
                continue;
            }
            match s {
                None => b.unreachable += 1,
                Some(s) => {
                    let growth = *s as usize - st;
                    *b.growth.entry(growth).or_insert(0) += 1;
                }
            }
        }
        Ok(Some(b))
    }
}

/// Counts of `v ∉ S` by `st(S ∪ {v}) - st(S)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionBuckets {
    pub st: usize,
    pub members: usize,
    pub growth: BTreeMap<usize, usize>,
    pub unreachable: usize,
}

impl SaValues for SteinerSolution<'_> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn level(&self) -> usize {
        self.level
    }

    fn field(&self) -> QuarticField {
        self.field
    }

    fn value(&self, set: &[u32]) -> Result<Surd, SaError> {
        if set.len() > self.level {
            return Err(SaError::MissingValue(set.to_vec()));
        }
        if set.is_empty() {
            return Ok(self.field.one());
        }
        Ok(match self.steiner(set)? {
            Some(st) => self.formula(st, set.len()),
            None => self.field.zero(),
        })
    }

    fn sum_extensions(&self, set: &[u32], over: &[u32]) -> Result<Surd, SaError> {
        let base = self.value(set)?;
        let outside = over.iter().filter(|v| set.binary_search(v).is_err()).count();
        if outside > 0 && set.len() + 1 > self.level {
            let v = over.iter().find(|v| set.binary_search(v).is_err()).unwrap();
            return Err(SaError::MissingValue(with(set, *v)));
        }
        let members = over.len() - outside;
        let mut acc = base.mul_int(members as u64);
        if set.is_empty() {
            return Ok(&acc + &self.formula(1, 1).mul_int(outside as u64));
        }
        let ext = self.extensions(set)?;
        let Some(ext) = ext.as_ref() else { return Ok(acc) };
        let mut by_st: BTreeMap<u16, u64> = BTreeMap::new();
        for &v in over {
            if set.binary_search(&v).is_ok() {
                continue;
            }
            if let Some(s) = ext[v as usize] {
                *by_st.entry(s).or_insert(0) += 1;
            }
        }
        for (s, count) in by_st {
            acc = &acc + &self.formula(s as usize, set.len() + 1).mul_int(count);
        }
        Ok(acc)
    }
}

/// Explicit table of values; any subset not stored is an error.
pub struct TableAssignment {
    n: usize,
    level: usize,
    field: QuarticField,
    values: HashMap<Vec<u32>, Surd>,
}

impl TableAssignment {
    pub fn new(n: usize, level: usize, field: QuarticField, values: HashMap<Vec<u32>, Surd>) -> Self {
        TableAssignment { n, level, field, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_file(file: &TableFile) -> Result<Self, SaError> {
        let field = QuarticField::new(file.radicand);
        let raw = file
            .values
            .as_ref()
            .ok_or_else(|| SaError::Table("table has no values; verify it against its graph instead".into()))?;
        let mut values = HashMap::with_capacity(raw.len());
        for (key, val) in raw {
            let set = parse_key(key)?;
            let v = parse_surd(field, val).map_err(|e| SaError::Table(e.to_string()))?;
            values.insert(set, v);
        }
        Ok(TableAssignment { n: file.n, level: file.level, field, values })
    }
}

impl SaValues for TableAssignment {
    fn n(&self) -> usize {
        self.n
    }

    fn level(&self) -> usize {
        self.level
    }

    fn field(&self) -> QuarticField {
        self.field
    }

    fn value(&self, set: &[u32]) -> Result<Surd, SaError> {
        self.values.get(set).cloned().ok_or_else(|| SaError::MissingValue(set.to_vec()))
    }
}

/// The 0/1 assignment of an actual vertex subset: `x_S = 1` iff `S ⊆ H`.
pub struct IntegralAssignment {
    n: usize,
    level: usize,
    member: Vec<bool>,
}

impl IntegralAssignment {
    pub fn new(n: usize, level: usize, subset: &[u32]) -> Self {
        let mut member = vec![false; n];
        for &v in subset {
            member[v as usize] = true;
        }
        IntegralAssignment { n, level, member }
    }
}

impl SaValues for IntegralAssignment {
    fn n(&self) -> usize {
        self.n
    }

    fn level(&self) -> usize {
        self.level
    }

    fn field(&self) -> QuarticField {
        QuarticField::new(1)
    }

    fn value(&self, set: &[u32]) -> Result<Surd, SaError> {
        if set.len() > self.level {
            return Err(SaError::MissingValue(set.to_vec()));
        }
        let inside = set.iter().all(|&v| self.member[v as usize]);
        Ok(self.field().integer(inside as i64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Size,
    Density,
    InclusionExclusion,
    Dominate,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Size, Family::Density, Family::InclusionExclusion, Family::Dominate];

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "size" => Some(Family::Size),
            "density" => Some(Family::Density),
            "inclusion-exclusion" | "ie" => Some(Family::InclusionExclusion),
            "dominate" => Some(Family::Dominate),
            _ => None,
        }
    }

    /// How many vertices beyond `|S| + |T|` the family's sets use.
    fn headroom(self) -> usize {
        match self {
            Family::Size | Family::Density => 1,
            Family::InclusionExclusion | Family::Dominate => 0,
        }
    }
}

/// Which `(S, T)` pairs are checked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sampler {
    /// Every disjoint pair with `|S| + |T|` within range.
    Exhaustive,
    /// Seeded samples; half grow connected sets through neighbours.
    Random { samples: usize, seed: u64 },
    Explicit(Vec<(Vec<u32>, Vec<u32>)>),
}

/// Density-constraint pivots `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pivots {
    /// `i ∈ S`.
    Members,
    /// every `i ∈ V`.
    All,
}

#[derive(Clone, Debug)]
pub struct FamilyParams {
    pub r: usize,
    pub d: Surd,
    pub k: Surd,
    pub pivots: Pivots,
}

impl FamilyParams {
    /// `d = n^{1/4}/L`, `k = √n`, density pivots in `S`.
    pub fn standard(n: usize, level: usize, r: usize) -> Self {
        let f = QuarticField::new(n as u64);
        FamilyParams {
            r,
            d: f.theta_pow(1).mul_rational(&Rational::new(BigInt::one(), BigInt::from(level))),
            k: f.theta_pow(2),
            pivots: Pivots::Members,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub s: Vec<u32>,
    pub t: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<u32>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaVerdict {
    pub family: Family,
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Smallest slack; nonnegative iff every check held.
    pub worst_slack: Option<String>,
    pub worst_slack_approx: Option<f64>,
    pub method: String,
}

impl SaVerdict {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `Σ_{J ⊆ T} (-1)^{|J|} f(S ∪ J)`.
pub fn alternating_sum<F>(field: QuarticField, s: &[u32], t: &[u32], mut f: F) -> Result<Surd, SaError>
where
    F: FnMut(&[u32]) -> Result<Surd, SaError>,
{
    let mut acc = field.zero();
    for mask in 0u32..(1 << t.len()) {
        let j: Vec<u32> = (0..t.len()).filter(|b| mask >> b & 1 == 1).map(|b| t[b]).collect();
        let term = f(&union(s, &j))?;
        acc = if mask.count_ones() % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    Ok(acc)
}

fn disjoint(s: &[u32], t: &[u32]) -> Result<(), SaError> {
    let common: Vec<u32> = s.iter().filter(|v| t.contains(v)).copied().collect();
    if common.is_empty() {
        Ok(())
    } else {
        Err(SaError::Overlap(common))
    }
}

/// Two-sided bounds `x_S/2 ≤ Σ_J (-1)^{|J|} x_{S∪J} ≤ x_S`.
pub fn check_dominate(a: &dyn SaValues, s: &[u32], t: &[u32]) -> Result<(bool, bool, Surd), SaError> {
    disjoint(s, t)?;
    let value = alternating_sum(a.field(), s, t, |u| a.value(u))?;
    let xs = a.value(s)?;
    let half = xs.mul_rational(&Rational::new(BigInt::one(), BigInt::from(2)));
    Ok((value <= xs, value >= half, value))
}

/// One constraint evaluation: `slack ≥ 0` iff it holds.
struct Check {
    slack: Surd,
    violation: Option<Violation>,
}

fn check_pair(
    a: &dyn SaValues,
    g: &Graph,
    family: Family,
    p: &FamilyParams,
    s: &[u32],
    t: &[u32],
) -> Result<Vec<Check>, SaError> {
    disjoint(s, t)?;
    let f = a.field();
    let one_check = |lhs: Surd, rhs: Surd, slack: Surd, pivot: Option<u32>| Check {
        violation: (slack.signum() < 0).then(|| Violation {
            s: s.to_vec(),
            t: t.to_vec(),
            pivot,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        }),
        slack,
    };
    Ok(match family {
        Family::InclusionExclusion => {
            let v = alternating_sum(f, s, t, |u| a.value(u))?;
            let upper = &f.one() - &v;
            let slack = if v <= upper { v.clone() } else { upper };
            vec![one_check(v, f.one(), slack, None)]
        }
        Family::Dominate => {
            let (_, _, v) = check_dominate(a, s, t)?;
            let xs = a.value(s)?;
            let half = xs.mul_rational(&Rational::new(BigInt::one(), BigInt::from(2)));
            let up = &xs - &v;
            let lo = &v - &half;
            let slack = if up <= lo { up } else { lo };
            vec![one_check(v, xs, slack, None)]
        }
        Family::Size => {
            let lhs = alternating_sum(f, s, t, |u| a.sum_all_extensions(u))?;
            let rhs = &p.k * &alternating_sum(f, s, t, |u| a.value(u))?;
            let slack = &rhs - &lhs;
            vec![one_check(lhs, rhs, slack, None)]
        }
        Family::Density => {
            let pivots: Vec<u32> = match p.pivots {
                Pivots::Members => s.to_vec(),
                Pivots::All => (0..g.n() as u32).collect(),
            };
            let mut out = Vec::with_capacity(pivots.len());
            for i in pivots {
                let nbrs = g.neighbors(i);
                let lhs = alternating_sum(f, s, t, |u| a.sum_extensions(&with(u, i), nbrs))?;
                let rhs = &p.d * &alternating_sum(f, s, t, |u| a.value(&with(u, i)))?;
                let slack = &lhs - &rhs;
                out.push(one_check(lhs, rhs, slack, Some(i)));
            }
            out
        }
    })
}

/// Largest `|S| + |T|` a family can use at level `L` and round `r`.
pub fn effective_round(family: Family, level: usize, r: usize) -> usize {
    r.min(level.saturating_sub(family.headroom()))
}

/// Pairs `(S, T)` from `sampler` with `|S| + |T| ≤ max_total`.
pub fn sample_pairs(g: &Graph, sampler: &Sampler, max_total: usize, need_nonempty_s: bool) -> Vec<(Vec<u32>, Vec<u32>)> {
    match sampler {
        Sampler::Explicit(list) => list.clone(),
        Sampler::Exhaustive => {
            let mut out = Vec::new();
            let n = g.n() as u32;
            let mut stack: Vec<u32> = Vec::new();
            fn rec(n: u32, start: u32, max: usize, cur: &mut Vec<u32>, out: &mut Vec<(Vec<u32>, Vec<u32>)>, nonempty: bool) {
                for mask in 0u32..(1 << cur.len()) {
                    let s: Vec<u32> = (0..cur.len()).filter(|b| mask >> b & 1 == 1).map(|b| cur[b]).collect();
                    let t: Vec<u32> = (0..cur.len()).filter(|b| mask >> b & 1 == 0).map(|b| cur[b]).collect();
                    if !(nonempty && s.is_empty()) {
                        out.push((s, t));
                    }
                }
                if cur.len() == max {
                    return;
                }
                for v in start..n {
                    cur.push(v);
                    rec(n, v + 1, max, cur, out, nonempty);
                    cur.pop();
                }
            }
            rec(n, 0, max_total, &mut stack, &mut out, need_nonempty_s);
            out
        }
        Sampler::Random { samples, seed } => (0..*samples)
            .map(|idx| random_pair(g, max_total, need_nonempty_s, *seed, idx as u64))
            .collect(),
    }
}

fn random_pair(g: &Graph, max_total: usize, nonempty: bool, seed: u64, idx: u64) -> (Vec<u32>, Vec<u32>) {
    let mut rng = rng::stream(seed, purpose::SA_SAMPLER + idx);
    let n = g.n();
    let lo = nonempty as usize;
    let total = rng.gen_range(lo..=max_total.max(lo)).min(n);
    let connected = rng.gen_bool(0.5);
    let mut chosen: Vec<u32> = Vec::with_capacity(total);
    while chosen.len() < total {
        let candidate = if connected && !chosen.is_empty() {
            let anchor = chosen[rng.gen_range(0..chosen.len())];
            let nb = g.neighbors(anchor);
            if nb.is_empty() {
                rng.gen_range(0..n as u32)
            } else {
                nb[rng.gen_range(0..nb.len())]
            }
        } else {
            rng.gen_range(0..n as u32)
        };
        if !chosen.contains(&candidate) {
            chosen.push(candidate);
        } else if connected {
            // fall back to uniform draws to guarantee progress
            let v = rng.gen_range(0..n as u32);
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
    }
    let s_len = rng.gen_range(lo.min(total)..=total);
    let mut s: Vec<u32> = chosen[..s_len].to_vec();
    let mut t: Vec<u32> = chosen[s_len..].to_vec();
    s.sort_unstable();
    t.sort_unstable();
    (s, t)
}

/// Evaluate one constraint family exactly on the pairs chosen by `sampler`.
pub fn verify_family(
    a: &dyn SaValues,
    g: &Graph,
    family: Family,
    params: &FamilyParams,
    sampler: &Sampler,
) -> Result<SaVerdict, SaError> {
    if params.r > a.level() {
        return Err(SaError::Parameter(format!("round {} exceeds level {}", params.r, a.level())));
    }
    if family == Family::Density && params.d.signum() <= 0 {
        return Err(SaError::Parameter("density parameter d must be positive".into()));
    }
    let mut max_total = effective_round(family, a.level(), params.r);
    if family == Family::Density && params.pivots == Pivots::All {
        max_total = max_total.min(a.level().saturating_sub(2));
    }
    let pairs = sample_pairs(g, sampler, max_total, family == Family::Density && params.pivots == Pivots::Members);
    let results: Vec<Result<Vec<Check>, SaError>> =
        pairs.par_iter().map(|(s, t)| check_pair(a, g, family, params, s, t)).collect();
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut worst: Option<Surd> = None;
    for r in results {
        for c in r? {
            checked += 1;
            if let Some(v) = c.violation {
                violations.push(v);
            }
            if worst.as_ref().is_none_or(|w| c.slack < *w) {
                worst = Some(c.slack);
            }
        }
    }
    let method = match sampler {
        Sampler::Exhaustive => "exact".to_string(),
        Sampler::Random { samples, .. } => format!("exact, sampled({samples})"),
        Sampler::Explicit(list) => format!("exact, explicit({})", list.len()),
    };
    Ok(SaVerdict {
        family,
        checked,
        violations,
        worst_slack_approx: worst.as_ref().map(Surd::to_f64),
        worst_slack: worst.map(|w| w.to_string()),
        method,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub set: Vec<u32>,
    pub st: usize,
    /// `Σ_{i∈V} x_{S∪i} / x_S`
    pub ratio: f64,
    pub members: usize,
    pub same: usize,
    pub plus_one: usize,
    pub plus_two_or_more: usize,
    pub unreachable: usize,
    /// Ratio contributions of each bucket (members, same, plus-one, plus-two-or-more).
    pub contributions: [f64; 4],
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeProfile {
    pub entries: Vec<ProfileEntry>,
    pub bound: f64,
    pub max_ratio: f64,
    pub pass: bool,
    /// For failing sets, the bucket carrying the largest share of the ratio.
    pub violating_buckets: BTreeMap<String, usize>,
    pub method: String,
}

pub const BUCKET_NAMES: [&str; 4] = ["members", "same", "plus-one", "plus-two-or-more"];

/// Ratio `Σ_i x_{S∪i} / x_S` for each set, split into Steiner-growth buckets
/// and checked exactly against `√n`.
pub fn size_constraint_profile(a: &SteinerSolution<'_>, sets: &[Vec<u32>]) -> Result<SizeProfile, SaError> {
    let n = a.n();
    let f = a.field();
    let sqrt_n = f.theta_pow(2);
    let rows: Vec<Result<Option<ProfileEntry>, SaError>> = sets
        .par_iter()
        .map(|set| {
            let Some(b) = a.extension_buckets(set)? else { return Ok(None) };
            let xs = a.value(set)?;
            let total = a.sum_all_extensions(set)?;
            // ratio ≤ √n  ⇔  total ≤ √n · x_S
            let within = total <= &sqrt_n * &xs;
            let theta = f.theta_f64();
            let l = a.level() as f64;
            let mut contrib = [b.members as f64, 0.0, 0.0, 0.0];
            let (mut same, mut plus_one, mut more) = (0, 0, 0);
            for (&growth, &count) in &b.growth {
                let share = count as f64 * theta.powi(-(growth as i32)) / l;
                match growth {
                    0 => {
                        same += count;
                        contrib[1] += share;
                    }
                    1 => {
                        plus_one += count;
                        contrib[2] += share;
                    }
                    _ => {
                        more += count;
                        contrib[3] += share;
                    }
                }
            }
            Ok(Some(ProfileEntry {
                set: set.clone(),
                st: b.st,
                ratio: contrib.iter().sum(),
                members: b.members,
                same,
                plus_one,
                plus_two_or_more: more,
                unreachable: b.unreachable,
                contributions: contrib,
                within_bound: within,
            }))
        })
        .collect();
    let mut entries = Vec::new();
    for r in rows {
        if let Some(e) = r? {
            entries.push(e);
        }
    }
    let mut violating_buckets = BTreeMap::new();
    for e in entries.iter().filter(|e| !e.within_bound) {
        let (idx, _) = e
            .contributions
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        *violating_buckets.entry(BUCKET_NAMES[idx].to_string()).or_insert(0) += 1;
    }
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(SizeProfile {
        pass: entries.iter().all(|e| e.within_bound),
        bound: (n as f64).sqrt(),
        max_ratio,
        violating_buckets,
        method: format!("exact, sampled({})", sets.len()),
        entries,
    })
}

/// `count` random sets of size `1..=max_size`, half grown through neighbours.
pub fn sample_sets(g: &Graph, count: usize, max_size: usize, seed: u64) -> Vec<Vec<u32>> {
    (0..count as u64)
        .map(|idx| {
            let (mut s, t) = random_pair(g, max_size, true, seed, idx);
            s.extend(t);
            s.sort_unstable();
            s
        })
        .collect()
}

/// On-disk table: full values for small graphs, or a reference to the graph
/// file from which values are recomputed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub n: usize,
    pub level: usize,
    /// Values are written over `Q(radicand^{1/4})`.
    pub radicand: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<String, String>>,
}

pub const FULL_TABLE_MAX_N: usize = 64;

pub fn set_key(set: &[u32]) -> String {
    set.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_key(key: &str) -> Result<Vec<u32>, SaError> {
    if key.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut set = key
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|_| SaError::Table(format!("bad subset key `{key}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let len = set.len();
    set.sort_unstable();
    set.dedup();
    if set.len() != len {
        return Err(SaError::Table(format!("repeated vertex in key `{key}`")));
    }
    Ok(set)
}

/// Every subset of size `≤ L`; only for `n ≤ 64`.
pub fn materialize_table(a: &SteinerSolution<'_>, graph_path: Option<String>) -> Result<TableFile, SaError> {
    let n = a.n();
    let mut values = BTreeMap::new();
    if n <= FULL_TABLE_MAX_N {
        let mut cur = Vec::new();
        fn rec(a: &SteinerSolution<'_>, start: u32, cur: &mut Vec<u32>, out: &mut BTreeMap<String, String>) -> Result<(), SaError> {
            out.insert(set_key(cur), a.value(cur)?.to_string());
            if cur.len() == a.level() {
                return Ok(());
            }
            for v in start..a.n() as u32 {
                cur.push(v);
                rec(a, v + 1, cur, out)?;
                cur.pop();
            }
            Ok(())
        }
        rec(a, 0, &mut cur, &mut values)?;
    }
    Ok(TableFile {
        n,
        level: a.level(),
        radicand: n as u64,
        graph: graph_path,
        values: (n <= FULL_TABLE_MAX_N).then_some(values),
    })
}

/// Whether every stored value is in `[0, 1]`.
pub fn values_in_unit_interval(a: &dyn SaValues, sets: &[Vec<u32>]) -> Result<bool, SaError> {
    let f = a.field();
    for s in sets {
        let v = a.value(s)?;
        if v.signum() < 0 || v > f.one() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational;
    use crate::graph::{gen_gnp, GnpParams};
    use proptest::prelude::*;

    #[test]
    fn formula_values_at_ten_thousand() {
        // Four-vertex graph stand-in: the formula does not depend on edges.
        let f = QuarticField::new(10_000);
        let g = Graph::complete(3);
        let sol = build_sa_solution(&g, 10).unwrap();
        let _ = sol;
        let xi = f.theta_pow(-2).mul_rational(&rational(1, 10));
        assert_eq!(xi, f.rational(rational(1, 1000)));
        let xij = f.theta_pow(-3).mul_rational(&rational(1, 100));
        assert_eq!(xij, f.rational(rational(1, 100_000)));
    }

    #[test]
    fn empty_set_is_one_and_pairs_follow_adjacency() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let sol = build_sa_solution(&g, 3).unwrap();
        let f = sol.field();
        assert_eq!(sol.value(&[]).unwrap(), f.one());
        let l2 = rational(1, 9);
        assert_eq!(sol.value(&[0, 1]).unwrap(), f.theta_pow(-3).mul_rational(&l2));
        assert_eq!(sol.value(&[0, 2]).unwrap(), f.theta_pow(-4).mul_rational(&l2));
        assert_eq!(sol.value(&[0, 4]).unwrap(), f.zero());
        assert!(matches!(sol.value(&[0, 1, 2, 3]), Err(SaError::MissingValue(_))));
    }

    #[test]
    fn integral_assignment_passes_every_family() {
        let n = 7;
        let g = Graph::complete(n);
        let all: Vec<u32> = (0..n as u32).collect();
        let a = IntegralAssignment::new(n, 4, &all);
        let f = a.field();
        let p = FamilyParams { r: 4, d: f.integer(n as i64 - 1), k: f.integer(n as i64), pivots: Pivots::All };
        // The dominate bounds are specific to dampened solutions.
        for fam in [Family::Size, Family::Density, Family::InclusionExclusion] {
            let v = verify_family(&a, &g, fam, &p, &Sampler::Exhaustive).unwrap();
            assert!(v.pass(), "{fam:?}: {:?}", v.violations.first());
            assert!(v.checked > 0);
        }
        let v = verify_family(&a, &g, Family::Dominate, &p, &Sampler::Exhaustive).unwrap();
        assert!(!v.pass());
    }

    #[test]
    fn integral_subgraph_passes_with_its_min_degree() {
        let g = gen_gnp(GnpParams { n: 9, p: 0.5, seed: 12 }).unwrap();
        let h: Vec<u32> = vec![0, 2, 3, 5, 8];
        let min_deg = h.iter().map(|&u| h.iter().filter(|&&v| g.has_edge(u, v)).count()).min().unwrap();
        let a = IntegralAssignment::new(9, 3, &h);
        let f = a.field();
        let p = FamilyParams { r: 3, d: f.integer(min_deg.max(1) as i64), k: f.integer(h.len() as i64), pivots: Pivots::Members };
        for fam in [Family::Size, Family::Density, Family::InclusionExclusion] {
            let p = if fam == Family::Density && min_deg == 0 { continue } else { p.clone() };
            let v = verify_family(&a, &g, fam, &p, &Sampler::Exhaustive).unwrap();
            assert!(v.pass(), "{fam:?}: {:?}", v.violations.first());
        }
        // A wrong budget k is caught.
        let bad = FamilyParams { k: f.integer(h.len() as i64 - 1), ..p };
        assert!(!verify_family(&a, &g, Family::Size, &bad, &Sampler::Exhaustive).unwrap().pass());
    }

    #[test]
    fn dominate_trivial_cases() {
        let g = gen_gnp(GnpParams { n: 40, p: 0.3, seed: 5 }).unwrap();
        let sol = build_sa_solution(&g, 4).unwrap();
        let (up, lo, v) = check_dominate(&sol, &[1, 2], &[]).unwrap();
        assert!(up && lo);
        assert_eq!(v, sol.value(&[1, 2]).unwrap());
        let (up, lo, v) = check_dominate(&sol, &[1], &[7]).unwrap();
        assert!(up && lo);
        let floor = sol.value(&[1]).unwrap().mul_rational(&rational(3, 4));
        assert!(v >= floor);
        assert!(matches!(check_dominate(&sol, &[1, 2], &[2]), Err(SaError::Overlap(_))));
    }

    #[test]
    fn clique_profile_matches_closed_form() {
        let n = 16;
        let g = Graph::complete(n);
        let sol = build_sa_solution(&g, 2).unwrap();
        let prof = size_constraint_profile(&sol, &[vec![3]]).unwrap();
        let e = &prof.entries[0];
        assert_eq!((e.same, e.plus_one, e.plus_two_or_more), (0, n - 1, 0));
        let expected = 1.0 + (n as f64 - 1.0) * (n as f64).powf(-0.25) / 2.0;
        assert!((e.ratio - expected).abs() < 1e-12);
        // empty set: n · n^{-1/2} / L
        let total = sol.sum_all_extensions(&[]).unwrap();
        assert_eq!(total, sol.field().theta_pow(2).mul_rational(&rational(1, 2)));
    }

    #[test]
    fn sum_extensions_matches_termwise_sum() {
        let g = gen_gnp(GnpParams { n: 30, p: 0.25, seed: 8 }).unwrap();
        let sol = build_sa_solution(&g, 3).unwrap();
        for set in [vec![], vec![4], vec![4, 9]] {
            let fast = sol.sum_all_extensions(&set).unwrap();
            let mut slow = sol.field().zero();
            for v in 0..30 {
                slow = &slow + &sol.value(&with(&set, v)).unwrap();
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn table_round_trip() {
        let g = gen_gnp(GnpParams { n: 10, p: 0.4, seed: 2 }).unwrap();
        let sol = build_sa_solution(&g, 2).unwrap();
        let file = materialize_table(&sol, None).unwrap();
        assert_eq!(file.values.as_ref().unwrap().len(), 1 + 10 + 45);
        let json = serde_json::to_string(&file).unwrap();
        let back: TableFile = serde_json::from_str(&json).unwrap();
        let table = TableAssignment::from_file(&back).unwrap();
        assert_eq!(table.value(&[2, 7]).unwrap(), sol.value(&[2, 7]).unwrap());
        assert!(table.value(&[1, 2, 3]).is_err());
        assert!(serde_json::from_str::<TableFile>(r#"{"n":1,"level":1,"radicand":1,"extra":0}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dampening_monotonicity_growth(seed: u64, raw in proptest::collection::vec(0u32..24, 0..3), i in 0u32..24) {
            let g = gen_gnp(GnpParams { n: 24, p: 0.35, seed }).unwrap();
            let sol = build_sa_solution(&g, 4).unwrap();
            let mut s = raw.clone();
            s.sort_unstable();
            s.dedup();
            let xs = sol.value(&s).unwrap();
            let l_inv = rational(1, 4);
            prop_assert!(xs.signum() >= 0 && xs <= sol.field().one());
            if !s.contains(&i) {
                let xsi = sol.value(&with(&s, i)).unwrap();
                prop_assert!(xsi <= xs.mul_rational(&l_inv));
                prop_assert!(xsi <= xs);
            }
            for &a in &s {
                for &j in g.neighbors(a) {
                    let xsj = sol.value(&with(&s, j)).unwrap();
                    let floor = (&xs * &sol.field().theta_pow(-1)).mul_rational(&l_inv);
                    if !s.contains(&j) {
                        prop_assert!(xsj >= floor);
                    }
                }
            }
        }

        #[test]
        fn verdict_violations_iff_negative_slack(seed: u64) {
            let g = gen_gnp(GnpParams { n: 20, p: 0.3, seed }).unwrap();
            let sol = build_sa_solution(&g, 3).unwrap();
            let p = FamilyParams::standard(20, 3, 3);
            for fam in Family::ALL {
                let v = verify_family(&sol, &g, fam, &p, &Sampler::Random { samples: 30, seed }).unwrap();
                let neg = v.worst_slack_approx.is_some_and(|w| w < 0.0);
                prop_assert_eq!(v.pass(), !neg || v.violations.is_empty());
                if !v.pass() {
                    prop_assert!(neg);
                }
            }
        }
    }
}
