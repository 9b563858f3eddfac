//! Inner-product oracles for Lasserre vector families.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use num_bigint::BigInt;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::space::SolutionSpace;
use super::LasserreError;
use crate::csp::CspInstance;
use crate::exact::{format_rational, parse_rational, Rational};
use crate::reduction::BipartiteInstance;

/// A finite set of items, stored sorted, that indexes one vector.
pub trait Label: Clone + Eq + Hash + Ord + Debug + Send + Sync + Serialize + DeserializeOwned {
    type Item: Clone + Ord + Debug;
    fn items(&self) -> &[Self::Item];
    /// `None` when the items are not a valid label (for CSP labels, two
    /// values on one variable).
    fn from_items(items: Vec<Self::Item>) -> Option<Self>;

    fn size(&self) -> usize {
        self.items().len()
    }

    fn union(&self, other: &Self) -> Option<Self> {
        let mut items: Vec<Self::Item> = self.items().iter().chain(other.items()).cloned().collect();
        items.sort();
        items.dedup();
        Self::from_items(items)
    }
}

/// Partial assignment `(S, α)` as `(variable, value)` pairs sorted by variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CspLabel(Vec<(u32, u32)>);

impl CspLabel {
    pub fn empty() -> Self {
        CspLabel(Vec::new())
    }

    pub fn new(mut pairs: Vec<(u32, u32)>) -> Option<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(CspLabel(pairs))
    }

    pub fn single(var: u32, value: u32) -> Self {
        CspLabel(vec![(var, value)])
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.0
    }

    /// Do the two assignments agree on their common variables?
    pub fn consistent(&self, other: &CspLabel) -> bool {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a[i].1 != b[j].1 {
                        return false;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        true
    }
}

impl Label for CspLabel {
    type Item = (u32, u32);

    fn items(&self) -> &[(u32, u32)] {
        &self.0
    }

    fn from_items(items: Vec<(u32, u32)>) -> Option<Self> {
        CspLabel::new(items)
    }
}

/// Vertex subset of the replicated bipartite graph. Left vertex `l` has id
/// `l`; right vertex `r` has id `|L| + r`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        VertexSet(ids)
    }

    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }
}

impl Label for VertexSet {
    type Item = usize;

    fn items(&self) -> &[usize] {
        &self.0
    }

    fn from_items(items: Vec<usize>) -> Option<Self> {
        Some(VertexSet::new(items))
    }
}

pub trait MomentOracle: Sync {
    type Label: Label;
    fn inner(&self, a: &Self::Label, b: &Self::Label) -> Result<Rational, LasserreError>;
    fn serves(&self, a: &Self::Label) -> bool;
    fn round_bound(&self) -> usize;
    /// The served labels when the family is finite.
    fn labels(&self) -> Option<Vec<Self::Label>> {
        None
    }

    fn norm2(&self, a: &Self::Label) -> Result<Rational, LasserreError> {
        self.inner(a, a)
    }
}

/// `V_{(S,α)}` is the normalized indicator of `{a ∈ A : a|_S = α}`, so
/// `⟨V_1, V_2⟩` is the fraction of `A` agreeing with both labels.
#[derive(Clone, Debug)]
pub struct PlantedOracle {
    space: SolutionSpace,
    rounds: usize,
    powers: Vec<Rational>,
}

impl PlantedOracle {
    pub fn new(space: SolutionSpace, rounds: usize) -> Result<Self, LasserreError> {
        if rounds == 0 {
            return Err(LasserreError::BadRounds);
        }
        let q = BigInt::from(space.field().q());
        let mut powers = vec![Rational::from_integer(1.into())];
        for _ in 0..space.dim() {
            let last = powers.last().unwrap().clone();
            powers.push(last / Rational::from_integer(q.clone()));
        }
        Ok(PlantedOracle { space, rounds, powers })
    }

    pub fn space(&self) -> &SolutionSpace {
        &self.space
    }

    /// Fraction of `A` agreeing with `pairs`.
    pub fn fraction(&self, pairs: &[(u32, u32)]) -> Rational {
        match self.space.agreement_rank(pairs) {
            Some(r) => self.powers[r].clone(),
            None => Rational::from_integer(0.into()),
        }
    }
}

pub fn build_planted_csp_oracle(inst: &CspInstance, space: SolutionSpace, rounds: usize) -> Result<PlantedOracle, LasserreError> {
    if space.n() != inst.n() {
        return Err(LasserreError::Mismatch(format!("space over {} variables, instance has {}", space.n(), inst.n())));
    }
    PlantedOracle::new(space, rounds)
}

impl MomentOracle for PlantedOracle {
    type Label = CspLabel;

    fn inner(&self, a: &CspLabel, b: &CspLabel) -> Result<Rational, LasserreError> {
        for l in [a, b] {
            if l.size() > self.rounds {
                return Err(LasserreError::TooLarge { size: l.size(), bound: self.rounds });
            }
            if l.pairs().iter().any(|&(v, x)| v as usize >= self.space.n() || x >= self.space.field().q()) {
                return Err(LasserreError::NotServed(format!("{l:?}")));
            }
        }
        match a.union(b) {
            Some(u) => Ok(self.fraction(u.pairs())),
            None => Ok(Rational::from_integer(0.into())),
        }
    }

    fn serves(&self, a: &CspLabel) -> bool {
        a.size() <= self.rounds && a.pairs().iter().all(|&(v, x)| (v as usize) < self.space.n() && x < self.space.field().q())
    }

    fn round_bound(&self) -> usize {
        self.rounds
    }
}

/// `U_S := V_{(S', α_S)}` where `S'` collects the tuples of the left vertices
/// and the variables of the right vertices in `S`; `U_S = 0` when the collected
/// values disagree. Copies of a right label share one vector.
pub struct LiftedOracle<'a, O: MomentOracle<Label = CspLabel>> {
    csp: &'a O,
    bi: &'a BipartiteInstance,
    rounds: usize,
    vertex_labels: Vec<CspLabel>,
}

pub fn lift_to_dks<'a, O: MomentOracle<Label = CspLabel>>(
    csp: &'a O,
    bi: &'a BipartiteInstance,
    rounds: usize,
) -> Result<LiftedOracle<'a, O>, LasserreError> {
    let k = bi.instance().arity();
    if rounds * k > csp.round_bound() {
        return Err(LasserreError::RoundBudget { rounds, arity: k, bound: csp.round_bound() });
    }
    let inst = bi.instance();
    let mut vertex_labels = Vec::with_capacity(bi.vertex_count());
    for l in 0..bi.left_count() {
        let (i, _) = bi.left_label(l);
        let pairs = inst.constraint(i).vars.iter().copied().zip(bi.pattern(l).iter().copied()).collect();
        vertex_labels.push(CspLabel::new(pairs).expect("tuple variables are distinct"));
    }
    for r in 0..bi.right_count() {
        let (var, value, _) = bi.right_label(r);
        vertex_labels.push(CspLabel::single(var, value));
    }
    Ok(LiftedOracle { csp, bi, rounds, vertex_labels })
}

impl<O: MomentOracle<Label = CspLabel>> LiftedOracle<'_, O> {
    pub fn bipartite(&self) -> &BipartiteInstance {
        self.bi
    }

    /// `(S', α_S)`, or `None` when the vertices of `s` disagree.
    pub fn collect(&self, s: &VertexSet) -> Option<CspLabel> {
        let mut pairs: Vec<(u32, u32)> = s.ids().iter().flat_map(|&v| self.vertex_labels[v].pairs().iter().copied()).collect();
        pairs.sort_unstable();
        pairs.dedup();
        CspLabel::new(pairs)
    }
}

impl<O: MomentOracle<Label = CspLabel>> MomentOracle for LiftedOracle<'_, O> {
    type Label = VertexSet;

    fn inner(&self, a: &VertexSet, b: &VertexSet) -> Result<Rational, LasserreError> {
        for s in [a, b] {
            if !self.serves(s) {
                return Err(LasserreError::NotServed(format!("{s:?}")));
            }
        }
        match (self.collect(a), self.collect(b)) {
            (Some(x), Some(y)) => self.csp.inner(&x, &y),
            _ => Ok(Rational::from_integer(0.into())),
        }
    }

    fn serves(&self, a: &VertexSet) -> bool {
        a.size() <= self.rounds && a.ids().iter().all(|&v| v < self.vertex_labels.len())
    }

    fn round_bound(&self) -> usize {
        self.rounds
    }
}

/// A family given by an explicit Gram matrix over a finite label list.
#[derive(Clone, Debug)]
pub struct GramOracle<L: Label> {
    labels: Vec<L>,
    index: HashMap<L, usize>,
    gram: Vec<Rational>,
}

impl<L: Label> GramOracle<L> {
    pub fn new(labels: Vec<L>, gram: Vec<Rational>) -> Result<Self, LasserreError> {
        let d = labels.len();
        if gram.len() != d * d {
            return Err(LasserreError::Mismatch(format!("{} labels but {} Gram entries", d, gram.len())));
        }
        let mut index = HashMap::with_capacity(d);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(LasserreError::Mismatch(format!("duplicate label {l:?}")));
            }
        }
        Ok(GramOracle { labels, index, gram })
    }

    pub fn from_oracle<O: MomentOracle<Label = L>>(oracle: &O, labels: Vec<L>) -> Result<Self, LasserreError> {
        let mut gram = Vec::with_capacity(labels.len() * labels.len());
        for a in &labels {
            for b in &labels {
                gram.push(oracle.inner(a, b)?);
            }
        }
        GramOracle::new(labels, gram)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.gram[i * self.labels.len() + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, value: Rational) {
        let d = self.labels.len();
        self.gram[i * d + j] = value;
    }

    pub fn to_file(&self, kind: GramKind) -> GramFile<L> {
        GramFile { kind, labels: self.labels.clone(), gram: self.gram.iter().map(format_rational).collect() }
    }

    pub fn from_file(file: GramFile<L>) -> Result<Self, LasserreError> {
        let gram = file
            .gram
            .iter()
            .map(|s| parse_rational(s).map_err(|e| LasserreError::Mismatch(format!("Gram entry {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        GramOracle::new(file.labels, gram)
    }
}

impl<L: Label> MomentOracle for GramOracle<L> {
    type Label = L;

    fn inner(&self, a: &L, b: &L) -> Result<Rational, LasserreError> {
        let i = *self.index.get(a).ok_or_else(|| LasserreError::NotServed(format!("{a:?}")))?;
        let j = *self.index.get(b).ok_or_else(|| LasserreError::NotServed(format!("{b:?}")))?;
        Ok(self.entry(i, j).clone())
    }

    fn serves(&self, a: &L) -> bool {
        self.index.contains_key(a)
    }

    fn round_bound(&self) -> usize {
        self.labels.iter().map(Label::size).max().unwrap_or(0)
    }

    fn labels(&self) -> Option<Vec<L>> {
        Some(self.labels.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramKind {
    Csp,
    Dks,
}

/// On-disk Gram matrix: labels and row-major `"num/den"` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramFile<L> {
    pub kind: GramKind,
    pub labels: Vec<L>,
    pub gram: Vec<String>,
}

/// Reads only the `kind` field so callers can pick the label type.
pub fn gram_kind(json: &str) -> Result<GramKind, serde_json::Error> {
    #[derive(Deserialize)]
    struct Probe {
        kind: GramKind,
    }
    Ok(serde_json::from_str::<Probe>(json)?.kind)
}
