//! Simple undirected graphs, seeded G(n, p) generation, property audits and
//! densest-k-subgraph oracles.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, purpose};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("self-loop at vertex {0}")]
    SelfLoop(u32),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(u32, u32),
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: u32, n: usize },
    #[error("graph file: {0}")]
    Format(String),
    #[error("enumeration of C({n}, {k}) = {count} subsets exceeds budget {budget}")]
    BudgetExceeded { n: usize, k: usize, count: f64, budget: u64 },
    #[error("need 1 <= k <= n, got k = {k}, n = {n}")]
    BadK { k: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph on vertices `0..n`.
///
/// Keeps sorted adjacency lists for iteration and packed bitset rows for
/// constant-time adjacency tests and fast common-neighbour counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    words: usize,
    adj: Vec<Vec<u32>>,
    rows: Vec<u64>,
    m: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph { n, words, adj: vec![Vec::new(); n], rows: vec![0; n * words], m: 0 }
    }

    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self, GraphError> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        g.finish();
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n as u32)
            .flat_map(|u| (u + 1..n as u32).map(move |v| (u, v)))
            .collect();
        Graph::from_edges(n, &edges).expect("complete graph is simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3);
        let edges: Vec<_> = (0..n as u32).map(|u| (u, (u + 1) % n as u32)).collect();
        Graph::from_edges(n, &edges).expect("cycle is simple")
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves as u32).map(|v| (0, v)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star is simple")
    }

    /// Matching `{2i, 2i+1}`; `n` must be even.
    pub fn perfect_matching(n: usize) -> Self {
        assert!(n.is_multiple_of(2));
        let edges: Vec<_> = (0..n as u32 / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        Graph::from_edges(n, &edges).expect("matching is simple")
    }

    fn add_edge(&mut self, u: u32, v: u32) -> Result<(), GraphError> {
        for w in [u, v] {
            if w as usize >= self.n {
                return Err(GraphError::VertexOutOfRange { vertex: w, n: self.n });
            }
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if self.has_edge(u, v) {
            return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
        }
        self.set_bit(u, v);
        self.set_bit(v, u);
        self.adj[u as usize].push(v);
        self.adj[v as usize].push(u);
        self.m += 1;
        Ok(())
    }

    fn set_bit(&mut self, u: u32, v: u32) {
        let idx = u as usize * self.words + v as usize / 64;
        self.rows[idx] |= 1u64 << (v % 64);
    }

    fn finish(&mut self) {
        for list in &mut self.adj {
            list.sort_unstable();
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.adj[u as usize]
    }

    pub fn degree(&self, u: u32) -> usize {
        self.adj[u as usize].len()
    }

    #[inline]
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        let idx = u as usize * self.words + v as usize / 64;
        self.rows[idx] >> (v % 64) & 1 == 1
    }

    /// Packed adjacency row of `u`; bit `v` is set iff `uv` is an edge.
    pub fn row(&self, u: u32) -> &[u64] {
        let start = u as usize * self.words;
        &self.rows[start..start + self.words]
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn common_neighbors(&self, u: u32, v: u32) -> usize {
        self.row(u).iter().zip(self.row(v)).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n as u32).flat_map(move |u| {
            self.adj[u as usize].iter().copied().filter(move |&v| v > u).map(move |v| (u, v))
        })
    }

    /// Number of edges with both ends in `set`.
    pub fn induced_edges(&self, set: &[u32]) -> usize {
        let mut count = 0;
        for (i, &u) in set.iter().enumerate() {
            for &v in &set[i + 1..] {
                count += self.has_edge(u, v) as usize;
            }
        }
        count
    }

    /// Whether the subgraph induced by `set` is connected (empty counts as connected).
    pub fn is_connected_subset(&self, set: &[u32]) -> bool {
        if set.is_empty() {
            return true;
        }
        let mut seen = vec![false; set.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for (j, &w) in set.iter().enumerate() {
                if !seen[j] && self.has_edge(set[i], w) {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
        reached == set.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.n, self.m).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| GraphError::Format("empty file".into()))?;
        let nums = parse_pair(header)?;
        let (n, m) = (nums.0 as usize, nums.1 as usize);
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let (u, v) = parse_pair(line)?;
            if u >= v {
                return Err(GraphError::Format(format!("edge line `{line}` must satisfy u < v")));
            }
            edges.push((u as u32, v as u32));
        }
        if edges.len() != m {
            return Err(GraphError::Format(format!("header says {m} edges, found {}", edges.len())));
        }
        Graph::from_edges(n, &edges)
    }

    pub fn read(path: &Path) -> Result<Self, GraphError> {
        Graph::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_pair(line: &str) -> Result<(u64, u64), GraphError> {
    let mut it = line.split_whitespace().map(str::parse::<u64>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(GraphError::Format(format!("expected two integers, got `{line}`"))),
    }
}

/// How the edge probability is chosen from `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeProbability {
    /// `ln n / √n`.
    LogOverRoot,
    /// `√(ln n) / √n`.
    SqrtLogOverRoot,
    Explicit(f64),
}

impl EdgeProbability {
    pub fn value(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            EdgeProbability::LogOverRoot if n >= 2 => (nf.ln() / nf.sqrt()).min(1.0),
            EdgeProbability::SqrtLogOverRoot if n >= 2 => (nf.ln().sqrt() / nf.sqrt()).min(1.0),
            EdgeProbability::Explicit(p) => p,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnpParams {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl GnpParams {
    pub fn standard(n: usize, seed: u64) -> Self {
        GnpParams { n, p: EdgeProbability::LogOverRoot.value(n), seed }
    }
}

/// Sample `G(n, p)`: one uniform draw per pair, pairs in lexicographic order.
pub fn gen_gnp(params: GnpParams) -> Result<Graph, GraphError> {
    let GnpParams { n, p, seed } = params;
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::BadProbability(p));
    }
    let mut rng = rng::stream(seed, purpose::GRAPH);
    let mut g = Graph::empty(n);
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            let x: f64 = rng.gen();
            if x < p {
                g.set_bit(u, v);
                g.set_bit(v, u);
                g.adj[u as usize].push(v);
                g.adj[v as usize].push(u);
                g.m += 1;
            }
        }
    }
    g.finish();
    Ok(g)
}

/// Whether the common-neighbour audit visits every pair or a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairCoverage {
    All,
    Sampled { pairs: usize, seed: u64 },
}

impl PairCoverage {
    /// Exhaustive up to 8192 vertices, otherwise 2·10⁶ sampled pairs.
    pub fn auto(n: usize) -> Self {
        if n <= 8192 {
            PairCoverage::All
        } else {
            PairCoverage::Sampled { pairs: 2_000_000, seed: 0 }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub min_degree: usize,
    pub max_degree: usize,
    pub min_common: usize,
    pub max_common: usize,
    pub pass_degree: bool,
    pub pass_common_lower: bool,
    pub pass_common_upper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled_pairs: Option<usize>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.pass_degree && self.pass_common_lower && self.pass_common_upper
    }
}

/// Degree window `[√n ln n / 2, 2 √n ln n]`.
pub fn degree_bounds(n: usize) -> (f64, f64) {
    let base = (n as f64).sqrt() * (n as f64).ln();
    (base / 2.0, 2.0 * base)
}

/// Upper bound `2 ln² n` on common neighbours.
pub fn common_upper_bound(n: usize) -> f64 {
    2.0 * (n as f64).ln().powi(2)
}

pub fn audit_properties(g: &Graph) -> PropertyReport {
    audit_with(g, PairCoverage::auto(g.n()))
}

pub fn audit_with(g: &Graph, coverage: PairCoverage) -> PropertyReport {
    let n = g.n();
    let degrees: Vec<usize> = (0..n as u32).map(|u| g.degree(u)).collect();
    let min_degree = degrees.iter().copied().min().unwrap_or(0);
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let (lo, hi) = degree_bounds(n);

    let (mut min_common, mut max_common) = (usize::MAX, 0usize);
    let mut visit = |u: u32, v: u32| {
        let c = g.common_neighbors(u, v);
        min_common = min_common.min(c);
        max_common = max_common.max(c);
    };
    let sampled_pairs = match coverage {
        PairCoverage::All => {
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    visit(u, v);
                }
            }
            None
        }
        PairCoverage::Sampled { pairs, seed } => {
            let mut rng = rng::stream(seed, purpose::AUDIT);
            if n >= 2 {
                for _ in 0..pairs {
                    let u = rng.gen_range(0..n as u32);
                    let mut v = rng.gen_range(0..n as u32 - 1);
                    if v >= u {
                        v += 1;
                    }
                    visit(u, v);
                }
            }
            Some(pairs)
        }
    };
    if n < 2 {
        min_common = 0;
    }
    PropertyReport {
        min_degree,
        max_degree,
        min_common,
        max_common,
        pass_degree: n > 0 && (min_degree as f64) >= lo && (max_degree as f64) <= hi,
        pass_common_lower: n < 2 || min_common >= 1,
        pass_common_upper: (max_common as f64) <= common_upper_bound(n),
        sampled_pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSubgraph {
    pub vertices: Vec<u32>,
    pub edges: usize,
}

impl DenseSubgraph {
    /// Average degree `2|E| / k` of the induced subgraph.
    pub fn average_degree(&self) -> f64 {
        if self.vertices.is_empty() {
            0.0
        } else {
            2.0 * self.edges as f64 / self.vertices.len() as f64
        }
    }
}

pub const DEFAULT_SUBSET_BUDGET: u64 = 50_000_000;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact densest `k`-subgraph by enumerating every `k`-subset in
/// lexicographic order; the first maximiser wins ties.
pub fn densest_k_bruteforce(g: &Graph, k: usize, budget: u64) -> Result<DenseSubgraph, GraphError> {
    let n = g.n();
    if k > n {
        return Err(GraphError::BadK { k, n });
    }
    let count = binomial(n, k);
    if count > budget as f64 {
        return Err(GraphError::BudgetExceeded { n, k, count, budget });
    }
    let mut best = DenseSubgraph { vertices: (0..k as u32).collect(), edges: 0 };
    best.edges = g.induced_edges(&best.vertices);
    let mut current = Vec::with_capacity(k);
    let mut partial = Vec::with_capacity(k + 1);
    partial.push(0usize);
    enumerate(g, k, 0, &mut current, &mut partial, &mut best);
    Ok(best)
}

fn enumerate(
    g: &Graph,
    k: usize,
    start: u32,
    current: &mut Vec<u32>,
    partial: &mut Vec<usize>,
    best: &mut DenseSubgraph,
) {
    if current.len() == k {
        let e = *partial.last().unwrap();
        if e > best.edges {
            best.edges = e;
            best.vertices.clone_from(current);
        }
        return;
    }
    let need = k - current.len();
    let n = g.n() as u32;
    for v in start..=n - need as u32 {
        let gain = current.iter().filter(|&&u| g.has_edge(u, v)).count();
        let base = *partial.last().unwrap();
        current.push(v);
        partial.push(base + gain);
        enumerate(g, k, v + 1, current, partial, best);
        current.pop();
        partial.pop();
    }
}

/// Swap-based local search from `restarts` random starts.
///
/// Each restart draws its start from substream `(seed, restart)` and applies
/// best-improvement swaps until none gains; the best local optimum is returned
/// with the lowest restart index winning ties.
pub fn densest_k_localsearch(g: &Graph, k: usize, restarts: usize, seed: u64) -> Result<DenseSubgraph, GraphError> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(GraphError::BadK { k, n });
    }
    let mut best: Option<DenseSubgraph> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng::stream(seed, purpose::LOCAL_SEARCH + r as u64);
        let start = rng::sorted_subset(&mut rng, n, k);
        let found = improve_by_swaps(g, start);
        if best.as_ref().is_none_or(|b| found.edges > b.edges) {
            best = Some(found);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Run best-improvement swaps from `start` to a local optimum.
pub fn improve_by_swaps(g: &Graph, start: Vec<u32>) -> DenseSubgraph {
    let n = g.n();
    let mut inside = vec![false; n];
    for &v in &start {
        inside[v as usize] = true;
    }
    // deg_in[v] = neighbours of v inside the current set
    let mut deg_in = vec![0usize; n];
    for &u in &start {
        for &w in g.neighbors(u) {
            deg_in[w as usize] += 1;
        }
    }
    let mut edges: usize = start.iter().map(|&u| deg_in[u as usize]).sum::<usize>() / 2;
    loop {
        let mut ins: Vec<u32> = (0..n as u32).filter(|&v| inside[v as usize]).collect();
        let mut outs: Vec<u32> = (0..n as u32).filter(|&v| !inside[v as usize]).collect();
        ins.sort_by_key(|&u| deg_in[u as usize]);
        outs.sort_by_key(|&v| std::cmp::Reverse(deg_in[v as usize]));
        let mut best: Option<(i64, u32, u32)> = None;
        'outer: for &v in &outs {
            let dv = deg_in[v as usize] as i64;
            for &u in &ins {
                let du = deg_in[u as usize] as i64;
                let cap = dv - du;
                let floor = best.map_or(0, |b| b.0);
                if cap <= floor {
                    if u == ins[0] {
                        break 'outer;
                    }
                    break;
                }
                let gain = cap - g.has_edge(u, v) as i64;
                if gain > floor {
                    best = Some((gain, u, v));
                }
            }
        }
        let Some((gain, u, v)) = best else { break };
        inside[u as usize] = false;
        for &w in g.neighbors(u) {
            deg_in[w as usize] -= 1;
        }
        inside[v as usize] = true;
        for &w in g.neighbors(v) {
            deg_in[w as usize] += 1;
        }
        edges = (edges as i64 + gain) as usize;
    }
    let vertices: Vec<u32> = (0..n as u32).filter(|&v| inside[v as usize]).collect();
    debug_assert_eq!(edges, g.induced_edges(&vertices));
    DenseSubgraph { vertices, edges }
}

/// Largest average degree among `samples` uniform `k`-subsets and `extra`.
pub fn sampled_max_density(g: &Graph, k: usize, samples: usize, seed: u64, extra: &[DenseSubgraph]) -> DenseSubgraph {
    let mut rng = rng::stream(seed, purpose::SUBSETS);
    let mut best: Option<DenseSubgraph> = None;
    for _ in 0..samples {
        let vertices = rng::sorted_subset(&mut rng, g.n(), k);
        let edges = g.induced_edges(&vertices);
        if best.as_ref().is_none_or(|b| edges > b.edges) {
            best = Some(DenseSubgraph { vertices, edges });
        }
    }
    for e in extra {
        if best.as_ref().is_none_or(|b| e.edges > b.edges) {
            best = Some(e.clone());
        }
    }
    best.unwrap_or(DenseSubgraph { vertices: Vec::new(), edges: 0 })
}
