//! Minimum Steiner trees measured in vertices, by Dreyfus-Wagner dynamic
//! programming over terminal subsets.
//!
//! `f[Y][v]` is the fewest edges of a tree spanning terminals `Y` plus `v`;
//! `st(Y ∪ {v}) = f[Y][v] + 1`. One table therefore yields the Steiner size of
//! every single-vertex extension of the terminal set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

pub const MAX_TERMINALS: usize = 8;
const INF: u16 = u16::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SteinerError {
    #[error("{0} terminals requested, at most {MAX_TERMINALS} supported")]
    TooManyTerminals(usize),
    #[error("terminal {0} out of range")]
    OutOfRange(u32),
    #[error("terminals lie in different components: {partition:?}")]
    Disconnected { partition: Vec<Vec<u32>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteinerResult {
    /// Vertex count of a minimum Steiner tree.
    pub size: usize,
    /// Edges of one optimal tree, `u < v`, sorted.
    pub witness: Vec<(u32, u32)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionCounts {
    pub st: usize,
    /// `#{i ∉ S : st(S∪i) = st(S)}`
    pub same: usize,
    /// `#{i ∉ S : st(S∪i) = st(S)+1}`
    pub plus_one: usize,
    /// Vertices with `st(S∪i) ≥ st(S)+2`, including unreachable ones.
    pub more: usize,
}

fn normalize(g: &Graph, terminals: &[u32]) -> Result<Vec<u32>, SteinerError> {
    let set: BTreeSet<u32> = terminals.iter().copied().collect();
    if let Some(&bad) = set.iter().find(|&&t| t as usize >= g.n()) {
        return Err(SteinerError::OutOfRange(bad));
    }
    if set.len() > MAX_TERMINALS {
        return Err(SteinerError::TooManyTerminals(set.len()));
    }
    assert!(g.n() < 32_768, "distances are stored in 16 bits");
    Ok(set.into_iter().collect())
}

/// The Dreyfus-Wagner tables for one terminal set.
struct Tables {
    n: usize,
    terms: Vec<u32>,
    /// `f[mask * n + v]`
    f: Vec<u16>,
    /// `g[mask * n + v]`: best split of `mask` joined at `v`.
    g: Vec<u16>,
}

impl Tables {
    fn f(&self, mask: usize) -> &[u16] {
        &self.f[mask * self.n..(mask + 1) * self.n]
    }

    fn g(&self, mask: usize) -> &[u16] {
        &self.g[mask * self.n..(mask + 1) * self.n]
    }

    fn full(&self) -> usize {
        (1 << self.terms.len()) - 1
    }
}

fn build_tables(graph: &Graph, terms: &[u32], cap: u16) -> Tables {
    let n = graph.n();
    let s = terms.len();
    let masks = 1usize << s;
    let mut f = vec![INF; masks * n];
    let mut g = vec![INF; masks * n];
    let mut init = vec![INF; n];
    for (i, &t) in terms.iter().enumerate() {
        init.fill(INF);
        init[t as usize] = 0;
        let mask = 1 << i;
        distance_transform(graph, &init, cap, &mut f[mask * n..(mask + 1) * n]);
    }
    let mut order: Vec<usize> = (1..masks).filter(|m: &usize| m.count_ones() >= 2).collect();
    order.sort_by_key(|m| m.count_ones());
    for mask in order {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut best = vec![INF; n];
        // Submasks of `rest` give every split with `low` on the first side.
        let mut sub = rest;
        loop {
            let a = low | sub;
            if a != mask {
                let b = mask ^ a;
                let (fa, fb) = (&f[a * n..(a + 1) * n], &f[b * n..(b + 1) * n]);
                for v in 0..n {
                    let val = fa[v].saturating_add(fb[v]);
                    if val < best[v] {
                        best[v] = val;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        for b in best.iter_mut() {
            if *b > cap {
                *b = INF;
            }
        }
        distance_transform(graph, &best, cap, &mut f[mask * n..(mask + 1) * n]);
        g[mask * n..(mask + 1) * n].copy_from_slice(&best);
    }
    Tables { n, terms: terms.to_vec(), f, g }
}

/// `out[v] = min_u dist(u, v) + init[u]`, with values above `cap` set to INF.
///
/// Level-synchronous search over bitsets that expands the new frontier or
/// scans the unreached vertices, whichever is cheaper at each level.
fn distance_transform(graph: &Graph, init: &[u16], cap: u16, out: &mut [u16]) {
    let n = graph.n();
    let w = graph.words();
    out.fill(INF);
    let mut pending: Vec<Vec<u32>> = Vec::new();
    for (v, &val) in init.iter().enumerate() {
        if val <= cap {
            let val = val as usize;
            if pending.len() <= val {
                pending.resize_with(val + 1, Vec::new);
            }
            pending[val].push(v as u32);
        }
    }
    let mut reached = vec![0u64; w];
    let mut frontier = vec![0u64; w];
    let mut frontier_list: Vec<u32> = Vec::new();
    let mut next = vec![0u64; w];
    let mut reached_count = 0usize;
    let mut level = 0usize;
    while level <= cap as usize && reached_count < n {
        next.fill(0);
        if !frontier_list.is_empty() {
            let unreached = n - reached_count;
            if frontier_list.len() <= unreached {
                for &u in &frontier_list {
                    for (x, r) in next.iter_mut().zip(graph.row(u)) {
                        *x |= r;
                    }
                }
                for (x, r) in next.iter_mut().zip(&reached) {
                    *x &= !r;
                }
            } else {
                for (wi, &r) in reached.iter().enumerate() {
                    let mut free = !r;
                    if wi == w - 1 && !n.is_multiple_of(64) {
                        free &= (1u64 << (n % 64)) - 1;
                    }
                    while free != 0 {
                        let b = free.trailing_zeros() as usize;
                        free &= free - 1;
                        let v = wi * 64 + b;
                        if graph.row(v as u32).iter().zip(&frontier).any(|(a, f)| a & f != 0) {
                            next[wi] |= 1 << b;
                        }
                    }
                }
            }
        }
        if let Some(seeds) = pending.get(level) {
            for &v in seeds {
                let (wi, b) = (v as usize / 64, v % 64);
                if reached[wi] >> b & 1 == 0 {
                    next[wi] |= 1 << b;
                }
            }
        }
        frontier_list.clear();
        for (wi, &x) in next.iter().enumerate() {
            let mut bits = x;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let v = wi * 64 + b;
                out[v] = level as u16;
                frontier_list.push(v as u32);
            }
            reached[wi] |= x;
        }
        reached_count += frontier_list.len();
        std::mem::swap(&mut frontier, &mut next);
        level += 1;
        if frontier_list.is_empty() && level >= pending.len() {
            break;
        }
    }
}

/// Cap on edges: a tree on `t` terminals needs at most `2t - 2` edges when
/// every pair has a common neighbour. Exceeding it triggers an uncapped rerun.
fn edge_cap(terminals: usize) -> u16 {
    (2 * terminals.max(1) - 2) as u16
}

fn tables_for(graph: &Graph, terms: &[u32], extension: bool) -> Tables {
    let cap = edge_cap(terms.len() + extension as usize);
    let t = build_tables(graph, terms, cap);
    let full = t.full();
    let lifted = if extension {
        t.f(full).contains(&INF)
    } else {
        t.f(full)[terms[0] as usize] == INF
    };
    if lifted {
        build_tables(graph, terms, INF - 1)
    } else {
        t
    }
}

fn partition(graph: &Graph, terms: &[u32]) -> Vec<Vec<u32>> {
    let mut comp = vec![usize::MAX; graph.n()];
    let mut parts: Vec<Vec<u32>> = Vec::new();
    for &t in terms {
        if comp[t as usize] != usize::MAX {
            parts[comp[t as usize]].push(t);
            continue;
        }
        let id = parts.len();
        parts.push(vec![t]);
        comp[t as usize] = id;
        let mut stack = vec![t];
        while let Some(u) = stack.pop() {
            for &v in graph.neighbors(u) {
                if comp[v as usize] == usize::MAX {
                    comp[v as usize] = id;
                    stack.push(v);
                }
            }
        }
    }
    parts
}

/// Size of a minimum Steiner tree for `terminals`, without a witness.
/// The empty set has size 0.
pub fn steiner_value(graph: &Graph, terminals: &[u32]) -> Result<usize, SteinerError> {
    let terms = normalize(graph, terminals)?;
    match terms.len() {
        0 => Ok(0),
        1 => Ok(1),
        _ => {
            let t = tables_for(graph, &terms, false);
            let v = t.f(t.full())[terms[0] as usize];
            if v == INF {
                Err(SteinerError::Disconnected { partition: partition(graph, &terms) })
            } else {
                Ok(v as usize + 1)
            }
        }
    }
}

/// `st(S ∪ {v})` for every vertex `v`; `None` when `S ∪ {v}` is disconnected.
///
/// `S` itself must be connected.
pub fn extension_sizes(graph: &Graph, terminals: &[u32]) -> Result<Vec<Option<u16>>, SteinerError> {
    let terms = normalize(graph, terminals)?;
    if terms.is_empty() {
        return Ok(vec![Some(1); graph.n()]);
    }
    let t = tables_for(graph, &terms, true);
    let row = t.f(t.full());
    if row[terms[0] as usize] == INF {
        return Err(SteinerError::Disconnected { partition: partition(graph, &terms) });
    }
    Ok(row.iter().map(|&v| (v != INF).then(|| v + 1)).collect())
}

pub fn count_extensions(graph: &Graph, terminals: &[u32]) -> Result<ExtensionCounts, SteinerError> {
    let terms = normalize(graph, terminals)?;
    let sizes = extension_sizes(graph, &terms)?;
    let st = steiner_value(graph, &terms)?;
    let mut counts = ExtensionCounts { st, same: 0, plus_one: 0, more: 0 };
    for (v, size) in sizes.iter().enumerate() {
        if terms.binary_search(&(v as u32)).is_ok() {
            continue;
        }
        match size.map(|s| s as usize) {
            Some(s) if s == st => counts.same += 1,
            Some(s) if s == st + 1 => counts.plus_one += 1,
            _ => counts.more += 1,
        }
    }
    Ok(counts)
}

/// Minimum Steiner tree with a validated witness.
///
/// The witness is the lexicographically smallest spanning tree (Kruskal over
/// sorted edges) of the subgraph induced by the optimal vertex set found by
/// lowest-id backtracking through the tables.
pub fn steiner_size(graph: &Graph, terminals: &[u32]) -> Result<SteinerResult, SteinerError> {
    let terms = normalize(graph, terminals)?;
    if terms.is_empty() {
        return Ok(SteinerResult { size: 0, witness: Vec::new() });
    }
    if terms.len() == 1 {
        return Ok(SteinerResult { size: 1, witness: Vec::new() });
    }
    let t = tables_for(graph, &terms, false);
    let root = terms[0];
    let full = t.full();
    if t.f(full)[root as usize] == INF {
        return Err(SteinerError::Disconnected { partition: partition(graph, &terms) });
    }
    let size = t.f(full)[root as usize] as usize + 1;
    let mut vertices = BTreeSet::new();
    collect_tree(graph, &t, full, root, &mut vertices);
    let vertices: Vec<u32> = vertices.into_iter().collect();
    assert_eq!(vertices.len(), size, "backtracking must reproduce an optimal vertex set");
    let witness = lex_min_spanning_tree(graph, &vertices);
    let result = SteinerResult { size, witness };
    validate_witness(graph, &terms, &result).expect("witness validation");
    Ok(result)
}

fn collect_tree(graph: &Graph, t: &Tables, mask: usize, v: u32, out: &mut BTreeSet<u32>) {
    let n = t.n;
    let target = t.f(mask)[v as usize];
    if mask.count_ones() == 1 {
        let term = t.terms[mask.trailing_zeros() as usize];
        out.extend(shortest_path(graph, v, term));
        return;
    }
    let dist = bfs(graph, v);
    let gm = t.g(mask);
    let u = (0..n)
        .find(|&u| dist[u] != INF && gm[u] != INF && dist[u] + gm[u] == target)
        .expect("f is attained by some join vertex") as u32;
    out.extend(shortest_path(graph, v, u));
    let low = mask & mask.wrapping_neg();
    let rest = mask ^ low;
    let mut sub = rest;
    loop {
        let a = low | sub;
        if a != mask {
            let b = mask ^ a;
            let (fa, fb) = (t.f(a)[u as usize], t.f(b)[u as usize]);
            if fa != INF && fb != INF && fa + fb == gm[u as usize] {
                collect_tree(graph, t, a, u, out);
                collect_tree(graph, t, b, u, out);
                return;
            }
        }
        assert!(sub != 0, "g is attained by some split");
        sub = (sub - 1) & rest;
    }
}

fn bfs(graph: &Graph, src: u32) -> Vec<u16> {
    let mut dist = vec![INF; graph.n()];
    dist[src as usize] = 0;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in graph.neighbors(u) {
            if dist[v as usize] == INF {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Vertices of a shortest `from`-`to` path, stepping to the lowest-id
/// neighbour that is one closer to `to`.
fn shortest_path(graph: &Graph, from: u32, to: u32) -> Vec<u32> {
    let dist = bfs(graph, to);
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        cur = *graph
            .neighbors(cur)
            .iter()
            .find(|&&w| dist[w as usize] + 1 == dist[cur as usize])
            .expect("path exists");
        path.push(cur);
    }
    path
}

fn lex_min_spanning_tree(graph: &Graph, vertices: &[u32]) -> Vec<(u32, u32)> {
    let idx = |v: u32| vertices.binary_search(&v).unwrap();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut tree = Vec::new();
    for (i, &u) in vertices.iter().enumerate() {
        for &v in &vertices[i + 1..] {
            if graph.has_edge(u, v) {
                let (a, b) = (find(&mut parent, idx(u)), find(&mut parent, idx(v)));
                if a != b {
                    parent[a] = b;
                    tree.push((u, v));
                }
            }
        }
    }
    tree
}

/// Checks that `result.witness` is a tree of `result.size` vertices using only
/// graph edges and covering every terminal.
pub fn validate_witness(graph: &Graph, terminals: &[u32], result: &SteinerResult) -> Result<(), String> {
    let mut verts = BTreeSet::new();
    for &(u, v) in &result.witness {
        if !graph.has_edge(u, v) {
            return Err(format!("witness edge {u}-{v} is not in the graph"));
        }
        verts.insert(u);
        verts.insert(v);
    }
    if result.witness.is_empty() {
        verts.extend(terminals.iter().copied());
    }
    if verts.len() != result.size {
        return Err(format!("witness has {} vertices, size says {}", verts.len(), result.size));
    }
    if result.size > 0 && result.witness.len() != result.size - 1 {
        return Err("witness edge count is not size - 1".into());
    }
    if let Some(t) = terminals.iter().find(|t| !verts.contains(t)) {
        return Err(format!("terminal {t} not spanned"));
    }
    let list: Vec<u32> = verts.into_iter().collect();
    let idx = |v: u32| list.binary_search(&v).unwrap();
    let mut parent: Vec<usize> = (0..list.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(u, v) in &result.witness {
        let (a, b) = (find(&mut parent, idx(u)), find(&mut parent, idx(v)));
        if a == b {
            return Err(format!("witness edge {u}-{v} closes a cycle"));
        }
        parent[a] = b;
    }
    Ok(())
}

/// Exhaustive Steiner size: the smallest connected vertex set containing the
/// terminals, searched by increasing size. Only for tiny graphs.
pub fn steiner_exhaustive(graph: &Graph, terminals: &[u32]) -> Option<usize> {
    let n = graph.n();
    assert!(n <= 20, "exhaustive Steiner search is for tiny graphs");
    let term_mask: u32 = terminals.iter().fold(0, |m, &t| m | 1 << t);
    if term_mask == 0 {
        return Some(0);
    }
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << n) {
        if mask & term_mask != term_mask {
            continue;
        }
        let size = mask.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let set: Vec<u32> = (0..n as u32).filter(|&v| mask >> v & 1 == 1).collect();
        if graph.is_connected_subset(&set) {
            best = Some(size);
        }
    }
    best
}
