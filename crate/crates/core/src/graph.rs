//! Directed acyclic graphs over the observed variables, the undirected graphs
//! derived from them, and canonical forms for isomorphism classes.
//!
//! Nodes are `0..m` internally. The text format and everything printed for
//! people uses `1..=m`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Adjacency is stored as bitmasks, which bounds the node count.
pub const MAX_NODES: usize = 64;

/// Largest graph for which [`Dag::canonical_key`] is computed.
pub const MAX_CANONICAL_NODES: usize = 8;

pub type NodeSet = BTreeSet<usize>;

fn bits(mask: u64) -> impl Iterator<Item = usize> + Clone {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    m: usize,
    /// Sorted lexicographically by (tail, head).
    edges: Vec<(usize, usize)>,
    parents: Vec<u64>,
    children: Vec<u64>,
    topo: Vec<usize>,
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag(m={}, {})", self.m, self.edge_string())
    }
}

impl Dag {
    /// Builds a DAG from 0-based edges.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m > MAX_NODES {
            return Err(Error::TooLarge { m, max: MAX_NODES });
        }
        let mut parents = vec![0u64; m];
        let mut children = vec![0u64; m];
        for &(v, w) in edges {
            for x in [v, w] {
                if x >= m {
                    return Err(Error::BadIndex { node: x + 1, m });
                }
            }
            if v == w {
                return Err(Error::SelfLoop(v + 1));
            }
            if children[v] >> w & 1 == 1 {
                return Err(Error::DuplicateEdge(v + 1, w + 1));
            }
            children[v] |= 1 << w;
            parents[w] |= 1 << v;
        }
        // Kahn's algorithm, smallest available node first.
        let mut indeg: Vec<u32> = parents.iter().map(|p| p.count_ones()).collect();
        let mut ready: BTreeSet<usize> = (0..m).filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(m);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for w in bits(children[v]) {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        if topo.len() != m {
            return Err(Error::CycleDetected);
        }
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        Ok(Dag {
            m,
            edges,
            parents,
            children,
            topo,
        })
    }

    /// Builds a DAG from 1-based edges, as written in the text format.
    pub fn from_one_based(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(v, w) in edges {
            for x in [v, w] {
                if x == 0 || x > m {
                    return Err(Error::BadIndex { node: x, m });
                }
            }
            zero.push((v - 1, w - 1));
        }
        Self::new(m, &zero)
    }

    pub fn empty(m: usize) -> Self {
        Self::new(m, &[]).expect("empty graph is acyclic")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, v: usize, w: usize) -> bool {
        v < self.m && w < self.m && self.children[v] >> w & 1 == 1
    }

    pub fn adjacent(&self, v: usize, w: usize) -> bool {
        self.has_edge(v, w) || self.has_edge(w, v)
    }

    /// Position of the edge in [`Dag::edges`].
    pub fn edge_index(&self, v: usize, w: usize) -> Option<usize> {
        self.edges.binary_search(&(v, w)).ok()
    }

    /// A topological order (ties broken by smallest label).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Whether every edge points from a smaller to a larger label.
    pub fn is_topologically_labeled(&self) -> bool {
        self.edges.iter().all(|&(v, w)| v < w)
    }

    /// Isomorphic copy in which the stored topological order becomes
    /// `0..m`, so every edge `v → w` has `v < w`.
    pub fn topologically_relabeled(&self) -> Dag {
        let mut pos = vec![0; self.m];
        for (i, &v) in self.topo.iter().enumerate() {
            pos[v] = i;
        }
        self.permuted(&pos)
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.m {
            Err(Error::BadIndex {
                node: v + 1,
                m: self.m,
            })
        } else {
            Ok(())
        }
    }

    pub fn parents_mask(&self, v: usize) -> u64 {
        self.parents[v]
    }

    pub fn children_mask(&self, v: usize) -> u64 {
        self.children[v]
    }

    pub fn parents(&self, v: usize) -> Result<NodeSet> {
        self.check(v)?;
        Ok(bits(self.parents[v]).collect())
    }

    pub fn children(&self, v: usize) -> Result<NodeSet> {
        self.check(v)?;
        Ok(bits(self.children[v]).collect())
    }

    pub fn sinks(&self) -> NodeSet {
        (0..self.m).filter(|&v| self.children[v] == 0).collect()
    }

    pub fn sources(&self) -> NodeSet {
        (0..self.m).filter(|&v| self.parents[v] == 0).collect()
    }

    /// Self-inclusive ancestor masks for all nodes.
    pub fn ancestor_masks(&self) -> Vec<u64> {
        let mut anc = vec![0u64; self.m];
        for &v in &self.topo {
            let mut a = 1u64 << v;
            for p in bits(self.parents[v]) {
                a |= anc[p];
            }
            anc[v] = a;
        }
        anc
    }

    /// The undirected graph obtained by forgetting edge directions.
    pub fn skeleton(&self) -> UGraph {
        let mut h = UGraph::empty(self.m);
        for &(v, w) in &self.edges {
            h.add_edge(v, w);
        }
        h
    }

    /// `Gᶜ`: pairs that are not adjacent in either direction.
    pub fn complement(&self) -> UGraph {
        self.skeleton().complement()
    }

    /// `G_con`, the moral graph: adjacent pairs plus pairs with a common
    /// child. These are the entries of the conditional concentration matrix
    /// given the latent source that are not identically zero.
    pub fn concentration_graph(&self) -> UGraph {
        let mut h = self.skeleton();
        for v in 0..self.m {
            for (a, b) in bits(self.parents[v]).tuple_combinations() {
                h.add_edge(a, b);
            }
        }
        h
    }

    /// `G_{|L,cov}`: pairs whose self-inclusive ancestor sets meet, i.e. the
    /// conditional covariance entries given the latent source that are not
    /// identically zero.
    pub fn latent_cov_graph(&self) -> UGraph {
        let anc = self.ancestor_masks();
        let mut h = UGraph::empty(self.m);
        for v in 0..self.m {
            for w in v + 1..self.m {
                if anc[v] & anc[w] != 0 {
                    h.add_edge(v, w);
                }
            }
        }
        h
    }

    /// Colliders `a → c ← b` with `a < b` non-adjacent, as `(a, c, b)`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.m {
            for (a, b) in bits(self.parents[c]).tuple_combinations() {
                if !self.adjacent(a, b) {
                    out.insert((a, c, b));
                }
            }
        }
        out
    }

    /// Markov equivalence: same skeleton and same v-structures.
    pub fn markov_equivalent(&self, other: &Dag) -> Result<bool> {
        if self.m != other.m {
            return Err(Error::SizeMismatch {
                left: self.m,
                right: other.m,
            });
        }
        Ok(self.skeleton() == other.skeleton() && self.v_structures() == other.v_structures())
    }

    /// Subgraph induced by `keep`, relabeled `0..|keep|` in increasing order.
    pub fn induced_subgraph(&self, keep: &NodeSet) -> Result<Dag> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        for &v in keep {
            self.check(v)?;
        }
        let index: Vec<Option<usize>> = {
            let mut idx = vec![None; self.m];
            for (i, &v) in keep.iter().enumerate() {
                idx[v] = Some(i);
            }
            idx
        };
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(v, w)| Some((index[v]?, index[w]?)))
            .collect();
        Dag::new(keep.len(), &edges)
    }

    /// Removes a single node.
    pub fn without_node(&self, s: usize) -> Result<Dag> {
        self.check(s)?;
        let keep: NodeSet = (0..self.m).filter(|&v| v != s).collect();
        self.induced_subgraph(&keep)
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Dag {
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(v, w)| (perm[v], perm[w]))
            .collect();
        Dag::new(self.m, &edges).expect("relabeling preserves acyclicity")
    }

    /// Bit `perm[v]·m + perm[w]` set for every edge `v → w`.
    fn code_under(&self, perm: &[usize]) -> u64 {
        self.edges
            .iter()
            .fold(0u64, |acc, &(v, w)| acc | 1 << (perm[v] * self.m + perm[w]))
    }

    /// Minimum adjacency code over all node permutations.
    pub fn canonical_key(&self) -> Result<CanonicalKey> {
        if self.m > MAX_CANONICAL_NODES {
            return Err(Error::TooLarge {
                m: self.m,
                max: MAX_CANONICAL_NODES,
            });
        }
        let best = (0..self.m)
            .permutations(self.m)
            .map(|perm| self.code_under(&perm))
            .min()
            .unwrap_or(0);
        Ok(CanonicalKey::new(self.m, best))
    }

    pub fn edge_string(&self) -> String {
        self.edges
            .iter()
            .map(|&(v, w)| format!("{}>{}", v + 1, w + 1))
            .join(";")
    }

    /// Parses the graph text format: the node count on the first
    /// significant line, then one `u v` pair per line meaning `u → v`
    /// (1-based). Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Dag> {
        let mut m: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match m {
                None => {
                    if toks.len() != 1 {
                        return Err(err("expected the node count".into()));
                    }
                    let n: usize = toks[0]
                        .parse()
                        .map_err(|_| err(format!("invalid node count `{}`", toks[0])))?;
                    m = Some(n);
                }
                Some(n) => {
                    if toks.len() != 2 {
                        return Err(err("expected an edge `u v`".into()));
                    }
                    let parse_node = |t: &str| -> Result<usize> {
                        let x: usize = t.parse().map_err(|_| err(format!("invalid node `{t}`")))?;
                        if x == 0 || x > n {
                            return Err(err(format!("node {x} outside 1..={n}")));
                        }
                        Ok(x - 1)
                    };
                    edges.push((parse_node(toks[0])?, parse_node(toks[1])?));
                }
            }
        }
        let m = m.ok_or(Error::Parse {
            line: 1,
            message: "missing node count".into(),
        })?;
        Dag::new(m, &edges)
    }

    /// Inverse of [`Dag::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for &(v, w) in &self.edges {
            s.push_str(&format!("{} {}\n", v + 1, w + 1));
        }
        s
    }
}

/// Simple undirected graph on `0..m`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UGraph {
    m: usize,
    adj: Vec<u64>,
}

impl fmt::Debug for UGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self
            .edges()
            .iter()
            .map(|&(v, w)| format!("{}-{}", v + 1, w + 1))
            .join(",");
        write!(f, "UGraph(m={}, {})", self.m, e)
    }
}

/// A connected component and whether it contains an odd cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub nodes: Vec<usize>,
    pub odd_cycle: bool,
}

impl UGraph {
    pub fn empty(m: usize) -> Self {
        assert!(m <= MAX_NODES, "at most {MAX_NODES} nodes");
        UGraph { m, adj: vec![0; m] }
    }

    pub fn complete(m: usize) -> Self {
        UGraph::empty(m).complement()
    }

    /// Builds from 0-based edges; panics on out-of-range nodes or loops.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Self {
        let mut h = UGraph::empty(m);
        for &(v, w) in edges {
            h.add_edge(v, w);
        }
        h
    }

    pub fn add_edge(&mut self, v: usize, w: usize) {
        assert!(v != w && v < self.m && w < self.m, "invalid edge {v}-{w}");
        self.adj[v] |= 1 << w;
        self.adj[w] |= 1 << v;
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn has_edge(&self, v: usize, w: usize) -> bool {
        v < self.m && w < self.m && self.adj[v] >> w & 1 == 1
    }

    pub fn neighbors_mask(&self, v: usize) -> u64 {
        self.adj[v]
    }

    /// Edges `(v, w)` with `v < w`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|v| {
                bits(self.adj[v])
                    .filter(move |&w| w > v)
                    .map(move |w| (v, w))
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .map(|a| a.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    pub fn complement(&self) -> UGraph {
        let full = if self.m == 64 {
            u64::MAX
        } else {
            (1u64 << self.m) - 1
        };
        UGraph {
            m: self.m,
            adj: (0..self.m)
                .map(|v| full & !self.adj[v] & !(1 << v))
                .collect(),
        }
    }

    /// Subgraph induced by `keep`, relabeled `0..|keep|` in increasing order.
    pub fn induced(&self, keep: &NodeSet) -> UGraph {
        let nodes: Vec<usize> = keep.iter().copied().collect();
        let mut h = UGraph::empty(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            for (j, &w) in nodes.iter().enumerate().skip(i + 1) {
                if self.has_edge(v, w) {
                    h.add_edge(i, j);
                }
            }
        }
        h
    }

    /// Connected components in order of their smallest node, each flagged
    /// by whether a BFS 2-colouring fails (an odd cycle exists).
    pub fn odd_cycle_components(&self) -> Vec<Component> {
        let mut color: Vec<Option<bool>> = vec![None; self.m];
        let mut out = Vec::new();
        for start in 0..self.m {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            let mut nodes = vec![start];
            let mut odd = false;
            while let Some(v) = queue.pop_front() {
                let cv = color[v].expect("queued nodes are coloured");
                for w in bits(self.adj[v]) {
                    match color[w] {
                        None => {
                            color[w] = Some(!cv);
                            nodes.push(w);
                            queue.push_back(w);
                        }
                        Some(cw) if cw == cv => odd = true,
                        Some(_) => {}
                    }
                }
            }
            nodes.sort_unstable();
            out.push(Component {
                nodes,
                odd_cycle: odd,
            });
        }
        out
    }

    /// Number of connected components without an odd cycle.
    pub fn bipartite_component_count(&self) -> usize {
        self.odd_cycle_components()
            .iter()
            .filter(|c| !c.odd_cycle)
            .count()
    }

    /// Whether every connected component contains an odd cycle.
    pub fn every_component_odd(&self) -> bool {
        self.odd_cycle_components().iter().all(|c| c.odd_cycle)
    }
}

/// Canonical form of an unlabeled DAG: the node count followed by the
/// minimal adjacency code, big-endian. Keys compare equal exactly when the
/// graphs are isomorphic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    fn new(m: usize, code: u64) -> Self {
        let mut bytes = vec![m as u8];
        bytes.extend_from_slice(&code.to_be_bytes());
        CanonicalKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0[0] as usize
    }

    fn code(&self) -> u64 {
        u64::from_be_bytes(self.0[1..9].try_into().expect("9-byte key"))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 18 || !s.is_ascii() {
            return None;
        }
        let bytes: Option<Vec<u8>> = (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok())
            .collect();
        let bytes = bytes?;
        if bytes[0] as usize > MAX_CANONICAL_NODES {
            return None;
        }
        Some(CanonicalKey(bytes))
    }

    /// The graph in its canonical labeling.
    pub fn to_dag(&self) -> Result<Dag> {
        let m = self.m();
        let code = self.code();
        let edges: Vec<(usize, usize)> = bits(code).map(|b| (b / m, b % m)).collect();
        Dag::new(m, &edges)
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKey({})", self.to_hex())
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CanonicalKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CanonicalKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CanonicalKey::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid canonical key `{s}`")))
    }
}

#[cfg(test)]
pub(crate) mod strategies {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn arb_dag(max_m: usize) -> impl Strategy<Value = Dag> {
        (1..=max_m).prop_flat_map(|m| {
            (
                proptest::collection::vec(any::<bool>(), m * (m - 1) / 2),
                Just((0..m).collect::<Vec<_>>()).prop_shuffle(),
            )
                .prop_map(move |(flags, perm)| {
                    let pairs: Vec<(usize, usize)> = (0..m).tuple_combinations().collect();
                    let edges: Vec<(usize, usize)> = pairs
                        .into_iter()
                        .zip(flags)
                        .filter_map(|(p, f)| f.then_some(p))
                        .collect();
                    Dag::new(m, &edges).unwrap().permuted(&perm)
                })
        })
    }
}
