//! Graphical criteria for generic finite identifiability and the
//! subgraph-extension certifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CanonicalKey, Dag, NodeSet, UGraph};
use crate::jacobian::Status;

fn restricted_complement(h: &UGraph, excluded: &NodeSet) -> UGraph {
    let c = h.complement();
    if excluded.is_empty() {
        return c;
    }
    let keep: NodeSet = (0..h.m()).filter(|v| !excluded.contains(v)).collect();
    c.induced(&keep)
}

/// Every component of `G^c`, restricted to the non-excluded nodes, has an
/// odd cycle.
pub fn sufficient_odd_cycle(g: &Dag, excluded: &NodeSet) -> bool {
    restricted_complement(&g.skeleton(), excluded).every_component_odd()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedClause {
    None,
    Concentration,
    Covariance,
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NecessaryReport {
    pub holds: bool,
    pub edges: usize,
    pub e_con: usize,
    pub d_con: usize,
    pub cov_edges: usize,
    pub d_cov: usize,
    pub failed_clause: FailedClause,
}

/// `|E_con| − |E| ≥ d_con` and `|E_cov| − |E| ≥ d_cov`, where `d` counts the
/// components without an odd cycle in the complement restricted to the
/// non-excluded nodes.
pub fn necessary_condition(g: &Dag, excluded: &NodeSet) -> NecessaryReport {
    let con = g.concentration_graph();
    let cov = g.latent_cov_graph();
    let edges = g.edge_count();
    let e_con = con.edge_count();
    let cov_edges = cov.edge_count();
    let d_con = restricted_complement(&con, excluded).bipartite_component_count();
    let d_cov = restricted_complement(&cov, excluded).bipartite_component_count();
    let con_ok = e_con - edges >= d_con;
    let cov_ok = cov_edges - edges >= d_cov;
    let failed_clause = match (con_ok, cov_ok) {
        (true, true) => FailedClause::None,
        (false, true) => FailedClause::Concentration,
        (true, false) => FailedClause::Covariance,
        (false, false) => FailedClause::Both,
    };
    NecessaryReport {
        holds: con_ok && cov_ok,
        edges,
        e_con,
        d_con,
        cov_edges,
        d_cov,
        failed_clause,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WermuthClause {
    Covariance,
    Concentration,
}

/// First clause that holds: every component of `G_cov^c`, else of `G_con^c`,
/// has an odd cycle.
pub fn wermuth_clause(g: &Dag) -> Option<WermuthClause> {
    if g.latent_cov_graph().complement().every_component_odd() {
        Some(WermuthClause::Covariance)
    } else if g.concentration_graph().complement().every_component_odd() {
        Some(WermuthClause::Concentration)
    } else {
        None
    }
}

pub fn wermuth_condition(g: &Dag) -> bool {
    wermuth_clause(g).is_some()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Jacobian,
    Criteria,
    Extension,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub status: Status,
    pub provenance: Provenance,
}

/// Frozen verdicts keyed by canonical key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VerdictCache {
    pub entries: BTreeMap<CanonicalKey, CacheEntry>,
}

impl VerdictCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: CanonicalKey, entry: CacheEntry) {
        self.entries.insert(key, entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Only certified positives count; probable negatives are never used.
    pub fn certifies(&self, key: &CanonicalKey) -> bool {
        self.entries
            .get(key)
            .is_some_and(|e| e.status == Status::IdentifiableCertified)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sink,
    Source,
}

/// `node` is a label of the original graph, 0-based in memory and 1-based
/// when serialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    #[serde(with = "one_based")]
    pub node: usize,
    pub role: Role,
}

mod one_based {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*v as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        match u64::deserialize(d)? {
            0 => Err(D::Error::custom("nodes are numbered from 1")),
            v => Ok(v as usize - 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseReason {
    Cache,
    SufficientCondition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionCertificate {
    pub chain: Vec<Removal>,
    pub base_graph_key: CanonicalKey,
    pub base_reason: BaseReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtensionOptions {
    /// Longest removal chain; `None` means `m − 3`.
    pub max_depth: Option<usize>,
    /// Accept a subgraph that meets the odd-cycle condition without a cache
    /// entry.
    pub sufficient_fallback: bool,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            max_depth: None,
            sufficient_fallback: true,
        }
    }
}

/// Whether `s` may be removed in `role`: a sink whose parents are not all
/// other nodes, or a source whose children are not all other nodes.
pub fn removable(g: &Dag, s: usize, role: Role) -> bool {
    let others = ((1u64 << g.m()) - 1) & !(1 << s);
    match role {
        Role::Sink => g.children_mask(s) == 0 && g.parents_mask(s) != others,
        Role::Source => g.parents_mask(s) == 0 && g.children_mask(s) != others,
    }
}

fn base_reason(
    sub: &Dag,
    cache: &VerdictCache,
    opts: &ExtensionOptions,
) -> Option<(CanonicalKey, BaseReason)> {
    let key = sub.canonical_key().ok()?;
    if cache.certifies(&key) {
        Some((key, BaseReason::Cache))
    } else if opts.sufficient_fallback && sufficient_odd_cycle(sub, &NodeSet::new()) {
        Some((key, BaseReason::SufficientCondition))
    } else {
        None
    }
}

fn search(
    g: &Dag,
    labels: &[usize],
    cache: &VerdictCache,
    opts: &ExtensionOptions,
    depth_left: usize,
    chain: &mut Vec<Removal>,
) -> Option<(CanonicalKey, BaseReason)> {
    if depth_left == 0 {
        return None;
    }
    for s in 0..g.m() {
        for role in [Role::Sink, Role::Source] {
            if !removable(g, s, role) {
                continue;
            }
            // an isolated node gives the same subgraph in both roles
            if role == Role::Source && removable(g, s, Role::Sink) {
                continue;
            }
            let sub = g.without_node(s).expect("node in range");
            chain.push(Removal {
                node: labels[s],
                role,
            });
            if let Some(found) = base_reason(&sub, cache, opts) {
                return Some(found);
            }
            let sub_labels: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != s)
                .map(|(_, &l)| l)
                .collect();
            if let Some(found) = search(&sub, &sub_labels, cache, opts, depth_left - 1, chain) {
                return Some(found);
            }
            chain.pop();
        }
    }
    None
}

/// Depth-first search for a chain of sink/source removals ending at a
/// certified subgraph. Candidates are tried in ascending node order, sink
/// before source.
pub fn subgraph_extension(
    g: &Dag,
    cache: &VerdictCache,
    opts: &ExtensionOptions,
) -> Option<ExtensionCertificate> {
    let depth = opts.max_depth.unwrap_or(g.m().saturating_sub(3));
    let labels: Vec<usize> = (0..g.m()).collect();
    let mut chain = Vec::new();
    let (base_graph_key, base_reason) = search(g, &labels, cache, opts, depth, &mut chain)?;
    Some(ExtensionCertificate {
        chain,
        base_graph_key,
        base_reason,
    })
}

impl ExtensionCertificate {
    /// Re-executes the chain on `g`, checking each removal's side condition
    /// and the base verdict.
    pub fn replay(&self, g: &Dag, cache: &VerdictCache) -> Result<()> {
        let mut cur = g.clone();
        let mut labels: Vec<usize> = (0..g.m()).collect();
        for r in &self.chain {
            let s = labels
                .iter()
                .position(|&l| l == r.node)
                .ok_or_else(|| Error::Replay(format!("node {} is not present", r.node + 1)))?;
            if !removable(&cur, s, r.role) {
                return Err(Error::Replay(format!(
                    "node {} is not a removable {:?}",
                    r.node + 1,
                    r.role
                )));
            }
            cur = cur.without_node(s)?;
            labels.remove(s);
        }
        let key = cur.canonical_key()?;
        if key != self.base_graph_key {
            return Err(Error::Replay(format!(
                "chain ends at {key}, certificate names {}",
                self.base_graph_key
            )));
        }
        let ok = match self.base_reason {
            BaseReason::Cache => cache.certifies(&key),
            BaseReason::SufficientCondition => sufficient_odd_cycle(&cur, &NodeSet::new()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Replay(format!("base graph {key} is not certified")))
        }
    }
}
