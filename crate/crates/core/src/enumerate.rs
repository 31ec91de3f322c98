//! Exhaustive classification of small unlabeled DAGs.
//!
//! Every DAG has a topological labelling, so the upper-triangular edge
//! subsets hit every isomorphism class; deduplication is by canonical key.
//! Only graphs within the edge bound `|E| ≤ C(m+1,2) − 2m` are considered.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    necessary_condition, subgraph_extension, sufficient_odd_cycle, wermuth_condition, CacheEntry,
    ExtensionOptions, Provenance, VerdictCache,
};
use crate::error::{Error, Result};
use crate::graph::{CanonicalKey, Dag, NodeSet};
use crate::jacobian::{decide_generic_finite, DecideConfig, Status};

pub const MIN_NODES: usize = 3;
pub const MAX_ENUM_NODES: usize = 7;
pub const MAX_CLASSIFY_NODES: usize = 6;

/// `C(m+1, 2) − 2m`.
pub fn max_edges(m: usize) -> usize {
    (m + 1) * m / 2 - 2 * m
}

fn check_range(m: usize, max: usize) -> Result<()> {
    if m < MIN_NODES {
        return Err(Error::TooSmall { m, min: MIN_NODES });
    }
    if m > max {
        return Err(Error::TooLarge { m, max });
    }
    Ok(())
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// One representative per isomorphism class, topologically labelled, in
/// canonical-key order.
pub fn enumerate_unlabeled_dags(m: usize) -> Result<Vec<(CanonicalKey, Dag)>> {
    check_range(m, MAX_ENUM_NODES)?;
    let pairs: Vec<(usize, usize)> = (0..m).tuple_combinations().collect();
    let limit = max_edges(m) as u32;
    let keys: BTreeSet<CanonicalKey> = (0u32..1 << pairs.len())
        .into_par_iter()
        .filter(|mask| mask.count_ones() <= limit)
        .map(|mask| {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            Dag::new(m, &edges)
                .and_then(|g| g.canonical_key())
                .expect("upper-triangular edges are acyclic")
        })
        .collect();
    keys.into_iter()
        .map(|k| {
            let g = k.to_dag()?.topologically_relabeled();
            Ok((k, g))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub decide: DecideConfig,
    /// `None` uses the global thread pool.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassificationRow {
    pub key: CanonicalKey,
    pub m: usize,
    pub edge_count: usize,
    /// Representative, as `1>2;1>3`.
    pub edges: String,
    pub suff: bool,
    pub wermuth: bool,
    pub nec: bool,
    pub jacobian: Status,
    /// `None` until gap analysis has run on the row.
    pub extension_certified: Option<bool>,
}

impl ClassificationRow {
    pub fn identifiable(&self) -> bool {
        self.jacobian == Status::IdentifiableCertified
    }

    pub fn in_gap(&self) -> bool {
        self.identifiable() && !self.suff
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Counts {
    pub m: usize,
    pub total: usize,
    pub jacobian_identifiable: usize,
    pub jacobian_nonidentifiable: usize,
    pub suff: usize,
    pub wermuth: usize,
    pub nec_violated: usize,
    pub gap: usize,
    /// Filled by gap analysis.
    pub extension_certified_in_gap: Option<usize>,
    /// Jacobian-negative graphs that satisfy the necessary condition, as
    /// canonical keys. These rest on sampling evidence alone.
    pub probable_only_negatives: Vec<String>,
}

impl Table1Counts {
    pub fn summary_line(&self) -> String {
        format!(
            "total={} identifiable={} suff={} wermuth={} nec_violated={}",
            self.total, self.jacobian_identifiable, self.suff, self.wermuth, self.nec_violated
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub m: usize,
    /// Sorted by key.
    pub rows: Vec<ClassificationRow>,
    pub representatives: Vec<Dag>,
    pub counts: Table1Counts,
}

fn classify_one(key: &CanonicalKey, g: &Dag, decide: &DecideConfig) -> Result<ClassificationRow> {
    let none = NodeSet::new();
    let suff = sufficient_odd_cycle(g, &none);
    let wermuth = wermuth_condition(g);
    let nec = necessary_condition(g, &none).holds;
    let jacobian = decide_generic_finite(g, &none, decide).status;
    let row = ClassificationRow {
        key: key.clone(),
        m: g.m(),
        edge_count: g.edge_count(),
        edges: g.edge_string(),
        suff,
        wermuth,
        nec,
        jacobian,
        extension_certified: None,
    };
    let breach = |message: &str| {
        Err(Error::Consistency {
            key: key.to_hex(),
            message: message.into(),
        })
    };
    if suff && !row.identifiable() {
        return breach("odd-cycle condition holds but no full-rank point was found");
    }
    if wermuth && !suff {
        return breach("Wermuth condition holds but the odd-cycle condition fails");
    }
    if !nec && row.identifiable() {
        return breach("necessary condition fails but the Jacobian has full rank");
    }
    Ok(row)
}

/// Applies every criterion and the Jacobian decision to each graph.
pub fn classify_all(m: usize, config: &ClassifyConfig) -> Result<Classification> {
    check_range(m, MAX_CLASSIFY_NODES)?;
    let decide = config.decide;
    let (rows, representatives) = with_workers(config.workers, || -> Result<_> {
        let graphs = enumerate_unlabeled_dags(m)?;
        let rows = graphs
            .par_iter()
            .map(|(k, g)| classify_one(k, g, &decide))
            .collect::<Result<Vec<_>>>()?;
        Ok((rows, graphs.into_iter().map(|(_, g)| g).collect::<Vec<_>>()))
    })?;
    let counts = tally(m, &rows);
    Ok(Classification {
        m,
        rows,
        representatives,
        counts,
    })
}

fn tally(m: usize, rows: &[ClassificationRow]) -> Table1Counts {
    let count = |f: &dyn Fn(&ClassificationRow) -> bool| rows.iter().filter(|r| f(r)).count();
    let identifiable = count(&|r| r.identifiable());
    Table1Counts {
        m,
        total: rows.len(),
        jacobian_identifiable: identifiable,
        jacobian_nonidentifiable: rows.len() - identifiable,
        suff: count(&|r| r.suff),
        wermuth: count(&|r| r.wermuth),
        nec_violated: count(&|r| !r.nec),
        gap: count(&|r| r.in_gap()),
        extension_certified_in_gap: None,
        probable_only_negatives: rows
            .iter()
            .filter(|r| !r.identifiable() && r.nec)
            .map(|r| r.key.to_hex())
            .collect(),
    }
}

impl Classification {
    /// Every verdict, tagged `criteria` when the odd-cycle condition holds.
    pub fn verdict_cache(&self) -> VerdictCache {
        let mut cache = VerdictCache::new();
        for r in &self.rows {
            let provenance = if r.suff {
                Provenance::Criteria
            } else {
                Provenance::Jacobian
            };
            cache.insert(
                r.key.clone(),
                CacheEntry {
                    status: r.jacobian,
                    provenance,
                },
            );
        }
        cache
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct CsvRow<'a> {
            key: String,
            m: usize,
            edges: &'a str,
            suff: bool,
            wermuth: bool,
            nec: bool,
            jacobian: Status,
            extension: Option<bool>,
        }
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                key: r.key.to_hex(),
                m: r.m,
                edges: &r.edges,
                suff: r.suff,
                wermuth: r.wermuth,
                nec: r.nec,
                jacobian: r.jacobian,
                extension: r.extension_certified,
            })
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GapReport {
    pub m: usize,
    pub gap_size: usize,
    pub extension_certified: usize,
    /// Certified positives of the smaller size that were usable.
    pub cache_graphs_used: usize,
    /// Jacobian-negative graphs the extension search would certify.
    pub disagreements: Vec<String>,
}

/// Runs the extension search on every gap graph, and on every
/// Jacobian-negative graph as a cross-check, against the smaller graphs that
/// are identifiable but fail the odd-cycle condition.
pub fn gap_analysis(class: &mut Classification, cache_lower: &VerdictCache) -> Result<GapReport> {
    let m = class.m;
    if !cache_lower.entries.keys().any(|k| k.m() + 1 == m) {
        return Err(Error::MissingCache { m: m - 1 });
    }
    let mut usable = VerdictCache::new();
    for (k, e) in &cache_lower.entries {
        if k.m() + 1 == m
            && e.status == Status::IdentifiableCertified
            && e.provenance == Provenance::Jacobian
        {
            usable.insert(k.clone(), *e);
        }
    }
    let opts = ExtensionOptions {
        max_depth: None,
        sufficient_fallback: false,
    };
    let outcomes: Vec<Option<bool>> = class
        .rows
        .par_iter()
        .zip(&class.representatives)
        .map(|(r, g)| {
            if r.suff {
                return Ok(None);
            }
            match subgraph_extension(g, &usable, &opts) {
                Some(cert) => {
                    cert.replay(g, &usable)?;
                    Ok(Some(true))
                }
                None => Ok(Some(false)),
            }
        })
        .collect::<Result<_>>()?;
    let mut report = GapReport {
        m,
        gap_size: 0,
        extension_certified: 0,
        cache_graphs_used: usable.len(),
        disagreements: Vec::new(),
    };
    for (r, o) in class.rows.iter_mut().zip(outcomes) {
        r.extension_certified = o;
        if r.in_gap() {
            report.gap_size += 1;
            if o == Some(true) {
                report.extension_certified += 1;
            }
        } else if !r.identifiable() && o == Some(true) {
            report.disagreements.push(r.key.to_hex());
        }
    }
    class.counts.extension_certified_in_gap = Some(report.extension_certified);
    Ok(report)
}

/// Labelled DAGs within the edge bound: each unordered pair absent or
/// oriented either way, acyclic combinations only.
pub fn labeled_dags(m: usize) -> Result<Vec<Dag>> {
    check_range(m, 5)?;
    let pairs: Vec<(usize, usize)> = (0..m).tuple_combinations().collect();
    let limit = max_edges(m);
    let total = 3usize.pow(pairs.len() as u32);
    let dags = (0..total)
        .into_par_iter()
        .filter_map(|mut code| {
            let mut edges = Vec::new();
            for &(v, w) in &pairs {
                match code % 3 {
                    1 => edges.push((v, w)),
                    2 => edges.push((w, v)),
                    _ => {}
                }
                code /= 3;
            }
            if edges.len() > limit {
                return None;
            }
            Dag::new(m, &edges).ok()
        })
        .collect();
    Ok(dags)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarkovReport {
    pub m: usize,
    pub labeled_dags: usize,
    pub classes: usize,
    /// Classes whose members received different verdicts, as edge strings.
    pub heterogeneous: Vec<Vec<String>>,
}

/// Decides every labelled DAG and checks that Markov-equivalent graphs,
/// grouped by skeleton and v-structures, share a verdict.
pub fn markov_homogeneity(m: usize, config: &ClassifyConfig) -> Result<MarkovReport> {
    let decide = config.decide;
    with_workers(config.workers, || {
        let dags = labeled_dags(m)?;
        let none = NodeSet::new();
        let verdicts: Vec<Status> = dags
            .par_iter()
            .map(|g| decide_generic_finite(g, &none, &decide).status)
            .collect();
        type ClassKey = (Vec<(usize, usize)>, Vec<(usize, usize, usize)>);
        let mut classes: BTreeMap<ClassKey, Vec<usize>> = BTreeMap::new();
        for (i, g) in dags.iter().enumerate() {
            let key = (g.skeleton().edges(), g.v_structures().into_iter().collect());
            classes.entry(key).or_default().push(i);
        }
        let heterogeneous = classes
            .values()
            .filter(|members| members.iter().map(|&i| verdicts[i]).unique().count() > 1)
            .map(|members| members.iter().map(|&i| dags[i].edge_string()).collect())
            .collect();
        Ok(MarkovReport {
            m,
            labeled_dags: dags.len(),
            classes: classes.len(),
            heterogeneous,
        })
    })
}
