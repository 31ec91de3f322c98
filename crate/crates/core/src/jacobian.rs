//! Exact Jacobian of `varphi_tilde` and the rank test for generic finite
//! identifiability.
//!
//! Writing `B = I − Λ`, each entry is `φ_ab = Σ_u B_au B_bu ψ_u − γ_a γ_b`, so
//!
//! * `∂φ_ab/∂ψ_u  = B_au B_bu`
//! * `∂φ_ab/∂λ_xy = −[x = a] B_by ψ_y − [x = b] B_ay ψ_y`
//! * `∂φ_ab/∂γ_u  = −[u = a] γ_b − [u = b] γ_a`
//!
//! These hold for any labelling of the DAG.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeSet, UGraph, MAX_CANONICAL_NODES};
use crate::linalg::{rat, Rat, RatMatrix};
use crate::maps::{derive_seed, sample_param_point, ParamKind, ParamPoint, DEFAULT_BOUND};

pub const DEFAULT_TRIALS: usize = 8;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RowLabel {
    Diag(usize),
    Edge(usize, usize),
    NonEdge(usize, usize),
}

impl RowLabel {
    pub fn pair(self) -> (usize, usize) {
        match self {
            RowLabel::Diag(v) => (v, v),
            RowLabel::Edge(v, w) | RowLabel::NonEdge(v, w) => (v, w),
        }
    }
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (v, w) = self.pair();
        write!(f, "({},{})", v + 1, w + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ColLabel {
    Psi(usize),
    Lambda(usize, usize),
    Gamma(usize),
}

impl fmt::Display for ColLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColLabel::Psi(v) => write!(f, "psi_{}", v + 1),
            ColLabel::Lambda(v, w) => write!(f, "lambda_{}_{}", v + 1, w + 1),
            ColLabel::Gamma(v) => write!(f, "gamma_{}", v + 1),
        }
    }
}

/// Rows: diagonal pairs, then edges, then non-adjacent pairs, each
/// lexicographic. Columns: `ψ`, then `λ` in edge order, then `γ` for
/// non-excluded nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacobianMatrix {
    pub matrix: RatMatrix,
    pub row_index: Vec<RowLabel>,
    pub col_index: Vec<ColLabel>,
}

impl JacobianMatrix {
    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    pub fn has_full_column_rank(&self) -> bool {
        self.rank() == self.col_index.len()
    }

    /// Rows and columns whose labels satisfy the predicates, in order.
    pub fn submatrix(
        &self,
        rows: impl Fn(&RowLabel) -> bool,
        cols: impl Fn(&ColLabel) -> bool,
    ) -> RatMatrix {
        let r: Vec<usize> = (0..self.row_index.len())
            .filter(|&i| rows(&self.row_index[i]))
            .collect();
        let c: Vec<usize> = (0..self.col_index.len())
            .filter(|&j| cols(&self.col_index[j]))
            .collect();
        self.matrix.select(&r, &c)
    }

    /// Matrix text format with a column-label comment and a `# row (v,w)`
    /// comment ahead of every row.
    pub fn to_text(&self) -> String {
        let cols: Vec<String> = self.col_index.iter().map(ToString::to_string).collect();
        let mut s = format!("# cols {}\n", cols.join(" "));
        s.push_str(&format!("{} {}\n", self.matrix.rows(), self.matrix.cols()));
        for (i, label) in self.row_index.iter().enumerate() {
            s.push_str(&format!("# row {label}\n"));
            let row: Vec<String> = self.matrix.row(i).iter().map(ToString::to_string).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

pub fn row_labels(g: &Dag) -> Vec<RowLabel> {
    let m = g.m();
    let mut rows: Vec<RowLabel> = (0..m).map(RowLabel::Diag).collect();
    rows.extend(
        g.edges()
            .iter()
            .map(|&(v, w)| RowLabel::Edge(v.min(w), v.max(w))),
    );
    rows[m..].sort();
    for v in 0..m {
        for w in v + 1..m {
            if !g.adjacent(v, w) {
                rows.push(RowLabel::NonEdge(v, w));
            }
        }
    }
    rows
}

pub fn col_labels(g: &Dag, excluded: &NodeSet) -> Vec<ColLabel> {
    let m = g.m();
    let mut cols: Vec<ColLabel> = (0..m).map(ColLabel::Psi).collect();
    cols.extend(g.edges().iter().map(|&(v, w)| ColLabel::Lambda(v, w)));
    cols.extend(
        (0..m)
            .filter(|v| !excluded.contains(v))
            .map(ColLabel::Gamma),
    );
    cols
}

/// Jacobian of `varphi_tilde` at a concentration point. `γ` columns are
/// omitted for the point's excluded nodes.
pub fn build_jacobian(g: &Dag, p: &ParamPoint) -> Result<JacobianMatrix> {
    if p.kind != ParamKind::Concentration {
        return Err(Error::KindMismatch {
            expected: "concentration".into(),
            found: "covariance".into(),
        });
    }
    p.validate(g)?;
    let m = g.m();
    let b = &RatMatrix::identity(m) - &p.lambda_matrix(m);
    let psi = &p.diag;
    let gamma = &p.loading;
    let row_index = row_labels(g);
    let col_index = col_labels(g, &p.excluded);
    let mut matrix = RatMatrix::zeros(row_index.len(), col_index.len());
    for (i, row) in row_index.iter().enumerate() {
        let (a, c) = row.pair();
        for (j, col) in col_index.iter().enumerate() {
            let x = match *col {
                ColLabel::Psi(u) => b.get(a, u) * b.get(c, u),
                ColLabel::Lambda(x, y) => {
                    let mut d = Rat::from_integer(0.into());
                    if x == a {
                        d -= b.get(c, y) * &psi[y];
                    }
                    if x == c {
                        d -= b.get(a, y) * &psi[y];
                    }
                    d
                }
                ColLabel::Gamma(u) => {
                    let mut d = Rat::from_integer(0.into());
                    if u == a {
                        d -= &gamma[c];
                    }
                    if u == c {
                        d -= &gamma[a];
                    }
                    d
                }
            };
            matrix.set(i, j, x);
        }
    }
    Ok(JacobianMatrix {
        matrix,
        row_index,
        col_index,
    })
}

fn binom2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// `C(m+1, 2) − 2m ≥ |E|`.
pub fn edge_bound_ok(g: &Dag) -> bool {
    edge_bound_ok_excluding(g, 0)
}

/// The bound with `excluded` fewer loading parameters.
pub fn edge_bound_ok_excluding(g: &Dag, excluded: usize) -> bool {
    let m = g.m();
    binom2(m + 1) + excluded.min(m) >= 2 * m + g.edge_count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecideConfig {
    pub seed: u64,
    pub bound: u64,
    pub trials: usize,
}

impl Default for DecideConfig {
    fn default() -> Self {
        DecideConfig {
            seed: DEFAULT_SEED,
            bound: DEFAULT_BOUND,
            trials: DEFAULT_TRIALS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    IdentifiableCertified,
    NotIdentifiableProbable,
    EdgeBoundViolated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Present iff the status is `IdentifiableCertified`.
    pub witness: Option<ParamPoint>,
    /// Rank at the witness, or the largest rank seen.
    pub rank_observed: usize,
    pub columns: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Verdict {
    pub fn identifiable(&self) -> bool {
        self.status == Status::IdentifiableCertified
    }
}

/// Label for the per-graph random stream: the canonical key when the graph
/// is small enough, else the edge list, followed by the excluded nodes.
fn stream_label(g: &Dag, excluded: &NodeSet) -> Vec<u8> {
    let mut label = if g.m() <= MAX_CANONICAL_NODES {
        g.canonical_key()
            .expect("m within canonical range")
            .as_bytes()
            .to_vec()
    } else {
        format!("{}:{}", g.m(), g.edge_string()).into_bytes()
    };
    if !excluded.is_empty() {
        label.push(b'|');
        label.extend(excluded.iter().map(|&v| v as u8));
    }
    label
}

/// Samples points until one gives full column rank or `trials` points fail.
/// Nodes of `excluded` outside the graph are ignored.
pub fn decide_generic_finite(g: &Dag, excluded: &NodeSet, config: &DecideConfig) -> Verdict {
    let excluded: NodeSet = excluded.iter().copied().filter(|&v| v < g.m()).collect();
    let columns = 2 * g.m() + g.edge_count() - excluded.len();
    let mut verdict = Verdict {
        status: Status::EdgeBoundViolated,
        witness: None,
        rank_observed: 0,
        columns,
        trials: 0,
        seed: config.seed,
    };
    if !edge_bound_ok_excluding(g, excluded.len()) {
        return verdict;
    }
    let bound = config.bound.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &stream_label(g, &excluded)));
    verdict.status = Status::NotIdentifiableProbable;
    for _ in 0..config.trials.max(1) {
        let p = sample_param_point(g, ParamKind::Concentration, &excluded, bound, &mut rng)
            .expect("validated bound and nodes");
        let j = build_jacobian(g, &p).expect("sampled point matches graph");
        let r = j.rank();
        verdict.trials += 1;
        verdict.rank_observed = verdict.rank_observed.max(r);
        if r == columns {
            verdict.status = Status::IdentifiableCertified;
            verdict.witness = Some(p);
            verdict.rank_observed = r;
            break;
        }
    }
    verdict
}

/// Exact rank of the Jacobian of `x ↦ (x_v x_w)_{vw ∈ H}` at a random point
/// with nonzero coordinates.
pub fn product_map_rank(h: &UGraph, seed: u64) -> usize {
    let m = h.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Rat> = (0..m)
        .map(|_| {
            let mag = rng.gen_range(1..=DEFAULT_BOUND as i64);
            rat(if rng.gen::<bool>() { mag } else { -mag })
        })
        .collect();
    let edges = h.edges();
    let mut jac = RatMatrix::zeros(edges.len(), m);
    for (i, &(v, w)) in edges.iter().enumerate() {
        jac.set(i, v, x[w].clone());
        jac.set(i, w, x[v].clone());
    }
    jac.rank()
}
