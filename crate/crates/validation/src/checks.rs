//! Exact-equality checks over seeded random instances. Each returns a
//! description of the first mismatch.

use crate::oracles::*;
use latent_ident::graph::NodeSet;
use latent_ident::jacobian::{build_jacobian, product_map_rank};
use latent_ident::linalg::{rat, Rat};
use latent_ident::maps::{
    g_map, h_map, phi, phi_tilde, recover_lambda_omega, rho_map, varphi, varphi_tilde, ParamKind,
    ParamPoint,
};
use latent_ident::spearman::{
    cospearman_decompose, is_cospearman, is_spearman, spearman_decompose, tetrads,
};
use latent_ident::{Dag, RatMatrix, UGraph};
use rand::Rng;

pub type Check = Result<(), String>;

fn same<T: PartialEq + std::fmt::Debug>(what: &str, a: T, b: T) -> Check {
    if a == b {
        Ok(())
    } else {
        Err(format!("{what}: {a:?} != {b:?}"))
    }
}

fn holds(what: &str, ok: bool) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

pub fn graph_and_point(seed: u64, kind: ParamKind) -> (Dag, ParamPoint) {
    let mut r = rng(seed);
    let m = r.gen_range(3..=6);
    let g = random_dag(m, &mut r);
    let p = random_point(&g, kind, &mut r);
    (g, p)
}

fn inner(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Ω` and `δ` for a Spearman matrix on 3 to 7 nodes.
pub fn spearman_instance(seed: u64) -> (Vec<Rat>, Vec<Rat>) {
    let mut r = rng(seed);
    let m = r.gen_range(3..=7);
    (
        (0..m).map(|_| positive_rat(&mut r)).collect(),
        (0..m).map(|_| nonzero_rat(&mut r)).collect(),
    )
}

/// `Ψ` and `γ` with `ψ_i > m γ_i²`, so `γᵀΨ⁻¹γ < 1` and `Ψ − γγᵀ` is
/// positive definite.
pub fn cospearman_instance(seed: u64) -> (Vec<Rat>, Vec<Rat>) {
    let (extra, gamma) = spearman_instance(seed);
    let m = rat(gamma.len() as i64);
    let psi = gamma
        .iter()
        .zip(&extra)
        .map(|(g, e)| &m * g * g + e)
        .collect();
    (psi, gamma)
}

pub fn covariance_maps(seed: u64) -> Check {
    let (g, p) = graph_and_point(seed, ParamKind::Covariance);
    let direct = phi(&g, &p).map_err(|e| e.to_string())?;
    same("phi vs inverse oracle", &direct, &phi_by_inverse(&g, &p))?;
    let via_g = phi_tilde(&g, &g_map(&g, &p).unwrap()).unwrap();
    same("phi vs phi_tilde . g", &direct, &via_g)?;
    same(
        "phi_tilde vs inverse oracle",
        phi_tilde(&g, &p).unwrap(),
        phi_tilde_by_inverse(&g, &p),
    )
}

pub fn concentration_maps(seed: u64) -> Check {
    let (g, p) = graph_and_point(seed, ParamKind::Concentration);
    same(
        "varphi_tilde vs explicit sums",
        varphi_tilde(&g, &p).unwrap(),
        varphi_tilde_direct(&g, &p),
    )?;
    let via_h = varphi_tilde(&g, &h_map(&g, &p).unwrap()).unwrap();
    same("varphi vs varphi_tilde . h", varphi(&g, &p).unwrap(), via_h)
}

/// `phi⁻¹` against `(I − Λ)(Ω⁻¹ − w wᵀ / k)(I − Λᵀ)` with `w = Ω⁻¹δ` and
/// `k = 1 + δᵀw`, which needs no square root.
pub fn inverse_without_roots(seed: u64) -> Check {
    let (g, p) = graph_and_point(seed, ParamKind::Covariance);
    let w: Vec<Rat> = p.diag.iter().zip(&p.loading).map(|(o, d)| d / o).collect();
    let k = rat(1) + inner(&p.loading, &w);
    let psi: Vec<Rat> = p.diag.iter().map(|o| o.recip()).collect();
    let middle = &RatMatrix::diagonal(&psi) - &RatMatrix::outer(&w).scale(&k.recip());
    let b = &RatMatrix::identity(g.m()) - &p.lambda_matrix(g.m());
    let expected = &(&b * &middle) * &b.transpose();
    same(
        "phi inverse",
        phi(&g, &p).unwrap().inverse().unwrap(),
        expected,
    )
}

/// Scales `δ` by `s = 2t / (1 − q t²)`, `q = δᵀΩ⁻¹δ`, which makes
/// `k = ((1 + q t²) / (1 − q t²))²` a rational square, then compares
/// `phi⁻¹` with `varphi ∘ rho`.
pub fn inverse_through_rho(seed: u64) -> Check {
    let (g, mut p) = graph_and_point(seed, ParamKind::Covariance);
    let t = Rat::new(rng(!seed).gen_range(1..50i64).into(), 7.into());
    let w: Vec<Rat> = p.diag.iter().zip(&p.loading).map(|(o, d)| d / o).collect();
    let q = inner(&p.loading, &w);
    let denom = rat(1) - &q * &t * &t;
    if denom == rat(0) {
        return Ok(());
    }
    let s = rat(2) * &t / denom;
    p.loading = p.loading.iter().map(|d| d * &s).collect();
    let r = rho_map(&g, &p)
        .unwrap()
        .ok_or("rho undefined although k is a square")?;
    same(
        "phi inverse vs varphi . rho",
        phi(&g, &p).unwrap().inverse().unwrap(),
        varphi(&g, &r).unwrap(),
    )
}

pub fn lambda_omega_round_trip(seed: u64) -> Check {
    let (g, mut p) = graph_and_point(seed, ParamKind::Covariance);
    p.loading = vec![rat(0); g.m()];
    let (lambda, omega) =
        recover_lambda_omega(&g, &phi(&g, &p).unwrap()).map_err(|e| e.to_string())?;
    same("lambda", &lambda, &p.lambda)?;
    same("omega", &omega, &p.diag)
}

pub fn spearman_round_trip(seed: u64) -> Check {
    let (omega, delta) = spearman_instance(seed);
    let u = &RatMatrix::diagonal(&omega) + &RatMatrix::outer(&delta);
    holds("membership", is_spearman(&u))?;
    if delta.len() >= 4 {
        holds("tetrads vanish", tetrads(&u).unwrap().is_zero())?;
    }
    let d = spearman_decompose(&u).map_err(|e| e.to_string())?;
    same("diagonal part", &d.diag_part, &omega)?;
    let sq: Vec<Rat> = delta.iter().map(|x| x * x).collect();
    same("squared loadings", &d.loading_sq, &sq)?;
    same("reconstruction", d.reconstruct(true), Some(u))
}

pub fn cospearman_round_trip(seed: u64) -> Check {
    let (psi, gamma) = cospearman_instance(seed);
    let u = &RatMatrix::diagonal(&psi) - &RatMatrix::outer(&gamma);
    holds("positive definite", u.is_positive_definite())?;
    holds("membership", is_cospearman(&u))?;
    if gamma.len() >= 4 {
        holds("tetrads vanish", tetrads(&u).unwrap().is_zero())?;
    }
    let d = cospearman_decompose(&u).map_err(|e| e.to_string())?;
    same("diagonal part", &d.diag_part, &psi)?;
    let sq: Vec<Rat> = gamma.iter().map(|x| x * x).collect();
    same("squared loadings", &d.loading_sq, &sq)?;
    same("reconstruction", d.reconstruct(false), Some(u))
}

fn excluded_subsets(m: usize) -> [NodeSet; 4] {
    [
        NodeSet::new(),
        [0].into(),
        [m - 1].into(),
        [0, m / 2].into(),
    ]
}

/// Closed-form Jacobian against the stencil oracle on every DAG with
/// `2 ≤ m ≤ 5`, each under four excluded sets and a random labeling for
/// half of them. Returns the number of comparisons.
pub fn jacobian_matches_stencil_exhaustive(seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let mut n = 0;
    for m in 2..=5 {
        for g in upper_dags(m) {
            for excluded in excluded_subsets(m) {
                let g = if r.gen_bool(0.5) {
                    shuffled_labels(&g, &mut r)
                } else {
                    g.clone()
                };
                let mut p = random_point(&g, ParamKind::Concentration, &mut r);
                for &v in &excluded {
                    p.loading[v] = rat(0);
                }
                p.excluded = excluded;
                let closed = build_jacobian(&g, &p).map_err(|e| e.to_string())?;
                same(
                    &g.edge_string(),
                    &closed.matrix,
                    &varphi_tilde_stencil(&g, &p),
                )?;
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Two-coloring by search from node 0; the graph must be connected.
fn bipartite(adj: &[u64]) -> bool {
    let n = adj.len();
    let mut color = vec![None; n];
    let mut stack = vec![0usize];
    color[0] = Some(false);
    while let Some(v) = stack.pop() {
        let c = color[v].unwrap();
        for (w, cw) in color.iter_mut().enumerate() {
            if adj[v] >> w & 1 == 1 {
                match cw {
                    None => {
                        *cw = Some(!c);
                        stack.push(w);
                    }
                    Some(x) if *x == c => return false,
                    _ => {}
                }
            }
        }
    }
    true
}

/// Known counts of connected unlabeled graphs on 1 to 7 nodes.
pub const CONNECTED_GRAPH_COUNTS: [usize; 7] = [1, 1, 2, 6, 21, 112, 853];

/// Rank of the product map against `m − d` on every connected graph with at
/// most 7 nodes. Returns the number of graphs.
pub fn product_map_rank_exhaustive() -> Result<usize, String> {
    let mut total = 0;
    for n in 1..=7 {
        let connected: Vec<_> = unlabeled_graphs(n)
            .into_iter()
            .filter(|a| is_connected(a))
            .collect();
        same(
            &format!("connected graphs on {n} nodes"),
            connected.len(),
            CONNECTED_GRAPH_COUNTS[n - 1],
        )?;
        for (i, adj) in connected.iter().enumerate() {
            let mut h = UGraph::empty(n);
            for (v, nb) in adj.iter().enumerate() {
                for w in v + 1..n {
                    if nb >> w & 1 == 1 {
                        h.add_edge(v, w);
                    }
                }
            }
            let d = usize::from(bipartite(adj));
            same(
                &format!("rank on {adj:?}"),
                product_map_rank(&h, i as u64),
                n - d,
            )?;
            same(&format!("d on {adj:?}"), h.bipartite_component_count(), d)?;
        }
        total += connected.len();
    }
    Ok(total)
}
