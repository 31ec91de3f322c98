//! Oracles shared by the property and acceptance suites.
use latent_ident::graph::NodeSet;
use latent_ident::linalg::{rat, Rat};
use latent_ident::maps::{ParamKind, ParamPoint};
use latent_ident::{Dag, RatMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonzero rational `p/q` with `|p| ≤ 40`, `1 ≤ q ≤ 9`.
pub fn nonzero_rat(r: &mut impl Rng) -> Rat {
    let p = r.gen_range(1..=40i64) * if r.gen() { 1 } else { -1 };
    Rat::new(p.into(), r.gen_range(1..=9i64).into())
}

pub fn positive_rat(r: &mut impl Rng) -> Rat {
    Rat::new(r.gen_range(1..=40i64).into(), r.gen_range(1..=9i64).into())
}

/// All DAGs on `m` nodes whose edges go from lower to higher labels.
pub fn upper_dags(m: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|v| (v + 1..m).map(move |w| (v, w)))
        .collect();
    (0u32..1 << pairs.len())
        .map(|mask| {
            let e: Vec<_> = (0..pairs.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| pairs[i])
                .collect();
            Dag::new(m, &e).unwrap()
        })
        .collect()
}

pub fn shuffled_labels(g: &Dag, r: &mut impl Rng) -> Dag {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..g.m()).collect();
    perm.shuffle(r);
    g.permuted(&perm)
}

/// Random DAG on `m` nodes, each pair joined with probability one half,
/// under a random labeling.
pub fn random_dag(m: usize, r: &mut impl Rng) -> Dag {
    let mut e = Vec::new();
    for v in 0..m {
        for w in v + 1..m {
            if r.gen() {
                e.push((v, w));
            }
        }
    }
    shuffled_labels(&Dag::new(m, &e).unwrap(), r)
}

/// Random rational point of either kind with every loading nonzero.
pub fn random_point(g: &Dag, kind: ParamKind, r: &mut impl Rng) -> ParamPoint {
    ParamPoint::new(
        kind,
        g.edges().iter().map(|&e| (e, nonzero_rat(r))).collect(),
        (0..g.m()).map(|_| positive_rat(r)).collect(),
        (0..g.m()).map(|_| nonzero_rat(r)).collect(),
    )
}

/// Flat variable vector `(ψ or ω, λ in edge order, loadings off `excluded`)`.
pub fn flatten(g: &Dag, p: &ParamPoint) -> Vec<Rat> {
    let mut x: Vec<Rat> = p.diag.clone();
    x.extend(g.edges().iter().map(|e| p.lambda[e].clone()));
    x.extend(
        p.loading
            .iter()
            .enumerate()
            .filter(|(v, _)| !p.excluded.contains(v))
            .map(|(_, l)| l.clone()),
    );
    x
}

fn unflatten(g: &Dag, kind: ParamKind, excluded: &NodeSet, x: &[Rat]) -> ParamPoint {
    let m = g.m();
    let ne = g.edge_count();
    let mut loading = vec![rat(0); m];
    let mut k = m + ne;
    for (v, l) in loading.iter_mut().enumerate() {
        if !excluded.contains(&v) {
            *l = x[k].clone();
            k += 1;
        }
    }
    ParamPoint {
        kind,
        lambda: g
            .edges()
            .iter()
            .copied()
            .zip(x[m..m + ne].iter().cloned())
            .collect(),
        diag: x[..m].to_vec(),
        loading,
        excluded: excluded.clone(),
    }
}

/// Row pairs: diagonal, then adjacent pairs, then non-adjacent pairs, each
/// lexicographic with `v < w`.
pub fn row_pairs(g: &Dag) -> Vec<(usize, usize)> {
    let m = g.m();
    let mut rows: Vec<(usize, usize)> = (0..m).map(|v| (v, v)).collect();
    for adjacent in [true, false] {
        for v in 0..m {
            for w in v + 1..m {
                if g.adjacent(v, w) == adjacent {
                    rows.push((v, w));
                }
            }
        }
    }
    rows
}

/// `(I − Λ) Ψ (I − Λᵀ) − γγᵀ` by explicit sums.
pub fn varphi_tilde_direct(g: &Dag, p: &ParamPoint) -> RatMatrix {
    let m = g.m();
    let b = |a: usize, u: usize| -> Rat {
        let id = if a == u { rat(1) } else { rat(0) };
        id - p.lambda.get(&(a, u)).cloned().unwrap_or_else(|| rat(0))
    };
    let mut out = RatMatrix::zeros(m, m);
    for a in 0..m {
        for c in 0..m {
            let mut s = -(&p.loading[a] * &p.loading[c]);
            for u in 0..m {
                s += b(a, u) * b(c, u) * &p.diag[u];
            }
            out.set(a, c, s);
        }
    }
    out
}

/// `A Ω Aᵀ + δδᵀ`-style covariance with `A = (I − Λᵀ)⁻¹` from Gauss–Jordan.
pub fn phi_tilde_by_inverse(g: &Dag, p: &ParamPoint) -> RatMatrix {
    let m = g.m();
    let mut l = RatMatrix::zeros(m, m);
    for (&(v, w), x) in &p.lambda {
        l.set(v, w, x.clone());
    }
    let a = (&RatMatrix::identity(m) - &l.transpose())
        .inverse()
        .unwrap();
    let inner = RatMatrix::diagonal(&p.diag);
    &(&(&a * &inner) * &a.transpose()) + &RatMatrix::outer(&p.loading)
}

/// `(I − Λᵀ)⁻¹ (Ω + δδᵀ) (I − Λ)⁻¹` with a Gauss–Jordan inverse.
pub fn phi_by_inverse(g: &Dag, p: &ParamPoint) -> RatMatrix {
    let m = g.m();
    let mut l = RatMatrix::zeros(m, m);
    for (&(v, w), x) in &p.lambda {
        l.set(v, w, x.clone());
    }
    let a = (&RatMatrix::identity(m) - &l.transpose())
        .inverse()
        .unwrap();
    let inner = &RatMatrix::diagonal(&p.diag) + &RatMatrix::outer(&p.loading);
    &(&a * &inner) * &a.transpose()
}

/// Jacobian by the five-point stencil
/// `f′(x) = [f(x−2) − 8 f(x−1) + 8 f(x+1) − f(x+2)] / 12`,
/// exact when `f` has degree at most 4 in each variable.
pub fn stencil_jacobian(f: impl Fn(&[Rat]) -> Vec<Rat>, x: &[Rat]) -> RatMatrix {
    let rows = f(x).len();
    let mut j = RatMatrix::zeros(rows, x.len());
    let at = |k: usize, h: i64| {
        let mut y = x.to_vec();
        y[k] += rat(h);
        f(&y)
    };
    for k in 0..x.len() {
        let (m2, m1, p1, p2) = (at(k, -2), at(k, -1), at(k, 1), at(k, 2));
        for r in 0..rows {
            let d = &m2[r] - rat(8) * &m1[r] + rat(8) * &p1[r] - &p2[r];
            j.set(r, k, d / rat(12));
        }
    }
    j
}

/// Stencil Jacobian of `varphi_tilde` in the closed form's row and column
/// order.
pub fn varphi_tilde_stencil(g: &Dag, p: &ParamPoint) -> RatMatrix {
    let rows = row_pairs(g);
    let f = |x: &[Rat]| {
        let q = unflatten(g, ParamKind::Concentration, &p.excluded, x);
        let s = varphi_tilde_direct(g, &q);
        rows.iter().map(|&(v, w)| s.get(v, w).clone()).collect()
    };
    stencil_jacobian(f, &flatten(g, p))
}

/// Stencil Jacobian of `phi_tilde` with the same row order.
pub fn phi_tilde_stencil(g: &Dag, p: &ParamPoint) -> RatMatrix {
    let rows = row_pairs(g);
    let f = |x: &[Rat]| {
        let q = unflatten(g, ParamKind::Covariance, &p.excluded, x);
        let s = phi_tilde_by_inverse(g, &q);
        rows.iter().map(|&(v, w)| s.get(v, w).clone()).collect()
    };
    stencil_jacobian(f, &flatten(g, p))
}

/// Unlabeled simple graphs on `n` nodes as adjacency bitmasks, one per
/// isomorphism class, grown by adding a vertex to each smaller class.
pub fn unlabeled_graphs(n: usize) -> Vec<Vec<u64>> {
    let mut classes: Vec<Vec<u64>> = vec![vec![]];
    for k in 1..=n {
        let mut seen = std::collections::BTreeSet::new();
        let mut next = Vec::new();
        for g in &classes {
            for nb in 0u64..1 << (k - 1) {
                let mut adj = g.clone();
                adj.push(nb);
                for (v, a) in adj.iter_mut().enumerate().take(k - 1) {
                    if nb >> v & 1 == 1 {
                        *a |= 1 << (k - 1);
                    }
                }
                if seen.insert(graph_canon(&adj)) {
                    next.push(adj);
                }
            }
        }
        classes = next;
    }
    classes
}

/// Minimum upper-triangle code over permutations that list vertices by
/// nondecreasing degree; the restriction is itself isomorphism invariant.
fn graph_canon(adj: &[u64]) -> (Vec<u32>, u64) {
    use itertools::Itertools;
    let n = adj.len();
    let deg: Vec<u32> = adj.iter().map(|a| a.count_ones()).collect();
    let mut sorted = deg.clone();
    sorted.sort_unstable();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for d in sorted.iter().dedup() {
        groups.push((0..n).filter(|&v| deg[v] == *d).collect());
    }
    let mut best = u64::MAX;
    let orders = groups
        .iter()
        .map(|g| g.iter().copied().permutations(g.len()).collect::<Vec<_>>())
        .multi_cartesian_product();
    for parts in orders {
        let order: Vec<usize> = parts.concat();
        let mut code = 0u64;
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if adj[order[i]] >> order[j] & 1 == 1 {
                    code |= 1 << bit;
                }
                bit += 1;
            }
        }
        best = best.min(code);
    }
    if n == 0 {
        best = 0;
    }
    (sorted, best)
}

pub fn is_connected(adj: &[u64]) -> bool {
    let n = adj.len();
    if n == 0 {
        return false;
    }
    let mut seen = 1u64;
    let mut frontier = 1u64;
    while frontier != 0 {
        let mut next = 0;
        for (v, nb) in adj.iter().enumerate() {
            if frontier >> v & 1 == 1 {
                next |= nb;
            }
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen.count_ones() as usize == n
}
