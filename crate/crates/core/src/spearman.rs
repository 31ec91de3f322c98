//! Tetrads, Spearman and coSpearman matrices, and the linear tetrad systems
//! of star-shaped graphs.
//!
//! A Spearman matrix is `Ω + δδᵀ` with `Ω` positive diagonal and `δ` without
//! zero entries; a coSpearman matrix is `Ψ − γγᵀ`, positive definite.

use itertools::Itertools;
use num_traits::{Signed, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{sqrt_exact, Rat, RatMatrix};

/// Quadruples `i < j < k < l` in lexicographic order.
pub fn quadruples(m: usize) -> impl Iterator<Item = [usize; 4]> {
    (0..m).combinations(4).map(|q| [q[0], q[1], q[2], q[3]])
}

fn tetrad_pair(u: &RatMatrix, [i, j, k, l]: [usize; 4]) -> [Rat; 2] {
    let ik_jl = u.get(i, k) * u.get(j, l);
    [
        u.get(i, j) * u.get(k, l) - &ik_jl,
        u.get(i, l) * u.get(j, k) - ik_jl,
    ]
}

/// Two tetrads per quadruple:
/// `(υ_ij υ_kl − υ_ik υ_jl, υ_il υ_jk − υ_ik υ_jl)`. The third is their
/// difference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TetradVector {
    pub m: usize,
    pub values: Vec<Rat>,
}

impl TetradVector {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }
}

pub fn tetrads(u: &RatMatrix) -> Result<TetradVector> {
    let m = u.rows();
    if !u.is_square() {
        return Err(Error::NotSquare {
            rows: u.rows(),
            cols: u.cols(),
        });
    }
    if m < 4 {
        return Err(Error::TooSmall { m, min: 4 });
    }
    let values = quadruples(m).flat_map(|q| tetrad_pair(u, q)).collect();
    Ok(TetradVector { m, values })
}

fn tetrads_containing(u: &RatMatrix, node: usize) -> Vec<Rat> {
    quadruples(u.rows())
        .filter(|q| q.contains(&node))
        .flat_map(|q| tetrad_pair(u, q))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Spearman,
    CoSpearman,
}

impl Kind {
    /// Sign every normalized off-diagonal entry must have.
    fn wants_positive(self) -> bool {
        self == Kind::Spearman
    }
}

/// Node signs `s` with `s_i s_j υ_ij` of the wanted sign for every `i ≠ j`,
/// fixed by `s_0 = +1`. `None` on a zero off-diagonal entry or an
/// inconsistent demand.
fn sign_normalization(u: &RatMatrix, kind: Kind) -> Option<Vec<i8>> {
    let m = u.rows();
    let want = |x: &Rat| {
        if kind.wants_positive() {
            x.is_positive()
        } else {
            x.is_negative()
        }
    };
    let mut s = vec![1i8; m];
    for (j, sj) in s.iter_mut().enumerate().skip(1) {
        let x = u.get(0, j);
        if x.is_zero() {
            return None;
        }
        if !want(x) {
            *sj = -1;
        }
    }
    for (i, j) in (1..m).tuple_combinations() {
        let x = u.get(i, j);
        let flipped = if s[i] * s[j] < 0 { -x } else { x.clone() };
        if !want(&flipped) {
            return None;
        }
    }
    Some(s)
}

fn normalized(u: &RatMatrix, s: &[i8]) -> RatMatrix {
    let m = u.rows();
    let mut n = u.clone();
    for i in 0..m {
        for j in 0..m {
            if s[i] * s[j] < 0 {
                n.set(i, j, -u.get(i, j));
            }
        }
    }
    n
}

/// `υ_ij υ_ik / υ_jk` for the first two indices `j < k` other than `i`.
fn triad_ratio(u: &RatMatrix, i: usize) -> Rat {
    let mut others = (0..u.rows()).filter(|&x| x != i);
    let j = others.next().expect("m >= 3");
    let k = others.next().expect("m >= 3");
    u.get(i, j) * u.get(i, k) / u.get(j, k)
}

fn membership(u: &RatMatrix, kind: Kind) -> Option<Vec<i8>> {
    let m = u.rows();
    if m < 3 || !u.is_square() || !u.is_symmetric() {
        return None;
    }
    let s = sign_normalization(u, kind)?;
    if !u.is_positive_definite() {
        return None;
    }
    if m == 3 {
        return direct_split(u, kind).map(|_| s);
    }
    let n = normalized(u, &s);
    if !tetrads(&n).ok()?.is_zero() {
        return None;
    }
    for (i, j, k) in (0..m).permutations(3).map(|p| (p[0], p[1], p[2])) {
        let d = n.get(i, i) * n.get(j, k) - n.get(i, k) * n.get(j, i);
        let ok = if kind.wants_positive() {
            d.is_positive()
        } else {
            d.is_negative()
        };
        if !ok {
            return None;
        }
    }
    Some(s)
}

/// `(diag_part, loading_sq)` when every entry is well defined and positive.
fn direct_split(u: &RatMatrix, kind: Kind) -> Option<(Vec<Rat>, Vec<Rat>)> {
    let m = u.rows();
    let mut diag = Vec::with_capacity(m);
    let mut sq = Vec::with_capacity(m);
    for i in 0..m {
        let r = triad_ratio(u, i);
        let l = if kind.wants_positive() { r } else { -r };
        if !l.is_positive() {
            return None;
        }
        let d = if kind.wants_positive() {
            u.get(i, i) - &l
        } else {
            u.get(i, i) + &l
        };
        if !d.is_positive() {
            return None;
        }
        diag.push(d);
        sq.push(l);
    }
    Some((diag, sq))
}

pub fn is_spearman(u: &RatMatrix) -> bool {
    membership(u, Kind::Spearman).is_some()
}

pub fn is_cospearman(u: &RatMatrix) -> bool {
    membership(u, Kind::CoSpearman).is_some()
}

fn ser_rats<S: Serializer>(v: &[Rat], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

fn ser_opt_rats<S: Serializer>(v: &Option<Vec<Rat>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_rats(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpearmanDecomposition {
    /// `Ω` or `Ψ`.
    #[serde(serialize_with = "ser_rats")]
    pub diag_part: Vec<Rat>,
    /// `δ_i²` or `γ_i²`.
    #[serde(serialize_with = "ser_rats")]
    pub loading_sq: Vec<Rat>,
    /// One of the two sign patterns; the other is its negation.
    pub loading_signs: Vec<i8>,
    /// Present when every `loading_sq` entry is a rational square.
    #[serde(serialize_with = "ser_opt_rats")]
    pub loading: Option<Vec<Rat>>,
}

impl SpearmanDecomposition {
    /// `diag_part ± loading loadingᵀ`, if the loading is rational.
    pub fn reconstruct(&self, spearman: bool) -> Option<RatMatrix> {
        let l = self.loading.as_ref()?;
        let d = RatMatrix::diagonal(&self.diag_part);
        let o = RatMatrix::outer(l);
        Some(if spearman { &d + &o } else { &d - &o })
    }

    /// Exact check against `u`, using squares of off-diagonal entries when
    /// the loading is irrational.
    fn matches(&self, u: &RatMatrix, spearman: bool) -> bool {
        if let Some(r) = self.reconstruct(spearman) {
            return &r == u;
        }
        let m = u.rows();
        (0..m).all(|i| {
            let d = if spearman {
                &self.diag_part[i] + &self.loading_sq[i]
            } else {
                &self.diag_part[i] - &self.loading_sq[i]
            };
            &d == u.get(i, i)
                && (0..m).filter(|&j| j != i).all(|j| {
                    let x = u.get(i, j);
                    x * x == &self.loading_sq[i] * &self.loading_sq[j]
                        && (self.loading_signs[i] * self.loading_signs[j] > 0)
                            == (x.is_positive() == spearman)
                })
        })
    }
}

fn decompose(u: &RatMatrix, kind: Kind) -> Option<SpearmanDecomposition> {
    let s = membership(u, kind)?;
    let (diag_part, loading_sq) = direct_split(u, kind)?;
    let loading = loading_sq
        .iter()
        .zip(&s)
        .map(|(q, &sign)| sqrt_exact(q).map(|r| if sign < 0 { -r } else { r }))
        .collect();
    let d = SpearmanDecomposition {
        diag_part,
        loading_sq,
        loading_signs: s,
        loading,
    };
    d.matches(u, kind == Kind::Spearman).then_some(d)
}

pub fn spearman_decompose(u: &RatMatrix) -> Result<SpearmanDecomposition> {
    decompose(u, Kind::Spearman).ok_or(Error::NotSpearman)
}

pub fn cospearman_decompose(u: &RatMatrix) -> Result<SpearmanDecomposition> {
    decompose(u, Kind::CoSpearman).ok_or(Error::NotCoSpearman)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarMode {
    /// Every edge points into the last node; `base` is a covariance matrix.
    Sink,
    /// Every edge leaves the first node; `base` is a concentration matrix.
    Source,
}

/// The system `C λ = c` whose solution is the edge coefficients of a star.
///
/// In sink mode the tetrads of `(I − Λᵀ) base (I − Λ)` over quadruples
/// containing the last node are affine in `λ`; in source mode the same holds
/// for `(I + Λ) base (I + Λᵀ)` over quadruples containing the first node.
/// Columns follow the edge order of `g`.
pub fn tetrad_linear_system(
    g: &Dag,
    mode: StarMode,
    base: &RatMatrix,
) -> Result<(RatMatrix, Vec<Rat>)> {
    let m = g.m();
    if m < 4 {
        return Err(Error::TooSmall { m, min: 4 });
    }
    if base.rows() != m || base.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} base for a {m}-node graph",
            base.rows(),
            base.cols()
        )));
    }
    if !base.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let hub = match mode {
        StarMode::Sink => m - 1,
        StarMode::Source => 0,
    };
    let fits = g.edges().iter().all(|&(v, w)| match mode {
        StarMode::Sink => w == hub,
        StarMode::Source => v == hub,
    });
    if !fits {
        return Err(Error::ShapeMismatch(match mode {
            StarMode::Sink => format!("every edge must point into node {m}"),
            StarMode::Source => "every edge must leave node 1".to_string(),
        }));
    }
    let transformed = |unit: Option<usize>| -> RatMatrix {
        let mut l = RatMatrix::zeros(m, m);
        if let Some(e) = unit {
            let (v, w) = g.edges()[e];
            l.set(v, w, Rat::from_integer(1.into()));
        }
        let id = RatMatrix::identity(m);
        match mode {
            StarMode::Sink => {
                let b = &id - &l;
                &(&b.transpose() * base) * &b
            }
            StarMode::Source => {
                let b = &id + &l;
                &(&b * base) * &b.transpose()
            }
        }
    };
    let t0 = tetrads_containing(&transformed(None), hub);
    let mut c_mat = RatMatrix::zeros(t0.len(), g.edge_count());
    for e in 0..g.edge_count() {
        let te = tetrads_containing(&transformed(Some(e)), hub);
        for (r, (a, b)) in te.iter().zip(&t0).enumerate() {
            c_mat.set(r, e, b - a);
        }
    }
    Ok((c_mat, t0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rat, ratio};
    use crate::maps::{phi, varphi, ParamKind, ParamPoint};

    fn ints(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rat(x)).collect()
    }

    fn spearman_of(diag: &[i64], load: &[i64]) -> RatMatrix {
        &RatMatrix::diagonal(&ints(diag)) + &RatMatrix::outer(&ints(load))
    }

    fn cospearman_of(diag: &[i64], load: &[i64]) -> RatMatrix {
        &RatMatrix::diagonal(&ints(diag)) - &RatMatrix::outer(&ints(load))
    }

    #[test]
    fn tetrad_examples() {
        let i4 = RatMatrix::identity(4);
        let t = tetrads(&(&i4 + &RatMatrix::outer(&ints(&[1, 1, 1, 1])))).unwrap();
        assert_eq!(t.values.len(), 2);
        assert!(t.is_zero());
        assert!(tetrads(&i4).unwrap().is_zero());
        assert!(tetrads(&spearman_of(&[1, 2, 3, 4], &[1, 2, 3, 4]))
            .unwrap()
            .is_zero());
        assert_eq!(tetrads(&RatMatrix::identity(6)).unwrap().values.len(), 30);
        assert_eq!(
            tetrads(&RatMatrix::identity(3)),
            Err(Error::TooSmall { m: 3, min: 4 })
        );
    }

    #[test]
    fn third_tetrad_is_the_difference() {
        let u = RatMatrix::from_ints(&[[9, 1, 2, 3], [1, 9, 5, 7], [2, 5, 9, 11], [3, 7, 11, 9]]);
        let t = tetrads(&u).unwrap();
        let third = u.get(0, 1) * u.get(2, 3) - u.get(0, 3) * u.get(1, 2);
        assert_eq!(&t.values[0] - &t.values[1], third);
    }

    #[test]
    fn spearman_membership_examples() {
        assert!(is_spearman(&RatMatrix::from_ints(&[
            [2, 1, 1],
            [1, 2, 1],
            [1, 1, 2]
        ])));
        assert!(!is_spearman(&RatMatrix::identity(4)));
        assert!(is_spearman(&spearman_of(&[1, 1, 1, 1], &[1, -2, 3, -4])));
    }

    #[test]
    fn cospearman_membership_examples() {
        let c = RatMatrix::from_ints(&[[3, -1, -1], [-1, 3, -1], [-1, -1, 3]]);
        assert!(is_cospearman(&c));
        assert!(!is_cospearman(&RatMatrix::identity(4)));
        assert!(!is_cospearman(&RatMatrix::from_ints(&[
            [2, 1, 1],
            [1, 2, 1],
            [1, 1, 2]
        ])));
    }

    #[test]
    fn spearman_decomposition_examples() {
        let d =
            spearman_decompose(&RatMatrix::from_ints(&[[2, 1, 1], [1, 2, 1], [1, 1, 2]])).unwrap();
        assert_eq!(d.diag_part, ints(&[1, 1, 1]));
        assert_eq!(d.loading_sq, ints(&[1, 1, 1]));

        let u = RatMatrix::from_ints(&[[2, 2, 3], [2, 5, 6], [3, 6, 10]]);
        let d = spearman_decompose(&u).unwrap();
        assert_eq!(d.loading_sq, ints(&[1, 4, 9]));
        assert_eq!(d.diag_part, ints(&[1, 1, 1]));
        assert_eq!(d.loading, Some(ints(&[1, 2, 3])));
        assert_eq!(d.reconstruct(true), Some(u));

        assert_eq!(
            spearman_decompose(&RatMatrix::identity(4)),
            Err(Error::NotSpearman)
        );
    }

    #[test]
    fn cospearman_decomposition_examples() {
        let d = cospearman_decompose(&RatMatrix::from_ints(&[
            [3, -1, -1],
            [-1, 3, -1],
            [-1, -1, 3],
        ]))
        .unwrap();
        assert_eq!(d.diag_part, ints(&[4, 4, 4]));
        assert_eq!(d.loading_sq, ints(&[1, 1, 1]));

        let bad = cospearman_of(&[2, 5, 10], &[1, 2, 3]);
        assert!(!bad.is_positive_definite());
        assert!(!is_cospearman(&bad));

        // γᵀΨ⁻¹γ = 5/4 > 1: det = −129
        let bad = cospearman_of(&[3, 9, 19], &[1, 2, 3]);
        assert_eq!(bad.det().unwrap(), rat(-129));
        assert!(!is_cospearman(&bad));

        // γᵀΨ⁻¹γ = 3/4
        let u = cospearman_of(&[4, 16, 36], &[1, 2, 3]);
        assert_eq!(
            u,
            RatMatrix::from_ints(&[[3, -2, -3], [-2, 12, -6], [-3, -6, 27]])
        );
        assert!(u.is_positive_definite());
        let d = cospearman_decompose(&u).unwrap();
        assert_eq!(d.loading_sq, ints(&[1, 4, 9]));
        assert_eq!(d.diag_part, ints(&[4, 16, 36]));
        assert_eq!(d.reconstruct(false), Some(u));
    }

    #[test]
    fn irrational_loading_is_checked_by_squares() {
        // I + 2·𝟙𝟙ᵀ, so δ_i = √2
        let v = spearman_of(&[1, 1, 1, 1], &[1, 1, 1, 1]);
        let v = &v + &(&v - &RatMatrix::identity(4));
        let d = spearman_decompose(&v).unwrap();
        assert_eq!(d.loading, None);
        assert_eq!(d.loading_sq, ints(&[2, 2, 2, 2]));
        assert_eq!(d.diag_part, ints(&[1, 1, 1, 1]));
    }

    #[test]
    fn perturbation_breaks_membership() {
        let mut u = spearman_of(&[1, 2, 3, 4], &[1, 2, 3, 4]);
        let x = u.get(0, 1) + ratio(1, 7);
        u.set(0, 1, x.clone());
        u.set(1, 0, x);
        assert!(!tetrads(&u).unwrap().is_zero());
        assert!(!is_spearman(&u));
    }

    #[test]
    fn sink_star_recovers_lambda() {
        let g = Dag::from_one_based(4, &[(1, 4), (2, 4)]).unwrap();
        let lambda = [((0, 3), ratio(3, 2)), ((1, 3), rat(-5))]
            .into_iter()
            .collect();
        let p = ParamPoint::new(
            ParamKind::Covariance,
            lambda,
            ints(&[2, 3, 5, 7]),
            ints(&[1, -2, 3, 4]),
        );
        let base = phi(&g, &p).unwrap();
        let (c, rhs) = tetrad_linear_system(&g, StarMode::Sink, &base).unwrap();
        assert_eq!(c.rows(), 2);
        assert_eq!(c.rank(), 2);
        let sol = c.solve_unique(&rhs).unwrap().unwrap();
        assert_eq!(sol, vec![ratio(3, 2), rat(-5)]);
    }

    #[test]
    fn source_star_recovers_lambda() {
        let g = Dag::from_one_based(4, &[(1, 2), (1, 3)]).unwrap();
        let lambda = [((0, 1), rat(2)), ((0, 2), ratio(-1, 3))]
            .into_iter()
            .collect();
        let p = ParamPoint::new(
            ParamKind::Concentration,
            lambda,
            ints(&[11, 13, 17, 19]),
            ints(&[1, 2, -1, 3]),
        );
        let base = varphi(&g, &p).unwrap();
        let (c, rhs) = tetrad_linear_system(&g, StarMode::Source, &base).unwrap();
        let sol = c.solve_unique(&rhs).unwrap().unwrap();
        assert_eq!(sol, vec![rat(2), ratio(-1, 3)]);
    }

    #[test]
    fn empty_star_is_consistency_check() {
        let g = Dag::empty(4);
        let base = spearman_of(&[1, 2, 3, 4], &[1, 1, 2, 3]);
        let (c, rhs) = tetrad_linear_system(&g, StarMode::Sink, &base).unwrap();
        assert_eq!(c.cols(), 0);
        assert!(rhs.iter().all(Zero::is_zero));
    }

    #[test]
    fn star_shape_is_enforced() {
        let g = Dag::from_one_based(4, &[(1, 2), (2, 4)]).unwrap();
        let base = RatMatrix::identity(4);
        assert!(matches!(
            tetrad_linear_system(&g, StarMode::Sink, &base),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            tetrad_linear_system(&g, StarMode::Source, &base),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
