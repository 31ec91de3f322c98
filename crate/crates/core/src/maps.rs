//! Parametrization maps of the one-latent-source model, evaluated exactly.
//!
//! Covariance side, on `(Λ, Ω, δ)`:
//! * `phi`       = `(I − Λᵀ)⁻¹ (Ω + δδᵀ) (I − Λ)⁻¹`
//! * `phi_tilde` = `(I − Λᵀ)⁻¹ Ω (I − Λ)⁻¹ + δδᵀ`
//!
//! Concentration side, on `(Λ, Ψ, γ)`:
//! * `varphi`       = `(I − Λ) (Ψ − γγᵀ) (I − Λᵀ)`
//! * `varphi_tilde` = `(I − Λ) Ψ (I − Λᵀ) − γγᵀ`
//!
//! `(I − Λ)⁻¹` is the finite sum `I + Λ + … + Λ^{m−1}` since `Λ` is
//! nilpotent for a DAG.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeSet};
use crate::linalg::{rat, sqrt_exact, Rat, RatMatrix};

/// Default half-width of the integer range parameters are drawn from.
pub const DEFAULT_BOUND: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// `(Λ, Ω, δ)`
    Covariance,
    /// `(Λ, Ψ, γ)`
    Concentration,
}

impl ParamKind {
    fn name(self) -> &'static str {
        match self {
            ParamKind::Covariance => "covariance",
            ParamKind::Concentration => "concentration",
        }
    }
}

/// Edge coefficients keyed by `(from, to)`.
pub type EdgeWeights = BTreeMap<(usize, usize), Rat>;

/// A point of the parameter domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamPoint {
    pub kind: ParamKind,
    /// Edge coefficients keyed by 0-based `(tail, head)`.
    pub lambda: EdgeWeights,
    /// `Ω` or `Ψ`.
    pub diag: Vec<Rat>,
    /// `δ` or `γ`.
    pub loading: Vec<Rat>,
    /// Nodes whose loading is pinned to zero.
    pub excluded: NodeSet,
}

impl ParamPoint {
    pub fn new(kind: ParamKind, lambda: EdgeWeights, diag: Vec<Rat>, loading: Vec<Rat>) -> Self {
        ParamPoint {
            kind,
            lambda,
            diag,
            loading,
            excluded: NodeSet::new(),
        }
    }

    /// Same coefficient for every edge of `g`.
    pub fn uniform_lambda(g: &Dag, value: Rat) -> EdgeWeights {
        g.edges().iter().map(|&e| (e, value.clone())).collect()
    }

    pub fn validate(&self, g: &Dag) -> Result<()> {
        let m = g.m();
        if self.lambda.len() != g.edge_count()
            || !g.edges().iter().all(|e| self.lambda.contains_key(e))
        {
            return Err(Error::EdgeMismatch(format!(
                "coefficients given for {} edges, graph has {}",
                self.lambda.len(),
                g.edge_count()
            )));
        }
        if self.diag.len() != m || self.loading.len() != m {
            return Err(Error::InvalidParam(format!(
                "expected vectors of length {m}, got {} and {}",
                self.diag.len(),
                self.loading.len()
            )));
        }
        if let Some(i) = self.diag.iter().position(|d| !d.is_positive()) {
            return Err(Error::InvalidParam(format!(
                "diagonal entry {} is not positive",
                i + 1
            )));
        }
        for &v in &self.excluded {
            if v >= m {
                return Err(Error::BadIndex { node: v + 1, m });
            }
            if !self.loading[v].is_zero() {
                return Err(Error::InvalidParam(format!(
                    "loading of excluded node {} is nonzero",
                    v + 1
                )));
            }
        }
        Ok(())
    }

    fn expect_kind(&self, kind: ParamKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.name().into(),
                found: self.kind.name().into(),
            });
        }
        Ok(())
    }

    pub fn lambda_matrix(&self, m: usize) -> RatMatrix {
        let mut l = RatMatrix::zeros(m, m);
        for (&(v, w), x) in &self.lambda {
            l.set(v, w, x.clone());
        }
        l
    }
}

impl Serialize for ParamPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Coefficient {
            from: usize,
            to: usize,
            value: String,
        }
        let lambda: Vec<Coefficient> = self
            .lambda
            .iter()
            .map(|(&(v, w), x)| Coefficient {
                from: v + 1,
                to: w + 1,
                value: x.to_string(),
            })
            .collect();
        let strings = |v: &[Rat]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
        let mut st = s.serialize_struct("ParamPoint", 5)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("lambda", &lambda)?;
        st.serialize_field("diag", &strings(&self.diag))?;
        st.serialize_field("loading", &strings(&self.loading))?;
        st.serialize_field(
            "excluded",
            &self.excluded.iter().map(|v| v + 1).collect::<Vec<_>>(),
        )?;
        st.end()
    }
}

/// `(I − L)⁻¹` for nilpotent `L`, as `I + L + … + L^{m−1}`.
pub fn neumann_inverse(l: &RatMatrix) -> RatMatrix {
    let m = l.rows();
    let mut sum = RatMatrix::identity(m);
    let mut power = RatMatrix::identity(m);
    for _ in 1..m {
        power = &power * l;
        if power.is_zero() {
            break;
        }
        sum = &sum + &power;
    }
    sum
}

fn prepared(g: &Dag, p: &ParamPoint, kind: ParamKind) -> Result<RatMatrix> {
    p.expect_kind(kind)?;
    p.validate(g)?;
    Ok(p.lambda_matrix(g.m()))
}

/// `(I − Λᵀ)⁻¹ (Ω + δδᵀ) (I − Λ)⁻¹`.
pub fn phi(g: &Dag, p: &ParamPoint) -> Result<RatMatrix> {
    let l = prepared(g, p, ParamKind::Covariance)?;
    let a = neumann_inverse(&l);
    let inner = &RatMatrix::diagonal(&p.diag) + &RatMatrix::outer(&p.loading);
    Ok(&(&a.transpose() * &inner) * &a)
}

/// `(I − Λᵀ)⁻¹ Ω (I − Λ)⁻¹ + δδᵀ`.
pub fn phi_tilde(g: &Dag, p: &ParamPoint) -> Result<RatMatrix> {
    let l = prepared(g, p, ParamKind::Covariance)?;
    let a = neumann_inverse(&l);
    let sigma_l = &(&a.transpose() * &RatMatrix::diagonal(&p.diag)) * &a;
    Ok(&sigma_l + &RatMatrix::outer(&p.loading))
}

/// `(I − Λ) (Ψ − γγᵀ) (I − Λᵀ)`.
pub fn varphi(g: &Dag, p: &ParamPoint) -> Result<RatMatrix> {
    let l = prepared(g, p, ParamKind::Concentration)?;
    let b = &RatMatrix::identity(g.m()) - &l;
    let inner = &RatMatrix::diagonal(&p.diag) - &RatMatrix::outer(&p.loading);
    Ok(&(&b * &inner) * &b.transpose())
}

/// `(I − Λ) Ψ (I − Λᵀ) − γγᵀ`.
pub fn varphi_tilde(g: &Dag, p: &ParamPoint) -> Result<RatMatrix> {
    let l = prepared(g, p, ParamKind::Concentration)?;
    let b = &RatMatrix::identity(g.m()) - &l;
    let k = &(&b * &RatMatrix::diagonal(&p.diag)) * &b.transpose();
    Ok(&k - &RatMatrix::outer(&p.loading))
}

/// `(Λ, Ω, δ) ↦ (Λ, Ω, (I − Λᵀ)⁻¹ δ)`, so that `phi = phi_tilde ∘ g`.
pub fn g_map(g: &Dag, p: &ParamPoint) -> Result<ParamPoint> {
    let l = prepared(g, p, ParamKind::Covariance)?;
    let a_t = neumann_inverse(&l).transpose();
    let mut out = p.clone();
    out.loading = a_t.mul_vec(&p.loading)?;
    Ok(out)
}

/// `(Λ, Ψ, γ) ↦ (Λ, Ψ, (I − Λ) γ)`, so that `varphi = varphi_tilde ∘ h`.
pub fn h_map(g: &Dag, p: &ParamPoint) -> Result<ParamPoint> {
    let l = prepared(g, p, ParamKind::Concentration)?;
    let b = &RatMatrix::identity(g.m()) - &l;
    let mut out = p.clone();
    out.loading = b.mul_vec(&p.loading)?;
    Ok(out)
}

/// `(Λ, Ω, δ) ↦ (Λ, Ω⁻¹, k^{-1/2} Ω⁻¹ δ)` with `k = 1 + δᵀ Ω⁻¹ δ`, which
/// satisfies `inv ∘ phi = varphi ∘ rho`. Returns `None` when `k` is not the
/// square of a rational.
pub fn rho_map(g: &Dag, p: &ParamPoint) -> Result<Option<ParamPoint>> {
    prepared(g, p, ParamKind::Covariance)?;
    let psi: Vec<Rat> = p.diag.iter().map(|d| d.recip()).collect();
    let psi_delta: Vec<Rat> = psi.iter().zip(&p.loading).map(|(a, b)| a * b).collect();
    let k: Rat = Rat::one()
        + p.loading
            .iter()
            .zip(&psi_delta)
            .map(|(a, b)| a * b)
            .sum::<Rat>();
    let Some(root) = sqrt_exact(&k) else {
        return Ok(None);
    };
    Ok(Some(ParamPoint {
        kind: ParamKind::Concentration,
        lambda: p.lambda.clone(),
        diag: psi,
        loading: psi_delta.iter().map(|x| x / &root).collect(),
        excluded: p.excluded.clone(),
    }))
}

/// Recovers `(Λ, Ω)` from `Σ_{|L} = (I − Λᵀ)⁻¹ Ω (I − Λ)⁻¹` by regressing
/// each node on its parents.
pub fn recover_lambda_omega(g: &Dag, sigma_l: &RatMatrix) -> Result<(EdgeWeights, Vec<Rat>)> {
    let m = g.m();
    if sigma_l.rows() != m || sigma_l.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix for a {m}-node graph",
            sigma_l.rows(),
            sigma_l.cols()
        )));
    }
    if !sigma_l.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let mut lambda = BTreeMap::new();
    let mut omega = Vec::with_capacity(m);
    for v in 0..m {
        let pa: Vec<usize> = g.parents(v)?.into_iter().collect();
        let var = sigma_l.get(v, v).clone();
        if pa.is_empty() {
            omega.push(var);
            continue;
        }
        let s_pp = sigma_l.principal(&pa);
        let s_pv: Vec<Rat> = pa.iter().map(|&p| sigma_l.get(p, v).clone()).collect();
        let inv = s_pp
            .inverse()
            .map_err(|_| Error::SingularSubmatrix { node: v + 1 })?;
        let coef = inv.mul_vec(&s_pv)?;
        let explained: Rat = s_pv.iter().zip(&coef).map(|(a, b)| a * b).sum();
        for (&p, c) in pa.iter().zip(coef) {
            lambda.insert((p, v), c);
        }
        omega.push(var - explained);
    }
    Ok((lambda, omega))
}

/// Stable 64-bit seed derived from a root seed and a byte label.
pub fn derive_seed(root: u64, label: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label);
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("32-byte digest"))
}

fn nonzero_int<R: Rng + ?Sized>(rng: &mut R, bound: u64) -> Rat {
    let mag = rng.gen_range(1..=bound) as i64;
    rat(if rng.gen::<bool>() { mag } else { -mag })
}

/// Draws a point with integer entries: coefficients and loadings uniform on
/// `[−B, B] ∖ {0}`, diagonal entries uniform on `[1, B]`, excluded loadings 0.
pub fn sample_param_point<R: Rng + ?Sized>(
    g: &Dag,
    kind: ParamKind,
    excluded: &NodeSet,
    bound: u64,
    rng: &mut R,
) -> Result<ParamPoint> {
    if bound < 2 {
        return Err(Error::InvalidBound(bound));
    }
    let m = g.m();
    if let Some(&v) = excluded.iter().find(|&&v| v >= m) {
        return Err(Error::BadIndex { node: v + 1, m });
    }
    let lambda = g
        .edges()
        .iter()
        .map(|&e| (e, nonzero_int(rng, bound)))
        .collect();
    let diag = (0..m)
        .map(|_| rat(rng.gen_range(1..=bound) as i64))
        .collect();
    let loading = (0..m)
        .map(|v| {
            if excluded.contains(&v) {
                Rat::zero()
            } else {
                nonzero_int(rng, bound)
            }
        })
        .collect();
    Ok(ParamPoint {
        kind,
        lambda,
        diag,
        loading,
        excluded: excluded.clone(),
    })
}

/// Deterministic in `seed`.
pub fn random_param_point(
    g: &Dag,
    kind: ParamKind,
    excluded: &NodeSet,
    seed: u64,
    bound: u64,
) -> Result<ParamPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_param_point(g, kind, excluded, bound, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ratio;

    fn ints(v: &[i64]) -> Vec<Rat> {
        v.iter().map(|&x| rat(x)).collect()
    }

    fn cov(g: &Dag, lam: Rat, diag: &[i64], load: &[i64]) -> ParamPoint {
        ParamPoint::new(
            ParamKind::Covariance,
            ParamPoint::uniform_lambda(g, lam),
            ints(diag),
            ints(load),
        )
    }

    fn conc(g: &Dag, lam: Rat, diag: &[i64], load: &[i64]) -> ParamPoint {
        ParamPoint {
            kind: ParamKind::Concentration,
            ..cov(g, lam, diag, load)
        }
    }

    fn square_tail() -> Dag {
        Dag::from_one_based(5, &[(1, 3), (1, 2), (2, 4), (3, 4), (4, 5)]).unwrap()
    }

    #[test]
    fn phi_examples() {
        let e = Dag::empty(3);
        let s = phi(&e, &cov(&e, rat(0), &[1, 1, 1], &[1, 1, 1])).unwrap();
        assert_eq!(s, RatMatrix::from_ints(&[[2, 1, 1], [1, 2, 1], [1, 1, 2]]));

        let g = Dag::from_one_based(2, &[(1, 2)]).unwrap();
        let s = phi(&g, &cov(&g, rat(2), &[1, 1], &[0, 0])).unwrap();
        assert_eq!(s, RatMatrix::from_ints(&[[1, 2], [2, 5]]));
    }

    #[test]
    fn phi_square_tail_against_gauss_jordan_inverse() {
        let g = square_tail();
        let p = cov(&g, rat(1), &[1, 1, 1, 1, 1], &[1, 1, 1, 1, 1]);
        let l = p.lambda_matrix(5);
        let a = (&RatMatrix::identity(5) - &l).inverse().unwrap();
        let inner = &RatMatrix::identity(5) + &RatMatrix::outer(&p.loading);
        let expected = &(&a.transpose() * &inner) * &a;
        assert_eq!(phi(&g, &p).unwrap(), expected);
        // straight-line value of one entry: X5 = X4 + …, X4 = X2 + X3 + …
        assert_eq!(expected.get(0, 0), &rat(2));
    }

    #[test]
    fn neumann_matches_inverse_on_square_tail() {
        let g = square_tail();
        let l = cov(&g, rat(1), &[1; 5], &[0; 5]).lambda_matrix(5);
        let lt = l.transpose();
        let mut expected = RatMatrix::identity(5);
        let mut power = RatMatrix::identity(5);
        for _ in 0..4 {
            power = &power * &lt;
            expected = &expected + &power;
        }
        let inv = (&RatMatrix::identity(5) - &lt).inverse().unwrap();
        assert_eq!(inv, expected);
        assert_eq!(neumann_inverse(&lt), expected);
    }

    #[test]
    fn phi_tilde_examples() {
        let e = Dag::empty(2);
        let s = phi_tilde(&e, &cov(&e, rat(0), &[1, 1], &[1, 2])).unwrap();
        assert_eq!(s, RatMatrix::from_ints(&[[2, 2], [2, 5]]));

        let g = square_tail();
        let p = cov(&g, rat(3), &[1, 2, 3, 4, 5], &[0; 5]);
        assert_eq!(phi(&g, &p).unwrap(), phi_tilde(&g, &p).unwrap());
    }

    #[test]
    fn varphi_examples() {
        let e = Dag::empty(2);
        let s = varphi(&e, &conc(&e, rat(0), &[4, 4], &[1, 1])).unwrap();
        assert_eq!(s, RatMatrix::from_ints(&[[3, -1], [-1, 3]]));

        let g = Dag::from_one_based(2, &[(1, 2)]).unwrap();
        let s = varphi_tilde(&g, &conc(&g, rat(1), &[1, 1], &[0, 0])).unwrap();
        assert_eq!(s, RatMatrix::from_ints(&[[2, -1], [-1, 1]]));

        let e3 = Dag::empty(3);
        let s = varphi_tilde(&e3, &conc(&e3, rat(0), &[2, 3, 5], &[0, 0, 0])).unwrap();
        assert_eq!(s, RatMatrix::diagonal(&ints(&[2, 3, 5])));
    }

    #[test]
    fn rho_relates_inverse_covariance_to_varphi() {
        // 1 + δᵀδ = 25 with Ω = I, δ = (2, 2, 4)
        let g = Dag::from_one_based(3, &[(1, 2), (2, 3)]).unwrap();
        let p = cov(&g, ratio(1, 2), &[1, 1, 1], &[2, 2, 4]);
        let q = rho_map(&g, &p).unwrap().expect("perfect square");
        assert_eq!(q.loading, vec![ratio(2, 5), ratio(2, 5), ratio(4, 5)]);
        let lhs = phi(&g, &p).unwrap().inverse().unwrap();
        assert_eq!(lhs, varphi(&g, &q).unwrap());

        let irrational = cov(&g, rat(1), &[1, 1, 1], &[1, 0, 0]);
        assert_eq!(rho_map(&g, &irrational).unwrap(), None);
    }

    #[test]
    fn map_errors() {
        let g = Dag::from_one_based(2, &[(1, 2)]).unwrap();
        let mut p = cov(&g, rat(1), &[1, 1], &[1, 1]);
        p.lambda.clear();
        assert!(matches!(phi(&g, &p), Err(Error::EdgeMismatch(_))));
        let p = cov(&g, rat(1), &[1, 0], &[1, 1]);
        assert!(matches!(phi(&g, &p), Err(Error::InvalidParam(_))));
        let p = cov(&g, rat(1), &[1, 1], &[1, 1]);
        assert!(matches!(varphi(&g, &p), Err(Error::KindMismatch { .. })));
        let mut p = cov(&g, rat(1), &[1, 1], &[1, 1]);
        p.excluded.insert(0);
        assert!(matches!(phi(&g, &p), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn recover_examples() {
        let g = Dag::from_one_based(2, &[(1, 2)]).unwrap();
        let (lam, om) = recover_lambda_omega(&g, &RatMatrix::from_ints(&[[1, 2], [2, 5]])).unwrap();
        assert_eq!(lam[&(0, 1)], rat(2));
        assert_eq!(om, ints(&[1, 1]));

        let e = Dag::empty(3);
        let d = RatMatrix::diagonal(&ints(&[3, 7, 2]));
        let (lam, om) = recover_lambda_omega(&e, &d).unwrap();
        assert!(lam.is_empty());
        assert_eq!(om, ints(&[3, 7, 2]));

        let g = Dag::from_one_based(3, &[(1, 3), (2, 3)]).unwrap();
        let singular = RatMatrix::from_ints(&[[1, 1, 0], [1, 1, 0], [0, 0, 1]]);
        assert_eq!(
            recover_lambda_omega(&g, &singular),
            Err(Error::SingularSubmatrix { node: 3 })
        );
    }

    #[test]
    fn recover_round_trip_square_tail() {
        let g = square_tail();
        let mut p = random_param_point(&g, ParamKind::Covariance, &NodeSet::new(), 7, 50).unwrap();
        for (i, x) in p.diag.iter_mut().enumerate() {
            *x = ratio(i as i64 + 2, 3);
        }
        p.loading = vec![Rat::zero(); 5];
        let sigma = phi_tilde(&g, &p).unwrap();
        let (lam, om) = recover_lambda_omega(&g, &sigma).unwrap();
        assert_eq!(lam, p.lambda);
        assert_eq!(om, p.diag);
    }

    #[test]
    fn sampling_contract() {
        let g = square_tail();
        let none = NodeSet::new();
        let a = random_param_point(&g, ParamKind::Covariance, &none, 11, 1000).unwrap();
        let b = random_param_point(&g, ParamKind::Covariance, &none, 11, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.loading.iter().all(|x| !x.is_zero()));
        assert!(a
            .lambda
            .values()
            .all(|x| !x.is_zero() && x.abs() <= rat(1000)));
        assert!(a.diag.iter().all(|x| x >= &rat(1) && x <= &rat(1000)));
        a.validate(&g).unwrap();

        let all: NodeSet = (0..5).collect();
        let c = random_param_point(&g, ParamKind::Concentration, &all, 3, 10).unwrap();
        assert!(c.loading.iter().all(Zero::is_zero));
        assert_eq!(
            random_param_point(&g, ParamKind::Covariance, &none, 1, 1),
            Err(Error::InvalidBound(1))
        );
    }

    #[test]
    fn witness_json_is_one_based() {
        let g = Dag::from_one_based(2, &[(1, 2)]).unwrap();
        let p = cov(&g, ratio(1, 2), &[1, 1], &[3, -1]);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["lambda"][0]["from"], 1);
        assert_eq!(v["lambda"][0]["to"], 2);
        assert_eq!(v["lambda"][0]["value"], "1/2");
        assert_eq!(v["loading"][1], "-1");
        assert_eq!(v["kind"], "covariance");
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_eq!(derive_seed(42, b"a"), derive_seed(42, b"a"));
        assert_ne!(derive_seed(42, b"a"), derive_seed(42, b"b"));
        assert_ne!(derive_seed(42, b"a"), derive_seed(43, b"a"));
    }
}
