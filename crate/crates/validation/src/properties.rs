use crate::checks::*;
use crate::oracles::*;
use latent_ident::jacobian::{build_jacobian, ColLabel, RowLabel};
use latent_ident::linalg::{sqrt_exact, Rat};
use latent_ident::maps::{phi, rho_map, varphi, ParamKind};
use latent_ident::spearman::{is_cospearman, is_spearman, tetrad_linear_system, tetrads, StarMode};
use latent_ident::{Dag, RatMatrix};
use num_traits::One;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn covariance_map_relations(seed in any::<u64>()) {
        prop_assert_eq!(covariance_maps(seed), Ok(()));
    }

    #[test]
    fn concentration_map_relations(seed in any::<u64>()) {
        prop_assert_eq!(concentration_maps(seed), Ok(()));
    }

    #[test]
    fn inverse_covariance_is_concentration(seed in any::<u64>()) {
        prop_assert_eq!(inverse_without_roots(seed), Ok(()));
        prop_assert_eq!(inverse_through_rho(seed), Ok(()));
    }

    #[test]
    fn rho_defined_exactly_on_squares(seed in any::<u64>()) {
        let (g, p) = graph_and_point(seed, ParamKind::Covariance);
        let k = Rat::one()
            + p.loading.iter().zip(&p.diag).map(|(d, o)| d * d / o).sum::<Rat>();
        prop_assert_eq!(rho_map(&g, &p).unwrap().is_some(), sqrt_exact(&k).is_some());
    }

    #[test]
    fn lambda_omega_recovered(seed in any::<u64>()) {
        prop_assert_eq!(lambda_omega_round_trip(seed), Ok(()));
    }

    #[test]
    fn spearman_decomposition_round_trips(seed in any::<u64>()) {
        prop_assert_eq!(spearman_round_trip(seed), Ok(()));
        prop_assert_eq!(cospearman_round_trip(seed), Ok(()));
    }

    #[test]
    fn membership_survives_sign_flips(seed in any::<u64>(), flips in any::<u8>()) {
        let (omega, delta) = spearman_instance(seed);
        let (psi, gamma) = cospearman_instance(seed);
        let sign = |v: &[Rat]| -> Vec<Rat> {
            v.iter()
                .enumerate()
                .map(|(i, x)| if flips >> (i % 8) & 1 == 1 { -x } else { x.clone() })
                .collect()
        };
        let s = &RatMatrix::diagonal(&omega) + &RatMatrix::outer(&sign(&delta));
        let c = &RatMatrix::diagonal(&psi) - &RatMatrix::outer(&sign(&gamma));
        prop_assert!(is_spearman(&s));
        prop_assert!(is_cospearman(&c));
    }

    #[test]
    fn off_diagonal_perturbation_breaks_membership(
        seed in any::<u64>(),
        eps in 1i64..20,
        a in 0usize..4,
        b in 0usize..4,
    ) {
        prop_assume!(a != b);
        let (omega, delta) = spearman_instance(seed);
        prop_assume!(delta.len() >= 4);
        let mut u = &RatMatrix::diagonal(&omega) + &RatMatrix::outer(&delta);
        let x = u.get(a, b) + Rat::new(eps.into(), 13.into());
        u.set(a, b, x.clone());
        u.set(b, a, x);
        prop_assert!(!tetrads(&u).unwrap().is_zero());
        prop_assert!(!is_spearman(&u));
        prop_assert!(!is_cospearman(&u));
    }

    #[test]
    fn star_systems_recover_lambda(seed in any::<u64>(), sink in any::<bool>()) {
        let mut r = rng(seed);
        let m = r.gen_range(4..=6);
        let hub = if sink { m - 1 } else { 0 };
        let edges: Vec<(usize, usize)> = (0..m)
            .filter(|&v| v != hub && r.gen_bool(0.6))
            .map(|v| if sink { (v, hub) } else { (hub, v) })
            .collect();
        let g = Dag::new(m, &edges).unwrap();
        let (base, mode, p) = if sink {
            let p = random_point(&g, ParamKind::Covariance, &mut r);
            (phi(&g, &p).unwrap(), StarMode::Sink, p)
        } else {
            let p = random_point(&g, ParamKind::Concentration, &mut r);
            (varphi(&g, &p).unwrap(), StarMode::Source, p)
        };
        let truth: Vec<Rat> = g.edges().iter().map(|e| p.lambda[e].clone()).collect();
        let (c, rhs) = tetrad_linear_system(&g, mode, &base).unwrap();
        prop_assert_eq!(c.mul_vec(&truth).unwrap(), rhs.clone());
        // A node outside the star keeps the system determined.
        if edges.len() < m - 1 {
            prop_assert_eq!(c.solve_unique(&rhs).unwrap(), Some(truth));
        }
    }
}

fn max_rank(trials: usize, mut f: impl FnMut() -> usize) -> usize {
    (0..trials).map(|_| f()).max().unwrap()
}

#[test]
fn covariance_and_concentration_jacobians_share_generic_rank() {
    let mut r = rng(11);
    for m in 2..=5 {
        for g in upper_dags(m) {
            let g = shuffled_labels(&g, &mut r);
            let cov = max_rank(3, || {
                phi_tilde_stencil(&g, &random_point(&g, ParamKind::Covariance, &mut r)).rank()
            });
            let con = max_rank(3, || {
                build_jacobian(&g, &random_point(&g, ParamKind::Concentration, &mut r))
                    .unwrap()
                    .rank()
            });
            assert_eq!(cov, con, "{}", g.edge_string());
        }
    }
}

#[test]
fn non_edge_loading_block_forces_full_rank() {
    let mut r = rng(13);
    let mut fired = 0;
    for m in 3..=6 {
        for _ in 0..150 {
            let g = random_dag(m, &mut r);
            let p = random_point(&g, ParamKind::Concentration, &mut r);
            let j = build_jacobian(&g, &p).unwrap();
            let block = j.submatrix(
                |row| matches!(row, RowLabel::NonEdge(..)),
                |col| matches!(col, ColLabel::Gamma(_)),
            );
            if block.rank() == block.cols() {
                fired += 1;
                let full = max_rank(3, || {
                    build_jacobian(&g, &random_point(&g, ParamKind::Concentration, &mut r))
                        .unwrap()
                        .rank()
                });
                assert_eq!(full.max(j.rank()), j.matrix.cols(), "{}", g.edge_string());
            }
        }
    }
    assert!(fired > 100);
}

#[test]
fn stencil_is_exact_on_quartics() {
    let f = |x: &[Rat]| vec![x[0].clone() * &x[0] * &x[0] * &x[0] * &x[1]];
    let x = [
        Rat::new(3.into(), 2.into()),
        Rat::new((-5).into(), 1.into()),
    ];
    let j = stencil_jacobian(f, &x);
    let x0 = &x[0];
    assert_eq!(
        j.get(0, 0),
        &(Rat::from_integer(4.into()) * x0 * x0 * x0 * &x[1])
    );
    assert_eq!(j.get(0, 1), &(x0 * x0 * x0 * x0));
}
