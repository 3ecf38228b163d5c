use fracsemi::diagnostics::{select_ground_state, BranchSummary};
use fracsemi::io::{decode_field, encode_field, parse_sidecar, FieldSidecar, AXIS_ORDER, FIELD_FORMAT};
use fracsemi::localization::{barycenter_h, beta_map, truncated_coordinate, BranchLabel};
use fracsemi::models::{NonlinearitySpec, PotentialSpec};
use fracsemi::solver::{solve_constrained, SolveOptions};
use fracsemi::spectral::{apply_frac_laplacian, gagliardo_sq, inner_l2, translate};
use fracsemi::variational::{energy, gradient, project_to_nehari, theta_defect, Problem};
use fracsemi::{Field, Grid};
use proptest::prelude::*;

fn grid_1d() -> Grid {
    Grid::new(1, 16.0, 128).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

/// Sum of three Gaussians; always strictly positive somewhere.
fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.3f64..2.0, -4.0f64..4.0, 1.0f64..3.0), 3)
}

fn bump_field(grid: &Grid, b: &[(f64, f64, f64)]) -> Field {
    Field::from_fn(grid, |x| {
        b.iter().map(|(a, c, w)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp()).sum()
    })
}

fn problem(eps: f64) -> Problem {
    let spec = PotentialSpec::single_well(1, 2.0, 1.0, 1.0).unwrap();
    Problem::new(&grid_1d(), 0.5, eps, &spec, NonlinearitySpec::saturable(0.4).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frac_laplacian_is_symmetric(u in values(128), v in values(128), alpha in 0.05f64..1.0) {
        let g = grid_1d();
        let (u, v) = (Field::new(&g, u).unwrap(), Field::new(&g, v).unwrap());
        let lhs = inner_l2(&apply_frac_laplacian(&u, alpha).unwrap(), &v).unwrap();
        let rhs = inner_l2(&u, &apply_frac_laplacian(&v, alpha).unwrap()).unwrap();
        let scale = inner_l2(&u, &u).unwrap().sqrt() * inner_l2(&v, &v).unwrap().sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn frac_laplacian_is_nonnegative(u in values(64), alpha in 0.05f64..1.0) {
        let g = Grid::new(1, 5.0, 64).unwrap();
        let u = Field::new(&g, u).unwrap();
        let q = inner_l2(&apply_frac_laplacian(&u, alpha).unwrap(), &u).unwrap();
        prop_assert!(q >= -1e-12);
        prop_assert!((q - gagliardo_sq(&u, alpha).unwrap()).abs() <= 1e-9 * q.abs().max(1.0));
    }

    #[test]
    fn nehari_projection_is_scale_free(b in bumps(), c in 0.2f64..5.0) {
        let p = problem(0.5);
        let u = bump_field(p.grid(), &b);
        prop_assume!(theta_defect(&p, &u).unwrap() < 0.0);
        let a = project_to_nehari(&p, &u).unwrap();
        let s = project_to_nehari(&p, &u.scaled(c)).unwrap();
        prop_assert!((a.t_star - c * s.t_star).abs() <= 1e-9 * a.t_star);
        let r = energy(&p, &a.projected).unwrap();
        prop_assert!(r.nehari_residual.abs() <= 1e-10 * r.norm_sq);
        // Twice projected is a fixed point.
        let again = project_to_nehari(&p, &a.projected).unwrap();
        prop_assert!((again.t_star - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn energy_and_gradient_commute_with_grid_shifts(b in bumps(), k in 1usize..127) {
        let g = grid_1d();
        let p = Problem::autonomous(&g, 0.5, 1.0, NonlinearitySpec::saturable(0.4).unwrap()).unwrap();
        let u = bump_field(&g, &b);
        let shift = [k as f64 * g.spacing()];
        let tu = translate(&u, &shift).unwrap();
        let (e0, e1) = (energy(&p, &u).unwrap().total, energy(&p, &tu).unwrap().total);
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs().max(1.0));
        let lhs = translate(&gradient(&p, &u).unwrap(), &shift).unwrap();
        let rhs = gradient(&p, &tu).unwrap();
        prop_assert!(lhs.axpy(-1.0, &rhs).unwrap().max_abs() <= 1e-9 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn ground_state_selection_ignores_order(
        energies in prop::collection::vec(0.5f64..5.0, 4),
        flags in prop::collection::vec(any::<bool>(), 4),
        seed in any::<u64>(),
    ) {
        let centers: Vec<Vec<f64>> = (0..4).map(|j| vec![j as f64 * 3.0]).collect();
        let records: Vec<BranchSummary> = (0..4)
            .map(|j| BranchSummary {
                index: j,
                label: if flags[j] { BranchLabel::Interior(j) } else { BranchLabel::Outside },
                converged: true,
                // Branches 0 and 2 share an energy so ties get exercised.
                energy: energies[j % 2 + 2 * (j / 3)],
                barycenter: vec![centers[j][0] / 0.5],
            })
            .collect();
        let base = select_ground_state(&records, &centers, 1.0, 0.5);
        let mut shuffled = records.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(base, select_ground_state(&shuffled, &centers, 1.0, 0.5));
    }

    #[test]
    fn barycenters_stay_in_their_clamps(u in values(128), eps in 0.05f64..1.0, bound in 0.5f64..4.0) {
        let g = grid_1d();
        let u = Field::new(&g, u).unwrap();
        prop_assume!(!u.is_zero());
        let h = barycenter_h(&u, 2.0, eps, bound).unwrap();
        prop_assert!(h[0].abs() <= 2.0 * bound / eps + 1e-12);
        let b = beta_map(&u, bound, eps).unwrap();
        prop_assert!(b[0].abs() <= bound + 1e-12);
        let t = truncated_coordinate(h[0] * 10.0, eps, bound);
        prop_assert!(t.abs() <= 2.0 * bound / eps);
    }

    #[test]
    fn field_bytes_round_trip(v in prop::collection::vec(-1e300f64..1e300, 64), hw in 0.1f64..100.0) {
        let g = Grid::new(2, hw, 8).unwrap();
        let u = Field::new(&g, v).unwrap();
        let side = FieldSidecar {
            format: FIELD_FORMAT.into(),
            axis_order: AXIS_ORDER.into(),
            grid: g.shape(),
            len: 64,
            tags: Default::default(),
        };
        let text = serde_json::to_string(&side).unwrap();
        let back = decode_field(&parse_sidecar(&text).unwrap(), &encode_field(&u)).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(back.grid(), u.grid());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn descent_never_raises_energy(b in bumps()) {
        let p = problem(0.5);
        let seed = bump_field(p.grid(), &b);
        let opts = SolveOptions { max_iter: 200, ..SolveOptions::default() };
        let r = solve_constrained(&p, &seed, &opts).unwrap();
        for w in r.energy_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-11 * w[0].abs().max(1.0));
        }
        prop_assert!(r.converged);
    }
}
