//! Property tests for the discrete operators, the model right-hand side,
//! the mollifier and the diagnostics.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use twophase::diagnostics::{bd_entropy, distance_to_equilibrium, EquilibriumState};
use twophase::generators::Generator;
use twophase::grid::{
    antisym, deformation, divergence, gradient, integrate, jacobian, laplacian, PeriodicGrid,
    ScalarField, VectorField,
};
use twophase::init::{build_mollifier, regularize};
use twophase::model::{drag, rhs_original, rhs_regularized, ModelParams, State};

fn grid_strategy() -> impl Strategy<Value = PeriodicGrid> {
    prop_oneof![
        (8usize..40).prop_map(|n| PeriodicGrid::new(1, n).unwrap()),
        (8usize..14).prop_map(|n| PeriodicGrid::new(2, n).unwrap()),
        (8usize..10).prop_map(|n| PeriodicGrid::new(3, n).unwrap()),
    ]
}

fn field(g: PeriodicGrid, lo: f64, hi: f64) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(lo..hi, g.len()).prop_map(move |v| ScalarField::new(g, v).unwrap())
}

fn vector(g: PeriodicGrid, lo: f64, hi: f64) -> impl Strategy<Value = VectorField> {
    prop::collection::vec(field(g, lo, hi), g.dim())
        .prop_map(|c| VectorField::new(c).unwrap())
}

/// Smooth field: a few low Fourier modes on top of a mean.
fn smooth(g: PeriodicGrid, mean: f64, amp: f64) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3).prop_map(move |c| {
        ScalarField::from_fn(g, |x| {
            let mut s = 0.0;
            for (k, (a, b)) in c.iter().enumerate() {
                let th = 2.0 * std::f64::consts::PI * (k + 1) as f64 * (x[0] + x[1] + x[2]);
                s += a * th.sin() + b * th.cos();
            }
            mean + amp * s / 6.0
        })
    })
}

fn smooth_state(g: PeriodicGrid) -> impl Strategy<Value = State> {
    let vec_of = move |amp| {
        prop::collection::vec(smooth(g, 0.0, amp), g.dim()).prop_map(|c| VectorField::new(c).unwrap())
    };
    (smooth(g, 1.0, 0.5), vec_of(1.0), smooth(g, 1.0, 0.5), vec_of(1.0))
        .prop_map(|(n, v, rho, u)| State::new(n, v, rho, u, 0.0).unwrap())
}

fn on_grid<T: std::fmt::Debug, S: Strategy<Value = T>>(
    f: impl Fn(PeriodicGrid) -> S,
) -> impl Strategy<Value = T> {
    grid_strategy().prop_flat_map(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts((f, v) in on_grid(|g| (field(g, -1.0, 1.0), vector(g, -1.0, 1.0)))) {
        let lhs = integrate(&f.mul(&divergence(&v))) + integrate(&gradient(&f).dot(&v));
        let scale = f.max_abs() * v.max_norm();
        prop_assert!(lhs.abs() <= 1e-12 * scale.max(1e-300), "residual {lhs}");
    }

    #[test]
    fn laplacian_is_symmetric((f, g2) in on_grid(|g| (field(g, -1.0, 1.0), field(g, -1.0, 1.0)))) {
        let a = integrate(&f.mul(&laplacian(&g2)));
        let b = integrate(&g2.mul(&laplacian(&f)));
        let scale = f.max_abs() * g2.max_abs() * (f.grid().points_per_axis() as f64).powi(2);
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }

    #[test]
    fn operators_commute_with_shifts(
        (f, v, axis, k) in on_grid(|g| (field(g, -1.0, 1.0), vector(g, -1.0, 1.0), 0..g.dim(), -3isize..4))
    ) {
        prop_assert_eq!(gradient(&f.shifted(axis, k)), gradient(&f).shifted(axis, k));
        prop_assert_eq!(laplacian(&f.shifted(axis, k)), laplacian(&f).shifted(axis, k));
        prop_assert_eq!(divergence(&v.shifted(axis, k)), divergence(&v).shifted(axis, k));
    }

    #[test]
    fn jacobian_splits_into_deformation_and_rotation(v in on_grid(|g| vector(g, -1.0, 1.0))) {
        let j = jacobian(&v);
        let s = deformation(&v).add(&antisym(&v));
        let d = v.dim();
        for a in 0..d {
            for b in 0..d {
                // 0.5(x+y) + 0.5(x-y) reproduces x up to one rounding per term.
                let scale = j.comp(a, b).max_abs().max(j.comp(b, a).max_abs());
                prop_assert!(s.comp(a, b).sub(j.comp(a, b)).max_abs() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }

    #[test]
    fn drag_is_galilean_invariant(
        (n, v, u, c) in on_grid(|g| (field(g, 0.1, 2.0), vector(g, -1.0, 1.0), vector(g, -1.0, 1.0), -0.5f64..0.5)),
        kappa in 0.0f64..3.0,
    ) {
        // Dyadic velocities and shift keep every sum exact, so the shift
        // cancels bitwise in v - u.
        let dyadic = |x: f64| (x * 1024.0).round() / 1024.0;
        let (v, u, c) = (v.map_comps(|x| x.map(dyadic)), u.map_comps(|x| x.map(dyadic)), dyadic(c));
        let shift = |w: &VectorField| w.map_comps(|x| x.map(|y| y + c));
        prop_assert_eq!(drag(&n, &v, &u, kappa), drag(&n, &shift(&v), &shift(&u), kappa));
    }

    #[test]
    fn regularized_rhs_reduces_bitwise(s in on_grid(smooth_state)) {
        let p = ModelParams::default();
        prop_assert_eq!(rhs_original(&s, &p).unwrap(), rhs_regularized(&s, &p).unwrap());
    }

    #[test]
    fn density_fluxes_conserve_mass(s in on_grid(smooth_state), dt in 1e-4f64..1e-2) {
        let p = ModelParams::default();
        let d = rhs_original(&s, &p).unwrap();
        let mut n1 = s.n.clone();
        n1.axpy(dt, &d.dn);
        let mut r1 = s.rho.clone();
        r1.axpy(dt, &d.drho);
        let (m0, m1) = (integrate(&s.n), integrate(&n1));
        let (q0, q1) = (integrate(&s.rho), integrate(&r1));
        prop_assert!((m1 - m0).abs() <= 1e-13 * m0);
        prop_assert!((q1 - q0).abs() <= 1e-13 * q0);
    }

    #[test]
    fn constant_states_are_steady(
        g in grid_strategy(), n in 0.1f64..5.0, rho in 0.1f64..5.0, u in -2.0f64..2.0,
    ) {
        let uc = vec![u; g.dim()];
        let d = rhs_original(&State::constant(g, n, rho, &uc), &ModelParams::default()).unwrap();
        prop_assert!(d.max_abs() <= 1e-12);
    }

    #[test]
    fn kernel_is_even(g in grid_strategy(), log_delta in -8.0f64..-0.1) {
        let j = build_mollifier(log_delta.exp(), g, 7.0).unwrap();
        let v = j.values().values();
        let n = g.points_per_axis();
        for i in 0..g.len() {
            let c = g.cell_of(i);
            let mut m = [0usize; 3];
            for a in 0..g.dim() {
                m[a] = (n - c[a]) % n;
            }
            assert_abs_diff_eq!(v[i], v[g.index_of(m)], epsilon = 1e-15 * v[i].abs().max(1e-300));
        }
    }

    #[test]
    fn regularize_preserves_positivity(seed in 0u64..1000, log_delta in -8.0f64..-0.1, vacuum: bool) {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let gen = if vacuum {
            Generator::TwoBump { vacuum: true }
        } else {
            Generator::RandomSmooth { cutoff: 4, amplitude: 0.5 }
        };
        let raw = gen.build(g, seed, 0.01).unwrap();
        let delta = log_delta.exp();
        let reg = regularize(&raw, delta, &build_mollifier(delta, g, 7.0).unwrap()).unwrap();
        prop_assert!(reg.n0d.min() > 0.0 && reg.rho0d.min() > 0.0);
        prop_assert!(reg.v0d.first_non_finite().is_none() && reg.u0d.first_non_finite().is_none());
    }

    #[test]
    fn bd_entropy_scales_linearly(s in on_grid(smooth_state)) {
        let mut s4 = s.clone();
        s4.n = s.n.scale(4.0);
        let (a, b) = (bd_entropy(&s), bd_entropy(&s4));
        prop_assert!((b - 4.0 * a).abs() <= 1e-12 * b.abs().max(1e-300));
    }

    #[test]
    fn distance_to_equilibrium_is_galilean(s in on_grid(smooth_state), c in -1.0f64..1.0) {
        let d = s.grid().dim();
        let eq = EquilibriumState { n_c: 1.0, rho_c: 1.0, u_c: vec![0.25; d] };
        let shifted_eq = EquilibriumState { u_c: eq.u_c.iter().map(|x| x + c).collect(), ..eq.clone() };
        let mut t = s.clone();
        t.v = s.v.map_comps(|x| x.map(|y| y + c));
        t.u = s.u.map_comps(|x| x.map(|y| y + c));
        let a = distance_to_equilibrium(&s, &eq, 2.0, 1.4);
        let b = distance_to_equilibrium(&t, &shifted_eq, 2.0, 1.4);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
    }
}
