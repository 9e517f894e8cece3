use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swimlab_core::fluid::{ops, FaceField, FluidState, ForceDensityField, GridSpec, SolverParams, StokesSolver};

fn random_faces(g: &GridSpec, seed: u64) -> FaceField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = FaceField::zeros(g);
    for a in 0..3 {
        u.c[a].mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    u.zero_walls(g);
    u
}

fn random_force(g: &GridSpec, seed: u64) -> ForceDensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = ForceDensityField::zeros(g);
    for a in 0..3 {
        f.c[a].mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    f
}

fn solver(n: usize, nu: f64) -> StokesSolver {
    StokesSolver::new(GridSpec::cube(1.0, n).unwrap(), nu, SolverParams::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn projection_is_solenoidal_and_idempotent(seed in any::<u64>(), n in 8usize..14) {
        let s = solver(n, 1.0);
        let u = random_faces(&s.grid, seed);
        let (p1, _) = s.project(&u).unwrap();
        prop_assert!(ops::relative_divergence(&p1, &s.grid) <= 1e-10);
        let (p2, _) = s.project(&p1).unwrap();
        prop_assert!(p2.sub(&p1).max_abs() <= 1e-12 * p1.max_abs());
        prop_assert_eq!(p1.wall_max_abs(&s.grid), 0.0);
    }

    #[test]
    fn step_is_linear_in_forcing(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = solver(10, 0.5);
        let rest = FluidState::rest(&s.grid);
        let f1 = random_force(&s.grid, seed);
        let f2 = random_force(&s.grid, seed ^ 0x55);
        let mut f12 = ForceDensityField::zeros(&s.grid);
        for c in 0..3 {
            f12.c[c] = &f1.c[c] * a + &f2.c[c] * b;
        }
        let u1 = s.stokes_step(&rest, &f1, 0.01).unwrap().0.u;
        let u2 = s.stokes_step(&rest, &f2, 0.01).unwrap().0.u;
        let u12 = s.stokes_step(&rest, &f12, 0.01).unwrap().0.u;
        let mut combo = u1.clone();
        combo.scale(a);
        combo.axpy(b, &u2);
        let scale = u1.max_abs() * a.abs() + u2.max_abs() * b.abs();
        prop_assert!(u12.sub(&combo).max_abs() <= 1e-8 * scale.max(1e-300));
    }
}

#[test]
fn unforced_kinetic_energy_never_increases() {
    let s = solver(12, 0.1);
    let u0 = s.project(&random_faces(&s.grid, 3)).unwrap().0;
    let zero = ForceDensityField::zeros(&s.grid);
    let mut state = FluidState { u: u0, ..FluidState::rest(&s.grid) };
    let mut prev = 0.5 * ops::l2_norm(&state.u, &s.grid).powi(2);
    for _ in 0..100 {
        let (next, budget) = s.stokes_step(&state, &zero, 0.01).unwrap();
        let ke = 0.5 * ops::l2_norm(&next.u, &s.grid).powi(2);
        assert!(ke < prev, "{ke} >= {prev}");
        assert!(budget.relative_defect() <= 1e-10);
        prev = ke;
        state = next;
    }
}

#[test]
fn rest_stays_at_rest_exactly() {
    let s = solver(10, 1.0);
    let zero = ForceDensityField::zeros(&s.grid);
    let mut state = FluidState::rest(&s.grid);
    for _ in 0..5 {
        state = s.stokes_step(&state, &zero, 0.1).unwrap().0;
    }
    assert_eq!(state.u.max_abs(), 0.0);
}

#[test]
fn forced_budget_closes_every_step() {
    let s = solver(12, 0.2);
    let f = random_force(&s.grid, 9);
    let mut state = FluidState::rest(&s.grid);
    for _ in 0..30 {
        let (next, budget) = s.stokes_step(&state, &f, 0.02).unwrap();
        assert!(budget.relative_defect() <= 1e-10, "{budget:?}");
        state = next;
    }
}
