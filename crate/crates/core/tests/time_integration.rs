use std::sync::Arc;

use rkns_core::al_precond::{AugmentedSolver, PrecondConfig};
use rkns_core::fem::{build_mesh, project_solenoidal, Rectangle};
use rkns_core::fgmres::KrylovConfig;
use rkns_core::sparse::{dot, norm2};
use rkns_core::stage_system::{
    time_loop, Discretization, LinearSolver, ProblemSpec, TimeLoopOptions, TimeState, Trajectory,
};
use rkns_core::{make_tableau, Family};

fn swirl(disc: &Discretization) -> Vec<f64> {
    project_solenoidal(&disc.spaces, |x, y| {
        let w = (x * (1.0 - x) * y * (1.0 - y)).powi(2);
        [16.0 * w * (1.0 - 2.0 * y), -16.0 * w * (1.0 - 2.0 * x)]
    })
    .unwrap()
}

fn unforced(nu: f64, convection: bool, n_steps: usize) -> ProblemSpec {
    ProblemSpec {
        nu,
        forcing: Arc::new(|_, _, _| [0.0, 0.0]),
        boundary_rate: Arc::new(|_, _, _, _| [0.0, 0.0]),
        t0: 0.0,
        t_final: 0.5,
        n_steps,
        convection,
        lps: false,
    }
}

fn integrate(disc: &Discretization, problem: &ProblemSpec, family: Family, s: usize, solver: &LinearSolver) -> Trajectory {
    let tab = make_tableau(family, s).unwrap();
    let initial = TimeState {
        u: swirl(disc),
        p: vec![0.0; disc.spaces.n_p],
        t: 0.0,
        n: 0,
    };
    let opts = TimeLoopOptions {
        keep_snapshots: true,
        ..TimeLoopOptions::default()
    };
    time_loop(disc, problem, &tab, initial, solver, &opts, |_| Ok(())).unwrap()
}

#[test]
fn unforced_flow_loses_kinetic_energy() {
    let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, 2).unwrap());
    for (family, s) in [(Family::RadauIIA, 2), (Family::Gauss, 2), (Family::LobattoIIIC, 3)] {
        let traj = integrate(&disc, &unforced(0.05, true, 5), family, s, &LinearSolver::Direct);
        let energy: Vec<f64> = traj
            .snapshots
            .iter()
            .map(|st| dot(&st.u, &disc.mass_u.apply(&st.u)))
            .collect();
        assert_eq!(energy.len(), 6);
        assert!(energy.windows(2).all(|w| w[1] < w[0]), "{family}: {energy:?}");
    }
}

#[test]
fn augmented_and_direct_trajectories_agree() {
    let disc = Discretization::new(build_mesh(Rectangle::UNIT_SQUARE, 2).unwrap());
    let problem = unforced(0.02, true, 3);
    let direct = integrate(&disc, &problem, Family::RadauIIA, 2, &LinearSolver::Direct);
    let krylov = KrylovConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_iters: 300,
        ..KrylovConfig::default()
    };
    let solver = AugmentedSolver::new(&disc, PrecondConfig::default(), krylov).unwrap();
    let aug = integrate(&disc, &problem, Family::RadauIIA, 2, &LinearSolver::Augmented(Box::new(solver)));
    let d: Vec<f64> = direct.final_state.u.iter().zip(&aug.final_state.u).map(|(a, b)| a - b).collect();
    assert!(norm2(&d) <= 1e-6 * norm2(&direct.final_state.u));
    assert!(aug.stats.linear_iterations > 0);
    assert_eq!(aug.stats.unconverged_linear, 0);
    assert!(aug.stats.max_divergence < 1e-8);
}
