//! The two test problems: a manufactured Taylor-Green-type flow on the unit
//! square and the lid-driven cavity on `(-1, 1)^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkns_core::stage_system::{BoundaryRate, VectorField};

/// Final time of the manufactured problem.
pub const MANUFACTURED_T: f64 = 2.0;
pub const MANUFACTURED_NU: f64 = 1.0 / 50.0;

/// `u = 1/2 e^{T-t} [sin(pi x) cos(pi y), -cos(pi x) sin(pi y)]`
pub fn exact_velocity(x: f64, y: f64, t: f64) -> [f64; 2] {
    let a = 0.5 * (MANUFACTURED_T - t).exp();
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    [a * sx * cy, -a * cx * sy]
}

/// `f = u_t - nu lap u + (u . grad) u`; the pressure is constant. With
/// `a = e^{T-t}/2`: `u_t = -u`, `-lap u = 2 pi^2 u` and
/// `(u . grad) u = (a^2 pi / 2) [sin 2 pi x, sin 2 pi y]`.
pub fn manufactured_forcing(nu: f64, x: f64, y: f64, t: f64) -> [f64; 2] {
    let u = exact_velocity(x, y, t);
    let a = 0.5 * (MANUFACTURED_T - t).exp();
    let c = 2.0 * nu * PI * PI - 1.0;
    let k = 0.5 * a * a * PI;
    [c * u[0] + k * (2.0 * PI * x).sin(), c * u[1] + k * (2.0 * PI * y).sin()]
}

pub fn manufactured_forcing_field(nu: f64) -> VectorField {
    Arc::new(move |x, y, t| manufactured_forcing(nu, x, y, t))
}

/// Time derivative of the exact velocity, used as Dirichlet rate.
pub fn manufactured_boundary_rate() -> BoundaryRate {
    Arc::new(|x, y, t, _| {
        let u = exact_velocity(x, y, t);
        [-u[0], -u[1]]
    })
}

/// Largest pointwise momentum residual `|u_t - nu lap u + (u.grad)u - f|` at
/// `samples` random space-time points, with derivatives of the exact field
/// taken by fourth-order central differences.
pub fn forcing_self_check(nu: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-3;
    let d1 = |g: &dyn Fn(f64) -> f64, s: f64| (g(s - 2.0 * h) - 8.0 * g(s - h) + 8.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h);
    let d2 = |g: &dyn Fn(f64) -> f64, s: f64| {
        (-g(s - 2.0 * h) + 16.0 * g(s - h) - 30.0 * g(s) + 16.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h * h)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, y, t) = (rng.gen::<f64>(), rng.gen::<f64>(), MANUFACTURED_T * rng.gen::<f64>());
        let u = exact_velocity(x, y, t);
        let f = manufactured_forcing(nu, x, y, t);
        for c in 0..2 {
            let ut = d1(&|s| exact_velocity(x, y, s)[c], t);
            let ux = d1(&|s| exact_velocity(s, y, t)[c], x);
            let uy = d1(&|s| exact_velocity(x, s, t)[c], y);
            let lap = d2(&|s| exact_velocity(s, y, t)[c], x) + d2(&|s| exact_velocity(x, s, t)[c], y);
            let r = ut - nu * lap + u[0] * ux + u[1] * uy - f[c];
            worst = worst.max(r.abs());
        }
    }
    worst
}

pub const CAVITY_T: f64 = 2.0;

fn on_lid(x: f64, y: f64) -> bool {
    const EPS: f64 = 1e-12;
    y > 1.0 - EPS && x.abs() < 1.0 - EPS
}

/// Lid data: `[t, 0]` up to `t = 1`, then `[1, 0]`; zero on the other walls.
pub fn cavity_boundary(x: f64, y: f64, t: f64) -> [f64; 2] {
    if on_lid(x, y) {
        [t.min(1.0), 0.0]
    } else {
        [0.0, 0.0]
    }
}

/// Time derivative of [`cavity_boundary`]. At the kink the step start
/// decides the side: a step that begins before `t = 1` sees the ramp at
/// its end point.
pub fn cavity_boundary_rate() -> BoundaryRate {
    Arc::new(|x, y, t, t_n| {
        const EPS: f64 = 1e-12;
        let ramp = t < 1.0 || (t <= 1.0 + EPS && t_n < 1.0 - EPS);
        if on_lid(x, y) && ramp {
            [1.0, 0.0]
        } else {
            [0.0, 0.0]
        }
    })
}

pub fn zero_forcing() -> VectorField {
    Arc::new(|_, _, _| [0.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_matches_finite_differences() {
        assert!(forcing_self_check(MANUFACTURED_NU, 10, 1) < 1e-6);
        assert!(forcing_self_check(0.3, 10, 2) < 1e-6);
    }

    #[test]
    fn wrong_viscosity_is_detected() {
        let worst = {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            (0..10)
                .map(|_| {
                    let (x, y, t) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
                    let a = manufactured_forcing(0.02, x, y, t);
                    let b = manufactured_forcing(0.03, x, y, t);
                    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
                })
                .fold(0.0, f64::max)
        };
        assert!(worst > 1e-3);
    }

    #[test]
    fn exact_velocity_is_divergence_free() {
        let h = 1e-5;
        for &(x, y) in &[(0.1, 0.7), (0.5, 0.5), (0.93, 0.2)] {
            let dudx = (exact_velocity(x + h, y, 0.3)[0] - exact_velocity(x - h, y, 0.3)[0]) / (2.0 * h);
            let dvdy = (exact_velocity(x, y + h, 0.3)[1] - exact_velocity(x, y - h, 0.3)[1]) / (2.0 * h);
            assert!((dudx + dvdy).abs() < 1e-8);
        }
    }

    #[test]
    fn lid_ramp_and_rate() {
        assert_eq!(cavity_boundary(0.0, 1.0, 0.5), [0.5, 0.0]);
        assert_eq!(cavity_boundary(0.0, 1.0, 1.5), [1.0, 0.0]);
        assert_eq!(cavity_boundary(1.0, 1.0, 0.5), [0.0, 0.0]);
        assert_eq!(cavity_boundary(0.0, -1.0, 0.5), [0.0, 0.0]);
        let rate = cavity_boundary_rate();
        assert_eq!(rate(0.0, 1.0, 0.5, 0.4), [1.0, 0.0]);
        // stage at the kink, step started before it
        assert_eq!(rate(0.0, 1.0, 1.0, 0.9), [1.0, 0.0]);
        // step starting at the kink
        assert_eq!(rate(0.0, 1.0, 1.0, 1.0), [0.0, 0.0]);
        assert_eq!(rate(0.0, 1.0, 1.2, 1.0), [0.0, 0.0]);
        assert_eq!(rate(-1.0, 1.0, 0.5, 0.4), [0.0, 0.0]);
    }
}
