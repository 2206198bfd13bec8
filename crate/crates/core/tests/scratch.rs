use std::time::Instant;
use surfns::geometry::{build_geometry, GeometryKind, GeometrySpec};
use surfns::helmholtz::{PoissonMethod, Projector};
use surfns::stokes::{BoundaryCondition, StokesOperator};
use surfns::killing::analytic_killing_basis;
use surfns::dynamics::{build_initial_condition, InitialCondition, Integrator, TimeControls};
use std::sync::Arc;

#[test]
fn scratch_step_bench() {
    let geom = build_geometry(&GeometrySpec {
        kind: GeometryKind::SphericalCap { theta_max: std::f64::consts::FRAC_PI_2 },
        resolution: (64, 64),
    }).unwrap();
    let proj = Arc::new(Projector::new(&geom, PoissonMethod::Spectral, 1e-10).unwrap());
    let op = StokesOperator::new(&geom, BoundaryCondition::NavierSlip { alpha: 0.0 }, 1.0, &proj).unwrap();
    let basis = analytic_killing_basis(&geom, 0.0);
    let ic = InitialCondition::RotationPlusRandom { rotation_amplitude: 0.3, amplitude: 1.0, seed: 1 };
    let u0 = build_initial_condition(&op, &basis, &ic).unwrap();
    let controls = TimeControls { dt: 0.05, t_end: 0.2, sample_every: 10, ..Default::default() };
    let (mut integ, mut state) = Integrator::new(&op, &basis, controls, &u0).unwrap();
    let t2 = Instant::now();
    let _ = integ.run(&mut state).unwrap();
    let steps = integ.steps_taken;
    println!("{} steps to t=0.2 in {:?} ({:?}/step); dt ~ {:.3e}", steps, t2.elapsed(), t2.elapsed()/steps.max(1) as u32, state.t / steps as f64);
}
