//! Time integration of the projected surface Navier-Stokes evolution:
//! Crank-Nicolson for the Stokes part, second-order Adams-Bashforth for
//! the advective term, Helmholtz projection each step, adaptive time step
//! under a CFL bound.
//!
//! The advective term is realized in its weak form
//! ⟨F(u) | v⟩ = (u ⊗ u_♭ | ∇v)_M through the exact stencil adjoints.
//! Paired with the weak Stokes form this conserves Killing components to
//! rounding per step (both pairings vanish against discrete Killing
//! fields), which is the discrete counterpart of the orthogonality-
//! invariance mechanism behind global convergence.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::helmholtz::{self, compatible_divergence};
use crate::killing::{killing_components, project_killing, KillingBasis};
use crate::ops;
use crate::stokes::{solve_resolvent, StokesOperator};

#[derive(Debug, Clone)]
pub struct TimeControls {
    /// Initial (and maximum) time step.
    pub dt: f64,
    pub t_end: f64,
    pub c_cfl: f64,
    pub adaptive_dt: bool,
    /// Explicit advective term on/off (off = pure Stokes flow).
    pub advection: bool,
    /// Diagnostics cadence in steps.
    pub sample_every: usize,
    pub solver_tol: f64,
    /// Stop once ‖u − P_E u₀‖_M falls below this.
    pub stop_dist: Option<f64>,
    pub max_steps: usize,
}

impl Default for TimeControls {
    fn default() -> Self {
        TimeControls {
            dt: 1e-2,
            t_end: 1.0,
            c_cfl: 0.5,
            adaptive_dt: true,
            advection: true,
            sample_every: 1,
            solver_tol: 1e-10,
            stop_dist: None,
            max_steps: 2_000_000,
        }
    }
}

pub struct SimulationState {
    pub t: f64,
    pub u: VectorField,
    /// Potential removed by the last projection (the discrete stand-in
    /// for the pressure).
    pub pressure_potential: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    /// E = ½‖u‖²_M
    pub energy: f64,
    /// 2 μ_s ‖D_u‖²_M
    pub dissipation: f64,
    /// α μ_s ‖u‖²_Σ
    pub boundary_dissipation: f64,
    /// ‖div u‖_M / ‖u‖_{H¹}, compatible divergence
    pub div_residual: f64,
    /// (u | z_i)_M
    pub killing: Vec<f64>,
    /// ‖u − P_E u₀‖_M
    pub dist_to_equilibrium: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub samples: Vec<Sample>,
    pub killing_dim: usize,
}

/// Weak advective operator: M⁻¹ of v ↦ (u ⊗ u_♭ | ∇v)_M (unprojected).
pub fn weak_advective(op: &StokesOperator, u: &VectorField) -> VectorField {
    let geom = &op.geom;
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let mut q: [[Array2<f64>; 2]; 2] = [
        [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
        [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
    ];
    for i in 0..n1 {
        for j in 0..n2 {
            let gm = [
                [geom.g11[[i, j]], geom.g12[[i, j]]],
                [geom.g12[[i, j]], geom.g22[[i, j]]],
            ];
            let gi = [
                [geom.ginv11[[i, j]], geom.ginv12[[i, j]]],
                [geom.ginv12[[i, j]], geom.ginv22[[i, j]]],
            ];
            let w = geom.weight[[i, j]];
            let uu = [u.u1[[i, j]], u.u2[[i, j]]];
            let u_low = [
                gm[0][0] * uu[0] + gm[0][1] * uu[1],
                gm[1][0] * uu[0] + gm[1][1] * uu[1],
            ];
            // S^i_j = u^i u_j ; Q^k_l = w g_ik g^{jl} S^i_j
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            v += gm[a][k] * gi[b][l] * uu[a] * u_low[b];
                        }
                    }
                    q[k][l][[i, j]] = w * v;
                }
            }
        }
    }
    let (r1, r2) = ops::covariant_gradient_adjoint(geom, &q);
    op.minv(&r1, &r2)
}

/// CFL bound: c_cfl · min over nodes of 1/(|u¹|/h₁ + |u²|/h₂).
pub fn cfl_dt(u: &VectorField, c_cfl: f64) -> f64 {
    let grid = &u.geom.grid;
    let mut worst: f64 = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let s = u.u1[[i, j]].abs() / grid.h1 + u.u2[[i, j]].abs() / grid.h2;
            worst = worst.max(s);
        }
    }
    if worst == 0.0 {
        f64::INFINITY
    } else {
        c_cfl / worst
    }
}

pub struct Integrator<'a> {
    pub op: &'a StokesOperator,
    pub basis: &'a KillingBasis,
    pub controls: TimeControls,
    prev_advective: Option<(VectorField, f64)>,
    equilibrium: VectorField,
    dt: f64,
    pub steps_taken: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(
        op: &'a StokesOperator,
        basis: &'a KillingBasis,
        controls: TimeControls,
        u0: &VectorField,
    ) -> Result<(Integrator<'a>, SimulationState)> {
        u0.check_finite("initial condition")?;
        let res = helmholtz::helmholtz_project(&op.projector, u0, controls.solver_tol)?;
        let (equilibrium, _) = project_killing(basis, &res.projected);
        let state = SimulationState {
            t: 0.0,
            u: res.projected,
            pressure_potential: res.potential,
        };
        let dt = controls.dt;
        Ok((
            Integrator {
                op,
                basis,
                controls,
                prev_advective: None,
                equilibrium,
                dt,
                steps_taken: 0,
            },
            state,
        ))
    }

    pub fn sample(&self, state: &SimulationState) -> Sample {
        let u = &state.u;
        let (d, _) = ops::deformation(u);
        let dnorm2 = ops::inner_product_m_tensor11(&d, &d).max(0.0);
        let alpha = self.op.bc.alpha();
        let bnorm2 = if alpha > 0.0 {
            ops::inner_product_sigma(u, u)
        } else {
            0.0
        };
        let div = compatible_divergence(u);
        let h1 = ops::h1_norm(u).max(1e-300);
        let dist = {
            let mut diff = u.clone();
            diff.axpy(-1.0, &self.equilibrium);
            ops::norm_m(&diff)
        };
        Sample {
            t: state.t,
            energy: 0.5 * ops::inner_product_m(u, u),
            dissipation: 2.0 * self.op.mu_s * dnorm2,
            boundary_dissipation: alpha * self.op.mu_s * bnorm2,
            div_residual: ops::norm_m_scalar(&div) / h1,
            killing: killing_components(self.basis, u),
            dist_to_equilibrium: dist,
        }
    }

    /// One IMEX step; adapts dt under the CFL bound.
    pub fn step(&mut self, state: &mut SimulationState) -> Result<()> {
        state.u.check_finite("state before step")?;
        let c = &self.controls;
        let mut dt = self.dt;
        if c.adaptive_dt && c.advection {
            let bound = cfl_dt(&state.u, c.c_cfl);
            if dt > bound {
                dt = bound;
            } else if dt < 0.5 * bound && dt < c.dt {
                dt = (1.3 * dt).min(bound).min(c.dt);
            }
        }
        // do not step past t_end
        if state.t + dt > c.t_end {
            dt = c.t_end - state.t;
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("non-positive time step".into()));
        }

        // explicit advective term (AB2 with variable step after startup)
        let mut fhat = VectorField::zeros(&self.op.geom);
        if c.advection {
            let fn_now = self.op.projector.project(&weak_advective(self.op, &state.u))?;
            match &self.prev_advective {
                Some((f_prev, dt_prev)) => {
                    let r = dt / dt_prev;
                    fhat.axpy(1.0 + 0.5 * r, &fn_now);
                    fhat.axpy(-0.5 * r, f_prev);
                }
                None => fhat.axpy(1.0, &fn_now),
            }
            self.prev_advective = Some((fn_now, dt));
        }

        // Crank-Nicolson: (2/dt + A) u⁺ = (2/dt) u − A u + 2 F̂
        let lambda = 2.0 / dt;
        let au = self.op.apply_in_range(&state.u)?;
        let mut rhs = state.u.scaled(lambda);
        rhs.axpy(-1.0, &au);
        rhs.axpy(2.0, &fhat);
        let unew = solve_resolvent(self.op, lambda, &rhs, c.solver_tol, 10_000)?;
        // safety projection; keeps the recovered pressure potential
        let res = helmholtz::helmholtz_project(&self.op.projector, &unew, c.solver_tol)?;
        state.u = res.projected;
        state.pressure_potential = res.potential;
        state.t += dt;
        self.dt = dt;
        self.steps_taken += 1;
        Ok(())
    }

    /// Integrate to t_end (or the stop threshold), sampling diagnostics.
    pub fn run(&mut self, state: &mut SimulationState) -> Result<Diagnostics> {
        let mut diag = Diagnostics {
            samples: vec![self.sample(state)],
            killing_dim: self.basis.dim(),
        };
        let mut steps = 0usize;
        while state.t < self.controls.t_end - 1e-14 {
            self.step(state)?;
            steps += 1;
            if steps % self.controls.sample_every == 0 {
                diag.samples.push(self.sample(state));
            }
            if let Some(thresh) = self.controls.stop_dist {
                if diag
                    .samples
                    .last()
                    .map(|s| s.dist_to_equilibrium < thresh)
                    .unwrap_or(false)
                {
                    break;
                }
            }
            if steps >= self.controls.max_steps {
                return Err(Error::SolverFailure {
                    solver: "time integration",
                    iterations: steps,
                    residual: state.t,
                    tol: self.controls.t_end,
                });
            }
        }
        if steps % self.controls.sample_every != 0 {
            diag.samples.push(self.sample(state));
        }
        Ok(diag)
    }
}

/// Initial data variants used by the CLI and the acceptance runs.
#[derive(Clone)]
pub enum InitialCondition {
    Zero,
    /// amplitude · normalized rotation field
    Rotation { amplitude: f64 },
    /// seeded random divergence-free field, normalized to the amplitude
    RandomDivFree {
        seed: u64,
        amplitude: f64,
        remove_killing: bool,
    },
    /// rotation_amplitude · z + unit-normalized random part ⊥ E
    RotationPlusRandom {
        rotation_amplitude: f64,
        amplitude: f64,
        seed: u64,
    },
    FromField(VectorField),
}

/// Build (and project) the initial velocity.
pub fn build_initial_condition(
    op: &StokesOperator,
    basis: &KillingBasis,
    ic: &InitialCondition,
) -> Result<VectorField> {
    let geom = &op.geom;
    let rotation = || {
        let z = VectorField::from_fn(geom, |_, _| [0.0, 1.0]);
        let n = ops::norm_m(&z);
        z.scaled(1.0 / n)
    };
    let random_perp = |seed: u64, remove_killing: bool| -> Result<VectorField> {
        let psi = crate::synth::random_stream(geom, seed);
        let raw = crate::synth::discrete_curl(&psi);
        let mut u = op.projector.project(&raw)?;
        if remove_killing {
            let (_, perp) = project_killing(basis, &u);
            u = perp;
        }
        let n = ops::norm_m(&u);
        if n == 0.0 {
            return Err(Error::InvalidParameter(
                "random initial condition degenerated to zero".into(),
            ));
        }
        Ok(u.scaled(1.0 / n))
    };
    let u = match ic {
        InitialCondition::Zero => VectorField::zeros(geom),
        InitialCondition::Rotation { amplitude } => rotation().scaled(*amplitude),
        InitialCondition::RandomDivFree {
            seed,
            amplitude,
            remove_killing,
        } => random_perp(*seed, *remove_killing)?.scaled(*amplitude),
        InitialCondition::RotationPlusRandom {
            rotation_amplitude,
            amplitude,
            seed,
        } => {
            let mut u = random_perp(*seed, true)?.scaled(*amplitude);
            u.axpy(*rotation_amplitude, &rotation());
            u
        }
        InitialCondition::FromField(f) => op.projector.project(f)?,
    };
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFit {
    /// the signal is at rounding level; no rate can be fit
    Degenerate,
    Fit { beta: f64, r_squared: f64 },
}

/// Least-squares fit of log(values) over the trailing `window` fraction
/// of the series; β is the decay rate (positive = decaying). Values below
/// `floor` (e.g. rounding-level ‖u_perp‖ for Killing initial data) are
/// excluded; if nothing significant remains the fit is degenerate.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: f64, floor: f64) -> DecayFit {
    assert_eq!(times.len(), values.len());
    let n = times.len();
    if n < 4 {
        return DecayFit::Degenerate;
    }
    let start = ((1.0 - window.clamp(0.05, 1.0)) * n as f64) as usize;
    let vmax = values.iter().cloned().fold(0.0f64, f64::max);
    if vmax <= floor {
        return DecayFit::Degenerate;
    }
    let pts: Vec<(f64, f64)> = times[start..]
        .iter()
        .zip(&values[start..])
        .filter(|(_, v)| **v > floor.max(1e-300))
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 4 {
        return DecayFit::Degenerate;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return DecayFit::Degenerate;
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let mean_y = sy / m;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, y) in &pts {
        let f = slope * t + intercept;
        ss_res += (y - f) * (y - f);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot <= 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    DecayFit::Fit {
        beta: -slope,
        r_squared: r2,
    }
}

/// Max residual of d/dt ‖u‖² + 4μ_s‖D_u‖² + 2αμ_s‖u‖²_Σ over interior
/// samples (centered differences in time), relative to the dissipation
/// scale.
pub fn verify_energy_identity(diag: &Diagnostics) -> f64 {
    let s = &diag.samples;
    if s.len() < 3 {
        return 0.0;
    }
    let scale = s
        .iter()
        .map(|x| 2.0 * x.dissipation + 2.0 * x.boundary_dissipation)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut worst: f64 = 0.0;
    for k in 1..s.len() - 1 {
        let e2p = 2.0 * s[k + 1].energy;
        let e2m = 2.0 * s[k - 1].energy;
        let ddt = (e2p - e2m) / (s[k + 1].t - s[k - 1].t);
        let resid = ddt + 2.0 * s[k].dissipation + 2.0 * s[k].boundary_dissipation;
        worst = worst.max(resid.abs());
    }
    worst / scale
}

/// Max drift |(u(t)|z_i)_M − (u₀|z_i)_M| over the run, relative to ‖u₀‖.
pub fn verify_killing_conservation(diag: &Diagnostics) -> f64 {
    let s = &diag.samples;
    if s.is_empty() || diag.killing_dim == 0 {
        return 0.0;
    }
    let u0 = (2.0 * s[0].energy).sqrt().max(1e-300);
    let mut worst: f64 = 0.0;
    for smp in s.iter() {
        for (c, c0) in smp.killing.iter().zip(&s[0].killing) {
            worst = worst.max((c - c0).abs());
        }
    }
    worst / u0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryKind, GeometrySpec};
    use crate::helmholtz::{PoissonMethod, Projector};
    use crate::killing::analytic_killing_basis;
    use crate::stokes::{eigenpairs, BoundaryCondition};
    use crate::synth;
    use std::sync::Arc;

    fn hemisphere_op(n: usize, alpha: f64) -> StokesOperator {
        let geom = build_geometry(&GeometrySpec {
            kind: GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            resolution: (n, n),
        })
        .unwrap();
        let proj = Arc::new(Projector::new(&geom, PoissonMethod::Spectral, 1e-12).unwrap());
        StokesOperator::new(&geom, BoundaryCondition::NavierSlip { alpha }, 1.0, &proj).unwrap()
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        let op = hemisphere_op(16, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let controls = TimeControls {
            dt: 0.05,
            t_end: 0.5,
            ..Default::default()
        };
        let (mut integ, mut state) =
            Integrator::new(&op, &basis, controls, &VectorField::zeros(&op.geom)).unwrap();
        let diag = integ.run(&mut state).unwrap();
        assert!(diag.samples.last().unwrap().energy < 1e-28);
    }

    #[test]
    fn killing_field_is_stationary() {
        let op = hemisphere_op(16, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let z = basis.fields[0].clone();
        let controls = TimeControls {
            dt: 0.02,
            t_end: 1.0,
            ..Default::default()
        };
        let (mut integ, mut state) = Integrator::new(&op, &basis, controls, &z).unwrap();
        integ.run(&mut state).unwrap();
        let mut diff = state.u.clone();
        diff.axpy(-1.0, &z);
        let drift = ops::norm_m(&diff);
        assert!(drift < 1e-7, "killing drift {drift} over unit time");
    }

    #[test]
    fn energy_decays_and_killing_conserved() {
        let op = hemisphere_op(20, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let mut u0 = synth::discrete_curl(&synth::random_stream(&op.geom, 11));
        u0 = op.projector.project(&u0).unwrap();
        let n0 = ops::norm_m(&u0);
        u0 = u0.scaled(0.3 / n0);
        u0.axpy(0.2, &basis.fields[0]);
        let controls = TimeControls {
            dt: 0.01,
            t_end: 0.5,
            ..Default::default()
        };
        let (mut integ, mut state) = Integrator::new(&op, &basis, controls, &u0).unwrap();
        let diag = integ.run(&mut state).unwrap();
        for w in diag.samples.windows(2) {
            assert!(
                w[1].energy <= w[0].energy * (1.0 + 1e-10),
                "energy increased: {} -> {}",
                w[0].energy,
                w[1].energy
            );
        }
        let drift = verify_killing_conservation(&diag);
        assert!(drift < 1e-10, "killing component drift {drift}");
        assert!(diag.samples.iter().all(|s| s.div_residual < 1e-8));
    }

    #[test]
    fn linear_decay_rate_matches_second_eigenvalue() {
        let op = hemisphere_op(20, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let eig = eigenpairs(&op, 2, 1e-8).unwrap();
        let lambda2 = eig.eigenvalues[1];
        let u0 = eig.eigenfields[1].clone();
        let controls = TimeControls {
            dt: 2e-3,
            t_end: 0.4,
            advection: false,
            adaptive_dt: false,
            ..Default::default()
        };
        let (mut integ, mut state) = Integrator::new(&op, &basis, controls, &u0).unwrap();
        let diag = integ.run(&mut state).unwrap();
        let times: Vec<f64> = diag.samples.iter().map(|s| s.t).collect();
        let vals: Vec<f64> = diag
            .samples
            .iter()
            .map(|s| s.dist_to_equilibrium)
            .collect();
        match fit_decay_rate(&times, &vals, 0.8, 1e-12) {
            DecayFit::Fit { beta, r_squared } => {
                assert!(
                    (beta - lambda2).abs() < 0.02 * lambda2,
                    "beta {beta} vs lambda2 {lambda2}"
                );
                assert!(r_squared > 0.999);
            }
            DecayFit::Degenerate => panic!("unexpected degenerate fit"),
        }
    }

    #[test]
    fn killing_initial_data_gives_degenerate_fit() {
        let op = hemisphere_op(16, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let controls = TimeControls {
            dt: 0.05,
            t_end: 0.4,
            ..Default::default()
        };
        let (mut integ, mut state) =
            Integrator::new(&op, &basis, controls, &basis.fields[0].clone()).unwrap();
        let diag = integ.run(&mut state).unwrap();
        let times: Vec<f64> = diag.samples.iter().map(|s| s.t).collect();
        let vals: Vec<f64> = diag
            .samples
            .iter()
            .map(|s| s.dist_to_equilibrium)
            .collect();
        let u0n = (2.0 * diag.samples[0].energy).sqrt();
        assert_eq!(
            fit_decay_rate(&times, &vals, 0.8, 1e-9 * u0n),
            DecayFit::Degenerate
        );
    }
}
