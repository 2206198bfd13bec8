//! Neumann Poisson problems and the surface Helmholtz projection
//! P_H u = u − grad ψ_u.
//!
//! Both are realized variationally: ψ solves the normal equations
//! Gᵀ M_v G ψ = b, where G is the discrete gradient and M_v the vector
//! mass. This is the discrete form of the weak definition
//! (grad ψ_u | grad φ)_M = (u | grad φ)_M for all φ, and makes the
//! projection exactly idempotent, exactly L²-symmetric, and an exact
//! annihilator of discrete gradients (up to solver tolerance). The
//! divergence of projected fields is reported with the quadrature-
//! compatible divergence −(1/w) Gᵀ M_v, whose interior stencil is the
//! conservative form of div.
//!
//! The operator is SPD with a small kernel (constants, plus the Nyquist
//! column mode on some grids). The default solver on the preset
//! geometries factors the per-wavenumber blocks directly; a deflated
//! Jacobi-CG handles general charts.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::ChartGeometry;
use crate::ops;
use crate::spectral::{BlockOp, BlockSolver};
use crate::stencil::{self, Comp};

/// Δ_B φ = f on M, (grad φ | ν)_g = h on Σ.
pub struct NeumannPoissonProblem {
    pub rhs: ScalarField,
    /// Boundary flux h per boundary segment (one value per column).
    pub flux: Vec<Vec<f64>>,
}

pub struct HelmholtzResult {
    pub projected: VectorField,
    /// Zero-mean potential ψ_u.
    pub potential: ScalarField,
    /// ‖div projected‖_M (compatible divergence), relative to ‖u‖_{H¹}.
    pub residual_div: f64,
    /// L²(Σ) norm of the normal trace of the projected field, relative.
    pub residual_flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonMethod {
    /// Direct per-wavenumber factorization (φ-independent metrics).
    Spectral,
    /// Deflated Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// b = Gᵀ M_v u: the weak-divergence functional of u against node basis
/// scalars, (u | G φ)_M = Σ_p b_p φ_p.
pub fn gradient_adjoint_mass(geom: &ChartGeometry, u: &VectorField) -> Array2<f64> {
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    // (u | Gφ)_M = Σ w u^k ∂_k φ
    let mut q1 = Array2::zeros((n1, n2));
    let mut q2 = Array2::zeros((n1, n2));
    for i in 0..n1 {
        for j in 0..n2 {
            let w = geom.weight[[i, j]];
            q1[[i, j]] = w * u.u1[[i, j]];
            q2[[i, j]] = w * u.u2[[i, j]];
        }
    }
    let mut b = Array2::zeros((n1, n2));
    stencil::d1_adjoint_into(grid, &q1, Comp::SCALAR, &mut b);
    stencil::d2_adjoint_into(grid, &q2, &mut b);
    b
}

/// The quadrature-compatible divergence −(1/w) Gᵀ M_v u. At interior nodes
/// this is the conservative form (1/√g)∂_i(√g u^i) up to the stencil
/// family; it is the divergence notion the projection annihilates.
pub fn compatible_divergence(u: &VectorField) -> ScalarField {
    let geom = &u.geom;
    let b = gradient_adjoint_mass(geom, u);
    let mut out = ScalarField::zeros(geom);
    for (o, (bb, w)) in out
        .a
        .iter_mut()
        .zip(b.iter().zip(geom.weight.iter()))
    {
        *o = -bb / w;
    }
    out
}

/// Shared Poisson solve machinery: kernel basis, method backend.
pub struct Projector {
    pub geom: Arc<ChartGeometry>,
    pub method: PoissonMethod,
    solver: Option<BlockSolver>,
    /// w-orthonormal kernel basis of G (constants, Nyquist column mode).
    null_basis: Vec<Array2<f64>>,
    /// Jacobi diagonal for the CG path.
    jacobi: Array2<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

fn ln_apply(geom: &Arc<ChartGeometry>, phi: &Array2<f64>) -> Array2<f64> {
    let sf = ScalarField {
        geom: geom.clone(),
        a: phi.clone(),
    };
    let g = ops::grad_scalar(&sf);
    gradient_adjoint_mass(geom, &g)
}

fn wdot(geom: &ChartGeometry, a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for ((x, y), w) in a.iter().zip(b.iter()).zip(geom.weight.iter()) {
        acc += w * x * y;
    }
    acc
}

impl Projector {
    pub fn new(geom: &Arc<ChartGeometry>, method: PoissonMethod, tol: f64) -> Result<Projector> {
        let grid = &geom.grid;
        let (n1, n2) = (grid.n1, grid.n2);
        // kernel candidates of G
        let mut null_basis = Vec::new();
        for cand in [
            Array2::from_elem((n1, n2), 1.0),
            Array2::from_shape_fn((n1, n2), |(_, j)| if j % 2 == 0 { 1.0 } else { -1.0 }),
        ] {
            let sf = ScalarField {
                geom: geom.clone(),
                a: cand.clone(),
            };
            let g = ops::grad_scalar(&sf);
            let gn = ops::norm_m(&g);
            if gn < 1e-10 {
                // w-orthonormalize against what we have
                let mut v = cand;
                for e in &null_basis {
                    let c = wdot(geom, &v, e);
                    v.zip_mut_with(e, |a, b| *a -= c * b);
                }
                let n = wdot(geom, &v, &v).sqrt();
                if n > 1e-12 {
                    v.mapv_inplace(|x| x / n);
                    null_basis.push(v);
                }
            }
        }

        let solver = match method {
            PoissonMethod::Spectral => {
                let gc = geom.clone();
                let op = move |f: &[f64]| -> Vec<f64> {
                    let a = Array2::from_shape_vec((n1, n2), f.to_vec()).unwrap();
                    let out = ln_apply(&gc, &a);
                    out.into_raw_vec_and_offset().0
                };
                let blocks = BlockOp::probe(grid, 1, &op)?;
                Some(blocks.factor_pinv(1e-12))
            }
            PoissonMethod::Cg => None,
        };

        // Jacobi diagonal surrogate: w·(2 g¹¹/h1² + 2 g²²·k̄²) with a
        // representative angular wavenumber.
        let kbar = (n2 as f64 / 3.0).powi(2);
        let jacobi = Array2::from_shape_fn((n1, n2), |(i, j)| {
            geom.weight[[i, j]]
                * (2.0 * geom.ginv11[[i, j]] / (grid.h1 * grid.h1)
                    + geom.ginv22[[i, j]] * kbar)
        });

        Ok(Projector {
            geom: geom.clone(),
            method,
            solver,
            null_basis,
            jacobi,
            tol,
            max_iter: 20_000,
        })
    }

    fn deflate(&self, b: &mut Array2<f64>) -> f64 {
        let mut defect: f64 = 0.0;
        for e in &self.null_basis {
            // b is a plain functional vector: deflate in the Euclidean
            // pairing against w-normalized kernel fields
            let c = b.iter().zip(e.iter()).map(|(x, y)| x * y).sum::<f64>()
                / e.iter().map(|y| y * y).sum::<f64>();
            defect = defect.max(c.abs());
            b.zip_mut_with(e, |x, y| *x -= c * y);
        }
        defect
    }

    fn remove_null(&self, phi: &mut Array2<f64>) {
        for e in &self.null_basis {
            let c = wdot(&self.geom, phi, e);
            phi.zip_mut_with(e, |x, y| *x -= c * y);
        }
    }

    /// Solve L_N ψ = b (b deflated in place), returning (ψ, rel residual).
    pub fn solve_ln(&self, b: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
        let geom = &self.geom;
        let (n1, n2) = (geom.grid.n1, geom.grid.n2);
        let mut rhs = b.clone();
        self.deflate(&mut rhs);
        let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok((Array2::zeros((n1, n2)), 0.0));
        }
        let mut psi = match (&self.solver, self.method) {
            (Some(s), _) => {
                let x = s.solve(rhs.as_slice().unwrap());
                Array2::from_shape_vec((n1, n2), x).unwrap()
            }
            (None, _) => self.cg(&rhs)?,
        };
        self.remove_null(&mut psi);
        let resid = {
            let ax = ln_apply(&self.geom, &psi);
            let mut r2 = 0.0;
            for (a, b) in ax.iter().zip(rhs.iter()) {
                r2 += (a - b) * (a - b);
            }
            r2.sqrt() / bnorm
        };
        Ok((psi, resid))
    }

    fn cg(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        let geom = &self.geom;
        let (n1, n2) = (geom.grid.n1, geom.grid.n2);
        let mut x = Array2::<f64>::zeros((n1, n2));
        let mut r = b.clone();
        let bnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut z = &r / &self.jacobi;
        self.deflate_search(&mut z);
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
        for it in 0..self.max_iter {
            let ap = ln_apply(geom, &p);
            let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(Error::SolverFailure {
                    solver: "poisson CG",
                    iterations: it,
                    residual: f64::NAN,
                    tol: self.tol,
                });
            }
            let alpha = rz / pap;
            x.zip_mut_with(&p, |a, b| *a += alpha * b);
            r.zip_mut_with(&ap, |a, b| *a -= alpha * b);
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= self.tol * bnorm {
                return Ok(x);
            }
            z = &r / &self.jacobi;
            self.deflate_search(&mut z);
            let rz_new: f64 = r.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            p.zip_mut_with(&z, |a, b| *a = b + beta * *a);
        }
        Err(Error::SolverFailure {
            solver: "poisson CG",
            iterations: self.max_iter,
            residual: r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm,
            tol: self.tol,
        })
    }

    fn deflate_search(&self, z: &mut Array2<f64>) {
        for e in &self.null_basis {
            let c = z.iter().zip(e.iter()).map(|(x, y)| x * y).sum::<f64>()
                / e.iter().map(|y| y * y).sum::<f64>();
            z.zip_mut_with(e, |x, y| *x -= c * y);
        }
    }

    /// P_H u = u − G ψ_u without diagnostics (hot path). The φ-Nyquist
    /// column mode is removed first: Fourier differentiation treats it as
    /// constant, which would otherwise leave a grid ghost of the rotation
    /// field inside the divergence-free subspace.
    pub fn project(&self, u: &VectorField) -> Result<VectorField> {
        let mut ud = u.clone();
        dealias_nyquist(&mut ud);
        let b = gradient_adjoint_mass(&self.geom, &ud);
        let (psi, _res) = self.solve_ln(&b)?;
        let sf = ScalarField {
            geom: self.geom.clone(),
            a: psi,
        };
        let gpsi = ops::grad_scalar(&sf);
        Ok(ud.sub(&gpsi))
    }
}

/// Remove the φ-Nyquist column mode of both velocity components (an
/// M-orthogonal projection on the preset metrics).
pub fn dealias_nyquist(u: &mut VectorField) {
    let grid = &u.geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let inv = 1.0 / n2 as f64;
    for comp in [&mut u.u1, &mut u.u2] {
        for i in 0..n1 {
            let mut c = 0.0;
            for j in 0..n2 {
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                c += sgn * comp[[i, j]];
            }
            c *= inv;
            for j in 0..n2 {
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                comp[[i, j]] -= c * sgn;
            }
        }
    }
}

/// C³ smoothstep that vanishes identically below t = 1/2 (keeps flux
/// liftings away from a chart pole).
fn cutoff(t: f64) -> f64 {
    if t <= 0.5 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let s = (t - 0.5) / 0.5;
        s * s * s * s * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s)
    }
}

/// Solve the Neumann Poisson problem, returning the zero-mean potential
/// and the compatibility defect ∮h − ∫f that was projected out.
///
/// Inhomogeneous flux data is imposed by subtracting a smooth lifting
/// potential with the prescribed normal derivative, so the variational
/// solve only ever sees natural (zero-flux) boundary data.
pub fn solve_neumann_poisson(
    proj: &Projector,
    problem: &NeumannPoissonProblem,
    _tol: f64,
) -> Result<(ScalarField, f64)> {
    problem.rhs.check_finite("neumann rhs")?;
    let geom = &proj.geom;
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    // b_φ = −(f, φ)_M
    let mut b = Array2::zeros((n1, n2));
    for ((bb, f), w) in b
        .iter_mut()
        .zip(problem.rhs.a.iter())
        .zip(geom.weight.iter())
    {
        *bb = -f * w;
    }
    // compatibility defect ∮h − ∫f (reported; the deflation removes it)
    let mut defect: f64 = b.iter().sum();

    let mut lift: Option<Array2<f64>> = None;
    if !problem.flux.is_empty() {
        if problem.flux.len() != geom.boundary.len() {
            return Err(Error::ShapeMismatch(
                "boundary flux segments do not match geometry".into(),
            ));
        }
        let span = grid.x1 - grid.x0;
        let mut any = false;
        let mut lf = Array2::<f64>::zeros((n1, n2));
        for (seg, h) in geom.boundary.iter().zip(&problem.flux) {
            defect += h.iter().zip(&seg.weights).map(|(a, w)| a * w).sum::<f64>();
            if h.iter().all(|v| *v == 0.0) {
                continue;
            }
            any = true;
            for i in 0..n1 {
                let x = grid.x(i);
                let t = (x - grid.x0) / span;
                // ℓ with dℓ/dν = 1 on this segment, 0 on the other; kept
                // away from a pole by the cutoff.
                let l = match seg.side {
                    crate::grid::Side::Hi => {
                        let c = if grid.edges[0] == crate::grid::EdgeKind::Pole {
                            cutoff(t)
                        } else {
                            cutoff(0.5 + 0.5 * t)
                        };
                        // quadratic with slope 1 at x1, slope ~0 where cut off
                        (x - grid.x0) * (x - grid.x0) / (2.0 * span) * c
                    }
                    crate::grid::Side::Lo => {
                        (grid.x1 - x) * (grid.x1 - x) / (2.0 * span) * cutoff(1.5 - t)
                    }
                };
                // normal is ±∂x/√g11; flux h means ∂x ψ = ±h √g11
                for j in 0..n2 {
                    let sg11 = match seg.side {
                        crate::grid::Side::Hi => seg.metric[j][0].sqrt(),
                        crate::grid::Side::Lo => seg.metric[j][0].sqrt(),
                    };
                    lf[[i, j]] += h[j] * sg11 * l;
                }
            }
        }
        if any {
            // subtract the strong discrete Laplacian of the lift: this keeps
            // the flux budget ∮h visible to the solvability projection
            // (the weak form (G lift | G φ)_M loses it against constants)
            let lsf = ScalarField {
                geom: geom.clone(),
                a: lf.clone(),
            };
            let dl = ops::laplace_beltrami(&lsf);
            for ((bb, d), w) in b.iter_mut().zip(dl.a.iter()).zip(geom.weight.iter()) {
                *bb += d * w;
            }
            lift = Some(lf);
        }
    }

    let (mut psi, _res) = proj.solve_ln(&b)?;
    if let Some(lf) = lift {
        psi.zip_mut_with(&lf, |a, b| *a += b);
        // restore the zero-mean gauge
        let mean = wdot(geom, &psi, &Array2::from_elem((n1, n2), 1.0))
            / geom.weight.iter().sum::<f64>();
        psi.mapv_inplace(|v| v - mean);
    }
    Ok((
        ScalarField {
            geom: geom.clone(),
            a: psi,
        },
        defect,
    ))
}

/// Helmholtz projection with reported residuals.
pub fn helmholtz_project(proj: &Projector, u: &VectorField, _tol: f64) -> Result<HelmholtzResult> {
    u.check_finite("helmholtz input")?;
    let geom = &proj.geom;
    let mut u = u.clone();
    dealias_nyquist(&mut u);
    let u = &u;
    let b = gradient_adjoint_mass(geom, u);
    let (psi, _res) = proj.solve_ln(&b)?;
    let potential = ScalarField {
        geom: geom.clone(),
        a: psi,
    };
    let gpsi = ops::grad_scalar(&potential);
    let projected = u.sub(&gpsi);

    let h1 = ops::h1_norm(u).max(1e-300);
    let div = compatible_divergence(&projected);
    let residual_div = ops::norm_m_scalar(&div) / h1;
    let mut flux2 = 0.0;
    for seg in &geom.boundary {
        let tr = ops::normal_trace(&projected, seg);
        for (t, w) in tr.iter().zip(&seg.weights) {
            flux2 += w * t * t;
        }
    }
    let residual_flux = flux2.sqrt() / ops::norm_m(u).max(1e-300);
    Ok(HelmholtzResult {
        projected,
        potential,
        residual_div,
        residual_flux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryKind, GeometrySpec};
    use crate::synth;

    fn geom(kind: GeometryKind, n: usize) -> Arc<ChartGeometry> {
        build_geometry(&GeometrySpec {
            kind,
            resolution: (n, n),
        })
        .unwrap()
    }

    fn presets(n: usize) -> Vec<Arc<ChartGeometry>> {
        vec![
            geom(GeometryKind::Disk { radius: 1.0 }, n),
            geom(
                GeometryKind::SphericalCap {
                    theta_max: std::f64::consts::FRAC_PI_2,
                },
                n,
            ),
            geom(
                GeometryKind::Cylinder {
                    radius: 1.0,
                    height: 1.0,
                },
                n,
            ),
        ]
    }

    #[test]
    fn zero_problem_gives_zero_potential() {
        let g = presets(16).remove(0);
        let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
        let problem = NeumannPoissonProblem {
            rhs: ScalarField::zeros(&g),
            flux: vec![vec![0.0; 16]],
        };
        let (phi, defect) = solve_neumann_poisson(&p, &problem, 1e-10).unwrap();
        assert!(phi.a.iter().all(|v| v.abs() < 1e-12));
        assert!(defect.abs() < 1e-12);
    }

    #[test]
    fn cylinder_neumann_eigenfunction_oracle() {
        // Δ φ = −λ φ with φ = cos(kπz/h), zero flux at the rims.
        let mut errs = Vec::new();
        for n in [24usize, 48] {
            let g = geom(
                GeometryKind::Cylinder {
                    radius: 1.0,
                    height: 1.0,
                },
                n,
            );
            let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
            let k = 2.0;
            let lam = (k * std::f64::consts::PI).powi(2);
            let exact = ScalarField::from_fn(&g, |x, _| (k * std::f64::consts::PI * x).cos());
            let problem = NeumannPoissonProblem {
                rhs: ScalarField::from_fn(&g, |x, _| {
                    -lam * (k * std::f64::consts::PI * x).cos()
                }),
                flux: vec![vec![0.0; n], vec![0.0; n]],
            };
            let (phi, _) = solve_neumann_poisson(&p, &problem, 1e-10).unwrap();
            let mut diff = phi.clone();
            diff.a.zip_mut_with(&exact.a, |a, b| *a -= b);
            errs.push(ops::norm_m_scalar(&diff));
        }
        assert!(
            errs[1] < errs[0] / 3.0,
            "eigenfunction errors do not converge: {errs:?}"
        );
        assert!(errs[1] < 2e-2, "{errs:?}");
    }

    #[test]
    fn disk_radial_oracle_with_unit_flux() {
        // (1/r)(r φ')' = 2/R with φ'(R) = 1: φ = r²/(2R) − R/4 (zero mean).
        let mut errs = Vec::new();
        for n in [24usize, 48] {
            let g = geom(GeometryKind::Disk { radius: 1.0 }, n);
            let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
            let problem = NeumannPoissonProblem {
                rhs: ScalarField::from_fn(&g, |_, _| 2.0),
                flux: vec![vec![1.0; n]],
            };
            let (phi, defect) = solve_neumann_poisson(&p, &problem, 1e-10).unwrap();
            assert!(defect.abs() < 1e-10, "compatible data, defect {defect}");
            let exact = ScalarField::from_fn(&g, |x, _| 0.5 * x * x - 0.25);
            let mut diff = phi.clone();
            diff.a.zip_mut_with(&exact.a, |a, b| *a -= b);
            errs.push(ops::norm_m_scalar(&diff));
        }
        assert!(errs[1] < errs[0] / 3.0 || errs[1] < 1e-10, "{errs:?}");
    }

    #[test]
    fn projection_annihilates_discrete_gradients_exactly() {
        for g in presets(20) {
            let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
            let chi = synth::random_stream(&g, 42);
            let u = ops::grad_scalar(&chi);
            let r = helmholtz_project(&p, &u, 1e-10).unwrap();
            let rel = ops::norm_m(&r.projected) / ops::norm_m(&u).max(1e-30);
            assert!(rel < 1e-9, "gradient not annihilated: {rel} on {:?}", g.kind);
        }
    }

    #[test]
    fn projection_fixes_rotation_field() {
        for g in presets(20) {
            let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
            let z = VectorField::from_fn(&g, |_, _| [0.0, 1.0]);
            let r = helmholtz_project(&p, &z, 1e-10).unwrap();
            let diff = r.projected.sub(&z);
            assert!(
                ops::norm_m(&diff) < 1e-10 * ops::norm_m(&z),
                "rotation field altered on {:?}",
                g.kind
            );
        }
    }

    #[test]
    fn projection_idempotent_symmetric_divfree() {
        for g in presets(24) {
            let p = Projector::new(&g, PoissonMethod::Spectral, 1e-10).unwrap();
            let u = synth::random_smooth_vector(&g, 7);
            let v = synth::random_smooth_vector(&g, 8);
            let ru = helmholtz_project(&p, &u, 1e-10).unwrap();
            let rv = helmholtz_project(&p, &v, 1e-10).unwrap();
            // idempotency
            let r2 = helmholtz_project(&p, &ru.projected, 1e-10).unwrap();
            let drift = ops::norm_m(&r2.projected.sub(&ru.projected)) / ops::norm_m(&u);
            assert!(drift < 1e-9, "not idempotent: {drift} on {:?}", g.kind);
            // symmetry (P u | v) = (u | P v)
            let lhs = ops::inner_product_m(&ru.projected, &v);
            let rhs = ops::inner_product_m(&u, &rv.projected);
            assert!(
                (lhs - rhs).abs() < 1e-9 * ops::norm_m(&u) * ops::norm_m(&v),
                "not symmetric on {:?}: {} vs {}",
                g.kind,
                lhs,
                rhs
            );
            // compatible divergence of output at solver level
            assert!(
                ru.residual_div < 1e-9,
                "divergence residual {} on {:?}",
                ru.residual_div,
                g.kind
            );
            // normal trace is only O(h²), but must be small
            assert!(
                ru.residual_flux < 0.2,
                "flux residual {} on {:?}",
                ru.residual_flux,
                g.kind
            );
        }
    }

    #[test]
    fn cg_and_spectral_paths_agree() {
        let g = geom(GeometryKind::Disk { radius: 1.0 }, 16);
        let ps = Projector::new(&g, PoissonMethod::Spectral, 1e-12).unwrap();
        let pc = Projector::new(&g, PoissonMethod::Cg, 1e-12).unwrap();
        let u = synth::random_smooth_vector(&g, 3);
        let a = ps.project(&u).unwrap();
        let b = pc.project(&u).unwrap();
        let diff = a.sub(&b);
        assert!(ops::norm_m(&diff) < 1e-8 * ops::norm_m(&u));
    }
}
