//! The equilibrium space E_α: analytic Killing reference fields, numeric
//! kernel extraction from the Stokes operator, L²-orthogonal projection
//! onto the basis, and the Korn constant on its orthogonal complement.

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::fourier;
use crate::geometry::ChartGeometry;
use crate::ops;
use crate::spectral::BlockOp;
use crate::stokes::{eigenpairs, StokesOperator};
use ndarray::Array2;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSource {
    Analytic,
    NumericKernel,
}

pub struct KillingBasis {
    /// L²(M)-orthonormal fields spanning E_α.
    pub fields: Vec<VectorField>,
    pub source: BasisSource,
    /// max ‖D_z‖_M over the basis.
    pub defect: f64,
}

impl KillingBasis {
    pub fn empty(source: BasisSource) -> KillingBasis {
        KillingBasis {
            fields: Vec::new(),
            source,
            defect: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    /// Gram matrix deviation from the identity.
    pub fn gram_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.fields.iter().enumerate() {
            for (j, b) in self.fields.iter().enumerate() {
                let g = ops::inner_product_m(a, b);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

fn deformation_defect(fields: &[VectorField]) -> f64 {
    fields
        .iter()
        .map(|z| {
            let (d, _) = ops::deformation(z);
            ops::inner_product_m_tensor11(&d, &d).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Analytic equilibria: empty for α > 0; the normalized rotation field
/// ω ∂_φ for α = 0 on every preset (axial translation on the cylinder is
/// excluded by its nonzero normal trace).
pub fn analytic_killing_basis(geom: &Arc<ChartGeometry>, alpha: f64) -> KillingBasis {
    if alpha > 0.0 {
        return KillingBasis::empty(BasisSource::Analytic);
    }
    let z = VectorField::from_fn(geom, |_, _| [0.0, 1.0]);
    let n = ops::norm_m(&z);
    let fields = vec![z.scaled(1.0 / n)];
    let defect = deformation_defect(&fields);
    KillingBasis {
        fields,
        source: BasisSource::Analytic,
        defect,
    }
}

/// Kernel of the Stokes operator by eigenvalue thresholding: eigenvalues
/// below tol·λ_next count as kernel members.
pub fn numeric_killing_basis(op: &StokesOperator, tol: f64) -> Result<KillingBasis> {
    let k = 4;
    let eig = eigenpairs(op, k, 1e-8)?;
    let mut dim = 0;
    while dim < k - 1 && eig.eigenvalues[dim].abs() <= tol * eig.eigenvalues[dim + 1].abs() {
        dim += 1;
    }
    let mut fields: Vec<VectorField> = Vec::new();
    for t in 0..dim {
        let mut v = eig.eigenfields[t].clone();
        for w in &fields {
            let c = ops::inner_product_m(&v, w);
            v.axpy(-c, w);
        }
        let n = ops::norm_m(&v);
        if n > 1e-12 {
            fields.push(v.scaled(1.0 / n));
        }
    }
    let defect = deformation_defect(&fields);
    Ok(KillingBasis {
        fields,
        source: BasisSource::NumericKernel,
        defect,
    })
}

/// Largest principal angle (radians) between the spans of two bases.
pub fn subspace_angle(a: &KillingBasis, b: &KillingBasis) -> f64 {
    if a.dim() != b.dim() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.dim() == 0 {
        return 0.0;
    }
    let m = a.dim();
    let mut g = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = ops::inner_product_m(&a.fields[i], &b.fields[j]);
        }
    }
    let svd = g.svd(false, false);
    let smin = svd.singular_values.min();
    smin.clamp(-1.0, 1.0).acos()
}

/// u = u_par + u_perp with u_par = Σ (u|z_i)_M z_i.
pub fn project_killing(basis: &KillingBasis, u: &VectorField) -> (VectorField, VectorField) {
    let mut par = VectorField::zeros(&u.geom);
    for z in &basis.fields {
        let c = ops::inner_product_m(u, z);
        par.axpy(c, z);
    }
    let perp = u.sub(&par);
    (par, perp)
}

/// Killing components (u|z_i)_M.
pub fn killing_components(basis: &KillingBasis, u: &VectorField) -> Vec<f64> {
    basis
        .fields
        .iter()
        .map(|z| ops::inner_product_m(u, z))
        .collect()
}

/// Fraction of spectral energy in the highest third of φ-modes
/// (smoothness proxy for kernel fields).
pub fn high_mode_energy_fraction(u: &VectorField) -> f64 {
    let grid = &u.geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let cut = n2 / 2 - n2 / 6;
    let mut high = 0.0;
    let mut total = 0.0;
    for comp in [&u.u1, &u.u2] {
        for i in 0..n1 {
            let row: Vec<f64> = (0..n2).map(|j| comp[[i, j]]).collect();
            let modes = fourier::dft(&row);
            for (k, m) in modes.iter().enumerate().take(n2 / 2 + 1) {
                let p = m.norm_sqr();
                total += p;
                if k >= cut {
                    high += p;
                }
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

/// Korn constant: C = 1/√ρ with ρ the smallest Ritz value of
/// ‖D_u‖² / (‖u‖² + ‖∇u‖²) over discretely divergence-free fields
/// orthogonal to the Killing basis.
pub fn korn_constant(op: &StokesOperator, basis: &KillingBasis) -> Result<f64> {
    let geom = &op.geom;
    let grid = &geom.grid;

    // k(u,v) = (D_u | D_v)_M + (α/2)(u|v)_Σ via the operator's own form
    // with μ = 1/2. For α = 0 this is the literal ‖D_u‖² quotient on the
    // complement of the Killing basis; for α > 0 the boundary term is the
    // piece that excludes the rotation field (which has D_z = 0 but does
    // not vanish on Σ), matching the coercivity actually used by the
    // energy decay estimate.
    let kd = StokesOperator::new(geom, op.bc, 0.5, &op.projector)?;

    // h(u,v) = (u|v)_M + (∇u|∇v)_M as a functional
    let h_apply = |u: &VectorField| -> (Array2<f64>, Array2<f64>) {
        let (n1, n2) = (grid.n1, grid.n2);
        let grad = ops::covariant_gradient(u);
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
                let t = [
                    [grad.c[0][0][[i, j]], grad.c[0][1][[i, j]]],
                    [grad.c[1][0][[i, j]], grad.c[1][1][[i, j]]],
                ];
                for k in 0..2 {
                    for l in 0..2 {
                        let mut v = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                v += gm[a][k] * gi[b][l] * t[a][b];
                            }
                        }
                        q[k][l][[i, j]] = w * v;
                    }
                }
            }
        }
        let (mut r1, mut r2) = ops::covariant_gradient_adjoint(geom, &q);
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                let w = geom.weight[[i, j]];
                let gm = [
                    [geom.g11[[i, j]], geom.g12[[i, j]]],
                    [geom.g12[[i, j]], geom.g22[[i, j]]],
                ];
                r1[[i, j]] += w * (gm[0][0] * u.u1[[i, j]] + gm[0][1] * u.u2[[i, j]]);
                r2[[i, j]] += w * (gm[1][0] * u.u1[[i, j]] + gm[1][1] * u.u2[[i, j]]);
            }
        }
        (r1, r2)
    };

    let delta = 1e-4;
    // penalize the Killing directions so they are not near-null for the
    // inverse iteration (the restricted Ritz value is unchanged)
    let c_pen = 10.0;
    let k_pen = |u: &VectorField| -> (Array2<f64>, Array2<f64>) {
        let (mut r1, mut r2) = kd.apply_k(u);
        for z in &basis.fields {
            let c = c_pen * ops::inner_product_m(u, z);
            for i in 0..grid.n1 {
                for j in 0..grid.n2 {
                    let w = geom.weight[[i, j]];
                    let gm = [
                        [geom.g11[[i, j]], geom.g12[[i, j]]],
                        [geom.g12[[i, j]], geom.g22[[i, j]]],
                    ];
                    r1[[i, j]] += c * w * (gm[0][0] * z.u1[[i, j]] + gm[0][1] * z.u2[[i, j]]);
                    r2[[i, j]] += c * w * (gm[1][0] * z.u1[[i, j]] + gm[1][1] * z.u2[[i, j]]);
                }
            }
        }
        (r1, r2)
    };
    let gc = geom.clone();
    let constrain = |u: &VectorField| -> Result<VectorField> {
        let mut v = op.projector.project(u)?;
        for z in &basis.fields {
            let c = ops::inner_product_m(&v, z);
            v.axpy(-c, z);
        }
        Ok(v)
    };
    let probe = |flat: &[f64]| -> Vec<f64> {
        let u = VectorField::from_flat(&gc, flat);
        let (k1, k2) = k_pen(&u);
        let (h1, h2) = h_apply(&u);
        let mut r1 = k1;
        let mut r2 = k2;
        r1.zip_mut_with(&h1, |a, b| *a += delta * b);
        r2.zip_mut_with(&h2, |a, b| *a += delta * b);
        kd.minv(&r1, &r2).to_flat()
    };
    let blocks = BlockOp::probe(grid, 2, &probe)?;
    let solver = blocks.factor_lu()?;

    let m = 4;
    let mut rng = {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(0x4b4f_524e)
    };
    let mut v: Vec<VectorField> = Vec::new();
    for _ in 0..m {
        use rand::Rng;
        let raw = VectorField::from_fn(geom, |_, _| {
            [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]
        });
        v.push(constrain(&raw)?);
    }

    let quotient = |u: &VectorField| -> (f64, f64) {
        let (k1, k2) = k_pen(u);
        let kq = k1.iter().zip(u.u1.iter()).map(|(a, b)| a * b).sum::<f64>()
            + k2.iter().zip(u.u2.iter()).map(|(a, b)| a * b).sum::<f64>();
        let (h1, h2) = h_apply(u);
        let hq = h1.iter().zip(u.u1.iter()).map(|(a, b)| a * b).sum::<f64>()
            + h2.iter().zip(u.u2.iter()).map(|(a, b)| a * b).sum::<f64>();
        (kq, hq)
    };

    let mut rho_prev = f64::INFINITY;
    for _it in 0..200 {
        // inverse iteration y = (K_D + δH)⁻¹ (H x), constrained
        let mut y = Vec::with_capacity(v.len());
        for x in &v {
            let (h1, h2) = h_apply(x);
            let hx = kd.minv(&h1, &h2);
            let sol = VectorField::from_flat(geom, &solver.solve(&hx.to_flat()));
            y.push(constrain(&sol)?);
        }
        // H-orthonormalize the block
        let mut kept: Vec<VectorField> = Vec::new();
        for mut x in y {
            for w in &kept {
                let (h1, h2) = h_apply(w);
                let c = h1.iter().zip(x.u1.iter()).map(|(a, b)| a * b).sum::<f64>()
                    + h2.iter().zip(x.u2.iter()).map(|(a, b)| a * b).sum::<f64>();
                x.axpy(-c, w);
            }
            let (_, hq) = quotient(&x);
            if hq > 1e-26 {
                kept.push(x.scaled(1.0 / hq.sqrt()));
            }
        }
        v = kept;
        if v.is_empty() {
            return Err(Error::Verification(
                "korn iteration lost its subspace".into(),
            ));
        }
        let mut rho_best = f64::INFINITY;
        for x in &v {
            let (kq, hq) = quotient(x);
            rho_best = rho_best.min(kq / hq);
        }
        if (rho_prev - rho_best).abs() <= 1e-10 * rho_best.abs().max(1e-300) {
            rho_prev = rho_best;
            break;
        }
        rho_prev = rho_best;
    }
    let rho = rho_prev;
    if !(rho > 1e-12) {
        return Err(Error::Verification(format!(
            "restricted Korn Ritz value {rho:.3e} is not positive"
        )));
    }
    Ok(1.0 / rho.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryKind, GeometrySpec};
    use crate::helmholtz::{PoissonMethod, Projector};
    use crate::synth;

    fn setup(kind: GeometryKind, n: usize, alpha: f64) -> StokesOperator {
        let geom = build_geometry(&GeometrySpec {
            kind,
            resolution: (n, n),
        })
        .unwrap();
        let proj = Arc::new(Projector::new(&geom, PoissonMethod::Spectral, 1e-12).unwrap());
        StokesOperator::new(&geom, BoundaryCondition::NavierSlip { alpha }, 1.0, &proj).unwrap()
    }

    #[test]
    fn analytic_basis_dimensions() {
        let geom = build_geometry(&GeometrySpec {
            kind: GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            resolution: (16, 16),
        })
        .unwrap();
        let b0 = analytic_killing_basis(&geom, 0.0);
        assert_eq!(b0.dim(), 1);
        assert!(b0.gram_defect() < 1e-12);
        assert!(b0.defect < 1e-12);
        let b1 = analytic_killing_basis(&geom, 0.5);
        assert_eq!(b1.dim(), 0);
    }

    #[test]
    fn numeric_kernel_matches_analytic_on_presets() {
        for kind in [
            GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            GeometryKind::Disk { radius: 1.0 },
            GeometryKind::Cylinder {
                radius: 1.0,
                height: 1.0,
            },
        ] {
            let op = setup(kind.clone(), 20, 0.0);
            let nb = numeric_killing_basis(&op, 1e-6).unwrap();
            assert_eq!(nb.dim(), 1, "kernel dim on {kind:?}");
            let ab = analytic_killing_basis(&op.geom, 0.0);
            let ang = subspace_angle(&ab, &nb);
            assert!(ang < 1e-4, "angle {ang} on {kind:?}");
            assert!(
                high_mode_energy_fraction(&nb.fields[0]) < 1e-6,
                "kernel field is rough on {kind:?}"
            );
        }
    }

    #[test]
    fn numeric_kernel_empty_with_friction() {
        let op = setup(
            GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            20,
            1.0,
        );
        let nb = numeric_killing_basis(&op, 1e-6).unwrap();
        assert_eq!(nb.dim(), 0);
    }

    #[test]
    fn projection_is_pythagorean() {
        let op = setup(GeometryKind::Disk { radius: 1.0 }, 20, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let u = synth::random_smooth_vector(&op.geom, 17);
        let (par, perp) = project_killing(&basis, &u);
        let n2 = ops::norm_m(&u).powi(2);
        let p2 = ops::norm_m(&par).powi(2) + ops::norm_m(&perp).powi(2);
        assert!((n2 - p2).abs() < 1e-10 * n2);
        for z in &basis.fields {
            assert!(ops::inner_product_m(&perp, z).abs() < 1e-12 * ops::norm_m(&u));
        }
        let (zp, zperp) = project_killing(&basis, &basis.fields[0]);
        assert!(ops::norm_m(&zperp) < 1e-12);
        assert!((ops::norm_m(&zp) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_have_no_killing_component() {
        let op = setup(GeometryKind::Disk { radius: 1.0 }, 20, 0.0);
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let chi = synth::random_stream(&op.geom, 5);
        let gphi = ops::grad_scalar(&chi);
        let comps = killing_components(&basis, &gphi);
        for c in comps {
            assert!(
                c.abs() < 1e-8 * ops::norm_m(&gphi).max(1e-30),
                "gradient has killing component {c}"
            );
        }
    }

    #[test]
    fn korn_constant_positive_and_stable() {
        let op = setup(
            GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            20,
            0.0,
        );
        let basis = analytic_killing_basis(&op.geom, 0.0);
        let c = korn_constant(&op, &basis).unwrap();
        assert!(c.is_finite() && c > 0.5 && c < 100.0, "korn constant {c}");
        let op1 = setup(
            GeometryKind::SphericalCap {
                theta_max: std::f64::consts::FRAC_PI_2,
            },
            20,
            1.0,
        );
        let c1 = korn_constant(&op1, &KillingBasis::empty(BasisSource::Analytic)).unwrap();
        assert!(c1.is_finite() && c1 > 0.5 && c1 < 100.0, "korn constant {c1}");
    }
}
