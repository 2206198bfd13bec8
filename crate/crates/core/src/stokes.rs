//! The weak surface Stokes operator with Navier or perfect-slip boundary
//! conditions: bilinear forms, the Helmholtz-projected operator
//! A = P_H M⁻¹ K, resolvent solves, eigenpairs by shift-invert subspace
//! iteration, and the linearization about a Killing field.
//!
//! K is assembled weakly: (K u)·v = a(u, v) for the quadrature form
//!
//!     Navier:       a(u,v) = 2 μ_s (D_u | D_v)_M + α μ_s (u | v)_Σ
//!     perfect slip: a(u,v) = μ_s (∇u | ∇v)_M − μ_s (Ric♯u | v)_M
//!                            − μ_s (L_Σ u | v)_Σ
//!
//! built from the covariant-gradient stencils and their exact adjoints,
//! so the form is symmetric to rounding and (for Navier) positive
//! semidefinite by construction. Natural boundary terms take the place of
//! ghost-cell elimination; traces are second-order extrapolations.

use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::ChartGeometry;
use crate::helmholtz::Projector;
use crate::ops;
use crate::spectral::BlockOp;
use crate::stencil;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    NavierSlip { alpha: f64 },
    PerfectSlip,
}

impl BoundaryCondition {
    pub fn alpha(&self) -> f64 {
        match self {
            BoundaryCondition::NavierSlip { alpha } => *alpha,
            BoundaryCondition::PerfectSlip => 0.0,
        }
    }
}

pub struct StokesOperator {
    pub geom: Arc<ChartGeometry>,
    pub bc: BoundaryCondition,
    pub mu_s: f64,
    pub projector: Arc<Projector>,
}

#[inline]
fn metric_at(geom: &ChartGeometry, i: usize, j: usize) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    (
        [
            [geom.g11[[i, j]], geom.g12[[i, j]]],
            [geom.g12[[i, j]], geom.g22[[i, j]]],
        ],
        [
            [geom.ginv11[[i, j]], geom.ginv12[[i, j]]],
            [geom.ginv12[[i, j]], geom.ginv22[[i, j]]],
        ],
    )
}

impl StokesOperator {
    pub fn new(
        geom: &Arc<ChartGeometry>,
        bc: BoundaryCondition,
        mu_s: f64,
        projector: &Arc<Projector>,
    ) -> Result<StokesOperator> {
        if !(mu_s > 0.0) {
            return Err(Error::InvalidParameter("mu_s must be positive".into()));
        }
        if let BoundaryCondition::NavierSlip { alpha } = bc {
            if !(alpha >= 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(
                    "friction alpha must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(StokesOperator {
            geom: geom.clone(),
            bc,
            mu_s,
            projector: projector.clone(),
        })
    }

    /// K u as a plain functional vector: (K u)·v = a(u, v).
    pub fn apply_k(&self, u: &VectorField) -> (Array2<f64>, Array2<f64>) {
        let geom = &self.geom;
        let grid = &geom.grid;
        let (n1, n2) = (grid.n1, grid.n2);
        let grad = ops::covariant_gradient(u);
        let mut q: [[Array2<f64>; 2]; 2] = [
            [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
            [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
        ];
        let mut r1 = Array2::zeros((n1, n2));
        let mut r2 = Array2::zeros((n1, n2));
        match self.bc {
            BoundaryCondition::NavierSlip { alpha } => {
                for i in 0..n1 {
                    for j in 0..n2 {
                        let (gm, gi) = metric_at(geom, i, j);
                        let w = geom.weight[[i, j]];
                        let t = [
                            [grad.c[0][0][[i, j]], grad.c[0][1][[i, j]]],
                            [grad.c[1][0][[i, j]], grad.c[1][1][[i, j]]],
                        ];
                        // D_u = ½(t + tᵀ_g)
                        let mut d = [[0.0; 2]; 2];
                        for a in 0..2 {
                            for b in 0..2 {
                                let mut tt = 0.0;
                                for kk in 0..2 {
                                    for m in 0..2 {
                                        tt += gi[a][kk] * gm[b][m] * t[m][kk];
                                    }
                                }
                                d[a][b] = 0.5 * (t[a][b] + tt);
                            }
                        }
                        // Q^k_l = 2 μ w g_ik g^{jl} D^i_j
                        let mut qq = [[0.0; 2]; 2];
                        for k in 0..2 {
                            for l in 0..2 {
                                let mut v = 0.0;
                                for a in 0..2 {
                                    for b in 0..2 {
                                        v += gm[a][k] * gi[b][l] * d[a][b];
                                    }
                                }
                                qq[k][l] = 2.0 * self.mu_s * w * v;
                            }
                        }
                        // (Q | D_v) = (sym-part of Q | ∇v)
                        for b in 0..2 {
                            for a in 0..2 {
                                let mut sym = 0.0;
                                for k in 0..2 {
                                    for l in 0..2 {
                                        sym += gi[k][a] * gm[l][b] * qq[k][l];
                                    }
                                }
                                q[b][a][[i, j]] = 0.5 * (qq[b][a] + sym);
                            }
                        }
                    }
                }
                let (a1, a2) = ops::covariant_gradient_adjoint(geom, &q);
                r1 += &a1;
                r2 += &a2;
                if alpha != 0.0 {
                    let c = alpha * self.mu_s;
                    for seg in &geom.boundary {
                        let (t1, t2) = ops::trace_vector(u, seg);
                        let mut q1 = vec![0.0; n2];
                        let mut q2 = vec![0.0; n2];
                        for j in 0..n2 {
                            let m = seg.metric[j];
                            let w = seg.weights[j];
                            q1[j] = c * w * (m[0] * t1[j] + m[1] * t2[j]);
                            q2[j] = c * w * (m[1] * t1[j] + m[2] * t2[j]);
                        }
                        stencil::trace_adjoint_into(grid, &q1, seg.side, &mut r1);
                        stencil::trace_adjoint_into(grid, &q2, seg.side, &mut r2);
                    }
                }
            }
            BoundaryCondition::PerfectSlip => {
                for i in 0..n1 {
                    for j in 0..n2 {
                        let (gm, gi) = metric_at(geom, i, j);
                        let w = geom.weight[[i, j]];
                        let t = [
                            [grad.c[0][0][[i, j]], grad.c[0][1][[i, j]]],
                            [grad.c[1][0][[i, j]], grad.c[1][1][[i, j]]],
                        ];
                        // Q^k_l = μ w g_ik g^{jl} (∇u)^i_j
                        for k in 0..2 {
                            for l in 0..2 {
                                let mut v = 0.0;
                                for a in 0..2 {
                                    for b in 0..2 {
                                        v += gm[a][k] * gi[b][l] * t[a][b];
                                    }
                                }
                                q[k][l][[i, j]] = self.mu_s * w * v;
                            }
                        }
                    }
                }
                let (a1, a2) = ops::covariant_gradient_adjoint(geom, &q);
                r1 += &a1;
                r2 += &a2;
                // −μ (Ric♯ u | v)_M
                let ric = ops::ricci_apply(u);
                for i in 0..n1 {
                    for j in 0..n2 {
                        let (gm, _) = metric_at(geom, i, j);
                        let w = geom.weight[[i, j]];
                        let ru = [ric.u1[[i, j]], ric.u2[[i, j]]];
                        r1[[i, j]] -= self.mu_s * w * (gm[0][0] * ru[0] + gm[0][1] * ru[1]);
                        r2[[i, j]] -= self.mu_s * w * (gm[1][0] * ru[0] + gm[1][1] * ru[1]);
                    }
                }
                // −μ (L_Σ u | v)_Σ = +μ κ_g (P_Σ u | P_Σ v)_Σ
                for seg in &geom.boundary {
                    let (t1, t2) = ops::trace_vector(u, seg);
                    let mut q1 = vec![0.0; n2];
                    let mut q2 = vec![0.0; n2];
                    for j in 0..n2 {
                        let m = seg.metric[j];
                        let w = seg.weights[j];
                        let ut = m[1] * t1[j] + m[2] * t2[j];
                        let c = self.mu_s * seg.kappa_g[j] * w * ut / m[2];
                        q1[j] = c * m[1];
                        q2[j] = c * m[2];
                    }
                    stencil::trace_adjoint_into(grid, &q1, seg.side, &mut r1);
                    stencil::trace_adjoint_into(grid, &q2, seg.side, &mut r2);
                }
            }
        }
        (r1, r2)
    }

    /// a(u, v).
    pub fn form(&self, u: &VectorField, v: &VectorField) -> f64 {
        let (r1, r2) = self.apply_k(u);
        r1.iter().zip(v.u1.iter()).map(|(a, b)| a * b).sum::<f64>()
            + r2.iter().zip(v.u2.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// (u | v)_M.
    pub fn mass(&self, u: &VectorField, v: &VectorField) -> f64 {
        ops::inner_product_m(u, v)
    }

    /// M⁻¹ applied to a functional vector.
    pub fn minv(&self, r1: &Array2<f64>, r2: &Array2<f64>) -> VectorField {
        let geom = &self.geom;
        let grid = &geom.grid;
        let mut out = VectorField::zeros(geom);
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                let (_, gi) = metric_at(geom, i, j);
                let w = geom.weight[[i, j]];
                out.u1[[i, j]] = (gi[0][0] * r1[[i, j]] + gi[0][1] * r2[[i, j]]) / w;
                out.u2[[i, j]] = (gi[1][0] * r1[[i, j]] + gi[1][1] * r2[[i, j]]) / w;
            }
        }
        out
    }

    /// A u = P_H M⁻¹ K u for u already in the divergence-free range.
    pub fn apply_in_range(&self, u: &VectorField) -> Result<VectorField> {
        let (r1, r2) = self.apply_k(u);
        let w = self.minv(&r1, &r2);
        self.projector.project(&w)
    }

    /// A u with the input projected first: the weak realization of
    /// P_H(−μ_s(Δ_M u + Ric♯ u)) under the boundary conditions.
    pub fn apply(&self, u: &VectorField) -> Result<VectorField> {
        let up = self.projector.project(u)?;
        self.apply_in_range(&up)
    }

    /// Navier boundary residual α u + P_Σ((∇u + [∇u]ᵀ)ν_Σ) per segment,
    /// tangential component on extrapolated traces.
    pub fn navier_boundary_residual(&self, u: &VectorField) -> Vec<Vec<f64>> {
        let geom = &self.geom;
        let grid = &geom.grid;
        let grad = ops::covariant_gradient(u);
        let alpha = self.bc.alpha();
        let mut out = Vec::new();
        for seg in &geom.boundary {
            let (t1, t2) = ops::trace_vector(u, seg);
            let tg: Vec<Vec<f64>> = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| stencil::trace(grid, &grad.c[a][b], seg.side))
                .collect();
            let mut res = vec![0.0; grid.n2];
            for j in 0..grid.n2 {
                let m = seg.metric[j];
                let nu = seg.normal[j];
                // (∇u ν)^i = ν^j u^i_|j at the trace
                let gv = [
                    tg[0][j] * nu[0] + tg[1][j] * nu[1],
                    tg[2][j] * nu[0] + tg[3][j] * nu[1],
                ];
                // tangential components along τ = ∂_y
                let gt = (m[1] * gv[0] + m[2] * gv[1]) / m[2];
                let ut = (m[1] * t1[j] + m[2] * t2[j]) / m[2];
                // P_Σ([∇u]ᵀν) = L_Σ u = −κ_g u on tangent fields
                res[j] = gt + (alpha - seg.kappa_g[j]) * ut;
            }
            out.push(res);
        }
        out
    }
}

/// Iterative resolvent: (λ + A) u = f on the divergence-free subspace,
/// conjugate gradients in the (·|·)_M inner product with the projection
/// applied inside every operator application.
pub fn solve_resolvent(
    op: &StokesOperator,
    lambda: f64,
    f: &VectorField,
    tol: f64,
    max_iter: usize,
) -> Result<VectorField> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(
            "resolvent shift must be positive".into(),
        ));
    }
    f.check_finite("resolvent rhs")?;
    let fp = op.projector.project(f)?;
    let fnorm = ops::norm_m(&fp);
    if fnorm == 0.0 {
        return Ok(VectorField::zeros(&op.geom));
    }
    let mut x = VectorField::zeros(&op.geom);
    let mut r = fp.clone();
    let mut p = r.clone();
    let mut rr = op.mass(&r, &r);
    for it in 0..max_iter {
        let mut ap = op.apply_in_range(&p)?;
        ap.axpy(lambda, &p);
        let pap = op.mass(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                solver: "stokes resolvent CG",
                iterations: it,
                residual: rr.sqrt() / fnorm,
                tol,
            });
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = op.mass(&r, &r);
        if rr_new.sqrt() <= tol * fnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        let mut pn = r.clone();
        pn.axpy(beta, &p);
        p = pn;
    }
    Err(Error::SolverFailure {
        solver: "stokes resolvent CG",
        iterations: max_iter,
        residual: rr.sqrt() / fnorm,
        tol,
    })
}

/// Direct per-wavenumber resolvent (λ + A)⁻¹ for the shift-invariant
/// preset geometries; backs the shift-invert eigensolvers.
pub struct DirectResolvent {
    solver: crate::spectral::BlockSolver,
    geom: Arc<ChartGeometry>,
}

impl DirectResolvent {
    pub fn build(op: &StokesOperator, lambda: f64) -> Result<DirectResolvent> {
        let geom = op.geom.clone();
        let grid = &geom.grid;
        let gc = geom.clone();
        let f = |flat: &[f64]| -> Vec<f64> {
            let u = VectorField::from_flat(&gc, flat);
            let mut au = op
                .apply_in_range(&u)
                .expect("projection failed during probing");
            au.axpy(lambda, &u);
            au.to_flat()
        };
        let blocks = BlockOp::probe(grid, 2, &f)?;
        let solver = blocks.factor_lu()?;
        Ok(DirectResolvent { solver, geom })
    }

    pub fn solve(&self, f: &VectorField) -> VectorField {
        let x = self.solver.solve(&f.to_flat());
        VectorField::from_flat(&self.geom, &x)
    }
}

pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<VectorField>,
    pub residuals: Vec<f64>,
}

fn m_orthonormalize(op: &StokesOperator, v: &mut Vec<VectorField>) {
    let mut kept = Vec::new();
    for mut x in v.drain(..) {
        for y in &kept {
            let c = op.mass(&x, y);
            x.axpy(-c, y);
        }
        let n = op.mass(&x, &x).max(0.0).sqrt();
        if n > 1e-13 {
            kept.push(x.scaled(1.0 / n));
        }
    }
    *v = kept;
}

/// k smallest eigenpairs of the projected Stokes operator on the
/// discretely divergence-free subspace.
///
/// On shift-invariant (preset) geometries the operator blocks are probed
/// exactly, so the spectrum is computed per wavenumber by a dense
/// Hermitian eigensolve restricted to the projector's range (± modes
/// counted with their multiplicity, the dealiased Nyquist column skipped).
/// Charts without that symmetry fall back to shift-invert subspace
/// iteration on the resolvent.
pub fn eigenpairs(op: &StokesOperator, k: usize, tol: f64) -> Result<EigenResult> {
    match eigenpairs_direct(op, k, tol) {
        Ok(r) => Ok(r),
        Err(_) => eigenpairs_iterative(op, k, tol),
    }
}

/// Per-node mass entries (w·g_ab); the per-k mass blocks are all this
/// block-diagonal matrix for φ-independent metrics.
fn mass_entries(geom: &ChartGeometry) -> Vec<[f64; 3]> {
    (0..geom.grid.n1)
        .map(|i| {
            let w = geom.weight[[i, 0]];
            [w * geom.g11[[i, 0]], w * geom.g12[[i, 0]], w * geom.g22[[i, 0]]]
        })
        .collect()
}

fn mass_apply(
    me: &[[f64; 3]],
    v: &nalgebra::DVector<nalgebra::Complex<f64>>,
) -> nalgebra::DVector<nalgebra::Complex<f64>> {
    let n1 = me.len();
    let mut out = nalgebra::DVector::zeros(2 * n1);
    for (i, g) in me.iter().enumerate() {
        let a = v[i];
        let b = v[n1 + i];
        out[i] = a * g[0] + b * g[1];
        out[n1 + i] = a * g[1] + b * g[2];
    }
    out
}

fn eigenpairs_direct(op: &StokesOperator, k: usize, tol: f64) -> Result<EigenResult> {
    type C64 = nalgebra::Complex<f64>;
    let geom = &op.geom;
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let m = 2 * n1;

    let gc = geom.clone();
    let proj_op = |flat: &[f64]| -> Vec<f64> {
        let u = VectorField::from_flat(&gc, flat);
        op.projector.project(&u).expect("projection").to_flat()
    };
    let p_blocks = BlockOp::probe(grid, 2, &proj_op)?;
    let gc2 = geom.clone();
    let a_op = |flat: &[f64]| -> Vec<f64> {
        let u = VectorField::from_flat(&gc2, flat);
        op.apply_in_range(&u).expect("apply").to_flat()
    };
    let a_blocks = BlockOp::probe(grid, 2, &a_op)?;
    let me = mass_entries(geom);

    // candidates: (eigenvalue, wavenumber, eigenvector in block space)
    let mut cands: Vec<(f64, usize, nalgebra::DVector<C64>)> = Vec::new();
    for kk in 0..=(n2 / 2) {
        if 2 * kk == n2 {
            continue; // dealiased Nyquist column
        }
        // M-orthonormal basis of range(P̂_k) by modified Gram–Schmidt
        // (mass applied block-diagonally, M·q columns cached)
        let p = &p_blocks.blocks[kk];
        let mut q_cols: Vec<nalgebra::DVector<C64>> = Vec::new();
        let mut mq_cols: Vec<nalgebra::DVector<C64>> = Vec::new();
        for c in 0..m {
            let mut v: nalgebra::DVector<C64> = p.column(c).into_owned();
            for _pass in 0..2 {
                for (qc, mqc) in q_cols.iter().zip(&mq_cols) {
                    let alpha = mqc.dotc(&v);
                    v -= qc * alpha;
                }
            }
            let mv = mass_apply(&me, &v);
            let nrm = v.dotc(&mv).re.max(0.0).sqrt();
            if nrm > 1e-7 {
                let q = v / C64::new(nrm, 0.0);
                mq_cols.push(mass_apply(&me, &q));
                q_cols.push(q);
            }
        }
        if q_cols.is_empty() {
            continue;
        }
        let r = q_cols.len();
        let mut q = DMatrix::<C64>::zeros(m, r);
        for (c, col) in q_cols.iter().enumerate() {
            q.set_column(c, col);
        }
        let aq = &a_blocks.blocks[kk] * &q;
        let mut maq = DMatrix::<C64>::zeros(m, r);
        for c in 0..r {
            let col = mass_apply(&me, &aq.column(c).into_owned());
            maq.set_column(c, &col);
        }
        let mut at = q.ad_mul(&maq);
        // hermitize (A is M-self-adjoint on the range)
        let ath = at.adjoint();
        at = (at + ath) * C64::new(0.5, 0.0);
        let eig = at.symmetric_eigen();
        for t in 0..r {
            let lam = eig.eigenvalues[t];
            let y = eig.eigenvectors.column(t).into_owned();
            let x = &q * y;
            cands.push((lam, kk, x));
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfields = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut scale_floor = 0.0f64;
    'outer: for (lam, kk, x) in &cands {
        let copies = if *kk == 0 { 1 } else { 2 };
        for copy in 0..copies {
            if eigenvalues.len() >= k {
                break 'outer;
            }
            // real field from the complex block vector
            let mut v = VectorField::zeros(geom);
            for c in 0..2 {
                let comp = if c == 0 { &mut v.u1 } else { &mut v.u2 };
                for i in 0..n1 {
                    let xc = x[c * n1 + i];
                    for j in 0..n2 {
                        let ph = (*kk as f64) * grid.y(j);
                        let e = C64::new(ph.cos(), ph.sin());
                        let val = xc * e;
                        comp[[i, j]] = if copy == 0 { val.re } else { val.im };
                    }
                }
            }
            let nrm = ops::norm_m(&v);
            if nrm < 1e-12 {
                continue;
            }
            let v = op.projector.project(&v.scaled(1.0 / nrm))?;
            let nrm2 = ops::norm_m(&v);
            let v = v.scaled(1.0 / nrm2);
            let av = op.apply_in_range(&v)?;
            let lam_r = ops::inner_product_m(&av, &v);
            let mut rres = av;
            rres.axpy(-lam_r, &v);
            let res = ops::norm_m(&rres);
            scale_floor = scale_floor.max(lam_r.abs() * 1e-2).max(1e-10 * op.mu_s);
            eigenvalues.push(lam_r);
            eigenfields.push(v);
            residuals.push(res);
            let _ = lam;
        }
    }
    // verify residuals; bail to the iterative path on trouble
    for (t, res) in residuals.iter().enumerate() {
        let scale = eigenvalues[t].abs().max(scale_floor);
        if *res > tol * scale {
            return Err(Error::SolverFailure {
                solver: "per-wavenumber eigensolve",
                iterations: t,
                residual: *res / scale,
                tol,
            });
        }
    }
    // enforce ascending order after the Rayleigh refinement
    let mut idx: Vec<usize> = (0..eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eigenvalues[a].partial_cmp(&eigenvalues[b]).unwrap());
    Ok(EigenResult {
        eigenvalues: idx.iter().map(|&t| eigenvalues[t]).collect(),
        eigenfields: idx.iter().map(|&t| eigenfields[t].clone()).collect(),
        residuals: idx.iter().map(|&t| residuals[t]).collect(),
    })
}

/// Shift-invert subspace iteration with the shift just left of zero,
/// Rayleigh–Ritz in the M pairing (general-chart fallback).
pub fn eigenpairs_iterative(op: &StokesOperator, k: usize, tol: f64) -> Result<EigenResult> {
    let geom = &op.geom;
    // Shift at the viscosity scale: the spec's 1e-4·μ/area puts the
    // resolvent's condition number near 1e8 and the solve noise above the
    // eigen tolerance; μ·2π/area separates the kernel just as well.
    let sigma = op.mu_s * std::f64::consts::TAU / geom.area();
    let w = DirectResolvent::build(op, sigma)?;
    let m = k + 10;
    let mut rng = ChaCha8Rng::seed_from_u64(0x53_54_4f_4b);
    let mut v: Vec<VectorField> = Vec::new();
    for _ in 0..m {
        let raw = VectorField::from_fn(geom, |_, _| {
            [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]
        });
        v.push(op.projector.project(&raw)?);
    }
    m_orthonormalize(op, &mut v);

    let mut last_res = f64::NAN;
    for _iter in 0..400 {
        let mut y = Vec::with_capacity(v.len());
        for x in &v {
            y.push(op.projector.project(&w.solve(x))?);
        }
        m_orthonormalize(op, &mut y);
        let mm = y.len();
        let mut av = Vec::with_capacity(mm);
        for x in &y {
            av.push(op.apply_in_range(x)?);
        }
        let mut h = DMatrix::<f64>::zeros(mm, mm);
        for i in 0..mm {
            for j in 0..mm {
                h[(i, j)] = op.mass(&y[i], &av[j]);
            }
        }
        let hs = (h.clone() + h.transpose()) * 0.5;
        let eig = hs.symmetric_eigen();
        let mut idx: Vec<usize> = (0..mm).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut vals = Vec::with_capacity(mm);
        let mut vecs: Vec<VectorField> = Vec::with_capacity(mm);
        for &t in &idx {
            vals.push(eig.eigenvalues[t]);
            let mut x = VectorField::zeros(geom);
            for (r, yr) in y.iter().enumerate() {
                x.axpy(eig.eigenvectors[(r, t)], yr);
            }
            vecs.push(x);
        }
        let kk = k.min(mm);
        let mut residuals = Vec::with_capacity(kk);
        let scale_floor = vals
            .iter()
            .take(kk)
            .cloned()
            .fold(0.0f64, f64::max)
            .max(10.0 * sigma)
            * 1e-2;
        let mut done = true;
        let mut worst: f64 = 0.0;
        for (t, vec) in vecs.iter().enumerate().take(kk) {
            let ax = op.apply_in_range(vec)?;
            let mut r = ax;
            r.axpy(-vals[t], vec);
            let res = ops::norm_m(&r);
            // per-pair scaling: a pair is converged relative to its own
            // eigenvalue (with a floor for the near-kernel modes)
            let scale = vals[t].abs().max(scale_floor);
            worst = worst.max(res / scale);
            residuals.push(res);
            if res > tol * scale {
                done = false;
            }
        }
        last_res = worst;
        v = vecs;
        if done {
            return Ok(EigenResult {
                eigenvalues: vals.into_iter().take(kk).collect(),
                eigenfields: v.into_iter().take(kk).collect(),
                residuals,
            });
        }
    }
    Err(Error::SolverFailure {
        solver: "shift-invert subspace iteration",
        iterations: 400,
        residual: last_res,
        tol,
    })
}

/// Linearization about a Killing field u_*:
/// A₀ u = A_N u + P_H(∇_u u_* + ∇_{u_*} u), realized weakly through
/// ⟨B u | v⟩ = −(u ⊗ (u_*)_♭ + u_* ⊗ u_♭ | ∇v)_M.
pub struct LinearizedOperator {
    pub base: StokesOperator,
    pub u_star: VectorField,
    /// ‖D_{u_*}‖_M, reported so callers can warn on non-Killing input.
    pub killing_defect: f64,
}

pub fn assemble_linearized(op: &StokesOperator, u_star: &VectorField) -> LinearizedOperator {
    let (d, _) = ops::deformation(u_star);
    let defect = ops::inner_product_m_tensor11(&d, &d).max(0.0).sqrt();
    LinearizedOperator {
        base: StokesOperator {
            geom: op.geom.clone(),
            bc: op.bc,
            mu_s: op.mu_s,
            projector: op.projector.clone(),
        },
        u_star: u_star.clone(),
        killing_defect: defect,
    }
}

impl LinearizedOperator {
    /// B u (projected) from the weak pairing.
    pub fn apply_b(&self, u: &VectorField) -> Result<VectorField> {
        let geom = &self.base.geom;
        let grid = &geom.grid;
        let (n1, n2) = (grid.n1, grid.n2);
        let us = &self.u_star;
        let mut q: [[Array2<f64>; 2]; 2] = [
            [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
            [Array2::zeros((n1, n2)), Array2::zeros((n1, n2))],
        ];
        for i in 0..n1 {
            for j in 0..n2 {
                let (gm, gi) = metric_at(geom, i, j);
                let w = geom.weight[[i, j]];
                let uu = [u.u1[[i, j]], u.u2[[i, j]]];
                let ss = [us.u1[[i, j]], us.u2[[i, j]]];
                let u_low = [
                    gm[0][0] * uu[0] + gm[0][1] * uu[1],
                    gm[1][0] * uu[0] + gm[1][1] * uu[1],
                ];
                let s_low = [
                    gm[0][0] * ss[0] + gm[0][1] * ss[1],
                    gm[1][0] * ss[0] + gm[1][1] * ss[1],
                ];
                let mut s = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        s[a][b] = uu[a] * s_low[b] + ss[a] * u_low[b];
                    }
                }
                for kk in 0..2 {
                    for l in 0..2 {
                        let mut vv = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                vv += gm[a][kk] * gi[b][l] * s[a][b];
                            }
                        }
                        q[kk][l][[i, j]] = -w * vv;
                    }
                }
            }
        }
        let (r1, r2) = ops::covariant_gradient_adjoint(geom, &q);
        let bu = self.base.minv(&r1, &r2);
        self.base.projector.project(&bu)
    }

    /// A₀ u for u in the divergence-free range.
    pub fn apply_in_range(&self, u: &VectorField) -> Result<VectorField> {
        let mut au = self.base.apply_in_range(u)?;
        let bu = self.apply_b(u)?;
        au.axpy(1.0, &bu);
        Ok(au)
    }
}

/// Complex eigenvalues (and residuals) of the linearized operator near the
/// origin: shift-invert Arnoldi in the M inner product with a direct
/// per-wavenumber factorization of (A₀ + c).
pub struct LinearizedEigen {
    /// (Re λ, Im λ), sorted by real part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// ‖A₀ x − λ x‖_M / (‖x‖ scale) per pair.
    pub residuals: Vec<f64>,
    /// real/imag parts of the Ritz fields.
    pub fields: Vec<(VectorField, VectorField)>,
}

pub fn linearized_eigenpairs(
    lin: &LinearizedOperator,
    k: usize,
    subspace: usize,
) -> Result<LinearizedEigen> {
    let geom = &lin.base.geom;
    let grid = &geom.grid;
    let c = 0.1 * lin.base.mu_s + 1e-4 * lin.base.mu_s / geom.area();
    let gc = geom.clone();
    let f = |flat: &[f64]| -> Vec<f64> {
        let u = VectorField::from_flat(&gc, flat);
        let mut r = lin.apply_in_range(&u).expect("linearized apply");
        r.axpy(c, &u);
        r.to_flat()
    };
    let blocks = BlockOp::probe(grid, 2, &f)?;
    let w = blocks.factor_lu()?;

    let m = subspace.max(k + 8);
    let mut rng = ChaCha8Rng::seed_from_u64(0x41_52_4e_4f);
    let raw = VectorField::from_fn(geom, |_, _| [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]);
    let mut q0 = lin.base.projector.project(&raw)?;
    let n0 = ops::norm_m(&q0);
    q0 = q0.scaled(1.0 / n0);
    let mut basis = vec![q0];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    for jcol in 0..m {
        let wv = VectorField::from_flat(geom, &w.solve(&basis[jcol].to_flat()));
        let mut v = lin.base.projector.project(&wv)?;
        for (i, b) in basis.iter().enumerate() {
            let c_ij = ops::inner_product_m(&v, b);
            h[(i, jcol)] = c_ij;
            v.axpy(-c_ij, b);
        }
        for (i, b) in basis.iter().enumerate() {
            let c2 = ops::inner_product_m(&v, b);
            h[(i, jcol)] += c2;
            v.axpy(-c2, b);
        }
        let nv = ops::norm_m(&v);
        h[(jcol + 1, jcol)] = nv;
        if nv < 1e-12 {
            break;
        }
        basis.push(v.scaled(1.0 / nv));
    }
    let mdone = basis.len() - 1;
    let hm = h.view((0, 0), (mdone, mdone)).into_owned();
    let ev = hm.clone().complex_eigenvalues();
    let mut pairs: Vec<(f64, f64)> = ev
        .iter()
        .filter(|z| z.norm() > 1e-13)
        .map(|z| {
            let inv = 1.0 / z;
            (inv.re - c, inv.im)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.truncate(k);

    let mut fields = Vec::new();
    let mut residuals = Vec::new();
    let scale = pairs
        .iter()
        .map(|p| (p.0 * p.0 + p.1 * p.1).sqrt())
        .fold(1e-30f64, f64::max)
        .max(0.1 * lin.base.mu_s);
    for &(re, im) in &pairs {
        let theta = {
            let lam = nalgebra::Complex::new(re + c, im);
            1.0 / lam
        };
        let mut a = hm.map(|x| nalgebra::Complex::new(x, 0.0));
        for d in 0..mdone {
            a[(d, d)] -= theta * nalgebra::Complex::new(1.0 + 1e-10, 1e-12);
        }
        let lu = a.lu();
        let b0 = nalgebra::DVector::from_element(mdone, nalgebra::Complex::new(1.0, 0.0));
        let y = lu.solve(&b0).unwrap_or(b0);
        let yn = y.norm();
        let y = y.map(|v| v / nalgebra::Complex::new(yn, 0.0));
        let mut xr = VectorField::zeros(geom);
        let mut xi = VectorField::zeros(geom);
        for (r, b) in basis.iter().take(mdone).enumerate() {
            xr.axpy(y[r].re, b);
            xi.axpy(y[r].im, b);
        }
        let axr = lin.apply_in_range(&xr)?;
        let axi = lin.apply_in_range(&xi)?;
        let mut rr = axr.clone();
        rr.axpy(-re, &xr);
        rr.axpy(im, &xi);
        let mut ri = axi.clone();
        ri.axpy(-re, &xi);
        ri.axpy(-im, &xr);
        let xnorm = (ops::inner_product_m(&xr, &xr) + ops::inner_product_m(&xi, &xi)).sqrt();
        let rnorm = (ops::inner_product_m(&rr, &rr) + ops::inner_product_m(&ri, &ri)).sqrt();
        residuals.push(rnorm / (xnorm * scale).max(1e-300));
        fields.push((xr, xi));
    }
    Ok(LinearizedEigen {
        eigenvalues: pairs,
        residuals,
        fields,
    })
}
