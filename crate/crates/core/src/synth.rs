//! Synthetic fields: closed-form smooth fields used by convergence tests
//! and oracles, and seeded random divergence-free initial data.
//!
//! Smooth generic fields are produced through the isometric embedding of
//! the preset charts into R³ (component functions of a fixed smooth map
//! restricted to the surface), which guarantees smoothness across the
//! chart pole. Divergence-free tangent fields come from stream functions
//! vanishing on the boundary.

use std::sync::Arc;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::field::{ScalarField, VectorField};
use crate::geometry::ChartGeometry;
use crate::grid::EdgeKind;
use crate::stencil::{self, Comp};

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// F(p) = sin(a·p + 0.3) + (b·p)², a fixed smooth function of R³.
fn ambient_scalar(p: [f64; 3]) -> (f64, [f64; 3]) {
    let a = [1.1, -0.7, 0.8];
    let b = [0.4, 0.9, -0.3];
    let s = (dot3(a, p) + 0.3).sin();
    let c = (dot3(a, p) + 0.3).cos();
    let t = dot3(b, p);
    let val = s + t * t;
    let grad = [
        c * a[0] + 2.0 * t * b[0],
        c * a[1] + 2.0 * t * b[1],
        c * a[2] + 2.0 * t * b[2],
    ];
    (val, grad)
}

/// A fixed smooth vector field of R³ (each component with closed form).
fn ambient_vector(p: [f64; 3]) -> [f64; 3] {
    [
        (0.9 * p[1] + 0.2).sin() + 0.5 * p[2],
        (1.3 * p[0]).cos() - 0.4 * p[2] * p[2],
        0.7 * p[0] * p[1] + (0.6 * p[2]).sin(),
    ]
}

/// Smooth scalar field on the manifold (restriction of `ambient_scalar`).
pub fn embedded_scalar_field(geom: &Arc<ChartGeometry>) -> ScalarField {
    ScalarField::from_fn(geom, |x, y| ambient_scalar(geom.embed(x, y)).0)
}

/// Analytic tangential gradient of `embedded_scalar_field` in chart
/// components: u^a = g^{ab} (∇F · e_b).
pub fn embedded_scalar_gradient(geom: &Arc<ChartGeometry>) -> VectorField {
    let g = geom.clone();
    VectorField::from_fn(geom, move |x, y| {
        let p = g.embed(x, y);
        let (_, gf) = ambient_scalar(p);
        let e1 = g.embed_vector(x, y, [1.0, 0.0]);
        let e2 = g.embed_vector(x, y, [0.0, 1.0]);
        let f1 = dot3(gf, e1);
        let f2 = dot3(gf, e2);
        // metric from the embedding tangents (isometric charts)
        let g11 = dot3(e1, e1);
        let g12 = dot3(e1, e2);
        let g22 = dot3(e2, e2);
        let det = g11 * g22 - g12 * g12;
        [(g22 * f1 - g12 * f2) / det, (g11 * f2 - g12 * f1) / det]
    })
}

/// Smooth generic vector field: tangential projection of a fixed ambient
/// field, in chart components. Not divergence-free and not tangent to Σ.
pub fn smooth_vector_field(geom: &Arc<ChartGeometry>) -> VectorField {
    let g = geom.clone();
    VectorField::from_fn(geom, move |x, y| {
        let p = g.embed(x, y);
        let w = ambient_vector(p);
        let e1 = g.embed_vector(x, y, [1.0, 0.0]);
        let e2 = g.embed_vector(x, y, [0.0, 1.0]);
        let f1 = dot3(w, e1);
        let f2 = dot3(w, e2);
        let g11 = dot3(e1, e1);
        let g12 = dot3(e1, e2);
        let g22 = dot3(e2, e2);
        let det = g11 * g22 - g12 * g12;
        [(g22 * f1 - g12 * f2) / det, (g11 * f2 - g12 * f1) / det]
    })
}

/// Closed-form divergence-free tangent field from a stream function that
/// vanishes on the boundary: u = (ψ_y/√g, −ψ_x/√g).
///
/// The stream functions are chosen smooth across the pole (mode-2 angular
/// dependence with even radial profiles). `mode` picks the angular
/// wavenumber variant (2 or 3).
pub fn stream_function_field(geom: &Arc<ChartGeometry>, mode: usize) -> VectorField {
    use crate::geometry::GeometryKind as GK;
    let k = if mode == 3 { 3.0 } else { 2.0 };
    match &geom.kind {
        GK::Disk { radius } => {
            let rr = *radius;
            VectorField::from_fn(geom, move |x, y| {
                let rho = x / rr;
                // ψ = ρ^k (1-ρ²)² cos(k y)
                let f = rho.powf(k) * (1.0 - rho * rho).powi(2);
                let fp = (k * rho.powf(k - 1.0) * (1.0 - rho * rho).powi(2)
                    + rho.powf(k) * 2.0 * (1.0 - rho * rho) * (-2.0 * rho))
                    / rr;
                let psi_y = -k * f * (k * y).sin();
                let psi_x = fp * (k * y).cos();
                [psi_y / x, -psi_x / x]
            })
        }
        GK::SphericalCap { theta_max } => {
            let tm = *theta_max;
            VectorField::from_fn(geom, move |x, y| {
                let s = x.sin();
                let c = 1.0 - (x / tm) * (x / tm);
                let cp = -2.0 * x / (tm * tm);
                // ψ = sin^k θ c² cos(k y)
                let f = s.powf(k) * c * c;
                let fp = k * s.powf(k - 1.0) * x.cos() * c * c + s.powf(k) * 2.0 * c * cp;
                let psi_y = -k * f * (k * y).sin();
                let psi_x = fp * (k * y).cos();
                [psi_y / s, -psi_x / s]
            })
        }
        GK::Cylinder { radius, height } => {
            let (a, h) = (*radius, *height);
            VectorField::from_fn(geom, move |x, y| {
                let f = (std::f64::consts::PI * x / h).sin().powi(2);
                let fp = std::f64::consts::PI / h * (2.0 * std::f64::consts::PI * x / h).sin();
                let psi_y = -k * f * (k * y).sin();
                let psi_x = fp * (k * y).cos();
                [psi_y / a, -psi_x / a]
            })
        }
        GK::Custom(_) => {
            // No closed-form metric here; use the discrete curl of the same
            // stream function shape (near-divergence-free only).
            let (x0, x1) = (geom.grid.x0, geom.grid.x1);
            let psi = ScalarField::from_fn(geom, move |x, y| {
                let t = (x - x0) / (x1 - x0);
                let f = (std::f64::consts::PI * t).sin().powi(2);
                f * (k * y).cos()
            });
            discrete_curl(&psi)
        }
    }
}

/// Seeded random band-limited stream function; taking its discrete curl
/// gives a reproducible near-divergence-free field (the projection removes
/// the rest). Fourier modes |k| ≤ 4 in φ, low polynomial order radially,
/// with an x² prefactor so chart velocities stay bounded at a pole.
pub fn random_stream(geom: &Arc<ChartGeometry>, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x0, x1) = (geom.grid.x0, geom.grid.x1);
    let span = x1 - x0;
    let kmax = 4usize;
    let pmax = 3usize;
    let mut coeffs = Vec::new();
    for k in 0..=kmax {
        for p in 0..=pmax {
            let a: f64 = rng.gen::<f64>() - 0.5;
            let b: f64 = rng.gen::<f64>() - 0.5;
            coeffs.push((k, p, a, b));
        }
    }
    let pole_lo = geom.grid.edges[0] == EdgeKind::Pole;
    ScalarField::from_fn(geom, move |x, y| {
        let t = (x - x0) / span;
        // vanish at both ends; extra t² keeps velocities bounded at a pole
        let base = if pole_lo {
            t * t * (1.0 - t) * (1.0 - t)
        } else {
            (std::f64::consts::PI * t).sin().powi(2)
        };
        let mut v = 0.0;
        for &(k, p, a, b) in &coeffs {
            let radial = base * (p as f64 * std::f64::consts::PI * t).cos();
            v += radial * (a * (k as f64 * y).cos() + b * (k as f64 * y).sin());
        }
        v
    })
}

/// Discrete curl of a stream function: exactly divergence-free in the
/// conservative sense (the two difference operators commute).
pub fn discrete_curl(psi: &ScalarField) -> VectorField {
    let g = &psi.geom;
    let grid = &g.grid;
    // FLUX_X flavor makes div(curl ψ) vanish exactly (the two difference
    // operators then commute inside the conservative divergence).
    let d1 = stencil::d1(grid, &psi.a, Comp::FLUX_X);
    let d2 = stencil::d2(grid, &psi.a);
    let mut u = VectorField::zeros(g);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            u.u1[[i, j]] = d2[[i, j]] / g.sqrt_g[[i, j]];
            u.u2[[i, j]] = -d1[[i, j]] / g.sqrt_g[[i, j]];
        }
    }
    u
}

/// Reproducible random smooth vector field (not divergence-free).
pub fn random_smooth_vector(geom: &Arc<ChartGeometry>, seed: u64) -> VectorField {
    let psi = random_stream(geom, seed);
    let chi = random_stream(geom, seed.wrapping_add(0x9e37_79b9));
    let mut u = discrete_curl(&psi);
    let grad = crate::ops::grad_scalar(&chi);
    u.axpy(1.0, &grad);
    u
}

/// Random weights as a raw array (uniform in [-0.5, 0.5]).
pub fn random_array(n1: usize, n2: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n1, n2), |_| rng.gen::<f64>() - 0.5)
}
