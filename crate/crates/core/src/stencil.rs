//! Difference stencils on the staggered chart grid, with the pole closure
//! and their exact adjoints.
//!
//! Smooth vector and tensor fields have chart components that scale like
//! s^χ near a pole (s = chart distance to the pole), e.g. u^φ ~ 1/s. The
//! x-derivative of such a component is computed on the rescaled quantity
//! f̃ = f / s^χ, which is analytic across the pole, and unscaled exactly:
//!
//!     ∂x f = s^χ ∂x f̃ + χ (f / s).
//!
//! Across the pole the ghost value of f̃ at x = -s_m is the antipodal node
//! value with the frame parity (-1)^rank: the chart map (x, y) ↦ (-x, y+π)
//! flips both orthonormal frame legs. Metric factors such as g²² ~ s⁻²
//! amplify stage errors of composed operators near the pole, so pole
//! charts use fourth-order (5-point) interior stencils in f̃-space;
//! boundary-adjacent rows use third-order one-sided formulas, interior
//! rows of pole-free charts the plain second-order central difference.
//! The periodic direction is differentiated by Fourier collocation.
//! Adjoints are exact transposes with respect to the plain Euclidean dot
//! product over nodes; metric weights are applied separately.

use ndarray::Array2;

use crate::grid::{EdgeKind, Grid};

/// Frame parity of a component across the pole: (-1)^(tensor rank).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Pole scaling exponent and frame parity of a differenced component.
///
/// χ = (#φ-down indices) − (#φ-up indices) + 1 per (signed) √det g factor;
/// the parity applies to the scaled quantity f̃ = f / s^χ.
#[derive(Debug, Clone, Copy)]
pub struct Comp {
    pub chi: i32,
    pub parity: Parity,
}

impl Comp {
    pub const SCALAR: Comp = Comp {
        chi: 0,
        parity: Parity::Even,
    };
    /// u¹ component of a vector.
    pub const VEC_X: Comp = Comp {
        chi: 0,
        parity: Parity::Odd,
    };
    /// u² component of a vector (~ 1/s at a pole).
    pub const VEC_Y: Comp = Comp {
        chi: -1,
        parity: Parity::Odd,
    };
    /// √g u¹ (conservative flux through x-faces).
    pub const FLUX_X: Comp = Comp {
        chi: 1,
        parity: Parity::Odd,
    };
    /// √g S^{11} for a (2,0)-tensor.
    pub const TFLUX_XX: Comp = Comp {
        chi: 1,
        parity: Parity::Even,
    };
    /// √g S^{21} for a (2,0)-tensor.
    pub const TFLUX_YX: Comp = Comp {
        chi: 0,
        parity: Parity::Even,
    };
}

/// One stencil tap: either a grid row or the mirror of a row through the
/// pole (value = parity sign × node value at the antipodal column).
#[derive(Debug, Clone, Copy)]
enum Tap {
    Node(usize),
    Mirror(usize),
}

/// Per-row x-derivative stencils (coefficients include the 1/h factor).
fn row_stencils(grid: &Grid) -> Vec<Vec<(Tap, f64)>> {
    let n1 = grid.n1;
    let h = grid.h1;
    let pole = grid.edges[0] == EdgeKind::Pole;
    assert!(
        grid.edges[1] != EdgeKind::Pole,
        "pole at the upper chart edge is not supported"
    );
    assert!(n1 >= 5);
    let mut rows: Vec<Vec<(Tap, f64)>> = Vec::with_capacity(n1);
    for i in 0..n1 {
        let st: Vec<(Tap, f64)> = if pole && i + 2 < n1 {
            // fourth-order central, mirroring across the pole as needed
            let tap = |m: i64| -> Tap {
                if m >= 0 {
                    Tap::Node(m as usize)
                } else {
                    Tap::Mirror((-1 - m) as usize)
                }
            };
            let i = i as i64;
            vec![
                (tap(i - 2), 1.0 / (12.0 * h)),
                (tap(i - 1), -8.0 / (12.0 * h)),
                (tap(i + 1), 8.0 / (12.0 * h)),
                (tap(i + 2), -1.0 / (12.0 * h)),
            ]
        } else if !pole && i == 0 {
            vec![
                (Tap::Node(0), -25.0 / (12.0 * h)),
                (Tap::Node(1), 48.0 / (12.0 * h)),
                (Tap::Node(2), -36.0 / (12.0 * h)),
                (Tap::Node(3), 16.0 / (12.0 * h)),
                (Tap::Node(4), -3.0 / (12.0 * h)),
            ]
        } else if !pole && i == 1 {
            vec![
                (Tap::Node(0), -3.0 / (12.0 * h)),
                (Tap::Node(1), -10.0 / (12.0 * h)),
                (Tap::Node(2), 18.0 / (12.0 * h)),
                (Tap::Node(3), -6.0 / (12.0 * h)),
                (Tap::Node(4), 1.0 / (12.0 * h)),
            ]
        } else if i == n1 - 2 {
            vec![
                (Tap::Node(n1 - 5), -1.0 / (12.0 * h)),
                (Tap::Node(n1 - 4), 6.0 / (12.0 * h)),
                (Tap::Node(n1 - 3), -18.0 / (12.0 * h)),
                (Tap::Node(n1 - 2), 10.0 / (12.0 * h)),
                (Tap::Node(n1 - 1), 3.0 / (12.0 * h)),
            ]
        } else if i == n1 - 1 {
            vec![
                (Tap::Node(n1 - 5), 3.0 / (12.0 * h)),
                (Tap::Node(n1 - 4), -16.0 / (12.0 * h)),
                (Tap::Node(n1 - 3), 36.0 / (12.0 * h)),
                (Tap::Node(n1 - 2), -48.0 / (12.0 * h)),
                (Tap::Node(n1 - 1), 25.0 / (12.0 * h)),
            ]
        } else {
            vec![
                (Tap::Node(i - 1), -1.0 / (2.0 * h)),
                (Tap::Node(i + 1), 1.0 / (2.0 * h)),
            ]
        };
        rows.push(st);
    }
    rows
}

fn spow(s: f64, e: i32) -> f64 {
    match e {
        0 => 1.0,
        1 => s,
        -1 => 1.0 / s,
        _ => s.powi(e),
    }
}

/// ∂f/∂ξ¹ on the grid.
pub fn d1(grid: &Grid, f: &Array2<f64>, comp: Comp) -> Array2<f64> {
    let (n1, n2) = (grid.n1, grid.n2);
    let pole = grid.edges[0] == EdgeKind::Pole;
    let chi = if pole { comp.chi } else { 0 };
    let sg = comp.parity.sign();
    let s: Vec<f64> = (0..n1).map(|i| grid.x(i) - grid.x0).collect();
    // f̃ = f / s^χ (identity when there is no pole)
    let ft = if chi == 0 {
        f.clone()
    } else {
        Array2::from_shape_fn((n1, n2), |(i, j)| f[[i, j]] * spow(s[i], -chi))
    };
    let rows = row_stencils(grid);
    let mut out = Array2::zeros((n1, n2));
    for (i, st) in rows.iter().enumerate() {
        let un = spow(s[i], chi);
        for j in 0..n2 {
            let ja = grid.antipode(j);
            let mut acc = 0.0;
            for &(tap, c) in st {
                acc += match tap {
                    Tap::Node(m) => c * ft[[m, j]],
                    Tap::Mirror(m) => c * sg * ft[[m, ja]],
                };
            }
            out[[i, j]] = un * acc
                + if chi != 0 {
                    chi as f64 * f[[i, j]] / s[i]
                } else {
                    0.0
                };
        }
    }
    out
}

/// Adjoint of `d1`: out += d1ᵀ g, exact transpose of the stencil above.
pub fn d1_adjoint_into(grid: &Grid, g: &Array2<f64>, comp: Comp, out: &mut Array2<f64>) {
    let (n1, n2) = (grid.n1, grid.n2);
    let pole = grid.edges[0] == EdgeKind::Pole;
    let chi = if pole { comp.chi } else { 0 };
    let sg = comp.parity.sign();
    let s: Vec<f64> = (0..n1).map(|i| grid.x(i) - grid.x0).collect();
    let rows = row_stencils(grid);
    // accumulate in f̃-space first
    let mut acc = Array2::<f64>::zeros((n1, n2));
    for (i, st) in rows.iter().enumerate() {
        let un = spow(s[i], chi);
        for j in 0..n2 {
            let ja = grid.antipode(j);
            let w = un * g[[i, j]];
            for &(tap, c) in st {
                match tap {
                    Tap::Node(m) => acc[[m, j]] += c * w,
                    Tap::Mirror(m) => acc[[m, ja]] += c * sg * w,
                }
            }
        }
    }
    for i in 0..n1 {
        let sc = spow(s[i], -chi);
        for j in 0..n2 {
            out[[i, j]] += sc * acc[[i, j]]
                + if chi != 0 {
                    chi as f64 * g[[i, j]] / s[i]
                } else {
                    0.0
                };
        }
    }
}

/// ∂f/∂ξ² by Fourier collocation (exact per angular mode, Nyquist mode
/// dropped to keep the operator real and antisymmetric).
pub fn d2(grid: &Grid, f: &Array2<f64>) -> Array2<f64> {
    let (n1, n2) = (grid.n1, grid.n2);
    let mut out = Array2::zeros((n1, n2));
    crate::fourier::with_plan(n2, |plan| {
        let mut buf = vec![rustfft::num_complex::Complex::new(0.0, 0.0); n2];
        for i in 0..n1 {
            for j in 0..n2 {
                buf[j] = rustfft::num_complex::Complex::new(f[[i, j]], 0.0);
            }
            plan.forward.process(&mut buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let ks = signed_wavenumber(k, n2);
                *v = rustfft::num_complex::Complex::new(-v.im * ks, v.re * ks);
            }
            plan.inverse.process(&mut buf);
            let scale = 1.0 / n2 as f64;
            for j in 0..n2 {
                out[[i, j]] = buf[j].re * scale;
            }
        }
    });
    out
}

/// Signed wavenumber with the Nyquist mode zeroed.
pub fn signed_wavenumber(k: usize, n2: usize) -> f64 {
    if 2 * k < n2 {
        k as f64
    } else if 2 * k == n2 {
        0.0
    } else {
        k as f64 - n2 as f64
    }
}

/// out += d2ᵀ g. Fourier differentiation is antisymmetric: d2ᵀ = -d2.
pub fn d2_adjoint_into(grid: &Grid, g: &Array2<f64>, out: &mut Array2<f64>) {
    let d = d2(grid, g);
    out.zip_mut_with(&d, |a, b| *a -= b);
}

/// Second-order extrapolation of a node column to the boundary curve,
/// which sits half a cell beyond the last node row.
pub fn trace(grid: &Grid, f: &Array2<f64>, side: crate::grid::Side) -> Vec<f64> {
    let n1 = grid.n1;
    let mut out = vec![0.0; grid.n2];
    match side {
        crate::grid::Side::Lo => {
            for j in 0..grid.n2 {
                out[j] = 1.5 * f[[0, j]] - 0.5 * f[[1, j]];
            }
        }
        crate::grid::Side::Hi => {
            for j in 0..grid.n2 {
                out[j] = 1.5 * f[[n1 - 1, j]] - 0.5 * f[[n1 - 2, j]];
            }
        }
    }
    out
}

/// out += traceᵀ g for boundary functionals.
pub fn trace_adjoint_into(grid: &Grid, g: &[f64], side: crate::grid::Side, out: &mut Array2<f64>) {
    let n1 = grid.n1;
    match side {
        crate::grid::Side::Lo => {
            for j in 0..grid.n2 {
                out[[0, j]] += 1.5 * g[j];
                out[[1, j]] += -0.5 * g[j];
            }
        }
        crate::grid::Side::Hi => {
            for j in 0..grid.n2 {
                out[[n1 - 1, j]] += 1.5 * g[j];
                out[[n1 - 2, j]] += -0.5 * g[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Side;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_field(grid: &Grid, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((grid.n1, grid.n2), |_| rng.gen::<f64>() - 0.5)
    }

    fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn d1_exact_on_cubics_without_pole() {
        let grid = Grid::new(16, 8, 0.0, 1.0, [EdgeKind::Boundary, EdgeKind::Boundary]);
        let f = Array2::from_shape_fn((16, 8), |(i, _)| {
            let x = grid.x(i);
            0.3 + 2.0 * x - x * x
        });
        let df = d1(&grid, &f, Comp::SCALAR);
        for i in 0..16 {
            let x = grid.x(i);
            for j in 0..8 {
                assert!((df[[i, j]] - (2.0 - 2.0 * x)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn d1_pole_exact_for_scaled_modes() {
        // f = c(y) s^χ with the odd-rank antipodal structure c(y+π) = -c(y)
        // is differentiated exactly (f̃ is constant in x).
        let grid = Grid::new(16, 8, 0.0, 1.0, [EdgeKind::Pole, EdgeKind::Boundary]);
        for comp in [Comp::VEC_Y, Comp::FLUX_X] {
            let f = Array2::from_shape_fn((16, 8), |(i, j)| {
                let s = grid.x(i);
                0.7 * grid.y(j).cos() * s.powi(comp.chi)
            });
            let df = d1(&grid, &f, comp);
            for i in 0..16 {
                for j in 0..8 {
                    let s: f64 = grid.x(i);
                    let exact = 0.7 * grid.y(j).cos() * comp.chi as f64 * s.powi(comp.chi - 1);
                    assert!(
                        (df[[i, j]] - exact).abs() < 1e-9 * (1.0 + exact.abs()),
                        "chi {} row {i}: {} vs {exact}",
                        comp.chi,
                        df[[i, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn d1_constant_components_have_zero_derivative_on_pole_grid() {
        // Rotation-field structure: u² = const must give d1 = 0 exactly
        // through the χ = -1 scaling (f̃ = ω s is a polynomial the 5-point
        // stencil differentiates exactly).
        let grid = Grid::new(12, 8, 0.0, 1.5, [EdgeKind::Pole, EdgeKind::Boundary]);
        let f = Array2::from_elem((12, 8), 0.9);
        let df = d1(&grid, &f, Comp::VEC_Y);
        for v in df.iter() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn d2_exact_on_band_limited() {
        let grid = Grid::new(8, 32, 0.0, 1.0, [EdgeKind::Boundary, EdgeKind::Boundary]);
        let f = Array2::from_shape_fn((8, 32), |(_, j)| {
            (grid.y(j)).sin() + 0.4 * (5.0 * grid.y(j) + 0.3).cos()
        });
        let df = d2(&grid, &f);
        for i in 0..8 {
            for j in 0..32 {
                let exact = grid.y(j).cos() - 2.0 * (5.0 * grid.y(j) + 0.3).sin();
                assert!((df[[i, j]] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoints_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for edges in [
            [EdgeKind::Pole, EdgeKind::Boundary],
            [EdgeKind::Boundary, EdgeKind::Boundary],
        ] {
            let grid = Grid::new(12, 10, 0.0, 1.0, edges);
            for comp in [
                Comp::SCALAR,
                Comp::VEC_X,
                Comp::VEC_Y,
                Comp::FLUX_X,
                Comp::TFLUX_XX,
                Comp::TFLUX_YX,
            ] {
                let f = rand_field(&grid, &mut rng);
                let g = rand_field(&grid, &mut rng);
                let df = d1(&grid, &f, comp);
                let mut atg = Array2::zeros((12, 10));
                d1_adjoint_into(&grid, &g, comp, &mut atg);
                let err = (dot(&df, &g) - dot(&f, &atg)).abs();
                assert!(err < 1e-9, "comp {comp:?} edges {edges:?}: {err}");
            }
            let f = rand_field(&grid, &mut rng);
            let g = rand_field(&grid, &mut rng);
            let df = d2(&grid, &f);
            let mut atg = Array2::zeros((12, 10));
            d2_adjoint_into(&grid, &g, &mut atg);
            assert!((dot(&df, &g) - dot(&f, &atg)).abs() < 1e-12);

            for side in [Side::Lo, Side::Hi] {
                let f = rand_field(&grid, &mut rng);
                let gb: Vec<f64> = (0..10).map(|_| rng.gen::<f64>() - 0.5).collect();
                let tf = trace(&grid, &f, side);
                let mut atg = Array2::zeros((12, 10));
                trace_adjoint_into(&grid, &gb, side, &mut atg);
                let lhs: f64 = tf.iter().zip(&gb).map(|(a, b)| a * b).sum();
                assert!((lhs - dot(&f, &atg)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pole_derivative_of_singular_component_is_accurate() {
        // u^φ of the constant Cartesian field e_x on the disk: -sin y / x.
        // f̃ = -sin y is constant in x, so the derivative is exact.
        let grid = Grid::new(32, 16, 0.0, 1.0, [EdgeKind::Pole, EdgeKind::Boundary]);
        let f = Array2::from_shape_fn((32, 16), |(i, j)| -grid.y(j).sin() / grid.x(i));
        let df = d1(&grid, &f, Comp::VEC_Y);
        for i in 0..32 {
            for j in 0..16 {
                let x = grid.x(i);
                let exact = grid.y(j).sin() / (x * x);
                assert!((df[[i, j]] - exact).abs() < 1e-9 * (1.0 + exact.abs()));
            }
        }
    }
}
