//! Per-wavenumber (block-diagonal) form of φ-shift-invariant operators.
//!
//! On the preset geometries every linear operator built from the stencil
//! engine and analytic metric data commutes with rotations of the periodic
//! coordinate, so its matrix block-diagonalizes under the DFT in φ. The
//! blocks are recovered exactly by probing the operator with one column of
//! spikes and DFT-ing the responses; a dense factorization per wavenumber
//! then gives a direct solver. Real fields only need the modes k ≤ n2/2
//! (conjugate symmetry supplies the rest).

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::Grid;

type C64 = Complex<f64>;

/// Flat field layout: comp-major, then row-major nodes:
/// index = c * n1 * n2 + i * n2 + j.
pub fn flat_len(grid: &Grid, ncomp: usize) -> usize {
    ncomp * grid.n1 * grid.n2
}

/// Dense per-wavenumber blocks of a shift-invariant operator.
pub struct BlockOp {
    pub n1: usize,
    pub n2: usize,
    pub ncomp: usize,
    /// blocks[k] for k = 0..=n2/2, each (ncomp·n1) × (ncomp·n1).
    pub blocks: Vec<DMatrix<C64>>,
}

fn shift_field(grid: &Grid, ncomp: usize, f: &[f64], by: usize) -> Vec<f64> {
    let (n1, n2) = (grid.n1, grid.n2);
    let mut out = vec![0.0; f.len()];
    for c in 0..ncomp {
        for i in 0..n1 {
            for j in 0..n2 {
                out[c * n1 * n2 + i * n2 + (j + by) % n2] = f[c * n1 * n2 + i * n2 + j];
            }
        }
    }
    out
}

impl BlockOp {
    /// Recover the blocks of `op` by spike probing (parallel over spike
    /// columns). Fails if the operator is not φ-shift-invariant within a
    /// tolerance.
    pub fn probe(
        grid: &Grid,
        ncomp: usize,
        op: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    ) -> Result<BlockOp> {
        let (n1, n2) = (grid.n1, grid.n2);
        let m = ncomp * n1;
        let nk = n2 / 2 + 1;
        let mut blocks = vec![DMatrix::<C64>::zeros(m, m); nk];

        // shift-invariance sanity check on a deterministic pseudo-random field
        {
            let f: Vec<f64> = (0..flat_len(grid, ncomp))
                .map(|t| ((t.wrapping_mul(2654435761) + 12345) % 1000) as f64 / 1000.0 - 0.5)
                .collect();
            let by = n2 / 4;
            let a = shift_field(grid, ncomp, &op(&f), by);
            let b = op(&shift_field(grid, ncomp, &f, by));
            let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-30);
            let dev = a
                .iter()
                .zip(&b)
                .fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
            if dev > 1e-8 * scale {
                return Err(Error::InvalidParameter(format!(
                    "operator is not shift-invariant (deviation {dev:.3e}, scale {scale:.3e})"
                )));
            }
        }

        let columns: Vec<(usize, Vec<Vec<C64>>)> = (0..m)
            .into_par_iter()
            .map(|col| {
                let (c0, i0) = (col / n1, col % n1);
                let mut spike = vec![0.0; flat_len(grid, ncomp)];
                spike[c0 * n1 * n2 + i0 * n2] = 1.0;
                let resp = op(&spike);
                let mut rows = Vec::with_capacity(m);
                for c in 0..ncomp {
                    for i in 0..n1 {
                        let row0 = c * n1 * n2 + i * n2;
                        rows.push(fourier::dft(&resp[row0..row0 + n2]));
                    }
                }
                (col, rows)
            })
            .collect();
        for (col, rows) in columns {
            for (row, modes) in rows.iter().enumerate() {
                for (k, block) in blocks.iter_mut().enumerate() {
                    block[(row, col)] = modes[k];
                }
            }
        }
        Ok(BlockOp {
            n1,
            n2,
            ncomp,
            blocks,
        })
    }

    /// Pseudo-inverse factorization (rank-revealing, for semidefinite
    /// operators with small nullspaces).
    pub fn factor_pinv(&self, rel_tol: f64) -> BlockSolver {
        let facts = self
            .blocks
            .par_iter()
            .map(|b| {
                let svd = b.clone().svd(true, true);
                let smax = svd.singular_values.max();
                let inv_s = svd
                    .singular_values
                    .iter()
                    .map(|&s| if s > rel_tol * smax { 1.0 / s } else { 0.0 })
                    .collect();
                Factor::Svd {
                    u: svd.u.unwrap(),
                    vt: svd.v_t.unwrap(),
                    inv_s,
                }
            })
            .collect();
        BlockSolver {
            n1: self.n1,
            n2: self.n2,
            ncomp: self.ncomp,
            facts,
        }
    }

    /// LU factorization (operator must be nonsingular in every block).
    pub fn factor_lu(&self) -> Result<BlockSolver> {
        let facts = self
            .blocks
            .par_iter()
            .map(|b| Factor::Lu(b.clone().lu()))
            .collect();
        Ok(BlockSolver {
            n1: self.n1,
            n2: self.n2,
            ncomp: self.ncomp,
            facts,
        })
    }
}

enum Factor {
    Svd {
        u: DMatrix<C64>,
        vt: DMatrix<C64>,
        inv_s: Vec<f64>,
    },
    Lu(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

pub struct BlockSolver {
    n1: usize,
    n2: usize,
    ncomp: usize,
    facts: Vec<Factor>,
}

impl BlockSolver {
    /// Apply the factored inverse to a real flat field.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n1, n2, ncomp) = (self.n1, self.n2, self.ncomp);
        let m = ncomp * n1;
        assert_eq!(rhs.len(), m * n2);
        let mut hat = vec![C64::new(0.0, 0.0); m * n2];
        for r in 0..m {
            let modes = fourier::dft(&rhs[r * n2..(r + 1) * n2]);
            hat[r * n2..(r + 1) * n2].copy_from_slice(&modes);
        }
        let nk = n2 / 2 + 1;
        let mut out_hat = vec![C64::new(0.0, 0.0); m * n2];
        let mut v = nalgebra::DVector::<C64>::zeros(m);
        for (k, fact) in self.facts.iter().enumerate().take(nk) {
            for r in 0..m {
                v[r] = hat[r * n2 + k];
            }
            let x = match fact {
                Factor::Svd { u, vt, inv_s } => {
                    let mut y = u.ad_mul(&v);
                    for (i, s) in inv_s.iter().enumerate() {
                        y[i] *= C64::new(*s, 0.0);
                    }
                    vt.ad_mul(&y)
                }
                Factor::Lu(lu) => lu.solve(&v).expect("singular block in LU solve"),
            };
            for r in 0..m {
                out_hat[r * n2 + k] = x[r];
                if k != 0 && 2 * k != n2 {
                    out_hat[r * n2 + (n2 - k)] = x[r].conj();
                }
            }
        }
        let mut out = vec![0.0; m * n2];
        for r in 0..m {
            let vals = fourier::idft_real(&out_hat[r * n2..(r + 1) * n2]);
            out[r * n2..(r + 1) * n2].copy_from_slice(&vals);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::EdgeKind;
    use crate::stencil::{self, Comp};
    use ndarray::Array2;

    #[test]
    fn probe_and_lu_invert_a_shift_invariant_operator() {
        let grid = Grid::new(12, 16, 0.0, 1.0, [EdgeKind::Pole, EdgeKind::Boundary]);
        let gc = grid.clone();
        // a strictly diagonally-dominated operator: 3 I + 0.1 (d1-ish)
        let op = move |f: &[f64]| -> Vec<f64> {
            let a = Array2::from_shape_vec((12, 16), f.to_vec()).unwrap();
            let d = stencil::d1(&gc, &a, Comp::SCALAR);
            let d2 = stencil::d2(&gc, &a);
            (0..12 * 16)
                .map(|t| {
                    3.0 * f[t] + 0.1 * (d.as_slice().unwrap()[t] + d2.as_slice().unwrap()[t])
                })
                .collect()
        };
        let blocks = BlockOp::probe(&grid, 1, &op).unwrap();
        let solver = blocks.factor_lu().unwrap();
        let f: Vec<f64> = (0..12 * 16)
            .map(|t| ((t * 7 + 3) % 11) as f64 / 11.0 - 0.4)
            .collect();
        let rhs = op(&f);
        let x = solver.solve(&rhs);
        for t in 0..12 * 16 {
            assert!((x[t] - f[t]).abs() < 1e-9, "{t}: {} vs {}", x[t], f[t]);
        }
    }
}
