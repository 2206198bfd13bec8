//! Grid fields: scalars, contravariant vector fields, and the two tensor
//! ranks used by the Stokes machinery.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::ChartGeometry;

#[derive(Clone)]
pub struct ScalarField {
    pub geom: Arc<ChartGeometry>,
    pub a: Array2<f64>,
}

#[derive(Clone)]
pub struct VectorField {
    pub geom: Arc<ChartGeometry>,
    pub u1: Array2<f64>,
    pub u2: Array2<f64>,
}

/// (1,1)-tensor, components T^i_j stored as c[i][j].
#[derive(Clone)]
pub struct TensorField11 {
    pub geom: Arc<ChartGeometry>,
    pub c: [[Array2<f64>; 2]; 2],
}

/// (2,0)-tensor, components S^ij stored as c[i][j].
#[derive(Clone)]
pub struct TensorField20 {
    pub geom: Arc<ChartGeometry>,
    pub c: [[Array2<f64>; 2]; 2],
}

fn dims(geom: &ChartGeometry) -> (usize, usize) {
    (geom.grid.n1, geom.grid.n2)
}

impl ScalarField {
    pub fn zeros(geom: &Arc<ChartGeometry>) -> Self {
        ScalarField {
            geom: geom.clone(),
            a: Array2::zeros(dims(geom)),
        }
    }

    pub fn from_fn(geom: &Arc<ChartGeometry>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let (n1, n2) = dims(geom);
        let mut a = Array2::zeros((n1, n2));
        for i in 0..n1 {
            for j in 0..n2 {
                a[[i, j]] = f(geom.grid.x(i), geom.grid.y(j));
            }
        }
        ScalarField {
            geom: geom.clone(),
            a,
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.a.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }
}

impl VectorField {
    pub fn zeros(geom: &Arc<ChartGeometry>) -> Self {
        VectorField {
            geom: geom.clone(),
            u1: Array2::zeros(dims(geom)),
            u2: Array2::zeros(dims(geom)),
        }
    }

    pub fn from_fn(geom: &Arc<ChartGeometry>, mut f: impl FnMut(f64, f64) -> [f64; 2]) -> Self {
        let (n1, n2) = dims(geom);
        let mut u1 = Array2::zeros((n1, n2));
        let mut u2 = Array2::zeros((n1, n2));
        for i in 0..n1 {
            for j in 0..n2 {
                let v = f(geom.grid.x(i), geom.grid.y(j));
                u1[[i, j]] = v[0];
                u2[[i, j]] = v[1];
            }
        }
        VectorField {
            geom: geom.clone(),
            u1,
            u2,
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.u1.iter().all(|v| v.is_finite()) && self.u2.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    /// Flatten to [u1 nodes..., u2 nodes...] (row-major nodes).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.u1.len());
        v.extend(self.u1.iter());
        v.extend(self.u2.iter());
        v
    }

    pub fn from_flat(geom: &Arc<ChartGeometry>, v: &[f64]) -> Self {
        let (n1, n2) = dims(geom);
        let n = n1 * n2;
        assert_eq!(v.len(), 2 * n);
        VectorField {
            geom: geom.clone(),
            u1: Array2::from_shape_vec((n1, n2), v[..n].to_vec()).unwrap(),
            u2: Array2::from_shape_vec((n1, n2), v[n..].to_vec()).unwrap(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        VectorField {
            geom: self.geom.clone(),
            u1: &self.u1 * s,
            u2: &self.u2 * s,
        }
    }

    /// self += s · other
    pub fn axpy(&mut self, s: f64, other: &VectorField) {
        self.u1.zip_mut_with(&other.u1, |a, b| *a += s * b);
        self.u2.zip_mut_with(&other.u2, |a, b| *a += s * b);
    }

    pub fn add(&self, other: &VectorField) -> Self {
        VectorField {
            geom: self.geom.clone(),
            u1: &self.u1 + &other.u1,
            u2: &self.u2 + &other.u2,
        }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        VectorField {
            geom: self.geom.clone(),
            u1: &self.u1 - &other.u1,
            u2: &self.u2 - &other.u2,
        }
    }
}

impl TensorField11 {
    pub fn zeros(geom: &Arc<ChartGeometry>) -> Self {
        let z = || Array2::zeros(dims(geom));
        TensorField11 {
            geom: geom.clone(),
            c: [[z(), z()], [z(), z()]],
        }
    }
}

impl TensorField20 {
    pub fn zeros(geom: &Arc<ChartGeometry>) -> Self {
        let z = || Array2::zeros(dims(geom));
        TensorField20 {
            geom: geom.clone(),
            c: [[z(), z()], [z(), z()]],
        }
    }

    pub fn from_fn(geom: &Arc<ChartGeometry>, mut f: impl FnMut(f64, f64) -> [[f64; 2]; 2]) -> Self {
        let (n1, n2) = dims(geom);
        let mut t = Self::zeros(geom);
        for i in 0..n1 {
            for j in 0..n2 {
                let v = f(geom.grid.x(i), geom.grid.y(j));
                for a in 0..2 {
                    for b in 0..2 {
                        t.c[a][b][[i, j]] = v[a][b];
                    }
                }
            }
        }
        t
    }
}
