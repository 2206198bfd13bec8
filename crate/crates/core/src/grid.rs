//! Structured tensor-product chart grid.
//!
//! The non-periodic coordinate ξ¹ ("x") is cell-staggered: nodes sit at
//! x0 + (i+1/2)h1, so there is never a node on a coordinate singularity
//! (pole) or on the boundary curve. The periodic coordinate ξ² ("y")
//! covers [0, 2π) with n2 equispaced nodes.

/// What lies beyond a non-periodic grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Coordinate singularity (disk/cap center). Stencils wrap to the
    /// antipodal column with component-dependent parity.
    Pole,
    /// Physical boundary curve of the manifold.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lo,
    Hi,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    /// Chart interval of ξ¹: (x0, x1).
    pub x0: f64,
    pub x1: f64,
    pub h1: f64,
    pub h2: f64,
    pub edges: [EdgeKind; 2],
}

impl Grid {
    pub fn new(n1: usize, n2: usize, x0: f64, x1: f64, edges: [EdgeKind; 2]) -> Self {
        assert!(n1 >= 8 && n2 >= 8 && n2 % 2 == 0);
        let h1 = (x1 - x0) / n1 as f64;
        let h2 = std::f64::consts::TAU / n2 as f64;
        Grid {
            n1,
            n2,
            x0,
            x1,
            h1,
            h2,
            edges,
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h1
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h2
    }

    /// Column index j shifted by half a period (used by pole closures).
    #[inline]
    pub fn antipode(&self, j: usize) -> usize {
        (j + self.n2 / 2) % self.n2
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.n2 {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.n2 - 1
        } else {
            j - 1
        }
    }

    pub fn edge(&self, side: Side) -> EdgeKind {
        match side {
            Side::Lo => self.edges[0],
            Side::Hi => self.edges[1],
        }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }
}
