//! Uniform rectangular meshes, 1D quadrature rules and the structured
//! Gauss–Lobatto node lattice shared by every `Q_k` space.
//!
//! Global numbering is lexicographic over the fine lattice of
//! `(k*nx + 1) x (k*ny + 1)` nodes with `x` running fastest, so a node's
//! index is `j * (k*nx + 1) + i`.

use crate::error::{Error, Result};

const LEGENDRE_NEWTON_TOL: f64 = 1e-15;
const LEGENDRE_NEWTON_MAX_ITERS: usize = 100;

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for m in 1..n {
        let m = m as f64;
        let p_next = ((2.0 * m + 1.0) * x * p - m * p_prev) / (m + 1.0);
        p_prev = p;
        p = p_next;
    }
    // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1), with the endpoint limit n(n+1)/2 (+-).
    let nf = n as f64;
    let dp = if (x.abs() - 1.0).abs() < 1e-14 {
        let s = if x > 0.0 { 1.0 } else if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// `(k+1)`-point Gauss–Lobatto rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLobattoRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLobattoRule {
    pub fn new(n_points: usize) -> Result<Self> {
        gauss_lobatto_rule(n_points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Lobatto abscissae and weights.
///
/// Interior points are the roots of `P'_{n-1}`; they are found by Newton
/// iteration on `x P_N - P_{N-1}` starting from the Chebyshev–Lobatto points.
pub fn gauss_lobatto_rule(n_points: usize) -> Result<GaussLobattoRule> {
    if n_points < 2 {
        return Err(Error::InvalidQuadrature(format!(
            "Gauss-Lobatto needs at least 2 points, got {n_points}"
        )));
    }
    let n = n_points - 1;
    let nf = n as f64;
    let mut points = vec![0.0; n_points];
    let mut weights = vec![0.0; n_points];
    for i in 0..n_points {
        let mut x = -(std::f64::consts::PI * i as f64 / nf).cos();
        if i == 0 || i == n {
            x = if i == 0 { -1.0 } else { 1.0 };
        } else {
            for _ in 0..LEGENDRE_NEWTON_MAX_ITERS {
                let (p, _) = legendre(n, x);
                let (p_prev, _) = legendre(n - 1, x);
                let dx = (x * p - p_prev) / ((nf + 1.0) * p);
                x -= dx;
                if dx.abs() < LEGENDRE_NEWTON_TOL {
                    break;
                }
            }
        }
        let (p, _) = legendre(n, x);
        points[i] = x;
        weights[i] = 2.0 / (nf * (nf + 1.0) * p * p);
    }
    // exact symmetry
    for i in 0..n_points / 2 {
        let j = n - i;
        let x = 0.5 * (points[j] - points[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        points[i] = -x;
        points[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n_points % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(GaussLobattoRule { points, weights })
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, exact for degree `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 1 {
            return Err(Error::InvalidQuadrature(
                "Gauss-Legendre needs at least 1 point".into(),
            ));
        }
        let n = n_points;
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..LEGENDRE_NEWTON_MAX_ITERS {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < LEGENDRE_NEWTON_TOL {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            points[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (points[j] - points[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            points[i] = -x;
            points[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            points[n / 2] = 0.0;
        }
        Ok(GaussRule { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const UNIT_SQUARE: Bounds = Bounds {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

/// Uniform partition of a rectangle into `nx x ny` cells carrying the
/// degree-`k` Gauss–Lobatto node lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMesh {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub degree: usize,
    pub rule: GaussLobattoRule,
}

/// Builds a mesh; rejects empty extents, zero cells and `k = 0`.
pub fn build_mesh(bounds: Bounds, nx: usize, ny: usize, degree: usize) -> Result<GridMesh> {
    if !(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min) {
        return Err(Error::InvalidMesh(format!(
            "non-positive extent {bounds:?}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!("cell counts must be positive, got {nx}x{ny}")));
    }
    if degree == 0 {
        return Err(Error::InvalidMesh("polynomial degree must be at least 1".into()));
    }
    Ok(GridMesh {
        bounds,
        nx,
        ny,
        hx: (bounds.x_max - bounds.x_min) / nx as f64,
        hy: (bounds.y_max - bounds.y_min) / ny as f64,
        degree,
        rule: gauss_lobatto_rule(degree + 1)?,
    })
}

impl GridMesh {
    pub fn unit_square(n: usize, degree: usize) -> Result<Self> {
        build_mesh(Bounds::UNIT_SQUARE, n, n, degree)
    }

    /// Same geometry with a different lattice degree.
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        build_mesh(self.bounds, self.nx, self.ny, degree)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn nodes_x(&self) -> usize {
        self.degree * self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.degree * self.ny + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn area(&self) -> f64 {
        self.bounds.area()
    }

    /// Lattice coordinate along x of lattice column `i`.
    pub fn lattice_x(&self, i: usize) -> f64 {
        let (cell, a) = split_lattice(i, self.degree, self.nx);
        self.bounds.x_min + self.hx * (cell as f64 + 0.5 * (1.0 + self.rule.points[a]))
    }

    pub fn lattice_y(&self, j: usize) -> f64 {
        let (cell, b) = split_lattice(j, self.degree, self.ny);
        self.bounds.y_min + self.hy * (cell as f64 + 0.5 * (1.0 + self.rule.points[b]))
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes_x() + i
    }

    /// `(i, j)` lattice position of a global node.
    pub fn node_lattice(&self, node: usize) -> (usize, usize) {
        (node % self.nodes_x(), node / self.nodes_x())
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.node_lattice(node);
        [self.lattice_x(i), self.lattice_y(j)]
    }

    pub fn all_node_coords(&self) -> Vec<[f64; 2]> {
        let xs: Vec<f64> = (0..self.nodes_x()).map(|i| self.lattice_x(i)).collect();
        let ys: Vec<f64> = (0..self.nodes_y()).map(|j| self.lattice_y(j)).collect();
        let mut out = Vec::with_capacity(self.n_nodes());
        for y in &ys {
            for x in &xs {
                out.push([*x, *y]);
            }
        }
        out
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cy * self.nx + cx
    }

    pub fn cell_of(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cx: usize, cy: usize) -> [f64; 2] {
        [
            self.bounds.x_min + cx as f64 * self.hx,
            self.bounds.y_min + cy as f64 * self.hy,
        ]
    }

    /// Local-to-global map of a cell, local index `a + (k+1) b`.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> Vec<usize> {
        let k = self.degree;
        let mut out = Vec::with_capacity((k + 1) * (k + 1));
        for b in 0..=k {
            for a in 0..=k {
                out.push(self.node_index(cx * k + a, cy * k + b));
            }
        }
        out
    }

    /// Maps reference coordinates in `[-1,1]^2` into a cell.
    pub fn to_physical(&self, cx: usize, cy: usize, xi: [f64; 2]) -> [f64; 2] {
        let o = self.cell_origin(cx, cy);
        [
            o[0] + 0.5 * (1.0 + xi[0]) * self.hx,
            o[1] + 0.5 * (1.0 + xi[1]) * self.hy,
        ]
    }

    pub fn to_reference(&self, cx: usize, cy: usize, x: [f64; 2]) -> [f64; 2] {
        let o = self.cell_origin(cx, cy);
        [
            2.0 * (x[0] - o[0]) / self.hx - 1.0,
            2.0 * (x[1] - o[1]) / self.hy - 1.0,
        ]
    }

    /// Cell containing a point (points on shared edges go to the upper cell).
    pub fn locate(&self, x: [f64; 2]) -> (usize, usize) {
        let fx = ((x[0] - self.bounds.x_min) / self.hx).floor();
        let fy = ((x[1] - self.bounds.y_min) / self.hy).floor();
        let cx = (fx.max(0.0) as usize).min(self.nx - 1);
        let cy = (fy.max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = self.node_lattice(node);
        i == 0 || j == 0 || i + 1 == self.nodes_x() || j + 1 == self.nodes_y()
    }

    /// Nodes lying on a given side, ordered along the side.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let (mx, my) = (self.nodes_x(), self.nodes_y());
        match side {
            Side::Left => (0..my).map(|j| self.node_index(0, j)).collect(),
            Side::Right => (0..my).map(|j| self.node_index(mx - 1, j)).collect(),
            Side::Bottom => (0..mx).map(|i| self.node_index(i, 0)).collect(),
            Side::Top => (0..mx).map(|i| self.node_index(i, my - 1)).collect(),
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&n| self.is_boundary_node(n)).collect()
    }
}

fn split_lattice(i: usize, k: usize, n_cells: usize) -> (usize, usize) {
    let cell = (i / k).min(n_cells - 1);
    (cell, i - cell * k)
}
