//! Discrete spaces on the Gauss–Lobatto lattice and operator assembly.
//!
//! `ScalarSpace` is the continuous `Q_k` space with nodal Lagrange basis at
//! the Gauss–Lobatto points; its lumped weights realize the nodal
//! semi-inner product `(u, v)_h`. Every non-lumped integral uses a tensor
//! Gauss–Legendre rule with `k + 1` points per direction. The pressure
//! space is continuous `Q_{k-1}` on the same cells.

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LuFactor};
use crate::mesh::{GaussRule, GridMesh, Side};

/// Lagrange basis through a set of 1D nodes.
#[derive(Debug, Clone)]
pub struct LagrangeBasis1d {
    nodes: Vec<f64>,
}

impl LagrangeBasis1d {
    pub fn new(nodes: Vec<f64>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, a: usize, x: f64) -> f64 {
        let xa = self.nodes[a];
        self.nodes
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != a)
            .map(|(_, &xm)| (x - xm) / (xa - xm))
            .product()
    }

    pub fn derivative(&self, a: usize, x: f64) -> f64 {
        let xa = self.nodes[a];
        let n = self.nodes.len();
        let mut total = 0.0;
        for l in 0..n {
            if l == a {
                continue;
            }
            let mut term = 1.0 / (xa - self.nodes[l]);
            for m in 0..n {
                if m != a && m != l {
                    term *= (x - self.nodes[m]) / (xa - self.nodes[m]);
                }
            }
            total += term;
        }
        total
    }
}

/// Basis values and physical gradients at the tensor quadrature points of
/// one (any) cell. Uniform meshes make every cell identical up to translation.
#[derive(Debug, Clone)]
pub struct CellTables {
    /// Number of local basis functions `(p+1)^2`.
    pub n_basis: usize,
    /// Number of quadrature points per cell.
    pub n_quad: usize,
    /// Reference coordinates of the quadrature points.
    pub ref_points: Vec<[f64; 2]>,
    /// Physical quadrature weights (Jacobian included).
    pub weights: Vec<f64>,
    /// `phi[loc * n_quad + q]`.
    pub phi: Vec<f64>,
    pub dphi_dx: Vec<f64>,
    pub dphi_dy: Vec<f64>,
}

impl CellTables {
    pub fn new(basis: &LagrangeBasis1d, rule: &GaussRule, hx: f64, hy: f64) -> Self {
        let nb1 = basis.len();
        let nq1 = rule.len();
        let n_basis = nb1 * nb1;
        let n_quad = nq1 * nq1;
        let jac = 0.25 * hx * hy;
        let mut ref_points = Vec::with_capacity(n_quad);
        let mut weights = Vec::with_capacity(n_quad);
        for qy in 0..nq1 {
            for qx in 0..nq1 {
                ref_points.push([rule.points[qx], rule.points[qy]]);
                weights.push(rule.weights[qx] * rule.weights[qy] * jac);
            }
        }
        let mut phi = vec![0.0; n_basis * n_quad];
        let mut dphi_dx = vec![0.0; n_basis * n_quad];
        let mut dphi_dy = vec![0.0; n_basis * n_quad];
        for b in 0..nb1 {
            for a in 0..nb1 {
                let loc = a + nb1 * b;
                for (q, xi) in ref_points.iter().enumerate() {
                    let va = basis.value(a, xi[0]);
                    let vb = basis.value(b, xi[1]);
                    let da = basis.derivative(a, xi[0]);
                    let db = basis.derivative(b, xi[1]);
                    phi[loc * n_quad + q] = va * vb;
                    dphi_dx[loc * n_quad + q] = da * vb * 2.0 / hx;
                    dphi_dy[loc * n_quad + q] = va * db * 2.0 / hy;
                }
            }
        }
        Self {
            n_basis,
            n_quad,
            ref_points,
            weights,
            phi,
            dphi_dx,
            dphi_dy,
        }
    }

    #[inline]
    pub fn phi(&self, loc: usize, q: usize) -> f64 {
        self.phi[loc * self.n_quad + q]
    }

    #[inline]
    pub fn grad(&self, loc: usize, q: usize) -> [f64; 2] {
        let k = loc * self.n_quad + q;
        [self.dphi_dx[k], self.dphi_dy[k]]
    }

    /// Interpolated values of a nodal field at the quadrature points.
    pub fn values_at_quad(&self, nodes: &[usize], field: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (loc, &g) in nodes.iter().enumerate() {
            let c = field[g];
            if c == 0.0 {
                continue;
            }
            let row = &self.phi[loc * self.n_quad..(loc + 1) * self.n_quad];
            for (o, p) in out.iter_mut().zip(row) {
                *o += c * p;
            }
        }
    }

    /// Interpolated gradients at quadrature points.
    pub fn grads_at_quad(&self, nodes: &[usize], field: &[f64], out: &mut [[f64; 2]]) {
        out.iter_mut().for_each(|v| *v = [0.0, 0.0]);
        for (loc, &g) in nodes.iter().enumerate() {
            let c = field[g];
            if c == 0.0 {
                continue;
            }
            for q in 0..self.n_quad {
                let gr = self.grad(loc, q);
                out[q][0] += c * gr[0];
                out[q][1] += c * gr[1];
            }
        }
    }
}

/// Continuous nodal `Q_p` space on a uniform mesh.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    mesh: GridMesh,
    basis: LagrangeBasis1d,
    lumped: Vec<f64>,
    boundary: Vec<usize>,
    cell_nodes: Vec<Vec<usize>>,
    rule: GaussRule,
    tables: CellTables,
}

impl ScalarSpace {
    /// Space of degree `mesh.degree` with the default `degree + 1` point Gauss rule.
    pub fn new(mesh: &GridMesh) -> Result<Self> {
        Self::with_quadrature(mesh, mesh.degree + 1)
    }

    pub fn with_quadrature(mesh: &GridMesh, n_quad_1d: usize) -> Result<Self> {
        let rule = GaussRule::new(n_quad_1d)?;
        let basis = LagrangeBasis1d::new(mesh.rule.points.clone());
        let tables = CellTables::new(&basis, &rule, mesh.hx, mesh.hy);
        let mut lumped = vec![0.0; mesh.n_nodes()];
        let k = mesh.degree;
        let jac = 0.25 * mesh.hx * mesh.hy;
        let mut cell_nodes = Vec::with_capacity(mesh.n_cells());
        for cy in 0..mesh.ny {
            for cx in 0..mesh.nx {
                let nodes = mesh.cell_nodes(cx, cy);
                for b in 0..=k {
                    for a in 0..=k {
                        lumped[nodes[a + (k + 1) * b]] += mesh.rule.weights[a] * mesh.rule.weights[b] * jac;
                    }
                }
                cell_nodes.push(nodes);
            }
        }
        Ok(Self {
            boundary: mesh.boundary_nodes(),
            mesh: mesh.clone(),
            basis,
            lumped,
            cell_nodes,
            rule,
            tables,
        })
    }

    pub fn mesh(&self) -> &GridMesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.mesh.degree
    }

    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    /// Lumped weights `w_i = int chi_i`.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell]
    }

    pub fn tables(&self) -> &CellTables {
        &self.tables
    }

    pub fn basis(&self) -> &LagrangeBasis1d {
        &self.basis
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    pub fn node_coords(&self) -> Vec<[f64; 2]> {
        self.mesh.all_node_coords()
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!(
                "field of length {} in space of dimension {}",
                field.len(),
                self.dim()
            )))
        }
    }

    /// Physical quadrature points of a cell, in table order.
    pub fn quad_points(&self, cell: usize) -> Vec<[f64; 2]> {
        let (cx, cy) = self.mesh.cell_of(cell);
        self.tables
            .ref_points
            .iter()
            .map(|&xi| self.mesh.to_physical(cx, cy, xi))
            .collect()
    }

    /// Zero matrix with the cell-coupling pattern of this space against `cols`.
    pub fn coupling_pattern(&self, cols: &ScalarSpace) -> CsrMatrix {
        assert_eq!(self.mesh.n_cells(), cols.mesh.n_cells());
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.dim()];
        for cell in 0..self.mesh.n_cells() {
            for &r in self.cell_nodes(cell) {
                rows[r].extend_from_slice(cols.cell_nodes(cell));
            }
        }
        CsrMatrix::from_pattern(self.dim(), cols.dim(), rows)
    }

    /// Nodal interpolant.
    pub fn interpolate<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        self.mesh.all_node_coords().into_iter().map(f).collect()
    }

    /// Evaluates a finite element field at a point of the domain.
    pub fn evaluate(&self, field: &[f64], x: [f64; 2]) -> f64 {
        let (cx, cy) = self.mesh.locate(x);
        let xi = self.mesh.to_reference(cx, cy, x);
        let nodes = &self.cell_nodes[self.mesh.cell_index(cx, cy)];
        let n1 = self.basis.len();
        let mut s = 0.0;
        for b in 0..n1 {
            let vb = self.basis.value(b, xi[1]);
            for a in 0..n1 {
                s += field[nodes[a + n1 * b]] * self.basis.value(a, xi[0]) * vb;
            }
        }
        s
    }

    /// Load vector `(f, chi_i)`.
    pub fn load<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        let t = &self.tables;
        let mut out = vec![0.0; self.dim()];
        let mut fq = vec![0.0; t.n_quad];
        for cell in 0..self.mesh.n_cells() {
            for (q, x) in self.quad_points(cell).into_iter().enumerate() {
                fq[q] = f(x) * t.weights[q];
            }
            for (loc, &g) in self.cell_nodes(cell).iter().enumerate() {
                let mut s = 0.0;
                for q in 0..t.n_quad {
                    s += t.phi(loc, q) * fq[q];
                }
                out[g] += s;
            }
        }
        out
    }

    /// Boundary load `int_{dOmega} g(x, n) chi_i ds` with a `n_points` Gauss rule per edge.
    pub fn boundary_load<F: Fn([f64; 2], [f64; 2]) -> f64>(&self, n_points: usize, g: F) -> Result<Vec<f64>> {
        let rule = GaussRule::new(n_points)?;
        let m = &self.mesh;
        let k = m.degree;
        let n1 = k + 1;
        let mut out = vec![0.0; self.dim()];
        for side in Side::ALL {
            let normal = side.normal();
            let nodes = m.side_nodes(side);
            let (n_edges, h) = match side {
                Side::Left | Side::Right => (m.ny, m.hy),
                Side::Bottom | Side::Top => (m.nx, m.hx),
            };
            for e in 0..n_edges {
                for (xi, w) in rule.points.iter().zip(&rule.weights) {
                    let s = e as f64 * h + 0.5 * (1.0 + xi) * h;
                    let x = match side {
                        Side::Left => [m.bounds.x_min, m.bounds.y_min + s],
                        Side::Right => [m.bounds.x_max, m.bounds.y_min + s],
                        Side::Bottom => [m.bounds.x_min + s, m.bounds.y_min],
                        Side::Top => [m.bounds.x_min + s, m.bounds.y_max],
                    };
                    let gw = g(x, normal) * w * 0.5 * h;
                    for a in 0..n1 {
                        out[nodes[e * k + a]] += gw * self.basis.value(a, *xi);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Outflow load `int_{dOmega} phi (u . n) chi_i ds`, from the boundary traces
    /// of `phi` and `u`.
    pub fn boundary_flux_load(&self, phi: &[f64], u: &VectorField) -> Vec<f64> {
        let m = &self.mesh;
        let k = m.degree;
        let n1 = k + 1;
        let rule = GaussRule::new((3 * k + 2) / 2).expect("positive rule size");
        let mut out = vec![0.0; self.dim()];
        for side in Side::ALL {
            let normal = side.normal();
            let nodes = m.side_nodes(side);
            let h = match side {
                Side::Left | Side::Right => m.hy,
                Side::Bottom | Side::Top => m.hx,
            };
            for e in 0..(nodes.len() - 1) / k {
                let local = &nodes[e * k..e * k + n1];
                for (xi, w) in rule.points.iter().zip(&rule.weights) {
                    let (mut p, mut un) = (0.0, 0.0);
                    for (a, &g) in local.iter().enumerate() {
                        let b = self.basis.value(a, *xi);
                        p += phi[g] * b;
                        un += (u.x[g] * normal[0] + u.y[g] * normal[1]) * b;
                    }
                    let pw = p * un * w * 0.5 * h;
                    if pw != 0.0 {
                        for (a, &g) in local.iter().enumerate() {
                            out[g] += pw * self.basis.value(a, *xi);
                        }
                    }
                }
            }
        }
        out
    }

    /// Consistent mass matrix `(chi_j, chi_i)`.
    pub fn assemble_mass(&self) -> CsrMatrix {
        self.assemble_weighted_mass(&|_| 1.0, None)
    }

    /// `(c chi_j, chi_i)` with `c` a nodal field mapped through `law`.
    pub fn assemble_weighted_mass(&self, law: &dyn Fn(f64) -> f64, field: Option<&[f64]>) -> CsrMatrix {
        let t = &self.tables;
        let mut m = self.coupling_pattern(self);
        let mut cq = vec![0.0; t.n_quad];
        for cell in 0..self.mesh.n_cells() {
            let nodes = self.cell_nodes(cell);
            match field {
                Some(f) => t.values_at_quad(nodes, f, &mut cq),
                None => cq.iter_mut().for_each(|v| *v = 0.0),
            }
            for (q, c) in cq.iter_mut().enumerate() {
                *c = law(*c) * t.weights[q];
            }
            for (i, &gi) in nodes.iter().enumerate() {
                for (j, &gj) in nodes.iter().enumerate() {
                    let mut s = 0.0;
                    for q in 0..t.n_quad {
                        s += t.phi(i, q) * t.phi(j, q) * cq[q];
                    }
                    m.add_to(gi, gj, s);
                }
            }
        }
        m
    }

    /// Stiffness `(c grad chi_j, grad chi_i)`.
    pub fn assemble_stiffness(&self, coeff: &Coefficient<'_>) -> Result<CsrMatrix> {
        let t = &self.tables;
        let mut m = self.coupling_pattern(self);
        let mut cq = vec![0.0; t.n_quad];
        for cell in 0..self.mesh.n_cells() {
            let nodes = self.cell_nodes(cell);
            coeff.eval_at_quad(t, nodes, &mut cq)?;
            for (i, &gi) in nodes.iter().enumerate() {
                for (j, &gj) in nodes.iter().enumerate() {
                    let mut s = 0.0;
                    for q in 0..t.n_quad {
                        let a = t.grad(i, q);
                        let b = t.grad(j, q);
                        s += (a[0] * b[0] + a[1] * b[1]) * cq[q] * t.weights[q];
                    }
                    m.add_to(gi, gj, s);
                }
            }
        }
        Ok(m)
    }

    /// Matrices `P_c[i][j] = (w chi_j, d_c chi_i)` for `c = x, y`.
    ///
    /// `sum_c P_c u_c` is the load `(w u, grad chi_i)` and `P_c^T mu` is
    /// `(w d_c mu, chi_j)`.
    pub fn assemble_weighted_gradient_pair(&self, weight: &[f64]) -> [CsrMatrix; 2] {
        let t = &self.tables;
        let mut px = self.coupling_pattern(self);
        let mut py = px.clone();
        let mut wq = vec![0.0; t.n_quad];
        for cell in 0..self.mesh.n_cells() {
            let nodes = self.cell_nodes(cell);
            t.values_at_quad(nodes, weight, &mut wq);
            for (i, &gi) in nodes.iter().enumerate() {
                for (j, &gj) in nodes.iter().enumerate() {
                    let (mut sx, mut sy) = (0.0, 0.0);
                    for q in 0..t.n_quad {
                        let g = t.grad(i, q);
                        let f = wq[q] * t.phi(j, q) * t.weights[q];
                        sx += g[0] * f;
                        sy += g[1] * f;
                    }
                    px.add_to(gi, gj, sx);
                    py.add_to(gi, gj, sy);
                }
            }
        }
        [px, py]
    }

    /// Transport matrix `N[i][j] = (a . grad chi_j, chi_i)` for an advecting field `a`.
    pub fn assemble_advection(&self, adv: &VectorField) -> CsrMatrix {
        let t = &self.tables;
        let mut m = self.coupling_pattern(self);
        let mut ax = vec![0.0; t.n_quad];
        let mut ay = vec![0.0; t.n_quad];
        for cell in 0..self.mesh.n_cells() {
            let nodes = self.cell_nodes(cell);
            t.values_at_quad(nodes, &adv.x, &mut ax);
            t.values_at_quad(nodes, &adv.y, &mut ay);
            for (i, &gi) in nodes.iter().enumerate() {
                for (j, &gj) in nodes.iter().enumerate() {
                    let mut s = 0.0;
                    for q in 0..t.n_quad {
                        let g = t.grad(j, q);
                        s += (ax[q] * g[0] + ay[q] * g[1]) * t.phi(i, q) * t.weights[q];
                    }
                    m.add_to(gi, gj, s);
                }
            }
        }
        m
    }

    /// Skew-symmetric convection `C = (N - N^T)/2`, so that
    /// `b(a, v, w) = sum_c w_c^T C v_c` and `v^T C v = 0` exactly.
    pub fn assemble_convection(&self, adv: &VectorField) -> CsrMatrix {
        let n = self.assemble_advection(adv);
        let nt = n.transpose();
        let mut c = n.add_scaled(-1.0, &nt);
        c.scale(0.5);
        c
    }
}

/// Coefficient for variable-coefficient forms.
pub enum Coefficient<'a> {
    Constant(f64),
    /// A nodal field interpolated at quadrature points and passed through `law`.
    Field {
        nodal: &'a [f64],
        law: &'a dyn Fn(f64) -> f64,
    },
}

impl Coefficient<'_> {
    fn eval_at_quad(&self, t: &CellTables, nodes: &[usize], out: &mut [f64]) -> Result<()> {
        match self {
            Coefficient::Constant(c) => out.iter_mut().for_each(|v| *v = *c),
            Coefficient::Field { nodal, law } => {
                t.values_at_quad(nodes, nodal, out);
                out.iter_mut().for_each(|v| *v = law(*v));
            }
        }
        if let Some(&bad) = out.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::NonPositiveCoefficient { value: bad });
        }
        Ok(())
    }
}

/// Velocity coefficients, one nodal vector per component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        if c == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    pub fn component_mut(&mut self, c: usize) -> &mut Vec<f64> {
        if c == 0 {
            &mut self.x
        } else {
            &mut self.y
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            x: v[..n].to_vec(),
            y: v[n..].to_vec(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> VectorField {
        VectorField {
            x: self.x.iter().zip(&other.x).map(|(p, q)| a * p + b * q).collect(),
            y: self.y.iter().zip(&other.y).map(|(p, q)| a * p + b * q).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Role of a velocity component on a boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Free,
    /// Strongly imposed value.
    Dirichlet,
}

/// `Q_k x Q_k` velocity space with a per-node, per-component Dirichlet mask.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    pub scalar: ScalarSpace,
    pub mask: [Vec<DofKind>; 2],
}

impl VelocitySpace {
    /// All boundary components fixed (the homogeneous `X_h^k` setting).
    pub fn no_slip(scalar: &ScalarSpace) -> Self {
        let mut mask = [vec![DofKind::Free; scalar.dim()], vec![DofKind::Free; scalar.dim()]];
        for &n in scalar.boundary_nodes() {
            mask[0][n] = DofKind::Dirichlet;
            mask[1][n] = DofKind::Dirichlet;
        }
        Self {
            scalar: scalar.clone(),
            mask,
        }
    }

    /// Per-side choice: `true` fixes both components, `false` fixes only the normal one.
    pub fn with_sides(scalar: &ScalarSpace, full_dirichlet: impl Fn(Side) -> bool) -> Self {
        let mut mask = [vec![DofKind::Free; scalar.dim()], vec![DofKind::Free; scalar.dim()]];
        for side in Side::ALL {
            let normal_comp = match side {
                Side::Left | Side::Right => 0,
                Side::Bottom | Side::Top => 1,
            };
            let full = full_dirichlet(side);
            for n in scalar.mesh().side_nodes(side) {
                mask[normal_comp][n] = DofKind::Dirichlet;
                if full {
                    mask[1 - normal_comp][n] = DofKind::Dirichlet;
                }
            }
        }
        Self {
            scalar: scalar.clone(),
            mask,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.scalar.dim()
    }

    pub fn dim(&self) -> usize {
        2 * self.scalar.dim()
    }

    /// Flat indices (`c * n + node`) of Dirichlet components.
    pub fn fixed_dofs(&self) -> Vec<usize> {
        let n = self.n_nodes();
        (0..2)
            .flat_map(|c| {
                self.mask[c]
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| **k == DofKind::Dirichlet)
                    .map(move |(i, _)| c * n + i)
            })
            .collect()
    }

    pub fn is_fixed(&self, c: usize, node: usize) -> bool {
        self.mask[c][node] == DofKind::Dirichlet
    }

    /// Overwrites fixed components with `data(x)`.
    pub fn apply_dirichlet<F: Fn([f64; 2]) -> [f64; 2]>(&self, u: &mut VectorField, data: F) {
        let coords = self.scalar.node_coords();
        for node in 0..self.n_nodes() {
            if self.is_fixed(0, node) || self.is_fixed(1, node) {
                let v = data(coords[node]);
                for c in 0..2 {
                    if self.is_fixed(c, node) {
                        u.component_mut(c)[node] = v[c];
                    }
                }
            }
        }
    }
}

/// Continuous `Q_{k-1}` pressure space with the zero-mean handle.
#[derive(Debug, Clone)]
pub struct PressureSpace {
    pub scalar: ScalarSpace,
    /// Tables of the pressure basis at the velocity quadrature points.
    pub cross_tables: CellTables,
    /// `int psi_q`, used both for the mean constraint and mean removal.
    pub mean_weights: Vec<f64>,
}

impl PressureSpace {
    /// Pressure space paired with a velocity space of degree `k >= 2`.
    pub fn for_velocity(vel: &ScalarSpace) -> Result<Self> {
        let k = vel.degree();
        if k < 2 {
            return Err(Error::InvalidMesh(
                "Taylor-Hood pairs need velocity degree >= 2".into(),
            ));
        }
        let pmesh = vel.mesh().with_degree(k - 1)?;
        let scalar = ScalarSpace::with_quadrature(&pmesh, vel.rule().len())?;
        let cross_tables = CellTables::new(scalar.basis(), vel.rule(), pmesh.hx, pmesh.hy);
        let mean_weights = scalar.load(|_| 1.0);
        Ok(Self {
            scalar,
            cross_tables,
            mean_weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.scalar.dim()
    }

    pub fn mean(&self, q: &[f64]) -> f64 {
        crate::linalg::dot(&self.mean_weights, q) / self.scalar.mesh().area()
    }

    pub fn remove_mean(&self, q: &mut [f64]) {
        // constants are represented exactly by nodal value 1
        let m = self.mean(q);
        q.iter_mut().for_each(|v| *v -= m);
    }
}

/// Divergence matrix `B[q][(c, j)] = -int d_c chi_j psi_q`, shape `n_p x 2n`.
pub fn assemble_divergence(vel: &ScalarSpace, prs: &PressureSpace) -> Result<CsrMatrix> {
    if vel.mesh().n_cells() != prs.scalar.mesh().n_cells()
        || vel.mesh().bounds != prs.scalar.mesh().bounds
    {
        return Err(Error::SpaceMismatch("velocity and pressure meshes differ".into()));
    }
    let t = vel.tables();
    let pt = &prs.cross_tables;
    let n = vel.dim();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); prs.dim()];
    for cell in 0..vel.mesh().n_cells() {
        for &r in prs.scalar.cell_nodes(cell) {
            for &c in vel.cell_nodes(cell) {
                rows[r].push(c);
                rows[r].push(n + c);
            }
        }
    }
    let mut b = CsrMatrix::from_pattern(prs.dim(), 2 * n, rows);
    for cell in 0..vel.mesh().n_cells() {
        let vnodes = vel.cell_nodes(cell);
        let pnodes = prs.scalar.cell_nodes(cell);
        for (iq, &gq) in pnodes.iter().enumerate() {
            for (j, &gj) in vnodes.iter().enumerate() {
                let (mut sx, mut sy) = (0.0, 0.0);
                for q in 0..t.n_quad {
                    let g = t.grad(j, q);
                    let w = pt.phi(iq, q) * t.weights[q];
                    sx += g[0] * w;
                    sy += g[1] * w;
                }
                b.add_to(gq, gj, -sx);
                b.add_to(gq, n + gj, -sy);
            }
        }
    }
    Ok(b)
}

/// `(u, v)_h = sum_i w_i u_i v_i`.
pub fn lumped_inner(space: &ScalarSpace, u: &[f64], v: &[f64]) -> Result<f64> {
    space.check(u)?;
    space.check(v)?;
    Ok(space
        .lumped_weights()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}

/// `||u||_{1,h} = sum_i w_i |u_i|`.
pub fn discrete_l1_norm(space: &ScalarSpace, u: &[f64]) -> Result<f64> {
    space.check(u)?;
    Ok(space
        .lumped_weights()
        .iter()
        .zip(u)
        .map(|(w, a)| w * a.abs())
        .sum())
}

/// Assembled operators shared by all time steps.
#[derive(Debug)]
pub struct OperatorSet {
    pub phase: ScalarSpace,
    pub velocity: VelocitySpace,
    pub pressure: PressureSpace,
    /// Consistent scalar mass of `Y_h^k`.
    pub mass: CsrMatrix,
    /// Stiffness with unit coefficient.
    pub stiffness: CsrMatrix,
    /// Divergence `B`, `n_p x 2n`.
    pub divergence: CsrMatrix,
    /// `B^T`, `2n x n_p`.
    pub divergence_t: CsrMatrix,
    interior_mass_lu: LuFactor,
}

impl OperatorSet {
    pub fn new(phase: ScalarSpace, velocity: VelocitySpace) -> Result<Self> {
        let pressure = PressureSpace::for_velocity(&phase)?;
        let mass = phase.assemble_mass();
        let stiffness = phase.assemble_stiffness(&Coefficient::Constant(1.0))?;
        let divergence = assemble_divergence(&phase, &pressure)?;
        let divergence_t = divergence.transpose();
        // mass restricted to the homogeneous space X_h^k (per component)
        let n = phase.dim();
        let mut interior = mass.clone();
        let boundary = phase.boundary_nodes().to_vec();
        let mut is_bnd = vec![false; n];
        for &b in &boundary {
            is_bnd[b] = true;
        }
        for r in 0..n {
            let (lo, hi) = (interior.row_ptr()[r], interior.row_ptr()[r + 1]);
            for k in lo..hi {
                let c = interior.col_idx()[k];
                if is_bnd[r] || is_bnd[c] {
                    interior.values_mut()[k] = if r == c { 1.0 } else { 0.0 };
                }
            }
        }
        let interior_mass_lu = LuFactor::new(&interior)?;
        Ok(Self {
            phase,
            velocity,
            pressure,
            mass,
            stiffness,
            divergence,
            divergence_t,
            interior_mass_lu,
        })
    }

    pub fn n(&self) -> usize {
        self.phase.dim()
    }

    pub fn lumped(&self) -> &[f64] {
        self.phase.lumped_weights()
    }

    /// `(grad q, v)` for every velocity test function (valid as `B^T q` on interior rows).
    pub fn pressure_gradient_load(&self, q: &[f64]) -> Vec<f64> {
        self.divergence_t.matvec(q)
    }

    /// Discrete gradient `B_h^T q` in `X_h^k`: solves `M g = (grad q, v)` over
    /// interior test functions. Returns `(g, rhs)` so that `g . rhs = ||B_h^T q||^2`.
    pub fn discrete_gradient(&self, q: &[f64]) -> (VectorField, VectorField) {
        let n = self.n();
        let rhs_flat = self.pressure_gradient_load(q);
        let mut rhs = VectorField::from_flat(&rhs_flat);
        for &b in self.phase.boundary_nodes() {
            rhs.x[b] = 0.0;
            rhs.y[b] = 0.0;
        }
        let g = VectorField {
            x: self.interior_mass_lu.solve(&rhs.x),
            y: self.interior_mass_lu.solve(&rhs.y),
        };
        debug_assert_eq!(g.len(), n);
        (g, rhs)
    }

    /// `||B_h^T q||^2`.
    pub fn discrete_gradient_norm_sq(&self, q: &[f64]) -> f64 {
        let (g, rhs) = self.discrete_gradient(q);
        crate::linalg::dot(&g.x, &rhs.x) + crate::linalg::dot(&g.y, &rhs.y)
    }

    /// `-Delta_h phi`: lumped solve of `W y = K phi`, projected to zero lumped mean.
    pub fn discrete_laplacian(&self, phi: &[f64]) -> Vec<f64> {
        let kphi = self.stiffness.matvec(phi);
        let w = self.lumped();
        let mut y: Vec<f64> = kphi.iter().zip(w).map(|(a, b)| a / b).collect();
        let mean: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / self.phase.mesh().area();
        y.iter_mut().for_each(|v| *v -= mean);
        y
    }

    /// Consistent `L^2` norm squared of a scalar field.
    pub fn l2_sq(&self, f: &[f64]) -> f64 {
        crate::linalg::dot(f, &self.mass.matvec(f))
    }

    /// Consistent `L^2` norm squared of a vector field.
    pub fn l2_sq_vec(&self, u: &VectorField) -> f64 {
        self.l2_sq(&u.x) + self.l2_sq(&u.y)
    }

    /// `||grad f||^2`.
    pub fn h1_semi_sq(&self, f: &[f64]) -> f64 {
        crate::linalg::dot(f, &self.stiffness.matvec(f))
    }
}
