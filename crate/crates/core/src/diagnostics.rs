//! Monitored quantities: modified energy, mass, nodal bounds, error norms
//! and interface position.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::femspace::{CellTables, OperatorSet, ScalarSpace, VectorField};
use crate::linalg::dot;
use crate::mesh::GaussRule;
use crate::potential::{ConvexLaw, PhysParams};
use crate::scheme::{ChnsState, StepReport, Stepper};

/// Per-step record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub newton_iters: usize,
    pub linsolve_resid: f64,
    pub dissipation_ch: f64,
    pub dissipation_ns: f64,
    pub divergence: f64,
    pub projection_identity: f64,
}

/// Terms of the modified energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    /// `(F_v(phi), 1)_h`.
    pub convex: f64,
    /// `-(theta_c / 2) ||phi||^2`.
    pub concave: f64,
    /// `(eps^2 / 2) ||grad phi||^2`.
    pub gradient: f64,
    /// `(theta_c / 4) ||phi^n - phi^{n-1}||^2`.
    pub extrapolation: f64,
    /// Factor in front of the phase-field part.
    pub phase_scale: f64,
    /// `||u||^2 / 2`.
    pub kinetic: f64,
    /// `(dt^2 / 8) ||B_h^T p||^2`.
    pub pressure: f64,
    /// `(F(phi), 1)_h` with the lumped concave part, for reference.
    pub lumped_potential: f64,
    pub total: f64,
}

/// Scale of the phase-field energy: `1/(eps We*)`, or 1 without surface tension.
pub fn phase_energy_scale(params: &PhysParams) -> f64 {
    let s = params.capillary_coupling();
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Modified discrete energy `E^n`.
pub fn modified_energy(ops: &OperatorSet, params: &PhysParams, state: &ChnsState, dt: f64) -> Result<EnergyParts> {
    let w = ops.lumped();
    let mut convex = 0.0;
    let mut lumped_concave = 0.0;
    for (wi, &v) in w.iter().zip(&state.phi) {
        if !(v.abs() < 1.0) {
            return Err(Error::Domain { value: v });
        }
        convex += wi * ConvexLaw::Exact.energy(v);
        lumped_concave += wi * v * v;
    }
    let concave = -0.5 * params.theta_c * ops.l2_sq(&state.phi);
    let gradient = 0.5 * params.epsilon * params.epsilon * ops.h1_semi_sq(&state.phi);
    let jump: Vec<f64> = state.phi.iter().zip(&state.phi_prev).map(|(a, b)| a - b).collect();
    let extrapolation = 0.25 * params.theta_c * ops.l2_sq(&jump);
    let phase_scale = phase_energy_scale(params);
    let rho = params.background_density();
    let kinetic = 0.5 * rho * ops.l2_sq_vec(&state.u);
    let pressure = if state.p.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        dt * dt / (8.0 * rho) * ops.discrete_gradient_norm_sq(&state.p)
    };
    let total = phase_scale * (convex + concave + gradient + extrapolation) + kinetic + pressure;
    Ok(EnergyParts {
        convex,
        concave,
        gradient,
        extrapolation,
        phase_scale,
        kinetic,
        pressure,
        lumped_potential: convex - 0.5 * params.theta_c * lumped_concave,
        total,
    })
}

/// `(phi, 1)_h`.
pub fn total_mass(ops: &OperatorSet, phi: &[f64]) -> f64 {
    dot(ops.lumped(), phi)
}

/// Nodal extrema.
pub fn phi_bounds(phi: &[f64]) -> (f64, f64) {
    phi.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// `L^2` error and `H^1` seminorm error against an exact field, with a
/// `k + 2` point Gauss rule per direction.
pub fn error_norms<F, G>(space: &ScalarSpace, field: &[f64], exact: F, exact_grad: G) -> Result<(f64, f64)>
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> [f64; 2],
{
    space.check(field)?;
    let mesh = space.mesh();
    let rule = GaussRule::new(space.degree() + 2)?;
    let t = CellTables::new(space.basis(), &rule, mesh.hx, mesh.hy);
    let mut vq = vec![0.0; t.n_quad];
    let mut gq = vec![[0.0; 2]; t.n_quad];
    let (mut l2, mut h1) = (0.0, 0.0);
    for cell in 0..mesh.n_cells() {
        let (cx, cy) = mesh.cell_of(cell);
        let nodes = space.cell_nodes(cell);
        t.values_at_quad(nodes, field, &mut vq);
        t.grads_at_quad(nodes, field, &mut gq);
        for q in 0..t.n_quad {
            let x = mesh.to_physical(cx, cy, t.ref_points[q]);
            let e = vq[q] - exact(x);
            let g = exact_grad(x);
            let (ex, ey) = (gq[q][0] - g[0], gq[q][1] - g[1]);
            l2 += t.weights[q] * e * e;
            h1 += t.weights[q] * (ex * ex + ey * ey);
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// `L^2` error of a vector field.
pub fn vector_l2_error<F>(space: &ScalarSpace, u: &VectorField, exact: F) -> Result<f64>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    let (ex, _) = error_norms(space, &u.x, |x| exact(x)[0], |_| [0.0, 0.0])?;
    let (ey, _) = error_norms(space, &u.y, |x| exact(x)[1], |_| [0.0, 0.0])?;
    Ok((ex * ex + ey * ey).sqrt())
}

/// `L^2` distance between two fields of the same space.
pub fn l2_distance(ops: &OperatorSet, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    ops.l2_sq(&d).max(0.0).sqrt()
}

/// Height of the lowest level-zero crossing of `phi` along each vertical
/// lattice line, linearly interpolated between nodes. Columns without a
/// crossing report `None`.
pub fn interface_heights(space: &ScalarSpace, phi: &[f64]) -> Vec<(f64, Option<f64>)> {
    let m = space.mesh();
    (0..m.nodes_x())
        .map(|i| {
            let x = m.lattice_x(i);
            let mut h = None;
            for j in 0..m.nodes_y() - 1 {
                let a = phi[m.node_index(i, j)];
                let b = phi[m.node_index(i, j + 1)];
                if (a < 0.0) != (b < 0.0) || a == 0.0 {
                    let (ya, yb) = (m.lattice_y(j), m.lattice_y(j + 1));
                    h = Some(if a == b { ya } else { ya + (yb - ya) * a / (a - b) });
                    break;
                }
            }
            (x, h)
        })
        .collect()
}

/// Lowest interface point `(x, y)` over all columns.
pub fn interface_minimum(space: &ScalarSpace, phi: &[f64]) -> Option<(f64, f64)> {
    interface_heights(space, phi)
        .into_iter()
        .filter_map(|(x, h)| h.map(|y| (x, y)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Diagnostics of an accepted step.
pub fn step_diagnostics(stepper: &Stepper, state: &ChnsState, report: &StepReport) -> Result<StepDiagnostics> {
    let ops = stepper.ops();
    let e = modified_energy(ops, stepper.params(), state, stepper.dt())?;
    let (lo, hi) = phi_bounds(&state.phi);
    Ok(StepDiagnostics {
        step: state.step,
        t: state.t,
        energy: e.total,
        mass: total_mass(ops, &state.phi),
        phi_min: lo,
        phi_max: hi,
        newton_iters: report.newton_iterations,
        linsolve_resid: report.linear_residual.max(report.projection_residual),
        dissipation_ch: report.dissipation_ch,
        dissipation_ns: report.dissipation_ns,
        divergence: report.divergence,
        projection_identity: report.projection_identity,
    })
}
