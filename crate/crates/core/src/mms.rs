//! Manufactured solutions and the matching source functionals.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::femspace::{OperatorSet, VectorField};
use crate::potential::{ConvexLaw, Mobility, PhysParams};
use crate::scheme::{BoundaryVelocity, SourceTerms};

/// Analytic fields with the derivatives needed to build residual forcing.
pub trait ExactSolution: Send + Sync {
    fn phi(&self, x: [f64; 2], t: f64) -> f64;
    fn phi_t(&self, x: [f64; 2], t: f64) -> f64;
    fn grad_phi(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn lap_phi(&self, x: [f64; 2], t: f64) -> f64;
    fn grad_lap_phi(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn bilap_phi(&self, x: [f64; 2], t: f64) -> f64;
    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn u_t(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// `grad_u[c][d] = d_d u_c`.
    fn grad_u(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    fn lap_u(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn p(&self, x: [f64; 2], t: f64) -> f64;
    fn grad_p(&self, x: [f64; 2], t: f64) -> [f64; 2];
}

/// Chemical potential and its derivatives implied by an exact phase field.
pub struct DerivedPotential<'a, E: ExactSolution + ?Sized> {
    pub exact: &'a E,
    pub params: &'a PhysParams,
}

impl<E: ExactSolution + ?Sized> DerivedPotential<'_, E> {
    /// `mu = f_v(phi) - theta_c phi - eps^2 Delta phi`.
    pub fn mu(&self, x: [f64; 2], t: f64) -> f64 {
        let phi = self.exact.phi(x, t);
        let e2 = self.params.epsilon * self.params.epsilon;
        ConvexLaw::Exact.force(phi) - self.params.theta_c * phi - e2 * self.exact.lap_phi(x, t)
    }

    pub fn grad_mu(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let phi = self.exact.phi(x, t);
        let e2 = self.params.epsilon * self.params.epsilon;
        let c = ConvexLaw::Exact.force_derivative(phi) - self.params.theta_c;
        let g = self.exact.grad_phi(x, t);
        let gl = self.exact.grad_lap_phi(x, t);
        [c * g[0] - e2 * gl[0], c * g[1] - e2 * gl[1]]
    }

    pub fn lap_mu(&self, x: [f64; 2], t: f64) -> f64 {
        let phi = self.exact.phi(x, t);
        let e2 = self.params.epsilon * self.params.epsilon;
        let d = (1.0 - phi) * (1.0 + phi);
        let fpp = 2.0 * phi / (d * d);
        let c = 1.0 / d - self.params.theta_c;
        let g = self.exact.grad_phi(x, t);
        fpp * (g[0] * g[0] + g[1] * g[1]) + c * self.exact.lap_phi(x, t) - e2 * self.exact.bilap_phi(x, t)
    }
}

/// The trigonometric family
/// `u = cos(pi t) (-cos 2pi x sin 2pi y, sin 2pi x cos 2pi y)`,
/// `p = sin(pi t) sin 2pi x`, `phi = cos(pi t) sin 2pi x cos 2pi y / pi`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigSolution;

const A: f64 = 2.0 * PI;

impl ExactSolution for TrigSolution {
    fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        (PI * t).cos() / PI * (A * x[0]).sin() * (A * x[1]).cos()
    }

    fn phi_t(&self, x: [f64; 2], t: f64) -> f64 {
        -(PI * t).sin() * (A * x[0]).sin() * (A * x[1]).cos()
    }

    fn grad_phi(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let c = 2.0 * (PI * t).cos();
        [
            c * (A * x[0]).cos() * (A * x[1]).cos(),
            -c * (A * x[0]).sin() * (A * x[1]).sin(),
        ]
    }

    fn lap_phi(&self, x: [f64; 2], t: f64) -> f64 {
        -2.0 * A * A * self.phi(x, t)
    }

    fn grad_lap_phi(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let g = self.grad_phi(x, t);
        [-2.0 * A * A * g[0], -2.0 * A * A * g[1]]
    }

    fn bilap_phi(&self, x: [f64; 2], t: f64) -> f64 {
        4.0 * A.powi(4) * self.phi(x, t)
    }

    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let c = (PI * t).cos();
        [
            -c * (A * x[0]).cos() * (A * x[1]).sin(),
            c * (A * x[0]).sin() * (A * x[1]).cos(),
        ]
    }

    fn u_t(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = -PI * (PI * t).sin();
        [
            -s * (A * x[0]).cos() * (A * x[1]).sin(),
            s * (A * x[0]).sin() * (A * x[1]).cos(),
        ]
    }

    fn grad_u(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let c = A * (PI * t).cos();
        let (sx, cx) = (A * x[0]).sin_cos();
        let (sy, cy) = (A * x[1]).sin_cos();
        [[c * sx * sy, -c * cx * cy], [c * cx * cy, -c * sx * sy]]
    }

    fn lap_u(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let u = self.u(x, t);
        [-2.0 * A * A * u[0], -2.0 * A * A * u[1]]
    }

    fn p(&self, x: [f64; 2], t: f64) -> f64 {
        (PI * t).sin() * (A * x[0]).sin()
    }

    fn grad_p(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        [(PI * t).sin() * A * (A * x[0]).cos(), 0.0]
    }
}

/// Residual forcing of an exact solution. Requires constant mobility and
/// matched viscosities.
pub struct MmsSources<E: ExactSolution> {
    pub exact: Arc<E>,
}

impl<E: ExactSolution> MmsSources<E> {
    pub fn new(exact: Arc<E>) -> Self {
        Self { exact }
    }

    fn mobility(params: &PhysParams) -> f64 {
        match params.mobility {
            Mobility::Constant(m) => m / params.peclet,
            _ => panic!("manufactured sources need a constant mobility"),
        }
    }
}

impl<E: ExactSolution + 'static> SourceTerms for MmsSources<E> {
    fn phase(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> Vec<f64> {
        let e = &*self.exact;
        let m = Self::mobility(params);
        let dm = DerivedPotential { exact: e, params };
        let mut load = ops.phase.load(|x| {
            let u = e.u(x, t);
            let g = e.grad_phi(x, t);
            e.phi_t(x, t) + u[0] * g[0] + u[1] * g[1] - m * dm.lap_mu(x, t)
        });
        let bnd = ops
            .phase
            .boundary_load(ops.phase.degree() + 2, |x, n| {
                let gm = dm.grad_mu(x, t);
                m * (gm[0] * n[0] + gm[1] * n[1])
            })
            .expect("valid rule");
        // net outflow, spread over the boundary as the scheme does
        let flux: f64 = ops
            .phase
            .boundary_load(ops.phase.degree() + 2, |x, n| {
                let u = e.u(x, t);
                e.phi(x, t) * (u[0] * n[0] + u[1] * n[1])
            })
            .expect("valid rule")
            .iter()
            .sum();
        let unit = ops.phase.boundary_load(ops.phase.degree() + 2, |_, _| 1.0).expect("valid rule");
        let length: f64 = unit.iter().sum();
        for ((a, b), c) in load.iter_mut().zip(&bnd).zip(&unit) {
            *a += b + flux / length * c;
        }
        load
    }

    fn chemical(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> Vec<f64> {
        let e = &*self.exact;
        let e2 = params.epsilon * params.epsilon;
        ops.phase
            .boundary_load(ops.phase.degree() + 2, |x, n| {
                let g = e.grad_phi(x, t);
                -e2 * (g[0] * n[0] + g[1] * n[1])
            })
            .expect("valid rule")
    }

    fn momentum(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> VectorField {
        let e = &*self.exact;
        let dm = DerivedPotential { exact: e, params };
        let nu = params.viscosity(0.0) / params.reynolds;
        let sigma = params.capillary_coupling();
        let f = |x: [f64; 2], c: usize| {
            let u = e.u(x, t);
            let gu = e.grad_u(x, t);
            let conv = u[0] * gu[c][0] + u[1] * gu[c][1];
            let gm = dm.grad_mu(x, t);
            let phi = e.phi(x, t);
            let mut s = e.u_t(x, t)[c] + conv + e.grad_p(x, t)[c] - nu * e.lap_u(x, t)[c] + sigma * phi * gm[c];
            if c == 1 {
                s -= params.buoyancy_force(phi);
            }
            s
        };
        VectorField {
            x: ops.phase.load(|x| f(x, 0)),
            y: ops.phase.load(|x| f(x, 1)),
        }
    }
}

/// Boundary data of an exact velocity.
pub fn exact_boundary_velocity<E: ExactSolution + 'static>(exact: Arc<E>) -> BoundaryVelocity {
    Arc::new(move |x, t| exact.u(x, t))
}

/// Builds the source hooks for an exact solution.
pub fn mms_sources<E: ExactSolution + 'static>(exact: Arc<E>) -> Arc<dyn SourceTerms> {
    Arc::new(MmsSources::new(exact))
}
