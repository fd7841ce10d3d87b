//! Time stepping: first-order start, coupled second-order step solved by
//! Newton, and the pressure-correction projection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, StepDiagnostics};
use crate::error::{Error, Result};
use crate::femspace::{Coefficient, OperatorSet, VectorField};
use crate::linalg::{self, dot, norm2, CsrMatrix, LinearMethod, LinearSolverConfig, LuFactor, LuSymbolic, SaddleSolver};
use crate::potential::{clamp, ConvexLaw, Mobility, PhysParams, SECANT_THRESHOLD};

/// Prescribed boundary velocity `g(x, t)`; applied to Dirichlet components only.
pub type BoundaryVelocity = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Right-hand side functionals added to the discrete equations.
pub trait SourceTerms: Send + Sync {
    /// Load for the phase equation (domain and boundary parts).
    fn phase(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> Vec<f64>;
    /// Load for the chemical potential equation.
    fn chemical(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> Vec<f64>;
    /// Load for the momentum equation.
    fn momentum(&self, ops: &OperatorSet, params: &PhysParams, t: f64) -> VectorField;
}

/// Everything that defines the continuous problem on a discretization.
pub struct Problem {
    pub ops: OperatorSet,
    pub params: PhysParams,
    pub boundary_velocity: Option<BoundaryVelocity>,
    pub sources: Option<Arc<dyn SourceTerms>>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("params", &self.params)
            .field("n", &self.ops.n())
            .field("driven", &self.boundary_velocity.is_some())
            .field("sources", &self.sources.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(ops: OperatorSet, params: PhysParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            ops,
            params,
            boundary_velocity: None,
            sources: None,
        })
    }

    pub fn with_boundary_velocity(mut self, g: BoundaryVelocity) -> Self {
        self.boundary_velocity = Some(g);
        self
    }

    pub fn with_sources(mut self, s: Arc<dyn SourceTerms>) -> Self {
        self.sources = Some(s);
        self
    }

    /// Boundary values at time `t` written into the Dirichlet slots of `u`.
    pub fn impose_boundary(&self, u: &mut VectorField, t: f64) {
        match &self.boundary_velocity {
            Some(g) => self.ops.velocity.apply_dirichlet(u, |x| g(x, t)),
            None => self.ops.velocity.apply_dirichlet(u, |_| [0.0, 0.0]),
        }
    }

    fn boundary_field(&self, t: f64) -> VectorField {
        let mut u = VectorField::zeros(self.ops.n());
        self.impose_boundary(&mut u, t);
        u
    }
}

/// Full time-stepping state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChnsState {
    pub phi: Vec<f64>,
    pub phi_prev: Vec<f64>,
    /// Latest chemical potential (`mu^1` after the start, `mu^{n+1/2}` afterwards).
    pub mu: Vec<f64>,
    pub u: VectorField,
    pub u_prev: VectorField,
    pub p: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl ChnsState {
    /// State at `t0` with `phi^{-1} = phi^0` and `u^{-1} = u^0`.
    pub fn initial(phi: Vec<f64>, u: VectorField, p: Vec<f64>, t0: f64) -> Result<Self> {
        if let Some(&bad) = phi.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Domain { value: bad });
        }
        if u.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.len(),
                got: u.len(),
            });
        }
        Ok(Self {
            phi_prev: phi.clone(),
            mu: vec![0.0; phi.len()],
            u_prev: u.clone(),
            phi,
            u,
            p,
            t: t0,
            step: 0,
        })
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `phi~ = (3 phi^n - phi^{n-1}) / 2` and `u~` likewise.
#[derive(Debug, Clone)]
pub struct ExtrapolatedQuantities {
    pub phi_tilde: Vec<f64>,
    pub u_tilde: VectorField,
}

impl ExtrapolatedQuantities {
    pub fn from_state(s: &ChnsState) -> Self {
        Self {
            phi_tilde: s.phi.iter().zip(&s.phi_prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
            u_tilde: s.u.combine(1.5, &s.u_prev, -0.5),
        }
    }
}

/// Newton controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Fraction-to-the-boundary factor.
    pub boundary_fraction: f64,
    /// Iterates stay in `(-1 + margin, 1 - margin)`.
    pub boundary_margin: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_iters: 40,
            max_backtracks: 40,
            boundary_fraction: 0.95,
            boundary_margin: 1e-12,
        }
    }
}

/// How Newton corrections are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum JacobianMode {
    /// Fresh LU of the Jacobian at every iteration.
    Exact,
    /// GMRES on the current Jacobian, preconditioned by the LU of an earlier
    /// one; refactored when GMRES needs more than `max_krylov` iterations.
    Recycled { max_krylov: usize },
}

/// Run parameters of the time discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub dt: f64,
    pub newton: NewtonConfig,
    pub secant_threshold: f64,
    /// `N` of the regularized convex force, used as a retry when Newton fails.
    pub regularization: Option<f64>,
    pub jacobian: JacobianMode,
    /// Krylov settings for the recycled mode.
    pub krylov: LinearSolverConfig,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            newton: NewtonConfig::default(),
            secant_threshold: SECANT_THRESHOLD,
            regularization: None,
            jacobian: JacobianMode::Exact,
            krylov: LinearSolverConfig {
                method: LinearMethod::Gmres,
                rel_tol: 1e-11,
                max_iters: 200,
                restart: 60,
            },
        }
    }
}

impl SchemeConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        let n = &self.newton;
        if !(n.abs_tol > 0.0 && n.rel_tol > 0.0) || n.max_iters == 0 {
            return Err(Error::InvalidParameter("newton tolerances must be positive".into()));
        }
        if !(n.boundary_fraction > 0.0 && n.boundary_fraction < 1.0) {
            return Err(Error::InvalidParameter("boundary fraction must lie in (0, 1)".into()));
        }
        if !(self.secant_threshold > 0.0) {
            return Err(Error::InvalidParameter("secant threshold must be positive".into()));
        }
        if let Some(nreg) = self.regularization {
            if !(nreg > 2.0) {
                return Err(Error::InvalidParameter(format!("regularization N must exceed 2, got {nreg}")));
            }
        }
        self.krylov.validate()
    }
}

// ---------------------------------------------------------------------------
// Newton

/// A nonlinear system `R(x) = 0` with a way to compute Newton directions.
pub trait NonlinearSystem {
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>>;
    /// Solves `J(x) dx = -r`.
    fn direction(&mut self, x: &[f64], r: &[f64]) -> Result<LinearStep>;
    /// Largest admissible fraction of `dx`.
    fn max_step(&self, _x: &[f64], _dx: &[f64]) -> f64 {
        1.0
    }
}

/// One linearized solve.
#[derive(Debug, Clone)]
pub struct LinearStep {
    pub dx: Vec<f64>,
    pub rel_residual: f64,
    pub iterations: usize,
}

/// Newton iteration trace.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
    pub max_linear_residual: f64,
    pub linear_iterations: usize,
    pub damped_steps: usize,
}

/// Damped Newton with backtracking on `||R||_2`.
pub fn newton_solve<S: NonlinearSystem + ?Sized>(sys: &mut S, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<NewtonReport> {
    let mut x = x0;
    let mut r = sys.residual(&x)?;
    let mut nr = norm2(&r);
    let tol = cfg.abs_tol.max(cfg.rel_tol * nr);
    let mut report = NewtonReport {
        x: Vec::new(),
        iterations: 0,
        residual_norms: vec![nr],
        max_linear_residual: 0.0,
        linear_iterations: 0,
        damped_steps: 0,
    };
    while nr > tol {
        if report.iterations >= cfg.max_iters {
            return Err(Error::NewtonDivergence {
                iterations: report.iterations,
                residual: nr,
            });
        }
        let step = sys.direction(&x, &r)?;
        report.max_linear_residual = report.max_linear_residual.max(step.rel_residual);
        report.linear_iterations += step.iterations;
        let mut alpha = sys.max_step(&x, &step.dx).min(1.0);
        if alpha < 1.0 {
            report.damped_steps += 1;
        }
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&step.dx).map(|(a, d)| a + alpha * d).collect();
            match sys.residual(&trial) {
                Ok(rt) => {
                    let nt = norm2(&rt);
                    if nt <= tol || nt < (1.0 - 1e-4 * alpha) * nr {
                        accepted = Some((trial, rt, nt));
                        break;
                    }
                }
                Err(Error::Domain { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        report.iterations += 1;
        match accepted {
            Some((xt, rt, nt)) => {
                let stalled = nt > 0.5 * nr && nt <= 1e3 * tol;
                x = xt;
                r = rt;
                nr = nt;
                report.residual_norms.push(nr);
                if stalled {
                    break;
                }
            }
            // the residual has reached its rounding floor
            None if nr <= 1e3 * tol => break,
            None => {
                return Err(Error::NewtonDivergence {
                    iterations: report.iterations,
                    residual: nr,
                })
            }
        }
    }
    report.x = x;
    Ok(report)
}

/// Closure-backed system with a sparse Jacobian solved by LU.
pub struct SparseSystem<R, J> {
    pub residual: R,
    pub jacobian: J,
}

impl<R, J> NonlinearSystem for SparseSystem<R, J>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<CsrMatrix>,
{
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        (self.residual)(x)
    }

    fn direction(&mut self, x: &[f64], r: &[f64]) -> Result<LinearStep> {
        let j = (self.jacobian)(x)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let rep = linalg::solve(&j, &rhs, &LinearSolverConfig::with_method(LinearMethod::DirectLu))?;
        Ok(LinearStep {
            dx: rep.x,
            rel_residual: rep.rel_residual,
            iterations: 1,
        })
    }
}

/// Linear solves for Newton corrections with optional LU recycling.
struct JacobianSolver {
    mode: JacobianMode,
    krylov: LinearSolverConfig,
    symbolic: Option<LuSymbolic>,
    lu: Option<LuFactor>,
    factorizations: usize,
}

impl JacobianSolver {
    fn new(mode: JacobianMode, krylov: LinearSolverConfig) -> Self {
        Self {
            mode,
            krylov,
            symbolic: None,
            lu: None,
            factorizations: 0,
        }
    }

    fn factor(&mut self, j: &CsrMatrix) -> Result<()> {
        if !self.symbolic.as_ref().is_some_and(|s| s.matches(j)) {
            self.symbolic = Some(LuSymbolic::new(j)?);
        }
        self.lu = Some(self.symbolic.as_ref().unwrap().factor(j)?);
        self.factorizations += 1;
        Ok(())
    }

    fn solve(&mut self, j: &CsrMatrix, rhs: &[f64]) -> Result<LinearStep> {
        match self.mode {
            JacobianMode::Exact => {
                self.factor(j)?;
                let x = self.lu.as_ref().unwrap().solve(rhs);
                let rel = rel_residual(j, &x, rhs);
                if !rel.is_finite() {
                    return Err(Error::Singular("non-finite Newton correction".into()));
                }
                Ok(LinearStep {
                    dx: x,
                    rel_residual: rel,
                    iterations: 1,
                })
            }
            JacobianMode::Recycled { max_krylov } => {
                let stale = self.lu.as_ref().is_none_or(|lu| lu.dim() != j.nrows());
                if stale {
                    self.factor(j)?;
                }
                let attempt = linalg::gmres(j, rhs, None, self.lu.as_ref().unwrap(), &self.krylov);
                match attempt {
                    Ok(rep) if rep.iterations <= max_krylov => Ok(LinearStep {
                        dx: rep.x,
                        rel_residual: rep.rel_residual,
                        iterations: rep.iterations,
                    }),
                    _ => {
                        self.factor(j)?;
                        let rep = linalg::gmres(j, rhs, None, self.lu.as_ref().unwrap(), &self.krylov)?;
                        Ok(LinearStep {
                            dx: rep.x,
                            rel_residual: rep.rel_residual,
                            iterations: rep.iterations,
                        })
                    }
                }
            }
        }
    }
}

fn rel_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// `L x - rhs` plus `-W_i g_i(phi_i)` on the chemical-potential rows.
///
/// Unknowns start with `[phi (n), mu (n), ...]`; `g_i` returns value and derivative.
struct SemilinearSystem<'a, G: Fn(usize, f64) -> (f64, f64)> {
    lin: &'a CsrMatrix,
    jac: CsrMatrix,
    diag_pos: Vec<usize>,
    rhs: Vec<f64>,
    weights: &'a [f64],
    g: G,
    law: ConvexLaw,
    newton: NewtonConfig,
    solver: &'a mut JacobianSolver,
}

impl<'a, G: Fn(usize, f64) -> (f64, f64)> SemilinearSystem<'a, G> {
    fn new(
        lin: &'a CsrMatrix,
        rhs: Vec<f64>,
        weights: &'a [f64],
        g: G,
        law: ConvexLaw,
        newton: NewtonConfig,
        solver: &'a mut JacobianSolver,
    ) -> Self {
        let n = weights.len();
        let diag_pos = (0..n)
            .map(|i| lin.find(n + i, i).expect("mu-phi block lacks a diagonal slot"))
            .collect();
        Self {
            lin,
            jac: lin.clone(),
            diag_pos,
            rhs,
            weights,
            g,
            law,
            newton,
            solver,
        }
    }
}

impl<G: Fn(usize, f64) -> (f64, f64)> SemilinearSystem<'_, G> {
    fn update_jacobian(&mut self, x: &[f64]) {
        let n = self.weights.len();
        let lv = self.lin.values();
        for i in 0..n {
            let k = self.diag_pos[i];
            self.jac.values_mut()[k] = lv[k] - self.weights[i] * (self.g)(i, x[i]).1;
        }
    }
}

impl<G: Fn(usize, f64) -> (f64, f64)> NonlinearSystem for SemilinearSystem<'_, G> {
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.weights.len();
        if let Some(&bad) = x[..n].iter().find(|&&v| !self.law.admits(v)) {
            return Err(Error::Domain { value: bad });
        }
        let mut r = self.lin.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri -= bi;
        }
        for i in 0..n {
            r[n + i] -= self.weights[i] * (self.g)(i, x[i]).0;
        }
        Ok(r)
    }

    fn direction(&mut self, x: &[f64], r: &[f64]) -> Result<LinearStep> {
        self.update_jacobian(x);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        self.solver.solve(&self.jac, &rhs)
    }

    fn max_step(&self, x: &[f64], dx: &[f64]) -> f64 {
        if self.law != ConvexLaw::Exact {
            return 1.0;
        }
        let n = self.weights.len();
        let lim = 1.0 - self.newton.boundary_margin;
        let mut a = 1.0f64;
        for i in 0..n {
            let y = x[i] + dx[i];
            if y.abs() > lim {
                let target = lim * dx[i].signum();
                a = a.min((target - x[i]) / dx[i]);
            }
        }
        if a < 1.0 {
            (self.newton.boundary_fraction * a).max(0.0)
        } else {
            1.0
        }
    }
}

// ---------------------------------------------------------------------------
// Steps

struct CoupledAssembly {
    lin: CsrMatrix,
    rhs: Vec<f64>,
    x0: Vec<f64>,
    km: CsrMatrix,
    eta: CsrMatrix,
    f_n: Vec<f64>,
}

/// Outcome of one time step beyond the new state.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub linear_residual: f64,
    pub factorizations: usize,
    pub used_regularization: bool,
    /// `dt / (eps We*) ||sqrt(M) grad mu||^2` (unit scale without surface tension).
    pub dissipation_ch: f64,
    /// `dt / Re ||sqrt(eta) grad ubar^{n+1/2}||^2`.
    pub dissipation_ns: f64,
    /// `||B u^{n+1}||_2`.
    pub divergence: f64,
    /// `||u^{n+1}||^2 - ||ubar||^2 + ||u^{n+1} - ubar||^2`.
    pub projection_identity: f64,
    pub projection_residual: f64,
}

/// Solution of the coupled system.
#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    /// `ubar^{n+1/2}`.
    pub w: VectorField,
    pub report: StepReport,
}

/// Result of the projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub u: VectorField,
    pub p: Vec<f64>,
    pub divergence: f64,
    pub identity: f64,
    pub rel_residual: f64,
}

/// Drives the scheme over a fixed discretization.
pub struct Stepper {
    pub problem: Problem,
    pub config: SchemeConfig,
    projection: SaddleSolver,
    velocity_mass: CsrMatrix,
    fixed: Vec<usize>,
    jacobian: JacobianSolver,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("problem", &self.problem)
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

fn block_diag2(a: &CsrMatrix) -> CsrMatrix {
    CsrMatrix::block(&[vec![Some(a), None], vec![None, Some(a)]])
}

fn add_into(a: &mut [f64], s: f64, b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

impl Stepper {
    pub fn new(problem: Problem, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        problem.params.validate()?;
        let ops = &problem.ops;
        let velocity_mass = block_diag2(&ops.mass);
        let fixed = ops.velocity.fixed_dofs();
        let projection = SaddleSolver::new(&velocity_mass, &ops.divergence, &ops.pressure.mean_weights, &fixed)?;
        let jacobian = JacobianSolver::new(config.jacobian, config.krylov);
        Ok(Self {
            problem,
            config,
            projection,
            velocity_mass,
            fixed,
            jacobian,
        })
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.problem.ops
    }

    pub fn params(&self) -> &PhysParams {
        &self.problem.params
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// Number of LU factorizations of Newton Jacobians so far.
    pub fn factorizations(&self) -> usize {
        self.jacobian.factorizations
    }

    fn mobility_matrix(&self, phi: &[f64]) -> Result<CsrMatrix> {
        let ops = &self.problem.ops;
        let prm = &self.problem.params;
        match prm.mobility {
            Mobility::Constant(m) => Ok(ops.stiffness.scaled(m / prm.peclet)),
            _ => {
                let law = |v: f64| prm.effective_mobility(clamp(v));
                ops.phase.assemble_stiffness(&Coefficient::Field { nodal: phi, law: &law })
            }
        }
    }

    fn viscosity_matrix(&self, phi: &[f64]) -> Result<CsrMatrix> {
        let ops = &self.problem.ops;
        let prm = &self.problem.params;
        if prm.viscosity_ratio == 1.0 {
            Ok(ops.stiffness.scaled(prm.viscosity(0.0)))
        } else {
            let law = |v: f64| prm.viscosity(clamp(v));
            ops.phase.assemble_stiffness(&Coefficient::Field { nodal: phi, law: &law })
        }
    }

    fn buoyancy_load(&self, phi: &[f64]) -> Option<Vec<f64>> {
        let prm = &self.problem.params;
        prm.buoyancy.map(|_| {
            let f: Vec<f64> = phi.iter().map(|&v| prm.buoyancy_force(v)).collect();
            self.problem.ops.mass.matvec(&f)
        })
    }

    fn loads(&self, t: f64) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<VectorField>) {
        match &self.problem.sources {
            Some(s) => {
                let (o, p) = (&self.problem.ops, &self.problem.params);
                (Some(s.phase(o, p, t)), Some(s.chemical(o, p, t)), Some(s.momentum(o, p, t)))
            }
            None => (None, None, None),
        }
    }

    /// `int phi (u . n) chi_i ds` minus its net value spread over the boundary,
    /// so that the phase equation keeps the total mass.
    fn outflow_load(&self, phi: &[f64], u: &VectorField) -> Vec<f64> {
        let space = &self.problem.ops.phase;
        let mut load = space.boundary_flux_load(phi, u);
        let net: f64 = load.iter().sum();
        if net != 0.0 {
            let b = space.boundary_load(space.degree() + 2, |_, _| 1.0).expect("valid rule");
            let length: f64 = b.iter().sum();
            add_into(&mut load, -net / length, &b);
        }
        load
    }

    fn check_bounds(&self, phi: &[f64], step: usize) -> Result<()> {
        let m = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m < 1.0 && m.is_finite() {
            Ok(())
        } else {
            Err(Error::BoundViolation { step, max_abs: m })
        }
    }

    /// First-order start from `state` (step 0) to step 1.
    pub fn first_step(&mut self, state: &ChnsState) -> Result<(ChnsState, StepReport)> {
        let dt = self.config.dt;
        let t1 = state.t + dt;
        let ops = &self.problem.ops;
        let prm = &self.problem.params;
        let n = ops.n();
        let w = ops.lumped();
        let (s_phi, s_mu, s_u) = self.loads(t1);

        // Cahn–Hilliard part: unknowns [phi^1, mu^1]
        let km = self.mobility_matrix(&state.phi)?;
        let wd = CsrMatrix::diagonal(w);
        let kgrad = ops.stiffness.scaled(-prm.epsilon * prm.epsilon);
        let km_dt = km.scaled(dt);
        let lin = CsrMatrix::block(&[vec![Some(&wd), Some(&km_dt)], vec![Some(&kgrad), Some(&wd)]]);
        let [px0, py0] = ops.phase.assemble_weighted_gradient_pair(&state.phi);
        let mut rhs_phi: Vec<f64> = w.iter().zip(&state.phi).map(|(a, b)| a * b).collect();
        add_into(&mut rhs_phi, dt, &px0.matvec(&state.u.x));
        add_into(&mut rhs_phi, dt, &py0.matvec(&state.u.y));
        add_into(&mut rhs_phi, -dt, &self.outflow_load(&state.phi, &state.u));
        if let Some(s) = &s_phi {
            add_into(&mut rhs_phi, dt, s);
        }
        let mut rhs_mu = ops.mass.matvec(&state.phi);
        rhs_mu.iter_mut().for_each(|v| *v *= -prm.theta_c);
        if let Some(s) = &s_mu {
            add_into(&mut rhs_mu, 1.0, s);
        }
        let mut rhs = rhs_phi;
        rhs.extend_from_slice(&rhs_mu);

        let margin = 1e-6;
        let guess_phi: Vec<f64> = state.phi.iter().map(|&v| v.clamp(-1.0 + margin, 1.0 - margin)).collect();
        let guess_mu: Vec<f64> = guess_phi
            .iter()
            .zip(&state.phi)
            .map(|(&g, &p0)| ConvexLaw::Exact.force(g) - prm.theta_c * p0)
            .collect();
        let mut x0 = guess_phi;
        x0.extend_from_slice(&guess_mu);

        let mut report = StepReport::default();
        let solved = {
            let mut solver = JacobianSolver::new(JacobianMode::Exact, self.config.krylov);
            let res = self.solve_semilinear(&lin, &rhs, x0.clone(), &mut solver, |law| {
                move |_: usize, v: f64| (law.force(v), law.force_derivative(v))
            });
            report.factorizations += solver.factorizations;
            res
        }
        .map_err(|e| Error::Step { step: 1, source: Box::new(e) })?;
        let (newton, used_reg) = solved;
        report.used_regularization = used_reg;
        report.newton_iterations = newton.iterations;
        report.linear_residual = newton.max_linear_residual;
        report.linear_iterations = newton.linear_iterations;
        let phi1 = newton.x[..n].to_vec();
        let mu1 = newton.x[n..].to_vec();
        self.check_bounds(&phi1, 1)?;
        report.dissipation_ch = dt * self.ch_scale() * dot(&mu1, &km.matvec(&mu1));

        // momentum/pressure saddle with psi = dt p^1
        let sigma = prm.capillary_coupling();
        let eta = self.viscosity_matrix(&state.phi)?;
        let conv = ops.phase.assemble_convection(&state.u);
        let rho = prm.background_density();
        let a1 = ops.mass.scaled(rho).add_scaled(rho * dt / prm.reynolds, &eta).add_scaled(dt, &conv);
        let a1v = block_diag2(&a1);
        let mut f = VectorField {
            x: ops.mass.matvec(&state.u.x),
            y: ops.mass.matvec(&state.u.y),
        };
        f.x.iter_mut().chain(f.y.iter_mut()).for_each(|v| *v *= rho);
        if sigma != 0.0 {
            add_into(&mut f.x, -dt * sigma, &px0.matvec_transpose(&mu1));
            add_into(&mut f.y, -dt * sigma, &py0.matvec_transpose(&mu1));
        }
        if let Some(s) = &s_u {
            add_into(&mut f.x, dt, &s.x);
            add_into(&mut f.y, dt, &s.y);
        }
        if let Some(b) = self.buoyancy_load(&state.phi) {
            add_into(&mut f.y, dt, &b);
        }
        let g1 = self.problem.boundary_field(t1);
        let mut f_flat = f.to_flat();
        let g1_flat = g1.to_flat();
        for &d in &self.fixed {
            f_flat[d] = g1_flat[d];
        }
        let sol = SaddleSolver::new(&a1v, &ops.divergence, &ops.pressure.mean_weights, &self.fixed)?
            .solve(&f_flat, &vec![0.0; ops.pressure.dim()])?;
        let u1 = VectorField::from_flat(&sol.u);
        let p1: Vec<f64> = sol.p.iter().map(|v| v / dt).collect();
        report.divergence = norm2(&ops.divergence.matvec(&sol.u));
        report.projection_residual = sol.rel_residual;
        report.dissipation_ns = rho * dt / prm.reynolds * (dot(&u1.x, &eta.matvec(&u1.x)) + dot(&u1.y, &eta.matvec(&u1.y)));

        let next = ChnsState {
            phi_prev: state.phi.clone(),
            phi: phi1,
            mu: mu1,
            u_prev: state.u.clone(),
            u: u1,
            p: p1,
            t: t1,
            step: state.step + 1,
        };
        Ok((next, report))
    }

    fn ch_scale(&self) -> f64 {
        let s = self.problem.params.capillary_coupling();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Newton on a semilinear system; retries with the regularized law on failure.
    fn solve_semilinear<F, G>(
        &self,
        lin: &CsrMatrix,
        rhs: &[f64],
        x0: Vec<f64>,
        solver: &mut JacobianSolver,
        make_g: F,
    ) -> Result<(NewtonReport, bool)>
    where
        F: Fn(ConvexLaw) -> G,
        G: Fn(usize, f64) -> (f64, f64),
    {
        let w = self.problem.ops.lumped();
        let first = {
            let mut sys = SemilinearSystem::new(
                lin,
                rhs.to_vec(),
                w,
                make_g(ConvexLaw::Exact),
                ConvexLaw::Exact,
                self.config.newton,
                solver,
            );
            newton_solve(&mut sys, x0.clone(), &self.config.newton)
        };
        match (first, self.config.regularization) {
            (Ok(r), _) => Ok((r, false)),
            (Err(_), Some(nreg)) => {
                let law = ConvexLaw::Regularized(nreg);
                let mut sys = SemilinearSystem::new(lin, rhs.to_vec(), w, make_g(law), law, self.config.newton, solver);
                Ok((newton_solve(&mut sys, x0, &self.config.newton)?, true))
            }
            (Err(e), None) => Err(e),
        }
    }

    fn assemble_coupled(&self, state: &ChnsState) -> Result<CoupledAssembly> {
        if state.step == 0 {
            return Err(Error::InvalidParameter("the second-order step needs n >= 1".into()));
        }
        let dt = self.config.dt;
        let t_half = state.t + 0.5 * dt;
        let t_next = state.t + dt;
        let ops = &self.problem.ops;
        let prm = &self.problem.params;
        let n = ops.n();
        let w = ops.lumped();
        let ext = ExtrapolatedQuantities::from_state(state);
        let sigma = prm.capillary_coupling();
        let (s_phi, s_mu, s_u) = self.loads(t_half);

        let km = self.mobility_matrix(&ext.phi_tilde)?;
        let [px, py] = ops.phase.assemble_weighted_gradient_pair(&ext.phi_tilde);
        let eta = self.viscosity_matrix(&ext.phi_tilde)?;
        let conv = ops.phase.assemble_convection(&ext.u_tilde);
        let rho = prm.background_density();
        let aw = ops
            .mass
            .scaled(2.0 * rho)
            .add_scaled(rho * dt / prm.reynolds, &eta)
            .add_scaled(dt, &conv);

        let wd = CsrMatrix::diagonal(w);
        let km_dt = km.scaled(dt);
        let px_dt = px.scaled(-dt);
        let py_dt = py.scaled(-dt);
        let khalf = ops.stiffness.scaled(-0.5 * prm.epsilon * prm.epsilon);
        let pxt = px.transpose().scaled(dt * sigma);
        let pyt = py.transpose().scaled(dt * sigma);
        let (cx, cy) = if sigma != 0.0 { (Some(&pxt), Some(&pyt)) } else { (None, None) };
        let mut lin = CsrMatrix::block(&[
            vec![Some(&wd), Some(&km_dt), Some(&px_dt), Some(&py_dt)],
            vec![Some(&khalf), Some(&wd), None, None],
            vec![None, cx, Some(&aw), None],
            vec![None, cy, None, Some(&aw)],
        ]);
        let fixed_rows: Vec<usize> = self.fixed.iter().map(|d| 2 * n + d).collect();
        lin.set_identity_rows(&fixed_rows);

        // right-hand side
        let mut rhs: Vec<f64> = w.iter().zip(&state.phi).map(|(a, b)| a * b).collect();
        if let Some(s) = &s_phi {
            add_into(&mut rhs, dt, s);
        }
        let mut rhs_mu = ops.mass.matvec(&ext.phi_tilde);
        rhs_mu.iter_mut().for_each(|v| *v *= -prm.theta_c);
        add_into(&mut rhs_mu, 0.5 * prm.epsilon * prm.epsilon, &ops.stiffness.matvec(&state.phi));
        for i in 0..n {
            rhs_mu[i] -= dt * w[i] * ConvexLaw::Exact.force(state.phi[i]);
        }
        if let Some(s) = &s_mu {
            add_into(&mut rhs_mu, 1.0, s);
        }
        let g_next = self.problem.boundary_field(t_next);
        let w_bnd = g_next.combine(0.5, &state.u, 0.5);
        add_into(&mut rhs, -dt, &self.outflow_load(&ext.phi_tilde, &w_bnd));
        rhs.extend_from_slice(&rhs_mu);
        let grad_p = ops.pressure_gradient_load(&state.p);
        let mut rhs_w = VectorField {
            x: ops.mass.matvec(&state.u.x),
            y: ops.mass.matvec(&state.u.y),
        };
        rhs_w.x.iter_mut().chain(rhs_w.y.iter_mut()).for_each(|v| *v *= 2.0 * rho);
        add_into(&mut rhs_w.x, -dt, &grad_p[..n]);
        add_into(&mut rhs_w.y, -dt, &grad_p[n..]);
        if let Some(s) = &s_u {
            add_into(&mut rhs_w.x, dt, &s.x);
            add_into(&mut rhs_w.y, dt, &s.y);
        }
        if let Some(b) = self.buoyancy_load(&ext.phi_tilde) {
            add_into(&mut rhs_w.y, dt, &b);
        }
        let mut rhs_w_flat = rhs_w.to_flat();
        let w_bnd_flat = w_bnd.to_flat();
        for &d in &self.fixed {
            rhs_w_flat[d] = w_bnd_flat[d];
        }
        rhs.extend_from_slice(&rhs_w_flat);

        // initial guess
        let mut x0: Vec<f64> = state
            .phi
            .iter()
            .zip(&state.phi_prev)
            .map(|(&pn, &pp)| {
                let cap = 1.0 - 0.5 * (1.0 - pn.abs());
                (2.0 * pn - pp).clamp(-cap, cap)
            })
            .collect();
        x0.extend_from_slice(&state.mu);
        let mut u_guess = state.u.to_flat();
        for &d in &self.fixed {
            u_guess[d] = w_bnd_flat[d];
        }
        x0.extend_from_slice(&u_guess);

        Ok(CoupledAssembly {
            lin,
            rhs,
            x0,
            km,
            eta,
            f_n: state.phi.iter().map(|&v| ConvexLaw::Exact.force(v)).collect(),
        })
    }

    fn coupled_g<'a>(&self, state: &'a ChnsState, f_n: &'a [f64], law: ConvexLaw) -> impl Fn(usize, f64) -> (f64, f64) + 'a {
        let dt = self.config.dt;
        let thr = self.config.secant_threshold;
        move |i: usize, v: f64| {
            let b = state.phi[i];
            let val = law.secant(v, b, thr) + dt * law.force(v);
            let der = law.secant_derivative(v, b, thr) + dt * law.force_derivative(v);
            // keeps the explicit f_v(phi^n) term on the same law
            let shift = if law == ConvexLaw::Exact { 0.0 } else { dt * (f_n[i] - law.force(b)) };
            (val + shift, der)
        }
    }

    /// Residual and Jacobian of the coupled system at `x = [phi, mu, w]`.
    pub fn coupled_system(&self, state: &ChnsState, x: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let a = self.assemble_coupled(state)?;
        if x.len() != a.rhs.len() {
            return Err(Error::DimensionMismatch {
                expected: a.rhs.len(),
                got: x.len(),
            });
        }
        let mut solver = JacobianSolver::new(JacobianMode::Exact, self.config.krylov);
        let g = self.coupled_g(state, &a.f_n, ConvexLaw::Exact);
        let mut sys = SemilinearSystem::new(
            &a.lin,
            a.rhs.clone(),
            self.problem.ops.lumped(),
            g,
            ConvexLaw::Exact,
            self.config.newton,
            &mut solver,
        );
        let r = sys.residual(x)?;
        sys.update_jacobian(x);
        Ok((r, sys.jac.clone()))
    }

    /// Coupled solve for `(phi^{n+1}, mu^{n+1/2}, ubar^{n+1/2})`, `n >= 1`.
    pub fn coupled_step(&mut self, state: &ChnsState) -> Result<CoupledSolution> {
        let dt = self.config.dt;
        let n = self.problem.ops.n();
        let CoupledAssembly { lin, rhs, x0, km, eta, f_n } = self.assemble_coupled(state)?;
        let mut solver = std::mem::replace(
            &mut self.jacobian,
            JacobianSolver::new(self.config.jacobian, self.config.krylov),
        );
        let fact_before = solver.factorizations;
        let make_g = |law: ConvexLaw| self.coupled_g(state, &f_n, law);
        let res = self.solve_semilinear(&lin, &rhs, x0, &mut solver, make_g);
        let factorizations = solver.factorizations - fact_before;
        self.jacobian = solver;
        let (newton, used_reg) = res?;

        let phi = newton.x[..n].to_vec();
        let mu = newton.x[n..2 * n].to_vec();
        let wv = VectorField::from_flat(&newton.x[2 * n..]);
        let prm = &self.problem.params;
        let report = StepReport {
            newton_iterations: newton.iterations,
            linear_iterations: newton.linear_iterations,
            linear_residual: newton.max_linear_residual,
            factorizations,
            used_regularization: used_reg,
            dissipation_ch: dt * self.ch_scale() * dot(&mu, &km.matvec(&mu)),
            dissipation_ns: prm.background_density() * dt / prm.reynolds * (dot(&wv.x, &eta.matvec(&wv.x)) + dot(&wv.y, &eta.matvec(&wv.y))),
            ..StepReport::default()
        };
        Ok(CoupledSolution { phi, mu, w: wv, report })
    }

    /// Projection of `ubar^{n+1}` onto discretely divergence-free fields.
    pub fn projection_step(&self, ubar: &VectorField, p: &[f64], t_next: f64) -> Result<ProjectionResult> {
        let ops = &self.problem.ops;
        let dt = self.config.dt;
        let ubar_flat = ubar.to_flat();
        let mut f = self.velocity_mass.matvec(&ubar_flat);
        let g = self.problem.boundary_field(t_next).to_flat();
        for &d in &self.fixed {
            f[d] = g[d];
        }
        let sol = self.projection.solve(&f, &vec![0.0; ops.pressure.dim()])?;
        let rho = self.problem.params.background_density();
        let p_next: Vec<f64> = p.iter().zip(&sol.p).map(|(a, psi)| a + 2.0 * rho * psi / dt).collect();
        let diff: Vec<f64> = sol.u.iter().zip(&ubar_flat).map(|(a, b)| a - b).collect();
        let mv = |v: &[f64]| dot(v, &self.velocity_mass.matvec(v));
        let identity = mv(&sol.u) - mv(&ubar_flat) + mv(&diff);
        Ok(ProjectionResult {
            divergence: norm2(&ops.divergence.matvec(&sol.u)),
            u: VectorField::from_flat(&sol.u),
            p: p_next,
            identity,
            rel_residual: sol.rel_residual,
        })
    }

    /// Second-order step `n -> n+1` (`n >= 1`).
    pub fn second_order_step(&mut self, state: &ChnsState) -> Result<(ChnsState, StepReport)> {
        let dt = self.config.dt;
        let t_next = state.t + dt;
        let step = state.step + 1;
        let wrap = |e: Error| match e {
            Error::Step { .. } | Error::BoundViolation { .. } => e,
            other => Error::Step { step, source: Box::new(other) },
        };
        let sol = self.coupled_step(state).map_err(wrap)?;
        self.check_bounds(&sol.phi, step)?;
        let mut ubar = sol.w.combine(2.0, &state.u, -1.0);
        self.problem.impose_boundary(&mut ubar, t_next);
        let proj = self.projection_step(&ubar, &state.p, t_next).map_err(wrap)?;
        let mut report = sol.report;
        report.divergence = proj.divergence;
        report.projection_identity = proj.identity;
        report.projection_residual = proj.rel_residual;
        let next = ChnsState {
            phi_prev: state.phi.clone(),
            phi: sol.phi,
            mu: sol.mu,
            u_prev: state.u.clone(),
            u: proj.u,
            p: proj.p,
            t: t_next,
            step,
        };
        Ok((next, report))
    }

    /// One step of whichever kind applies.
    pub fn step(&mut self, state: &ChnsState) -> Result<(ChnsState, StepReport)> {
        if state.step == 0 {
            self.first_step(state)
        } else {
            self.second_order_step(state)
        }
    }

    /// Runs `n_steps`, recording diagnostics after every step. The observer
    /// sees each accepted state and may abort the run by returning an error.
    pub fn advance<O>(&mut self, state: ChnsState, n_steps: usize, mut observer: O) -> Result<(ChnsState, Vec<StepDiagnostics>)>
    where
        O: FnMut(&ChnsState, &StepDiagnostics) -> Result<()>,
    {
        let mut s = state;
        let mut out = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let (next, rep) = self.step(&s)?;
            let d = diagnostics::step_diagnostics(self, &next, &rep)?;
            observer(&next, &d)?;
            out.push(d);
            s = next;
        }
        Ok((s, out))
    }
}
