//! Reproducible experiment configurations.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::femspace::{OperatorSet, ScalarSpace, VectorField, VelocitySpace};
use crate::mesh::{build_mesh, Bounds, Side};
use crate::mms::{exact_boundary_velocity, mms_sources, ExactSolution, TrigSolution};
use crate::potential::{Buoyancy, Mobility, PhysParams};
use crate::scheme::{BoundaryVelocity, ChnsState, JacobianMode, Problem, SchemeConfig, Stepper};

/// Named experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Mms,
    Spinodal,
    Rotational,
    LidDriven,
    RayleighTaylor,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Mms,
        ScenarioKind::Spinodal,
        ScenarioKind::Rotational,
        ScenarioKind::LidDriven,
        ScenarioKind::RayleighTaylor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Mms => "mms",
            ScenarioKind::Spinodal => "spinodal",
            ScenarioKind::Rotational => "rotational",
            ScenarioKind::LidDriven => "lid-driven",
            ScenarioKind::RayleighTaylor => "rayleigh-taylor",
        }
    }

    /// Default specification of each experiment.
    pub fn default_spec(self) -> ScenarioSpec {
        match self {
            ScenarioKind::Mms => scenario_mms(2, 16, (1.0f64 / 16.0).powf(1.5)),
            ScenarioKind::Spinodal => scenario_spinodal(1),
            ScenarioKind::Rotational => scenario_rotational(),
            ScenarioKind::LidDriven => scenario_lid_driven(),
            ScenarioKind::RayleighTaylor => scenario_rayleigh_taylor(0.01),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Velocity condition on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityBc {
    NoSlip,
    /// Zero normal velocity, zero tangential traction.
    FreeSlip,
    /// Both components from the scenario's boundary data.
    Prescribed,
}

/// Initial phase field.
#[derive(Clone)]
pub enum InitialPhase {
    Function(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
    /// `mean - amplitude * r`, `r` uniform on `[-1, 1]` per node.
    Random { mean: f64, amplitude: f64 },
}

impl fmt::Debug for InitialPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialPhase::Function(_) => f.write_str("Function(..)"),
            InitialPhase::Random { mean, amplitude } => f
                .debug_struct("Random")
                .field("mean", mean)
                .field("amplitude", amplitude)
                .finish(),
        }
    }
}

pub type VelocityField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Everything needed to set up a run.
#[derive(Clone)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    pub degree: usize,
    pub params: PhysParams,
    pub scheme: SchemeConfig,
    pub t_final: f64,
    pub seed: u64,
    pub initial_phase: InitialPhase,
    pub initial_velocity: Option<VelocityField>,
    /// Left, right, bottom, top.
    pub velocity_bc: [VelocityBc; 4],
    pub boundary_velocity: Option<BoundaryVelocity>,
    /// Present for manufactured-solution runs.
    pub exact: Option<Arc<TrigSolution>>,
    /// Output times for snapshots (empty: use the step cadence only).
    pub snapshot_times: Vec<f64>,
}

impl fmt::Debug for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScenarioSpec")
            .field("kind", &self.kind)
            .field("bounds", &self.bounds)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("degree", &self.degree)
            .field("params", &self.params)
            .field("scheme", &self.scheme)
            .field("t_final", &self.t_final)
            .field("seed", &self.seed)
            .field("initial_phase", &self.initial_phase)
            .field("velocity_bc", &self.velocity_bc)
            .finish_non_exhaustive()
    }
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
        Side::Bottom => 2,
        Side::Top => 3,
    }
}

fn desk_scheme(dt: f64) -> SchemeConfig {
    SchemeConfig {
        jacobian: JacobianMode::Recycled { max_krylov: 25 },
        ..SchemeConfig::with_dt(dt)
    }
}

impl ScenarioSpec {
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.scheme.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scheme.validate()?;
        if self.degree < 2 {
            return Err(Error::Config("velocity degree must be at least 2".into()));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::Config("t_final must be non-negative".into()));
        }
        let needs_data = self.velocity_bc.contains(&VelocityBc::Prescribed);
        if needs_data && self.boundary_velocity.is_none() {
            return Err(Error::Config("prescribed velocity sides need boundary data".into()));
        }
        if self.exact.is_some() && !matches!(self.params.mobility, Mobility::Constant(_)) {
            return Err(Error::Config("manufactured runs need a constant mobility".into()));
        }
        Ok(())
    }

    /// Spaces, operators, stepper and initial state.
    pub fn build(&self) -> Result<(Stepper, ChnsState)> {
        self.validate()?;
        let mesh = build_mesh(self.bounds, self.nx, self.ny, self.degree)?;
        let phase = ScalarSpace::new(&mesh)?;
        let bc = self.velocity_bc;
        let velocity = VelocitySpace::with_sides(&phase, |s| bc[side_index(s)] != VelocityBc::FreeSlip);
        let ops = OperatorSet::new(phase, velocity)?;
        let coords = ops.phase.node_coords();
        let phi0: Vec<f64> = match &self.initial_phase {
            InitialPhase::Function(f) => coords.iter().map(|&x| f(x)).collect(),
            InitialPhase::Random { mean, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                coords
                    .iter()
                    .map(|_| mean - amplitude * rng.random_range(-1.0..=1.0))
                    .collect()
            }
        };
        let mut u0 = match &self.initial_velocity {
            Some(f) => {
                let v: Vec<[f64; 2]> = coords.iter().map(|&x| f(x)).collect();
                VectorField {
                    x: v.iter().map(|a| a[0]).collect(),
                    y: v.iter().map(|a| a[1]).collect(),
                }
            }
            None => VectorField::zeros(coords.len()),
        };
        let p0 = match &self.exact {
            Some(e) => {
                let mut p = ops.pressure.scalar.interpolate(|x| e.p(x, 0.0));
                ops.pressure.remove_mean(&mut p);
                p
            }
            None => vec![0.0; ops.pressure.dim()],
        };
        let mut problem = Problem::new(ops, self.params.clone())?;
        if let Some(g) = &self.boundary_velocity {
            problem = problem.with_boundary_velocity(g.clone());
        }
        if let Some(e) = &self.exact {
            problem = problem.with_sources(mms_sources(e.clone()));
        }
        problem.impose_boundary(&mut u0, 0.0);
        let state = ChnsState::initial(phi0, u0, p0, 0.0)?;
        let stepper = Stepper::new(problem, self.scheme.clone())?;
        Ok((stepper, state))
    }
}

/// Manufactured-solution run on the unit square with all parameters 1.
pub fn scenario_mms(degree: usize, n: usize, dt: f64) -> ScenarioSpec {
    let exact = Arc::new(TrigSolution);
    let e0 = exact.clone();
    let e1 = exact.clone();
    ScenarioSpec {
        kind: ScenarioKind::Mms,
        bounds: Bounds::UNIT_SQUARE,
        nx: n,
        ny: n,
        degree,
        params: PhysParams::default(),
        scheme: SchemeConfig {
            jacobian: JacobianMode::Recycled { max_krylov: 25 },
            ..SchemeConfig::with_dt(dt)
        },
        t_final: 1.0,
        seed: 0,
        initial_phase: InitialPhase::Function(Arc::new(move |x| e0.phi(x, 0.0))),
        initial_velocity: Some(Arc::new(move |x| e1.u(x, 0.0))),
        velocity_bc: [VelocityBc::Prescribed; 4],
        boundary_velocity: Some(exact_boundary_velocity(exact.clone())),
        exact: Some(exact),
        snapshot_times: Vec::new(),
    }
}

/// Time step law of a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepLaw {
    /// `dt = h^{3/2}`.
    ThreeHalves,
    /// `dt = 4 h^2`.
    FourHSquared,
    Fixed(f64),
}

impl StepLaw {
    pub fn dt(self, h: f64) -> f64 {
        match self {
            StepLaw::ThreeHalves => h.powf(1.5),
            StepLaw::FourHSquared => 4.0 * h * h,
            StepLaw::Fixed(dt) => dt,
        }
    }

    /// The law used with each degree in the spatial studies.
    pub fn for_degree(k: usize) -> Self {
        if k >= 3 {
            StepLaw::FourHSquared
        } else {
            StepLaw::ThreeHalves
        }
    }
}

/// Ladder of manufactured runs; `dt` is rounded so that `T = 1` is hit exactly.
pub fn scenario_mms_ladder(degree: usize, ladder: &[usize], law: StepLaw) -> Vec<ScenarioSpec> {
    ladder
        .iter()
        .map(|&n| {
            let dt = law.dt(1.0 / n as f64);
            let steps = (1.0 / dt).ceil();
            scenario_mms(degree, n, 1.0 / steps)
        })
        .collect()
}

/// Spinodal decomposition from a seeded random perturbation of 0.2.
pub fn scenario_spinodal(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::Spinodal,
        bounds: Bounds::UNIT_SQUARE,
        nx: 64,
        ny: 64,
        degree: 2,
        params: PhysParams {
            epsilon: 0.02,
            peclet: 100.0,
            reynolds: 1.0,
            weber: Some(50.0),
            mobility: Mobility::Constant(0.1),
            ..PhysParams::default()
        },
        scheme: desk_scheme(1e-3),
        t_final: 1.0,
        seed,
        initial_phase: InitialPhase::Random {
            mean: 0.2,
            amplitude: 0.01,
        },
        initial_velocity: None,
        velocity_bc: [VelocityBc::NoSlip; 4],
        boundary_velocity: None,
        exact: None,
        snapshot_times: vec![0.5, 1.0, 2.0, 3.5, 5.0, 6.0, 7.1, 10.0],
    }
}

/// Rigid rotation `(1 - 2y, 2x - 1)`.
pub fn rotational_velocity(x: [f64; 2]) -> [f64; 2] {
    [1.0 - 2.0 * x[1], 2.0 * x[0] - 1.0]
}

/// Signed distance to the union of `[0.5-a, 0.5+a] x [0.5-b, 0.5+b]` and its transpose (negative inside).
pub fn cross_signed_distance(x: [f64; 2], a: f64, b: f64) -> f64 {
    let rect = |hw: f64, hh: f64| {
        let dx = (x[0] - 0.5).abs() - hw;
        let dy = (x[1] - 0.5).abs() - hh;
        let outside = (dx.max(0.0).powi(2) + dy.max(0.0).powi(2)).sqrt();
        outside + dx.max(dy).min(0.0)
    };
    rect(a, b).min(rect(b, a))
}

/// Cross-shaped droplet relaxing under a rotating boundary.
pub fn scenario_rotational() -> ScenarioSpec {
    let eps = 0.01;
    ScenarioSpec {
        kind: ScenarioKind::Rotational,
        bounds: Bounds::UNIT_SQUARE,
        nx: 64,
        ny: 64,
        degree: 2,
        params: PhysParams {
            epsilon: eps,
            peclet: 200.0,
            reynolds: 1.0,
            weber: Some(1.0),
            mobility: Mobility::Constant(1.0),
            ..PhysParams::default()
        },
        scheme: desk_scheme(2e-3),
        t_final: 1.5,
        seed: 0,
        initial_phase: InitialPhase::Function(Arc::new(move |x| {
            -0.9 * (cross_signed_distance(x, 0.1, 0.3) / (SQRT_2 * eps)).tanh()
        })),
        initial_velocity: Some(Arc::new(rotational_velocity)),
        velocity_bc: [VelocityBc::Prescribed; 4],
        boundary_velocity: Some(Arc::new(|x, _| rotational_velocity(x))),
        exact: None,
        snapshot_times: vec![0.2, 0.5, 1.0, 1.5],
    }
}

/// Regularized lid profile `16 x^2 (x-1)^2`.
pub fn lid_profile(x: f64) -> f64 {
    16.0 * x * x * (x - 1.0) * (x - 1.0)
}

/// Stratified two-layer fluid in a lid-driven cavity.
pub fn scenario_lid_driven() -> ScenarioSpec {
    let eps = 0.01;
    let top = Bounds::UNIT_SQUARE.y_max;
    ScenarioSpec {
        kind: ScenarioKind::LidDriven,
        bounds: Bounds::UNIT_SQUARE,
        nx: 64,
        ny: 64,
        degree: 2,
        params: PhysParams {
            epsilon: eps,
            peclet: 100.0,
            reynolds: 500.0,
            weber: Some(5e5),
            mobility: Mobility::Constant(0.5),
            ..PhysParams::default()
        },
        scheme: desk_scheme(2e-3),
        t_final: 2.0,
        seed: 0,
        initial_phase: InitialPhase::Function(Arc::new(move |x| {
            -0.9 * ((x[1] - 0.5) / (SQRT_2 * eps)).tanh()
        })),
        initial_velocity: None,
        velocity_bc: [
            VelocityBc::NoSlip,
            VelocityBc::NoSlip,
            VelocityBc::NoSlip,
            VelocityBc::Prescribed,
        ],
        boundary_velocity: Some(Arc::new(move |x, _| {
            if (x[1] - top).abs() < 1e-12 {
                [lid_profile(x[0]), 0.0]
            } else {
                [0.0, 0.0]
            }
        })),
        exact: None,
        snapshot_times: vec![0.5, 1.0, 1.5, 2.0],
    }
}

/// Heavy fluid above light fluid with Boussinesq buoyancy, no surface tension.
pub fn scenario_rayleigh_taylor(viscosity: f64) -> ScenarioSpec {
    let eps = 0.01;
    ScenarioSpec {
        kind: ScenarioKind::RayleighTaylor,
        bounds: Bounds::new(0.0, 1.0, 0.0, 4.0),
        nx: 32,
        ny: 128,
        degree: 2,
        params: PhysParams {
            epsilon: eps,
            peclet: 10.0,
            reynolds: 1.0,
            weber: None,
            mobility: Mobility::Constant(0.1),
            viscosity_scale: viscosity,
            buoyancy: Some(Buoyancy {
                rho1: 3.0,
                rho2: 1.0,
                g: 10.0,
            }),
            ..PhysParams::default()
        },
        scheme: desk_scheme(1.25e-3),
        t_final: 1.0,
        seed: 0,
        initial_phase: InitialPhase::Function(Arc::new(move |x| {
            let mid = 2.0 + 0.1 * (2.0 * std::f64::consts::PI * x[0]).cos();
            0.9 * ((x[1] - mid) / (SQRT_2 * eps)).tanh()
        })),
        initial_velocity: None,
        velocity_bc: [
            VelocityBc::FreeSlip,
            VelocityBc::FreeSlip,
            VelocityBc::NoSlip,
            VelocityBc::NoSlip,
        ],
        boundary_velocity: None,
        exact: None,
        snapshot_times: vec![0.3, 0.6, 0.9],
    }
}

/// `L^2` errors at the final time of a manufactured run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsErrors {
    pub h: f64,
    pub dt: f64,
    pub u: f64,
    pub p: f64,
    pub phi: f64,
    pub steps: usize,
}

/// Runs a manufactured-solution spec to `t_final` and measures the errors.
pub fn run_mms(spec: &ScenarioSpec) -> Result<MmsErrors> {
    let exact = spec
        .exact
        .clone()
        .ok_or_else(|| Error::Config("spec has no exact solution".into()))?;
    let (mut stepper, state) = spec.build()?;
    let steps = spec.n_steps();
    let (end, _) = stepper.advance(state, steps, |_, _| Ok(()))?;
    let t = end.t;
    let ops = stepper.ops();
    let u = crate::diagnostics::vector_l2_error(&ops.phase, &end.u, |x| exact.u(x, t))?;
    let (phi, _) = crate::diagnostics::error_norms(&ops.phase, &end.phi, |x| exact.phi(x, t), |x| exact.grad_phi(x, t))?;
    let mut ph = end.p.clone();
    ops.pressure.remove_mean(&mut ph);
    let (p, _) = crate::diagnostics::error_norms(&ops.pressure.scalar, &ph, |x| exact.p(x, t), |x| exact.grad_p(x, t))?;
    Ok(MmsErrors {
        h: (spec.bounds.x_max - spec.bounds.x_min) / spec.nx as f64,
        dt: spec.scheme.dt,
        u,
        p,
        phi,
        steps,
    })
}
