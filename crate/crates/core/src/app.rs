//! Run configuration, output writers and convergence tables.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{error_norms, l2_distance, StepDiagnostics};
use crate::error::{Error, Result};
use crate::femspace::OperatorSet;
use crate::potential::{Buoyancy, Mobility};
use crate::scenarios::{run_mms, scenario_mms, MmsErrors, ScenarioKind, ScenarioSpec};
use crate::scheme::{ChnsState, JacobianMode, NewtonConfig};

/// Snapshot file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    #[default]
    Vtk,
    Csv,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Vtk => "vtk",
            SnapshotFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for SnapshotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vtk" | "vtk-legacy" => Ok(SnapshotFormat::Vtk),
            "csv" => Ok(SnapshotFormat::Csv),
            _ => Err(Error::Config(format!("unknown snapshot format `{s}`"))),
        }
    }
}

/// Optional replacements of the scenario's physical parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub epsilon: Option<f64>,
    pub peclet: Option<f64>,
    pub reynolds: Option<f64>,
    pub weber: Option<f64>,
    /// `false` removes the surface-tension coupling.
    pub surface_tension: Option<bool>,
    pub theta_c: Option<f64>,
    /// Constant mobility `M`.
    pub mobility: Option<f64>,
    pub viscosity_ratio: Option<f64>,
    pub viscosity_scale: Option<f64>,
    pub buoyancy: Option<Buoyancy>,
}

/// Output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every `m` steps; 0 writes only the first and last state.
    pub snapshot_every: usize,
    pub format: SnapshotFormat,
    /// Extra snapshot times; `None` uses the scenario's list.
    pub snapshot_times: Option<Vec<f64>>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshot_every: 0,
            format: SnapshotFormat::Vtk,
            snapshot_times: None,
        }
    }
}

/// Solver overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOverrides {
    pub jacobian: Option<JacobianMode>,
    pub newton: Option<NewtonConfig>,
    pub regularization: Option<f64>,
}

/// A run: scenario plus overrides. Missing values fall back to the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub degree: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub seed: Option<u64>,
    pub params: ParamOverrides,
    pub solver: SolverOverrides,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Spinodal,
            nx: None,
            ny: None,
            degree: None,
            dt: None,
            t_final: None,
            seed: None,
            params: ParamOverrides::default(),
            solver: SolverOverrides::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliOverrides {
    pub scenario: Option<ScenarioKind>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub degree: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub format: Option<SnapshotFormat>,
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{` (as in `run.json`).
    pub fn from_str_any(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| Error::Config(e.to_string()))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            serde_json::from_value(cfg).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_str_any(&text)
    }

    pub fn apply(&mut self, cli: &CliOverrides) {
        if let Some(s) = cli.scenario {
            self.scenario = s;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if cli.$f.is_some() { self.$f = cli.$f; } )* };
        }
        take!(nx, ny, degree, dt, t_final, seed);
        if let Some(o) = &cli.out {
            self.output.dir = o.clone();
        }
        if let Some(m) = cli.snapshot_every {
            self.output.snapshot_every = m;
        }
        if let Some(f) = cli.format {
            self.output.format = f;
        }
    }

    /// Scenario with every override applied and validated.
    pub fn spec(&self) -> Result<ScenarioSpec> {
        let mut s = self.scenario.default_spec();
        if self.scenario == ScenarioKind::Mms {
            let n = self.nx.unwrap_or(s.nx);
            s = scenario_mms(self.degree.unwrap_or(s.degree), n, self.dt.unwrap_or((1.0 / n as f64).powf(1.5)));
        }
        if let Some(v) = self.nx {
            s.nx = v;
        }
        match (self.ny, self.nx) {
            (Some(v), _) => s.ny = v,
            (None, Some(nx)) => {
                let b = s.bounds;
                s.ny = ((b.y_max - b.y_min) / (b.x_max - b.x_min) * nx as f64).round().max(1.0) as usize;
            }
            _ => {}
        }
        if let Some(v) = self.degree {
            s.degree = v;
        }
        if let Some(v) = self.dt {
            s.scheme.dt = v;
        }
        if let Some(v) = self.t_final {
            s.t_final = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        let p = &self.params;
        let prm = &mut s.params;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = p.$f { prm.$f = v; } )* };
        }
        set!(epsilon, peclet, reynolds, theta_c, viscosity_ratio, viscosity_scale);
        if let Some(w) = p.weber {
            prm.weber = Some(w);
        }
        if p.surface_tension == Some(false) {
            prm.weber = None;
        }
        if let Some(m) = p.mobility {
            prm.mobility = Mobility::Constant(m);
        }
        if p.buoyancy.is_some() {
            prm.buoyancy = p.buoyancy;
        }
        if let Some(j) = self.solver.jacobian {
            s.scheme.jacobian = j;
        }
        if let Some(n) = self.solver.newton {
            s.scheme.newton = n;
        }
        if self.solver.regularization.is_some() {
            s.scheme.regularization = self.solver.regularization;
        }
        if let Some(t) = &self.output.snapshot_times {
            s.snapshot_times = t.clone();
        }
        if s.nx == 0 || s.ny == 0 {
            return Err(Error::Config("nx and ny must be positive".into()));
        }
        s.validate()?;
        Ok(s)
    }

    /// Config with every value made explicit, enough to repeat the run.
    pub fn resolved(&self) -> Result<RunConfig> {
        let s = self.spec()?;
        let prm = &s.params;
        let mobility = match prm.mobility {
            Mobility::Constant(m) => Some(m),
            Mobility::Custom { .. } => None,
        };
        Ok(RunConfig {
            scenario: self.scenario,
            nx: Some(s.nx),
            ny: Some(s.ny),
            degree: Some(s.degree),
            dt: Some(s.scheme.dt),
            t_final: Some(s.t_final),
            seed: Some(s.seed),
            params: ParamOverrides {
                epsilon: Some(prm.epsilon),
                peclet: Some(prm.peclet),
                reynolds: Some(prm.reynolds),
                weber: prm.weber,
                surface_tension: Some(prm.weber.is_some()),
                theta_c: Some(prm.theta_c),
                mobility,
                viscosity_ratio: Some(prm.viscosity_ratio),
                viscosity_scale: Some(prm.viscosity_scale),
                buoyancy: prm.buoyancy,
            },
            solver: SolverOverrides {
                jacobian: Some(s.scheme.jacobian),
                newton: Some(s.scheme.newton),
                regularization: s.scheme.regularization,
            },
            output: OutputConfig {
                snapshot_times: Some(s.snapshot_times.clone()),
                ..self.output.clone()
            },
        })
    }
}

/// Writes one snapshot of the nodal fields on the Gauss-Lobatto lattice.
pub fn write_snapshot(ops: &OperatorSet, state: &ChnsState, path: &Path, format: SnapshotFormat) -> Result<()> {
    ops.phase.check(&state.phi)?;
    ops.pressure.scalar.check(&state.p)?;
    let coords = ops.phase.node_coords();
    let p: Vec<f64> = coords.iter().map(|&x| ops.pressure.scalar.evaluate(&state.p, x)).collect();
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        SnapshotFormat::Csv => {
            writeln!(w, "x,y,phi,ux,uy,p")?;
            for (i, x) in coords.iter().enumerate() {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    x[0], x[1], state.phi[i], state.u.x[i], state.u.y[i], p[i]
                )?;
            }
        }
        SnapshotFormat::Vtk => {
            let m = ops.phase.mesh();
            let n = coords.len();
            writeln!(w, "# vtk DataFile Version 3.0")?;
            writeln!(w, "chns step {} t {:.16e}", state.step, state.t)?;
            writeln!(w, "ASCII")?;
            writeln!(w, "DATASET STRUCTURED_GRID")?;
            writeln!(w, "DIMENSIONS {} {} 1", m.nodes_x(), m.nodes_y())?;
            writeln!(w, "POINTS {n} double")?;
            for x in &coords {
                writeln!(w, "{:.16e} {:.16e} 0", x[0], x[1])?;
            }
            writeln!(w, "POINT_DATA {n}")?;
            for (name, data) in [("phi", &state.phi), ("p", &p)] {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in data.iter() {
                    writeln!(w, "{v:.16e}")?;
                }
            }
            writeln!(w, "VECTORS u double")?;
            for i in 0..n {
                writeln!(w, "{:.16e} {:.16e} 0", state.u.x[i], state.u.y[i])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `[x, y, phi, ux, uy, p]` of a CSV snapshot.
pub fn read_csv_snapshot(path: &Path) -> Result<Vec<[f64; 6]>> {
    let r = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "x,y,phi,ux,uy,p" {
                return Err(Error::Config(format!("unexpected snapshot header `{line}`")));
            }
            continue;
        }
        let mut row = [0.0; 6];
        let mut k = 0;
        for f in line.split(',') {
            if k == 6 {
                return Err(Error::Config(format!("too many columns on line {}", i + 1)));
            }
            row[k] = f.trim().parse().map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            k += 1;
        }
        if k != 6 {
            return Err(Error::Config(format!("too few columns on line {}", i + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub const DIAGNOSTICS_HEADER: &str = "t,energy,mass,phi_min,phi_max,newton_iters,linsolve_resid";

/// Run metadata written to `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub program: String,
    pub version: String,
    pub scenario: ScenarioKind,
    pub rng: String,
    pub seed: u64,
    pub n_steps: usize,
    pub status: String,
    pub steps_completed: usize,
    pub failed_step: Option<usize>,
    pub error: Option<String>,
    pub energy_note: String,
    pub snapshots: Vec<String>,
    pub config: RunConfig,
}

/// Outcome of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub final_state: ChnsState,
    pub diagnostics: Vec<StepDiagnostics>,
    pub metadata: RunMetadata,
}

fn failed_step(e: &Error) -> Option<usize> {
    match e {
        Error::Step { step, .. } | Error::BoundViolation { step, .. } => Some(*step),
        _ => None,
    }
}

fn write_json(path: &Path, meta: &RunMetadata) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn diag_line(d: &StepDiagnostics) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{:e},{},{:e}",
        d.t, d.energy, d.mass, d.phi_min, d.phi_max, d.newton_iters, d.linsolve_resid
    )
}

/// Runs a configured scenario and writes diagnostics, snapshots and metadata.
/// Configuration errors are reported before anything is written.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let resolved = config.resolved()?;
    let spec = resolved.spec()?;
    let (mut stepper, state) = spec.build()?;
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let n_steps = spec.n_steps();
    let energy_note = if spec.params.weber.is_some() {
        "modified energy with phase part scaled by 1/(eps We*)".to_string()
    } else {
        "surface tension off: phase part of the energy carries unit weight".to_string()
    };
    let mut meta = RunMetadata {
        program: "chns".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: spec.kind,
        rng: "ChaCha8Rng::seed_from_u64".into(),
        seed: spec.seed,
        n_steps,
        status: "running".into(),
        steps_completed: 0,
        failed_step: None,
        error: None,
        energy_note,
        snapshots: Vec::new(),
        config: resolved,
    };
    let meta_path = dir.join("run.json");
    write_json(&meta_path, &meta)?;

    let fmt = config.output.format;
    let every = config.output.snapshot_every;
    let mut pending_times: Vec<f64> = spec.snapshot_times.iter().copied().filter(|&t| t <= spec.t_final + 1e-12).collect();
    pending_times.sort_by(f64::total_cmp);
    let half_dt = 0.5 * spec.scheme.dt;
    let mut snapshots = Vec::new();
    let snap = |ops: &OperatorSet, s: &ChnsState, snapshots: &mut Vec<String>| -> Result<()> {
        let name = format!("snapshot_{:06}.{}", s.step, fmt.extension());
        if snapshots.last() != Some(&name) {
            write_snapshot(ops, s, &dir.join(&name), fmt)?;
            snapshots.push(name);
        }
        Ok(())
    };
    snap(stepper.ops(), &state, &mut snapshots)?;

    let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
    writeln!(csv, "{DIAGNOSTICS_HEADER}")?;
    csv.flush()?;
    let d0 = crate::diagnostics::step_diagnostics(&stepper, &state, &Default::default())?;
    writeln!(csv, "{}", diag_line(&d0))?;
    csv.flush()?;

    let mut diags = vec![d0];
    let mut s = state;
    let mut failure = None;
    for _ in 0..n_steps {
        let outcome = stepper.step(&s).and_then(|(next, rep)| {
            let d = crate::diagnostics::step_diagnostics(&stepper, &next, &rep)?;
            Ok((next, d))
        });
        let (next, d) = match outcome {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        writeln!(csv, "{}", diag_line(&d))?;
        csv.flush()?;
        let due_time = pending_times.first().is_some_and(|&t| next.t >= t - half_dt);
        while pending_times.first().is_some_and(|&t| next.t >= t - half_dt) {
            pending_times.remove(0);
        }
        let due_step = every > 0 && next.step % every == 0;
        if due_time || due_step || next.step == n_steps {
            snap(stepper.ops(), &next, &mut snapshots)?;
        }
        diags.push(d);
        s = next;
    }
    meta.snapshots = snapshots;
    match failure {
        None => {
            meta.status = "completed".into();
            meta.steps_completed = n_steps;
            write_json(&meta_path, &meta)?;
            Ok(RunSummary {
                dir,
                final_state: s,
                diagnostics: diags,
                metadata: meta,
            })
        }
        Some(e) => {
            meta.status = "failed".into();
            meta.failed_step = Some(failed_step(&e).unwrap_or(s.step + 1));
            meta.steps_completed = s.step;
            meta.error = Some(e.to_string());
            write_json(&meta_path, &meta)?;
            Err(e)
        }
    }
}

/// Reads `diagnostics.csv` back into rows of numbers.
pub fn read_diagnostics(path: &Path) -> Result<Vec<[f64; 7]>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != DIAGNOSTICS_HEADER {
                return Err(Error::Config(format!("unexpected diagnostics header `{line}`")));
            }
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| Error::Config(format!("line {}: {e}", i + 1))))
            .collect::<Result<_>>()?;
        let row: [f64; 7] = v
            .try_into()
            .map_err(|_| Error::Config(format!("line {} does not have 7 columns", i + 1)))?;
        out.push(row);
    }
    Ok(out)
}

/// `log(e_coarse / e_fine) / log(h_coarse / h_fine)`; `log2` of the error ratio for halved steps.
pub fn convergence_rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// One line of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `1/h` or `1/dt`.
    pub inverse: f64,
    pub e_u: f64,
    pub e_p: f64,
    pub e_phi: f64,
    pub rate_u: Option<f64>,
    pub rate_p: Option<f64>,
    pub rate_phi: Option<f64>,
}

/// Errors and successive rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub label: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Builds rows from `(1/h, e_u, e_p, e_phi)`; the first row has no rates.
    pub fn new(label: &str, entries: &[(f64, f64, f64, f64)]) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(entries.len());
        for (i, &(inv, u, p, phi)) in entries.iter().enumerate() {
            let rate = |sel: fn(&(f64, f64, f64, f64)) -> f64| {
                (i > 0).then(|| {
                    let prev = &entries[i - 1];
                    convergence_rate(sel(prev), sel(&entries[i]), 1.0 / prev.0, 1.0 / inv)
                })
            };
            rows.push(ConvergenceRow {
                inverse: inv,
                e_u: u,
                e_p: p,
                e_phi: phi,
                rate_u: rate(|e| e.1),
                rate_p: rate(|e| e.2),
                rate_phi: rate(|e| e.3),
            });
        }
        Self {
            label: label.into(),
            rows,
        }
    }

    pub fn rates_u(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_u).collect()
    }

    pub fn rates_p(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_p).collect()
    }

    pub fn rates_phi(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_phi).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},e_u,rate_u,e_p,rate_p,e_phi,rate_phi\n", self.label);
        let o = |r: Option<f64>| r.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                r.inverse,
                r.e_u,
                o(r.rate_u),
                r.e_p,
                o(r.rate_p),
                r.e_phi,
                o(r.rate_phi)
            );
        }
        s
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6}  {:>11}  {:>5}  {:>11}  {:>5}  {:>11}  {:>5}",
            self.label, "||e_u||", "order", "||e_p||", "order", "||e_phi||", "order"
        )?;
        let o = |r: Option<f64>| r.map_or_else(|| "--".to_string(), |v| format!("{v:.2}"));
        for r in &self.rows {
            writeln!(
                f,
                "{:>6}  {:>11.4E}  {:>5}  {:>11.4E}  {:>5}  {:>11.4E}  {:>5}",
                r.inverse,
                r.e_u,
                o(r.rate_u),
                r.e_p,
                o(r.rate_p),
                r.e_phi,
                o(r.rate_phi)
            )?;
        }
        Ok(())
    }
}

/// Spatial table from measured manufactured-solution errors.
pub fn convergence_table(errors: &[MmsErrors]) -> ConvergenceTable {
    let entries: Vec<_> = errors.iter().map(|e| (1.0 / e.h, e.u, e.p, e.phi)).collect();
    ConvergenceTable::new("1/h", &entries)
}

/// Runs a spatial ladder; each rung is an independent run.
pub fn spatial_study(specs: &[ScenarioSpec]) -> Result<ConvergenceTable> {
    let errors = specs.iter().map(run_mms).collect::<Result<Vec<_>>>()?;
    Ok(convergence_table(&errors))
}

/// Cauchy differences `||v^{dt} - v^{dt/2}||` at `T = 1` on a fixed `n x n` mesh.
/// Row `i` compares `1/dt = inverse_dts[i-1]` with `inverse_dts[i]`.
pub fn temporal_study(degree: usize, n: usize, inverse_dts: &[usize]) -> Result<ConvergenceTable> {
    let mut finals = Vec::with_capacity(inverse_dts.len());
    let mut ops_keep = None;
    for &m in inverse_dts {
        let spec = scenario_mms(degree, n, 1.0 / m as f64);
        let (mut stepper, s0) = spec.build()?;
        let (end, _) = stepper.advance(s0, spec.n_steps(), |_, _| Ok(()))?;
        finals.push(end);
        ops_keep = Some(stepper);
    }
    let Some(stepper) = ops_keep else {
        return Ok(ConvergenceTable::new("1/dt", &[]));
    };
    let ops = stepper.ops();
    let mut entries = Vec::new();
    for i in 1..finals.len() {
        let (a, b) = (&finals[i - 1], &finals[i]);
        let du = ops.l2_sq_vec(&a.u.combine(1.0, &b.u, -1.0)).max(0.0).sqrt();
        let mut dp: Vec<f64> = a.p.iter().zip(&b.p).map(|(x, y)| x - y).collect();
        ops.pressure.remove_mean(&mut dp);
        let (ep, _) = error_norms(&ops.pressure.scalar, &dp, |_| 0.0, |_| [0.0, 0.0])?;
        let dphi = l2_distance(ops, &a.phi, &b.phi);
        entries.push((inverse_dts[i - 1] as f64, du, ep, dphi));
    }
    Ok(ConvergenceTable::new("1/dt", &entries))
}

/// Checks a config without running it; returns a one-line summary.
pub fn validate(config: &RunConfig) -> Result<String> {
    let s = config.spec()?;
    Ok(format!(
        "{}: {}x{} Q{} dt={} t_final={} steps={} seed={}",
        s.kind,
        s.nx,
        s.ny,
        s.degree,
        s.scheme.dt,
        s.t_final,
        s.n_steps(),
        s.seed
    ))
}
