//! Run configuration, experiment orchestration and serialization of fields
//! and reports.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::continuity::{
    c0_boundary_run, continue_homotopy, continuity_run, laplacian_max, lemma21_margins, sandwich_margin,
    ContinuityOptions,
};
use crate::error::{Error, Result};
use crate::fd::{
    hessian_spectra, hessian_stencils, inf_norm, phase_residual_with, ScalarField, StencilSet, DEFAULT_DIRECTIONS,
};
use crate::geometry::{
    build_grid, build_grid_masked, mollify_boundary, truncated_phase_bounds, BoundaryData, BoundsMode, DomainGrid,
    DomainKind, DomainSpec, Hole, NodeKind, Point, Smoothness,
};
use crate::perron::{perron_run, PerronOptions, PerronState};
use crate::phase::{classify_phase, critical_phase, phase_bound, PhaseClass, PhaseSamples, PhaseSpec, CLASSIFY_TOL};
use crate::report::{ErrorRecord, SolveReport};

/// Exact solution available for a preset problem.
pub type Oracle = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub h: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    #[default]
    Supercritical,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePreset {
    /// `π/2 + 0.05 + 0.3|x − x_c|²/R²`, `R` the larger semi-axis.
    VariableSupercritical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseSource {
    Constant { value: f64 },
    /// Radial table in `|x − x_c|`, linearly interpolated and clamped.
    Table { radii: Vec<f64>, values: Vec<f64> },
    Preset { name: PhasePreset },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseConfig {
    #[serde(flatten)]
    pub source: PhaseSource,
    #[serde(default)]
    pub mode: PhaseMode,
    #[serde(default)]
    pub eps_prime: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPreset {
    /// `½|x|²`.
    HalfNorm2,
    /// `½(a x² + y²/a)`.
    Diag,
    Zero,
    /// `x² − y²`.
    Saddle,
    /// `x³ − 3xy²`.
    Cubic,
    /// `cos t` in the boundary parameter.
    Cos,
    /// `|cos t|` in the boundary parameter.
    AbsCos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySource {
    Preset {
        name: BoundaryPreset,
        #[serde(default)]
        a: Option<f64>,
    },
    /// Values at boundary parameter angles, periodic linear interpolation.
    Table { angles: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryConfig {
    #[serde(flatten)]
    pub source: BoundarySource,
    #[serde(default)]
    pub mollify_radii: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ContinuityConfig {
    pub tol_res: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub anchors: usize,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        let o = ContinuityOptions::default();
        ContinuityConfig {
            tol_res: o.tol_res,
            step_tol: o.step_tol,
            max_iter: o.max_iter,
            anchors: o.anchors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PerronConfig {
    pub tol_gap: f64,
    pub max_sweeps: usize,
    pub directions: usize,
    pub anchors: usize,
    pub cert_tol: f64,
}

impl Default for PerronConfig {
    fn default() -> Self {
        let o = PerronOptions::default();
        PerronConfig {
            tol_gap: o.tol_gap,
            max_sweeps: o.max_sweeps,
            directions: DEFAULT_DIRECTIONS,
            anchors: o.anchors,
            cert_tol: o.cert_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverConfig {
    Continuity(ContinuityConfig),
    Perron(PerronConfig),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputConfig {
    pub field_path: Option<PathBuf>,
    /// Companion boundary CSV; defaults to the field path with a
    /// `.boundary.csv` suffix.
    pub boundary_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub study_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub grid: GridConfig,
    pub phase: PhaseConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    /// Structural checks that need no grid.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        positive("grid.h", self.grid.h)?;
        match &self.solver {
            SolverConfig::Continuity(c) => {
                positive("solver.tolRes", c.tol_res)?;
                positive("solver.stepTol", c.step_tol)?;
                if c.max_iter == 0 || c.anchors == 0 {
                    return Err(config_err("solver.maxIter and solver.anchors must be positive"));
                }
            }
            SolverConfig::Perron(p) => {
                positive("solver.tolGap", p.tol_gap)?;
                positive("solver.certTol", p.cert_tol)?;
                if p.max_sweeps == 0 || p.anchors == 0 {
                    return Err(config_err("solver.maxSweeps and solver.anchors must be positive"));
                }
                if p.directions < 4 {
                    return Err(config_err("solver.directions must be at least 4"));
                }
                if !matches!(self.phase.source, PhaseSource::Constant { .. }) {
                    return Err(config_err(
                        "perron solver requires phase.kind == constant: the comparison principle is only available for constant phase",
                    ));
                }
            }
        }
        match &self.phase.source {
            PhaseSource::Constant { value } if !value.is_finite() => {
                return Err(config_err("phase.value must be finite"));
            }
            PhaseSource::Table { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(config_err("phase table needs equally many radii and values"));
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) || radii.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(config_err("phase table radii must be increasing and all entries finite"));
                }
            }
            _ => {}
        }
        if let Some(e) = self.phase.eps_prime {
            positive("phase.epsPrime", e)?;
        }
        match &self.boundary.source {
            BoundarySource::Preset { name, a } => {
                if *name == BoundaryPreset::Diag {
                    positive("boundary.a", a.ok_or_else(|| config_err("diag preset needs boundary.a"))?)?;
                }
            }
            BoundarySource::Table { angles, values } => {
                if angles.len() < 2 || angles.len() != values.len() {
                    return Err(config_err("boundary table needs at least two angles with values"));
                }
                let ok = angles.windows(2).all(|w| w[1] > w[0])
                    && angles[0] >= 0.0
                    && *angles.last().unwrap() < TAU
                    && values.iter().all(|v| v.is_finite());
                if !ok {
                    return Err(config_err("boundary table angles must increase within [0, 2pi) with finite values"));
                }
            }
        }
        if let Some(r) = &self.boundary.mollify_radii {
            if r.is_empty() || r.iter().any(|x| !(x.is_finite() && *x > 0.0)) || r.windows(2).any(|w| w[1] >= w[0]) {
                return Err(config_err("boundary.mollifyRadii must be positive and strictly decreasing"));
            }
            if matches!(self.solver, SolverConfig::Perron(_)) {
                return Err(config_err("boundary.mollifyRadii is only supported by the continuity solver"));
            }
        }
        Ok(())
    }

    /// The same configuration at another grid spacing.
    pub fn with_h(&self, h: f64) -> RunConfig {
        RunConfig {
            grid: GridConfig { h },
            ..self.clone()
        }
    }
}

/// Grid, data and phase built from a configuration.
#[derive(Clone)]
pub struct Problem {
    pub grid: Arc<DomainGrid>,
    pub phi: BoundaryData,
    pub psi: PhaseSpec,
    pub oracle: Option<Oracle>,
}

fn boundary_data(spec: &DomainSpec, src: &BoundarySource) -> BoundaryData {
    match src {
        BoundarySource::Preset { name, a } => match name {
            BoundaryPreset::HalfNorm2 => BoundaryData::new(Smoothness::C4, |p| 0.5 * (p[0] * p[0] + p[1] * p[1])),
            BoundaryPreset::Diag => {
                let a = a.unwrap_or(1.0);
                BoundaryData::new(Smoothness::C4, move |p| 0.5 * (a * p[0] * p[0] + p[1] * p[1] / a))
            }
            BoundaryPreset::Zero => BoundaryData::constant(0.0),
            BoundaryPreset::Saddle => BoundaryData::new(Smoothness::C4, |p| p[0] * p[0] - p[1] * p[1]),
            BoundaryPreset::Cubic => BoundaryData::new(Smoothness::C4, |p| p[0].powi(3) - 3.0 * p[0] * p[1] * p[1]),
            BoundaryPreset::Cos => BoundaryData::from_angle(spec, Smoothness::C4, f64::cos),
            BoundaryPreset::AbsCos => BoundaryData::from_angle(spec, Smoothness::C0, |t| t.cos().abs()),
        },
        BoundarySource::Table { angles, values } => {
            let (angles, values) = (angles.clone(), values.clone());
            BoundaryData::from_angle(spec, Smoothness::C0, move |t| periodic_interp(&angles, &values, t))
        }
    }
}

fn periodic_interp(angles: &[f64], values: &[f64], t: f64) -> f64 {
    let t = t.rem_euclid(TAU);
    let n = angles.len();
    let k = angles.partition_point(|a| *a <= t);
    let (a0, v0, a1, v1) = if k == 0 {
        (angles[n - 1] - TAU, values[n - 1], angles[0], values[0])
    } else if k == n {
        (angles[n - 1], values[n - 1], angles[0] + TAU, values[0])
    } else {
        (angles[k - 1], values[k - 1], angles[k], values[k])
    };
    v0 + (v1 - v0) * (t - a0) / (a1 - a0)
}

fn radial_interp(radii: &[f64], values: &[f64], r: f64) -> f64 {
    let k = radii.partition_point(|x| *x <= r);
    if k == 0 {
        values[0]
    } else if k == radii.len() {
        values[k - 1]
    } else {
        let (r0, r1) = (radii[k - 1], radii[k]);
        values[k - 1] + (values[k] - values[k - 1]) * (r - r0) / (r1 - r0)
    }
}

fn phase_samples(cfg: &PhaseConfig, grid: &DomainGrid) -> PhaseSamples {
    let c = grid.spec.center;
    let radius = |p: Point| (p[0] - c[0]).hypot(p[1] - c[1]);
    match &cfg.source {
        PhaseSource::Constant { value } => PhaseSamples::Constant(*value),
        PhaseSource::Table { radii, values } => {
            PhaseSamples::Nodal(grid.nodes.iter().map(|n| radial_interp(radii, values, radius(n.x))).collect())
        }
        PhaseSource::Preset {
            name: PhasePreset::VariableSupercritical,
        } => {
            let big = grid.spec.semi_axes[0].max(grid.spec.semi_axes[1]);
            PhaseSamples::Nodal(
                grid.nodes
                    .iter()
                    .map(|n| FRAC_PI_2 + 0.05 + 0.3 * (radius(n.x) / big).powi(2))
                    .collect(),
            )
        }
    }
}

fn oracle_for(spec: &DomainSpec, src: &BoundarySource, psi: &PhaseSpec) -> Option<Oracle> {
    let (name, a) = match src {
        BoundarySource::Preset { name, a } => (*name, a.unwrap_or(1.0)),
        BoundarySource::Table { .. } => return None,
    };
    let c = match psi.samples {
        PhaseSamples::Constant(c) => c,
        PhaseSamples::Nodal(_) => return None,
    };
    let matches = |v: f64| (c - v).abs() <= 1e-12;
    let center = spec.center;
    match name {
        BoundaryPreset::HalfNorm2 if matches(FRAC_PI_2) => Some(Arc::new(|p: Point| 0.5 * (p[0] * p[0] + p[1] * p[1]))),
        BoundaryPreset::Diag if matches(FRAC_PI_2) => {
            Some(Arc::new(move |p: Point| 0.5 * (a * p[0] * p[0] + p[1] * p[1] / a)))
        }
        BoundaryPreset::Zero if matches(FRAC_PI_2) && spec.kind == DomainKind::Disk => {
            let r2 = spec.semi_axes[0].powi(2);
            Some(Arc::new(move |p: Point| {
                0.5 * ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) - r2)
            }))
        }
        BoundaryPreset::Saddle if matches(0.0) => Some(Arc::new(|p: Point| p[0] * p[0] - p[1] * p[1])),
        BoundaryPreset::Cubic if matches(0.0) => Some(Arc::new(|p: Point| p[0].powi(3) - 3.0 * p[0] * p[1] * p[1])),
        BoundaryPreset::Cos if matches(0.0) => {
            let [ra, _] = spec.semi_axes;
            Some(Arc::new(move |p: Point| (p[0] - center[0]) / ra))
        }
        _ => None,
    }
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> Result<Problem> {
        cfg.validate()?;
        let grid = Arc::new(build_grid(&cfg.domain, cfg.grid.h)?);
        let phi = boundary_data(&cfg.domain, &cfg.boundary.source);
        let mut psi = classify_phase(phase_samples(&cfg.phase, &grid), 2, CLASSIFY_TOL)?;
        if let Some(e) = cfg.phase.eps_prime {
            psi = psi.with_eps_prime(e).map_err(|e| config_err(e.to_string()))?;
        }
        let supercritical_needed =
            cfg.phase.mode == PhaseMode::Supercritical || matches!(cfg.solver, SolverConfig::Continuity(_));
        if supercritical_needed && psi.classification != PhaseClass::Supercritical {
            let (crit, bound) = (critical_phase(2), phase_bound(2));
            return Err(if psi.mirrored {
                Error::PhaseOutOfRange {
                    value: psi.max,
                    lower: -bound,
                    upper: -crit,
                }
            } else {
                Error::PhaseOutOfRange {
                    value: psi.min,
                    lower: crit,
                    upper: bound,
                }
            });
        }
        let oracle = oracle_for(&cfg.domain, &cfg.boundary.source, &psi);
        Ok(Problem { grid, phi, psi, oracle })
    }
}

/// Result of a solve: the field, its report and, for the Perron solver,
/// the two-branch state.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub field: ScalarField,
    pub report: SolveReport,
    pub perron: Option<PerronState>,
}

fn continuity_options(c: &ContinuityConfig) -> ContinuityOptions {
    ContinuityOptions {
        tol_res: c.tol_res,
        step_tol: c.step_tol,
        max_iter: c.max_iter,
        anchors: c.anchors,
        ..ContinuityOptions::default()
    }
}

/// Runs the configured solver on a built problem.
pub fn solve(cfg: &RunConfig, problem: &Problem) -> Result<SolveOutcome> {
    match &cfg.solver {
        SolverConfig::Continuity(c) => {
            let opts = continuity_options(c);
            let (field, report) = match &cfg.boundary.mollify_radii {
                Some(radii) => c0_boundary_run(&problem.grid, &problem.phi, &problem.psi, radii, &opts)?,
                None => continuity_run(&problem.grid, &problem.phi, &problem.psi, &opts)?,
            };
            Ok(SolveOutcome {
                field,
                report,
                perron: None,
            })
        }
        SolverConfig::Perron(p) => {
            let stencils = Arc::new(StencilSet::new(&problem.grid, p.directions)?);
            let opts = PerronOptions {
                tol_gap: p.tol_gap,
                max_sweeps: p.max_sweeps,
                anchors: p.anchors,
                cert_tol: p.cert_tol,
            };
            let (state, report) = perron_run(&problem.grid, &problem.phi, &problem.psi, &stencils, &opts)?;
            Ok(SolveOutcome {
                field: state.solution(),
                report,
                perron: Some(state),
            })
        }
    }
}

/// Exit code for an error: 1 for configuration and precondition problems,
/// 2 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::InvalidDomain(_)
        | Error::GridTooCoarse { .. }
        | Error::PhaseOutOfRange { .. }
        | Error::PreconditionViolated(_)
        | Error::InvalidMatrix(_)
        | Error::InvalidOrder { .. } => 1,
        _ => 2,
    }
}

fn tolerance_of(cfg: &RunConfig) -> f64 {
    match &cfg.solver {
        SolverConfig::Continuity(c) => c.tol_res,
        SolverConfig::Perron(p) => p.tol_gap,
    }
}

fn solver_name(cfg: &RunConfig) -> &'static str {
    match cfg.solver {
        SolverConfig::Continuity(_) => "continuity",
        SolverConfig::Perron(_) => "perron",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, s + "\n")?;
    Ok(())
}

/// Companion boundary CSV path for a field CSV.
pub fn boundary_path_for(outputs: &OutputConfig) -> Option<PathBuf> {
    outputs.boundary_path.clone().or_else(|| {
        outputs.field_path.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".boundary.csv");
            PathBuf::from(s)
        })
    })
}

/// Prints a machine-readable error line to stderr.
pub fn print_error(e: &Error) {
    let rec = ErrorRecord::from(e);
    eprintln!("{}", serde_json::json!({ "error": rec }));
}

/// Solves and writes the configured outputs; returns the process exit code.
pub fn run_solve(cfg: &RunConfig) -> i32 {
    let problem = match Problem::build(cfg) {
        Ok(p) => p,
        Err(e) => {
            print_error(&e);
            return exit_code(&e);
        }
    };
    match solve(cfg, &problem) {
        Ok(out) => {
            let written = (|| -> Result<()> {
                if let Some(p) = &cfg.outputs.field_path {
                    write_field_csv(p, &out.field)?;
                }
                if let Some(p) = boundary_path_for(&cfg.outputs) {
                    write_boundary_csv(&p, &out.field)?;
                }
                if let Some(p) = &cfg.outputs.report_path {
                    write_json(p, &out.report)?;
                }
                Ok(())
            })();
            if let Err(e) = written {
                print_error(&e);
                return exit_code(&e);
            }
            println!("{}", serde_json::to_string(&out.report).unwrap_or_default());
            if out.report.converged {
                0
            } else {
                2
            }
        }
        Err(e) => {
            let report = SolveReport::failed(solver_name(cfg), cfg.grid.h, tolerance_of(cfg), &e);
            if let Some(p) = &cfg.outputs.report_path {
                if let Err(w) = write_json(p, &report) {
                    print_error(&w);
                }
            }
            print_error(&e);
            exit_code(&e)
        }
    }
}

fn nodes_in_output_order(grid: &DomainGrid) -> impl Iterator<Item = usize> + '_ {
    let of = move |kind: NodeKind| (0..grid.len()).filter(move |&k| grid.nodes[k].kind == kind);
    of(NodeKind::Interior).chain(of(NodeKind::NearBoundary))
}

/// Field CSV `x,y,u`: interior nodes, then near-boundary nodes, each in
/// row-major lattice order, with 17 significant digits.
pub fn field_csv(u: &ScalarField) -> String {
    let mut s = String::from("x,y,u\n");
    for k in nodes_in_output_order(&u.grid) {
        let x = u.grid.nodes[k].x;
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", x[0], x[1], u.values[k]);
    }
    s
}

pub fn write_field_csv(path: &Path, u: &ScalarField) -> Result<()> {
    fs::write(path, field_csv(u))?;
    Ok(())
}

/// Boundary CSV `x,y,phi` at the axis boundary intercepts.
pub fn write_boundary_csv(path: &Path, u: &ScalarField) -> Result<()> {
    let mut s = String::from("x,y,phi\n");
    for (hit, v) in u.grid.hits.iter().zip(&u.boundary_values) {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", hit.point[0], hit.point[1], v);
    }
    fs::write(path, s)?;
    Ok(())
}

/// Parses a three-column CSV with the given header.
pub fn parse_csv3(text: &str, header: &str) -> Result<Vec<[f64; 3]>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(config_err(format!("expected CSV header `{header}`")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 3 {
                return Err(config_err(format!("CSV row {} has {} columns", i + 1, cols.len())));
            }
            let mut row = [0.0; 3];
            for (r, c) in row.iter_mut().zip(&cols) {
                *r = c
                    .trim()
                    .parse()
                    .map_err(|_| config_err(format!("CSV row {}: bad number `{c}`", i + 1)))?;
            }
            Ok(row)
        })
        .collect()
}

/// Reads a field CSV back onto `grid`, matching rows to nodes by lattice
/// coordinates.
pub fn read_field_csv(path: &Path, grid: &Arc<DomainGrid>, boundary: BoundaryData) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let rows = parse_csv3(&text, "x,y,u")?;
    if rows.len() != grid.len() {
        return Err(config_err(format!(
            "field has {} rows but the grid has {} nodes",
            rows.len(),
            grid.len()
        )));
    }
    let mut values = vec![f64::NAN; grid.len()];
    let (c, h) = (grid.spec.center, grid.h);
    for [x, y, u] in rows {
        let i = ((x - c[0]) / h).round() as i64;
        let j = ((y - c[1]) / h).round() as i64;
        let k = grid
            .node_at(i, j)
            .ok_or_else(|| config_err(format!("field row ({x}, {y}) is not a grid node")))?;
        values[k] = u;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(config_err("field CSV does not cover every node"));
    }
    Ok(ScalarField::new(grid, values, boundary))
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(levels: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .zip(errors)
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Errors at or below this level are treated as the solver-tolerance floor.
pub const STUDY_FLOOR: f64 = 1e-8;

/// Fitted convergence order, or the marker that all errors sit at the
/// solver-tolerance floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FittedOrder {
    Order(f64),
    Floor,
    Unavailable,
}

impl Serialize for FittedOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FittedOrder::Order(v) => s.serialize_f64(*v),
            FittedOrder::Floor => s.serialize_str("floor"),
            FittedOrder::Unavailable => s.serialize_none(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StudyFailure {
    pub h: f64,
    pub error: ErrorRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergenceStudy {
    /// `oracle` or `self` (errors against the finest level).
    pub mode: String,
    pub levels: Vec<f64>,
    pub errors: Vec<Option<f64>>,
    pub fitted_order: FittedOrder,
    pub monotone_decrease: bool,
    pub delta: f64,
    pub failures: Vec<StudyFailure>,
}

/// Solves at each level and measures sup-norm errors against the preset's
/// exact solution, or against the finest level when none is known.
pub fn run_study(cfg: &RunConfig, levels: &[f64]) -> Result<ConvergenceStudy> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] >= w[0]) || levels.iter().any(|h| !(*h > 0.0)) {
        return Err(config_err("levels must be positive and strictly decreasing"));
    }
    let mut problems = Vec::new();
    for &h in levels {
        problems.push(Problem::build(&cfg.with_h(h))?);
    }
    let oracle = problems[0].oracle.clone();
    let finest = *levels.last().unwrap();
    if oracle.is_none() {
        for &h in levels {
            let r = h / finest;
            if (r - r.round()).abs() > 1e-9 {
                return Err(config_err("self-convergence needs levels that are integer multiples of the finest"));
            }
        }
    }
    let mut fields = Vec::new();
    let mut failures = Vec::new();
    for (p, &h) in problems.iter().zip(levels) {
        match solve(&cfg.with_h(h), p) {
            Ok(out) => fields.push(Some(out.field)),
            Err(e) => {
                failures.push(StudyFailure { h, error: (&e).into() });
                fields.push(None);
            }
        }
    }
    let errors: Vec<Option<f64>> = match &oracle {
        Some(f) => fields
            .iter()
            .map(|u| {
                u.as_ref().map(|u| {
                    u.grid
                        .nodes
                        .iter()
                        .zip(&u.values)
                        .map(|(n, v)| (v - f(n.x)).abs())
                        .fold(0.0, f64::max)
                })
            })
            .collect(),
        None => {
            let fine = fields.last().cloned().flatten();
            fields
                .iter()
                .zip(levels)
                .enumerate()
                .map(|(k, (u, &h))| {
                    if k + 1 == levels.len() {
                        return None;
                    }
                    let (u, fine) = (u.as_ref()?, fine.as_ref()?);
                    let r = (h / finest).round() as i64;
                    let mut e: f64 = 0.0;
                    for (n, v) in u.grid.nodes.iter().zip(&u.values) {
                        if let Some(j) = fine.grid.node_at(n.lattice[0] * r, n.lattice[1] * r) {
                            e = e.max((v - fine.values[j]).abs());
                        }
                    }
                    Some(e)
                })
                .collect()
        }
    };
    let measured: Vec<(f64, f64)> = levels
        .iter()
        .zip(&errors)
        .filter_map(|(h, e)| e.map(|e| (*h, e)))
        .collect();
    let fitted = if !measured.is_empty() && measured.iter().all(|(_, e)| *e <= STUDY_FLOOR) {
        FittedOrder::Floor
    } else {
        let (hs, es): (Vec<f64>, Vec<f64>) = measured.iter().copied().unzip();
        fitted_order(&hs, &es).map_or(FittedOrder::Unavailable, FittedOrder::Order)
    };
    let monotone_decrease = measured.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(ConvergenceStudy {
        mode: if oracle.is_some() { "oracle" } else { "self" }.into(),
        levels: levels.to_vec(),
        errors,
        fitted_order: fitted,
        monotone_decrease,
        delta: problems[0].psi.delta,
        failures,
    })
}

/// Study command: writes the study JSON and returns the exit code.
pub fn run_study_command(cfg: &RunConfig, levels: &[f64]) -> i32 {
    match run_study(cfg, levels) {
        Ok(study) => {
            if let Some(p) = &cfg.outputs.study_path {
                if let Err(e) = write_json(p, &study) {
                    print_error(&e);
                    return exit_code(&e);
                }
            }
            println!("{}", serde_json::to_string(&study).unwrap_or_default());
            if study.failures.is_empty() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            print_error(&e);
            exit_code(&e)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold: Some(threshold),
            pass: value <= threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold: Some(threshold),
            pass: value >= threshold,
        }
    }

    fn info(name: &str, value: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold: None,
            pass: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub solver: String,
    pub h: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Runs the invariant checks against the stored field of a configuration.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let problem = Problem::build(cfg)?;
    let field_path = cfg
        .outputs
        .field_path
        .as_ref()
        .ok_or_else(|| config_err("verify needs outputs.fieldPath"))?;
    let phi = match &cfg.boundary.mollify_radii {
        Some(r) => mollify_boundary(&problem.phi, &cfg.domain, *r.last().unwrap())?,
        None => problem.phi.clone(),
    };
    let u = read_field_csv(field_path, &problem.grid, phi.clone())?;
    let h = problem.grid.h;
    let psi = &problem.psi;
    let mut checks = Vec::new();

    if let Some(p) = boundary_path_for(&cfg.outputs).filter(|p| p.exists()) {
        let text = fs::read_to_string(&p)?;
        let rows = parse_csv3(&text, "x,y,phi")?;
        let mismatch = rows
            .iter()
            .map(|[x, y, v]| (phi.eval([*x, *y]) - v).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("boundaryDataMismatch", mismatch, 1e-12));
    }

    let (pos, psi_pos) = if psi.mirrored {
        (u.negated(), psi.negated())
    } else {
        (u.clone(), psi.clone())
    };
    match &cfg.solver {
        SolverConfig::Continuity(c) => {
            let res = inf_norm(&phase_residual_with(&u, &psi.samples, &hessian_stencils(&problem.grid)));
            checks.push(Check::at_most("phaseResidual", res, c.tol_res));
            let bounds = truncated_phase_bounds(&psi_pos, BoundsMode::Supercritical);
            checks.push(Check::at_least("sandwichMargin", sandwich_margin(&pos, bounds, c.anchors)?, -5.0 * h * h));
        }
        SolverConfig::Perron(p) => {
            let st = StencilSet::new(&problem.grid, p.directions)?;
            let c = psi.samples.at(0);
            let cut = st.cutoff_values(&u.boundary);
            let res = (0..u.values.len())
                .map(|k| (st.phase_value(&u.values, &cut, k) - c).abs())
                .fold(0.0, f64::max);
            checks.push(Check::info("widePhaseResidual", res));
            let bounds = truncated_phase_bounds(psi, BoundsMode::General);
            checks.push(Check::at_least("sandwichMargin", sandwich_margin(&u, bounds, p.anchors)?, -5.0 * h * h));
        }
    }
    if psi_pos.classification != PhaseClass::Subcritical {
        if let Some(m) = lemma21_margins(&pos, &psi_pos.samples, psi_pos.delta) {
            checks.push(Check::at_least("lemma21Ordering", m.ordering, -10.0 * h * h));
            checks.push(Check::at_least("lemma21Trace", m.trace, -10.0 * h * h));
            checks.push(Check::at_least("lemma21Sigma", m.sigma, -10.0 * h * h));
            if let Some(s) = m.semiconvex {
                checks.push(Check::at_least("lemma21Semiconvex", s, -10.0 * h * h));
            }
        }
    }
    let lap = laplacian_max(&pos);
    checks.push(Check::info("laplacianMaxInterior", lap.interior));
    checks.push(Check::info("laplacianMaxNearBoundary", lap.near_boundary));
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        solver: solver_name(cfg).into(),
        h,
        checks,
        pass,
    })
}

pub fn run_verify_command(cfg: &RunConfig) -> i32 {
    match run_verify(cfg) {
        Ok(rep) => {
            println!("{}", serde_json::to_string(&rep).unwrap_or_default());
            if rep.pass {
                0
            } else {
                2
            }
        }
        Err(e) => {
            print_error(&e);
            exit_code(&e)
        }
    }
}

/// Phase of the radial potential `|x|^{1+α}/(1+α)` from its Hessian
/// eigenvalues `α r^{α−1}` (radial) and `r^{α−1}` (tangential).
pub fn radial_derived_phase(alpha: f64, r: f64) -> f64 {
    (alpha * r.powf(alpha - 1.0)).atan() + r.powf(alpha - 1.0).atan()
}

/// The phase formula as quoted for the Hölder counterexample.
pub fn radial_quoted_phase(alpha: f64, r: f64) -> f64 {
    FRAC_PI_2 - (r.powf(1.0 - alpha) / alpha).atan()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseComparison {
    pub r: f64,
    pub quoted: f64,
    pub derived: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StressLevel {
    pub rho: f64,
    /// Max phase residual of the exact field over interior nodes.
    pub exact_residual_interior: f64,
    /// Same over near-boundary nodes (first-order arms).
    pub exact_residual_near_boundary: f64,
    /// `h² ρ^{α−3}`.
    pub predicted_scale: f64,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub solve_error: Option<f64>,
    pub max_hessian_eigenvalue: Option<f64>,
    /// Largest exact Hessian eigenvalue on the region, `α ρ^{α−1}` or `ρ^{α−1}`.
    pub exact_max_eigenvalue: f64,
    pub newton_iterations: Option<usize>,
    pub error: Option<ErrorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StressRadialReport {
    pub alpha: f64,
    pub rho: f64,
    pub h: f64,
    pub exact_residual: f64,
    pub exact_residual_near_boundary: f64,
    pub interior_nodes: usize,
    /// Quoted and derived phase differ; reported, not resolved.
    pub phase_discrepancy: bool,
    pub discrepancy_note: String,
    pub phase_comparison: Vec<PhaseComparison>,
    pub levels: Vec<StressLevel>,
}

fn stress_level(alpha: f64, rho: f64, h: f64, solve: bool) -> Result<StressLevel> {
    let spec = DomainSpec::unit_disk();
    let grid = Arc::new(build_grid_masked(
        &spec,
        h,
        Some(Hole {
            center: [0.0, 0.0],
            radius: rho,
        }),
    )?);
    let exact = move |p: Point| p[0].hypot(p[1]).powf(1.0 + alpha) / (1.0 + alpha);
    let phi = BoundaryData::new(Smoothness::C4, exact);
    let u = ScalarField::new(&grid, grid.nodes.iter().map(|n| exact(n.x)).collect(), phi.clone());
    let psi = PhaseSamples::Nodal(grid.nodes.iter().map(|n| radial_derived_phase(alpha, n.x[0].hypot(n.x[1]))).collect());
    let res = phase_residual_with(&u, &psi, &hessian_stencils(&grid));
    let mut interior: f64 = 0.0;
    let mut near: f64 = 0.0;
    for (n, r) in grid.nodes.iter().zip(&res) {
        match n.kind {
            NodeKind::Interior => interior = interior.max(r.abs()),
            NodeKind::NearBoundary => near = near.max(r.abs()),
        }
    }
    let mut level = StressLevel {
        rho,
        exact_residual_interior: interior,
        exact_residual_near_boundary: near,
        predicted_scale: h * h * rho.powf(alpha - 3.0),
        converged: false,
        final_residual: None,
        solve_error: None,
        max_hessian_eigenvalue: None,
        exact_max_eigenvalue: rho.powf(alpha - 1.0).max(alpha * rho.powf(alpha - 1.0)),
        newton_iterations: None,
        error: None,
    };
    if !solve {
        return Ok(level);
    }
    let spec_psi = classify_phase(psi.clone(), 2, CLASSIFY_TOL)?;
    let c0 = critical_phase(2) + spec_psi.delta;
    match continue_homotopy(&grid, &phi, &psi, c0, &ContinuityOptions::default()) {
        Ok(state) => {
            level.converged = true;
            level.final_residual = Some(state.residual_norm);
            level.solve_error = Some(state.u.max_abs_diff(&u));
            level.max_hessian_eigenvalue = Some(
                hessian_spectra(&state.u)
                    .iter()
                    .map(|(a, b)| a.abs().max(b.abs()))
                    .fold(0.0, f64::max),
            );
            level.newton_iterations = Some(state.newton_iters);
        }
        Err(e) => level.error = Some((&e).into()),
    }
    Ok(level)
}

/// Radial stress test for the Hölder-phase example: exact-field residual on
/// the annulus `r ≥ ρ`, solves on the masked problem for `ρ, ρ/2, ρ/4`, and
/// the quoted-versus-derived phase comparison.
pub fn run_stress_radial(alpha: f64, rho: f64, h: f64, solve: bool) -> Result<StressRadialReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(config_err(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(config_err(format!("rho = {rho} must lie in (0, 1)")));
    }
    positive("h", h)?;
    let mut levels = Vec::new();
    for k in 0..3 {
        let r = rho / f64::from(1u32 << k);
        if r < 4.0 * h {
            break;
        }
        levels.push(stress_level(alpha, r, h, solve)?);
    }
    let first = levels.first().cloned().ok_or_else(|| config_err("rho must be at least 4h"))?;
    let interior_nodes = {
        let grid = build_grid_masked(
            &DomainSpec::unit_disk(),
            h,
            Some(Hole {
                center: [0.0, 0.0],
                radius: rho,
            }),
        )?;
        grid.nodes.iter().filter(|n| n.kind == NodeKind::Interior).count()
    };
    let phase_comparison: Vec<PhaseComparison> = [rho, 0.5 * (rho + 1.0), 1.0]
        .iter()
        .map(|&r| {
            let quoted = radial_quoted_phase(alpha, r);
            let derived = radial_derived_phase(alpha, r);
            PhaseComparison {
                r,
                quoted,
                derived,
                difference: derived - quoted,
            }
        })
        .collect();
    let phase_discrepancy = phase_comparison.iter().any(|c| c.difference.abs() > 1e-12);
    Ok(StressRadialReport {
        alpha,
        rho,
        h,
        exact_residual: first.exact_residual_interior,
        exact_residual_near_boundary: first.exact_residual_near_boundary,
        interior_nodes,
        phase_discrepancy,
        discrepancy_note: "quoted phase pi/2 - arctan(r^(1-alpha)/alpha) differs from the phase \
                           arctan(alpha r^(alpha-1)) + arctan(r^(alpha-1)) of the radial potential; \
                           the derived phase is used"
            .into(),
        phase_comparison,
        levels,
    })
}

pub fn run_stress_command(alpha: f64, rho: f64, h: f64, output: Option<&Path>) -> i32 {
    match run_stress_radial(alpha, rho, h, true) {
        Ok(rep) => {
            if let Some(p) = output {
                if let Err(e) = write_json(p, &rep) {
                    print_error(&e);
                    return exit_code(&e);
                }
            }
            println!("{}", serde_json::to_string(&rep).unwrap_or_default());
            0
        }
        Err(e) => {
            print_error(&e);
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    const MA: &str = r#"{
        "domain": {"kind": "disk", "center": [0, 0], "semiAxes": [1, 1]},
        "grid": {"h": 0.125},
        "phase": {"kind": "constant", "value": 1.5707963267948966},
        "boundary": {"kind": "preset", "name": "half-norm2"},
        "solver": {"kind": "continuity"}
    }"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = RunConfig::from_json(MA).unwrap();
        assert_eq!(cfg.solver, SolverConfig::Continuity(ContinuityConfig::default()));
        assert_eq!(cfg.phase.mode, PhaseMode::Supercritical);
        let p = Problem::build(&cfg).unwrap();
        assert!(p.oracle.is_some());
    }

    #[test]
    fn rejects_perron_with_table_phase() {
        let s = MA
            .replace(r#""kind": "constant", "value": 1.5707963267948966"#, r#""kind": "table", "radii": [0, 1], "values": [1.6, 1.7]"#)
            .replace(r#""kind": "continuity""#, r#""kind": "perron""#);
        let err = RunConfig::from_json(&s).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("constant")));
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn rejects_subcritical_table_for_continuity() {
        let s = MA.replace(
            r#""kind": "constant", "value": 1.5707963267948966"#,
            r#""kind": "table", "radii": [0, 1], "values": [1.0, -0.2]"#,
        );
        let cfg = RunConfig::from_json(&s).unwrap();
        let err = Problem::build(&cfg).err().unwrap();
        assert!(matches!(err, Error::PhaseOutOfRange { .. }));
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn rejects_malformed_values() {
        for bad in [
            MA.replace("0.125", "-0.125"),
            MA.replace(r#""kind": "continuity""#, r#""kind": "continuity", "tolRes": 0"#),
            MA.replace("half-norm2", "no-such-preset"),
            MA.replace(r#""kind": "disk""#, r#""kind": "square""#),
            "{".to_string(),
        ] {
            let err = RunConfig::from_json(&bad).and_then(|c| Problem::build(&c).map(|_| ())).unwrap_err();
            assert_eq!(exit_code(&err), 1, "{bad}");
        }
    }

    #[test]
    fn interpolation_helpers() {
        let a = [0.0, FRAC_PI_2, PI];
        let v = [0.0, 1.0, 2.0];
        assert_eq!(periodic_interp(&a, &v, FRAC_PI_4), 0.5);
        assert!((periodic_interp(&a, &v, 1.5 * PI) - 1.0).abs() < 1e-12);
        assert_eq!(radial_interp(&[0.0, 1.0], &[1.0, 3.0], 0.25), 1.5);
        assert_eq!(radial_interp(&[0.0, 1.0], &[1.0, 3.0], 2.0), 3.0);
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        assert!((fitted_order(&hs, &es).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fitted_order(&[0.1], &[1.0]), None);
    }

    #[test]
    fn field_csv_round_trip_is_bit_exact() {
        let cfg = RunConfig::from_json(MA).unwrap();
        let p = Problem::build(&cfg).unwrap();
        let u = ScalarField::from_fn(&p.grid, |x| (x[0] * 3.7).sin() / 3.0 + x[1].exp());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_field_csv(&path, &u).unwrap();
        let back = read_field_csv(&path, &p.grid, p.phi.clone()).unwrap();
        assert!(u.values.iter().zip(&back.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn radial_phase_discrepancy_at_unit_radius() {
        let d = radial_derived_phase(0.5, 1.0) - radial_quoted_phase(0.5, 1.0);
        assert!((d - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((radial_derived_phase(1.0 - 1e-12, 0.3) - FRAC_PI_2).abs() < 1e-9);
    }
}
