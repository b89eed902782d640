//! Method of continuity: the homotopy `F(D²u) = tψ + (1−t)c₀` from the
//! constant phase `c₀ = (n−2)π/2 + δ` to the target, with damped Newton at
//! each step, and the boundary-mollification sequence for continuous data.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fd::{
    assemble_linearization_with, assemble_operator, discrete_laplacian, hessian_stencils, hessians,
    inf_norm, phase_residual_with, solve_linear, HessianStencil, ScalarField,
};
use crate::geometry::{
    anchor_set, barrier_at, boundary_sup_distance, mollify_boundary, truncated_phase_bounds, BoundaryData,
    BoundsMode, DomainGrid, NodeKind, Point,
};
use crate::phase::{
    critical_phase, eig_sym, lemma21_check, metric_inverse, phase_bound, PhaseClass, PhaseSamples, PhaseSpec,
    SymMatrix,
};
use crate::report::{CauchyGap, LaplacianMax, Lemma21Margins, SolveReport, StepRecord, Timings};

const DIM: usize = 2;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / (1u64 << 20) as f64;
const LINEAR_TOL: f64 = 1e-12;
/// Dense boundary samples for sup-gaps between boundary data.
pub const GAP_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityOptions {
    /// Residual tolerance of the final polished solve.
    pub tol_res: f64,
    /// Residual tolerance at intermediate homotopy steps.
    pub step_tol: f64,
    pub max_iter: usize,
    pub dt_initial: f64,
    pub dt_floor: f64,
    pub anchors: usize,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        ContinuityOptions {
            tol_res: 1e-10,
            step_tol: 1e-8,
            max_iter: 30,
            dt_initial: 0.25,
            dt_floor: 1.0 / 4096.0,
            anchors: 64,
        }
    }
}

/// Progress along the homotopy.
#[derive(Clone, Debug)]
pub struct HomotopyState {
    pub t: f64,
    pub c0: f64,
    pub u: ScalarField,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub step_history: Vec<StepRecord>,
}

impl HomotopyState {
    /// Recomputes `‖F(D²ₕu) − (tψ + (1−t)c₀)‖∞`.
    pub fn recompute_residual(&self, psi: &PhaseSamples) -> f64 {
        let stencils = hessian_stencils(&self.u.grid);
        inf_norm(&phase_residual_with(&self.u, &blend(psi, self.c0, self.t), &stencils))
    }
}

/// `tψ + (1−t)c₀`.
pub fn blend(psi: &PhaseSamples, c0: f64, t: f64) -> PhaseSamples {
    match psi {
        PhaseSamples::Constant(c) => PhaseSamples::Constant(t * c + (1.0 - t) * c0),
        PhaseSamples::Nodal(v) => PhaseSamples::Nodal(v.iter().map(|c| t * c + (1.0 - t) * c0).collect()),
    }
}

fn check_phase_value(v: f64) -> Result<()> {
    let bound = phase_bound(DIM);
    if !(v.is_finite() && v.abs() < bound) {
        return Err(Error::PhaseOutOfRange {
            value: v,
            lower: -bound,
            upper: bound,
        });
    }
    Ok(())
}

fn check_samples(psi: &PhaseSamples, n: usize) -> Result<()> {
    match psi {
        PhaseSamples::Constant(c) => check_phase_value(*c),
        PhaseSamples::Nodal(v) => {
            if v.len() != n {
                return Err(Error::PreconditionViolated(format!(
                    "phase table has {} entries for {n} nodes",
                    v.len()
                )));
            }
            v.iter().try_for_each(|c| check_phase_value(*c))
        }
    }
}

/// The quadratic `½|x − x_c|² tan(c₀/n)`, which has phase `c₀`, plus the
/// solution of its linearized operator with boundary data `φ − q`.
pub fn initial_guess(grid: &Arc<DomainGrid>, phi: &BoundaryData, c0: f64) -> Result<ScalarField> {
    check_phase_value(c0)?;
    let s = (c0 / DIM as f64).tan();
    let xc = grid.spec.center;
    let q = move |p: Point| 0.5 * s * ((p[0] - xc[0]).powi(2) + (p[1] - xc[1]).powi(2));
    let bvals: Vec<f64> = grid.hits.iter().map(|hit| phi.eval(hit.point) - q(hit.point)).collect();
    let stencils = hessian_stencils(grid);
    let g = metric_inverse(&SymMatrix::scaled_identity(DIM, s));
    let coeffs = vec![g; grid.len()];
    let sys = assemble_operator(grid, &stencils, &coeffs, &bvals);
    let w = solve_linear(&sys, LINEAR_TOL)?;
    let values = grid.nodes.iter().zip(&w).map(|(node, wi)| q(node.x) + wi).collect();
    Ok(ScalarField::new(grid, values, phi.clone()))
}

/// Damped Newton on `phase(D²ₕu) = target` with backtracking line search on
/// the sup-norm residual.
pub fn newton_solve(u0: &ScalarField, target: &PhaseSamples, tol_res: f64, max_iter: usize) -> Result<(ScalarField, usize)> {
    let stencils = hessian_stencils(&u0.grid);
    newton_with(u0, target, tol_res, max_iter, &stencils).map(|(u, it, _)| (u, it))
}

fn newton_with(
    u0: &ScalarField,
    target: &PhaseSamples,
    tol_res: f64,
    max_iter: usize,
    stencils: &[HessianStencil],
) -> Result<(ScalarField, usize, f64)> {
    check_samples(target, u0.grid.len())?;
    if !u0.is_finite() {
        return Err(Error::PreconditionViolated("initial iterate is not finite".into()));
    }
    let mut u = u0.clone();
    let mut r = phase_residual_with(&u, target, stencils);
    let mut norm = inf_norm(&r);
    for it in 0..max_iter {
        if norm <= tol_res {
            return Ok((u, it, norm));
        }
        let mut sys = assemble_linearization_with(&u, stencils);
        sys.rhs = r.iter().map(|v| -v).collect();
        let delta = solve_linear(&sys, LINEAR_TOL)?;
        let mut step = 1.0;
        loop {
            let values = u.values.iter().zip(&delta).map(|(v, d)| v + step * d).collect();
            let trial = u.with_values(values);
            let tr = phase_residual_with(&trial, target, stencils);
            let tn = inf_norm(&tr);
            if tn <= (1.0 - ARMIJO * step) * norm {
                u = trial;
                r = tr;
                norm = tn;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(Error::StagnationFailure { residual: norm });
            }
        }
    }
    if norm <= tol_res {
        return Ok((u, max_iter, norm));
    }
    Err(Error::NewtonFailure {
        iterations: max_iter,
        residual: norm,
        best: u.values,
    })
}

fn is_step_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonFailure { .. } | Error::StagnationFailure { .. } | Error::LinearSolveFailure { .. }
    )
}

/// Follows the homotopy from `c₀` to `ψ` with adaptive steps and polishes
/// the endpoint to `opts.tol_res`.
pub fn continue_homotopy(
    grid: &Arc<DomainGrid>,
    phi: &BoundaryData,
    psi: &PhaseSamples,
    c0: f64,
    opts: &ContinuityOptions,
) -> Result<HomotopyState> {
    check_samples(psi, grid.len())?;
    let stencils = hessian_stencils(grid);
    let guess = initial_guess(grid, phi, c0)?;
    let start_tol = opts.step_tol.max(opts.tol_res);
    let (mut u, it0, res0) = newton_with(&guess, &PhaseSamples::Constant(c0), start_tol, opts.max_iter, &stencils)
        .map_err(|e| if is_step_failure(&e) { Error::ContinuationFailure { last_t: 0.0 } } else { e })?;
    let mut history = vec![StepRecord {
        t: 0.0,
        dt: 0.0,
        iterations: it0,
        residual: res0,
    }];
    let mut total = it0;
    let mut t = 0.0;
    let mut dt = opts.dt_initial;
    let mut successes = 0;
    while t < 1.0 {
        let step = dt.min(1.0 - t);
        let t_new = if t + step >= 1.0 - 1e-15 { 1.0 } else { t + step };
        match newton_with(&u, &blend(psi, c0, t_new), start_tol, opts.max_iter, &stencils) {
            Ok((v, it, res)) => {
                history.push(StepRecord {
                    t: t_new,
                    dt: t_new - t,
                    iterations: it,
                    residual: res,
                });
                total += it;
                u = v;
                t = t_new;
                successes += 1;
                if successes >= 2 {
                    dt *= 2.0;
                    successes = 0;
                }
            }
            Err(e) if is_step_failure(&e) => {
                dt *= 0.5;
                successes = 0;
                if dt < opts.dt_floor {
                    return Err(Error::ContinuationFailure { last_t: t });
                }
            }
            Err(e) => return Err(e),
        }
    }
    let (u, it, res) = newton_with(&u, psi, opts.tol_res, opts.max_iter, &stencils)?;
    total += it;
    let last = history.last_mut().unwrap();
    last.iterations += it;
    last.residual = res;
    Ok(HomotopyState {
        t,
        c0,
        u,
        residual_norm: res,
        newton_iters: total,
        step_history: history,
    })
}

/// Minima of the spectral margins over interior nodes, with `ψ` taken
/// pointwise. Returns `None` when the phase is below critical somewhere.
pub fn lemma21_margins(u: &ScalarField, psi: &PhaseSamples, delta: f64) -> Option<Lemma21Margins> {
    let stencils = hessian_stencils(&u.grid);
    let hs = hessians(u, &stencils);
    let mut out = Lemma21Margins {
        ordering: f64::INFINITY,
        trace: f64::INFINITY,
        sigma: f64::INFINITY,
        semiconvex: (delta > 0.0).then_some(f64::INFINITY),
        nodes: 0,
    };
    for (k, node) in u.grid.nodes.iter().enumerate() {
        if node.kind != NodeKind::Interior {
            continue;
        }
        let spec = eig_sym(&hs[k]).ok()?;
        let rep = lemma21_check(&spec, psi.at(k), delta).ok()?;
        out.ordering = out.ordering.min(rep.ordering_margin);
        out.trace = out.trace.min(rep.trace_margin);
        out.sigma = out.sigma.min(rep.sigma_margin);
        if let (Some(m), Some(r)) = (out.semiconvex.as_mut(), rep.semiconvex_margin) {
            *m = m.min(r);
        }
        out.nodes += 1;
    }
    Some(out)
}

/// `min over anchors and nodes of min(B⁺ − u, u − B⁻)`.
pub fn sandwich_margin(u: &ScalarField, bounds: (f64, f64), anchors: usize) -> Result<f64> {
    let grid = &u.grid;
    let mut margin = f64::INFINITY;
    for a in anchor_set(&grid.spec, anchors) {
        let pair = barrier_at(a, grid, &u.boundary, bounds)?;
        for (node, v) in grid.nodes.iter().zip(&u.values) {
            margin = margin.min(pair.upper.eval(node.x) - v).min(v - pair.lower.eval(node.x));
        }
    }
    Ok(margin)
}

/// Largest discrete Laplacian over interior and near-boundary nodes.
pub fn laplacian_max(u: &ScalarField) -> LaplacianMax {
    let lap = discrete_laplacian(u);
    let mut out = LaplacianMax {
        interior: f64::NEG_INFINITY,
        near_boundary: f64::NEG_INFINITY,
    };
    for (node, l) in u.grid.nodes.iter().zip(&lap) {
        match node.kind {
            NodeKind::Interior => out.interior = out.interior.max(*l),
            NodeKind::NearBoundary => out.near_boundary = out.near_boundary.max(*l),
        }
    }
    out
}

fn require_supercritical(psi: &PhaseSpec) -> Result<()> {
    if psi.dim != DIM {
        return Err(Error::PreconditionViolated(format!("phase dimension {} is not 2", psi.dim)));
    }
    if psi.classification != PhaseClass::Supercritical {
        let crit = critical_phase(DIM);
        let bound = phase_bound(DIM);
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
    Ok(())
}

/// Solves `phase(D²u) = ψ`, `u = φ` on the boundary, for supercritical `ψ`.
/// A negative phase range is solved through `u ↦ −u`.
pub fn continuity_run(
    grid: &Arc<DomainGrid>,
    phi: &BoundaryData,
    psi: &PhaseSpec,
    opts: &ContinuityOptions,
) -> Result<(ScalarField, SolveReport)> {
    require_supercritical(psi)?;
    let start = Instant::now();
    let (psi_pos, phi_pos) = if psi.mirrored {
        (psi.negated(), phi.negated())
    } else {
        (psi.clone(), phi.clone())
    };
    let c0 = critical_phase(DIM) + psi_pos.delta;
    let state = continue_homotopy(grid, &phi_pos, &psi_pos.samples, c0, opts)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut report = SolveReport::new("continuity", grid.h, opts.tol_res);
    report.converged = state.residual_norm <= opts.tol_res;
    report.final_residual = state.residual_norm;
    report.delta = psi_pos.delta;
    report.step_history = state.step_history.clone();
    report.lemma21_margins = lemma21_margins(&state.u, &psi_pos.samples, psi_pos.delta);
    let bounds = truncated_phase_bounds(&psi_pos, BoundsMode::Supercritical);
    report.sandwich_margin = Some(sandwich_margin(&state.u, bounds, opts.anchors)?);
    report.laplacian_max = Some(laplacian_max(&state.u));
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    report.timings = Timings {
        solve_ms,
        diagnostics_ms: total_ms - solve_ms,
        total_ms,
    };
    let u = if psi.mirrored { state.u.negated() } else { state.u };
    Ok((u, report))
}

/// Solves with each mollification `φ_k` of continuous data and records the
/// interior and boundary gaps between consecutive stages.
pub fn c0_boundary_run(
    grid: &Arc<DomainGrid>,
    phi: &BoundaryData,
    psi: &PhaseSpec,
    radii: &[f64],
    opts: &ContinuityOptions,
) -> Result<(ScalarField, SolveReport)> {
    if radii.is_empty() {
        return Err(Error::PreconditionViolated("empty radius list".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::PreconditionViolated("radii must be positive and decreasing".into()));
    }
    let start = Instant::now();
    let allowance = 5.0 * grid.h * grid.h;
    let mut prev: Option<(f64, BoundaryData, ScalarField)> = None;
    let mut gaps = Vec::new();
    let mut last = None;
    for &r in radii {
        let phi_k = mollify_boundary(phi, &grid.spec, r)?;
        let (u, report) = continuity_run(grid, &phi_k, psi, opts)?;
        if let Some((r_prev, phi_prev, u_prev)) = &prev {
            let dense = boundary_sup_distance(&grid.spec, &phi_k, phi_prev, GAP_SAMPLES);
            let at_hits = u
                .boundary_values
                .iter()
                .zip(&u_prev.boundary_values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let boundary = dense.max(at_hits);
            let interior = u.max_abs_diff(u_prev);
            gaps.push(CauchyGap {
                radius_prev: *r_prev,
                radius: r,
                interior,
                boundary,
                allowance,
                holds: interior <= boundary + allowance,
            });
        }
        prev = Some((r, phi_k, u.clone()));
        last = Some((u, report));
    }
    let (u, mut report) = last.unwrap();
    report.solver = "continuity-c0".into();
    report.cauchy_gaps = gaps;
    report.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::assemble_laplacian;
    use crate::geometry::{build_grid, DomainSpec};
    use crate::phase::{classify_phase, CLASSIFY_TOL};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn disk_grid(h: f64) -> Arc<DomainGrid> {
        Arc::new(build_grid(&DomainSpec::unit_disk(), h).unwrap())
    }

    fn half_norm2() -> BoundaryData {
        BoundaryData::new(crate::geometry::Smoothness::C4, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]))
    }

    #[test]
    fn guess_is_exact_for_matching_quadratic() {
        let g = disk_grid(0.125);
        let u = initial_guess(&g, &half_norm2(), FRAC_PI_2).unwrap();
        for (node, v) in g.nodes.iter().zip(&u.values) {
            assert!((v - 0.5 * (node.x[0].powi(2) + node.x[1].powi(2))).abs() < 1e-13);
        }
    }

    #[test]
    fn guess_with_zero_data_matches_laplace_lift() {
        let g = disk_grid(0.125);
        let u = initial_guess(&g, &BoundaryData::constant(0.0), FRAC_PI_2).unwrap();
        // Oracle: at c₀ = π/2 the weighted operator is ½Δ, so the lift is the
        // discrete harmonic extension of −½|x|².
        let bvals: Vec<f64> = g.hits.iter().map(|h| -0.5 * (h.point[0].powi(2) + h.point[1].powi(2))).collect();
        let w = solve_linear(&assemble_laplacian(&g, &bvals), 1e-14).unwrap();
        for ((node, v), wi) in g.nodes.iter().zip(&u.values).zip(&w) {
            let q = 0.5 * (node.x[0].powi(2) + node.x[1].powi(2));
            assert!((v - q - wi).abs() < 1e-12);
        }
    }

    #[test]
    fn guess_at_zero_phase_is_harmonic_extension() {
        let g = disk_grid(0.125);
        let phi = BoundaryData::new(crate::geometry::Smoothness::C4, |p| p[0] * p[0] - p[1] * p[1]);
        let u = initial_guess(&g, &phi, 0.0).unwrap();
        for (node, v) in g.nodes.iter().zip(&u.values) {
            assert!((v - (node.x[0].powi(2) - node.x[1].powi(2))).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_fixed_point() {
        let g = disk_grid(0.0625);
        let u0 = ScalarField::from_fn(&g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let (u, it) = newton_solve(&u0, &PhaseSamples::Constant(FRAC_PI_2), 1e-12, 10).unwrap();
        assert!(it <= 1);
        let r = phase_residual_with(&u, &PhaseSamples::Constant(FRAC_PI_2), &hessian_stencils(&g));
        assert!(inf_norm(&r) <= 1e-12);
    }

    #[test]
    fn newton_rejects_out_of_range_target() {
        let g = disk_grid(0.25);
        let u0 = ScalarField::from_fn(&g, |_| 0.0);
        let err = newton_solve(&u0, &PhaseSamples::Constant(3.5), 1e-10, 10).unwrap_err();
        assert!(matches!(err, Error::PhaseOutOfRange { .. }));
    }

    #[test]
    fn newton_recovers_from_bump() {
        let g = disk_grid(1.0 / 32.0);
        let u0 = ScalarField::from_fn(&g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let bumped: Vec<f64> = g
            .nodes
            .iter()
            .zip(&u0.values)
            .map(|(n, v)| {
                let r2 = (n.x[0] - 0.2).powi(2) + (n.x[1] + 0.1).powi(2);
                v + 0.01 * (1.0 - r2 / 0.25).max(0.0).powi(3)
            })
            .collect();
        let (u, it) = newton_solve(&u0.with_values(bumped), &PhaseSamples::Constant(FRAC_PI_2), 1e-10, 8).unwrap();
        assert!(it <= 8);
        assert!(u.max_abs_diff(&u0) < 1e-9);
    }

    #[test]
    fn continuity_reproduces_quadratic() {
        let g = disk_grid(0.0625);
        let psi = classify_phase(PhaseSamples::Constant(FRAC_PI_2), 2, CLASSIFY_TOL).unwrap();
        let (u, rep) = continuity_run(&g, &half_norm2(), &psi, &ContinuityOptions::default()).unwrap();
        assert!(rep.converged && rep.final_residual <= 1e-10);
        assert!(rep.sandwich_margin.unwrap() >= 0.0);
        let exact = ScalarField::from_fn(&g, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        assert!(u.max_abs_diff(&exact) <= 1e-9);
        assert_eq!(rep.step_history.last().unwrap().t, 1.0);
    }

    #[test]
    fn zero_data_gives_unit_determinant() {
        // Oracle: ½(|x|² − 1) has Hessian I, so det = 1 and phase π/2.
        let h = 1.0 / 16.0;
        let g = disk_grid(h);
        let psi = classify_phase(PhaseSamples::Constant(FRAC_PI_2), 2, CLASSIFY_TOL).unwrap();
        let (u, _) = continuity_run(&g, &BoundaryData::constant(0.0), &psi, &ContinuityOptions::default()).unwrap();
        let hs = hessians(&u, &hessian_stencils(&g));
        for (node, m) in g.nodes.iter().zip(&hs) {
            if node.kind == NodeKind::Interior {
                let det = m.get(0, 0) * m.get(1, 1) - m.get(0, 1).powi(2);
                assert!((det - 1.0).abs() <= 5.0 * h * h);
            }
        }
    }

    #[test]
    fn variable_phase_margins() {
        let h = 1.0 / 16.0;
        let g = disk_grid(h);
        let table = g.nodes.iter().map(|n| FRAC_PI_2 + 0.05 + 0.3 * (n.x[0].powi(2) + n.x[1].powi(2))).collect();
        let psi = classify_phase(PhaseSamples::Nodal(table), 2, CLASSIFY_TOL).unwrap();
        assert!(psi.max < PI - 0.05);
        let (_, rep) = continuity_run(&g, &half_norm2(), &psi, &ContinuityOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.lemma21_margins.unwrap().min() >= -10.0 * h * h);
        assert!(rep.sandwich_margin.unwrap() >= -5.0 * h * h);
        let ts: Vec<f64> = rep.step_history.iter().map(|s| s.t).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn state_residual_is_reproducible() {
        let g = disk_grid(0.125);
        let psi = PhaseSamples::Constant(2.0);
        let st = continue_homotopy(&g, &BoundaryData::constant(0.0), &psi, FRAC_PI_2, &ContinuityOptions::default())
            .unwrap();
        assert!((st.recompute_residual(&psi) - st.residual_norm).abs() <= 1e-14);
    }

    #[test]
    fn subcritical_phase_is_rejected() {
        let g = disk_grid(0.25);
        let psi = classify_phase(PhaseSamples::Constant(0.0), 2, CLASSIFY_TOL).unwrap();
        let err = continuity_run(&g, &half_norm2(), &psi, &ContinuityOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PhaseOutOfRange { .. }));
    }

    #[test]
    fn mirrored_phase_solves_negated_problem() {
        let g = disk_grid(0.125);
        let psi = classify_phase(PhaseSamples::Constant(-FRAC_PI_2), 2, CLASSIFY_TOL).unwrap();
        let phi = BoundaryData::new(crate::geometry::Smoothness::C4, |p| -0.5 * (p[0] * p[0] + p[1] * p[1]));
        let (u, rep) = continuity_run(&g, &phi, &psi, &ContinuityOptions::default()).unwrap();
        assert!(rep.converged);
        let exact = ScalarField::from_fn(&g, |p| -0.5 * (p[0] * p[0] + p[1] * p[1]));
        assert!(u.max_abs_diff(&exact) <= 1e-9);
    }

    #[test]
    fn single_radius_matches_direct_run() {
        let g = disk_grid(0.125);
        let spec = g.spec.clone();
        let phi = BoundaryData::from_angle(&spec, crate::geometry::Smoothness::C0, |t| t.cos().abs());
        let psi = classify_phase(PhaseSamples::Constant(FRAC_PI_2), 2, CLASSIFY_TOL).unwrap();
        let opts = ContinuityOptions::default();
        let (u1, rep) = c0_boundary_run(&g, &phi, &psi, &[0.2], &opts).unwrap();
        assert!(rep.cauchy_gaps.is_empty());
        let (u2, _) = continuity_run(&g, &mollify_boundary(&phi, &spec, 0.2).unwrap(), &psi, &opts).unwrap();
        assert_eq!(u1.values, u2.values);
    }
}
