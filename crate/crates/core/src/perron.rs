//! Constant-phase viscosity solutions by monotone two-sided iteration of the
//! wide-stencil scheme, sup/inf ε-envelopes, and the discrete comparison
//! check.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::continuity::{lemma21_margins, sandwich_margin};
use crate::error::{Error, Result};
use crate::fd::{ScalarField, StencilSet};
use crate::geometry::{anchor_set, barrier_at, truncated_phase_bounds, BoundaryData, BoundsMode, DomainGrid};
use crate::phase::{critical_phase, PhaseSamples, PhaseSpec};
use crate::report::{PseudoTime, SolveReport, Timings};

/// Allowed decrease of a lower iterate (or increase of an upper one) per
/// sweep before it counts as a monotonicity violation.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PerronOptions {
    pub tol_gap: f64,
    pub max_sweeps: usize,
    pub anchors: usize,
    /// Defect allowed by the two-sided certificate.
    pub cert_tol: f64,
}

impl Default for PerronOptions {
    fn default() -> Self {
        PerronOptions {
            tol_gap: 1e-8,
            max_sweeps: 2_000_000,
            anchors: 64,
            cert_tol: 1e-10,
        }
    }
}

/// The two monotone branches of the iteration.
#[derive(Clone, Debug)]
pub struct PerronState {
    pub lower: ScalarField,
    pub upper: ScalarField,
    pub stencils: Arc<StencilSet>,
    /// Boundary data at the stencil cutoffs.
    pub cut: Vec<f64>,
    pub c: f64,
    /// Per-node pseudo-time step `1/(2 max_d w_center)`.
    pub tau: Vec<f64>,
    pub sweeps: usize,
    pub gap: f64,
    pub tol_gap: f64,
    pub cert_tol: f64,
    pub monotonicity_violations: usize,
}

impl PerronState {
    /// Midpoint of the two branches.
    pub fn solution(&self) -> ScalarField {
        let v = self
            .lower
            .values
            .iter()
            .zip(&self.upper.values)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        self.lower.with_values(v)
    }
}

fn max_gap(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(l, u)| u - l)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Pointwise max of the lower barriers and min of the upper barriers over
/// the anchor set.
fn barrier_envelopes(grid: &DomainGrid, phi: &BoundaryData, bounds: (f64, f64), anchors: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lo = vec![f64::NEG_INFINITY; grid.len()];
    let mut hi = vec![f64::INFINITY; grid.len()];
    for a in anchor_set(&grid.spec, anchors) {
        let pair = barrier_at(a, grid, phi, bounds)?;
        for (k, node) in grid.nodes.iter().enumerate() {
            lo[k] = lo[k].max(pair.lower.eval(node.x));
            hi[k] = hi[k].min(pair.upper.eval(node.x));
        }
    }
    Ok((lo, hi))
}

/// One Jacobi sweep `u ← u + τ(W(u) − c)` on the first `τ.len()` entries
/// of `[values, cut]`; returns the largest change and the most negative
/// change scaled by `sign`.
fn sweep(st: &StencilSet, tau: &[f64], c: f64, ext: &[f64], out: &mut [f64], sign: f64) -> (f64, f64) {
    let mut max_change: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for (k, t) in tau.iter().enumerate() {
        let d = t * (st.phase_value_ext(ext, k) - c);
        out[k] = ext[k] + d;
        max_change = max_change.max(d.abs());
        worst = worst.min(sign * d);
    }
    (max_change, worst)
}

/// Solves `W(u) = c` for constant `c` from ordered barrier starts.
pub fn perron_run(
    grid: &Arc<DomainGrid>,
    phi: &BoundaryData,
    psi: &PhaseSpec,
    stencils: &Arc<StencilSet>,
    opts: &PerronOptions,
) -> Result<(PerronState, SolveReport)> {
    let c = match psi.samples {
        PhaseSamples::Constant(c) => c,
        PhaseSamples::Nodal(_) => {
            return Err(Error::PreconditionViolated(
                "the perron solver requires a constant phase (comparison is only available for constant phase)".into(),
            ))
        }
    };
    if psi.dim != 2 || !(psi.eps_prime > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "phase {c} needs dimension 2 and a positive margin eps'"
        )));
    }
    if stencils.node_count() != grid.len() {
        return Err(Error::PreconditionViolated("stencil set built for a different grid".into()));
    }
    if !(opts.tol_gap > 0.0) {
        return Err(Error::PreconditionViolated("tolGap must be positive".into()));
    }
    let start = Instant::now();
    let bounds = truncated_phase_bounds(psi, BoundsMode::General);
    let (mut lo, mut hi) = barrier_envelopes(grid, phi, bounds, opts.anchors)?;
    let cut = stencils.cutoff_values(phi);
    let tau: Vec<f64> = (0..grid.len()).map(|k| 0.5 / stencils.max_center_weight(k)).collect();

    let n = grid.len();
    lo.extend_from_slice(&cut);
    hi.extend_from_slice(&cut);
    let mut lo_next = lo.clone();
    let mut hi_next = hi.clone();
    let mut gap = max_gap(&lo[..n], &hi[..n]);
    let mut violations = 0usize;
    let mut sweeps = 0usize;
    loop {
        let (dl, wl) = sweep(stencils, &tau, c, &lo, &mut lo_next, 1.0);
        let (du, wu) = sweep(stencils, &tau, c, &hi, &mut hi_next, -1.0);
        std::mem::swap(&mut lo, &mut lo_next);
        std::mem::swap(&mut hi, &mut hi_next);
        sweeps += 1;
        let new_gap = max_gap(&lo[..n], &hi[..n]);
        violations += usize::from(wl < -MONOTONE_SLACK)
            + usize::from(wu < -MONOTONE_SLACK)
            + usize::from(new_gap > gap + MONOTONE_SLACK);
        gap = new_gap;
        if gap <= opts.tol_gap && dl.max(du) <= opts.tol_gap / 10.0 {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::PerronFailure { gap, sweeps });
        }
    }
    lo.truncate(n);
    hi.truncate(n);
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;

    let state = PerronState {
        lower: ScalarField::new(grid, lo, phi.clone()),
        upper: ScalarField::new(grid, hi, phi.clone()),
        stencils: stencils.clone(),
        cut,
        c,
        tau,
        sweeps,
        gap,
        tol_gap: opts.tol_gap,
        cert_tol: opts.cert_tol,
        monotonicity_violations: violations,
    };

    let mut report = SolveReport::new("perron", grid.h, opts.tol_gap);
    let sol = state.solution();
    report.converged = true;
    report.final_residual = (0..grid.len())
        .map(|k| (stencils.phase_value(&sol.values, &state.cut, k) - c).abs())
        .fold(0.0, f64::max);
    report.gap = Some(gap);
    report.sweeps = Some(sweeps);
    report.monotonicity_violations = Some(violations);
    report.pseudo_time = Some(PseudoTime {
        formula: "tau_i = 1 / (2 * max_d (w_plus + w_minus)), arctan' <= 1".into(),
        min: state.tau.iter().copied().fold(f64::INFINITY, f64::min),
        max: state.tau.iter().copied().fold(0.0, f64::max),
    });
    let crit = critical_phase(2);
    report.delta = (c.abs() - crit).max(0.0);
    report.lemma21_margins = if c >= crit {
        lemma21_margins(&sol, &psi.samples, report.delta)
    } else if c <= -crit {
        lemma21_margins(&sol.negated(), &PhaseSamples::Constant(-c), report.delta)
    } else {
        None
    };
    report.sandwich_margin = Some(sandwich_margin(&sol, bounds, opts.anchors)?);
    report.laplacian_max = Some(crate::continuity::laplacian_max(&sol));
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    report.timings = Timings {
        solve_ms,
        diagnostics_ms: total_ms - solve_ms,
        total_ms,
    };
    Ok((state, report))
}

/// Discrete analogue of the squeeze `z̲ = z̄`: both branches satisfy their
/// one-sided inequalities within `cert_tol`, carry the boundary data and are
/// within `tol_gap` of each other.
pub fn two_sided_certificate(state: &PerronState) -> bool {
    let st = &state.stencils;
    let tol = state.cert_tol;
    let n = state.lower.values.len();
    let sub = (0..n).all(|k| st.phase_value(&state.lower.values, &state.cut, k) >= state.c - tol);
    let sup = (0..n).all(|k| st.phase_value(&state.upper.values, &state.cut, k) <= state.c + tol);
    let grid = &state.lower.grid;
    let boundary = grid.hits.iter().enumerate().all(|(b, hit)| {
        let phi = state.lower.boundary.eval(hit.point);
        (state.lower.boundary_values[b] - phi).abs() <= tol && (state.upper.boundary_values[b] - phi).abs() <= tol
    }) && st
        .cutoffs
        .iter()
        .zip(&state.cut)
        .all(|(p, v)| (state.lower.boundary.eval(*p) - v).abs() <= tol);
    let ordered = state
        .lower
        .values
        .iter()
        .zip(&state.upper.values)
        .all(|(l, u)| *l <= u + tol);
    let gap = max_gap(&state.lower.values, &state.upper.values);
    sub && sup && boundary && ordered && gap <= state.tol_gap
}

/// Parameters of the ε-envelopes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeParams {
    pub eps: f64,
    pub search_radius: f64,
}

impl EnvelopeParams {
    /// Smallest admissible window `sqrt(ε · osc u)`.
    pub fn required_radius(eps: f64, u: &ScalarField) -> f64 {
        (eps * oscillation(u)).sqrt()
    }
}

fn oscillation(u: &ScalarField) -> f64 {
    let (lo, hi) = u
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if u.values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Upper ε-envelope `u^ε(x₀) = max_x {u(x) + ε − |x − x₀|²/ε}` over nodes
/// within the search radius.
pub fn sup_convolution(u: &ScalarField, p: EnvelopeParams) -> Result<ScalarField> {
    if !(p.eps > 0.0) {
        return Err(Error::PreconditionViolated(format!("eps = {} must be positive", p.eps)));
    }
    let required = EnvelopeParams::required_radius(p.eps, u);
    if p.search_radius < required {
        return Err(Error::EnvelopeWindowTooSmall {
            radius: p.search_radius,
            required,
        });
    }
    let grid = &u.grid;
    let h = grid.h;
    let reach = (p.search_radius / h).floor() as i64;
    let r2 = p.search_radius * p.search_radius;
    let values = grid
        .nodes
        .iter()
        .map(|node| {
            let [i, j] = node.lattice;
            let mut best = f64::NEG_INFINITY;
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let d2 = ((di * di + dj * dj) as f64) * h * h;
                    if d2 > r2 {
                        continue;
                    }
                    if let Some(k) = grid.node_at(i + di, j + dj) {
                        best = best.max(u.values[k] + p.eps - d2 / p.eps);
                    }
                }
            }
            best
        })
        .collect();
    Ok(u.with_values(values))
}

/// Lower ε-envelope `u_ε = −(−u)^ε`.
pub fn inf_convolution(u: &ScalarField, p: EnvelopeParams) -> Result<ScalarField> {
    Ok(sup_convolution(&u.negated(), p)?.negated())
}

/// Smallest axis second difference of `u^ε + |x|²/ε` over nodes whose axis
/// neighbors are nodes; nonnegative for a semiconvex envelope.
pub fn semiconvexity_defect(u_eps: &ScalarField, eps: f64) -> f64 {
    let grid = &u_eps.grid;
    let f = |k: usize| {
        let x = grid.nodes[k].x;
        u_eps.values[k] + (x[0] * x[0] + x[1] * x[1]) / eps
    };
    let mut worst = f64::INFINITY;
    for (k, node) in grid.nodes.iter().enumerate() {
        let [i, j] = node.lattice;
        for (a, b) in [((i + 1, j), (i - 1, j)), ((i, j + 1), (i, j - 1))] {
            if let (Some(p), Some(m)) = (grid.node_at(a.0, a.1), grid.node_at(b.0, b.1)) {
                worst = worst.min(f(p) + f(m) - 2.0 * f(k));
            }
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonReport {
    /// `max (u − v)` over nodes.
    pub max_difference: f64,
    pub worst_node: usize,
    pub pass: bool,
}

/// Checks `u ≤ v` in the interior for a discrete subsolution `u` and
/// supersolution `v` of `W = c` ordered on the boundary.
pub fn comparison_check(u: &ScalarField, v: &ScalarField, c: f64, stencils: &StencilSet, tol: f64) -> Result<ComparisonReport> {
    let cut_u = stencils.cutoff_values(&u.boundary);
    let cut_v = stencils.cutoff_values(&v.boundary);
    let n = u.values.len();
    let mut worst = (0, 0.0);
    for k in 0..n {
        let d = c - stencils.phase_value(&u.values, &cut_u, k);
        if d > worst.1 {
            worst = (k, d);
        }
    }
    if worst.1 > tol {
        return Err(Error::NotASubsolution {
            node: worst.0,
            defect: worst.1,
        });
    }
    worst = (0, 0.0);
    for k in 0..n {
        let d = stencils.phase_value(&v.values, &cut_v, k) - c;
        if d > worst.1 {
            worst = (k, d);
        }
    }
    if worst.1 > tol {
        return Err(Error::NotASupersolution {
            node: worst.0,
            defect: worst.1,
        });
    }
    let boundary = u
        .boundary_values
        .iter()
        .zip(&v.boundary_values)
        .chain(cut_u.iter().zip(&cut_v));
    for (index, (a, b)) in boundary.enumerate() {
        if a - b > tol {
            return Err(Error::BoundaryOrderViolated { index, excess: a - b });
        }
    }
    let (worst_node, max_difference) = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a - b)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, d)| if d > acc.1 { (k, d) } else { acc });
    Ok(ComparisonReport {
        max_difference,
        worst_node,
        pass: max_difference <= tol,
    })
}
