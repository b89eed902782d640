//! Solver reports serialized as JSON.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One accepted continuation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Per-property minima of the spectral margins over the checked nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Lemma21Margins {
    pub ordering: f64,
    pub trace: f64,
    pub sigma: f64,
    pub semiconvex: Option<f64>,
    pub nodes: usize,
}

impl Lemma21Margins {
    /// Smallest of the four margins.
    pub fn min(&self) -> f64 {
        self.ordering
            .min(self.trace)
            .min(self.sigma)
            .min(self.semiconvex.unwrap_or(f64::INFINITY))
    }
}

/// Largest discrete Laplacian over interior and near-boundary nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LaplacianMax {
    pub interior: f64,
    pub near_boundary: f64,
}

/// Gap between consecutive stages of a boundary-mollification sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CauchyGap {
    pub radius_prev: f64,
    pub radius: f64,
    /// `max |u_k − u_{k−1}|` over grid nodes.
    pub interior: f64,
    /// `max |φ_k − φ_{k−1}|` over the boundary.
    pub boundary: f64,
    pub allowance: f64,
    pub holds: bool,
}

/// Pseudo-time step of the monotone iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PseudoTime {
    pub formula: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    pub solve_ms: f64,
    pub diagnostics_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub solver: String,
    pub converged: bool,
    pub final_residual: f64,
    pub tolerance: f64,
    pub h: f64,
    pub delta: f64,
    pub step_history: Vec<StepRecord>,
    pub lemma21_margins: Option<Lemma21Margins>,
    pub sandwich_margin: Option<f64>,
    pub laplacian_max: Option<LaplacianMax>,
    pub gap: Option<f64>,
    pub sweeps: Option<usize>,
    pub pseudo_time: Option<PseudoTime>,
    pub monotonicity_violations: Option<usize>,
    pub cauchy_gaps: Vec<CauchyGap>,
    pub error: Option<ErrorRecord>,
    pub timings: Timings,
}

impl SolveReport {
    pub fn new(solver: &str, h: f64, tolerance: f64) -> Self {
        SolveReport {
            solver: solver.to_string(),
            converged: false,
            final_residual: f64::NAN,
            tolerance,
            h,
            delta: 0.0,
            step_history: Vec::new(),
            lemma21_margins: None,
            sandwich_margin: None,
            laplacian_max: None,
            gap: None,
            sweeps: None,
            pseudo_time: None,
            monotonicity_violations: None,
            cauchy_gaps: Vec::new(),
            error: None,
            timings: Timings::default(),
        }
    }

    /// Report for a run that failed before producing a field.
    pub fn failed(solver: &str, h: f64, tolerance: f64, err: &Error) -> Self {
        let mut r = Self::new(solver, h, tolerance);
        r.error = Some(err.into());
        r
    }
}
