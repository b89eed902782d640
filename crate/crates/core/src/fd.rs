//! Finite-difference machinery: sampled fields, the discrete Hessian with
//! Shortley–Weller arms at the boundary, phase residuals, the linearized
//! operator, and the monotone wide-stencil phase operator.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryData, DomainGrid, Neighbor, NodeKind, Point, EAST, NORTH, SOUTH, WEST};
use crate::phase::{eig2, metric_inverse, phase2, PhaseSamples, SymMatrix};
use crate::sparse::{self, CsrMatrix};

/// Values on the grid nodes plus Dirichlet data at the boundary hits.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<DomainGrid>,
    pub values: Vec<f64>,
    pub boundary: BoundaryData,
    pub boundary_values: Vec<f64>,
}

impl ScalarField {
    /// Field with the given nodal values and boundary data.
    pub fn new(grid: &Arc<DomainGrid>, values: Vec<f64>, boundary: BoundaryData) -> Self {
        assert_eq!(values.len(), grid.len());
        let boundary_values = grid.hits.iter().map(|h| boundary.eval(h.point)).collect();
        ScalarField {
            grid: grid.clone(),
            values,
            boundary,
            boundary_values,
        }
    }

    /// Samples `f` at the nodes and uses it as boundary data too.
    pub fn from_fn(grid: &Arc<DomainGrid>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        let values = grid.nodes.iter().map(|n| f(n.x)).collect();
        Self::new(grid, values, BoundaryData::new(crate::geometry::Smoothness::C4, f))
    }

    /// Samples `f` at the nodes, with separate boundary data.
    pub fn sample(grid: &Arc<DomainGrid>, f: impl Fn(Point) -> f64, boundary: BoundaryData) -> Self {
        let values = grid.nodes.iter().map(|n| f(n.x)).collect();
        Self::new(grid, values, boundary)
    }

    /// Same boundary data, new nodal values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        ScalarField {
            values,
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().chain(&self.boundary_values).all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn negated(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            boundary: self.boundary.negated(),
            boundary_values: self.boundary_values.iter().map(|v| -v).collect(),
        }
    }
}

/// A value referenced by a difference stencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tap {
    Node(usize),
    /// Index into the grid's boundary hits.
    Boundary(usize),
}

pub type Taps = Vec<(Tap, f64)>;

/// Linear stencils for `u_xx`, `u_yy`, `u_xy` at one node.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianStencil {
    pub xx: Taps,
    pub yy: Taps,
    pub xy: Taps,
}

fn arm(grid: &DomainGrid, nb: Neighbor) -> (Tap, f64) {
    match nb {
        Neighbor::Node(k) => (Tap::Node(k), 1.0),
        Neighbor::Boundary(k) => (Tap::Boundary(k), grid.hits[k].theta),
    }
}

/// Shortley–Weller second difference from the two arms of one axis.
fn axis_second_difference(grid: &DomainGrid, node: usize, plus: usize, minus: usize) -> Taps {
    let h2 = grid.h * grid.h;
    let n = &grid.nodes[node];
    let (tp, ap) = arm(grid, n.neighbors[plus]);
    let (tm, am) = arm(grid, n.neighbors[minus]);
    let wp = 2.0 / (h2 * ap * (ap + am));
    let wm = 2.0 / (h2 * am * (ap + am));
    vec![(tp, wp), (tm, wm), (Tap::Node(node), -(wp + wm))]
}

/// Quadrant box differences available at a node, each exact on quadratics.
fn quadrant_boxes(grid: &DomainGrid, node: usize) -> Vec<[(usize, f64); 4]> {
    let h2 = grid.h * grid.h;
    let [i, j] = grid.nodes[node].lattice;
    let mut out = Vec::with_capacity(4);
    for (sx, sy) in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
        if let (Some(side_x), Some(side_y), Some(corner)) = (
            grid.node_at(i + sx, j),
            grid.node_at(i, j + sy),
            grid.node_at(i + sx, j + sy),
        ) {
            let s = (sx * sy) as f64 / h2;
            out.push([(corner, s), (side_x, -s), (side_y, -s), (node, s)]);
        }
    }
    out
}

fn mixed_difference(grid: &DomainGrid, node: usize) -> Taps {
    let own = quadrant_boxes(grid, node);
    let boxes = if own.is_empty() {
        // Borrow the mixed difference of the first axis neighbor that has
        // one; exact on quadratics, first order otherwise.
        grid.nodes[node]
            .neighbors
            .iter()
            .filter_map(|nb| match nb {
                Neighbor::Node(k) => Some(quadrant_boxes(grid, *k)),
                Neighbor::Boundary(_) => None,
            })
            .find(|b| !b.is_empty())
            .unwrap_or_default()
    } else {
        own
    };
    if boxes.is_empty() {
        return Vec::new();
    }
    let scale = 1.0 / boxes.len() as f64;
    boxes
        .iter()
        .flat_map(|b| b.iter().map(move |(k, w)| (Tap::Node(*k), w * scale)))
        .collect()
}

/// Builds the Hessian stencil at a node.
pub fn hessian_stencil(grid: &DomainGrid, node: usize) -> HessianStencil {
    HessianStencil {
        xx: axis_second_difference(grid, node, EAST, WEST),
        yy: axis_second_difference(grid, node, NORTH, SOUTH),
        xy: mixed_difference(grid, node),
    }
}

/// Hessian stencils of every node.
pub fn hessian_stencils(grid: &DomainGrid) -> Vec<HessianStencil> {
    (0..grid.len()).map(|k| hessian_stencil(grid, k)).collect()
}

#[inline]
fn apply(taps: &Taps, values: &[f64], boundary: &[f64]) -> f64 {
    taps.iter()
        .map(|(t, w)| {
            w * match t {
                Tap::Node(k) => values[*k],
                Tap::Boundary(k) => boundary[*k],
            }
        })
        .sum()
}

fn hessian_from(st: &HessianStencil, values: &[f64], boundary: &[f64]) -> (f64, f64, f64) {
    (
        apply(&st.xx, values, boundary),
        apply(&st.xy, values, boundary),
        apply(&st.yy, values, boundary),
    )
}

/// Discrete Hessian of `u` at a node.
pub fn hessian_at(u: &ScalarField, node: usize) -> SymMatrix {
    let st = hessian_stencil(&u.grid, node);
    let (xx, xy, yy) = hessian_from(&st, &u.values, &u.boundary_values);
    SymMatrix::new2(xx, xy, yy)
}

/// Discrete Hessians at all nodes, reusing precomputed stencils.
pub fn hessians(u: &ScalarField, stencils: &[HessianStencil]) -> Vec<SymMatrix> {
    stencils
        .iter()
        .map(|st| {
            let (xx, xy, yy) = hessian_from(st, &u.values, &u.boundary_values);
            SymMatrix::new2(xx, xy, yy)
        })
        .collect()
}

/// `phase(D²ₕu) − ψ` at every node.
pub fn phase_residual(u: &ScalarField, psi: &PhaseSamples) -> Vec<f64> {
    let stencils = hessian_stencils(&u.grid);
    phase_residual_with(u, psi, &stencils)
}

pub fn phase_residual_with(u: &ScalarField, psi: &PhaseSamples, stencils: &[HessianStencil]) -> Vec<f64> {
    stencils
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let (xx, xy, yy) = hessian_from(st, &u.values, &u.boundary_values);
            phase2(xx, xy, yy) - psi.at(k)
        })
        .collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Linear system over the grid nodes with boundary values eliminated.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Sum of the eliminated boundary weights per row.
    pub boundary_weight: Vec<f64>,
}

/// Assembles `v ↦ Σ_ab G^{ab}_k ∂_ab v` with per-node coefficient matrices
/// `coeffs`; boundary values move to the right-hand side so that the system
/// reads `A v = rhs` for `v` with the given boundary data.
pub fn assemble_operator(
    grid: &DomainGrid,
    stencils: &[HessianStencil],
    coeffs: &[SymMatrix],
    boundary_values: &[f64],
) -> LinearSystem {
    let n = grid.len();
    let mut rows = Vec::with_capacity(n);
    let mut rhs = vec![0.0; n];
    let mut boundary_weight = vec![0.0; n];
    for k in 0..n {
        let g = &coeffs[k];
        let st = &stencils[k];
        let mut row = Vec::with_capacity(st.xx.len() + st.yy.len() + st.xy.len());
        for (taps, c) in [
            (&st.xx, g.get(0, 0)),
            (&st.yy, g.get(1, 1)),
            (&st.xy, 2.0 * g.get(0, 1)),
        ] {
            if c == 0.0 {
                continue;
            }
            for (t, w) in taps {
                match t {
                    Tap::Node(j) => row.push((*j, c * w)),
                    Tap::Boundary(b) => {
                        rhs[k] -= c * w * boundary_values[*b];
                        boundary_weight[k] += c * w;
                    }
                }
            }
        }
        rows.push(row);
    }
    LinearSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        boundary_weight,
    }
}

/// The Newton matrix of the phase operator at `u`: the second-difference
/// operator weighted by `(I + (D²ₕu)²)⁻¹` at each node.
pub fn assemble_linearization(u: &ScalarField) -> LinearSystem {
    let stencils = hessian_stencils(&u.grid);
    assemble_linearization_with(u, &stencils)
}

pub fn assemble_linearization_with(u: &ScalarField, stencils: &[HessianStencil]) -> LinearSystem {
    let coeffs: Vec<SymMatrix> = hessians(u, stencils).iter().map(metric_inverse).collect();
    assemble_operator(&u.grid, stencils, &coeffs, &u.boundary_values)
}

/// Discrete Laplacian with the given boundary values.
pub fn assemble_laplacian(grid: &DomainGrid, boundary_values: &[f64]) -> LinearSystem {
    let stencils = hessian_stencils(grid);
    let coeffs = vec![SymMatrix::identity(2); grid.len()];
    assemble_operator(grid, &stencils, &coeffs, boundary_values)
}

/// Solves the system to normwise backward error `tol`.
pub fn solve_linear(sys: &LinearSystem, tol: f64) -> Result<Vec<f64>> {
    sparse::solve(&sys.matrix, &sys.rhs, tol)
}

/// Default number of wide-stencil directions.
pub const DEFAULT_DIRECTIONS: usize = 16;

/// End of one wide-stencil arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArmEnd {
    Node(usize),
    /// Index into [`StencilSet::cutoffs`].
    Cutoff(usize),
}

/// Directional second difference at one node: `w₊u₊ + w₋u₋ − (w₊ + w₋)u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalStencil {
    pub plus: ArmEnd,
    pub minus: ArmEnd,
    pub w_plus: f64,
    pub w_minus: f64,
}

impl DirectionalStencil {
    #[inline]
    pub fn w_center(&self) -> f64 {
        self.w_plus + self.w_minus
    }
}

/// Lattice directions approximating the angles `kπ/m` and, per node, the
/// directional second differences truncated at the boundary.
#[derive(Clone, Debug)]
pub struct StencilSet {
    pub m: usize,
    pub directions: Vec<[i64; 2]>,
    /// Boundary points where arms are cut, with the arm fraction.
    pub cutoffs: Vec<Point>,
    /// `stencils[node * m + d]`.
    pub stencils: Vec<DirectionalStencil>,
    nodes: usize,
    /// Arm ends as indices into `[values, cutoff values]`, parallel to
    /// `stencils`.
    flat: Vec<([u32; 2], [f64; 2])>,
}

/// Primitive lattice vectors closest in angle to `kπ/m`, `k = 0..m`, using
/// the smallest coordinate bound that makes them distinct and within
/// `π/(4m)` of their target angles.
pub fn lattice_directions(m: usize) -> Result<Vec<[i64; 2]>> {
    if m < 4 {
        return Err(Error::PreconditionViolated(format!("need at least 4 directions, got {m}")));
    }
    let tol = std::f64::consts::PI / (4.0 * m as f64);
    for reach in 1..=64i64 {
        let mut dirs = Vec::with_capacity(m);
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let target = std::f64::consts::PI * k as f64 / m as f64;
            let mut best: Option<((f64, i64), [i64; 2])> = None;
            for p in -reach..=reach {
                for q in 0..=reach {
                    if (q == 0 && p <= 0) || gcd(p.unsigned_abs(), q as u64) != 1 {
                        continue;
                    }
                    let ang = (q as f64).atan2(p as f64);
                    let mut err = (ang - target).abs();
                    err = err.min(std::f64::consts::PI - err);
                    let key = (err, p * p + q * q);
                    if best.map_or(true, |(b, _)| key.0 < b.0 - 1e-15 || (key.0 <= b.0 + 1e-15 && key.1 < b.1)) {
                        best = Some((key, [p, q]));
                    }
                }
            }
            let ((err, _), v) = best.expect("reach ≥ 1 has candidates");
            worst = worst.max(err);
            dirs.push(v);
        }
        let mut uniq = dirs.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() == m && worst <= tol + 1e-15 {
            return Ok(dirs);
        }
    }
    Err(Error::PreconditionViolated(format!("no lattice direction set for m = {m}")))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl StencilSet {
    pub fn new(grid: &DomainGrid, m: usize) -> Result<Self> {
        let directions = lattice_directions(m)?;
        let h = grid.h;
        let mut cutoffs = Vec::new();
        let mut stencils = Vec::with_capacity(grid.len() * m);
        for node in &grid.nodes {
            let [i, j] = node.lattice;
            for v in &directions {
                let mut end = |s: i64| -> (ArmEnd, f64) {
                    let d = [(s * v[0]) as f64 * h, (s * v[1]) as f64 * h];
                    if let Some(t) = grid.ray_boundary(node.x, d, 1.0) {
                        if t < 1.0 - 1e-12 || grid.node_at(i + s * v[0], j + s * v[1]).is_none() {
                            cutoffs.push([node.x[0] + t * d[0], node.x[1] + t * d[1]]);
                            return (ArmEnd::Cutoff(cutoffs.len() - 1), t);
                        }
                    }
                    let k = grid
                        .node_at(i + s * v[0], j + s * v[1])
                        .expect("lattice point inside a convex domain along an interior segment");
                    (ArmEnd::Node(k), 1.0)
                };
                let (plus, ap) = end(1);
                let (minus, am) = end(-1);
                let rho2 = ((v[0] * v[0] + v[1] * v[1]) as f64) * h * h;
                stencils.push(DirectionalStencil {
                    plus,
                    minus,
                    w_plus: 2.0 / (rho2 * ap * (ap + am)),
                    w_minus: 2.0 / (rho2 * am * (ap + am)),
                });
            }
        }
        let n = grid.len();
        let index = |e: ArmEnd| match e {
            ArmEnd::Node(k) => k as u32,
            ArmEnd::Cutoff(k) => (n + k) as u32,
        };
        let flat = stencils
            .iter()
            .map(|s| ([index(s.plus), index(s.minus)], [s.w_plus, s.w_minus]))
            .collect();
        Ok(StencilSet {
            m,
            directions,
            cutoffs,
            stencils,
            nodes: n,
            flat,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Boundary data sampled at the arm cutoffs.
    pub fn cutoff_values(&self, phi: &BoundaryData) -> Vec<f64> {
        self.cutoffs.iter().map(|p| phi.eval(*p)).collect()
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[DirectionalStencil] {
        &self.stencils[node * self.m..(node + 1) * self.m]
    }

    /// Directional second differences at a node.
    pub fn second_differences(&self, values: &[f64], cut: &[f64], node: usize) -> Vec<f64> {
        let get = |e: ArmEnd| match e {
            ArmEnd::Node(k) => values[k],
            ArmEnd::Cutoff(k) => cut[k],
        };
        let center = values[node];
        self.at(node)
            .iter()
            .map(|s| s.w_plus * (get(s.plus) - center) + s.w_minus * (get(s.minus) - center))
            .collect()
    }

    /// `arctan(min_θ Δ_θθ u) + arctan(max_θ Δ_θθ u)` from raw values.
    #[inline]
    pub fn phase_value(&self, values: &[f64], cut: &[f64], node: usize) -> f64 {
        let center = values[node];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in self.at(node) {
            let up = match s.plus {
                ArmEnd::Node(k) => values[k],
                ArmEnd::Cutoff(k) => cut[k],
            };
            let um = match s.minus {
                ArmEnd::Node(k) => values[k],
                ArmEnd::Cutoff(k) => cut[k],
            };
            let d = s.w_plus * (up - center) + s.w_minus * (um - center);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        lo.atan() + hi.atan()
    }

    /// Same as [`Self::phase_value`] on the concatenation `ext = [values, cut]`.
    #[inline]
    pub fn phase_value_ext(&self, ext: &[f64], node: usize) -> f64 {
        let center = ext[node];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for ([p, q], [wp, wq]) in &self.flat[node * self.m..(node + 1) * self.m] {
            let d = wp * (ext[*p as usize] - center) + wq * (ext[*q as usize] - center);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        lo.atan() + hi.atan()
    }

    /// Largest center weight over directions at a node; the operator's
    /// Lipschitz constant in the center value is at most twice this.
    pub fn max_center_weight(&self, node: usize) -> f64 {
        self.at(node).iter().map(|s| s.w_center()).fold(0.0, f64::max)
    }
}

/// Monotone wide-stencil phase of `u` at a node.
pub fn wide_stencil_phase(u: &ScalarField, stencils: &StencilSet, node: usize) -> f64 {
    // Only this node's cutoffs are evaluated.
    let mut cut = vec![0.0; stencils.cutoffs.len()];
    for s in stencils.at(node) {
        for e in [s.plus, s.minus] {
            if let ArmEnd::Cutoff(k) = e {
                cut[k] = u.boundary.eval(stencils.cutoffs[k]);
            }
        }
    }
    stencils.phase_value(&u.values, &cut, node)
}

/// Wide-stencil phase at every node.
pub fn wide_stencil_phases(u: &ScalarField, stencils: &StencilSet) -> Vec<f64> {
    let cut = stencils.cutoff_values(&u.boundary);
    (0..u.values.len()).map(|k| stencils.phase_value(&u.values, &cut, k)).collect()
}

/// Discrete Laplacian (trace of the discrete Hessian) at each node.
pub fn discrete_laplacian(u: &ScalarField) -> Vec<f64> {
    let st = hessian_stencils(&u.grid);
    hessians(u, &st).iter().map(|m| m.get(0, 0) + m.get(1, 1)).collect()
}

/// Eigenvalues of the discrete Hessian at each node.
pub fn hessian_spectra(u: &ScalarField) -> Vec<(f64, f64)> {
    let st = hessian_stencils(&u.grid);
    st.iter()
        .map(|s| {
            let (xx, xy, yy) = hessian_from(s, &u.values, &u.boundary_values);
            eig2(xx, xy, yy)
        })
        .collect()
}

/// Indices of nodes of the given kind.
pub fn nodes_of_kind(grid: &DomainGrid, kind: NodeKind) -> Vec<usize> {
    (0..grid.len()).filter(|&k| grid.nodes[k].kind == kind).collect()
}
