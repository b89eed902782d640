//! Convex planar domains, Cartesian grids with boundary intercepts, boundary
//! data, the quadratic barrier pair and boundary mollification.

use std::f64::consts::{PI, TAU};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{critical_phase, phase_bound, PhaseSpec};

pub type Point = [f64; 2];

/// Tolerance on the implicit function for a lattice point to count as a node.
const INSIDE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Ellipse,
}

/// Axis-aligned disk or ellipse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub center: Point,
    pub semi_axes: [f64; 2],
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        Self::disk([0.0, 0.0], 1.0)
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Disk,
            center,
            semi_axes: [radius, radius],
        }
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ellipse,
            center,
            semi_axes: [a, b],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.semi_axes;
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::InvalidDomain(format!("semi-axes {a}, {b} must be positive")));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite center".into()));
        }
        if self.kind == DomainKind::Disk && a != b {
            return Err(Error::InvalidDomain("disk needs equal semi-axes".into()));
        }
        Ok(())
    }

    pub fn min_axis(&self) -> f64 {
        self.semi_axes[0].min(self.semi_axes[1])
    }

    /// `Σ (xᵢ − cᵢ)²/aᵢ² − 1`.
    #[inline]
    pub fn implicit(&self, p: Point) -> f64 {
        let dx = (p[0] - self.center[0]) / self.semi_axes[0];
        let dy = (p[1] - self.center[1]) / self.semi_axes[1];
        dx * dx + dy * dy - 1.0
    }

    pub fn contains(&self, p: Point) -> bool {
        self.implicit(p) < -INSIDE_TOL
    }

    /// Boundary point at parameter angle `t`.
    pub fn boundary_point(&self, t: f64) -> Point {
        [
            self.center[0] + self.semi_axes[0] * t.cos(),
            self.center[1] + self.semi_axes[1] * t.sin(),
        ]
    }

    /// Parameter angle of a point, in `(−π, π]`.
    pub fn parameter_of(&self, p: Point) -> f64 {
        ((p[1] - self.center[1]) / self.semi_axes[1]).atan2((p[0] - self.center[0]) / self.semi_axes[0])
    }

    /// Unit tangent `γ'(t)/|γ'(t)|` (counter-clockwise).
    pub fn tangent(&self, t: f64) -> Point {
        let d = [-self.semi_axes[0] * t.sin(), self.semi_axes[1] * t.cos()];
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    }

    /// Inner unit normal at a boundary point.
    pub fn inner_normal(&self, p: Point) -> Point {
        let g = [
            (p[0] - self.center[0]) / (self.semi_axes[0] * self.semi_axes[0]),
            (p[1] - self.center[1]) / (self.semi_axes[1] * self.semi_axes[1]),
        ];
        let n = g[0].hypot(g[1]);
        [-g[0] / n, -g[1] / n]
    }

    /// Smallest boundary curvature `b/a²`.
    pub fn min_curvature(&self) -> f64 {
        let a = self.semi_axes[0].max(self.semi_axes[1]);
        self.min_axis() / (a * a)
    }

    /// First `t ∈ (0, ∞)` with `q(p + t d) = 0`, for `p` inside.
    pub fn ray_exit(&self, p: Point, d: Point) -> f64 {
        let [a, b] = self.semi_axes;
        let (px, py) = ((p[0] - self.center[0]) / a, (p[1] - self.center[1]) / b);
        let (dx, dy) = (d[0] / a, d[1] / b);
        let qa = dx * dx + dy * dy;
        let qb = 2.0 * (px * dx + py * dy);
        let qc = px * px + py * py - 1.0;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        if qb >= 0.0 {
            -2.0 * qc / (qb + disc)
        } else {
            (-qb + disc) / (2.0 * qa)
        }
    }
}

/// Circular hole removed from the domain (used for annular masks).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: Point,
    pub radius: f64,
}

impl Hole {
    fn distance(&self, p: Point) -> f64 {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1])
    }

    /// First positive `t` at which `p + t d` enters the hole, if any.
    fn ray_entry(&self, p: Point, d: Point) -> Option<f64> {
        let (px, py) = (p[0] - self.center[0], p[1] - self.center[1]);
        let qa = d[0] * d[0] + d[1] * d[1];
        let qb = 2.0 * (px * d[0] + py * d[1]);
        let qc = px * px + py * py - self.radius * self.radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 || qb >= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        // Smaller root, computed stably: both roots positive since qc > 0, qb < 0.
        let t = 2.0 * qc / (-qb + s);
        Some(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Interior,
    NearBoundary,
}

/// Axis directions in neighbor order.
pub const AXIS_DIRS: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Neighbor {
    Node(usize),
    /// Index into the grid's boundary hits.
    Boundary(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub lattice: [i64; 2],
    pub x: Point,
    pub kind: NodeKind,
    pub neighbors: [Neighbor; 4],
}

/// Intersection of an axis ray from a node with the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryHit {
    pub node: usize,
    pub dir: usize,
    /// Distance to the boundary in units of `h`, in `(0, 1]`.
    pub theta: f64,
    pub point: Point,
}

/// Lattice nodes strictly inside the domain, with axis-ray boundary
/// intercepts for the nodes adjacent to the boundary.
#[derive(Clone, Debug)]
pub struct DomainGrid {
    pub spec: DomainSpec,
    pub hole: Option<Hole>,
    pub h: f64,
    pub nodes: Vec<Node>,
    pub hits: Vec<BoundaryHit>,
    lattice_min: [i64; 2],
    lattice_dims: [usize; 2],
    index: Vec<usize>,
}

const NO_NODE: usize = usize::MAX;

/// Classification of an arbitrary lattice point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Inside,
    Exterior,
}

impl DomainGrid {
    /// Whether `p` lies strictly inside the (possibly masked) domain.
    pub fn inside(&self, p: Point) -> bool {
        inside(&self.spec, self.hole.as_ref(), p)
    }

    /// Node index at lattice coordinates, if that point is a node.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        let li = i - self.lattice_min[0];
        let lj = j - self.lattice_min[1];
        if li < 0 || lj < 0 || li as usize >= self.lattice_dims[0] || lj as usize >= self.lattice_dims[1] {
            return None;
        }
        let k = self.index[lj as usize * self.lattice_dims[0] + li as usize];
        (k != NO_NODE).then_some(k)
    }

    pub fn lattice_point(&self, i: i64, j: i64) -> Point {
        [
            self.spec.center[0] + i as f64 * self.h,
            self.spec.center[1] + j as f64 * self.h,
        ]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Interior).count()
    }

    /// First boundary crossing along the ray `p + t d`, `0 < t ≤ max_t`,
    /// considering the outer boundary and the hole.
    pub fn ray_boundary(&self, p: Point, d: Point, max_t: f64) -> Option<f64> {
        let mut t = self.spec.ray_exit(p, d);
        if let Some(hole) = &self.hole {
            if let Some(th) = hole.ray_entry(p, d) {
                t = t.min(th);
            }
        }
        (t <= max_t * (1.0 + 1e-12)).then_some(t.min(max_t))
    }

    /// Implicit-function residual at a boundary point (outer boundary or
    /// hole circle, whichever is closer).
    pub fn boundary_residual(&self, p: Point) -> f64 {
        let q = self.spec.implicit(p).abs();
        match &self.hole {
            Some(hole) => q.min((hole.distance(p) / hole.radius - 1.0).abs()),
            None => q,
        }
    }

    /// Distance from a node to the boundary along its shortest axis arm,
    /// in units of `h` (≥ 1 for interior nodes).
    pub fn axis_distance(&self, node: usize) -> f64 {
        self.nodes[node]
            .neighbors
            .iter()
            .map(|nb| match nb {
                Neighbor::Node(_) => f64::INFINITY,
                Neighbor::Boundary(k) => self.hits[*k].theta,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance from `p` to the outer boundary, by dense sampling
    /// of the boundary curve followed by local refinement.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let spec = &self.spec;
        let n = 256;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..n {
            let t = TAU * k as f64 / n as f64;
            let b = spec.boundary_point(t);
            let d = (b[0] - p[0]).hypot(b[1] - p[1]);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        let mut step = TAU / n as f64;
        for _ in 0..40 {
            for cand in [best_t - step, best_t + step] {
                let b = spec.boundary_point(cand);
                let d = (b[0] - p[0]).hypot(b[1] - p[1]);
                if d < best {
                    best = d;
                    best_t = cand;
                }
            }
            step *= 0.5;
        }
        match &self.hole {
            Some(hole) => best.min(hole.distance(p) - hole.radius),
            None => best,
        }
    }
}

fn inside(spec: &DomainSpec, hole: Option<&Hole>, p: Point) -> bool {
    spec.contains(p) && hole.map_or(true, |h| h.distance(p) > h.radius * (1.0 + INSIDE_TOL))
}

/// Classifies a lattice point against the domain.
pub fn classify_point(spec: &DomainSpec, p: Point) -> PointClass {
    if spec.contains(p) {
        PointClass::Inside
    } else {
        PointClass::Exterior
    }
}

/// Builds the node set of `spec` on the lattice `center + h ℤ²`.
pub fn build_grid(spec: &DomainSpec, h: f64) -> Result<DomainGrid> {
    build_grid_masked(spec, h, None)
}

/// As [`build_grid`], additionally removing a circular hole.
pub fn build_grid_masked(spec: &DomainSpec, h: f64, hole: Option<Hole>) -> Result<DomainGrid> {
    spec.validate()?;
    let limit = spec.min_axis() / 4.0;
    if !(h > 0.0 && h.is_finite()) || h > limit {
        return Err(Error::GridTooCoarse { h, limit });
    }
    if let Some(hl) = &hole {
        if !(hl.radius > 0.0) || !spec.contains(hl.center) {
            return Err(Error::InvalidDomain("hole must be a positive disk inside the domain".into()));
        }
    }
    let ni = (spec.semi_axes[0] / h).ceil() as i64 + 1;
    let nj = (spec.semi_axes[1] / h).ceil() as i64 + 1;
    let lattice_min = [-ni, -nj];
    let dims = [(2 * ni + 1) as usize, (2 * nj + 1) as usize];
    let mut index = vec![NO_NODE; dims[0] * dims[1]];
    let mut nodes = Vec::new();
    let point = |i: i64, j: i64| [spec.center[0] + i as f64 * h, spec.center[1] + j as f64 * h];

    for j in -nj..=nj {
        for i in -ni..=ni {
            let x = point(i, j);
            if inside(spec, hole.as_ref(), x) {
                index[(j + nj) as usize * dims[0] + (i + ni) as usize] = nodes.len();
                nodes.push(Node {
                    lattice: [i, j],
                    x,
                    kind: NodeKind::Interior,
                    neighbors: [Neighbor::Node(0); 4],
                });
            }
        }
    }

    let mut grid = DomainGrid {
        spec: spec.clone(),
        hole,
        h,
        nodes,
        hits: Vec::new(),
        lattice_min,
        lattice_dims: dims,
        index,
    };

    let mut hits = Vec::new();
    for k in 0..grid.nodes.len() {
        let [i, j] = grid.nodes[k].lattice;
        let x = grid.nodes[k].x;
        let mut near = false;
        for (dir, step) in AXIS_DIRS.iter().enumerate() {
            let nb = match grid.node_at(i + step[0], j + step[1]) {
                Some(m) => Neighbor::Node(m),
                None => {
                    near = true;
                    let d = [step[0] as f64, step[1] as f64];
                    let t = grid
                        .ray_boundary(x, [d[0] * h, d[1] * h], 1.0)
                        .unwrap_or(1.0);
                    let point = [x[0] + t * h * d[0], x[1] + t * h * d[1]];
                    hits.push(BoundaryHit {
                        node: k,
                        dir,
                        theta: t,
                        point,
                    });
                    Neighbor::Boundary(hits.len() - 1)
                }
            };
            grid.nodes[k].neighbors[dir] = nb;
        }
        if near {
            grid.nodes[k].kind = NodeKind::NearBoundary;
        }
    }
    grid.hits = hits;
    Ok(grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C0,
    C2,
    C4,
}

/// Dirichlet data: a function evaluated at boundary points.
#[derive(Clone)]
pub struct BoundaryData {
    eval: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub smoothness: Smoothness,
    pub mollify_radius: Option<f64>,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("smoothness", &self.smoothness)
            .field("mollify_radius", &self.mollify_radius)
            .finish_non_exhaustive()
    }
}

impl BoundaryData {
    pub fn new(smoothness: Smoothness, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryData {
            eval: Arc::new(f),
            smoothness,
            mollify_radius: None,
        }
    }

    pub fn constant(k: f64) -> Self {
        Self::new(Smoothness::C4, move |_| k)
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        (self.eval)(p)
    }

    /// Data depending on the boundary parameter angle of `spec`.
    pub fn from_angle(
        spec: &DomainSpec,
        smoothness: Smoothness,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let spec = spec.clone();
        Self::new(smoothness, move |p| f(spec.parameter_of(p)))
    }

    /// Pointwise `self − other`.
    pub fn minus(&self, other: &BoundaryData) -> BoundaryData {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.smoothness.min_with(other.smoothness), move |p| a.eval(p) - b.eval(p))
    }

    /// The same data with evaluations cached per point; for expensive data
    /// queried repeatedly at a bounded set of points.
    pub fn memoized(&self) -> BoundaryData {
        let base = self.clone();
        let cache: Mutex<HashMap<[u64; 2], f64>> = Mutex::new(HashMap::new());
        let mut out = Self::new(self.smoothness, move |p| {
            let key = [p[0].to_bits(), p[1].to_bits()];
            if let Some(v) = cache.lock().unwrap().get(&key) {
                return *v;
            }
            let v = base.eval(p);
            cache.lock().unwrap().insert(key, v);
            v
        });
        out.mollify_radius = self.mollify_radius;
        out
    }

    /// Pointwise `−self`.
    pub fn negated(&self) -> BoundaryData {
        let a = self.clone();
        Self::new(self.smoothness, move |p| -a.eval(p))
    }
}

impl Smoothness {
    fn min_with(self, other: Smoothness) -> Smoothness {
        use Smoothness::*;
        match (self, other) {
            (C0, _) | (_, C0) => C0,
            (C2, _) | (_, C2) => C2,
            _ => C4,
        }
    }
}

/// Largest `|a − b|` over `samples` equally spaced boundary parameters.
pub fn boundary_sup_distance(spec: &DomainSpec, a: &BoundaryData, b: &BoundaryData, samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let p = spec.boundary_point(TAU * k as f64 / samples as f64);
            (a.eval(p) - b.eval(p)).abs()
        })
        .fold(0.0, f64::max)
}

/// Which truncated phase interval to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMode {
    /// `((n−2)π/2 + δ, nπ/2 − ε)`.
    Supercritical,
    /// `(−nπ/2 + ε′, nπ/2 − ε′)`.
    General,
}

/// Lower and upper truncated phase values bracketing the phase range.
pub fn truncated_phase_bounds(spec: &PhaseSpec, mode: BoundsMode) -> (f64, f64) {
    let n = spec.dim;
    let top = phase_bound(n) - spec.eps_prime;
    match mode {
        BoundsMode::Supercritical => (critical_phase(n) + spec.delta, top),
        BoundsMode::General => (-phase_bound(n) + spec.eps_prime, top),
    }
}

/// `½ xᵀ H x + g·x + c` with `H = s I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoQuadratic {
    pub curvature: f64,
    pub grad: Point,
    pub constant: f64,
}

impl IsoQuadratic {
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        0.5 * self.curvature * (x[0] * x[0] + x[1] * x[1]) + self.grad[0] * x[0] + self.grad[1] * x[1] + self.constant
    }
}

/// Quadratic sub/supersolution pair touching the boundary data at an anchor.
///
/// In the local frame (anchor at the origin, `yₙ` along the inner normal,
/// `y₁` along the tangent) the barriers are
/// `B∓ = φ(x₀) + p y₁ ∓ C yₙ + ½|y|² tan(ψ±/n)` where `p` is the tangential
/// slope of the data and `ψ+ = ψ̄`, `ψ− = ψ_`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BarrierPair {
    pub anchor: Point,
    pub normal: Point,
    pub tangent: Point,
    pub tangential_slope: f64,
    pub constant_c: f64,
    pub lower: IsoQuadratic,
    pub upper: IsoQuadratic,
}

/// Boundary samples used to size the barrier constant.
pub const BARRIER_SAMPLES: usize = 1024;
const BARRIER_INFLATION: f64 = 0.1;
const BARRIER_C_MAX: f64 = 1e8;

/// Builds the barrier pair at a boundary `anchor` for the phase bounds
/// `(ψ_, ψ̄)` in dimension 2.
pub fn barrier_at(anchor: Point, grid: &DomainGrid, phi: &BoundaryData, bounds: (f64, f64)) -> Result<BarrierPair> {
    let spec = &grid.spec;
    if spec.implicit(anchor).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "anchor {anchor:?} is not on the boundary"
        )));
    }
    let n = 2.0;
    let (psi_lo, psi_hi) = bounds;
    if !(psi_lo.abs() < phase_bound(2) && psi_hi.abs() < phase_bound(2)) {
        return Err(Error::PhaseOutOfRange {
            value: if psi_lo.abs() >= phase_bound(2) { psi_lo } else { psi_hi },
            lower: -phase_bound(2),
            upper: phase_bound(2),
        });
    }
    let s_lower = (psi_hi / n).tan();
    let s_upper = (psi_lo / n).tan();

    let t0 = spec.parameter_of(anchor);
    let normal = spec.inner_normal(anchor);
    let tangent = spec.tangent(t0);
    let phi0 = phi.eval(anchor);

    // Tangential slope by a central difference along the boundary.
    let dt = 1e-6;
    let pa = spec.boundary_point(t0 + dt);
    let pb = spec.boundary_point(t0 - dt);
    let chord = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
    let slope = (phi.eval(pa) - phi.eval(pb)) / chord;

    let local = |x: Point| {
        let d = [x[0] - anchor[0], x[1] - anchor[1]];
        (
            d[0] * tangent[0] + d[1] * tangent[1],
            d[0] * normal[0] + d[1] * normal[1],
            d[0] * d[0] + d[1] * d[1],
        )
    };

    let cutoff = grid.h * grid.h;
    let mut c_min = f64::NEG_INFINITY;
    for k in 0..BARRIER_SAMPLES {
        let x = spec.boundary_point(TAU * k as f64 / BARRIER_SAMPLES as f64);
        let (y1, yn, r2) = local(x);
        if yn < cutoff {
            continue;
        }
        let f = phi.eval(x);
        let affine = phi0 + slope * y1;
        let need_lower = (affine + 0.5 * s_lower * r2 - f) / yn;
        let need_upper = (f - affine - 0.5 * s_upper * r2) / yn;
        c_min = c_min.max(need_lower).max(need_upper);
    }
    if !c_min.is_finite() || c_min > BARRIER_C_MAX {
        return Err(Error::BarrierFailure(format!(
            "barrier constant {c_min} at anchor {anchor:?} is unbounded"
        )));
    }
    let constant_c = c_min + BARRIER_INFLATION * c_min.abs();

    // Global coefficients of φ0 + p T·(x−x0) ∓ C N·(x−x0) + ½ s |x−x0|².
    let global = |s: f64, sign: f64| {
        let lin = [
            slope * tangent[0] + sign * constant_c * normal[0],
            slope * tangent[1] + sign * constant_c * normal[1],
        ];
        IsoQuadratic {
            curvature: s,
            grad: [lin[0] - s * anchor[0], lin[1] - s * anchor[1]],
            constant: phi0 - lin[0] * anchor[0] - lin[1] * anchor[1]
                + 0.5 * s * (anchor[0] * anchor[0] + anchor[1] * anchor[1]),
        }
    };
    Ok(BarrierPair {
        anchor,
        normal,
        tangent,
        tangential_slope: slope,
        constant_c,
        lower: global(s_lower, -1.0),
        upper: global(s_upper, 1.0),
    })
}

/// `count` anchors equally spaced in the boundary parameter.
pub fn anchor_set(spec: &DomainSpec, count: usize) -> Vec<Point> {
    (0..count)
        .map(|k| spec.boundary_point(TAU * k as f64 / count as f64))
        .collect()
}

/// Arc-length table of the boundary curve.
#[derive(Clone, Debug)]
pub struct ArcLength {
    spec: DomainSpec,
    params: Vec<f64>,
    lengths: Vec<f64>,
}

const ARC_TABLE: usize = 4096;

impl ArcLength {
    pub fn new(spec: &DomainSpec) -> Self {
        let speed = |t: f64| (spec.semi_axes[0] * t.sin()).hypot(spec.semi_axes[1] * t.cos());
        let mut params = Vec::with_capacity(ARC_TABLE + 1);
        let mut lengths = Vec::with_capacity(ARC_TABLE + 1);
        let dt = TAU / ARC_TABLE as f64;
        let mut s = 0.0;
        params.push(0.0);
        lengths.push(0.0);
        for k in 0..ARC_TABLE {
            let a = k as f64 * dt;
            s += dt / 6.0 * (speed(a) + 4.0 * speed(a + 0.5 * dt) + speed(a + dt));
            params.push(a + dt);
            lengths.push(s);
        }
        ArcLength {
            spec: spec.clone(),
            params,
            lengths,
        }
    }

    pub fn perimeter(&self) -> f64 {
        *self.lengths.last().unwrap()
    }

    fn speed(&self, t: f64) -> f64 {
        (self.spec.semi_axes[0] * t.sin()).hypot(self.spec.semi_axes[1] * t.cos())
    }

    /// Arc length from parameter 0 to `t ∈ [0, 2π)`.
    pub fn length_at(&self, t: f64) -> f64 {
        let t = t.rem_euclid(TAU);
        let k = ((t / TAU * ARC_TABLE as f64) as usize).min(ARC_TABLE - 1);
        let (a, sa) = (self.params[k], self.lengths[k]);
        let m = 0.5 * (a + t);
        sa + (t - a) / 6.0 * (self.speed(a) + 4.0 * self.speed(m) + self.speed(t))
    }

    /// Parameter at arc length `s` (taken modulo the perimeter).
    pub fn param_at(&self, s: f64) -> f64 {
        let per = self.perimeter();
        let s = s.rem_euclid(per);
        let k = match self.lengths.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(k) => return self.params[k],
            Err(k) => k.saturating_sub(1).min(ARC_TABLE - 1),
        };
        let (a, b) = (self.params[k], self.params[k + 1]);
        let (sa, sb) = (self.lengths[k], self.lengths[k + 1]);
        let mut t = a + (b - a) * (s - sa) / (sb - sa);
        for _ in 0..3 {
            t -= (self.length_at(t) - s) / self.speed(t);
        }
        t
    }
}

const MOLLIFY_NODES: usize = 256;

/// Arc-length convolution of boundary data with the normalized bump
/// `(1 − (s/r)²)³` supported on `|s| ≤ r`.
pub fn mollify_boundary(phi: &BoundaryData, spec: &DomainSpec, radius: f64) -> Result<BoundaryData> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::PreconditionViolated(format!("mollifier radius {radius} must be positive")));
    }
    let arc = ArcLength::new(spec);
    // Simpson nodes on [−r, r] with kernel weights, normalized discretely
    // so constants are reproduced exactly.
    let m = MOLLIFY_NODES;
    let ds = 2.0 * radius / m as f64;
    let mut offsets = Vec::with_capacity(m + 1);
    let mut weights = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let s = -radius + k as f64 * ds;
        let simpson = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let z = s / radius;
        let w = simpson * (1.0 - z * z).max(0.0).powi(3);
        if w > 0.0 {
            offsets.push(s);
            weights.push(w);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let spec = spec.clone();
    let base = phi.clone();
    let mut out = BoundaryData::new(Smoothness::C4, move |p| {
        let s0 = arc.length_at(spec.parameter_of(p));
        offsets
            .iter()
            .zip(&weights)
            .map(|(ds, w)| w * base.eval(spec.boundary_point(arc.param_at(s0 + ds))))
            .sum()
    });
    out.mollify_radius = Some(radius);
    Ok(out.memoized())
}

/// Uniform distance between `phi` and its mollification, sampled densely.
pub fn mollification_error(phi: &BoundaryData, mollified: &BoundaryData, spec: &DomainSpec) -> f64 {
    boundary_sup_distance(spec, phi, mollified, 2048)
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
