//! The Lagrangian phase operator `F(D²u) = Σ arctan λᵢ` on small symmetric
//! matrices, together with its polynomial form, its derivative, phase-range
//! classification and the algebraic facts about supercritical spectra.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 4;

const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix of dimension 2..=4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, rejecting asymmetric or
    /// non-finite input.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidMatrix(format!("dimension {dim} not in 2..=4")));
        }
        let mut a = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            a[i][..dim].copy_from_slice(row);
        }
        let m = SymMatrix { dim, a };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim), "dimension {dim} not in 2..=4");
        SymMatrix {
            dim,
            a: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = s;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.a[i][i] = *v;
        }
        m
    }

    /// 2×2 matrix `[[xx, xy], [xy, yy]]`.
    pub fn new2(xx: f64, xy: f64, yy: f64) -> Self {
        let mut m = Self::zeros(2);
        m.a[0][0] = xx;
        m.a[0][1] = xy;
        m.a[1][0] = xy;
        m.a[1][1] = yy;
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let v = self.a[i][j];
                if !v.is_finite() {
                    return Err(Error::InvalidMatrix(format!("non-finite entry at ({i}, {j})")));
                }
                if v != self.a[j][i] {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        self.axpy(1.0, other)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] += s * other.a[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        let mut m = *self;
        for row in m.a.iter_mut().take(self.dim) {
            for v in row.iter_mut().take(self.dim) {
                *v *= s;
            }
        }
        m
    }

    /// Frobenius pairing `Σᵢⱼ aᵢⱼ bᵢⱼ`.
    pub fn frobenius(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.a[i][j] * other.a[i][j];
            }
        }
        s
    }

    /// `Qᵀ M Q` for a square `q` given row-major.
    pub fn congruence(&self, q: &[[f64; MAX_DIM]; MAX_DIM]) -> SymMatrix {
        let n = self.dim;
        let mut t = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                t[i][j] = (0..n).map(|k| self.a[i][k] * q[k][j]).sum();
            }
        }
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[k][i] * t[k][j]).sum();
                m.a[i][j] = v;
                m.a[j][i] = v;
            }
        }
        m
    }

    fn square(&self) -> SymMatrix {
        let n = self.dim;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| self.a[i][k] * self.a[k][j]).sum();
                m.a[i][j] = v;
                m.a[j][i] = v;
            }
        }
        m
    }

    fn to_vec(self) -> Vec<f64> {
        let n = self.dim;
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n..(i + 1) * n].copy_from_slice(&self.a[i][..n]);
        }
        v
    }
}

/// Eigenvalues sorted in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts the given values descending.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Σ arctan λᵢ`.
    pub fn phase(&self) -> f64 {
        self.values.iter().map(|l| l.atan()).sum()
    }
}

/// Eigenvalues of a symmetric matrix, sorted descending.
///
/// Dimension 2 uses the closed-form quadratic roots; larger dimensions use
/// cyclic Jacobi rotations.
pub fn eig_sym(m: &SymMatrix) -> Result<Spectrum> {
    m.validate()?;
    if m.dim == 2 {
        let (l1, l2) = eig2(m.a[0][0], m.a[0][1], m.a[1][1]);
        return Ok(Spectrum { values: vec![l1, l2] });
    }
    let (vals, _) = jacobi_eigen(&m.to_vec(), m.dim);
    Ok(Spectrum::new(vals))
}

/// Closed-form eigenvalues of `[[a, b], [b, c]]`, larger first.
#[inline]
pub(crate) fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    let det = a * c - b * b;
    // The root of larger magnitude is computed directly, the other from the
    // determinant, which avoids cancellation.
    if mean >= 0.0 {
        let l1 = mean + r;
        if l1 == 0.0 {
            (0.0, 0.0)
        } else {
            (l1, det / l1)
        }
    } else {
        let l2 = mean - r;
        (det / l2, l2)
    }
}

/// Cyclic Jacobi eigen-decomposition of a dense symmetric `n × n` matrix
/// given row-major. Returns unsorted eigenvalues and the eigenvector matrix
/// (columns, row-major storage).
pub(crate) fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Lagrangian phase `Σ arctan λᵢ(m)`.
pub fn phase(m: &SymMatrix) -> Result<f64> {
    if m.dim == 2 {
        m.validate()?;
        return Ok(phase2(m.a[0][0], m.a[0][1], m.a[1][1]));
    }
    Ok(eig_sym(m)?.phase())
}

/// Phase of the 2×2 matrix `[[a, b], [b, c]]` without validation.
#[inline]
pub(crate) fn phase2(a: f64, b: f64, c: f64) -> f64 {
    let (l1, l2) = eig2(a, b, c);
    l1.atan() + l2.atan()
}

/// Elementary symmetric polynomial `σ_k` of the spectrum (`σ₀ = 1`).
pub fn sigma_k(s: &Spectrum, k: usize) -> Result<f64> {
    let n = s.dim();
    if k > n {
        return Err(Error::InvalidOrder { k, dim: n });
    }
    Ok(elementary_symmetric(s.values())[k])
}

/// All elementary symmetric polynomials `σ₀..=σₙ` via the product
/// `Π (1 + λᵢ t)` expanded coefficient by coefficient.
pub(crate) fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (i, &l) in values.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

/// `cos c Σ (−1)ᵏ σ_{2k+1} − sin c Σ (−1)ᵏ σ_{2k}`, which vanishes exactly
/// when the phase equals `c` modulo π.
pub fn polynomial_residual(m: &SymMatrix, c: f64) -> Result<f64> {
    let s = eig_sym(m)?;
    let e = elementary_symmetric(s.values());
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, sk) in e.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            even += sign * sk;
        } else {
            odd += sign * sk;
        }
    }
    Ok(c.cos() * odd - c.sin() * even)
}

/// `(I + m²)⁻¹`, the inverse induced metric. This is also the derivative of
/// the phase with respect to the matrix entries.
pub fn metric_inverse(m: &SymMatrix) -> SymMatrix {
    let n = m.dim;
    let g = SymMatrix::identity(n).add(&m.square());
    let mut aug = [[0.0; 2 * MAX_DIM]; MAX_DIM];
    for i in 0..n {
        aug[i][..n].copy_from_slice(&g.a[i][..n]);
        aug[i][n + i] = 1.0;
    }
    // g is symmetric positive definite with eigenvalues ≥ 1, so no pivoting.
    for col in 0..n {
        let p = aug[col][col];
        for v in aug[col].iter_mut().take(2 * n) {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = aug[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (aug[i][n + j] + aug[j][n + i]);
            out.a[i][j] = v;
            out.a[j][i] = v;
        }
    }
    out
}

/// `(n − 2)π/2`.
pub fn critical_phase(dim: usize) -> f64 {
    (dim as f64 - 2.0) * FRAC_PI_2
}

/// `nπ/2`, the supremum of `|phase|`.
pub fn phase_bound(dim: usize) -> f64 {
    dim as f64 * FRAC_PI_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseClass {
    Subcritical,
    Critical,
    Supercritical,
}

/// Sampled phase function: one constant, or one value per grid node.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSamples {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl PhaseSamples {
    #[inline]
    pub fn at(&self, node: usize) -> f64 {
        match self {
            PhaseSamples::Constant(c) => *c,
            PhaseSamples::Nodal(v) => v[node],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PhaseSamples::Constant(_))
    }

    fn iter(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            PhaseSamples::Constant(c) => Box::new(std::iter::once(*c)),
            PhaseSamples::Nodal(v) => Box::new(v.iter().copied()),
        }
    }
}

/// A phase function with its range classification.
///
/// `delta` is the supercritical margin `min|ψ| − (n−2)π/2` (zero when not
/// positive); `eps_prime` is the distance `nπ/2 − max|ψ|` to the edge of
/// the admissible range. A negative phase range is handled by the symmetry
/// `u ↦ −u` and flagged as `mirrored`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpec {
    pub dim: usize,
    pub samples: PhaseSamples,
    pub min: f64,
    pub max: f64,
    pub delta: f64,
    pub eps_prime: f64,
    pub classification: PhaseClass,
    pub mirrored: bool,
}

impl PhaseSpec {
    /// Replaces `eps_prime` by a smaller positive margin.
    pub fn with_eps_prime(mut self, eps_prime: f64) -> Result<Self> {
        if !(eps_prime > 0.0 && eps_prime <= self.eps_prime) {
            return Err(Error::PreconditionViolated(format!(
                "eps' = {eps_prime} must lie in (0, {}]",
                self.eps_prime
            )));
        }
        self.eps_prime = eps_prime;
        Ok(self)
    }

    /// The same spec with every sample negated.
    pub fn negated(&self) -> PhaseSpec {
        let samples = match &self.samples {
            PhaseSamples::Constant(c) => PhaseSamples::Constant(-c),
            PhaseSamples::Nodal(v) => PhaseSamples::Nodal(v.iter().map(|x| -x).collect()),
        };
        PhaseSpec {
            samples,
            min: -self.max,
            max: -self.min,
            mirrored: !self.mirrored,
            ..self.clone()
        }
    }
}

/// Default absolute tolerance for classification boundaries.
pub const CLASSIFY_TOL: f64 = 1e-12;

/// Computes range margins and the critical/supercritical classification.
pub fn classify_phase(samples: PhaseSamples, dim: usize, tol: f64) -> Result<PhaseSpec> {
    let bound = phase_bound(dim);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut count = 0usize;
    for v in samples.iter() {
        if !v.is_finite() || v.abs() >= bound {
            return Err(Error::PhaseOutOfRange {
                value: v,
                lower: -bound,
                upper: bound,
            });
        }
        min = min.min(v);
        max = max.max(v);
        count += 1;
    }
    if count == 0 {
        return Err(Error::PreconditionViolated("empty phase sample set".into()));
    }
    let crit = critical_phase(dim);
    let positive = min >= crit - tol;
    let negative = max <= -crit + tol;
    let (mirrored, margin) = if positive {
        (false, min - crit)
    } else if negative {
        (true, -max - crit)
    } else {
        (false, f64::NEG_INFINITY)
    };
    let classification = if margin > tol {
        PhaseClass::Supercritical
    } else if margin >= -tol {
        PhaseClass::Critical
    } else {
        PhaseClass::Subcritical
    };
    let delta = if classification == PhaseClass::Supercritical {
        margin
    } else {
        0.0
    };
    Ok(PhaseSpec {
        dim,
        samples,
        min,
        max,
        delta,
        eps_prime: bound - min.abs().max(max.abs()),
        classification,
        mirrored,
    })
}

/// Outcome of checking the four algebraic properties of spectra with
/// phase at least critical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma21Report {
    /// `min(λ_{n−1}, λ_{n−1} − |λₙ|)`.
    pub ordering_margin: f64,
    /// `λ₁ + (n−1)λₙ`.
    pub trace_margin: f64,
    /// `min σ_k` over `1 ≤ k ≤ n−1`.
    pub sigma_margin: f64,
    /// `λₙ + cot δ`; absent when `δ = 0`.
    pub semiconvex_margin: Option<f64>,
    pub passes: [bool; 4],
}

impl Lemma21Report {
    pub fn all_pass(&self) -> bool {
        self.passes.iter().all(|p| *p)
    }

    /// Margins as an array, `+∞` for an unchecked property.
    pub fn margins(&self) -> [f64; 4] {
        [
            self.ordering_margin,
            self.trace_margin,
            self.sigma_margin,
            self.semiconvex_margin.unwrap_or(f64::INFINITY),
        ]
    }
}

/// Checks the ordering, trace, σ_k-positivity and semiconvexity bounds
/// satisfied by spectra whose phase is at least `(n−2)π/2`.
pub fn lemma21_check(s: &Spectrum, psi_min: f64, delta: f64) -> Result<Lemma21Report> {
    let n = s.dim();
    if n < 2 {
        return Err(Error::PreconditionViolated("spectrum dimension < 2".into()));
    }
    let crit = critical_phase(n);
    if psi_min < crit - CLASSIFY_TOL {
        return Err(Error::PreconditionViolated(format!(
            "phase {psi_min} below critical value {crit}"
        )));
    }
    let l = s.values();
    let l_first = l[0];
    let l_penult = l[n - 2];
    let l_last = l[n - 1];
    let ordering_margin = l_penult.min(l_penult - l_last.abs());
    let trace_margin = l_first + (n as f64 - 1.0) * l_last;
    let e = elementary_symmetric(l);
    let sigma_margin = e[1..n].iter().copied().fold(f64::INFINITY, f64::min);
    let semiconvex_margin = (delta > 0.0).then(|| l_last + 1.0 / delta.tan());
    let passes = [
        l_penult > 0.0 && l_penult >= l_last.abs(),
        trace_margin >= 0.0,
        sigma_margin >= 0.0,
        semiconvex_margin.map_or(true, |m| m >= 0.0),
    ];
    Ok(Lemma21Report {
        ordering_margin,
        trace_margin,
        sigma_margin,
        semiconvex_margin,
        passes,
    })
}

/// Symmetric matrix with a diagonal leading block, a border column/row and
/// a (large) corner entry.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderedMatrix {
    pub base: Vec<f64>,
    pub border: Vec<f64>,
    pub corner: f64,
}

impl BorderedMatrix {
    pub fn new(base: Vec<f64>, border: Vec<f64>, corner: f64) -> Result<Self> {
        if base.len() != border.len() || base.is_empty() {
            return Err(Error::InvalidMatrix(format!(
                "base has {} entries, border {}",
                base.len(),
                border.len()
            )));
        }
        Ok(BorderedMatrix {
            base,
            border,
            corner,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.len() + 1
    }

    /// Row-major dense assembly.
    pub fn assemble(&self) -> Vec<f64> {
        let n = self.dim();
        let last = n - 1;
        let mut m = vec![0.0; n * n];
        for (i, (&b, &a)) in self.base.iter().zip(&self.border).enumerate() {
            m[i * n + i] = b;
            m[i * n + last] = a;
            m[last * n + i] = a;
        }
        m[last * n + last] = self.corner;
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BorderedDrift {
    /// `|λᵢ(M) − λ′ᵢ|`, matched in descending order.
    pub drift: Vec<f64>,
    /// `|λ_corner(M) − a|`.
    pub corner_gap: f64,
}

/// Distance of the eigenvalues of a bordered matrix from its diagonal
/// block and corner.
pub fn bordered_eig_drift(b: &BorderedMatrix) -> Result<BorderedDrift> {
    if b.base.iter().chain(&b.border).any(|v| !v.is_finite()) || !b.corner.is_finite() {
        return Err(Error::InvalidMatrix("non-finite bordered matrix".into()));
    }
    let (mut vals, _) = jacobi_eigen(&b.assemble(), b.dim());
    let nearest = vals
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - b.corner).abs().total_cmp(&(y.1 - b.corner).abs()))
        .map(|(i, _)| i)
        .expect("nonempty");
    let corner_eig = vals.swap_remove(nearest);
    vals.sort_by(|x, y| y.total_cmp(x));
    let mut base = b.base.clone();
    base.sort_by(|x, y| y.total_cmp(x));
    Ok(BorderedDrift {
        drift: vals.iter().zip(&base).map(|(l, lp)| (l - lp).abs()).collect(),
        corner_gap: (corner_eig - b.corner).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eig_examples() {
        let s = eig_sym(&SymMatrix::identity(2)).unwrap();
        assert_eq!(s.values(), &[1.0, 1.0]);
        let s = eig_sym(&SymMatrix::new2(0.0, 1.0, 0.0)).unwrap();
        assert!(close(s.values()[0], 1.0, 1e-15) && close(s.values()[1], -1.0, 1e-15));
        // λ² − 4λ + 3 = (λ − 3)(λ − 1)
        let s = eig_sym(&SymMatrix::new2(2.0, 1.0, 2.0)).unwrap();
        assert!(close(s.values()[0], 3.0, 1e-14) && close(s.values()[1], 1.0, 1e-14));
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut m = SymMatrix::identity(3);
        m.set(0, 1, f64::NAN);
        assert!(matches!(eig_sym(&m), Err(Error::InvalidMatrix(_))));
        assert!(SymMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]).is_err());
    }

    #[test]
    fn jacobi_residual_per_pair() {
        let a = [4.0, 1.0, -2.0, 0.5, 1.0, 3.0, 0.3, -1.0, -2.0, 0.3, -1.0, 2.0, 0.5, -1.0, 2.0, 0.7];
        let (vals, v) = jacobi_eigen(&a, 4);
        for k in 0..4 {
            let mut r = 0.0f64;
            for i in 0..4 {
                let mv: f64 = (0..4).map(|j| a[i * 4 + j] * v[j * 4 + k]).sum();
                r = r.max((mv - vals[k] * v[i * 4 + k]).abs());
            }
            assert!(r <= 1e-12, "pair {k} residual {r}");
        }
    }

    #[test]
    fn small_eigenvalue_without_cancellation() {
        let (l1, l2) = eig2(1e8, 0.0, 1e-8);
        assert_eq!(l1, 1e8);
        assert!(close(l2, 1e-8, 1e-22));
    }

    #[test]
    fn phase_examples() {
        assert!(close(phase(&SymMatrix::identity(2)).unwrap(), PI / 2.0, 1e-15));
        assert_eq!(phase(&SymMatrix::zeros(3)).unwrap(), 0.0);
        assert!(close(phase(&SymMatrix::diag(&[2.0, 0.5])).unwrap(), PI / 2.0, 1e-15));
    }

    #[test]
    fn sigma_examples() {
        let s = Spectrum::new(vec![1.0, 1.0]);
        assert_eq!(sigma_k(&s, 2).unwrap(), 1.0);
        assert_eq!(sigma_k(&s, 0).unwrap(), 1.0);
        assert_eq!(sigma_k(&Spectrum::new(vec![2.0, 0.5]), 1).unwrap(), 2.5);
        assert_eq!(sigma_k(&Spectrum::new(vec![3.0, 1.0]), 2).unwrap(), 3.0);
        assert_eq!(
            sigma_k(&s, 3),
            Err(Error::InvalidOrder { k: 3, dim: 2 })
        );
    }

    #[test]
    fn polynomial_residual_examples() {
        let r = polynomial_residual(&SymMatrix::identity(2), PI / 2.0).unwrap();
        assert!(r.abs() < 1e-15);
        assert_eq!(polynomial_residual(&SymMatrix::zeros(2), 0.0).unwrap(), 0.0);
        let r = polynomial_residual(&SymMatrix::diag(&[2.0, 0.5]), PI / 2.0).unwrap();
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn metric_inverse_examples() {
        assert_eq!(metric_inverse(&SymMatrix::zeros(2)), SymMatrix::identity(2));
        assert_eq!(
            metric_inverse(&SymMatrix::identity(2)),
            SymMatrix::scaled_identity(2, 0.5)
        );
        let g = metric_inverse(&SymMatrix::diag(&[2.0, 0.5]));
        assert!(close(g.get(0, 0), 0.2, 1e-15));
        assert!(close(g.get(1, 1), 0.8, 1e-15));
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn classify_examples() {
        let s = classify_phase(PhaseSamples::Constant(PI / 2.0), 2, CLASSIFY_TOL).unwrap();
        assert_eq!(s.classification, PhaseClass::Supercritical);
        assert!(close(s.delta, PI / 2.0, 1e-15));
        assert!(close(s.eps_prime, PI / 2.0, 1e-15));

        let s = classify_phase(PhaseSamples::Constant(PI / 2.0), 3, CLASSIFY_TOL).unwrap();
        assert_eq!(s.classification, PhaseClass::Critical);
        assert_eq!(s.delta, 0.0);

        let s = classify_phase(PhaseSamples::Constant(0.0), 3, CLASSIFY_TOL).unwrap();
        assert_eq!(s.classification, PhaseClass::Subcritical);

        let s = classify_phase(PhaseSamples::Nodal(vec![-2.0, -1.8]), 2, CLASSIFY_TOL).unwrap();
        assert_eq!(s.classification, PhaseClass::Supercritical);
        assert!(s.mirrored);
        assert!(close(s.delta, 1.8, 1e-15));

        assert!(matches!(
            classify_phase(PhaseSamples::Nodal(vec![0.0, 3.2]), 2, CLASSIFY_TOL),
            Err(Error::PhaseOutOfRange { .. })
        ));
        assert!(classify_phase(PhaseSamples::Nodal(vec![]), 2, CLASSIFY_TOL).is_err());
    }

    #[test]
    fn lemma21_examples() {
        let r = lemma21_check(&Spectrum::new(vec![2.0, 0.5]), PI / 2.0, PI / 2.0).unwrap();
        assert!(r.all_pass());
        assert!(close(r.semiconvex_margin.unwrap(), 0.5, 1e-15));

        let r = lemma21_check(&Spectrum::new(vec![1.0, 1.0, 1.0]), 3.0 * PI / 4.0, 0.0).unwrap();
        assert!(r.passes[..3].iter().all(|p| *p));
        assert!(r.semiconvex_margin.is_none());

        let s = Spectrum::new(vec![10.0, -0.05]);
        let psi = s.phase();
        assert!(close(psi, 1.421_169_278_6, 1e-9));
        let r = lemma21_check(&s, psi, psi).unwrap();
        assert!(r.all_pass());
        assert!(close(r.trace_margin, 9.95, 1e-14));

        assert!(matches!(
            lemma21_check(&Spectrum::new(vec![1.0, 1.0, 1.0]), 0.1, 0.0),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn bordered_examples() {
        let b = BorderedMatrix::new(vec![1.0, 2.0], vec![0.0, 0.0], 100.0).unwrap();
        let d = bordered_eig_drift(&b).unwrap();
        assert_eq!(d.drift, vec![0.0, 0.0]);
        assert_eq!(d.corner_gap, 0.0);

        let mut last = f64::INFINITY;
        for a in [1e2, 1e4, 1e6] {
            let b = BorderedMatrix::new(vec![1.0, 2.0], vec![0.5, 0.5], a).unwrap();
            let d = bordered_eig_drift(&b).unwrap();
            let worst = d.drift.iter().copied().fold(0.0, f64::max);
            if a == 1e2 {
                assert!(worst <= 0.01 && d.corner_gap <= 0.01);
            }
            assert!(worst < last);
            assert!(d.corner_gap <= 0.01);
            last = worst;
        }
    }
}
