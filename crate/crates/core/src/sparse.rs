//! Row-compressed sparse matrices and a banded LU solve with partial
//! pivoting. Grid unknowns are numbered row-major, so the bandwidth is about
//! one lattice row and a band factorization is cheap at the grid sizes used
//! here.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` entries; duplicate columns in a
    /// row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `(lower, upper)` bandwidths.
    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }
}

/// `‖Ax − b‖∞`.
pub fn residual_inf(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).abs())
        .fold(0.0, f64::max)
}

/// LU factors of a banded matrix in LAPACK `gbtrf` layout.
struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(a: &CsrMatrix) -> Option<BandLu> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[kv + i - j + j * ldab] += v;
            }
        }
        let mut piv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = ab[col + kv].abs();
            for p in 1..=km {
                let v = ab[col + kv + p].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            piv[j] = j + jp;
            if best == 0.0 {
                return None;
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv + j - c;
                    ab.swap(base, base + jp);
                }
            }
            let pivot = ab[col + kv];
            for p in 1..=km {
                ab[col + kv + p] /= pivot;
            }
            for c in j + 1..=ju {
                let base = c * ldab + kv + j - c;
                let ajc = ab[base];
                if ajc != 0.0 {
                    for p in 1..=km {
                        ab[base + p] -= ab[col + kv + p] * ajc;
                    }
                }
            }
        }
        Some(BandLu {
            n,
            kl,
            kv,
            ldab,
            ab,
            piv,
        })
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kv, self.ldab);
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for q in 1..=km {
                    b[j + q] -= self.ab[j * ldab + kv + q] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            b[j] /= self.ab[col + kv];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[col + kv + i - j] * bj;
                }
            }
        }
    }
}

/// Solves `Ax = b` by banded LU with up to three steps of iterative
/// refinement, accepting once the normwise backward error satisfies
/// `‖Ax − b‖∞ ≤ tol·(‖A‖∞‖x‖∞ + ‖b‖∞)`.
pub fn solve(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    assert_eq!(a.n, b.len());
    if a.n == 0 {
        return Ok(Vec::new());
    }
    let lu = BandLu::factor(a).ok_or(Error::LinearSolveFailure {
        residual: f64::INFINITY,
    })?;
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let anorm = a.norm_inf();
    let mut x = b.to_vec();
    lu.solve(&mut x);
    let mut res = f64::INFINITY;
    for _ in 0..4 {
        let ax = a.mul_vec(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !res.is_finite() {
            break;
        }
        let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res <= tol * (anorm * xnorm + bnorm) {
            return Ok(x);
        }
        lu.solve(&mut r);
        x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
    }
    Err(Error::LinearSolveFailure { residual: res })
}
