//! Dense helpers for the small (N ≤ 4) system matrices.
//!
//! Everything here is sized for the component space of the PDE, not for
//! grids, so plain `Vec` storage and cyclic Jacobi sweeps are enough.

use crate::error::{Error, Result};

/// Square real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

/// Absolute off-diagonal tolerance for the Jacobi eigensolver.
const JACOBI_TOL: f64 = 1e-12;

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::validation("matrix must have at least one row"));
        }
        let mut a = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "matrix rows must have length {n}, got {}",
                    row.len()
                )));
            }
            a.extend_from_slice(row);
        }
        Ok(Mat { n, a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.a[j * self.n + i] = self.a[i * self.n + j];
            }
        }
        t
    }

    pub fn symmetric_part(&self) -> Mat {
        let mut s = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                s.a[i * self.n + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        s
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * rhs.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (o, r) in out.a.iter_mut().zip(rhs.a.iter()) {
            *o += r;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut out = self.clone();
        for v in out.a.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
    ///
    /// The caller must pass a symmetric matrix; asymmetry is symmetrized away.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.symmetric_part();
        if n == 1 {
            return vec![a.a[0]];
        }
        for _sweep in 0..100 {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).abs());
                }
            }
            if off < JACOBI_TOL {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() < JACOBI_TOL * 1e-4 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    // Rotation angle from tan(2t) = 2 a_pq / (a_pp - a_qq).
                    let t = {
                        let diff = app - aqq;
                        if diff.abs() < 1e-300 {
                            std::f64::consts::FRAC_PI_4 * apq.signum()
                        } else {
                            0.5 * (2.0 * apq / diff).atan()
                        }
                    };
                    let (s, c) = t.sin_cos();
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp + s * akq);
                        a.set(k, q, -s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk + s * aqk);
                        a.set(q, k, -s * apk + c * aqk);
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    /// Largest singular value, i.e. the operator norm on l².
    pub fn operator_norm(&self) -> f64 {
        let ata = self.transpose().matmul(self);
        let eig = ata.sym_eigenvalues();
        eig.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    pub fn expm(&self) -> Mat {
        let norm = self.max_abs() * self.n as f64;
        let s = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let b = self.scale(0.5_f64.powi(s as i32));
        let mut result = Mat::identity(self.n);
        let mut term = Mat::identity(self.n);
        for k in 1..=20 {
            term = term.matmul(&b).scale(1.0 / k as f64);
            result = result.add(&term);
        }
        for _ in 0..s {
            result = result.matmul(&result);
        }
        result
    }
}
