//! Dense LU with partial pivoting over real or complex scalars.
//!
//! Singularity is declared when the smallest pivot magnitude falls below
//! [`PIVOT_RATIO_THRESHOLD`] times the largest one. A 1-norm condition
//! estimate (Hager's method) is reported alongside but never used to refuse a
//! solve.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

pub const PIVOT_RATIO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Lu<T: ComplexField<RealField = f64>> {
    factors: DMatrix<T>,
    // Row i of PA is row perm[i] of A.
    perm: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
    norm1: f64,
}

impl<T: ComplexField<RealField = f64> + Copy> Lu<T> {
    pub fn factor(a: &DMatrix<T>) -> Self {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.nrows();
        let norm1 = (0..n)
            .map(|j| a.column(j).iter().map(|v| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;

        for k in 0..n {
            let (p, pmag) = (k..n)
                .map(|i| (i, lu[(i, k)].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            min_pivot = min_pivot.min(pmag);
            max_pivot = max_pivot.max(pmag);
            if pmag == 0.0 {
                continue;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l.modulus() == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= l * ukj;
                }
            }
        }
        if n == 0 {
            min_pivot = 0.0;
        }
        Lu { factors: lu, perm, min_pivot, max_pivot, norm1 }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Smallest over largest pivot magnitude; zero for an all-zero matrix.
    pub fn pivot_ratio(&self) -> f64 {
        if self.dim() == 0 {
            return 1.0;
        }
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    pub fn is_singular(&self) -> bool {
        self.pivot_ratio().is_nan() || self.pivot_ratio() < PIVOT_RATIO_THRESHOLD
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.factors[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.factors[(i, j)] * x[j];
            }
            x[i] = s / self.factors[(i, i)];
        }
        x
    }

    /// Solves `Aᴴ x = b` with the same factors.
    pub fn solve_adjoint(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y = b.clone();
        // Uᴴ is lower triangular.
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.factors[(j, i)].conjugate() * y[j];
            }
            y[i] = s / self.factors[(i, i)].conjugate();
        }
        // Lᴴ is unit upper triangular.
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.factors[(j, i)].conjugate() * y[j];
            }
            y[i] = s;
        }
        let mut x = DVector::from_element(n, T::zero());
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::from_element(b.nrows(), b.ncols(), T::zero());
        for j in 0..b.ncols() {
            let col = self.solve(&b.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.solve_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// Estimate of `‖A⁻¹‖₁` by Hager's method with Higham's extra test vector.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        if self.is_singular() {
            return f64::INFINITY;
        }
        let one = T::from_real(1.0);
        let mut x = DVector::from_element(n, T::from_real(1.0 / n as f64));
        let mut estimate: f64 = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = self.solve(&x);
            estimate = estimate.max(norm1(&y));
            let signs = y.map(|v| {
                let m = v.modulus();
                if m == 0.0 {
                    one
                } else {
                    v.unscale(m)
                }
            });
            let z = self.solve_adjoint(&signs);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.modulus()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conjugate() * *b).real()).sum();
            if iter > 0 && (zmax <= ztx || j == last_j) {
                break;
            }
            last_j = j;
            x = DVector::from_element(n, T::zero());
            x[j] = one;
        }
        let alt = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
            T::from_real(sign * (1.0 + i as f64 / denom))
        });
        let alt_est = 2.0 * norm1(&self.solve(&alt)) / (3.0 * n as f64);
        estimate.max(alt_est)
    }

    /// Estimated 1-norm condition number `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }
}

fn norm1<T: ComplexField<RealField = f64> + Copy>(x: &DVector<T>) -> f64 {
    x.iter().map(|v| v.modulus()).sum()
}

pub fn conj_vec(x: &DVector<Complex64>) -> DVector<Complex64> {
    x.map(|v| v.conj())
}

pub fn conj_mat(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.map(|v| v.conj())
}

pub fn re_vec(x: &DVector<Complex64>) -> DVector<f64> {
    x.map(|v| v.re)
}

pub fn im_vec(x: &DVector<Complex64>) -> DVector<f64> {
    x.map(|v| v.im)
}

pub fn re_mat(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    a.map(|v| v.re)
}

pub fn im_mat(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    a.map(|v| v.im)
}

pub fn complex_vec(re: &DVector<f64>, im: &DVector<f64>) -> DVector<Complex64> {
    DVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

pub fn to_complex(x: &DVector<f64>) -> DVector<Complex64> {
    x.map(|v| Complex64::new(v, 0.0))
}

/// Euclidean norm of a complex vector.
pub fn norm2(x: &DVector<Complex64>) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(x: &DVector<Complex64>) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
