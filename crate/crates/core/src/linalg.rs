//! Dense Hermitian eigendecomposition (the spectral oracle), a minimal sparse
//! operator type for assembly and matrix-free norm estimates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO_C: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE_C: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Eigendecomposition A = V diag(λ) V* of a Hermitian matrix, eigenvalues
/// ascending.
#[derive(Clone)]
pub struct EigData {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

/// Full dense eigendecomposition. This is the single spectral oracle; no
/// iterative shortcuts. Refuses matrices above `budget` rows.
pub fn hermitian_eig(a: &CMat, budget: usize) -> Result<EigData> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Spectral(format!("matrix is {}x{}", n, a.ncols())));
    }
    if n > budget {
        return Err(Error::EigBudget { got: n, budget });
    }
    let herm_defect = (0..n)
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - a[(j, i)].conj()).norm())
        .fold(0.0_f64, f64::max);
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if herm_defect > 1e-10 * (1.0 + scale) {
        return Err(Error::Spectral(format!(
            "matrix is not Hermitian (defect {herm_defect:.3e})"
        )));
    }

    let all_real = a.iter().all(|z| z.im == 0.0);
    let (values, vectors) = if all_real {
        let ar = DMatrix::from_fn(n, n, |i, j| a[(i, j)].re);
        let se = nalgebra::SymmetricEigen::new(ar);
        let vec_c = CMat::from_fn(n, n, |i, j| Complex64::new(se.eigenvectors[(i, j)], 0.0));
        (se.eigenvalues, vec_c)
    } else {
        let se = nalgebra::SymmetricEigen::new(a.clone());
        (se.eigenvalues, se.eigenvectors)
    };

    // The QR solver can leave O(1e-7) residual couplings inside
    // near-degenerate clusters (our spectra are highly degenerate by
    // symmetry). One Rayleigh-Ritz pass wipes them out.
    let (values, vectors) = rayleigh_refine(a, values, vectors);

    // sort ascending, permuting columns alongside
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let sorted_vals = DVector::from_fn(n, |i, _| values[order[i]]);
    let mut sorted_vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vectors.column(src));
    }

    Ok(EigData {
        values: sorted_vals,
        vectors: sorted_vecs,
    })
}

/// Project onto the computed basis (B = V†AV), then kill the remaining
/// off-diagonal couplings with targeted complex Jacobi rotations,
/// accumulating the rotations into V.
fn rayleigh_refine(a: &CMat, _values: DVector<f64>, mut v: CMat) -> (DVector<f64>, CMat) {
    let n = a.nrows();
    let mut b = v.adjoint() * a * &v;
    let scale = b.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..30 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let bpq = b[(p, q)];
                if bpq.norm() <= tol {
                    continue;
                }
                rotated = true;
                // phase out b_pq, then a real Jacobi rotation
                let phi = bpq.im.atan2(bpq.re);
                let u = Complex64::from_polar(1.0, -phi);
                let app = b[(p, p)].re;
                let aqq = b[(q, q)].re;
                let absb = bpq.norm();
                let tau = (aqq - app) / (2.0 * absb);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // unitary G = [[c, s], [−s·u, c·u]] zeroes (G†BG)_{pq}
                let cc = Complex64::new(c, 0.0);
                let sc = Complex64::new(s, 0.0);
                for i in 0..n {
                    let bip = b[(i, p)];
                    let biq = b[(i, q)];
                    b[(i, p)] = cc * bip - sc * u * biq;
                    b[(i, q)] = sc * bip + cc * u * biq;
                }
                for j in 0..n {
                    let bpj = b[(p, j)];
                    let bqj = b[(q, j)];
                    b[(p, j)] = cc * bpj - sc * u.conj() * bqj;
                    b[(q, j)] = sc * bpj + cc * u.conj() * bqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = cc * vip - sc * u * viq;
                    v[(i, q)] = sc * vip + cc * u * viq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let values = DVector::from_fn(n, |i, _| b[(i, i)].re);
    (values, v)
}

impl EigData {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V diag(f(λ)) V* for a real scalar function of the operator.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let fk = Complex64::new(f(self.values[k]), 0.0);
            scaled.column_mut(k).scale_mut(1.0);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// sup over the spectrum of |f(λ)| — the operator 2-norm of f(A).
    pub fn function_norm(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values.iter().map(|&l| f(l).abs()).fold(0.0, f64::max)
    }
}

/// Row-major sparse operator with complex entries. Duplicate pushes
/// accumulate.
#[derive(Clone)]
pub struct SparseOp {
    pub dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    pub fn new(dim: usize) -> Self {
        SparseOp {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: Complex64) {
        if v == ZERO_C {
            return;
        }
        let row = &mut self.rows[r];
        if let Some(entry) = row.iter_mut().find(|(cc, _)| *cc == c) {
            entry.1 += v;
        } else {
            row.push((c, v));
        }
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = ZERO_C;
            for &(c, v) in row {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut out = SparseOp::new(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out.push(c, r, v.conj());
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Left-multiply a dense matrix: self · a.
    pub fn mul_dense(&self, a: &CMat) -> CMat {
        let n = self.dim;
        let cols = a.ncols();
        let mut out = CMat::zeros(n, cols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for c in 0..cols {
                    out[(r, c)] += v * a[(k, c)];
                }
            }
        }
        out
    }

    /// Hermitian defect max |A_ij − conj(A_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.to_dense();
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((d[(i, j)] - d[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// Operator 2-norm estimate by power iteration on X*X with a deterministic
/// start vector.
pub fn op_norm_est(apply: impl Fn(&CVec) -> CVec, apply_adj: impl Fn(&CVec) -> CVec, dim: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut v = CVec::from_fn(dim, |i, _| {
        Complex64::new(1.0 + (i as f64 * 0.37).sin() * 0.5, 0.0)
    });
    let mut norm = v.norm();
    v /= Complex64::new(norm, 0.0);
    let mut sigma2 = 0.0_f64;
    for _ in 0..200 {
        let w = apply_adj(&apply(&v));
        norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm; // Rayleigh quotient with unit v
        v = w / Complex64::new(norm, 0.0);
        if (next - sigma2).abs() <= 1e-12 * (1.0 + next) {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    sigma2.sqrt()
}

/// Dense operator 2-norm via the Hermitian oracle applied to X*X.
pub fn dense_op_norm(x: &CMat, budget: usize) -> Result<f64> {
    let g = x.adjoint() * x;
    let eig = hermitian_eig(&g, budget)?;
    Ok(eig.values[eig.dim() - 1].max(0.0).sqrt())
}

/// Frobenius norm of a rectangular complex block.
pub fn fro_norm(block: &CMat) -> f64 {
    block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares straight line y = a + b x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (sy / n, 0.0);
    }
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    (a, b)
}
