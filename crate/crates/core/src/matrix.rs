//! Row-major dense matrices in 64-bit precision, Xavier initialization, a
//! symmetric positive-definite solver, and Monte-Carlo ReLU moment oracles.
//!
//! Everything here is deliberately plain: kernel matrices downstream are
//! ill-conditioned enough that reproducibility depends on a fixed operation
//! order, so there is no threading and no fused shortcuts.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::Rng;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionError {
                context: "from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionError {
                context: "matmul",
                expected: (self.cols, other.rows),
                got: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = out.row_mut(i);
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aik * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_nt(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionError {
                context: "matmul_nt",
                expected: (self.rows, self.cols),
                got: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..other.rows {
                let brow = other.row(j);
                let mut acc = 0.0;
                for (a, b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        Ok(out)
    }

    /// `self^T * other`.
    pub fn matmul_tn(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionError {
                context: "matmul_tn",
                expected: (self.rows, self.cols),
                got: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &aki) in arow.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aki * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self += scale * other`, shapes must match.
    pub fn add_scaled(&mut self, other: &DenseMatrix, scale: f64) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionError {
                context: "add_scaled",
                expected: self.shape(),
                got: other.shape(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| fmath::abs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if fmath::abs(self.get(i, j) - self.get(j, i)) > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Ridge policy for [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    Exact(f64),
    /// `1e-8 * trace(K) / n`.
    Auto,
}

impl Ridge {
    pub fn value(self, k: &DenseMatrix) -> f64 {
        match self {
            Ridge::Exact(v) => v,
            Ridge::Auto => 1e-8 * k.trace() / k.rows() as f64,
        }
    }
}

/// Entries i.i.d. uniform on `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init(rng: &mut Rng, fan_in: usize, fan_out: usize) -> DenseMatrix {
    assert!(fan_in >= 1 && fan_out >= 1);
    let a = fmath::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform_in(-a, a))
        .collect();
    DenseMatrix {
        rows: fan_in,
        cols: fan_out,
        data,
    }
}

/// Solves `(K + ridge*I) x = y` by Cholesky factorization.
///
/// `K` must be square and symmetric within `1e-8`. A non-positive pivot is
/// reported with its index so callers can retry with a larger ridge.
pub fn solve_spd(k: &DenseMatrix, y: &[f64], ridge: Ridge) -> Result<Vec<f64>> {
    let n = k.rows();
    if k.cols() != n {
        return Err(Error::DimensionError {
            context: "solve_spd",
            expected: (n, n),
            got: k.shape(),
        });
    }
    if y.len() != n {
        return Err(Error::DimensionError {
            context: "solve_spd rhs",
            expected: (n, 1),
            got: (y.len(), 1),
        });
    }
    if !k.is_symmetric(1e-8) {
        return Err(Error::InvalidArgument("solve_spd: matrix not symmetric"));
    }
    let ridge = ridge.value(k);

    // Lower-triangular factor, built column by column.
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        for i in j..n {
            let mut sum = k.get(i, j);
            if i == j {
                sum += ridge;
            }
            for p in 0..j {
                sum -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::FactorizationError { pivot: j });
                }
                l[j * n + j] = fmath::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    // L z = y
    let mut z = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = y[i];
        for p in 0..i {
            sum -= l[i * n + p] * z[p];
        }
        z[i] = sum / l[i * n + i];
    }
    // L^T x = z
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for p in (i + 1)..n {
            sum -= l[p * n + i] * x[p];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Monte-Carlo estimates of the ReLU Gaussian moments for a direction pair.
#[derive(Debug, Clone, Copy)]
pub struct ReluMoments {
    /// Estimate of `E[relu(w.a) * relu(w.b)]`.
    pub m1: f64,
    /// Estimate of `E[step(w.a) * step(w.b)]` with the strict step `1(x > 0)`.
    pub m0: f64,
    pub se1: f64,
    pub se0: f64,
}

/// Samples `w ~ N(0, I_d)` and averages `relu(w.a) relu(w.b)` and the
/// matching strict-indicator product. The derivative convention at zero is
/// `step(0) = 0`, so all-zero inputs give exactly zero for both moments.
pub fn mc_relu_moments(a: &[f64], b: &[f64], samples: usize, rng: &mut Rng) -> ReluMoments {
    assert_eq!(a.len(), b.len(), "direction dimensions differ");
    assert!(samples >= 1);
    let d = a.len();
    let mut s1 = 0.0;
    let mut s1sq = 0.0;
    let mut s0 = 0.0;
    let mut s0sq = 0.0;
    let mut w = vec![0.0f64; d];
    for _ in 0..samples {
        for wi in &mut w {
            *wi = rng.normal();
        }
        let mut za = 0.0;
        let mut zb = 0.0;
        for i in 0..d {
            za += w[i] * a[i];
            zb += w[i] * b[i];
        }
        let v1 = if za > 0.0 && zb > 0.0 { za * zb } else { 0.0 };
        let v0 = if za > 0.0 && zb > 0.0 { 1.0 } else { 0.0 };
        s1 += v1;
        s1sq += v1 * v1;
        s0 += v0;
        s0sq += v0 * v0;
    }
    let n = samples as f64;
    let m1 = s1 / n;
    let m0 = s0 / n;
    let var1 = (s1sq / n - m1 * m1).max(0.0);
    let var0 = (s0sq / n - m0 * m0).max(0.0);
    ReluMoments {
        m1,
        m0,
        se1: fmath::sqrt(var1 / n),
        se0: fmath::sqrt(var0 / n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_bound_and_determinism() {
        let mut rng = Rng::from_seed(5);
        let m = xavier_init(&mut rng, 1, 1);
        let bound = (3.0f64).sqrt();
        assert!(m.get(0, 0).abs() <= bound);

        let a = xavier_init(&mut Rng::from_seed(9), 4, 3);
        let b = xavier_init(&mut Rng::from_seed(9), 4, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn xavier_variance() {
        // Uniform(-a, a) has variance a^2/3 = (6/200)/3 = 0.01 for 100+100 fans.
        let mut rng = Rng::from_seed(11);
        let m = xavier_init(&mut rng, 100, 100);
        let n = m.data().len() as f64;
        let mean: f64 = m.data().iter().sum::<f64>() / n;
        let var: f64 = m
            .data()
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n;
        assert!((var - 0.01).abs() < 0.2 * 0.01, "var {var}");
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let k = DenseMatrix::identity(2);
        let x = solve_spd(&k, &[3.0, -1.0], Ridge::Exact(0.0)).unwrap();
        assert_eq!(x, vec![3.0, -1.0]);

        let k = DenseMatrix::from_vec(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let x = solve_spd(&k, &[2.0, 4.0], Ridge::Exact(0.0)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    /// Independent elimination oracle: partial-pivot Gaussian elimination.
    fn gauss_solve(a: &DenseMatrix, y: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m = a.clone();
        let mut b = y.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m.get(r, col).abs() > m.get(piv, col).abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..n {
                    let tmp = m.get(col, j);
                    m.set(col, j, m.get(piv, j));
                    m.set(piv, j, tmp);
                }
                b.swap(col, piv);
            }
            for r in col + 1..n {
                let f = m.get(r, col) / m.get(col, col);
                for j in col..n {
                    let v = m.get(r, j) - f * m.get(col, j);
                    m.set(r, j, v);
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= m.get(i, j) * x[j];
            }
            x[i] = s / m.get(i, i);
        }
        x
    }

    fn random_spd(n: usize, rng: &mut Rng) -> DenseMatrix {
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.normal());
        let mut k = b.matmul_nt(&b).unwrap();
        for i in 0..n {
            let v = k.get(i, i) + n as f64 * 0.1;
            k.set(i, i, v);
        }
        k
    }

    #[test]
    fn solve_matches_elimination_oracle() {
        let mut rng = Rng::from_seed(17);
        let k = random_spd(8, &mut rng);
        let y: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let got = solve_spd(&k, &y, Ridge::Exact(0.0)).unwrap();
        let want = gauss_solve(&k, &y);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }

    #[test]
    fn solve_residual_up_to_256() {
        let mut rng = Rng::from_seed(23);
        for &n in &[16usize, 64, 256] {
            let k = random_spd(n, &mut rng);
            let y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let x = solve_spd(&k, &y, Ridge::Exact(0.0)).unwrap();
            let mut resid: f64 = 0.0;
            let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += k.get(i, j) * x[j];
                }
                resid = resid.max((s - y[i]).abs());
            }
            assert!(resid < 1e-8 * (1.0 + ynorm), "n={n} resid={resid}");
        }
    }

    #[test]
    fn solve_reports_failing_pivot() {
        // Indefinite matrix: second pivot goes negative.
        let k = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        let err = solve_spd(&k, &[1.0, 1.0], Ridge::Exact(0.0)).unwrap_err();
        assert_eq!(err, Error::FactorizationError { pivot: 1 });
    }

    #[test]
    fn relu_moment_trivials() {
        let mut rng = Rng::from_seed(31);
        // Identical unit directions: both moments are 1/2.
        let m = mc_relu_moments(&[1.0, 0.0], &[1.0, 0.0], 200_000, &mut rng);
        assert!((m.m1 - 0.5).abs() < 3.0 * m.se1, "m1 {} se {}", m.m1, m.se1);
        assert!((m.m0 - 0.5).abs() < 3.0 * m.se0);

        // Opposite half-spaces never activate together.
        let m = mc_relu_moments(&[1.0, 0.0], &[-1.0, 0.0], 10_000, &mut rng);
        assert_eq!(m.m1, 0.0);
        assert_eq!(m.m0, 0.0);

        // Orthogonal directions share a quadrant a quarter of the time.
        let m = mc_relu_moments(&[1.0, 0.0], &[0.0, 1.0], 400_000, &mut rng);
        assert!((m.m0 - 0.25).abs() < 3.0 * m.se0, "m0 {}", m.m0);

        // Zero vector pins both moments at zero by the step(0)=0 convention.
        let m = mc_relu_moments(&[0.0, 0.0], &[1.0, 0.0], 1_000, &mut rng);
        assert_eq!(m.m1, 0.0);
        assert_eq!(m.m0, 0.0);
    }

    #[test]
    fn relu_moments_symmetric_in_arguments() {
        let a = [0.8, -0.3, 0.5];
        let b = [0.1, 0.9, -0.2];
        let m1 = mc_relu_moments(&a, &b, 200_000, &mut Rng::from_seed(41));
        let m2 = mc_relu_moments(&b, &a, 200_000, &mut Rng::from_seed(43));
        let se = (m1.se1 * m1.se1 + m2.se1 * m2.se1).sqrt();
        assert!((m1.m1 - m2.m1).abs() < 3.0 * se);
    }
}
