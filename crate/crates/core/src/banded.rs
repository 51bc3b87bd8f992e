//! Symmetric banded matrices: LDL^T factorization, solves, and the
//! generalized eigenproblem `K x = mu M x` with diagonal positive `M`.
//!
//! Eigenvalues are isolated by bisection on the inertia of `K - sigma M`
//! (the number of negative pivots of its LDL^T factorization equals the
//! number of eigenvalues below `sigma`), then refined to vectors by inverse
//! iteration.

use crate::error::{CmutError, Result};
use crate::num::Scalar;

/// Lower band of a symmetric `n x n` matrix with half-bandwidth `bw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded<T> {
    n: usize,
    bw: usize,
    // row-major lower band: entry (i, i - k) at i * (bw + 1) + k
    data: Vec<T>,
}

impl<T: Scalar> SymBanded<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![T::zero(); n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        (i < self.n && k <= self.bw).then(|| i * (self.bw + 1) + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.idx(i, j).map_or(T::zero(), |p| self.data[p])
    }

    /// Adds `v` at `(i, j)` (and by symmetry `(j, i)`).
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let p = self.idx(i, j).expect("entry outside band");
        self.data[p] = self.data[p] + v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// `self - sigma * diag(m)`.
    pub fn shifted(&self, sigma: T, m: &[T]) -> Self {
        let mut out = self.clone();
        for (i, &mi) in m.iter().enumerate() {
            let p = i * (self.bw + 1);
            out.data[p] = out.data[p] - sigma * mi;
        }
        out
    }

    /// LDL^T without pivoting. Zero pivots are nudged to a tiny value of the
    /// matrix's scale so inertia counts stay defined.
    pub fn ldlt(&self) -> Ldlt<T> {
        let n = self.n;
        let bw = self.bw;
        let scale = self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let tiny = scale * T::epsilon() * T::epsilon();
        let mut l = vec![T::zero(); n * (bw + 1)];
        let mut d = vec![T::zero(); n];
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut dj = self.get(j, j);
            for k in lo..j {
                let ljk = l[j * (bw + 1) + (j - k)];
                dj = dj - ljk * ljk * d[k];
            }
            if dj == T::zero() {
                dj = if tiny > T::zero() {
                    tiny
                } else {
                    T::min_positive_value()
                };
            }
            d[j] = dj;
            for i in (j + 1)..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw).max(lo);
                let mut v = self.get(i, j);
                for k in lo_i..j {
                    v = v - l[i * (bw + 1) + (i - k)] * l[j * (bw + 1) + (j - k)] * d[k];
                }
                l[i * (bw + 1) + (i - j)] = v / dj;
            }
        }
        Ldlt { n, bw, l, d }
    }
}

/// Unit lower-triangular banded `L` and diagonal `D`.
#[derive(Debug, Clone)]
pub struct Ldlt<T> {
    n: usize,
    bw: usize,
    l: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> Ldlt<T> {
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < T::zero()).count()
    }

    pub fn pivots(&self) -> &[T] {
        &self.d
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, bw) = (self.n, self.bw);
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for k in lo..i {
                x[i] = x[i] - self.l[i * (bw + 1) + (i - k)] * x[k];
            }
        }
        for (xi, &di) in x.iter_mut().zip(&self.d) {
            *xi = *xi / di;
        }
        for i in (0..n).rev() {
            for k in (i + 1)..(i + bw + 1).min(n) {
                x[i] = x[i] - self.l[k * (bw + 1) + (k - i)] * x[k];
            }
        }
        x
    }
}

/// Solves `K x = b` for symmetric positive definite `K`.
pub fn solve_spd<T: Scalar>(k: &SymBanded<T>, b: &[T]) -> Result<Vec<T>> {
    let scale = k.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if !(scale > T::zero()) {
        return Err(CmutError::Solver("stiffness matrix is zero".into()));
    }
    let f = k.ldlt();
    let floor = scale * T::epsilon() * T::epsilon();
    if let Some((i, v)) = f.d.iter().enumerate().find(|(_, &v)| !(v > floor)) {
        return Err(CmutError::Solver(format!(
            "stiffness matrix not positive definite (pivot {i} = {v})"
        )));
    }
    let x = f.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CmutError::Solver("non-finite solution".into()));
    }
    Ok(x)
}

/// Thomas algorithm for a general tridiagonal system; `sub[0]` and
/// `sup[n-1]` are ignored. Intended for diagonally dominant matrices.
pub fn solve_tridiagonal<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut x = rhs.to_vec();
    let mut beta = diag[0];
    for i in 0..n {
        if i > 0 {
            beta = diag[i] - sub[i] * c[i - 1];
            x[i] = x[i] - sub[i] * x[i - 1];
        }
        if beta == T::zero() || !beta.is_finite() {
            return Err(CmutError::Solver(format!(
                "zero pivot at row {i} of tridiagonal system"
            )));
        }
        c[i] = sup[i] / beta;
        x[i] = x[i] / beta;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] = x[i] - c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CmutError::Solver("non-finite solution".into()));
    }
    Ok(x)
}

/// Number of generalized eigenvalues strictly below `sigma`.
pub fn count_below<T: Scalar>(k: &SymBanded<T>, m: &[T], sigma: T) -> usize {
    k.shifted(sigma, m).ldlt().negative_pivots()
}

/// One generalized eigenpair, `K x = value M x`, with `x^T M x = 1`.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<T>,
}

/// Lowest `count` eigenpairs of `K x = mu M x`, `K` symmetric positive
/// semi-definite and `M` diagonal positive.
pub fn lowest_eigenpairs<T: Scalar>(k: &SymBanded<T>, m: &[T], count: usize) -> Result<Vec<EigenPair<T>>> {
    let n = k.dim();
    if count > n {
        return Err(CmutError::Solver(format!(
            "requested {count} eigenpairs of a {n}x{n} system"
        )));
    }
    if m.iter().any(|&v| !(v > T::zero())) {
        return Err(CmutError::Solver("mass matrix must be positive".into()));
    }
    // Gershgorin-style upper bound, then grow if needed.
    let mut upper = (0..n)
        .map(|i| {
            let row: T = (i.saturating_sub(k.bandwidth())..(i + k.bandwidth() + 1).min(n))
                .map(|j| k.get(i, j).abs())
                .sum();
            row / m[i]
        })
        .fold(T::zero(), |a, b| a.max(b));
    while count_below(k, m, upper) < count {
        upper = upper * T::lit(2.0) + T::one();
        if !upper.is_finite() {
            return Err(CmutError::Solver("eigenvalue bracket overflow".into()));
        }
    }
    let two = T::lit(2.0);
    let rel_tol = T::epsilon() * T::lit(8.0);
    let mut pairs = Vec::with_capacity(count);
    let mut lo_start = T::zero();
    for idx in 0..count {
        // smallest sigma with count_below(sigma) > idx
        let (mut lo, mut hi) = (lo_start, upper);
        for _ in 0..200 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi || hi - lo <= rel_tol * hi.abs() {
                break;
            }
            if count_below(k, m, mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let value = (lo + hi) / two;
        lo_start = lo;
        let vector = inverse_iteration(k, m, value)?;
        pairs.push(EigenPair { value, vector });
    }
    Ok(pairs)
}

fn inverse_iteration<T: Scalar>(k: &SymBanded<T>, m: &[T], value: T) -> Result<Vec<T>> {
    let n = k.dim();
    // Offset keeps the shifted factorization away from exact singularity.
    let shift = value * (T::one() - T::lit(1e3) * T::epsilon());
    let f = k.shifted(shift, m).ldlt();
    let mut x: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.01) * T::from_usize_lossy(i % 7))
        .collect();
    for _ in 0..4 {
        let rhs: Vec<T> = x.iter().zip(m).map(|(a, b)| *a * *b).collect();
        let y = f.solve(&rhs);
        let norm = y.iter().zip(m).map(|(a, b)| *a * *a * *b).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(CmutError::Solver("inverse iteration breakdown".into()));
        }
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> SymBanded<f64> {
        let mut k = SymBanded::zeros(n, 1);
        for i in 0..n {
            k.add(i, i, 2.0);
            if i + 1 < n {
                k.add(i + 1, i, -1.0);
            }
        }
        k
    }

    #[test]
    fn solve_matches_product() {
        let mut k = SymBanded::<f64>::zeros(6, 2);
        for i in 0..6 {
            k.add(i, i, 6.0 + i as f64);
            if i + 1 < 6 {
                k.add(i + 1, i, -1.5);
            }
            if i + 2 < 6 {
                k.add(i + 2, i, 0.25);
            }
        }
        let x_true: Vec<f64> = (0..6).map(|i| (i as f64).sin() + 2.0).collect();
        let b = k.mul_vec(&x_true);
        let x = solve_spd(&k, &b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let sub = [0.0, -1.0, 0.5, -0.25];
        let diag = [4.0, 5.0, -6.0, 3.0];
        let sup = [1.0, 2.0, -1.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b: Vec<f64> = (0..4)
            .map(|i| {
                let mut v = diag[i] * x_true[i];
                if i > 0 {
                    v += sub[i] * x_true[i - 1];
                }
                if i < 3 {
                    v += sup[i] * x_true[i + 1];
                }
                v
            })
            .collect();
        let x = solve_tridiagonal(&sub, &diag, &sup, &b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn singular_rejected() {
        let k = SymBanded::<f64>::zeros(3, 1);
        assert!(matches!(solve_spd(&k, &[1.0, 1.0, 1.0]), Err(CmutError::Solver(_))));
    }

    #[test]
    fn laplacian_eigenvalues() {
        // 2 - 2 cos(k pi / (n + 1)), exact for the Dirichlet second difference.
        let n = 40;
        let k = laplacian_1d(n);
        let m = vec![1.0; n];
        let pairs = lowest_eigenpairs(&k, &m, 4).unwrap();
        for (j, p) in pairs.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!(
                (p.value - exact).abs() < 1e-12 * exact.max(1.0),
                "{} vs {}",
                p.value,
                exact
            );
            let kx = k.mul_vec(&p.vector);
            let resid = kx
                .iter()
                .zip(&p.vector)
                .map(|(a, b)| (a - p.value * b).abs())
                .fold(0.0, f64::max);
            assert!(resid < 1e-9, "residual {resid}");
        }
    }

    #[test]
    fn inertia_counts() {
        let k = laplacian_1d(10);
        let m = vec![1.0; 10];
        assert_eq!(count_below(&k, &m, 0.0), 0);
        assert_eq!(count_below(&k, &m, 4.0), 10);
    }
}
