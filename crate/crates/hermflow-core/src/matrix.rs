//! Dense small-matrix kernel.
//!
//! Everything downstream works with even-dimensional real matrices of desk
//! scale (n <= 64), so all paths are dense and allocation is not a concern.
//! The module provides plain algebra, LU-based solves, a cyclic Jacobi
//! eigensolver for symmetric input, scaling-and-squaring Pade exponential,
//! the SPD square root, a Pfaffian with the first-row expansion sign
//! convention, and the commutant split with respect to an almost complex
//! structure.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Even-dimensional square matrix, row-major entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// Zero matrix of (even) dimension `n`.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2 && n % 2 == 0, "dimension must be even and >= 2");
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "dimension must be even and >= 2, got {n}"
            )));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(m)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Block-diagonal standard symplectic form: consecutive 2x2 blocks
    /// [[0, 1], [-1, 0]].
    pub fn std_symplectic(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for b in (0..n).step_by(2) {
            m[(b, b + 1)] = 1.0;
            m[(b + 1, b)] = -1.0;
        }
        m
    }

    /// Matrix with entries drawn uniformly from [-1, 1].
    pub fn random_uniform(n: usize, rng: &mut SplitMix64) -> Self {
        Self::from_fn(n, |_, _| rng.next_symmetric())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// tr(self * rhs) without forming the product.
    pub fn trace_mul(&self, rhs: &Self) -> f64 {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * rhs[(k, i)];
            }
        }
        acc
    }

    /// (M + M^T) / 2
    pub fn sym_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// (M - M^T) / 2
    pub fn skew_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] - self[(j, i)]))
    }

    /// Frobenius norm of M - M^T, zero for symmetric input.
    pub fn symmetry_residual(&self) -> f64 {
        self.sub(&self.transpose()).frob_norm()
    }

    /// Frobenius norm of M + M^T, zero for skew input.
    pub fn skewness_residual(&self) -> f64 {
        self.add(&self.transpose()).frob_norm()
    }

    /// LU factorization with partial pivoting.
    fn lu(&self) -> Option<Lu> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Some(Lu { n, a, perm, sign })
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            Some(lu) => lu.det(),
            None => 0.0,
        }
    }

    /// Solves self * X = B.
    pub fn solve(&self, b: &Self) -> Result<Self> {
        let lu = self
            .lu()
            .ok_or_else(|| Error::DegenerateInput("singular matrix in solve".into()))?;
        Ok(lu.solve(b))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.n))
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns (eigenvalues ascending, orthogonal V with eigenvectors as
    /// columns). The caller is responsible for symmetrizing near-symmetric
    /// input first.
    pub fn sym_eigen(&self) -> (Vec<f64>, SquareMatrix) {
        let n = self.n;
        let mut a = self.sym_part();
        let mut v = SquareMatrix::identity(n);
        let scale = a.frob_norm().max(1.0);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
        let eigvals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
        let vsorted = SquareMatrix::from_fn(n, |i, j| v[(i, order[j])]);
        (eigvals, vsorted)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn det(&self) -> f64 {
        let mut d = self.sign;
        for k in 0..self.n {
            d *= self.a[k * self.n + k];
        }
        d
    }

    fn solve(&self, b: &SquareMatrix) -> SquareMatrix {
        let n = self.n;
        let mut x = SquareMatrix::zeros(n);
        for col in 0..n {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut acc = b[(self.perm[i], col)];
                for j in 0..i {
                    acc -= self.a[i * n + j] * y[j];
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for j in i + 1..n {
                    acc -= self.a[i * n + j] * x[(j, col)];
                }
                x[(i, col)] = acc / self.a[i * n + i];
            }
        }
        x
    }
}

// Pade-13 numerator coefficients for the scaling-and-squaring exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. Meets a 1e-12 relative accuracy contract for norms up to 10.
pub fn expm(m: &SquareMatrix) -> Result<SquareMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("expm: non-finite entry".into()));
    }
    let n = m.dim();
    let norm = m.norm_one();
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(s));
    let a2 = a.mul(&a);
    let a4 = a2.mul(&a2);
    let a6 = a2.mul(&a4);
    let id = SquareMatrix::identity(n);

    let u_inner = a6
        .scale(PADE13[13])
        .add(&a4.scale(PADE13[11]))
        .add(&a2.scale(PADE13[9]));
    let u_poly = a6
        .mul(&u_inner)
        .add(&a6.scale(PADE13[7]))
        .add(&a4.scale(PADE13[5]))
        .add(&a2.scale(PADE13[3]))
        .add(&id.scale(PADE13[1]));
    let u = a.mul(&u_poly);

    let v_inner = a6
        .scale(PADE13[12])
        .add(&a4.scale(PADE13[10]))
        .add(&a2.scale(PADE13[8]));
    let v = a6
        .mul(&v_inner)
        .add(&a6.scale(PADE13[6]))
        .add(&a4.scale(PADE13[4]))
        .add(&a2.scale(PADE13[2]))
        .add(&id.scale(PADE13[0]));

    let mut r = v
        .sub(&u)
        .solve(&v.add(&u))
        .map_err(|_| Error::NumericalFailure("expm: Pade denominator singular".into()))?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    Ok(r)
}

/// Unique SPD square root of an SPD matrix, via the Jacobi eigensolver.
pub fn sqrtm_spd(s: &SquareMatrix, tol: &crate::tol::Tolerances) -> Result<SquareMatrix> {
    let scale = s.frob_norm().max(1.0);
    if s.symmetry_residual() > tol.structural * scale {
        return Err(Error::DegenerateInput(format!(
            "sqrtm_spd: input not symmetric, residual {:.3e}",
            s.symmetry_residual()
        )));
    }
    let (eigvals, v) = s.sym_eigen();
    if eigvals[0] <= tol.spd_floor {
        return Err(Error::DegenerateInput(format!(
            "sqrtm_spd: smallest eigenvalue {:.3e} not positive",
            eigvals[0]
        )));
    }
    let sqrt_vals: Vec<f64> = eigvals.iter().map(|l| l.sqrt()).collect();
    Ok(scaled_eigen_recompose(&v, &sqrt_vals))
}

/// Inverse SPD square root, same contract as [`sqrtm_spd`].
pub fn inv_sqrtm_spd(s: &SquareMatrix, tol: &crate::tol::Tolerances) -> Result<SquareMatrix> {
    let scale = s.frob_norm().max(1.0);
    if s.symmetry_residual() > tol.structural * scale {
        return Err(Error::DegenerateInput(format!(
            "inv_sqrtm_spd: input not symmetric, residual {:.3e}",
            s.symmetry_residual()
        )));
    }
    let (eigvals, v) = s.sym_eigen();
    if eigvals[0] <= tol.spd_floor {
        return Err(Error::DegenerateInput(format!(
            "inv_sqrtm_spd: smallest eigenvalue {:.3e} not positive",
            eigvals[0]
        )));
    }
    let vals: Vec<f64> = eigvals.iter().map(|l| 1.0 / l.sqrt()).collect();
    Ok(scaled_eigen_recompose(&v, &vals))
}

fn scaled_eigen_recompose(v: &SquareMatrix, vals: &[f64]) -> SquareMatrix {
    let n = v.dim();
    SquareMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| v[(i, k)] * vals[k] * v[(j, k)]).sum()
    })
}

/// Pfaffian of a skew-symmetric matrix.
///
/// Computed by skew-symmetric Gaussian elimination (congruence by unit
/// transvections, which leaves the Pfaffian unchanged) with row/column pivot
/// swaps, each of which flips the sign. The sign convention matches the
/// recursive expansion along the first row, so the standard symplectic block
/// form has Pfaffian +1.
pub fn pfaffian(omega: &SquareMatrix, tol: &crate::tol::Tolerances) -> Result<f64> {
    let scale = omega.frob_norm().max(1.0);
    if omega.skewness_residual() > tol.structural * scale {
        return Err(Error::InvalidInput(format!(
            "pfaffian: input not skew-symmetric, residual {:.3e}",
            omega.skewness_residual()
        )));
    }
    let n = omega.dim();
    let mut a = omega.skew_part();
    let mut pf = 1.0;
    for k in (0..n - 1).step_by(2) {
        let mut p = k + 1;
        let mut best = a[(k + 1, k)].abs();
        for i in k + 2..n {
            let v = a[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Ok(0.0);
        }
        if p != k + 1 {
            for j in 0..n {
                let t = a[(k + 1, j)];
                a[(k + 1, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, k + 1)];
                a[(j, k + 1)] = a[(j, p)];
                a[(j, p)] = t;
            }
            pf = -pf;
        }
        pf *= a[(k, k + 1)];
        let piv = a[(k + 1, k)];
        for i in k + 2..n {
            let f = a[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(i, j)] -= f * a[(k + 1, j)];
            }
            for j in 0..n {
                a[(j, i)] -= f * a[(j, k + 1)];
            }
        }
    }
    Ok(pf)
}

/// Splits `m` into its parts commuting and anticommuting with the almost
/// complex structure `j`:
/// `m_c = (m - j m j) / 2` commutes with `j`, `m_a = (m + j m j) / 2`
/// anticommutes, and `m_c + m_a = m` exactly.
pub fn comm_split(
    j: &SquareMatrix,
    m: &SquareMatrix,
    tol: &crate::tol::Tolerances,
) -> Result<(SquareMatrix, SquareMatrix)> {
    let n = j.dim();
    let resid = j.mul(j).add(&SquareMatrix::identity(n)).frob_norm();
    if resid > tol.structural * j.frob_norm().max(1.0).powi(2) {
        return Err(Error::InvalidInput(format!(
            "comm_split: J*J != -I, residual {resid:.3e}"
        )));
    }
    let jmj = j.mul(m).mul(j);
    let m_c = m.sub(&jmj).scale(0.5);
    let m_a = m.add(&jmj).scale(0.5);
    Ok((m_c, m_a))
}

/// Rectangular matrix used by the stacked least-squares oracle.
#[derive(Debug, Clone)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RectMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Minimum-norm least squares by Householder QR. Returns the solution
    /// and the residual norm ||A x - b||.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        assert_eq!(b.len(), self.rows);
        assert!(self.rows >= self.cols);
        let (m, n) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut rhs = b.to_vec();
        let scale = self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

        for k in 0..n {
            let mut norm = 0.0;
            for i in k..m {
                norm += a[i * n + k] * a[i * n + k];
            }
            let norm = norm.sqrt();
            if norm < 1e-13 * scale {
                return Err(Error::NumericalFailure(format!(
                    "least squares: rank deficient at column {k}"
                )));
            }
            let alpha = if a[k * n + k] >= 0.0 { -norm } else { norm };
            let mut v = vec![0.0; m - k];
            v[0] = a[k * n + k] - alpha;
            for i in k + 1..m {
                v[i - k] = a[i * n + k];
            }
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                for j in k..n {
                    let mut dot = 0.0;
                    for i in k..m {
                        dot += v[i - k] * a[i * n + j];
                    }
                    let f = 2.0 * dot / vnorm2;
                    for i in k..m {
                        a[i * n + j] -= f * v[i - k];
                    }
                }
                let mut dot = 0.0;
                for i in k..m {
                    dot += v[i - k] * rhs[i];
                }
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    rhs[i] -= f * v[i - k];
                }
            }
        }

        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..n {
                acc -= a[i * n + j] * x[j];
            }
            x[i] = acc / a[i * n + i];
        }

        let mut resid = 0.0;
        for i in 0..m {
            let mut ax = 0.0;
            for j in 0..n {
                ax += self.data[i * self.cols + j] * x[j];
            }
            resid += (ax - b[i]) * (ax - b[i]);
        }
        Ok((x, resid.sqrt()))
    }
}
