//! Small dense complex linear algebra.
//!
//! [`Mat4`] is the workhorse for density matrices and operators on the
//! four-level emitter and on the two-photon polarization space. [`CMatrix`]
//! is a dynamically sized square matrix used for superoperators (16×16) and
//! the augmented matrices of the exponential fallback.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub(crate) fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

#[inline]
pub(crate) fn cexp(z: C64) -> C64 {
    let r = libm::exp(z.re);
    C64::new(r * libm::cos(z.im), r * libm::sin(z.im))
}

/// Principal square root.
pub(crate) fn csqrt(z: C64) -> C64 {
    let r = cabs(z);
    if r == 0.0 {
        return ZERO;
    }
    let re = libm::sqrt(0.5 * (r + z.re));
    let im = libm::sqrt(0.5 * (r - z.re));
    C64::new(re, if z.im < 0.0 { -im } else { im })
}

/// `(e^z - 1)/z`, accurate for small `|z|`.
pub(crate) fn expm1_over(z: C64) -> C64 {
    if cabs(z) < 1e-5 {
        // 1 + z/2 + z²/6 + z³/24
        ONE + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        (cexp(z) - ONE) / z
    }
}

/// 2×2 complex matrix, used for single-qubit polarization rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Kronecker product `self ⊗ other`; the first factor indexes the slow
    /// (leading) qubit.
    pub fn kron(&self, other: &Mat2) -> Mat4 {
        let mut out = Mat4::zero();
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        out.0[2 * a + i][2 * b + j] = self.0[a][b] * other.0[i][j];
                    }
                }
            }
        }
        out
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = Mat2([[ZERO; 2]; 2]);
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        out
    }
}

/// 4×4 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Default for Mat4 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Mat4 {
    pub const fn zero() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::from_diag([1.0; 4])
    }

    pub fn from_diag(d: [f64; 4]) -> Self {
        let mut m = Self::zero();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = C64::new(v, 0.0);
        }
        m
    }

    /// The matrix unit `|i⟩⟨j|`.
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Self::zero();
        m.0[i][j] = ONE;
        m
    }

    /// `|psi⟩⟨psi|` for an (unnormalized) vector.
    pub fn projector(psi: &[C64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for z in row.iter_mut() {
                *z = z.conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self + s * other`.
    #[inline]
    pub fn add_scaled(&self, s: f64, other: &Mat4) -> Self {
        let mut m = *self;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] += other.0[i][j] * s;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |acc, z| f64::max(acc, cabs(*z)))
    }

    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        (*self - *other).max_abs()
    }

    /// Largest element of `|M - M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn commutator(a: &Mat4, b: &Mat4) -> Mat4 {
        *a * *b - *b * *a
    }

    /// Bilinear pairing `Tr[self · other]`.
    pub fn trace_product(&self, other: &Mat4) -> C64 {
        let mut acc = ZERO;
        for i in 0..4 {
            for k in 0..4 {
                acc += self.0[i][k] * other.0[k][i];
            }
        }
        acc
    }

    /// Unitary conjugation `U · self · U†`.
    pub fn conjugate_by(&self, u: &Mat4) -> Mat4 {
        *u * *self * u.adjoint()
    }

    /// Row-major vectorization, `vec[4i + j] = m[i][j]`.
    pub fn to_vec16(&self) -> [C64; 16] {
        let mut v = [ZERO; 16];
        for i in 0..4 {
            for j in 0..4 {
                v[4 * i + j] = self.0[i][j];
            }
        }
        v
    }

    pub fn from_vec16(v: &[C64]) -> Mat4 {
        let mut m = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = v[4 * i + j];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Mat4 {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(mut self, rhs: Mat4) -> Mat4 {
        self += rhs;
        self
    }
}

impl AddAssign for Mat4 {
    fn add_assign(&mut self, rhs: Mat4) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(mut self, rhs: Mat4) -> Mat4 {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl Neg for Mat4 {
    type Output = Mat4;
    fn neg(self) -> Mat4 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

/// Eigen-decomposition of a Hermitian 4×4 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the unitary whose columns are
/// the matching eigenvectors. Only the Hermitian part of `m` is used.
pub fn eigh4(m: &Mat4) -> ([f64; 4], Mat4) {
    let mut a = (*m + m.adjoint()).scale_re(0.5);
    let mut v = Mat4::identity();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off += a.0[p][q].norm_sqr();
            }
        }
        if libm::sqrt(off) <= 1e-17 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let r = cabs(apq);
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a.0[p][p].re;
                let aqq = a.0[q][q].re;
                let zeta = (aqq - app) / (2.0 * r);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + libm::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + libm::sqrt(1.0 + zeta * zeta))
                };
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = t * cs;
                // U = diag(1, conj(phase)) on (p, q) followed by a real rotation.
                let mut u = Mat4::identity();
                u.0[p][p] = C64::new(cs, 0.0);
                u.0[p][q] = C64::new(sn, 0.0);
                u.0[q][p] = phase.conj() * -sn;
                u.0[q][q] = phase.conj() * cs;
                a = u.adjoint() * a * u;
                a.0[p][q] = ZERO;
                a.0[q][p] = ZERO;
                v = v * u;
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a.0[i][i].re.total_cmp(&a.0[j][j].re));
    let mut vals = [0.0; 4];
    let mut vecs = Mat4::zero();
    for (k, &idx) in order.iter().enumerate() {
        vals[k] = a.0[idx][idx].re;
        for r in 0..4 {
            vecs.0[r][k] = v.0[r][idx];
        }
    }
    (vals, vecs)
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// negative eigenvalues from rounding are clipped to zero.
pub fn sqrt_psd(m: &Mat4) -> Mat4 {
    let (vals, vecs) = eigh4(m);
    let d = Mat4::from_diag(vals.map(|x| libm::sqrt(x.max(0.0))));
    vecs * d * vecs.adjoint()
}

/// Dense square complex matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| f64::max(acc, cabs(*z)))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| cabs(self[(i, j)])).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.data[i * n..(i + 1) * n];
                row.iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Row vector times matrix, `xᵀ·M`.
    pub fn vec_mul(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![ZERO; n];
        for (i, xi) in x.iter().enumerate() {
            if *xi == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }

    /// Inverse by LU factorization with partial pivoting.
    pub fn inverse(&self) -> Result<CMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = CMatrix::identity(n);
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        for col in 0..n {
            let (piv, pval) = (col..n)
                .map(|r| (r, cabs(a[(r, col)])))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pval <= 1e-300 || pval < f64::EPSILON * 1e-4 * scale {
                return Err(Error::Singular);
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = ONE / a[(col, col)];
            for j in 0..n {
                a.data[col * n + j] *= d;
                inv.data[col * n + j] *= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let ac = a.data[col * n + j];
                    let ic = inv.data[col * n + j];
                    a.data[r * n + j] -= f * ac;
                    inv.data[r * n + j] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    /// Matrix exponential by scaling and squaring of a truncated Taylor series.
    pub fn expm(&self) -> CMatrix {
        let n = self.n;
        let norm = self.norm1();
        let mut squarings = 0u32;
        let mut s = 1.0;
        while norm * s > 0.5 {
            s *= 0.5;
            squarings += 1;
        }
        let a = self.scale(C64::new(s, 0.0));
        let mut term = CMatrix::identity(n);
        let mut sum = CMatrix::identity(n);
        for k in 1..=20 {
            term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Right eigen-decomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Columns are unit-norm right eigenvectors.
    pub vectors: CMatrix,
}

/// Eigenvalues and right eigenvectors via Hessenberg reduction, shifted QR to
/// complex Schur form, and back-substitution on the triangular factor.
pub fn eig(m: &CMatrix) -> Result<Eigen> {
    let n = m.dim();
    let mut t = m.clone();
    let mut z = CMatrix::identity(n);
    hessenberg(&mut t, &mut z);
    schur_qr(&mut t, &mut z)?;

    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let norm = t.max_abs().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * norm).max(1e-300);

    let mut y = CMatrix::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - lambda;
            if cabs(d) < smin {
                d = C64::new(smin, 0.0);
            }
            y[(i, k)] = -s / d;
        }
    }
    let mut vectors = z.matmul(&y);
    for k in 0..n {
        let nrm = libm::sqrt((0..n).map(|i| vectors[(i, k)].norm_sqr()).sum::<f64>());
        if nrm > 0.0 {
            for i in 0..n {
                vectors[(i, k)] /= nrm;
            }
        }
    }
    Ok(Eigen { values, vectors })
}

/// Householder reduction to upper Hessenberg form, `A = Z H Z†`.
fn hessenberg(a: &mut CMatrix, z: &mut CMatrix) {
    let n = a.dim();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha_sq: f64 = ((k + 1)..n).map(|i| a[(i, k)].norm_sqr()).sum();
        let tail_sq: f64 = ((k + 2)..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail_sq == 0.0 {
            continue;
        }
        let alpha = libm::sqrt(alpha_sq);
        let x0 = a[(k + 1, k)];
        let phase = if cabs(x0) > 0.0 { x0 / cabs(x0) } else { ONE };
        let mut v: Vec<C64> = vec![ZERO; n];
        v[k + 1] = x0 + phase * alpha;
        for i in (k + 2)..n {
            v[i] = a[(i, k)];
        }
        let vnorm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm_sq;
        // A <- P A
        for j in 0..n {
            let mut s = ZERO;
            for i in (k + 1)..n {
                s += v[i].conj() * a[(i, j)];
            }
            s *= beta;
            for i in (k + 1)..n {
                a[(i, j)] -= v[i] * s;
            }
        }
        // A <- A P, Z <- Z P
        for mat in [&mut *a, &mut *z] {
            for i in 0..n {
                let mut s = ZERO;
                for j in (k + 1)..n {
                    s += mat[(i, j)] * v[j];
                }
                s *= beta;
                for j in (k + 1)..n {
                    mat[(i, j)] -= s * v[j].conj();
                }
            }
        }
        for i in (k + 2)..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Givens rotation `[[c̄, s̄], [-s, c]]` that maps `(a, b)` onto `(r, 0)`.
fn givens(a: C64, b: C64) -> (C64, C64) {
    let r = libm::sqrt(a.norm_sqr() + b.norm_sqr());
    if r == 0.0 {
        (ONE, ZERO)
    } else {
        (a / r, b / r)
    }
}

/// Single-shift complex QR iteration on an upper Hessenberg matrix, leaving
/// the upper-triangular Schur factor in `h` and accumulating into `z`.
fn schur_qr(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.dim();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let anorm = h.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut rots: Vec<(C64, C64)> = Vec::with_capacity(n);

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let s = cabs(h[(lo - 1, lo - 1)]) + cabs(h[(lo, lo)]);
            let s = if s == 0.0 { anorm } else { s };
            if cabs(h[(lo, lo - 1)]) <= eps * s {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n {
            return Err(Error::EigenNoConvergence);
        }

        let mu = if iter.is_multiple_of(11) {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + C64::new(cabs(h[(hi, hi - 1)]) * 0.75, 0.0)
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let cc = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = csqrt(half * half + b * cc);
            let l1 = (a + d) * 0.5 + disc;
            let l2 = (a + d) * 0.5 - disc;
            if cabs(l1 - d) < cabs(l2 - d) {
                l1
            } else {
                l2
            }
        };

        for k in lo..=hi {
            h[(k, k)] -= mu;
        }
        rots.clear();
        for k in lo..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            rots.push((cs, sn));
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = cs.conj() * x + sn.conj() * y;
                h[(k + 1, j)] = -sn * x + cs * y;
            }
            h[(k + 1, k)] = ZERO;
        }
        for (off, &(cs, sn)) in rots.iter().enumerate() {
            let k = lo + off;
            let rows = (k + 2).min(hi) + 1;
            for i in 0..rows {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * cs + y * sn;
                h[(i, k + 1)] = -(x * sn.conj()) + y * cs.conj();
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * cs + y * sn;
                z[(i, k + 1)] = -(x * sn.conj()) + y * cs.conj();
            }
        }
        for k in lo..=hi {
            h[(k, k)] += mu;
        }
    }
    // Clear rounding residue below the diagonal.
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = ZERO;
        }
    }
    Ok(())
}
