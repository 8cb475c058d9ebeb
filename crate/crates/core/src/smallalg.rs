//! Dense complex linear algebra on tiny matrices.
//!
//! The encoder only ever needs 4×4 (two-qubit) and 2×2 (single-qubit)
//! matrices, so everything here works on fixed-size arrays. The 4×4 SVD is a
//! one-sided (Hestenes) Jacobi iteration; it is accurate to a few ulps and
//! fast enough to run tens of thousands of times per encoded image.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A 4×4 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix4(pub [[C64; 4]; 4]);

/// A 2×2 complex matrix stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix2(pub [[C64; 2]; 2]);

impl Default for Matrix4 {
    fn default() -> Self {
        Matrix4([[ZERO; 4]; 4])
    }
}

impl Matrix4 {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_real(rows: [[f64; 4]; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.0[i][j] = C64::new(v, 0.0);
            }
        }
        m
    }

    pub fn diagonal(d: [C64; 4]) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Controlled-NOT with the first tensor factor as control.
    pub fn cnot() -> Self {
        Self::from_real([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
    }

    /// Row-major flattening: entry `(r, c)` lands at `4 * r + c`.
    pub fn to_flat(&self) -> [C64; 16] {
        let mut out = [ZERO; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = self.0[r][c];
            }
        }
        out
    }

    pub fn from_flat(v: &[C64; 16]) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = v[4 * r + c];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[c][r] = self.0[r][c].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[c][r] = self.0[r][c];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for z in row.iter_mut() {
                *z = f(*z);
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix4) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Determinant by cofactor expansion over 2×2 minors.
    pub fn det(&self) -> C64 {
        let m = &self.0;
        let s0 = m[0][0] * m[1][1] - m[1][0] * m[0][1];
        let s1 = m[0][0] * m[1][2] - m[1][0] * m[0][2];
        let s2 = m[0][0] * m[1][3] - m[1][0] * m[0][3];
        let s3 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
        let s4 = m[0][1] * m[1][3] - m[1][1] * m[0][3];
        let s5 = m[0][2] * m[1][3] - m[1][2] * m[0][3];
        let c5 = m[2][2] * m[3][3] - m[3][2] * m[2][3];
        let c4 = m[2][1] * m[3][3] - m[3][1] * m[2][3];
        let c3 = m[2][1] * m[3][2] - m[3][1] * m[2][2];
        let c2 = m[2][0] * m[3][3] - m[3][0] * m[2][3];
        let c1 = m[2][0] * m[3][2] - m[3][0] * m[2][2];
        let c0 = m[2][0] * m[3][1] - m[3][0] * m[2][1];
        s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
    }

    /// Kronecker product `a ⊗ b`; `a` acts on the high-order index bit.
    pub fn kron(a: &Matrix2, b: &Matrix2) -> Self {
        let mut m = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                    }
                }
            }
        }
        m
    }

    /// Swap the roles of the two tensor factors (conjugation by SWAP).
    pub fn swap_qubits(&self) -> Self {
        const P: [usize; 4] = [0, 2, 1, 3];
        let mut m = Self::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[P[r]][P[c]] = self.0[r][c];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Matrix4 {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Matrix4 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Mul for Matrix4 {
    type Output = Matrix4;
    #[allow(clippy::op_ref)]
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        &self * &rhs
    }
}

impl Mul<&Matrix4> for &Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: &Matrix4) -> Matrix4 {
        let mut m = Matrix4::zeros();
        for r in 0..4 {
            for k in 0..4 {
                let a = self.0[r][k];
                for c in 0..4 {
                    m.0[r][c] += a * rhs.0[k][c];
                }
            }
        }
        m
    }
}

impl Add for Matrix4 {
    type Output = Matrix4;
    fn add(mut self, rhs: Matrix4) -> Matrix4 {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
        self
    }
}

impl Sub for Matrix4 {
    type Output = Matrix4;
    fn sub(mut self, rhs: Matrix4) -> Matrix4 {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] -= rhs.0[r][c];
            }
        }
        self
    }
}

impl Matrix2 {
    pub fn identity() -> Self {
        Matrix2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Matrix2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn rz(theta: f64) -> Self {
        Matrix2([
            [C64::from_polar(1.0, -theta / 2.0), ZERO],
            [ZERO, C64::from_polar(1.0, theta / 2.0)],
        ])
    }

    pub fn ry(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Matrix2([
            [C64::new(c, 0.0), C64::new(-s, 0.0)],
            [C64::new(s, 0.0), C64::new(c, 0.0)],
        ])
    }

    /// The OpenQASM 2.0 `u3(θ, φ, λ)` gate.
    pub fn u3(theta: f64, phi: f64, lambda: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Matrix2([
            [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
            [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
        ])
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// `A = X · diag(D) · Y` with `X`, `Y` unitary and `D` sorted descending.
///
/// Note that `Y` enters the product unconjugated, i.e. `Y = V†` in the
/// textbook `U Σ V†` notation.
#[derive(Clone, Copy, Debug)]
pub struct SvdResult {
    pub x: Matrix4,
    pub d: [f64; 4],
    pub y: Matrix4,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix4 {
        let mut xd = self.x;
        for row in xd.0.iter_mut() {
            for (c, z) in row.iter_mut().enumerate() {
                *z *= self.d[c];
            }
        }
        xd * self.y
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.d.iter().sum()
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;
/// Columns whose squared norm is below this fraction of the matrix's are left
/// alone; rotating rounding noise against a large column never converges.
pub(crate) const NEGLIGIBLE_COLUMN: f64 = 1e-28;

/// One-sided Jacobi on the columns of `a`. On return the columns of `a` are
/// mutually orthogonal and, when `v` is given, `a_in · v = a_out`.
fn orthogonalize_columns(a: &mut [[C64; 4]; 4], mut v: Option<&mut [[C64; 4]; 4]>) {
    let floor = NEGLIGIBLE_COLUMN * a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = ZERO;
                for row in a.iter() {
                    alpha += row[p].norm_sqr();
                    beta += row[q].norm_sqr();
                    gamma += row[p].conj() * row[q];
                }
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= floor
                {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // [a_p, a_q] <- [a_p, a_q] · [[c, s·e^{iφ}], [-s·e^{-iφ}, c]]
                let sp = phase * s;
                let spc = phase.conj() * s;
                for row in a.iter_mut() {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = xp * c - xq * spc;
                    row[q] = xp * sp + xq * c;
                }
                if let Some(v) = v.as_deref_mut() {
                    for row in v.iter_mut() {
                        let (xp, xq) = (row[p], row[q]);
                        row[p] = xp * c - xq * spc;
                        row[q] = xp * sp + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn column_norms(a: &[[C64; 4]; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (c, o) in out.iter_mut().enumerate() {
        *o = a.iter().map(|row| row[c].norm_sqr()).sum::<f64>().sqrt();
    }
    out
}

/// Singular values only, sorted descending. Cheaper than [`svd_4x4`].
pub fn singular_values_4x4(m: &Matrix4) -> [f64; 4] {
    let mut a = m.0;
    orthogonalize_columns(&mut a, None);
    let mut d = column_norms(&a);
    d.sort_by(|x, y| y.total_cmp(x));
    d
}

/// Full singular value decomposition of a 4×4 complex matrix.
pub fn svd_4x4(m: &Matrix4) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let mut a = m.0;
    let mut v = Matrix4::identity().0;
    orthogonalize_columns(&mut a, Some(&mut v));
    let norms = column_norms(&a);

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let scale = norms[order[0]].max(f64::MIN_POSITIVE);
    let mut x = Matrix4::zeros();
    let mut y_adj = Matrix4::zeros(); // columns of V
    let mut d = [0.0; 4];
    let mut filled = [false; 4];
    for (k, &src) in order.iter().enumerate() {
        d[k] = norms[src];
        for r in 0..4 {
            y_adj.0[r][k] = v[r][src];
        }
        if norms[src] > 1e-14 * scale && norms[src] > 0.0 {
            for r in 0..4 {
                x.0[r][k] = a[r][src] / norms[src];
            }
            filled[k] = true;
        }
    }
    complete_orthonormal_columns(&mut x, &filled);
    Ok(SvdResult {
        x,
        d,
        y: y_adj.adjoint(),
    })
}

/// Fill the columns of `m` not marked in `filled` so that `m` becomes unitary,
/// using Gram–Schmidt against the standard basis.
fn complete_orthonormal_columns(m: &mut Matrix4, filled: &[bool; 4]) {
    let mut have: Vec<usize> = (0..4).filter(|&k| filled[k]).collect();
    for k in 0..4 {
        if filled[k] {
            continue;
        }
        let mut best: Option<[C64; 4]> = None;
        let mut best_norm = 0.0;
        for e in 0..4 {
            let mut cand = [ZERO; 4];
            cand[e] = ONE;
            for _ in 0..2 {
                for &h in &have {
                    let proj: C64 = (0..4).map(|r| m.0[r][h].conj() * cand[r]).sum();
                    for (r, c) in cand.iter_mut().enumerate() {
                        *c -= proj * m.0[r][h];
                    }
                }
            }
            let n = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > best_norm {
                best_norm = n;
                best = Some(cand);
            }
        }
        let cand = best.expect("a 4-dimensional space always has a complement vector");
        for r in 0..4 {
            m.0[r][k] = cand[r] / best_norm;
        }
        have.push(k);
    }
}

/// `max |(U†U − I)_{ij}|`.
pub fn unitarity_defect(u: &Matrix4) -> f64 {
    (&u.adjoint() * u).max_abs_diff(&Matrix4::identity())
}

/// Nearest unitary in Frobenius norm (the polar factor `X·Y` of the SVD).
pub fn nearest_unitary(m: &Matrix4) -> Result<Matrix4> {
    let svd = svd_4x4(m)?;
    Ok(svd.x * svd.y)
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix given
/// row-major in `a` (`n × n`). Returns eigenvalues ascending and, if asked,
/// the eigenvectors as columns of a row-major `n × n` matrix.
pub fn symmetric_eigen(n: usize, a: &[f64], want_vectors: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    assert_eq!(a.len(), n * n, "symmetric_eigen: expected an n×n matrix");
    let mut m = a.to_vec();
    let mut v = if want_vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = v.map(|v| {
        let mut out = vec![0.0; n * n];
        for (dst, &src) in order.iter().enumerate() {
            for k in 0..n {
                out[k * n + dst] = v[k * n + src];
            }
        }
        out
    });
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rng: &mut impl Rng) -> Matrix4 {
        let mut m = Matrix4::zeros();
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    /// Independent oracle: eigenvalues of the Hermitian matrix `A†A` via the
    /// real symmetric 8×8 embedding [[Re, -Im], [Im, Re]], whose spectrum is
    /// the Hermitian spectrum with every value doubled.
    fn gram_eigenvalues(a: &Matrix4) -> [f64; 4] {
        let h = &a.adjoint() * a;
        let mut emb = vec![0.0; 64];
        for r in 0..4 {
            for c in 0..4 {
                let z = h.0[r][c];
                emb[r * 8 + c] = z.re;
                emb[(r + 4) * 8 + c + 4] = z.re;
                emb[r * 8 + c + 4] = -z.im;
                emb[(r + 4) * 8 + c] = z.im;
            }
        }
        let (vals, _) = symmetric_eigen(8, &emb, false);
        // ascending, pairs duplicated
        [vals[7], vals[5], vals[3], vals[1]]
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let svd = svd_4x4(&Matrix4::identity()).unwrap();
        for d in svd.d {
            assert!((d - 1.0).abs() < 1e-15);
        }
        assert!(svd.reconstruct().max_abs_diff(&Matrix4::identity()) < 1e-14);
    }

    #[test]
    fn diagonal_with_zero() {
        let a = Matrix4::from_real([
            [3.0, 0.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]);
        let svd = svd_4x4(&a).unwrap();
        assert_eq!(svd.d, [3.0, 2.0, 1.0, 0.0]);
        assert!(unitarity_defect(&svd.x) < 1e-12);
        assert!(unitarity_defect(&svd.y) < 1e-12);
        assert!(svd.reconstruct().max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn random_matrices_match_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_matrix(&mut rng);
            let svd = svd_4x4(&a).unwrap();
            assert!(svd.reconstruct().max_abs_diff(&a) <= 1e-10);
            assert!(unitarity_defect(&svd.x) <= 1e-10);
            assert!(unitarity_defect(&svd.y) <= 1e-10);
            assert!(svd.d.windows(2).all(|w| w[0] >= w[1]));
            let eig = gram_eigenvalues(&a);
            for k in 0..4 {
                assert!(
                    (svd.d[k] - eig[k].max(0.0).sqrt()).abs() < 1e-9,
                    "{:?} vs {:?}",
                    svd.d,
                    eig
                );
            }
            let fast = singular_values_4x4(&a);
            for k in 0..4 {
                assert!((fast[k] - svd.d[k]).abs() < 1e-12);
            }
            let prod: f64 = svd.d.iter().product();
            assert!((prod - a.det().norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficient_inputs_still_give_unitary_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 0..4 {
            let mut a = Matrix4::zeros();
            for _ in 0..rank {
                let u: Vec<C64> = (0..4).map(|_| C64::new(rng.gen(), rng.gen())).collect();
                let w: Vec<C64> = (0..4).map(|_| C64::new(rng.gen(), rng.gen())).collect();
                for r in 0..4 {
                    for c in 0..4 {
                        a.0[r][c] += u[r] * w[c].conj();
                    }
                }
            }
            let svd = svd_4x4(&a).unwrap();
            assert!(unitarity_defect(&svd.x) <= 1e-10, "rank {rank}");
            assert!(unitarity_defect(&svd.y) <= 1e-10, "rank {rank}");
            assert!(svd.reconstruct().max_abs_diff(&a) <= 1e-10, "rank {rank}");
        }
    }

    #[test]
    fn spectrum_is_recovered_from_unitary_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = nearest_unitary(&random_matrix(&mut rng)).unwrap();
            let y = nearest_unitary(&random_matrix(&mut rng)).unwrap();
            let mut d: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0)).collect();
            d.sort_by(|a, b| b.total_cmp(a));
            let svd_in = SvdResult {
                x,
                d: [d[0], d[1], d[2], d[3]],
                y,
            };
            let out = svd_4x4(&svd_in.reconstruct()).unwrap();
            for k in 0..4 {
                assert!((out.d[k] - d[k]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut a = Matrix4::identity();
        a.0[1][2] = C64::new(f64::NAN, 0.0);
        assert!(matches!(svd_4x4(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn unitarity_defect_examples() {
        assert_eq!(unitarity_defect(&Matrix4::identity()), 0.0);
        assert_eq!(unitarity_defect(&Matrix4::cnot()), 0.0);
        let mut d = Matrix4::identity();
        d.0[0][0] = C64::new(2.0, 0.0);
        assert!((unitarity_defect(&d) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 7;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(n, &a, true);
        let v = vecs.unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| v[i * n + k] * vals[k] * v[j * n + k]).sum();
                assert!((r - a[i * n + j]).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kron_and_swap() {
        let a = Matrix2::ry(0.3);
        let b = Matrix2::rz(1.1);
        let ab = Matrix4::kron(&a, &b);
        let ba = Matrix4::kron(&b, &a);
        assert!(ab.swap_qubits().max_abs_diff(&ba) < 1e-15);
        assert!((ab.det() - (a.det() * a.det() * b.det() * b.det())).norm() < 1e-14);
    }
}
