//! Exact linear algebra over the Gaussian rationals ℚ(i).
//!
//! Every finite `f64` is a dyadic rational, so float input converts exactly;
//! brackets, filtrations and Jordan data are combinatorial and are computed
//! here without rounding. Matrices are small (n ≤ 10 or so), plain Gaussian
//! elimination over the field is the right tool.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{HbError, Result};
use crate::mats::{cplx, CMat, C64};

/// Gaussian rational `re + i·im`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GRat {
    pub fn zero() -> Self {
        GRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        GRat {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    pub fn from_i64(v: i64) -> Self {
        GRat {
            re: BigRational::from_integer(BigInt::from(v)),
            im: BigRational::zero(),
        }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        GRat {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    /// Exact conversion: a finite f64 is the dyadic rational it stores.
    pub fn from_f64_exact(re: f64, im: f64) -> Option<Self> {
        Some(GRat {
            re: BigRational::from_float(re)?,
            im: BigRational::from_float(im)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GRat {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn inv(&self) -> Self {
        let d = &self.re * &self.re + &self.im * &self.im;
        GRat {
            re: &self.re / &d,
            im: -&self.im / &d,
        }
    }

    pub fn to_c64(&self) -> C64 {
        cplx(ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Good enough for display/transfer; exact path never leaves GRat.
    let n = r.numer();
    let d = r.denom();
    let nf = bigint_to_f64(n);
    let df = bigint_to_f64(d);
    nf / df
}

fn bigint_to_f64(v: &BigInt) -> f64 {
    use num::ToPrimitive;
    v.to_f64().unwrap_or(f64::NAN)
}

impl Add for GRat {
    type Output = GRat;
    fn add(self, rhs: GRat) -> GRat {
        GRat {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for GRat {
    type Output = GRat;
    fn sub(self, rhs: GRat) -> GRat {
        GRat {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Mul for GRat {
    type Output = GRat;
    fn mul(self, rhs: GRat) -> GRat {
        GRat {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for GRat {
    type Output = GRat;
    fn neg(self) -> GRat {
        GRat {
            re: -self.re,
            im: -self.im,
        }
    }
}

/// Dense matrix over ℚ(i), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatMat {
    pub nrows: usize,
    pub ncols: usize,
    data: Vec<GRat>,
}

impl RatMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        RatMat {
            nrows,
            ncols,
            data: vec![GRat::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = GRat::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> GRat) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        RatMat { nrows, ncols, data }
    }

    /// Exact conversion from a float matrix (every finite f64 is rational).
    pub fn from_cmat_exact(m: &CMat) -> Result<Self> {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                out[(i, j)] = GRat::from_f64_exact(z.re, z.im)
                    .ok_or_else(|| HbError::InvalidInput("non-finite entry".into()))?;
            }
        }
        Ok(out)
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)].to_c64())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(GRat::is_zero)
    }

    pub fn mul(&self, rhs: &RatMat) -> RatMat {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out = RatMat::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                if self[(i, k)].is_zero() {
                    continue;
                }
                for j in 0..rhs.ncols {
                    if rhs[(k, j)].is_zero() {
                        continue;
                    }
                    let add = self[(i, k)].clone() * rhs[(k, j)].clone();
                    out[(i, j)] = out[(i, j)].clone() + add;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &RatMat) -> RatMat {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        RatMat::from_fn(self.nrows, self.ncols, |i, j| {
            self[(i, j)].clone() + rhs[(i, j)].clone()
        })
    }

    pub fn sub(&self, rhs: &RatMat) -> RatMat {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        RatMat::from_fn(self.nrows, self.ncols, |i, j| {
            self[(i, j)].clone() - rhs[(i, j)].clone()
        })
    }

    pub fn scale(&self, s: &GRat) -> RatMat {
        RatMat::from_fn(self.nrows, self.ncols, |i, j| {
            self[(i, j)].clone() * s.clone()
        })
    }

    pub fn pow(&self, mut k: usize) -> RatMat {
        assert_eq!(self.nrows, self.ncols);
        let mut base = self.clone();
        let mut acc = RatMat::identity(self.nrows);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn column(&self, j: usize) -> Vec<GRat> {
        (0..self.nrows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn from_columns(n: usize, cols: &[Vec<GRat>]) -> RatMat {
        RatMat::from_fn(n, cols.len(), |i, j| cols[j][i].clone())
    }

    /// Reduced row echelon form in place; returns pivot column indices.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.ncols {
            if row >= self.nrows {
                break;
            }
            // Deterministic pivoting: first nonzero entry from the top.
            let Some(p) = (row..self.nrows).find(|&r| !self[(r, col)].is_zero()) else {
                continue;
            };
            if p != row {
                for c in 0..self.ncols {
                    self.data.swap(p * self.ncols + c, row * self.ncols + c);
                }
            }
            let inv = self[(row, col)].inv();
            for c in col..self.ncols {
                self[(row, c)] = self[(row, c)].clone() * inv.clone();
            }
            for r in 0..self.nrows {
                if r != row && !self[(r, col)].is_zero() {
                    let factor = self[(r, col)].clone();
                    for c in col..self.ncols {
                        let sub = factor.clone() * self[(row, c)].clone();
                        self[(r, c)] = self[(r, c)].clone() - sub;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Kernel basis in reduced echelon convention.
    pub fn kernel_basis(&self) -> Vec<Vec<GRat>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
        let free: Vec<usize> = (0..self.ncols).filter(|c| !pivot_set.contains(c)).collect();
        let mut basis = Vec::new();
        for &f in &free {
            let mut v = vec![GRat::zero(); self.ncols];
            v[f] = GRat::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[(r, f)].clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Pivot columns of the original matrix: a basis of the column space.
    pub fn column_space_basis(&self) -> Vec<Vec<GRat>> {
        let mut m = self.clone();
        let pivots = m.rref();
        pivots.iter().map(|&c| self.column(c)).collect()
    }

    /// Solves `A x = b` exactly (one particular solution), or None.
    pub fn solve(&self, b: &[GRat]) -> Option<Vec<GRat>> {
        assert_eq!(self.nrows, b.len());
        let mut aug = RatMat::from_fn(self.nrows, self.ncols + 1, |i, j| {
            if j < self.ncols {
                self[(i, j)].clone()
            } else {
                b[i].clone()
            }
        });
        let pivots = aug.rref();
        if pivots.contains(&self.ncols) {
            return None; // inconsistent
        }
        let mut x = vec![GRat::zero(); self.ncols];
        for (r, &p) in pivots.iter().enumerate() {
            x[p] = aug[(r, self.ncols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<RatMat> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut aug = RatMat::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self[(i, j)].clone()
            } else if j - n == i {
                GRat::one()
            } else {
                GRat::zero()
            }
        });
        let pivots = aug.rref();
        if pivots.len() != n || pivots.iter().enumerate().any(|(k, &p)| k != p) {
            return None;
        }
        Some(RatMat::from_fn(n, n, |i, j| aug[(i, j + n)].clone()))
    }
}

impl std::ops::Index<(usize, usize)> for RatMat {
    type Output = GRat;
    fn index(&self, (i, j): (usize, usize)) -> &GRat {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut GRat {
        &mut self.data[i * self.ncols + j]
    }
}

/// Best rational approximation with bounded denominator via continued
/// fractions. Used to snap float inputs that are meant to be exact rationals.
pub fn snap_rational(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(BigRational::zero());
    }
    let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, x.floor() as i128, 1i128);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let approx = p1 as f64 / q1 as f64;
        if (approx - x).abs() <= tol * x.abs().max(1.0) {
            let r = BigRational::new(BigInt::from(p1), BigInt::from(q1));
            return Some(r);
        }
        if frac.abs() < 1e-18 {
            break;
        }
        let recip = 1.0 / frac;
        let a = recip.floor();
        frac = recip - a;
        let a = a as i128;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 || p2.abs() > i64::MAX as i128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    let approx = p1 as f64 / q1 as f64;
    if (approx - x).abs() <= tol * x.abs().max(1.0) {
        Some(BigRational::new(BigInt::from(p1), BigInt::from(q1)))
    } else {
        None
    }
}

/// Entry-wise rational snap of a complex matrix.
pub fn snap_cmat(m: &CMat, max_den: i64, tol: f64) -> Option<RatMat> {
    let mut out = RatMat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out[(i, j)] = GRat {
                re: snap_rational(z.re, max_den, tol)?,
                im: snap_rational(z.im, max_den, tol)?,
            };
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rref_rank_kernel() {
        // [[1,2,3],[2,4,6],[1,0,1]] has rank 2.
        let m = RatMat::from_fn(3, 3, |i, j| {
            let v = [[1, 2, 3], [2, 4, 6], [1, 0, 1]][i][j];
            GRat::from_i64(v)
        });
        assert_eq!(m.rank(), 2);
        let ker = m.kernel_basis();
        assert_eq!(ker.len(), 1);
        // Verify A k = 0 exactly.
        for i in 0..3 {
            let mut acc = GRat::zero();
            for j in 0..3 {
                acc = acc + m[(i, j)].clone() * ker[0][j].clone();
            }
            assert!(acc.is_zero());
        }
    }

    #[test]
    fn inverse_round_trip() {
        let m = RatMat::from_fn(3, 3, |i, j| {
            let v = [[2, 1, 0], [1, 3, 1], [0, 1, 2]][i][j];
            GRat::from_i64(v)
        });
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), RatMat::identity(3));
    }

    #[test]
    fn complex_arithmetic() {
        let i = GRat {
            re: BigRational::zero(),
            im: BigRational::one(),
        };
        let sq = i.clone() * i.clone();
        assert_eq!(sq, GRat::from_i64(-1));
        assert_eq!(i.inv() * i, GRat::one());
    }

    #[test]
    fn snap_recovers_simple_fractions() {
        let r = snap_rational(1.0 / 3.0, 1 << 24, 1e-9).unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(1), BigInt::from(3)));
        let r = snap_rational(-0.5, 1 << 24, 1e-9).unwrap();
        assert_eq!(r, BigRational::new(BigInt::from(-1), BigInt::from(2)));
        assert!(snap_rational(std::f64::consts::PI, 10, 1e-12).is_none());
    }
}
