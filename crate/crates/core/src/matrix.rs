//! Dense square matrices over a commutative coefficient ring, with the
//! division-free Berkowitz characteristic polynomial. Berkowitz is used for
//! every characteristic polynomial here because the coefficient rings
//! (Z/p^W and its unramified extensions) have zero divisors.

use crate::error::{Error, Result};
use crate::padic::{PAdicScalar, UnramifiedElement};
use crate::series::TruncSeries;

/// Minimal commutative-ring surface; zero/one derive from a sample element so
/// implementations can carry their context.
pub trait RingElem: Clone + PartialEq {
    fn rzero(&self) -> Self;
    fn rone(&self) -> Self;
    fn radd(&self, o: &Self) -> Self;
    fn rsub(&self, o: &Self) -> Self;
    fn rmul(&self, o: &Self) -> Self;
    fn rinv(&self) -> Option<Self> {
        None
    }
    fn r_is_zero(&self) -> bool;
}

impl RingElem for PAdicScalar {
    fn rzero(&self) -> Self {
        PAdicScalar::zero(self.ctx())
    }
    fn rone(&self) -> Self {
        PAdicScalar::one(self.ctx())
    }
    fn radd(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn rsub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn rmul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn rinv(&self) -> Option<Self> {
        self.inv().ok()
    }
    fn r_is_zero(&self) -> bool {
        self.is_zero()
    }
}

impl RingElem for UnramifiedElement {
    fn rzero(&self) -> Self {
        UnramifiedElement::zero(&self.ext)
    }
    fn rone(&self) -> Self {
        UnramifiedElement::one(&self.ext)
    }
    fn radd(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn rsub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn rmul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn rinv(&self) -> Option<Self> {
        self.inv().ok()
    }
    fn r_is_zero(&self) -> bool {
        self.is_zero()
    }
}

impl RingElem for TruncSeries {
    fn rzero(&self) -> Self {
        TruncSeries::zero(self.ctx(), self.nvars, self.deg_cap)
    }
    fn rone(&self) -> Self {
        TruncSeries::one(self.ctx(), self.nvars, self.deg_cap)
    }
    fn radd(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn rsub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn rmul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn r_is_zero(&self) -> bool {
        self.is_zero()
    }
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SqMatrix<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: RingElem> SqMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        let mut a = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n);
            a.extend(r);
        }
        SqMatrix { n, a }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(f(i, j));
            }
        }
        SqMatrix { n, a }
    }

    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.a[i * self.n + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.a[i * self.n + j]
    }

    pub fn identity_like(sample: &T, n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { sample.rone() } else { sample.rzero() })
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut acc = self.a[0].rzero();
            for k in 0..n {
                let ab = self.at(i, k).rmul(o.at(k, j));
                acc = acc.radd(&ab);
            }
            acc
        })
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        SqMatrix {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x.radd(y)).collect(),
        }
    }

    pub fn scale(&self, s: &T) -> Self {
        SqMatrix { n: self.n, a: self.a.iter().map(|x| x.rmul(s)).collect() }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = self.a[0].rzero();
                for k in 0..self.n {
                    acc = acc.radd(&self.at(i, k).rmul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn kronecker(&self, o: &Self) -> Self {
        let n = self.n * o.n;
        SqMatrix {
            n,
            a: {
                let mut a = Vec::with_capacity(n * n);
                for i1 in 0..self.n {
                    for i2 in 0..o.n {
                        for j1 in 0..self.n {
                            for j2 in 0..o.n {
                                a.push(self.at(i1, j1).rmul(o.at(i2, j2)));
                            }
                        }
                    }
                }
                a
            },
        }
    }

    pub fn pow_u(&self, e: u64) -> Self {
        let sample = &self.a[0];
        let mut acc = Self::identity_like(sample, self.n);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn trace(&self) -> T {
        let mut acc = self.a[0].rzero();
        for i in 0..self.n {
            acc = acc.radd(self.at(i, i));
        }
        acc
    }

    /// Coefficients c_0..c_min(n, t_cap) of det(I - T A) = sum c_k T^k,
    /// by the Berkowitz vector recursion (division-free). These coincide with
    /// the coefficients of det(lambda I - A) read from lambda^n downwards.
    pub fn char_series(&self, t_cap: Option<usize>) -> Vec<T> {
        let n = self.n;
        let zero = if n == 0 { unreachable!("empty matrix") } else { self.a[0].rzero() };
        let keep = t_cap.map(|c| c + 1).unwrap_or(n + 1).min(n + 1);
        // c holds coefficients (1, c_1, ..), truncated to `keep` entries
        let mut c: Vec<T> = vec![zero.rone()];
        for k in 1..=n {
            // principal k x k block; Toeplitz column: t_0 = 1, t_1 = -a_kk,
            // t_i = -(R M^{i-2} C) for the bordering row R, column C, block M.
            let akk = self.at(k - 1, k - 1);
            let r: Vec<&T> = (0..k - 1).map(|j| self.at(k - 1, j)).collect();
            let col: Vec<T> = (0..k - 1).map(|i| self.at(i, k - 1).clone()).collect();
            let tlen = (k + 1).min(keep);
            let mut t: Vec<T> = Vec::with_capacity(tlen);
            t.push(zero.rone());
            if tlen > 1 {
                t.push(zero.rsub(akk));
            }
            let mut mc = col.clone();
            for i in 2..tlen {
                // t_i = -(R · M^{i-2} C)
                let mut dot = zero.clone();
                for (rj, mj) in r.iter().zip(&mc) {
                    dot = dot.radd(&rj.rmul(mj));
                }
                t.push(zero.rsub(&dot));
                if i + 1 < tlen {
                    // mc <- M mc  (M = leading (k-1) block)
                    let mut next = vec![zero.clone(); k - 1];
                    for (ii, nx) in next.iter_mut().enumerate() {
                        let mut acc = zero.clone();
                        for jj in 0..k - 1 {
                            acc = acc.radd(&self.at(ii, jj).rmul(&mc[jj]));
                        }
                        *nx = acc;
                    }
                    mc = next;
                }
            }
            // c_new = T * c (lower-triangular Toeplitz convolution)
            let new_len = (k + 1).min(keep);
            let mut cn: Vec<T> = vec![zero.clone(); new_len];
            for (i, cni) in cn.iter_mut().enumerate() {
                let mut acc = zero.clone();
                for j in 0..=i.min(c.len() - 1) {
                    if i - j < t.len() {
                        acc = acc.radd(&t[i - j].rmul(&c[j]));
                    }
                }
                *cni = acc;
            }
            c = cn;
        }
        c
    }

    /// Inverse via Cayley-Hamilton; requires the determinant to be a unit.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let c = self.char_series(None); // det(I - TA): c_n = (-1)^n det A
        let det_sign = c[n].clone();
        let det_inv = det_sign.rinv().ok_or_else(|| {
            Error::NonInvertibleFiber("matrix determinant is not a unit".into())
        })?;
        // det(lambda I - A) = sum_k c_k lambda^{n-k}; Cayley-Hamilton gives
        // A^{-1} = -(A^{n-1} + c_1 A^{n-2} + ... + c_{n-1} I) / c_n.
        let sample = &self.a[0];
        let mut acc = SqMatrix::identity_like(sample, n).scale(&c[n - 1]);
        let mut power = SqMatrix::identity_like(sample, n);
        for k in (0..n - 1).rev() {
            power = power.mul(self);
            acc = acc.add(&power.scale(&c[k]));
        }
        let neg_one = sample.rzero().rsub(&sample.rone());
        Ok(acc.scale(&neg_one.rmul(&det_inv)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{PadicCtx, PAdicScalar};

    fn m(vals: &[&[i64]]) -> SqMatrix<PAdicScalar> {
        let ctx = PadicCtx::new(3, 8).unwrap();
        SqMatrix::from_rows(
            vals.iter()
                .map(|r| r.iter().map(|&v| PAdicScalar::from_i64(&ctx, v)).collect())
                .collect(),
        )
    }

    fn coeffs_i64(cs: &[PAdicScalar]) -> Vec<i64> {
        let m = 3i64.pow(8);
        cs.iter()
            .map(|c| {
                let v: i64 = c.digit_string().parse().unwrap();
                if v > m / 2 {
                    v - m
                } else {
                    v
                }
            })
            .collect()
    }

    #[test]
    fn char_series_small_cases() {
        // diag(2, 5): det(I - TA) = (1 - 2T)(1 - 5T)
        let a = m(&[&[2, 0], &[0, 5]]);
        assert_eq!(coeffs_i64(&a.char_series(None)), vec![1, -7, 10]);
        // nilpotent
        let nil = m(&[&[0, 1], &[0, 0]]);
        assert_eq!(coeffs_i64(&nil.char_series(None)), vec![1, 0, 0]);
        // 3x3 with known characteristic polynomial
        let b = m(&[&[1, 2, 0], &[0, 1, 1], &[1, 0, 1]]);
        // det(lambda I - B) = lambda^3 - 3 lambda^2 + 3 lambda - 3
        assert_eq!(coeffs_i64(&b.char_series(None)), vec![1, -3, 3, -3]);
        // truncation keeps the low coefficients
        assert_eq!(coeffs_i64(&b.char_series(Some(1))), vec![1, -3]);
    }

    #[test]
    fn kronecker_and_trace() {
        let a = m(&[&[1, 1], &[0, 2]]);
        let b = m(&[&[3, 0], &[0, 4]]);
        let k = a.kronecker(&b);
        assert_eq!(k.n, 4);
        // trace multiplies
        assert_eq!(k.trace(), a.trace().mul(&b.trace()));
    }

    #[test]
    fn inverse_round_trip() {
        let a = m(&[&[1, 2], &[1, 1]]); // det = -1, unit
        let inv = a.inverse().unwrap();
        let id = SqMatrix::identity_like(&a.a[0], 2);
        assert_eq!(a.mul(&inv), id);
        let sing = m(&[&[3, 0], &[0, 1]]); // det = 3, not a unit mod 3
        assert!(sing.inverse().is_err());
    }
}
