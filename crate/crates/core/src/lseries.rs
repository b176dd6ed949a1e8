//! Truncated L-series: power series in T over Z/p^W with constant term 1,
//! cut at T^{D_T}, with an optional (numerator, denominator) factored form
//! where a trace formula produces one.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::padic::{Ctx, PAdicScalar};

#[derive(Clone, PartialEq)]
pub struct LSeries {
    coeffs: Vec<PAdicScalar>, // length t_cap + 1, coeffs[0] = 1
    pub factored: Option<Box<(LSeries, LSeries)>>,
}

impl std::fmt::Debug for LSeries {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", c.digit_string())?;
        }
        write!(f, "]")
    }
}

impl LSeries {
    pub fn one(ctx: &Ctx, t_cap: usize) -> Self {
        let mut coeffs = vec![PAdicScalar::zero(ctx); t_cap + 1];
        coeffs[0] = PAdicScalar::one(ctx);
        LSeries { coeffs, factored: None }
    }

    pub fn from_coeffs(coeffs: Vec<PAdicScalar>) -> Self {
        assert!(!coeffs.is_empty());
        LSeries { coeffs, factored: None }
    }

    /// Embed a polynomial in T^d: sum c_k (T^d)^k, truncated.
    pub fn from_poly_in_td(ctx: &Ctx, poly: &[PAdicScalar], d: usize, t_cap: usize) -> Self {
        let mut coeffs = vec![PAdicScalar::zero(ctx); t_cap + 1];
        for (k, c) in poly.iter().enumerate() {
            let e = k * d;
            if e <= t_cap {
                coeffs[e] = c.clone();
            }
        }
        LSeries { coeffs, factored: None }
    }

    pub fn t_cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, m: usize) -> &PAdicScalar {
        &self.coeffs[m]
    }

    pub fn coeffs(&self) -> &[PAdicScalar] {
        &self.coeffs
    }

    pub fn ctx(&self) -> &Ctx {
        self.coeffs[0].ctx()
    }

    pub fn truncate(&self, t_cap: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.truncate(t_cap + 1);
        LSeries { coeffs: c, factored: None }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cap = self.t_cap().min(other.t_cap());
        let ctx = self.ctx();
        let mut out = vec![PAdicScalar::zero(ctx); cap + 1];
        for (i, a) in self.coeffs.iter().enumerate().take(cap + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(cap + 1 - i) {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        LSeries { coeffs: out, factored: None }
    }

    /// Inverse of a series with constant term 1.
    pub fn inv(&self) -> Result<Self> {
        let ctx = self.ctx();
        if self.coeffs[0] != PAdicScalar::one(ctx) {
            return Err(Error::NotInvertibleDiagnostic(
                "L-series inversion requires constant term 1".into(),
            ));
        }
        let cap = self.t_cap();
        let mut h = vec![PAdicScalar::zero(ctx); cap + 1];
        h[0] = PAdicScalar::one(ctx);
        for m in 1..=cap {
            let mut acc = PAdicScalar::zero(ctx);
            for k in 1..=m {
                acc = acc.add(&self.coeffs[k].mul(&h[m - k]));
            }
            h[m] = acc.neg();
        }
        Ok(LSeries { coeffs: h, factored: None })
    }

    pub fn pow_i(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = LSeries::one(self.ctx(), self.t_cap());
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Congruence modulo (p^k, T^{t_m + 1}).
    pub fn congruent(&self, other: &Self, k: u32, t_m: usize) -> bool {
        let t = t_m.min(self.t_cap()).min(other.t_cap());
        (0..=t).all(|m| self.coeffs[m].congruent(&other.coeffs[m], k))
    }

    pub fn with_factored(mut self, num: LSeries, den: LSeries) -> Self {
        self.factored = Some(Box::new((num, den)));
        self
    }

    pub fn to_json(&self, prec: u32) -> Value {
        json!({
            "prec": prec.to_string(),
            "tcap": self.t_cap().to_string(),
            "coeffs": self.coeffs.iter().map(|c| c.digit_string()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicCtx;

    #[test]
    fn inv_and_mul_round_trip() {
        let ctx = PadicCtx::new(2, 8).unwrap();
        // 1 - 2T: inverse is sum 2^m T^m
        let mut f = LSeries::one(&ctx, 6);
        f.coeffs[1] = PAdicScalar::from_i64(&ctx, -2);
        let g = f.inv().unwrap();
        for m in 0..=6usize {
            assert_eq!(g.coeff(m), &PAdicScalar::from_u64(&ctx, 1 << m));
        }
        let prod = f.mul(&g);
        assert!(prod.congruent(&LSeries::one(&ctx, 6), 8, 6));
    }

    #[test]
    fn pow_negative() {
        let ctx = PadicCtx::new(3, 6).unwrap();
        let mut f = LSeries::one(&ctx, 5);
        f.coeffs[1] = PAdicScalar::from_i64(&ctx, 3);
        let a = f.pow_i(2).unwrap();
        let b = f.pow_i(-2).unwrap();
        assert!(a.mul(&b).congruent(&LSeries::one(&ctx, 5), 6, 5));
    }
}
