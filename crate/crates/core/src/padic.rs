//! Exact arithmetic in Z/p^W, in unramified extensions W_m = Z_p[t]/(h(t))
//! truncated at precision W, and in the residue fields F_{p^m}.
//!
//! Every value carries `known_prec`: the number of low p-adic digits that are
//! guaranteed to agree with the untruncated object. Ring operations can only
//! keep or shrink it; exact division by p^k shrinks it by k.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Base context: the prime p and working precision W, with p^0..p^W cached.
#[derive(Debug)]
pub struct PadicCtx {
    pub p: u64,
    pub w: u32,
    powers: Vec<BigUint>,
}

pub type Ctx = Arc<PadicCtx>;

impl PartialEq for PadicCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.w == other.w
    }
}
impl Eq for PadicCtx {}

impl PadicCtx {
    pub fn new(p: u64, w: u32) -> Result<Ctx> {
        if !is_prime(p) {
            return Err(Error::CompositeModulus(p));
        }
        assert!(w >= 1, "precision must be at least 1");
        let big_p = BigUint::from(p);
        let mut powers = Vec::with_capacity(w as usize + 1);
        let mut acc = BigUint::one();
        for _ in 0..=w {
            powers.push(acc.clone());
            acc *= &big_p;
        }
        Ok(Arc::new(PadicCtx { p, w, powers }))
    }

    /// p^k for 0 <= k <= W.
    pub fn p_pow(&self, k: u32) -> &BigUint {
        &self.powers[k as usize]
    }

    pub fn modulus(&self) -> &BigUint {
        &self.powers[self.w as usize]
    }
}

/// Deterministic trial-division primality test; moduli here are small.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// An element of Z/p^W with tracked precision: the stored residue agrees with
/// the exact value modulo p^known_prec.
#[derive(Clone)]
pub struct PAdicScalar {
    value: BigUint,
    prec: u32,
    ctx: Ctx,
}

impl fmt::Debug for PAdicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(O^{})", self.value, self.prec)
    }
}

impl PartialEq for PAdicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && *self.ctx == *other.ctx
    }
}
impl Eq for PAdicScalar {}

impl PAdicScalar {
    pub fn from_biguint(ctx: &Ctx, v: BigUint) -> Self {
        let value = v % ctx.modulus();
        PAdicScalar { value, prec: ctx.w, ctx: ctx.clone() }
    }

    pub fn from_bigint(ctx: &Ctx, v: &BigInt) -> Self {
        let m = BigInt::from(ctx.modulus().clone());
        let mut r = v % &m;
        if r.is_negative() {
            r += &m;
        }
        Self::from_biguint(ctx, r.to_biguint().expect("non-negative residue"))
    }

    pub fn from_u64(ctx: &Ctx, v: u64) -> Self {
        Self::from_biguint(ctx, BigUint::from(v))
    }

    pub fn from_i64(ctx: &Ctx, v: i64) -> Self {
        Self::from_bigint(ctx, &BigInt::from(v))
    }

    pub fn zero(ctx: &Ctx) -> Self {
        Self::from_u64(ctx, 0)
    }

    pub fn one(ctx: &Ctx) -> Self {
        Self::from_u64(ctx, 1)
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn known_prec(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn with_prec(mut self, prec: u32) -> Self {
        self.prec = prec.min(self.ctx.w);
        self
    }

    fn assert_ctx(&self, other: &Self) {
        assert!(*self.ctx == *other.ctx, "p-adic context mismatch");
    }

    /// Exact p-adic valuation of the stored residue; None for residue 0.
    pub fn ord_raw(&self) -> Option<u32> {
        if self.value.is_zero() {
            return None;
        }
        let p = BigUint::from(self.ctx.p);
        let mut v = self.value.clone();
        let mut ord = 0u32;
        while (&v % &p).is_zero() {
            v /= &p;
            ord += 1;
        }
        Some(ord)
    }

    /// Valuation when it is determined at the known precision: Some(v) iff
    /// v < known_prec; otherwise only `ord >= known_prec` is guaranteed.
    pub fn ord_resolved(&self) -> Option<u32> {
        match self.ord_raw() {
            Some(v) if v < self.prec => Some(v),
            _ => None,
        }
    }

    /// Guaranteed lower bound on the valuation of the exact value.
    pub fn ord_lower_bound(&self) -> u32 {
        match self.ord_raw() {
            Some(v) => v.min(self.prec),
            None => self.prec,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_ctx(other);
        let v = (&self.value + &other.value) % self.ctx.modulus();
        PAdicScalar { value: v, prec: self.prec.min(other.prec), ctx: self.ctx.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_ctx(other);
        let v = (self.ctx.modulus() + &self.value - &other.value) % self.ctx.modulus();
        PAdicScalar { value: v, prec: self.prec.min(other.prec), ctx: self.ctx.clone() }
    }

    pub fn neg(&self) -> Self {
        let v = if self.value.is_zero() {
            BigUint::zero()
        } else {
            self.ctx.modulus() - &self.value
        };
        PAdicScalar { value: v, prec: self.prec, ctx: self.ctx.clone() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_ctx(other);
        let v = (&self.value * &other.value) % self.ctx.modulus();
        // a known mod p^α times b known mod p^β is known mod
        // p^min(α + ord b, β + ord a, W).
        let pa = self.prec as u64 + other.ord_lower_bound() as u64;
        let pb = other.prec as u64 + self.ord_lower_bound() as u64;
        let prec = pa.min(pb).min(self.ctx.w as u64) as u32;
        PAdicScalar { value: v, prec, ctx: self.ctx.clone() }
    }

    pub fn mul_p_pow(&self, k: u32) -> Self {
        let k = k.min(self.ctx.w);
        let v = (&self.value * self.ctx.p_pow(k)) % self.ctx.modulus();
        let prec = (self.prec as u64 + k as u64).min(self.ctx.w as u64) as u32;
        PAdicScalar { value: v, prec, ctx: self.ctx.clone() }
    }

    /// Exact division by p^k. Fails with PrecisionExhausted when no certified
    /// digits would remain, and with IntegralityViolation when the value is
    /// certifiably not divisible.
    pub fn div_exact_p(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if k >= self.prec {
            return Err(Error::PrecisionExhausted(format!(
                "dividing by p^{k} with only {} known digits",
                self.prec
            )));
        }
        let pk = self.ctx.p_pow(k);
        if !(&self.value % pk).is_zero() {
            return Err(Error::IntegralityViolation(format!(
                "value {} not divisible by p^{k}",
                self.value
            )));
        }
        Ok(PAdicScalar {
            value: &self.value / pk,
            prec: self.prec - k,
            ctx: self.ctx.clone(),
        })
    }

    /// Multiplicative inverse of a p-adic unit.
    pub fn inv(&self) -> Result<Self> {
        if (&self.value % BigUint::from(self.ctx.p)).is_zero() {
            return Err(Error::NotInvertibleDiagnostic(format!(
                "{} is not a unit mod p",
                self.value
            )));
        }
        let m = BigInt::from(self.ctx.modulus().clone());
        let a = BigInt::from(self.value.clone());
        let eg = a.extended_gcd(&m);
        let mut inv = eg.x % &m;
        if inv.is_negative() {
            inv += &m;
        }
        Ok(PAdicScalar {
            value: inv.to_biguint().unwrap(),
            prec: self.prec,
            ctx: self.ctx.clone(),
        })
    }

    pub fn pow_u(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.ctx).with_prec(self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn pow_big(&self, e: &BigUint) -> Self {
        let mut acc = Self::one(&self.ctx).with_prec(self.prec);
        let mut base = self.clone();
        for i in 0..e.bits() {
            if e.bit(i) {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
        }
        acc
    }

    /// Integer power with negative exponents allowed for units.
    pub fn pow_i(&self, e: i64) -> Result<Self> {
        if e >= 0 {
            Ok(self.pow_u(e as u64))
        } else {
            Ok(self.inv()?.pow_u(e.unsigned_abs()))
        }
    }

    /// Residue mod p as a machine integer.
    pub fn residue(&self) -> u64 {
        (&self.value % BigUint::from(self.ctx.p)).to_u64().unwrap()
    }

    /// Congruence mod p^k (on stored residues).
    pub fn congruent(&self, other: &Self, k: u32) -> bool {
        let pk = self.ctx.p_pow(k.min(self.ctx.w));
        (&self.value % pk) == (&other.value % pk)
    }

    pub fn digit_string(&self) -> String {
        self.value.to_str_radix(10)
    }
}

// ---------------------------------------------------------------------------
// Residue-field arithmetic F_{p^m} = F_p[t]/(hbar), used for irreducibility
// scans and closed-point orbits. Elements are dense coefficient vectors.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FqArith {
    pub p: u64,
    pub h: Vec<u64>, // monic, length m+1
}

impl FqArith {
    pub fn m(&self) -> usize {
        self.h.len() - 1
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.m()]
    }

    pub fn one(&self) -> Vec<u64> {
        let mut v = self.zero();
        if !v.is_empty() {
            v[0] = 1;
        }
        v
    }

    pub fn is_zero(e: &[u64]) -> bool {
        e.iter().all(|&c| c == 0)
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| (x + y) % self.p).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| (x + self.p - y) % self.p).collect()
    }

    pub fn scale(&self, a: &[u64], c: u64) -> Vec<u64> {
        a.iter().map(|&x| (x * (c % self.p)) % self.p).collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let m = self.m();
        let mut prod = vec![0u64; 2 * m.max(1)];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % self.p;
            }
        }
        // reduce by monic h: t^m = -(h - t^m)
        for d in (m..2 * m.max(1)).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for j in 0..m {
                let sub = (c * self.h[j]) % self.p;
                prod[d - m + j] = (prod[d - m + j] + self.p * self.p - sub) % self.p;
            }
        }
        prod.truncate(m.max(1));
        prod[..m].to_vec()
    }

    pub fn pow(&self, a: &[u64], e: &BigUint) -> Vec<u64> {
        let mut acc = self.one();
        let mut base = a.to_vec();
        for i in 0..e.bits() {
            if e.bit(i) {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
        }
        acc
    }

    /// Frobenius y -> y^q with q = p^a.
    pub fn q_pow(&self, a_exp: u32, e: &[u64]) -> Vec<u64> {
        let q = BigUint::from(self.p).pow(a_exp);
        self.pow(e, &q)
    }
}

fn pad(a: &[u64], m: usize) -> Vec<u64> {
    let mut v = a.to_vec();
    v.resize(m.max(a.len()), 0);
    v.truncate(m);
    v
}

fn fp_poly_gcd(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    let norm = |v: &mut Vec<u64>| {
        while v.last() == Some(&0) {
            v.pop();
        }
    };
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    norm(&mut a);
    norm(&mut b);
    while !b.is_empty() {
        // a mod b
        let lead_inv = mod_inv_u64(b[b.len() - 1], p);
        while a.len() >= b.len() && !a.is_empty() {
            let shift = a.len() - b.len();
            let c = (a[a.len() - 1] * lead_inv) % p;
            if c != 0 {
                for (i, &bc) in b.iter().enumerate() {
                    a[shift + i] = (a[shift + i] + p * p - c * bc % p) % p;
                }
            }
            let l = a.len();
            a.truncate(l - 1);
            norm(&mut a);
            if a.len() < b.len() {
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
        norm(&mut b);
    }
    a
}

pub fn mod_inv_u64(a: u64, p: u64) -> u64 {
    // Fermat; p prime and a nonzero mod p.
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

/// Irreducibility of a monic degree-m polynomial over F_p:
/// t^{p^m} = t mod h, and gcd(t^{p^{m/l}} - t, h) = 1 for every prime l | m.
pub fn fp_poly_irreducible(p: u64, h: &[u64]) -> bool {
    let m = h.len() - 1;
    if m == 0 {
        return false;
    }
    let t: Vec<u64> = if m == 1 { vec![0] } else { vec![0, 1] };
    if m == 1 {
        return true; // monic linear polynomials are irreducible
    }
    let frob = |e: &[u64], times: usize| -> Vec<u64> {
        let mut v = e.to_vec();
        let pe = BigUint::from(p);
        let arith = FqArith { p, h: h.to_vec() };
        for _ in 0..times {
            v = arith.pow(&v, &pe);
        }
        v
    };
    let tm = frob(&pad(&t, m), m);
    if tm != pad(&t, m) {
        return false;
    }
    let mut rem = m;
    let mut primes = Vec::new();
    let mut d = 2;
    while d * d <= rem {
        if rem % d == 0 {
            primes.push(d);
            while rem % d == 0 {
                rem /= d;
            }
        }
        d += 1;
    }
    if rem > 1 {
        primes.push(rem);
    }
    for l in primes {
        let te = frob(&pad(&t, m), m / l);
        let diff: Vec<u64> = te
            .iter()
            .zip(pad(&t, m).iter())
            .map(|(&x, &y)| (x + p - y) % p)
            .collect();
        let g = fp_poly_gcd(p, &diff, h);
        if g.len() != 1 {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Unramified extensions W_m = (Z/p^W)[t]/(h(t)).
// ---------------------------------------------------------------------------

/// Context of an unramified extension of degree m over the prime field, with
/// q = p^a recording the base field F_q of the ambient geometry.
#[derive(Debug)]
pub struct ExtensionContext {
    pub ctx: Ctx,
    pub a: u32,
    pub m: u32,
    pub h: Vec<u64>,
    frob_t: OnceLock<UnramifiedElement>,
}

pub type ExtCtx = Arc<ExtensionContext>;

impl PartialEq for ExtensionContext {
    fn eq(&self, other: &Self) -> bool {
        *self.ctx == *other.ctx && self.m == other.m && self.h == other.h
    }
}

/// The context with h = the lexicographically smallest monic degree-m
/// polynomial over [0, p) irreducible mod p (most-significant coefficient
/// compared first); m = 1 yields h = t.
pub fn build_extension(ctx: &Ctx, a: u32, m: u32) -> Result<ExtCtx> {
    assert!(m >= 1);
    let p = ctx.p;
    if m == 1 {
        return Ok(Arc::new(ExtensionContext {
            ctx: ctx.clone(),
            a,
            m,
            h: vec![0, 1],
            frob_t: OnceLock::new(),
        }));
    }
    let total = BigUint::from(p).pow(m);
    let mut k = BigUint::zero();
    while k < total {
        // digits of k base p, most significant digit = coefficient of t^{m-1}
        let mut h = vec![0u64; m as usize + 1];
        h[m as usize] = 1;
        let mut rem = k.clone();
        let bp = BigUint::from(p);
        for i in (0..m as usize).rev() {
            let pow = bp.pow(i as u32);
            let digit = (&rem / &pow).to_u64().unwrap();
            h[i] = digit;
            rem %= &pow;
        }
        // reorder: we filled h[i] with digit of p^i using big-endian scan
        if fp_poly_irreducible(p, &h) {
            return Ok(Arc::new(ExtensionContext {
                ctx: ctx.clone(),
                a,
                m,
                h,
                frob_t: OnceLock::new(),
            }));
        }
        k += BigUint::one();
    }
    unreachable!("irreducible polynomials of every degree exist over F_p")
}

impl ExtensionContext {
    pub fn fq(&self) -> FqArith {
        FqArith { p: self.ctx.p, h: self.h.clone() }
    }

    pub fn q(&self) -> u64 {
        self.ctx.p.pow(self.a)
    }
}

/// Element of W_m in the basis 1, t, ..., t^{m-1}.
#[derive(Clone)]
pub struct UnramifiedElement {
    pub coeffs: Vec<PAdicScalar>,
    pub ext: ExtCtx,
}

impl fmt::Debug for UnramifiedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}", c)?;
        }
        write!(f, "]")
    }
}

impl PartialEq for UnramifiedElement {
    fn eq(&self, other: &Self) -> bool {
        *self.ext == *other.ext && self.coeffs == other.coeffs
    }
}

impl UnramifiedElement {
    pub fn zero(ext: &ExtCtx) -> Self {
        let c = PAdicScalar::zero(&ext.ctx);
        UnramifiedElement { coeffs: vec![c; ext.m as usize], ext: ext.clone() }
    }

    pub fn one(ext: &ExtCtx) -> Self {
        let mut e = Self::zero(ext);
        e.coeffs[0] = PAdicScalar::one(&ext.ctx);
        e
    }

    pub fn from_scalar(ext: &ExtCtx, s: PAdicScalar) -> Self {
        let mut e = Self::zero(ext);
        e.coeffs[0] = s;
        e
    }

    /// Generator t of the extension (zero in degree 1, where t maps to 0).
    pub fn gen(ext: &ExtCtx) -> Self {
        let mut e = Self::zero(ext);
        if ext.m > 1 {
            e.coeffs[1] = PAdicScalar::one(&ext.ctx);
        }
        e
    }

    /// Lift of a residue-field element given by its coefficient vector.
    pub fn from_residue(ext: &ExtCtx, r: &[u64]) -> Self {
        let coeffs = (0..ext.m as usize)
            .map(|i| PAdicScalar::from_u64(&ext.ctx, *r.get(i).unwrap_or(&0)))
            .collect();
        UnramifiedElement { coeffs, ext: ext.clone() }
    }

    pub fn residue(&self) -> Vec<u64> {
        self.coeffs.iter().map(|c| c.residue()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// True when all extension components (coefficients of t, t^2, ...) vanish.
    pub fn is_rational(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    pub fn rational_part(&self) -> PAdicScalar {
        self.coeffs[0].clone()
    }

    pub fn add(&self, o: &Self) -> Self {
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add(b)).collect();
        UnramifiedElement { coeffs, ext: self.ext.clone() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.sub(b)).collect();
        UnramifiedElement { coeffs, ext: self.ext.clone() }
    }

    pub fn neg(&self) -> Self {
        UnramifiedElement {
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
            ext: self.ext.clone(),
        }
    }

    pub fn scale(&self, s: &PAdicScalar) -> Self {
        UnramifiedElement {
            coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect(),
            ext: self.ext.clone(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let m = self.ext.m as usize;
        let ctx = &self.ext.ctx;
        let zero = PAdicScalar::zero(ctx);
        let mut prod = vec![zero.clone(); 2 * m.max(1)];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                prod[i + j] = prod[i + j].add(&a.mul(b));
            }
        }
        // reduce by the monic defining polynomial
        for d in (m..2 * m.max(1)).rev() {
            if prod[d].is_zero() {
                continue;
            }
            let c = prod[d].clone();
            prod[d] = zero.clone();
            for j in 0..m {
                if self.ext.h[j] == 0 {
                    continue;
                }
                let hj = PAdicScalar::from_u64(ctx, self.ext.h[j]);
                prod[d - m + j] = prod[d - m + j].sub(&c.mul(&hj));
            }
        }
        prod.truncate(m.max(1));
        UnramifiedElement { coeffs: prod, ext: self.ext.clone() }
    }

    pub fn pow_big(&self, e: &BigUint) -> Self {
        let mut acc = Self::one(&self.ext);
        let mut base = self.clone();
        for i in 0..e.bits() {
            if e.bit(i) {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
        }
        acc
    }

    pub fn pow_u(&self, e: u64) -> Self {
        self.pow_big(&BigUint::from(e))
    }

    /// Inverse of a unit: Fermat inverse mod p, then Newton lifting.
    pub fn inv(&self) -> Result<Self> {
        let fq = self.ext.fq();
        let res = self.residue();
        if FqArith::is_zero(&res) {
            return Err(Error::NotInvertibleDiagnostic(
                "extension element reduces to 0".into(),
            ));
        }
        let pm = BigUint::from(self.ext.ctx.p).pow(self.ext.m);
        let inv_res = fq.pow(&res, &(pm - 2u32));
        let mut z = Self::from_residue(&self.ext, &inv_res);
        let two = Self::from_scalar(&self.ext, PAdicScalar::from_u64(&self.ext.ctx, 2));
        for _ in 0..(self.ext.ctx.w.ilog2() + 2) {
            // z <- z(2 - uz)
            let uz = self.mul(&z);
            z = z.mul(&two.sub(&uz));
        }
        debug_assert!(self.mul(&z).sub(&Self::one(&self.ext)).is_zero());
        Ok(z)
    }

    /// Congruence modulo p^k, coefficientwise.
    pub fn congruent(&self, o: &Self, k: u32) -> bool {
        self.coeffs.iter().zip(&o.coeffs).all(|(a, b)| a.congruent(b, k))
    }

    pub fn min_known_prec(&self) -> u32 {
        self.coeffs.iter().map(|c| c.known_prec()).min().unwrap_or(0)
    }
}

/// Evaluate a coordinate polynomial sum c_i t^i at an element of the same ring.
fn eval_coords(coeffs: &[PAdicScalar], at: &UnramifiedElement) -> UnramifiedElement {
    let mut acc = UnramifiedElement::zero(&at.ext);
    for c in coeffs.iter().rev() {
        acc = acc.mul(at);
        acc = acc.add(&UnramifiedElement::from_scalar(&at.ext, c.clone()));
    }
    acc
}

/// The unique ring endomorphism of W_m lifting y -> y^p, computed by Newton
/// iteration locating the root of h congruent to t^p, then evaluating the
/// coordinate polynomial there.
pub fn frobenius(x: &UnramifiedElement) -> Result<UnramifiedElement> {
    let ext = &x.ext;
    if ext.m == 1 {
        return Ok(x.clone()); // Frobenius fixes Z_p
    }
    let tau = frobenius_root(ext)?;
    Ok(eval_coords(&x.coeffs, tau))
}

fn frobenius_root(ext: &ExtCtx) -> Result<&UnramifiedElement> {
    if let Some(t) = ext.frob_t.get() {
        return Ok(t);
    }
    let ctx = &ext.ctx;
    let h: Vec<PAdicScalar> = ext.h.iter().map(|&c| PAdicScalar::from_u64(ctx, c)).collect();
    let dh: Vec<PAdicScalar> = (1..h.len())
        .map(|i| h[i].mul(&PAdicScalar::from_u64(ctx, i as u64)))
        .collect();
    let t = UnramifiedElement::gen(ext);
    let mut tau = t.pow_big(&BigUint::from(ctx.p));
    let mut steps = 0;
    loop {
        let hv = eval_coords(&h, &tau);
        if hv.is_zero() {
            break;
        }
        let dv = eval_coords(&dh, &tau).inv()?;
        tau = tau.sub(&hv.mul(&dv));
        steps += 1;
        if steps > ctx.w + 4 {
            return Err(Error::PrecisionExhausted(
                "Newton iteration for the Frobenius root did not certify W digits".into(),
            ));
        }
    }
    let _ = ext.frob_t.set(tau);
    Ok(ext.frob_t.get().unwrap())
}

/// k-fold composite of the p-power Frobenius.
pub fn frobenius_iter(x: &UnramifiedElement, k: u32) -> Result<UnramifiedElement> {
    let mut y = x.clone();
    for _ in 0..k {
        y = frobenius(&y)?;
    }
    Ok(y)
}

/// The unique multiplicative lift y with y^{p^m} = y reducing to the given
/// element, computed by iterating y -> y^{p^m} until stable.
pub fn teichmuller(x0: &UnramifiedElement) -> UnramifiedElement {
    let ext = &x0.ext;
    let pm = BigUint::from(ext.ctx.p).pow(ext.m);
    let mut y = x0.clone();
    for _ in 0..=(ext.ctx.w + 1) {
        let y2 = y.pow_big(&pm);
        if y2 == y {
            return y;
        }
        y = y2;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u64, w: u32) -> Ctx {
        PadicCtx::new(p, w).unwrap()
    }

    #[test]
    fn extension_selection_matches_exhaustive_scan() {
        let c2 = ctx(2, 6);
        assert_eq!(build_extension(&c2, 1, 1).unwrap().h, vec![0, 1]);
        assert_eq!(build_extension(&c2, 1, 2).unwrap().h, vec![1, 1, 1]); // t^2+t+1
        let c3 = ctx(3, 6);
        assert_eq!(build_extension(&c3, 1, 2).unwrap().h, vec![1, 0, 1]); // t^2+1
    }

    #[test]
    fn composite_modulus_rejected() {
        assert!(matches!(PadicCtx::new(6, 4), Err(Error::CompositeModulus(6))));
    }

    #[test]
    fn ring_axioms_against_bigint_oracle() {
        let c = ctx(3, 7);
        let m = BigInt::from(3u64.pow(7));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (a, b, cc): (u64, u64, u64) = (rng.gen(), rng.gen(), rng.gen());
            let (x, y, z) = (
                PAdicScalar::from_u64(&c, a),
                PAdicScalar::from_u64(&c, b),
                PAdicScalar::from_u64(&c, cc),
            );
            let lhs = x.mul(&y.add(&z));
            let oracle = (BigInt::from(a) * (BigInt::from(b) + BigInt::from(cc))) % &m;
            assert_eq!(lhs.value(), &oracle.to_biguint().unwrap());
            let lhs2 = x.mul(&y).mul(&z);
            let oracle2 = (BigInt::from(a) * BigInt::from(b) * BigInt::from(cc)) % &m;
            assert_eq!(lhs2.value(), &oracle2.to_biguint().unwrap());
            let lhs3 = x.sub(&y);
            let oracle3 = ((BigInt::from(a) - BigInt::from(b)) % &m + &m) % &m;
            assert_eq!(lhs3.value(), &oracle3.to_biguint().unwrap());
        }
    }

    #[test]
    fn known_prec_bookkeeping() {
        let c = ctx(2, 8);
        // p^3 * unit divided by p^3 keeps W - 3 digits
        let u = PAdicScalar::from_u64(&c, 5);
        let x = u.mul_p_pow(3);
        let y = x.div_exact_p(3).unwrap();
        assert_eq!(y.known_prec(), 8 - 3);
        assert_eq!(y.value(), &BigUint::from(5u32));
        assert!(matches!(
            PAdicScalar::from_u64(&c, 6).div_exact_p(8),
            Err(Error::PrecisionExhausted(_))
        ));
        assert!(matches!(
            PAdicScalar::from_u64(&c, 1).div_exact_p(1),
            Err(Error::IntegralityViolation(_))
        ));
    }

    #[test]
    fn inverse_and_pow() {
        let c = ctx(3, 6);
        let x = PAdicScalar::from_u64(&c, 5);
        let xi = x.inv().unwrap();
        assert_eq!(x.mul(&xi), PAdicScalar::one(&c));
        assert_eq!(x.pow_i(-2).unwrap(), xi.mul(&xi));
    }

    #[test]
    fn frobenius_is_ring_hom_and_order_m() {
        let c = ctx(2, 8);
        let ext = build_extension(&c, 1, 2).unwrap();
        let t = UnramifiedElement::gen(&ext);
        let ft = frobenius(&t).unwrap();
        // reduces to t^2 mod 2 and satisfies h(ft) = 0
        assert_eq!(ft.residue(), ext.fq().mul(&[0, 1], &[0, 1]));
        let h: Vec<PAdicScalar> =
            ext.h.iter().map(|&cc| PAdicScalar::from_u64(&c, cc)).collect();
        assert!(eval_coords(&h, &ft).is_zero());
        // order m and hom property on random pairs
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = UnramifiedElement::from_residue(&ext, &[rng.gen_range(0..2), rng.gen_range(0..2)])
                .add(&UnramifiedElement::from_scalar(
                    &ext,
                    PAdicScalar::from_u64(&c, rng.gen::<u32>() as u64 * 2),
                ));
            let y = UnramifiedElement::from_residue(&ext, &[rng.gen_range(0..2), rng.gen_range(0..2)]);
            assert_eq!(frobenius_iter(&x, 2).unwrap(), x);
            assert_eq!(
                frobenius(&x.mul(&y)).unwrap(),
                frobenius(&x).unwrap().mul(&frobenius(&y).unwrap())
            );
            assert_eq!(
                frobenius(&x.add(&y)).unwrap(),
                frobenius(&x).unwrap().add(&frobenius(&y).unwrap())
            );
        }
        // fixes the prime subring
        let z = UnramifiedElement::from_scalar(&ext, PAdicScalar::from_u64(&c, 13));
        assert_eq!(frobenius(&z).unwrap(), z);
    }

    #[test]
    fn teichmuller_examples_and_multiplicativity() {
        let c = ctx(3, 6);
        let ext = build_extension(&c, 1, 1).unwrap();
        let zero = UnramifiedElement::zero(&ext);
        assert_eq!(teichmuller(&zero), zero);
        let one = UnramifiedElement::one(&ext);
        assert_eq!(teichmuller(&one), one);
        // x = 2 lifts to -1 since (-1)^3 = -1 exactly
        let two = UnramifiedElement::from_residue(&ext, &[2]);
        let t = teichmuller(&two);
        assert_eq!(t.coeffs[0].value(), &(BigUint::from(3u32).pow(6) - 1u32));

        let ext2 = build_extension(&c, 1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let x = UnramifiedElement::from_residue(&ext2, &[rng.gen_range(0..3), rng.gen_range(0..3)]);
            let y = UnramifiedElement::from_residue(&ext2, &[rng.gen_range(0..3), rng.gen_range(0..3)]);
            let txy = teichmuller(&x.mul(&y));
            assert_eq!(teichmuller(&x).mul(&teichmuller(&y)), txy);
        }
    }

    #[test]
    fn residue_field_arithmetic() {
        let c = ctx(2, 4);
        let ext = build_extension(&c, 1, 3).unwrap();
        let fq = ext.fq();
        // every nonzero element satisfies x^(2^3 - 1) = 1
        for k in 1u64..8 {
            let e = vec![k & 1, (k >> 1) & 1, (k >> 2) & 1];
            let p = fq.pow(&e, &BigUint::from(7u32));
            assert_eq!(p, fq.one());
        }
    }
}
