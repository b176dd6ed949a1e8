//! Hodge-Newton extraction of the rank-one unit root by contraction, the
//! truncated symmetric powers phi_k on the f-monomial basis, the limiting
//! module phi_{infinity,k} with its binomial twist (1 + p Ups(e))^{k-r}, the
//! congruence phi_{k+p^m} = phi_{infinity,k} mod p^{min(k+p^m, m)}, and the
//! explicit unit-root L-function
//!
//!   L(psi_unit^k (x) aux, T) =
//!     prod_{i>=1} L(a^k (x) phi_{infinity,k-i} (x) wedge^i phi (x) aux, T)^{(-1)^{i-1} i}.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::euler::{
    char_series_base, enumerate_closed_points, extensions_for, frobenius_orbit_product,
    monsky_tate_lift, point_frobenius,
};
use crate::lseries::LSeries;
use crate::padic::{PAdicScalar, UnramifiedElement};
use crate::series::{apply_sigma, TruncSeries};
use crate::sigma::{multisets, NormalizeResult, SigmaModule};
use crate::trace::{jacobian_data, l_trace, TraceContext, TraceParams};

// ---------------------------------------------------------------------------
// Hodge-Newton contraction
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct UnitRootData {
    pub alpha: TruncSeries,
    pub cvec: Vec<TruncSeries>,
    pub iterations: u32,
    pub achieved_prec: u32,
    pub achieved_deg: u32,
    /// Gauss order of c_{m+1} - c_m per iteration; each step gains >= 1.
    pub delta_ords: Vec<u32>,
}

/// Inverse of a series whose constant term is a unit and whose higher
/// coefficients are divisible by p (a 1-unit up to a constant).
fn invert_one_unit(f: &TruncSeries, prune: u32) -> Result<TruncSeries> {
    let ctx = f.ctx().clone();
    let nv = f.nvars;
    let cap = f.deg_cap;
    let c0 = f.coeff(&vec![0u32; nv]);
    let c0_inv = c0.inv()?;
    let scaled = f.scale(&c0_inv);
    let mut h = scaled.clone();
    // h = f/c0 - 1 has all coefficients divisible by p
    h = h.sub(&TruncSeries::one(&ctx, nv, cap));
    if h.gauss_ord() == Some(0) {
        return Err(Error::NotInvertibleDiagnostic(
            "series is not a 1-unit: non-constant unit coefficients".into(),
        ));
    }
    let mut inv = TruncSeries::one(&ctx, nv, cap);
    let mut pw = TruncSeries::one(&ctx, nv, cap);
    let hneg = h.neg();
    for _ in 0..ctx.w {
        pw = pw.mul(&hneg).prune_ord_at_least(prune);
        if pw.is_zero() {
            break;
        }
        inv = inv.add(&pw);
    }
    Ok(inv.scale(&c0_inv))
}

/// Slope-zero splitting of a normalized module: iterate
/// alpha_m = B_00 + B_01 sigma(c_m),  c_{m+1} = alpha_m^{-1}(B_10 + B_11 sigma(c_m)),
/// the contraction solving B sigma(w) = alpha w for w = (1, c).
pub fn hodge_newton_unit(module: &SigmaModule, n_target: u32) -> Result<UnitRootData> {
    if !module.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let r = module.rank;
    let ctx = module.lift.ctx.clone();
    let prune = n_target.min(ctx.w);
    let nv = module.lift.nvars;
    let wide_cap = u32::MAX / 4;
    let widen = |s: &TruncSeries| s.with_cap(wide_cap);
    let b00 = widen(module.entry(0, 0));
    let b01: Vec<TruncSeries> = (1..r).map(|j| widen(module.entry(0, j))).collect();
    let b10: Vec<TruncSeries> = (1..r).map(|i| widen(module.entry(i, 0))).collect();
    let mut c: Vec<TruncSeries> = (1..r).map(|_| TruncSeries::zero(&ctx, nv, wide_cap)).collect();
    let mut alpha = b00.clone();
    let mut iterations = 0u32;
    let mut delta_ords = Vec::new();
    for _ in 0..=(n_target + 2) {
        iterations += 1;
        let sig_c: Vec<TruncSeries> = c
            .iter()
            .map(|ci| apply_sigma(ci, &module.lift, None).map(|s| s.with_cap(wide_cap).prune_ord_at_least(prune)))
            .collect::<Result<_>>()?;
        let mut new_alpha = b00.clone();
        for (j, sc) in sig_c.iter().enumerate() {
            new_alpha = new_alpha.add(&b01[j].mul(sc));
        }
        new_alpha = new_alpha.prune_ord_at_least(prune);
        if new_alpha.coeff(&vec![0u32; nv]).ord_lower_bound() != 0 {
            return Err(Error::UnitLost(
                "alpha lost its unit constant term during contraction".into(),
            ));
        }
        let alpha_inv = invert_one_unit(&new_alpha, prune)?;
        let mut new_c = Vec::with_capacity(r - 1);
        for i in 0..r - 1 {
            let mut acc = b10[i].clone();
            for (j, sc) in sig_c.iter().enumerate() {
                acc = acc.add(&widen(module.entry(i + 1, j + 1)).mul(sc));
            }
            new_c.push(acc.mul(&alpha_inv).prune_ord_at_least(prune));
        }
        let delta = new_c
            .iter()
            .zip(&c)
            .filter_map(|(a, b)| a.sub(b).gauss_ord())
            .min()
            .unwrap_or(prune);
        delta_ords.push(delta.min(prune));
        let stable = new_c.iter().zip(&c).all(|(a, b)| a.congruent(b, prune))
            && new_alpha.congruent(&alpha, prune);
        alpha = new_alpha;
        c = new_c;
        if stable {
            break;
        }
    }
    // eigen relation residual B sigma(w) - alpha w, w = (1, c)
    let sig_c: Vec<TruncSeries> = c
        .iter()
        .map(|ci| apply_sigma(ci, &module.lift, None).map(|s| s.with_cap(wide_cap).prune_ord_at_least(prune)))
        .collect::<Result<_>>()?;
    let mut residual_ord = ctx.w;
    for i in 0..r {
        let mut lhs = widen(module.entry(i, 0));
        for (j, sc) in sig_c.iter().enumerate() {
            lhs = lhs.add(&widen(module.entry(i, j + 1)).mul(sc));
        }
        let rhs = if i == 0 { alpha.clone() } else { alpha.mul(&c[i - 1]) };
        let diff = lhs.sub(&rhs);
        let o = diff.gauss_ord().unwrap_or(ctx.w);
        residual_ord = residual_ord.min(o);
    }
    let achieved_prec = residual_ord.min(prune);
    Ok(UnitRootData {
        achieved_deg: alpha.actual_deg(),
        alpha,
        cvec: c,
        iterations,
        achieved_prec,
        delta_ords,
    })
}

// ---------------------------------------------------------------------------
// Unit roots of fiber characteristic series
// ---------------------------------------------------------------------------

/// The unique unit reciprocal root of det(I - Phi S) = sum c_k S^k, by Hensel
/// lifting from the mod-p factorization; requires exactly one unit root
/// (ordinarity with h_0 = 1 at the point).
pub fn hensel_unit_root(cpoly: &[PAdicScalar]) -> Result<PAdicScalar> {
    let ctx = cpoly[0].ctx().clone();
    let r = cpoly.len() - 1;
    if r == 0 {
        return Err(Error::NotOrdinaryAtPoint("rank-zero factor".into()));
    }
    if cpoly[1].ord_lower_bound() != 0 {
        return Err(Error::NotOrdinaryAtPoint("no unit root mod p".into()));
    }
    for c in cpoly.iter().skip(2) {
        if c.ord_lower_bound() == 0 {
            return Err(Error::NotOrdinaryAtPoint(
                "more than one unit root mod p".into(),
            ));
        }
    }
    // reciprocal roots are the roots of P^rev(x) = sum_k c_k x^{r-k}
    let rev: Vec<PAdicScalar> = (0..=r).map(|i| cpoly[r - i].clone()).collect(); // rev[i] = coeff of x^i
    let eval = |x: &PAdicScalar| -> PAdicScalar {
        let mut acc = PAdicScalar::zero(&ctx);
        for c in rev.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    };
    let deval = |x: &PAdicScalar| -> PAdicScalar {
        let mut acc = PAdicScalar::zero(&ctx);
        for (i, c) in rev.iter().enumerate().skip(1).collect::<Vec<_>>().into_iter().rev() {
            acc = acc.mul(x).add(&c.mul(&PAdicScalar::from_u64(&ctx, i as u64)));
        }
        acc
    };
    let mut x = cpoly[1].neg();
    for _ in 0..ctx.w + 2 {
        let fx = eval(&x);
        if fx.is_zero() {
            break;
        }
        let dfx = deval(&x);
        x = x.sub(&fx.mul(&dfx.inv().map_err(|_| {
            Error::NotOrdinaryAtPoint("derivative not a unit at the unit root".into())
        })?));
    }
    Ok(x)
}

#[derive(Debug)]
pub struct FiberCheckRow {
    pub degree: u32,
    pub orbit_id: usize,
    pub matched: bool,
    pub compare_prec: u32,
}

/// For every closed point of degree <= d_max: the Hensel unit root of the
/// Euler factor must equal the alpha-orbit product
/// alpha(x) alpha(x^sigma) ... alpha(x^{sigma^{d-1}}) mod p^{prec - slack}.
pub fn unit_fiber_check(
    ur: &UnitRootData,
    module: &SigmaModule,
    d_max: u32,
    slack: u32,
    budget: u64,
) -> Result<Vec<FiberCheckRow>> {
    let ctx = &module.lift.ctx;
    let points = enumerate_closed_points(ctx, module.lift.a, module.lift.nvars, d_max, budget)?;
    let exts = extensions_for(ctx, module.lift.a, &points)?;
    let compare_prec = ur.achieved_prec.saturating_sub(slack).max(1);
    let mut rows = Vec::new();
    for pt in &points {
        let x = monsky_tate_lift(pt, &module.lift, &exts[&pt.degree])?;
        let phi = frobenius_orbit_product(module, &x);
        let cpoly = char_series_base(&phi, "fiber check")?;
        let root = hensel_unit_root(&cpoly)?;
        let mut prod = UnramifiedElement::one(&exts[&pt.degree]);
        let mut cur = x.clone();
        for _ in 0..pt.degree {
            prod = prod.mul(&ur.alpha.evaluate(&cur.coords));
            cur = point_frobenius(&cur, &module.lift);
        }
        if !prod.is_rational() {
            return Err(Error::GaloisInvarianceViolation(
                "alpha orbit product has extension components".into(),
            ));
        }
        let matched = prod.rational_part().congruent(&root, compare_prec);
        rows.push(FiberCheckRow {
            degree: pt.degree,
            orbit_id: pt.orbit_id,
            matched,
            compare_prec,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Truncated symmetric powers and the limiting module
// ---------------------------------------------------------------------------

/// Polynomials in the f-variables with series coefficients, keyed by sorted
/// multisets over {0, .., r-2} (index t stands for f_{t+2} in 1-based terms).
type FPoly = BTreeMap<Vec<usize>, TruncSeries>;

/// The pi-graded truncated limiting module: matrix of phi_{infinity,k} (or of
/// a finite symmetric power phi_k) on f-monomials of degree <= d_f.
pub struct LimitingModule {
    pub k: i64,
    pub d_f: u32,
    pub basis: Vec<Vec<usize>>,
    pub matrix: Vec<TruncSeries>, // row-major, dim x dim
    pub gradings: Vec<u32>,
    pub ups_e: FPoly,
    pub lift: crate::series::SigmaLift,
    pub label: String,
}

impl LimitingModule {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &TruncSeries {
        &self.matrix[i * self.dim() + j]
    }

    pub fn as_sigma_module(&self) -> SigmaModule {
        SigmaModule::new(self.dim(), self.matrix.clone(), self.lift.clone(), &self.label)
    }

    pub fn congruent(&self, other: &LimitingModule, modp: u32) -> bool {
        self.dim() == other.dim()
            && self
                .matrix
                .iter()
                .zip(&other.matrix)
                .all(|(a, b)| a.congruent(b, modp))
    }
}

fn fpoly_mul(a: &FPoly, b: &FPoly, d_f: u32) -> FPoly {
    let mut out: FPoly = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            if (ma.len() + mb.len()) as u32 > d_f {
                continue;
            }
            let mut m = ma.clone();
            m.extend(mb.iter().copied());
            m.sort_unstable();
            let c = ca.mul(cb);
            if c.is_zero() {
                continue;
            }
            out.entry(m)
                .and_modify(|e| *e = e.add(&c))
                .or_insert(c);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn fpoly_add(a: &FPoly, b: &FPoly) -> FPoly {
    let mut out = a.clone();
    for (m, c) in b {
        out.entry(m.clone())
            .and_modify(|e| *e = e.add(c))
            .or_insert_with(|| c.clone());
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn fpoly_scale(a: &FPoly, s: &PAdicScalar) -> FPoly {
    let mut out: FPoly = BTreeMap::new();
    for (m, c) in a {
        let sc = c.scale(s);
        if !sc.is_zero() {
            out.insert(m.clone(), sc);
        }
    }
    out
}

/// Ups(phi(e_j)): substitute e_1 -> 1 and e_i -> f_i in the column of phi(e_j)
/// (0-based: e_0 -> 1, e_i -> f-variable i-1).
fn ups_phi_col(module: &SigmaModule, j: usize, cap: u32) -> FPoly {
    let mut out: FPoly = BTreeMap::new();
    let c0 = module.entry(0, j).with_cap(cap);
    if !c0.is_zero() {
        out.insert(vec![], c0);
    }
    for i in 1..module.rank {
        let ci = module.entry(i, j).with_cap(cap);
        if !ci.is_zero() {
            out.insert(vec![i - 1], ci);
        }
    }
    out
}

/// Integer binomial C(m, j) for any integer m, reduced into the context.
fn binom_scalar(ctx: &crate::padic::Ctx, m: i64, j: u32) -> PAdicScalar {
    let mut num = BigInt::one();
    for t in 0..j as i64 {
        num *= BigInt::from(m - t);
    }
    let mut den = BigInt::one();
    for t in 1..=j as i64 {
        den *= BigInt::from(t);
    }
    let q = &num / &den;
    debug_assert!((num - &q * den).is_zero());
    PAdicScalar::from_bigint(ctx, &q)
}

/// (1 + p eps)^m as an f-polynomial: binomial series, convergent because the
/// j-th term carries p^j.
fn one_unit_power(module: &SigmaModule, eps: &FPoly, m: i64, d_f: u32, finite: bool) -> FPoly {
    let ctx = &module.lift.ctx;
    let nv = module.lift.nvars;
    let cap = eps.values().next().map(|c| c.deg_cap).unwrap_or(4);
    let mut out: FPoly = BTreeMap::new();
    out.insert(vec![], TruncSeries::one(ctx, nv, cap));
    let p_eps = {
        let mut pe: FPoly = BTreeMap::new();
        for (mm, c) in eps {
            pe.insert(mm.clone(), c.mul_p_pow(1));
        }
        pe
    };
    let mut power: FPoly = out.clone();
    let jmax = if finite {
        assert!(m >= 0);
        (m as u32).min(ctx.w + d_f)
    } else {
        ctx.w + d_f
    };
    for j in 1..=jmax {
        power = fpoly_mul(&power, &p_eps, d_f);
        if power.is_empty() {
            break;
        }
        let coef = binom_scalar(ctx, m, j);
        if coef.is_zero() {
            continue;
        }
        out = fpoly_add(&out, &fpoly_scale(&power, &coef));
    }
    out
}

fn limiting_matrix(
    module: &SigmaModule,
    k: i64,
    d_f: u32,
    finite_sym: bool,
) -> Result<LimitingModule> {
    if !module.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let r = module.rank;
    let ctx = &module.lift.ctx;
    let nv = module.lift.nvars;
    let cap = module.entries()[0].deg_cap.max(module.max_entry_deg());
    // eps = Ups(e), phi(e_0) = e_0 + p e
    let mut eps: FPoly = BTreeMap::new();
    {
        let one = TruncSeries::one(ctx, nv, cap);
        let top = module.entry(0, 0).with_cap(cap).sub(&one).div_exact_p(1)?;
        if !top.is_zero() {
            eps.insert(vec![], top);
        }
        for i in 1..r {
            let c = module.entry(i, 0).with_cap(cap).div_exact_p(1)?;
            if !c.is_zero() {
                eps.insert(vec![i - 1], c);
            }
        }
    }
    let ups_cols: Vec<FPoly> = (1..r).map(|j| ups_phi_col(module, j, cap)).collect();
    let mut basis = Vec::new();
    for s in 0..=d_f as usize {
        basis.extend(multisets(r - 1, s));
    }
    let index: BTreeMap<Vec<usize>, usize> = basis.iter().cloned().zip(0..).collect();
    let dim = basis.len();
    let mut matrix = vec![TruncSeries::zero(ctx, nv, cap); dim * dim];
    for (jcol, mono) in basis.iter().enumerate() {
        let s = mono.len() as i64;
        if finite_sym && s > k {
            continue; // phi_k vanishes on monomials of degree beyond k
        }
        let mut col: FPoly = one_unit_power(module, &eps, k - s, d_f, finite_sym);
        for &t in mono {
            col = fpoly_mul(&col, &ups_cols[t], d_f);
        }
        for (target, coeff) in col {
            let irow = index[&target];
            matrix[irow * dim + jcol] = matrix[irow * dim + jcol].add(&coeff);
        }
    }
    let gradings: Vec<u32> = basis.iter().map(|m| m.len() as u32).collect();
    Ok(LimitingModule {
        k,
        d_f,
        basis,
        matrix,
        gradings,
        ups_e: eps,
        lift: module.lift.clone(),
        label: format!(
            "{}[{}{}]",
            module.label,
            if finite_sym { "sym " } else { "lim " },
            k
        ),
    })
}

/// Matrix of phi_k = Ups o Sym^k(phi) o Ups^{-1} on f-monomials of degree
/// <= min(k, d_f); zero on monomials of degree beyond k.
pub fn sym_power_truncated(module: &SigmaModule, k: u32, d_f: u32) -> Result<LimitingModule> {
    limiting_matrix(module, k as i64, d_f, true)
}

/// The limiting module phi_{infinity,k}: (7.6) with the binomial series for
/// (1 + p Ups(e))^{k-s}; defined for every integer k.
pub fn limiting_module(module: &SigmaModule, k: i64, d_f: u32) -> Result<LimitingModule> {
    limiting_matrix(module, k, d_f, false)
}

#[derive(Debug)]
pub struct CongruenceReport {
    pub modulus: u32,
    pub ok: bool,
    pub failed_entries: usize,
}

/// phi_{k+p^m} = phi_{infinity,k} mod p^{min(k+p^m, m)} entrywise.
pub fn congruence_check_75(
    module: &SigmaModule,
    k: i64,
    m: u32,
    d_f: u32,
) -> Result<CongruenceReport> {
    let p = module.lift.ctx.p;
    let km = k + (p as i64).pow(m);
    if km <= 0 {
        return Err(Error::ValidationError {
            field: "k".into(),
            msg: "k + p^m must be positive".into(),
        });
    }
    let sym = sym_power_truncated(module, km as u32, d_f)?;
    let lim = limiting_module(module, k, d_f)?;
    let modulus = (km as u32).min(m).min(module.lift.ctx.w);
    let mut failed = 0usize;
    for (a, b) in sym.matrix.iter().zip(&lim.matrix) {
        if !a.congruent(b, modulus) {
            failed += 1;
        }
    }
    Ok(CongruenceReport { modulus, ok: failed == 0, failed_entries: failed })
}

// ---------------------------------------------------------------------------
// L-functions of limiting modules and the unit-root master formula
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum LRoute {
    Trace,
    Euler,
}

pub struct UnitRootParams {
    pub t_cap: usize,
    pub d_f: u32,
    pub n_target: u32,
    pub budget: u64,
    pub rank_limit: usize,
    pub route: LRoute,
}

impl UnitRootParams {
    pub fn new(t_cap: usize, n_target: u32) -> Self {
        UnitRootParams {
            t_cap,
            d_f: n_target,
            n_target,
            budget: 1 << 22,
            rank_limit: crate::sigma::DEFAULT_RANK_LIMIT,
            route: LRoute::Trace,
        }
    }
}

/// Assemble the sigma-module a^k (x) lm (x) aux and take its L-function by
/// the requested route.
pub fn l_limiting(
    lm: &LimitingModule,
    aux: Option<&SigmaModule>,
    twist: Option<&PAdicScalar>,
    tc: &TraceContext,
    params: &UnitRootParams,
) -> Result<LSeries> {
    let mut module = lm.as_sigma_module();
    if let Some(a) = aux {
        module = module.tensor(a, params.rank_limit)?;
    }
    if let Some(t) = twist {
        module = module.scale_const(t, &format!("{}*tw", module.label));
    }
    match params.route {
        LRoute::Trace => {
            let tp = TraceParams::for_target(module.lift.q, params.n_target);
            l_trace(&module, params.t_cap, tc, &tp)
        }
        LRoute::Euler => crate::euler::l_euler(&module, params.t_cap, params.budget),
    }
}

pub struct UnitRootL {
    pub series: LSeries,
    pub num: LSeries,
    pub den: LSeries,
    pub a: PAdicScalar,
}

/// Thm-7.8 assembly: normalize psi = a (x) phi, then
/// prod_{i=1..r} L(a^k (x) phi_{infinity,k-i} (x) wedge^i phi (x) aux, T)^{(-1)^{i-1} i}.
pub fn unit_root_l(
    mpsi: &SigmaModule,
    aux: Option<&SigmaModule>,
    k: i64,
    params: &UnitRootParams,
) -> Result<UnitRootL> {
    let norm: NormalizeResult = mpsi.normalize_twist()?;
    let phi = &norm.module;
    let q = phi.lift.q as i64;
    let a_pow = norm.a.pow_i(k.rem_euclid(q - 1).max(0))?;
    let tc = jacobian_data(&phi.lift);
    let ctx = &phi.lift.ctx;
    let mut num = LSeries::one(ctx, params.t_cap);
    let mut den = LSeries::one(ctx, params.t_cap);
    for i in 1..=phi.rank as u32 {
        let lm = limiting_module(phi, k - i as i64, params.d_f)?;
        let wedge = phi.ext_power(i, params.rank_limit)?;
        let aux_combined = match aux {
            None => wedge,
            Some(a) => wedge.tensor(a, params.rank_limit)?,
        };
        let li = l_limiting(&lm, Some(&aux_combined), Some(&a_pow), &tc, params)?;
        let (fnum, fden) = match &li.factored {
            Some(b) => (b.0.clone(), b.1.clone()),
            None => (li.clone(), LSeries::one(ctx, params.t_cap)),
        };
        // exponent (-1)^{i-1} i: odd i contributes +i, even i contributes -i
        let (tn, td) = if i % 2 == 1 { (fnum, fden) } else { (fden.clone(), fnum.clone()) };
        for _ in 0..i {
            num = num.mul(&tn);
            den = den.mul(&td);
        }
    }
    let series = num.mul(&den.inv()?);
    Ok(UnitRootL { series, num, den, a: norm.a })
}

/// Oracle for the master identity: the Euler product of the unit part raised
/// to k, with unit roots extracted fiberwise by Hensel lifting (optionally
/// tensored with a finite-rank aux module).
pub fn unit_root_euler_oracle(
    mpsi: &SigmaModule,
    aux: Option<&SigmaModule>,
    k: i64,
    t_cap: usize,
    budget: u64,
) -> Result<LSeries> {
    let ctx = &mpsi.lift.ctx;
    let points = enumerate_closed_points(ctx, mpsi.lift.a, mpsi.lift.nvars, t_cap as u32, budget)?;
    let exts = extensions_for(ctx, mpsi.lift.a, &points)?;
    let mut l = LSeries::one(ctx, t_cap);
    for pt in &points {
        let x = monsky_tate_lift(pt, &mpsi.lift, &exts[&pt.degree])?;
        let phi = frobenius_orbit_product(mpsi, &x);
        let cpoly = char_series_base(&phi, "unit-root oracle")?;
        let root = hensel_unit_root(&cpoly)?;
        let rk = root.pow_i(k)?;
        let factor: Vec<PAdicScalar> = match aux {
            None => vec![PAdicScalar::one(ctx), rk.neg()],
            Some(a) => {
                let pa = frobenius_orbit_product(a, &x);
                let scaled = pa.scale(&UnramifiedElement::from_scalar(&exts[&pt.degree], rk));
                char_series_base(&scaled, "oracle aux factor")?
            }
        };
        l = l.mul(
            &LSeries::from_poly_in_td(ctx, &factor, pt.degree as usize, t_cap)
                .inv()?,
        );
    }
    Ok(l)
}

/// Lemma 2.12: L(phi^k, T) = prod_{i>=1} L(Sym^{k-i} phi (x) wedge^i phi)^{(-1)^{i-1} i},
/// both sides by Euler products.
pub fn decomposition_identity(
    module: &SigmaModule,
    k: u32,
    t_cap: usize,
    budget: u64,
    rank_limit: usize,
) -> Result<(LSeries, LSeries)> {
    assert!(k >= 1);
    let lhs = crate::euler::l_power_euler(module, k as i64, t_cap, budget)?;
    let ctx = &module.lift.ctx;
    let mut rhs = LSeries::one(ctx, t_cap);
    for i in 1..=module.rank.min(k as usize) as u32 {
        let sym = module.sym_power(k - i, rank_limit)?;
        let wedge = module.ext_power(i, rank_limit)?;
        let tens = sym.tensor(&wedge, rank_limit)?;
        let li = crate::euler::l_euler(&tens, t_cap, budget)?;
        let e = if i % 2 == 1 { i as i64 } else { -(i as i64) };
        rhs = rhs.mul(&li.pow_i(e)?);
    }
    Ok((lhs, rhs))
}

/// Teichmueller-power scaling a^k uses only k mod (q-1); exposed for tests.
pub fn teich_power(a: &PAdicScalar, k: i64, q: u64) -> Result<PAdicScalar> {
    a.pow_i(k.rem_euclid(q as i64 - 1).max(0))
}

/// q^m as a BigUint, for point-count style assertions.
pub fn q_pow_big(q: u64, m: u32) -> BigUint {
    BigUint::from(q).pow(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicCtx;
    use crate::series::SigmaLift;

    fn ctx2() -> crate::padic::Ctx {
        PadicCtx::new(2, 12).unwrap()
    }

    fn s1(ctx: &crate::padic::Ctx, terms: &[(u32, i64)]) -> TruncSeries {
        let t: Vec<(Vec<u32>, i64)> = terms.iter().map(|&(e, c)| (vec![e], c)).collect();
        TruncSeries::from_int_terms(ctx, 1, 8, &t)
    }

    fn suite_rank2(ctx: &crate::padic::Ctx, lift: &SigmaLift) -> SigmaModule {
        // B = [[1 + pX, p], [pX, p + pX]], normalized ordinary with h = (1, 1)
        SigmaModule::new(
            2,
            vec![
                s1(ctx, &[(0, 1), (1, 2)]),
                s1(ctx, &[(0, 2)]),
                s1(ctx, &[(1, 2)]),
                s1(ctx, &[(0, 2), (1, 2)]),
            ],
            lift.clone(),
            "M2",
        )
    }

    #[test]
    fn hodge_newton_diag_and_rank1() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let diag = SigmaModule::new(
            2,
            vec![
                s1(&c, &[(0, 1)]),
                TruncSeries::zero(&c, 1, 8),
                TruncSeries::zero(&c, 1, 8),
                s1(&c, &[(0, 2)]),
            ],
            lift.clone(),
            "diag(1,p)",
        );
        let ur = hodge_newton_unit(&diag, 8).unwrap();
        assert_eq!(ur.alpha.coeff(&[0]), PAdicScalar::one(&c));
        assert_eq!(ur.alpha.num_terms(), 1);
        assert!(ur.cvec[0].is_zero());
        // unit root at every point is 1
        let rows = unit_fiber_check(&ur, &diag, 3, 2, 1 << 20).unwrap();
        assert!(rows.iter().all(|r| r.matched));
        let r1 = SigmaModule::new(1, vec![s1(&c, &[(0, 1), (1, 2)])], lift.clone(), "r1");
        let ur1 = hodge_newton_unit(&r1, 8).unwrap();
        assert!(ur1.alpha.congruent(&s1(&c, &[(0, 1), (1, 2)]).with_cap(ur1.alpha.deg_cap), 8));
        assert!(ur1.cvec.is_empty());
    }

    #[test]
    fn hodge_newton_contraction_on_dense_module() {
        // B = [[1, 2], [2, 2]] (p = q = 2, classical): eigen relation mod 2^8
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let m = SigmaModule::new(
            2,
            vec![s1(&c, &[(0, 1)]), s1(&c, &[(0, 2)]), s1(&c, &[(0, 2)]), s1(&c, &[(0, 2)])],
            lift,
            "dense",
        );
        let ur = hodge_newton_unit(&m, 8).unwrap();
        assert!(ur.achieved_prec >= 8, "achieved {}", ur.achieved_prec);
        assert!(ur.iterations <= 10);
        assert!(ur.alpha.coeff(&[0]).congruent(&PAdicScalar::one(&c), 1));
        // each contraction step gains at least one digit
        for w in ur.delta_ords.windows(2) {
            assert!(w[1] >= w[0] + 1 || w[1] >= 8, "step gains: {:?}", ur.delta_ords);
        }
        // fiber oracle at small degrees
        let rows = unit_fiber_check(&ur, &m, 3, 2, 1 << 20).unwrap();
        assert!(rows.iter().all(|r| r.matched), "{:?}", rows);
    }

    #[test]
    fn suite_module_unit_and_fibers() {
        let c = ctx2();
        for lift in [
            SigmaLift::classical(&c, 1, 1, 8),
            SigmaLift::new(&c, 1, vec![s1(&c, &[(1, 1)])]).unwrap(),
        ] {
            let m = suite_rank2(&c, &lift);
            let ur = hodge_newton_unit(&m, 8).unwrap();
            assert!(ur.achieved_prec >= 8);
            let rows = unit_fiber_check(&ur, &m, 4, 2, 1 << 20).unwrap();
            assert!(rows.iter().all(|r| r.matched));
        }
    }

    #[test]
    fn limiting_rank1_is_plain_power() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let r1 = SigmaModule::new(1, vec![s1(&c, &[(0, 1), (1, 2)])], lift.clone(), "r1");
        for k in [-2i64, 0, 1, 3] {
            let lm = limiting_module(&r1, k, 6).unwrap();
            assert_eq!(lm.dim(), 1);
            // B00^k in the truncated ring
            let b = s1(&c, &[(0, 1), (1, 2)]).with_cap(lm.matrix[0].deg_cap);
            let expected = if k >= 0 {
                let mut acc = TruncSeries::one(&c, 1, lm.matrix[0].deg_cap);
                for _ in 0..k {
                    acc = acc.mul(&b);
                }
                acc
            } else {
                let inv = invert_one_unit(&b, 12).unwrap();
                let mut acc = TruncSeries::one(&c, 1, lm.matrix[0].deg_cap);
                for _ in 0..(-k) {
                    acc = acc.mul(&inv);
                }
                acc
            };
            assert!(
                lm.matrix[0].congruent(&expected, 10),
                "k = {k}: {:?} vs {:?}",
                lm.matrix[0],
                expected
            );
        }
    }

    #[test]
    fn limiting_gradings_divisible() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let m = suite_rank2(&c, &lift);
        let lm = limiting_module(&m, 3, 6).unwrap();
        // column of a degree-s monomial is divisible by p^s
        for (j, mono) in lm.basis.iter().enumerate() {
            let s = mono.len() as u32;
            for i in 0..lm.dim() {
                let e = lm.entry(i, j);
                if !e.is_zero() {
                    assert!(e.gauss_ord().unwrap() >= s, "entry ({i},{j}) ord < {s}");
                }
            }
        }
        // k = 0 sends the empty monomial to 1
        let lm0 = limiting_module(&m, 0, 6).unwrap();
        assert!(lm0.entry(0, 0).congruent(&TruncSeries::one(&c, 1, lm0.entry(0, 0).deg_cap), 12));
    }

    #[test]
    fn congruence_75() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let m = suite_rank2(&c, &lift);
        for k in [0i64, 1, 2] {
            for mm in [1u32, 2, 3] {
                let rep = congruence_check_75(&m, k, mm, 6).unwrap();
                assert!(rep.ok, "k={k} m={mm}: {} entries failed", rep.failed_entries);
            }
        }
    }

    #[test]
    fn sym_power_truncated_matches_sym_construction() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let m = suite_rank2(&c, &lift);
        let viaups = sym_power_truncated(&m, 2, 6).unwrap().as_sigma_module();
        let direct = m.sym_power(2, 64).unwrap();
        let l1 = crate::euler::l_euler(&viaups, 5, 1 << 20).unwrap();
        let l2 = crate::euler::l_euler(&direct, 5, 1 << 20).unwrap();
        assert!(l1.congruent(&l2, 10, 5));
    }

    #[test]
    fn unit_root_l_rank1_reduces_to_power() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let r1 = SigmaModule::new(1, vec![s1(&c, &[(0, 1), (1, 2)])], lift.clone(), "r1");
        let params = UnitRootParams::new(5, 6);
        for k in [1i64, 2, -1] {
            let url = unit_root_l(&r1, None, k, &params).unwrap();
            let oracle = crate::euler::l_power_euler(&r1, k, 5, 1 << 20).unwrap();
            assert!(
                url.series.congruent(&oracle, 4, 5),
                "k = {k}: {:?} vs {:?}",
                url.series,
                oracle
            );
        }
    }

    #[test]
    fn decomposition_rank1_and_rank2() {
        let c = ctx2();
        let lift = SigmaLift::classical(&c, 1, 1, 8);
        let r1 = SigmaModule::new(1, vec![s1(&c, &[(0, 1), (1, 2)])], lift.clone(), "r1");
        let (lhs, rhs) = decomposition_identity(&r1, 3, 5, 1 << 20, 64).unwrap();
        assert!(lhs.congruent(&rhs, 10, 5));
        let m = suite_rank2(&c, &lift);
        let (l2, r2) = decomposition_identity(&m, 2, 5, 1 << 20, 64).unwrap();
        assert!(l2.congruent(&r2, 5, 5));
    }
}
