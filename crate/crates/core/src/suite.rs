//! The verification suite: every identity of the engine checked as a
//! congruence modulo (p^N, T^{D_T+1}) on a fixed family of sigma-modules over
//! p in {2, 3}, with both the classical lift sigma(X) = X^q and the perturbed
//! lift sigma(X) = X^q + pX. Each criterion reports one pass/fail verdict
//! with per-check details.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{
    entry_bound_polygon, gm_scan, newton_polygon, newton_polygon_of_lseries,
    np_congruence_criterion, q_bound_fit, slope_degrees, BoundProfile, NewtonPolygon,
};
use crate::error::Result;
use crate::euler::{enumerate_closed_points, euler_factor, extensions_for, l_euler};
use crate::lseries::LSeries;
use crate::padic::{Ctx, PAdicScalar, PadicCtx};
use crate::series::{apply_sigma, Rat, SigmaLift, TruncSeries};
use crate::sigma::SigmaModule;
use crate::trace::{
    dwork_matrix, fredholm_det, jacobian_data, l_trace, split_basic, trace_functions, TraceParams,
};
use crate::unitroot::{
    congruence_check_75, decomposition_identity, hodge_newton_unit, l_limiting, limiting_module,
    unit_fiber_check, unit_root_euler_oracle, unit_root_l, UnitRootParams,
};

const BUDGET: u64 = 1 << 22;

#[derive(Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CriterionResult {
    fn new(id: usize, name: &'static str) -> Self {
        CriterionResult { id, name, passed: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, label: String) {
        if !ok {
            self.passed = false;
        }
        self.details.push(format!("{} {label}", if ok { "ok  " } else { "FAIL" }));
    }

    fn fail(&mut self, label: String) {
        self.passed = false;
        self.details.push(format!("FAIL {label}"));
    }
}

/// One (p, N) scale: working precision W = N + n + 4.
pub struct Fixture {
    pub p: u64,
    pub n_target: u32,
    pub ctx: Ctx,
}

impl Fixture {
    pub fn new(p: u64, n_target: u32) -> Self {
        let ctx = PadicCtx::new(p, n_target + 5).unwrap();
        Fixture { p, n_target, ctx }
    }

    pub fn s(&self, terms: &[(u32, i64)]) -> TruncSeries {
        let t: Vec<(Vec<u32>, i64)> = terms.iter().map(|&(e, c)| (vec![e], c)).collect();
        TruncSeries::from_int_terms(&self.ctx, 1, 8, &t)
    }

    pub fn lift_classical(&self) -> SigmaLift {
        SigmaLift::classical(&self.ctx, 1, 1, 8)
    }

    /// sigma(X) = X^q + pX.
    pub fn lift_perturbed(&self) -> SigmaLift {
        SigmaLift::new(&self.ctx, 1, vec![self.s(&[(1, 1)])]).unwrap()
    }

    pub fn lifts(&self) -> Vec<(&'static str, SigmaLift)> {
        vec![("classical", self.lift_classical()), ("perturbed", self.lift_perturbed())]
    }

    pub fn p64(&self) -> i64 {
        self.p as i64
    }

    pub fn trivial(&self, lift: &SigmaLift) -> SigmaModule {
        SigmaModule::trivial(lift, 8)
    }

    /// Rank one, B = 1 + pX (an overconvergent unit-root module).
    pub fn rank1(&self, lift: &SigmaLift) -> SigmaModule {
        SigmaModule::new(1, vec![self.s(&[(0, 1), (1, self.p64())])], lift.clone(), "rank1")
    }

    /// The normalized ordinary rank-2 module
    /// B = [[1 + pX, p], [pX, p + pX]], with basis sequence (1, 1).
    pub fn rank2(&self, lift: &SigmaLift) -> SigmaModule {
        let p = self.p64();
        SigmaModule::new(
            2,
            vec![
                self.s(&[(0, 1), (1, p)]),
                self.s(&[(0, p)]),
                self.s(&[(1, p)]),
                self.s(&[(0, p), (1, p)]),
            ],
            lift.clone(),
            "M2",
        )
    }

    /// {trivial, rank-1, rank-2 ordinary, Sym^2, Wedge^2, tensor square}.
    pub fn suite_modules(&self, lift: &SigmaLift) -> Vec<SigmaModule> {
        let m2 = self.rank2(lift);
        vec![
            self.trivial(lift),
            self.rank1(lift),
            m2.clone(),
            m2.sym_power(2, 64).unwrap(),
            m2.ext_power(2, 64).unwrap(),
            m2.tensor(&m2, 64).unwrap(),
        ]
    }

    fn random_series(&self, rng: &mut ChaCha8Rng, deg: u32) -> TruncSeries {
        let mut out = TruncSeries::zero(&self.ctx, 1, deg);
        for e in 0..=deg {
            let v = rng.gen_range(0..1u64 << 16);
            out = out.add(&TruncSeries::monomial(
                &self.ctx,
                1,
                deg,
                vec![e],
                PAdicScalar::from_u64(&self.ctx, v),
            ));
        }
        out
    }

    /// Random element of L(b, c) supported in degrees <= deg.
    fn random_in_l(&self, rng: &mut ChaCha8Rng, deg: u32, b: Rat, c: Rat) -> TruncSeries {
        let mut out = TruncSeries::zero(&self.ctx, 1, deg);
        for e in 0..=deg {
            let need = b * Rat::from_integer(e as i64) + c;
            let ord = if need <= Rat::zero() { 0 } else { need.ceil().to_integer() as u32 };
            if ord >= self.ctx.w {
                continue;
            }
            let v = PAdicScalar::from_u64(&self.ctx, rng.gen_range(0..1u64 << 16)).mul_p_pow(ord);
            out = out.add(&TruncSeries::monomial(&self.ctx, 1, deg, vec![e], v));
        }
        out
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed)
}

fn b_default(q: u64) -> Rat {
    Rat::new(1, q as i64 - 1)
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Zeta of the affine line: l_euler = sum q^m T^m exactly, l_trace matches it
/// mod (p^8, T^11), for both lifts at p = 2.
fn c01() -> CriterionResult {
    let mut r = CriterionResult::new(1, "zeta of the affine line");
    let fx = Fixture::new(2, 8);
    let t_cap = 10usize;
    for (lname, lift) in fx.lifts() {
        let triv = fx.trivial(&lift);
        match l_euler(&triv, t_cap, BUDGET) {
            Ok(le) => {
                let exact = (0..=t_cap).all(|m| {
                    le.coeff(m)
                        == &PAdicScalar::from_biguint(
                            &fx.ctx,
                            crate::unitroot::q_pow_big(2, m as u32),
                        )
                });
                r.check(exact, format!("l_euler(trivial, {lname}) = sum q^m T^m exactly"));
                let tc = jacobian_data(&lift);
                let params = TraceParams::for_target(2, 8);
                match l_trace(&triv, t_cap, &tc, &params) {
                    Ok(lt) => r.check(
                        lt.congruent(&le, 8, t_cap),
                        format!("l_trace = l_euler mod (2^8, T^11) [{lname}]"),
                    ),
                    Err(e) => r.fail(format!("l_trace({lname}): {e}")),
                }
            }
            Err(e) => r.fail(format!("l_euler({lname}): {e}")),
        }
    }
    r
}

/// Trace formula vs Euler product across the suite modules, both lifts,
/// p in {2, 3}, mod (p^6, T^7); plus one n = 2 classical smoke case.
fn c02() -> CriterionResult {
    let mut r = CriterionResult::new(2, "trace formula = Euler product");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (lname, lift) in fx.lifts() {
            let tc = jacobian_data(&lift);
            let params = TraceParams::for_target(p, 6);
            for m in fx.suite_modules(&lift) {
                let le = match l_euler(&m, 6, BUDGET) {
                    Ok(x) => x,
                    Err(e) => {
                        r.fail(format!("l_euler({}, p={p}, {lname}): {e}", m.label));
                        continue;
                    }
                };
                match l_trace(&m, 6, &tc, &params) {
                    Ok(lt) => {
                        r.check(lt.congruent(&le, 6, 6), format!("{} p={p} {lname}", m.label))
                    }
                    Err(e) => r.fail(format!("l_trace({}, p={p}, {lname}): {e}", m.label)),
                }
            }
        }
    }
    // n = 2, classical sigma, rank-1 module 1 + p(X1 + X2), D_T = 3
    let fx = Fixture::new(2, 6);
    let lift2 = SigmaLift::classical(&fx.ctx, 1, 2, 8);
    let m = SigmaModule::new(
        1,
        vec![TruncSeries::from_int_terms(
            &fx.ctx,
            2,
            8,
            &[(vec![0, 0], 1), (vec![1, 0], 2), (vec![0, 1], 2)],
        )],
        lift2.clone(),
        "plane-rank1",
    );
    let tc = jacobian_data(&lift2);
    let params = TraceParams::for_target(2, 6);
    match (l_euler(&m, 3, BUDGET), l_trace(&m, 3, &tc, &params)) {
        (Ok(le), Ok(lt)) => r.check(lt.congruent(&le, 6, 3), "n=2 classical smoke".into()),
        (a, b) => r.fail(format!(
            "n=2 smoke: euler {:?} trace {:?}",
            a.err().map(|e| e.to_string()),
            b.err().map(|e| e.to_string())
        )),
    }
    r
}

/// Splitting round trip on 200 random series and the Thm 4.5 contraction
/// Theta_u(L(b,c)) in L(qb,c).
fn c03() -> CriterionResult {
    let mut r = CriterionResult::new(3, "splitting round trip and contraction");
    let mut rng = rng_for(3);
    let mut round_trips = 0usize;
    let mut round_trip_fails = 0usize;
    let mut contraction_fails = 0usize;
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        let b = b_default(p);
        for (lname, lift) in fx.lifts() {
            for _ in 0..50 {
                let f = fx.random_series(&mut rng, 6);
                match split_basic(&f, &lift) {
                    Ok(fam) => {
                        let mut recon = TruncSeries::zero(&fx.ctx, 1, 12);
                        for (idx, h) in fam.iter().enumerate() {
                            match apply_sigma(h, &lift, None) {
                                Ok(img) => {
                                    recon = recon.add(
                                        &img.with_cap(12)
                                            .mul_monomial(&[idx as u32], &PAdicScalar::one(&fx.ctx)),
                                    );
                                }
                                Err(e) => r.fail(format!("sigma during round trip: {e}")),
                            }
                        }
                        round_trips += 1;
                        if !recon.with_cap(6).congruent(&f, 6) {
                            round_trip_fails += 1;
                            r.fail(format!("round trip p={p} {lname}"));
                        }
                    }
                    Err(e) => r.fail(format!("split p={p} {lname}: {e}")),
                }
            }
            // contraction on elements of L(b, c)
            for c_off in [0i64, 1] {
                for _ in 0..10 {
                    let f = fx.random_in_l(&mut rng, 6, b, Rat::from_integer(c_off));
                    match split_basic(&f, &lift) {
                        Ok(fam) => {
                            for h in &fam {
                                if !h
                                    .in_l(b * Rat::from_integer(p as i64), Rat::from_integer(c_off))
                                {
                                    contraction_fails += 1;
                                }
                            }
                        }
                        Err(e) => r.fail(format!("split in L(b,c): {e}")),
                    }
                }
            }
        }
    }
    r.check(
        round_trip_fails == 0 && round_trips == 200,
        format!("{round_trips} round trips, {round_trip_fails} failures"),
    );
    r.check(contraction_fails == 0, format!("contraction failures: {contraction_fails}"));
    r
}

/// Eq (5.1): trace(sigma(g)) = q^n g and theta_top(sigma(g) J) = q^n g for
/// 100 random g, both lifts.
fn c04() -> CriterionResult {
    let mut r = CriterionResult::new(4, "trace identities (Eq 5.1)");
    let mut rng = rng_for(4);
    let mut fails = 0usize;
    let mut total = 0usize;
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (_lname, lift) in fx.lifts() {
            let tc = jacobian_data(&lift);
            let qscale = PAdicScalar::from_u64(&fx.ctx, p);
            for _ in 0..25 {
                let g = fx.random_series(&mut rng, 4);
                total += 1;
                let sg = match apply_sigma(&g, &lift, None) {
                    Ok(x) => x,
                    Err(e) => {
                        r.fail(format!("sigma: {e}"));
                        continue;
                    }
                };
                match trace_functions(&sg, &lift) {
                    Ok(t) => {
                        let expect = g.scale(&qscale);
                        if !t.congruent(&expect.with_cap(t.deg_cap), 6) {
                            fails += 1;
                        }
                    }
                    Err(e) => r.fail(format!("trace: {e}")),
                }
                let wide = sg.actual_deg() + tc.j_det.actual_deg();
                let sgj = sg.with_cap(wide).mul(&tc.j_det.with_cap(wide));
                match tc.theta_top(&sgj, g.actual_deg() + 1) {
                    Ok(t) => {
                        let expect = g.scale(&qscale).with_cap(t.deg_cap);
                        if !t.congruent(&expect, 6) {
                            fails += 1;
                        }
                    }
                    Err(e) => r.fail(format!("theta_top: {e}")),
                }
            }
        }
    }
    r.check(fails == 0, format!("{total} random g x 2 identities, {fails} failures"));
    r
}

/// Lemma 4.13: perturbing the module matrix by p^i (random) changes every
/// Fredholm determinant by 0 mod p^i.
fn c05() -> CriterionResult {
    let mut r = CriterionResult::new(5, "Fredholm congruence under p^i perturbation");
    let mut rng = rng_for(5);
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (lname, lift) in fx.lifts() {
            if p == 3 && lname == "perturbed" {
                continue; // scale: two lifts at p = 2, classical at p = 3
            }
            let tc = jacobian_data(&lift);
            let m2 = fx.rank2(&lift);
            let params = TraceParams::for_target(p, 6);
            let u = params.u_cut(p, 4) + 2;
            for i in [1u32, 2, 3] {
                let noise: Vec<TruncSeries> =
                    (0..4).map(|_| fx.random_series(&mut rng, 2).mul_p_pow(i)).collect();
                let mut slot = 0usize;
                let pert = m2.map_entries(
                    |e| {
                        let out = e.add(&noise[slot % 4].with_cap(e.deg_cap));
                        slot += 1;
                        out
                    },
                    "M2+noise",
                );
                for forms in 0..=1usize {
                    let ga = dwork_matrix(&m2, forms, u, b_default(p), &tc);
                    let gb = dwork_matrix(&pert, forms, u, b_default(p), &tc);
                    match (ga, gb) {
                        (Ok(ga), Ok(gb)) => {
                            let fa = fredholm_det(&ga, 6);
                            let fb = fredholm_det(&gb, 6);
                            r.check(
                                fa.congruent(&fb, i, 6),
                                format!("p={p} {lname} i={i} Theta_{forms}"),
                            );
                        }
                        (a, b) => r.fail(format!(
                            "matrices p={p} {lname} i={i}: {:?} {:?}",
                            a.err().map(|e| e.to_string()),
                            b.err().map(|e| e.to_string())
                        )),
                    }
                }
            }
        }
    }
    r
}

/// Truncation soundness: U + 3 and D_f + 2 change nothing mod p^N.
fn c06() -> CriterionResult {
    let mut r = CriterionResult::new(6, "truncation soundness (U+3, D_f+2)");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (lname, lift) in fx.lifts() {
            if p == 3 && lname == "perturbed" {
                continue;
            }
            let tc = jacobian_data(&lift);
            let m2 = fx.rank2(&lift);
            let mut params = TraceParams::for_target(p, 6);
            let u0 = params.u_cut(p, 4) + 1;
            params.u_override = Some(u0);
            let la = l_trace(&m2, 6, &tc, &params);
            params.u_override = Some(u0 + 3);
            let lb = l_trace(&m2, 6, &tc, &params);
            match (la, lb) {
                (Ok(a), Ok(b)) => {
                    r.check(a.congruent(&b, 6, 6), format!("U vs U+3, p={p} {lname}"))
                }
                (a, b) => r.fail(format!(
                    "U stability p={p} {lname}: {:?} {:?}",
                    a.err().map(|e| e.to_string()),
                    b.err().map(|e| e.to_string())
                )),
            }
            // Fredholm determinants are independent of b: two distinct choices
            let mut pa = TraceParams::for_target(p, 6);
            let mut pb = TraceParams::for_target(p, 6);
            pb.b = pa.b / Rat::from_integer(2);
            pa.u_override = None;
            pb.u_override = None;
            match (l_trace(&m2, 6, &tc, &pa), l_trace(&m2, 6, &tc, &pb)) {
                (Ok(a), Ok(b)) => {
                    r.check(a.congruent(&b, 6, 6), format!("b vs b/2, p={p} {lname}"))
                }
                (a, b) => r.fail(format!(
                    "b independence p={p} {lname}: {:?} {:?}",
                    a.err().map(|e| e.to_string()),
                    b.err().map(|e| e.to_string())
                )),
            }
        }
        // D_f stability through the limiting-module L-function
        let lift = fx.lift_classical();
        let tc = jacobian_data(&lift);
        let m2 = fx.rank2(&lift);
        let norm = m2.normalize_twist().unwrap();
        let params = UnitRootParams::new(5, 6);
        let la = limiting_module(&norm.module, 3, 6)
            .and_then(|lm| l_limiting(&lm, None, None, &tc, &params));
        let lb = limiting_module(&norm.module, 3, 8)
            .and_then(|lm| l_limiting(&lm, None, None, &tc, &params));
        match (la, lb) {
            (Ok(a), Ok(b)) => r.check(a.congruent(&b, 6, 5), format!("D_f vs D_f+2, p={p}")),
            (a, b) => r.fail(format!(
                "D_f stability p={p}: {:?} {:?}",
                a.err().map(|e| e.to_string()),
                b.err().map(|e| e.to_string())
            )),
        }
    }
    r
}

/// Hodge-Newton: eigen residual 0 mod p^8 within 10 iterations; Hensel unit
/// roots of Euler factors at d <= 4 equal the alpha-orbit products mod p^6.
fn c07() -> CriterionResult {
    let mut r = CriterionResult::new(7, "Hodge-Newton contraction and fiber oracle");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 8);
        for (lname, lift) in fx.lifts() {
            let m2 = fx.rank2(&lift);
            match hodge_newton_unit(&m2, 8) {
                Ok(ur) => {
                    r.check(
                        ur.achieved_prec >= 8 && ur.iterations <= 10,
                        format!(
                            "residual ord {} in {} iterations, p={p} {lname}",
                            ur.achieved_prec, ur.iterations
                        ),
                    );
                    match unit_fiber_check(&ur, &m2, 4, 2, BUDGET) {
                        Ok(rows) => {
                            let all = rows.iter().all(|row| row.matched);
                            r.check(
                                all,
                                format!("fiber oracle at {} points, p={p} {lname}", rows.len()),
                            );
                        }
                        Err(e) => r.fail(format!("fiber check p={p} {lname}: {e}")),
                    }
                }
                Err(e) => r.fail(format!("contraction p={p} {lname}: {e}")),
            }
        }
    }
    r
}

/// Lemma 2.12 decomposition for the rank-2 module, k in {2, 3},
/// mod (p^5, T^6) via Euler products.
fn c08() -> CriterionResult {
    let mut r = CriterionResult::new(8, "decomposition of L(phi^k) (Lemma 2.12)");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (lname, lift) in fx.lifts() {
            if p == 3 && lname == "perturbed" {
                continue;
            }
            let m2 = fx.rank2(&lift);
            for k in [2u32, 3] {
                match decomposition_identity(&m2, k, 5, BUDGET, 64) {
                    Ok((lhs, rhs)) => {
                        r.check(lhs.congruent(&rhs, 5, 5), format!("k={k} p={p} {lname}"))
                    }
                    Err(e) => r.fail(format!("k={k} p={p} {lname}: {e}")),
                }
            }
        }
    }
    r
}

/// Lemma 7.5: phi_{k+p^m} = phi_{infinity,k} mod p^{min(k+p^m, m)} for
/// k in {0,1,2}, m in {1,2,3}.
fn c09() -> CriterionResult {
    let mut r = CriterionResult::new(9, "limiting congruence (Lemma 7.5)");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        for (lname, lift) in fx.lifts() {
            let m2 = fx.rank2(&lift);
            let norm = match m2.normalize_twist() {
                Ok(n) => n,
                Err(e) => {
                    r.fail(format!("normalize p={p} {lname}: {e}"));
                    continue;
                }
            };
            for k in [0i64, 1, 2] {
                for m in [1u32, 2, 3] {
                    match congruence_check_75(&norm.module, k, m, 6) {
                        Ok(rep) => r.check(
                            rep.ok,
                            format!(
                                "k={k} m={m} mod p^{} p={p} {lname} ({} bad entries)",
                                rep.modulus, rep.failed_entries
                            ),
                        ),
                        Err(e) => r.fail(format!("k={k} m={m} p={p} {lname}: {e}")),
                    }
                }
            }
        }
    }
    r
}

/// Thm 7.8 master identity: unit_root_l(k) equals the direct Hensel-root
/// Euler product mod (p^4, T^6) for k in {-1, 0, 1, 2, 5}.
fn c10() -> CriterionResult {
    let mut r = CriterionResult::new(10, "master unit-root identity (Thm 7.8)");
    let cases: Vec<(u64, &'static str)> = vec![(2, "classical"), (2, "perturbed"), (3, "classical")];
    for (p, lname) in cases {
        let fx = Fixture::new(p, 6);
        let lift = if lname == "classical" { fx.lift_classical() } else { fx.lift_perturbed() };
        let m2 = fx.rank2(&lift);
        let params = UnitRootParams::new(5, 6);
        for k in [-1i64, 0, 1, 2, 5] {
            match (
                unit_root_l(&m2, None, k, &params),
                unit_root_euler_oracle(&m2, None, k, 5, BUDGET),
            ) {
                (Ok(url), Ok(oracle)) => r.check(
                    url.series.congruent(&oracle, 4, 5),
                    format!("k={k} p={p} {lname}"),
                ),
                (a, b) => r.fail(format!(
                    "k={k} p={p} {lname}: {:?} {:?}",
                    a.err().map(|e| e.to_string()),
                    b.err().map(|e| e.to_string())
                )),
            }
        }
    }
    r
}

/// Strong family: k1 = k2 mod (q-1)p^j forces numerator and denominator of
/// unit_root_l congruent mod p^j, j in {1, 2, 3}.
fn c11() -> CriterionResult {
    let mut r = CriterionResult::new(11, "strong family congruence (Thm 1.1)");
    let fx = Fixture::new(2, 6);
    let lift = fx.lift_classical();
    let m2 = fx.rank2(&lift);
    let params = UnitRootParams::new(5, 6);
    let base_k = 2i64;
    let base = match unit_root_l(&m2, None, base_k, &params) {
        Ok(u) => u,
        Err(e) => {
            r.fail(format!("base k: {e}"));
            return r;
        }
    };
    for j in [1u32, 2, 3] {
        let k2 = base_k + (fx.p64() - 1).max(1) * fx.p64().pow(j);
        match unit_root_l(&m2, None, k2, &params) {
            Ok(u2) => {
                r.check(
                    base.num.congruent(&u2.num, j, 5),
                    format!("numerators mod p^{j} (k={base_k} vs {k2})"),
                );
                r.check(
                    base.den.congruent(&u2.den, j, 5),
                    format!("denominators mod p^{j} (k={base_k} vs {k2})"),
                );
            }
            Err(e) => r.fail(format!("j={j}: {e}")),
        }
    }
    r
}

/// Newton polygon dominance: fiber polygons over basis polygons; Fredholm
/// polygons over the lattice entry-bound polygon; the Q(x) fit passes.
fn c12() -> CriterionResult {
    let mut r = CriterionResult::new(12, "polygon dominance and Q-bound fit");
    for p in [2u64, 3] {
        let fx = Fixture::new(p, 6);
        let lift = fx.lift_classical();
        // fiber Newton polygons lie on or above the basis polygon
        for m in fx.suite_modules(&lift) {
            let (h, _) = m.basis_sequence(8);
            let basis_poly = h.polygon();
            let pts = enumerate_closed_points(&fx.ctx, 1, 1, 3, BUDGET).unwrap();
            let exts = extensions_for(&fx.ctx, 1, &pts).unwrap();
            let mut all = true;
            for pt in &pts {
                match euler_factor(&m, pt, &exts[&pt.degree]) {
                    Ok(f) => match newton_polygon(&f.cpoly, f.degree, None) {
                        Ok(np) => {
                            if !np.dominates(&basis_poly) {
                                all = false;
                            }
                        }
                        Err(e) => r.fail(format!("polygon {} p={p}: {e}", m.label)),
                    },
                    Err(e) => r.fail(format!("factor {} p={p}: {e}", m.label)),
                }
            }
            r.check(all, format!("fiber >= basis polygon: {} p={p}", m.label));
        }
        // Fredholm polygons dominate the entry-bound polygon
        for (lname, lift) in fx.lifts() {
            if p == 3 && lname == "perturbed" {
                continue;
            }
            let tc = jacobian_data(&lift);
            let m2 = fx.rank2(&lift);
            let b = b_default(p);
            let c1 = (Rat::from_integer(p as i64 - 1) * b).min(Rat::from_integer(1));
            let params = TraceParams::for_target(p, 6);
            let u = params.u_cut(p, 4) + 1;
            for forms in 0..=1usize {
                match dwork_matrix(&m2, forms, u, b, &tc) {
                    Ok(g) => {
                        let c_fit = g.fitted_offset(p).unwrap_or_else(Rat::zero);
                        let f = fredholm_det(&g, (g.dim).min(12));
                        match newton_polygon_of_lseries(&f, None) {
                            Ok(np) => {
                                let bound =
                                    entry_bound_polygon(1, m2.rank, c1, c_fit, g.dim + 2);
                                r.check(
                                    np.dominates(&bound),
                                    format!("Fredholm >= entry bound: Theta_{forms} p={p} {lname}"),
                                );
                                if np.vertices.len() >= 2 {
                                    // the fit needs a non-trivial polygon
                                    let c6cap =
                                        Rat::from_integer(4) + (-c_fit).max(Rat::zero());
                                    let (_, pass) =
                                        q_bound_fit(&np, 1, m2.rank, c6cap, Rat::new(1, 32));
                                    r.check(
                                        pass,
                                        format!("Q-bound fit c5 > 0: Theta_{forms} p={p} {lname}"),
                                    );
                                }
                            }
                            Err(e) => r.fail(format!("hull p={p} {lname}: {e}")),
                        }
                    }
                    Err(e) => r.fail(format!("matrix p={p} {lname}: {e}")),
                }
            }
        }
    }
    r
}

/// Lemma 8.9: 50 perturbation pairs at the threshold p^{m_nu(s)+1} all keep
/// the polygons matched up to slope s.
fn c13() -> CriterionResult {
    let mut r = CriterionResult::new(13, "polygon congruence criterion (Lemma 8.9)");
    let fx = Fixture::new(2, 8);
    let lift = fx.lift_classical();
    let tc = jacobian_data(&lift);
    let m2 = fx.rank2(&lift);
    let params = TraceParams::for_target(2, 8);
    let u = params.u_cut(2, 4) + 2;
    let g1 = match dwork_matrix(&m2, 1, u, b_default(2), &tc) {
        Ok(g) => fredholm_det(&g, g.dim.min(10)),
        Err(e) => {
            r.fail(format!("base determinant: {e}"));
            return r;
        }
    };
    let poly1 = newton_polygon_of_lseries(&g1, None).unwrap();
    let c6cap = Rat::from_integer(3);
    let (profile, fit_ok) = q_bound_fit(&poly1, 1, 2, c6cap, Rat::new(1, 64));
    r.check(fit_ok, "profile fit on the base determinant".into());
    if !fit_ok {
        return r;
    }
    let mut rng = rng_for(13);
    let mut pairs = 0usize;
    let mut bad = 0usize;
    let slopes =
        [Rat::zero(), Rat::new(1, 2), Rat::from_integer(1), Rat::new(3, 2), Rat::from_integer(2)];
    'outer: for s in slopes {
        for _ in 0..10 {
            let m_nu = profile.m_nu(s).unwrap();
            if m_nu + 1 >= fx.ctx.w as i64 {
                continue;
            }
            // perturb in degrees <= nu^{-1}(s), which keeps both series above
            // the x nu(x) hypothesis curve
            let reach = {
                let mut pow = Rat::from_integer(1);
                for _ in 0..profile.m() {
                    pow *= s + profile.c6;
                }
                (pow / profile.c5_pow_m).floor().to_integer().clamp(1, g1.t_cap() as i64)
            };
            let mut coeffs = g1.coeffs().to_vec();
            for (d, c) in coeffs.iter_mut().enumerate().skip(1) {
                if d as i64 <= reach {
                    let noise = PAdicScalar::from_u64(&fx.ctx, rng.gen_range(0..1 << 8))
                        .mul_p_pow(m_nu as u32 + 1);
                    *c = c.add(&noise);
                }
            }
            let g2 = LSeries::from_coeffs(coeffs);
            match np_congruence_criterion(&g1, &g2, &profile, s) {
                Ok((held, agree)) => {
                    pairs += 1;
                    if !held || !agree {
                        bad += 1;
                        r.fail(format!("pair at slope {s} (held={held}, agree={agree})"));
                        if bad > 3 {
                            break 'outer;
                        }
                    }
                }
                Err(e) => r.fail(format!("criterion at slope {s}: {e}")),
            }
        }
    }
    r.check(pairs >= 50 && bad == 0, format!("{pairs} pairs, {bad} disagreements"));
    r
}

/// Gouvea-Mazur scan: d_t(k) tables stable under k -> k + (q-1)p^j for all
/// certified t, on the rank-1 and rank-2 suites.
fn c14() -> CriterionResult {
    let mut r = CriterionResult::new(14, "Gouvea-Mazur scan (Cor 8.10/8.11)");
    let fx = Fixture::new(2, 6);
    let lift = fx.lift_classical();
    let params = UnitRootParams::new(8, 6);
    let profile = BoundProfile { c5_pow_m: Rat::new(1, 4), c6: Rat::from_integer(1), n: 1, r: 2 };
    let floor = profile_floor_polygon(&profile, 40);
    for (label, module) in
        [("rank-1 (Cor 8.11)", fx.rank1(&lift)), ("rank-2", fx.rank2(&lift))]
    {
        for j in [2u32, 3] {
            let step = (fx.p64() - 1).max(1) * fx.p64().pow(j);
            let k_list = vec![2i64, 2 + step];
            let mut l_of_k = |k: i64| -> Result<(LSeries, LSeries)> {
                let u = unit_root_l(&module, None, k, &params)?;
                Ok((u.num, u.den))
            };
            match gm_scan(&mut l_of_k, &k_list, Rat::from_integer(3), j, 2, &profile, Some(&floor))
            {
                Ok(scan) => {
                    r.check(
                        scan.all_equal && !scan.checked_pairs.is_empty(),
                        format!(
                            "{label} j={j}: {} pairs checked, certified slope {:?}",
                            scan.checked_pairs.len(),
                            scan.checked_pairs.first().map(|p| p.2)
                        ),
                    );
                    // Thm 8.5 shape: one fitted c bounds sum_{t<=s} D_t by
                    // c (s+1)^{n+r-1} across every weight in the scan
                    let shape = |row: &crate::analytics::GmRow| -> Rat {
                        let mut worst = Rat::zero();
                        for srow in &row.report.rows {
                            let through: i64 = row
                                .report
                                .rows
                                .iter()
                                .filter(|x| x.slope <= srow.slope)
                                .map(|x| x.total)
                                .sum();
                            let mut denom = srow.slope + Rat::from_integer(1);
                            for _ in 1..(1 + module.rank - 1) {
                                denom *= srow.slope + Rat::from_integer(1);
                            }
                            let ratio = Rat::from_integer(through) / denom;
                            worst = worst.max(ratio);
                        }
                        worst
                    };
                    if let Some(first) = scan.rows.first() {
                        let c_fit = shape(first);
                        let ok = scan.rows.iter().all(|row| shape(row) <= c_fit);
                        r.check(ok, format!("{label} j={j}: Thm 8.5 shape with c = {c_fit}"));
                    }
                }
                Err(e) => r.fail(format!("{label} j={j}: {e}")),
            }
        }
    }
    r
}

/// Rational staircase under Q(x): the largest integer y at each x with
/// (y + c6 x)^m <= c5^m x^{m+1}, taken as a convex floor for certification.
pub fn profile_floor_polygon(profile: &BoundProfile, x_max: i64) -> NewtonPolygon {
    let m = profile.m() as u32;
    let mut pts = vec![(Rat::zero(), Rat::zero())];
    for x in 1..=x_max {
        let xr = Rat::from_integer(x);
        let mut xp = xr;
        for _ in 0..m {
            xp *= xr;
        }
        let rhs = profile.c5_pow_m * xp;
        let mut y = 0i64;
        loop {
            let cand = Rat::from_integer(y + 1) + profile.c6 * xr;
            let mut cp = Rat::from_integer(1);
            for _ in 0..m {
                cp *= cand;
            }
            if cp <= rhs && y < 10_000 {
                y += 1;
            } else {
                break;
            }
        }
        pts.push((xr, Rat::from_integer(y)));
    }
    NewtonPolygon::lower_hull(&pts)
}

/// Slope-degree rows for external reports.
pub fn slope_report_for(
    num: &LSeries,
    den: &LSeries,
    s_max: Rat,
    floor: Option<&NewtonPolygon>,
) -> Result<crate::analytics::SlopeReport> {
    slope_degrees(num, den, s_max, floor)
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

pub fn criterion_count() -> usize {
    14
}

pub fn run_criterion(id: usize) -> CriterionResult {
    match id {
        1 => c01(),
        2 => c02(),
        3 => c03(),
        4 => c04(),
        5 => c05(),
        6 => c06(),
        7 => c07(),
        8 => c08(),
        9 => c09(),
        10 => c10(),
        11 => c11(),
        12 => c12(),
        13 => c13(),
        14 => c14(),
        _ => {
            let mut r = CriterionResult::new(id, "unknown criterion");
            r.fail("no such criterion".into());
            r
        }
    }
}

/// Run the requested criteria (all of them when `ids` is None).
pub fn run_suite(ids: Option<&[usize]>) -> Vec<CriterionResult> {
    let list: Vec<usize> = match ids {
        Some(l) => l.to_vec(),
        None => (1..=criterion_count()).collect(),
    };
    list.into_iter().map(run_criterion).collect()
}
