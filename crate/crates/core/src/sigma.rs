//! Finite-rank sigma-modules: an r x r matrix B(X) over the truncated series
//! ring, column j holding the coordinates of phi(e_j), together with their
//! direct sum / tensor / symmetric / exterior algebra, basis sequences and
//! polygons, and normalization at the slope-zero side.


use crate::analytics::NewtonPolygon;
use crate::error::{Error, Result};
use crate::matrix::SqMatrix;
use crate::padic::{teichmuller, PAdicScalar, UnramifiedElement};
use crate::series::{apply_sigma, Rat, SigmaLift, TruncSeries};

pub const DEFAULT_RANK_LIMIT: usize = 512;

#[derive(Clone)]
pub struct SigmaModule {
    pub rank: usize,
    entries: Vec<TruncSeries>, // row-major; entry(i, j) = coefficient of e_i in phi(e_j)
    pub lift: SigmaLift,
    pub label: String,
}

impl SigmaModule {
    pub fn new(rank: usize, entries: Vec<TruncSeries>, lift: SigmaLift, label: &str) -> Self {
        assert_eq!(entries.len(), rank * rank);
        for e in &entries {
            assert_eq!(e.nvars, lift.nvars);
        }
        SigmaModule { rank, entries, lift, label: label.to_string() }
    }

    pub fn trivial(lift: &SigmaLift, deg_cap: u32) -> Self {
        let one = TruncSeries::one(&lift.ctx, lift.nvars, deg_cap);
        SigmaModule::new(1, vec![one], lift.clone(), "trivial")
    }

    pub fn entry(&self, i: usize, j: usize) -> &TruncSeries {
        &self.entries[i * self.rank + j]
    }

    pub fn entries(&self) -> &[TruncSeries] {
        &self.entries
    }

    pub fn max_entry_deg(&self) -> u32 {
        self.entries.iter().map(|e| e.actual_deg()).max().unwrap_or(0)
    }

    pub fn map_entries(&self, mut f: impl FnMut(&TruncSeries) -> TruncSeries, label: &str) -> Self {
        SigmaModule {
            rank: self.rank,
            entries: self.entries.iter().map(&mut f).collect(),
            lift: self.lift.clone(),
            label: label.to_string(),
        }
    }

    pub fn scale_const(&self, a: &PAdicScalar, label: &str) -> Self {
        self.map_entries(|e| e.scale(a), label)
    }

    pub fn congruent(&self, other: &Self, k: u32) -> bool {
        self.rank == other.rank
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(x, y)| x.congruent(y, k))
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        assert_eq!(self.lift.nvars, other.lift.nvars);
        let r = self.rank + other.rank;
        let zero = self.entries[0].rzero_like();
        let mut entries = vec![zero; r * r];
        for i in 0..self.rank {
            for j in 0..self.rank {
                entries[i * r + j] = self.entry(i, j).clone();
            }
        }
        for i in 0..other.rank {
            for j in 0..other.rank {
                entries[(self.rank + i) * r + (self.rank + j)] = other.entry(i, j).clone();
            }
        }
        SigmaModule {
            rank: r,
            entries,
            lift: self.lift.clone(),
            label: format!("{}(+){}", self.label, other.label),
        }
    }

    pub fn tensor(&self, other: &Self, rank_limit: usize) -> Result<Self> {
        let r = self.rank * other.rank;
        if r > rank_limit {
            return Err(Error::RankOverflow { got: r, limit: rank_limit });
        }
        let mut entries = Vec::with_capacity(r * r);
        for i1 in 0..self.rank {
            for i2 in 0..other.rank {
                for j1 in 0..self.rank {
                    for j2 in 0..other.rank {
                        entries.push(self.entry(i1, j1).mul(other.entry(i2, j2)));
                    }
                }
            }
        }
        Ok(SigmaModule {
            rank: r,
            entries,
            lift: self.lift.clone(),
            label: format!("{}(x){}", self.label, other.label),
        })
    }

    /// Sym^k on the lexicographic monomial basis; Sym^k = 0 for k < 0 is the
    /// caller's convention (skip the factor).
    pub fn sym_power(&self, k: u32, rank_limit: usize) -> Result<Self> {
        let basis = multisets(self.rank, k as usize);
        let r = basis.len();
        if r > rank_limit {
            return Err(Error::RankOverflow { got: r, limit: rank_limit });
        }
        let index: std::collections::BTreeMap<Vec<usize>, usize> =
            basis.iter().cloned().zip(0..).collect();
        let zero = self.entries[0].rzero_like();
        let one = TruncSeries::one(self.entries[0].ctx(), self.lift.nvars, self.entries[0].deg_cap);
        let mut entries = vec![zero.clone(); r * r];
        for (jcol, src) in basis.iter().enumerate() {
            // expand phi(e_{j_1}) ... phi(e_{j_k}) in the symmetric algebra
            let mut acc: std::collections::BTreeMap<Vec<usize>, TruncSeries> =
                std::collections::BTreeMap::new();
            acc.insert(vec![], one.clone());
            for &jt in src {
                let mut next: std::collections::BTreeMap<Vec<usize>, TruncSeries> =
                    std::collections::BTreeMap::new();
                for (mono, coeff) in &acc {
                    for i in 0..self.rank {
                        let b = self.entry(i, jt);
                        if b.is_zero() {
                            continue;
                        }
                        let mut m2 = mono.clone();
                        let pos = m2.partition_point(|&x| x <= i);
                        m2.insert(pos, i);
                        let c2 = coeff.mul(b);
                        next.entry(m2)
                            .and_modify(|e| *e = e.add(&c2))
                            .or_insert(c2);
                    }
                }
                acc = next;
            }
            for (mono, coeff) in acc {
                let irow = index[&mono];
                entries[irow * r + jcol] = coeff;
            }
        }
        Ok(SigmaModule {
            rank: r,
            entries,
            lift: self.lift.clone(),
            label: format!("Sym^{}({})", k, self.label),
        })
    }

    /// Wedge^i on the sorted-subset basis; wedge^0 is the trivial rank-one
    /// module (A_0, sigma) with matrix (1).
    pub fn ext_power(&self, i: u32, rank_limit: usize) -> Result<Self> {
        if i == 0 {
            return Ok(Self::trivial(&self.lift, self.entries[0].deg_cap));
        }
        let basis = subsets(self.rank, i as usize);
        let r = basis.len();
        if r > rank_limit {
            return Err(Error::RankOverflow { got: r, limit: rank_limit });
        }
        let mut entries = Vec::with_capacity(r * r);
        for srow in &basis {
            for scol in &basis {
                entries.push(self.minor(srow, scol));
            }
        }
        Ok(SigmaModule {
            rank: r,
            entries,
            lift: self.lift.clone(),
            label: format!("Wedge^{}({})", i, self.label),
        })
    }

    /// Determinant of the (rows, cols) submatrix by Laplace expansion.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> TruncSeries {
        assert_eq!(rows.len(), cols.len());
        let zero = self.entries[0].rzero_like();
        if rows.is_empty() {
            return TruncSeries::one(zero.ctx(), self.lift.nvars, zero.deg_cap);
        }
        if rows.len() == 1 {
            return self.entry(rows[0], cols[0]).clone();
        }
        let mut acc = zero;
        for (t, &row) in rows.iter().enumerate() {
            let sub_rows: Vec<usize> =
                rows.iter().enumerate().filter(|(s, _)| *s != t).map(|(_, &x)| x).collect();
            let term = self.entry(row, cols[0]).mul(&self.minor(&sub_rows, &cols[1..]));
            acc = if t % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
        }
        acc
    }

    /// Divisibility class of column j: min Gauss order over the column.
    pub fn column_ord(&self, j: usize) -> Option<u32> {
        (0..self.rank)
            .filter_map(|i| self.entry(i, j).gauss_ord())
            .min()
    }

    /// Basis sequence h_i = number of columns with divisibility class i, after
    /// a stable sort of columns by class; the applied permutation is returned.
    pub fn basis_sequence(&self, i_max: u32) -> (BasisSequence, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.rank).collect();
        let key = |j: &usize| self.column_ord(*j).unwrap_or(u32::MAX);
        order.sort_by_key(key);
        let mut h = vec![0usize; i_max as usize + 1];
        for j in 0..self.rank {
            if let Some(o) = self.column_ord(j) {
                if o <= i_max {
                    h[o as usize] += 1;
                }
            }
        }
        (BasisSequence { h }, order)
    }

    /// Evaluate the matrix at a fiber.
    pub fn fiber_matrix(&self, coords: &[UnramifiedElement]) -> SqMatrix<UnramifiedElement> {
        SqMatrix::from_fn(self.rank, |i, j| self.entry(i, j).evaluate(coords))
    }

    /// Normalized form: column 1 congruent to e_1 mod p and every other
    /// column congruent to 0 mod p.
    pub fn is_normalized(&self) -> bool {
        for i in 0..self.rank {
            let c = self.entry(i, 0);
            let want_one = i == 0;
            let reduced = c.residue_terms();
            if want_one {
                if reduced.len() != 1 || reduced.get(&vec![0u32; self.lift.nvars]) != Some(&1) {
                    return false;
                }
            } else if !reduced.is_empty() {
                return false;
            }
        }
        for j in 1..self.rank {
            for i in 0..self.rank {
                if !self.entry(i, j).residue_terms().is_empty() {
                    return false;
                }
            }
        }
        true
    }

    /// Writes phi = a (x) eta with a a Teichmueller unit and eta normalized:
    /// permutes the unique unit column first, kills the sub-diagonal mod-p
    /// part of that column by the basis change e_1' = e_1 + sum c_j e_j, and
    /// scales away the Teichmueller lift of the resulting constant unit.
    pub fn normalize_twist(&self) -> Result<NormalizeResult> {
        let r = self.rank;
        let unit_cols: Vec<usize> =
            (0..r).filter(|&j| self.column_ord(j) == Some(0)).collect();
        if unit_cols.len() != 1 {
            return Err(Error::NotOrdinaryShape(format!(
                "{} unit columns, need exactly one",
                unit_cols.len()
            )));
        }
        let j0 = unit_cols[0];
        // basis reindexing putting the unit column first
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(0, j0);
        let permuted = self.map_entries_indexed(|i, j| self.entry(perm[i], perm[j]).clone());

        // the unit entry must be a constant unit after reduction
        let top = permuted.entry(0, 0).residue_terms();
        let lambda = match (top.len(), top.get(&vec![0u32; self.lift.nvars])) {
            (1, Some(&l)) => l,
            (0, _) => {
                return Err(Error::NotOrdinaryShape(
                    "unit entry of the unit column does not sit on the diagonal".into(),
                ))
            }
            _ => {
                return Err(Error::NotOrdinaryShape(
                    "mod-p unit entry is non-constant".into(),
                ))
            }
        };
        let ctx = self.entries[0].ctx().clone();
        let lam_inv = crate::padic::mod_inv_u64(lambda, ctx.p);
        // c_i = reduction(B_{i1}) / lambda, lifted with coefficients in [0, p)
        let nv = self.lift.nvars;
        let cap = self.entries[0].deg_cap;
        let mut cvals: Vec<TruncSeries> = Vec::with_capacity(r);
        for i in 0..r {
            let mut c = TruncSeries::zero(&ctx, nv, cap);
            if i >= 1 {
                for (u, resv) in permuted.entry(i, 0).residue_terms() {
                    let v = (resv * lam_inv) % ctx.p;
                    c = c.add(&TruncSeries::monomial(
                        &ctx,
                        nv,
                        cap,
                        u.clone(),
                        PAdicScalar::from_u64(&ctx, v),
                    ));
                }
            }
            cvals.push(c);
        }
        // U = I + sum_{i>=2} c_i E_{i1}; B' = U^{-1} B sigma(U)
        let one = TruncSeries::one(&ctx, nv, cap);
        let zero = TruncSeries::zero(&ctx, nv, cap);
        let tbasis = SqMatrix::from_fn(r, |i, j| {
            if i == j {
                one.clone()
            } else if j == 0 && i >= 1 {
                cvals[i].clone()
            } else {
                zero.clone()
            }
        });
        let u_inv = SqMatrix::from_fn(r, |i, j| {
            if i == j {
                one.clone()
            } else if j == 0 && i >= 1 {
                cvals[i].neg()
            } else {
                zero.clone()
            }
        });
        let sigma_u = SqMatrix::from_fn(r, |i, j| {
            if i == j {
                one.clone()
            } else if j == 0 && i >= 1 {
                apply_sigma(&cvals[i], &self.lift, None)
                    .expect("sigma image of a mod-p lift fits")
                    .with_cap(cap)
            } else {
                zero.clone()
            }
        });
        let bmat = SqMatrix::from_fn(r, |i, j| permuted.entry(i, j).clone());
        let bprime = u_inv.mul(&bmat.mul(&sigma_u));
        let a = teich_unit(&ctx, lambda);
        let a_inv = a.inv().expect("Teichmueller lift of a unit is a unit");
        let entries: Vec<TruncSeries> = bprime.a.iter().map(|e| e.scale(&a_inv)).collect();
        let module = SigmaModule {
            rank: r,
            entries,
            lift: self.lift.clone(),
            label: format!("norm({})", self.label),
        };
        if !module.is_normalized() {
            return Err(Error::NotOrdinaryShape(
                "normalization postcondition failed".into(),
            ));
        }
        Ok(NormalizeResult { a, module, tbasis, permutation: perm })
    }

    fn map_entries_indexed(&self, f: impl Fn(usize, usize) -> TruncSeries) -> Self {
        let mut entries = Vec::with_capacity(self.rank * self.rank);
        for i in 0..self.rank {
            for j in 0..self.rank {
                entries.push(f(i, j));
            }
        }
        SigmaModule {
            rank: self.rank,
            entries,
            lift: self.lift.clone(),
            label: self.label.clone(),
        }
    }
}

trait ZeroLike {
    fn rzero_like(&self) -> TruncSeries;
}
impl ZeroLike for TruncSeries {
    fn rzero_like(&self) -> TruncSeries {
        TruncSeries::zero(self.ctx(), self.nvars, self.deg_cap)
    }
}

pub struct NormalizeResult {
    pub a: PAdicScalar,
    pub module: SigmaModule,
    pub tbasis: SqMatrix<TruncSeries>,
    pub permutation: Vec<usize>,
}

/// Teichmueller lift of a residue in the base ring: iterate c -> c^p.
pub fn teich_unit(ctx: &crate::padic::Ctx, residue: u64) -> PAdicScalar {
    let ext = crate::padic::build_extension(ctx, 1, 1).expect("prime ctx");
    let e = UnramifiedElement::from_residue(&ext, &[residue]);
    teichmuller(&e).rational_part()
}

// ---------------------------------------------------------------------------
// Basis sequences and polygons
// ---------------------------------------------------------------------------

/// h_i = number of basis columns with exact p-divisibility class i.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSequence {
    pub h: Vec<usize>,
}

impl BasisSequence {
    pub fn new(h: Vec<usize>) -> Self {
        BasisSequence { h }
    }

    /// Cumulative breakpoints d_0 = 0, d_{i+1} = d_i + h_i.
    pub fn breakpoints(&self) -> Vec<usize> {
        let mut d = vec![0usize];
        for &hi in &self.h {
            d.push(d.last().unwrap() + hi);
        }
        d
    }

    /// The polygon with a slope-i side of horizontal length h_i: vertices
    /// (d_i, h_1 + 2 h_2 + ... + i h_i).
    pub fn polygon(&self) -> NewtonPolygon {
        let mut verts = vec![(Rat::from_integer(0), Rat::from_integer(0))];
        let mut x = 0i64;
        let mut y = 0i64;
        for (i, &hi) in self.h.iter().enumerate() {
            if hi == 0 {
                continue;
            }
            x += hi as i64;
            y += (i as i64) * hi as i64;
            verts.push((Rat::from_integer(x), Rat::from_integer(y)));
        }
        NewtonPolygon::from_vertices(verts)
    }

    pub fn oplus(&self, g: &BasisSequence) -> BasisSequence {
        let n = self.h.len().max(g.h.len());
        let h = (0..n)
            .map(|i| self.h.get(i).copied().unwrap_or(0) + g.h.get(i).copied().unwrap_or(0))
            .collect();
        BasisSequence { h }
    }

    pub fn otimes(&self, g: &BasisSequence) -> BasisSequence {
        let n = self.h.len() + g.h.len();
        let mut h = vec![0usize; n.max(1) - 1 + 1];
        for (a, &ha) in self.h.iter().enumerate() {
            for (b, &gb) in g.h.iter().enumerate() {
                h[a + b] += ha * gb;
            }
        }
        BasisSequence { h }
    }

    /// Sym^2 h = ((h_0^2+h_0)/2, h_0 h_1, h_0 h_2 + (h_1^2+h_1)/2, ...).
    pub fn sym2(&self) -> BasisSequence {
        self.square_combinator(true)
    }

    /// Wedge^2 h = ((h_0^2-h_0)/2, h_0 h_1, h_0 h_2 + (h_1^2-h_1)/2, ...).
    pub fn wedge2(&self) -> BasisSequence {
        self.square_combinator(false)
    }

    fn square_combinator(&self, sym: bool) -> BasisSequence {
        let n = 2 * self.h.len().max(1) - 1;
        let mut h = vec![0usize; n];
        for (a, &ha) in self.h.iter().enumerate() {
            for (b, &hb) in self.h.iter().enumerate() {
                if a < b {
                    h[a + b] += ha * hb;
                } else if a == b {
                    h[a + b] += if sym { (ha * ha + ha) / 2 } else { (ha * ha - ha) / 2 };
                }
            }
        }
        BasisSequence { h }
    }
}

// ---------------------------------------------------------------------------
// Index enumeration helpers
// ---------------------------------------------------------------------------

/// Sorted multisets of size k over {0, .., r-1}, lexicographic.
pub fn multisets(r: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(r: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..r {
            cur.push(i);
            rec(r, k, i, cur, out);
            cur.pop();
        }
    }
    rec(r, k, 0, &mut cur, &mut out);
    out
}

/// Sorted k-subsets of {0, .., r-1}, lexicographic.
pub fn subsets(r: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(r: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..r {
            cur.push(i);
            rec(r, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(r, k, 0, &mut cur, &mut out);
    out
}

/// Binomial-type count used by polygon vertex formulas.
pub fn lattice_count(coords: usize, total_max: u64) -> u64 {
    // number of lattice points with coordinate sum <= total_max in `coords`
    // coordinates: binomial(coords + total_max, coords)
    let mut acc = 1u128;
    for i in 1..=coords as u128 {
        acc = acc * (total_max as u128 + i) / i;
    }
    acc as u64
}

pub type RatPair = (Rat, Rat);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PadicCtx;

    fn setup() -> (crate::padic::Ctx, SigmaLift) {
        let ctx = PadicCtx::new(2, 8).unwrap();
        let lift = SigmaLift::classical(&ctx, 1, 1, 8);
        (ctx, lift)
    }

    fn s1(ctx: &crate::padic::Ctx, terms: &[(u32, i64)]) -> TruncSeries {
        let t: Vec<(Vec<u32>, i64)> = terms.iter().map(|&(e, c)| (vec![e], c)).collect();
        TruncSeries::from_int_terms(ctx, 1, 8, &t)
    }

    fn diag(ctx: &crate::padic::Ctx, lift: &SigmaLift, d: &[i64]) -> SigmaModule {
        let r = d.len();
        let mut entries = vec![TruncSeries::zero(ctx, 1, 8); r * r];
        for (i, &v) in d.iter().enumerate() {
            entries[i * r + i] = s1(ctx, &[(0, v)]);
        }
        SigmaModule::new(r, entries, lift.clone(), "diag")
    }

    #[test]
    fn wedge_and_sym_of_small_modules() {
        let (ctx, lift) = setup();
        let m = diag(&ctx, &lift, &[3, 5]);
        let w2 = m.ext_power(2, 64).unwrap();
        assert_eq!(w2.rank, 1);
        assert_eq!(w2.entry(0, 0), &s1(&ctx, &[(0, 15)]));
        let r1 = diag(&ctx, &lift, &[3]);
        let s2 = r1.sym_power(2, 64).unwrap();
        assert_eq!(s2.rank, 1);
        assert_eq!(s2.entry(0, 0), &s1(&ctx, &[(0, 9)]));
        let w0 = m.ext_power(0, 64).unwrap();
        assert_eq!(w0.rank, 1);
        assert_eq!(w0.entry(0, 0), &s1(&ctx, &[(0, 1)]));
    }

    #[test]
    fn tensor_fiber_eigenvalues_triangular_oracle() {
        // triangular fibers: tensor eigenvalues are the pairwise products
        let (ctx, lift) = setup();
        let a = SigmaModule::new(
            2,
            vec![
                s1(&ctx, &[(0, 3)]),
                s1(&ctx, &[(0, 1)]),
                TruncSeries::zero(&ctx, 1, 8),
                s1(&ctx, &[(0, 5)]),
            ],
            lift.clone(),
            "A",
        );
        let b = SigmaModule::new(
            2,
            vec![
                s1(&ctx, &[(0, 7)]),
                TruncSeries::zero(&ctx, 1, 8),
                TruncSeries::zero(&ctx, 1, 8),
                s1(&ctx, &[(0, 11)]),
            ],
            lift.clone(),
            "B",
        );
        let t = a.tensor(&b, 64).unwrap();
        let ext = crate::padic::build_extension(&ctx, 1, 1).unwrap();
        let one = UnramifiedElement::one(&ext);
        let ft = t.fiber_matrix(std::slice::from_ref(&one));
        let cs = ft.char_series(None);
        // eigenvalues 3*7, 3*11, 5*7, 5*11 -> det(I - TM) = prod (1 - eT)
        let mut expect = crate::lseries::LSeries::one(&ctx, 4);
        for e in [21i64, 33, 35, 55] {
            let f = crate::lseries::LSeries::from_coeffs(vec![
                PAdicScalar::one(&ctx),
                PAdicScalar::from_i64(&ctx, -e),
                PAdicScalar::zero(&ctx),
                PAdicScalar::zero(&ctx),
                PAdicScalar::zero(&ctx),
            ]);
            expect = expect.mul(&f);
        }
        for k in 0..=4usize {
            assert_eq!(
                cs[k].rational_part(),
                expect.coeff(k).clone(),
                "coefficient {k}"
            );
        }
    }

    #[test]
    fn basis_sequences_and_polygons() {
        let (ctx, lift) = setup();
        let m = diag(&ctx, &lift, &[1, 2]); // diag(1, p): h = (1, 1)
        let (h, _) = m.basis_sequence(4);
        assert_eq!(&h.h[..2], &[1, 1]);
        let poly = h.polygon();
        assert_eq!(
            poly.vertices,
            vec![
                (Rat::from_integer(0), Rat::from_integer(0)),
                (Rat::from_integer(1), Rat::from_integer(0)),
                (Rat::from_integer(2), Rat::from_integer(1))
            ]
        );
        let h2 = BasisSequence::new(vec![2, 0, 1]);
        assert_eq!(
            h2.polygon().vertices,
            vec![
                (Rat::from_integer(0), Rat::from_integer(0)),
                (Rat::from_integer(2), Rat::from_integer(0)),
                (Rat::from_integer(3), Rat::from_integer(2))
            ]
        );
        let flat = BasisSequence::new(vec![3]);
        assert_eq!(
            flat.polygon().vertices,
            vec![
                (Rat::from_integer(0), Rat::from_integer(0)),
                (Rat::from_integer(3), Rat::from_integer(0))
            ]
        );
    }

    #[test]
    fn sequence_combinators_match_displays() {
        let h = BasisSequence::new(vec![1, 1]);
        let g = BasisSequence::new(vec![1, 1]);
        assert_eq!(&h.otimes(&g).h[..3], &[1, 2, 1]);
        assert_eq!(&h.wedge2().h[..2], &[0, 1]);
        assert_eq!(&h.sym2().h[..3], &[1, 1, 1]);
        assert_eq!(&h.oplus(&g).h[..2], &[2, 2]);
    }

    #[test]
    fn sym2_basis_sequence_matches_construction() {
        let (ctx, lift) = setup();
        // normalized ordinary rank-2: h = (1, 1); Sym^2 should give (1, 1, 1)
        let m = SigmaModule::new(
            2,
            vec![
                s1(&ctx, &[(0, 1), (1, 2)]),
                s1(&ctx, &[(0, 2)]),
                s1(&ctx, &[(1, 2)]),
                s1(&ctx, &[(0, 2), (1, 2)]),
            ],
            lift.clone(),
            "M2",
        );
        let s2 = m.sym_power(2, 64).unwrap();
        let (hs, _) = s2.basis_sequence(4);
        assert_eq!(&hs.h[..3], &[1, 1, 1]);
        let (hm, _) = m.basis_sequence(4);
        assert_eq!(hs.h[..3], hm.sym2().h[..3]);
        // tensor square matches the sequence combinator as well
        let t = m.tensor(&m, 64).unwrap();
        let (ht, _) = t.basis_sequence(4);
        assert_eq!(ht.h[..3], hm.otimes(&hm).h[..3]);
    }

    #[test]
    fn normalized_checks() {
        let (ctx, lift) = setup();
        let mk = |e: [&[(u32, i64)]; 4]| {
            SigmaModule::new(
                2,
                vec![s1(&ctx, e[0]), s1(&ctx, e[1]), s1(&ctx, e[2]), s1(&ctx, e[3])],
                lift.clone(),
                "t",
            )
        };
        // entries row-major: [[B00, B01], [B10, B11]]
        assert!(mk([&[(0, 1)], &[(0, 2)], &[(0, 2)], &[(0, 2)]]).is_normalized());
        assert!(!mk([&[(0, 1)], &[(0, 2)], &[(0, 1)], &[(0, 2)]]).is_normalized());
        // 3 is a 1-unit mod 2
        assert!(mk([&[(0, 3)], &[(0, 2)], &[(0, 2)], &[(0, 2)]]).is_normalized());
    }

    #[test]
    fn normalize_twist_examples() {
        let (ctx, lift) = setup();
        // already normalized: a = 1, module unchanged, basis = identity
        let m = SigmaModule::new(
            2,
            vec![
                s1(&ctx, &[(0, 1), (1, 2)]),
                s1(&ctx, &[(0, 2)]),
                s1(&ctx, &[(1, 2)]),
                s1(&ctx, &[(0, 2), (1, 2)]),
            ],
            lift.clone(),
            "M2",
        );
        let r = m.normalize_twist().unwrap();
        assert_eq!(r.a, PAdicScalar::one(&ctx));
        assert!(r.module.congruent(&m, 8));
        // B = [[1, p], [1, p]]: one mod-p solve kills B_10
        let m2 = SigmaModule::new(
            2,
            vec![
                s1(&ctx, &[(0, 1)]),
                s1(&ctx, &[(0, 2)]),
                s1(&ctx, &[(0, 1)]),
                s1(&ctx, &[(0, 2)]),
            ],
            lift.clone(),
            "B",
        );
        let r2 = m2.normalize_twist().unwrap();
        assert!(r2.module.is_normalized());
        // p = 3, B_00 = 2 constant: a is the Teichmueller lift of 2 (= -1)
        let ctx3 = PadicCtx::new(3, 8).unwrap();
        let lift3 = SigmaLift::classical(&ctx3, 1, 1, 8);
        let m3 = SigmaModule::new(
            1,
            vec![TruncSeries::from_int_terms(&ctx3, 1, 8, &[(vec![0], 2)])],
            lift3,
            "c2",
        );
        let r3 = m3.normalize_twist().unwrap();
        assert_eq!(
            r3.a,
            PAdicScalar::from_i64(&ctx3, -1),
            "Teichmueller lift of 2 mod 3 is -1"
        );
        assert!(r3.module.is_normalized());
    }

    #[test]
    fn fiber_functoriality() {
        let (ctx, lift) = setup();
        let a = diag(&ctx, &lift, &[3, 5]);
        let b = diag(&ctx, &lift, &[7, 11]);
        let t = a.tensor(&b, 64).unwrap();
        let ext = crate::padic::build_extension(&ctx, 1, 1).unwrap();
        let x = vec![UnramifiedElement::one(&ext)];
        let k = a.fiber_matrix(&x).kronecker(&b.fiber_matrix(&x));
        assert_eq!(t.fiber_matrix(&x), k);
    }
}
