//! Newton polygons of truncated series with precision-aware certification,
//! lattice entry-bound polygons, the Q(x) = c5 x^{1+1/(n+r-1)} - c6 x lower
//! bound fit, slope-degree reports, the polygon-congruence criterion, and
//! Gouvea-Mazur style scans over the weight parameter.

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lseries::LSeries;
use crate::series::Rat;

/// Lower-convex polygon: vertices with strictly increasing x and
/// non-decreasing slopes. `certified_slope` is the watermark below which the
/// computed sides cannot move at the working precision/truncation; None means
/// every computed side is certified within the data.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonPolygon {
    pub vertices: Vec<(Rat, Rat)>,
    pub certified_slope: Option<Rat>,
}

impl NewtonPolygon {
    pub fn from_vertices(vertices: Vec<(Rat, Rat)>) -> Self {
        NewtonPolygon { vertices, certified_slope: None }
    }

    /// Lower convex hull of a point set (monotone chain, lower part).
    pub fn lower_hull(points: &[(Rat, Rat)]) -> Self {
        let mut pts = points.to_vec();
        pts.sort();
        pts.dedup();
        let mut hull: Vec<(Rat, Rat)> = Vec::new();
        for p in pts {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // keep b only if it turns left (strictly below segment a-p)
                let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
                if cross <= Rat::zero() {
                    hull.pop();
                } else {
                    break;
                }
            }
            // drop duplicate x keeping the lower point
            if let Some(last) = hull.last() {
                if last.0 == p.0 {
                    if p.1 < last.1 {
                        hull.pop();
                    } else {
                        continue;
                    }
                }
            }
            hull.push(p);
        }
        NewtonPolygon { vertices: hull, certified_slope: None }
    }

    pub fn max_x(&self) -> Rat {
        self.vertices.last().map(|v| v.0).unwrap_or_else(Rat::zero)
    }

    /// Piecewise-linear value; None beyond the last vertex.
    pub fn value_at(&self, x: Rat) -> Option<Rat> {
        if self.vertices.is_empty() || x < self.vertices[0].0 || x > self.max_x() {
            return None;
        }
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            if x <= b.0 {
                let t = (x - a.0) / (b.0 - a.0);
                return Some(a.1 + t * (b.1 - a.1));
            }
        }
        Some(self.vertices[0].1)
    }

    /// (slope, horizontal length) per side.
    pub fn sides(&self) -> Vec<(Rat, Rat)> {
        self.vertices
            .windows(2)
            .map(|w| {
                let dx = w[1].0 - w[0].0;
                let dy = w[1].1 - w[0].1;
                (dy / dx, dx)
            })
            .collect()
    }

    /// Horizontal length of the side of exactly this slope.
    pub fn slope_length(&self, s: Rat) -> Rat {
        self.sides()
            .into_iter()
            .filter(|(sl, _)| *sl == s)
            .map(|(_, l)| l)
            .sum()
    }

    /// self lies on or above `other` over their common x-range (ties allowed).
    pub fn dominates(&self, other: &NewtonPolygon) -> bool {
        let hi = self.max_x().min(other.max_x());
        let mut xs: Vec<Rat> = self
            .vertices
            .iter()
            .chain(other.vertices.iter())
            .map(|v| v.0)
            .filter(|x| *x <= hi)
            .collect();
        xs.sort();
        xs.dedup();
        xs.into_iter().all(|x| match (self.value_at(x), other.value_at(x)) {
            (Some(a), Some(b)) => a >= b,
            _ => true,
        })
    }

    /// Sides with slope <= s, as (slope, length) pairs.
    pub fn sides_up_to(&self, s: Rat) -> Vec<(Rat, Rat)> {
        self.sides().into_iter().filter(|(sl, _)| *sl <= s).collect()
    }

    /// Minkowski sum: slopes of a product are the multiset union of slopes.
    pub fn minkowski_sum(&self, other: &NewtonPolygon) -> NewtonPolygon {
        let mut sides = self.sides();
        sides.extend(other.sides());
        sides.sort_by(|a, b| a.0.cmp(&b.0));
        let mut verts = vec![(Rat::zero(), Rat::zero())];
        let (mut x, mut y) = (Rat::zero(), Rat::zero());
        for (s, l) in sides {
            x += l;
            y += s * l;
            verts.push((x, y));
        }
        let cert = match (self.certified_slope, other.certified_slope) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, b) => b,
        };
        let mut p = NewtonPolygon::from_vertices(verts);
        p.certified_slope = cert;
        p
    }
}

/// Newton polygon of a truncated T-series with respect to ord/unit.
///
/// Coefficients indistinguishable from 0 at their known precision contribute
/// no vertex; a side remains certified only when every such skipped point has
/// guaranteed order at or above the hull there, and the watermark also caps
/// at the minimal slope a point beyond the truncation could cut in at (future
/// coefficients are assumed on or above `future_floor`, default ord >= 0).
pub fn newton_polygon(
    coeffs: &[crate::padic::PAdicScalar],
    unit: u32,
    future_floor: Option<&NewtonPolygon>,
) -> Result<NewtonPolygon> {
    assert!(unit >= 1);
    if coeffs.is_empty() {
        return Err(Error::UnresolvedOrd("empty series".into()));
    }
    if coeffs[0].ord_resolved() != Some(0) {
        return Err(Error::UnresolvedOrd("constant term must be a unit (= 1)".into()));
    }
    let u = Rat::from_integer(unit as i64);
    let mut pts = Vec::new();
    let mut unresolved: Vec<(usize, u32)> = Vec::new();
    for (m, c) in coeffs.iter().enumerate() {
        match c.ord_resolved() {
            Some(v) => pts.push((Rat::from_integer(m as i64), Rat::from_integer(v as i64) / u)),
            None => unresolved.push((m, c.known_prec())),
        }
    }
    let mut poly = NewtonPolygon::lower_hull(&pts);
    // precision-based watermark from skipped coefficients
    let mut watermark: Option<Rat> = None;
    for (m, prec) in unresolved {
        let x = Rat::from_integer(m as i64);
        let bound = Rat::from_integer(prec as i64) / u;
        if let Some(hull_y) = poly.value_at(x) {
            if bound < hull_y {
                // the exact coefficient could dip to `bound`: sides at or
                // beyond the tangent slope from earlier vertices are at risk
                let mut cut: Option<Rat> = None;
                for v in &poly.vertices {
                    if v.0 < x {
                        let s = (bound - v.1) / (x - v.0);
                        cut = Some(cut.map_or(s, |c: Rat| c.min(s)));
                    }
                }
                if let Some(c) = cut {
                    watermark = Some(watermark.map_or(c, |w: Rat| w.min(c)));
                }
            }
        }
    }
    // truncation-based watermark: a future point at (x', floor(x')) could cut
    // into computed sides; minimize the cut slope over admissible futures.
    let data_max = Rat::from_integer(coeffs.len() as i64 - 1);
    let default_floor;
    let floor = match future_floor {
        Some(f) => f,
        None => {
            default_floor = NewtonPolygon::from_vertices(vec![
                (Rat::zero(), Rat::zero()),
                (data_max + Rat::from_integer(2), Rat::zero()),
            ]);
            &default_floor
        }
    };
    let mut future_xs: Vec<Rat> = floor
        .vertices
        .iter()
        .map(|v| v.0)
        .filter(|x| *x > data_max)
        .collect();
    future_xs.push(data_max + Rat::from_integer(1));
    let mut cut: Option<Rat> = None;
    for xf in future_xs {
        let yf = floor
            .value_at(xf)
            .unwrap_or_else(|| floor.vertices.last().map(|v| v.1).unwrap_or_else(Rat::zero));
        for v in &poly.vertices {
            if v.0 < xf {
                let s = (yf - v.1) / (xf - v.0);
                cut = Some(cut.map_or(s, |c: Rat| c.min(s)));
            }
        }
    }
    if let Some(c) = cut {
        // sides strictly below the cut slope are stable under any admissible
        // future coefficient
        let last_slope = poly.sides().last().map(|(s, _)| *s);
        if last_slope.map_or(true, |ls| c <= ls) {
            watermark = Some(watermark.map_or(c, |w: Rat| w.min(c)));
        }
    }
    poly.certified_slope = watermark;
    Ok(poly)
}

pub fn newton_polygon_of_lseries(
    f: &LSeries,
    future_floor: Option<&NewtonPolygon>,
) -> Result<NewtonPolygon> {
    newton_polygon(f.coeffs(), 1, future_floor)
}

// ---------------------------------------------------------------------------
// Entry-bound polygons and the Q(x) fit
// ---------------------------------------------------------------------------

/// Polygon whose l-th vertex counts lattice points of total degree <= l in
/// n + r - 1 coordinates, with weight c1 * total + c per point; prepended
/// with (0, 0).
pub fn entry_bound_polygon(n: usize, r: usize, c1: Rat, c: Rat, num_vertices: usize) -> NewtonPolygon {
    let m = n + r - 1;
    let mut verts = vec![(Rat::zero(), Rat::zero())];
    let mut count: i64 = 0;
    let mut weight = Rat::zero();
    for total in 0..num_vertices as i64 {
        // points with coordinate sum == total in m coordinates
        let cnt = binom(m as i64 - 1 + total, m as i64 - 1);
        count += cnt;
        weight += c1 * Rat::from_integer(total) * Rat::from_integer(cnt);
        verts.push((Rat::from_integer(count), weight + c * Rat::from_integer(count)));
    }
    NewtonPolygon::from_vertices(verts)
}

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    let mut acc: i128 = 1;
    for i in 1..=k as i128 {
        acc = acc * (n as i128 - k as i128 + i) / i;
    }
    acc as i64
}

/// Fitted profile for Q(x) = c5 x^{1+1/(n+r-1)} - c6 x. To keep everything
/// rational, c5 is carried as its (n+r-1)-th power.
#[derive(Clone, Debug)]
pub struct BoundProfile {
    pub c5_pow_m: Rat,
    pub c6: Rat,
    pub n: usize,
    pub r: usize,
}

impl BoundProfile {
    pub fn m(&self) -> usize {
        self.n + self.r - 1
    }

    pub fn c5_approx(&self) -> f64 {
        let v = self.c5_pow_m.to_f64().unwrap_or(0.0);
        if v <= 0.0 {
            0.0
        } else {
            v.powf(1.0 / self.m() as f64)
        }
    }

    /// m_nu(x) = [x nu^{-1}(x)] for nu(y) = c5 y^{1/m} - c6; the inverse is
    /// nu^{-1}(x) = (x + c6)^m / c5^m, exactly rational.
    pub fn m_nu(&self, s: Rat) -> Result<i64> {
        if self.c5_pow_m <= Rat::zero() {
            return Err(Error::ValidationError {
                field: "c5".into(),
                msg: "profile has non-positive c5".into(),
            });
        }
        let mut pow = Rat::from_integer(1);
        for _ in 0..self.m() {
            pow *= s + self.c6;
        }
        let val = s * pow / self.c5_pow_m;
        Ok(val.floor().to_integer())
    }
}

/// Maximize c5 subject to polygon >= Q at the vertices, with c6 capped; the
/// fit passes when the resulting c5 stays positive above `c5_min`.
pub fn q_bound_fit(
    polygon: &NewtonPolygon,
    n: usize,
    r: usize,
    c6_cap: Rat,
    c5_min: Rat,
) -> (BoundProfile, bool) {
    let m = (n + r - 1) as u32;
    let mut c5m: Option<Rat> = None;
    for &(x, y) in &polygon.vertices {
        if x <= Rat::zero() {
            continue;
        }
        // (y + c6 x)^m / x^{m+1} bounds c5^m at this vertex
        let num = y + c6_cap * x;
        if num.is_negative() {
            c5m = Some(Rat::zero());
            continue;
        }
        let mut np = Rat::from_integer(1);
        for _ in 0..m {
            np *= num;
        }
        let mut xp = x;
        for _ in 0..m {
            xp *= x;
        }
        let bound = np / xp;
        c5m = Some(c5m.map_or(bound, |c: Rat| c.min(bound)));
    }
    let c5_pow_m = c5m.unwrap_or_else(Rat::zero);
    let mut c5_min_pow = Rat::from_integer(1);
    for _ in 0..m {
        c5_min_pow *= c5_min;
    }
    let pass = c5_pow_m > Rat::zero() && c5_pow_m >= c5_min_pow;
    (BoundProfile { c5_pow_m, c6: c6_cap, n, r }, pass)
}

// ---------------------------------------------------------------------------
// Slope degrees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SlopeRow {
    pub slope: Rat,
    pub d_s: i64,
    pub total: i64,
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub rows: Vec<SlopeRow>,
    pub watermark: Option<Rat>,
}

impl SlopeReport {
    pub fn degree_at(&self, s: Rat) -> i64 {
        self.rows.iter().find(|r| r.slope == s).map(|r| r.d_s).unwrap_or(0)
    }

    pub fn csv_rows(&self, k: i64) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{}/{},{},{},{}",
                    k,
                    r.slope.numer(),
                    r.slope.denom(),
                    r.d_s,
                    r.total,
                    r.certified
                )
            })
            .collect()
    }
}

/// Per-slope degree report for a numerator/denominator pair. No zero/pole
/// cancellation is attempted: the total counts both sides.
pub fn slope_degrees(
    num: &LSeries,
    den: &LSeries,
    s_max: Rat,
    future_floor: Option<&NewtonPolygon>,
) -> Result<SlopeReport> {
    let pn = newton_polygon_of_lseries(num, future_floor)?;
    let pd = newton_polygon_of_lseries(den, future_floor)?;
    let watermark = match (pn.certified_slope, pd.certified_slope) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (Some(a), None) => Some(a),
        (None, b) => b,
    };
    let mut slopes: Vec<Rat> = pn
        .sides()
        .into_iter()
        .chain(pd.sides())
        .map(|(s, _)| s)
        .filter(|s| *s <= s_max)
        .collect();
    slopes.sort();
    slopes.dedup();
    let rows = slopes
        .into_iter()
        .map(|s| {
            let ln = pn.slope_length(s);
            let ld = pd.slope_length(s);
            let certified = watermark.map_or(true, |w| s < w);
            SlopeRow {
                slope: s,
                d_s: (ln - ld).to_integer(),
                total: (ln + ld).to_integer(),
                certified,
            }
        })
        .collect();
    Ok(SlopeReport { rows, watermark })
}

// ---------------------------------------------------------------------------
// Polygon-congruence criterion and weight scans
// ---------------------------------------------------------------------------

/// If g1 = g2 mod p^{m_nu(s)+1} then their Newton polygons coincide up to
/// slope s. Returns (congruence held, polygons agree up to s); the tested
/// property is the implication.
pub fn np_congruence_criterion(
    g1: &LSeries,
    g2: &LSeries,
    profile: &BoundProfile,
    s: Rat,
) -> Result<(bool, bool)> {
    let m = profile.m_nu(s)?;
    let modulus = (m + 1).max(1) as u32;
    let t = g1.t_cap().min(g2.t_cap());
    let held = g1.congruent(g2, modulus, t);
    let p1 = newton_polygon_of_lseries(g1, None)?;
    let p2 = newton_polygon_of_lseries(g2, None)?;
    let agree = p1.sides_up_to(s) == p2.sides_up_to(s);
    Ok((held, agree))
}

#[derive(Clone, Debug)]
pub struct GmRow {
    pub k: i64,
    pub report: SlopeReport,
}

#[derive(Clone, Debug)]
pub struct GmScan {
    pub rows: Vec<GmRow>,
    pub checked_pairs: Vec<(i64, i64, Rat)>, // (k1, k2, certified slope bound)
    pub all_equal: bool,
}

/// d_t(k) table over a weight list plus stability check: for every pair
/// k1 = k2 mod (q-1)p^j, the degrees d_t must agree for all certified
/// t <= s(j), where s(j) is the largest grid slope with m_nu(s) + 1 <= j.
#[allow(clippy::too_many_arguments)]
pub fn gm_scan(
    l_of_k: &mut dyn FnMut(i64) -> Result<(LSeries, LSeries)>,
    k_list: &[i64],
    s_max: Rat,
    j: u32,
    q: u64,
    profile: &BoundProfile,
    future_floor: Option<&NewtonPolygon>,
) -> Result<GmScan> {
    let mut rows = Vec::new();
    for &k in k_list {
        let (num, den) = l_of_k(k)?;
        let report = slope_degrees(&num, &den, s_max, future_floor)?;
        rows.push(GmRow { k, report });
    }
    // largest slope on a half-integer grid certified by the congruence bound
    let mut s_of_j = Rat::zero();
    let mut grid = Rat::zero();
    while grid <= s_max {
        if profile.m_nu(grid)? + 1 <= j as i64 {
            s_of_j = grid;
        }
        grid += Rat::new(1, 2);
    }
    let modstep = (q - 1) as i64 * pow_i64(qp_base(q), j);
    let mut checked_pairs = Vec::new();
    let mut all_equal = true;
    for (a, ra) in rows.iter().enumerate() {
        for rb in rows.iter().skip(a + 1) {
            if (ra.k - rb.k) % modstep != 0 {
                continue;
            }
            checked_pairs.push((ra.k, rb.k, s_of_j));
            for row in &ra.report.rows {
                if row.slope > s_of_j || !row.certified {
                    continue;
                }
                let other = rb.report.degree_at(row.slope);
                if row.d_s != other {
                    all_equal = false;
                }
            }
            for row in &rb.report.rows {
                if row.slope > s_of_j || !row.certified {
                    continue;
                }
                let other = ra.report.degree_at(row.slope);
                if row.d_s != other {
                    all_equal = false;
                }
            }
        }
    }
    Ok(GmScan { rows, checked_pairs, all_equal })
}

fn qp_base(q: u64) -> i64 {
    // p from q = p^a: smallest prime factor
    let mut d = 2u64;
    while d * d <= q {
        if q % d == 0 {
            return d as i64;
        }
        d += 1;
    }
    q as i64
}

fn pow_i64(b: i64, e: u32) -> i64 {
    let mut acc = 1i64;
    for _ in 0..e {
        acc *= b;
    }
    acc
}
