//! Exact realization of ping-pong schemes in Thompson's group T.
//!
//! The constructions here are entirely exact: dyadic staircase interpolation
//! between dyadic configurations, finite-order (torsion) elements built
//! equivariantly over fundamental domains, and piecewise conjugators that
//! enforce edge relations of the marked group. Every output is verified
//! against the scheme's transition table before being returned.

use std::collections::{BTreeMap, HashMap, HashSet};

use num::{BigInt, One, Zero};
use thiserror::Error;

use crate::arith::{
    pl_compose, pl_invert, pl_power, rotation_number, Arc, ArcKind, ArithError, PLHomeo, Piece,
    Rational, RationalPoint, RotationNumber,
};
use crate::groups::{realize_word, GroupError, Vertex, Word};
use crate::scheme::{self, vertex_token, Entry, Scheme, SchemeError};

#[derive(Error, Debug)]
pub enum RealizeError {
    #[error("arithmetic: {0}")]
    Arith(#[from] ArithError),
    #[error("scheme: {0}")]
    Scheme(#[from] SchemeError),
    #[error("group: {0}")]
    Group(#[from] GroupError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pin conflict: {0}")]
    PinConflict(String),
    #[error("conjugator precondition: {0}")]
    Conjugator(String),
    #[error("edge relation failure on {edge}: {reason}")]
    EdgeRelation { edge: String, reason: String },
    #[error("not strictly Markovian: {0}")]
    NotStrictlyMarkovian(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, RealizeError>;

// ---------------------------------------------------------------------------
// Dyadic helpers
// ---------------------------------------------------------------------------

/// If `d` is a power of two, its exponent.
fn pow2_exponent(d: &BigInt) -> Option<u64> {
    let mut d = d.clone();
    if d <= BigInt::zero() {
        return None;
    }
    let mut e = 0u64;
    let two = BigInt::from(2);
    while (&d % &two).is_zero() {
        d /= &two;
        e += 1;
    }
    if d.is_one() {
        Some(e)
    } else {
        None
    }
}

/// 2^e as an exact rational (e may be negative).
fn pow2(e: i64) -> Rational {
    let b = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        Rational::from_integer(b)
    } else {
        Rational::new(BigInt::one(), b)
    }
}

/// A dyadic point strictly inside the counterclockwise open arc (l, r), of
/// minimal denominator (smallest numerator among those). When l == r the arc
/// is read as the full circle minus the point l.
pub fn dyadic_between(l: &RationalPoint, r: &RationalPoint) -> Result<RationalPoint> {
    let len = if l == r {
        Rational::one()
    } else {
        l.dist_ccw(r)
    };
    for e in 0..4096i64 {
        let unit = pow2(-e);
        if unit >= len {
            continue;
        }
        // first multiple of 2^-e strictly after l
        let scaled = l.value() / &unit;
        let p = scaled.floor() + Rational::one();
        let cand = RationalPoint::new(&p * &unit);
        let d = l.dist_ccw(&cand);
        if d > Rational::zero() && d < len {
            return Ok(cand);
        }
    }
    Err(RealizeError::Invalid(format!(
        "no dyadic point strictly between {l} and {r}"
    )))
}

// ---------------------------------------------------------------------------
// Staircase interpolation
// ---------------------------------------------------------------------------

const STAIRCASE_CAP: u64 = 1 << 20;

/// Pieces (source offset, target offset, slope) of the dyadic staircase
/// mapping [0, a] onto [0, b], both lengths dyadic.
fn staircase_span(a: &Rational, b: &Rational) -> Result<Vec<(Rational, Rational, Rational)>> {
    let ea = pow2_exponent(a.denom())
        .ok_or_else(|| RealizeError::Invalid(format!("length {a} is not dyadic")))?;
    let eb = pow2_exponent(b.denom())
        .ok_or_else(|| RealizeError::Invalid(format!("length {b} is not dyadic")))?;
    let level = ea.max(eb) as i64;
    let unit = pow2(-level);
    let m_big = (a / &unit).to_integer();
    let k_big = (b / &unit).to_integer();
    if m_big > BigInt::from(STAIRCASE_CAP) || k_big > BigInt::from(STAIRCASE_CAP) {
        return Err(RealizeError::Invalid(format!(
            "staircase between lengths {a} and {b} exceeds the piece cap"
        )));
    }
    let m = u64::try_from(m_big).unwrap();
    let k = u64::try_from(k_big).unwrap();
    if m == 0 || k == 0 {
        return Err(RealizeError::Invalid("empty staircase span".into()));
    }
    if m == k {
        return Ok(vec![(Rational::zero(), Rational::zero(), Rational::one())]);
    }
    if m > k {
        // build the inverse staircase and flip every piece
        let inv = staircase_span(b, a)?;
        return Ok(inv
            .into_iter()
            .map(|(u, v, s)| (v, u, s.recip()))
            .collect());
    }
    // m < k: r = k pieces with equal targets of one unit each; the first
    // m - 1 sources are one unit (slope 1), then sources halve so slopes
    // double, and the last two sources tie at 2^-(level + k - m).
    let mut out = Vec::with_capacity(k as usize);
    let mut src = Rational::zero();
    let mut dst = Rational::zero();
    for j in 1..=k {
        let (size, slope) = if j <= m.saturating_sub(1) {
            (unit.clone(), Rational::one())
        } else if j <= k - 1 {
            let step = (j - (m - 1)) as i64;
            (pow2(-(level + step)), pow2(step))
        } else {
            let step = (k - m) as i64;
            (pow2(-(level + step)), pow2(step))
        };
        out.push((src.clone(), dst.clone(), slope));
        src += &size;
        dst += &unit;
    }
    debug_assert_eq!(&src, a);
    debug_assert_eq!(&dst, b);
    Ok(out)
}

/// The unique staircase PL homeomorphism in Thompson's group T mapping the
/// dyadic configuration x onto the dyadic configuration y, span by span.
/// Both slices must be strictly circularly ordered (counterclockwise) and
/// correspond index-wise.
pub fn dyadic_interpolate(xs: &[RationalPoint], ys: &[RationalPoint]) -> Result<PLHomeo> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(RealizeError::Invalid(
            "interpolation needs equally many source and target points".into(),
        ));
    }
    for p in xs.iter().chain(ys.iter()) {
        if !p.is_dyadic() {
            return Err(RealizeError::Invalid(format!("point {p} is not dyadic")));
        }
    }
    let n = xs.len();
    if n == 1 {
        let t = ys[0].value() - xs[0].value();
        return Ok(PLHomeo::rotation(&t));
    }
    for (label, pts) in [("source", xs), ("target", ys)] {
        let mut last = Rational::zero();
        for p in &pts[1..] {
            let d = pts[0].dist_ccw(p);
            if d <= last {
                return Err(RealizeError::Invalid(format!(
                    "{label} points are not in strict circular order at {p}"
                )));
            }
            last = d;
        }
    }
    let mut pieces = Vec::new();
    for i in 0..n {
        let a = xs[i].dist_ccw(&xs[(i + 1) % n]);
        let b = ys[i].dist_ccw(&ys[(i + 1) % n]);
        for (u, v, slope) in staircase_span(&a, &b)? {
            pieces.push(Piece {
                x: xs[i].add(&u),
                y: ys[i].add(&v),
                slope,
            });
        }
    }
    Ok(PLHomeo::new(pieces)?)
}

/// The pieces of f restricted to the arc [l, r), in global coordinates:
/// a piece anchored at l plus every breakpoint strictly inside.
fn pieces_on(f: &PLHomeo, l: &RationalPoint, r: &RationalPoint) -> Vec<Piece> {
    let span = l.dist_ccw(r);
    let mut out = vec![Piece {
        x: l.clone(),
        y: f.apply(l),
        slope: f.slope_at(l),
    }];
    for pc in f.pieces() {
        let d = l.dist_ccw(&pc.x);
        if d > Rational::zero() && d < span {
            out.push(pc.clone());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Torsion elements
// ---------------------------------------------------------------------------

fn gcd_u32(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// An element of T of exact order q and rotation number p/q whose action on
/// the given invariant dyadic configuration is the shift by n·p/q positions
/// in circular order (n = number of points, a multiple of q).
///
/// The construction is equivariant: all but one span per span-orbit carry a
/// staircase, and the remaining span carries the inverse of the composition
/// around the orbit, so the q-th power telescopes to the identity exactly.
pub fn torsion_from_points(q: u32, p: u32, pts: &[RationalPoint]) -> Result<PLHomeo> {
    if q == 0 {
        return Err(RealizeError::Invalid("order must be positive".into()));
    }
    if q == 1 {
        if p != 0 {
            return Err(RealizeError::Invalid("order 1 forces rotation 0".into()));
        }
        return Ok(PLHomeo::identity());
    }
    if p == 0 || p >= q || gcd_u32(p, q) != 1 {
        return Err(RealizeError::Invalid(format!(
            "rotation number {p}/{q} is not a primitive residue"
        )));
    }
    let mut pts = pts.to_vec();
    pts.sort_by(|a, b| a.value().cmp(b.value()));
    pts.dedup();
    let n = pts.len();
    if n == 0 || n % q as usize != 0 {
        return Err(RealizeError::Invalid(format!(
            "point count {n} is not a positive multiple of the order {q}"
        )));
    }
    let shift = n * p as usize / q as usize;
    let ys: Vec<RationalPoint> = (0..n).map(|i| pts[(i + shift) % n].clone()).collect();
    let g1 = dyadic_interpolate(&pts, &ys)?;
    let ginv = pl_invert(&pl_power(&g1, q as i64 - 1));
    // one correction span per orbit of spans under + shift
    let mut corrected = vec![false; n];
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut j = start;
        let mut last;
        loop {
            seen[j] = true;
            last = j;
            j = (j + shift) % n;
            if j == start {
                break;
            }
        }
        corrected[last] = true;
    }
    let mut pieces = Vec::new();
    for i in 0..n {
        let l = &pts[i];
        let r = &pts[(i + 1) % n];
        let f = if corrected[i] { &ginv } else { &g1 };
        pieces.extend(pieces_on(f, l, r));
    }
    let g = PLHomeo::new(pieces)?;
    if !pl_power(&g, q as i64).is_identity() {
        return Err(RealizeError::Verify(format!(
            "torsion construction of order {q} does not satisfy g^{q} = id"
        )));
    }
    for i in 0..n {
        if g.apply(&pts[i]) != pts[(i + shift) % n] {
            return Err(RealizeError::Verify(format!(
                "torsion construction does not shift {} correctly",
                pts[i]
            )));
        }
    }
    Ok(g)
}

/// torsion_from_points specialized to a single q-cycle of points.
pub fn torsion_element(q: u32, p: u32, pts: &[RationalPoint]) -> Result<PLHomeo> {
    if q >= 1 && pts.len() != q as usize {
        return Err(RealizeError::Invalid(format!(
            "expected exactly {q} points, got {}",
            pts.len()
        )));
    }
    torsion_from_points(q, p, pts)
}

/// The smallest k in 1..=bound with f^k = id, if any.
fn finite_order(f: &PLHomeo, bound: u32) -> Option<u32> {
    let mut acc = f.clone();
    for k in 1..=bound {
        if acc.is_identity() {
            return Some(k);
        }
        acc = pl_compose(f, &acc);
    }
    None
}

// ---------------------------------------------------------------------------
// Conjugators
// ---------------------------------------------------------------------------

const ORDER_BOUND: u32 = 256;

/// A PL homeomorphism h with h∘a = b∘h and h fixing every point of E,
/// built piecewise as h = b^k a^{-k} on the fundamental arcs a^k([x0, a x0)).
/// Preconditions: a and b have the same finite order q and a^k, b^k agree on
/// E for every k; additionally the construction requires a(E) = E for h to
/// fix E (verified, with a diagnostic naming the failing power or point).
pub fn conjugator(a: &PLHomeo, b: &PLHomeo, e: &[RationalPoint]) -> Result<PLHomeo> {
    if e.is_empty() {
        return Err(RealizeError::Conjugator("empty agreement set".into()));
    }
    let q = finite_order(a, ORDER_BOUND)
        .ok_or_else(|| RealizeError::Conjugator("first map has no small finite order".into()))?;
    let qb = finite_order(b, ORDER_BOUND)
        .ok_or_else(|| RealizeError::Conjugator("second map has no small finite order".into()))?;
    if q != qb {
        return Err(RealizeError::Conjugator(format!(
            "orders differ: {q} vs {qb}"
        )));
    }
    let mut apow = vec![PLHomeo::identity()];
    let mut bpow = vec![PLHomeo::identity()];
    for k in 1..q as usize {
        apow.push(pl_compose(a, &apow[k - 1]));
        bpow.push(pl_compose(b, &bpow[k - 1]));
    }
    for k in 1..q as usize {
        for x in e {
            if apow[k].apply(x) != bpow[k].apply(x) {
                return Err(RealizeError::Conjugator(format!(
                    "powers a^{k} and b^{k} disagree at the point {x}"
                )));
            }
        }
    }
    if q == 1 {
        return Ok(PLHomeo::identity());
    }
    let x0 = e
        .iter()
        .min_by(|a, b| a.value().cmp(b.value()))
        .unwrap()
        .clone();
    let orbit: Vec<RationalPoint> = (0..q as usize).map(|k| apow[k].apply(&x0)).collect();
    {
        let mut sorted: Vec<&RationalPoint> = orbit.iter().collect();
        sorted.sort_by(|a, b| a.value().cmp(b.value()));
        sorted.dedup();
        if sorted.len() != q as usize {
            return Err(RealizeError::Conjugator(format!(
                "orbit of {x0} under the first map is degenerate"
            )));
        }
    }
    let mut pieces = Vec::new();
    for k in 0..q as usize {
        let branch = pl_compose(&bpow[k], &pl_invert(&apow[k]));
        pieces.extend(pieces_on(&branch, &orbit[k], &orbit[(k + 1) % q as usize]));
    }
    let h = PLHomeo::new(pieces)?;
    if pl_compose(&h, a) != pl_compose(b, &h) {
        return Err(RealizeError::Conjugator(
            "constructed map does not intertwine the inputs".into(),
        ));
    }
    for x in e {
        if h.apply(x) != *x {
            return Err(RealizeError::Conjugator(format!(
                "constructed map does not fix the point {x}"
            )));
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Realization container
// ---------------------------------------------------------------------------

pub const REALIZATION_FORMAT: &str = "pingpong-realization-v1";

/// A scheme together with exact PL maps for its base generators and a
/// human-readable construction log.
#[derive(Clone, Debug)]
pub struct Realization {
    pub scheme: Scheme,
    pub maps: HashMap<String, PLHomeo>,
    pub log: Vec<String>,
}

impl Realization {
    pub fn generator(&self, name: &str) -> Option<&PLHomeo> {
        self.maps.get(name)
    }

    /// Realize a single generator token ("a", "a^2", "-s").
    pub fn token(&self, tok: &str) -> Result<PLHomeo> {
        Ok(scheme::realize_token_str(&self.maps, tok)?)
    }

    /// Realize a word over the marked generating set, e.g. "a^2 b -s".
    pub fn word(&self, w: &str) -> Result<PLHomeo> {
        let word = Word::parse(&self.scheme.group, w)?;
        Ok(realize_word(&self.maps, &word)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let scheme_value: serde_json::Value = serde_json::from_str(&self.scheme.to_json()?)?;
        let maps: BTreeMap<&str, String> = self
            .maps
            .iter()
            .map(|(k, v)| (k.as_str(), v.to_text()))
            .collect();
        let doc = serde_json::json!({
            "format": REALIZATION_FORMAT,
            "scheme": scheme_value,
            "maps": maps,
            "log": self.log,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Realization> {
        let doc: serde_json::Value = serde_json::from_str(s)?;
        if doc.get("format").and_then(|f| f.as_str()) != Some(REALIZATION_FORMAT) {
            return Err(RealizeError::Invalid(format!(
                "expected format {REALIZATION_FORMAT}"
            )));
        }
        let scheme_value = doc
            .get("scheme")
            .ok_or_else(|| RealizeError::Invalid("missing scheme".into()))?;
        let scheme = Scheme::from_json(&serde_json::to_string(scheme_value)?)?;
        let maps_value = doc
            .get("maps")
            .and_then(|m| m.as_object())
            .ok_or_else(|| RealizeError::Invalid("missing maps".into()))?;
        let mut maps = HashMap::new();
        for (k, v) in maps_value {
            let text = v
                .as_str()
                .ok_or_else(|| RealizeError::Invalid(format!("map {k} is not text")))?;
            maps.insert(k.clone(), PLHomeo::from_text(text)?);
        }
        let log = doc
            .get("log")
            .and_then(|l| l.as_array())
            .map(|l| {
                l.iter()
                    .filter_map(|e| e.as_str().map(str::to_string))
                    .collect()
            })
            .unwrap_or_default();
        Ok(Realization { scheme, maps, log })
    }
}

// ---------------------------------------------------------------------------
// Scheme realization
// ---------------------------------------------------------------------------

/// The sorted distinct endpoint points of a scheme with endpoints.
fn endpoint_points(s: &Scheme) -> Result<Vec<RationalPoint>> {
    let mut vals: Vec<RationalPoint> = Vec::new();
    for i in 0..s.intervals.len() {
        let (l, r) = s.endpoints(i)?;
        vals.push(l);
        vals.push(r);
    }
    vals.sort_by(|a, b| a.value().cmp(b.value()));
    vals.dedup();
    Ok(vals)
}

/// Move all endpoints to dyadic points preserving circular order; assign
/// evenly spaced dyadic endpoints when the scheme is abstract.
fn dyadify(s: &Scheme, epsilon: Option<&Rational>, log: &mut Vec<String>) -> Result<Scheme> {
    let n = s.intervals.len();
    let mut out = s.clone();
    if !s.has_endpoints() {
        // one slot per distinct endpoint: gaps flagged non-degenerate get a
        // separating slot; a missing flag defaults to a degenerate gap
        let mut slot_of_left = vec![0usize; n];
        let mut slot_of_right = vec![0usize; n];
        let mut slots = 0usize;
        for i in 0..n {
            slot_of_left[i] = slots;
            slots += 1;
            if !s.gaps[i].degenerate.unwrap_or(true) {
                slot_of_right[i] = slots;
                slots += 1;
            } else {
                slot_of_right[i] = usize::MAX; // same as next left
            }
        }
        let denom = slots.next_power_of_two().max(2) as i64;
        let place = |j: usize| format!("{}", RationalPoint::new(Rational::new(j.into(), denom.into())));
        for i in 0..n {
            out.intervals[i].left = Some(place(slot_of_left[i]));
            let r = if slot_of_right[i] == usize::MAX {
                slot_of_left[(i + 1) % n]
            } else {
                slot_of_right[i]
            };
            out.intervals[i].right = Some(place(r));
        }
        log.push(format!(
            "dyadify: abstract scheme, {slots} endpoint slots at multiples of 1/{denom}"
        ));
        return Ok(out);
    }
    let pts = endpoint_points(s)?;
    if pts.iter().all(|p| p.is_dyadic()) {
        log.push("dyadify: endpoints already dyadic, unchanged".into());
        return Ok(out);
    }
    let m = pts.len();
    let min_gap = (0..m)
        .map(|i| pts[i].dist_ccw(&pts[(i + 1) % m]))
        .min()
        .unwrap();
    let eps = epsilon.cloned().unwrap_or(&min_gap / Rational::from_integer(64.into()));
    if eps <= Rational::zero() {
        return Err(RealizeError::Invalid("epsilon must be positive".into()));
    }
    let mut d: i64 = 1;
    while pow2(-d) >= eps || pow2(-d) >= min_gap {
        d += 1;
        if d > 4096 {
            return Err(RealizeError::Invalid("dyadification underflow".into()));
        }
    }
    for _ in 0..64 {
        let unit = pow2(-d);
        let snapped: Vec<RationalPoint> = pts
            .iter()
            .map(|p| {
                let k = (p.value() / &unit + Rational::new(1.into(), 2.into())).floor();
                RationalPoint::new(&k * &unit)
            })
            .collect();
        let distinct = {
            let mut v: Vec<&RationalPoint> = snapped.iter().collect();
            v.sort_by(|a, b| a.value().cmp(b.value()));
            v.windows(2).all(|w| w[0] != w[1])
        };
        let ordered = snapped
            .windows(2)
            .all(|w| snapped[0] == w[0] || snapped[0].dist_ccw(&w[0]) < snapped[0].dist_ccw(&w[1]));
        let close = pts.iter().zip(&snapped).all(|(p, q)| {
            let fwd = p.dist_ccw(q);
            let bwd = q.dist_ccw(p);
            fwd.min(bwd) < eps
        });
        if distinct && ordered && close {
            let rename: HashMap<String, String> = pts
                .iter()
                .zip(&snapped)
                .map(|(p, q)| (format!("{p}"), format!("{q}")))
                .collect();
            for iv in &mut out.intervals {
                for side in [&mut iv.left, &mut iv.right] {
                    if let Some(v) = side {
                        let canon = format!("{}", RationalPoint::parse(v)?);
                        *side = Some(rename[&canon].clone());
                    }
                }
            }
            log.push(format!(
                "dyadify: snapped {m} endpoints to multiples of 1/2^{d}"
            ));
            return Ok(out);
        }
        d *= 2;
    }
    Err(RealizeError::Invalid(
        "could not dyadify endpoints within bounds".into(),
    ))
}

/// Union-find with offsets mod q, tracking the abstract orbit structure of a
/// torsion generator on a growing point set: a pin a^k(x) = y identifies the
/// slot of y with the slot of x shifted by k.
struct ThreadStructure {
    q: u32,
    parent: HashMap<Rational, (Rational, u32)>,
}

impl ThreadStructure {
    fn new(q: u32) -> Self {
        ThreadStructure {
            q,
            parent: HashMap::new(),
        }
    }

    fn add(&mut self, x: &Rational) {
        self.parent
            .entry(x.clone())
            .or_insert_with(|| (x.clone(), 0));
    }

    /// (root, offset of x relative to the root).
    fn find(&mut self, x: &Rational) -> (Rational, u32) {
        let (p, off) = self.parent[x].clone();
        if p == *x {
            return (p, off);
        }
        let (root, poff) = self.find(&p);
        let total = (off + poff) % self.q;
        self.parent.insert(x.clone(), (root.clone(), total));
        (root, total)
    }

    /// Record a^k(x) = y.
    fn pin(&mut self, x: &Rational, y: &Rational, k: u32) -> Result<()> {
        self.add(x);
        self.add(y);
        let (rx, ox) = self.find(x);
        let (ry, oy) = self.find(y);
        let want = (ox + k) % self.q;
        if rx == ry {
            if want != oy {
                return Err(RealizeError::PinConflict(format!(
                    "point {} returns to itself after {} steps (order {})",
                    RationalPoint::new(x.clone()),
                    (want + self.q - oy) % self.q,
                    self.q
                )));
            }
            return Ok(());
        }
        // re-root ry onto rx with the offset making off(y) = want
        let delta = (want + self.q - oy) % self.q;
        self.parent.insert(ry, (rx, delta));
        Ok(())
    }
}

/// The constraint arcs (closed) on the image of endpoint x of a torsion or
/// stable-letter generator, from strict Contained rows on the intervals
/// flanking x under the base token.
fn flanking_targets(
    s: &Scheme,
    idx: &scheme::SchemeIndex<'_>,
    base_tok: &str,
    x: &RationalPoint,
) -> Result<Vec<Arc>> {
    let mut out = Vec::new();
    for (i, iv) in s.intervals.iter().enumerate() {
        let (l, r) = s.endpoints(i)?;
        if l != *x && r != *x {
            continue;
        }
        if let Some(Entry::Contained { target, exact }) =
            idx.entry.get(&(base_tok, iv.id.as_str())).copied()
        {
            if !exact {
                let tpos = idx.interval_pos[target.as_str()];
                let (tl, tr) = s.endpoints(tpos)?;
                out.push(Arc::closed(tl, tr)?);
            }
        }
    }
    Ok(out)
}

/// Choose a concrete image for a point whose image is not pinned: inside the
/// order window between the nearest already-assigned neighbours, and inside
/// every constraint arc.
fn choose_image(
    x: &Rational,
    domain: &[Rational],
    img: &BTreeMap<Rational, RationalPoint>,
    constraints: &[Arc],
) -> Result<RationalPoint> {
    let pos = domain.iter().position(|d| d == x).unwrap();
    let n = domain.len();
    let mut lo: Option<RationalPoint> = None;
    let mut hi: Option<RationalPoint> = None;
    for step in 1..n {
        let prev = &domain[(pos + n - step) % n];
        if let Some(v) = img.get(prev) {
            lo = Some(v.clone());
            break;
        }
    }
    for step in 1..n {
        let next = &domain[(pos + step) % n];
        if let Some(v) = img.get(next) {
            hi = Some(v.clone());
            break;
        }
    }
    let (mut wl, mut wh) = match (lo, hi) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => {
            // nothing assigned yet: the first constraint arc is the window
            match constraints.first() {
                Some(arc) => (arc.left.clone(), arc.right.clone()),
                None => {
                    return Err(RealizeError::Invalid(format!(
                        "no constraint determines the image of {}",
                        RationalPoint::new(x.clone())
                    )))
                }
            }
        }
        _ => unreachable!("img is nonempty iff both scans succeed"),
    };
    // shrink the window by each constraint arc whose boundary cuts it
    for arc in constraints {
        let span = if wl == wh {
            Rational::one()
        } else {
            wl.dist_ccw(&wh)
        };
        let dl = wl.dist_ccw(&arc.left);
        if dl > Rational::zero() && dl < span {
            wl = arc.left.clone();
        }
        let span = if wl == wh {
            Rational::one()
        } else {
            wl.dist_ccw(&wh)
        };
        let dr = wl.dist_ccw(&arc.right);
        if dr > Rational::zero() && dr < span {
            wh = arc.right.clone();
        }
    }
    let cand = dyadic_between(&wl, &wh)?;
    for arc in constraints {
        if !arc.contains(&cand) {
            return Err(RealizeError::Invalid(format!(
                "image window for {} is inconsistent with its containment targets",
                RationalPoint::new(x.clone())
            )));
        }
    }
    Ok(cand)
}

/// Build the torsion generator of one vertex from the scheme's table: pins
/// from exact and Markovian rows of every power, free choices inside the
/// windows left by strict rows, equivariant closure of all orbits, then the
/// fundamental-domain torsion construction.
fn build_vertex_generator(s: &Scheme, v: &Vertex, log: &mut Vec<String>) -> Result<PLHomeo> {
    let idx = s.index();
    let q = v.order;
    let mut threads = ThreadStructure::new(q);
    let mut img: BTreeMap<Rational, RationalPoint> = BTreeMap::new();
    let base_points = endpoint_points(s)?;
    for p in &base_points {
        threads.add(p.value());
    }
    // pins from exact and Markovian rows of every power a^k
    for k in 1..q {
        let tok = vertex_token(&v.name, k);
        for (i, iv) in s.intervals.iter().enumerate() {
            let Some(entry) = idx.entry.get(&(tok.as_str(), iv.id.as_str())).copied() else {
                continue;
            };
            let (l, r) = s.endpoints(i)?;
            let (il, ir) = match entry {
                Entry::Contained { target, exact } => {
                    if !exact {
                        continue;
                    }
                    let tpos = idx.interval_pos[target.as_str()];
                    s.endpoints(tpos)?
                }
                Entry::Markovian { list } => {
                    let first = idx.interval_pos[list[0].as_str()];
                    let last = idx.interval_pos[list[list.len() - 1].as_str()];
                    (s.endpoints(first)?.0, s.endpoints(last)?.1)
                }
            };
            threads.pin(l.value(), il.value(), k).map_err(|e| {
                RealizeError::PinConflict(format!("vertex {} power {k}: {e}", v.name))
            })?;
            threads.pin(r.value(), ir.value(), k).map_err(|e| {
                RealizeError::PinConflict(format!("vertex {} power {k}: {e}", v.name))
            })?;
        }
    }
    // slot occupancy and the direct images it implies
    let mut points: Vec<Rational> = threads.parent.keys().cloned().collect();
    points.sort();
    let mut slot: HashMap<(Rational, u32), Rational> = HashMap::new();
    for x in &points {
        let (root, off) = threads.find(x);
        if let Some(prev) = slot.insert((root, off), x.clone()) {
            if prev != *x {
                return Err(RealizeError::PinConflict(format!(
                    "vertex {}: points {} and {} are pinned to the same orbit slot",
                    v.name,
                    RationalPoint::new(prev),
                    RationalPoint::new(x.clone())
                )));
            }
        }
    }
    let refresh_images = |threads: &mut ThreadStructure,
                          slot: &HashMap<(Rational, u32), Rational>,
                          points: &[Rational],
                          img: &mut BTreeMap<Rational, RationalPoint>| {
        for x in points {
            if img.contains_key(x) {
                continue;
            }
            let (root, off) = threads.find(x);
            if let Some(y) = slot.get(&(root, (off + 1) % threads.q)) {
                img.insert(x.clone(), RationalPoint::new(y.clone()));
            }
        }
    };
    refresh_images(&mut threads, &slot, &points, &mut img);
    // choose free images, original endpoints first (they carry containment
    // windows), then close every orbit
    loop {
        refresh_images(&mut threads, &slot, &points, &mut img);
        let Some(x) = points.iter().find(|x| !img.contains_key(*x)).cloned() else {
            break;
        };
        let xp = RationalPoint::new(x.clone());
        let constraints = flanking_targets(s, &idx, &v.name, &xp)?;
        let y = choose_image(&x, &points, &img, &constraints)?;
        if points.contains(y.value()) {
            return Err(RealizeError::Invalid(format!(
                "free image choice for {xp} collided with an existing point"
            )));
        }
        threads.pin(&x, y.value(), 1)?;
        let (root, off) = threads.find(y.value());
        slot.insert((root, off), y.value().clone());
        img.insert(x.clone(), y.clone());
        let insert_at = points
            .binary_search_by(|p| p.cmp(y.value()))
            .unwrap_err();
        points.insert(insert_at, y.value().clone());
    }
    // the completed point set must realize a rigid shift
    let n = points.len();
    let sorted: Vec<RationalPoint> = points.iter().cloned().map(RationalPoint::new).collect();
    let first_img = &img[&points[0]];
    let shift = sorted
        .iter()
        .position(|p| p == first_img)
        .ok_or_else(|| RealizeError::Invalid("image left the point set".into()))?;
    for (i, x) in points.iter().enumerate() {
        if img[x] != sorted[(i + shift) % n] {
            return Err(RealizeError::Invalid(format!(
                "vertex {}: interval permutation is incompatible with a rigid rotation \
                 of the completed {n}-point configuration",
                v.name
            )));
        }
    }
    if (shift * q as usize) % n != 0 {
        return Err(RealizeError::Invalid(format!(
            "vertex {}: observed shift {shift} of {n} points is incompatible with order {q}",
            v.name
        )));
    }
    let p = (shift * q as usize / n) as u32;
    if let Some(rot) = &v.rotation {
        let want = crate::arith::parse_rational(rot)?;
        let got = Rational::new(p.into(), q.into());
        if crate::arith::frac_mod1(&want) != got {
            return Err(RealizeError::Invalid(format!(
                "vertex {}: prescribed rotation {rot} but construction yields {p}/{q}",
                v.name
            )));
        }
    }
    log.push(format!(
        "vertex {}: torsion of order {q}, rotation {p}/{q}, on {n} points",
        v.name
    ));
    torsion_from_points(q, p, &sorted)
}

/// Build a stable letter from its pins (rows of s and of -s), with free
/// choices inside strict windows, equivariantly over a nontrivial edge group.
fn build_stable_letter(
    s: &Scheme,
    e: &crate::groups::Edge,
    maps: &HashMap<String, PLHomeo>,
    log: &mut Vec<String>,
) -> Result<PLHomeo> {
    let idx = s.index();
    let tok = e.name.clone();
    let rtok = format!("-{}", e.name);
    let mut img: BTreeMap<Rational, RationalPoint> = BTreeMap::new();
    let pin = |img: &mut BTreeMap<Rational, RationalPoint>,
                   x: &RationalPoint,
                   y: &RationalPoint|
     -> Result<()> {
        if let Some(prev) = img.get(x.value()) {
            if prev != y {
                return Err(RealizeError::PinConflict(format!(
                    "stable letter {}: {x} pinned to both {prev} and {y}",
                    e.name
                )));
            }
            return Ok(());
        }
        img.insert(x.value().clone(), y.clone());
        Ok(())
    };
    for (i, iv) in s.intervals.iter().enumerate() {
        let (l, r) = s.endpoints(i)?;
        if let Some(entry) = idx.entry.get(&(tok.as_str(), iv.id.as_str())).copied() {
            match entry {
                Entry::Contained { target, exact } if *exact => {
                    let tpos = idx.interval_pos[target.as_str()];
                    let (tl, tr) = s.endpoints(tpos)?;
                    pin(&mut img, &l, &tl)?;
                    pin(&mut img, &r, &tr)?;
                }
                Entry::Markovian { list } => {
                    let first = idx.interval_pos[list[0].as_str()];
                    let last = idx.interval_pos[list[list.len() - 1].as_str()];
                    pin(&mut img, &l, &s.endpoints(first)?.0)?;
                    pin(&mut img, &r, &s.endpoints(last)?.1)?;
                }
                _ => {}
            }
        }
        if let Some(entry) = idx.entry.get(&(rtok.as_str(), iv.id.as_str())).copied() {
            match entry {
                Entry::Contained { target, exact } if *exact => {
                    let tpos = idx.interval_pos[target.as_str()];
                    let (tl, tr) = s.endpoints(tpos)?;
                    pin(&mut img, &tl, &l)?;
                    pin(&mut img, &tr, &r)?;
                }
                Entry::Markovian { list } => {
                    let first = idx.interval_pos[list[0].as_str()];
                    let last = idx.interval_pos[list[list.len() - 1].as_str()];
                    pin(&mut img, &s.endpoints(first)?.0, &l)?;
                    pin(&mut img, &s.endpoints(last)?.1, &r)?;
                }
                _ => {}
            }
        }
    }
    // equivariance over a nontrivial edge group: s(a_t^ω x) = a_f^α (s x)
    let nontrivial = e.order >= 2;
    let (a_omega, a_alpha) = if nontrivial {
        let at = maps.get(&e.to).ok_or_else(|| RealizeError::EdgeRelation {
            edge: e.name.clone(),
            reason: format!("vertex {} not realized", e.to),
        })?;
        let af = maps.get(&e.from).ok_or_else(|| RealizeError::EdgeRelation {
            edge: e.name.clone(),
            reason: format!("vertex {} not realized", e.from),
        })?;
        (
            Some(pl_power(at, e.omega as i64)),
            Some(pl_power(af, e.alpha as i64)),
        )
    } else {
        (None, None)
    };
    let propagate = |img: &mut BTreeMap<Rational, RationalPoint>| -> Result<()> {
        let (Some(aw), Some(aa)) = (&a_omega, &a_alpha) else {
            return Ok(());
        };
        loop {
            let snapshot: Vec<(Rational, RationalPoint)> =
                img.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            let mut changed = false;
            for (x, y) in snapshot {
                let x2 = aw.apply(&RationalPoint::new(x));
                let y2 = aa.apply(&y);
                match img.get(x2.value()) {
                    Some(prev) if *prev != y2 => {
                        return Err(RealizeError::EdgeRelation {
                            edge: e.name.clone(),
                            reason: format!(
                                "equivariant closure conflicts at {x2}: {prev} vs {y2}"
                            ),
                        })
                    }
                    Some(_) => {}
                    None => {
                        img.insert(x2.value().clone(), y2);
                        changed = true;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    };
    propagate(&mut img)?;
    // free choices for remaining endpoints
    let base_points = endpoint_points(s)?;
    loop {
        let mut domain: Vec<Rational> = img.keys().cloned().collect();
        for p in &base_points {
            if !img.contains_key(p.value()) {
                domain.push(p.value().clone());
            }
        }
        domain.sort();
        let Some(x) = base_points
            .iter()
            .find(|p| !img.contains_key(p.value()))
            .cloned()
        else {
            break;
        };
        let constraints = flanking_targets(s, &idx, &tok, &x)?;
        let y = choose_image(x.value(), &domain, &img, &constraints)?;
        img.insert(x.value().clone(), y);
        propagate(&mut img)?;
    }
    let xs: Vec<RationalPoint> = img.keys().cloned().map(RationalPoint::new).collect();
    let ys: Vec<RationalPoint> = img.values().cloned().collect();
    let s0 = dyadic_interpolate(&xs, &ys)?;
    let Some(aw) = &a_omega else {
        log.push(format!(
            "stable letter {}: interpolated on {} endpoint images",
            e.name,
            xs.len()
        ));
        return Ok(s0);
    };
    let aa = a_alpha.as_ref().unwrap();
    if pl_compose(&s0, aw) == pl_compose(aa, &s0) {
        log.push(format!(
            "stable letter {}: edge relation already exact after interpolation",
            e.name
        ));
        return Ok(s0);
    }
    // conjugate the interpolant so the edge relation holds exactly:
    // with C = s0 a^ω s0⁻¹, E = s0(domain), h = conjugator(C, a^α, E) fixes
    // s0's endpoint images, and s = h∘s0 satisfies s a^ω s⁻¹ = a^α.
    let c = pl_compose(&pl_compose(&s0, aw), &pl_invert(&s0));
    let e_pts: Vec<RationalPoint> = xs.iter().map(|x| s0.apply(x)).collect();
    let h = conjugator(&c, aa, &e_pts).map_err(|err| RealizeError::EdgeRelation {
        edge: e.name.clone(),
        reason: err.to_string(),
    })?;
    let sfinal = pl_compose(&h, &s0);
    if pl_compose(&sfinal, aw) != pl_compose(aa, &sfinal) {
        return Err(RealizeError::EdgeRelation {
            edge: e.name.clone(),
            reason: "relation still fails after conjugation".into(),
        });
    }
    log.push(format!(
        "stable letter {}: edge relation enforced by a piecewise conjugator",
        e.name
    ));
    Ok(sfinal)
}

/// Enforce a^α = b^ω across every spanning-tree edge with a nontrivial edge
/// group, conjugating the child vertex generator (walking the tree from the
/// first vertex) by a piecewise conjugator fixing all scheme endpoints.
fn enforce_tree_edges(
    s: &Scheme,
    maps: &mut HashMap<String, PLHomeo>,
    log: &mut Vec<String>,
) -> Result<()> {
    let g = &s.group;
    if g.vertices.is_empty() {
        return Ok(());
    }
    let pts = endpoint_points(s)?;
    let mut visited: HashSet<String> = HashSet::new();
    visited.insert(g.vertices[0].name.clone());
    let mut frontier = vec![g.vertices[0].name.clone()];
    while let Some(v) = frontier.pop() {
        let mut edges: Vec<&crate::groups::Edge> = g
            .edges
            .iter()
            .filter(|e| e.tree && (e.from == v || e.to == v))
            .collect();
        edges.sort_by(|a, b| a.name.cmp(&b.name));
        for e in edges {
            let child = if e.from == v { &e.to } else { &e.from };
            if visited.contains(child) {
                continue;
            }
            visited.insert(child.clone());
            frontier.push(child.clone());
            if e.order <= 1 {
                continue;
            }
            let (par_exp, child_exp) = if e.from == v {
                (e.alpha, e.omega)
            } else {
                (e.omega, e.alpha)
            };
            let x = pl_power(&maps[&v], par_exp as i64);
            let y = pl_power(&maps[child], child_exp as i64);
            if x == y {
                log.push(format!("tree edge {}: edge relation already exact", e.name));
                continue;
            }
            let h = conjugator(&y, &x, &pts).map_err(|err| RealizeError::EdgeRelation {
                edge: e.name.clone(),
                reason: err.to_string(),
            })?;
            let new_child = pl_compose(&pl_compose(&h, &maps[child]), &pl_invert(&h));
            if pl_power(&new_child, child_exp as i64) != x {
                return Err(RealizeError::EdgeRelation {
                    edge: e.name.clone(),
                    reason: "amalgamation failed after conjugation".into(),
                });
            }
            maps.insert(child.clone(), new_child);
            log.push(format!(
                "tree edge {}: conjugated vertex {} to amalgamate the edge group",
                e.name, child
            ));
        }
    }
    Ok(())
}

/// Verify every invariant of a realization: the full transition table, exact
/// torsion orders and rotation numbers, edge relations, and T-membership.
pub fn verify_realization(s: &Scheme, maps: &HashMap<String, PLHomeo>) -> Result<()> {
    scheme::verify_table_realized(s, maps)?;
    for (name, f) in maps {
        if !f.is_in_thompson_t() {
            return Err(RealizeError::Verify(format!(
                "generator {name} is not in Thompson's group T"
            )));
        }
    }
    for v in &s.group.vertices {
        if v.order < 2 {
            continue;
        }
        let f = maps
            .get(&v.name)
            .ok_or_else(|| RealizeError::Verify(format!("missing generator {}", v.name)))?;
        for k in 1..v.order {
            if pl_power(f, k as i64).is_identity() {
                return Err(RealizeError::Verify(format!(
                    "generator {} has order dividing {k}, expected {}",
                    v.name, v.order
                )));
            }
        }
        if !pl_power(f, v.order as i64).is_identity() {
            return Err(RealizeError::Verify(format!(
                "generator {} does not have order {}",
                v.name, v.order
            )));
        }
        if let Some(rot) = &v.rotation {
            let want = crate::arith::frac_mod1(&crate::arith::parse_rational(rot)?);
            let prec = Rational::new(1.into(), 1_000_000.into());
            match rotation_number(f, 64, &prec) {
                RotationNumber::Exact(r) if r == want => {}
                other => {
                    return Err(RealizeError::Verify(format!(
                        "generator {}: rotation number {:?} instead of {rot}",
                        v.name, other
                    )))
                }
            }
        }
    }
    for e in &s.group.edges {
        if e.order < 2 {
            continue;
        }
        let af = pl_power(&maps[&e.from], e.alpha as i64);
        let at = pl_power(&maps[&e.to], e.omega as i64);
        let ok = if e.tree {
            af == at
        } else {
            let sm = &maps[&e.name];
            pl_compose(sm, &at) == pl_compose(&af, sm)
        };
        if !ok {
            return Err(RealizeError::Verify(format!(
                "edge relation fails on {}",
                e.name
            )));
        }
    }
    Ok(())
}

/// Realize a scheme exactly in Thompson's group T: dyadify the endpoints,
/// build each vertex generator as a torsion element pinned by the table,
/// enforce tree-edge relations by conjugation, interpolate stable letters,
/// and verify everything.
/// Build all generator maps for a scheme whose endpoints are already dyadic.
/// The table may be partial: pins are read from whatever exact and Markovian
/// rows are present, so this is also the bootstrap used to complete the
/// bundled fixture tables.
pub(crate) fn build_maps(s: &Scheme, log: &mut Vec<String>) -> Result<HashMap<String, PLHomeo>> {
    let mut maps: HashMap<String, PLHomeo> = HashMap::new();
    let mut vertices: Vec<&Vertex> = s.group.vertices.iter().collect();
    vertices.sort_by(|a, b| a.name.cmp(&b.name));
    for v in vertices {
        if v.order >= 2 {
            let g = build_vertex_generator(s, v, log)?;
            maps.insert(v.name.clone(), g);
        }
    }
    enforce_tree_edges(s, &mut maps, log)?;
    let mut stable: Vec<&crate::groups::Edge> = s.group.stable_letters().collect();
    stable.sort_by(|a, b| a.name.cmp(&b.name));
    for e in stable {
        let g = build_stable_letter(s, e, &maps, log)?;
        maps.insert(e.name.clone(), g);
    }
    Ok(maps)
}

pub fn realize_scheme(s: &Scheme, epsilon: Option<&Rational>) -> Result<Realization> {
    s.validate_structure()?;
    let report = scheme::check_scheme(s, None)?;
    if !report.is_valid() {
        return Err(RealizeError::Invalid(format!(
            "scheme fails symbolic checks: {}",
            report.failures().join("; ")
        )));
    }
    let mut log = Vec::new();
    let s2 = dyadify(s, epsilon, &mut log)?;
    let maps = build_maps(&s2, &mut log)?;
    verify_realization(&s2, &maps)?;
    log.push("verification: table, orders, rotations, relations, T-membership".into());
    Ok(Realization {
        scheme: s2,
        maps,
        log,
    })
}

// ---------------------------------------------------------------------------
// Normalizations
// ---------------------------------------------------------------------------

/// Check that the scheme is strictly Markovian: all gaps degenerate and no
/// neutral intervals. Returns the depth (shortest-sequence length) and the
/// first letter of the shortest Markovian sequence per interval position.
fn strict_markov_data(s: &Scheme) -> Result<(Vec<usize>, Vec<String>)> {
    let n = s.intervals.len();
    for i in 0..n {
        if !s.gap_is_degenerate(i).unwrap_or(false) {
            return Err(RealizeError::NotStrictlyMarkovian(format!(
                "gap {} is not degenerate",
                s.gaps[i].id
            )));
        }
    }
    let ma = crate::dynamics::markovian_sequences(s)
        .map_err(|e| RealizeError::NotStrictlyMarkovian(e.to_string()))?;
    let mut depth = vec![0usize; n];
    let mut first = vec![String::new(); n];
    for (i, iv) in s.intervals.iter().enumerate() {
        match ma.sequences.get(&iv.id) {
            Some(crate::dynamics::MarkovOutcome::Sequence(seq)) => {
                depth[i] = seq.len();
                first[i] = seq[0].clone();
            }
            _ => {
                return Err(RealizeError::NotStrictlyMarkovian(format!(
                    "interval {} is neutral",
                    iv.id
                )))
            }
        }
    }
    Ok((depth, first))
}

fn conjugate_realization(
    r: &Realization,
    old_pts: &[RationalPoint],
    new_pts: &[RationalPoint],
    log_line: String,
) -> Result<Realization> {
    let c = dyadic_interpolate(old_pts, new_pts)?;
    let cinv = pl_invert(&c);
    let mut maps = HashMap::new();
    for (k, f) in &r.maps {
        maps.insert(k.clone(), pl_compose(&pl_compose(&c, f), &cinv));
    }
    let mut scheme2 = r.scheme.clone();
    for iv in &mut scheme2.intervals {
        for side in [&mut iv.left, &mut iv.right] {
            if let Some(v) = side {
                let p = RationalPoint::parse(v)?;
                *side = Some(format!("{}", c.apply(&p)));
            }
        }
    }
    verify_realization(&scheme2, &maps)?;
    let mut log = r.log.clone();
    log.push(log_line);
    Ok(Realization {
        scheme: scheme2,
        maps,
        log,
    })
}

/// Conjugate a strictly Markovian realization in T so interval lengths are
/// geometric: globally within a factor of two, strictly decreasing along
/// Markovian depth classes, so each shortest sequence's first letter
/// strictly expands its interval's length.
pub fn geometric_normalize(r: &Realization) -> Result<Realization> {
    let s = &r.scheme;
    let n = s.intervals.len();
    let (depth, first) = strict_markov_data(s)?;
    let max_depth = *depth.iter().max().unwrap();
    // target length weight 2L - l for depth l: within [L, 2L-1], ratio < 2,
    // strictly decreasing in depth
    let weights: Vec<u64> = depth.iter().map(|d| (2 * max_depth - d) as u64).collect();
    let total: u64 = weights.iter().sum();
    let mut t_bits = 64 - total.leading_zeros() as i64 + 16;
    'attempt: for _ in 0..4 {
        let unit = pow2(-t_bits);
        let mut lengths: Vec<Rational> = Vec::with_capacity(n);
        let mut acc = Rational::zero();
        for (i, w) in weights.iter().enumerate() {
            let len = if i + 1 == n {
                Rational::one() - &acc
            } else {
                let ideal = Rational::new((*w).into(), total.into());
                let k = (&ideal / &unit + Rational::new(1.into(), 2.into())).floor();
                &k * &unit
            };
            if len <= Rational::zero() {
                t_bits += 8;
                continue 'attempt;
            }
            acc += &len;
            lengths.push(len);
        }
        // exact property checks: global factor two and depth monotonicity
        let lmin = lengths.iter().min().unwrap();
        let lmax = lengths.iter().max().unwrap();
        if lmax >= &(Rational::from_integer(2.into()) * lmin) {
            t_bits += 8;
            continue 'attempt;
        }
        for l in 1..max_depth {
            let min_l = lengths
                .iter()
                .zip(&depth)
                .filter(|(_, d)| **d == l)
                .map(|(x, _)| x)
                .min();
            let max_next = lengths
                .iter()
                .zip(&depth)
                .filter(|(_, d)| **d == l + 1)
                .map(|(x, _)| x)
                .max();
            if let (Some(a), Some(b)) = (min_l, max_next) {
                if a <= b {
                    t_bits += 8;
                    continue 'attempt;
                }
            }
        }
        let old_pts: Vec<RationalPoint> = (0..n).map(|i| s.endpoints(i).unwrap().0).collect();
        let mut new_pts = vec![old_pts[0].clone()];
        for len in &lengths[..n - 1] {
            let last = new_pts.last().unwrap();
            new_pts.push(last.add(len));
        }
        let out = conjugate_realization(
            r,
            &old_pts,
            &new_pts,
            format!("geometric_normalize: depth classes up to {max_depth}, grid 1/2^{t_bits}"),
        )?;
        // postcondition: first letters strictly expand lengths
        for (i, iv) in out.scheme.intervals.iter().enumerate() {
            let f = scheme::realize_token_str(&out.maps, &first[i])?;
            let (l, rt) = out.scheme.endpoints(i)?;
            let src = l.dist_ccw(&rt);
            let dst = f.apply(&l).dist_ccw(&f.apply(&rt));
            if dst <= src {
                return Err(RealizeError::Verify(format!(
                    "normalized lengths do not expand under the first letter on {}",
                    iv.id
                )));
            }
        }
        return Ok(out);
    }
    Err(RealizeError::Verify(
        "could not round geometric lengths at any grid".into(),
    ))
}

/// Re-realize a strictly Markovian scheme on an equal-length dyadic layout
/// so that every shortest sequence's first letter expands pointwise (all
/// slopes at least two on its source interval) — the infinitesimally
/// geometric condition certifying minimality.
pub fn infinitesimal_adjust(r: &Realization) -> Result<Realization> {
    let s = &r.scheme;
    let n = s.intervals.len();
    let (_, first) = strict_markov_data(s)?;
    if !n.is_power_of_two() {
        return Err(RealizeError::Invalid(format!(
            "infinitesimal adjustment needs a power-of-two interval count, got {n}"
        )));
    }
    let mut scheme2 = s.clone();
    for (i, iv) in scheme2.intervals.iter_mut().enumerate() {
        let l = RationalPoint::new(Rational::new((i as i64).into(), (n as i64).into()));
        let rt = RationalPoint::new(Rational::new((i as i64 + 1).into(), (n as i64).into()));
        iv.left = Some(format!("{l}"));
        iv.right = Some(format!("{rt}"));
    }
    let mut out = realize_scheme(&scheme2, None)?;
    for (i, iv) in out.scheme.intervals.iter().enumerate() {
        let f = scheme::realize_token_str(&out.maps, &first[i])?;
        let (l, rt) = out.scheme.endpoints(i)?;
        let arc = Arc::new(l, rt, ArcKind::LeftClosed)?;
        if f.min_slope_on_arc(&arc) <= Rational::one() {
            return Err(RealizeError::Verify(format!(
                "first letter {} does not expand pointwise on {}",
                first[i], iv.id
            )));
        }
    }
    out.log
        .push(format!("infinitesimal_adjust: equal lengths 1/{n}"));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn pt(n: i64, d: i64) -> RationalPoint {
        RationalPoint::from_ints(n, d)
    }

    #[test]
    fn interpolate_identity_and_rotation() {
        let xs = [pt(0, 1), pt(1, 2)];
        let f = dyadic_interpolate(&xs, &xs).unwrap();
        assert!(f.is_identity());
        let g = dyadic_interpolate(&[pt(0, 1)], &[pt(1, 4)]).unwrap();
        assert_eq!(g, PLHomeo::rotation(&rat(1, 4)));
    }

    #[test]
    fn interpolate_staircase_shape() {
        // one span of length 3/4 onto 1/4 and back: slopes 1, 1/2, 1/4, 1/4
        let f = dyadic_interpolate(&[pt(0, 1), pt(3, 4)], &[pt(0, 1), pt(1, 4)]).unwrap();
        assert_eq!(f.apply(&pt(3, 4)), pt(1, 4));
        assert!(f.is_in_thompson_t());
        let slopes: Vec<Rational> = f.pieces().iter().map(|p| p.slope.clone()).collect();
        assert!(slopes.contains(&rat(1, 2)) || slopes.contains(&rat(2, 1)));
        let inv = pl_invert(&f);
        let g = dyadic_interpolate(&[pt(0, 1), pt(1, 4)], &[pt(0, 1), pt(3, 4)]).unwrap();
        assert_eq!(inv, g);
    }

    #[test]
    fn interpolate_expanding_span_slopes() {
        // source [0, 1/4] (one unit at level 2), target [0, 3/4]: m=1, k=3,
        // slopes 2, 4, 4 — all at least 2
        let f = dyadic_interpolate(
            &[pt(0, 1), pt(1, 4), pt(1, 2)],
            &[pt(0, 1), pt(3, 4), pt(7, 8)],
        )
        .unwrap();
        let arc = Arc::new(pt(0, 1), pt(1, 4), ArcKind::LeftClosed).unwrap();
        assert_eq!(f.min_slope_on_arc(&arc), rat(2, 1));
        assert!(f.is_in_thompson_t());
    }

    #[test]
    fn interpolate_rejects_bad_input() {
        assert!(dyadic_interpolate(&[pt(0, 1), pt(1, 3)], &[pt(0, 1), pt(1, 2)]).is_err());
        assert!(dyadic_interpolate(
            &[pt(0, 1), pt(1, 2)],
            &[pt(1, 2), pt(1, 2)]
        )
        .is_err());
        assert!(dyadic_interpolate(
            &[pt(0, 1), pt(1, 4), pt(1, 2)],
            &[pt(0, 1), pt(1, 2), pt(1, 4)]
        )
        .is_err());
    }

    #[test]
    fn dyadic_between_minimal_denominator() {
        assert_eq!(dyadic_between(&pt(3, 4), &pt(0, 1)).unwrap(), pt(7, 8));
        assert_eq!(dyadic_between(&pt(0, 1), &pt(1, 2)).unwrap(), pt(1, 4));
        assert_eq!(dyadic_between(&pt(1, 4), &pt(3, 8)).unwrap(), pt(5, 16));
    }

    #[test]
    fn torsion_small_orders() {
        let g = torsion_element(2, 1, &[pt(0, 1), pt(1, 2)]).unwrap();
        assert_eq!(g, PLHomeo::rotation(&rat(1, 2)));
        let g = torsion_element(3, 1, &[pt(0, 1), pt(1, 2), pt(3, 4)]).unwrap();
        assert!(pl_power(&g, 3).is_identity());
        assert!(!pl_power(&g, 1).is_identity());
        assert!(!pl_power(&g, 2).is_identity());
        assert_eq!(g.apply(&pt(0, 1)), pt(1, 2));
        assert_eq!(g.apply(&pt(1, 2)), pt(3, 4));
        assert_eq!(g.apply(&pt(3, 4)), pt(0, 1));
        assert!(g.is_in_thompson_t());
    }

    #[test]
    fn torsion_rotation_numbers() {
        for q in 2u32..=12 {
            for p in 1..q {
                if gcd_u32(p, q) != 1 {
                    continue;
                }
                // q points: i/16q rounded to dyadics — use i/(16*2^k)? simpler:
                // i * (1/2^ceil(log2 q)) ... need q distinct dyadics: i/2^k
                let k = (q as usize).next_power_of_two() as i64;
                let pts: Vec<RationalPoint> =
                    (0..q as i64).map(|i| pt(i, k)).collect();
                let g = torsion_element(q, p, &pts).unwrap();
                assert!(pl_power(&g, q as i64).is_identity());
                let rn = rotation_number(&g, 64, &rat(1, 1000));
                assert_eq!(rn, RotationNumber::Exact(Rational::new(p.into(), q.into())));
            }
        }
    }

    #[test]
    fn torsion_multi_orbit() {
        // two 2-cycles interleaved: 0 ↔ 3/4 and 1/2 ↔ 7/8
        let g = torsion_from_points(2, 1, &[pt(0, 1), pt(1, 2), pt(3, 4), pt(7, 8)]).unwrap();
        assert!(pl_power(&g, 2).is_identity());
        assert_eq!(g.apply(&pt(0, 1)), pt(3, 4));
        assert_eq!(g.apply(&pt(1, 2)), pt(7, 8));
        assert_eq!(g.apply(&pt(3, 4)), pt(0, 1));
        assert_eq!(g.apply(&pt(7, 8)), pt(1, 2));
        assert!(g.is_in_thompson_t());
    }

    #[test]
    fn conjugator_identity_and_error_paths() {
        let a = torsion_element(3, 1, &[pt(0, 1), pt(1, 2), pt(3, 4)]).unwrap();
        let h = conjugator(&a, &a, &[pt(0, 1)]).unwrap();
        assert!(h.is_identity());
        // disagreeing powers on E
        let b = torsion_element(3, 1, &[pt(0, 1), pt(1, 4), pt(3, 4)]).unwrap();
        let err = conjugator(&a, &b, &[pt(1, 2)]).unwrap_err();
        assert!(err.to_string().contains("disagree"));
    }

    #[test]
    fn conjugator_intertwines() {
        // a, b of order 2 agreeing on E = {0, 1/2} with different free points
        let a = torsion_from_points(2, 1, &[pt(0, 1), pt(1, 4), pt(1, 2), pt(3, 4)]).unwrap();
        let b = torsion_from_points(2, 1, &[pt(0, 1), pt(3, 8), pt(1, 2), pt(7, 8)]).unwrap();
        let e = [pt(0, 1), pt(1, 2)];
        let h = conjugator(&a, &b, &e).unwrap();
        assert_eq!(pl_compose(&h, &a), pl_compose(&b, &h));
        for x in &e {
            assert_eq!(h.apply(x), *x);
        }
        assert!(h.is_in_thompson_t());
    }

    #[test]
    fn realize_mini_farey() {
        let s = crate::scheme::test_fixtures::mini_farey();
        let r = realize_scheme(&s, None).unwrap();
        let a = r.generator("a").unwrap();
        let b = r.generator("b").unwrap();
        assert!(pl_power(a, 3).is_identity());
        assert!(pl_power(b, 2).is_identity());
        assert!(!a.is_identity() && !b.is_identity());
        assert_eq!(a.apply(&pt(0, 1)), pt(1, 2));
        assert_eq!(b.apply(&pt(3, 4)), pt(0, 1));
        // free choice lands strictly inside U_b = (3/4, 1)
        let img = b.apply(&pt(1, 2));
        assert!(pt(3, 4).dist_ccw(&img) > Rational::zero());
        assert!(pt(3, 4).dist_ccw(&img) < rat(1, 4));
        // round-trip through JSON
        let j = r.to_json().unwrap();
        let r2 = Realization::from_json(&j).unwrap();
        assert_eq!(r2.generator("a").unwrap(), a);
        assert_eq!(r2.generator("b").unwrap(), b);
    }

    #[test]
    fn realize_verifies_table() {
        let s = crate::scheme::test_fixtures::mini_farey();
        let r = realize_scheme(&s, None).unwrap();
        assert!(verify_realization(&r.scheme, &r.maps).is_ok());
        assert!(crate::scheme::extract_table(&r.scheme, &r.maps).is_ok());
    }
}
