//! Dynamical analysis of realized actions: Markovian sequences, minimality
//! certificates, Markovian expansions and first returns, minimal-set
//! estimates, shrinking-interval profiles, multiconvergence probes, and
//! ball censuses.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Zero};

use crate::arith::{
    fixed_sets, pl_compose, pl_invert, rotation_number, Arc, ArcKind, Rational, RationalPoint,
    RotationNumber,
};
use crate::groups::{enumerate_sphere, realize_token, realize_word, Token, Word};
use crate::realize::Realization;
use crate::scheme::{flip_orientation, realize_token_str, refine, Entry, Scheme, SchemeError};

/// Errors produced by the dynamical analyses.
#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Group(#[from] crate::groups::GroupError),
    #[error(transparent)]
    Arith(#[from] crate::arith::ArithError),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, DynamicsError>;

/// The shortest Markovian sequence of an interval, or Neutral when no
/// sequence of generators leads it to a Markovian image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MarkovOutcome {
    Sequence(Vec<String>),
    Neutral,
}

/// Per-interval shortest Markovian sequences and the derived depth classes.
#[derive(Clone, Debug)]
pub struct MarkovAnalysis {
    /// interval id → outcome
    pub sequences: BTreeMap<String, MarkovOutcome>,
    /// depth classes: depth_classes[l - 1] lists the intervals of depth l
    pub depth_classes: Vec<Vec<String>>,
    pub max_depth: usize,
}

impl MarkovAnalysis {
    pub fn neutral_intervals(&self) -> Vec<&str> {
        self.sequences
            .iter()
            .filter(|(_, o)| matches!(o, MarkovOutcome::Neutral))
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Shortest Markovian sequence per interval by breadth-first search over the
/// transition table: depth 1 are the intervals with a Markovian row, depth
/// l + 1 are reached through an exact Contained row into a depth-l interval.
/// Ties break lexicographically on the whole generator sequence.
pub fn markovian_sequences(s: &Scheme) -> Result<MarkovAnalysis> {
    let idx = s.index();
    let gens = crate::scheme::all_generator_tokens(&s.group);
    let mut sequences: BTreeMap<String, MarkovOutcome> = BTreeMap::new();
    let mut depth: BTreeMap<String, usize> = BTreeMap::new();
    // depth 1: a Markovian row exists; smallest generator wins
    for iv in &s.intervals {
        let mut best: Option<&str> = None;
        for g in &gens {
            if let Some(Entry::Markovian { .. }) = idx.entry.get(&(g.as_str(), iv.id.as_str())) {
                if best.map_or(true, |b| g.as_str() < b) {
                    best = Some(g);
                }
            }
        }
        if let Some(g) = best {
            sequences.insert(iv.id.clone(), MarkovOutcome::Sequence(vec![g.to_string()]));
            depth.insert(iv.id.clone(), 1);
        }
    }
    // breadth-first rounds through exact containments
    loop {
        let mut added: Vec<(String, Vec<String>)> = Vec::new();
        for iv in &s.intervals {
            if sequences.contains_key(&iv.id) {
                continue;
            }
            let mut best: Option<Vec<String>> = None;
            for g in &gens {
                if let Some(Entry::Contained {
                    target,
                    exact: true,
                }) = idx.entry.get(&(g.as_str(), iv.id.as_str()))
                {
                    if let Some(MarkovOutcome::Sequence(rest)) = sequences.get(target) {
                        let mut cand = vec![g.to_string()];
                        cand.extend(rest.iter().cloned());
                        if best.as_ref().map_or(true, |b| cand < *b) {
                            best = Some(cand);
                        }
                    }
                }
            }
            if let Some(seq) = best {
                depth.insert(iv.id.clone(), seq.len());
                added.push((iv.id.clone(), seq));
            }
        }
        if added.is_empty() {
            break;
        }
        for (id, seq) in added {
            sequences.insert(id, MarkovOutcome::Sequence(seq));
        }
    }
    let max_depth = depth.values().copied().max().unwrap_or(0);
    let mut depth_classes = vec![Vec::new(); max_depth];
    for iv in &s.intervals {
        if let Some(d) = depth.get(&iv.id) {
            depth_classes[d - 1].push(iv.id.clone());
        } else {
            sequences.insert(iv.id.clone(), MarkovOutcome::Neutral);
        }
    }
    Ok(MarkovAnalysis {
        sequences,
        depth_classes,
        max_depth,
    })
}

// ---------------------------------------------------------------------------
// Minimality certificate
// ---------------------------------------------------------------------------

/// Proof-backed minimality verdict: Minimal certifies minimality; anything
/// short of the full slope criterion is NotCertified with the first failing
/// condition (which does not assert non-minimality).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Minimality {
    Minimal,
    NotCertified(String),
}

/// Certify minimality: degenerate gaps, no neutral intervals, and for every
/// interval the first letter of its shortest Markovian sequence expands it
/// pointwise (exact minimum slope > 1 on the source interval).
pub fn minimality_certificate(r: &Realization) -> Result<Minimality> {
    let s = &r.scheme;
    let n = s.intervals.len();
    for i in 0..n {
        let (_, right) = s.endpoints(i)?;
        let (next_left, _) = s.endpoints((i + 1) % n)?;
        if right != next_left {
            return Ok(Minimality::NotCertified(format!(
                "gaps: {} is not degenerate",
                s.gaps[i].id
            )));
        }
    }
    let ma = markovian_sequences(s)?;
    if let Some(id) = ma.neutral_intervals().first() {
        return Ok(Minimality::NotCertified(format!("neutral interval {id}")));
    }
    for (i, iv) in s.intervals.iter().enumerate() {
        let MarkovOutcome::Sequence(seq) = &ma.sequences[&iv.id] else {
            unreachable!("neutral intervals were ruled out");
        };
        let f = realize_token_str(&r.maps, &seq[0])?;
        let (l, rt) = s.endpoints(i)?;
        // half-open: the right-slope at the right endpoint belongs to the
        // next interval, so the pointwise infimum on the closure is the
        // minimum over [l, r)
        let arc = Arc::new(l, rt, ArcKind::LeftClosed)?;
        let m = f.min_slope_on_arc(&arc);
        if m <= Rational::one() {
            return Ok(Minimality::NotCertified(format!(
                "slope: {} has minimum slope {} on {}",
                seq[0],
                crate::arith::format_rational(&m),
                iv.id
            )));
        }
    }
    Ok(Minimality::Minimal)
}

// ---------------------------------------------------------------------------
// Markovian expansion and first returns
// ---------------------------------------------------------------------------

/// A detected first return: a group element fixing a recorded orbit point on
/// the boundary of (or inside) its base interval, with the exact one-sided
/// slopes there.
#[derive(Clone, Debug)]
pub struct FirstReturnRecord {
    /// base interval id
    pub interval: String,
    /// the return word h
    pub word: Word,
    /// the orbit point fixed by h
    pub fixed_point: RationalPoint,
    pub slope_right: Rational,
    pub slope_left: Rational,
    /// true when I ⊆ h(I); false when h(I) ⊆ I
    pub expands: bool,
}

/// A Markovian expansion itinerary with the first returns found along it.
#[derive(Clone, Debug)]
pub struct Expansion {
    /// (generator applied, interval containing the point), per step
    pub steps: Vec<(String, String)>,
    pub first_returns: Vec<FirstReturnRecord>,
}

/// Deterministic Markovian expansion of a point: at each step, apply the
/// first letter of the shortest Markovian sequence of the interval holding
/// the point. Whenever the orbit revisits a point, the return word is
/// inverted and recorded as a first return (verified to nest exactly).
pub fn markovian_expansion(
    r: &Realization,
    x: &RationalPoint,
    n: usize,
) -> Result<Expansion> {
    let s = &r.scheme;
    let ma = markovian_sequences(s)?;
    if let Some(id) = ma.neutral_intervals().first() {
        return Err(DynamicsError::Invalid(format!(
            "not strictly Markovian: neutral interval {id}"
        )));
    }
    // interval holding a point: left-closed arcs; with degenerate gaps these
    // tile the circle, and a point inside a fat gap has no itinerary
    let arcs: Vec<Arc> = (0..s.intervals.len())
        .map(|i| {
            let (l, rt) = s.endpoints(i)?;
            Ok(Arc::new(l, rt, ArcKind::LeftClosed)?)
        })
        .collect::<Result<_>>()?;
    let locate = |p: &RationalPoint| -> Result<usize> {
        arcs.iter()
            .position(|a| a.contains(p))
            .ok_or_else(|| DynamicsError::Invalid(format!("point {p} lies in a gap")))
    };
    let mut steps = Vec::new();
    let mut first_returns: Vec<FirstReturnRecord> = Vec::new();
    let mut orbit: Vec<(RationalPoint, usize)> = Vec::new(); // (point, interval)
    let mut applied: Vec<Token> = Vec::new(); // token applied at each step
    let mut p = x.clone();
    for _ in 0..n {
        let i = locate(&p)?;
        // a revisit closes a return word: take the most recent occurrence
        if let Some(m0) = orbit.iter().rposition(|(q, _)| *q == p) {
            let g = Word {
                tokens: applied[m0..].iter().rev().cloned().collect(),
            };
            let h = g.inverse(&s.group);
            let base = &s.intervals[orbit[m0].1].id;
            if !first_returns
                .iter()
                .any(|fr| fr.fixed_point == p && fr.word == h)
            {
                let hmap = realize_word(&r.maps, &h)?;
                if hmap.apply(&p) != p {
                    return Err(DynamicsError::Invalid(format!(
                        "return word {h} does not fix {p}"
                    )));
                }
                let base_arc = &arcs[orbit[m0].1];
                let image = hmap.apply_arc(base_arc);
                let expands = if base_arc.subset_of(&image) {
                    true
                } else if image.subset_of(base_arc) {
                    false
                } else {
                    return Err(DynamicsError::Invalid(format!(
                        "return word {h} does not nest its base interval {base}"
                    )));
                };
                first_returns.push(FirstReturnRecord {
                    interval: base.clone(),
                    word: h,
                    fixed_point: p.clone(),
                    slope_right: hmap.slope_at(&p),
                    slope_left: hmap.slope_at_left(&p),
                    expands,
                });
            }
        }
        let MarkovOutcome::Sequence(seq) = &ma.sequences[&s.intervals[i].id] else {
            unreachable!("neutral intervals were ruled out");
        };
        let tok = crate::groups::Word::parse(&s.group, &seq[0])?
            .tokens
            .pop()
            .expect("a generator token");
        let f = realize_token(&r.maps, &tok)?;
        steps.push((seq[0].clone(), s.intervals[i].id.clone()));
        orbit.push((p.clone(), i));
        applied.push(tok);
        p = f.apply(&p);
    }
    Ok(Expansion {
        steps,
        first_returns,
    })
}

// ---------------------------------------------------------------------------
// Minimal-set estimate
// ---------------------------------------------------------------------------

/// Heuristic classification of the estimated minimal set. Only
/// `minimality_certificate` gives a proof-backed verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetClass {
    MinimalLike,
    CantorLike,
}

/// Exact refinement data at a given depth plus the heuristic classification.
#[derive(Clone, Debug)]
pub struct MinimalSetEstimate {
    pub depth: u32,
    /// number of endpoints in Δ_depth
    pub delta_size: usize,
    /// set when the refinement hit the cap; results are then partial
    pub truncated: bool,
    /// length of the largest complementary arc of Δ_depth
    pub largest_gap: Rational,
    /// complementary arcs identical (same exact endpoints) at depth−1 and depth
    pub persistent_arcs: Vec<(RationalPoint, RationalPoint)>,
    pub classification: SetClass,
}

/// Estimate the minimal set by computing Δ_depth exactly: complementary
/// arcs that persist with positive length across the last two depths signal
/// a Cantor-like (exceptional) set; otherwise, a largest gap below
/// 1/samples is called minimal-like.
pub fn minimal_set_estimate(
    r: &Realization,
    depth: u32,
    samples: usize,
    cap: usize,
) -> Result<MinimalSetEstimate> {
    let prev = refine(&r.scheme, &r.maps, depth.saturating_sub(1), cap)?;
    let cur = refine(&r.scheme, &r.maps, depth, cap)?;
    let positive_arcs = |st: &crate::scheme::RefinementState| -> BTreeSet<(RationalPoint, RationalPoint)> {
        st.arcs()
            .into_iter()
            .filter(|(l, rt)| l != rt && l.dist_ccw(rt) > Rational::zero())
            .collect()
    };
    let prev_arcs = positive_arcs(&prev);
    let cur_arcs = positive_arcs(&cur);
    let persistent_arcs: Vec<(RationalPoint, RationalPoint)> = cur_arcs
        .iter()
        .filter(|a| prev_arcs.contains(*a))
        .cloned()
        .collect();
    let largest_gap = cur_arcs
        .iter()
        .map(|(l, rt)| l.dist_ccw(rt))
        .max()
        .unwrap_or_else(Rational::zero);
    let threshold = Rational::new(1.into(), (samples.max(1) as i64).into());
    let cantor = persistent_arcs
        .iter()
        .any(|(l, rt)| l.dist_ccw(rt) >= threshold);
    Ok(MinimalSetEstimate {
        depth,
        delta_size: cur.delta.len(),
        truncated: cur.truncated || prev.truncated,
        largest_gap,
        persistent_arcs,
        classification: if cantor {
            SetClass::CantorLike
        } else {
            SetClass::MinimalLike
        },
    })
}

// ---------------------------------------------------------------------------
// DKN quantities
// ---------------------------------------------------------------------------

/// The exact intermediate sum Ŝ(w, x) = Σ_{k=0}^{ℓ−1} (s_k⋯s_1)′(x), with
/// right derivatives at breakpoints; the empty prefix contributes 1.
pub fn dkn_s_hat(r: &Realization, w: &Word, x: &RationalPoint) -> Result<Rational> {
    let mut total = Rational::zero();
    let mut point = x.clone();
    let mut deriv = Rational::one();
    for k in 0..w.tokens.len() {
        total += &deriv;
        // the word lists factors in product order: the rightmost acts first
        let tok = &w.tokens[w.tokens.len() - 1 - k];
        let f = realize_token(&r.maps, tok)?;
        deriv *= f.slope_at(&point);
        point = f.apply(&point);
    }
    Ok(total)
}

/// Shrinking profile of a DKN set estimate: per grid arc and per radius,
/// the exact sup of |g(I)| over reduced words of that length whose first
/// (rightmost) letter differs from the excluded generator.
#[derive(Clone, Debug)]
pub struct DknProfile {
    /// the excluded first letter s (words of W_s are skipped)
    pub generator: String,
    pub grid: u32,
    /// radii 1..=n
    pub radii: Vec<u32>,
    /// sup of |g(I)| per radius over the interior arcs; arcs straddling the
    /// boundary of U_s (or outside it) blow up and are excluded here
    pub sup_lengths: Vec<Rational>,
    /// per grid arc, per radius, the sup of |g(I)|
    pub arc_profiles: Vec<Vec<Rational>>,
    /// indices of grid arcs whose closure lies in the interior of U_s
    pub interior_arcs: Vec<usize>,
    /// grid arcs whose profile at the final radius fell below the threshold
    pub shrinking_arcs: Vec<(RationalPoint, RationalPoint)>,
    pub threshold: Rational,
    /// number of words enumerated
    pub words: usize,
}

/// Estimate the DKN set U_s on a uniform grid: for every radius m ≤ n,
/// compute sup |g(I)| over reduced words of length exactly m with first
/// letter ≠ s; arcs whose final sup falls below the threshold are reported.
pub fn dkn_u_estimate(
    r: &Realization,
    s: &str,
    radius: u32,
    grid: u32,
    threshold: &Rational,
    cap: usize,
) -> Result<DknProfile> {
    if !r.scheme.group.is_free() {
        return Err(DynamicsError::Invalid(
            "DKN estimates require a free marking".into(),
        ));
    }
    if radius == 0 || grid == 0 {
        return Err(DynamicsError::Invalid("radius and grid must be positive".into()));
    }
    let letters: Vec<String> = r
        .scheme
        .group
        .stable_letters()
        .flat_map(|e| [e.name.clone(), flip_orientation(&e.name)])
        .collect();
    if !letters.iter().any(|l| l == s) {
        return Err(DynamicsError::Invalid(format!("unknown generator {s}")));
    }
    let maps: BTreeMap<&str, crate::arith::PLHomeo> = letters
        .iter()
        .map(|l| Ok((l.as_str(), realize_token_str(&r.maps, l)?)))
        .collect::<Result<_>>()?;
    let n = radius as usize;
    let gpts: Vec<RationalPoint> = (0..grid)
        .map(|j| RationalPoint::new(Rational::new((j as i64).into(), (grid as i64).into())))
        .collect();
    let mut arc_profiles = vec![vec![Rational::zero(); n]; grid as usize];
    let mut words = 0usize;
    // depth-first over reduced words, extending by outer (leftmost) letters;
    // the running state is the image of every grid point
    struct Dfs<'a> {
        letters: &'a [String],
        maps: &'a BTreeMap<&'a str, crate::arith::PLHomeo>,
        n: usize,
        cap: usize,
        grid: usize,
        profiles: &'a mut Vec<Vec<Rational>>,
        words: &'a mut usize,
    }
    impl Dfs<'_> {
        fn go(&mut self, outer: &str, images: Vec<RationalPoint>, depth: usize) -> Result<()> {
            *self.words += 1;
            if *self.words > self.cap {
                return Err(DynamicsError::Invalid(format!(
                    "word enumeration exceeded cap {}",
                    self.cap
                )));
            }
            for j in 0..self.grid {
                let len = images[j].dist_ccw(&images[(j + 1) % self.grid]);
                if len > self.profiles[j][depth - 1] {
                    self.profiles[j][depth - 1] = len;
                }
            }
            if depth == self.n {
                return Ok(());
            }
            for l in self.letters {
                if *l == flip_orientation(outer) {
                    continue; // cancellation
                }
                let f = &self.maps[l.as_str()];
                let next: Vec<RationalPoint> = images.iter().map(|p| f.apply(p)).collect();
                self.go(l, next, depth + 1)?;
            }
            Ok(())
        }
    }
    {
        let mut dfs = Dfs {
            letters: &letters,
            maps: &maps,
            n,
            cap,
            grid: grid as usize,
            profiles: &mut arc_profiles,
            words: &mut words,
        };
        for first in &letters {
            if first == s {
                continue; // W_s exclusion: first letter equals s
            }
            let f = &dfs.maps[first.as_str()];
            let images: Vec<RationalPoint> = gpts.iter().map(|p| f.apply(p)).collect();
            dfs.go(first, images, 1)?;
        }
    }
    // interior arcs: closed grid arcs strictly inside a component of U_s
    let u_open: Vec<Arc> = dkn_letter_arcs(&r.scheme, s)?
        .into_iter()
        .map(|a| Arc::new(a.left, a.right, ArcKind::Open))
        .collect::<std::result::Result<_, _>>()?;
    let interior_arcs: Vec<usize> = (0..grid as usize)
        .filter(|&j| {
            Arc::new(
                gpts[j].clone(),
                gpts[(j + 1) % grid as usize].clone(),
                ArcKind::Closed,
            )
            .map(|a| u_open.iter().any(|u| a.subset_of(u)))
            .unwrap_or(false)
        })
        .collect();
    let sup_lengths: Vec<Rational> = (0..n)
        .map(|m| {
            interior_arcs
                .iter()
                .map(|&j| arc_profiles[j][m].clone())
                .max()
                .unwrap_or_else(Rational::zero)
        })
        .collect();
    let shrinking_arcs: Vec<(RationalPoint, RationalPoint)> = (0..grid as usize)
        .filter(|j| arc_profiles[*j][n - 1] < *threshold)
        .map(|j| (gpts[j].clone(), gpts[(j + 1) % grid as usize].clone()))
        .collect();
    Ok(DknProfile {
        generator: s.to_string(),
        grid,
        radii: (1..=radius).collect(),
        sup_lengths,
        arc_profiles,
        interior_arcs,
        shrinking_arcs,
        threshold: threshold.clone(),
        words,
    })
}

// ---------------------------------------------------------------------------
// Multiconvergence probe
// ---------------------------------------------------------------------------

/// Result of pushing an eventually-periodic geodesic ray: the exact nested
/// repelling sets R_n, the estimated limit points, and the bound K.
#[derive(Clone, Debug)]
pub struct MulticonvResult {
    pub ray: Vec<String>,
    /// K = max over generators of the component count of U_s
    pub k_bound: usize,
    /// the nested closed sets R_n as arc lists, n = 1..=depth
    pub levels: Vec<Vec<Arc>>,
    /// midpoints of the final arcs (estimated repelling set R)
    pub repelling: Vec<RationalPoint>,
    /// clustered forward images of the complement (estimated attracting set A)
    pub attracting: Vec<RationalPoint>,
}

impl MulticonvResult {
    /// The strengthened multiconvergence conclusion #A = #R ≤ K.
    pub fn consistent(&self) -> bool {
        self.attracting.len() == self.repelling.len() && self.repelling.len() <= self.k_bound
    }
}

/// The DKN set U_ℓ of a letter as the closed intervals of the scheme atom
/// holding Z of the opposite letter (s contracts into Z_s = U_{s⁻¹}).
fn dkn_letter_arcs(s: &Scheme, letter: &str) -> Result<Vec<Arc>> {
    let opp = flip_orientation(letter);
    let atom = s
        .atoms
        .iter()
        .find(|a| a.letter.as_deref() == Some(opp.as_str()))
        .ok_or_else(|| DynamicsError::Invalid(format!("no atom for letter {opp}")))?;
    let mut arcs = Vec::new();
    for iv in &atom.intervals {
        let i = s
            .intervals
            .iter()
            .position(|x| &x.id == iv)
            .ok_or_else(|| DynamicsError::Invalid(format!("unknown interval {iv}")))?;
        let (l, rt) = s.endpoints(i)?;
        arcs.push(Arc::new(l, rt, ArcKind::Closed)?);
    }
    Ok(arcs)
}

/// Follow a reduced, eventually-periodic ray (the given letters repeated
/// cyclically) to the given depth: computes R_n = (s_{n−1}⋯s_1)⁻¹(U_{s_n})
/// exactly, checks the nesting R_{n+1} ⊆ R_n and #components ≤ K, and
/// estimates the attracting set by pushing complement midpoints forward.
pub fn multiconvergence_probe(
    r: &Realization,
    ray: &[String],
    depth: usize,
) -> Result<MulticonvResult> {
    if !r.scheme.group.is_free() {
        return Err(DynamicsError::Invalid(
            "multiconvergence probes require a free marking".into(),
        ));
    }
    if ray.is_empty() || depth == 0 {
        return Err(DynamicsError::Invalid("empty ray or zero depth".into()));
    }
    let s = &r.scheme;
    let seq: Vec<&String> = (0..depth).map(|i| &ray[i % ray.len()]).collect();
    for i in 1..seq.len() {
        if *seq[i] == flip_orientation(seq[i - 1]) {
            return Err(DynamicsError::Invalid(format!(
                "ray is not reduced at position {i}: {} after {}",
                seq[i],
                seq[i - 1]
            )));
        }
    }
    let k_bound = s
        .atoms
        .iter()
        .filter(|a| a.letter.is_some())
        .map(|a| a.intervals.len())
        .max()
        .unwrap_or(0);
    let mut levels: Vec<Vec<Arc>> = Vec::new();
    let mut h = crate::arith::PLHomeo::identity(); // (s_n⋯s_1)⁻¹ so far
    for (n, letter) in seq.iter().enumerate() {
        let base = dkn_letter_arcs(s, letter)?;
        let rn: Vec<Arc> = base.iter().map(|a| h.apply_arc(a)).collect();
        if rn.len() > k_bound {
            return Err(DynamicsError::Invalid(format!(
                "R_{} has {} components, exceeding K = {k_bound}",
                n + 1,
                rn.len()
            )));
        }
        if let Some(prev) = levels.last() {
            for a in &rn {
                if !prev.iter().any(|p| a.subset_of(p)) {
                    return Err(DynamicsError::Invalid(format!(
                        "nesting failure at level {}: {:?} escapes R_{n}",
                        n + 1,
                        a
                    )));
                }
            }
        }
        let inv = pl_invert(&realize_token_str(&r.maps, letter)?);
        h = pl_compose(&h, &inv);
        levels.push(rn);
    }
    let half = Rational::new(1.into(), 2.into());
    let final_arcs = levels.last().unwrap();
    let repelling: Vec<RationalPoint> = final_arcs
        .iter()
        .map(|a| a.left.add(&(a.length() * &half)))
        .collect();
    // attracting estimate: midpoints of the complement of an early level,
    // pushed forward by g_depth = h⁻¹ and clustered
    let base_level = &levels[1.min(levels.len() - 1)];
    let mut bounds: Vec<(RationalPoint, RationalPoint)> = base_level
        .iter()
        .map(|a| (a.left.clone(), a.right.clone()))
        .collect();
    bounds.sort_by(|a, b| a.0.cmp(&b.0));
    let g = pl_invert(&h);
    let mut images: Vec<RationalPoint> = (0..bounds.len())
        .map(|i| {
            let gap_l = &bounds[i].1;
            let gap_r = &bounds[(i + 1) % bounds.len()].0;
            let mid = gap_l.add(&(gap_l.dist_ccw(gap_r) * &half));
            g.apply(&mid)
        })
        .collect();
    images.sort();
    images.dedup();
    // cluster circularly: successive points closer than the resolution merge
    let resolution = Rational::new(1.into(), 512.into());
    let mut attracting: Vec<RationalPoint> = Vec::new();
    for p in &images {
        if attracting
            .iter()
            .all(|q| q.dist_ccw(p).min(p.dist_ccw(q)) > resolution)
        {
            attracting.push(p.clone());
        }
    }
    Ok(MulticonvResult {
        ray: ray.to_vec(),
        k_bound,
        levels,
        repelling,
        attracting,
    })
}

// ---------------------------------------------------------------------------
// Ball census
// ---------------------------------------------------------------------------

/// Exhaustive census of a word-metric ball: the maximum fixed-point
/// component count over nontrivial elements, and the exact rotation numbers
/// found.
#[derive(Clone, Debug)]
pub struct BallCensus {
    pub radius: u32,
    /// nontrivial elements examined
    pub elements: usize,
    /// words realizing the identity map (skipped)
    pub identity_skipped: usize,
    pub max_fixed_components: usize,
    /// exact rotation numbers as canonical "p/q" strings
    pub spectrum: BTreeSet<String>,
    /// elements whose rotation number was not resolved exactly
    pub unresolved: usize,
}

/// Enumerate all reduced words up to the radius, skip exact identities, and
/// collect fixed-point component counts and exact rotation numbers.
pub fn ball_census(r: &Realization, radius: u32, cap: usize) -> Result<BallCensus> {
    let mut census = BallCensus {
        radius,
        elements: 0,
        identity_skipped: 0,
        max_fixed_components: 0,
        spectrum: BTreeSet::new(),
        unresolved: 0,
    };
    let precision = Rational::new(1.into(), 1_000_000.into());
    for m in 1..=radius {
        for w in enumerate_sphere(&r.scheme.group, m, cap)? {
            let f = realize_word(&r.maps, &w)?;
            if f.is_identity() {
                census.identity_skipped += 1;
                continue;
            }
            census.elements += 1;
            let fixed = fixed_sets(&f)?;
            if fixed.is_empty() {
                match rotation_number(&f, 64, &precision) {
                    RotationNumber::Exact(q) => {
                        census.spectrum.insert(crate::arith::format_rational(&q));
                    }
                    RotationNumber::Interval(_, _) => census.unresolved += 1,
                }
            } else {
                census.max_fixed_components = census.max_fixed_components.max(fixed.len());
                census.spectrum.insert("0".to_string());
            }
        }
    }
    Ok(census)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::test_fixtures::mini_farey;

    #[test]
    fn farey_sequences() {
        let ma = markovian_sequences(&mini_farey()).unwrap();
        assert_eq!(
            ma.sequences["Ub"],
            MarkovOutcome::Sequence(vec!["b".into()])
        );
        assert_eq!(
            ma.sequences["I1"],
            MarkovOutcome::Sequence(vec!["a^2".into(), "b".into()])
        );
        assert_eq!(
            ma.sequences["I2"],
            MarkovOutcome::Sequence(vec!["a".into(), "b".into()])
        );
        assert_eq!(ma.max_depth, 2);
        assert_eq!(ma.depth_classes[0], vec!["Ub".to_string()]);
        assert!(ma.neutral_intervals().is_empty());
    }

    #[test]
    fn neutral_detection() {
        let mut s = mini_farey();
        // removing every Markovian row leaves all intervals neutral
        s.table.retain(|r| !matches!(r.entry, Entry::Markovian { .. }));
        let ma = markovian_sequences(&s).unwrap();
        assert_eq!(ma.neutral_intervals().len(), 3);
        assert_eq!(ma.max_depth, 0);
    }

    fn realized(name: &str) -> Realization {
        let s = crate::fixtures::fixture(name).unwrap();
        crate::realize::realize_scheme(&s, None).unwrap()
    }

    #[test]
    fn farey_minimality_not_certified_by_slope() {
        // the Farey realization has degenerate gaps and no neutral intervals,
        // but parabolic-like pieces keep the minimum slope at or below 1
        let r = realized("farey");
        match minimality_certificate(&r).unwrap() {
            Minimality::NotCertified(msg) => assert!(msg.starts_with("slope"), "{msg}"),
            Minimality::Minimal => {}
        }
    }

    #[test]
    fn schottky_not_certified_gaps() {
        let r = realized("schottky");
        match minimality_certificate(&r).unwrap() {
            Minimality::NotCertified(msg) => assert!(msg.starts_with("gaps"), "{msg}"),
            other => panic!("expected gap failure, got {other:?}"),
        }
    }

    #[test]
    fn schottky_with_j_not_certified_neutral() {
        let r = realized("schottky-with-j");
        match minimality_certificate(&r).unwrap() {
            Minimality::NotCertified(msg) => {
                assert!(msg.starts_with("gaps") || msg.contains("neutral"), "{msg}")
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn expansion_finds_first_returns() {
        let r = realized("farey");
        let x = RationalPoint::parse("1/7").unwrap();
        let exp = markovian_expansion(&r, &x, 40).unwrap();
        assert_eq!(exp.steps.len(), 40);
        assert!(!exp.first_returns.is_empty());
        for fr in &exp.first_returns {
            let h = realize_word(&r.maps, &fr.word).unwrap();
            assert_eq!(h.apply(&fr.fixed_point), fr.fixed_point);
        }
    }

    #[test]
    fn schottky_minimal_set_is_cantor_like() {
        let r = realized("schottky");
        let est = minimal_set_estimate(&r, 5, 64, 20_000).unwrap();
        assert_eq!(est.classification, SetClass::CantorLike);
        assert!(!est.persistent_arcs.is_empty());
        assert!(est.largest_gap > Rational::zero());
    }

    #[test]
    fn s_hat_matches_direct_sum() {
        let r = realized("schottky");
        let g = &r.scheme.group;
        let w = Word::parse(g, "s t -s t").unwrap();
        let x = RationalPoint::parse("1/3").unwrap();
        // direct evaluation: sum over prefixes (rightmost-first) of the
        // derivative of the partial composition at x
        let mut expected = Rational::zero();
        for k in 0..=3usize {
            let suffix = Word {
                tokens: w.tokens[w.tokens.len() - k..].to_vec(),
            };
            let f = realize_word(&r.maps, &suffix).unwrap();
            // derivative of the k-fold composition at x via chain rule
            let mut d = Rational::one();
            let mut p = x.clone();
            for tok in suffix.tokens.iter().rev() {
                let m = realize_token(&r.maps, tok).unwrap();
                d *= m.slope_at(&p);
                p = m.apply(&p);
            }
            assert_eq!(f.apply(&x), p);
            expected += d;
        }
        assert_eq!(dkn_s_hat(&r, &w, &x).unwrap(), expected);
        assert_eq!(
            dkn_s_hat(&r, &Word::empty(), &x).unwrap(),
            Rational::zero()
        );
    }

    #[test]
    fn dkn_profile_shrinks_on_schottky() {
        let r = realized("schottky");
        let thr = Rational::new(1.into(), 100.into());
        let prof = dkn_u_estimate(&r, "s", 5, 64, &thr, 100_000).unwrap();
        assert_eq!(prof.sup_lengths.len(), 5);
        assert!(!prof.interior_arcs.is_empty());
        for m in 2..prof.sup_lengths.len() {
            assert!(
                prof.sup_lengths[m] <= prof.sup_lengths[m - 1],
                "radius {} sup exceeds radius {}",
                m + 1,
                m
            );
        }
        assert!(!prof.shrinking_arcs.is_empty());
    }

    #[test]
    fn multiconvergence_on_schottky_ray() {
        let r = realized("schottky");
        let mc =
            multiconvergence_probe(&r, &["s".to_string(), "t".to_string()], 8).unwrap();
        assert!(mc.k_bound >= 1);
        assert!(mc.repelling.len() <= mc.k_bound);
        assert!(mc.consistent(), "A = {:?}, R = {:?}", mc.attracting, mc.repelling);
        // unreduced rays are rejected
        assert!(multiconvergence_probe(&r, &["s".to_string(), "-s".to_string()], 4).is_err());
    }

    #[test]
    fn ball_census_farey() {
        let r = realized("farey");
        let c = ball_census(&r, 4, 100_000).unwrap();
        assert!(c.elements > 0);
        assert!(c.spectrum.contains("0"));
        for q in &c.spectrum {
            assert!(
                ["0", "1/2", "1/3", "2/3"].contains(&q.as_str()),
                "unexpected rotation number {q}"
            );
        }
    }
}
