//! Ping-pong schemes: the combinatorial data of an interactive family
//! (intervals, gaps, atoms, transition table), axiom checkers, scheme
//! equivalence, endpoint refinement, and the gap-orbit invariant.

use crate::arith::{Arc, ArithError, PLHomeo, RationalPoint};
use crate::groups::{validate_marked_group, MarkedGroup};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

pub const SCHEME_FORMAT: &str = "pingpong-scheme-v1";

#[derive(Debug, thiserror::Error)]
pub enum SchemeError {
    #[error("invalid scheme: {0}")]
    Invalid(String),
    #[error("scheme has no exact endpoints; operation requires them")]
    MissingEndpoints,
    #[error("gap {0}: image undetermined by the transition table")]
    AmbiguousGap(String),
    #[error("table extraction failed: {0}")]
    Extract(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("{0}")]
    Other(String),
}

/// One interval of the partition 𝓘, with optional exact endpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interval {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
}

/// The gap following the interval at the same index in the circular order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gap {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<bool>,
}

/// An atom of the partition: either V_s for an oriented stable letter s, or
/// U_v^e for a vertex v and an oriented edge e with o(e) = v. Oriented names
/// use a "-" prefix for the reversed orientation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub letter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<String>,
    pub intervals: Vec<String>,
    /// For nontrivial edge groups: the permutation of this atom's intervals
    /// under the edge-group generator, needed to verify invariance exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_action: Option<BTreeMap<String, String>>,
}

/// A transition-table entry for one (generator, interval) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    /// g(I) is contained in the single interval `target` (of some atom or a
    /// neutral interval); `exact` means the closures coincide.
    Contained { target: String, exact: bool },
    /// g(I) is Markovian: the union of the listed intervals and gaps,
    /// alternating I_0, J_1, I_1, …, J_m, I_m (consecutive in cyclic order).
    Markovian { list: Vec<String> },
}

#[derive(Clone, Debug)]
pub struct TableRow {
    pub gen: String,
    pub interval: String,
    pub entry: Entry,
}

/// A ping-pong scheme over a marked group.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub group: MarkedGroup,
    /// Intervals in circular (counterclockwise) order.
    pub intervals: Vec<Interval>,
    /// gaps[i] sits between intervals[i] and intervals[(i+1) % n].
    pub gaps: Vec<Gap>,
    pub atoms: Vec<Atom>,
    pub table: Vec<TableRow>,
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TableRowJson {
    gen: String,
    interval: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contained: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    markovian: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct SchemeJson {
    format: String,
    group: MarkedGroup,
    intervals: Vec<Interval>,
    gaps: Vec<Gap>,
    atoms: Vec<Atom>,
    table: Vec<TableRowJson>,
}

impl Scheme {
    pub fn to_json(&self) -> Result<String, SchemeError> {
        let atom_of = self.atom_of_interval();
        let table = self
            .table
            .iter()
            .map(|r| match &r.entry {
                Entry::Contained { target, exact } => TableRowJson {
                    gen: r.gen.clone(),
                    interval: r.interval.clone(),
                    contained: Some(
                        atom_of
                            .get(target.as_str())
                            .map(|a| a.to_string())
                            .unwrap_or_else(|| "neutral".into()),
                    ),
                    target: Some(target.clone()),
                    exact: Some(*exact),
                    markovian: None,
                },
                Entry::Markovian { list } => TableRowJson {
                    gen: r.gen.clone(),
                    interval: r.interval.clone(),
                    contained: None,
                    target: None,
                    exact: None,
                    markovian: Some(list.clone()),
                },
            })
            .collect();
        let doc = SchemeJson {
            format: SCHEME_FORMAT.into(),
            group: self.group.clone(),
            intervals: self.intervals.clone(),
            gaps: self.gaps.clone(),
            atoms: self.atoms.clone(),
            table,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Scheme, SchemeError> {
        let doc: SchemeJson = serde_json::from_str(s)?;
        if doc.format != SCHEME_FORMAT {
            return Err(SchemeError::Invalid(format!(
                "unknown format {:?} (expected {SCHEME_FORMAT:?})",
                doc.format
            )));
        }
        let table = doc
            .table
            .into_iter()
            .map(|r| {
                let entry = match (r.target, r.markovian) {
                    (Some(target), None) => Ok(Entry::Contained {
                        target,
                        exact: r.exact.unwrap_or(false),
                    }),
                    (None, Some(list)) => Ok(Entry::Markovian { list }),
                    _ => Err(SchemeError::Invalid(format!(
                        "table row ({}, {}): exactly one of target/markovian required",
                        r.gen, r.interval
                    ))),
                }?;
                Ok(TableRow {
                    gen: r.gen,
                    interval: r.interval,
                    entry,
                })
            })
            .collect::<Result<Vec<_>, SchemeError>>()?;
        let s = Scheme {
            group: doc.group,
            intervals: doc.intervals,
            gaps: doc.gaps,
            atoms: doc.atoms,
            table,
        };
        s.validate_structure()?;
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// Oriented edges and generator tokens
// ---------------------------------------------------------------------------

/// An edge with a chosen orientation; the reversed orientation of edge "e"
/// is named "-e".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientedEdge {
    pub name: String,
    pub base: String,
    pub o: String,
    pub t: String,
    pub order: u32,
    /// Exponent of the edge-group generator inside the vertex group at o.
    pub alpha: u32,
    pub tree: bool,
}

pub fn oriented_edges(g: &MarkedGroup) -> Vec<OrientedEdge> {
    let mut out = Vec::new();
    for e in &g.edges {
        out.push(OrientedEdge {
            name: e.name.clone(),
            base: e.name.clone(),
            o: e.from.clone(),
            t: e.to.clone(),
            order: e.order,
            alpha: e.alpha,
            tree: e.tree,
        });
        out.push(OrientedEdge {
            name: format!("-{}", e.name),
            base: e.name.clone(),
            o: e.to.clone(),
            t: e.from.clone(),
            order: e.order,
            alpha: e.omega,
            tree: e.tree,
        });
    }
    out
}

/// Token string for the vertex-group element a^k (k reduced, nonzero).
pub fn vertex_token(vertex: &str, k: u32) -> String {
    if k == 1 {
        vertex.to_string()
    } else {
        format!("{vertex}^{k}")
    }
}

/// All generator tokens required in a transition table: every nontrivial
/// vertex-group power and every oriented stable letter.
pub fn all_generator_tokens(g: &MarkedGroup) -> Vec<String> {
    let mut out = Vec::new();
    for v in &g.vertices {
        for k in 1..v.order {
            out.push(vertex_token(&v.name, k));
        }
    }
    for e in g.stable_letters() {
        out.push(e.name.clone());
        out.push(format!("-{}", e.name));
    }
    out
}

/// The exponents {j·gen mod q} of the cyclic subgroup generated by `gen`.
fn subgroup_exponents(q: u32, gen: u32) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    let mut x = 0u32;
    loop {
        if !out.insert(x) {
            break;
        }
        x = (x + gen) % q.max(1);
    }
    out
}

/// In the spanning tree minus the (tree) edge e, the set of vertices on the
/// t(e) side — exactly the v with e on the tree geodesic from o(e) to v.
fn half_tree(g: &MarkedGroup, e: &OrientedEdge) -> HashSet<String> {
    let mut reach = HashSet::new();
    reach.insert(e.t.clone());
    let mut frontier = vec![e.t.clone()];
    while let Some(v) = frontier.pop() {
        for te in g.edges.iter().filter(|te| te.tree) {
            if te.name == e.base {
                continue;
            }
            for (a, b) in [(&te.from, &te.to), (&te.to, &te.from)] {
                if *a == v && !reach.contains(b) {
                    reach.insert(b.clone());
                    frontier.push(b.clone());
                }
            }
        }
    }
    reach
}

// ---------------------------------------------------------------------------
// Structural validation and indexes
// ---------------------------------------------------------------------------

pub struct SchemeIndex<'a> {
    pub scheme: &'a Scheme,
    pub interval_pos: HashMap<&'a str, usize>,
    pub gap_pos: HashMap<&'a str, usize>,
    pub atom_by_id: HashMap<&'a str, &'a Atom>,
    pub atom_of_interval: HashMap<&'a str, &'a str>,
    pub entry: HashMap<(&'a str, &'a str), &'a Entry>,
}

impl Scheme {
    pub fn atom_of_interval(&self) -> HashMap<&str, &str> {
        let mut out = HashMap::new();
        for a in &self.atoms {
            for i in &a.intervals {
                out.insert(i.as_str(), a.id.as_str());
            }
        }
        out
    }

    pub fn index(&self) -> SchemeIndex<'_> {
        SchemeIndex {
            scheme: self,
            interval_pos: self
                .intervals
                .iter()
                .enumerate()
                .map(|(i, iv)| (iv.id.as_str(), i))
                .collect(),
            gap_pos: self
                .gaps
                .iter()
                .enumerate()
                .map(|(i, g)| (g.id.as_str(), i))
                .collect(),
            atom_by_id: self.atoms.iter().map(|a| (a.id.as_str(), a)).collect(),
            atom_of_interval: self.atom_of_interval(),
            entry: self
                .table
                .iter()
                .map(|r| ((r.gen.as_str(), r.interval.as_str()), &r.entry))
                .collect(),
        }
    }

    pub fn has_endpoints(&self) -> bool {
        self.intervals
            .iter()
            .all(|i| i.left.is_some() && i.right.is_some())
    }

    /// Exact endpoints of interval at position i, when present.
    pub fn endpoints(&self, i: usize) -> Result<(RationalPoint, RationalPoint), SchemeError> {
        let iv = &self.intervals[i];
        match (&iv.left, &iv.right) {
            (Some(l), Some(r)) => Ok((RationalPoint::parse(l)?, RationalPoint::parse(r)?)),
            _ => Err(SchemeError::MissingEndpoints),
        }
    }

    /// The open arc of interval i (requires endpoints).
    pub fn interval_arc(&self, i: usize) -> Result<Arc, SchemeError> {
        let (l, r) = self.endpoints(i)?;
        Ok(Arc::open(l, r)?)
    }

    /// Whether gap i is degenerate (a point). Uses endpoints if available,
    /// otherwise the declared flag.
    pub fn gap_is_degenerate(&self, i: usize) -> Option<bool> {
        if self.has_endpoints() {
            let n = self.intervals.len();
            let r = self.endpoints(i).ok()?.1;
            let l = self.endpoints((i + 1) % n).ok()?.0;
            Some(r == l)
        } else {
            self.gaps[i].degenerate
        }
    }

    /// Structural invariants: id uniqueness, gap/interval pairing, atom
    /// references, owner well-formedness, endpoint circular order.
    pub fn validate_structure(&self) -> Result<(), SchemeError> {
        let rep = validate_marked_group(&self.group);
        if !rep.is_valid() {
            return Err(SchemeError::Invalid(format!(
                "marked group invalid: {}",
                rep.failures.join("; ")
            )));
        }
        let n = self.intervals.len();
        if n == 0 {
            return Err(SchemeError::Invalid("no intervals".into()));
        }
        if self.gaps.len() != n {
            return Err(SchemeError::Invalid(format!(
                "{} gaps for {} intervals (need one gap after each interval)",
                self.gaps.len(),
                n
            )));
        }
        let mut ids = HashSet::new();
        for id in self
            .intervals
            .iter()
            .map(|i| &i.id)
            .chain(self.gaps.iter().map(|g| &g.id))
            .chain(self.atoms.iter().map(|a| &a.id))
        {
            if !ids.insert(id.as_str()) {
                return Err(SchemeError::Invalid(format!("duplicate id {id}")));
            }
        }
        let oedges = oriented_edges(&self.group);
        let mut seen_interval_in_atom: HashSet<&str> = HashSet::new();
        for a in &self.atoms {
            match (&a.letter, &a.vertex, &a.edge) {
                (Some(s), None, None) => {
                    let found = oedges.iter().any(|e| !e.tree && e.name == *s);
                    if !found {
                        return Err(SchemeError::Invalid(format!(
                            "atom {}: unknown stable letter {s}",
                            a.id
                        )));
                    }
                }
                (None, Some(v), Some(e)) => {
                    let found = oedges.iter().any(|oe| oe.name == *e && oe.o == *v);
                    if !found {
                        return Err(SchemeError::Invalid(format!(
                            "atom {}: no oriented edge {e} based at vertex {v}",
                            a.id
                        )));
                    }
                }
                // a vertex atom without a tree-edge subdivision (the X_v of
                // a vertex with no tree edges, as in an HNN extension)
                (None, Some(v), None) => {
                    if !self.group.vertices.iter().any(|vv| vv.name == *v) {
                        return Err(SchemeError::Invalid(format!(
                            "atom {}: unknown vertex {v}",
                            a.id
                        )));
                    }
                }
                _ => {
                    return Err(SchemeError::Invalid(format!(
                        "atom {}: owner must be a letter or a (vertex, edge) pair",
                        a.id
                    )))
                }
            }
            for i in &a.intervals {
                if !self.intervals.iter().any(|iv| iv.id == *i) {
                    return Err(SchemeError::Invalid(format!(
                        "atom {}: unknown interval {i}",
                        a.id
                    )));
                }
                if !seen_interval_in_atom.insert(i.as_str()) {
                    return Err(SchemeError::Invalid(format!(
                        "interval {i} belongs to more than one atom"
                    )));
                }
            }
        }
        // endpoints: all-or-none, circular order consistent with the listing
        let with_ep = self
            .intervals
            .iter()
            .filter(|i| i.left.is_some() && i.right.is_some())
            .count();
        if with_ep != 0 && with_ep != n {
            return Err(SchemeError::Invalid(
                "either all intervals carry endpoints or none".into(),
            ));
        }
        if with_ep == n {
            let base = self.endpoints(0)?.0;
            let mut prev = num::BigRational::from_integer(num::BigInt::from(-1));
            for i in 0..n {
                let (l, r) = self.endpoints(i)?;
                let dl = base.dist_ccw(&l);
                let dr = if r == base {
                    num::BigRational::from_integer(num::BigInt::from(1))
                } else {
                    base.dist_ccw(&r)
                };
                if dl < prev || dr <= dl {
                    return Err(SchemeError::Invalid(format!(
                        "interval {} out of circular order",
                        self.intervals[i].id
                    )));
                }
                prev = dr;
            }
            for i in 0..n {
                if let Some(flag) = self.gaps[i].degenerate {
                    if Some(flag) != self.gap_is_degenerate(i) {
                        return Err(SchemeError::Invalid(format!(
                            "gap {}: degeneracy flag contradicts endpoints",
                            self.gaps[i].id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Axiom checking
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
    Unverifiable(String),
    NotApplicable,
}

#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub verdicts: Vec<(String, Verdict)>,
}

impl AxiomReport {
    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn ok(&self, name: &str) -> bool {
        matches!(
            self.get(name),
            Some(Verdict::Pass) | Some(Verdict::NotApplicable)
        )
    }

    /// IF 1–8 and PPP 1–3 hold (PPP 1 may be unverifiable-free only).
    pub fn is_valid(&self) -> bool {
        (1..=8).all(|i| self.ok(&format!("IF{i}")))
            && (1..=3).all(|i| self.ok(&format!("PPP{i}")))
    }

    /// Additionally IF 9–11 hold.
    pub fn is_proper(&self) -> bool {
        self.is_valid() && (9..=11).all(|i| self.ok(&format!("IF{i}")))
    }

    pub fn failures(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter_map(|(n, v)| match v {
                Verdict::Fail(m) => Some(format!("{n}: {m}")),
                _ => None,
            })
            .collect()
    }
}

struct Family<'a> {
    /// X_v as interval-id sets, per vertex name.
    x: BTreeMap<String, BTreeSet<&'a str>>,
    /// Z_s per oriented stable letter name.
    z: BTreeMap<String, BTreeSet<&'a str>>,
    /// U_v^e per (vertex, oriented edge name).
    u: BTreeMap<(String, String), BTreeSet<&'a str>>,
}

fn build_family<'a>(s: &'a Scheme) -> Family<'a> {
    let mut fam = Family {
        x: BTreeMap::new(),
        z: BTreeMap::new(),
        u: BTreeMap::new(),
    };
    for v in &s.group.vertices {
        fam.x.insert(v.name.clone(), BTreeSet::new());
    }
    for e in oriented_edges(&s.group).iter().filter(|e| !e.tree) {
        fam.z.insert(e.name.clone(), BTreeSet::new());
    }
    for a in &s.atoms {
        let ids: BTreeSet<&str> = a.intervals.iter().map(|i| i.as_str()).collect();
        if let Some(l) = &a.letter {
            fam.z.insert(l.clone(), ids);
        } else if let Some(v) = &a.vertex {
            fam.x
                .entry(v.clone())
                .or_default()
                .extend(ids.iter().copied());
            if let Some(e) = &a.edge {
                fam.u.insert((v.clone(), e.clone()), ids);
            }
        }
    }
    fam
}

/// Symbolic containment g(src) ⊂ dst via the transition table. Returns an
/// error message on the first offending interval.
fn image_in(
    idx: &SchemeIndex<'_>,
    gen: &str,
    src: &BTreeSet<&str>,
    dst: &BTreeSet<&str>,
) -> Result<(), String> {
    for i in src {
        match idx.entry.get(&(gen, *i)) {
            None => return Err(format!("missing table entry ({gen}, {i})")),
            Some(Entry::Markovian { .. }) => {
                return Err(format!("{gen}({i}) is Markovian, not contained"))
            }
            Some(Entry::Contained { target, .. }) => {
                if !dst.contains(target.as_str()) {
                    return Err(format!("{gen}({i}) lands in {target}, outside the set"));
                }
            }
        }
    }
    Ok(())
}

/// Check all interactive-family and partition axioms. When a realization is
/// supplied (and the scheme has endpoints), every table entry is additionally
/// verified against exact arc images.
pub fn check_scheme(
    s: &Scheme,
    realization: Option<&HashMap<String, PLHomeo>>,
) -> Result<AxiomReport, SchemeError> {
    s.validate_structure()?;
    let idx = s.index();
    let fam = build_family(s);
    let oedges = oriented_edges(&s.group);
    let letters: Vec<&OrientedEdge> = oedges.iter().filter(|e| !e.tree).collect();
    let tree_edges: Vec<&OrientedEdge> = oedges.iter().filter(|e| e.tree).collect();
    let vorder = |name: &str| s.group.vertex(name).map(|v| v.order).unwrap_or(1);
    let mut verdicts: Vec<(String, Verdict)> = Vec::new();
    let push = |name: &str, v: Verdict, verdicts: &mut Vec<(String, Verdict)>| {
        verdicts.push((name.to_string(), v));
    };

    // pre-verify table against exact images when possible
    if let Some(real) = realization {
        if s.has_endpoints() {
            if let Err(e) = verify_table_realized(s, real) {
                return Err(e);
            }
        }
    }

    // --- IF 1 ---
    {
        let mut fails = Vec::new();
        // pairwise disjointness is enforced structurally (one atom per id);
        // here check nonemptiness requirements.
        for l in &letters {
            if fam.z.get(&l.name).map(|z| z.is_empty()).unwrap_or(true) {
                fails.push(format!("Z_{} is empty", l.name));
            }
        }
        for v in &s.group.vertices {
            let needs = oedges
                .iter()
                .any(|e| e.o == v.name && e.order != v.order.max(1));
            if needs && fam.x.get(&v.name).map(|x| x.is_empty()).unwrap_or(true) {
                fails.push(format!("X_{} must be nonempty", v.name));
            }
        }
        push(
            "IF1",
            if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 2: s(O) ⊂ Z_s for every family set O except Z_s̄ ---
    {
        let mut fails = Vec::new();
        for l in &letters {
            let z_s = &fam.z[&l.name];
            let sbar = flip_orientation(&l.name);
            for (vn, xv) in &fam.x {
                if xv.is_empty() {
                    continue;
                }
                if let Err(e) = image_in(&idx, &l.name, xv, z_s) {
                    fails.push(format!("{}(X_{vn}): {e}", l.name));
                }
            }
            for (tn, zt) in &fam.z {
                if *tn == sbar {
                    continue;
                }
                if let Err(e) = image_in(&idx, &l.name, zt, z_s) {
                    fails.push(format!("{}(Z_{tn}): {e}", l.name));
                }
            }
        }
        push(
            "IF2",
            if letters.is_empty() {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 3: α_s(A_s)(Z_s) ⊂ Z_s ---
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for l in &letters {
            let q = vorder(&l.o);
            for k in subgroup_exponents(q, l.alpha % q.max(1)) {
                if k == 0 {
                    continue;
                }
                applicable = true;
                let tok = vertex_token(&l.o, k);
                if let Err(e) = image_in(&idx, &tok, &fam.z[&l.name], &fam.z[&l.name]) {
                    fails.push(format!("{tok}(Z_{}): {e}", l.name));
                }
            }
        }
        push(
            "IF3",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 4: (G_{o(s)} ∖ α_s(A_s))(Z_s) ⊂ X_{o(s)} ---
    // Also records these images for IF 10 and PPP 1.
    let mut images_into_x: BTreeMap<String, Vec<(String, String, bool)>> = BTreeMap::new();
    // target interval → list of (element, source interval, exact)
    let record_image = |idx: &SchemeIndex<'_>,
                            gen: &str,
                            src: &BTreeSet<&str>,
                            images: &mut BTreeMap<String, Vec<(String, String, bool)>>| {
        for i in src {
            if let Some(Entry::Contained { target, exact }) = idx.entry.get(&(gen, *i)) {
                images
                    .entry(target.clone())
                    .or_default()
                    .push((gen.to_string(), i.to_string(), *exact));
            }
        }
    };
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for l in &letters {
            let q = vorder(&l.o);
            let sub = subgroup_exponents(q, l.alpha % q.max(1));
            for k in 1..q {
                if sub.contains(&k) {
                    continue;
                }
                applicable = true;
                let tok = vertex_token(&l.o, k);
                let xv = &fam.x[&l.o];
                if let Err(e) = image_in(&idx, &tok, &fam.z[&l.name], xv) {
                    fails.push(format!("{tok}(Z_{}): {e}", l.name));
                }
                record_image(&idx, &tok, &fam.z[&l.name], &mut images_into_x);
            }
        }
        push(
            "IF4",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 5: nonempty U_v^e for tree edges with G_v ≠ α_e(A_e) ---
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for e in &tree_edges {
            let q = vorder(&e.o);
            if e.order != q.max(1) {
                applicable = true;
                let key = (e.o.clone(), e.name.clone());
                if fam.u.get(&key).map(|u| u.is_empty()).unwrap_or(true) {
                    fails.push(format!("U_{}^{} missing or empty", e.o, e.name));
                }
            }
        }
        push(
            "IF5",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 6: α_e(A_e)(U_{o(e)}^e) ⊂ U_{o(e)}^e for tree edges ---
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for e in &tree_edges {
            let q = vorder(&e.o);
            let key = (e.o.clone(), e.name.clone());
            let Some(u) = fam.u.get(&key) else { continue };
            for k in subgroup_exponents(q, e.alpha % q.max(1)) {
                if k == 0 {
                    continue;
                }
                applicable = true;
                let tok = vertex_token(&e.o, k);
                if let Err(err) = image_in(&idx, &tok, u, u) {
                    fails.push(format!("{tok}(U_{}^{}): {err}", e.o, e.name));
                }
            }
        }
        push(
            "IF6",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 7: v ∈ C(e,T) ⇒ (G_{o(e)} ∖ α_e(A_e))(X_v) ⊂ U_{o(e)}^e ---
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for e in &tree_edges {
            let q = vorder(&e.o);
            let sub = subgroup_exponents(q, e.alpha % q.max(1));
            let far = half_tree(&s.group, e);
            let key = (e.o.clone(), e.name.clone());
            let empty = BTreeSet::new();
            let u = fam.u.get(&key).unwrap_or(&empty);
            for v in &far {
                let xv = &fam.x[v];
                if xv.is_empty() {
                    continue;
                }
                for k in 1..q {
                    if sub.contains(&k) {
                        continue;
                    }
                    applicable = true;
                    let tok = vertex_token(&e.o, k);
                    if let Err(err) = image_in(&idx, &tok, xv, u) {
                        fails.push(format!("{tok}(X_{v}): {err}"));
                    }
                    record_image(&idx, &tok, xv, &mut images_into_x);
                }
            }
        }
        push(
            "IF7",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 8: o(s) ∈ C(e,T) ⇒ (G_{o(e)} ∖ α_e(A_e))(Z_s) ⊂ U_{o(e)}^e ---
    {
        let mut fails = Vec::new();
        let mut applicable = false;
        for e in &tree_edges {
            let q = vorder(&e.o);
            let sub = subgroup_exponents(q, e.alpha % q.max(1));
            let far = half_tree(&s.group, e);
            let key = (e.o.clone(), e.name.clone());
            let empty = BTreeSet::new();
            let u = fam.u.get(&key).unwrap_or(&empty);
            for l in &letters {
                if !far.contains(&l.o) {
                    continue;
                }
                for k in 1..q {
                    if sub.contains(&k) {
                        continue;
                    }
                    applicable = true;
                    let tok = vertex_token(&e.o, k);
                    if let Err(err) = image_in(&idx, &tok, &fam.z[&l.name], u) {
                        fails.push(format!("{tok}(Z_{}): {err}", l.name));
                    }
                    record_image(&idx, &tok, &fam.z[&l.name], &mut images_into_x);
                }
            }
        }
        push(
            "IF8",
            if !applicable {
                Verdict::NotApplicable
            } else if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    // --- IF 9: faithfulness of edge-group restrictions ---
    {
        let mut applicable = false;
        let mut verdict = Verdict::Pass;
        'outer: for (set_name, set, edge) in letters
            .iter()
            .map(|l| (format!("Z_{}", l.name), &fam.z[&l.name], *l))
            .chain(tree_edges.iter().filter_map(|e| {
                fam.u
                    .get(&(e.o.clone(), e.name.clone()))
                    .map(|u| (format!("U_{}^{}", e.o, e.name), u, *e))
            }))
        {
            let q = vorder(&edge.o);
            for k in subgroup_exponents(q, edge.alpha % q.max(1)) {
                if k == 0 {
                    continue;
                }
                applicable = true;
                let tok = vertex_token(&edge.o, k);
                // symbolically faithful if the element visibly moves an
                // interval of the set
                let moves = set.iter().any(|i| {
                    matches!(idx.entry.get(&(tok.as_str(), *i)),
                        Some(Entry::Contained { target, .. }) if target != i)
                });
                if moves {
                    continue;
                }
                if let (Some(real), true) = (realization, s.has_endpoints()) {
                    let f = realize_token_str(real, &tok)?;
                    let nontrivial = set.iter().any(|i| {
                        let pos = idx.interval_pos[*i];
                        let arc = s.interval_arc(pos).unwrap();
                        f.apply(&arc.left) != arc.left
                            || f.min_slope_on_arc(&arc) != num::BigRational::from_integer(1.into())
                    });
                    if !nontrivial {
                        verdict = Verdict::Fail(format!(
                            "{tok} acts trivially on {set_name}"
                        ));
                        break 'outer;
                    }
                } else {
                    verdict = Verdict::Unverifiable(format!(
                        "cannot decide faithfulness of {tok} on {set_name} symbolically"
                    ));
                    break 'outer;
                }
            }
        }
        push(
            "IF9",
            if !applicable { Verdict::NotApplicable } else { verdict },
            &mut verdicts,
        );
    }

    // --- IF 10: some X_w misses a point of the recorded images ---
    {
        let any_x = fam.x.values().any(|x| !x.is_empty());
        if !any_x {
            push("IF10", Verdict::NotApplicable, &mut verdicts);
        } else {
            let mut verdict = Verdict::Fail(
                "every interval of every nonempty X_w is exactly covered".into(),
            );
            'w: for (_vn, xv) in &fam.x {
                if xv.is_empty() {
                    continue;
                }
                for t in xv {
                    let hits = images_into_x.get(*t);
                    match hits {
                        None => {
                            verdict = Verdict::Pass;
                            break 'w;
                        }
                        Some(hs) => {
                            if hs.iter().any(|(_, _, exact)| *exact) {
                                continue;
                            }
                            // strict images of disjoint intervals under one
                            // element are disjoint open arcs: they cannot
                            // cover a connected interval
                            let gens: BTreeSet<&str> =
                                hs.iter().map(|(g, _, _)| g.as_str()).collect();
                            if gens.len() == 1 {
                                verdict = Verdict::Pass;
                                break 'w;
                            }
                            if let (Some(real), true) = (realization, s.has_endpoints()) {
                                // exact coverage test of interval t
                                if !covered_exactly(s, &idx, real, t, hs)? {
                                    verdict = Verdict::Pass;
                                    break 'w;
                                }
                            } else {
                                verdict = Verdict::Unverifiable(format!(
                                    "coverage of {t} by several elements undecidable symbolically"
                                ));
                            }
                        }
                    }
                }
            }
            push("IF10", verdict, &mut verdicts);
        }
    }

    // --- IF 11: the S = {s, s̄}, all X_v empty case ---
    {
        let all_x_empty = fam.x.values().all(|x| x.is_empty());
        let single_letter = letters.len() == 2
            && letters[0].base == letters[1].base;
        if !(all_x_empty && single_letter) {
            push("IF11", Verdict::NotApplicable, &mut verdicts);
        } else if let (Some(real), true) = (realization, s.has_endpoints()) {
            let sname = &letters[0].name;
            let sbar = &letters[1].name;
            let fs = realize_token_str(real, sname)?;
            let fsb = realize_token_str(real, sbar)?;
            let z_s = &fam.z[sname];
            let z_sb = &fam.z[sbar];
            let in_set = |p: &RationalPoint, set: &BTreeSet<&str>| -> bool {
                set.iter().any(|i| {
                    let pos = idx.interval_pos[*i];
                    s.interval_arc(pos).map(|a| a.contains(p)).unwrap_or(false)
                })
            };
            let mut found = false;
            for (i, g) in s.gaps.iter().enumerate() {
                let _ = g;
                if self_gap_nondegenerate(s, i) {
                    let n = s.intervals.len();
                    let l = s.endpoints(i).unwrap().1;
                    let r = s.endpoints((i + 1) % n).unwrap().0;
                    let mid = RationalPoint::new(
                        l.value() + l.dist_ccw(&r) / num::BigRational::from_integer(2.into()),
                    );
                    if !in_set(&mid, z_s)
                        && !in_set(&mid, z_sb)
                        && in_set(&fs.apply(&mid), z_s)
                        && in_set(&fsb.apply(&mid), z_sb)
                    {
                        found = true;
                        break;
                    }
                }
            }
            push(
                "IF11",
                if found {
                    Verdict::Pass
                } else {
                    Verdict::Fail("no witness point found among gap midpoints".into())
                },
                &mut verdicts,
            );
        } else {
            push(
                "IF11",
                Verdict::Unverifiable("needs a realization with endpoints".into()),
                &mut verdicts,
            );
        }
    }

    // --- PPP 1 ---
    {
        let mut fails = Vec::new();
        let mut unverifiable = Vec::new();
        // strengthening of IF4: (G_v ∖ α_s(A_s))(V_s) ⊂ U_v^s specifically
        for l in &letters {
            let q = vorder(&l.o);
            let sub = subgroup_exponents(q, l.alpha % q.max(1));
            let key = (l.o.clone(), l.name.clone());
            let empty = BTreeSet::new();
            let u_vs = fam.u.get(&key).unwrap_or(&empty);
            for k in 1..q {
                if sub.contains(&k) {
                    continue;
                }
                let tok = vertex_token(&l.o, k);
                if let Err(e) = image_in(&idx, &tok, &fam.z[&l.name], u_vs) {
                    fails.push(format!("{tok}(V_{}) must lie in U_{}^{}: {e}", l.name, l.o, l.name));
                }
            }
            // α_s(A_s)(U_v^s) = U_v^s
            if l.order > 1 {
                if let Some(atom) = s
                    .atoms
                    .iter()
                    .find(|a| a.vertex.as_deref() == Some(&l.o) && a.edge.as_deref() == Some(&l.name))
                {
                    match &atom.edge_action {
                        Some(perm) => {
                            let dom: BTreeSet<&String> = perm.keys().collect();
                            let img: BTreeSet<&String> = perm.values().collect();
                            let ids: BTreeSet<&String> = atom.intervals.iter().collect();
                            if dom != ids || img != ids {
                                fails.push(format!(
                                    "atom {}: edge_action is not a permutation of its intervals",
                                    atom.id
                                ));
                            }
                            let tok = vertex_token(&l.o, l.alpha % q.max(1));
                            for (from, to) in perm {
                                match idx.entry.get(&(tok.as_str(), from.as_str())) {
                                    Some(Entry::Contained { target, exact: true })
                                        if target == to => {}
                                    _ => fails.push(format!(
                                        "atom {}: table does not realize edge_action {from}→{to} under {tok}",
                                        atom.id
                                    )),
                                }
                            }
                        }
                        None => unverifiable.push(format!(
                            "atom {}: α_s(A_s)-invariance needs an edge_action annotation",
                            atom.id
                        )),
                    }
                }
            }
        }
        push(
            "PPP1",
            if !fails.is_empty() {
                Verdict::Fail(fails.join("; "))
            } else if !unverifiable.is_empty() {
                Verdict::Unverifiable(unverifiable.join("; "))
            } else {
                Verdict::Pass
            },
            &mut verdicts,
        );
    }

    // --- PPP 2: atoms are finite unions of intervals (by representation) ---
    push("PPP2", Verdict::Pass, &mut verdicts);

    // --- PPP 3: complete, well-formed table ---
    {
        let mut fails = Vec::new();
        let gens = all_generator_tokens(&s.group);
        for g in &gens {
            for iv in &s.intervals {
                match idx.entry.get(&(g.as_str(), iv.id.as_str())) {
                    None => fails.push(format!("incomplete table: missing ({g}, {})", iv.id)),
                    Some(Entry::Contained { target, .. }) => {
                        if !idx.interval_pos.contains_key(target.as_str()) {
                            fails.push(format!("({g}, {}): unknown target {target}", iv.id));
                        }
                    }
                    Some(Entry::Markovian { list }) => {
                        if let Err(e) = validate_markovian_list(&idx, list) {
                            fails.push(format!("({g}, {}): {e}", iv.id));
                        }
                    }
                }
            }
        }
        for r in &s.table {
            if !gens.contains(&r.gen) {
                fails.push(format!("unknown generator token {}", r.gen));
            }
            if !idx.interval_pos.contains_key(r.interval.as_str()) {
                fails.push(format!("table row on unknown interval {}", r.interval));
            }
        }
        push(
            "PPP3",
            if fails.is_empty() {
                Verdict::Pass
            } else {
                Verdict::Fail(fails.join("; "))
            },
            &mut verdicts,
        );
    }

    Ok(AxiomReport { verdicts })
}

fn self_gap_nondegenerate(s: &Scheme, i: usize) -> bool {
    s.gap_is_degenerate(i) == Some(false)
}

pub fn flip_orientation(name: &str) -> String {
    match name.strip_prefix('-') {
        Some(b) => b.to_string(),
        None => format!("-{name}"),
    }
}

/// Markovian lists must alternate interval, gap, interval, … with m ≥ 1 and
/// be circularly consecutive.
fn validate_markovian_list(idx: &SchemeIndex<'_>, list: &[String]) -> Result<(), String> {
    if list.len() < 3 || list.len() % 2 == 0 {
        return Err(format!(
            "markovian list must alternate I,J,…,I with m ≥ 1 (got {} entries)",
            list.len()
        ));
    }
    let n = idx.scheme.intervals.len();
    let mut expected_interval: Option<usize> = None;
    for (j, id) in list.iter().enumerate() {
        if j % 2 == 0 {
            let Some(&p) = idx.interval_pos.get(id.as_str()) else {
                return Err(format!("unknown interval {id}"));
            };
            if let Some(exp) = expected_interval {
                if p != exp {
                    return Err(format!("list not circularly consecutive at {id}"));
                }
            }
            expected_interval = Some((p + 1) % n);
            // the next gap (if any) must be the gap after this interval
            if j + 1 < list.len() {
                let gid = &list[j + 1];
                match idx.gap_pos.get(gid.as_str()) {
                    Some(&gp) if gp == p => {}
                    Some(_) => {
                        return Err(format!("gap {gid} is not the gap after {id}"))
                    }
                    None => return Err(format!("unknown gap {gid}")),
                }
            }
        }
    }
    Ok(())
}

/// Realize a single generator token ("a", "a^2", "s", "-s") from the base
/// generator maps.
pub fn realize_token_str(
    real: &HashMap<String, PLHomeo>,
    tok: &str,
) -> Result<PLHomeo, SchemeError> {
    // tokens: "name", "name^k", "-name"
    let (inv, body) = match tok.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, tok),
    };
    let (base, k) = match body.split_once('^') {
        Some((b, e)) => (
            b,
            e.parse::<i64>()
                .map_err(|_| SchemeError::Other(format!("bad token {tok}")))?,
        ),
        None => (body, 1),
    };
    let f = real
        .get(base)
        .ok_or_else(|| SchemeError::Other(format!("missing realization for {base}")))?;
    let p = crate::arith::pl_power(f, k);
    Ok(if inv { crate::arith::pl_invert(&p) } else { p })
}

/// Exact coverage test for IF 10: do the recorded images cover all of the
/// open interval `t`?
fn covered_exactly(
    s: &Scheme,
    idx: &SchemeIndex<'_>,
    real: &HashMap<String, PLHomeo>,
    t: &str,
    hits: &[(String, String, bool)],
) -> Result<bool, SchemeError> {
    let tpos = idx.interval_pos[t];
    let (tl, tr) = s.endpoints(tpos)?;
    let mut arcs: Vec<(num::BigRational, num::BigRational)> = Vec::new();
    for (gen, src, _) in hits {
        let f = realize_token_str(real, gen)?;
        let spos = idx.interval_pos[src.as_str()];
        let (l, r) = s.endpoints(spos)?;
        let il = f.apply(&l);
        let ir = f.apply(&r);
        arcs.push((tl.dist_ccw(&il), tl.dist_ccw(&ir)));
    }
    arcs.sort();
    // sweep from 0 to len(t): covered iff the open arcs chain without holes
    let len = tl.dist_ccw(&tr);
    let mut reach = num::BigRational::from_integer(0.into());
    for (a, b) in arcs {
        if a > reach {
            return Ok(false); // hole (an uncovered point at `reach`..a)
        }
        if b > reach {
            reach = b;
        }
    }
    Ok(reach >= len)
}

/// Verify every table row against exact arc images of a realization.
pub fn verify_table_realized(
    s: &Scheme,
    real: &HashMap<String, PLHomeo>,
) -> Result<(), SchemeError> {
    let idx = s.index();
    let n = s.intervals.len();
    for r in &s.table {
        let f = realize_token_str(real, &r.gen)?;
        let pos = *idx
            .interval_pos
            .get(r.interval.as_str())
            .ok_or_else(|| SchemeError::Invalid(format!("unknown interval {}", r.interval)))?;
        let (l, rt) = s.endpoints(pos)?;
        let il = f.apply(&l);
        let ir = f.apply(&rt);
        match &r.entry {
            Entry::Contained { target, exact } => {
                let tpos = idx.interval_pos[target.as_str()];
                let (tl, tr) = s.endpoints(tpos)?;
                let tlen = tl.dist_ccw(&tr);
                let a = tl.dist_ccw(&il);
                let b = if ir == tl { num::BigRational::from_integer(0.into()) } else { tl.dist_ccw(&ir) };
                let inside = a <= b && b <= tlen && !(il == tr && ir != tr);
                if !inside {
                    return Err(SchemeError::Invalid(format!(
                        "row ({}, {}): image ({il}, {ir}) not inside {target}",
                        r.gen, r.interval
                    )));
                }
                let is_exact = il == tl && ir == tr;
                if is_exact != *exact {
                    return Err(SchemeError::Invalid(format!(
                        "row ({}, {}): exactness flag is {} but image is {}",
                        r.gen,
                        r.interval,
                        exact,
                        if is_exact { "exact" } else { "strict" }
                    )));
                }
            }
            Entry::Markovian { list } => {
                validate_markovian_list(&idx, list)
                    .map_err(|e| SchemeError::Invalid(format!("row ({}, {}): {e}", r.gen, r.interval)))?;
                let first = idx.interval_pos[list[0].as_str()];
                let last = idx.interval_pos[list[list.len() - 1].as_str()];
                let (fl, _) = s.endpoints(first)?;
                let (_, lr) = s.endpoints(last)?;
                if il != fl || ir != lr {
                    return Err(SchemeError::Invalid(format!(
                        "row ({}, {}): image ({il}, {ir}) does not span {} … {}",
                        r.gen,
                        r.interval,
                        list[0],
                        list[list.len() - 1]
                    )));
                }
                let _ = n;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Table extraction from a realization
// ---------------------------------------------------------------------------

/// Compute the full transition table of a realized scheme layout from exact
/// arc images: every generator token (all vertex powers and oriented stable
/// letters) on every interval.
pub fn extract_table(
    s: &Scheme,
    real: &HashMap<String, PLHomeo>,
) -> Result<Vec<TableRow>, SchemeError> {
    if !s.has_endpoints() {
        return Err(SchemeError::MissingEndpoints);
    }
    let n = s.intervals.len();
    let mut lefts: Vec<RationalPoint> = Vec::with_capacity(n);
    let mut rights: Vec<RationalPoint> = Vec::with_capacity(n);
    for i in 0..n {
        let (l, r) = s.endpoints(i)?;
        lefts.push(l);
        rights.push(r);
    }
    let mut rows = Vec::new();
    for gen in all_generator_tokens(&s.group) {
        let f = realize_token_str(real, &gen)?;
        for i in 0..n {
            let il = f.apply(&lefts[i]);
            let ir = f.apply(&rights[i]);
            let entry = classify_image(s, &lefts, &rights, &il, &ir).map_err(|e| {
                SchemeError::Extract(format!(
                    "({gen}, {}): image ({il}, {ir}) {e}",
                    s.intervals[i].id
                ))
            })?;
            rows.push(TableRow {
                gen: gen.clone(),
                interval: s.intervals[i].id.clone(),
                entry,
            });
        }
    }
    Ok(rows)
}

fn classify_image(
    s: &Scheme,
    lefts: &[RationalPoint],
    rights: &[RationalPoint],
    il: &RationalPoint,
    ir: &RationalPoint,
) -> Result<Entry, String> {
    let n = lefts.len();
    // exact or strict containment in a single interval
    for t in 0..n {
        let tlen = lefts[t].dist_ccw(&rights[t]);
        let a = lefts[t].dist_ccw(il);
        let b = lefts[t].dist_ccw(ir);
        if a <= b && b <= tlen && !(a.is_integer() && *il != lefts[t]) {
            let exact = *il == lefts[t] && *ir == rights[t];
            return Ok(Entry::Contained {
                target: s.intervals[t].id.clone(),
                exact,
            });
        }
    }
    // Markovian: starts at the left endpoint of some interval and ends at
    // the right endpoint of a (cyclically) later one
    let i0 = (0..n).find(|&t| lefts[t] == *il);
    let im = (0..n).find(|&t| rights[t] == *ir);
    if let (Some(i0), Some(im)) = (i0, im) {
        if i0 != im {
            let mut list = Vec::new();
            let mut t = i0;
            loop {
                list.push(s.intervals[t].id.clone());
                if t == im {
                    break;
                }
                list.push(s.gaps[t].id.clone());
                t = (t + 1) % n;
                if list.len() > 2 * n {
                    return Err("does not close up as a Markovian union".into());
                }
            }
            return Ok(Entry::Markovian { list });
        }
    }
    Err("is neither contained in an interval nor Markovian".into())
}

// ---------------------------------------------------------------------------
// Equivalence
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EquivalenceMap {
    /// interval id in the first scheme → interval id in the second.
    pub pairs: Vec<(String, String)>,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub enum EquivalenceResult {
    Equivalent(EquivalenceMap),
    NotEquivalent(String),
}

impl EquivalenceResult {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivalenceResult::Equivalent(_))
    }
}

/// Search for a ping-pong equivalence between two schemes over the same
/// marked group: a cyclic-order-preserving bijection of intervals matching
/// every containment (with exactness) and every Markovian decomposition.
pub fn check_equivalence(s1: &Scheme, s2: &Scheme) -> Result<EquivalenceResult, SchemeError> {
    let g1 = all_generator_tokens(&s1.group);
    let g2 = all_generator_tokens(&s2.group);
    if g1 != g2 {
        return Ok(EquivalenceResult::NotEquivalent(
            "different marked groups / generator sets".into(),
        ));
    }
    let n = s1.intervals.len();
    if n != s2.intervals.len() {
        return Ok(EquivalenceResult::NotEquivalent(format!(
            "different interval counts ({n} vs {})",
            s2.intervals.len()
        )));
    }
    let idx1 = s1.index();
    let idx2 = s2.index();
    let mut last_reason = String::new();
    'offsets: for off in 0..n {
        let theta_i = |i: usize| (i + off) % n;
        for r in &s1.table {
            let i1 = idx1.interval_pos[r.interval.as_str()];
            let mapped_interval = &s2.intervals[theta_i(i1)].id;
            let Some(e2) = idx2
                .entry
                .get(&(r.gen.as_str(), mapped_interval.as_str()))
            else {
                last_reason = format!(
                    "offset {off}: no entry for ({}, {mapped_interval}) in second scheme",
                    r.gen
                );
                continue 'offsets;
            };
            let matches = match (&r.entry, e2) {
                (
                    Entry::Contained { target: t1, exact: x1 },
                    Entry::Contained { target: t2, exact: x2 },
                ) => {
                    let tp = idx1.interval_pos[t1.as_str()];
                    s2.intervals[theta_i(tp)].id == *t2 && x1 == x2
                }
                (Entry::Markovian { list: l1 }, Entry::Markovian { list: l2 }) => {
                    l1.len() == l2.len()
                        && l1.iter().zip(l2).enumerate().all(|(j, (a, b))| {
                            if j % 2 == 0 {
                                let p = idx1.interval_pos[a.as_str()];
                                s2.intervals[theta_i(p)].id == *b
                            } else {
                                let p = idx1.gap_pos[a.as_str()];
                                s2.gaps[theta_i(p)].id == *b
                            }
                        })
                }
                _ => false,
            };
            if !matches {
                last_reason = format!(
                    "offset {off}: relation ({}, {}) not preserved",
                    r.gen, r.interval
                );
                continue 'offsets;
            }
        }
        let pairs = (0..n)
            .map(|i| {
                (
                    s1.intervals[i].id.clone(),
                    s2.intervals[theta_i(i)].id.clone(),
                )
            })
            .collect();
        return Ok(EquivalenceResult::Equivalent(EquivalenceMap {
            pairs,
            offset: off,
        }));
    }
    Ok(EquivalenceResult::NotEquivalent(if last_reason.is_empty() {
        "no anchored cyclic bijection matches".into()
    } else {
        last_reason
    }))
}

// ---------------------------------------------------------------------------
// Refinement Δ_k
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct RefinementState {
    pub level: u32,
    /// Sorted endpoint set Δ_level.
    pub delta: Vec<RationalPoint>,
    /// Set when the endpoint cap was hit; `delta` is then a partial result.
    pub truncated: bool,
}

impl RefinementState {
    /// The complementary arcs of Δ as consecutive point pairs.
    pub fn arcs(&self) -> Vec<(RationalPoint, RationalPoint)> {
        let n = self.delta.len();
        (0..n)
            .map(|i| (self.delta[i].clone(), self.delta[(i + 1) % n].clone()))
            .collect()
    }
}

/// Δ_0 = the scheme's interval endpoints; Δ_k = Δ_{k−1} ∪ 𝒢(Δ_{k−1}),
/// computed exactly through the realization.
pub fn refine(
    s: &Scheme,
    real: &HashMap<String, PLHomeo>,
    k: u32,
    cap: usize,
) -> Result<RefinementState, SchemeError> {
    if !s.has_endpoints() {
        return Err(SchemeError::MissingEndpoints);
    }
    let mut delta: BTreeSet<RationalPoint> = BTreeSet::new();
    for i in 0..s.intervals.len() {
        let (l, r) = s.endpoints(i)?;
        delta.insert(l);
        delta.insert(r);
    }
    let gens: Vec<PLHomeo> = all_generator_tokens(&s.group)
        .iter()
        .map(|t| realize_token_str(real, t))
        .collect::<Result<_, _>>()?;
    let mut truncated = false;
    let mut level = 0;
    'levels: for _ in 0..k {
        let prev: Vec<RationalPoint> = delta.iter().cloned().collect();
        for f in &gens {
            for p in &prev {
                delta.insert(f.apply(p));
                if delta.len() > cap {
                    truncated = true;
                    break 'levels;
                }
            }
        }
        level += 1;
    }
    Ok(RefinementState {
        level,
        delta: delta.into_iter().collect(),
        truncated,
    })
}

// ---------------------------------------------------------------------------
// Gap orbits
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GapOrbits {
    pub count: usize,
    /// Orbits as sorted lists of gap ids.
    pub orbits: Vec<Vec<String>>,
}

/// One-sided determination of a gap's image under a generator.
enum SideImage {
    /// The image gap is known exactly.
    Definite(usize),
    /// The flanking interval's image lies strictly inside this interval.
    Inside(usize),
    Unknown(String),
}

/// Orbits of the gaps under the symbolic gap action of the transition table.
pub fn gap_orbits(s: &Scheme) -> Result<GapOrbits, SchemeError> {
    let idx = s.index();
    let n = s.intervals.len();
    let gens = all_generator_tokens(&s.group);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    for j in 0..n {
        // gap j lies between interval j (left) and interval j+1 (right)
        let left_iv = &s.intervals[j].id;
        let right_iv = &s.intervals[(j + 1) % n].id;
        for g in &gens {
            let from_left = match idx.entry.get(&(g.as_str(), left_iv.as_str())) {
                Some(Entry::Markovian { list }) => {
                    let last = idx.interval_pos[list[list.len() - 1].as_str()];
                    SideImage::Definite(last) // gap after the last interval
                }
                Some(Entry::Contained { target, exact: true }) => {
                    SideImage::Definite(idx.interval_pos[target.as_str()])
                }
                Some(Entry::Contained { target, exact: false }) => {
                    SideImage::Inside(idx.interval_pos[target.as_str()])
                }
                None => SideImage::Unknown(format!("missing entry ({g}, {left_iv})")),
            };
            let from_right = match idx.entry.get(&(g.as_str(), right_iv.as_str())) {
                Some(Entry::Markovian { list }) => {
                    let first = idx.interval_pos[list[0].as_str()];
                    // gap before the first interval = gap after its predecessor
                    SideImage::Definite((first + n - 1) % n)
                }
                Some(Entry::Contained { target, exact: true }) => {
                    SideImage::Definite((idx.interval_pos[target.as_str()] + n - 1) % n)
                }
                Some(Entry::Contained { target, exact: false }) => {
                    SideImage::Inside(idx.interval_pos[target.as_str()])
                }
                None => SideImage::Unknown(format!("missing entry ({g}, {right_iv})")),
            };
            let image_gap = match (from_left, from_right) {
                (SideImage::Definite(a), SideImage::Definite(b)) => {
                    if a != b {
                        return Err(SchemeError::AmbiguousGap(format!(
                            "{} under {g}: sides disagree ({} vs {})",
                            s.gaps[j].id, s.gaps[a].id, s.gaps[b].id
                        )));
                    }
                    Some(a)
                }
                (SideImage::Definite(a), SideImage::Inside(_))
                | (SideImage::Inside(_), SideImage::Definite(a)) => Some(a),
                (SideImage::Inside(t1), SideImage::Inside(t2)) => {
                    if t1 == t2 {
                        None // the gap lands in the interior of one interval
                    } else if (t1 + 1) % n == t2 {
                        Some(t1) // the gap between adjacent targets
                    } else {
                        return Err(SchemeError::AmbiguousGap(format!(
                            "{} under {g}: flanking images in non-adjacent intervals {} and {}",
                            s.gaps[j].id, s.intervals[t1].id, s.intervals[t2].id
                        )));
                    }
                }
                (SideImage::Unknown(e), _) | (_, SideImage::Unknown(e)) => {
                    return Err(SchemeError::AmbiguousGap(format!(
                        "{} under {g}: {e}",
                        s.gaps[j].id
                    )))
                }
            };
            if let Some(tgt) = image_gap {
                let (ra, rb) = (find(&mut parent, j), find(&mut parent, tgt));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for j in 0..n {
        let r = find(&mut parent, j);
        groups.entry(r).or_default().push(s.gaps[j].id.clone());
    }
    let orbits: Vec<Vec<String>> = groups.into_values().collect();
    Ok(GapOrbits {
        count: orbits.len(),
        orbits,
    })
}

/// Small schemes shared by unit tests across modules.
#[cfg(test)]
pub mod test_fixtures {
    use super::*;
    use crate::groups::{free_product_of_cyclics, Edge};

    /// PSL(2,Z)-shaped scheme: Z_3 * Z_2 acting with three intervals.
    pub fn mini_farey() -> Scheme {
        let mut group = free_product_of_cyclics(&[("a", 3), ("b", 2)]);
        group.edges = vec![Edge {
            name: "e".into(),
            from: "a".into(),
            to: "b".into(),
            order: 1,
            alpha: 0,
            omega: 0,
            tree: true,
        }];
        let iv = |id: &str, l: &str, r: &str| Interval {
            id: id.into(),
            left: Some(l.into()),
            right: Some(r.into()),
        };
        let gp = |id: &str| Gap {
            id: id.into(),
            degenerate: Some(true),
        };
        let c = |g: &str, i: &str, t: &str, x: bool| TableRow {
            gen: g.into(),
            interval: i.into(),
            entry: Entry::Contained {
                target: t.into(),
                exact: x,
            },
        };
        Scheme {
            group,
            intervals: vec![iv("I1", "0", "1/2"), iv("I2", "1/2", "3/4"), iv("Ub", "3/4", "1")],
            gaps: vec![gp("j1"), gp("j2"), gp("j3")],
            atoms: vec![
                Atom {
                    id: "Ua".into(),
                    letter: None,
                    vertex: Some("a".into()),
                    edge: Some("e".into()),
                    intervals: vec!["I1".into(), "I2".into()],
                    edge_action: None,
                },
                Atom {
                    id: "UB".into(),
                    letter: None,
                    vertex: Some("b".into()),
                    edge: Some("-e".into()),
                    intervals: vec!["Ub".into()],
                    edge_action: None,
                },
            ],
            table: vec![
                c("a", "I1", "I2", true),
                c("a", "I2", "Ub", true),
                c("a", "Ub", "I1", true),
                c("a^2", "I1", "Ub", true),
                c("a^2", "I2", "I1", true),
                c("a^2", "Ub", "I2", true),
                c("b", "I1", "Ub", false),
                c("b", "I2", "Ub", false),
                TableRow {
                    gen: "b".into(),
                    interval: "Ub".into(),
                    entry: Entry::Markovian {
                        list: vec!["I1".into(), "j1".into(), "I2".into()],
                    },
                },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::test_fixtures::mini_farey;
    use crate::groups::free_product_of_cyclics;

    #[test]
    fn farey_axioms_pass() {
        let s = mini_farey();
        let rep = check_scheme(&s, None).unwrap();
        for (name, v) in &rep.verdicts {
            assert!(
                matches!(v, Verdict::Pass | Verdict::NotApplicable),
                "{name}: {v:?}"
            );
        }
        assert!(rep.is_valid());
        assert!(rep.is_proper());
    }

    #[test]
    fn farey_broken_fails() {
        let mut s = mini_farey();
        // redirect a(Ub) back into U_b: IF7 violation
        for r in &mut s.table {
            if r.gen == "a" && r.interval == "Ub" {
                r.entry = Entry::Contained {
                    target: "Ub".into(),
                    exact: false,
                };
            }
        }
        let rep = check_scheme(&s, None).unwrap();
        assert!(!rep.is_valid());
    }

    #[test]
    fn incomplete_table_reported() {
        let mut s = mini_farey();
        s.table.pop();
        let rep = check_scheme(&s, None).unwrap();
        match rep.get("PPP3") {
            Some(Verdict::Fail(m)) => assert!(m.contains("incomplete table"), "{m}"),
            other => panic!("expected PPP3 failure, got {other:?}"),
        }
    }

    #[test]
    fn farey_gap_orbits() {
        let s = mini_farey();
        let orb = gap_orbits(&s).unwrap();
        assert_eq!(orb.count, 1);
        assert_eq!(orb.orbits[0].len(), 3);
    }

    #[test]
    fn json_roundtrip() {
        let s = mini_farey();
        let j = s.to_json().unwrap();
        let s2 = Scheme::from_json(&j).unwrap();
        assert!(check_equivalence(&s, &s2).unwrap().is_equivalent());
        assert_eq!(s2.table.len(), s.table.len());
    }

    #[test]
    fn equivalence_reflexive_and_rotation() {
        let s = mini_farey();
        match check_equivalence(&s, &s).unwrap() {
            EquivalenceResult::Equivalent(m) => assert_eq!(m.offset, 0),
            other => panic!("{other:?}"),
        }
        // different group shape → not equivalent
        let mut other = mini_farey();
        other.group = free_product_of_cyclics(&[("a", 3), ("b", 3)]);
        assert!(!check_equivalence(&s, &other).unwrap().is_equivalent());
    }

    #[test]
    fn markovian_list_validation() {
        let s = mini_farey();
        let idx = s.index();
        assert!(validate_markovian_list(
            &idx,
            &["I1".into(), "j1".into(), "I2".into()]
        )
        .is_ok());
        assert!(validate_markovian_list(&idx, &["I1".into(), "j2".into(), "I2".into()]).is_err());
        assert!(validate_markovian_list(&idx, &["I1".into(), "j1".into()]).is_err());
        assert!(
            validate_markovian_list(&idx, &["I2".into(), "j2".into(), "I1".into()]).is_err()
        );
        // wrap-around list is fine
        assert!(validate_markovian_list(
            &idx,
            &["Ub".into(), "j3".into(), "I1".into()]
        )
        .is_ok());
    }
}
