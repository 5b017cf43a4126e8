//! Bundled example schemes: a gallery of ping-pong partitions covering every
//! supported group shape (free products of cyclics, an amalgam, HNN
//! extensions over trivial and nontrivial edge groups, free groups with
//! Cantor, minimal and exceptional dynamics).
//!
//! Each fixture is built from a small hand-written base table holding the
//! exact and Markovian rows that pin the realization; the generator maps are
//! then constructed from those pins and the full transition table is
//! extracted back from the maps. `farey-broken` is the completed Farey
//! scheme with one table row removed — a deliberate PPP 3 violation used to
//! exercise the failure path of `check`.

use std::collections::{BTreeMap, HashMap};

use crate::arith::{PLHomeo, Piece, Rational, RationalPoint};
use crate::groups::{free_group, free_product_of_cyclics, Edge, MarkedGroup, Vertex};
use crate::scheme::{extract_table, Atom, Entry, Gap, Interval, Scheme, TableRow};

/// Names of all bundled fixtures, in presentation order.
pub const FIXTURE_NAMES: &[&str] = &[
    "farey",
    "sl2z",
    "z3z4z5",
    "hnn-z3",
    "hnn-z6z2",
    "schottky",
    "schottky-with-j",
    "schottky-minimal",
    "mmrt",
    "exotic1",
    "exotic2",
    "exotic3",
    "farey-broken",
];

/// Look up a bundled fixture by name.
pub fn fixture(name: &str) -> Option<Scheme> {
    match name {
        "farey" => Some(farey()),
        "sl2z" => Some(sl2z()),
        "z3z4z5" => Some(z3z4z5()),
        "hnn-z3" => Some(hnn_z3()),
        "hnn-z6z2" => Some(hnn_z6z2()),
        "schottky" => Some(schottky()),
        "schottky-with-j" => Some(schottky_with_j()),
        "schottky-minimal" => Some(schottky_minimal()),
        "mmrt" => Some(mmrt()),
        "exotic1" => Some(exotic1()),
        "exotic2" => Some(exotic2()),
        "exotic3" => Some(exotic3()),
        "farey-broken" => Some(farey_broken()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

fn iv(id: &str, l: &str, r: &str) -> Interval {
    Interval {
        id: id.into(),
        left: Some(l.into()),
        right: Some(r.into()),
    }
}

fn gp(id: &str) -> Gap {
    Gap {
        id: id.into(),
        degenerate: Some(true),
    }
}

fn fat(id: &str) -> Gap {
    Gap {
        id: id.into(),
        degenerate: Some(false),
    }
}

fn c(gen: &str, interval: &str, target: &str, exact: bool) -> TableRow {
    TableRow {
        gen: gen.into(),
        interval: interval.into(),
        entry: Entry::Contained {
            target: target.into(),
            exact,
        },
    }
}

fn m(gen: &str, interval: &str, list: &[&str]) -> TableRow {
    TableRow {
        gen: gen.into(),
        interval: interval.into(),
        entry: Entry::Markovian {
            list: list.iter().map(|s| (*s).to_string()).collect(),
        },
    }
}

fn letter_atom(id: &str, letter: &str, intervals: &[&str]) -> Atom {
    Atom {
        id: id.into(),
        letter: Some(letter.into()),
        vertex: None,
        edge: None,
        intervals: intervals.iter().map(|s| (*s).to_string()).collect(),
        edge_action: None,
    }
}

fn u_atom(id: &str, vertex: &str, edge: &str, intervals: &[&str]) -> Atom {
    Atom {
        id: id.into(),
        letter: None,
        vertex: Some(vertex.into()),
        edge: Some(edge.into()),
        intervals: intervals.iter().map(|s| (*s).to_string()).collect(),
        edge_action: None,
    }
}

fn with_action(mut atom: Atom, pairs: &[(&str, &str)]) -> Atom {
    let mut map = BTreeMap::new();
    for (a, b) in pairs {
        map.insert((*a).to_string(), (*b).to_string());
    }
    atom.edge_action = Some(map);
    atom
}

/// Build the generator maps from a partial base table and replace the table
/// with the complete one extracted from the maps.
fn complete(name: &str, mut s: Scheme) -> Scheme {
    let mut log = Vec::new();
    let maps = crate::realize::build_maps(&s, &mut log)
        .unwrap_or_else(|e| panic!("fixture {name}: base table does not realize: {e}"));
    s.table = extract_table(&s, &maps)
        .unwrap_or_else(|e| panic!("fixture {name}: table extraction failed: {e}"));
    s
}

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

/// Z₃ * Z₂ with the three-interval partition of the Farey tessellation:
/// a cycles I1 → I2 → U_b exactly and b expands U_b over I1 ∪ I2.
fn farey() -> Scheme {
    let mut group = free_product_of_cyclics(&[("a", 3), ("b", 2)]);
    group.vertices[0].rotation = Some("1/3".into());
    group.vertices[1].rotation = Some("1/2".into());
    let s = Scheme {
        group,
        intervals: vec![iv("I1", "0", "1/2"), iv("I2", "1/2", "3/4"), iv("Ub", "3/4", "1")],
        gaps: vec![gp("g1"), gp("g2"), gp("g3")],
        atoms: vec![
            u_atom("Ua", "a", "e1", &["I1", "I2"]),
            u_atom("UB", "b", "-e1", &["Ub"]),
        ],
        table: vec![
            c("a", "I1", "I2", true),
            c("a", "I2", "Ub", true),
            c("a", "Ub", "I1", true),
            c("b", "I1", "Ub", false),
            c("b", "I2", "Ub", false),
            m("b", "Ub", &["I1", "g1", "I2"]),
        ],
    };
    complete("farey", s)
}

/// The completed Farey scheme with the (a, Ub) row removed: the table is no
/// longer complete, so PPP 3 fails.
fn farey_broken() -> Scheme {
    let mut s = farey();
    s.table.retain(|r| !(r.gen == "a" && r.interval == "Ub"));
    s
}

/// Z₄ *_{Z₂} Z₆: the degree-2 lift of the Farey partition. b permutes the
/// six intervals exactly, a exchanges the two halves on U_b with a² = b³ on
/// the common Z₂. The six gaps are genuine (the minimal set is a Cantor
/// set), so ping-pong images leave uncovered arcs.
fn sl2z() -> Scheme {
    let group = MarkedGroup {
        vertices: vec![
            Vertex {
                name: "a".into(),
                order: 4,
                rotation: Some("1/4".into()),
            },
            Vertex {
                name: "b".into(),
                order: 6,
                rotation: Some("1/6".into()),
            },
        ],
        edges: vec![Edge {
            name: "e".into(),
            from: "a".into(),
            to: "b".into(),
            order: 2,
            alpha: 2,
            omega: 3,
            tree: true,
        }],
    };
    let s = Scheme {
        group,
        intervals: vec![
            iv("I1_0", "0", "1/8"),
            iv("I2_0", "5/32", "9/32"),
            iv("Ub_0", "5/16", "15/32"),
            iv("I1_1", "1/2", "5/8"),
            iv("I2_1", "21/32", "25/32"),
            iv("Ub_1", "13/16", "31/32"),
        ],
        gaps: vec![fat("g1"), fat("g2"), fat("g3"), fat("g4"), fat("g5"), fat("g6")],
        atoms: vec![
            with_action(
                u_atom("Xa", "a", "e", &["Ub_0", "Ub_1"]),
                &[("Ub_0", "Ub_1"), ("Ub_1", "Ub_0")],
            ),
            with_action(
                u_atom("Xb", "b", "-e", &["I1_0", "I2_0", "I1_1", "I2_1"]),
                &[
                    ("I1_0", "I1_1"),
                    ("I1_1", "I1_0"),
                    ("I2_0", "I2_1"),
                    ("I2_1", "I2_0"),
                ],
            ),
        ],
        table: vec![
            // b: exact six-cycle
            c("b", "I1_0", "I2_0", true),
            c("b", "I2_0", "Ub_0", true),
            c("b", "Ub_0", "I1_1", true),
            c("b", "I1_1", "I2_1", true),
            c("b", "I2_1", "Ub_1", true),
            c("b", "Ub_1", "I1_0", true),
            // a: expands each U_b half over the opposite pair of I's
            m("a", "Ub_0", &["I1_1", "g4", "I2_1"]),
            m("a", "Ub_1", &["I1_0", "g1", "I2_0"]),
            c("a", "I1_0", "Ub_0", false),
            c("a", "I2_0", "Ub_0", false),
            c("a", "I1_1", "Ub_1", false),
            c("a", "I2_1", "Ub_1", false),
            // a²: the half-exchange generating the edge group (these rows pin
            // a² = b³ on all endpoints so the amalgamation closes up)
            c("a^2", "I1_0", "I1_1", true),
            c("a^2", "I2_0", "I2_1", true),
            c("a^2", "Ub_0", "Ub_1", true),
            c("a^2", "I1_1", "I1_0", true),
            c("a^2", "I2_1", "I2_0", true),
            c("a^2", "Ub_1", "Ub_0", true),
        ],
    };
    complete("sl2z", s)
}

/// Z₃ * Z₄ * Z₅, a star of trivial tree edges: each factor keeps a chain of
/// exact images inside its own intervals and one expanding row.
fn z3z4z5() -> Scheme {
    let mut group = free_product_of_cyclics(&[("a", 3), ("b", 4), ("c", 5)]);
    group.vertices[0].rotation = Some("1/3".into());
    group.vertices[1].rotation = Some("1/4".into());
    group.vertices[2].rotation = Some("1/5".into());
    let s = Scheme {
        group,
        intervals: vec![
            iv("P1", "0", "1/16"),
            iv("Q1", "1/16", "1/8"),
            iv("P2", "1/8", "3/16"),
            iv("Q2", "3/16", "1/4"),
            iv("B1", "1/4", "5/16"),
            iv("B2", "5/16", "3/8"),
            iv("B3", "3/8", "7/16"),
            iv("C1", "7/16", "1/2"),
            iv("C2", "1/2", "9/16"),
            iv("C3", "9/16", "5/8"),
            iv("C4", "5/8", "1"),
        ],
        gaps: (1..=11).map(|i| gp(&format!("g{i}"))).collect(),
        atoms: vec![
            u_atom("Ua1", "a", "e1", &["P1", "P2"]),
            u_atom("Ua2", "a", "e2", &["Q1", "Q2"]),
            u_atom("Ub", "b", "-e1", &["B1", "B2", "B3"]),
            u_atom("Uc", "c", "-e2", &["C1", "C2", "C3", "C4"]),
        ],
        table: vec![
            c("a", "P1", "P2", true),
            c("a", "Q1", "Q2", true),
            m("a", "P2", &["B1", "g5", "B2", "g6", "B3"]),
            m("a", "Q2", &["C1", "g8", "C2", "g9", "C3", "g10", "C4"]),
            c("a", "B1", "P1", false),
            c("a", "B2", "P1", false),
            c("a", "B3", "P1", false),
            c("a", "C1", "Q1", false),
            c("a", "C2", "Q1", false),
            c("a", "C3", "Q1", false),
            c("a", "C4", "Q1", false),
            c("b", "B1", "B2", true),
            c("b", "B2", "B3", true),
            m(
                "b",
                "B3",
                &[
                    "C1", "g8", "C2", "g9", "C3", "g10", "C4", "g11", "P1", "g1", "Q1", "g2",
                    "P2", "g3", "Q2",
                ],
            ),
            c("b", "P1", "B1", false),
            c("b", "Q1", "B1", false),
            c("b", "P2", "B1", false),
            c("b", "Q2", "B1", false),
            c("b", "C1", "B1", false),
            c("b", "C2", "B1", false),
            c("b", "C3", "B1", false),
            c("b", "C4", "B1", false),
            c("c", "C1", "C2", true),
            c("c", "C2", "C3", true),
            c("c", "C3", "C4", true),
            m(
                "c",
                "C4",
                &[
                    "P1", "g1", "Q1", "g2", "P2", "g3", "Q2", "g4", "B1", "g5", "B2", "g6", "B3",
                ],
            ),
            c("c", "P1", "C1", false),
            c("c", "Q1", "C1", false),
            c("c", "P2", "C1", false),
            c("c", "Q2", "C1", false),
            c("c", "B1", "C1", false),
            c("c", "B2", "C1", false),
            c("c", "B3", "C1", false),
        ],
    };
    complete("z3z4z5", s)
}

/// HNN extension of Z₃ over the trivial group: one torsion vertex of order
/// 3 and a stable letter s contracting everything outside Z_{-s} into Z_s.
/// W is a neutral interval (it belongs to no atom).
fn hnn_z3() -> Scheme {
    let group = MarkedGroup {
        vertices: vec![Vertex {
            name: "a".into(),
            order: 3,
            rotation: Some("1/3".into()),
        }],
        edges: vec![Edge {
            name: "s".into(),
            from: "a".into(),
            to: "a".into(),
            order: 1,
            alpha: 0,
            omega: 0,
            tree: false,
        }],
    };
    let s = Scheme {
        group,
        intervals: vec![
            iv("Zs", "0", "1/8"),
            iv("W", "1/8", "1/4"),
            iv("Zr", "1/4", "3/8"),
            iv("P3", "3/8", "1/2"),
            iv("P4", "1/2", "5/8"),
            iv("P5", "5/8", "3/4"),
            iv("P6", "3/4", "1"),
        ],
        gaps: (1..=7).map(|i| gp(&format!("y{i}"))).collect(),
        atoms: vec![
            letter_atom("Zs_atom", "s", &["Zs"]),
            letter_atom("Zr_atom", "-s", &["Zr"]),
            u_atom("Us", "a", "s", &["P3", "P5"]),
            u_atom("Ur", "a", "-s", &["P4", "P6"]),
        ],
        table: vec![
            c("a", "Zs", "P3", false),
            c("a", "W", "P3", false),
            c("a", "Zr", "P4", true),
            c("a", "P3", "P5", true),
            c("a", "P4", "P6", true),
            m("a", "P5", &["Zs", "y1", "W"]),
            c("a", "P6", "Zr", true),
            m(
                "s",
                "Zr",
                &["W", "y2", "Zr", "y3", "P3", "y4", "P4", "y5", "P5", "y6", "P6"],
            ),
            c("s", "Zs", "Zs", false),
            c("s", "W", "Zs", false),
            c("s", "P3", "Zs", false),
            c("s", "P4", "Zs", false),
            c("s", "P5", "Zs", false),
            c("s", "P6", "Zs", false),
        ],
    };
    complete("hnn-z3", s)
}

/// Degree-2 lift of `hnn-z3`: Z₆ *_{Z₂} (HNN over a³). The generator maps
/// are the double-cover lifts of the realized hnn-z3 maps, and the whole
/// table is extracted from them.
fn hnn_z6z2() -> Scheme {
    let base = hnn_z3();
    let mut log = Vec::new();
    let maps = crate::realize::build_maps(&base, &mut log)
        .unwrap_or_else(|e| panic!("fixture hnn-z6z2: base hnn-z3 does not realize: {e}"));
    let a6 = double_cover_lift(&maps["a"]);
    let s6 = double_cover_lift(&maps["s"]);
    let group = MarkedGroup {
        vertices: vec![Vertex {
            name: "a".into(),
            order: 6,
            rotation: Some("1/6".into()),
        }],
        edges: vec![Edge {
            name: "s".into(),
            from: "a".into(),
            to: "a".into(),
            order: 2,
            alpha: 3,
            omega: 3,
            tree: false,
        }],
    };
    let names = ["Zs", "W", "Zr", "P3", "P4", "P5", "P6"];
    let ends = ["0", "1/8", "1/4", "3/8", "1/2", "5/8", "3/4", "1"];
    let mut intervals = Vec::new();
    for half in 0..2u32 {
        for (i, n) in names.iter().enumerate() {
            let l = halve(ends[i], half);
            let r = halve(ends[i + 1], half);
            intervals.push(iv(&format!("{n}{half}"), &l, &r));
        }
    }
    let mut s = Scheme {
        group,
        intervals,
        gaps: (1..=14).map(|i| gp(&format!("y{i}"))).collect(),
        atoms: vec![
            letter_atom("Zs_atom", "s", &["Zs0", "Zs1"]),
            letter_atom("Zr_atom", "-s", &["Zr0", "Zr1"]),
            with_action(
                u_atom("Us", "a", "s", &["P30", "P50", "P31", "P51"]),
                &[("P30", "P31"), ("P31", "P30"), ("P50", "P51"), ("P51", "P50")],
            ),
            with_action(
                u_atom("Ur", "a", "-s", &["P40", "P60", "P41", "P61"]),
                &[("P40", "P41"), ("P41", "P40"), ("P60", "P61"), ("P61", "P60")],
            ),
        ],
        table: Vec::new(),
    };
    let mut lifted = HashMap::new();
    lifted.insert("a".to_string(), a6);
    lifted.insert("s".to_string(), s6);
    s.table = extract_table(&s, &lifted)
        .unwrap_or_else(|e| panic!("fixture hnn-z6z2: table extraction failed: {e}"));
    s
}

/// Halve a rational endpoint string and shift it by `half`/2.
fn halve(p: &str, half: u32) -> String {
    let r = crate::arith::parse_rational(p).unwrap();
    let shifted = r / Rational::from_integer(2.into())
        + Rational::new(half.into(), 2.into());
    crate::arith::format_rational(&shifted)
}

/// Lift a circle homeomorphism through the double cover x ↦ 2x: the result
/// commutes with the antipodal map and projects back to the input.
fn double_cover_lift(f: &PLHomeo) -> PLHomeo {
    let pieces = f.pieces();
    let two = Rational::from_integer(2.into());
    let half = Rational::new(1.into(), 2.into());
    if pieces.len() == 1 {
        // a rigid rotation by t lifts to the rotation by t/2
        let t = pieces[0]
            .x
            .dist_ccw(&pieces[0].y);
        return PLHomeo::rotation(&(t / &two));
    }
    // real-lift values of f at its breakpoints
    let mut ys: Vec<Rational> = vec![pieces[0].y.value().clone()];
    for i in 1..pieces.len() {
        let step = pieces[i - 1].y.dist_ccw(&pieces[i].y);
        let prev = ys[i - 1].clone();
        ys.push(prev + step);
    }
    let mut out = Vec::new();
    for shift in [Rational::from_integer(0.into()), half.clone()] {
        for (i, p) in pieces.iter().enumerate() {
            out.push(Piece {
                x: RationalPoint::new(p.x.value() / &two + &shift),
                y: RationalPoint::new(&ys[i] / &two + &shift),
                slope: p.slope.clone(),
            });
        }
    }
    PLHomeo::new(out).expect("double-cover lift is a homeomorphism")
}

/// Rank-2 Schottky group with four fat gaps: the minimal set is a Cantor
/// set. Each generator expands one interval over the three-interval arc
/// around it and contracts everything else.
fn schottky() -> Scheme {
    let group = free_group(&["s", "t"]);
    Scheme {
        group,
        intervals: vec![
            iv("P_s", "0", "1/8"),
            iv("P_t", "1/4", "3/8"),
            iv("P_s1", "1/2", "5/8"),
            iv("P_t1", "3/4", "7/8"),
        ],
        gaps: vec![fat("g1"), fat("g2"), fat("g3"), fat("g4")],
        atoms: vec![
            letter_atom("Zs", "s", &["P_s1"]),
            letter_atom("Zs1", "-s", &["P_s"]),
            letter_atom("Zt", "t", &["P_t1"]),
            letter_atom("Zt1", "-t", &["P_t"]),
        ],
        table: schottky_rows(),
    }
}

/// The same combinatorics as `schottky` on four equal intervals with
/// degenerate gaps: a minimal action realized on dyadic staircases.
fn schottky_minimal() -> Scheme {
    let group = free_group(&["s", "t"]);
    Scheme {
        group,
        intervals: vec![
            iv("P_s", "0", "1/4"),
            iv("P_t", "1/4", "1/2"),
            iv("P_s1", "1/2", "3/4"),
            iv("P_t1", "3/4", "1"),
        ],
        gaps: vec![gp("g1"), gp("g2"), gp("g3"), gp("g4")],
        atoms: vec![
            letter_atom("Zs", "s", &["P_s1"]),
            letter_atom("Zs1", "-s", &["P_s"]),
            letter_atom("Zt", "t", &["P_t1"]),
            letter_atom("Zt1", "-t", &["P_t"]),
        ],
        table: schottky_rows(),
    }
}

/// The common rank-2 Schottky transition table (complete for both gap
/// flavours: every token image either expands Markovianly or contracts).
fn schottky_rows() -> Vec<TableRow> {
    vec![
        m("s", "P_s", &["P_t1", "g4", "P_s", "g1", "P_t"]),
        c("s", "P_t", "P_s1", false),
        c("s", "P_s1", "P_s1", false),
        c("s", "P_t1", "P_s1", false),
        m("-s", "P_s1", &["P_t", "g2", "P_s1", "g3", "P_t1"]),
        c("-s", "P_s", "P_s", false),
        c("-s", "P_t", "P_s", false),
        c("-s", "P_t1", "P_s", false),
        m("t", "P_t", &["P_s", "g1", "P_t", "g2", "P_s1"]),
        c("t", "P_s", "P_t1", false),
        c("t", "P_s1", "P_t1", false),
        c("t", "P_t1", "P_t1", false),
        m("-t", "P_t1", &["P_s1", "g3", "P_t1", "g4", "P_s"]),
        c("-t", "P_s", "P_t", false),
        c("-t", "P_t", "P_t", false),
        c("-t", "P_s1", "P_t", false),
    ]
}

/// The Schottky combinatorics refined by four neutral intervals J_*: gaps
/// are degenerate but the action is not minimal — the neutral intervals
/// wander, and the minimal set avoids them.
fn schottky_with_j() -> Scheme {
    let group = free_group(&["s", "t"]);
    let s = Scheme {
        group,
        intervals: vec![
            iv("J_s", "0", "1/8"),
            iv("P_s", "1/8", "1/4"),
            iv("J_t", "1/4", "3/8"),
            iv("P_t", "3/8", "1/2"),
            iv("J_s1", "1/2", "5/8"),
            iv("P_s1", "5/8", "3/4"),
            iv("J_t1", "3/4", "7/8"),
            iv("P_t1", "7/8", "1"),
        ],
        gaps: (1..=8).map(|i| gp(&format!("g{i}"))).collect(),
        atoms: vec![
            letter_atom("Zs", "s", &["P_s1"]),
            letter_atom("Zs1", "-s", &["P_s"]),
            letter_atom("Zt", "t", &["P_t1"]),
            letter_atom("Zt1", "-t", &["P_t"]),
        ],
        table: vec![
            m(
                "s",
                "P_s",
                &["P_t1", "g8", "J_s", "g1", "P_s", "g2", "J_t", "g3", "P_t"],
            ),
            c("s", "J_s", "J_t1", true),
            c("s", "J_t", "J_s1", true),
            c("s", "P_t", "P_s1", false),
            c("s", "J_s1", "P_s1", false),
            c("s", "P_s1", "P_s1", false),
            c("s", "J_t1", "P_s1", false),
            c("s", "P_t1", "P_s1", false),
            m(
                "t",
                "P_t",
                &["P_s", "g2", "J_t", "g3", "P_t", "g4", "J_s1", "g5", "P_s1"],
            ),
            c("t", "J_t", "J_s", true),
            c("t", "J_s1", "J_t1", true),
            c("t", "P_s", "P_t1", false),
            c("t", "J_s", "P_t1", false),
            c("t", "P_s1", "P_t1", false),
            c("t", "J_t1", "P_t1", false),
            c("t", "P_t1", "P_t1", false),
        ],
    };
    complete("schottky-with-j", s)
}

/// Free group of rank 2 acting minimally with every orbit dense: the
/// transition table of a pair of expanding elements whose Markovian rows
/// chain every interval through every other.
fn mmrt() -> Scheme {
    let group = free_group(&["f", "g"]);
    let intervals: Vec<Interval> = (1..=8)
        .map(|i| {
            iv(
                &format!("I{i}"),
                &format!("{}/8", i - 1),
                &format!("{}/8", i),
            )
        })
        .collect();
    // the gap after I_i is x_{i+1}; the gap after I8 (at 0) is x1
    let gaps: Vec<Gap> = (1..=8)
        .map(|i| gp(&format!("x{}", if i == 8 { 1 } else { i + 1 })))
        .collect();
    Scheme {
        group,
        intervals,
        gaps,
        atoms: vec![
            letter_atom("Zf", "f", &["I3", "I7"]),
            letter_atom("Zf1", "-f", &["I1", "I5"]),
            letter_atom("Zg", "g", &["I2", "I4"]),
            letter_atom("Zg1", "-g", &["I6", "I8"]),
        ],
        table: vec![
            m("f", "I1", &["I8", "x1", "I1", "x2", "I2"]),
            c("f", "I2", "I3", false),
            c("f", "I3", "I3", false),
            c("f", "I4", "I3", false),
            m("f", "I5", &["I4", "x5", "I5", "x6", "I6"]),
            c("f", "I6", "I7", false),
            c("f", "I7", "I7", false),
            c("f", "I8", "I7", false),
            m("-f", "I3", &["I2", "x3", "I3", "x4", "I4"]),
            m("-f", "I7", &["I6", "x7", "I7", "x8", "I8"]),
            c("-f", "I8", "I1", false),
            c("-f", "I1", "I1", false),
            c("-f", "I2", "I1", false),
            c("-f", "I4", "I5", false),
            c("-f", "I5", "I5", false),
            c("-f", "I6", "I5", false),
            m(
                "g",
                "I6",
                &["I5", "x6", "I6", "x7", "I7", "x8", "I8", "x1", "I1"],
            ),
            c("g", "I7", "I2", true),
            c("g", "I8", "I3", true),
            c("g", "I1", "I4", false),
            c("g", "I2", "I4", false),
            c("g", "I3", "I4", false),
            c("g", "I4", "I4", false),
            c("g", "I5", "I4", false),
            m(
                "-g",
                "I4",
                &["I1", "x2", "I2", "x3", "I3", "x4", "I4", "x5", "I5"],
            ),
            c("-g", "I2", "I7", true),
            c("-g", "I3", "I8", true),
            c("-g", "I1", "I6", false),
            c("-g", "I5", "I6", false),
            c("-g", "I6", "I6", false),
            c("-g", "I7", "I6", false),
            c("-g", "I8", "I6", false),
        ],
    }
}

/// Rank-3 free group whose elements mix hyperbolic fixed points: f has two
/// attracting and two repelling fixed points, g and h one of each.
fn exotic1() -> Scheme {
    let group = free_group(&["f", "g", "h"]);
    let names = [
        "A1", "Pg", "S1", "S1p", "T1", "T2", "A2", "Ph", "S2", "S2p", "U1", "U2",
    ];
    let mut intervals = Vec::new();
    for (i, n) in names.iter().enumerate() {
        let l = format!("{i}/16");
        let r = if i == 11 {
            "1".to_string()
        } else {
            format!("{}/16", i + 1)
        };
        intervals.push(iv(n, &l, &r));
    }
    // g_i follows the i-th interval (0-based)
    let gaps: Vec<Gap> = (0..12).map(|i| gp(&format!("g{i}"))).collect();
    let s = Scheme {
        group,
        intervals,
        gaps,
        atoms: vec![
            letter_atom("Zf", "f", &["A1", "A2"]),
            letter_atom("Zf1", "-f", &["S1", "S1p", "S2", "S2p"]),
            letter_atom("Zg", "g", &["Pg"]),
            letter_atom("Zg1", "-g", &["T1", "T2"]),
            letter_atom("Zh", "h", &["Ph"]),
            letter_atom("Zh1", "-h", &["U1", "U2"]),
        ],
        table: vec![
            m("f", "S1", &["Pg", "g1", "S1"]),
            m("f", "S1p", &["S1p", "g3", "T1", "g4", "T2"]),
            m("f", "S2", &["Ph", "g7", "S2"]),
            m("f", "S2p", &["S2p", "g9", "U1", "g10", "U2"]),
            c("f", "A1", "A1", false),
            c("f", "Pg", "A1", false),
            c("f", "T1", "A2", false),
            c("f", "T2", "A2", false),
            c("f", "A2", "A2", false),
            c("f", "Ph", "A2", false),
            c("f", "U1", "A1", false),
            c("f", "U2", "A1", false),
            m("g", "T1", &["S1", "g2", "S1p", "g3", "T1"]),
            m(
                "g",
                "T2",
                &[
                    "T2", "g5", "A2", "g6", "Ph", "g7", "S2", "g8", "S2p", "g9", "U1", "g10",
                    "U2", "g11", "A1",
                ],
            ),
            c("g", "A1", "Pg", false),
            c("g", "Pg", "Pg", false),
            c("g", "S1", "Pg", false),
            c("g", "S1p", "Pg", false),
            c("g", "A2", "Pg", false),
            c("g", "Ph", "Pg", false),
            c("g", "S2", "Pg", false),
            c("g", "S2p", "Pg", false),
            c("g", "U1", "Pg", false),
            c("g", "U2", "Pg", false),
            m("h", "U1", &["S2", "g8", "S2p", "g9", "U1"]),
            m(
                "h",
                "U2",
                &[
                    "U2", "g11", "A1", "g0", "Pg", "g1", "S1", "g2", "S1p", "g3", "T1", "g4",
                    "T2", "g5", "A2",
                ],
            ),
            c("h", "A1", "Ph", false),
            c("h", "Pg", "Ph", false),
            c("h", "S1", "Ph", false),
            c("h", "S1p", "Ph", false),
            c("h", "T1", "Ph", false),
            c("h", "T2", "Ph", false),
            c("h", "A2", "Ph", false),
            c("h", "Ph", "Ph", false),
            c("h", "S2", "Ph", false),
            c("h", "S2p", "Ph", false),
        ],
    };
    complete("exotic1", s)
}

/// Rank-2 free group where g has two parabolic fixed points (at the
/// endpoints 1/8 and 1/2) and f is North-South hyperbolic. T0 is neutral.
fn exotic2() -> Scheme {
    let group = free_group(&["f", "g"]);
    let s = Scheme {
        group,
        intervals: vec![
            iv("L1", "0", "1/8"),
            iv("R1", "1/8", "1/4"),
            iv("Af", "1/4", "3/8"),
            iv("L2", "3/8", "1/2"),
            iv("R2", "1/2", "5/8"),
            iv("T0", "5/8", "3/4"),
            iv("Rf", "3/4", "1"),
        ],
        gaps: (1..=7).map(|i| gp(&format!("y{i}"))).collect(),
        atoms: vec![
            letter_atom("Zf", "f", &["Af"]),
            letter_atom("Zf1", "-f", &["Rf"]),
            letter_atom("Zg", "g", &["L1", "L2"]),
            letter_atom("Zg1", "-g", &["R1", "R2"]),
        ],
        table: vec![
            m("g", "R1", &["R1", "y2", "Af"]),
            m("g", "R2", &["R2", "y5", "T0", "y6", "Rf"]),
            c("g", "Af", "L2", false),
            c("g", "L2", "L2", false),
            c("g", "T0", "L1", false),
            c("g", "Rf", "L1", false),
            c("g", "L1", "L1", false),
            m(
                "f",
                "Rf",
                &["L2", "y4", "R2", "y5", "T0", "y6", "Rf", "y7", "L1", "y1", "R1"],
            ),
            c("f", "L1", "Af", false),
            c("f", "R1", "Af", false),
            c("f", "Af", "Af", false),
            c("f", "L2", "Af", false),
            c("f", "R2", "Af", false),
            c("f", "T0", "Af", false),
        ],
    };
    complete("exotic2", s)
}

/// Rank-3 free group mixing parabolic and hyperbolic behaviour: f has a
/// parabolic point at 1/8 next to a hyperbolic repeller at 0, g is
/// North-South, h has a single parabolic point at 3/4.
fn exotic3() -> Scheme {
    let group = free_group(&["f", "g", "h"]);
    let names = ["P1", "P2", "Ag", "Af", "Rg", "Wh", "Fh", "Rf"];
    let mut intervals = Vec::new();
    for (i, n) in names.iter().enumerate() {
        let l = format!("{i}/8");
        let r = if i == 7 {
            "1".to_string()
        } else {
            format!("{}/8", i + 1)
        };
        intervals.push(iv(n, &l, &r));
    }
    let s = Scheme {
        group,
        intervals,
        gaps: (1..=8).map(|i| gp(&format!("y{i}"))).collect(),
        atoms: vec![
            letter_atom("Zf", "f", &["Af", "P1"]),
            letter_atom("Zf1", "-f", &["P2", "Rf"]),
            letter_atom("Zg", "g", &["Ag"]),
            letter_atom("Zg1", "-g", &["Rg"]),
            letter_atom("Zh", "h", &["Wh"]),
            letter_atom("Zh1", "-h", &["Fh"]),
        ],
        table: vec![
            c("f", "P1", "P1", true),
            m("f", "P2", &["P2", "y2", "Ag"]),
            c("f", "Ag", "Af", false),
            c("f", "Af", "Af", false),
            c("f", "Rg", "Af", false),
            c("f", "Wh", "Af", false),
            c("f", "Fh", "Af", false),
            m("f", "Rf", &["Rg", "y5", "Wh", "y6", "Fh", "y7", "Rf"]),
            m(
                "g",
                "Rg",
                &[
                    "Af", "y4", "Rg", "y5", "Wh", "y6", "Fh", "y7", "Rf", "y8", "P1", "y1", "P2",
                ],
            ),
            c("g", "P1", "Ag", false),
            c("g", "P2", "Ag", false),
            c("g", "Ag", "Ag", false),
            c("g", "Af", "Ag", false),
            c("g", "Wh", "Ag", false),
            c("g", "Fh", "Ag", false),
            c("g", "Rf", "Ag", false),
            m(
                "h",
                "Fh",
                &[
                    "Fh", "y7", "Rf", "y8", "P1", "y1", "P2", "y2", "Ag", "y3", "Af", "y4", "Rg",
                ],
            ),
            c("h", "P1", "Wh", false),
            c("h", "P2", "Wh", false),
            c("h", "Ag", "Wh", false),
            c("h", "Af", "Wh", false),
            c("h", "Rg", "Wh", false),
            c("h", "Wh", "Wh", false),
            c("h", "Rf", "Wh", false),
        ],
    };
    complete("exotic3", s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{check_scheme, gap_orbits};

    #[test]
    fn all_fixtures_load() {
        for name in FIXTURE_NAMES {
            let s = fixture(name).unwrap_or_else(|| panic!("missing fixture {name}"));
            assert!(!s.intervals.is_empty(), "{name} has intervals");
            assert_eq!(s.intervals.len(), s.gaps.len(), "{name} gap count");
        }
        assert!(FIXTURE_NAMES.len() >= 10);
        assert!(fixture("nonexistent").is_none());
    }

    #[test]
    fn fixtures_are_valid_schemes() {
        for name in FIXTURE_NAMES {
            if *name == "farey-broken" {
                continue;
            }
            let s = fixture(name).unwrap();
            let rep = check_scheme(&s, None)
                .unwrap_or_else(|e| panic!("{name}: check errored: {e}"));
            assert!(
                rep.is_valid(),
                "{name} should be valid: {:?}",
                rep.failures()
            );
        }
    }

    #[test]
    fn fixtures_are_proper_with_realization() {
        for name in FIXTURE_NAMES {
            if *name == "farey-broken" {
                continue;
            }
            let s = fixture(name).unwrap();
            let mut log = Vec::new();
            let maps = crate::realize::build_maps(&s, &mut log)
                .unwrap_or_else(|e| panic!("{name}: realization failed: {e}"));
            crate::realize::verify_realization(&s, &maps)
                .unwrap_or_else(|e| panic!("{name}: verification failed: {e}"));
            let rep = check_scheme(&s, Some(&maps))
                .unwrap_or_else(|e| panic!("{name}: check errored: {e}"));
            assert!(
                rep.is_proper(),
                "{name} should be proper: {:?}",
                rep.verdicts
            );
        }
    }

    #[test]
    fn farey_broken_fails_ppp3() {
        let s = fixture("farey-broken").unwrap();
        let rep = check_scheme(&s, None).unwrap();
        assert!(!rep.is_valid());
        assert!(
            rep.failures().iter().any(|f| f.starts_with("PPP3")),
            "expected a PPP3 failure: {:?}",
            rep.failures()
        );
    }

    #[test]
    fn gap_orbit_counts() {
        let expect = [
            ("mmrt", 1),
            ("exotic1", 6),
            ("exotic2", 3),
            ("exotic3", 4),
        ];
        for (name, count) in expect {
            let s = fixture(name).unwrap();
            let orbits = gap_orbits(&s).unwrap();
            assert_eq!(orbits.count, count, "{name} gap orbits: {:?}", orbits.orbits);
        }
    }

    #[test]
    fn exotic3_orbit_structure() {
        let s = fixture("exotic3").unwrap();
        let orbits = gap_orbits(&s).unwrap();
        let mut sets: Vec<Vec<String>> = orbits.orbits.clone();
        for o in &mut sets {
            o.sort();
        }
        sets.sort();
        assert!(sets.contains(&vec!["y1".to_string()]));
        assert!(sets.contains(&vec!["y6".to_string()]));
        assert!(sets.contains(&vec!["y8".to_string()]));
    }
}
