//! Deterministic SVG diagrams of ping-pong partitions: the circle with atoms
//! as colored arcs, gaps as radial ticks, and generator actions as arrows
//! derived from the transition table. Output bytes depend only on the input
//! scheme, so re-rendering the same input reproduces the file exactly.

use std::fmt::Write as _;

use num::ToPrimitive;

use crate::scheme::{Entry, Scheme, SchemeError};

/// Fixed atom palette (also listed in the README); atoms take colors in
/// declaration order, cycling when there are more atoms than colors.
pub const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

const CX: f64 = 300.0;
const CY: f64 = 300.0;
const R: f64 = 220.0;

fn pos(t: f64, radius: f64) -> (f64, f64) {
    let a = std::f64::consts::TAU * t - std::f64::consts::FRAC_PI_2;
    (CX + radius * a.cos(), CY + radius * a.sin())
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Render a scheme to SVG text.
pub fn render_scheme_svg(s: &Scheme) -> Result<String, SchemeError> {
    let n = s.intervals.len();
    let mut ends = Vec::with_capacity(n);
    for i in 0..n {
        ends.push(s.endpoints(i)?);
    }
    let to_f = |p: &crate::arith::RationalPoint| p.value().to_f64().unwrap_or(0.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">"
    );
    let _ = writeln!(svg, "<rect width=\"600\" height=\"600\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<circle cx=\"{CX}\" cy=\"{CY}\" r=\"{R}\" fill=\"none\" stroke=\"#dddddd\" stroke-width=\"1\"/>"
    );
    // colored arcs, one per interval, colored by owning atom
    let mut atom_of = vec![usize::MAX; n];
    for (ai, atom) in s.atoms.iter().enumerate() {
        for id in &atom.intervals {
            if let Some(i) = s.intervals.iter().position(|iv| &iv.id == id) {
                atom_of[i] = ai;
            }
        }
    }
    for i in 0..n {
        let (l, r) = &ends[i];
        let (t0, t1) = (to_f(l), to_f(r));
        let len = (t1 - t0).rem_euclid(1.0);
        let (x0, y0) = pos(t0, R);
        let (x1, y1) = pos(t1, R);
        let large = if len > 0.5 { 1 } else { 0 };
        let color = if atom_of[i] == usize::MAX {
            "#000000"
        } else {
            PALETTE[atom_of[i] % PALETTE.len()]
        };
        let _ = writeln!(
            svg,
            "<path d=\"M {} {} A {R} {R} 0 {large} 1 {} {}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"14\" stroke-linecap=\"butt\"><title>{}</title></path>",
            fmt(x0), fmt(y0), fmt(x1), fmt(y1), s.intervals[i].id
        );
        // interval label at the arc midpoint
        let mid = (t0 + len / 2.0).rem_euclid(1.0);
        let (lx, ly) = pos(mid, R + 28.0);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"monospace\" text-anchor=\"middle\">{}</text>",
            fmt(lx), fmt(ly), s.intervals[i].id
        );
    }
    // gap ticks: gap i sits between interval i and interval i+1
    for i in 0..n {
        let right = to_f(&ends[i].1);
        let next_left = to_f(&ends[(i + 1) % n].0);
        let gap_len = (next_left - right).rem_euclid(1.0);
        let t = if gap_len == 0.0 {
            right
        } else {
            (right + gap_len / 2.0).rem_euclid(1.0)
        };
        let (x0, y0) = pos(t, R - 14.0);
        let (x1, y1) = pos(t, R + 14.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\" stroke-width=\"2\"><title>{}</title></line>",
            fmt(x0), fmt(y0), fmt(x1), fmt(y1), s.gaps[i].id
        );
    }
    // generator action arrows for exact containment rows: chords through the
    // interior from source midpoint to target midpoint
    let midpoint = |i: usize| -> f64 {
        let (l, r) = &ends[i];
        let t0 = to_f(l);
        let len = (to_f(r) - t0).rem_euclid(1.0);
        (t0 + len / 2.0).rem_euclid(1.0)
    };
    let index_of = |id: &str| s.intervals.iter().position(|iv| iv.id == id);
    let _ = writeln!(
        svg,
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#555555\"/></marker></defs>"
    );
    for row in &s.table {
        let Entry::Contained { target, .. } = &row.entry else {
            continue;
        };
        let (Some(si), Some(ti)) = (index_of(&row.interval), index_of(target)) else {
            continue;
        };
        if si == ti {
            continue;
        }
        let (x0, y0) = pos(midpoint(si), R - 20.0);
        let (x1, y1) = pos(midpoint(ti), R - 20.0);
        let _ = writeln!(
            svg,
            "<path d=\"M {} {} Q {CX} {CY} {} {}\" fill=\"none\" stroke=\"#555555\" stroke-width=\"1\" marker-end=\"url(#arrow)\" opacity=\"0.55\"><title>{}: {} -&gt; {}</title></path>",
            fmt(x0), fmt(y0), fmt(x1), fmt(y1), row.gen, row.interval, target
        );
        // token label one third of the way along the chord
        let (lx, ly) = (x0 + (x1 - x0) / 3.0, y0 + (y1 - y0) / 3.0);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"monospace\" fill=\"#555555\" text-anchor=\"middle\">{}</text>",
            fmt(lx), fmt(ly), row.gen
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farey_svg_counts() {
        let s = crate::fixtures::fixture("farey").unwrap();
        let svg = render_scheme_svg(&s).unwrap();
        assert_eq!(svg.matches("A 220 220").count(), 3, "3 interval arcs");
        assert_eq!(svg.matches("<line").count(), 3, "3 gap ticks");
    }

    #[test]
    fn mmrt_svg_counts_and_determinism() {
        let s = crate::fixtures::fixture("mmrt").unwrap();
        let a = render_scheme_svg(&s).unwrap();
        let b = render_scheme_svg(&s).unwrap();
        assert_eq!(a, b, "byte-stable");
        assert_eq!(a.matches("A 220 220").count(), 8, "8 interval arcs");
    }
}
