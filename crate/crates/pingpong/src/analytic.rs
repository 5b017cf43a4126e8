//! Smooth circle diffeomorphisms by trigonometric interpolation, and the
//! analytic counterpart of the minimal-realization pipeline.
//!
//! This module is the explicit exact/numeric boundary of the library: it
//! works in binary64 with residual and grid certificates, while everything
//! else is exact. Angles are radians; a diffeomorphism is represented by its
//! derivative D(x) = 1 + q(x)·r(x), a trigonometric polynomial with
//! D(x_j) = 1 at every node, together with the anchor value f(x_1) = y_1 and
//! the closed-form antiderivative of D.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num::ToPrimitive;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::realize::Realization;
use crate::scheme::flip_orientation;

const TAU: f64 = 2.0 * PI;

/// Errors from the numeric pipeline.
#[derive(Debug, thiserror::Error)]
pub enum AnalyticError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("certification failed after {iterations} halvings: {reason} (epsilon {epsilon:.3e}, min D {min_d:.3e}, condition estimate {condition:.3e})")]
    Certification {
        iterations: u32,
        epsilon: f64,
        min_d: f64,
        condition: f64,
        reason: String,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

type Result<T> = std::result::Result<T, AnalyticError>;

// ---------------------------------------------------------------------------
// Trigonometric polynomials
// ---------------------------------------------------------------------------

/// A real trigonometric polynomial c[0] + Σ_{k≥1} c[k]·cos(kx) + s[k]·sin(kx).
/// `sin[0]` is always 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            cos: vec![c],
            sin: vec![0.0],
        }
    }

    pub fn degree(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.cos[0];
        // recurrence on cos(kx), sin(kx)
        let (sx, cx) = x.sin_cos();
        let (mut sk, mut ck) = (sx, cx);
        for k in 1..self.cos.len() {
            v += self.cos[k] * ck + self.sin[k] * sk;
            let c_next = ck * cx - sk * sx;
            let s_next = sk * cx + ck * sx;
            ck = c_next;
            sk = s_next;
            let _ = k;
        }
        v
    }

    /// A global bound on |d/dx| from the coefficients: Σ k(|c_k| + |s_k|).
    pub fn derivative_bound(&self) -> f64 {
        (1..self.cos.len())
            .map(|k| k as f64 * (self.cos[k].abs() + self.sin[k].abs()))
            .sum()
    }

    /// The antiderivative evaluated at x, with the constant term integrated
    /// as c[0]·x (so the result is well defined on the line, not the circle).
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut v = self.cos[0] * x;
        let (sx, cx) = x.sin_cos();
        let (mut sk, mut ck) = (sx, cx);
        for k in 1..self.cos.len() {
            v += (self.cos[k] * sk - self.sin[k] * ck) / k as f64;
            let c_next = ck * cx - sk * sx;
            let s_next = sk * cx + ck * sx;
            ck = c_next;
            sk = s_next;
        }
        v
    }

    /// Exact integral over [a, b].
    pub fn integral_on(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn spectrum(&self) -> Vec<Complex64> {
        // index k + d for harmonic k in [-d, d]
        let d = self.degree();
        let mut sp = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        sp[d] = Complex64::new(self.cos[0], 0.0);
        for k in 1..=d {
            let half = Complex64::new(self.cos[k] / 2.0, -self.sin[k] / 2.0);
            sp[d + k] = half;
            sp[d - k] = half.conj();
        }
        sp
    }

    fn from_spectrum(sp: &[Complex64]) -> Self {
        let d = sp.len() / 2;
        let mut cos = vec![sp[d].re; d + 1];
        let mut sin = vec![0.0; d + 1];
        for k in 1..=d {
            cos[k] = 2.0 * sp[d + k].re;
            sin[k] = -2.0 * sp[d + k].im;
        }
        TrigPoly { cos, sin }
    }

    /// Values on the uniform grid x_i = 2πi/G via an inverse FFT.
    pub fn eval_on_grid(&self, grid: usize) -> Vec<f64> {
        let d = self.degree();
        assert!(grid > 2 * d, "grid too coarse for the degree");
        let sp = self.spectrum();
        let mut buf = vec![Complex64::new(0.0, 0.0); grid];
        for k in 0..=d {
            buf[k] = sp[d + k];
            if k > 0 {
                buf[grid - k] = sp[d - k];
            }
        }
        FftPlanner::new().plan_fft_inverse(grid).process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Product of two trigonometric polynomials (spectrum convolution).
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let a = self.spectrum();
        let b = other.spectrum();
        let da = self.degree() as isize;
        let db = other.degree() as isize;
        let d = (da + db) as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        for (i, &ai) in a.iter().enumerate() {
            let ka = i as isize - da;
            for (j, &bj) in b.iter().enumerate() {
                let kb = j as isize - db;
                out[(ka + kb + d as isize) as usize] += ai * bj;
            }
        }
        TrigPoly::from_spectrum(&out)
    }

    pub fn scale(&self, t: f64) -> TrigPoly {
        TrigPoly {
            cos: self.cos.iter().map(|c| c * t).collect(),
            sin: self.sin.iter().map(|s| s * t).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &TrigPoly) {
        if other.cos.len() > self.cos.len() {
            self.cos.resize(other.cos.len(), 0.0);
            self.sin.resize(other.sin.len(), 0.0);
        }
        for k in 0..other.cos.len() {
            self.cos[k] += other.cos[k];
            self.sin[k] += other.sin[k];
        }
    }
}

/// The periodic root polynomial: the product of sin((x − x_j)/2) over the
/// nodes, with the first factor squared when the count is odd (a product of
/// an even number of half-angle sines is 2π-periodic; an odd one is not).
/// Vanishes exactly on the node set and nowhere else.
pub fn build_root_polynomial(nodes: &[f64]) -> Result<TrigPoly> {
    if nodes.is_empty() {
        return Err(AnalyticError::Input("no nodes".into()));
    }
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if (a - b).abs() < 1e-12 {
                return Err(AnalyticError::Input(format!("duplicate nodes at {a}")));
            }
        }
    }
    let mut factors: Vec<f64> = nodes.to_vec();
    if factors.len() % 2 == 1 {
        factors.push(factors[0]); // square the first sine
    }
    // Laurent polynomial in z = e^{ix/2}: sin((x−a)/2) = (z·w̄ − z̄·w)/(2i)
    // with w = e^{ia/2}; the product of an even number of factors has only
    // even powers of z, i.e. integer harmonics of x.
    let m = factors.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * m + 1]; // z^{k-m}
    coeffs[m] = Complex64::new(1.0, 0.0);
    let mut lo = m; // lowest populated index
    let mut hi = m;
    for a in &factors {
        let w = Complex64::new(0.0, -a / 2.0).exp(); // e^{-ia/2}
        let inv2i = Complex64::new(0.0, -0.5); // 1/(2i)
        let up = w * inv2i; // multiplies z^{+1}
        let down = -w.conj() * inv2i; // multiplies z^{-1}
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len()];
        for i in lo..=hi {
            let c = coeffs[i];
            next[i + 1] += c * up;
            next[i - 1] += c * down;
        }
        coeffs = next;
        lo -= 1;
        hi += 1;
    }
    // only even offsets from m survive; offset 2t is harmonic t
    let d = m / 2;
    let mut sp = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
    for t in -(d as isize)..=(d as isize) {
        sp[(t + d as isize) as usize] = coeffs[(m as isize + 2 * t) as usize];
    }
    Ok(TrigPoly::from_spectrum(&sp))
}

// ---------------------------------------------------------------------------
// The interpolation system
// ---------------------------------------------------------------------------

/// One assembled linear system at a fixed ε: a_jk = ∫_{x_k}^{x_{k+1}} q·r_j,
/// with right-hand side (y_{k+1} − y_k) − (x_{k+1} − x_k).
#[derive(Clone, Debug)]
pub struct InterpSystem {
    pub epsilon: f64,
    /// matrix[k][j] = a_jk
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub solution: Vec<f64>,
    /// max |A·S − rhs|
    pub residual: f64,
    /// ∞-norm condition estimate of the matrix
    pub condition: f64,
}

/// Dense LU with partial pivoting; returns (solution, condition estimate).
fn lu_solve(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.len();
    if n > 64 {
        return Err(AnalyticError::Input(format!("system too large: {n} > 64")));
    }
    let norm_a = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pval == 0.0 || !pval.is_finite() {
            return Err(AnalyticError::Input("singular interpolation matrix".into()));
        }
        m.swap(col, piv);
        perm.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            m[r][col] = f;
            for c in col + 1..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let solve_with = |rhs: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for r in 1..n {
            for c in 0..r {
                y[r] -= m[r][c] * y[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                y[r] -= m[r][c] * y[c];
            }
            y[r] /= m[r][r];
        }
        y
    };
    let x = solve_with(b);
    // ∞-norm of the inverse, column by column (n ≤ 64 keeps this cheap)
    let mut inv_norm_rows = vec![0.0f64; n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (r, v) in solve_with(&e).iter().enumerate() {
            inv_norm_rows[r] += v.abs();
        }
    }
    let inv_norm = inv_norm_rows.iter().fold(0.0f64, |acc, &v| acc.max(v));
    Ok((x, norm_a * inv_norm))
}

/// The piecewise bump ρ_j^ε: ε off the span, 1/q inside it, joined by linear
/// ramps of width ε at both ends.
fn rho(q: &TrigPoly, xj: f64, xj1: f64, eps: f64, x: f64) -> f64 {
    // position of x within [xj, xj1), circularly
    let span = xj1 - xj;
    let t = (x - xj).rem_euclid(TAU);
    if t >= span {
        return eps;
    }
    if t <= eps {
        let edge = 1.0 / q.eval(xj + eps);
        eps + (edge - eps) * (t / eps)
    } else if t >= span - eps {
        let edge = 1.0 / q.eval(xj1 - eps);
        eps + (edge - eps) * ((span - t) / eps)
    } else {
        1.0 / q.eval(xj + t)
    }
}

/// Least-squares trigonometric projection of ρ_j^ε on a uniform grid: the
/// truncated discrete Fourier transform.
fn project_bump(q: &TrigPoly, xj: f64, xj1: f64, eps: f64, n_nodes: usize) -> TrigPoly {
    // the ramp corners have height ~1/ε, so truncation ringing away from the
    // span scales like 1/(degree·ε): the degree must grow faster than 1/ε
    // for the ringing to stay below the sign margins of small spans
    let target = ((160.0 * n_nodes as f64 / eps).ceil() as usize).max(256);
    let grid = target.next_power_of_two().min(1 << 19);
    let degree = ((64.0 / eps).ceil() as usize).min(grid / 2 - 1).min(16384);
    let mut samples: Vec<Complex64> = (0..grid)
        .map(|i| Complex64::new(rho(q, xj, xj1, eps, TAU * i as f64 / grid as f64), 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(grid)
        .process(&mut samples);
    let mut sp = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
    for k in 0..=degree {
        sp[degree + k] = samples[k] / grid as f64;
        if k > 0 {
            sp[degree - k] = samples[grid - k] / grid as f64;
        }
    }
    TrigPoly::from_spectrum(&sp)
}

// ---------------------------------------------------------------------------
// Certified diffeomorphisms
// ---------------------------------------------------------------------------

/// A certified smooth circle diffeomorphism f with derivative
/// D(x) = 1 + q(x)·r(x): D > 0 everywhere (grid check plus a
/// derivative-bound certificate), f(x_j) = y_j and D(x_j) = 1 to tolerance,
/// and D − 1 has the prescribed sign strictly inside every span.
#[derive(Clone, Debug)]
pub struct TrigDiffeo {
    /// nodes in radians, increasing in [0, 2π)
    pub nodes: Vec<f64>,
    /// targets; targets[0] ∈ [0, 2π), increasing, < targets[0] + 2π
    pub targets: Vec<f64>,
    /// the derivative D = 1 + q·r; its constant term is exactly 1
    pub deriv: TrigPoly,
    /// accepted ε
    pub epsilon: f64,
    /// solution S_1..S_n at the accepted ε
    pub s_values: Vec<f64>,
    /// solution at the previous (double) ε, for convergence reporting
    pub s_previous: Vec<f64>,
    /// certified global minimum of D (grid minimum minus the bound margin)
    pub min_d: f64,
    /// linear-system residual at acceptance
    pub residual: f64,
}

impl TrigDiffeo {
    /// The lift value f(x): degree one since the mean of D is exactly 1.
    pub fn apply(&self, x: f64) -> f64 {
        self.targets[0] + self.deriv.integral_on(self.nodes[0], x)
    }

    /// f as a circle map: the value reduced to [0, 2π).
    pub fn apply_mod(&self, x: f64) -> f64 {
        self.apply(x).rem_euclid(TAU)
    }

    /// The derivative f′(x) = D(x).
    pub fn derivative(&self, x: f64) -> f64 {
        self.deriv.eval(x)
    }

    /// Certified inverse by monotone bisection on the lift: |f(x) − y| below
    /// 1e−12 absolute at the returned point.
    pub fn apply_inverse(&self, y: f64) -> f64 {
        // exact bracket from equivariance: f maps [x_1 + k·2π, x_1 + (k+1)·2π]
        // onto [y_1 + k·2π, y_1 + (k+1)·2π]
        let k = ((y - self.targets[0]) / TAU).floor();
        let mut lo = self.nodes[0] + k * TAU;
        let mut hi = lo + TAU;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Serialize: node list and Fourier coefficients as decimal text with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "trig-diffeo v1");
        let _ = writeln!(out, "epsilon {:.16e}", self.epsilon);
        let _ = writeln!(out, "min-d {:.16e}", self.min_d);
        let _ = writeln!(out, "residual {:.16e}", self.residual);
        let fmt_list = |label: &str, vs: &[f64], out: &mut String| {
            let _ = write!(out, "{label}");
            for v in vs {
                let _ = write!(out, " {:.16e}", v);
            }
            let _ = writeln!(out);
        };
        fmt_list("nodes", &self.nodes, &mut out);
        fmt_list("targets", &self.targets, &mut out);
        fmt_list("s-values", &self.s_values, &mut out);
        fmt_list("s-previous", &self.s_previous, &mut out);
        fmt_list("cos", &self.deriv.cos, &mut out);
        fmt_list("sin", &self.deriv.sin, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("trig-diffeo v1") {
            return Err(AnalyticError::Parse("missing trig-diffeo v1 header".into()));
        }
        for line in lines {
            let mut it = line.split_whitespace();
            let Some(label) = it.next() else { continue };
            let vals: Vec<f64> = it
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| AnalyticError::Parse(format!("bad number {t}: {e}")))
                })
                .collect::<Result<_>>()?;
            fields.insert(label, vals);
        }
        let take = |k: &str| -> Result<Vec<f64>> {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| AnalyticError::Parse(format!("missing field {k}")))
        };
        let scalar = |k: &str| -> Result<f64> {
            let v = take(k)?;
            v.first()
                .copied()
                .ok_or_else(|| AnalyticError::Parse(format!("empty field {k}")))
        };
        Ok(TrigDiffeo {
            nodes: take("nodes")?,
            targets: take("targets")?,
            deriv: TrigPoly {
                cos: take("cos")?,
                sin: take("sin")?,
            },
            epsilon: scalar("epsilon")?,
            s_values: take("s-values")?,
            s_previous: take("s-previous")?,
            min_d: scalar("min-d")?,
            residual: scalar("residual")?,
        })
    }
}

/// Span sign classification from the data: +1 expanding, −1 contracting,
/// 0 neutral (equal lengths, no sign requirement).
fn span_signs(xs: &[f64], ys: &[f64]) -> Vec<i8> {
    let n = xs.len();
    (0..n)
        .map(|j| {
            let dx = if j + 1 < n {
                xs[j + 1] - xs[j]
            } else {
                xs[0] + TAU - xs[j]
            };
            let dy = if j + 1 < n {
                ys[j + 1] - ys[j]
            } else {
                ys[0] + TAU - ys[j]
            };
            let diff = dy - dx;
            if diff > 1e-12 {
                1
            } else if diff < -1e-12 {
                -1
            } else {
                0
            }
        })
        .collect()
}

struct Certificate {
    min_d: f64,
    failure: Option<String>,
}

/// Grid-plus-bound certificate for D: positivity everywhere, value 1 at the
/// nodes, prescribed sign strictly inside every span (checked on the span
/// shrunk by one grid step, reconciling the open-span statement with closed
/// sub-intervals), and node interpolation |f(x_j) − y_j| ≤ tol.
fn certify(d: &TrigDiffeo, signs: &[i8], tol: f64) -> Certificate {
    let bound = d.deriv.derivative_bound();
    // provisional minimum on a coarse grid, then a grid fine enough that the
    // derivative-bound margin cannot cancel it
    let coarse = d.deriv.eval_on_grid((4096usize).max(4 * d.deriv.degree().max(1)).next_power_of_two());
    let m0 = coarse.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if m0 <= 0.0 {
        return Certificate {
            min_d: m0,
            failure: Some(format!("positivity: grid min D = {m0:.3e}")),
        };
    }
    let wanted = (4.0 * bound * TAU / m0).ceil() as usize;
    let n_grid = (4096usize)
        .max(8 * d.deriv.degree().max(1))
        .max(wanted)
        .next_power_of_two();
    if n_grid > 1 << 22 {
        return Certificate {
            min_d: m0 - bound * PI / (1 << 22) as f64,
            failure: Some(format!(
                "positivity: derivative bound {bound:.3e} too large to certify"
            )),
        };
    }
    let h = TAU / n_grid as f64;
    let margin = bound * h / 2.0;
    let vals = d.deriv.eval_on_grid(n_grid);
    let grid_min = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let min_d = grid_min - margin;
    if min_d <= 0.0 {
        return Certificate {
            min_d,
            failure: Some(format!("positivity: certified min D = {min_d:.3e}")),
        };
    }
    let n = d.nodes.len();
    for j in 0..n {
        let dv = d.deriv.eval(d.nodes[j]);
        if (dv - 1.0).abs() > tol {
            return Certificate {
                min_d,
                failure: Some(format!("node derivative: D(x_{}) = {dv:.12}", j + 1)),
            };
        }
        let fx = d.apply(d.nodes[j]);
        if (fx - d.targets[j]).abs() > tol {
            return Certificate {
                min_d,
                failure: Some(format!(
                    "interpolation: |f(x_{}) - y_{}| = {:.3e}",
                    j + 1,
                    j + 1,
                    (fx - d.targets[j]).abs()
                )),
            };
        }
    }
    for j in 0..n {
        if signs[j] == 0 {
            continue;
        }
        // the open-span statement is checked on the span shrunk by one step
        // of the baseline 4096-point grid (boundary convention: within one
        // ramp of a node the sign may equalize at finite ε)
        let shrink = TAU / 4096.0;
        let a = d.nodes[j] + shrink;
        let b = if j + 1 < n {
            d.nodes[j + 1]
        } else {
            d.nodes[0] + TAU
        } - shrink;
        if b <= a {
            continue; // span thinner than the shrink: nothing to check
        }
        // check on grid points inside [a, b] (precomputed values)
        let lo = (a / h).ceil() as usize;
        let hi = (b / h).floor() as usize;
        for i in lo..=hi {
            let v = vals[i % n_grid];
            if (signs[j] > 0 && v <= 1.0) || (signs[j] < 0 && v >= 1.0) {
                return Certificate {
                    min_d,
                    failure: Some(format!(
                        "sign: D({:.6}) = {v:.6} violates span {} ({})",
                        i as f64 * h,
                        j + 1,
                        if signs[j] > 0 { "expanding" } else { "contracting" }
                    )),
                };
            }
        }
    }
    Certificate {
        min_d,
        failure: None,
    }
}

/// Assemble and solve the interpolation system at a fixed ε.
fn assemble(
    q: &TrigPoly,
    xs: &[f64],
    ys: &[f64],
    eps: f64,
) -> Result<(InterpSystem, Vec<TrigPoly>)> {
    let n = xs.len();
    let spans: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            if j + 1 < n {
                (xs[j], xs[j + 1])
            } else {
                (xs[j], xs[0] + TAU)
            }
        })
        .collect();
    let bumps: Vec<TrigPoly> = spans
        .iter()
        .map(|&(a, b)| project_bump(q, a, b, eps, n))
        .collect();
    let products: Vec<TrigPoly> = bumps.iter().map(|r| q.mul(r)).collect();
    let mut matrix = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for k in 0..n {
        let (a, b) = spans[k];
        for j in 0..n {
            matrix[k][j] = products[j].integral_on(a, b);
        }
        let dy = if k + 1 < n {
            ys[k + 1] - ys[k]
        } else {
            ys[0] + TAU - ys[k]
        };
        rhs[k] = dy - (b - a);
    }
    let (solution, condition) = lu_solve(&matrix, &rhs)?;
    let residual = (0..n)
        .map(|k| {
            ((0..n).map(|j| matrix[k][j] * solution[j]).sum::<f64>() - rhs[k]).abs()
        })
        .fold(0.0, f64::max);
    Ok((
        InterpSystem {
            epsilon: eps,
            matrix,
            rhs,
            solution,
            residual,
            condition,
        },
        products,
    ))
}

/// Build a certified circle diffeomorphism with f(x_j) = y_j, f′(x_j) = 1,
/// and f′ on the correct side of 1 strictly inside every span. The bump
/// width ε starts at a quarter of the minimal node gap and halves until the
/// certificates pass (at most 40 times).
pub fn trig_interpolate(xs: &[f64], ys: &[f64], tol: f64) -> Result<TrigDiffeo> {
    let n = xs.len();
    if n == 0 || ys.len() != n {
        return Err(AnalyticError::Input(
            "need equally many nodes and targets, at least one".into(),
        ));
    }
    for j in 0..n {
        if !(0.0..TAU).contains(&xs[j]) {
            return Err(AnalyticError::Input(format!("node {} outside [0, 2π)", xs[j])));
        }
        if j > 0 && xs[j] <= xs[j - 1] {
            return Err(AnalyticError::Input("nodes not strictly increasing".into()));
        }
        if j > 0 && ys[j] <= ys[j - 1] {
            return Err(AnalyticError::Input("targets not strictly increasing".into()));
        }
    }
    if ys[n - 1] >= ys[0] + TAU {
        return Err(AnalyticError::Input("targets span at least a full turn".into()));
    }
    if tol <= 0.0 {
        return Err(AnalyticError::Input("tolerance must be positive".into()));
    }
    let q = build_root_polynomial(xs)?;
    let signs = span_signs(xs, ys);
    let min_gap = (0..n)
        .map(|j| {
            if j + 1 < n {
                xs[j + 1] - xs[j]
            } else {
                xs[0] + TAU - xs[j]
            }
        })
        .fold(f64::INFINITY, f64::min);
    // limit values of the solution: S_j → Δy_j/Δx_j − 1 as ε → 0
    let limits: Vec<f64> = (0..n)
        .map(|j| {
            let dx = if j + 1 < n {
                xs[j + 1] - xs[j]
            } else {
                xs[0] + TAU - xs[j]
            };
            let dy = if j + 1 < n {
                ys[j + 1] - ys[j]
            } else {
                ys[0] + TAU - ys[j]
            };
            dy / dx - 1.0
        })
        .collect();
    let mut eps = min_gap / 4.0;
    let mut prev_solution: Option<Vec<f64>> = None;
    let mut last_diag = (f64::NAN, f64::NAN, String::from("no iteration ran"));
    let trace = std::env::var_os("PINGPONG_INTERP_TRACE").is_some();
    for iter in 0..40u32 {
        let (sys, products) = assemble(&q, xs, ys, eps)?;
        if trace {
            eprintln!(
                "iter {iter}: eps {eps:.3e} residual {:.3e} cond {:.3e} S {:?} limits {:?}",
                sys.residual, sys.condition, sys.solution, limits
            );
        }
        // accept only once the solution has essentially converged: within
        // 10% of its limit value, with the matrix diagonally dominant
        let converged = (0..n).all(|j| {
            (sys.solution[j] - limits[j]).abs() <= 0.1 * limits[j].abs() + 1e-3
        });
        let dominant = (0..n).all(|k| {
            sys.matrix[k][k].abs()
                > (0..n)
                    .filter(|&j| j != k)
                    .map(|j| sys.matrix[k][j].abs())
                    .sum::<f64>()
        });
        if !converged || !dominant {
            last_diag = (
                sys.condition,
                f64::NAN,
                if converged {
                    "matrix not diagonally dominant".to_string()
                } else {
                    "solution not yet within 10% of its limit".to_string()
                },
            );
            prev_solution = Some(sys.solution);
            eps /= 2.0;
            if eps < 1e-14 {
                break;
            }
            continue;
        }
        if sys.residual <= 1e-10 {
            // D = 1 + Σ S_j (q·r_j), with the constant term of the
            // correction pinned to 0 so the lift has degree exactly one
            let mut qr = TrigPoly::constant(0.0);
            for (j, p) in products.iter().enumerate() {
                qr.add_assign(&p.scale(sys.solution[j]));
            }
            qr.cos[0] = 0.0;
            let mut deriv = qr;
            deriv.cos[0] = 1.0;
            let cand = TrigDiffeo {
                nodes: xs.to_vec(),
                targets: ys.to_vec(),
                deriv,
                epsilon: eps,
                s_values: sys.solution.clone(),
                s_previous: prev_solution.clone().unwrap_or_else(|| sys.solution.clone()),
                min_d: 0.0,
                residual: sys.residual,
            };
            let cert = certify(&cand, &signs, tol);
            match cert.failure {
                None => {
                    return Ok(TrigDiffeo {
                        min_d: cert.min_d,
                        ..cand
                    })
                }
                Some(reason) => {
                    if trace {
                        eprintln!("iter {iter}: cert failed: {reason}");
                    }
                    last_diag = (sys.condition, cert.min_d, reason);
                }
            }
        } else {
            last_diag = (
                sys.condition,
                f64::NAN,
                format!("residual {:.3e} above 1e-10", sys.residual),
            );
        }
        prev_solution = Some(sys.solution);
        let _ = iter;
        eps /= 2.0;
        if eps < 1e-14 {
            break;
        }
    }
    Err(AnalyticError::Certification {
        iterations: 40,
        epsilon: eps,
        min_d: last_diag.1,
        condition: last_diag.0,
        reason: last_diag.2,
    })
}

// ---------------------------------------------------------------------------
// Analytic minimal realization
// ---------------------------------------------------------------------------

fn point_to_radians(p: &crate::arith::RationalPoint) -> f64 {
    p.value().to_f64().unwrap_or(0.0) * TAU
}

/// Smooth the generators of a strictly Markovian free-group realization: for
/// each stable letter, a certified diffeomorphism matching the
/// piecewise-linear generator on the endpoint set Δ_0 ∪ s⁻¹(Δ_0), with unit
/// derivative at every node and expansion/contraction matching the
/// arc-length comparison on each span. Inverses are exact functional
/// inverses (apply_inverse).
pub fn analytic_realize_minimal(r: &Realization) -> Result<BTreeMap<String, TrigDiffeo>> {
    if !r.scheme.group.is_free() {
        return Err(AnalyticError::Input(
            "the smooth minimal pipeline requires a free marking".into(),
        ));
    }
    let s = &r.scheme;
    let n = s.intervals.len();
    let mut delta0: Vec<crate::arith::RationalPoint> = Vec::new();
    for i in 0..n {
        let (l, rt) = s
            .endpoints(i)
            .map_err(|e| AnalyticError::Input(e.to_string()))?;
        delta0.push(l);
        delta0.push(rt);
    }
    delta0.sort();
    delta0.dedup();
    let mut out = BTreeMap::new();
    for edge in s.group.stable_letters() {
        let f = r
            .generator(&edge.name)
            .ok_or_else(|| AnalyticError::Input(format!("missing generator {}", edge.name)))?;
        let finv = crate::arith::pl_invert(f);
        let mut nodes: Vec<crate::arith::RationalPoint> = delta0.clone();
        nodes.extend(delta0.iter().map(|p| finv.apply(p)));
        nodes.sort();
        nodes.dedup();
        let xs: Vec<f64> = nodes.iter().map(point_to_radians).collect();
        // lift targets: accumulate so the sequence increases within one turn
        let images: Vec<f64> = nodes.iter().map(|p| point_to_radians(&f.apply(p))).collect();
        let mut ys = images.clone();
        for j in 1..ys.len() {
            while ys[j] <= ys[j - 1] {
                ys[j] += TAU;
            }
        }
        if ys[ys.len() - 1] >= ys[0] + TAU {
            return Err(AnalyticError::Input(format!(
                "generator {} image points are not circularly ordered",
                edge.name
            )));
        }
        let d = trig_interpolate(&xs, &ys, 1e-9)?;
        out.insert(edge.name.clone(), d);
    }
    Ok(out)
}

/// The smooth action of any oriented letter: the diffeomorphism for the
/// positive letter, or the certified inverse for the negative one.
pub fn apply_letter(
    maps: &BTreeMap<String, TrigDiffeo>,
    letter: &str,
    x: f64,
) -> Result<f64> {
    if let Some(d) = maps.get(letter) {
        return Ok(d.apply_mod(x));
    }
    let pos = flip_orientation(letter);
    let d = maps
        .get(&pos)
        .ok_or_else(|| AnalyticError::Input(format!("unknown letter {letter}")))?;
    Ok(d.apply_inverse(x).rem_euclid(TAU))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_polynomial_two_nodes() {
        let q = build_root_polynomial(&[0.0, PI]).unwrap();
        // sin(x/2)·sin((x−π)/2) = −sin(x/2)cos(x/2)·sign … vanishes at 0, π
        assert!(q.eval(0.0).abs() < 1e-12);
        assert!(q.eval(PI).abs() < 1e-12);
        for &x in &[0.5f64, 1.0, 2.0, 4.0, 5.5] {
            let direct = (x / 2.0).sin() * ((x - PI) / 2.0).sin();
            assert!((q.eval(x) - direct).abs() < 1e-12, "x = {x}");
        }
        // 2π-periodic
        assert!((q.eval(1.0) - q.eval(1.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn root_polynomial_single_node_is_squared() {
        let q = build_root_polynomial(&[0.0]).unwrap();
        for &x in &[0.3f64, 1.0, 3.0] {
            let direct = (x / 2.0).sin().powi(2);
            assert!((q.eval(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn root_polynomial_zero_count() {
        let nodes = [0.3, 1.1, 2.9, 5.0];
        let q = build_root_polynomial(&nodes).unwrap();
        // count sign changes on a fine grid: exactly 4 simple zeros
        let g = 20000;
        let mut changes = 0;
        let mut prev = q.eval(0.0);
        for i in 1..=g {
            let v = q.eval(TAU * i as f64 / g as f64);
            if prev.signum() != v.signum() {
                changes += 1;
            }
            prev = v;
        }
        assert_eq!(changes, 4);
        assert!(build_root_polynomial(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn identity_interpolation() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let d = trig_interpolate(&xs, &xs, 1e-9).unwrap();
        for s in &d.s_values {
            assert!(s.abs() < 1e-9);
        }
        for &x in &[0.2, 1.7, 3.3, 6.0] {
            assert!((d.apply(x) - x).abs() < 1e-9);
            assert!((d.derivative(x) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn two_node_expansion_contraction() {
        let xs = [0.0, PI];
        let ys = [0.0, 1.5 * PI];
        let d = trig_interpolate(&xs, &ys, 1e-9).unwrap();
        assert!((d.apply(PI) - 1.5 * PI).abs() < 1e-9);
        assert!((d.derivative(0.0) - 1.0).abs() < 1e-9);
        assert!((d.derivative(PI) - 1.0).abs() < 1e-9);
        for i in 1..40 {
            let t = i as f64 / 40.0;
            assert!(d.derivative(t * PI) > 1.0, "expanding span at t = {t}");
            assert!(d.derivative(PI + t * PI) < 1.0, "contracting span at t = {t}");
        }
        // degree-one lift
        assert!((d.apply(1.0 + TAU) - d.apply(1.0) - TAU).abs() < 1e-9);
        // converged S values within 10% of the limit (Δy/Δx − 1)
        let limits = [0.5, -0.5];
        for j in 0..2 {
            assert!(
                (d.s_values[j] - limits[j]).abs() <= 0.1 * limits[j].abs(),
                "S_{} = {} vs {}",
                j + 1,
                d.s_values[j],
                limits[j]
            );
        }
    }

    #[test]
    fn inverse_round_trip_and_serialization() {
        let xs = [0.0, 1.0, 3.0, 4.5];
        let ys = [0.5, 2.0, 3.5, 5.0];
        let d = trig_interpolate(&xs, &ys, 1e-9).unwrap();
        for &x in &[0.1, 0.9, 2.2, 4.4, 6.0] {
            let y = d.apply(x);
            assert!((d.apply_inverse(y) - x).abs() < 1e-10);
        }
        let text = d.to_text();
        let back = TrigDiffeo::from_text(&text).unwrap();
        for &x in &[0.4, 2.0, 5.1] {
            assert!((back.apply(x) - d.apply(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_schottky_generators() {
        let s = crate::fixtures::fixture("schottky-minimal").unwrap();
        let r = crate::realize::realize_scheme(&s, None).unwrap();
        let maps = analytic_realize_minimal(&r).unwrap();
        assert_eq!(maps.len(), s.group.stable_letters().count());
        // rebuild the exact node set and compare the smooth map to the PL
        // generator at every node
        let mut delta0 = Vec::new();
        for i in 0..r.scheme.intervals.len() {
            let (l, rt) = r.scheme.endpoints(i).unwrap();
            delta0.push(l);
            delta0.push(rt);
        }
        delta0.sort();
        delta0.dedup();
        for (name, d) in &maps {
            let f = r.generator(name).unwrap();
            let finv = crate::arith::pl_invert(f);
            let mut exact_nodes = delta0.clone();
            exact_nodes.extend(delta0.iter().map(|p| finv.apply(p)));
            exact_nodes.sort();
            exact_nodes.dedup();
            assert_eq!(exact_nodes.len(), d.nodes.len());
            for (p, x) in exact_nodes.iter().zip(&d.nodes) {
                let expected = point_to_radians(&f.apply(p));
                let got = d.apply_mod(*x);
                let diff = (got - expected).abs();
                let diff = diff.min(TAU - diff);
                assert!(diff < 1e-8, "{name} at node {x}: {got} vs {expected}");
            }
            assert!(d.min_d > 0.0);
        }
    }
}
