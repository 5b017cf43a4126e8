//! Command-line front end: every subcommand is a thin wrapper over the
//! library; the CLI adds parsing, report formatting, and exit codes only.
//!
//! Exit codes: 0 success, 1 check failure, 2 input error, 3 resource cap.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num::ToPrimitive;

use crate::analytic;
use crate::arith::{format_rational, Rational};
use crate::dynamics;
use crate::fixtures;
use crate::realize::{realize_scheme, Realization};
use crate::render::render_scheme_svg;
use crate::scheme::{check_scheme, Scheme, Verdict};

pub const REPORT_SCHEMA: &str = "pingpong-report-v1";
const DEFAULT_CAP: usize = 1_000_000;

#[derive(Parser)]
#[command(
    name = "pingpong",
    about = "Exact ping-pong partitions on the circle: checking, realization, dynamics, rendering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// emit a JSON report instead of text
    #[arg(long)]
    json: bool,
    /// enumeration cap (overrides PINGPONG_CAP and the default of 1000000)
    #[arg(long)]
    cap: Option<usize>,
    /// seed for randomized sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Check the ping-pong axioms of a scheme file
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Realize a scheme as piecewise-linear homeomorphisms
    Realize {
        file: PathBuf,
        /// write the realization JSON here (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Analyze a realization: Markovian sequences, minimality, minimal set, census
    Analyze {
        file: PathBuf,
        /// print the per-interval Markovian sequences
        #[arg(long)]
        markov: bool,
        /// run the minimality certificate
        #[arg(long)]
        minimality: bool,
        /// estimate the minimal set at this refinement depth
        #[arg(long, value_name = "DEPTH")]
        minimal_set: Option<u32>,
        /// census of the word-metric ball of this radius
        #[arg(long, value_name = "L")]
        census: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Shrinking-interval profile of the DKN set of a generator
    Dkn {
        file: PathBuf,
        /// generator letter (the excluded first letter)
        #[arg(long = "gen")]
        generator: String,
        #[arg(long)]
        radius: u32,
        #[arg(long, default_value_t = 64)]
        grid: u32,
        /// report arcs whose final sup falls below this rational
        #[arg(long, default_value = "1/1000")]
        threshold: String,
        #[command(flatten)]
        common: Common,
    },
    /// Multiconvergence probe along an eventually-periodic ray
    Multiconv {
        file: PathBuf,
        /// ray letters, whitespace-separated, repeated cyclically
        #[arg(long)]
        ray: String,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Certified trigonometric interpolation
    Interp {
        /// node angles in radians, comma-separated
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<f64>,
        /// target angles in radians, comma-separated
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smooth the generators of a strictly Markovian free-group scheme
    AnalyticRealize {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a scheme or realization file as a deterministic SVG
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manage the bundled example schemes
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Subcommand)]
enum FixturesAction {
    /// List the bundled examples
    List,
    /// Write every bundled example as <dir>/<name>.scheme
    Install {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

/// Classify an error message into an exit code: resource caps are 3,
/// everything else on the input path is 2.
fn error_exit(msg: &str) -> i32 {
    let m = msg.to_ascii_lowercase();
    if m.contains("cap") || m.contains("overflow") {
        3
    } else {
        2
    }
}

fn effective_cap(c: &Common) -> usize {
    c.cap
        .or_else(|| {
            std::env::var("PINGPONG_CAP")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(DEFAULT_CAP)
}

fn read_scheme(path: &PathBuf) -> Result<Scheme, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Scheme::from_json(&text).map_err(|e| e.to_string())
}

/// Load a realization file; a scheme file is accepted too and realized on
/// the fly.
fn read_realization(path: &PathBuf) -> Result<Realization, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    match Realization::from_json(&text) {
        Ok(r) => Ok(r),
        Err(real_err) => match Scheme::from_json(&text) {
            Ok(s) => realize_scheme(&s, None)
                .map_err(|e| format!("realizing {}: {e}", path.display())),
            Err(_) => Err(real_err.to_string()),
        },
    }
}

fn write_output(out: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn verdict_str(v: &Verdict) -> String {
    match v {
        Verdict::Pass => "pass".into(),
        Verdict::NotApplicable => "n/a".into(),
        Verdict::Fail(m) => format!("FAIL: {m}"),
        Verdict::Unverifiable(m) => format!("unverifiable: {m}"),
    }
}

fn run_check(file: &PathBuf, common: &Common) -> i32 {
    let s = match read_scheme(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    // verify against the realized maps when the table realizes; fall back to
    // the purely symbolic check otherwise
    let maps = realize_scheme(&s, None).ok().map(|r| r.maps);
    let report = match check_scheme(&s, maps.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e.to_string());
        }
    };
    let valid = report.is_valid();
    let proper = report.is_proper();
    if common.json {
        let verdicts: BTreeMap<&str, String> = report
            .verdicts
            .iter()
            .map(|(n, v)| (n.as_str(), verdict_str(v)))
            .collect();
        let doc = serde_json::json!({
            "schema": REPORT_SCHEMA,
            "command": "check",
            "realized": maps.is_some(),
            "verdicts": verdicts,
            "failures": report.failures(),
            "valid": valid,
            "proper": proper,
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        for (name, v) in &report.verdicts {
            println!("{name}: {}", verdict_str(v));
        }
        println!("valid: {}", if valid { "yes" } else { "no" });
        println!("proper: {}", if proper { "yes" } else { "no" });
        for f in report.failures() {
            println!("failure: {f}");
        }
    }
    if proper {
        0
    } else {
        1
    }
}

fn run_realize(file: &PathBuf, out: Option<&PathBuf>, common: &Common) -> i32 {
    let s = match read_scheme(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    match realize_scheme(&s, None).and_then(|r| r.to_json()) {
        Ok(json) => {
            if let Err(e) = write_output(out, &(json + "\n")) {
                eprintln!("error: {e}");
                return 2;
            }
            if !common.json && out.is_some() {
                eprintln!("realization written");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit(&e.to_string())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_analyze(
    file: &PathBuf,
    markov: bool,
    minimality: bool,
    minimal_set: Option<u32>,
    census: Option<u32>,
    common: &Common,
) -> i32 {
    let r = match read_realization(file) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    let cap = effective_cap(common);
    let all = !markov && !minimality && minimal_set.is_none() && census.is_none();
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), REPORT_SCHEMA.into());
    doc.insert("command".into(), "analyze".into());
    if markov || all {
        match dynamics::markovian_sequences(&r.scheme) {
            Ok(ma) => {
                let mut seq = BTreeMap::new();
                for (id, o) in &ma.sequences {
                    let text = match o {
                        dynamics::MarkovOutcome::Sequence(s) => s.join(" "),
                        dynamics::MarkovOutcome::Neutral => "(neutral)".into(),
                    };
                    if !common.json {
                        println!("markov {id}: {text}");
                    }
                    seq.insert(id.clone(), text);
                }
                doc.insert("markov".into(), serde_json::json!(seq));
            }
            Err(e) => {
                eprintln!("error: {e}");
                return error_exit(&e.to_string());
            }
        }
    }
    if minimality || all {
        match dynamics::minimality_certificate(&r) {
            Ok(dynamics::Minimality::Minimal) => {
                if !common.json {
                    println!("minimality: certified");
                }
                doc.insert("minimality".into(), "certified".into());
            }
            Ok(dynamics::Minimality::NotCertified(m)) => {
                if !common.json {
                    println!("minimality: not certified ({m})");
                }
                doc.insert("minimality".into(), format!("not certified: {m}").into());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return error_exit(&e.to_string());
            }
        }
    }
    if let Some(depth) = minimal_set {
        match dynamics::minimal_set_estimate(&r, depth, 1024, cap) {
            Ok(est) => {
                let class = match est.classification {
                    dynamics::SetClass::MinimalLike => "minimal-like",
                    dynamics::SetClass::CantorLike => "cantor-like",
                };
                if !common.json {
                    println!(
                        "minimal-set depth {depth}: {} endpoints, largest gap {}, {} persistent arcs, {class}{}",
                        est.delta_size,
                        format_rational(&est.largest_gap),
                        est.persistent_arcs.len(),
                        if est.truncated { " (truncated)" } else { "" },
                    );
                }
                doc.insert(
                    "minimal_set".into(),
                    serde_json::json!({
                        "depth": depth,
                        "delta_size": est.delta_size,
                        "largest_gap": format_rational(&est.largest_gap),
                        "persistent_arcs": est.persistent_arcs.len(),
                        "truncated": est.truncated,
                        "classification": class,
                    }),
                );
            }
            Err(e) => {
                eprintln!("error: {e}");
                return error_exit(&e.to_string());
            }
        }
    }
    if let Some(radius) = census {
        match dynamics::ball_census(&r, radius, cap) {
            Ok(c) => {
                if !common.json {
                    println!(
                        "census radius {radius}: {} elements, max fixed components {}, spectrum {{{}}}, {} unresolved",
                        c.elements,
                        c.max_fixed_components,
                        c.spectrum.iter().cloned().collect::<Vec<_>>().join(", "),
                        c.unresolved,
                    );
                }
                doc.insert(
                    "census".into(),
                    serde_json::json!({
                        "radius": radius,
                        "elements": c.elements,
                        "max_fixed_components": c.max_fixed_components,
                        "spectrum": c.spectrum,
                        "unresolved": c.unresolved,
                    }),
                );
            }
            Err(e) => {
                eprintln!("error: {e}");
                return error_exit(&e.to_string());
            }
        }
    }
    if common.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::Value::Object(doc)).unwrap()
        );
    }
    0
}

fn run_dkn(
    file: &PathBuf,
    generator: &str,
    radius: u32,
    grid: u32,
    threshold: &str,
    common: &Common,
) -> i32 {
    let r = match read_realization(file) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    let thr: Rational = match crate::arith::parse_rational(threshold) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: bad threshold: {e}");
            return 2;
        }
    };
    match dynamics::dkn_u_estimate(&r, generator, radius, grid, &thr, effective_cap(common)) {
        Ok(p) => {
            if common.json {
                let doc = serde_json::json!({
                    "schema": REPORT_SCHEMA,
                    "command": "dkn",
                    "generator": p.generator,
                    "grid": p.grid,
                    "radii": p.radii,
                    "sup_lengths": p.sup_lengths.iter().map(format_rational).collect::<Vec<_>>(),
                    "interior_arcs": p.interior_arcs,
                    "shrinking_arcs": p.shrinking_arcs.len(),
                    "words": p.words,
                });
                println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            } else {
                println!("generator {} on a {}-point grid ({} words)", p.generator, p.grid, p.words);
                for (m, sup) in p.radii.iter().zip(&p.sup_lengths) {
                    println!(
                        "radius {m}: interior sup {} ({:.3e})",
                        format_rational(sup),
                        sup.to_f64().unwrap_or(f64::NAN)
                    );
                }
                println!(
                    "{} interior arcs, {} arcs below {}",
                    p.interior_arcs.len(),
                    p.shrinking_arcs.len(),
                    format_rational(&thr)
                );
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit(&e.to_string())
        }
    }
}

fn run_multiconv(file: &PathBuf, ray: &str, depth: usize, common: &Common) -> i32 {
    let r = match read_realization(file) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    let letters: Vec<String> = ray.split_whitespace().map(String::from).collect();
    match dynamics::multiconvergence_probe(&r, &letters, depth) {
        Ok(mc) => {
            let fmt_pts = |pts: &[crate::arith::RationalPoint]| {
                pts.iter().map(|p| p.to_string()).collect::<Vec<_>>()
            };
            if common.json {
                let doc = serde_json::json!({
                    "schema": REPORT_SCHEMA,
                    "command": "multiconv",
                    "ray": mc.ray,
                    "depth": depth,
                    "k_bound": mc.k_bound,
                    "final_components": mc.levels.last().map_or(0, Vec::len),
                    "repelling": fmt_pts(&mc.repelling),
                    "attracting": fmt_pts(&mc.attracting),
                    "consistent": mc.consistent(),
                });
                println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            } else {
                println!("ray [{}] to depth {depth}", mc.ray.join(" "));
                println!("K = {}, final components {}", mc.k_bound, mc.levels.last().map_or(0, Vec::len));
                println!("repelling ({}): {}", mc.repelling.len(), fmt_pts(&mc.repelling).join(", "));
                println!("attracting ({}): {}", mc.attracting.len(), fmt_pts(&mc.attracting).join(", "));
                println!("#A = #R <= K: {}", if mc.consistent() { "yes" } else { "no" });
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit(&e.to_string())
        }
    }
}

fn run_interp(nodes: &[f64], targets: &[f64], tol: f64, out: Option<&PathBuf>) -> i32 {
    match analytic::trig_interpolate(nodes, targets, tol) {
        Ok(d) => {
            if let Err(e) = write_output(out, &d.to_text()) {
                eprintln!("error: {e}");
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_analytic_realize(file: &PathBuf, out: Option<&PathBuf>) -> i32 {
    let s = match read_scheme(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    let r = match realize_scheme(&s, None) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e.to_string());
        }
    };
    match analytic::analytic_realize_minimal(&r) {
        Ok(maps) => {
            let mut content = String::new();
            for (name, d) in &maps {
                content.push_str(&format!("generator {name}\n"));
                content.push_str(&d.to_text());
                content.push('\n');
            }
            if let Err(e) = write_output(out, &content) {
                eprintln!("error: {e}");
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_exit(&e.to_string())
        }
    }
}

fn run_render(file: &PathBuf, out: &PathBuf) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    // scheme file or realization file: a realization carries its scheme
    let scheme = match Scheme::from_json(&text) {
        Ok(s) => s,
        Err(_) => match Realization::from_json(&text) {
            Ok(r) => r.scheme,
            Err(e) => {
                eprintln!("error: not a scheme or realization file: {e}");
                return 2;
            }
        },
    };
    match render_scheme_svg(&scheme) {
        Ok(svg) => {
            if let Err(e) = std::fs::write(out, svg) {
                eprintln!("error: cannot write {}: {e}", out.display());
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_fixtures(action: &FixturesAction) -> i32 {
    match action {
        FixturesAction::List => {
            for name in fixtures::FIXTURE_NAMES {
                println!("{name}");
            }
            0
        }
        FixturesAction::Install { dir } => {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: cannot create {}: {e}", dir.display());
                return 2;
            }
            for name in fixtures::FIXTURE_NAMES {
                let s = fixtures::fixture(name).expect("bundled fixture");
                let json = match s.to_json() {
                    Ok(j) => j,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return 2;
                    }
                };
                let path = dir.join(format!("{name}.scheme"));
                if let Err(e) = std::fs::write(&path, json + "\n") {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 2;
                }
                println!("wrote {}", path.display());
            }
            0
        }
    }
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Check { file, common } => run_check(file, common),
        Command::Realize { file, out, common } => run_realize(file, out.as_ref(), common),
        Command::Analyze {
            file,
            markov,
            minimality,
            minimal_set,
            census,
            common,
        } => run_analyze(file, *markov, *minimality, *minimal_set, *census, common),
        Command::Dkn {
            file,
            generator,
            radius,
            grid,
            threshold,
            common,
        } => run_dkn(file, generator, *radius, *grid, threshold, common),
        Command::Multiconv {
            file,
            ray,
            depth,
            common,
        } => run_multiconv(file, ray, *depth, common),
        Command::Interp {
            nodes,
            targets,
            tol,
            out,
        } => run_interp(nodes, targets, *tol, out.as_ref()),
        Command::AnalyticRealize { file, out } => run_analytic_realize(file, out.as_ref()),
        Command::Render { file, out } => run_render(file, out),
        Command::Fixtures { action } => run_fixtures(action),
    }
}

/// Binary entry point.
pub fn main() {
    let code = run(std::env::args_os());
    std::process::exit(code);
}
