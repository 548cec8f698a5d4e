//! `flowkick bifcurve`: two-parameter bifurcation curves in (tau, lambda).

use clap::Args;
use serde_json::json;

use flowkick_core::continuation::{
    self, BifurcationType, CurveWindow, FreeParam,
};
use flowkick_core::dynamics::DisturbanceParams;
use flowkick_core::equilibria::newton_fixed_point;

use crate::config::RunConfig;
use crate::emit::{fmt_float, Emitter, Formats};
use crate::svg::{Plot, DASHED_BLACK, SOLID_BLACK};
use crate::{CliError, CommonArgs};

#[derive(Args, Debug)]
pub struct BifcurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Curve type: sn, ns, or tc
    #[arg(long = "type")]
    pub curve_type: String,
    /// Tau window lo:hi for the curve
    #[arg(long, allow_hyphen_values = true)]
    pub window: String,
    /// Lambda window lo:hi (curve bounds; also the seed-sweep range)
    #[arg(long = "lambda-window", allow_hyphen_values = true)]
    pub lambda_window: String,
    /// Tau of the seed branch sweep (sn defaults to 0, the continuous
    /// bifurcation; ns defaults to 0.05, a small-tau sweep)
    #[arg(long = "seed-tau", allow_hyphen_values = true)]
    pub seed_tau: Option<f64>,
    /// Starting state guess for the seed sweep
    #[arg(long = "x0", allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Invariant fixed point for tc curves, comma-separated state
    #[arg(long, allow_hyphen_values = true)]
    pub invariant: Option<String>,
    /// Directions spanning the invariant set for tc curves, comma-separated
    /// indices (empty string for a point)
    #[arg(long = "invariant-dirs")]
    pub invariant_dirs: Option<String>,
    /// Tau samples for tc curves
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
    /// Marked points to overlay on the SVG, "tau:lambda" (repeatable)
    #[arg(long = "mark", allow_hyphen_values = true)]
    pub marks: Vec<String>,
    /// Previously computed bifcurve.csv files to draw alongside this curve
    /// (repeatable)
    #[arg(long = "overlay")]
    pub overlays: Vec<std::path::PathBuf>,
}

pub fn run(args: &BifcurveArgs) -> Result<(), CliError> {
    let loaded = super::load_system(&args.common)?;
    let sys = &loaded.system;
    let n = sys.dim();
    let formats = Formats::parse(&args.common.format).map_err(CliError::Usage)?;
    let tau_window = super::parse_window(&args.window)?;
    let lambda_window = super::parse_window(&args.lambda_window)?;

    let config = RunConfig {
        command: "bifcurve".into(),
        model: args.common.model.clone(),
        system_file: args.common.system.as_ref().map(|p| p.display().to_string()),
        m: args.common.m,
        curve_type: Some(args.curve_type.clone()),
        window: Some(tau_window),
        lambda_window: Some(lambda_window),
        seed_tau: args.seed_tau,
        x0: args.x0.iter().cloned().collect(),
        invariant: args.invariant.clone(),
        invariant_dirs: args.invariant_dirs.clone(),
        samples: Some(args.samples),
        tol: args.common.tol,
        seed: args.common.seed,
        threads: args.common.threads,
        formats: formats.list(),
        ..RunConfig::default()
    };
    let mut emitter = Emitter::new(&args.common.out, &config)?;
    let step = super::step_control(args.common.tol);

    let (points, meta): (Vec<continuation::BifurcationPoint<f64>>, serde_json::Value) =
        match args.curve_type.as_str() {
            "sn" | "ns" => {
                let want_ns = args.curve_type == "ns";
                let seed_tau = args.seed_tau.unwrap_or(if want_ns { 0.05 } else { 0.0 });
                let seed_event =
                    sweep_for_event(args, &loaded, seed_tau, lambda_window, want_ns, &step)?;
                let window = CurveWindow {
                    tau: tau_window,
                    lambda: lambda_window,
                };
                let curve = if want_ns {
                    continuation::continue_ns_curve(sys, &seed_event, &window, &step)
                } else {
                    continuation::continue_sn_curve(sys, &seed_event, &window, &step)
                }
                .map_err(super::numeric)?;
                let meta = json!({
                    "seed_tau": seed_tau,
                    "seed_event": super::branch::event_json(&seed_event),
                    "termination_backward": format!("{:?}", curve.termination_backward),
                    "termination_forward": format!("{:?}", curve.termination_forward),
                    "note": "diagram may be incomplete: bifurcations disconnected from the tau=0 axis are not searched for",
                });
                (curve.points, meta)
            }
            "tc" => {
                let inv_text = args
                    .invariant
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--type tc needs --invariant".into()))?;
                let x_inv = super::parse_state(inv_text, n)?;
                let dirs: Vec<usize> = match &args.invariant_dirs {
                    None => Vec::new(),
                    Some(text) if text.trim().is_empty() => Vec::new(),
                    Some(text) => text
                        .split(',')
                        .map(|p| {
                            p.trim().parse::<usize>().map_err(|_| {
                                CliError::Usage(format!("bad direction index '{p}'"))
                            })
                        })
                        .collect::<Result<_, _>>()?,
                };
                if tau_window.0 <= 0.0 {
                    return Err(CliError::Usage(
                        "tc curves need a tau window with lo > 0".into(),
                    ));
                }
                let curve = continuation::tc_curve_at_invariant(
                    sys,
                    &x_inv,
                    &dirs,
                    tau_window,
                    args.samples,
                    lambda_window,
                    &step,
                )
                .map_err(super::numeric)?;
                let meta = json!({
                    "invariant": x_inv,
                    "invariant_dirs": dirs,
                    "skipped_taus": curve.skipped_taus,
                    "note": "diagram may be incomplete: bifurcations disconnected from the tau=0 axis are not searched for",
                });
                (curve.points, meta)
            }
            other => {
                return Err(CliError::Usage(format!(
                    "--type must be sn, ns, or tc, got '{other}'"
                )))
            }
        };

    if formats.csv {
        let state_cols: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        let mut columns: Vec<&str> = vec!["tau", "lambda"];
        columns.extend(state_cols.iter().map(|s| s.as_str()));
        columns.push("type");
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|pt| {
                let mut row = vec![fmt_float(pt.tau), fmt_float(pt.lambda)];
                row.extend(pt.x.iter().map(|&v| fmt_float(v)));
                row.push(pt.btype.to_string());
                row
            })
            .collect();
        emitter.csv("bifcurve.csv", &columns, &rows)?;
    }

    if formats.json {
        let data: Vec<serde_json::Value> = points.iter().map(super::branch::event_json).collect();
        emitter.json("bifcurve.json", json!({"points": data, "meta": meta}))?;
    }

    if formats.svg {
        let desc = emitter.svg_desc();
        let mut plot = Plot::new(
            &format!("{} bifurcation curve", args.curve_type),
            "tau",
            "lambda",
            &desc,
        );
        for pt in &points {
            plot.include_point(pt.tau, pt.lambda);
        }
        let overlays: Result<Vec<Overlay>, CliError> =
            args.overlays.iter().map(|p| read_overlay(p)).collect();
        let overlays = overlays?;
        for (_, line) in &overlays {
            for &(t, l) in line {
                plot.include_point(t, l);
            }
        }
        let marks: Result<Vec<(f64, f64)>, CliError> =
            args.marks.iter().map(|m| super::parse_window(m)).collect();
        let marks = marks?;
        for &(mt, ml) in &marks {
            plot.include_point(mt, ml);
        }
        let style = if args.curve_type == "tc" {
            &DASHED_BLACK
        } else {
            &SOLID_BLACK
        };
        let line: Vec<(f64, f64)> = points.iter().map(|pt| (pt.tau, pt.lambda)).collect();
        plot.polyline(&line, style, Some(&args.curve_type.to_uppercase()));
        for (label, overlay) in &overlays {
            plot.polyline(overlay, &crate::svg::DASHED_BLUE, Some(label));
        }
        for &(mt, ml) in &marks {
            plot.marker(mt, ml, "#d62728", None);
        }
        emitter.svg("bifcurve.svg", plot.render())?;
    }

    println!("{} curve: {} points", args.curve_type, points.len());
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        println!(
            "  from (tau={}, lambda={}) to (tau={}, lambda={})",
            first.tau, first.lambda, last.tau, last.lambda
        );
    }
    for path in &emitter.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

type Overlay = (String, Vec<(f64, f64)>);

/// Reads (tau, lambda) pairs and the curve type back out of an earlier
/// bifcurve.csv for overlay plotting.
fn read_overlay(path: &std::path::Path) -> Result<Overlay, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut label = String::from("overlay");
    let mut line = Vec::new();
    for row in text.lines() {
        if row.starts_with('#') || row.starts_with("tau,") || row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() < 3 {
            continue;
        }
        let tau: f64 = fields[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad overlay row in {}", path.display())))?;
        let lambda: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad overlay row in {}", path.display())))?;
        label = fields.last().unwrap().to_string();
        line.push((tau, lambda));
    }
    Ok((label, line))
}

/// Branch sweep over lambda at fixed tau; returns the first event of the
/// wanted kind as the curve seed.
fn sweep_for_event(
    args: &BifcurveArgs,
    loaded: &super::Loaded,
    seed_tau: f64,
    lambda_window: (f64, f64),
    want_ns: bool,
    step: &continuation::StepControl<f64>,
) -> Result<continuation::BifurcationPoint<f64>, CliError> {
    let sys = &loaded.system;
    let n = sys.dim();
    let lambda_mid = 0.5 * (lambda_window.0 + lambda_window.1);
    let user: Vec<Vec<f64>> = match &args.x0 {
        Some(t) => vec![super::parse_state(t, n)?],
        None => Vec::new(),
    };
    let mut guesses = super::guesses_for(loaded, &user, lambda_mid);
    // also try the window endpoints' equilibria
    if let Some(entry) = &loaded.entry {
        if let Some(oracle) = &entry.continuous_equilibria {
            guesses.extend(oracle(lambda_window.0));
            guesses.extend(oracle(lambda_window.1));
        }
    }
    if guesses.is_empty() {
        return Err(CliError::Usage(
            "no seed available: give --x0 or use a built-in model".into(),
        ));
    }

    let mut last_err: Option<flowkick_core::FkError> = None;
    for (lambda_seed, guess) in [lambda_mid, lambda_window.1, lambda_window.0]
        .iter()
        .flat_map(|l| guesses.iter().map(move |g| (*l, g.clone())))
    {
        let p = match DisturbanceParams::new(seed_tau, lambda_seed) {
            Ok(p) => p,
            Err(e) => return Err(super::numeric(e)),
        };
        let Ok(rec) = newton_fixed_point(sys, &p, &guess, step.corrector_tol, 40) else {
            continue;
        };
        match continuation::continue_branch(sys, &rec, FreeParam::Lambda, lambda_window, step) {
            Ok(branch) => {
                let hit = branch.events.into_iter().find(|e| {
                    if want_ns {
                        matches!(
                            e.btype,
                            BifurcationType::NeimarkSacker | BifurcationType::Hopf
                        )
                    } else {
                        e.btype == BifurcationType::SaddleNode
                    }
                });
                if let Some(ev) = hit {
                    return Ok(ev);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(CliError::Numeric(last_err.unwrap_or_else(|| {
        flowkick_core::FkError::Continuation(format!(
            "seed sweep at tau={seed_tau} found no {} event in the lambda window",
            if want_ns { "NS" } else { "SN" }
        ))
    })))
}
