//! `flowkick branch`: continue a fixed-point branch over tau or lambda.

use clap::Args;
use serde_json::json;

use flowkick_core::continuation::{self, FreeParam};
use flowkick_core::dynamics::DisturbanceParams;
use flowkick_core::equilibria::{newton_fixed_point, Stability};
use flowkick_core::linalg::dist;

use crate::config::RunConfig;
use crate::emit::{fmt_float, Emitter, Formats};
use crate::svg::{Plot, DASHED_BLUE, SOLID_BLUE};
use crate::{CliError, CommonArgs};

#[derive(Args, Debug)]
pub struct BranchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Which parameter varies: tau or lambda
    #[arg(long)]
    pub free: String,
    /// Continuation window lo:hi for the free parameter
    #[arg(long, allow_hyphen_values = true)]
    pub window: String,
    /// Fixed tau (for --free lambda)
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Fixed lambda (for --free tau)
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Free-parameter value at the seed
    #[arg(long, allow_hyphen_values = true)]
    pub at: f64,
    /// Starting state guess, comma-separated (default: model equilibria)
    #[arg(long = "x0", allow_hyphen_values = true)]
    pub x0: Option<String>,
}

pub fn run(args: &BranchArgs) -> Result<(), CliError> {
    let loaded = super::load_system(&args.common)?;
    let sys = &loaded.system;
    let n = sys.dim();
    let formats = Formats::parse(&args.common.format).map_err(CliError::Usage)?;
    let window = super::parse_window(&args.window)?;
    if window.0 >= window.1 {
        return Err(CliError::Usage(format!(
            "empty continuation window {}:{}",
            window.0, window.1
        )));
    }
    if args.at < window.0 || args.at > window.1 {
        return Err(CliError::Usage(format!(
            "--at {} lies outside the window {}:{}",
            args.at, window.0, window.1
        )));
    }

    let free = match args.free.as_str() {
        "tau" => FreeParam::Tau,
        "lambda" => FreeParam::Lambda,
        other => {
            return Err(CliError::Usage(format!(
                "--free must be tau or lambda, got '{other}'"
            )))
        }
    };
    let (seed_tau, seed_lambda) = match free {
        FreeParam::Tau => {
            let lambda = args
                .lambda
                .ok_or_else(|| CliError::Usage("--free tau needs --lambda".into()))?;
            (args.at, lambda)
        }
        FreeParam::Lambda => {
            let tau = args
                .tau
                .ok_or_else(|| CliError::Usage("--free lambda needs --tau".into()))?;
            (tau, args.at)
        }
    };
    let p_seed = DisturbanceParams::new(seed_tau, seed_lambda).map_err(super::numeric)?;

    let config = RunConfig {
        command: "branch".into(),
        model: args.common.model.clone(),
        system_file: args.common.system.as_ref().map(|p| p.display().to_string()),
        m: args.common.m,
        tau: args.tau,
        lambda: args.lambda,
        free: Some(args.free.clone()),
        at: Some(args.at),
        window: Some(window),
        x0: args.x0.iter().cloned().collect(),
        tol: args.common.tol,
        seed: args.common.seed,
        threads: args.common.threads,
        formats: formats.list(),
        ..RunConfig::default()
    };
    let mut emitter = Emitter::new(&args.common.out, &config)?;

    // Seed fixed point.
    let user: Vec<Vec<f64>> = match &args.x0 {
        Some(t) => vec![super::parse_state(t, n)?],
        None => Vec::new(),
    };
    let guesses = super::guesses_for(&loaded, &user, seed_lambda);
    if guesses.is_empty() {
        return Err(CliError::Usage(
            "no seed available: give --x0 or use a built-in model".into(),
        ));
    }
    let mut seed_rec = None;
    for guess in &guesses {
        if let Ok(rec) = newton_fixed_point(sys, &p_seed, guess, args.common.tol.max(1e-12), 40) {
            seed_rec = Some(rec);
            break;
        }
    }
    let seed_rec = seed_rec.ok_or_else(|| {
        CliError::Numeric(flowkick_core::FkError::NoFixedPoint {
            iters: 40,
            residual: f64::NAN,
            last: guesses[0].clone(),
        })
    })?;

    let step = super::step_control(args.common.tol);
    let branch = continuation::continue_branch(sys, &seed_rec, free, window, &step)
        .map_err(super::numeric)?;

    // Arclength over (x, param).
    let mut arclength = vec![0.0f64];
    for w in branch.points.windows(2) {
        let mut a = w[0].x.clone();
        a.push(branch.param_of(&w[0]));
        let mut b = w[1].x.clone();
        b.push(branch.param_of(&w[1]));
        arclength.push(arclength.last().unwrap() + dist(&a, &b));
    }
    // Event marker for the segment each event falls into.
    let mut marker: Vec<String> = vec![String::new(); branch.points.len()];
    for ev in &branch.events {
        let target = match free {
            FreeParam::Tau => ev.tau,
            FreeParam::Lambda => ev.lambda,
        };
        if let Some((idx, _)) = branch
            .points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (branch.param_of(a) - target).abs();
                let db = (branch.param_of(b) - target).abs();
                da.partial_cmp(&db).unwrap()
            })
        {
            if !marker[idx].is_empty() {
                marker[idx].push('+');
            }
            marker[idx].push_str(&ev.btype.to_string());
        }
    }

    if formats.csv {
        let state_cols: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        let mod_cols: Vec<String> = (1..=n).map(|i| format!("eig_mod_{i}")).collect();
        let mut columns: Vec<&str> = vec!["arclength", "param"];
        columns.extend(state_cols.iter().map(|s| s.as_str()));
        columns.extend(mod_cols.iter().map(|s| s.as_str()));
        columns.extend(["stability", "event"]);
        let rows: Vec<Vec<String>> = branch
            .points
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let mut row = vec![fmt_float(arclength[i]), fmt_float(branch.param_of(rec))];
                row.extend(rec.x.iter().map(|&v| fmt_float(v)));
                row.extend(rec.eigenvalues.iter().map(|e| fmt_float(e.norm())));
                row.push(rec.stability.to_string());
                row.push(marker[i].clone());
                row
            })
            .collect();
        emitter.csv("branch.csv", &columns, &rows)?;
    }

    if formats.json {
        let points: Vec<serde_json::Value> = branch.points.iter().map(super::record_json).collect();
        let events: Vec<serde_json::Value> = branch.events.iter().map(event_json).collect();
        emitter.json(
            "branch.json",
            json!({
                "free": args.free,
                "fixed_other": branch.fixed_other,
                "window": window,
                "termination": format!("{:?}", branch.termination),
                "termination_backward": branch.termination_backward.map(|t| format!("{t:?}")),
                "folds": branch.folds,
                "points": points,
                "events": events,
            }),
        )?;
    }

    if formats.svg {
        let desc = emitter.svg_desc();
        let x_label = match free {
            FreeParam::Tau => "tau",
            FreeParam::Lambda => "lambda",
        };
        let mut plot = Plot::new(
            &format!("fixed-point branch over {x_label}"),
            x_label,
            "x_1",
            &desc,
        );
        for rec in &branch.points {
            plot.include_point(branch.param_of(rec), rec.x[0]);
        }
        // split into stable (solid) / non-stable (dashed) runs
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut run_stable = true;
        let mut first = true;
        let mut emitted_stable = false;
        let mut emitted_unstable = false;
        for rec in &branch.points {
            let stable = rec.stability == Stability::Stable;
            let pt = (branch.param_of(rec), rec.x[0]);
            if first {
                run_stable = stable;
                first = false;
            }
            if stable != run_stable && run.len() > 1 {
                let style = if run_stable { &SOLID_BLUE } else { &DASHED_BLUE };
                let label = label_for(run_stable, &mut emitted_stable, &mut emitted_unstable);
                plot.polyline(&run, style, label);
                let last = *run.last().unwrap();
                run.clear();
                run.push(last);
                run_stable = stable;
            }
            run.push(pt);
        }
        if run.len() > 1 {
            let style = if run_stable { &SOLID_BLUE } else { &DASHED_BLUE };
            let label = label_for(run_stable, &mut emitted_stable, &mut emitted_unstable);
            plot.polyline(&run, style, label);
        }
        for ev in &branch.events {
            let px = match free {
                FreeParam::Tau => ev.tau,
                FreeParam::Lambda => ev.lambda,
            };
            plot.marker(px, ev.x[0], "#d62728", Some(&ev.btype.to_string()));
        }
        emitter.svg("branch.svg", plot.render())?;
    }

    println!(
        "branch: {} points, {} fold(s), {} event(s), termination {:?}",
        branch.points.len(),
        branch.folds,
        branch.events.len(),
        branch.termination
    );
    for ev in &branch.events {
        println!("  {} at tau={}, lambda={}", ev.btype, ev.tau, ev.lambda);
    }
    for path in &emitter.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn label_for(
    stable: bool,
    emitted_stable: &mut bool,
    emitted_unstable: &mut bool,
) -> Option<&'static str> {
    if stable {
        if *emitted_stable {
            None
        } else {
            *emitted_stable = true;
            Some("stable")
        }
    } else if *emitted_unstable {
        None
    } else {
        *emitted_unstable = true;
        Some("unstable")
    }
}

pub fn event_json(ev: &continuation::BifurcationPoint<f64>) -> serde_json::Value {
    json!({
        "type": ev.btype.to_string(),
        "x": ev.x,
        "tau": ev.tau,
        "lambda": ev.lambda,
        "nonhyperbolicity": ev.test_values.nonhyperbolicity,
        "transversality": ev.test_values.transversality,
        "quadratic_dominance": ev.test_values.quadratic_dominance,
        "lambda_derivative": ev.test_values.lambda_derivative,
        "mixed_partial": ev.test_values.mixed_partial,
        "low_confidence": ev.low_confidence,
    })
}
