//! `flowkick equilibria`: multi-start Newton at one (tau, lambda).

use clap::Args;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use flowkick_core::dynamics::DisturbanceParams;
use flowkick_core::equilibria::newton_fixed_point;
use flowkick_core::linalg::dist;

use crate::config::RunConfig;
use crate::emit::{fmt_float, Emitter, Formats};
use crate::{CliError, CommonArgs};

#[derive(Args, Debug)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Flow time between kicks; 0 solves the continuous analog
    #[arg(long)]
    pub tau: Option<f64>,
    /// Disturbance rate parameter
    #[arg(long, conflicts_with = "kappa", allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Kick magnitude; converted via lambda = kappa / tau
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Number of random Newton starts
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Sampling box for random starts, "lo:hi" per state, comma-separated
    /// (a single "lo:hi" is replicated across states)
    #[arg(long = "start-box", default_value = "0:2", allow_hyphen_values = true)]
    pub start_box: String,
    /// Extra explicit starting guesses (comma-separated state, repeatable)
    #[arg(long = "x0", allow_hyphen_values = true)]
    pub x0: Vec<String>,
    /// Two fixed points within this distance count as one
    #[arg(long, default_value_t = 1e-6)]
    pub dedupe: f64,
}

pub fn run(args: &EquilibriaArgs) -> Result<(), CliError> {
    let loaded = super::load_system(&args.common)?;
    let sys = &loaded.system;
    let n = sys.dim();
    let (tau, lambda) = super::resolve_disturbance(args.tau, args.lambda, args.kappa)?;
    let p = DisturbanceParams::new(tau, lambda).map_err(super::numeric)?;
    let formats = Formats::parse(&args.common.format).map_err(CliError::Usage)?;

    // Sampling box.
    let boxes: Vec<(f64, f64)> = {
        let parts: Vec<&str> = args.start_box.split(',').collect();
        let parsed: Result<Vec<(f64, f64)>, CliError> =
            parts.iter().map(|p| super::parse_window(p)).collect();
        let mut v = parsed?;
        if v.len() == 1 && n > 1 {
            v = vec![v[0]; n];
        }
        if v.len() != n {
            return Err(CliError::Usage(format!(
                "--start-box needs 1 or {n} ranges"
            )));
        }
        v
    };

    let config = RunConfig {
        command: "equilibria".into(),
        model: args.common.model.clone(),
        system_file: args.common.system.as_ref().map(|p| p.display().to_string()),
        m: args.common.m,
        tau: Some(tau),
        lambda: args.lambda,
        kappa: args.kappa,
        starts: Some(args.starts),
        start_box: Some(args.start_box.clone()),
        x0: args.x0.clone(),
        dedupe: Some(args.dedupe),
        tol: args.common.tol,
        seed: args.common.seed,
        threads: args.common.threads,
        formats: formats.list(),
        ..RunConfig::default()
    };
    let mut emitter = Emitter::new(&args.common.out, &config)?;

    // Starts: user guesses, catalog equilibria, then seeded random draws.
    let user: Result<Vec<Vec<f64>>, CliError> = args
        .x0
        .iter()
        .map(|t| super::parse_state(t, n))
        .collect();
    let mut starts = super::guesses_for(&loaded, &user?, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
    for _ in 0..args.starts {
        let pt: Vec<f64> = boxes
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        starts.push(pt);
    }

    let mut found: Vec<flowkick_core::equilibria::FixedPointRecord<f64>> = Vec::new();
    let mut failures = 0usize;
    for start in &starts {
        match newton_fixed_point(sys, &p, start, args.common.tol.max(1e-12), 40) {
            Ok(rec) => {
                if !sys.in_domain(&rec.x) {
                    continue;
                }
                if found.iter().all(|f| dist(&f.x, &rec.x) > args.dedupe) {
                    found.push(rec);
                }
            }
            Err(_) => failures += 1,
        }
    }
    found.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal));

    if formats.json {
        let data: Vec<serde_json::Value> = found.iter().map(super::record_json).collect();
        emitter.json(
            "equilibria.json",
            json!({
                "tau": tau,
                "lambda": lambda,
                "fixed_points": data,
                "starts_tried": starts.len(),
                "starts_failed": failures,
            }),
        )?;
    }
    if formats.csv {
        let state_cols: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
        let mut columns: Vec<&str> = state_cols.iter().map(|s| s.as_str()).collect();
        columns.extend(["tau", "lambda", "stability", "residual_norm"]);
        let rows: Vec<Vec<String>> = found
            .iter()
            .map(|rec| {
                let mut row: Vec<String> = rec.x.iter().map(|&v| fmt_float(v)).collect();
                row.push(fmt_float(rec.tau));
                row.push(fmt_float(rec.lambda));
                row.push(rec.stability.to_string());
                row.push(fmt_float(rec.residual_norm));
                row
            })
            .collect();
        emitter.csv("equilibria.csv", &columns, &rows)?;
    }

    println!(
        "found {} fixed point(s) at tau={tau}, lambda={lambda} ({} starts, {} failed)",
        found.len(),
        starts.len(),
        failures
    );
    for rec in &found {
        println!(
            "  x = {:?}  [{}]  |residual| = {:.2e}",
            rec.x, rec.stability, rec.residual_norm
        );
    }
    for path in &emitter.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
