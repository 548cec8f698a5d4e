//! `flowkick simulate`: iterate orbits and emit sawtooth time series.

use clap::Args;
use serde_json::json;

use flowkick_core::dynamics::{self, DisturbanceParams, Orbit};

use crate::config::RunConfig;
use crate::emit::{fmt_float, Emitter, Formats};
use crate::svg::{Plot, LineStyle};
use crate::{CliError, CommonArgs};

/// Dense flow samples recorded per cycle for plotting.
const SUBSAMPLES: usize = 32;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Flow time between kicks
    #[arg(long)]
    pub tau: Option<f64>,
    /// Disturbance rate parameter
    #[arg(long, conflicts_with = "kappa", allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Kick magnitude; converted via lambda = kappa / tau
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Initial state, comma-separated; repeat for several trajectories
    #[arg(long = "x0", required = true, allow_hyphen_values = true)]
    pub x0: Vec<String>,
    /// Number of flow-kick cycles
    #[arg(long, default_value_t = 100)]
    pub cycles: usize,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let loaded = super::load_system(&args.common)?;
    let sys = &loaded.system;
    let (tau, lambda) = super::resolve_disturbance(args.tau, args.lambda, args.kappa)?;
    let p = DisturbanceParams::new(tau, lambda).map_err(super::numeric)?;
    let formats = Formats::parse(&args.common.format).map_err(CliError::Usage)?;

    let config = RunConfig {
        command: "simulate".into(),
        model: args.common.model.clone(),
        system_file: args.common.system.as_ref().map(|p| p.display().to_string()),
        m: args.common.m,
        tau: Some(tau),
        lambda: args.lambda,
        kappa: args.kappa,
        x0: args.x0.clone(),
        cycles: Some(args.cycles),
        tol: args.common.tol,
        seed: args.common.seed,
        threads: args.common.threads,
        formats: formats.list(),
        ..RunConfig::default()
    };
    let mut emitter = Emitter::new(&args.common.out, &config)?;

    let mut orbits: Vec<Result<Orbit<f64>, String>> = Vec::new();
    for x0_text in &args.x0 {
        let x0 = super::parse_state(x0_text, sys.dim())?;
        // Divergence aborts one trajectory, not the whole run; the failure
        // is recorded in the output metadata.
        match dynamics::iterate_orbit_sampled(sys, &x0, &p, args.cycles, args.common.tol, SUBSAMPLES)
        {
            Ok(orbit) => orbits.push(Ok(orbit)),
            Err(e) => orbits.push(Err(e.to_string())),
        }
    }

    let n = sys.dim();
    let state_cols: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    if formats.csv {
        for (k, orbit) in orbits.iter().enumerate() {
            let Ok(orbit) = orbit else { continue };
            let mut rows: Vec<Vec<String>> = Vec::new();
            for cyc in &orbit.cycles {
                let t0 = tau * cyc.cycle as f64;
                for (t_local, state) in &cyc.flow_samples {
                    let mut row = vec![cyc.cycle.to_string(), fmt_float(t0 + t_local)];
                    row.extend(state.iter().map(|&v| fmt_float(v)));
                    row.push("flow".into());
                    rows.push(row);
                }
                let t_kick = tau * (cyc.cycle + 1) as f64;
                let mut row = vec![cyc.cycle.to_string(), fmt_float(t_kick)];
                row.extend(cyc.post_kick.iter().map(|&v| fmt_float(v)));
                row.push("kick".into());
                rows.push(row);
            }
            let mut columns: Vec<&str> = vec!["cycle", "t"];
            let state_refs: Vec<&str> = state_cols.iter().map(|s| s.as_str()).collect();
            columns.extend(state_refs);
            columns.push("phase");
            emitter.csv(&format!("orbit_{k}.csv"), &columns, &rows)?;
        }
    }

    if formats.json {
        let data: Vec<serde_json::Value> = orbits
            .iter()
            .zip(&args.x0)
            .map(|(res, x0)| match res {
                Ok(orbit) => json!({
                    "x0": x0,
                    "cycles_completed": orbit.cycles.len(),
                    "domain_exit_cycle": orbit.domain_exit,
                    "final_state": orbit.last_state(),
                    "error": serde_json::Value::Null,
                }),
                Err(msg) => json!({
                    "x0": x0,
                    "cycles_completed": 0,
                    "domain_exit_cycle": serde_json::Value::Null,
                    "final_state": serde_json::Value::Null,
                    "error": msg,
                }),
            })
            .collect();
        emitter.json(
            "simulate.json",
            json!({"tau": tau, "lambda": lambda, "trajectories": data}),
        )?;
    }

    if formats.svg {
        let desc = emitter.svg_desc();
        let mut plot = Plot::new(
            &format!("flow-kick orbits, tau={tau}, lambda={lambda}"),
            "t",
            "state",
            &desc,
        );
        let palette: [&LineStyle; 4] = [
            &crate::svg::SOLID_BLUE,
            &crate::svg::SOLID_ORANGE,
            &crate::svg::SOLID_GREEN,
            &crate::svg::SOLID_BLACK,
        ];
        type Series = (Vec<(f64, f64)>, usize, String);
        let mut series: Vec<Series> = Vec::new();
        for (k, orbit) in orbits.iter().enumerate() {
            let Ok(orbit) = orbit else { continue };
            for coord in 0..n {
                let mut pts = Vec::new();
                for cyc in &orbit.cycles {
                    let t0 = tau * cyc.cycle as f64;
                    for (t_local, state) in &cyc.flow_samples {
                        pts.push((t0 + t_local, state[coord]));
                    }
                    pts.push((tau * (cyc.cycle + 1) as f64, cyc.post_kick[coord]));
                }
                for &(x, y) in &pts {
                    plot.include_point(x, y);
                }
                let label = if n == 1 {
                    format!("x0={}", args.x0[k])
                } else {
                    format!("x0={} [{}]", args.x0[k], state_cols[coord])
                };
                series.push((pts, (k * n + coord) % palette.len(), label));
            }
        }
        for (pts, style_idx, label) in &series {
            plot.polyline(pts, palette[*style_idx], Some(label));
        }
        emitter.svg("simulate.svg", plot.render())?;
    }

    for path in &emitter.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
