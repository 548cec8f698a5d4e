//! `flowkick grid`: stability diagram over (tau, lambda-or-kappa) cells.

use clap::Args;
use serde_json::json;

use flowkick_core::continuation::{self, SecondAxis};
use flowkick_core::equilibria::Stability;

use crate::config::RunConfig;
use crate::emit::{fmt_float, Emitter, Formats};
use crate::svg::Plot;
use crate::{CliError, CommonArgs};

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Tau axis, lo:hi:n (tau > 0)
    #[arg(long = "tau-axis", allow_hyphen_values = true)]
    pub tau_axis: String,
    /// Lambda axis, lo:hi:n
    #[arg(long = "lambda-axis", conflicts_with = "kappa_axis", allow_hyphen_values = true)]
    pub lambda_axis: Option<String>,
    /// Kappa axis, lo:hi:n; converted per cell via lambda = kappa / tau
    #[arg(long = "kappa-axis", allow_hyphen_values = true)]
    pub kappa_axis: Option<String>,
    /// Newton seed state, comma-separated (repeatable; default: model
    /// equilibria at the axis midpoint)
    #[arg(long = "x0", allow_hyphen_values = true)]
    pub x0: Vec<String>,
    /// Two fixed points within this distance count as one
    #[arg(long, default_value_t = 1e-4)]
    pub dedupe: f64,
}

pub fn run(args: &GridArgs) -> Result<(), CliError> {
    let loaded = super::load_system(&args.common)?;
    let sys = &loaded.system;
    let n = sys.dim();
    let formats = Formats::parse(&args.common.format).map_err(CliError::Usage)?;
    let tau_axis = super::parse_axis(&args.tau_axis)?;

    let (second_axis, axis_kind, axis_name) = match (&args.lambda_axis, &args.kappa_axis) {
        (Some(spec), None) => (super::parse_axis(spec)?, SecondAxis::Lambda, "lambda"),
        (None, Some(spec)) => (super::parse_axis(spec)?, SecondAxis::Kappa, "kappa"),
        _ => {
            return Err(CliError::Usage(
                "exactly one of --lambda-axis or --kappa-axis is required".into(),
            ))
        }
    };

    let config = RunConfig {
        command: "grid".into(),
        model: args.common.model.clone(),
        system_file: args.common.system.as_ref().map(|p| p.display().to_string()),
        m: args.common.m,
        tau_axis: Some(args.tau_axis.clone()),
        second_axis: Some(
            args.lambda_axis
                .clone()
                .or_else(|| args.kappa_axis.clone())
                .unwrap_or_default(),
        ),
        second_kind: Some(axis_name.into()),
        x0: args.x0.clone(),
        dedupe: Some(args.dedupe),
        tol: args.common.tol,
        seed: args.common.seed,
        threads: args.common.threads,
        formats: formats.list(),
        ..RunConfig::default()
    };
    let mut emitter = Emitter::new(&args.common.out, &config)?;

    // Seeds: explicit states, else model equilibria at a representative
    // lambda near the middle of the scanned region.
    let user: Result<Vec<Vec<f64>>, CliError> =
        args.x0.iter().map(|t| super::parse_state(t, n)).collect();
    let mut seeds = user?;
    if seeds.is_empty() {
        if let Some(oracle) = loaded
            .entry
            .as_ref()
            .and_then(|e| e.continuous_equilibria.clone())
        {
            // Sample equilibria at several lambdas across the scanned
            // region plus the undisturbed system, then deduplicate.
            let mut lambdas = vec![0.0];
            for &tau in [tau_axis[0], *tau_axis.last().unwrap()].iter() {
                for &second in [second_axis[0], *second_axis.last().unwrap()].iter() {
                    lambdas.push(match axis_kind {
                        SecondAxis::Lambda => second,
                        SecondAxis::Kappa => second / tau,
                    });
                }
            }
            for lambda in lambdas {
                for eq in oracle(lambda) {
                    if eq.iter().all(|v| v.is_finite())
                        && seeds
                            .iter()
                            .all(|s| flowkick_core::linalg::dist(s, &eq) > 1e-9)
                    {
                        seeds.push(eq);
                    }
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Usage(
            "no grid seeds: give --x0 or use a built-in model".into(),
        ));
    }

    let step = super::step_control(args.common.tol);
    let grid = continuation::stability_grid(
        sys,
        &tau_axis,
        &second_axis,
        axis_kind,
        &seeds,
        args.dedupe,
        &step,
    )
    .map_err(super::numeric)?;

    if formats.csv {
        let columns = [
            "tau",
            axis_name,
            "lambda",
            "count",
            "stable",
            "unstable",
            "saddle",
            "nonhyperbolic",
            "failed_starts",
        ];
        let mut rows = Vec::new();
        for (i, &tau) in grid.tau_axis.iter().enumerate() {
            for (j, &second) in grid.second_axis.iter().enumerate() {
                let cell = grid.cell(i, j);
                rows.push(vec![
                    fmt_float(tau),
                    fmt_float(second),
                    fmt_float(cell.lambda),
                    cell.count().to_string(),
                    cell.count_with(Stability::Stable).to_string(),
                    cell.count_with(Stability::Unstable).to_string(),
                    cell.count_with(Stability::Saddle).to_string(),
                    cell.count_with(Stability::Nonhyperbolic).to_string(),
                    cell.failures.to_string(),
                ]);
            }
        }
        emitter.csv("grid.csv", &columns, &rows)?;
    }

    if formats.json {
        let mut cells = Vec::new();
        for (i, &tau) in grid.tau_axis.iter().enumerate() {
            for (j, &second) in grid.second_axis.iter().enumerate() {
                let cell = grid.cell(i, j);
                cells.push(json!({
                    "tau": tau,
                    axis_name: second,
                    "lambda": cell.lambda,
                    "fixed_points": cell.fixed_points.iter().map(super::record_json).collect::<Vec<_>>(),
                    "failed_starts": cell.failures,
                }));
            }
        }
        emitter.json(
            "grid.json",
            json!({
                "axis_kind": axis_name,
                "cells": cells,
                "note": "diagram may be incomplete: only fixed points reachable from the seeds are counted",
            }),
        )?;
    }

    if formats.svg {
        let desc = emitter.svg_desc();
        let mut plot = Plot::new("stability diagram", "tau", axis_name, &desc);
        for &tau in &grid.tau_axis {
            for &second in &grid.second_axis {
                plot.include_point(tau, second);
            }
        }
        let hx = half_step(&grid.tau_axis);
        let hy = half_step(&grid.second_axis);
        for (i, &tau) in grid.tau_axis.iter().enumerate() {
            for (j, &second) in grid.second_axis.iter().enumerate() {
                let cell = grid.cell(i, j);
                let color = cell_color(cell.count(), cell.count_with(Stability::Stable));
                plot.cell(tau, second, hx, hy, color);
            }
        }
        plot.legend_entry("0 fixed points", "#f0f0f0", false);
        plot.legend_entry("no stable", "#fdd0a2", false);
        plot.legend_entry("1 stable", "#9ecae1", false);
        plot.legend_entry("2+ stable", "#3182bd", false);
        emitter.svg("grid.svg", plot.render())?;
    }

    let total: usize = grid.cells.iter().map(|c| c.count()).sum();
    println!(
        "grid {}x{}: {} fixed points across {} cells",
        grid.tau_axis.len(),
        grid.second_axis.len(),
        total,
        grid.cells.len()
    );
    for path in &emitter.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn half_step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        0.5
    } else {
        0.5 * (axis[1] - axis[0])
    }
}

fn cell_color(count: usize, stable: usize) -> &'static str {
    match (count, stable) {
        (0, _) => "#f0f0f0",
        (_, 0) => "#fdd0a2",
        (_, 1) => "#9ecae1",
        _ => "#3182bd",
    }
}
