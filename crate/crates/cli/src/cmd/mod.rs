pub mod bifcurve;
pub mod branch;
pub mod equilibria;
pub mod grid;
pub mod models;
pub mod simulate;

use flowkick_core::dynamics::SystemDef;
use flowkick_core::models::ModelCatalogEntry;
use flowkick_core::FkError;

use crate::{CliError, CommonArgs};

/// The system under analysis plus catalog metadata when it is a built-in.
pub struct Loaded {
    pub system: SystemDef<f64>,
    pub entry: Option<ModelCatalogEntry<f64>>,
}

pub fn load_system(common: &CommonArgs) -> Result<Loaded, CliError> {
    match (&common.model, &common.system) {
        (Some(name), None) => {
            let entry = flowkick_core::models::by_name::<f64>(name, common.m)?;
            Ok(Loaded {
                system: entry.system.clone(),
                entry: Some(entry),
            })
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let system = flowkick_core::exprsys::parse_system::<f64>(&text)?;
            Ok(Loaded {
                system,
                entry: None,
            })
        }
        (None, None) => Err(CliError::Usage(
            "one of --model or --system is required".into(),
        )),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

/// Resolves (tau, lambda) from the flag triple, converting a kick magnitude
/// via lambda = kappa / tau.
pub fn resolve_disturbance(
    tau: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
) -> Result<(f64, f64), CliError> {
    let tau = tau.ok_or_else(|| CliError::Usage("--tau is required".into()))?;
    match (lambda, kappa) {
        (Some(l), None) => Ok((tau, l)),
        (None, Some(k)) => {
            if tau <= 0.0 {
                return Err(CliError::Usage(
                    "--kappa needs --tau > 0 to recover lambda = kappa / tau".into(),
                ));
            }
            Ok((tau, k / tau))
        }
        (None, None) => Err(CliError::Usage("one of --lambda or --kappa is required".into())),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

/// Parses "lo:hi".
pub fn parse_window(text: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("window '{text}' should be lo:hi")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad window bound '{lo}'")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad window bound '{hi}'")))?;
    Ok((lo, hi))
}

/// Parses "lo:hi:n" into a linearly spaced axis.
pub fn parse_axis(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("axis '{text}' should be lo:hi:n")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad axis bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad axis bound '{}'", parts[1])))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad axis count '{}'", parts[2])))?;
    if n < 1 || hi <= lo {
        return Err(CliError::Usage(format!("axis '{text}' is empty")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

/// Parses a comma-separated state vector of the system's dimension.
pub fn parse_state(text: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let v: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let v = v.map_err(|_| CliError::Usage(format!("bad state vector '{text}'")))?;
    if v.len() != dim {
        return Err(CliError::Usage(format!(
            "state '{text}' has {} components, system has dimension {dim}",
            v.len()
        )));
    }
    Ok(v)
}

/// Initial guesses for fixed points: explicit user states first, then the
/// catalog's continuous equilibria at the given lambda.
pub fn guesses_for(
    loaded: &Loaded,
    user: &[Vec<f64>],
    lambda: f64,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = user.to_vec();
    if let Some(entry) = &loaded.entry {
        if let Some(oracle) = &entry.continuous_equilibria {
            out.extend(oracle(lambda));
        }
    }
    out
}

pub fn numeric(e: FkError) -> CliError {
    CliError::Numeric(e)
}

/// Shared eigenvalue serialization.
pub fn eig_json(rec: &flowkick_core::equilibria::FixedPointRecord<f64>) -> serde_json::Value {
    serde_json::Value::Array(
        rec.eigenvalues
            .iter()
            .map(|e| serde_json::json!({"re": e.re, "im": e.im}))
            .collect(),
    )
}

pub fn record_json(rec: &flowkick_core::equilibria::FixedPointRecord<f64>) -> serde_json::Value {
    serde_json::json!({
        "x": rec.x,
        "tau": rec.tau,
        "lambda": rec.lambda,
        "eigenvalues": eig_json(rec),
        "stability": rec.stability.to_string(),
        "residual_norm": rec.residual_norm,
        "kind": match rec.kind {
            flowkick_core::equilibria::FixedPointKind::Continuous => "continuous",
            flowkick_core::equilibria::FixedPointKind::FlowKick => "flow-kick",
        },
    })
}

/// Step control carrying the CLI's tolerance into continuation.
pub fn step_control(tol: f64) -> flowkick_core::continuation::StepControl<f64> {
    flowkick_core::continuation::StepControl {
        flow_tol: tol,
        ..flowkick_core::continuation::StepControl::default()
    }
}
