//! `flowkick models [NAME]`

use clap::Args;
use flowkick_core::models::{self, ValueSource};

use crate::CliError;

#[derive(Args, Debug)]
pub struct ModelsArgs {
    /// Entry to print in full; omit to list all
    pub name: Option<String>,
}

pub fn run(args: &ModelsArgs) -> Result<(), CliError> {
    let catalog = models::catalog::<f64>();
    match &args.name {
        None => {
            println!("built-in models:");
            for entry in &catalog {
                println!("  {:<14} {}", entry.name, entry.description);
            }
            println!("\nuse `flowkick models <name>` for equations and reference values");
        }
        Some(name) => {
            let entry = catalog
                .iter()
                .find(|e| e.name == name.as_str())
                .ok_or_else(|| CliError::Usage(format!("unknown model '{name}'")))?;
            println!("{} - {}", entry.name, entry.description);
            println!("dimension: {}", entry.system.dim());
            println!("states: {}", entry.system.state_names().join(", "));
            if !entry.params.is_empty() {
                let params: Vec<String> = entry
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect();
                println!("parameters: {}", params.join(", "));
            }
            if entry.non_reference_variant {
                println!("note: testing variant, not taken from the source models");
            }
            println!("\nequations:");
            for eq in &entry.equations {
                println!("  {eq}");
            }
            if !entry.known_values.is_empty() {
                println!("\nreference values:");
                for kv in &entry.known_values {
                    let src = match kv.source {
                        ValueSource::Analytic => "analytic",
                        ValueSource::Reported => "reported",
                    };
                    println!("  {:<24} {:>12}  (tol {:.0e}, {src})", kv.key, kv.value, kv.tol);
                }
            }
        }
    }
    Ok(())
}
