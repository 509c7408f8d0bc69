use std::fs;
use std::path::PathBuf;

use alertroute_core::io::write_dataset;
use alertroute_core::synthgen::{generate, preset, GeneratorSpec, SynthError};
use alertroute_core::validate_dataset;

use crate::CliError;

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "spec"])))]
pub struct Args {
    /// Named preset from the frozen manifest (e.g. paperlike-v1).
    #[arg(long)]
    preset: Option<String>,
    /// Generator spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Dataset output (JSONL, or CSV by extension).
    #[arg(long)]
    out: PathBuf,
}

fn synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::UnknownPreset(_) => CliError::Usage(e.to_string()),
        SynthError::InvalidSpec(_) => CliError::Data(e.to_string()),
    }
}

pub fn run(args: Args) -> Result<(), CliError> {
    let spec: GeneratorSpec = match (&args.preset, &args.spec) {
        (Some(name), _) => preset(name).map_err(synth_error)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Data(format!("{}, line {}: invalid generator spec: {e}", path.display(), e.line()))
            })?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let dataset = generate(&spec).map_err(synth_error)?;
    write_dataset(&args.out, &dataset)?;
    let summary = validate_dataset(&dataset).map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote {} responses to {}", summary.total, args.out.display());
    println!("alerts: {}  normal: {}", summary.alerts, summary.total - summary.alerts);
    for (category, count) in &summary.by_category {
        println!("  {:<18} {count}", category.as_str());
    }
    Ok(())
}
