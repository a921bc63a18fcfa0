use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use dirspeech_core::audio::parse_manifest;
use dirspeech_core::sot::{build_training_example, SotTask};
use dirspeech_core::Error;

use crate::config::RunConfig;
use crate::exit::validation;
use crate::output::AtomicFile;

#[derive(Debug, Args)]
pub struct SotArgs {
    /// Scene manifest (JSONL).
    #[arg(long)]
    manifest: PathBuf,
    /// transcribe, translate or both.
    #[arg(long, default_value = "transcribe")]
    task: String,
}

pub fn run(cfg: RunConfig, args: SotArgs) -> anyhow::Result<()> {
    let task: SotTask = args.task.parse()?;
    let file = std::fs::File::open(&args.manifest)
        .map_err(Error::Io)
        .with_context(|| format!("opening {}", args.manifest.display()))?;
    let mut out = AtomicFile::create(cfg.out.join("sot.jsonl"))?;
    let (mut written, mut failed) = (0, 0);
    for (line, entry) in parse_manifest(std::io::BufReader::new(file)) {
        let example = entry.and_then(|e| build_training_example(&e, task));
        match example {
            Ok(ex) => {
                out.json_line(&ex)?;
                written += 1;
            }
            Err(e @ Error::Io(_)) => return Err(e).context(format!("line {line}")),
            Err(e) => {
                eprintln!("line {line}: {e}");
                failed += 1;
            }
        }
    }
    let path = out.commit()?;
    eprintln!("wrote {written} pair(s) to {}", path.display());
    if failed > 0 {
        return Err(validation(format!("{failed} manifest line(s) could not be converted")));
    }
    Ok(())
}
