use std::fs;
use std::path::{Path, PathBuf};

use crate::ablate::{run_ablate, AblateSpec, SWEEP_FILE};
use crate::bench::{run_seed, ResolvedTask, METRICS_FILE};
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Where a replay wrote its results and which file was compared.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub dir: PathBuf,
    pub compared: Option<PathBuf>,
}

/// Reruns the command recorded in a manifest. Output goes to `out`, or to the
/// recorded location by default. When the recorded metrics file (bench) or
/// sweep file (ablate) exists next to the manifest, the rerun must reproduce
/// it byte for byte.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<ReplayOutcome, CliError> {
    let recorded_dir = manifest_path.parent().unwrap_or(Path::new("."));
    match RunManifest::read(manifest_path)? {
        RunManifest::Bench(m) => {
            let reference = recorded_dir.join(METRICS_FILE);
            let before = fs::read(&reference).ok();
            let task = ResolvedTask {
                name: m.task.clone(),
                source: m.config_source.clone(),
                config: m.config.clone(),
            };
            let dir = out.map_or_else(|| PathBuf::from(&m.output_dir), Path::to_path_buf);
            run_seed(&task, &m.config, m.method, &m.method_config, &dir, m.dump_qp)?;
            compare(manifest_path, before, &dir.join(METRICS_FILE), dir.clone())
        }
        RunManifest::Ablate(m) => {
            let reference = recorded_dir.join(SWEEP_FILE);
            let before = fs::read(&reference).ok();
            let result = run_ablate(&AblateSpec::from_manifest(&m, out))?;
            compare(manifest_path, before, &result.dir.join(SWEEP_FILE), result.dir)
        }
    }
}

fn compare(manifest: &Path, before: Option<Vec<u8>>, produced: &Path, dir: PathBuf) -> Result<ReplayOutcome, CliError> {
    let Some(before) = before else {
        return Ok(ReplayOutcome { dir, compared: None });
    };
    let after = fs::read(produced).map_err(CliError::io(produced))?;
    if before != after {
        return Err(CliError::ReplayMismatch(manifest.to_path_buf()));
    }
    Ok(ReplayOutcome {
        dir,
        compared: Some(produced.to_path_buf()),
    })
}
