//! Headless runs: load an instance, run it under an optional steering script
//! and write the session directory.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use antsteer::instance::ParseError;
use antsteer::session::{cluster_solve, SessionError};
use antsteer::{corpus, parse_tsplib, AcsParams, Instance, RunConfig, Session, SteeringScript, Tour};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Session(#[from] SessionError),
}

/// Reads a TSPLIB file. A path that does not exist but names a bundled
/// instance (with or without `.tsp`) loads the bundled copy.
pub fn load_instance(path: &Path) -> Result<Instance, SolveError> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(source) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            match corpus::text(stem) {
                Some(text) if path.parent().is_none_or(|p| p.as_os_str().is_empty()) => text.to_string(),
                _ => return Err(SolveError::Read { path: path.into(), source }),
            }
        }
    };
    parse_tsplib(&text).map_err(|source| SolveError::Parse { path: path.into(), source })
}

pub fn load_script(path: &Path) -> Result<SteeringScript, SolveError> {
    let file = fs::File::open(path).map_err(|source| SolveError::Read { path: path.into(), source })?;
    Ok(SteeringScript::from_jsonl(BufReader::new(file))?)
}

/// Runs to the end, applying `script` at its recorded boundaries, and
/// persists the session to `out`.
pub fn solve(
    instance: Arc<Instance>,
    config: &RunConfig,
    script: SteeringScript,
    compare: bool,
    out: &Path,
) -> Result<Session, SolveError> {
    script.validate(instance.dimension(), config.params.iterations, config.hif)?;
    let mut session = Session::create(instance, config.params.clone(), config.hif)?;
    let mut script = script;
    session.run_scripted(&mut script)?;
    if compare {
        session.compare_with_optimal(false)?;
    }
    session.persist(out)?;
    Ok(session)
}

/// Splits nodes into `0..split` and `split..n` and solves them as clusters.
pub fn cluster(instance: &Instance, split: usize, params: &AcsParams) -> Result<Tour, SolveError> {
    let n = instance.dimension();
    let first: Vec<usize> = (0..split.min(n)).collect();
    let second: Vec<usize> = (split.min(n)..n).collect();
    Ok(cluster_solve(instance, [&first, &second], params)?)
}
