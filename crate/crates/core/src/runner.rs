//! Study runner: scenario-grid execution with a bounded worker pool,
//! resumable persistence, and a run manifest.
//!
//! The results table is a pure function of (config, seed, code version):
//! rows are computed by [`crate::oc::estimate_oc`] (bit-reproducible across
//! thread counts), ordered by scenario index at expansion time, and written
//! atomically. A resumed run keeps existing rows verbatim and computes only
//! the missing scenarios.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_config_str, StudyConfig};
use crate::error::{Error, Result};
use crate::oc::{estimate_oc, Scenario};
use crate::presets::{builtin_presets, parse_presets_str, CaseStudyPreset};
use crate::results;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Environment variable overriding the worker count.
pub const JOBS_ENV_VAR: &str = "BORROWSIM_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioState {
    Ok,
    Unreliable,
    Failed,
    Resumed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioStatus {
    pub id: String,
    pub state: ScenarioState,
    pub wall_ms: u64,
    pub n_failed_replicates: u32,
    pub n_resampled: u64,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub n_scenarios: usize,
    pub n_failed_scenarios: usize,
    pub total_wall_ms: u64,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioStatus>,
}

impl RunManifest {
    pub fn any_failed(&self) -> bool {
        self.n_failed_scenarios > 0
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    pub resume: bool,
}

/// Hash identifying (config bytes, code version).
pub fn config_hash(config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(config_text.as_bytes());
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    let digest = h.finalize();
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Load presets: built-ins plus an optional extension file (entries with a
/// built-in name override it).
pub fn load_presets(cfg: &StudyConfig, config_dir: &Path) -> Result<Vec<CaseStudyPreset>> {
    let mut presets = builtin_presets();
    if let Some(path) = &cfg.study.preset_file {
        let resolved = config_dir.join(path);
        let text = std::fs::read_to_string(&resolved).map_err(|e| {
            Error::Config(format!("cannot read preset file {}: {e}", resolved.display()))
        })?;
        for p in parse_presets_str(&text)? {
            presets.retain(|existing| existing.name != p.name);
            presets.push(p);
        }
    }
    Ok(presets)
}

/// Resolve the worker count: explicit option, then the environment
/// override, then the rayon default.
pub fn resolve_jobs(explicit: Option<usize>) -> Option<usize> {
    if explicit.is_some() {
        return explicit;
    }
    std::env::var(JOBS_ENV_VAR).ok().and_then(|v| v.parse().ok())
}

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Execute a study from a config file path.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let config_text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let cfg = parse_config_str(&config_text)?;
    let presets = load_presets(&cfg, config_dir)?;
    run_with(&cfg, &config_text, &presets, opts)
}

/// Execute a parsed study (the config text is needed for the run hash).
pub fn run_with(
    cfg: &StudyConfig,
    config_text: &str,
    presets: &[CaseStudyPreset],
    opts: &RunOptions,
) -> Result<RunManifest> {
    let start = Instant::now();
    let scenarios = crate::config::expand_grid(cfg, presets)?;
    let hash = config_hash(config_text);
    std::fs::create_dir_all(&opts.out_dir)?;
    let results_path = opts.out_dir.join(RESULTS_FILE);
    let manifest_path = opts.out_dir.join(MANIFEST_FILE);

    // Resume: keep verbatim rows for scenarios already persisted.
    let mut existing_rows: HashMap<String, String> = HashMap::new();
    if opts.resume && results_path.exists() {
        if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path)?;
            let manifest: RunManifest =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if manifest.config_hash != hash {
                return Err(Error::Config(format!(
                    "resume rejected: output dir was produced by config hash {}, this run is {}",
                    manifest.config_hash, hash
                )));
            }
        }
        let text = std::fs::read_to_string(&results_path)?;
        for line in text.lines().skip(1) {
            if let Some(id) = line.split(',').next() {
                existing_rows.insert(id.to_string(), line.to_string());
            }
        }
    }

    let todo: Vec<&Scenario> =
        scenarios.iter().filter(|s| !existing_rows.contains_key(&s.id)).collect();

    let computed: Vec<ComputeOutcome> = match resolve_jobs(opts.jobs) {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(|| compute_all(&todo))
        }
        None => compute_all(&todo),
    };
    let mut by_id: HashMap<String, ComputeOutcome> = HashMap::new();
    for c in computed {
        by_id.insert(c.id.clone(), c);
    }

    // Assemble rows and statuses in scenario order.
    let mut rows: Vec<String> = Vec::with_capacity(scenarios.len());
    let mut statuses: Vec<ScenarioStatus> = Vec::with_capacity(scenarios.len());
    let mut n_failed_scenarios = 0usize;
    for sc in &scenarios {
        if let Some(line) = existing_rows.get(&sc.id) {
            rows.push(line.clone());
            statuses.push(ScenarioStatus {
                id: sc.id.clone(),
                state: ScenarioState::Resumed,
                wall_ms: 0,
                n_failed_replicates: 0,
                n_resampled: 0,
                error: None,
            });
            continue;
        }
        match by_id.remove(&sc.id) {
            Some(c) => match c.outcome {
                Ok(done) => {
                    rows.push(done.row);
                    statuses.push(ScenarioStatus {
                        id: sc.id.clone(),
                        state: if done.unreliable {
                            ScenarioState::Unreliable
                        } else {
                            ScenarioState::Ok
                        },
                        wall_ms: c.wall_ms,
                        n_failed_replicates: done.n_failed,
                        n_resampled: done.n_resampled,
                        error: None,
                    });
                }
                Err(msg) => {
                    n_failed_scenarios += 1;
                    statuses.push(ScenarioStatus {
                        id: sc.id.clone(),
                        state: ScenarioState::Failed,
                        wall_ms: c.wall_ms,
                        n_failed_replicates: 0,
                        n_resampled: 0,
                        error: Some(msg),
                    });
                }
            },
            None => {
                n_failed_scenarios += 1;
                statuses.push(ScenarioStatus {
                    id: sc.id.clone(),
                    state: ScenarioState::Failed,
                    wall_ms: 0,
                    n_failed_replicates: 0,
                    n_resampled: 0,
                    error: Some("scenario was not computed".into()),
                });
            }
        }
    }

    atomic_write(&results_path, &results::to_table(&rows))?;
    let manifest = RunManifest {
        config_hash: hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        n_scenarios: scenarios.len(),
        n_failed_scenarios,
        total_wall_ms: start.elapsed().as_millis() as u64,
        scenarios: statuses,
    };
    let manifest_text =
        toml::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    atomic_write(&manifest_path, &manifest_text)?;
    Ok(manifest)
}

struct ComputedRow {
    row: String,
    n_failed: u32,
    n_resampled: u64,
    unreliable: bool,
}

struct ComputeOutcome {
    id: String,
    outcome: std::result::Result<ComputedRow, String>,
    wall_ms: u64,
}

fn compute_all(todo: &[&Scenario]) -> Vec<ComputeOutcome> {
    todo.par_iter()
        .map(|sc| {
            let t0 = Instant::now();
            let outcome = estimate_oc(sc)
                .map(|rec| ComputedRow {
                    row: results::to_row(&rec),
                    n_failed: rec.n_failed,
                    n_resampled: rec.n_resampled,
                    unreliable: rec.unreliable,
                })
                .map_err(|e| e.to_string());
            ComputeOutcome { id: sc.id.clone(), outcome, wall_ms: t0.elapsed().as_millis() as u64 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[study]
preset = "dapagliflozin"
sample_sizes = [22]
master_seed = 11
n_reps_success = 200
n_reps_estimation = 100

[drift]
keywords = ["consistent", "null"]

[[methods]]
name = "separate"

[[methods]]
name = "conditional_pp"
gamma = [0.5]
"#;

    fn run_small(dir: &Path, jobs: Option<usize>, resume: bool) -> RunManifest {
        let cfg = parse_config_str(SMALL).unwrap();
        let presets = builtin_presets();
        let opts = RunOptions { jobs, out_dir: dir.to_path_buf(), resume };
        run_with(&cfg, SMALL, &presets, &opts).unwrap()
    }

    #[test]
    fn results_are_byte_identical_across_worker_counts() {
        let d1 = tempfile::tempdir().unwrap();
        let d8 = tempfile::tempdir().unwrap();
        run_small(d1.path(), Some(1), false);
        run_small(d8.path(), Some(8), false);
        let t1 = std::fs::read(d1.path().join(RESULTS_FILE)).unwrap();
        let t8 = std::fs::read(d8.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(t1, t8);
    }

    #[test]
    fn rerun_resumes_without_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let m1 = run_small(dir.path(), Some(2), false);
        assert_eq!(m1.n_failed_scenarios, 0);
        let before = std::fs::read(dir.path().join(RESULTS_FILE)).unwrap();
        let m2 = run_small(dir.path(), Some(2), true);
        assert!(m2.scenarios.iter().all(|s| s.state == ScenarioState::Resumed));
        let after = std::fs::read(dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn killed_run_completes_only_missing_scenarios() {
        let dir = tempfile::tempdir().unwrap();
        run_small(dir.path(), Some(2), false);
        // Simulate a kill after two scenarios: truncate the results file.
        let text = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let full = lines.len();
        lines.truncate(3); // header + 2 rows
        std::fs::write(dir.path().join(RESULTS_FILE), lines.join("\n") + "\n").unwrap();
        let m = run_small(dir.path(), Some(2), true);
        let resumed =
            m.scenarios.iter().filter(|s| s.state == ScenarioState::Resumed).count();
        assert_eq!(resumed, 2);
        let text2 = std::fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
        assert_eq!(text2.lines().count(), full);
        assert_eq!(text2, text, "completed table must match the uninterrupted run");
    }

    #[test]
    fn resume_rejects_a_different_config() {
        let dir = tempfile::tempdir().unwrap();
        run_small(dir.path(), Some(2), false);
        let changed = SMALL.replace("master_seed = 11", "master_seed = 12");
        let cfg = parse_config_str(&changed).unwrap();
        let presets = builtin_presets();
        let opts =
            RunOptions { jobs: Some(2), out_dir: dir.path().to_path_buf(), resume: true };
        let err = run_with(&cfg, &changed, &presets, &opts).unwrap_err();
        assert!(err.to_string().contains("resume rejected"), "{err}");
    }

    #[test]
    fn manifest_covers_every_scenario_exactly_once() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_small(dir.path(), Some(2), false);
        assert_eq!(m.n_scenarios, 4);
        assert_eq!(m.scenarios.len(), 4);
        let mut ids: Vec<&str> = m.scenarios.iter().map(|s| s.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 4);
        // Round-trip through TOML.
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let parsed: RunManifest = toml::from_str(&text).unwrap();
        assert_eq!(parsed.n_scenarios, 4);
    }
}
