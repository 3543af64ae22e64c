//! Batch experiments: problems × algorithms × seeds, one trace per cell.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{AlgoParams, AlgorithmRegistry};
use crate::error::{Error, Result};
use crate::generate::{gen_classo, gen_ncqp, random_classo_data, NcqpSpec};
use crate::io::load_problem;
use crate::problem::ConstrainedProblem;

use super::trace::{run_algorithm, Control, RunOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gen", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratedProblem {
    #[serde(rename_all = "camelCase")]
    Ncqp {
        name: Option<String>,
        m: usize,
        n: usize,
        blocks: usize,
        #[serde(default)]
        rank_deficit: usize,
        seed: u64,
    },
    #[serde(rename_all = "camelCase")]
    Classo {
        name: Option<String>,
        obs: usize,
        dim: usize,
        cons: usize,
        tau: f64,
        blocks: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Generated(GeneratedProblem),
    File { file: PathBuf, name: Option<String> },
}

impl ProblemSource {
    pub fn label(&self, index: usize) -> String {
        let given = match self {
            ProblemSource::Generated(GeneratedProblem::Ncqp { name, .. })
            | ProblemSource::Generated(GeneratedProblem::Classo { name, .. })
            | ProblemSource::File { name, .. } => name.clone(),
        };
        given.unwrap_or_else(|| match self {
            ProblemSource::Generated(GeneratedProblem::Ncqp { .. }) => format!("ncqp{index}"),
            ProblemSource::Generated(GeneratedProblem::Classo { .. }) => format!("classo{index}"),
            ProblemSource::File { file, .. } => file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("problem{index}")),
        })
    }

    /// Relative file paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<ConstrainedProblem> {
        match self {
            ProblemSource::Generated(GeneratedProblem::Ncqp {
                m,
                n,
                blocks,
                rank_deficit,
                seed,
                ..
            }) => gen_ncqp(NcqpSpec {
                m: *m,
                n: *n,
                blocks: *blocks,
                rank_deficit: *rank_deficit,
                seed: *seed,
            }),
            ProblemSource::Generated(GeneratedProblem::Classo {
                obs,
                dim,
                cons,
                tau,
                blocks,
                seed,
                ..
            }) => gen_classo(&random_classo_data(*obs, *dim, *cons, *seed), *tau, *blocks),
            ProblemSource::File { file, .. } => load_problem(&base.join(file)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoEntry {
    pub name: String,
    /// file-name label; defaults to the algorithm name
    pub label: Option<String>,
    #[serde(default)]
    pub params: AlgoParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemSource>,
    pub algos: Vec<AlgoEntry>,
    pub seeds: Vec<u64>,
    pub iters: usize,
    pub cadence: Option<usize>,
    #[serde(default)]
    pub omit_wall_time: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::parse(
                format!("experiment config line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if cfg.problems.is_empty() || cfg.algos.is_empty() || cfg.seeds.is_empty() {
            return Err(Error::param("experiment needs at least one problem, algorithm and seed"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CellResult {
    pub problem: String,
    pub algo: String,
    pub seed: u64,
    pub ok: bool,
    pub rows: usize,
    pub final_obj_erg: Option<f64>,
    pub final_feas_erg: Option<f64>,
    pub message: String,
    pub trace_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub cells: Vec<CellResult>,
}

impl ExperimentSummary {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("problem,algo,seed,status,rows,final_obj_erg,final_feas_erg,message\n");
        let real = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},\"{}\"\n",
                c.problem,
                c.algo,
                c.seed,
                if c.ok { "ok" } else { "error" },
                c.rows,
                real(c.final_obj_erg),
                real(c.final_feas_erg),
                c.message.replace('"', "'")
            ));
        }
        s
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Runs every (problem, algorithm, seed) cell in parallel. A failing cell
/// is reported in the summary and leaves its partial trace; the others are
/// unaffected. Traces go to `<out>/<problem>_<algo>_<seed>.csv` and the
/// summary to `<out>/summary.csv`.
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &AlgorithmRegistry,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<ExperimentSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let problems: Vec<(String, Result<ConstrainedProblem>)> = config
        .problems
        .iter()
        .enumerate()
        .map(|(i, p)| (p.label(i), p.load(base_dir)))
        .collect();

    let mut cells = Vec::new();
    for (pi, _) in problems.iter().enumerate() {
        for (ai, _) in config.algos.iter().enumerate() {
            for &seed in &config.seeds {
                cells.push((pi, ai, seed));
            }
        }
    }

    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(pi, ai, seed)| {
            let (pname, problem) = &problems[pi];
            let entry = &config.algos[ai];
            let label = entry.label.clone().unwrap_or_else(|| entry.name.clone());
            let trace_file = out_dir.join(format!("{pname}_{label}_{seed}.csv"));
            let mut cell = CellResult {
                problem: pname.clone(),
                algo: label,
                seed,
                ok: false,
                rows: 0,
                final_obj_erg: None,
                final_feas_erg: None,
                message: String::new(),
                trace_file: trace_file.clone(),
            };
            let problem = match problem {
                Ok(p) => p,
                Err(e) => {
                    cell.message = format!("problem: {e}");
                    return cell;
                }
            };
            let params = AlgoParams {
                seed: Some(seed),
                iters: Some(config.iters),
                ..entry.params.clone()
            };
            let mut algo = match registry.build(&entry.name, problem, &params) {
                Ok(a) => a,
                Err(e) => {
                    cell.message = e.to_string();
                    return cell;
                }
            };
            let opts = RunOptions {
                iters: config.iters,
                cadence: config.cadence,
                record_wall_time: !config.omit_wall_time,
            };
            let out = run_algorithm(algo.as_mut(), problem, &opts, &mut |_| Control::Continue);
            cell.rows = out.trace.rows.len();
            if let Some(last) = out.trace.last() {
                cell.final_obj_erg = Some(last.obj_erg);
                cell.final_feas_erg = Some(last.feas_erg);
            }
            let saved = out.trace.save(&trace_file);
            match (out.error, saved) {
                (Some(e), _) => cell.message = e.to_string(),
                (None, Err(e)) => cell.message = e.to_string(),
                (None, Ok(())) => cell.ok = true,
            }
            cell
        })
        .collect();

    let summary = ExperimentSummary { cells: results };
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, summary.to_csv()).map_err(|e| io_err(&path, e))?;
    Ok(summary)
}
