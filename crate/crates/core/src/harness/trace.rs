//! Running an algorithm with periodic objective/feasibility records.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::algorithm::Algorithm;
use crate::engine::ResidualAudit;
use crate::error::{Error, Result};
use crate::problem::ConstrainedProblem;

pub const CSV_HEADER: &str = "k,epoch,obj_last,obj_erg,feas_last,feas_erg,wall_s";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub epoch: f64,
    pub obj_last: f64,
    pub obj_erg: f64,
    pub feas_last: f64,
    pub feas_erg: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// CSV with every real in `{:.16e}`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k, r.epoch, r.obj_last, r.obj_erg, r.feas_last, r.feas_erg, r.wall_s
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::parse("trace line 1", format!("expected header `{CSV_HEADER}`"))),
        }
        let mut rows = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let ctx = || format!("trace line {}", no + 1);
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::parse(ctx(), format!("expected 7 fields, found {}", f.len())));
            }
            let real = |i: usize| -> Result<f64> {
                f[i].trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(ctx(), format!("field {}: {e}", i + 1)))
            };
            rows.push(TraceRow {
                k: f[0].trim().parse().map_err(|e| Error::parse(ctx(), format!("field 1: {e}")))?,
                epoch: real(1)?,
                obj_last: real(2)?,
                obj_erg: real(3)?,
                feas_last: real(4)?,
                feas_erg: real(5)?,
                wall_s: real(6)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse_csv(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub iters: usize,
    /// record every `cadence` iterations; default `N/n` (one epoch)
    pub cadence: Option<usize>,
    /// false writes 0 in the wall-time column (byte-stable output)
    pub record_wall_time: bool,
}

impl RunOptions {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            cadence: None,
            record_wall_time: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// rows recorded up to the end (or up to the failure)
    pub trace: Trace,
    pub error: Option<Error>,
    pub audit: ResidualAudit,
    pub stopped_early: bool,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<Trace> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.trace),
        }
    }
}

fn record(
    algo: &dyn Algorithm,
    problem: &ConstrainedProblem,
    start: Instant,
    wall: bool,
) -> Result<TraceRow> {
    let (x, y) = algo.last_point();
    let obj_last = problem.objective(x, y)?;
    let feas_last = problem.feas_violation(x, y)?;
    let (obj_erg, feas_erg) = if algo.iteration() == 0 {
        (obj_last, feas_last)
    } else {
        let e = algo.ergodic_point()?;
        (problem.objective(&e.x_hat, &e.y_hat)?, problem.feas_violation(&e.x_hat, &e.y_hat)?)
    };
    if obj_last.is_nan() || !feas_last.is_finite() {
        return Err(Error::Numerical(format!(
            "iterates became non-finite at k = {}",
            algo.iteration()
        )));
    }
    Ok(TraceRow {
        k: algo.iteration(),
        epoch: algo.epoch(),
        obj_last,
        obj_erg,
        feas_last,
        feas_erg,
        wall_s: if wall { start.elapsed().as_secs_f64() } else { 0.0 },
    })
}

/// Runs `opts.iters` iterations, recording a row at `k = 0`, at every
/// multiple of the cadence and at the final iteration. The callback sees
/// each row and may stop the run. A failure ends the run but keeps the
/// rows recorded so far.
pub fn run_algorithm(
    algo: &mut dyn Algorithm,
    problem: &ConstrainedProblem,
    opts: &RunOptions,
    on_row: &mut dyn FnMut(&TraceRow) -> Control,
) -> RunOutcome {
    let big_n = problem.num_x_blocks();
    let cadence = opts
        .cadence
        .unwrap_or_else(|| (big_n / algo.sample_size().max(1)).max(1))
        .max(1);
    let start = Instant::now();
    let mut trace = Trace::default();
    let mut error = None;
    let mut stopped_early = false;

    let mut push = |algo: &dyn Algorithm, trace: &mut Trace| -> Result<Control> {
        let row = record(algo, problem, start, opts.record_wall_time)?;
        trace.rows.push(row);
        Ok(on_row(&row))
    };

    match push(&*algo, &mut trace) {
        Err(e) => error = Some(e),
        Ok(Control::Stop) => stopped_early = opts.iters > 0,
        Ok(Control::Continue) => {
            for k in 1..=opts.iters {
                if let Err(e) = algo.step() {
                    error = Some(e);
                    break;
                }
                if k % cadence == 0 || k == opts.iters {
                    match push(&*algo, &mut trace) {
                        Err(e) => {
                            error = Some(e);
                            break;
                        }
                        Ok(Control::Stop) => {
                            stopped_early = k < opts.iters;
                            break;
                        }
                        Ok(Control::Continue) => {}
                    }
                }
            }
        }
    }
    RunOutcome {
        trace,
        error,
        audit: algo.audit(),
        stopped_early,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{AlgoParams, AlgorithmRegistry};
    use crate::generate::{gen_ncqp, NcqpSpec};

    fn problem() -> ConstrainedProblem {
        gen_ncqp(NcqpSpec {
            m: 2,
            n: 6,
            blocks: 3,
            rank_deficit: 0,
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn row_count_and_csv_round_trip() {
        let p = problem();
        let reg = AlgorithmRegistry::standard();
        let mut a = reg.build("rpdbu", &p, &AlgoParams::default()).unwrap();
        let opts = RunOptions {
            iters: 10,
            cadence: Some(3),
            record_wall_time: false,
        };
        let out = run_algorithm(a.as_mut(), &p, &opts, &mut |_| Control::Continue);
        assert!(out.error.is_none());
        let ks: Vec<usize> = out.trace.rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 3, 6, 9, 10]);
        let csv = out.trace.to_csv();
        assert_eq!(Trace::parse_csv(&csv).unwrap(), out.trace);
        assert!(csv.lines().nth(1).unwrap().ends_with(",0.0000000000000000e0"));
    }

    #[test]
    fn default_cadence_is_one_epoch() {
        let p = problem();
        let mut a = AlgorithmRegistry::standard()
            .build("rpdbu", &p, &AlgoParams::default())
            .unwrap();
        let out = run_algorithm(a.as_mut(), &p, &RunOptions::new(9), &mut |_| Control::Continue);
        let ks: Vec<usize> = out.trace.rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 3, 6, 9]);
    }

    #[test]
    fn callback_stops() {
        let p = problem();
        let mut a = AlgorithmRegistry::standard()
            .build("lalm", &p, &AlgoParams::default())
            .unwrap();
        let out = run_algorithm(a.as_mut(), &p, &RunOptions::new(50), &mut |r| {
            if r.k >= 2 {
                Control::Stop
            } else {
                Control::Continue
            }
        });
        assert!(out.stopped_early);
        assert_eq!(out.trace.rows.last().unwrap().k, 2);
    }

    #[test]
    fn bad_csv_reports_line() {
        let err = Trace::parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
