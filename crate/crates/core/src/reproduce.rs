//! Built-in experiments: the region sweeps, the non-convex stopping example
//! and the two dataset runs.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::config::{ExperimentConfig, ModelBlock, ObserverBlock, PathsBlock, SimBlock};
use crate::detector::{
    solve, stopping_set_analysis, value_discontinuities, SolverConfig, StoppingSetReport,
};
use crate::error::{Error, Result};
use crate::io::{write_policy_csv, write_regions_csv};
use crate::social::{learning_region_sweep, RegionRow, DEFAULT_REGION_GRID};

/// Risk-aversion factors swept for the region figures, largest first.
pub const SWEEP_ALPHAS: [f64; 10] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// Discounts reported alongside the dataset thresholds.
pub const RHO_SENSITIVITY: [f64; 3] = [0.85, 0.9, 0.95];

/// Allowed distance from a published stopping threshold.
pub const THRESHOLD_WINDOW: f64 = 0.02;

/// Minimum ratio of a value jump to the neighboring cell variation.
pub const JUMP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Fig1,
    Fig2,
    Fig3,
    Skype,
    Ipod,
}

impl Target {
    pub const ALL: [Target; 5] = [
        Target::Fig1,
        Target::Fig2,
        Target::Fig3,
        Target::Skype,
        Target::Ipod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig1 => "fig1",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Skype => "skype",
            Target::Ipod => "ipod",
        }
    }

    /// Published upper stopping threshold in `pi(2)`.
    pub fn published_threshold(self) -> Option<f64> {
        match self {
            Target::Skype => Some(0.354),
            Target::Ipod => Some(0.368),
            _ => None,
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let rows = |r: &[&[f64]]| r.iter().map(|x| x.to_vec()).collect::<Vec<_>>();
        let fig_b = rows(&[&[0.8, 0.2], &[0.3, 0.7]]);
        let data_b = rows(&[&[0.7, 0.3], &[0.3, 0.7]]);
        let data_c = rows(&[&[0.5, 1.0], &[1.0, 0.5]]);
        let (b, p, c, alpha, observer) = match self {
            Target::Fig1 => (
                fig_b,
                rows(&[&[1.0, 0.0], &[0.0, 1.0]]),
                rows(&[&[1.0, 2.0], &[3.0, 0.5]]),
                0.8,
                None,
            ),
            Target::Fig2 => (
                fig_b,
                rows(&[&[1.0, 0.0], &[0.1, 0.9]]),
                rows(&[&[1.0, 2.0], &[3.0, 0.5]]),
                0.8,
                None,
            ),
            Target::Fig3 => (
                fig_b,
                rows(&[&[1.0, 0.0], &[0.06, 0.94]]),
                rows(&[&[1.0, 2.0], &[2.5, 0.5]]),
                0.8,
                Some((vec![0.0, 3.0], 1.25)),
            ),
            Target::Skype => (
                data_b,
                rows(&[&[1.0, 0.0], &[0.04, 0.96]]),
                data_c,
                0.45,
                Some((vec![0.0, 2.0], 0.8)),
            ),
            Target::Ipod => (
                data_b,
                rows(&[&[1.0, 0.0], &[0.11, 0.89]]),
                data_c,
                0.45,
                Some((vec![0.0, 1.8], 0.95)),
            ),
        };
        ExperimentConfig {
            model: ModelBlock {
                states: 2,
                observations: 2,
                b,
                p,
                c,
                alpha,
            },
            observer: observer.map(|(f, d)| ObserverBlock {
                f,
                d,
                rho: Some(0.9),
            }),
            solver: SolverConfig::default(),
            sim: SimBlock::default(),
            paths: PathsBlock::default(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "target",
                    format!("unknown target `{s}` (expected fig1, fig2, fig3, skype or ipod)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproduceSummary {
    pub target: Target,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl ReproduceSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = format!("target: {}\n", self.target);
        for c in &self.checks {
            s += &format!(
                "[{}] {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for n in &self.notes {
            s += &format!("note: {n}\n");
        }
        s
    }
}

/// True if widths never grow as `alpha` decreases (rows sorted by
/// decreasing `alpha`).
pub fn width_non_increasing(rows: &[RegionRow]) -> bool {
    rows.windows(2).all(|w| w[1].width <= w[0].width + 1e-9)
}

/// True if some row with `alpha <= alpha_max` has no learning region.
pub fn width_vanishes(rows: &[RegionRow], alpha_max: f64) -> bool {
    rows.iter()
        .any(|r| r.alpha <= alpha_max + 1e-12 && r.width == 0.0)
}

fn widths(rows: &[RegionRow]) -> String {
    rows.iter()
        .map(|r| format!("{}:{:.4}", r.alpha, r.width))
        .collect::<Vec<_>>()
        .join(" ")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Upper stopping threshold for a dataset target at discount `rho`.
pub fn dataset_threshold(
    target: Target,
    rho: f64,
) -> Result<(StoppingSetReport, crate::detector::SolvedPolicy)> {
    let cfg = target.config();
    let model = cfg.agent_model()?;
    let obs = cfg.require_observer()?.with_discount(rho)?;
    let policy = solve(&model, &obs, &cfg.solver)?;
    Ok((stopping_set_analysis(&policy), policy))
}

/// Runs a built-in experiment and writes its artifacts into `out_dir`.
pub fn run_reproduce(target: Target, out_dir: &Path) -> Result<ReproduceSummary> {
    fs::create_dir_all(out_dir)?;
    let cfg = target.config();
    let model = cfg.agent_model()?;
    let mut checks = Vec::new();
    let mut files = Vec::new();
    let mut notes = Vec::new();

    match target {
        Target::Fig1 | Target::Fig2 => {
            let rows = learning_region_sweep(&model, &SWEEP_ALPHAS, DEFAULT_REGION_GRID)?;
            let path = out_dir.join(format!("{target}_regions.csv"));
            write_regions_csv(create(&path)?, &rows)?;
            files.push(path);
            if target == Target::Fig1 {
                checks.push(Check {
                    name: "width non-increasing as alpha decreases".into(),
                    passed: width_non_increasing(&rows),
                    detail: widths(&rows),
                });
            } else {
                checks.push(Check {
                    name: "learning region absent for some alpha <= 0.5".into(),
                    passed: width_vanishes(&rows, 0.5),
                    detail: widths(&rows),
                });
            }
            if rows.iter().any(|r| r.non_monotone) {
                notes.push("some decision switches more than once; boundaries left blank".into());
            }
        }
        Target::Fig3 | Target::Skype | Target::Ipod => {
            let obs = cfg.require_observer()?;
            let policy = solve(&model, &obs, &cfg.solver)?;
            let report = stopping_set_analysis(&policy);
            let policy_path = out_dir.join(format!("{target}_policy.csv"));
            write_policy_csv(create(&policy_path)?, &policy)?;
            let report_path = out_dir.join(format!("{target}_stopping_set.json"));
            fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
            files.push(policy_path);
            files.push(report_path);
            checks.push(Check {
                name: "value iteration converged".into(),
                passed: policy.converged && policy.residual <= cfg.solver.tol,
                detail: format!(
                    "{} iterations, residual {:.3e}",
                    policy.iterations, policy.residual
                ),
            });

            if target == Target::Fig3 {
                let jumps = value_discontinuities(&policy, JUMP_FACTOR);
                checks.push(Check {
                    name: "stopping set has at least two disjoint intervals".into(),
                    passed: report.intervals.len() >= 2,
                    detail: format!("intervals {:?}", report.intervals),
                });
                checks.push(Check {
                    name: format!("value function jump above {JUMP_FACTOR}x local variation"),
                    passed: !jumps.is_empty(),
                    detail: format!("{} jumps", jumps.len()),
                });
            } else {
                let published = target.published_threshold().expect("dataset target");
                let upper = report.upper_threshold();
                checks.push(Check {
                    name: format!("upper threshold within {THRESHOLD_WINDOW} of {published}"),
                    passed: upper.is_some_and(|u| (u - published).abs() <= THRESHOLD_WINDOW),
                    detail: format!("upper threshold {} at rho 0.9", fmt_opt(upper)),
                });
                for rho in RHO_SENSITIVITY {
                    let (r, _) = dataset_threshold(target, rho)?;
                    notes.push(format!(
                        "rho {rho}: upper threshold {}",
                        fmt_opt(r.upper_threshold())
                    ));
                }
            }
        }
    }

    let summary = ReproduceSummary {
        target,
        checks,
        files,
        notes,
    };
    let summary_path = out_dir.join(format!("{target}_summary.txt"));
    fs::write(&summary_path, summary.render())?;
    let mut summary = summary;
    summary.files.push(summary_path);
    Ok(summary)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}"))
        .unwrap_or_else(|| "none".into())
}
