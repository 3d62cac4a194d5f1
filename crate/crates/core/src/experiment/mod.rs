//! Studies over a controller ensemble: sensitivity sweeps, instantaneous vs
//! averaged fidelity, and μ against fidelity, with their rank statistics.
//!
//! Every study computes its records first and then writes CSV (the
//! authoritative output), an SVG figure and a JSON summary.

mod plot;
mod table;
mod tau;

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{Spectrum, TransferProblem};
use crate::error::{Error, Result};
use crate::lft::{absorb_controller, build_plant, output_matrix};
use crate::network::{build_hamiltonian, parse_selector, PerturbationStructure, SpinNetworkSpec};
use crate::par::{map_slice, ExecMode};
use crate::ssv::{robust_performance_mu, MuOptions};
use crate::synthesis::{synthesize, ControllerEnsemble, SynthesisOptions};

pub use plot::{render as render_svg, Panel, Series};
pub use table::{format_float, read_column, Cell, Table};
pub use tau::kendall_tau;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisParams {
    pub count: usize,
    #[serde(flatten)]
    pub options: SynthesisOptions,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        SynthesisParams {
            count: 100,
            options: SynthesisOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: SpinNetworkSpec,
    pub transfer: TransferProblem,
    /// Ensemble file; relative paths resolve against the config file.
    #[serde(default)]
    pub ensemble: Option<PathBuf>,
    #[serde(default)]
    pub synthesis: SynthesisParams,
    /// Selectors such as `coupling(5,6)` or `leakage(3)`.
    #[serde(default)]
    pub structures: Vec<String>,
    /// `[re, im]`.
    #[serde(default)]
    pub s0: Complex64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mu: MuOptions,
    /// Fixed window `[start, end]` of 1-based averaged ranks for the
    /// incremental statistic; detected when absent.
    #[serde(default)]
    pub window: Option<[usize; 2]>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.transfer.n = cfg.network.n;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let (Some(e), Some(dir)) = (cfg.ensemble.as_mut(), path.parent()) {
            if e.is_relative() {
                *e = dir.join(&*e);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.transfer.n != self.network.n {
            return Err(Error::DimensionMismatch {
                expected: self.network.n,
                got: self.transfer.n,
            });
        }
        self.transfer.validate()?;
        if self.synthesis.count == 0 {
            return Err(Error::Invalid("synthesis.count must be at least 1".into()));
        }
        if let Some([a, b]) = self.window {
            if a < 1 || b <= a {
                return Err(Error::Invalid(format!("window [{a}, {b}] must satisfy 1 <= start < end")));
            }
        }
        for s in &self.structures {
            parse_selector(&self.network, s)?;
        }
        Ok(())
    }

    /// Parsed perturbation structures; an empty list is an error.
    pub fn perturbations(&self) -> Result<Vec<PerturbationStructure>> {
        if self.structures.is_empty() {
            return Err(Error::Invalid("config lists no perturbation structures".into()));
        }
        self.structures
            .iter()
            .map(|s| parse_selector(&self.network, s))
            .collect()
    }

    pub fn synthesize(&self, mode: ExecMode) -> Result<ControllerEnsemble> {
        synthesize(
            &self.network,
            &self.transfer,
            self.synthesis.count,
            self.seed,
            &self.synthesis.options,
            mode,
        )
    }

    /// Loads `path` (or the configured ensemble file) and checks that it
    /// belongs to this network and transfer.
    pub fn load_ensemble(&self, path: Option<&Path>) -> Result<ControllerEnsemble> {
        let path = path
            .or(self.ensemble.as_deref())
            .ok_or_else(|| Error::Invalid("no ensemble file given".into()))?;
        let ens = ControllerEnsemble::from_json(&std::fs::read_to_string(path)?)?;
        self.check_ensemble(&ens)?;
        Ok(ens)
    }

    pub fn check_ensemble(&self, ens: &ControllerEnsemble) -> Result<()> {
        if ens.spec != self.network || ens.problem != self.transfer {
            return Err(Error::Invalid(format!(
                "ensemble is for {:?} {}->{} but the config asks for {:?} {}->{}",
                ens.spec, ens.problem.in_spin, ens.problem.out_spin, self.network, self.transfer.in_spin, self.transfer.out_spin
            )));
        }
        Ok(())
    }
}

/// One controller of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub m: usize,
    /// Position in the ensemble list (decreasing `p_tf`).
    pub rank_inst: usize,
    /// `I(m)`: rank by decreasing time-averaged probability.
    pub rank_avg: usize,
    pub p_tf: f64,
    pub p_avg: f64,
    pub sens: f64,
    pub log_sens: Option<f64>,
    pub mu_lower: Option<f64>,
    pub mu_upper: Option<f64>,
}

fn base_records(ens: &ControllerEnsemble) -> Vec<RunRecord> {
    ens.controllers
        .iter()
        .enumerate()
        .map(|(i, c)| RunRecord {
            m: c.m,
            rank_inst: i + 1,
            rank_avg: ens.avg_rank[i],
            p_tf: c.p_tf,
            p_avg: c.p_avg,
            sens: 0.0,
            log_sens: None,
            mu_lower: None,
            mu_upper: None,
        })
        .collect()
}

fn top_decile(m: usize) -> usize {
    m.div_ceil(10).max(1)
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn slug(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

// ---------------------------------------------------------------------------
// sensitivity

/// Ranks (1-based, ensemble order) where fidelity and sensitivity turn.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityCrossover {
    /// First rank with `p_tf < 0.9`.
    pub p_drop_rank: Option<usize>,
    /// First rank whose mean |sensitivity| exceeds twice the top-decile mean.
    pub sens_rise_rank: Option<usize>,
}

impl SensitivityCrossover {
    /// Rank distance between the two events, when both occur.
    pub fn separation(&self) -> Option<usize> {
        Some(self.p_drop_rank?.abs_diff(self.sens_rise_rank?))
    }
}

#[derive(Clone, Debug)]
pub struct SensitivityStudy {
    /// Mean absolute sensitivity over the structures, ensemble order.
    pub records: Vec<RunRecord>,
    pub per_structure: Vec<(String, Vec<RunRecord>)>,
    pub crossover: SensitivityCrossover,
}

pub fn sensitivity_study(cfg: &ExperimentConfig, ens: &ControllerEnsemble, mode: ExecMode) -> Result<SensitivityStudy> {
    cfg.check_ensemble(ens)?;
    let structures = cfg.perturbations()?;
    let sweep = crate::dynamics::sensitivity_sweep(ens, &structures, mode)?;
    let base = base_records(ens);
    let per_structure: Vec<(String, Vec<RunRecord>)> = sweep
        .per_structure
        .iter()
        .map(|(label, recs)| {
            let rows = base
                .iter()
                .zip(recs)
                .map(|(b, r)| RunRecord {
                    sens: r.value.abs(),
                    log_sens: r.log_value.map(f64::abs),
                    ..b.clone()
                })
                .collect();
            (label.clone(), rows)
        })
        .collect();
    let k = per_structure.len() as f64;
    let records: Vec<RunRecord> = base
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let logs: Option<Vec<f64>> = per_structure.iter().map(|(_, r)| r[i].log_sens).collect();
            RunRecord {
                sens: sweep.mean[i].value,
                log_sens: logs.map(|l| l.iter().sum::<f64>() / k),
                ..b.clone()
            }
        })
        .collect();

    let dec = top_decile(records.len());
    let base_sens = records[..dec].iter().map(|r| r.sens).sum::<f64>() / dec as f64;
    let crossover = SensitivityCrossover {
        p_drop_rank: records.iter().position(|r| r.p_tf < 0.9).map(|i| i + 1),
        sens_rise_rank: records.iter().position(|r| r.sens > 2.0 * base_sens).map(|i| i + 1),
    };
    Ok(SensitivityStudy {
        records,
        per_structure,
        crossover,
    })
}

fn sensitivity_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(&["m", "rank_inst", "rank_avg", "p_tf", "p_avg", "sens", "log_sens"]);
    for r in records {
        t.push(vec![
            r.m.into(),
            r.rank_inst.into(),
            r.rank_avg.into(),
            r.p_tf.into(),
            r.p_avg.into(),
            r.sens.into(),
            r.log_sens.into(),
        ]);
    }
    t
}

/// Writes `sensitivity_mean.csv`, one `sensitivity_<structure>.csv` per
/// structure, `sensitivity.svg`, `log_sensitivity.svg` and
/// `sensitivity_summary.json` into `out`.
pub fn run_sensitivity_study(
    cfg: &ExperimentConfig,
    ens: &ControllerEnsemble,
    out: &Path,
    mode: ExecMode,
) -> Result<SensitivityStudy> {
    let study = sensitivity_study(cfg, ens, mode)?;
    std::fs::create_dir_all(out)?;
    sensitivity_table(&study.records).write(&out.join("sensitivity_mean.csv"))?;
    for (label, rows) in &study.per_structure {
        sensitivity_table(rows).write(&out.join(format!("sensitivity_{}.csv", slug(label))))?;
    }
    let p_panel = Panel {
        y_label: "p(t_f)".into(),
        log_y: false,
        series: vec![Series {
            name: "p(t_f)".into(),
            values: study.records.iter().map(|r| r.p_tf).collect(),
        }],
    };
    let families = |log: bool| {
        study
            .per_structure
            .iter()
            .map(|(label, rows)| Series {
                name: label.clone(),
                values: rows
                    .iter()
                    .map(|r| if log { r.log_sens.unwrap_or(f64::NAN) } else { r.sens })
                    .collect(),
            })
            .collect::<Vec<_>>()
    };
    let sens_svg = plot::render(
        "squared fidelity and sensitivity",
        "controller rank (decreasing p(t_f))",
        &[
            p_panel,
            Panel {
                y_label: "|dp/d delta|".into(),
                log_y: true,
                series: families(false),
            },
        ],
    );
    write_text(&out.join("sensitivity.svg"), &sens_svg)?;
    let log_svg = plot::render(
        "squared fidelity and logarithmic sensitivity",
        "controller rank (decreasing p(t_f))",
        &[
            Panel {
                y_label: "p(t_f)".into(),
                log_y: false,
                series: vec![Series {
                    name: "p(t_f)".into(),
                    values: study.records.iter().map(|r| r.p_tf).collect(),
                }],
            },
            Panel {
                y_label: "|dp/d delta| / (1 - p)".into(),
                log_y: true,
                series: families(true),
            },
        ],
    );
    write_text(&out.join("log_sensitivity.svg"), &log_svg)?;
    write_json(
        &out.join("sensitivity_summary.json"),
        &json!({
            "controllers": study.records.len(),
            "structures": study.per_structure.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
            "crossover": study.crossover,
            "separation": study.crossover.separation(),
        }),
    )?;
    Ok(study)
}

// ---------------------------------------------------------------------------
// instantaneous vs averaged

#[derive(Clone, Debug)]
pub struct AverageStudy {
    pub records: Vec<RunRecord>,
    /// τ between the two rankings.
    pub tau: f64,
}

pub fn average_vs_instant_study(cfg: &ExperimentConfig, ens: &ControllerEnsemble) -> Result<AverageStudy> {
    cfg.check_ensemble(ens)?;
    let records = base_records(ens);
    let inst: Vec<f64> = records.iter().map(|r| r.rank_inst as f64).collect();
    let avg: Vec<f64> = records.iter().map(|r| r.rank_avg as f64).collect();
    let tau = if records.len() == 1 { 1.0 } else { kendall_tau(&inst, &avg)? };
    Ok(AverageStudy { records, tau })
}

fn average_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(&["m", "rank_inst", "rank_avg", "p_tf", "p_avg"]);
    for r in records {
        t.push(vec![r.m.into(), r.rank_inst.into(), r.rank_avg.into(), r.p_tf.into(), r.p_avg.into()]);
    }
    t
}

/// Writes `average_by_inst.csv`, `average_by_avg.csv`, `average.svg` and
/// `average_summary.json`.
pub fn run_average_vs_instant_study(cfg: &ExperimentConfig, ens: &ControllerEnsemble, out: &Path) -> Result<AverageStudy> {
    let study = average_vs_instant_study(cfg, ens)?;
    std::fs::create_dir_all(out)?;
    average_table(&study.records).write(&out.join("average_by_inst.csv"))?;
    let mut by_avg = study.records.clone();
    by_avg.sort_by_key(|r| r.rank_avg);
    average_table(&by_avg).write(&out.join("average_by_avg.csv"))?;
    let panel = |rows: &[RunRecord], label: &str| Panel {
        y_label: label.into(),
        log_y: false,
        series: vec![
            Series {
                name: "p(t_f)".into(),
                values: rows.iter().map(|r| r.p_tf).collect(),
            },
            Series {
                name: "time average".into(),
                values: rows.iter().map(|r| r.p_avg).collect(),
            },
        ],
    };
    let svg = plot::render(
        "instantaneous vs time-averaged probability",
        "rank (top: by p(t_f), bottom: by time average)",
        &[panel(&study.records, "by p(t_f)"), panel(&by_avg, "by time average")],
    );
    write_text(&out.join("average.svg"), &svg)?;
    write_json(
        &out.join("average_summary.json"),
        &json!({ "controllers": study.records.len(), "tau": study.tau }),
    )?;
    Ok(study)
}

// ---------------------------------------------------------------------------
// mu

/// Averaged-rank window (1-based, inclusive) used for incremental statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossoverWindow {
    pub start: usize,
    pub end: usize,
    /// First averaged rank with `p_avg < 0.9 max p_avg`.
    pub p_drop_rank: Option<usize>,
    /// First averaged rank with `μ_lower` above 1.5 times its top-decile median.
    pub mu_rise_rank: Option<usize>,
    /// Both events were found (or the window was configured).
    pub detected: bool,
    pub configured: bool,
}

/// Minimum width of a detected window: `max(5, M/10)` ranks, capped at `M`.
pub fn minimum_window_width(m: usize) -> usize {
    5.max(m / 10).min(m)
}

/// Locates the fidelity drop and the μ rise in averaged-rank order and
/// returns the smallest window containing both, widened symmetrically to
/// [`minimum_window_width`]. Falls back to the full range when either event
/// is missing.
pub fn detect_crossover(p_avg: &[f64], mu_lower: &[f64]) -> CrossoverWindow {
    let m = p_avg.len();
    let pmax = p_avg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let p_drop = p_avg.iter().position(|&p| p < 0.9 * pmax);
    let base = median(&mu_lower[..top_decile(m).min(m)]);
    let mu_rise = mu_lower.iter().position(|&v| v > 1.5 * base);
    let (mut start, mut end, detected) = match (p_drop, mu_rise) {
        (Some(a), Some(b)) => (a.min(b), a.max(b), true),
        _ => (0, m.saturating_sub(1), false),
    };
    let width = minimum_window_width(m);
    while end + 1 - start < width {
        if end + 1 < m {
            end += 1;
        }
        if end + 1 - start < width && start > 0 {
            start -= 1;
        }
    }
    CrossoverWindow {
        start: start + 1,
        end: end + 1,
        p_drop_rank: p_drop.map(|i| i + 1),
        mu_rise_rank: mu_rise.map(|i| i + 1),
        detected,
        configured: false,
    }
}

/// Rank statistics of the μ study; `None` where τ is undefined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuTaus {
    pub mu_vs_sens: Option<f64>,
    pub mu_vs_p: Option<f64>,
    pub mu_vs_p_incremental: Option<f64>,
}

/// Whether, inside the window, the averaged fidelity decays while the
/// sensitivity and μ medians exceed their top-decile medians.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossoverBehaviour {
    pub p_decays: bool,
    pub sens_rises: bool,
    pub mu_rises: bool,
}

impl CrossoverBehaviour {
    pub fn holds(&self) -> bool {
        self.p_decays && self.sens_rises && self.mu_rises
    }
}

#[derive(Clone, Debug)]
pub struct MuStudy {
    /// Records in averaged-rank order `I(m)`.
    pub records: Vec<RunRecord>,
    pub converged: Vec<bool>,
    pub taus: MuTaus,
    pub window: CrossoverWindow,
    pub behaviour: CrossoverBehaviour,
}

/// First differences of `v` restricted to ranks `start..=end`.
pub fn increments(v: &[f64], start: usize, end: usize) -> Vec<f64> {
    v[start - 1..end].windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn mu_study(cfg: &ExperimentConfig, ens: &ControllerEnsemble, mode: ExecMode) -> Result<MuStudy> {
    cfg.check_ensemble(ens)?;
    let structures = cfg.perturbations()?;
    let h = build_hamiltonian(&ens.spec)?;
    let prob = ens.problem;
    let plant = build_plant(&h, &output_matrix(&prob), &structures, cfg.s0)?;
    let rows: Vec<Result<(f64, f64, f64, bool)>> = map_slice(mode, &ens.controllers, |ctl| {
        let spectrum = Spectrum::of(&h, &ctl.d)?;
        let sens = structures
            .iter()
            .map(|s| {
                let e = s.s.map(|x| crate::linalg::c(x * s.scale_for(&ctl.d)));
                spectrum.probability_derivative(&e, &prob, ctl.t_f).abs()
            })
            .sum::<f64>()
            / structures.len() as f64;
        let g = absorb_controller(&plant, &ctl.d)?;
        let r = robust_performance_mu(&g, &g.uncertainty_structure(), &cfg.mu)?;
        Ok((sens, r.lower, r.upper, r.converged))
    });
    let rows: Vec<(f64, f64, f64, bool)> = rows.into_iter().collect::<Result<_>>()?;
    let base = base_records(ens);
    let mut records = Vec::with_capacity(base.len());
    let mut converged = Vec::with_capacity(base.len());
    for &i in &ens.avg_order() {
        let (sens, lo, up, conv) = rows[i];
        records.push(RunRecord {
            sens,
            mu_lower: Some(lo),
            mu_upper: Some(up),
            ..base[i].clone()
        });
        converged.push(conv);
    }

    let p: Vec<f64> = records.iter().map(|r| r.p_avg).collect();
    let mu: Vec<f64> = records.iter().map(|r| r.mu_lower.unwrap_or(0.0)).collect();
    let sens: Vec<f64> = records.iter().map(|r| r.sens).collect();
    let m = records.len();
    let window = match cfg.window {
        Some([a, b]) => {
            if b > m {
                return Err(Error::Invalid(format!("window end {b} exceeds ensemble size {m}")));
            }
            CrossoverWindow {
                start: a,
                end: b,
                p_drop_rank: None,
                mu_rise_rank: None,
                detected: true,
                configured: true,
            }
        }
        None => detect_crossover(&p, &mu),
    };
    let taus = MuTaus {
        mu_vs_sens: kendall_tau(&sens, &mu).ok(),
        mu_vs_p: kendall_tau(&mu, &p).ok(),
        mu_vs_p_incremental: kendall_tau(&increments(&mu, window.start, window.end), &increments(&p, window.start, window.end)).ok(),
    };
    let dec = top_decile(m);
    let inside = |v: &[f64]| median(&v[window.start - 1..window.end]);
    let behaviour = CrossoverBehaviour {
        p_decays: p[window.end - 1] < p[window.start - 1],
        sens_rises: inside(&sens) > median(&sens[..dec]),
        mu_rises: inside(&mu) > median(&mu[..dec]),
    };
    Ok(MuStudy {
        records,
        converged,
        taus,
        window,
        behaviour,
    })
}

/// Writes `mu.csv` (averaged-rank order), `mu.svg` and `mu_summary.json`.
pub fn run_mu_study(cfg: &ExperimentConfig, ens: &ControllerEnsemble, out: &Path, mode: ExecMode) -> Result<MuStudy> {
    let study = mu_study(cfg, ens, mode)?;
    std::fs::create_dir_all(out)?;
    let mut t = Table::new(&[
        "rank_avg", "m", "rank_inst", "p_tf", "p_avg", "sens", "mu_lower", "mu_upper", "converged",
    ]);
    for (r, &conv) in study.records.iter().zip(&study.converged) {
        t.push(vec![
            r.rank_avg.into(),
            r.m.into(),
            r.rank_inst.into(),
            r.p_tf.into(),
            r.p_avg.into(),
            r.sens.into(),
            r.mu_lower.into(),
            r.mu_upper.into(),
            conv.into(),
        ]);
    }
    t.write(&out.join("mu.csv"))?;
    let mu: Vec<f64> = study.records.iter().map(|r| r.mu_lower.unwrap_or(f64::NAN)).collect();
    let mu_max = mu.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let svg = plot::render(
        "mu and time-averaged probability",
        "controller rank I(m) (decreasing time average)",
        &[
            Panel {
                y_label: "p_avg, mu / max mu".into(),
                log_y: false,
                series: vec![
                    Series {
                        name: "time average".into(),
                        values: study.records.iter().map(|r| r.p_avg).collect(),
                    },
                    Series {
                        name: "mu lower (scaled)".into(),
                        values: mu.iter().map(|v| if mu_max > 0.0 { v / mu_max } else { *v }).collect(),
                    },
                ],
            },
            Panel {
                y_label: "mu, |dp/d delta|".into(),
                log_y: true,
                series: vec![
                    Series {
                        name: "mu lower".into(),
                        values: mu.clone(),
                    },
                    Series {
                        name: "sensitivity".into(),
                        values: study.records.iter().map(|r| r.sens).collect(),
                    },
                ],
            },
        ],
    );
    write_text(&out.join("mu.svg"), &svg)?;
    write_json(
        &out.join("mu_summary.json"),
        &json!({
            "controllers": study.records.len(),
            "structures": cfg.structures,
            "s0": [cfg.s0.re, cfg.s0.im],
            "taus": study.taus,
            "window": study.window,
            "behaviour": study.behaviour,
            "unconverged": study.converged.iter().filter(|c| !**c).count(),
        }),
    )?;
    Ok(study)
}
