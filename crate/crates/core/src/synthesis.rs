//! Multi-start synthesis of static bias-field controllers.
//!
//! Each restart draws a random `(D, t)` and climbs the transfer probability
//! with a box-constrained quasi-Newton method. Poor local optima are kept:
//! the ensemble is meant to span a range of fidelities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Spectrum, TransferProblem};
use crate::error::{Error, Result};
use crate::network::{build_hamiltonian, BiasField, SpinNetworkSpec};
use crate::optimize::{minimize_box, Bounds, MinimizeOptions};
use crate::par::{map_range, ExecMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    /// Biases are confined to `[-bias_bound, bias_bound]`.
    pub bias_bound: f64,
    pub t_min: f64,
    /// Defaults to `5n` when absent.
    pub t_max: Option<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Weight `w_t` of the readout-time penalty in `p - w_t t`.
    pub time_weight: f64,
    /// Restart biases are drawn uniformly from `[-restart_bias, restart_bias]`.
    pub restart_bias: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            bias_bound: 100.0,
            t_min: 0.1,
            t_max: None,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            time_weight: 0.0,
            restart_bias: 10.0,
        }
    }
}

impl SynthesisOptions {
    pub fn t_max_for(&self, n: usize) -> f64 {
        self.t_max.unwrap_or(5.0 * n as f64)
    }

    fn validate(&self, n: usize) -> Result<()> {
        let t_max = self.t_max_for(n);
        if !(self.bias_bound > 0.0) || !(self.t_min > 0.0) || !(t_max >= self.t_min) {
            return Err(Error::Invalid(format!(
                "infeasible bounds: bias {} time [{}, {}]",
                self.bias_bound, self.t_min, t_max
            )));
        }
        if !(self.restart_bias >= 0.0) || self.time_weight < 0.0 {
            return Err(Error::Invalid("restart bias and time weight must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    /// 1-based restart index that produced this controller.
    pub m: usize,
    pub d: BiasField,
    pub t_f: f64,
    pub p_tf: f64,
    pub p_avg: f64,
}

/// Controllers sorted by descending `p_tf`, plus the permutation `I` that
/// ranks them by time-averaged probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerEnsemble {
    pub spec: SpinNetworkSpec,
    pub problem: TransferProblem,
    pub controllers: Vec<Controller>,
    /// `avg_rank[i]` is the 1-based rank of `controllers[i]` by `p_avg`.
    pub avg_rank: Vec<usize>,
    pub seed: u64,
    pub opts: SynthesisOptions,
}

impl ControllerEnsemble {
    pub fn len(&self) -> usize {
        self.controllers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty()
    }

    /// Controller indices in decreasing time-averaged order, i.e. `I^{-1}`.
    pub fn avg_order(&self) -> Vec<usize> {
        let mut order = vec![0; self.avg_rank.len()];
        for (i, &r) in self.avg_rank.iter().enumerate() {
            order[r - 1] = i;
        }
        order
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates an ensemble file.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut ens: ControllerEnsemble = serde_json::from_str(text)?;
        ens.spec.validate()?;
        ens.problem.n = ens.spec.n;
        ens.problem.validate()?;
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.spec.n;
        if self.controllers.is_empty() {
            return Err(Error::Invalid("ensemble has no controllers".into()));
        }
        if !is_permutation(&self.avg_rank, self.controllers.len()) {
            return Err(Error::Invalid("avg_rank is not a permutation of 1..=M".into()));
        }
        let h = build_hamiltonian(&self.spec)?;
        for w in self.controllers.windows(2) {
            if w[1].p_tf > w[0].p_tf {
                return Err(Error::Invalid("controllers are not sorted by p_tf".into()));
            }
        }
        for ctl in &self.controllers {
            if ctl.d.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: ctl.d.dim(),
                });
            }
            let p = Spectrum::of(&h, &ctl.d)?.probability(&self.problem, ctl.t_f);
            if (p - ctl.p_tf).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "controller {} stores p_tf {} but evaluates to {p}",
                    ctl.m, ctl.p_tf
                )));
            }
        }
        Ok(())
    }
}

fn is_permutation(perm: &[usize], m: usize) -> bool {
    let mut seen = vec![false; m];
    perm.len() == m
        && perm.iter().all(|&r| {
            (1..=m).contains(&r) && !std::mem::replace(&mut seen[r - 1], true)
        })
}

/// 1-based ranks in decreasing order of `values`, ties broken by position.
pub fn descending_ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Permutation `I` ranking controllers by decreasing `p_avg` (stable).
pub fn rank_by_time_average(controllers: &[Controller]) -> Vec<usize> {
    let avg: Vec<f64> = controllers.iter().map(|c| c.p_avg).collect();
    descending_ranks(&avg)
}

fn restart_rng(seed: u64, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m as u64);
    rng
}

/// One local optimization from restart `m` (1-based).
pub fn optimize_restart(
    spec: &SpinNetworkSpec,
    prob: &TransferProblem,
    m: usize,
    seed: u64,
    opts: &SynthesisOptions,
) -> Result<Controller> {
    let n = spec.n;
    let h = build_hamiltonian(spec)?;
    let t_max = opts.t_max_for(n);
    if prob.is_trivial() {
        // park the excitation: detune the source spin as far as allowed
        let mut d = vec![0.0; n];
        d[prob.in_spin - 1] = opts.bias_bound;
        let d = BiasField::new(d)?;
        let spectrum = Spectrum::of(&h, &d)?;
        return Ok(Controller {
            m,
            p_tf: spectrum.probability(prob, opts.t_min),
            p_avg: spectrum.time_average(prob),
            d,
            t_f: opts.t_min,
        });
    }

    let mut rng = restart_rng(seed, m);
    let mut x0: Vec<f64> = (0..n)
        .map(|_| {
            if opts.restart_bias > 0.0 {
                rng.random_range(-opts.restart_bias..=opts.restart_bias)
            } else {
                0.0
            }
        })
        .collect();
    let t_hi = t_max.min(2.0 * n as f64).max(opts.t_min);
    x0.push(if t_hi > opts.t_min {
        rng.random_range(opts.t_min..=t_hi)
    } else {
        opts.t_min
    });

    let mut lower = vec![-opts.bias_bound; n];
    let mut upper = vec![opts.bias_bound; n];
    lower.push(opts.t_min);
    upper.push(t_max);
    let bounds = Bounds { lower, upper };

    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let d = BiasField { d: x[..n].to_vec() };
        let t = x[n];
        let spectrum = match Spectrum::of(&h, &d) {
            Ok(s) => s,
            Err(_) => return (f64::INFINITY, vec![0.0; n + 1]),
        };
        let p = spectrum.probability(prob, t);
        let mut g: Vec<f64> = spectrum.bias_gradient(prob, t).into_iter().map(|v| -v).collect();
        g.push(-spectrum.probability_rate(prob, t) + opts.time_weight);
        (-p + opts.time_weight * t, g)
    };
    let min_opts = MinimizeOptions {
        max_iterations: opts.max_iterations,
        gradient_tolerance: opts.gradient_tolerance,
    };
    let result = minimize_box(objective, &x0, &bounds, &min_opts);

    let d = BiasField::new(result.x[..n].to_vec())?;
    let t_f = result.x[n];
    let spectrum = Spectrum::of(&h, &d)?;
    Ok(Controller {
        m,
        p_tf: spectrum.probability(prob, t_f),
        p_avg: spectrum.time_average(prob),
        d,
        t_f,
    })
}

/// Runs `count` independent restarts and assembles the sorted ensemble.
pub fn synthesize(
    spec: &SpinNetworkSpec,
    prob: &TransferProblem,
    count: usize,
    seed: u64,
    opts: &SynthesisOptions,
    mode: ExecMode,
) -> Result<ControllerEnsemble> {
    spec.validate()?;
    if prob.n != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: prob.n,
        });
    }
    prob.validate()?;
    if count == 0 {
        return Err(Error::Invalid("ensemble size must be at least 1".into()));
    }
    opts.validate(spec.n)?;

    let results = map_range(mode, count, |i| optimize_restart(spec, prob, i + 1, seed, opts));
    let mut controllers: Vec<Controller> = results.into_iter().collect::<Result<_>>()?;
    // stable: equal fidelities stay in restart order
    controllers.sort_by(|a, b| b.p_tf.total_cmp(&a.p_tf));
    let avg_rank = rank_by_time_average(&controllers);
    Ok(ControllerEnsemble {
        spec: *spec,
        problem: *prob,
        controllers,
        avg_rank,
        seed,
        opts: opts.clone(),
    })
}
