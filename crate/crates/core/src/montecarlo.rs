//! Seeded Monte Carlo experiments over randomly initialized networks.
//!
//! Trial `t` samples its network from `trial_seed(base_seed, t)`, so every
//! per-trial value depends only on the config and `t`. Trials run in parallel
//! on the current rayon pool and are collected in index order; statistics are
//! always recomputed from the per-trial records sorted by trial index, which
//! makes results independent of thread count and makes [`merge`] exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_theory::expected_crossings;
use crate::network::{init_network, Topology};
use crate::rng::trial_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Breakpoints of the network output.
    Regions,
    /// Zero crossings of hidden pre-activations on a finite interval.
    Crossings,
    /// Fraction of breakpoints created in one layer that reach the output.
    Survival,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub sigma_b: f64,
    pub trials: u64,
    pub base_seed: u64,
    pub mode: Mode,
    /// `[A, B]`; required for crossings.
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    /// Crossings: pre-activation layer in `[2, L+1]`, default 2.
    /// Survival: layer whose breakpoints are tracked, in `[1, L-1]`, default 1.
    #[serde(default)]
    pub target_layer: Option<usize>,
    /// Crossings: neurons `0..k` of the target layer counted per network,
    /// default 1.
    #[serde(default)]
    pub neurons_per_network: Option<usize>,
    /// Index of the first trial; runs over disjoint ranges can be merged.
    #[serde(default)]
    pub trial_offset: u64,
}

impl ExperimentConfig {
    pub fn new(topology: Topology, sigma_b: f64, trials: u64, base_seed: u64, mode: Mode) -> Self {
        ExperimentConfig {
            topology,
            sigma_b,
            trials,
            base_seed,
            mode,
            interval: None,
            target_layer: None,
            neurons_per_network: None,
            trial_offset: 0,
        }
    }

    pub fn with_interval(mut self, a: f64, b: f64) -> Self {
        self.interval = Some([a, b]);
        self
    }

    pub fn with_target_layer(mut self, layer: usize) -> Self {
        self.target_layer = Some(layer);
        self
    }

    pub fn with_neurons(mut self, neurons: usize) -> Self {
        self.neurons_per_network = Some(neurons);
        self
    }

    pub fn with_trial_range(mut self, offset: u64, trials: u64) -> Self {
        self.trial_offset = offset;
        self.trials = trials;
        self
    }

    /// Checks everything the selected mode needs.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_b.is_finite() && self.sigma_b > 0.0) {
            return Err(Error::InvalidSigma(self.sigma_b));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.trial_offset.checked_add(self.trials).is_none() {
            return Err(Error::InvalidConfig("trial range overflows u64".into()));
        }
        match self.mode {
            Mode::Regions => Ok(()),
            Mode::Crossings => self.crossing_setup().map(|_| ()),
            Mode::Survival => self.survival_layer().map(|_| ()),
        }
    }

    /// `(layer, neurons, a, b)` for a crossings run.
    fn crossing_setup(&self) -> Result<(usize, usize, f64, f64)> {
        let [a, b] = self
            .interval
            .ok_or_else(|| Error::InvalidConfig("crossings mode needs an interval".into()))?;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval(a, b));
        }
        let layer = self.target_layer.unwrap_or(2);
        let output = self.topology.depth() + 1;
        if layer == 1 {
            return Err(Error::FirstLayerAffine);
        }
        if layer == 0 || layer > output {
            return Err(Error::InvalidConfig(format!(
                "target_layer {layer} outside [2, {output}]"
            )));
        }
        let neurons = self.neurons_per_network.unwrap_or(1);
        let width = self.topology.width(layer);
        if neurons == 0 || neurons > width {
            return Err(Error::InvalidConfig(format!(
                "neurons_per_network {neurons} outside [1, {width}] for layer {layer}"
            )));
        }
        Ok((layer, neurons, a, b))
    }

    fn survival_layer(&self) -> Result<usize> {
        let depth = self.topology.depth();
        if depth < 2 {
            return Err(Error::NothingToPropagate(depth));
        }
        let layer = self.target_layer.unwrap_or(1);
        if layer == 0 || layer >= depth {
            return Err(Error::InvalidConfig(format!(
                "survival target_layer {layer} outside [1, {}]",
                depth - 1
            )));
        }
        Ok(layer)
    }

    fn trial_indices(&self) -> std::ops::Range<u64> {
        self.trial_offset..self.trial_offset + self.trials
    }

    fn expect_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidConfig(format!(
                "config mode is {:?}, expected {:?}",
                self.mode, mode
            )));
        }
        self.validate()
    }

    /// Theory value the estimate is compared against.
    pub fn theory_value(&self) -> Result<f64> {
        match self.mode {
            Mode::Regions => Ok(self.topology.total_hidden() as f64),
            Mode::Crossings => {
                let (layer, _, a, b) = self.crossing_setup()?;
                expected_crossings(layer, a, b, self.sigma_b)
            }
            Mode::Survival => {
                let layer = self.survival_layer()?;
                let widths = self.topology.hidden_widths();
                Ok(widths[layer..]
                    .iter()
                    .map(|&n| 1.0 - 0.5f64.powi(n.min(i32::MAX as usize) as i32))
                    .product())
            }
        }
    }
}

/// Outcome of one trial. `weight` is the number of units the value averages
/// over (1 for regions and crossings, created breakpoints for survival).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialValue {
    pub trial: u64,
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Weighted mean of the per-trial values.
    pub estimate_mean: f64,
    /// Standard error over trials; `std / sqrt(trials)` for unit weights.
    pub estimate_stderr: f64,
    pub trials_completed: u64,
    /// Sum of trial weights.
    pub total_weight: f64,
    pub theory_value: f64,
    pub ratio_to_theory: f64,
    /// `(mean - theory) / stderr`; absent when the stderr is zero.
    pub z_score: Option<f64>,
    /// Sorted by trial index.
    pub per_trial_values: Vec<TrialValue>,
}

impl ExperimentResult {
    fn from_trials(config: ExperimentConfig, mut trials: Vec<TrialValue>) -> Result<Self> {
        trials.sort_by_key(|t| t.trial);
        let theory = config.theory_value()?;
        let (mean, stderr, total) = weighted_stats(&trials);
        Ok(ExperimentResult {
            config,
            estimate_mean: mean,
            estimate_stderr: stderr,
            trials_completed: trials.len() as u64,
            total_weight: total,
            theory_value: theory,
            ratio_to_theory: mean / theory,
            z_score: (stderr > 0.0).then(|| (mean - theory) / stderr),
            per_trial_values: trials,
        })
    }

    /// Whether `|mean - theory| <= k * stderr + slack`.
    pub fn within(&self, k: f64, slack: f64) -> bool {
        (self.estimate_mean - self.theory_value).abs() <= k * self.estimate_stderr + slack
    }
}

/// Ratio estimator over trials: mean `sum(w v) / sum(w)` and the clustered
/// standard error `sqrt(n / (n - 1) * sum(w^2 (v - mean)^2)) / sum(w)` over
/// the `n` trials with positive weight.
fn weighted_stats(trials: &[TrialValue]) -> (f64, f64, f64) {
    let total: f64 = trials.iter().map(|t| t.weight).sum();
    if total <= 0.0 {
        return (0.0, 0.0, total);
    }
    let mean = trials.iter().map(|t| t.weight * t.value).sum::<f64>() / total;
    let n = trials.iter().filter(|t| t.weight > 0.0).count() as f64;
    if n < 2.0 {
        return (mean, 0.0, total);
    }
    let ss: f64 = trials
        .iter()
        .map(|t| (t.weight * (t.value - mean)).powi(2))
        .sum();
    (mean, (n / (n - 1.0) * ss).sqrt() / total, total)
}

fn run_trials(
    config: &ExperimentConfig,
    trial: impl Fn(u64) -> Result<TrialValue> + Sync + Send,
) -> Result<ExperimentResult> {
    let trials = config
        .trial_indices()
        .into_par_iter()
        .map(trial)
        .collect::<Result<Vec<_>>>()?;
    ExperimentResult::from_trials(config.clone(), trials)
}

/// Breakpoints of the output per trial; theory `n_1 + ... + n_L`.
pub fn run_regions(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.expect_mode(Mode::Regions)?;
    run_trials(config, |t| {
        let net = init_network(
            &config.topology,
            config.sigma_b,
            trial_seed(config.base_seed, t),
        )?;
        let breakpoints = crate::network::forward_pwl(&net).count_breakpoints()?;
        Ok(TrialValue {
            trial: t,
            value: breakpoints as f64,
            weight: 1.0,
        })
    })
}

/// Mean zero crossings on `[A, B]` over the first neurons of the target
/// layer, one value per network so that the stderr is taken over networks.
pub fn run_crossings(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.expect_mode(Mode::Crossings)?;
    let (layer, neurons, a, b) = config.crossing_setup()?;
    run_trials(config, |t| {
        let net = init_network(
            &config.topology,
            config.sigma_b,
            trial_seed(config.base_seed, t),
        )?;
        let pre = net.preactivations_prefix(layer, neurons)?;
        let mut total = 0usize;
        for p in &pre {
            total += p.count_sign_changes(a, b)?;
        }
        Ok(TrialValue {
            trial: t,
            value: total as f64 / neurons as f64,
            weight: 1.0,
        })
    })
}

/// Fraction of the breakpoints created by the target layer's ReLUs that
/// are still knots of the output, weighted by the number created.
pub fn run_survival(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.expect_mode(Mode::Survival)?;
    let layer = config.survival_layer()?;
    run_trials(config, |t| {
        let net = init_network(
            &config.topology,
            config.sigma_b,
            trial_seed(config.base_seed, t),
        )?;
        let (out, created) = net.forward_traced();
        let roots = &created[layer - 1];
        let survived = roots
            .iter()
            .filter(|r| out.knots().binary_search_by(|k| k.total_cmp(r)).is_ok())
            .count();
        let weight = roots.len() as f64;
        Ok(TrialValue {
            trial: t,
            value: if roots.is_empty() {
                0.0
            } else {
                survived as f64 / weight
            },
            weight,
        })
    })
}

/// Runs the experiment selected by `config.mode`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.mode {
        Mode::Regions => run_regions(config),
        Mode::Crossings => run_crossings(config),
        Mode::Survival => run_survival(config),
    }
}

/// Pools results over disjoint trial ranges of the same experiment. The
/// outcome equals a single run over the union of trials, bit for bit.
pub fn merge(results: &[ExperimentResult]) -> Result<ExperimentResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::ConfigMismatch("nothing to merge".into()))?;
    let key = |c: &ExperimentConfig| {
        let mut c = c.clone();
        c.trials = 0;
        c.trial_offset = 0;
        c
    };
    let reference = key(&first.config);
    for r in &results[1..] {
        if key(&r.config) != reference {
            return Err(Error::ConfigMismatch(
                "configs differ beyond their trial ranges".into(),
            ));
        }
    }
    let mut trials: Vec<TrialValue> = results
        .iter()
        .flat_map(|r| r.per_trial_values.iter().copied())
        .collect();
    trials.sort_by_key(|t| t.trial);
    if trials.windows(2).any(|w| w[0].trial == w[1].trial) {
        return Err(Error::ConfigMismatch("trial index sets overlap".into()));
    }
    let mut config = first.config.clone();
    config.trial_offset = trials[0].trial;
    config.trials = trials.len() as u64;
    ExperimentResult::from_trials(config, trials)
}
