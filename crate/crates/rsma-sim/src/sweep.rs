//! Monte Carlo sweeps with a paired design: within a trial every scheme
//! consumes the identical channel set, and per-trial seeds derive from the
//! base seed plus the trial index, so results are reproducible at any
//! parallelism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rsma_core::solver::{solve_scheme, Scheme, SolveOptions};
use rsma_core::SystemConfig;

use crate::error::SimError;
use crate::scenario::{generate_scenario, GenParams};

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Total power budget, watts.
    #[serde(rename = "P_tot")]
    TotalPower,
    /// Interference-temperature cap, watts.
    #[serde(rename = "I_th")]
    InterferenceThreshold,
    /// Square grid size: beams = subcarriers = value, users = 2*value.
    #[serde(rename = "dims")]
    Dims,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::TotalPower => "P_tot",
            SweepVariable::InterferenceThreshold => "I_th",
            SweepVariable::Dims => "dims",
        }
    }
}

/// Sweep description; serializable so whole experiments can be pinned in a
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub seed_base: u64,
    #[serde(default)]
    pub base: SystemConfig,
    #[serde(default)]
    pub generation: GenParams,
    #[serde(default)]
    pub options: SolveOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.values.is_empty() {
            return Err(SimError::config("sweep value list must be nonempty"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::config("sweep values must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(SimError::config("trials must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(SimError::config("at least one scheme must be requested"));
        }
        if self.variable == SweepVariable::Dims {
            if let Some(v) = self.values.iter().find(|v| **v < 1.0 || v.fract() != 0.0) {
                return Err(SimError::config(format!(
                    "dims sweep values must be positive integers, got {v}"
                )));
            }
        }
        self.base.validate().map_err(|e| SimError::config(e.to_string()))?;
        self.generation.validate()?;
        Ok(())
    }

    /// The configuration at one sweep value.
    pub fn config_at(&self, value: f64) -> Result<SystemConfig, SimError> {
        let mut config = self.base.clone();
        match self.variable {
            SweepVariable::TotalPower => config.total_power = value,
            SweepVariable::InterferenceThreshold => config.interference_threshold = value,
            SweepVariable::Dims => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(SimError::config(format!(
                        "dims sweep values must be positive integers, got {value}"
                    )));
                }
                let n = value as usize;
                config.num_beams = n;
                config.num_subcarriers = n;
                config.num_users = 2 * n;
            }
        }
        config.validate().map_err(|e| SimError::config(e.to_string()))?;
        Ok(config)
    }
}

/// One (scheme, sweep value, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub sum_rate_mbps: f64,
    pub feasible: bool,
    pub iterations: usize,
}

/// Aggregate of one (scheme, sweep value) cell; means and errors are over
/// the feasible-flagged trials only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub mean_sum_rate_mbps: f64,
    pub std_error_mbps: f64,
    pub trials: usize,
    pub feasible_trials: usize,
    pub feasibility_rate: f64,
}

/// Full sweep output: the spec echo, every trial record, and the aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Pairwise summation; associatively regrouped so the result does not depend
/// on traversal chunking.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Runs the sweep. Trials execute in parallel on the ambient rayon pool;
/// records land in a fixed (scheme, value, trial) order so the output bytes
/// do not depend on the level of parallelism.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SimError> {
    spec.validate()?;

    // Job grid in deterministic order.
    struct Job {
        scheme: Scheme,
        value_idx: usize,
        trial: usize,
    }
    let mut jobs = Vec::new();
    for scheme in &spec.schemes {
        for (value_idx, _) in spec.values.iter().enumerate() {
            for trial in 0..spec.trials {
                jobs.push(Job { scheme: *scheme, value_idx, trial });
            }
        }
    }

    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|job| -> TrialRecord {
            let value = spec.values[job.value_idx];
            let seed = spec.seed_base.wrapping_add(job.trial as u64);
            let run = spec.config_at(value).and_then(|config| {
                let channels = generate_scenario(&config, &spec.generation, seed)?;
                solve_scheme(job.scheme, &config, &channels, &spec.options, seed)
                    .map_err(SimError::Solver)
            });
            match run {
                Ok(report) => TrialRecord {
                    scheme: job.scheme,
                    sweep_var: spec.variable.label().to_string(),
                    sweep_value: value,
                    trial: job.trial,
                    seed,
                    sum_rate_mbps: report.rates.sum_rate * 1e-6,
                    feasible: report.feasible,
                    iterations: report.iterations,
                },
                // A structural failure aborts the trial but not the sweep.
                Err(_) => TrialRecord {
                    scheme: job.scheme,
                    sweep_var: spec.variable.label().to_string(),
                    sweep_value: value,
                    trial: job.trial,
                    seed,
                    sum_rate_mbps: 0.0,
                    feasible: false,
                    iterations: 0,
                },
            }
        })
        .collect();

    let mut aggregates = Vec::new();
    for scheme in &spec.schemes {
        for &value in &spec.values {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.scheme == *scheme && r.sweep_value == value)
                .collect();
            let feasible: Vec<f64> =
                cell.iter().filter(|r| r.feasible).map(|r| r.sum_rate_mbps).collect();
            let n = feasible.len();
            let mean = if n > 0 { pairwise_sum(&feasible) / n as f64 } else { 0.0 };
            let std_error = if n > 1 {
                let sq: Vec<f64> = feasible.iter().map(|v| (v - mean) * (v - mean)).collect();
                (pairwise_sum(&sq) / ((n - 1) as f64 * n as f64)).sqrt()
            } else {
                0.0
            };
            aggregates.push(Aggregate {
                scheme: *scheme,
                sweep_value: value,
                mean_sum_rate_mbps: mean,
                std_error_mbps: std_error,
                trials: cell.len(),
                feasible_trials: n,
                feasibility_rate: if cell.is_empty() { 0.0 } else { n as f64 / cell.len() as f64 },
            });
        }
    }

    Ok(SweepResult { spec: spec.clone(), records, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            variable: SweepVariable::TotalPower,
            values: vec![10.0, 50.0],
            trials: 2,
            schemes: vec![Scheme::Opt, Scheme::FixP],
            seed_base: 7,
            base: SystemConfig { num_beams: 2, num_subcarriers: 2, num_users: 4, ..SystemConfig::default() },
            generation: GenParams::default(),
            options: SolveOptions { inner_max: 60, outer_max: 4, ..SolveOptions::default() },
        }
    }

    #[test]
    fn record_grid_is_complete() {
        let result = run_sweep(&small_spec()).unwrap();
        assert_eq!(result.records.len(), 2 * 2 * 2);
        assert_eq!(result.aggregates.len(), 2 * 2);
        for agg in &result.aggregates {
            assert_eq!(agg.trials, 2);
        }
    }

    #[test]
    fn sweeps_are_reproducible() {
        let a = run_sweep(&small_spec()).unwrap();
        let b = run_sweep(&small_spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut spec = small_spec();
        spec.values = vec![50.0, 10.0];
        assert!(matches!(run_sweep(&spec), Err(SimError::Config(_))));
        let mut spec = small_spec();
        spec.trials = 0;
        assert!(matches!(run_sweep(&spec), Err(SimError::Config(_))));
        let mut spec = small_spec();
        spec.values = vec![];
        assert!(matches!(run_sweep(&spec), Err(SimError::Config(_))));
    }

    #[test]
    fn dims_values_must_be_integral() {
        let mut spec = small_spec();
        spec.variable = SweepVariable::Dims;
        spec.values = vec![2.5, 3.0];
        assert!(matches!(run_sweep(&spec), Err(SimError::Config(_))));
    }
}
