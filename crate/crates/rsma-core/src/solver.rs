//! The full optimization: an SCA outer loop that re-expands the rate
//! surrogates, and an inner primal-dual sweep that applies the per-slot
//! closed forms and the five dual subgradient updates.
//!
//! Internally rates are handled in Mbit/s and powers in watts, which keeps
//! every multiplier family at O(1)..O(10) magnitudes and lets one diminishing
//! step rule `delta_t = delta0 / sqrt(t)` serve all of them. Inputs and
//! outputs stay in bits/s.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assign::{greedy_assign, random_assign};
use crate::error::Error;
use crate::kkt::{self, RateWeighting, SlotInputs, LAMBDA4_FLOOR};
use crate::math;
use crate::model::{
    evaluate, AllocationState, Assignment, ChannelSet, RateContext, RateReport, SystemConfig,
};
use crate::surrogate::SurrogateSet;

/// Internal rate unit: bits/s are scaled by this factor (to Mbit/s) inside
/// the solver.
const RATE_SCALE: f64 = 1e-6;

/// The five multiplier families plus the shared diminishing step scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    /// Per-user QoS multipliers (C1).
    pub lambda1: Vec<f64>,
    /// Per-slot common-rate multipliers (C2).
    pub lambda2: Vec<Vec<f64>>,
    /// Per-slot interference multipliers (C3).
    pub lambda3: Vec<Vec<f64>>,
    /// Per-slot split-budget multipliers (C4).
    pub lambda4: Vec<Vec<f64>>,
    /// Total-power multiplier (C5).
    pub lambda5: f64,
    /// Step scale of the most recent update (`1/sqrt(t)`).
    pub delta: f64,
}

impl DualState {
    /// All families initialized to `value`.
    pub fn init(num_users: usize, num_beams: usize, num_subcarriers: usize, value: f64) -> Self {
        DualState {
            lambda1: vec![value; num_users],
            lambda2: vec![vec![value; num_subcarriers]; num_beams],
            lambda3: vec![vec![value; num_subcarriers]; num_beams],
            lambda4: vec![vec![value; num_subcarriers]; num_beams],
            lambda5: value,
            delta: 1.0,
        }
    }

    /// L2 norm of each family, in the order lambda1..lambda5.
    pub fn norms(&self) -> [f64; 5] {
        let sq = |it: &mut dyn Iterator<Item = f64>| math::sqrt(it.map(|v| v * v).sum::<f64>());
        [
            sq(&mut self.lambda1.iter().copied()),
            sq(&mut self.lambda2.iter().flatten().copied()),
            sq(&mut self.lambda3.iter().flatten().copied()),
            sq(&mut self.lambda4.iter().flatten().copied()),
            self.lambda5.abs(),
        ]
    }
}

/// Initial step size per multiplier family (and for the common-share
/// subgradient ascent), in the solver's internal units: rates in Mbit/s,
/// powers in watts, splits dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepSizes {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub lambda5: f64,
    /// Step for the per-user common-rate shares, Mbit/s.
    pub common_share: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes {
            lambda1: 0.2,
            lambda2: 0.01,
            lambda3: 0.5,
            lambda4: 4.0,
            lambda5: 0.05,
            common_share: 0.6,
        }
    }
}

/// Solver options. Everything is serializable so experiment specs can pin
/// the full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative sum-rate change below which the outer loop stops.
    pub tol_outer: f64,
    /// Relative feasibility tolerance for the C2..C5 check of the output.
    pub tol_feas: f64,
    /// Inner (subgradient) iterations per outer pass.
    pub inner_max: usize,
    /// Outer (SCA) iteration cap.
    pub outer_max: usize,
    /// Initial per-family step sizes.
    pub steps: StepSizes,
    /// Initial value of every multiplier except the common-rate family.
    pub init_dual: f64,
    /// Initial common-rate multiplier. Started at its known equilibrium
    /// (one plus the QoS multiplier) so the share/multiplier pair does not
    /// have to travel; see the solver notes.
    pub init_lambda2: f64,
    /// Inner early stop: all dual families' change norms below this.
    pub dual_tol: f64,
    /// Never early-stop the inner loop before this iteration.
    pub inner_min: usize,
    /// Enable the inner early stop.
    pub early_stop: bool,
    /// Record the per-iteration inner trace in the report.
    pub record_trace: bool,
    /// QoS multiplier cap; growth past it flags the run infeasible.
    pub lambda1_cap: f64,
    /// Consecutive non-improving outer passes tolerated before stopping.
    pub outer_patience: usize,
    /// Relaxation factor for the per-slot power step in (0, 1]: the power
    /// moves this fraction of the way toward the closed-form target each
    /// inner iteration. Damps the large-box overshoot before the power
    /// multiplier has equilibrated.
    pub power_relaxation: f64,
    /// Print per-iteration power/split diagnostics (std builds only).
    #[serde(skip)]
    pub debug_power: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_outer: 1e-4,
            tol_feas: 1e-6,
            inner_max: 500,
            outer_max: 50,
            steps: StepSizes::default(),
            init_dual: 0.1,
            init_lambda2: 1.1,
            dual_tol: 1e-5,
            inner_min: 60,
            early_stop: true,
            record_trace: false,
            lambda1_cap: 1e6,
            outer_patience: 3,
            power_relaxation: 0.5,
            debug_power: false,
        }
    }
}

/// One inner iteration of the trace: exact sum rate, worst relative
/// constraint violation, and the change norm and norm of every dual family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerRecord {
    pub sum_rate: f64,
    pub max_violation: f64,
    pub dual_delta: [f64; 5],
    pub dual_norm: [f64; 5],
}

/// Outcome of a solve: final state, rates, traces and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub assignment: Assignment,
    pub state: AllocationState,
    /// Rates in bits/s, evaluated at `state`.
    pub rates: RateReport,
    /// Exact sum rate (bits/s) of each accepted outer iterate.
    pub outer_trace: Vec<f64>,
    /// Per-inner-iteration records; populated when `record_trace` is set.
    pub inner_trace: Vec<InnerRecord>,
    pub converged: bool,
    pub feasible: bool,
    /// Total inner iterations across all outer passes.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Wall-clock seconds (0 when built without `std`).
    pub wall_time_s: f64,
}

/// Scheme selector for the three frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Greedy assignment, every variable optimized.
    Opt,
    /// Greedy assignment, powers frozen at `min(I_th/f, P_tot/(M*K))`.
    FixP,
    /// Random assignment, every variable optimized.
    RandX,
}

/// Eq.-style common-share ascent: `c <- max(0, c + delta*(1 + lambda1_u -
/// lambda2_mk))` at every assigned slot. `delta` is in the same rate unit as
/// `state.c` (bits/s at the public surface).
pub fn update_common_splits(
    state: &mut AllocationState,
    duals: &DualState,
    assignment: &Assignment,
    delta: f64,
) {
    for u in 0..assignment.num_users() {
        let (m, k) = assignment.slot_of(u);
        let grad = 1.0 + duals.lambda1[u] - duals.lambda2[m][k];
        state.c[m][u][k] = (state.c[m][u][k] + delta * grad).max(0.0);
    }
}

/// Applies the five dual update rules with per-family steps scaled by
/// `step_scale`, projecting onto the nonnegative orthant. Rate-type
/// subgradients (C1, C2) are taken in Mbit/s. Returns the per-family L2
/// change norms.
///
/// The split-budget subgradient is read from `state`'s splits, so callers
/// control whether it sees raw or projected values; the solver feeds the raw
/// closed-form outputs so the multiplier can settle at the point where the
/// unprojected split sum meets the budget.
#[allow(clippy::too_many_arguments)]
pub fn update_duals(
    config: &SystemConfig,
    channels: &ChannelSet,
    state: &AllocationState,
    assignment: &Assignment,
    common_rate: &[Vec<f64>],
    per_user_total: &[f64],
    duals: &mut DualState,
    steps: &StepSizes,
    step_scale: f64,
) -> [f64; 5] {
    duals.delta = step_scale;
    let mut deltas = [0.0f64; 5];

    for u in 0..assignment.num_users() {
        let g = (config.min_rate - per_user_total[u]) * RATE_SCALE;
        let new = (duals.lambda1[u] + steps.lambda1 * step_scale * g).max(0.0);
        deltas[0] += (new - duals.lambda1[u]) * (new - duals.lambda1[u]);
        duals.lambda1[u] = new;
    }
    for m in 0..config.num_beams {
        for k in 0..config.num_subcarriers {
            let users = assignment.users_in(m, k);
            if !users.is_empty() {
                let c_sum: f64 = users.iter().map(|&u| state.c[m][u][k]).sum();
                let g2 = (c_sum - common_rate[m][k]) * RATE_SCALE;
                let new = (duals.lambda2[m][k] + steps.lambda2 * step_scale * g2).max(0.0);
                deltas[1] += (new - duals.lambda2[m][k]) * (new - duals.lambda2[m][k]);
                duals.lambda2[m][k] = new;

                let eta_sum: f64 =
                    users.iter().map(|&u| state.eta[m][u][k]).sum::<f64>() + state.eta0[m][k];
                let g4 = eta_sum - 1.0;
                let new = (duals.lambda4[m][k] + steps.lambda4 * step_scale * g4).max(0.0);
                deltas[3] += (new - duals.lambda4[m][k]) * (new - duals.lambda4[m][k]);
                duals.lambda4[m][k] = new;
            }
            let g3 = channels.f[m][k] * state.p[m][k] - config.interference_threshold;
            let new = (duals.lambda3[m][k] + steps.lambda3 * step_scale * g3).max(0.0);
            deltas[2] += (new - duals.lambda3[m][k]) * (new - duals.lambda3[m][k]);
            duals.lambda3[m][k] = new;
        }
    }
    let power_sum: f64 = state.p.iter().flatten().sum();
    let g5 = power_sum - config.total_power;
    let new = (duals.lambda5 + steps.lambda5 * step_scale * g5).max(0.0);
    deltas[4] = (new - duals.lambda5) * (new - duals.lambda5);
    duals.lambda5 = new;

    [
        math::sqrt(deltas[0]),
        math::sqrt(deltas[1]),
        math::sqrt(deltas[2]),
        math::sqrt(deltas[3]),
        math::sqrt(deltas[4]),
    ]
}

struct Slot {
    m: usize,
    k: usize,
    users: Vec<usize>,
}

/// Scratch rate values for the inner loop: common rate per slot (bits/s,
/// zero on inactive slots) and `c + R_priv` per user.
struct LeanRates {
    common: Vec<Vec<f64>>,
    per_user_total: Vec<f64>,
}

fn lean_rates(
    ctx: &RateContext,
    channels: &ChannelSet,
    state: &AllocationState,
    slots: &[Slot],
    out: &mut LeanRates,
) {
    for v in out.per_user_total.iter_mut() {
        *v = 0.0;
    }
    for slot in slots.iter() {
        let (m, k) = (slot.m, slot.k);
        let p = state.p[m][k];
        let total_split: f64 = slot.users.iter().map(|&u| state.eta[m][u][k]).sum();
        let mut min_c = f64::INFINITY;
        for &u in &slot.users {
            let h = channels.h[m][u][k];
            let denom = channels.i_p[u][k] + h * total_split * p + ctx.noise_variance;
            min_c = min_c.min(h * state.eta0[m][k] * p / denom);
        }
        let rc = if p > 0.0 { ctx.bandwidth * math::log2(1.0 + min_c.max(0.0)) } else { 0.0 };
        out.common[m][k] = rc;
        for &u in &slot.users {
            let h = channels.h[m][u][k];
            let other = total_split - state.eta[m][u][k];
            let sinr = if p > 0.0 {
                h * state.eta[m][u][k] * p / (channels.i_p[u][k] + h * other * p + ctx.noise_variance)
            } else {
                0.0
            };
            out.per_user_total[u] = state.c[m][u][k] + ctx.bandwidth * math::log2(1.0 + sinr);
        }
    }
}

fn next_down(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return x;
    }
    f64::from_bits(x.to_bits() - 1)
}

/// Largest power for slot `(m, k)` that keeps the received GEO interference
/// at or below the cap in exact f64 arithmetic.
fn interference_box(config: &SystemConfig, channels: &ChannelSet, m: usize, k: usize) -> f64 {
    let f = channels.f[m][k];
    if f <= 0.0 {
        return config.total_power;
    }
    let mut box_p = config.interference_threshold / f;
    while f * box_p > config.interference_threshold {
        box_p = next_down(box_p);
    }
    box_p.min(config.total_power)
}

/// Smallest common-stream expansion SINR kept in the surrogate set.
///
/// The common weight in the slot closed forms is proportional to the
/// expansion SINR, which itself is proportional to the previous common
/// split: once it reaches exactly zero no multiplier can ever revive the
/// stream. Flooring the expansion point keeps the common-rate multiplier
/// coupled to the split so starved users can be restored through the shares.
const COMMON_GAMMA_FLOOR: f64 = 1e-3;

fn floor_common_expansion(surrogates: &mut SurrogateSet, slots: &[Slot]) {
    for slot in slots {
        let point = &mut surrogates.common[slot.m][slot.k];
        if point.gamma < COMMON_GAMMA_FLOOR {
            // tau/omega follow the floored expansion point.
            *point = crate::surrogate::surrogate_coeffs(COMMON_GAMMA_FLOOR)
                .expect("floor is a valid SINR");
        }
    }
}

fn project_c4(state: &mut AllocationState, slots: &[Slot]) {
    for slot in slots {
        let (m, k) = (slot.m, slot.k);
        let sum: f64 =
            state.eta0[m][k] + slot.users.iter().map(|&u| state.eta[m][u][k]).sum::<f64>();
        if sum > 1.0 {
            state.eta0[m][k] /= sum;
            for &u in &slot.users {
                state.eta[m][u][k] /= sum;
            }
        }
    }
}

/// Restores output feasibility: scales powers onto the C5 budget, re-caps the
/// split budget, and caps the common shares by each slot's common rate.
fn project_feasible(
    config: &SystemConfig,
    channels: &ChannelSet,
    assignment: &Assignment,
    state: &mut AllocationState,
    slots: &[Slot],
) {
    let power_sum: f64 = state.p.iter().flatten().sum();
    if power_sum > config.total_power {
        let scale = config.total_power / power_sum;
        for row in state.p.iter_mut() {
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
    }
    project_c4(state, slots);
    let ctx = RateContext::new(config);
    for slot in slots {
        let (m, k) = (slot.m, slot.k);
        let rc = ctx.common_rate(channels, state, assignment, m, k).unwrap_or(0.0);
        let c_sum: f64 = slot.users.iter().map(|&u| state.c[m][u][k]).sum();
        if c_sum > rc {
            let scale = if c_sum > 0.0 { rc / c_sum } else { 0.0 };
            for &u in &slot.users {
                state.c[m][u][k] *= scale;
            }
        }
    }
}

fn initial_state(
    config: &SystemConfig,
    channels: &ChannelSet,
    slots: &[Slot],
) -> AllocationState {
    let mut state =
        AllocationState::zeros(config.num_beams, config.num_users, config.num_subcarriers);
    let uniform = config.total_power / (config.num_beams * config.num_subcarriers) as f64;
    for slot in slots {
        let (m, k) = (slot.m, slot.k);
        state.p[m][k] = interference_box(config, channels, m, k).min(uniform);
        state.eta0[m][k] = 0.5;
        let share = 0.5 / slot.users.len() as f64;
        for &u in &slot.users {
            state.eta[m][u][k] = share;
        }
    }
    state
}

fn fix_p_power(config: &SystemConfig, channels: &ChannelSet, m: usize, k: usize) -> f64 {
    let uniform = config.total_power / (config.num_beams * config.num_subcarriers) as f64;
    interference_box(config, channels, m, k).min(uniform)
}

#[cfg(feature = "std")]
fn now() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}
#[cfg(not(feature = "std"))]
fn now() -> Option<()> {
    None
}

/// Runs the primal-dual solve on a given assignment.
///
/// `optimize_power = false` freezes the powers at the fixed-power benchmark
/// allocation and optimizes everything else.
pub fn solve_with_assignment(
    config: &SystemConfig,
    channels: &ChannelSet,
    assignment: Assignment,
    options: &SolveOptions,
    optimize_power: bool,
) -> Result<SolveReport, Error> {
    config.validate()?;
    assignment.check_c6(config.num_users)?;
    let started = now();

    let slots: Vec<Slot> = assignment
        .active_slots()
        .into_iter()
        .map(|(m, k, users)| Slot { m, k, users })
        .collect();
    let ctx = RateContext::new(config);
    let bandwidth_scaled = config.bandwidth * RATE_SCALE;

    let mut state = initial_state(config, channels, &slots);
    if !optimize_power {
        for slot in &slots {
            state.p[slot.m][slot.k] = fix_p_power(config, channels, slot.m, slot.k);
        }
    }
    let mut duals = DualState::init(
        config.num_users,
        config.num_beams,
        config.num_subcarriers,
        options.init_dual,
    );
    for row in duals.lambda2.iter_mut() {
        for v in row.iter_mut() {
            *v = options.init_lambda2;
        }
    }
    // Start the split-budget multipliers at the scale the closed forms
    // imply (the weighted-term sum times the bandwidth), which is where the
    // raw splits sum to about one. Started at a generic small value they
    // spend most of the iteration budget on a slow subgradient march, and
    // every other family chases that drift.
    {
        let mut init_surro = SurrogateSet::at_state(config, channels, &state, &assignment)?;
        floor_common_expansion(&mut init_surro, &slots);
        let weight_sums: Vec<f64> = {
            let inputs = SlotInputs {
                channels,
                surrogates: &init_surro,
                duals: &duals,
                assignment: &assignment,
                alloc: &state,
                bandwidth: bandwidth_scaled,
                noise_variance: config.noise_variance,
            };
            slots
                .iter()
                .map(|slot| {
                    let mut sum = inputs.common_weight(slot.m, slot.k, RateWeighting::Tangent);
                    for &u in &slot.users {
                        sum += inputs.private_weight(slot.m, u, slot.k, RateWeighting::Tangent);
                    }
                    sum
                })
                .collect()
        };
        for (slot, sum) in slots.iter().zip(weight_sums) {
            duals.lambda4[slot.m][slot.k] = (bandwidth_scaled * sum).max(options.init_dual);
        }
    }

    let boxes: Vec<f64> =
        slots.iter().map(|s| interference_box(config, channels, s.m, s.k)).collect();

    let mut lean = LeanRates {
        common: vec![vec![0.0; config.num_subcarriers]; config.num_beams],
        per_user_total: vec![0.0; config.num_users],
    };
    let mut inner_trace = Vec::new();
    let mut outer_trace: Vec<f64> = Vec::new();
    // Best state so far, ranked first by QoS feasibility and then by the
    // exact sum rate: an outer iterate that meets every user's minimum rate
    // always beats a higher-rate iterate that starves someone.
    let mut best: Option<(bool, f64, AllocationState)> = None;
    let mut total_inner = 0usize;
    let mut outer_done = 0usize;
    let mut converged = false;
    let mut qos_diverged = false;
    let mut strikes = 0usize;

    'outer: for _outer in 0..options.outer_max {
        let mut surrogates = SurrogateSet::at_state(config, channels, &state, &assignment)?;
        floor_common_expansion(&mut surrogates, &slots);
        #[cfg(feature = "std")]
        if options.debug_power {
            let gc: Vec<f64> = slots.iter().map(|s| surrogates.common[s.m][s.k].gamma).collect();
            let gp: Vec<Vec<f64>> = slots
                .iter()
                .map(|s| s.users.iter().map(|&u| surrogates.private[s.m][u][s.k].gamma).collect())
                .collect();
            let l2v: Vec<f64> = slots.iter().map(|s| duals.lambda2[s.m][s.k]).collect();
            std::eprintln!(
                "OUTER {_outer}: gamma_c={gc:.3?} gamma_p={gp:.3?} l2={l2v:.3?} l5={:.3}",
                duals.lambda5
            );
        }
        let mut new_p: Vec<f64> = vec![0.0; slots.len()];
        let mut raw_eta: Vec<Vec<f64>> = slots.iter().map(|s| vec![0.0; s.users.len()]).collect();

        for t in 1..=options.inner_max {
            let step = 1.0 / math::sqrt(t as f64);

            // Per-slot power step given the current multipliers.
            if optimize_power {
                {
                    let inputs = SlotInputs {
                        channels,
                        surrogates: &surrogates,
                        duals: &duals,
                        assignment: &assignment,
                        alloc: &state,
                        bandwidth: bandwidth_scaled,
                        noise_variance: config.noise_variance,
                    };
                    for (idx, slot) in slots.iter().enumerate() {
                        new_p[idx] = kkt::solve_power(
                            &inputs,
                            slot.m,
                            slot.k,
                            boxes[idx],
                            RateWeighting::Tangent,
                        )?;
                    }
                }
                let beta = options.power_relaxation.clamp(0.0, 1.0);
                for (idx, slot) in slots.iter().enumerate() {
                    let old = state.p[slot.m][slot.k];
                    state.p[slot.m][slot.k] = old + beta * (new_p[idx] - old);
                }
            }

            // Split closed forms; raw values drive the split-budget
            // subgradient, the projected copies are carried as the state.
            {
                let inputs = SlotInputs {
                    channels,
                    surrogates: &surrogates,
                    duals: &duals,
                    assignment: &assignment,
                    alloc: &state,
                    bandwidth: bandwidth_scaled,
                    noise_variance: config.noise_variance,
                };
                for (idx, slot) in slots.iter().enumerate() {
                    let (m, k) = (slot.m, slot.k);
                    let l4 = duals.lambda4[m][k];
                    if l4 < LAMBDA4_FLOOR || state.p[m][k] <= 0.0 {
                        // Closed forms undefined: keep the previous splits.
                        for (j, &u) in slot.users.iter().enumerate() {
                            raw_eta[idx][j] = state.eta[m][u][k];
                        }
                        continue;
                    }
                    if slot.users.len() == 1 {
                        let u = slot.users[0];
                        let weight = inputs.private_weight(m, u, k, RateWeighting::Tangent);
                        raw_eta[idx][0] = kkt::solve_eta_lone(weight, l4, bandwidth_scaled)
                            .unwrap_or(state.eta[m][u][k]);
                    } else {
                        for (j, &u) in slot.users.iter().enumerate() {
                            raw_eta[idx][j] = match kkt::split_quad_coeffs(
                                &inputs,
                                m,
                                u,
                                k,
                                RateWeighting::Tangent,
                            ) {
                                Ok(q) => match kkt::solve_eta(&q) {
                                    Ok(root) => root.value,
                                    Err(_) => state.eta[m][u][k],
                                },
                                Err(_) => state.eta[m][u][k],
                            };
                        }
                    }
                }
            }
            for (idx, slot) in slots.iter().enumerate() {
                let (m, k) = (slot.m, slot.k);
                for (j, &u) in slot.users.iter().enumerate() {
                    state.eta[m][u][k] = raw_eta[idx][j];
                }
                let common_weight = {
                    let inputs = SlotInputs {
                        channels,
                        surrogates: &surrogates,
                        duals: &duals,
                        assignment: &assignment,
                        alloc: &state,
                        bandwidth: bandwidth_scaled,
                        noise_variance: config.noise_variance,
                    };
                    inputs.common_weight(m, k, RateWeighting::Tangent)
                };
                state.eta0[m][k] = match kkt::solve_eta0_weighted(
                    common_weight,
                    duals.lambda4[m][k],
                    bandwidth_scaled,
                ) {
                    Ok(v) => v,
                    Err(_) => state.eta0[m][k],
                };
            }

            // Common-share ascent (rate step converted back to bits/s).
            update_common_splits(
                &mut state,
                &duals,
                &assignment,
                options.steps.common_share * step / RATE_SCALE,
            );

            // Exact rates at the projected (physical) splits.
            let mut projected = state.clone();
            project_c4(&mut projected, &slots);
            lean_rates(&ctx, channels, &projected, &slots, &mut lean);

            // Dual subgradient updates; the split-budget family reads the
            // raw split sums still carried by `state`.
            let deltas = update_duals(
                config,
                channels,
                &state,
                &assignment,
                &lean.common,
                &lean.per_user_total,
                &mut duals,
                &options.steps,
                step,
            );
            // A split-budget multiplier projected to exact zero would freeze
            // the split closed forms (they divide by it) with no way back:
            // the frozen splits sum to at most one, so its subgradient never
            // turns positive again. Keeping it epsilon-positive on active
            // slots leaves the update dynamics intact and the closed forms
            // defined.
            for slot in slots.iter() {
                let l4 = &mut duals.lambda4[slot.m][slot.k];
                if *l4 < LAMBDA4_FLOOR {
                    *l4 = LAMBDA4_FLOOR;
                }
            }

            // Adopt the projected splits as the carried physical state.
            state.eta0 = projected.eta0;
            state.eta = projected.eta;

            #[cfg(feature = "std")]
            if options.debug_power {
                let ps: Vec<f64> = slots.iter().map(|s| state.p[s.m][s.k]).collect();
                let e0: Vec<f64> = slots.iter().map(|s| state.eta0[s.m][s.k]).collect();
                std::eprintln!(
                    "t={t:4} p={ps:.3?} eta0={e0:.3?} l5={:.3} l4={:.2?}",
                    duals.lambda5,
                    slots.iter().map(|s| duals.lambda4[s.m][s.k]).collect::<Vec<f64>>()
                );
            }

            total_inner += 1;
            if options.record_trace {
                let sum_rate: f64 = lean.per_user_total.iter().sum();
                let mut max_violation = 0.0f64;
                let budget: f64 = state.p.iter().flatten().sum();
                if budget > config.total_power {
                    max_violation =
                        max_violation.max((budget - config.total_power) / config.total_power);
                }
                for slot in slots.iter() {
                    let rc = lean.common[slot.m][slot.k];
                    let c_sum: f64 = slot.users.iter().map(|&u| state.c[slot.m][u][slot.k]).sum();
                    if c_sum > rc && rc > 0.0 {
                        max_violation = max_violation.max((c_sum - rc) / rc);
                    }
                }
                inner_trace.push(InnerRecord {
                    sum_rate,
                    max_violation,
                    dual_delta: deltas,
                    dual_norm: duals.norms(),
                });
            }
            if duals.lambda1.iter().any(|&v| v > options.lambda1_cap) {
                qos_diverged = true;
                break 'outer;
            }
            if options.early_stop
                && t >= options.inner_min
                && deltas.iter().all(|&d| d < options.dual_tol)
            {
                break;
            }
        }

        // Outer acceptance on the restored-feasible candidate, ranked by
        // (QoS feasibility, exact sum rate).
        let mut candidate = state.clone();
        project_feasible(config, channels, &assignment, &mut candidate, &slots);
        let report = evaluate(config, channels, &candidate, &assignment)?;
        let sr = report.sum_rate;
        let qos_ok = report.slacks.worst_qos() >= -options.tol_feas * config.min_rate;
        outer_done += 1;

        let improves = match &best {
            None => true,
            Some((best_ok, best_sr, _)) => {
                (qos_ok && !best_ok)
                    || (qos_ok == *best_ok && sr >= *best_sr * (1.0 - options.tol_outer))
            }
        };
        if improves {
            if best
                .as_ref()
                .map(|(bok, bsr, _)| (qos_ok, sr) >= (*bok, *bsr))
                .unwrap_or(true)
            {
                best = Some((qos_ok, sr, candidate.clone()));
            }
            let prev = outer_trace.last().copied();
            outer_trace.push(sr);
            strikes = 0;
            if qos_ok {
                if let Some(p) = prev {
                    if (sr - p).abs() <= options.tol_outer * p.abs().max(1.0) {
                        state = candidate;
                        converged = true;
                        break;
                    }
                }
            }
            state = candidate;
        } else {
            // Keep evolving from the candidate: later expansions often
            // improve again once the multiplier transients settle, and while
            // no QoS-feasible iterate exists the multipliers still need to
            // climb to restore the starved users.
            strikes += 1;
            state = candidate;
            let have_feasible = best.as_ref().map(|(ok, _, _)| *ok).unwrap_or(false);
            if have_feasible && strikes >= options.outer_patience {
                break;
            }
        }
    }

    let (_, _, final_state) = best.unwrap_or((false, 0.0, state));
    let rates = evaluate(config, channels, &final_state, &assignment)?;
    let feasible = !qos_diverged
        && rates.slacks.worst_qos() >= -options.tol_feas * config.min_rate
        && rates.slacks.worst_c2_to_c5() >= -options.tol_feas * config.total_power.max(1.0);

    let wall_time_s = elapsed(started);
    Ok(SolveReport {
        assignment,
        state: final_state,
        rates,
        outer_trace,
        inner_trace,
        converged,
        feasible,
        iterations: total_inner,
        outer_iterations: outer_done,
        wall_time_s,
    })
}

#[cfg(feature = "std")]
fn elapsed(started: Option<std::time::Instant>) -> f64 {
    started.map(|s| s.elapsed().as_secs_f64()).unwrap_or(0.0)
}
#[cfg(not(feature = "std"))]
fn elapsed(_started: Option<()>) -> f64 {
    0.0
}

/// Full optimization: greedy assignment, then powers, splits, shares and
/// multipliers via the SCA/primal-dual loop.
pub fn solve_opt(
    config: &SystemConfig,
    channels: &ChannelSet,
    options: &SolveOptions,
) -> Result<SolveReport, Error> {
    let assignment =
        greedy_assign(channels, config.num_beams, config.num_subcarriers, config.num_users)?;
    solve_with_assignment(config, channels, assignment, options, true)
}

/// Fixed-power benchmark: greedy assignment, powers frozen at
/// `min(I_th/f, P_tot/(M*K))`, everything else optimized.
pub fn solve_fix_p(
    config: &SystemConfig,
    channels: &ChannelSet,
    options: &SolveOptions,
) -> Result<SolveReport, Error> {
    let assignment =
        greedy_assign(channels, config.num_beams, config.num_subcarriers, config.num_users)?;
    solve_with_assignment(config, channels, assignment, options, false)
}

/// Random-assignment benchmark: seeded random assignment, everything else
/// optimized as in [`solve_opt`].
pub fn solve_rand_x(
    config: &SystemConfig,
    channels: &ChannelSet,
    options: &SolveOptions,
    seed: u64,
) -> Result<SolveReport, Error> {
    let assignment =
        random_assign(config.num_beams, config.num_subcarriers, config.num_users, seed)?;
    solve_with_assignment(config, channels, assignment, options, true)
}

/// Runs the selected scheme.
pub fn solve_scheme(
    scheme: Scheme,
    config: &SystemConfig,
    channels: &ChannelSet,
    options: &SolveOptions,
    seed: u64,
) -> Result<SolveReport, Error> {
    match scheme {
        Scheme::Opt => solve_opt(config, channels, options),
        Scheme::FixP => solve_fix_p(config, channels, options),
        Scheme::RandX => solve_rand_x(config, channels, options, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn common_split_update_rules() {
        let assignment = Assignment::from_slots(1, 1, vec![(0, 0)]).unwrap();
        let mut state = AllocationState::zeros(1, 1, 1);
        let mut duals = DualState::init(1, 1, 1, 0.0);

        // lambda1 = 0, lambda2 = 1: zero subgradient, c unchanged.
        duals.lambda2[0][0] = 1.0;
        update_common_splits(&mut state, &duals, &assignment, 1.0);
        assert_eq!(state.c[0][0][0], 0.0);

        // lambda2 = 0: unit step raises c by delta.
        duals.lambda2[0][0] = 0.0;
        update_common_splits(&mut state, &duals, &assignment, 1.0);
        assert_eq!(state.c[0][0][0], 1.0);

        // Projection keeps c nonnegative.
        duals.lambda2[0][0] = 100.0;
        update_common_splits(&mut state, &duals, &assignment, 1.0);
        assert_eq!(state.c[0][0][0], 0.0);
    }

    #[test]
    fn dual_norms_shape() {
        let duals = DualState::init(3, 2, 2, 0.5);
        let norms = duals.norms();
        assert!((norms[0] - (3.0f64 * 0.25).sqrt()).abs() < 1e-12);
        assert!((norms[4] - 0.5).abs() < 1e-12);
    }
}
