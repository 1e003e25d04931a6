//! Domain types, the free-space channel model and the exact rate expressions.
//!
//! Rates are carried in bits/s throughout this module. A beam/subcarrier pair
//! `(m, k)` is called a *slot*; one RSMA group (a common stream plus one
//! private stream per assigned user) is transmitted per active slot.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain, structure, Error};
use crate::math;

/// Speed of light in m/s as used by the link-budget formulas.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Static system description: dimensions, budgets and link constants.
///
/// `tx_antenna_gain`/`rx_antenna_gain` are linear (not dB) and are deliberately
/// large: together with the free-space loss at `distance` they normalize the
/// channel gains so that SINRs at the default powers are O(1) against the
/// GEO interference floor, which is specified in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Number of LEO beams (M).
    pub num_beams: usize,
    /// Number of shared subcarriers (K).
    pub num_subcarriers: usize,
    /// Number of LEO users (U).
    pub num_users: usize,
    /// Total LEO transmit power budget in watts (C5).
    pub total_power: f64,
    /// Interference-temperature cap per beam/subcarrier in watts (C3).
    pub interference_threshold: f64,
    /// Minimum per-user rate in bits/s (C1).
    pub min_rate: f64,
    /// Bandwidth per beam in Hz.
    pub bandwidth: f64,
    /// Receiver noise variance in watts.
    pub noise_variance: f64,
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// Transmit antenna gain, linear.
    pub tx_antenna_gain: f64,
    /// Receive antenna gain, linear.
    pub rx_antenna_gain: f64,
    /// Nominal slant range in meters; only enters through the free-space loss.
    pub distance: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_beams: 5,
            num_subcarriers: 5,
            num_users: 10,
            total_power: 50.0,
            interference_threshold: 2.0,
            min_rate: 1.0e6,
            bandwidth: 1.0e7,
            noise_variance: 0.1,
            carrier_frequency: 1.9e10,
            tx_antenna_gain: 4.274e9,
            rx_antenna_gain: 4.274e9,
            distance: 6.0e5,
        }
    }
}

impl SystemConfig {
    /// Checks the type invariants (positive dimensions and quantities).
    pub fn validate(&self) -> Result<(), Error> {
        if self.num_beams == 0 || self.num_subcarriers == 0 || self.num_users == 0 {
            return Err(structure("dimensions M, K, U must all be at least 1"));
        }
        let positives = [
            ("total_power", self.total_power),
            ("interference_threshold", self.interference_threshold),
            ("min_rate", self.min_rate),
            ("bandwidth", self.bandwidth),
            ("noise_variance", self.noise_variance),
            ("carrier_frequency", self.carrier_frequency),
            ("tx_antenna_gain", self.tx_antenna_gain),
            ("rx_antenna_gain", self.rx_antenna_gain),
            ("distance", self.distance),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Users served per beam by the assignment schemes: RoundUp(U / M).
    pub fn users_per_beam(&self) -> usize {
        self.num_users.div_ceil(self.num_beams)
    }
}

/// Free-space propagation loss `(4 pi D / (c/f))^2`, linear.
pub fn free_space_loss(distance: f64, frequency: f64) -> Result<f64, Error> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(domain(format!("distance must be positive, got {distance}")));
    }
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(domain(format!("frequency must be positive, got {frequency}")));
    }
    let wavelength = SPEED_OF_LIGHT / frequency;
    let ratio = 4.0 * core::f64::consts::PI * distance / wavelength;
    Ok(ratio * ratio)
}

/// Channel gain `G_T * G_R / loss`, linear.
pub fn channel_gain(link_budget: (f64, f64), loss: f64) -> Result<f64, Error> {
    if !(loss > 0.0) || !loss.is_finite() {
        return Err(domain(format!("loss must be strictly positive, got {loss}")));
    }
    Ok(link_budget.0 * link_budget.1 / loss)
}

/// All channel gains of one scenario, linear units.
///
/// `h[m][u][k]` is the LEO beam `m` → LEO user `u` gain on subcarrier `k`;
/// `g[m][u][k]` the GEO → LEO user gain; `f[m][k]` the LEO beam → GEO user
/// gain; `q[k]` the GEO transmit power; `i_p[u][k]` the received GEO
/// interference power `g * q` in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub h: Vec<Vec<Vec<f64>>>,
    pub g: Vec<Vec<Vec<f64>>>,
    pub f: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(rename = "I_p")]
    pub i_p: Vec<Vec<f64>>,
}

impl ChannelSet {
    /// Builds a channel set with the GEO interference given directly per
    /// user/subcarrier; `g` is set so that `g * q` reproduces `i_p`.
    pub fn from_direct(
        h: Vec<Vec<Vec<f64>>>,
        f: Vec<Vec<f64>>,
        geo_power: f64,
        i_p: Vec<Vec<f64>>,
    ) -> Result<ChannelSet, Error> {
        let (m, u, k) = shape3(&h)?;
        if i_p.len() != u || i_p.iter().any(|row| row.len() != k) {
            return Err(structure("i_p must have shape [U][K]"));
        }
        if !(geo_power > 0.0) {
            return Err(domain("geo_power must be strictly positive"));
        }
        let g = (0..m)
            .map(|_| i_p.iter().map(|row| row.iter().map(|&v| v / geo_power).collect()).collect())
            .collect();
        let set = ChannelSet { h, g, f, q: vec![geo_power; k], i_p };
        set.validate(m, u, k)?;
        Ok(set)
    }

    /// Builds a channel set from the GEO-side decomposition, deriving
    /// `i_p[u][k] = g[m'][u][k] * q[k]` for the serving GEO configuration
    /// (one effective GEO interferer per subcarrier; `g` is taken from the
    /// first beam index, which the model treats as the GEO serving path).
    pub fn from_geo_products(
        h: Vec<Vec<Vec<f64>>>,
        g: Vec<Vec<Vec<f64>>>,
        f: Vec<Vec<f64>>,
        q: Vec<f64>,
    ) -> Result<ChannelSet, Error> {
        let (m, u, k) = shape3(&h)?;
        let (gm, gu, gk) = shape3(&g)?;
        if (gm, gu, gk) != (m, u, k) {
            return Err(structure("g must have the same shape as h"));
        }
        if q.len() != k {
            return Err(structure("q must have length K"));
        }
        let i_p: Vec<Vec<f64>> = (0..u)
            .map(|uu| (0..k).map(|kk| g[0][uu][kk] * q[kk]).collect())
            .collect();
        let set = ChannelSet { h, g, f, q, i_p };
        set.validate(m, u, k)?;
        Ok(set)
    }

    /// Dimensions (M, U, K) of the gain tensors.
    pub fn dims(&self) -> (usize, usize, usize) {
        let m = self.h.len();
        let u = if m > 0 { self.h[0].len() } else { 0 };
        let k = if u > 0 { self.h[0][0].len() } else { 0 };
        (m, u, k)
    }

    fn validate(&self, m: usize, u: usize, k: usize) -> Result<(), Error> {
        if self.f.len() != m || self.f.iter().any(|row| row.len() != k) {
            return Err(structure("f must have shape [M][K]"));
        }
        let all_h = self.h.iter().flatten().flatten();
        let all_g = self.g.iter().flatten().flatten();
        let all_f = self.f.iter().flatten();
        let all_ip = self.i_p.iter().flatten();
        for &v in all_h.chain(all_g).chain(all_f).chain(all_ip) {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(domain(format!("gains must be nonnegative and finite, got {v}")));
            }
        }
        let _ = (u, k);
        Ok(())
    }

    /// Consistency check of the invariant `i_p = g * q` (first-beam serving
    /// path), within `tol` relative.
    pub fn geo_product_consistent(&self, tol: f64) -> bool {
        let (_, u, k) = self.dims();
        for uu in 0..u {
            for kk in 0..k {
                let prod = self.g[0][uu][kk] * self.q[kk];
                let ip = self.i_p[uu][kk];
                if (prod - ip).abs() > tol * ip.abs().max(1.0) {
                    return false;
                }
            }
        }
        true
    }
}

fn shape3(t: &[Vec<Vec<f64>>]) -> Result<(usize, usize, usize), Error> {
    let m = t.len();
    if m == 0 {
        return Err(structure("tensor has zero beams"));
    }
    let u = t[0].len();
    if u == 0 || t.iter().any(|b| b.len() != u) {
        return Err(structure("tensor has ragged or zero user dimension"));
    }
    let k = t[0][0].len();
    if k == 0 || t.iter().flatten().any(|r| r.len() != k) {
        return Err(structure("tensor has ragged or zero subcarrier dimension"));
    }
    Ok((m, u, k))
}

/// Binary user → (beam, subcarrier) assignment satisfying the
/// one-slot-per-user rule (C6).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    num_beams: usize,
    num_users: usize,
    num_subcarriers: usize,
    /// Slot of every user; `slot_of[u] = (m, k)`.
    slot_of: Vec<(usize, usize)>,
}

impl Assignment {
    /// Builds an assignment from per-user slots, validating C6 bounds.
    pub fn from_slots(
        num_beams: usize,
        num_subcarriers: usize,
        slot_of: Vec<(usize, usize)>,
    ) -> Result<Assignment, Error> {
        for (u, &(m, k)) in slot_of.iter().enumerate() {
            if m >= num_beams || k >= num_subcarriers {
                return Err(structure(format!(
                    "user {u} assigned to slot ({m},{k}) outside {num_beams}x{num_subcarriers}"
                )));
            }
        }
        Ok(Assignment { num_beams, num_users: slot_of.len(), num_subcarriers, slot_of })
    }

    /// The binary tensor entry `x[m][u][k]`.
    pub fn x(&self, m: usize, u: usize, k: usize) -> f64 {
        if self.slot_of[u] == (m, k) {
            1.0
        } else {
            0.0
        }
    }

    /// The slot serving user `u`.
    pub fn slot_of(&self, u: usize) -> (usize, usize) {
        self.slot_of[u]
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_beams(&self) -> usize {
        self.num_beams
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Users assigned to slot `(m, k)`, in increasing user order.
    pub fn users_in(&self, m: usize, k: usize) -> Vec<usize> {
        (0..self.num_users).filter(|&u| self.slot_of[u] == (m, k)).collect()
    }

    /// All active slots with their users, in row-major (m, k) order.
    pub fn active_slots(&self) -> Vec<(usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for m in 0..self.num_beams {
            for k in 0..self.num_subcarriers {
                let users = self.users_in(m, k);
                if !users.is_empty() {
                    out.push((m, k, users));
                }
            }
        }
        out
    }

    /// Verifies C6 against expected dimensions.
    pub fn check_c6(&self, num_users: usize) -> Result<(), Error> {
        if self.num_users != num_users {
            return Err(structure(format!(
                "assignment covers {} users, expected {num_users}",
                self.num_users
            )));
        }
        Ok(())
    }
}

/// Primal decision variables: beam powers, RSMA power splits and common-rate
/// shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    /// Transmit power per slot in watts, `p[m][k]`.
    pub p: Vec<Vec<f64>>,
    /// Common-stream power split per slot, `eta0[m][k]` in [0, 1].
    pub eta0: Vec<Vec<f64>>,
    /// Private power split per user and slot, `eta[m][u][k]` in [0, 1].
    pub eta: Vec<Vec<Vec<f64>>>,
    /// Common-rate share per user and slot in bits/s, `c[m][u][k]`.
    pub c: Vec<Vec<Vec<f64>>>,
}

impl AllocationState {
    /// All-zero state with the given dimensions.
    pub fn zeros(m: usize, u: usize, k: usize) -> AllocationState {
        AllocationState {
            p: vec![vec![0.0; k]; m],
            eta0: vec![vec![0.0; k]; m],
            eta: vec![vec![vec![0.0; k]; u]; m],
            c: vec![vec![vec![0.0; k]; u]; m],
        }
    }
}

/// Signed slack of every constraint family (positive means satisfied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSlacks {
    /// C1 per user: `total_rate - R_min`.
    pub qos: Vec<f64>,
    /// C2 per slot: `R_c - sum_u x*c`.
    pub common_cap: Vec<Vec<f64>>,
    /// C3 per slot: `I_th - f*p`.
    pub interference: Vec<Vec<f64>>,
    /// C4 per slot: `1 - (eta0 + sum_u x*eta)`.
    pub split_budget: Vec<Vec<f64>>,
    /// C5: `P_tot - sum p`.
    pub power_budget: f64,
}

impl ConstraintSlacks {
    /// Worst (most negative) slack across C2..C5, for feasibility checks.
    pub fn worst_c2_to_c5(&self) -> f64 {
        let mut worst = self.power_budget;
        for row in self.common_cap.iter().chain(self.interference.iter()).chain(self.split_budget.iter()) {
            for &v in row {
                worst = worst.min(v);
            }
        }
        worst
    }

    /// Worst C1 slack over users.
    pub fn worst_qos(&self) -> f64 {
        self.qos.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Rates of one allocation, plus the constraint slack vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Common-stream rate per slot in bits/s (0 on inactive slots).
    pub common_rate: Vec<Vec<f64>>,
    /// Private rate per user and slot in bits/s.
    pub private_rate: Vec<Vec<Vec<f64>>>,
    /// `c + R_priv` at each user's assigned slot, bits/s.
    pub per_user_total: Vec<f64>,
    /// Sum over assigned slots of `c + R_priv`, bits/s.
    pub sum_rate: f64,
    /// Signed constraint slacks for C1..C5.
    pub slacks: ConstraintSlacks,
}

/// Exact rate expressions bound to one configuration.
///
/// All functions are pure; the context only carries the bandwidth and noise
/// variance so that the per-call signatures stay close to the math.
#[derive(Debug, Clone, Copy)]
pub struct RateContext {
    pub bandwidth: f64,
    pub noise_variance: f64,
}

impl RateContext {
    pub fn new(config: &SystemConfig) -> RateContext {
        RateContext { bandwidth: config.bandwidth, noise_variance: config.noise_variance }
    }

    /// Common-stream SINR of user `u` at slot `(m, k)`.
    pub fn common_sinr(
        &self,
        channels: &ChannelSet,
        alloc: &AllocationState,
        assignment: &Assignment,
        m: usize,
        u: usize,
        k: usize,
    ) -> f64 {
        let h = channels.h[m][u][k];
        let p = alloc.p[m][k];
        if p <= 0.0 || h * alloc.eta0[m][k] <= 0.0 {
            return 0.0;
        }
        let private_total: f64 = assignment.users_in(m, k).iter().map(|&j| alloc.eta[m][j][k]).sum();
        let denom = channels.i_p[u][k] + h * private_total * p + self.noise_variance;
        h * alloc.eta0[m][k] * p / denom
    }

    /// Private-stream SINR of user `u` at slot `(m, k)`; the common stream has
    /// been removed by SIC, co-slot private streams have not.
    pub fn private_sinr(
        &self,
        channels: &ChannelSet,
        alloc: &AllocationState,
        assignment: &Assignment,
        m: usize,
        u: usize,
        k: usize,
    ) -> f64 {
        let h = channels.h[m][u][k];
        let p = alloc.p[m][k];
        if p <= 0.0 || h * alloc.eta[m][u][k] <= 0.0 {
            return 0.0;
        }
        let other: f64 = assignment
            .users_in(m, k)
            .iter()
            .filter(|&&j| j != u)
            .map(|&j| alloc.eta[m][j][k])
            .sum();
        let denom = channels.i_p[u][k] + h * other * p + self.noise_variance;
        h * alloc.eta[m][u][k] * p / denom
    }

    /// Rate of the common stream on slot `(m, k)`: the slot bandwidth times
    /// `log2(1 + min-SINR)` over the assigned users. Inactive slots yield
    /// `None`.
    pub fn common_rate(
        &self,
        channels: &ChannelSet,
        alloc: &AllocationState,
        assignment: &Assignment,
        m: usize,
        k: usize,
    ) -> Option<f64> {
        let users = assignment.users_in(m, k);
        if users.is_empty() {
            return None;
        }
        let min_sinr = users
            .iter()
            .map(|&u| self.common_sinr(channels, alloc, assignment, m, u, k))
            .fold(f64::INFINITY, f64::min);
        Some(self.bandwidth * math::log2(1.0 + min_sinr))
    }

    /// Private rate of user `u` on slot `(m, k)`.
    pub fn private_rate(
        &self,
        channels: &ChannelSet,
        alloc: &AllocationState,
        assignment: &Assignment,
        m: usize,
        u: usize,
        k: usize,
    ) -> f64 {
        let sinr = self.private_sinr(channels, alloc, assignment, m, u, k);
        self.bandwidth * math::log2(1.0 + sinr)
    }
}

/// Computes every rate and the constraint slack vector for a state.
///
/// Fails with a structure error if the assignment does not cover exactly the
/// configured users (C6 is structural, not a slack).
pub fn evaluate(
    config: &SystemConfig,
    channels: &ChannelSet,
    alloc: &AllocationState,
    assignment: &Assignment,
) -> Result<RateReport, Error> {
    assignment.check_c6(config.num_users)?;
    let (m_dim, u_dim, k_dim) = channels.dims();
    if m_dim != config.num_beams || u_dim != config.num_users || k_dim != config.num_subcarriers {
        return Err(structure(format!(
            "channel dims ({m_dim},{u_dim},{k_dim}) do not match config ({},{},{})",
            config.num_beams, config.num_users, config.num_subcarriers
        )));
    }
    let ctx = RateContext::new(config);

    let mut common = vec![vec![0.0; k_dim]; m_dim];
    let mut private = vec![vec![vec![0.0; k_dim]; u_dim]; m_dim];
    let mut per_user = vec![0.0; u_dim];
    let mut sum_rate = 0.0;

    let mut common_cap = vec![vec![0.0; k_dim]; m_dim];
    let mut interference = vec![vec![0.0; k_dim]; m_dim];
    let mut split_budget = vec![vec![0.0; k_dim]; m_dim];
    let mut power_sum = 0.0;

    for m in 0..m_dim {
        for k in 0..k_dim {
            let users = assignment.users_in(m, k);
            let rc = ctx.common_rate(channels, alloc, assignment, m, k).unwrap_or(0.0);
            common[m][k] = rc;

            let mut c_sum = 0.0;
            let mut eta_sum = 0.0;
            for &u in &users {
                let rp = ctx.private_rate(channels, alloc, assignment, m, u, k);
                private[m][u][k] = rp;
                let total = alloc.c[m][u][k] + rp;
                per_user[u] = total;
                sum_rate += total;
                c_sum += alloc.c[m][u][k];
                eta_sum += alloc.eta[m][u][k];
            }
            common_cap[m][k] = rc - c_sum;
            interference[m][k] = config.interference_threshold - channels.f[m][k] * alloc.p[m][k];
            split_budget[m][k] = 1.0 - (alloc.eta0[m][k] + eta_sum);
            power_sum += alloc.p[m][k];
        }
    }

    let slacks = ConstraintSlacks {
        qos: per_user.iter().map(|&r| r - config.min_rate).collect(),
        common_cap,
        interference,
        split_budget,
        power_budget: config.total_power - power_sum,
    };

    Ok(RateReport { common_rate: common, private_rate: private, per_user_total: per_user, sum_rate, slacks })
}
