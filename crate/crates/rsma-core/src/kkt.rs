//! Per-slot closed forms from the Lagrangian stationarity conditions.
//!
//! Fixing the multipliers and the surrogate expansion, the slot power `p`
//! maximizes a weighted-log objective (see [`power_objective`]) whose
//! stationarity condition clears to a cubic; the private splits solve a
//! quadratic; the common split has a one-line closed form. This module
//! assembles those polynomials, solves them, and picks the admissible root.
//!
//! Two cubic assemblies are provided. [`cubic_coeffs`] keeps the original
//! closed-form algebra of the pairwise sums, which is the reference shape of
//! the coefficients but drifts from the exact stationarity of the slot
//! objective when the QoS or common-rate multipliers are active.
//! [`power_stationarity_coeffs`] clears the derivative of the slot objective
//! exactly; the two agree (up to the pair double-count factor of two) when
//! those multipliers are zero. The solver drives the exact form, which is the
//! one a grid search of the slot objective confirms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain, structure, Error};
use crate::math;
use crate::model::{AllocationState, Assignment, ChannelSet};
use crate::solver::DualState;
use crate::surrogate::SurrogateSet;

/// Multiplier below which the split closed forms (which divide by the
/// split-budget multiplier) are considered undefined.
pub const LAMBDA4_FLOOR: f64 = 1e-9;

/// How rate terms are weighted inside the per-slot Lagrangian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateWeighting {
    /// Tangent slope of the log-rate surrogate: weights `tau/ln2`, the exact
    /// derivative scale of `W*(tau*log2(gamma) + omega)`. Bounded weights
    /// (`tau < 1`) keep the cross-slot marginals honest; this is what the
    /// solver drives.
    Tangent,
    /// Raw expansion SINR `gamma` as the weight, matching the reference
    /// closed-form coefficient algebra of [`cubic_coeffs`] and
    /// [`quad_coeffs`].
    ExpansionSinr,
}

/// Coefficients of `t3*p^3 + t2*p^2 + t1*p + t0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoeffs {
    pub t3: f64,
    pub t2: f64,
    pub t1: f64,
    pub t0: f64,
}

/// Coefficients of the private-split quadratic; the admissible split is
/// `(mu1 + sqrt(mu2)) / mu3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

/// Outcome of the split quadratic: the chosen branch value and whether it had
/// to be clamped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaRoot {
    pub value: f64,
    pub clamped: bool,
}

/// Everything the per-slot closed forms read; bundles the spec-level
/// arguments so the operation signatures stay manageable.
///
/// `bandwidth` and the dual state must share one rate unit (the solver uses
/// Mbit/s internally); `noise_variance` stays in watts.
#[derive(Debug, Clone, Copy)]
pub struct SlotInputs<'a> {
    pub channels: &'a ChannelSet,
    pub surrogates: &'a SurrogateSet,
    pub duals: &'a DualState,
    pub assignment: &'a Assignment,
    pub alloc: &'a AllocationState,
    pub bandwidth: f64,
    pub noise_variance: f64,
}

/// One log-term of the slot power objective: `weight * ln(p) - weight *
/// ln(b + c*p)` (amplitude constants are dropped; they do not move the
/// argmax).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub weight: f64,
    pub b: f64,
    pub c: f64,
}

/// The slot power problem after freezing splits, multipliers and surrogate
/// weights: log terms plus the linear power price `lambda3*f + lambda5`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub terms: Vec<PowerTerm>,
    pub price: f64,
}

impl<'a> SlotInputs<'a> {
    fn users(&self, m: usize, k: usize) -> Result<Vec<usize>, Error> {
        let users = self.assignment.users_in(m, k);
        if users.is_empty() {
            return Err(structure(format!("slot ({m},{k}) has no assigned users")));
        }
        Ok(users)
    }

    fn b_of(&self, u: usize, k: usize) -> f64 {
        self.channels.i_p[u][k] + self.noise_variance
    }

    /// Weight of user `u`'s private term under the chosen weighting.
    pub fn private_weight(&self, m: usize, u: usize, k: usize, weighting: RateWeighting) -> f64 {
        let point = &self.surrogates.private[m][u][k];
        let scale = 1.0 + self.duals.lambda1[u];
        match weighting {
            RateWeighting::Tangent => scale * point.tau / core::f64::consts::LN_2,
            RateWeighting::ExpansionSinr => scale * point.gamma,
        }
    }

    /// Weight of the slot's common term (scaled by the common-rate
    /// multiplier).
    pub fn common_weight(&self, m: usize, k: usize, weighting: RateWeighting) -> f64 {
        let point = &self.surrogates.common[m][k];
        let scale = self.duals.lambda2[m][k];
        match weighting {
            RateWeighting::Tangent => scale * point.tau / core::f64::consts::LN_2,
            RateWeighting::ExpansionSinr => scale * point.gamma,
        }
    }
}

/// Builds the weighted-log power problem for slot `(m, k)`.
///
/// Each assigned user contributes a term weighted by its QoS-scaled
/// expansion weight; the common stream contributes the common-rate
/// multiplier times its weight. On multi-user slots the common weight rides
/// on the minimum-SINR user's denominator (which keeps the stationarity
/// cubic); on single-user slots it keeps its own denominator, which carries
/// the user's private split and makes the stationarity quadratic.
pub fn power_problem(
    inputs: &SlotInputs,
    m: usize,
    k: usize,
    weighting: RateWeighting,
) -> Result<PowerProblem, Error> {
    let users = inputs.users(m, k)?;
    let duals = inputs.duals;
    let price = duals.lambda3[m][k] * inputs.channels.f[m][k] + duals.lambda5;
    let common_weight = inputs.common_weight(m, k, weighting);
    let min_user = inputs.surrogates.common_min_user[m][k];

    let mut terms = Vec::with_capacity(users.len() + 1);
    let split_sum: f64 = users.iter().map(|&j| inputs.alloc.eta[m][j][k]).sum();
    for &u in &users {
        let h = inputs.channels.h[m][u][k];
        let eta_u = inputs.alloc.eta[m][u][k];
        let mut weight = inputs.private_weight(m, u, k, weighting);
        if users.len() > 1 && min_user == Some(u) {
            weight += common_weight;
        }
        // A dead term (zero split or zero expansion weight) is dropped from
        // the objective for this iteration.
        if weight <= 0.0 || h * eta_u <= 0.0 {
            continue;
        }
        terms.push(PowerTerm { weight, b: inputs.b_of(u, k), c: h * (split_sum - eta_u) });
    }
    if users.len() == 1 && common_weight > 0.0 {
        let u = users[0];
        let h = inputs.channels.h[m][u][k];
        if h * inputs.alloc.eta0[m][k] > 0.0 {
            terms.push(PowerTerm {
                weight: common_weight,
                b: inputs.b_of(u, k),
                c: h * inputs.alloc.eta[m][u][k],
            });
        }
    }
    Ok(PowerProblem { terms, price })
}

impl PowerProblem {
    /// The slot's surrogate Lagrangian contribution at power `p`, up to
    /// p-independent constants: `W * sum_i w_i*(ln p - ln(b_i + c_i p)) -
    /// price * p`.
    ///
    /// At `p = 0` the value is 0 when all weights vanish and negative
    /// infinity otherwise.
    pub fn objective(&self, bandwidth: f64, p: f64) -> f64 {
        if p < 0.0 {
            return f64::NEG_INFINITY;
        }
        if p == 0.0 {
            return if self.terms.is_empty() { 0.0 } else { f64::NEG_INFINITY };
        }
        let mut v = -self.price * p;
        for t in &self.terms {
            v += bandwidth * t.weight * (math::ln(p) - math::ln(t.b + t.c * p));
        }
        v
    }

    /// Derivative of [`Self::objective`] with respect to `p`.
    pub fn derivative(&self, bandwidth: f64, p: f64) -> f64 {
        let mut v = -self.price;
        for t in &self.terms {
            v += bandwidth * t.weight * t.b / (p * (t.b + t.c * p));
        }
        v
    }

    /// Clears the derivative of the monotone terms into polynomial
    /// coefficients. Works whenever at most two terms have a
    /// power-dependent denominator (which covers one- and two-user slots);
    /// otherwise returns `None` and the caller falls back to bisection.
    pub fn stationarity_coeffs(&self, bandwidth: f64) -> Option<CubicCoeffs> {
        let pos: Vec<&PowerTerm> = self.terms.iter().filter(|t| t.c > 0.0).collect();
        if pos.len() > 2 {
            return None;
        }
        let w = bandwidth;
        let zero_sum: f64 = self.terms.iter().filter(|t| t.c == 0.0).map(|t| t.weight).sum();
        let l = self.price;
        Some(match pos.len() {
            0 => CubicCoeffs { t3: 0.0, t2: 0.0, t1: l, t0: -w * zero_sum },
            1 => {
                let a = pos[0];
                CubicCoeffs {
                    t3: 0.0,
                    t2: l * a.c,
                    t1: l * a.b - w * zero_sum * a.c,
                    t0: -w * (a.weight + zero_sum) * a.b,
                }
            }
            _ => {
                let (x, y) = (pos[0], pos[1]);
                CubicCoeffs {
                    t3: l * x.c * y.c,
                    t2: l * (x.b * y.c + y.b * x.c) - w * zero_sum * x.c * y.c,
                    t1: l * x.b * y.b
                        - w * (x.weight * x.b * y.c
                            + y.weight * y.b * x.c
                            + zero_sum * (x.b * y.c + y.b * x.c)),
                    t0: -w * (x.weight + y.weight + zero_sum) * x.b * y.b,
                }
            }
        })
    }

    /// Locates the unique stationary point of the (strictly concave)
    /// objective on `(0, hi]` by bisection on the monotone derivative.
    /// Returns `None` when the derivative never changes sign (maximum at a
    /// boundary).
    pub fn stationary_point(&self, bandwidth: f64, hi: f64) -> Option<f64> {
        if self.terms.is_empty() || self.price <= 0.0 || hi <= 0.0 {
            return None;
        }
        if self.derivative(bandwidth, hi) >= 0.0 {
            return None;
        }
        let mut lo = hi * 1e-12;
        while self.derivative(bandwidth, lo) <= 0.0 {
            lo *= 1e-3;
            if lo < f64::MIN_POSITIVE * 1e3 {
                return None;
            }
        }
        let mut hi = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.derivative(bandwidth, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-14 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Exact stationarity polynomial of [`power_objective`] for slot `(m, k)`.
pub fn power_stationarity_coeffs(
    inputs: &SlotInputs,
    m: usize,
    k: usize,
    weighting: RateWeighting,
) -> Result<CubicCoeffs, Error> {
    let problem = power_problem(inputs, m, k, weighting)?;
    problem
        .stationarity_coeffs(inputs.bandwidth)
        .ok_or_else(|| structure("slot has more than two power-coupled terms"))
}

/// The slot's surrogate Lagrangian contribution at power `p` (see
/// [`PowerProblem::objective`]).
pub fn power_objective(
    inputs: &SlotInputs,
    m: usize,
    k: usize,
    p: f64,
    weighting: RateWeighting,
) -> Result<f64, Error> {
    Ok(power_problem(inputs, m, k, weighting)?.objective(inputs.bandwidth, p))
}

/// Reference closed-form assembly of the power cubic: the pairwise sums in
/// their original printed shape, evaluated verbatim over ordered pairs of
/// assigned users.
///
/// Multi-user slots only; single-user slots take the
/// [`power_stationarity_coeffs`] path, where the condition degenerates to a
/// quadratic.
pub fn cubic_coeffs(inputs: &SlotInputs, m: usize, k: usize) -> Result<CubicCoeffs, Error> {
    let users = inputs.users(m, k)?;
    let duals = inputs.duals;
    let w = inputs.bandwidth;
    let f = inputs.channels.f[m][k];
    let l3 = duals.lambda3[m][k];
    let l5 = duals.lambda5;
    let l2 = duals.lambda2[m][k];
    let gamma_c = inputs.surrogates.common[m][k].gamma;

    let mut t3 = 0.0;
    let mut t2 = 0.0;
    let mut t1 = 0.0;
    let mut t0 = 0.0;
    for &u in &users {
        let hu = inputs.channels.h[m][u][k];
        let eu = inputs.alloc.eta[m][u][k];
        let gu = inputs.surrogates.private[m][u][k].gamma;
        let l1u = duals.lambda1[u];
        let ip = inputs.channels.i_p[u][k];
        let b = ip + inputs.noise_variance;
        for &j in &users {
            if j == u {
                continue;
            }
            let hj = inputs.channels.h[m][j][k];
            let ej = inputs.alloc.eta[m][j][k];
            let gj = inputs.surrogates.private[m][j][k].gamma;

            t3 += hj * hu * ej * eu * (l5 + f * l3);
            t2 += hj * eu * b * (l5 + f * l3)
                + hu * ej * (l5 * b + f * l3 * b - hj * eu * (l2 * gamma_c + l1u * gu) * w);
            t1 += b
                * (l5 * inputs.noise_variance
                    + f * l3 * inputs.noise_variance
                    + ip * (l5 + f * l3)
                    + w * (-hj * eu * (l2 * gamma_c + gu + l1u * gu)
                        - hu * ej * (gj + l2 * gamma_c + l1u * gu)));
            t0 += -b * b * w * (gj + (l2 * gamma_c + gu + l1u * gu));
        }
    }
    Ok(CubicCoeffs { t3, t2, t1, t0 })
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, math::fma(a, b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Horner evaluation with error-free transformations: accurate to a couple of
/// ulps of the true value even when the naive sum cancels.
pub fn eval_cubic(c: &CubicCoeffs, x: f64) -> f64 {
    let mut r = c.t3;
    let mut err = 0.0;
    for coef in [c.t2, c.t1, c.t0] {
        let (p, e1) = two_prod(r, x);
        let (s, e2) = two_sum(p, coef);
        err = err * x + (e1 + e2);
        r = s;
    }
    r + err
}

fn derivative_cubic(c: &CubicCoeffs, x: f64) -> f64 {
    (3.0 * c.t3 * x + 2.0 * c.t2) * x + c.t1
}

fn polish(c: &CubicCoeffs, mut x: f64) -> f64 {
    for _ in 0..4 {
        let f = eval_cubic(c, x);
        if f == 0.0 {
            break;
        }
        let d = derivative_cubic(c, x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        if !step.is_finite() || step.abs() <= f64::EPSILON * x.abs() {
            break;
        }
        x -= step;
    }
    x
}

/// All real roots of the cubic, each polished to the limit of f64.
///
/// Degenerate leading coefficients fall through to quadratic and linear
/// solving; a numerically repeated quadratic root is reported once. The
/// identically-zero polynomial is a domain error.
pub fn solve_cubic(c: &CubicCoeffs) -> Result<Vec<f64>, Error> {
    let scale = c.t3.abs().max(c.t2.abs()).max(c.t1.abs()).max(c.t0.abs());
    if scale == 0.0 {
        return Err(domain("identically zero polynomial"));
    }
    // Leading coefficients far below the magnitude of the rest behave like
    // zero; the corresponding far root is meaningless in f64.
    if c.t3.abs() <= 1e-12 * scale {
        return solve_quadratic(c.t2, c.t1, c.t0);
    }

    let a = c.t2 / c.t3;
    let b = c.t1 / c.t3;
    let d = c.t0 / c.t3;
    // Depressed form y^3 + p*y + q with x = y - a/3.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let shift = -a / 3.0;
    let half_q = 0.5 * q;
    let disc = half_q * half_q + p * p * p / 27.0;

    let mut roots = if disc > 0.0 {
        // One real root; the stable Cardano form avoids cancellation.
        let s = math::sqrt(disc);
        let u = if q >= 0.0 { math::cbrt(-half_q - s) } else { math::cbrt(-half_q + s) };
        let y = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
        vec![y + shift]
    } else if p == 0.0 {
        // Triple root.
        vec![math::cbrt(-q) + shift]
    } else {
        // Three real roots via the trigonometric form.
        let r = math::sqrt(-p / 3.0);
        let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
        let phi = math::acos(arg);
        let mut ys = Vec::with_capacity(3);
        for i in 0..3 {
            let angle = (phi + 2.0 * core::f64::consts::PI * i as f64) / 3.0;
            ys.push(2.0 * r * math::cos(angle) + shift);
        }
        ys
    };

    for r in roots.iter_mut() {
        *r = polish(c, *r);
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-8 * x.abs().max(y.abs()).max(1.0));
    Ok(roots)
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Result<Vec<f64>, Error> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-12 * scale {
        if b.abs() <= 1e-12 * scale {
            // Constant polynomial: either no roots or identically zero
            // (which was rejected by the caller).
            return Ok(vec![]);
        }
        return Ok(vec![-c / b]);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Ok(vec![]);
    }
    if disc == 0.0 {
        return Ok(vec![-b / (2.0 * a)]);
    }
    let s = math::sqrt(disc);
    let q = -0.5 * (b + b.signum() * s);
    let mut roots = if q == 0.0 { vec![0.0, 0.0] } else { vec![q / a, c / q] };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
    Ok(roots)
}

/// Picks the admissible power: among the positive real roots inside
/// `(0, p_box]` plus the boundary points `{0, p_box}`, the candidate with the
/// largest slot objective wins; ties break toward the smaller power.
pub fn select_power_root(
    inputs: &SlotInputs,
    m: usize,
    k: usize,
    roots: &[f64],
    p_box: f64,
    weighting: RateWeighting,
) -> Result<f64, Error> {
    let problem = power_problem(inputs, m, k, weighting)?;
    Ok(select_power_from_problem(&problem, inputs.bandwidth, roots, p_box))
}

pub(crate) fn select_power_from_problem(
    problem: &PowerProblem,
    bandwidth: f64,
    roots: &[f64],
    p_box: f64,
) -> f64 {
    if p_box <= 0.0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = vec![0.0, p_box];
    candidates.extend(roots.iter().copied().filter(|&r| r > 0.0 && r <= p_box));
    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut best = candidates[0];
    let mut best_val = problem.objective(bandwidth, best);
    for &cand in &candidates[1..] {
        let val = problem.objective(bandwidth, cand);
        if val > best_val {
            best = cand;
            best_val = val;
        }
    }
    best
}

/// Plans the power update for slot `(m, k)`: assembles the stationarity
/// polynomial (or bisects when the slot has too many coupled terms), then
/// selects the admissible root against the box `[0, p_box]`.
pub fn solve_power(
    inputs: &SlotInputs,
    m: usize,
    k: usize,
    p_box: f64,
    weighting: RateWeighting,
) -> Result<f64, Error> {
    let problem = power_problem(inputs, m, k, weighting)?;
    let roots = match problem.stationarity_coeffs(inputs.bandwidth) {
        Some(coeffs) => solve_cubic(&coeffs).unwrap_or_default(),
        None => problem
            .stationary_point(inputs.bandwidth, p_box.max(1.0) * 1e3)
            .map(|r| vec![r])
            .unwrap_or_default(),
    };
    Ok(select_power_from_problem(&problem, inputs.bandwidth, &roots, p_box))
}

/// Quadratic coefficients of the private-split condition for user `u` on
/// slot `(m, k)` under the chosen weighting: the pairwise sums over the
/// other assigned users.
///
/// Requires an active slot with positive power and an active split-budget
/// multiplier; otherwise the caller falls back to the projection path
/// ([`Error::SplitFallback`]).
pub fn split_quad_coeffs(
    inputs: &SlotInputs,
    m: usize,
    u: usize,
    k: usize,
    weighting: RateWeighting,
) -> Result<QuadCoeffs, Error> {
    let users = inputs.users(m, k)?;
    if !users.contains(&u) {
        return Err(structure(format!("user {u} is not assigned to slot ({m},{k})")));
    }
    let l4 = inputs.duals.lambda4[m][k];
    let p = inputs.alloc.p[m][k];
    if l4 < LAMBDA4_FLOOR || p <= 0.0 {
        return Err(Error::SplitFallback);
    }
    let w = inputs.bandwidth;
    // The QoS scale (1 + lambda1) is part of the weight; the pairwise sums
    // below carry the weights in the place the reference algebra puts
    // `(1+lambda1)*gamma_u` and `gamma_j`.
    let wu = inputs.private_weight(m, u, k, weighting);

    let mut mu1 = 0.0;
    let mut mu2 = 0.0;
    let mut mu3 = 0.0;
    for &j in &users {
        if j == u {
            continue;
        }
        let hj = inputs.channels.h[m][j][k];
        let wj = match weighting {
            RateWeighting::Tangent => {
                inputs.surrogates.private[m][j][k].tau / core::f64::consts::LN_2
            }
            RateWeighting::ExpansionSinr => inputs.surrogates.private[m][j][k].gamma,
        };
        let bj = inputs.b_of(j, k);
        mu1 += -l4 * bj + hj * p * w * (-wj + wu);
        let paired = l4 * bj + hj * p * w * (wj - wu);
        mu2 += 4.0 * hj * l4 * p * bj * wu * w + paired * paired;
        mu3 += 2.0 * hj * l4 * p;
    }
    Ok(QuadCoeffs { mu1, mu2, mu3 })
}

/// Reference assembly of the split quadratic: the pairwise sums with the
/// expansion-SINR weights of the original closed-form algebra.
pub fn quad_coeffs(
    inputs: &SlotInputs,
    m: usize,
    u: usize,
    k: usize,
) -> Result<QuadCoeffs, Error> {
    split_quad_coeffs(inputs, m, u, k, RateWeighting::ExpansionSinr)
}

/// Solves the split quadratic: evaluates both branches, keeps the one inside
/// [0, 1] (the larger when both qualify), and clamps into the interval when
/// neither does.
///
/// The underlying per-user objective is strictly concave in the split with
/// its unconstrained maximizer at the `+` branch (the product of the two
/// roots is nonpositive, so the `-` branch never lies above zero). When both
/// branches fall outside [0, 1] the `+` branch therefore sits above 1 and
/// clamping it is the constrained maximizer; clamping the other branch would
/// return the constrained *minimizer*.
pub fn solve_eta(coeffs: &QuadCoeffs) -> Result<EtaRoot, Error> {
    if coeffs.mu3 == 0.0 {
        return Err(Error::SplitFallback);
    }
    if coeffs.mu2 < 0.0 {
        return Err(Error::SplitFallback);
    }
    let s = math::sqrt(coeffs.mu2);
    let plus = (coeffs.mu1 + s) / coeffs.mu3;
    let minus = (coeffs.mu1 - s) / coeffs.mu3;
    let in_range = |v: f64| (0.0..=1.0).contains(&v);
    match (in_range(plus), in_range(minus)) {
        (true, true) => Ok(EtaRoot { value: plus.max(minus), clamped: false }),
        (true, false) => Ok(EtaRoot { value: plus, clamped: false }),
        (false, true) => Ok(EtaRoot { value: minus, clamped: false }),
        (false, false) => Ok(EtaRoot { value: plus.clamp(0.0, 1.0), clamped: true }),
    }
}

/// Private split for a user alone on its slot, from the same stationarity
/// with no co-slot interference: `clamp(W*weight / lambda4)` where `weight`
/// is the user's QoS-scaled term weight.
pub fn solve_eta_lone(weight: f64, lambda4: f64, bandwidth: f64) -> Result<f64, Error> {
    if lambda4 < LAMBDA4_FLOOR {
        return Err(Error::SplitFallback);
    }
    Ok((bandwidth * weight / lambda4).clamp(0.0, 1.0))
}

/// Common-split closed form with an explicit term weight:
/// `clamp(W * weight / lambda4)`.
pub fn solve_eta0_weighted(weight: f64, lambda4: f64, bandwidth: f64) -> Result<f64, Error> {
    if lambda4 < LAMBDA4_FLOOR {
        return Err(Error::SplitFallback);
    }
    Ok((bandwidth * weight / lambda4).clamp(0.0, 1.0))
}

/// Reference common-split closed form:
/// `clamp(lambda2 * gamma0_c * W / lambda4)`, the expansion-SINR-weighted
/// shape of the original algebra.
pub fn solve_eta0(
    duals: &DualState,
    surrogates: &SurrogateSet,
    m: usize,
    k: usize,
    bandwidth: f64,
) -> Result<f64, Error> {
    let gamma_c = surrogates.common[m][k].gamma;
    solve_eta0_weighted(duals.lambda2[m][k] * gamma_c, duals.lambda4[m][k], bandwidth)
}

/// The per-user split objective used to audit [`solve_eta`]: the user's own
/// weighted log-rate, the other users' interference terms, and the split
/// price, as a function of this user's split with everything else frozen.
pub fn eta_objective(
    inputs: &SlotInputs,
    m: usize,
    u: usize,
    k: usize,
    eta: f64,
    weighting: RateWeighting,
) -> Result<f64, Error> {
    let users = inputs.users(m, k)?;
    let p = inputs.alloc.p[m][k];
    let w = inputs.bandwidth;
    let l4 = inputs.duals.lambda4[m][k];
    let own_weight = inputs.private_weight(m, u, k, weighting);

    let mut v = -l4 * eta;
    if own_weight > 0.0 {
        if eta <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        v += w * own_weight * math::ln(eta);
    }
    for &j in &users {
        if j == u {
            continue;
        }
        let wj = match weighting {
            RateWeighting::Tangent => {
                inputs.surrogates.private[m][j][k].tau / core::f64::consts::LN_2
            }
            RateWeighting::ExpansionSinr => inputs.surrogates.private[m][j][k].gamma,
        };
        if wj <= 0.0 {
            continue;
        }
        let hj = inputs.channels.h[m][j][k];
        let others: f64 = users
            .iter()
            .filter(|&&l| l != j && l != u)
            .map(|&l| inputs.alloc.eta[m][l][k])
            .sum();
        v -= w * wj * math::ln(inputs.b_of(j, k) + hj * p * (others + eta));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemConfig;
    use crate::solver::DualState;
    use crate::surrogate::SurrogatePoint;
    use alloc::vec;

    /// Builds a 2-user single-slot fixture with every scalar pinned by hand.
    struct Fixture {
        channels: ChannelSet,
        assignment: Assignment,
        alloc: AllocationState,
        surrogates: SurrogateSet,
        duals: DualState,
        bandwidth: f64,
        noise: f64,
    }

    impl Fixture {
        fn inputs(&self) -> SlotInputs<'_> {
            SlotInputs {
                channels: &self.channels,
                surrogates: &self.surrogates,
                duals: &self.duals,
                assignment: &self.assignment,
                alloc: &self.alloc,
                bandwidth: self.bandwidth,
                noise_variance: self.noise,
            }
        }
    }

    fn hand_fixture() -> Fixture {
        // h=1, eta=0.25 each, I_p=1, sigma^2=1, lambda5=1, other duals 0,
        // all gammas 1, W=1.
        let channels = ChannelSet::from_direct(
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![1.0]],
            4.0,
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let assignment = Assignment::from_slots(1, 1, vec![(0, 0), (0, 0)]).unwrap();
        let mut alloc = AllocationState::zeros(1, 2, 1);
        alloc.p[0][0] = 1.0;
        alloc.eta0[0][0] = 0.5;
        alloc.eta[0][0][0] = 0.25;
        alloc.eta[0][1][0] = 0.25;
        let unit = SurrogatePoint { gamma: 1.0, tau: 0.5, omega: 1.0 };
        let surrogates = SurrogateSet {
            private: vec![vec![vec![unit], vec![unit]]],
            common: vec![vec![unit]],
            common_min_user: vec![vec![Some(0)]],
        };
        let mut duals = DualState::init(2, 1, 1, 0.0);
        duals.lambda5 = 1.0;
        Fixture { channels, assignment, alloc, surrogates, duals, bandwidth: 1.0, noise: 1.0 }
    }

    #[test]
    fn cubic_coeffs_match_symbolic_expansion() {
        let fx = hand_fixture();
        let c = cubic_coeffs(&fx.inputs(), 0, 0).unwrap();
        // Frozen from a symbolic expansion of the pairwise sums.
        assert!((c.t3 - 0.125).abs() < 1e-12, "t3={}", c.t3);
        assert!((c.t2 - 2.0).abs() < 1e-12, "t2={}", c.t2);
        assert!((c.t1 - 6.0).abs() < 1e-12, "t1={}", c.t1);
        assert!((c.t0 + 16.0).abs() < 1e-12, "t0={}", c.t0);
    }

    #[test]
    fn cubic_coeffs_zero_when_weights_vanish() {
        let mut fx = hand_fixture();
        fx.duals.lambda5 = 0.0;
        let zero = SurrogatePoint { gamma: 0.0, tau: 0.0, omega: 0.0 };
        fx.surrogates.private = vec![vec![vec![zero], vec![zero]]];
        fx.surrogates.common = vec![vec![zero]];
        let c = cubic_coeffs(&fx.inputs(), 0, 0).unwrap();
        assert_eq!((c.t3, c.t2, c.t1, c.t0), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn cubic_coeffs_affine_in_multipliers() {
        // Every boxed term is degree <= 1 in the multiplier vector jointly:
        // coeffs(alpha*duals) = alpha*coeffs(duals) + (1-alpha)*coeffs(0).
        let mut fx = hand_fixture();
        fx.duals.lambda1 = vec![0.3, 0.7];
        fx.duals.lambda2[0][0] = 0.4;
        fx.duals.lambda3[0][0] = 0.2;
        fx.duals.lambda5 = 1.0;
        let base = cubic_coeffs(&fx.inputs(), 0, 0).unwrap();

        let alpha = 2.5;
        let mut scaled = fx.inputs().duals.clone();
        scaled.lambda1.iter_mut().for_each(|v| *v *= alpha);
        scaled.lambda2[0][0] *= alpha;
        scaled.lambda3[0][0] *= alpha;
        scaled.lambda5 *= alpha;
        let mut fx2 = hand_fixture();
        fx2.duals = scaled;
        fx2.duals.lambda1 = vec![0.3 * alpha, 0.7 * alpha];
        let at_alpha = cubic_coeffs(&fx2.inputs(), 0, 0).unwrap();

        let mut fx0 = hand_fixture();
        fx0.duals = DualState::init(2, 1, 1, 0.0);
        let at_zero = cubic_coeffs(&fx0.inputs(), 0, 0).unwrap();

        for (got, (b, z)) in [
            (at_alpha.t3, (base.t3, at_zero.t3)),
            (at_alpha.t2, (base.t2, at_zero.t2)),
            (at_alpha.t1, (base.t1, at_zero.t1)),
            (at_alpha.t0, (base.t0, at_zero.t0)),
        ] {
            let expect = alpha * b + (1.0 - alpha) * z;
            assert!((got - expect).abs() < 1e-10 * expect.abs().max(1.0), "{got} vs {expect}");
        }
    }

    #[test]
    fn reference_and_stationarity_agree_without_rate_multipliers() {
        // With lambda1 = lambda2 = 0 the printed pairwise sums equal exactly
        // twice the cleared stationarity of the slot objective.
        let mut fx = hand_fixture();
        fx.duals.lambda3[0][0] = 0.35;
        fx.channels.h[0][1][0] = 1.8;
        fx.alloc.eta[0][1][0] = 0.4;
        fx.surrogates.private[0][1][0] = SurrogatePoint { gamma: 2.2, tau: 0.6875, omega: 0.0 };
        let reference = cubic_coeffs(&fx.inputs(), 0, 0).unwrap();
        let exact =
            power_stationarity_coeffs(&fx.inputs(), 0, 0, RateWeighting::ExpansionSinr).unwrap();
        for (r, e) in [
            (reference.t3, exact.t3),
            (reference.t2, exact.t2),
            (reference.t1, exact.t1),
            (reference.t0, exact.t0),
        ] {
            assert!((r - 2.0 * e).abs() < 1e-10 * r.abs().max(1.0), "{r} vs 2*{e}");
        }
    }

    #[test]
    fn solve_cubic_factored_roots() {
        let roots = solve_cubic(&CubicCoeffs { t3: 1.0, t2: 0.0, t1: -1.0, t0: 0.0 }).unwrap();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-10, "{r} vs {e}");
        }
    }

    #[test]
    fn solve_cubic_one_two_three() {
        let roots = solve_cubic(&CubicCoeffs { t3: 1.0, t2: -6.0, t1: 11.0, t0: -6.0 }).unwrap();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([1.0, 2.0, 3.0]) {
            assert!((r - e).abs() < 1e-10, "{r} vs {e}");
        }
    }

    #[test]
    fn solve_cubic_quadratic_fallthrough() {
        let roots = solve_cubic(&CubicCoeffs { t3: 0.0, t2: 1.0, t1: -4.0, t0: 4.0 }).unwrap();
        assert_eq!(roots, vec![2.0]);
    }

    #[test]
    fn solve_cubic_rejects_zero() {
        assert!(solve_cubic(&CubicCoeffs { t3: 0.0, t2: 0.0, t1: 0.0, t0: 0.0 }).is_err());
    }

    #[test]
    fn solve_cubic_residuals_are_tiny() {
        // Root-constructed cubics across magnitudes.
        let cases = [
            (1.0, [-3.0, 0.5, 7.0]),
            (-2.0, [0.1, 0.2, 0.3]),
            (0.7, [-11.0, -1.0, 4.0]),
        ];
        for (lead, rs) in cases {
            let c = CubicCoeffs {
                t3: lead,
                t2: -lead * (rs[0] + rs[1] + rs[2]),
                t1: lead * (rs[0] * rs[1] + rs[0] * rs[2] + rs[1] * rs[2]),
                t0: -lead * rs[0] * rs[1] * rs[2],
            };
            let roots = solve_cubic(&c).unwrap();
            assert_eq!(roots.len(), 3);
            for r in roots {
                let res = eval_cubic(&c, r).abs();
                assert!(res < 1e-8 * c.t0.abs().max(1.0), "residual {res} at {r}");
            }
        }
    }

    #[test]
    fn select_power_prefers_interior_maximum() {
        let problem = PowerProblem {
            terms: vec![PowerTerm { weight: 1.0, b: 2.0, c: 0.5 }],
            price: 0.8,
        };
        // Interior stationary point of w*(ln p - ln(b+cp)) - price*p.
        let coeffs = problem.stationarity_coeffs(1.0).unwrap();
        let roots = solve_cubic(&coeffs).unwrap();
        let p_box = 10.0;
        let chosen = select_power_from_problem(&problem, 1.0, &roots, p_box);
        assert!(chosen > 0.0 && chosen < p_box);
        // Grid check at modest resolution.
        let n = 20_000;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let p = p_box * i as f64 / n as f64;
            let v = problem.objective(1.0, p);
            if v > best.1 {
                best = (p, v);
            }
        }
        assert!((chosen - best.0).abs() <= p_box / n as f64, "{chosen} vs {}", best.0);
    }

    #[test]
    fn select_power_boundary_cases() {
        let free = PowerProblem { terms: vec![PowerTerm { weight: 1.0, b: 1.0, c: 0.0 }], price: 0.0 };
        // No positive price: objective increasing, pick the box edge.
        assert_eq!(select_power_from_problem(&free, 1.0, &[], 3.0), 3.0);
        // Degenerate box.
        assert_eq!(select_power_from_problem(&free, 1.0, &[], 0.0), 0.0);
        // All-zero weights with a price: zero power wins over the boundary.
        let dead = PowerProblem { terms: vec![], price: 1.0 };
        assert_eq!(select_power_from_problem(&dead, 1.0, &[-1.0, -0.5], 3.0), 0.0);
    }

    #[test]
    fn quad_coeffs_dead_expansion_gives_zero_split() {
        let mut fx = hand_fixture();
        let zero = SurrogatePoint { gamma: 0.0, tau: 0.0, omega: 0.0 };
        fx.surrogates.private = vec![vec![vec![zero], vec![zero]]];
        fx.duals.lambda4[0][0] = 3.0;
        let q = quad_coeffs(&fx.inputs(), 0, 0, 0).unwrap();
        // mu1 = -lambda4*b per other-user term, mu2 = its square, root 0.
        assert!((q.mu1 + 3.0 * 2.0).abs() < 1e-12);
        assert!((q.mu2 - q.mu1 * q.mu1).abs() < 1e-12);
        assert!(q.mu3 > 0.0);
        let root = solve_eta(&q).unwrap();
        assert_eq!(root.value, 0.0);
        assert!(!root.clamped);
    }

    #[test]
    fn quad_coeffs_symmetric_users_equal_split() {
        let mut fx = hand_fixture();
        fx.duals.lambda4[0][0] = 5.0;
        let ia = fx.inputs();
        let q0 = quad_coeffs(&ia, 0, 0, 0).unwrap();
        let q1 = quad_coeffs(&ia, 0, 1, 0).unwrap();
        assert_eq!(solve_eta(&q0).unwrap().value, solve_eta(&q1).unwrap().value);
    }

    #[test]
    fn quad_coeffs_hand_case() {
        // Asymmetric scalars frozen from a symbolic expansion:
        // h_j=1.3, p=7, W=10, g_j=0.8, g_u=1.7, lambda1_u=0.2, lambda4=9,
        // I_p=4, sigma^2=0.1 => b_j=4.1.
        let channels = ChannelSet::from_direct(
            vec![vec![vec![2.0], vec![1.3]]],
            vec![vec![1.0]],
            4.0,
            vec![vec![4.0], vec![4.0]],
        )
        .unwrap();
        let assignment = Assignment::from_slots(1, 1, vec![(0, 0), (0, 0)]).unwrap();
        let mut alloc = AllocationState::zeros(1, 2, 1);
        alloc.p[0][0] = 7.0;
        alloc.eta[0][0][0] = 0.4;
        alloc.eta[0][1][0] = 0.3;
        let mk = |g: f64| SurrogatePoint { gamma: g, tau: g / (1.0 + g), omega: 0.0 };
        let surrogates = SurrogateSet {
            private: vec![vec![vec![mk(1.7)], vec![mk(0.8)]]],
            common: vec![vec![mk(0.5)]],
            common_min_user: vec![vec![Some(1)]],
        };
        let mut duals = DualState::init(2, 1, 1, 0.0);
        duals.lambda1 = vec![0.2, 0.0];
        duals.lambda4[0][0] = 9.0;
        let fx = Fixture {
            channels,
            assignment,
            alloc,
            surrogates,
            duals,
            bandwidth: 10.0,
            noise: 0.1,
        };
        let q = quad_coeffs(&fx.inputs(), 0, 0, 0).unwrap();
        // mu1 = -9*4.1 + 1.3*7*10*(-0.8 + 1.2*1.7) = -36.9 + 112.84 = 75.94
        assert!((q.mu1 - 75.94).abs() < 1e-10, "mu1={}", q.mu1);
        // mu3 = 2*1.3*9*7 = 163.8
        assert!((q.mu3 - 163.8).abs() < 1e-10, "mu3={}", q.mu3);
        // mu2 = 4*1.3*1.2*9*7*4.1*1.7*10 + (36.9 + 91*(0.8-2.04))^2
        let paired = 9.0 * 4.1 + 1.3 * 7.0 * 10.0 * (0.8 - 1.2 * 1.7);
        let expect_mu2 = 4.0 * 1.3 * 1.2 * 9.0 * 7.0 * 4.1 * 1.7 * 10.0 + paired * paired;
        assert!((q.mu2 - expect_mu2).abs() < 1e-8, "mu2={} vs {}", q.mu2, expect_mu2);
        // The chosen branch maximizes the per-user split objective on [0,1].
        let root = solve_eta(&q).unwrap();
        let n = 10_000;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let eta = i as f64 / n as f64;
            let v = eta_objective(&fx.inputs(), 0, 0, 0, eta, RateWeighting::ExpansionSinr).unwrap();
            if v > best.1 {
                best = (eta, v);
            }
        }
        assert!((root.value - best.0).abs() <= 1.0 / n as f64, "{} vs {}", root.value, best.0);
    }

    #[test]
    fn solve_eta_zero_discriminant() {
        let q = QuadCoeffs { mu1: 1.5, mu2: 0.0, mu3: 3.0 };
        let r = solve_eta(&q).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(!r.clamped);
    }

    #[test]
    fn solve_eta_clamps_out_of_range() {
        // Both branches above 1.
        let q = QuadCoeffs { mu1: 10.0, mu2: 4.0, mu3: 2.0 };
        let r = solve_eta(&q).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.clamped);
    }

    #[test]
    fn solve_eta_signals_fallback() {
        assert!(matches!(
            solve_eta(&QuadCoeffs { mu1: 1.0, mu2: -1.0, mu3: 2.0 }),
            Err(Error::SplitFallback)
        ));
        assert!(matches!(
            solve_eta(&QuadCoeffs { mu1: 1.0, mu2: 1.0, mu3: 0.0 }),
            Err(Error::SplitFallback)
        ));
    }

    #[test]
    fn solve_eta0_closed_form() {
        let fx = hand_fixture();
        let mut duals = fx.duals.clone();
        duals.lambda4[0][0] = 4.0;
        duals.lambda2[0][0] = 0.0;
        assert_eq!(solve_eta0(&duals, &fx.surrogates, 0, 0, 1.0).unwrap(), 0.0);
        // lambda2*gamma_c*W = lambda4 gives exactly 1.
        duals.lambda2[0][0] = 4.0;
        assert_eq!(solve_eta0(&duals, &fx.surrogates, 0, 0, 1.0).unwrap(), 1.0);
        // Linear below the clamp.
        duals.lambda2[0][0] = 1.0;
        let v1 = solve_eta0(&duals, &fx.surrogates, 0, 0, 1.0).unwrap();
        duals.lambda2[0][0] = 2.0;
        let v2 = solve_eta0(&duals, &fx.surrogates, 0, 0, 1.0).unwrap();
        assert!((v2 - 2.0 * v1).abs() < 1e-15);
        // Inactive split-budget multiplier signals the fallback.
        duals.lambda4[0][0] = 0.0;
        assert!(matches!(
            solve_eta0(&duals, &fx.surrogates, 0, 0, 1.0),
            Err(Error::SplitFallback)
        ));
    }

    #[test]
    fn stationary_point_bisection_matches_cubic() {
        let problem = PowerProblem {
            terms: vec![
                PowerTerm { weight: 0.9, b: 4.1, c: 0.6 },
                PowerTerm { weight: 1.4, b: 4.1, c: 1.1 },
            ],
            price: 0.3,
        };
        let coeffs = problem.stationarity_coeffs(10.0).unwrap();
        let roots = solve_cubic(&coeffs).unwrap();
        let positive: Vec<f64> = roots.into_iter().filter(|&r| r > 0.0).collect();
        assert_eq!(positive.len(), 1);
        let bis = problem.stationary_point(10.0, 1.0e4).unwrap();
        assert!((bis - positive[0]).abs() < 1e-6 * positive[0], "{bis} vs {}", positive[0]);
    }
}
