//! Concave log-domain surrogates of the rate function.
//!
//! For an SINR expansion point `g0`, the rate `W*log2(1 + g)` is bounded from
//! below by `W*(tau*log2(g) + omega)` with `tau = g0/(1+g0)` and
//! `omega = log2(1+g0) - tau*log2(g0)`. The bound is tight at `g = g0` and is
//! the standard building block of the successive convex approximation loop:
//! the solver re-expands at the current iterate and maximizes the surrogate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error};
use crate::math;
use crate::model::{AllocationState, Assignment, ChannelSet, RateContext, SystemConfig};

/// Surrogate coefficients at one SINR expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePoint {
    /// SINR at the expansion point.
    pub gamma: f64,
    /// Log-domain slope `gamma / (1 + gamma)`, in [0, 1).
    pub tau: f64,
    /// Offset `log2(1+gamma) - tau*log2(gamma)`; zero when `gamma` is zero.
    pub omega: f64,
}

/// Computes the surrogate coefficients for an expansion SINR.
///
/// A dead link (`gamma == 0`) yields the all-zero point, which removes the
/// term from the surrogate objective for this expansion.
pub fn surrogate_coeffs(gamma: f64) -> Result<SurrogatePoint, Error> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(domain(format!("SINR must be nonnegative and finite, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(SurrogatePoint { gamma: 0.0, tau: 0.0, omega: 0.0 });
    }
    let tau = gamma / (1.0 + gamma);
    let omega = math::log2(1.0 + gamma) - tau * math::log2(gamma);
    Ok(SurrogatePoint { gamma, tau, omega })
}

/// Evaluates the surrogate rate `W*(tau*log2(gamma_actual) + omega)`.
///
/// `gamma_actual == 0` returns negative infinity (the log diverges); callers
/// must guard the zero-SINR case themselves.
pub fn surrogate_rate(point: &SurrogatePoint, gamma_actual: f64, bandwidth: f64) -> f64 {
    if gamma_actual == 0.0 {
        return if point.tau == 0.0 { bandwidth * point.omega } else { f64::NEG_INFINITY };
    }
    bandwidth * (point.tau * math::log2(gamma_actual) + point.omega)
}

/// Surrogate expansion of a full allocation: one point per private stream and
/// one per slot for the common stream (taken at the minimum common SINR over
/// the slot's users, which limits the decodable common rate).
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSet {
    /// Private expansion points, indexed `[m][u][k]`.
    pub private: Vec<Vec<Vec<SurrogatePoint>>>,
    /// Common expansion point per slot.
    pub common: Vec<Vec<SurrogatePoint>>,
    /// User attaining the slot's minimum common SINR, when the slot is active.
    pub common_min_user: Vec<Vec<Option<usize>>>,
}

impl SurrogateSet {
    /// Expands every rate term around the SINRs of `alloc`.
    pub fn at_state(
        config: &SystemConfig,
        channels: &ChannelSet,
        alloc: &AllocationState,
        assignment: &Assignment,
    ) -> Result<SurrogateSet, Error> {
        let (m_dim, u_dim, k_dim) = channels.dims();
        let ctx = RateContext::new(config);
        let zero = SurrogatePoint { gamma: 0.0, tau: 0.0, omega: 0.0 };
        let mut private = vec![vec![vec![zero; k_dim]; u_dim]; m_dim];
        let mut common = vec![vec![zero; k_dim]; m_dim];
        let mut common_min_user = vec![vec![None; k_dim]; m_dim];
        for m in 0..m_dim {
            for k in 0..k_dim {
                let users = assignment.users_in(m, k);
                if users.is_empty() {
                    continue;
                }
                let mut min_user = users[0];
                let mut min_sinr = f64::INFINITY;
                for &u in &users {
                    let gp = ctx.private_sinr(channels, alloc, assignment, m, u, k);
                    private[m][u][k] = surrogate_coeffs(gp)?;
                    let gc = ctx.common_sinr(channels, alloc, assignment, m, u, k);
                    if gc < min_sinr {
                        min_sinr = gc;
                        min_user = u;
                    }
                }
                common[m][k] = surrogate_coeffs(min_sinr)?;
                common_min_user[m][k] = Some(min_user);
            }
        }
        Ok(SurrogateSet { private, common, common_min_user })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sinr_point() {
        let p = surrogate_coeffs(1.0).unwrap();
        assert_eq!(p.tau, 0.5);
        // omega = log2(2) - 0.5*log2(1) = 1.
        assert!((p.omega - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_three_point() {
        let p = surrogate_coeffs(3.0).unwrap();
        assert!((p.tau - 0.75).abs() < 1e-15);
        // 2 - 0.75*log2(3)
        assert!((p.omega - 0.8112781244591329).abs() < 1e-12, "got {}", p.omega);
    }

    #[test]
    fn asymptotic_point() {
        let p = surrogate_coeffs(1.0e4).unwrap();
        assert!(p.tau > 0.999);
        assert!(p.omega.abs() < 0.01);
    }

    #[test]
    fn dead_link_and_negative() {
        let p = surrogate_coeffs(0.0).unwrap();
        assert_eq!((p.gamma, p.tau, p.omega), (0.0, 0.0, 0.0));
        assert!(surrogate_coeffs(-1.0).is_err());
    }

    #[test]
    fn tightness_at_expansion_point() {
        for &g in &[1e-6, 1e-3, 0.5, 1.0, 7.3, 1e3, 1e6] {
            let p = surrogate_coeffs(g).unwrap();
            let exact = crate::math::log2(1.0 + g);
            let sur = surrogate_rate(&p, g, 1.0);
            assert!((sur - exact).abs() < 1e-10, "gamma={g}: {sur} vs {exact}");
        }
    }

    #[test]
    fn lower_bound_on_log_grid() {
        // Coarse version of the acceptance grid: surrogate never exceeds the
        // exact rate by more than 1e-10*W.
        let grid: Vec<f64> = (0..40).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 39.0)).collect();
        for &g0 in &grid {
            let p = surrogate_coeffs(g0).unwrap();
            for &g in &grid {
                let exact = crate::math::log2(1.0 + g);
                let sur = surrogate_rate(&p, g, 1.0);
                assert!(sur <= exact + 1e-10, "g0={g0} g={g}: {sur} > {exact}");
            }
        }
    }

    #[test]
    fn zero_point_is_identically_zero() {
        let p = SurrogatePoint { gamma: 0.0, tau: 0.0, omega: 0.0 };
        for &g in &[0.5, 1.0, 100.0] {
            assert_eq!(surrogate_rate(&p, g, 123.0), 0.0);
        }
    }

    #[test]
    fn zero_actual_sinr_sentinel() {
        let p = surrogate_coeffs(2.0).unwrap();
        assert_eq!(surrogate_rate(&p, 0.0, 1.0), f64::NEG_INFINITY);
    }
}
