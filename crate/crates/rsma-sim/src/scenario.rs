//! Scenario files and deterministic channel generation.
//!
//! A scenario is a JSON object with a `config` (the system description), an
//! optional `generation` block with the randomization knobs, an optional
//! explicit `channels` object (which bypasses generation entirely), and an
//! optional `seed`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use rsma_core::model::{channel_gain, free_space_loss};
use rsma_core::{ChannelSet, SystemConfig};

use crate::error::SimError;

/// Randomization knobs for channel generation.
///
/// Each user is dropped inside the footprint of one home beam (users spread
/// uniformly over the beams): toward its home beam it sees the nominal link
/// budget, toward every other beam the gain sits `footprint_rolloff_db`
/// lower. On top of that, users sit on a distance ring around the nominal
/// slant range and every beam/user/subcarrier gain carries an independent
/// log-uniform jitter. The rolloff depth, jitter spread and cross-gain range
/// are free parameters of the study; the defaults put the benchmark schemes
/// into the regime where assignment quality, the interference cap and the
/// power budget all matter across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    /// Relative distance ring (low, high) multiplying the nominal distance.
    pub distance_ring: (f64, f64),
    /// Log-uniform gain jitter window in dB, (low, high).
    pub gain_jitter_db: (f64, f64),
    /// Gain reduction toward beams other than the user's home beam, dB.
    pub footprint_rolloff_db: f64,
    /// Log-uniform range of the LEO-beam to GEO-user gain.
    pub cross_gain_range: (f64, f64),
    /// Received GEO interference per user and subcarrier, watts.
    pub geo_interference: f64,
    /// GEO transmit power per subcarrier, watts.
    pub geo_power: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            distance_ring: (0.95, 1.05),
            gain_jitter_db: (-3.0, 3.0),
            footprint_rolloff_db: 15.0,
            cross_gain_range: (0.03, 0.5),
            geo_interference: 4.0,
            geo_power: 4.0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.distance_ring.0 > 0.0 && self.distance_ring.1 >= self.distance_ring.0) {
            return Err(SimError::config("distance_ring must satisfy 0 < low <= high"));
        }
        if !(self.gain_jitter_db.1 >= self.gain_jitter_db.0) {
            return Err(SimError::config("gain_jitter_db window must satisfy low <= high"));
        }
        if !(self.footprint_rolloff_db >= 0.0) {
            return Err(SimError::config("footprint_rolloff_db must be nonnegative"));
        }
        if !(self.cross_gain_range.0 > 0.0 && self.cross_gain_range.1 >= self.cross_gain_range.0) {
            return Err(SimError::config("cross_gain_range must satisfy 0 < low <= high"));
        }
        if !(self.geo_interference >= 0.0) || !(self.geo_power > 0.0) {
            return Err(SimError::config("geo_interference must be >= 0 and geo_power > 0"));
        }
        Ok(())
    }
}

/// One scenario file: configuration, generation knobs, optional explicit
/// channels, optional seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioFile {
    pub config: SystemConfig,
    pub generation: GenParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    /// Materializes the channel set: explicit channels win, otherwise they
    /// are generated from `(config, generation, seed)`.
    pub fn channels(&self, seed: u64) -> Result<ChannelSet, SimError> {
        match &self.channels {
            Some(ch) => {
                let (m, u, k) = ch.dims();
                if m != self.config.num_beams
                    || u != self.config.num_users
                    || k != self.config.num_subcarriers
                {
                    return Err(SimError::config(format!(
                        "explicit channels have shape ({m},{u},{k}); config wants ({},{},{})",
                        self.config.num_beams, self.config.num_users, self.config.num_subcarriers
                    )));
                }
                Ok(ch.clone())
            }
            None => generate_scenario(&self.config, &self.generation, seed),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

fn log_uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (uniform_in(rng, lo.ln(), hi.ln())).exp()
}

/// Deterministic channel generation for `(config, params, seed)`.
///
/// Direct gains come from the free-space loss at a randomized per-user
/// distance, multiplied by independent log-uniform jitter per
/// (beam, user, subcarrier). Cross gains toward the GEO user are log-uniform
/// in the configured range. The received GEO interference is written
/// directly per user/subcarrier, with the GEO-side factors kept consistent
/// (`g * q` reproduces it).
pub fn generate_scenario(
    config: &SystemConfig,
    params: &GenParams,
    seed: u64,
) -> Result<ChannelSet, SimError> {
    config.validate().map_err(|e| SimError::config(e.to_string()))?;
    params.validate()?;
    let (m_dim, u_dim, k_dim) = (config.num_beams, config.num_users, config.num_subcarriers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-user nominal gain from the link budget at a randomized distance.
    let mut base = Vec::with_capacity(u_dim);
    for _ in 0..u_dim {
        let d = config.distance * uniform_in(&mut rng, params.distance_ring.0, params.distance_ring.1);
        let loss = free_space_loss(d, config.carrier_frequency)
            .map_err(|e| SimError::config(e.to_string()))?;
        let gain = channel_gain((config.tx_antenna_gain, config.rx_antenna_gain), loss)
            .map_err(|e| SimError::config(e.to_string()))?;
        base.push(gain);
    }

    let (j_lo, j_hi) = params.gain_jitter_db;
    let rolloff = 10f64.powf(-params.footprint_rolloff_db / 10.0);
    let mut h = vec![vec![vec![0.0; k_dim]; u_dim]; m_dim];
    for (m, beam) in h.iter_mut().enumerate() {
        for (u, user) in beam.iter_mut().enumerate() {
            // Users are spread uniformly over the beams; the home beam sees
            // the nominal budget, the others the footprint rolloff.
            let footprint = if u % m_dim == m { 1.0 } else { rolloff };
            for v in user.iter_mut() {
                let jitter_db = uniform_in(&mut rng, j_lo, j_hi);
                *v = base[u] * footprint * 10f64.powf(jitter_db / 10.0);
            }
        }
    }

    let mut f = vec![vec![0.0; k_dim]; m_dim];
    for row in f.iter_mut() {
        for v in row.iter_mut() {
            *v = log_uniform_in(&mut rng, params.cross_gain_range.0, params.cross_gain_range.1);
        }
    }

    let i_p = vec![vec![params.geo_interference; k_dim]; u_dim];
    ChannelSet::from_direct(h, f, params.geo_power, i_p).map_err(SimError::Solver)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let config = SystemConfig::default();
        let params = GenParams::default();
        let a = generate_scenario(&config, &params, 42).unwrap();
        let b = generate_scenario(&config, &params, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&config, &params, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn default_shape_matches_config() {
        let config = SystemConfig::default();
        let ch = generate_scenario(&config, &GenParams::default(), 1).unwrap();
        assert_eq!(ch.dims(), (5, 10, 5));
        assert_eq!(ch.i_p[0][0], 4.0);
        assert!(ch.geo_product_consistent(1e-12));
    }

    #[test]
    fn zero_jitter_collapses_to_distance_profile() {
        let config = SystemConfig::default();
        let params = GenParams { gain_jitter_db: (0.0, 0.0), ..GenParams::default() };
        let ch = generate_scenario(&config, &params, 9).unwrap();
        // All beams and subcarriers see the same per-user gain.
        for u in 0..10 {
            let v = ch.h[0][u][0];
            for m in 0..5 {
                for k in 0..5 {
                    assert_eq!(ch.h[m][u][k], v);
                }
            }
        }
    }

    #[test]
    fn invalid_ranges_are_config_errors() {
        let config = SystemConfig::default();
        let bad = GenParams { distance_ring: (0.0, 1.0), ..GenParams::default() };
        assert!(matches!(generate_scenario(&config, &bad, 1), Err(SimError::Config(_))));
        let bad = GenParams { cross_gain_range: (0.5, 0.1), ..GenParams::default() };
        assert!(matches!(generate_scenario(&config, &bad, 1), Err(SimError::Config(_))));
    }
}
