//! Beam/subcarrier assignment: the greedy channel-gain rule and the random
//! baseline.
//!
//! Both schemes fill the same slot structure: in each of `RoundUp(U/M)`
//! rounds every beam takes one user on the beam's designated subcarrier
//! (subcarrier index equal to the beam index when the grid is square, the
//! beam's best subcarrier for the picked user otherwise). The greedy rule
//! picks the unassigned user with the largest gain; the random baseline picks
//! uniformly. With the default shape (M = K = 5, U = 10) every beam ends up
//! serving two users on a single subcarrier.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{structure, Error};
use crate::model::{Assignment, ChannelSet};

fn check_capacity(m: usize, k: usize, u: usize) -> Result<usize, Error> {
    if m == 0 || k == 0 || u == 0 {
        return Err(structure("dimensions must be at least 1"));
    }
    let users_per_beam = u.div_ceil(m);
    if u > m * k * users_per_beam {
        return Err(structure(format!(
            "{u} users exceed the {m}x{k} slot capacity at {users_per_beam} per slot"
        )));
    }
    Ok(users_per_beam)
}

/// Greedy assignment: per round and beam, the unassigned user with the
/// maximal gain on the beam's designated subcarrier wins the seat.
///
/// Ties break toward the lowest user index, then the lowest subcarrier index,
/// so the result is deterministic for equal gains.
pub fn greedy_assign(
    channels: &ChannelSet,
    num_beams: usize,
    num_subcarriers: usize,
    num_users: usize,
) -> Result<Assignment, Error> {
    let (cm, cu, ck) = channels.dims();
    if cm != num_beams || cu < num_users || ck != num_subcarriers {
        return Err(structure(format!(
            "channel dims ({cm},{cu},{ck}) do not cover {num_beams}x{num_users}x{num_subcarriers}"
        )));
    }
    let rounds = check_capacity(num_beams, num_subcarriers, num_users)?;

    let mut pool: Vec<usize> = (0..num_users).collect();
    let mut slot_of: Vec<(usize, usize)> = alloc::vec![(0, 0); num_users];
    for _round in 0..rounds {
        for beam in 0..num_beams {
            if pool.is_empty() {
                break;
            }
            let (best_idx, best_k) = if num_subcarriers == num_beams {
                // Square grid: beam b owns subcarrier b.
                let k = beam;
                let mut best = 0;
                for (idx, &u) in pool.iter().enumerate() {
                    if channels.h[beam][u][k] > channels.h[beam][pool[best]][k] {
                        best = idx;
                    }
                }
                (best, k)
            } else {
                // Pick the (user, subcarrier) pair with the largest gain for
                // this beam; lowest user then lowest subcarrier on ties.
                let mut best = (0usize, 0usize);
                let mut best_gain = f64::NEG_INFINITY;
                for (idx, &u) in pool.iter().enumerate() {
                    for k in 0..num_subcarriers {
                        if channels.h[beam][u][k] > best_gain {
                            best_gain = channels.h[beam][u][k];
                            best = (idx, k);
                        }
                    }
                }
                best
            };
            let user = pool.remove(best_idx);
            slot_of[user] = (beam, best_k);
        }
    }
    Assignment::from_slots(num_beams, num_subcarriers, slot_of)
}

/// Uniform index in `0..n` by rejection from the top 64 bits.
fn rand_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// Random assignment with the same slot structure as the greedy rule: each
/// round visits the beams in a shuffled order and seats a uniformly random
/// unassigned user on the beam's designated subcarrier (the beam index on a
/// square grid, a per-beam random subcarrier otherwise).
///
/// Deterministic for a fixed seed.
pub fn random_assign(
    num_beams: usize,
    num_subcarriers: usize,
    num_users: usize,
    seed: u64,
) -> Result<Assignment, Error> {
    let rounds = check_capacity(num_beams, num_subcarriers, num_users)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let subcarrier_of: Vec<usize> = (0..num_beams)
        .map(|b| if num_subcarriers == num_beams { b } else { rand_index(&mut rng, num_subcarriers) })
        .collect();

    let mut pool: Vec<usize> = (0..num_users).collect();
    let mut slot_of: Vec<(usize, usize)> = alloc::vec![(0, 0); num_users];
    for _round in 0..rounds {
        // Shuffle the beam visit order so a partial last round is unbiased.
        let mut order: Vec<usize> = (0..num_beams).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rand_index(&mut rng, i + 1));
        }
        for &beam in &order {
            if pool.is_empty() {
                break;
            }
            let idx = rand_index(&mut rng, pool.len());
            let user = pool.swap_remove(idx);
            slot_of[user] = (beam, subcarrier_of[beam]);
        }
    }
    Assignment::from_slots(num_beams, num_subcarriers, slot_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelSet;
    use alloc::vec;
    use alloc::vec::Vec;

    fn channels_from_h(h: Vec<Vec<Vec<f64>>>) -> ChannelSet {
        let m = h.len();
        let u = h[0].len();
        let k = h[0][0].len();
        ChannelSet::from_direct(h, vec![vec![0.1; k]; m], 4.0, vec![vec![4.0; k]; u]).unwrap()
    }

    #[test]
    fn singleton_pool_gets_argmax_slot() {
        // One user, 2x2 grid: the user lands on the beam whose designated
        // subcarrier has the larger gain.
        let h = vec![
            vec![vec![0.3, 9.0]], // beam 0, subcarrier 0 gain 0.3
            vec![vec![1.0, 2.0]], // beam 1, subcarrier 1 gain 2.0
        ];
        let channels = channels_from_h(h);
        let a = greedy_assign(&channels, 2, 2, 1).unwrap();
        // Round 1 beam 0 takes the user on (0,0) because beams are visited in
        // order and the pool empties.
        assert_eq!(a.slot_of(0), (0, 0));
    }

    #[test]
    fn greedy_matches_roundwise_rule_on_small_grids() {
        // Independent straight-line restatement of the round-wise rule for
        // M=K=2, compared on random distinct gains.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let h: Vec<Vec<Vec<f64>>> = (0..2)
                .map(|_| (0..4).map(|_| (0..2).map(|_| next() + 1e-9).collect()).collect())
                .collect();
            let channels = channels_from_h(h.clone());
            let got = greedy_assign(&channels, 2, 2, 4).unwrap();

            let mut pool: Vec<usize> = (0..4).collect();
            let mut expect = vec![(0usize, 0usize); 4];
            for _round in 0..2 {
                for beam in 0..2 {
                    let k = beam;
                    let mut best = pool[0];
                    for &u in &pool {
                        if h[beam][u][k] > h[beam][best][k] {
                            best = u;
                        }
                    }
                    expect[best] = (beam, k);
                    pool.retain(|&u| u != best);
                }
            }
            for u in 0..4 {
                assert_eq!(got.slot_of(u), expect[u]);
            }
        }
    }

    #[test]
    fn greedy_selection_is_permutation_invariant() {
        // With distinct gains the set of (gain, slot) pairs selected does not
        // depend on user ordering.
        let h = vec![
            vec![vec![5.0, 0.0], vec![3.0, 0.0], vec![8.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0.0, 2.0], vec![0.0, 9.0], vec![0.0, 4.0], vec![0.0, 7.0]],
        ];
        let channels = channels_from_h(h.clone());
        let a = greedy_assign(&channels, 2, 2, 4).unwrap();
        let mut gains: Vec<f64> = (0..4)
            .map(|u| {
                let (m, k) = a.slot_of(u);
                h[m][u][k]
            })
            .collect();

        // Permute users: reverse order.
        let hp: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|m| (0..4).map(|u| h[m][3 - u].clone()).collect())
            .collect();
        let channels_p = channels_from_h(hp.clone());
        let b = greedy_assign(&channels_p, 2, 2, 4).unwrap();
        let mut gains_p: Vec<f64> = (0..4)
            .map(|u| {
                let (m, k) = b.slot_of(u);
                hp[m][u][k]
            })
            .collect();
        gains.sort_by(|x, y| x.partial_cmp(y).unwrap());
        gains_p.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(gains, gains_p);
    }

    #[test]
    fn greedy_default_shape_two_users_per_beam_single_subcarrier() {
        // M=K=5, U=10: every beam serves exactly 2 users on its own
        // subcarrier.
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 + 0.01
        };
        let h: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| (0..10).map(|_| (0..5).map(|_| next()).collect()).collect())
            .collect();
        let channels = channels_from_h(h);
        let a = greedy_assign(&channels, 5, 5, 10).unwrap();
        for m in 0..5 {
            assert_eq!(a.users_in(m, m).len(), 2);
            for k in 0..5 {
                if k != m {
                    assert!(a.users_in(m, k).is_empty());
                }
            }
        }
    }

    #[test]
    fn random_assign_is_deterministic_and_c6_feasible() {
        let a = random_assign(5, 5, 10, 7).unwrap();
        let b = random_assign(5, 5, 10, 7).unwrap();
        assert_eq!(a, b);
        let c = random_assign(5, 5, 10, 8).unwrap();
        assert!(a != c || a == c); // different seeds may coincide; C6 is the contract
        for seed in 0..200 {
            let x = random_assign(5, 5, 10, seed).unwrap();
            // Every user has exactly one slot by construction; per-slot load
            // is capped by RoundUp(U/M).
            for m in 0..5 {
                for k in 0..5 {
                    assert!(x.users_in(m, k).len() <= 2);
                }
            }
            let total: usize = (0..5)
                .map(|m| (0..5).map(|k| x.users_in(m, k).len()).sum::<usize>())
                .sum();
            assert_eq!(total, 10);
        }
    }

    #[test]
    fn random_assign_balances_beams() {
        // With U = 2M every beam carries exactly U/M users; with U < M the
        // shuffled visit order keeps expected loads uniform within binomial
        // bounds.
        let trials = 2000;
        let mut counts = [0usize; 5];
        for seed in 0..trials {
            let a = random_assign(5, 5, 3, seed).unwrap();
            for u in 0..3 {
                counts[a.slot_of(u).0] += 1;
            }
        }
        let expect = trials as f64 * 3.0 / 5.0;
        let sigma = (trials as f64 * (3.0 / 5.0) * (1.0 - 3.0 / 5.0)).sqrt();
        for (beam, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "beam {beam} load {c} vs {expect} +- {sigma}"
            );
        }
    }

    #[test]
    fn capacity_errors() {
        assert!(random_assign(0, 5, 10, 1).is_err());
        // Capacity bound from the spec shape: U > M*K*RoundUp(U/M) cannot be
        // triggered with derived rounds, but zero dims are structural errors.
        assert!(random_assign(5, 0, 10, 1).is_err());
    }
}
