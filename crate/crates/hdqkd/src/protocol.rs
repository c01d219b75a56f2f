//! The BB84 session engine: per-clock-cycle random basis/state choices for
//! Alice and Bob, pulse simulation, click logging, and basis reconciliation
//! producing the raw and sifted keys with their error counts.
//!
//! Bob's measurement is a single projective yes/no per cycle (one detector,
//! one mask), not a full D-outcome measurement, so most compatible-basis
//! pulses yield no click and never enter the sifted key.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::hilbert::{Basis, MubFamily, PhaseMask};
use crate::photonics::{simulate_pulse, total_click_probability};
use crate::rng::SessionRng;

/// One party's choice for one clock cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub clock: u64,
    pub basis: Basis,
    pub state_index: usize,
}

/// Complete record of a session: both choice streams and the click stream,
/// one entry per clock cycle, plus the config snapshot that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub config: SessionConfig,
    pub alice_choices: Vec<ChoiceRecord>,
    pub bob_choices: Vec<ChoiceRecord>,
    pub clicks: Vec<(u64, bool)>,
    pub duration_cycles: u64,
}

impl SessionLog {
    pub fn validate(&self) -> Result<()> {
        let n = self.duration_cycles as usize;
        if self.alice_choices.len() != n || self.bob_choices.len() != n || self.clicks.len() != n {
            return Err(Error::InvalidParameter(
                "session log streams must all have duration_cycles entries".into(),
            ));
        }
        for (i, ((a, b), c)) in self
            .alice_choices
            .iter()
            .zip(&self.bob_choices)
            .zip(&self.clicks)
            .enumerate()
        {
            let clock = i as u64;
            if a.clock != clock || b.clock != clock || c.0 != clock {
                return Err(Error::InvalidParameter(format!(
                    "session log clock indices must be 0..duration in order (entry {i})"
                )));
            }
        }
        Ok(())
    }

    /// CSV dump: `clock,alice_basis,alice_k,bob_basis,bob_k,click`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.alice_choices.len() + 64);
        out.push_str("clock,alice_basis,alice_k,bob_basis,bob_k,click\n");
        for ((a, b), &(_, click)) in self
            .alice_choices
            .iter()
            .zip(&self.bob_choices)
            .zip(&self.clicks)
        {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                a.clock,
                a.basis,
                a.state_index,
                b.basis,
                b.state_index,
                click as u8
            ));
        }
        out
    }
}

/// One sifted detection: both parties used the same basis and the detector
/// clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedSymbol {
    pub clock: u64,
    pub k_alice: usize,
    pub k_bob: usize,
}

/// Outcome of basis reconciliation over a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftResult {
    pub dim: usize,
    pub duration_cycles: u64,
    /// All clicks, compatible bases or not.
    pub raw_detections: u64,
    /// Clicks with matching basis choices (= n_correct + n_incorrect).
    pub sifted_detections: u64,
    pub n_correct: u64,
    pub n_incorrect: u64,
    /// `n_incorrect / sifted_detections`; `None` when the sifted set is empty.
    pub qber: Option<f64>,
    pub sifted_symbols: Vec<SiftedSymbol>,
}

impl SiftResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sift result serializes")
    }
}

/// Runs a full session: per cycle each party draws a uniform basis and a
/// uniform state from its own stream, the pulse is simulated on the channel
/// stream, and the click is recorded. Fully deterministic given the seeds.
pub fn run_session(config: &SessionConfig) -> Result<SessionLog> {
    config.validate()?;
    let family = MubFamily::for_dim(config.dim)?;
    let model = config.detection_model()?;
    let dim = config.dim;
    let mut rng = SessionRng::from_seeds(&config.seeds);

    // All 2D masks, indexed [basis][k].
    let masks: [Vec<PhaseMask>; 2] = [
        (0..dim).map(|k| family.mask(Basis::Alpha, k)).collect(),
        (0..dim).map(|k| family.mask(Basis::AlphaPrime, k)).collect(),
    ];

    // With the noise model off, the projection depends only on the choice
    // pair, so the per-pulse computation collapses to a table lookup. The
    // channel stream consumption (one Bernoulli per cycle) is identical to
    // the direct path.
    let projection_table: Option<Vec<f64>> = if config.noise.phase_jitter_rad == 0.0 {
        let mut table = vec![0.0; 4 * dim * dim];
        for (bi, basis_masks) in masks.iter().enumerate() {
            for (ka, ma) in basis_masks.iter().enumerate() {
                for (bj, other_masks) in masks.iter().enumerate() {
                    for (kb, mb) in other_masks.iter().enumerate() {
                        let p = crate::photonics::projection_probability(&model, ma, mb)?;
                        table[((bi * dim + ka) * 2 + bj) * dim + kb] = p;
                    }
                }
            }
        }
        Some(table)
    } else {
        None
    };

    let n = config.duration_cycles;
    let mut alice_choices = Vec::with_capacity(n as usize);
    let mut bob_choices = Vec::with_capacity(n as usize);
    let mut clicks = Vec::with_capacity(n as usize);

    for clock in 0..n {
        let (a_basis, a_k) = match config.force_alice {
            Some((basis, k)) => {
                // Debug mode still consumes the stream so toggling it does
                // not shift Bob's or the channel's draws.
                let _ = rng.alice.random_bool(0.5);
                let _ = rng.alice.random_range(0..dim);
                (basis, k)
            }
            None => {
                let basis = if rng.alice.random_bool(0.5) {
                    Basis::Alpha
                } else {
                    Basis::AlphaPrime
                };
                (basis, rng.alice.random_range(0..dim))
            }
        };
        let b_basis = if rng.bob.random_bool(0.5) {
            Basis::Alpha
        } else {
            Basis::AlphaPrime
        };
        let b_k = rng.bob.random_range(0..dim);

        let click = match &projection_table {
            Some(table) => {
                let p = table[((a_basis.index() * dim + a_k) * 2 + b_basis.index()) * dim + b_k];
                let p_click = total_click_probability(&config.pulse, &config.noise, p);
                rng.channel.random::<f64>() < p_click
            }
            None => simulate_pulse(
                &config.pulse,
                &config.noise,
                &masks[a_basis.index()][a_k],
                &masks[b_basis.index()][b_k],
                &model,
                &mut rng.channel,
            )?,
        };

        alice_choices.push(ChoiceRecord {
            clock,
            basis: a_basis,
            state_index: a_k,
        });
        bob_choices.push(ChoiceRecord {
            clock,
            basis: b_basis,
            state_index: b_k,
        });
        clicks.push((clock, click));
    }

    Ok(SessionLog {
        config: config.clone(),
        alice_choices,
        bob_choices,
        clicks,
        duration_cycles: n,
    })
}

/// Basis reconciliation over the whole log: keeps clicked cycles with equal
/// basis labels, splits them into correct (`k_alice == k_bob`) and incorrect,
/// and computes the error rate `n_incorrect / (n_correct + n_incorrect)`.
/// Incompatible-basis clicks count only toward `raw_detections`.
pub fn sift(log: &SessionLog) -> Result<SiftResult> {
    sift_up_to(log, log.duration_cycles)
}

/// Sifts only cycles with clock index below `watermark`, so reconciliation
/// can run concurrently with acquisition on a snapshot boundary.
pub fn sift_up_to(log: &SessionLog, watermark: u64) -> Result<SiftResult> {
    log.validate()?;
    let mut raw = 0u64;
    let mut n_correct = 0u64;
    let mut n_incorrect = 0u64;
    let mut symbols = Vec::new();
    for ((a, b), &(clock, click)) in log
        .alice_choices
        .iter()
        .zip(&log.bob_choices)
        .zip(&log.clicks)
    {
        if clock >= watermark {
            break;
        }
        if !click {
            continue;
        }
        raw += 1;
        if a.basis != b.basis {
            continue;
        }
        if a.state_index == b.state_index {
            n_correct += 1;
        } else {
            n_incorrect += 1;
        }
        symbols.push(SiftedSymbol {
            clock,
            k_alice: a.state_index,
            k_bob: b.state_index,
        });
    }
    let sifted = n_correct + n_incorrect;
    Ok(SiftResult {
        dim: log.config.dim,
        duration_cycles: watermark.min(log.duration_cycles),
        raw_detections: raw,
        sifted_detections: sifted,
        n_correct,
        n_incorrect,
        qber: if sifted > 0 {
            Some(n_incorrect as f64 / sifted as f64)
        } else {
            None
        },
        sifted_symbols: symbols,
    })
}

/// Histogram of detected symbols over the correct sifted detections; the
/// counts sum to `n_correct`. Whether incorrect detections should also count
/// is ambiguous in principle, so that variant is a separate explicit call.
pub fn symbol_counts(result: &SiftResult) -> Vec<u64> {
    counts_impl(result, false)
}

/// Histogram over all sifted detections, binning Bob's detected symbol.
pub fn symbol_counts_including_errors(result: &SiftResult) -> Vec<u64> {
    counts_impl(result, true)
}

fn counts_impl(result: &SiftResult, include_incorrect: bool) -> Vec<u64> {
    let mut counts = vec![0u64; result.dim];
    for s in &result.sifted_symbols {
        if s.k_alice == s.k_bob || include_incorrect {
            counts[s.k_bob] += 1;
        }
    }
    counts
}

/// Key bits from the correct sifted detections: each symbol contributes the
/// big-endian log2(D)-bit encoding of k.
pub fn key_bits(result: &SiftResult) -> Vec<bool> {
    let bits_per_symbol = result.dim.trailing_zeros() as usize;
    let mut bits = Vec::with_capacity(result.sifted_symbols.len() * bits_per_symbol);
    for s in &result.sifted_symbols {
        if s.k_alice != s.k_bob {
            continue;
        }
        for b in (0..bits_per_symbol).rev() {
            bits.push((s.k_alice >> b) & 1 == 1);
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::{NoiseConfig, PulseConfig};
    use crate::rng::SessionSeeds;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn ideal_config(cycles: u64) -> SessionConfig {
        SessionConfig::ideal(
            16,
            PulseConfig::preset_mu_a(),
            cycles,
            SessionSeeds {
                alice: 11,
                bob: 22,
                channel: 33,
            },
        )
    }

    /// Hand-built six-cycle fixture with every sift category:
    ///   0: click, same basis, same k        -> N_c
    ///   1: click, same basis, different k   -> N_i
    ///   2: click, different bases           -> raw only
    ///   3: no click, same basis, same k     -> nothing
    ///   4: click, same basis, same k        -> N_c
    ///   5: no click, different bases        -> nothing
    /// Expected: raw 4, sifted 3, N_c 2, N_i 1, QBER 1/3.
    fn six_cycle_log() -> SessionLog {
        let mut config = ideal_config(6);
        config.duration_cycles = 6;
        let a = [
            (Basis::Alpha, 3),
            (Basis::Alpha, 5),
            (Basis::Alpha, 0),
            (Basis::AlphaPrime, 9),
            (Basis::AlphaPrime, 12),
            (Basis::Alpha, 1),
        ];
        let b = [
            (Basis::Alpha, 3),
            (Basis::Alpha, 6),
            (Basis::AlphaPrime, 0),
            (Basis::AlphaPrime, 9),
            (Basis::AlphaPrime, 12),
            (Basis::AlphaPrime, 1),
        ];
        let clicks = [true, true, true, false, true, false];
        SessionLog {
            config,
            alice_choices: a
                .iter()
                .enumerate()
                .map(|(i, &(basis, k))| ChoiceRecord {
                    clock: i as u64,
                    basis,
                    state_index: k,
                })
                .collect(),
            bob_choices: b
                .iter()
                .enumerate()
                .map(|(i, &(basis, k))| ChoiceRecord {
                    clock: i as u64,
                    basis,
                    state_index: k,
                })
                .collect(),
            clicks: clicks
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as u64, c))
                .collect(),
            duration_cycles: 6,
        }
    }

    #[test]
    fn six_cycle_fixture_sifts_exactly() {
        let result = sift(&six_cycle_log()).unwrap();
        assert_eq!(result.raw_detections, 4);
        assert_eq!(result.sifted_detections, 3);
        assert_eq!(result.n_correct, 2);
        assert_eq!(result.n_incorrect, 1);
        assert_close(result.qber.unwrap(), 1.0 / 3.0, 1e-15);
        assert_eq!(result.sifted_symbols.len(), 3);
        assert_eq!(
            result.sifted_symbols[0],
            SiftedSymbol {
                clock: 0,
                k_alice: 3,
                k_bob: 3
            }
        );
    }

    #[test]
    fn qber_definition_arithmetic_instance() {
        // N_c = 866, N_i = 134 -> QBER = 0.134
        let mut config = ideal_config(1000);
        config.duration_cycles = 1000;
        let mut alice = Vec::new();
        let mut bob = Vec::new();
        let mut clicks = Vec::new();
        for i in 0..1000u64 {
            let k_a = (i % 16) as usize;
            let k_b = if i < 866 { k_a } else { (k_a + 1) % 16 };
            alice.push(ChoiceRecord {
                clock: i,
                basis: Basis::Alpha,
                state_index: k_a,
            });
            bob.push(ChoiceRecord {
                clock: i,
                basis: Basis::Alpha,
                state_index: k_b,
            });
            clicks.push((i, true));
        }
        let log = SessionLog {
            config,
            alice_choices: alice,
            bob_choices: bob,
            clicks,
            duration_cycles: 1000,
        };
        let result = sift(&log).unwrap();
        assert_eq!(result.n_correct, 866);
        assert_eq!(result.n_incorrect, 134);
        assert_close(result.qber.unwrap(), 0.134, 1e-15);
    }

    #[test]
    fn empty_sifted_set_leaves_qber_undefined() {
        let mut log = six_cycle_log();
        for c in &mut log.clicks {
            c.1 = false;
        }
        let result = sift(&log).unwrap();
        assert_eq!(result.qber, None);
        assert_eq!(result.sifted_detections, 0);
    }

    #[test]
    fn ideal_session_statistics() {
        let config = ideal_config(100_000);
        let log = run_session(&config).unwrap();
        let n = config.duration_cycles as f64;

        let basis_matches = log
            .alice_choices
            .iter()
            .zip(&log.bob_choices)
            .filter(|(a, b)| a.basis == b.basis)
            .count() as f64;
        assert_close(basis_matches / n, 0.5, 0.005);

        let state_matches = log
            .alice_choices
            .iter()
            .zip(&log.bob_choices)
            .filter(|(a, b)| a.basis == b.basis && a.state_index == b.state_index)
            .count() as f64;
        assert_close(state_matches / basis_matches, 1.0 / 16.0, 0.004);

        // cross-basis click rate matches 1 - e^{-mu/16}
        let (mut cross, mut cross_clicks) = (0u64, 0u64);
        for ((a, b), &(_, click)) in log
            .alice_choices
            .iter()
            .zip(&log.bob_choices)
            .zip(&log.clicks)
        {
            if a.basis != b.basis {
                cross += 1;
                cross_clicks += click as u64;
            }
        }
        let expect = 1.0 - (-0.6_f64 / 16.0).exp();
        let rate = cross_clicks as f64 / cross as f64;
        let sigma = (expect * (1.0 - expect) / cross as f64).sqrt();
        assert!(
            (rate - expect).abs() < 3.0 * sigma,
            "cross rate {rate} vs {expect} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn noiseless_session_has_exactly_zero_errors() {
        let log = run_session(&ideal_config(50_000)).unwrap();
        let result = sift(&log).unwrap();
        assert_eq!(result.n_incorrect, 0);
        assert_eq!(result.qber, Some(0.0));
        for s in &result.sifted_symbols {
            assert_eq!(s.k_alice, s.k_bob, "sifted click at clock {}", s.clock);
        }
    }

    #[test]
    fn detections_are_conserved() {
        let log = run_session(&ideal_config(20_000)).unwrap();
        let result = sift(&log).unwrap();
        let incompatible_clicks = log
            .alice_choices
            .iter()
            .zip(&log.bob_choices)
            .zip(&log.clicks)
            .filter(|((a, b), &(_, click))| click && a.basis != b.basis)
            .count() as u64;
        assert_eq!(
            result.raw_detections,
            result.sifted_detections + incompatible_clicks
        );
    }

    #[test]
    fn sift_is_pure() {
        let log = run_session(&ideal_config(5_000)).unwrap();
        assert_eq!(sift(&log).unwrap(), sift(&log).unwrap());
    }

    #[test]
    fn sessions_are_deterministic() {
        let config = ideal_config(5_000);
        let a = run_session(&config).unwrap();
        let b = run_session(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn watermark_sift_matches_truncated_log() {
        let log = run_session(&ideal_config(10_000)).unwrap();
        let partial = sift_up_to(&log, 4_000).unwrap();
        let mut truncated = log.clone();
        truncated.alice_choices.truncate(4_000);
        truncated.bob_choices.truncate(4_000);
        truncated.clicks.truncate(4_000);
        truncated.duration_cycles = 4_000;
        let direct = sift(&truncated).unwrap();
        assert_eq!(partial.raw_detections, direct.raw_detections);
        assert_eq!(partial.n_correct, direct.n_correct);
        assert_eq!(partial.n_incorrect, direct.n_incorrect);
        assert_eq!(partial.sifted_symbols, direct.sifted_symbols);
    }

    /// Chi-square critical values at significance 0.001:
    /// 1 dof: 10.828, 15 dof: 37.697, 31 dof: 61.098.
    #[test]
    fn choice_streams_are_uniform() {
        let log = run_session(&ideal_config(100_000)).unwrap();
        let n = log.duration_cycles as f64;
        for (label, choices) in [("alice", &log.alice_choices), ("bob", &log.bob_choices)] {
            let heads = choices.iter().filter(|c| c.basis == Basis::Alpha).count() as f64;
            let chi_basis = (heads - n / 2.0).powi(2) / (n / 2.0)
                + ((n - heads) - n / 2.0).powi(2) / (n / 2.0);
            assert!(chi_basis < 10.828, "{label} basis chi2 = {chi_basis}");

            let mut joint = vec![0u64; 32];
            for c in choices.iter() {
                joint[c.basis.index() * 16 + c.state_index] += 1;
            }
            let expect = n / 32.0;
            let chi_joint: f64 = joint
                .iter()
                .map(|&c| (c as f64 - expect).powi(2) / expect)
                .sum();
            assert!(chi_joint < 61.098, "{label} joint chi2 = {chi_joint}");
        }
    }

    #[test]
    fn forced_alice_concentrates_histogram() {
        let mut config = ideal_config(20_000);
        config.force_alice = Some((Basis::Alpha, 5));
        let log = run_session(&config).unwrap();
        let result = sift(&log).unwrap();
        let counts = symbol_counts(&result);
        assert!(result.n_correct > 0);
        assert_eq!(counts[5], result.n_correct);
        assert_eq!(counts.iter().sum::<u64>(), result.n_correct);
    }

    #[test]
    fn symbol_counts_total_equals_n_correct() {
        let log = run_session(&ideal_config(50_000)).unwrap();
        let result = sift(&log).unwrap();
        let counts = symbol_counts(&result);
        assert_eq!(counts.iter().sum::<u64>(), result.n_correct);
        let all = symbol_counts_including_errors(&result);
        assert_eq!(all.iter().sum::<u64>(), result.sifted_detections);
    }

    #[test]
    fn empty_result_gives_zero_histogram() {
        let mut log = six_cycle_log();
        for c in &mut log.clicks {
            c.1 = false;
        }
        let result = sift(&log).unwrap();
        assert_eq!(symbol_counts(&result), vec![0u64; 16]);
    }

    #[test]
    fn key_bits_big_endian_mapping() {
        let result = SiftResult {
            dim: 16,
            duration_cycles: 3,
            raw_detections: 2,
            sifted_detections: 2,
            n_correct: 2,
            n_incorrect: 0,
            qber: Some(0.0),
            sifted_symbols: vec![
                SiftedSymbol {
                    clock: 0,
                    k_alice: 0b1011,
                    k_bob: 0b1011,
                },
                SiftedSymbol {
                    clock: 2,
                    k_alice: 0b0001,
                    k_bob: 0b0001,
                },
            ],
        };
        assert_eq!(
            key_bits(&result),
            vec![true, false, true, true, false, false, false, true]
        );
    }

    #[test]
    fn csv_dump_is_exact() {
        let log = six_cycle_log();
        let csv = log.to_csv();
        let expected = "clock,alice_basis,alice_k,bob_basis,bob_k,click\n\
                        0,alpha,3,alpha,3,1\n\
                        1,alpha,5,alpha,6,1\n\
                        2,alpha,0,alpha_prime,0,1\n\
                        3,alpha_prime,9,alpha_prime,9,0\n\
                        4,alpha_prime,12,alpha_prime,12,1\n\
                        5,alpha,1,alpha_prime,1,0\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn qubit_dimension_sessions_run() {
        let config = SessionConfig::ideal(
            2,
            PulseConfig::preset_mu_a(),
            20_000,
            SessionSeeds {
                alice: 5,
                bob: 6,
                channel: 7,
            },
        );
        let log = run_session(&config).unwrap();
        let result = sift(&log).unwrap();
        assert_eq!(result.dim, 2);
        assert_eq!(result.qber, Some(0.0));
        assert!(result.n_correct > 0);
    }

    #[test]
    fn dark_counts_are_the_only_error_source_when_noise_is_off() {
        let mut config = ideal_config(200_000);
        config.pulse.dark_rate_hz = 200_000.0; // ~1% dark probability per 50 ns gate
        let log = run_session(&config).unwrap();
        let result = sift(&log).unwrap();
        assert!(
            result.n_incorrect > 0,
            "dark counts should land on wrong-state cycles"
        );
        // with darks back off, the same seeds give zero errors again
        config.pulse.dark_rate_hz = 0.0;
        let clean = sift(&run_session(&config).unwrap()).unwrap();
        assert_eq!(clean.n_incorrect, 0);
    }

    #[test]
    fn noisy_sessions_still_deterministic() {
        let mut config = ideal_config(2_000);
        config.noise = NoiseConfig {
            phase_jitter_rad: 0.4,
            background_click_prob: 0.001,
        };
        let a = run_session(&config).unwrap();
        let b = run_session(&config).unwrap();
        assert_eq!(a, b);
        let result = sift(&a).unwrap();
        assert!(result.n_incorrect > 0, "jitter should produce some errors");
    }
}
