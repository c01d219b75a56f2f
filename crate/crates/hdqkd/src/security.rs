//! Analytical security layer: dimension-dependent error-rate thresholds for
//! individual and collective attacks, Shannon entropy of the detected
//! symbols, rate accounting, and the session verdict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{total_click_probability, NoiseConfig, PulseConfig};
use crate::protocol::{symbol_counts, SiftResult};

/// Maximum error rate with a positive key rate under individual attacks:
/// `(1 - 1/sqrt(D)) / 2`.
pub fn threshold_individual(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "threshold requires D >= 2, got {dim}"
        )));
    }
    Ok((1.0 - 1.0 / (dim as f64).sqrt()) / 2.0)
}

/// Dimension-adjusted error entropy
/// `h_D(Q) = -(1-Q) log2(1-Q) - Q log2(Q / (D-1))`, with `h_D(0) = 0`.
pub fn error_entropy(q: f64, dim: usize) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    -(1.0 - q) * (1.0 - q).log2() - q * (q / (dim as f64 - 1.0)).log2()
}

/// Asymptotic secret fraction against collective attacks, in bits per sifted
/// symbol: `r = log2(D) - 2 h_D(Q)`.
pub fn key_rate_collective(q: f64, dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "key rate requires D >= 2, got {dim}"
        )));
    }
    let q_max = (dim as f64 - 1.0) / dim as f64;
    if !(0.0..=q_max).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "Q = {q} outside [0, {q_max}]"
        )));
    }
    Ok((dim as f64).log2() - 2.0 * error_entropy(q, dim))
}

/// Maximum error rate with a positive key rate under collective attacks: the
/// unique root of [`key_rate_collective`] in `(0, (D-1)/D)`, by bisection to
/// 1e-10. Uniqueness holds because the rate is strictly decreasing there.
pub fn threshold_coherent(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "threshold requires D >= 2, got {dim}"
        )));
    }
    let mut lo = 0.0_f64; // r(0) = log2 D > 0
    let mut hi = (dim as f64 - 1.0) / dim as f64; // r(q_max) = -log2 D < 0
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if key_rate_collective(mid, dim)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H = -sum p_k log2 p_k` over nonzero bins; `None` for an empty histogram.
pub fn shannon_entropy(counts: &[u64]) -> Option<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let total = total as f64;
    Some(
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum(),
    )
}

/// Expected same-basis wrong-state projection under the active noise model:
/// phase jitter dephases exact nulls toward the uniform value,
/// `(1 - e^{-sigma^2}) / D`; zero when the model is noise-free.
pub fn expected_wrong_state_projection(noise: &NoiseConfig, dim: usize) -> f64 {
    let s2 = noise.phase_jitter_rad * noise.phase_jitter_rad;
    (1.0 - (-s2).exp()) / dim as f64
}

/// Predicted sifted detections per hour:
/// `rep_rate * 3600 * 1/2 * [ (1/D) P_click(1) + ((D-1)/D) P_click(p_err) ]`,
/// with darks and background folded into the per-pulse click probability.
pub fn predicted_sifted_rate_per_hour(cfg: &PulseConfig, noise: &NoiseConfig, dim: usize) -> f64 {
    let d = dim as f64;
    let p_err = expected_wrong_state_projection(noise, dim);
    let per_pulse = (1.0 / d) * total_click_probability(cfg, noise, 1.0)
        + ((d - 1.0) / d) * total_click_probability(cfg, noise, p_err);
    cfg.rep_rate_hz * 3600.0 * 0.5 * per_pulse
}

/// Empirical and predicted rates for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub wall_hours: f64,
    pub empirical_raw_per_hour: f64,
    pub empirical_sifted_per_hour: f64,
    pub predicted_sifted_per_hour: f64,
}

/// Rates from the sift counts against the logical session duration.
pub fn rate_accounting(
    result: &SiftResult,
    cfg: &PulseConfig,
    noise: &NoiseConfig,
    wall_hours: f64,
) -> Result<RateReport> {
    if !wall_hours.is_finite() || wall_hours <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "wall_hours must be positive, got {wall_hours}"
        )));
    }
    Ok(RateReport {
        wall_hours,
        empirical_raw_per_hour: result.raw_detections as f64 / wall_hours,
        empirical_sifted_per_hour: result.sifted_detections as f64 / wall_hours,
        predicted_sifted_per_hour: predicted_sifted_rate_per_hour(cfg, noise, result.dim),
    })
}

/// Back-solves the overall efficiency eta that makes the predicted sifted
/// rate hit `target_per_hour`, by bisection on the monotone rate curve.
pub fn solve_eta_for_rate(
    target_per_hour: f64,
    cfg: &PulseConfig,
    noise: &NoiseConfig,
    dim: usize,
) -> Result<f64> {
    let rate_at = |eta: f64| {
        let mut c = cfg.clone();
        c.eta = eta;
        predicted_sifted_rate_per_hour(&c, noise, dim)
    };
    let (lo_rate, hi_rate) = (rate_at(0.0), rate_at(1.0));
    if !(lo_rate..=hi_rate).contains(&target_per_hour) {
        return Err(Error::RootNotBracketed {
            target: target_per_hour,
            lo: lo_rate,
            hi: hi_rate,
        });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid) < target_per_hour {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Security verdict from comparing the measured error rate to the two
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "secure_both")]
    SecureBoth,
    #[serde(rename = "secure_individual_only")]
    SecureIndividualOnly,
    #[serde(rename = "insecure")]
    Insecure,
}

/// Thresholds, entropy, rates, and the verdict for one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub dim: usize,
    /// `None` when the sifted set is empty (verdict withheld).
    pub qber: Option<f64>,
    /// Binomial standard error on the measured QBER.
    pub qber_std_err: Option<f64>,
    pub threshold_individual: f64,
    pub threshold_coherent: f64,
    pub verdict: Option<Verdict>,
    /// Shannon entropy of the correct sifted symbols, bits per symbol.
    pub entropy_bits: Option<f64>,
    pub raw_detections: u64,
    pub sifted_detections: u64,
    pub n_correct: u64,
    pub n_incorrect: u64,
    pub raw_rate_per_hour: f64,
    pub sifted_rate_per_hour: f64,
    pub wall_hours: f64,
    /// Secret fraction at the measured QBER, bits per sifted symbol.
    pub collective_key_rate: Option<f64>,
}

impl SecurityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn verdict_for(qber: f64, dim: usize) -> Result<Verdict> {
    let ind = threshold_individual(dim)?;
    let coh = threshold_coherent(dim)?;
    Ok(if qber < coh {
        Verdict::SecureBoth
    } else if qber < ind {
        Verdict::SecureIndividualOnly
    } else {
        Verdict::Insecure
    })
}

/// Assembles the full report. An empty sifted set yields a report with
/// undefined QBER/entropy and the verdict withheld.
pub fn build_report(result: &SiftResult, cfg: &PulseConfig, wall_hours: f64) -> Result<SecurityReport> {
    cfg.validate()?;
    if !wall_hours.is_finite() || wall_hours <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "wall_hours must be positive, got {wall_hours}"
        )));
    }
    let dim = result.dim;
    let qber = result.qber;
    let n = result.sifted_detections;
    let qber_std_err = qber.map(|q| if n > 0 { (q * (1.0 - q) / n as f64).sqrt() } else { 0.0 });
    let verdict = match qber {
        Some(q) => Some(verdict_for(q, dim)?),
        None => None,
    };
    let entropy_bits = shannon_entropy(&symbol_counts(result));
    let collective_key_rate = match qber {
        Some(q) if q <= (dim as f64 - 1.0) / dim as f64 => Some(key_rate_collective(q, dim)?),
        _ => None,
    };
    Ok(SecurityReport {
        dim,
        qber,
        qber_std_err,
        threshold_individual: threshold_individual(dim)?,
        threshold_coherent: threshold_coherent(dim)?,
        verdict,
        entropy_bits,
        raw_detections: result.raw_detections,
        sifted_detections: result.sifted_detections,
        n_correct: result.n_correct,
        n_incorrect: result.n_incorrect,
        raw_rate_per_hour: result.raw_detections as f64 / wall_hours,
        sifted_rate_per_hour: result.sifted_detections as f64 / wall_hours,
        wall_hours,
        collective_key_rate,
    })
}

/// Logical wall-clock duration of a session: cycles at the pulse repetition
/// rate. Reports derive their rates from this, not from host time, so runs
/// are reproducible.
pub fn logical_wall_hours(duration_cycles: u64, cfg: &PulseConfig) -> f64 {
    duration_cycles as f64 / cfg.rep_rate_hz / 3600.0
}

/// Calibrates the phase jitter so the expected session QBER hits `target`,
/// holding the background click probability at its configured value.
///
/// The expectation is estimated from `draws` jitter vectors reused across
/// candidate sigmas (common random numbers), which makes the objective smooth
/// and monotone; the root is then found by bisection. Nonlinearity of the
/// click model in the projection makes this differ measurably from the
/// small-signal closed form, hence the numeric route.
pub fn calibrate_jitter_to_qber(
    target_qber: f64,
    cfg: &PulseConfig,
    noise_template: &NoiseConfig,
    dim: usize,
    draws: usize,
    seed: u64,
) -> Result<NoiseConfig> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    if !(0.0..1.0).contains(&target_qber) {
        return Err(Error::InvalidParameter(format!(
            "target QBER {target_qber} outside [0, 1)"
        )));
    }
    let d = dim as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Vec<f64>> = (0..draws)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();

    // Any same-basis wrong pair has a balanced +-1 phase-difference pattern
    // (orthogonality forces equal counts), and all balanced patterns give the
    // same projection distribution under i.i.d. jitter.
    let balanced: Vec<f64> = (0..dim).map(|l| if l < dim / 2 { 1.0 } else { -1.0 }).collect();

    let expected_qber = |sigma: f64| -> f64 {
        let mut p_match = 0.0;
        let mut p_wrong = 0.0;
        for zv in &z {
            let (mut mr, mut mi, mut wr, mut wi) = (0.0, 0.0, 0.0, 0.0);
            for (l, &zl) in zv.iter().enumerate() {
                let (s, c) = (sigma * zl).sin_cos();
                mr += c;
                mi += s;
                wr += balanced[l] * c;
                wi += balanced[l] * s;
            }
            let proj_match = (mr * mr + mi * mi) / (d * d);
            let proj_wrong = (wr * wr + wi * wi) / (d * d);
            p_match += total_click_probability(cfg, noise_template, proj_match.min(1.0));
            p_wrong += total_click_probability(cfg, noise_template, proj_wrong.min(1.0));
        }
        p_match /= draws as f64;
        p_wrong /= draws as f64;
        // per compatible cycle: P(k match) = 1/D correct, (D-1)/D wrong
        let n_i = (d - 1.0) / d * p_wrong;
        let n_c = 1.0 / d * p_match;
        n_i / (n_c + n_i)
    };

    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    let (q_lo, q_hi) = (expected_qber(lo), expected_qber(hi));
    if target_qber < q_lo || target_qber > q_hi {
        return Err(Error::RootNotBracketed {
            target: target_qber,
            lo: q_lo,
            hi: q_hi,
        });
    }
    // sigma to ~5e-10; the answer's accuracy is set by the draw count, not
    // the bisection depth
    for _ in 0..32 {
        let mid = 0.5 * (lo + hi);
        if expected_qber(mid) < target_qber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(NoiseConfig {
        phase_jitter_rad: 0.5 * (lo + hi),
        background_click_prob: noise_template.background_click_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SessionConfig;
    use crate::protocol::{run_session, sift};
    use crate::rng::SessionSeeds;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn individual_thresholds_match_closed_form() {
        assert_eq!(threshold_individual(16).unwrap(), 0.375);
        assert_close(threshold_individual(2).unwrap(), 0.1464466094, 1e-9);
        assert_close(threshold_individual(4).unwrap(), 0.25, 1e-15);
        assert!(threshold_individual(1).is_err());
    }

    #[test]
    fn collective_rate_anchors() {
        assert_eq!(key_rate_collective(0.0, 16).unwrap(), 4.0);
        // root of the rate near the printed 28.97% bound
        assert!(key_rate_collective(0.2897, 16).unwrap().abs() < 5e-4);
        // canonical qubit collective bound near 11%
        assert!(key_rate_collective(0.11, 2).unwrap().abs() < 5e-4);
        assert!(key_rate_collective(-0.1, 16).is_err());
        assert!(key_rate_collective(0.95, 16).is_err());
    }

    #[test]
    fn collective_rate_strictly_decreasing() {
        for dim in [2usize, 4, 16] {
            let q_max = (dim as f64 - 1.0) / dim as f64;
            let mut last = f64::INFINITY;
            for i in 0..50 {
                let q = q_max * i as f64 / 50.0;
                let r = key_rate_collective(q, dim).unwrap();
                assert!(r < last, "rate not decreasing at q={q}, dim={dim}");
                last = r;
            }
        }
    }

    #[test]
    fn coherent_thresholds_match_known_values() {
        assert_close(threshold_coherent(16).unwrap(), 0.2897, 1e-4);
        assert_close(threshold_coherent(2).unwrap(), 0.1100, 5e-4);
        // independently computed root for the D = 2 case: 0.1100278644
        assert_close(threshold_coherent(2).unwrap(), 0.1100278644, 1e-8);
    }

    #[test]
    fn thresholds_increase_with_dimension() {
        let dims = [2usize, 4, 8, 16, 32];
        let mut last_ind = 0.0;
        let mut last_coh = 0.0;
        for &d in &dims {
            let ind = threshold_individual(d).unwrap();
            let coh = threshold_coherent(d).unwrap();
            assert!(ind > last_ind, "D^ind not increasing at D={d}");
            assert!(coh > last_coh, "D^coh not increasing at D={d}");
            assert!(coh < ind, "D^coh must stay below D^ind at D={d}");
            last_ind = ind;
            last_coh = coh;
        }
        // spot check between the endpoints
        let c4 = threshold_coherent(4).unwrap();
        assert!(c4 > threshold_coherent(2).unwrap() && c4 < threshold_coherent(16).unwrap());
    }

    #[test]
    fn entropy_known_values() {
        let uniform = vec![5u64; 16];
        assert_eq!(shannon_entropy(&uniform), Some(4.0));
        let point = {
            let mut v = vec![0u64; 16];
            v[3] = 100;
            v
        };
        assert_eq!(shannon_entropy(&point), Some(0.0));
        assert_eq!(shannon_entropy(&[1, 1, 2]), Some(1.5));
        assert_eq!(shannon_entropy(&[0, 0, 0]), None);
    }

    #[test]
    fn entropy_permutation_invariant_and_maximal_at_uniform() {
        let a = [4u64, 9, 1, 2];
        let b = [9u64, 2, 4, 1];
        assert_eq!(shannon_entropy(&a), shannon_entropy(&b));
        let uniform = [4u64, 4, 4, 4];
        assert_close(shannon_entropy(&uniform).unwrap(), 2.0, 1e-15);
        assert!(shannon_entropy(&a).unwrap() < 2.0);
    }

    #[test]
    fn predicted_rate_ideal_case() {
        // 108000 cycles/hour * 1/2 * 1/16 * (1 - e^{-0.6}) = 1522.76
        let cfg = PulseConfig::preset_mu_a();
        let rate = predicted_sifted_rate_per_hour(&cfg, &NoiseConfig::none(), 16);
        assert_close(rate, 3375.0 * (1.0 - (-0.6_f64).exp()), 1e-9);
        assert_close(rate, 1523.0, 0.5);
    }

    #[test]
    fn eta_back_solve_reproduces_target() {
        let cfg = PulseConfig::preset_mu_a();
        let noise = NoiseConfig::none();
        let eta = solve_eta_for_rate(27.0, &cfg, &noise, 16).unwrap();
        assert_close(eta, 0.013387, 1e-4);
        let mut tuned = cfg.clone();
        tuned.eta = eta;
        let rate = predicted_sifted_rate_per_hour(&tuned, &noise, 16);
        assert_close(rate, 27.0, 0.5);
    }

    #[test]
    fn eta_back_solve_rejects_unreachable_targets() {
        let cfg = PulseConfig::preset_mu_a();
        let err = solve_eta_for_rate(1e9, &cfg, &NoiseConfig::none(), 16).unwrap_err();
        assert!(matches!(err, Error::RootNotBracketed { .. }));
    }

    #[test]
    fn zero_click_session_has_zero_rates() {
        let mut config = SessionConfig::ideal(
            16,
            PulseConfig::preset_mu_a(),
            500,
            SessionSeeds {
                alice: 1,
                bob: 2,
                channel: 3,
            },
        );
        config.pulse.eta = 0.0;
        let result = sift(&run_session(&config).unwrap()).unwrap();
        let rates = rate_accounting(&result, &config.pulse, &config.noise, 1.0).unwrap();
        assert_eq!(rates.empirical_raw_per_hour, 0.0);
        assert_eq!(rates.empirical_sifted_per_hour, 0.0);
    }

    #[test]
    fn monte_carlo_session_matches_predicted_rate() {
        let config = SessionConfig::ideal(
            16,
            PulseConfig::preset_mu_a(),
            200_000,
            SessionSeeds {
                alice: 41,
                bob: 42,
                channel: 43,
            },
        );
        let result = sift(&run_session(&config).unwrap()).unwrap();
        let hours = logical_wall_hours(config.duration_cycles, &config.pulse);
        let rates = rate_accounting(&result, &config.pulse, &config.noise, hours).unwrap();
        // per-cycle sifted-detection probability from the prediction
        let p = rates.predicted_sifted_per_hour / (config.pulse.rep_rate_hz * 3600.0);
        let n = config.duration_cycles as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let expected = n * p;
        let got = result.sifted_detections as f64;
        assert!(
            (got - expected).abs() < 3.0 * sigma,
            "sifted {got} vs predicted {expected} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn verdict_rules_and_boundaries() {
        assert_eq!(verdict_for(0.134, 16).unwrap(), Verdict::SecureBoth);
        assert_eq!(verdict_for(0.32, 16).unwrap(), Verdict::SecureIndividualOnly);
        assert_eq!(verdict_for(0.40, 16).unwrap(), Verdict::Insecure);

        let coh = threshold_coherent(16).unwrap();
        let ind = threshold_individual(16).unwrap();
        assert_eq!(verdict_for(coh - 1e-9, 16).unwrap(), Verdict::SecureBoth);
        assert_eq!(
            verdict_for(coh + 1e-9, 16).unwrap(),
            Verdict::SecureIndividualOnly
        );
        assert_eq!(
            verdict_for(ind - 1e-9, 16).unwrap(),
            Verdict::SecureIndividualOnly
        );
        assert_eq!(verdict_for(ind + 1e-9, 16).unwrap(), Verdict::Insecure);
    }

    #[test]
    fn report_on_empty_sift_withholds_verdict() {
        let result = SiftResult {
            dim: 16,
            duration_cycles: 10,
            raw_detections: 0,
            sifted_detections: 0,
            n_correct: 0,
            n_incorrect: 0,
            qber: None,
            sifted_symbols: vec![],
        };
        let report = build_report(&result, &PulseConfig::preset_mu_a(), 1.0).unwrap();
        assert_eq!(report.qber, None);
        assert_eq!(report.verdict, None);
        assert_eq!(report.entropy_bits, None);
    }

    #[test]
    fn calibration_hits_target_qber_in_session() {
        let cfg = PulseConfig::preset_mu_a();
        let noise = calibrate_jitter_to_qber(0.134, &cfg, &NoiseConfig::none(), 16, 40_000, 777)
            .unwrap();
        assert!(noise.phase_jitter_rad > 0.2 && noise.phase_jitter_rad < 0.6);
        let mut config = SessionConfig::ideal(
            16,
            cfg,
            300_000,
            SessionSeeds {
                alice: 8,
                bob: 9,
                channel: 10,
            },
        );
        config.noise = noise;
        let result = sift(&run_session(&config).unwrap()).unwrap();
        let q = result.qber.unwrap();
        assert!(
            (q - 0.134).abs() < 0.02,
            "calibrated session QBER {q} vs target 0.134"
        );
    }

    #[test]
    fn calibration_is_deterministic() {
        let cfg = PulseConfig::preset_mu_a();
        let a = calibrate_jitter_to_qber(0.1, &cfg, &NoiseConfig::none(), 16, 10_000, 5).unwrap();
        let b = calibrate_jitter_to_qber(0.1, &cfg, &NoiseConfig::none(), 16, 10_000, 5).unwrap();
        assert_eq!(a, b);
    }
}
