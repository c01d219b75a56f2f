//! Stochastic source and detector layer: weak coherent pulses with Poissonian
//! photon number, a threshold (click/no-click) detector with dark counts
//! inside the gating window, and the noise knobs that degrade the ideal
//! projection probability.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{detection_probability_ideal, make_slit_state, PhaseMask};
use crate::optics::{pinhole_click_probability, OpticalSetup};

/// Weak-coherent-pulse source and detector parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// Mean photon number per pulse.
    pub mu: f64,
    /// Pulse repetition rate in Hz.
    pub rep_rate_hz: f64,
    /// Detection gate duration in nanoseconds.
    pub window_ns: f64,
    /// Overall transmittance times detector efficiency, in [0, 1].
    pub eta: f64,
    /// Dark counts per second.
    pub dark_rate_hz: f64,
}

impl PulseConfig {
    /// mu = 0.60 with a 50 ns gate at 30 Hz.
    pub fn preset_mu_a() -> Self {
        Self {
            mu: 0.60,
            rep_rate_hz: 30.0,
            window_ns: 50.0,
            eta: 1.0,
            dark_rate_hz: 0.0,
        }
    }

    /// mu = 0.18 with a 20 ns gate at 30 Hz.
    pub fn preset_mu_b() -> Self {
        Self {
            mu: 0.18,
            rep_rate_hz: 30.0,
            window_ns: 20.0,
            eta: 1.0,
            dark_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::InvalidParameter(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !self.rep_rate_hz.is_finite() || self.rep_rate_hz <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rep_rate_hz must be > 0, got {}",
                self.rep_rate_hz
            )));
        }
        if !self.window_ns.is_finite() || self.window_ns <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "window_ns must be > 0, got {}",
                self.window_ns
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must be in [0, 1], got {}",
                self.eta
            )));
        }
        if !self.dark_rate_hz.is_finite() || self.dark_rate_hz < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dark_rate_hz must be >= 0, got {}",
                self.dark_rate_hz
            )));
        }
        Ok(())
    }

    /// Probability of a dark count inside one gate.
    pub fn dark_click_probability(&self) -> f64 {
        self.dark_rate_hz * self.window_ns * 1e-9
    }
}

/// Empirical noise knobs. The residual error rate of a real bench is not
/// attributable to a single mechanism, so it is modeled as per-pulse Gaussian
/// jitter on the slit phases plus a signal-independent background click
/// probability; both are calibrated against a target error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of the Gaussian jitter added to each slit phase,
    /// independently, once per pulse (radians).
    pub phase_jitter_rad: f64,
    /// Probability of an accidental signal-independent click per gate.
    pub background_click_prob: f64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            phase_jitter_rad: 0.0,
            background_click_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.phase_jitter_rad.is_finite() || self.phase_jitter_rad < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "phase_jitter_rad must be >= 0, got {}",
                self.phase_jitter_rad
            )));
        }
        if !(0.0..=1.0).contains(&self.background_click_prob) {
            return Err(Error::InvalidParameter(format!(
                "background_click_prob must be in [0, 1], got {}",
                self.background_click_prob
            )));
        }
        Ok(())
    }

    pub fn is_off(&self) -> bool {
        self.phase_jitter_rad == 0.0 && self.background_click_prob == 0.0
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::none()
    }
}

/// Which projection model drives detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectionModel {
    /// Born-rule projection `|<bob|alice>|^2`.
    Ideal,
    /// Fraunhofer diffraction integrated over the pinhole.
    Optical(OpticalSetup),
}

/// Threshold-detector click probability for a pulse with projection
/// probability `p`: `1 - (1 - p_dark) e^{-mu eta p}`.
///
/// A pulse carries Poisson(mu) photons; each survives to the detector with
/// probability `eta * p`, so the no-photon-click probability is the Poisson
/// void probability `e^{-mu eta p}`. Multi-photon pulses still yield at most
/// one click.
pub fn click_probability(cfg: &PulseConfig, projection_prob: f64) -> f64 {
    assert!(
        (0.0..=1.0 + 1e-12).contains(&projection_prob),
        "projection probability {projection_prob} outside [0, 1]"
    );
    let p = projection_prob.clamp(0.0, 1.0);
    let p_dark = cfg.dark_click_probability();
    1.0 - (1.0 - p_dark) * (-cfg.mu * cfg.eta * p).exp()
}

/// Click probability with the signal-independent background folded in.
pub fn total_click_probability(cfg: &PulseConfig, noise: &NoiseConfig, projection_prob: f64) -> f64 {
    1.0 - (1.0 - noise.background_click_prob) * (1.0 - click_probability(cfg, projection_prob))
}

/// Adds i.i.d. Gaussian(0, sigma^2) to each slit phase. Zero jitter returns
/// the mask unchanged and consumes no randomness.
pub fn apply_phase_noise<R: Rng>(mask: &PhaseMask, noise: &NoiseConfig, rng: &mut R) -> PhaseMask {
    if noise.phase_jitter_rad == 0.0 {
        return mask.clone();
    }
    let normal = Normal::new(0.0, noise.phase_jitter_rad).expect("validated sigma");
    let phases = mask
        .phases()
        .iter()
        .map(|&p| p + normal.sample(rng))
        .collect();
    PhaseMask::with_slits(phases, mask.open_flags().to_vec()).expect("lengths preserved")
}

/// Projection probability of the Alice/Bob mask pair under the chosen model.
pub fn projection_probability(
    model: &DetectionModel,
    alice_mask: &PhaseMask,
    bob_mask: &PhaseMask,
) -> Result<f64> {
    match model {
        DetectionModel::Ideal => {
            let a = make_slit_state(alice_mask)?;
            let b = make_slit_state(bob_mask)?;
            detection_probability_ideal(&a, &b)
        }
        DetectionModel::Optical(setup) => pinhole_click_probability(setup, alice_mask, bob_mask),
    }
}

/// Simulates one gated pulse: jitters the relative phases (one draw for the
/// whole optical chain), computes the projection under the chosen model,
/// folds in darks and background, and draws the click.
///
/// Deterministic given the rng state; with zero jitter the only draw is the
/// final Bernoulli.
pub fn simulate_pulse<R: Rng>(
    cfg: &PulseConfig,
    noise: &NoiseConfig,
    alice_mask: &PhaseMask,
    bob_mask: &PhaseMask,
    model: &DetectionModel,
    rng: &mut R,
) -> Result<bool> {
    if alice_mask.dim() != bob_mask.dim() {
        return Err(Error::DimensionMismatch {
            left: alice_mask.dim(),
            right: bob_mask.dim(),
        });
    }
    let noisy_alice = apply_phase_noise(alice_mask, noise, rng);
    let p = projection_probability(model, &noisy_alice, bob_mask)?;
    let p_click = total_click_probability(cfg, noise, p);
    Ok(rng.random::<f64>() < p_click)
}
