//! Physical detection model: multi-slit Fraunhofer diffraction at the lens
//! focal plane, integrated over a finite pinhole.
//!
//! The photon crosses Alice's mask and then Bob's, so their per-slit phases
//! add. A lens maps the far field onto its focal plane, where the amplitude
//! at transverse coordinate `u` is the slit-array Fourier sum under a
//! single-slit sinc envelope. The detector is a pinhole centered on the
//! optical axis; its click probability is the pinhole-integrated intensity
//! normalized to the all-phases-equal reference, which maps the matched-mask
//! case of the built-in bases to exactly 1. For Bob's 0/pi masks the additive
//! phase convention coincides with projecting onto his conjugate state.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::PhaseMask;

/// Relative tolerance for the resolution-doubling convergence check.
const QUADRATURE_REL_TOL: f64 = 1e-6;

/// Slit geometry and detection optics.
///
/// Defaults model a modulator with 32 um pixels: slits two pixels wide
/// separated by one pixel, 690 nm light, a 10 um pinhole, and a 150 mm focal
/// length chosen so the central interference lobe (~67 um) comfortably
/// contains the pinhole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalSetup {
    pub dim: usize,
    pub slit_width_m: f64,
    pub slit_pitch_m: f64,
    pub wavelength_m: f64,
    pub focal_length_m: f64,
    pub pinhole_diameter_m: f64,
    pub samples_per_lobe: usize,
}

impl OpticalSetup {
    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            dim,
            slit_width_m: 64e-6,
            slit_pitch_m: 96e-6,
            wavelength_m: 690e-9,
            focal_length_m: 0.150,
            pinhole_diameter_m: 10e-6,
            samples_per_lobe: 64,
        }
    }

    pub fn default_16() -> Self {
        Self::default_for_dim(16)
    }

    /// Width of the central interference lobe, `lambda f / (D p)`.
    pub fn central_lobe_width_m(&self) -> f64 {
        self.wavelength_m * self.focal_length_m / (self.dim as f64 * self.slit_pitch_m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("optics: dim must be >= 1".into()));
        }
        for (name, v) in [
            ("slit_width_m", self.slit_width_m),
            ("slit_pitch_m", self.slit_pitch_m),
            ("wavelength_m", self.wavelength_m),
            ("focal_length_m", self.focal_length_m),
            ("pinhole_diameter_m", self.pinhole_diameter_m),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "optics: {name} must be positive, got {v}"
                )));
            }
        }
        if self.slit_pitch_m <= self.slit_width_m {
            return Err(Error::InvalidParameter(
                "optics: slit_pitch_m must exceed slit_width_m".into(),
            ));
        }
        if self.samples_per_lobe == 0 {
            return Err(Error::InvalidParameter(
                "optics: samples_per_lobe must be >= 1".into(),
            ));
        }
        // The model targets the regime where the pinhole sits well inside the
        // central interference lobe.
        if self.pinhole_diameter_m >= self.central_lobe_width_m() {
            return Err(Error::InvalidParameter(format!(
                "optics: pinhole ({:.3e} m) must be smaller than the central lobe ({:.3e} m)",
                self.pinhole_diameter_m,
                self.central_lobe_width_m()
            )));
        }
        Ok(())
    }

    /// Slit centers symmetric about the axis: `x_l = (l - (D-1)/2) * pitch`.
    fn slit_centers(&self) -> Vec<f64> {
        let half = (self.dim as f64 - 1.0) / 2.0;
        (0..self.dim)
            .map(|l| (l as f64 - half) * self.slit_pitch_m)
            .collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-9 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Focal-plane amplitude of the diffracted field at transverse coordinate `u`
/// (unnormalized):
/// `A(u) = sinc(pi w u / (lambda f)) * sum_l t_l e^{i phi_l} e^{-i 2 pi x_l u / (lambda f)}`.
pub fn focal_plane_amplitude(
    setup: &OpticalSetup,
    combined_mask: &PhaseMask,
    u: f64,
) -> Result<Complex64> {
    setup.validate()?;
    if combined_mask.dim() != setup.dim {
        return Err(Error::DimensionMismatch {
            left: combined_mask.dim(),
            right: setup.dim,
        });
    }
    Ok(amplitude_unchecked(setup, combined_mask, u))
}

fn amplitude_unchecked(setup: &OpticalSetup, mask: &PhaseMask, u: f64) -> Complex64 {
    let lam_f = setup.wavelength_m * setup.focal_length_m;
    let envelope = sinc(PI * setup.slit_width_m * u / lam_f);
    let centers = setup.slit_centers();
    let mut sum = Complex64::new(0.0, 0.0);
    for ((&phi, &open), &x) in mask
        .phases()
        .iter()
        .zip(mask.open_flags())
        .zip(centers.iter())
    {
        if open {
            sum += Complex64::from_polar(1.0, phi - 2.0 * PI * x * u / lam_f);
        }
    }
    envelope * sum
}

fn intensity(setup: &OpticalSetup, mask: &PhaseMask, u: f64) -> f64 {
    amplitude_unchecked(setup, mask, u).norm_sqr()
}

/// Composite Simpson over [a, b] with n intervals (n even, >= 2).
fn simpson(setup: &OpticalSetup, mask: &PhaseMask, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = intensity(setup, mask, a) + intensity(setup, mask, b);
    for i in 1..n {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * intensity(setup, mask, a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integrates the intensity over [a, b], asserting convergence by doubling
/// the resolution once. `floor` guards the relative test for near-zero
/// integrals (pass the scale of the reference integral).
fn converged_integral(
    setup: &OpticalSetup,
    mask: &PhaseMask,
    a: f64,
    b: f64,
    floor: f64,
) -> Result<f64> {
    let lobe = setup.central_lobe_width_m();
    let h_target = lobe / setup.samples_per_lobe as f64;
    let mut n = ((b - a) / h_target).ceil() as usize;
    n = n.max(4);
    if !n.is_multiple_of(2) {
        n += 1;
    }
    let coarse = simpson(setup, mask, a, b, n);
    let fine = simpson(setup, mask, a, b, 2 * n);
    let achieved = (fine - coarse).abs() / fine.abs().max(floor);
    if achieved > QUADRATURE_REL_TOL {
        return Err(Error::QuadratureNotConverged {
            achieved,
            required: QUADRATURE_REL_TOL,
        });
    }
    Ok(fine)
}

/// Probability that the pinhole detector clicks for the given Alice/Bob mask
/// pair: pinhole-integrated intensity of the combined mask divided by that of
/// the all-open zero-phase reference.
pub fn pinhole_click_probability(
    setup: &OpticalSetup,
    alice_mask: &PhaseMask,
    bob_mask: &PhaseMask,
) -> Result<f64> {
    setup.validate()?;
    if alice_mask.dim() != bob_mask.dim() {
        return Err(Error::DimensionMismatch {
            left: alice_mask.dim(),
            right: bob_mask.dim(),
        });
    }
    if alice_mask.dim() != setup.dim {
        return Err(Error::DimensionMismatch {
            left: alice_mask.dim(),
            right: setup.dim,
        });
    }
    let combined = alice_mask.combine(bob_mask)?;
    let half = setup.pinhole_diameter_m / 2.0;
    let reference = PhaseMask::uniform(setup.dim);
    let denom = converged_integral(setup, &reference, -half, half, 0.0)?;
    let num = converged_integral(setup, &combined, -half, half, denom)?;
    Ok(num / denom)
}

/// A sampled focal-plane intensity curve, peak-normalized for plotting.
#[derive(Debug, Clone)]
pub struct PatternCurve {
    /// (u in meters, intensity normalized to peak 1) samples.
    pub samples: Vec<(f64, f64)>,
    /// Pinhole boundary positions for annotation (+-5 um by default).
    pub pinhole_min_m: f64,
    pub pinhole_max_m: f64,
}

impl PatternCurve {
    /// CSV with a pinhole-annotation comment header and
    /// `u_meters,intensity` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# pinhole_boundary_m = {:e},{:e}\n",
            self.pinhole_min_m, self.pinhole_max_m
        ));
        out.push_str("u_meters,intensity\n");
        for (u, i) in &self.samples {
            out.push_str(&format!("{u:e},{i:e}\n"));
        }
        out
    }
}

/// Samples `|A(u)|^2` for the combined mask over a span centered on the axis.
pub fn render_pattern(
    setup: &OpticalSetup,
    alice_mask: &PhaseMask,
    bob_mask: &PhaseMask,
    span_m: f64,
    n_points: usize,
) -> Result<PatternCurve> {
    setup.validate()?;
    if n_points < 2 {
        return Err(Error::InvalidParameter(
            "render_pattern: n_points must be >= 2".into(),
        ));
    }
    if !span_m.is_finite() || span_m <= 0.0 {
        return Err(Error::InvalidParameter(
            "render_pattern: span must be positive".into(),
        ));
    }
    let combined = alice_mask.combine(bob_mask)?;
    if combined.dim() != setup.dim {
        return Err(Error::DimensionMismatch {
            left: combined.dim(),
            right: setup.dim,
        });
    }
    let mut samples: Vec<(f64, f64)> = (0..n_points)
        .map(|i| {
            let u = -span_m / 2.0 + span_m * i as f64 / (n_points - 1) as f64;
            (u, intensity(setup, &combined, u))
        })
        .collect();
    let peak = samples.iter().map(|&(_, v)| v).fold(0.0_f64, f64::max);
    if peak > 0.0 {
        for s in &mut samples {
            s.1 /= peak;
        }
    }
    let half = setup.pinhole_diameter_m / 2.0;
    Ok(PatternCurve {
        samples,
        pinhole_min_m: -half,
        pinhole_max_m: half,
    })
}
