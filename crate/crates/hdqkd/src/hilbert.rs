//! Qudit states in the slit basis, phase masks, and mutually unbiased bases.
//!
//! A photon transmitted through `D` parallel slits spans a `D`-dimensional
//! Hilbert space. States are prepared by programming per-slit phases
//! (and, in general, opening or closing slits). The built-in family of two
//! 16-dimensional mutually unbiased bases needs only 0/pi phase modulation:
//! its states are the rows of two +-1 matrices scaled by 1/sqrt(16), which
//! lets every algebraic property be verified in exact integer arithmetic.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mub_data::{MUB16_ALPHA, MUB16_ALPHA_PRIME};

const NORM_TOL: f64 = 1e-12;

/// Label for one of the two bases in a MUB pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "alpha_prime")]
    AlphaPrime,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Alpha, Basis::AlphaPrime];

    pub fn index(self) -> usize {
        match self {
            Basis::Alpha => 0,
            Basis::AlphaPrime => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Alpha => "alpha",
            Basis::AlphaPrime => "alpha_prime",
        }
    }

    pub fn parse(s: &str) -> Result<Basis> {
        match s {
            "alpha" | "a" => Ok(Basis::Alpha),
            "alpha_prime" | "alpha'" | "ap" | "b" => Ok(Basis::AlphaPrime),
            other => Err(Error::Parse(format!("unknown basis label {other:?}"))),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A unit-norm qudit state: `D` complex amplitudes in the slit basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, checking unit normalization.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("state must have dim >= 1".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "state not normalized: |psi|^2 = {norm_sq}"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// Per-slit phase settings plus open/closed flags.
///
/// The protocol states use all-open masks with phases 0 or pi; arbitrary
/// real phases are admitted for noise injection and general diffraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMask {
    phases: Vec<f64>,
    open: Vec<bool>,
}

impl PhaseMask {
    /// All slits open with the given phases.
    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidParameter("mask must have dim >= 1".into()));
        }
        let open = vec![true; phases.len()];
        Ok(Self { phases, open })
    }

    /// General mask with explicit open/closed flags.
    pub fn with_slits(phases: Vec<f64>, open: Vec<bool>) -> Result<Self> {
        if phases.len() != open.len() {
            return Err(Error::DimensionMismatch {
                left: phases.len(),
                right: open.len(),
            });
        }
        if phases.is_empty() {
            return Err(Error::InvalidParameter("mask must have dim >= 1".into()));
        }
        Ok(Self { phases, open })
    }

    /// All-open, all-zero-phase mask (the uniform superposition).
    pub fn uniform(dim: usize) -> Self {
        Self {
            phases: vec![0.0; dim],
            open: vec![true; dim],
        }
    }

    /// Maps integer sign entries to a mask: +1 -> phase 0, -1 -> phase pi,
    /// 0 -> closed slit.
    pub fn from_signs(signs: &[i32]) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidParameter("mask must have dim >= 1".into()));
        }
        let mut phases = Vec::with_capacity(signs.len());
        let mut open = Vec::with_capacity(signs.len());
        for &s in signs {
            match s {
                1 => {
                    phases.push(0.0);
                    open.push(true);
                }
                -1 => {
                    phases.push(PI);
                    open.push(true);
                }
                0 => {
                    phases.push(0.0);
                    open.push(false);
                }
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "sign entry must be -1, 0 or +1, got {other}"
                    )))
                }
            }
        }
        Ok(Self { phases, open })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn open_flags(&self) -> &[bool] {
        &self.open
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Per-slit phase addition; a slit is open only if open in both masks.
    pub fn combine(&self, other: &PhaseMask) -> Result<PhaseMask> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let phases = self
            .phases
            .iter()
            .zip(&other.phases)
            .map(|(a, b)| a + b)
            .collect();
        let open = self
            .open
            .iter()
            .zip(&other.open)
            .map(|(a, b)| a & b)
            .collect();
        Ok(PhaseMask { phases, open })
    }

    /// Adds a constant phase offset to every open slit.
    pub fn with_global_phase(&self, offset: f64) -> PhaseMask {
        PhaseMask {
            phases: self.phases.iter().map(|p| p + offset).collect(),
            open: self.open.clone(),
        }
    }
}

/// The coherent superposition produced by illuminating a mask uniformly:
/// amplitude `e^{i phi_l} / sqrt(n_open)` at each open slit, 0 at closed ones.
pub fn make_slit_state(mask: &PhaseMask) -> Result<StateVector> {
    let n_open = mask.open_count();
    if n_open == 0 {
        return Err(Error::DegenerateState);
    }
    let scale = 1.0 / (n_open as f64).sqrt();
    let amplitudes = mask
        .phases
        .iter()
        .zip(&mask.open)
        .map(|(&phi, &open)| {
            if open {
                Complex64::from_polar(scale, phi)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    StateVector::new(amplitudes)
}

/// `<a|b> = sum conj(a_l) b_l`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Probability that Bob's projective measurement onto `bob` clicks when the
/// photon arrives in `alice`: `|<bob|alice>|^2`.
pub fn detection_probability_ideal(alice: &StateVector, bob: &StateVector) -> Result<f64> {
    Ok(inner_product(bob, alice)?.norm_sqr())
}

/// Two orthonormal bases of `D` states each, labeled alpha and alpha_prime,
/// carried together with their unscaled integer matrices so algebraic checks
/// stay exact.
#[derive(Debug, Clone)]
pub struct MubFamily {
    dim: usize,
    bases: [Vec<StateVector>; 2],
    integer_form: [Vec<Vec<i32>>; 2],
}

impl MubFamily {
    /// Builds a family from two integer matrices whose rows are the
    /// (unnormalized) basis states. Entries may be -1, 0 or +1; each state
    /// is scaled by the inverse of its Euclidean row norm.
    ///
    /// Shape is validated here; algebraic properties are checked by
    /// [`verify_mub`], which reports rather than rejects.
    pub fn from_integer_rows(alpha: Vec<Vec<i32>>, alpha_prime: Vec<Vec<i32>>) -> Result<Self> {
        let dim = alpha.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("empty basis".into()));
        }
        for (label, m) in [("alpha", &alpha), ("alpha_prime", &alpha_prime)] {
            if m.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "{label} has {} rows, expected {dim}",
                    m.len()
                )));
            }
            for (k, row) in m.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::InvalidParameter(format!(
                        "{label} row {k} has {} entries, expected {dim}",
                        row.len()
                    )));
                }
                if row.iter().all(|&v| v == 0) {
                    return Err(Error::InvalidParameter(format!(
                        "{label} row {k} is all zeros"
                    )));
                }
                if row.iter().any(|&v| !(-1..=1).contains(&v)) {
                    return Err(Error::InvalidParameter(format!(
                        "{label} row {k} has an entry outside -1..=1"
                    )));
                }
            }
        }
        let to_states = |m: &Vec<Vec<i32>>| -> Result<Vec<StateVector>> {
            m.iter()
                .map(|row| {
                    let norm = (row.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt();
                    StateVector::new(
                        row.iter()
                            .map(|&v| Complex64::new(v as f64 / norm, 0.0))
                            .collect(),
                    )
                })
                .collect()
        };
        let bases = [to_states(&alpha)?, to_states(&alpha_prime)?];
        Ok(Self {
            dim,
            bases,
            integer_form: [alpha, alpha_prime],
        })
    }

    /// The built-in 16-dimensional pair. Rows are the basis states, scaled by
    /// 1/sqrt(16); every entry is +-1 so only 0/pi phase masks are needed.
    pub fn builtin_16() -> Self {
        let alpha = MUB16_ALPHA.iter().map(|r| r.to_vec()).collect();
        let alpha_prime = MUB16_ALPHA_PRIME.iter().map(|r| r.to_vec()).collect();
        Self::from_integer_rows(alpha, alpha_prime).expect("built-in matrices are well-formed")
    }

    /// Canonical qubit pair {computational, diagonal} for low-dimensional tests.
    pub fn qubit_test_family() -> Self {
        Self::from_integer_rows(
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1, 1], vec![1, -1]],
        )
        .expect("qubit family is well-formed")
    }

    /// Family for a supported protocol dimension (16 or 2).
    pub fn for_dim(dim: usize) -> Result<Self> {
        match dim {
            16 => Ok(Self::builtin_16()),
            2 => Ok(Self::qubit_test_family()),
            other => Err(Error::InvalidParameter(format!(
                "unsupported dimension {other}: expected 2 or 16"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, basis: Basis, k: usize) -> &StateVector {
        &self.bases[basis.index()][k]
    }

    pub fn states(&self, basis: Basis) -> &[StateVector] {
        &self.bases[basis.index()]
    }

    pub fn integer_rows(&self, basis: Basis) -> &[Vec<i32>] {
        &self.integer_form[basis.index()]
    }

    /// The phase-mask recipe for a basis state: +1 -> 0, -1 -> pi, 0 -> closed.
    pub fn mask(&self, basis: Basis, k: usize) -> PhaseMask {
        PhaseMask::from_signs(&self.integer_form[basis.index()][k])
            .expect("stored rows are valid sign vectors")
    }

    /// Dumps both integer matrices as whitespace-separated rows, one matrix
    /// per block, blocks separated by a blank line. Audit format.
    pub fn to_grid_text(&self) -> String {
        let fmt_block = |m: &Vec<Vec<i32>>| {
            m.iter()
                .map(|row| {
                    row.iter()
                        .map(|v| format!("{v:>2}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
                .join("\n")
        };
        format!(
            "{}\n\n{}\n",
            fmt_block(&self.integer_form[0]),
            fmt_block(&self.integer_form[1])
        )
    }

    /// Parses the [`to_grid_text`] format.
    pub fn from_grid_text(text: &str) -> Result<Self> {
        let mut blocks: Vec<Vec<Vec<i32>>> = vec![Vec::new()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                if !blocks.last().unwrap().is_empty() {
                    blocks.push(Vec::new());
                }
                continue;
            }
            let row: Vec<i32> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i32>().map_err(|_| {
                        Error::Parse(format!("grid line {}: bad entry {tok:?}", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            blocks.last_mut().unwrap().push(row);
        }
        blocks.retain(|b| !b.is_empty());
        if blocks.len() != 2 {
            return Err(Error::Parse(format!(
                "expected 2 matrix blocks separated by a blank line, found {}",
                blocks.len()
            )));
        }
        let mut it = blocks.into_iter();
        Self::from_integer_rows(it.next().unwrap(), it.next().unwrap())
    }
}

/// One offending pair found by [`verify_mub`].
#[derive(Debug, Clone, PartialEq)]
pub struct MubViolation {
    pub basis_a: Basis,
    pub index_a: usize,
    pub basis_b: Basis,
    pub index_b: usize,
    pub expected_overlap_sq: f64,
    pub actual_overlap_sq: f64,
}

impl fmt::Display for MubViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}[{}], {}[{}]): |<.|.>|^2 = {} expected {}",
            self.basis_a,
            self.index_a,
            self.basis_b,
            self.index_b,
            self.actual_overlap_sq,
            self.expected_overlap_sq
        )
    }
}

/// Result of the exact integer verification of a MUB family.
#[derive(Debug, Clone)]
pub struct MubVerification {
    pub dim: usize,
    pub passed: bool,
    /// Ordered within-basis pairs checked (2 * D^2).
    pub basis_pairs_checked: usize,
    /// Cross-basis pairs checked (D^2).
    pub cross_pairs_checked: usize,
    /// Largest |actual - expected| squared-overlap over all pairs.
    pub worst_deviation: f64,
    pub failures: Vec<MubViolation>,
}

impl fmt::Display for MubVerification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            write!(
                f,
                "PASS 2 bases (D = {}), {} within-basis pairs orthonormal, {} cross pairs unbiased at 1/{} (exact integer arithmetic)",
                self.dim, self.basis_pairs_checked, self.cross_pairs_checked, self.dim
            )
        } else {
            writeln!(
                f,
                "FAIL (D = {}): {} violating pair(s), worst deviation {:.6}",
                self.dim,
                self.failures.len(),
                self.worst_deviation
            )?;
            for v in &self.failures {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

/// Checks orthonormality of each basis and unbiasedness across bases using
/// exact integer dot products; failures are reported, never thrown.
///
/// With rows scaled by their own norms, the conditions become
///   within a basis: `row_i . row_j = 0` for `i != j`,
///   across bases:   `D * (row_i . row_j)^2 = |row_i|^2 * |row_j|^2`,
/// both exact in integers. For the built-in +-1 matrices the cross condition
/// reduces to `|row_i . row_j| = sqrt(D) = 4`.
pub fn verify_mub(family: &MubFamily) -> MubVerification {
    let dim = family.dim();
    let dot = |a: &[i32], b: &[i32]| -> i64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| i64::from(x) * i64::from(y))
            .sum()
    };
    let norm_sq = |a: &[i32]| -> i64 { dot(a, a) };

    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut basis_pairs = 0usize;
    let mut cross_pairs = 0usize;

    for basis in Basis::BOTH {
        let rows = family.integer_rows(basis);
        for i in 0..dim {
            for j in 0..dim {
                basis_pairs += 1;
                let d = dot(&rows[i], &rows[j]);
                let (ni, nj) = (norm_sq(&rows[i]), norm_sq(&rows[j]));
                let expected = if i == j { 1.0 } else { 0.0 };
                let exact_ok = if i == j { d == ni } else { d == 0 };
                let actual = (d * d) as f64 / (ni * nj) as f64;
                worst = worst.max((actual - expected).abs());
                if !exact_ok {
                    failures.push(MubViolation {
                        basis_a: basis,
                        index_a: i,
                        basis_b: basis,
                        index_b: j,
                        expected_overlap_sq: expected,
                        actual_overlap_sq: actual,
                    });
                }
            }
        }
    }

    let rows_a = family.integer_rows(Basis::Alpha);
    let rows_b = family.integer_rows(Basis::AlphaPrime);
    for (i, row_a) in rows_a.iter().enumerate() {
        for (j, row_b) in rows_b.iter().enumerate() {
            cross_pairs += 1;
            let d = dot(row_a, row_b);
            let (ni, nj) = (norm_sq(row_a), norm_sq(row_b));
            let exact_ok = (dim as i64) * d * d == ni * nj;
            let actual = (d * d) as f64 / (ni * nj) as f64;
            let expected = 1.0 / dim as f64;
            worst = worst.max((actual - expected).abs());
            if !exact_ok {
                failures.push(MubViolation {
                    basis_a: Basis::Alpha,
                    index_a: i,
                    basis_b: Basis::AlphaPrime,
                    index_b: j,
                    expected_overlap_sq: expected,
                    actual_overlap_sq: actual,
                });
            }
        }
    }

    MubVerification {
        dim,
        passed: failures.is_empty(),
        basis_pairs_checked: basis_pairs,
        cross_pairs_checked: cross_pairs,
        worst_deviation: worst,
        failures,
    }
}

/// Convenience constructor for the built-in family, matching the toolkit's
/// main entry point.
pub fn builtin_mubs_16() -> MubFamily {
    MubFamily::builtin_16()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn uniform_mask_gives_uniform_amplitudes() {
        let state = make_slit_state(&PhaseMask::uniform(16)).unwrap();
        for a in state.amplitudes() {
            assert_close(a.re, 0.25, 1e-15);
            assert_close(a.im, 0.0, 1e-15);
        }
    }

    #[test]
    fn two_slit_sign_flip() {
        let mask = PhaseMask::from_phases(vec![0.0, PI]).unwrap();
        let state = make_slit_state(&mask).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_close(state.amplitudes()[0].re, s, 1e-15);
        assert_close(state.amplitudes()[1].re, -s, 1e-12);
        assert_close(state.amplitudes()[1].im, 0.0, 1e-12);
    }

    #[test]
    fn all_slits_closed_is_degenerate() {
        let mask = PhaseMask::with_slits(vec![0.0, 0.0], vec![false, false]).unwrap();
        assert!(matches!(
            make_slit_state(&mask),
            Err(Error::DegenerateState)
        ));
    }

    #[test]
    fn mask_from_matrix_row_reproduces_basis_state() {
        let family = builtin_mubs_16();
        for basis in Basis::BOTH {
            for k in 0..16 {
                let from_mask = make_slit_state(&family.mask(basis, k)).unwrap();
                let stored = family.state(basis, k);
                let overlap = inner_product(&from_mask, stored).unwrap();
                assert_close(overlap.norm(), 1.0, 1e-12);
            }
        }
    }

    #[test]
    fn inner_product_self_is_one() {
        let family = builtin_mubs_16();
        let ip = inner_product(family.state(Basis::Alpha, 3), family.state(Basis::Alpha, 3))
            .unwrap();
        assert_close(ip.re, 1.0, 1e-15);
        assert_close(ip.im, 0.0, 1e-15);
    }

    #[test]
    fn inner_product_distinct_same_basis_is_zero() {
        let family = builtin_mubs_16();
        for k in 1..16 {
            let ip =
                inner_product(family.state(Basis::Alpha, 0), family.state(Basis::Alpha, k))
                    .unwrap();
            assert_close(ip.norm(), 0.0, 1e-12);
        }
    }

    #[test]
    fn inner_product_cross_basis_has_modulus_quarter() {
        let family = builtin_mubs_16();
        for k in 0..16 {
            for kp in 0..16 {
                let ip = inner_product(
                    family.state(Basis::Alpha, k),
                    family.state(Basis::AlphaPrime, kp),
                )
                .unwrap();
                assert_close(ip.norm(), 0.25, 1e-12);
            }
        }
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let a = make_slit_state(&PhaseMask::uniform(2)).unwrap();
        let b = make_slit_state(&PhaseMask::uniform(16)).unwrap();
        assert!(matches!(
            inner_product(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn builtin_alpha_prime_row0_is_uniform() {
        let family = builtin_mubs_16();
        for a in family.state(Basis::AlphaPrime, 0).amplitudes() {
            assert_close(a.re, 0.25, 1e-15);
        }
    }

    #[test]
    fn builtin_integer_entries_are_pm_one() {
        let family = builtin_mubs_16();
        for basis in Basis::BOTH {
            for row in family.integer_rows(basis) {
                assert!(row.iter().all(|&v| v == 1 || v == -1));
            }
        }
    }

    #[test]
    fn builtin_family_verifies_exactly() {
        let report = verify_mub(&builtin_mubs_16());
        assert!(report.passed, "{report}");
        assert_eq!(report.cross_pairs_checked, 256);
        assert_eq!(report.basis_pairs_checked, 512);
        assert_eq!(report.worst_deviation, 0.0);
        // |row_a . row_b| = 4 for every cross pair.
        let family = builtin_mubs_16();
        for i in 0..16 {
            for j in 0..16 {
                let dot: i64 = family.integer_rows(Basis::Alpha)[i]
                    .iter()
                    .zip(&family.integer_rows(Basis::AlphaPrime)[j])
                    .map(|(&x, &y)| i64::from(x) * i64::from(y))
                    .sum();
                assert_eq!(dot.abs(), 4, "cross pair ({i},{j})");
            }
        }
    }

    #[test]
    fn flipped_sign_fails_and_names_pair() {
        let family = builtin_mubs_16();
        let mut alpha: Vec<Vec<i32>> = family.integer_rows(Basis::Alpha).to_vec();
        let alpha_prime: Vec<Vec<i32>> = family.integer_rows(Basis::AlphaPrime).to_vec();
        alpha[5][3] = -alpha[5][3];
        let broken = MubFamily::from_integer_rows(alpha, alpha_prime).unwrap();
        let report = verify_mub(&broken);
        assert!(!report.passed);
        assert!(report
            .failures
            .iter()
            .any(|v| v.index_a == 5 || v.index_b == 5));
        assert!(report.worst_deviation > 0.0);
    }

    #[test]
    fn qubit_family_verifies() {
        let report = verify_mub(&MubFamily::qubit_test_family());
        assert!(report.passed, "{report}");
        assert_eq!(report.dim, 2);
    }

    #[test]
    fn detection_probability_matched_orthogonal_cross() {
        let family = builtin_mubs_16();
        let same = detection_probability_ideal(
            family.state(Basis::Alpha, 13),
            family.state(Basis::Alpha, 13),
        )
        .unwrap();
        assert_close(same, 1.0, 1e-15);
        let wrong = detection_probability_ideal(
            family.state(Basis::Alpha, 13),
            family.state(Basis::Alpha, 7),
        )
        .unwrap();
        assert_close(wrong, 0.0, 1e-15);
        let cross = detection_probability_ideal(
            family.state(Basis::Alpha, 13),
            family.state(Basis::AlphaPrime, 13),
        )
        .unwrap();
        assert_close(cross, 1.0 / 16.0, 1e-15);
    }

    #[test]
    fn cross_basis_probabilities_are_complete() {
        let family = builtin_mubs_16();
        for k in 0..16 {
            let total: f64 = (0..16)
                .map(|kp| {
                    detection_probability_ideal(
                        family.state(Basis::Alpha, k),
                        family.state(Basis::AlphaPrime, kp),
                    )
                    .unwrap()
                })
                .sum();
            assert_close(total, 1.0, 1e-12);
        }
    }

    #[test]
    fn grid_text_round_trip() {
        let family = builtin_mubs_16();
        let text = family.to_grid_text();
        let parsed = MubFamily::from_grid_text(&text).unwrap();
        assert_eq!(parsed.integer_rows(Basis::Alpha), family.integer_rows(Basis::Alpha));
        assert_eq!(
            parsed.integer_rows(Basis::AlphaPrime),
            family.integer_rows(Basis::AlphaPrime)
        );
        assert!(verify_mub(&parsed).passed);
    }

    #[test]
    fn grid_text_rejects_bad_input() {
        assert!(MubFamily::from_grid_text("1 1\n1 -1\n").is_err());
        assert!(MubFamily::from_grid_text("1 x\n\n1 1\n").is_err());
    }

    proptest! {
        #[test]
        fn slit_states_are_unit_norm(
            phases in proptest::collection::vec(-10.0_f64..10.0, 1..24),
            seed in any::<u64>(),
        ) {
            // Derive open flags from the seed, keeping at least one slit open.
            let mut open: Vec<bool> = phases
                .iter()
                .enumerate()
                .map(|(i, _)| (seed >> (i % 64)) & 1 == 1)
                .collect();
            if !open.iter().any(|&o| o) {
                open[0] = true;
            }
            let mask = PhaseMask::with_slits(phases, open).unwrap();
            let state = make_slit_state(&mask).unwrap();
            let norm_sq: f64 = state.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            prop_assert!((norm_sq - 1.0).abs() < 1e-12);
        }

        #[test]
        fn detection_probability_symmetric_and_phase_invariant(
            pa in proptest::collection::vec(0.0_f64..(2.0 * PI), 4),
            pb in proptest::collection::vec(0.0_f64..(2.0 * PI), 4),
            global in 0.0_f64..(2.0 * PI),
        ) {
            let a = make_slit_state(&PhaseMask::from_phases(pa.clone()).unwrap()).unwrap();
            let b = make_slit_state(&PhaseMask::from_phases(pb).unwrap()).unwrap();
            let p_ab = detection_probability_ideal(&a, &b).unwrap();
            let p_ba = detection_probability_ideal(&b, &a).unwrap();
            prop_assert!((p_ab - p_ba).abs() < 1e-12);

            let shifted: Vec<f64> = pa.iter().map(|p| p + global).collect();
            let a_shift = make_slit_state(&PhaseMask::from_phases(shifted).unwrap()).unwrap();
            let p_shift = detection_probability_ideal(&a_shift, &b).unwrap();
            prop_assert!((p_ab - p_shift).abs() < 1e-12);
        }
    }
}
