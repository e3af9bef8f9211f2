//! Avalanche photodetector model.
//!
//! A detector is in one of two regimes, carried across gates:
//!
//! * linear (normal) mode: a gate with N incident photons clicks with
//!   probability 1 - (1 - efficiency)^N, OR-combined with the per-gate dark
//!   count probability;
//! * blinded mode: entered one gate after receiving CW light at or above
//!   `blind_threshold`. The detector loses single-photon sensitivity and
//!   produces no dark counts; it clicks exactly when the bright-pulse dose
//!   reaches `click_threshold`.
//!
//! The one-gate blinding latency means a previously dark detector hit by
//! strong CW still clicks in its first exposed gate with linear-mode
//! statistics, which is what turns basis switching into coincidences on the
//! mirror receiver.

use serde::{Deserialize, Serialize};

use crate::optics::Dose;
use crate::rng::RandomSource;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Detector parameters. All thresholds are photons per gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig<F: Scalar> {
    pub efficiency: F,
    pub dark_prob: F,
    pub blind_threshold: F,
    pub click_threshold: F,
    /// Optional superlinear response exponent; 1 disables the effect.
    pub superlinear_exponent: F,
}

impl<F: Scalar> Default for DetectorConfig<F> {
    fn default() -> Self {
        DetectorConfig {
            efficiency: F::real(0.25),
            dark_prob: F::real(1e-5),
            blind_threshold: F::real(100.0),
            click_threshold: F::real(50.0),
            superlinear_exponent: F::one(),
        }
    }
}

impl<F: Scalar> DetectorConfig<F> {
    /// Range checks with field-level messages; `prefix` names the config
    /// section in errors (e.g. "detectors").
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let unit = |name: &str, v: F| -> Result<()> {
            if v < F::zero() || v > F::one() || !v.is_finite() {
                return Err(Error::invalid(
                    &format!("{prefix}.{name}"),
                    format!("{v} is outside [0, 1]"),
                ));
            }
            Ok(())
        };
        unit("efficiency", self.efficiency)?;
        unit("dark_prob", self.dark_prob)?;
        for (name, v) in [
            ("blind_threshold", self.blind_threshold),
            ("click_threshold", self.click_threshold),
        ] {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::invalid(
                    &format!("{prefix}.{name}"),
                    format!("{v} must be a positive photon count"),
                ));
            }
        }
        if self.superlinear_exponent < F::one() || !self.superlinear_exponent.is_finite() {
            return Err(Error::invalid(
                &format!("{prefix}.superlinear_exponent"),
                format!("{} must be >= 1", self.superlinear_exponent),
            ));
        }
        Ok(())
    }
}

/// Per-detector regime flag carried between gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectorState {
    pub blinded: bool,
}

/// Click probability of an efficiency-`eps` detector hit by `n` photons
/// (mean photon number, non-integer allowed).
pub fn detection_probability<F: Scalar>(eps: F, n: F) -> Result<F> {
    if eps < F::zero() || eps > F::one() || !eps.is_finite() {
        return Err(Error::invalid(
            "efficiency",
            format!("{eps} is outside [0, 1]"),
        ));
    }
    if n < F::zero() || !n.is_finite() {
        return Err(Error::invalid("photons", format!("{n} must be >= 0")));
    }
    Ok(detection_probability_unchecked(eps, n))
}

#[inline]
fn detection_probability_unchecked<F: Scalar>(eps: F, n: F) -> F {
    if n == F::zero() {
        return F::zero();
    }
    F::one() - (F::one() - eps).powf(n)
}

/// Coincident-detection probability of two independent detectors, each
/// clicking with probability `p_d`, on the half of gates where the basis
/// switch exposes them: p = p_d^2 / 2.
pub fn coincidence_probability<F: Scalar>(p_d: F) -> Result<F> {
    if p_d < F::zero() || p_d > F::one() || !p_d.is_finite() {
        return Err(Error::invalid("p_d", format!("{p_d} is outside [0, 1]")));
    }
    Ok(F::half() * p_d * p_d)
}

/// Advances one detector through one gate. Returns the click flag and the
/// state entering the next gate. Consumes exactly one draw in linear mode
/// and none while blinded (blinded clicks are deterministic in the dose).
#[inline]
pub fn detect<F: Scalar>(
    config: &DetectorConfig<F>,
    state: DetectorState,
    dose: &Dose<F>,
    rng: &mut RandomSource,
) -> (bool, DetectorState) {
    let next = DetectorState {
        blinded: dose.cw >= config.blind_threshold,
    };
    let click = if state.blinded {
        dose.bright >= config.click_threshold
    } else {
        let n = dose.cw + dose.bright + dose.signal;
        let mut p_photon = detection_probability_unchecked(config.efficiency, n);
        if config.superlinear_exponent > F::one() {
            p_photon = p_photon
                .powf(config.superlinear_exponent.recip())
                .min(F::one());
        }
        let p = F::one() - (F::one() - p_photon) * (F::one() - config.dark_prob);
        rng.bernoulli(p)
    };
    (click, next)
}
