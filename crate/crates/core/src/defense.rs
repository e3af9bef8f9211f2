//! Coincidence monitoring and the key-length bound it buys.
//!
//! Blinding attacks against the mirrored receiver leave a loud signature:
//! whenever the selected basis flips, the freshly exposed detector pair
//! sits in Geiger mode under full CW illumination and both detectors fire.
//! An honest link produces coincidences only through dark counts, so the
//! monitor compares the observed double-click rate against a dark-only
//! calibration and converts the excess into an upper bound on the bits an
//! eavesdropper can have forced. Two coincidences accompany each acquired
//! bit on average, hence the division by two.

use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::eve::AttackKind;
use crate::protocol::{run_session, SessionTranscript};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Binary entropy in bits. Defined as 0 at both endpoints.
pub fn binary_entropy<F: Scalar>(q: F) -> Result<F> {
    if !(q >= F::zero() && q <= F::one()) {
        return Err(Error::invalid("qber", "binary entropy needs q in [0, 1]"));
    }
    if q == F::zero() || q == F::one() {
        return Ok(F::zero());
    }
    let p = F::one() - q;
    Ok(-(q * q.log2() + p * p.log2()))
}

/// Observed coincidence probability of a finished session.
pub fn estimate_coincidence<F: Scalar>(transcript: &SessionTranscript<F>) -> F {
    transcript.coincidence_rate()
}

/// Measures the dark coincidence floor on a disconnected receiver: same
/// detectors, same gate count, but the quantum channel blocked at the
/// source and no eavesdropper light. Deterministic in the config seed via
/// a dedicated calibration label.
pub fn calibrate_p_c0<F: Scalar>(config: &SimulationConfig<F>) -> Result<F> {
    let mut dark = config.clone();
    dark.attack.kind = AttackKind::NoAttack;
    dark.channel.eta_ae = F::zero();
    dark.seed = derive_seed(config.seed, "calibration");
    dark.keep_records = false;
    let transcript = run_session(&dark)?;
    Ok(estimate_coincidence(&transcript))
}

/// Upper bound on bits leaked to an eavesdropper, from the coincidence
/// excess over the calibrated floor. Never negative.
pub fn leaked_bits_bound<F: Scalar>(
    coincidence_count: u64,
    p_c0: F,
    total_gates: u64,
) -> Result<F> {
    if !(p_c0 >= F::zero() && p_c0 <= F::one()) {
        return Err(Error::invalid("p_c0", "probability must lie in [0, 1]"));
    }
    let excess = F::real(coincidence_count as f64) - p_c0 * F::real(total_gates as f64);
    Ok(excess.max(F::zero()) / F::real(2.0))
}

/// Key length surviving privacy amplification: the sifted bits, shortened
/// by the error-correction fraction h2(qber), minus the leaked-bit bound.
/// Floors at zero. The QBER must be a physical value at or below 1/2.
pub fn final_key_bound<F: Scalar>(sifted_length: u64, qber: F, leaked: F) -> Result<F> {
    if !(qber >= F::zero() && qber <= F::half()) {
        return Err(Error::invalid("qber", "expected a value in [0, 0.5]"));
    }
    if !(leaked >= F::zero()) {
        return Err(Error::invalid("leaked", "leaked bits cannot be negative"));
    }
    let n = F::real(sifted_length as f64);
    let kept = n * (F::one() - binary_entropy(qber)?) - leaked;
    Ok(kept.max(F::zero()))
}

/// Defense verdict for one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport<F: Scalar> {
    /// Observed coincidence probability.
    pub p_c_prime_hat: F,
    /// Calibrated dark coincidence probability.
    pub p_c0_hat: F,
    /// Coincidences beyond the calibrated expectation, rounded.
    pub extra_coincidences: i64,
    /// Upper bound on bits the eavesdropper forced.
    pub leaked_bits_bound: F,
    /// Sifted key length before QBER sampling.
    pub sifted_length: u64,
    /// Estimated error rate from the public sample.
    pub qber: F,
    /// Lower bound on the distillable key after privacy amplification.
    pub final_key_bound: F,
}

impl<F: Scalar> DefenseReport<F> {
    /// Evaluates the monitor on a finished session against a calibrated
    /// floor. The privacy-amplification step runs on the post-sample key
    /// and treats any estimated QBER past 1/2 as 1/2 (the key is already
    /// worthless there, and the bound stays defined).
    pub fn from_transcript(transcript: &SessionTranscript<F>, p_c0_hat: F) -> Result<Self> {
        let p_c_prime_hat = estimate_coincidence(transcript);
        let expected_dark = p_c0_hat * F::real(transcript.gates as f64);
        let extra = (F::real(transcript.coincidence_count as f64) - expected_dark)
            .round()
            .as_f64() as i64;
        let leaked = leaked_bits_bound(transcript.coincidence_count, p_c0_hat, transcript.gates)?;
        let qber = transcript.qber.min(F::half());
        let final_key = final_key_bound(transcript.final_key.len() as u64, qber, leaked)?;
        Ok(DefenseReport {
            p_c_prime_hat,
            p_c0_hat,
            extra_coincidences: extra,
            leaked_bits_bound: leaked,
            sifted_length: transcript.sifted.len() as u64,
            qber: transcript.qber,
            final_key_bound: final_key,
        })
    }

    /// The monitor's alarm condition: coincidences well above the floor.
    pub fn attack_detected(&self) -> bool {
        self.p_c_prime_hat > F::real(10.0) * self.p_c0_hat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::protocol::eve_knowledge_fraction;

    type Config = SimulationConfig<f64>;

    #[test]
    fn binary_entropy_matches_frozen_points() {
        assert_eq!(binary_entropy(0.0_f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0_f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5_f64).unwrap(), 1.0);
        let h11 = binary_entropy(0.11_f64).unwrap();
        assert!((h11 - 0.499915958164528).abs() < 1e-15, "h2(0.11) = {h11}");
        let h25 = binary_entropy(0.25_f64).unwrap();
        assert!((h25 - 0.8112781244591328).abs() < 1e-15, "h2(0.25) = {h25}");
        assert!(binary_entropy(-0.1_f64).is_err());
        assert!(binary_entropy(1.1_f64).is_err());
    }

    #[test]
    fn binary_entropy_is_symmetric() {
        for q in [0.01_f64, 0.1, 0.2, 0.37, 0.49] {
            let a = binary_entropy(q).unwrap();
            let b = binary_entropy(1.0 - q).unwrap();
            assert!((a - b).abs() < 1e-14, "asym at {q}");
            assert!(a > 0.0 && a < 1.0);
        }
    }

    #[test]
    fn final_key_bound_matches_frozen_points() {
        assert_eq!(final_key_bound(1000, 0.0_f64, 0.0).unwrap(), 1000.0);
        assert_eq!(final_key_bound(1000, 0.5_f64, 0.0).unwrap(), 0.0);
        let k = final_key_bound(1000, 0.11_f64, 100.0).unwrap();
        assert!((k - 400.08404183547196).abs() < 1e-9, "bound {k}");
        // floors at zero instead of going negative
        assert_eq!(final_key_bound(10, 0.0_f64, 500.0).unwrap(), 0.0);
        assert!(final_key_bound(10, 0.6_f64, 0.0).is_err());
        assert!(final_key_bound(10, 0.1_f64, -1.0).is_err());
    }

    #[test]
    fn final_key_bound_is_monotone() {
        let base = final_key_bound(1000, 0.05_f64, 10.0).unwrap();
        assert!(final_key_bound(1000, 0.06_f64, 10.0).unwrap() < base);
        assert!(final_key_bound(1000, 0.05_f64, 20.0).unwrap() < base);
        assert!(final_key_bound(2000, 0.05_f64, 10.0).unwrap() > base);
    }

    #[test]
    fn leaked_bound_floors_at_zero_and_halves_the_excess() {
        assert_eq!(leaked_bits_bound(0, 0.0_f64, 1_000_000).unwrap(), 0.0);
        assert_eq!(leaked_bits_bound(0, 0.01_f64, 1_000_000).unwrap(), 0.0);
        assert_eq!(
            leaked_bits_bound(10_000, 0.0_f64, 1_000_000).unwrap(),
            5000.0
        );
        let leaked = leaked_bits_bound(10_000, 0.001_f64, 1_000_000).unwrap();
        assert_eq!(leaked, (10_000.0 - 1000.0) / 2.0);
        assert!(leaked_bits_bound(10, 1.5_f64, 100).is_err());
    }

    #[test]
    fn calibration_sees_only_dark_coincidences() {
        // d = 0 means a silent receiver
        let mut cfg: Config = preset("baseline").unwrap();
        cfg.gates = 50_000;
        assert_eq!(calibrate_p_c0(&cfg).unwrap(), 0.0);

        // with d = 0.01 on four detectors the closed form for at least
        // two dark clicks in a gate is 1 - (1-d)^4 - 4 d (1-d)^3
        let mut cfg = Config::default();
        cfg.detectors.dark_prob = 0.01;
        cfg.gates = 1_000_000;
        let p = calibrate_p_c0(&cfg).unwrap();
        let expected = 0.0005920300000000558;
        let sigma = (expected / cfg.gates as f64).sqrt();
        assert!(
            (p - expected).abs() < 3.0 * sigma,
            "p_c0 {p} expected {expected}"
        );
    }

    #[test]
    fn calibration_is_deterministic_and_floor_like() {
        let mut cfg = Config::default();
        cfg.detectors.dark_prob = 1e-3;
        cfg.gates = 500_000;
        let a = calibrate_p_c0(&cfg).unwrap();
        let b = calibrate_p_c0(&cfg).unwrap();
        assert_eq!(a, b);

        // a connected honest link can only add coincidence sources
        let connected = run_session(&cfg).unwrap();
        assert!(
            estimate_coincidence(&connected) >= a * 0.5,
            "floor above live rate"
        );
    }

    #[test]
    fn honest_sessions_keep_the_leak_bound_negligible() {
        let mut cfg = Config::default();
        cfg.gates = 100_000;
        let p_c0 = calibrate_p_c0(&cfg).unwrap();
        let mut bounds = 0.0;
        let mut sifted = 0.0;
        for run in 0..20 {
            cfg.seed = derive_seed(0xF00D, &format!("honest-{run}"));
            let t = run_session(&cfg).unwrap();
            let report = DefenseReport::from_transcript(&t, p_c0).unwrap();
            bounds += report.leaked_bits_bound;
            sifted += report.sifted_length as f64;
        }
        assert!(
            bounds / 20.0 < 0.01 * (sifted / 20.0),
            "mean bound {}",
            bounds / 20.0
        );
    }

    #[test]
    fn mirror_blinding_trips_the_monitor_and_kills_the_key() {
        let mut cfg: Config = preset("fig1c-blind").unwrap();
        cfg.gates = 200_000;
        let p_c0 = calibrate_p_c0(&cfg).unwrap();
        let t = run_session(&cfg).unwrap();
        let report = DefenseReport::from_transcript(&t, p_c0).unwrap();
        assert!(report.attack_detected());
        assert!((report.p_c_prime_hat - 0.5).abs() < 0.01);
        assert_eq!(report.final_key_bound, 0.0, "leak exceeds the sifted key");
        assert_eq!(report.sifted_length, t.sifted.len() as u64);
    }

    #[test]
    fn weak_cw_blinding_still_trips_the_monitor() {
        let mut cfg: Config = preset("weak-cw").unwrap();
        cfg.gates = 200_000;
        let p_c0 = calibrate_p_c0(&cfg).unwrap();
        let t = run_session(&cfg).unwrap();
        let report = DefenseReport::from_transcript(&t, p_c0).unwrap();
        assert!(
            report.attack_detected(),
            "p_c' {} floor {}",
            report.p_c_prime_hat,
            p_c0
        );
        assert!((report.p_c_prime_hat - 0.44527209125999434).abs() < 0.01);
    }

    #[test]
    fn partial_blinding_bound_tracks_the_delivered_bits() {
        let mut cfg: Config = preset("partial:0.1").unwrap();
        cfg.gates = 1_000_000;
        let p_c0 = calibrate_p_c0(&cfg).unwrap();
        let t = run_session(&cfg).unwrap();
        let report = DefenseReport::from_transcript(&t, p_c0).unwrap();
        // each delivered bit rides on two expected coincidences, so the
        // halved excess lands on the forced single-click count
        let actual = t.eve_forced_single_clicks as f64;
        let bound = report.leaked_bits_bound;
        assert!(
            (bound - actual).abs() < 0.05 * actual,
            "bound {bound} vs delivered {actual}"
        );
        assert!(eve_knowledge_fraction(&t) > 0.0);
    }

    #[test]
    fn report_serialization_round_trips() {
        let report = DefenseReport::<f64> {
            p_c_prime_hat: 0.5,
            p_c0_hat: 1e-9,
            extra_coincidences: 99_999,
            leaked_bits_bound: 49_999.5,
            sifted_length: 25_000,
            qber: 0.0,
            final_key_bound: 0.0,
        };
        let text = serde_json::to_string(&report).unwrap();
        let back: DefenseReport<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
