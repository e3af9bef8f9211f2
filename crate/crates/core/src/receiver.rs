//! Bob's receiving station: basis selection, optical routing, detection,
//! and gate-outcome classification.
//!
//! Three front-ends are modeled. The passive splitter needs no randomness
//! of its own (the beam splitter decides), the PEM and mirror stations
//! consume exactly one bit from the basis stream per gate. The mirror
//! station steers all light into the selected basis, so no detector idles
//! in the beam; the cost is that a basis switch during CW blinding exposes
//! two freshly unblinded detectors to strong light, and both click.
//!
//! A gate with two or more clicks is a coincidence. Bob cannot tell which
//! state was sent, announces the gate, and discards it; the defense side
//! counts these announcements.

use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectorConfig, DetectorState};
use crate::optics::{detector_identity, route, Basis, GateIllumination};
use crate::rng::RandomSource;
use crate::scalar::Scalar;

/// Receiver front-end layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceiverArchitecture {
    /// Passive 50/50 beam splitter, one PBS per basis, 4 detectors.
    PassiveBS,
    /// Photoelastic modulator before a single PBS, 2 detectors.
    ActivePEM,
    /// Switchable mirror routing all light into one basis, 4 detectors.
    ExclusiveMirror,
}

impl ReceiverArchitecture {
    #[inline]
    pub fn detector_count(self) -> usize {
        match self {
            ReceiverArchitecture::PassiveBS | ReceiverArchitecture::ExclusiveMirror => 4,
            ReceiverArchitecture::ActivePEM => 2,
        }
    }

    #[inline]
    pub fn consumes_basis_bit(self) -> bool {
        !matches!(self, ReceiverArchitecture::PassiveBS)
    }
}

/// Set of detectors that fired in one gate, as a bitmask over indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorSet(pub u8);

impl DetectorSet {
    pub fn contains(self, detector: usize) -> bool {
        self.0 & (1 << detector) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Classified result of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateOutcome {
    NoClick,
    SingleClick { basis: Basis, bit: u8 },
    Coincidence { detectors: DetectorSet },
}

/// Maps a click pattern to an outcome. Patterns of length 4 carry the
/// detector identity in the index; length-2 patterns (PEM) need the basis
/// selected this gate.
pub fn classify(pattern: &[bool], chosen_basis: Option<Basis>) -> GateOutcome {
    debug_assert!(pattern.len() == 2 || pattern.len() == 4);
    let mut mask = 0u8;
    for (i, &click) in pattern.iter().enumerate() {
        if click {
            mask |= 1 << i;
        }
    }
    match mask.count_ones() {
        0 => GateOutcome::NoClick,
        1 => {
            let index = mask.trailing_zeros() as usize;
            let (basis, bit) = if pattern.len() == 4 {
                detector_identity(index)
            } else {
                (
                    chosen_basis.expect("PEM outcomes need the selected basis"),
                    index as u8,
                )
            };
            GateOutcome::SingleClick { basis, bit }
        }
        _ => GateOutcome::Coincidence {
            detectors: DetectorSet(mask),
        },
    }
}

/// One session's receiving station, owning detector states across gates.
#[derive(Debug, Clone)]
pub struct Receiver<F: Scalar> {
    architecture: ReceiverArchitecture,
    configs: [DetectorConfig<F>; 4],
    states: [DetectorState; 4],
    previous_basis: Option<Basis>,
}

impl<F: Scalar> Receiver<F> {
    /// All detectors share `config`. The mirror station draws one warm-up
    /// basis bit so gate 0 has a defined predecessor.
    pub fn new(
        architecture: ReceiverArchitecture,
        config: DetectorConfig<F>,
        basis_rng: &mut RandomSource,
    ) -> Self {
        let previous_basis = match architecture {
            ReceiverArchitecture::ExclusiveMirror => Some(Basis::from_bit(basis_rng.next_bit())),
            _ => None,
        };
        Receiver {
            architecture,
            configs: [config; 4],
            states: [DetectorState::default(); 4],
            previous_basis,
        }
    }

    pub fn architecture(&self) -> ReceiverArchitecture {
        self.architecture
    }

    /// Basis selected in the most recent gate (mirror warm-up before any).
    pub fn previous_basis(&self) -> Option<Basis> {
        self.previous_basis
    }

    pub fn detector_states(&self) -> &[DetectorState] {
        &self.states[..self.architecture.detector_count()]
    }

    /// Advances one gate: selects the basis, routes the light, runs every
    /// detector, classifies the pattern.
    pub fn process_gate(
        &mut self,
        illumination: &GateIllumination<F>,
        basis_rng: &mut RandomSource,
        noise_rng: &mut RandomSource,
    ) -> (GateOutcome, Option<Basis>) {
        let chosen = if self.architecture.consumes_basis_bit() {
            Some(Basis::from_bit(basis_rng.next_bit()))
        } else {
            None
        };
        // route() ignores the basis for the passive splitter
        let routing_basis = chosen.unwrap_or(Basis::Rectilinear);
        let dose = route(self.architecture, illumination, routing_basis, noise_rng);

        let count = self.architecture.detector_count();
        let mut clicks = [false; 4];
        for i in 0..count {
            let (click, next) = detect(&self.configs[i], self.states[i], dose.get(i), noise_rng);
            clicks[i] = click;
            self.states[i] = next;
        }
        if chosen.is_some() {
            self.previous_basis = chosen;
        }
        (classify(&clicks[..count], chosen), chosen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{LightPulse, Polarization};

    fn default_receiver(arch: ReceiverArchitecture, rng: &mut RandomSource) -> Receiver<f64> {
        Receiver::new(arch, DetectorConfig::default(), rng)
    }

    fn quiet_config() -> DetectorConfig<f64> {
        DetectorConfig {
            dark_prob: 0.0,
            ..DetectorConfig::default()
        }
    }

    #[test]
    fn classify_follows_the_indexing_convention() {
        assert_eq!(classify(&[false; 4], None), GateOutcome::NoClick);
        assert_eq!(
            classify(&[false, true, false, false], None),
            GateOutcome::SingleClick {
                basis: Basis::Rectilinear,
                bit: 1
            }
        );
        assert_eq!(
            classify(&[true, false, true, false], None),
            GateOutcome::Coincidence {
                detectors: DetectorSet(0b0101)
            }
        );
        assert_eq!(
            classify(&[false, true], Some(Basis::Diagonal)),
            GateOutcome::SingleClick {
                basis: Basis::Diagonal,
                bit: 1
            }
        );
        let GateOutcome::Coincidence { detectors } = classify(&[true, true], Some(Basis::Diagonal))
        else {
            panic!("two clicks must coincide");
        };
        assert_eq!(detectors.len(), 2);
        assert!(detectors.contains(0) && detectors.contains(1));
    }

    #[test]
    fn empty_illumination_without_dark_counts_never_clicks() {
        let mut basis_rng = RandomSource::private(1, "bob-basis");
        let mut noise_rng = RandomSource::private(1, "detector-noise");
        let mut receiver = Receiver::new(
            ReceiverArchitecture::PassiveBS,
            quiet_config(),
            &mut basis_rng,
        );
        for _ in 0..1000 {
            let (outcome, chosen) =
                receiver.process_gate(&GateIllumination::dark(), &mut basis_rng, &mut noise_rng);
            assert_eq!(outcome, GateOutcome::NoClick);
            assert_eq!(chosen, None);
        }
    }

    #[test]
    fn blinded_passive_station_reports_the_faked_state() {
        let mut basis_rng = RandomSource::private(2, "bob-basis");
        let mut noise_rng = RandomSource::private(2, "detector-noise");
        let mut receiver = default_receiver(ReceiverArchitecture::PassiveBS, &mut basis_rng);
        let cfg = DetectorConfig::<f64>::default();

        // gate 0: CW at 4x the blinding threshold reaches every detector,
        // all four click once, and the station is blinded afterwards
        let cw = GateIllumination::of(&[LightPulse::cw(4.0 * cfg.blind_threshold)]);
        let (outcome, _) = receiver.process_gate(&cw, &mut basis_rng, &mut noise_rng);
        assert!(matches!(outcome, GateOutcome::Coincidence { detectors } if detectors.len() == 4));

        // faked state at 3x the click threshold: the aligned detector sees
        // half of it (1.5x) and fires, wrong-basis detectors see a quarter
        // (0.75x) and stay silent
        for _ in 0..50 {
            let illum = GateIllumination::of(&[
                LightPulse::cw(4.0 * cfg.blind_threshold),
                LightPulse::bright(Polarization::Lin0, 3.0 * cfg.click_threshold),
            ]);
            let (outcome, _) = receiver.process_gate(&illum, &mut basis_rng, &mut noise_rng);
            assert_eq!(
                outcome,
                GateOutcome::SingleClick {
                    basis: Basis::Rectilinear,
                    bit: 0
                }
            );
        }
    }

    #[test]
    fn mirror_coincides_exactly_on_basis_switches_under_cw() {
        let mut basis_rng = RandomSource::private(3, "bob-basis");
        let mut noise_rng = RandomSource::private(3, "detector-noise");
        let mut receiver = default_receiver(ReceiverArchitecture::ExclusiveMirror, &mut basis_rng);
        let cw = GateIllumination::of(&[LightPulse::cw(400.0)]);

        let mut previous: Option<Basis> = None;
        let mut switches = 0u32;
        for gate in 0..2000u32 {
            let (outcome, chosen) = receiver.process_gate(&cw, &mut basis_rng, &mut noise_rng);
            let chosen = chosen.expect("mirror consumes a basis bit");
            let flipped = previous.map_or(true, |p| p != chosen);
            if gate == 0 {
                // both selected detectors are dark before the first gate
                assert!(matches!(outcome, GateOutcome::Coincidence { .. }));
            } else if flipped {
                switches += 1;
                let GateOutcome::Coincidence { detectors } = outcome else {
                    panic!("switch into unblinded pair must coincide");
                };
                assert_eq!(detectors.len(), 2);
            } else {
                assert_eq!(outcome, GateOutcome::NoClick);
            }
            previous = Some(chosen);
        }
        let rate = f64::from(switches) / 1999.0;
        assert!((rate - 0.5).abs() < 0.04, "switch rate {rate}");
    }

    #[test]
    fn pem_and_passive_stations_go_silent_under_sustained_cw() {
        for arch in [
            ReceiverArchitecture::ActivePEM,
            ReceiverArchitecture::PassiveBS,
        ] {
            let mut basis_rng = RandomSource::private(4, "bob-basis");
            let mut noise_rng = RandomSource::private(4, "detector-noise");
            let mut receiver = default_receiver(arch, &mut basis_rng);
            let cw = GateIllumination::of(&[LightPulse::cw(400.0)]);
            for gate in 0..500u32 {
                let (outcome, _) = receiver.process_gate(&cw, &mut basis_rng, &mut noise_rng);
                if gate == 0 {
                    assert!(matches!(outcome, GateOutcome::Coincidence { .. }));
                } else {
                    assert_eq!(outcome, GateOutcome::NoClick, "arch {arch:?} gate {gate}");
                }
            }
        }
    }

    #[test]
    fn active_stations_consume_one_basis_bit_per_gate() {
        for (arch, warmup) in [
            (ReceiverArchitecture::PassiveBS, 0u64),
            (ReceiverArchitecture::ActivePEM, 0),
            (ReceiverArchitecture::ExclusiveMirror, 1),
        ] {
            let gates = 137u64;
            let mut basis_rng = RandomSource::private(9, "bob-basis");
            let mut noise_rng = RandomSource::private(9, "detector-noise");
            let mut receiver = default_receiver(arch, &mut basis_rng);
            for _ in 0..gates {
                receiver.process_gate(&GateIllumination::dark(), &mut basis_rng, &mut noise_rng);
            }
            let consumed = if arch.consumes_basis_bit() {
                gates + warmup
            } else {
                warmup
            };
            let mut reference = RandomSource::private(9, "bob-basis");
            for _ in 0..consumed {
                reference.next_bit();
            }
            assert_eq!(basis_rng.next_u64(), reference.next_u64(), "arch {arch:?}");
        }
    }

    #[test]
    fn mirror_unselected_basis_clicks_only_through_dark_counts() {
        let mut basis_rng = RandomSource::private(5, "bob-basis");
        let mut noise_rng = RandomSource::private(5, "detector-noise");
        let mut receiver = Receiver::new(
            ReceiverArchitecture::ExclusiveMirror,
            quiet_config(),
            &mut basis_rng,
        );
        // with d=0, a signal photon can only ever fire a selected detector
        for _ in 0..2000 {
            let illum = GateIllumination::of(&[LightPulse::signal(Polarization::Lin45)]);
            let (outcome, chosen) = receiver.process_gate(&illum, &mut basis_rng, &mut noise_rng);
            if let GateOutcome::SingleClick { basis, .. } = outcome {
                assert_eq!(basis, chosen.unwrap());
            }
        }
    }
}
