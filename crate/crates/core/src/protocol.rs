//! Session orchestration: runs gates end to end, sifts over the public
//! channel, estimates QBER, and keeps the ground-truth ledger of what Eve
//! actually knew.
//!
//! The classical channel is implicit. Announcements (bases, coincidence
//! discards, sample comparisons) are modeled as shared knowledge: Eve reads
//! everything by construction, nobody can forge anything. What she knows
//! about the key is therefore exactly determined by her per-gate records,
//! and the sifting step recomputes it from those records alone.
//!
//! Randomness is split into labeled streams derived from the session seed:
//! `alice` (bits, bases, launch loss), `eve` (her measurements and noise),
//! `bob-basis` (receiver basis selection; compromised only for the PEM
//! station), `detector-noise` (routing and clicks), `channel` (the Eve-to-
//! Bob leg), and `qber-sample` (public sample selection). Streams advance
//! by fixed per-gate patterns so runs are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::alice::{attenuate, prepare, transmit, PreparedQubit};
use crate::config::SimulationConfig;
use crate::eve::{EveGateRecord, EveSession};
use crate::optics::{detector_index, Basis, PulseKind};
use crate::receiver::{GateOutcome, Receiver, ReceiverArchitecture};
use crate::rng::{derive_seed, RandomSource, SourceMode};
use crate::scalar::Scalar;
use crate::Result;

/// Everything that happened in one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub gate_index: u64,
    pub alice: PreparedQubit,
    pub eve: EveGateRecord,
    pub bob_basis: Option<Basis>,
    pub outcome: GateOutcome,
}

/// One key bit surviving the sifting announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedBit {
    pub gate_index: u64,
    pub alice_bit: u8,
    pub bob_bit: u8,
    /// Eve forced this outcome and therefore has the bit.
    pub eve_knows: bool,
    pub eve_bit: Option<u8>,
}

/// Public-sample tally from QBER estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QberSample {
    pub sample_size: u64,
    pub mismatches: u64,
}

/// Complete result of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript<F: Scalar> {
    pub seed: u64,
    pub gates: u64,
    /// Per-gate records; populated only when the config keeps them.
    pub records: Vec<GateRecord>,
    /// Sifted key before QBER sampling.
    pub sifted: Vec<SiftedBit>,
    /// Sifted key after the public sample was removed.
    pub final_key: Vec<SiftedBit>,
    pub qber_sample: QberSample,
    pub qber: F,
    pub coincidence_count: u64,
    pub single_click_count: u64,
    pub no_click_count: u64,
    /// Click totals per physical detector index.
    pub detector_clicks: [u64; 4],
    /// Gates where Eve obtained a measurement result.
    pub eve_acted_gates: u64,
    /// Single-click gates whose outcome Eve deliberately forced, whether
    /// or not the bases later matched: the bits she acquired.
    pub eve_forced_single_clicks: u64,
    /// Total classical photons (CW plus bright pulses) entering Bob's
    /// station over the session.
    pub eve_bright_photons: F,
}

impl<F: Scalar> SessionTranscript<F> {
    pub fn sifted_rate(&self) -> F {
        ratio(self.sifted.len() as u64, self.gates)
    }

    pub fn coincidence_rate(&self) -> F {
        ratio(self.coincidence_count, self.gates)
    }

    pub fn single_click_rate(&self) -> F {
        ratio(self.single_click_count, self.gates)
    }

    /// Bits of the (pre-sample) sifted key that Eve knows.
    pub fn known_sifted_bits(&self) -> u64 {
        self.sifted
            .iter()
            .filter(|b| b.eve_knows && b.eve_bit == Some(b.bob_bit))
            .count() as u64
    }
}

fn ratio<F: Scalar>(num: u64, den: u64) -> F {
    if den == 0 {
        F::zero()
    } else {
        F::real(num as f64 / den as f64)
    }
}

/// Stream labels, fixed so that seeds document themselves.
const STREAM_ALICE: &str = "alice";
const STREAM_EVE: &str = "eve";
const STREAM_BOB_BASIS: &str = "bob-basis";
const STREAM_NOISE: &str = "detector-noise";
const STREAM_CHANNEL: &str = "channel";
const STREAM_QBER: &str = "qber-sample";

/// Basis-source mode is a receiver property: the PEM station's generator
/// is the controllable kind (the scenario-1 premise), the mirror's is
/// explicitly private, and the passive splitter has no basis to choose.
fn basis_source_mode(architecture: ReceiverArchitecture) -> SourceMode {
    match architecture {
        ReceiverArchitecture::ActivePEM => SourceMode::Compromised,
        _ => SourceMode::Private,
    }
}

/// Runs one full session. Deterministic in `config.seed`.
pub fn run_session<F: Scalar>(config: &SimulationConfig<F>) -> Result<SessionTranscript<F>> {
    config.validate()?;
    let seed = config.seed;
    let mut alice_rng = RandomSource::private(derive_seed(seed, STREAM_ALICE), STREAM_ALICE);
    let mut eve_rng = RandomSource::private(derive_seed(seed, STREAM_EVE), STREAM_EVE);
    let mut basis_rng = RandomSource::new(
        derive_seed(seed, STREAM_BOB_BASIS),
        STREAM_BOB_BASIS,
        basis_source_mode(config.architecture),
    );
    let mut noise_rng = RandomSource::private(derive_seed(seed, STREAM_NOISE), STREAM_NOISE);
    let mut channel_rng = RandomSource::private(derive_seed(seed, STREAM_CHANNEL), STREAM_CHANNEL);
    let mut qber_rng = RandomSource::private(derive_seed(seed, STREAM_QBER), STREAM_QBER);

    let mut receiver = Receiver::new(config.architecture, config.detectors, &mut basis_rng);
    let eve = EveSession::new(config.attack, config.gates, &mut eve_rng)?;

    let mut transcript = SessionTranscript {
        seed,
        gates: config.gates,
        records: Vec::new(),
        sifted: Vec::new(),
        final_key: Vec::new(),
        qber_sample: QberSample::default(),
        qber: F::zero(),
        coincidence_count: 0,
        single_click_count: 0,
        no_click_count: 0,
        detector_clicks: [0; 4],
        eve_acted_gates: 0,
        eve_forced_single_clicks: 0,
        eve_bright_photons: F::zero(),
    };
    if config.keep_records {
        transcript.records.reserve(config.gates as usize);
    }

    for gate_index in 0..config.gates {
        let prepared = prepare(&mut alice_rng);
        let (sent, launched) = transmit(prepared, config.channel.eta_ae, &mut alice_rng);
        let (eve_record, forwarded) =
            eve.intercept(gate_index, &launched, &mut eve_rng, &mut basis_rng)?;
        let delivered = attenuate(&forwarded, config.channel.eta_eb, &mut channel_rng);

        for pulse in &delivered.pulses {
            if pulse.kind != PulseKind::SignalPhoton {
                transcript.eve_bright_photons += pulse.photons;
            }
        }
        if eve_record.acted {
            transcript.eve_acted_gates += 1;
        }

        let (outcome, bob_basis) =
            receiver.process_gate(&delivered, &mut basis_rng, &mut noise_rng);

        match outcome {
            GateOutcome::NoClick => transcript.no_click_count += 1,
            GateOutcome::SingleClick { basis, bit } => {
                transcript.single_click_count += 1;
                let index = match config.architecture {
                    ReceiverArchitecture::ActivePEM => bit as usize,
                    _ => detector_index(basis, bit),
                };
                transcript.detector_clicks[index] += 1;
                let forced = eve_record.forces(basis, bit);
                if forced {
                    transcript.eve_forced_single_clicks += 1;
                }
                // sifting: Bob announces the firing detector's basis,
                // Alice hers; the gate survives when they agree
                if basis == sent.basis {
                    transcript.sifted.push(SiftedBit {
                        gate_index,
                        alice_bit: sent.bit,
                        bob_bit: bit,
                        eve_knows: forced,
                        eve_bit: forced.then_some(bit),
                    });
                }
            }
            GateOutcome::Coincidence { detectors } => {
                transcript.coincidence_count += 1;
                for index in 0..4 {
                    if detectors.contains(index) {
                        transcript.detector_clicks[index] += 1;
                    }
                }
            }
        }

        if config.keep_records {
            transcript.records.push(GateRecord {
                gate_index,
                alice: sent,
                eve: eve_record,
                bob_basis,
                outcome,
            });
        }
    }

    let (sample, qber, remaining) = estimate_qber(
        &transcript.sifted,
        config.qber_sample_fraction,
        &mut qber_rng,
    );
    transcript.qber_sample = sample;
    transcript.qber = qber;
    transcript.final_key = remaining;
    Ok(transcript)
}

/// Recomputes the sifted list from per-gate records. This is the same
/// announcement logic the session applies inline; keeping it callable on
/// records proves Eve's knowledge flags contain no information that is not
/// in her records.
pub fn sift(records: &[GateRecord]) -> Vec<SiftedBit> {
    let mut sifted = Vec::new();
    for record in records {
        let GateOutcome::SingleClick { basis, bit } = record.outcome else {
            continue;
        };
        if basis != record.alice.basis {
            continue;
        }
        let forced = record.eve.forces(basis, bit);
        sifted.push(SiftedBit {
            gate_index: record.gate_index,
            alice_bit: record.alice.bit,
            bob_bit: bit,
            eve_knows: forced,
            eve_bit: forced.then_some(bit),
        });
    }
    sifted
}

/// Publicly compares a random `sample_fraction` of the sifted key and
/// removes it. Returns the tally, the mismatch fraction (0 for an empty
/// sample), and the surviving key. One draw per sifted bit.
pub fn estimate_qber<F: Scalar>(
    sifted: &[SiftedBit],
    sample_fraction: F,
    rng: &mut RandomSource,
) -> (QberSample, F, Vec<SiftedBit>) {
    let mut sample = QberSample::default();
    let mut remaining = Vec::with_capacity(sifted.len());
    for bit in sifted {
        if rng.bernoulli(sample_fraction) {
            sample.sample_size += 1;
            if bit.alice_bit != bit.bob_bit {
                sample.mismatches += 1;
            }
        } else {
            remaining.push(*bit);
        }
    }
    let qber = ratio(sample.mismatches, sample.sample_size);
    (sample, qber, remaining)
}

/// Fraction of the final key Eve holds: bits she flagged as known whose
/// value matches Bob's. Zero for an empty key.
pub fn eve_knowledge_fraction<F: Scalar>(transcript: &SessionTranscript<F>) -> F {
    let known = transcript
        .final_key
        .iter()
        .filter(|b| b.eve_knows && b.eve_bit == Some(b.bob_bit))
        .count() as u64;
    ratio(known, transcript.final_key.len() as u64)
}
