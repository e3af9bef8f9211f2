//! Eavesdropper strategies.
//!
//! The centerpiece is the detector-blinding attack: Eve cuts the fiber,
//! measures each of Alice's photons in a random basis with her own ideal
//! station, keeps Bob's detectors saturated with circular CW light, and
//! superimposes a bright faked-state pulse in the polarization she measured.
//! A blinded detector fires exactly when its share of the pulse reaches the
//! click threshold, so Bob's outcome reproduces hers.
//!
//! The partial variant attacks one contiguous window covering the requested
//! fraction of the session, placed uniformly at random. A window (rather
//! than independent per-gate coin flips) keeps the detectors it attacks in
//! the steady blinded state, which is the regime the coincidence accounting
//! of the defense is stated for; scattering attacked gates independently
//! would light up freshly unblinded detectors nearly every time and produce
//! coincidences at dozens of times the bits acquired.
//!
//! `RngControl` models controlling Bob's basis generator directly: no light
//! beyond the re-sent photon, same knowledge. It only works when the basis
//! source is actually controllable; against a private source it returns an
//! error, which is precisely the security claim of the mirror receiver.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::optics::{
    detector_identity, encode, measure_polarization, Basis, GateIllumination, LightPulse, PulseKind,
};
use crate::receiver::ReceiverArchitecture;
use crate::rng::RandomSource;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Which attack runs, with the per-variant parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackKind<F: Scalar> {
    NoAttack,
    InterceptResend,
    BlindingFull,
    /// Attack a contiguous window covering this fraction of the session.
    BlindingPartial {
        fraction: F,
    },
    RngControl,
}

impl<F: Scalar> AttackKind<F> {
    /// True when the variant sends blinding light on its attacked gates.
    pub fn is_blinding(self) -> bool {
        matches!(
            self,
            AttackKind::BlindingFull | AttackKind::BlindingPartial { .. }
        )
    }
}

/// Attack variant plus the knobs shared by the bright-light strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStrategy<F: Scalar> {
    pub kind: AttackKind<F>,
    /// CW blinding power in photons per gate, before receiver splitting.
    pub cw_power: F,
    /// Faked-state (and noise) pulse power in photons.
    pub pulse_power: F,
    /// Mimic Bob's dark counts with random bright pulses while he is blind.
    pub prudent_noise: bool,
    /// Per-gate, per-polarization rate of those noise pulses.
    pub noise_rate: F,
    /// Click probability of Eve's own measurement station; 1 is ideal.
    pub station_efficiency: F,
}

impl<F: Scalar> Default for AttackStrategy<F> {
    fn default() -> Self {
        AttackStrategy {
            kind: AttackKind::NoAttack,
            cw_power: F::real(400.0),
            pulse_power: F::real(150.0),
            prudent_noise: false,
            noise_rate: F::real(1e-5),
            station_efficiency: F::one(),
        }
    }
}

impl<F: Scalar> AttackStrategy<F> {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if let AttackKind::BlindingPartial { fraction } = self.kind {
            if fraction < F::zero() || fraction > F::one() || !fraction.is_finite() {
                return Err(Error::invalid(
                    &format!("{prefix}.fraction"),
                    format!("{fraction} is outside [0, 1]"),
                ));
            }
        }
        for (name, v) in [("p_cw", self.cw_power), ("p_pulse", self.pulse_power)] {
            if v < F::zero() || !v.is_finite() {
                return Err(Error::invalid(
                    &format!("{prefix}.{name}"),
                    format!("{v} must be a finite photon count >= 0"),
                ));
            }
        }
        for (name, v) in [
            ("noise_rate", self.noise_rate),
            ("station_efficiency", self.station_efficiency),
        ] {
            if v < F::zero() || v > F::one() || !v.is_finite() {
                return Err(Error::invalid(
                    &format!("{prefix}.{name}"),
                    format!("{v} is outside [0, 1]"),
                ));
            }
        }
        Ok(())
    }
}

/// Power window for a faked-state pulse against the passive splitter: above
/// `2 * click_threshold` the matching detector's half-share fires it, below
/// `4 * click_threshold` each wrong-basis quarter-share stays silent.
pub fn faked_pulse_window<F: Scalar>(click_threshold: F) -> Result<(F, F)> {
    if !(click_threshold > F::zero()) || !click_threshold.is_finite() {
        return Err(Error::invalid(
            "click_threshold",
            format!("{click_threshold} must be > 0"),
        ));
    }
    let two = F::real(2.0);
    Ok((two * click_threshold, two * two * click_threshold))
}

/// Pulse power matched to the receiver in front of it. The passive splitter
/// wants the midpoint of its (2, 4) x threshold window. The PEM and mirror
/// stations route the whole pulse into one basis, so the window tightens to
/// (1, 2) x threshold: at 3x threshold a basis mismatch would fire both
/// detectors of the selected basis and hand the defense a coincidence every
/// other gate.
pub fn tailored_pulse_power<F: Scalar>(
    architecture: ReceiverArchitecture,
    click_threshold: F,
) -> F {
    match architecture {
        ReceiverArchitecture::PassiveBS => F::real(3.0) * click_threshold,
        ReceiverArchitecture::ActivePEM | ReceiverArchitecture::ExclusiveMirror => {
            F::real(1.5) * click_threshold
        }
    }
}

/// What Eve did and learned in one gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveGateRecord {
    /// True when Eve obtained a measurement result this gate.
    pub acted: bool,
    pub measured_basis: Option<Basis>,
    pub measured_bit: Option<u8>,
    /// True when at least one candidate below was launched.
    pub knows_bob_outcome_candidate: bool,
    /// (basis, bit) outcomes Eve deliberately tried to force at Bob this
    /// gate: her faked or re-sent state, plus any noise pulses. A single
    /// click matching an entry means Eve knows Bob's record of the gate.
    pub candidates: ArrayVec<(Basis, u8), 5>,
}

impl EveGateRecord {
    fn passive() -> Self {
        EveGateRecord {
            acted: false,
            measured_basis: None,
            measured_bit: None,
            knows_bob_outcome_candidate: false,
            candidates: ArrayVec::new(),
        }
    }

    fn finish(mut self) -> Self {
        self.knows_bob_outcome_candidate = !self.candidates.is_empty();
        self
    }

    /// Whether a single click at (basis, bit) is one Eve forced and knows.
    pub fn forces(&self, basis: Basis, bit: u8) -> bool {
        self.candidates.contains(&(basis, bit))
    }
}

/// One session's eavesdropper: the strategy plus the attack window chosen
/// for the partial variant.
#[derive(Debug, Clone)]
pub struct EveSession<F: Scalar> {
    strategy: AttackStrategy<F>,
    /// Attacked gate range `[start, end)` for `BlindingPartial`.
    window: Option<(u64, u64)>,
}

impl<F: Scalar> EveSession<F> {
    /// Validates the strategy and, for the partial attack, places the
    /// attack window uniformly within the session. Consumes one draw from
    /// `eve_rng` only when the window has somewhere to move.
    pub fn new(
        strategy: AttackStrategy<F>,
        total_gates: u64,
        eve_rng: &mut RandomSource,
    ) -> Result<Self> {
        strategy.validate("attack")?;
        let window = match strategy.kind {
            AttackKind::BlindingPartial { fraction } => {
                let length = (fraction.as_f64() * total_gates as f64).round() as u64;
                if length == 0 {
                    None
                } else {
                    let slack = total_gates - length;
                    let start = if slack == 0 {
                        0
                    } else {
                        // uniform offset over [0, slack]
                        (eve_rng.next_real::<f64>() * (slack + 1) as f64) as u64
                    };
                    Some((start, start + length))
                }
            }
            _ => None,
        };
        Ok(EveSession { strategy, window })
    }

    pub fn strategy(&self) -> &AttackStrategy<F> {
        &self.strategy
    }

    pub fn window(&self) -> Option<(u64, u64)> {
        self.window
    }

    fn attacks_gate(&self, gate: u64) -> bool {
        match self.strategy.kind {
            AttackKind::NoAttack => false,
            AttackKind::BlindingPartial { .. } => self
                .window
                .map_or(false, |(start, end)| gate >= start && gate < end),
            _ => true,
        }
    }

    /// Measures the incoming signal photon, if any, with Eve's station:
    /// random basis, projection, click with her station efficiency. Always
    /// consumes three draws per present photon so the stream layout does
    /// not depend on outcomes.
    fn measure(
        &self,
        incoming: &GateIllumination<F>,
        eve_rng: &mut RandomSource,
    ) -> Option<(Basis, u8)> {
        let photon = incoming
            .pulses
            .iter()
            .find(|p| p.kind == PulseKind::SignalPhoton)?;
        let basis = Basis::from_bit(eve_rng.next_bit());
        let bit = measure_polarization::<F>(photon.polarization, basis, eve_rng);
        let clicked = eve_rng.bernoulli(self.strategy.station_efficiency);
        clicked.then_some((basis, bit))
    }

    /// Runs one gate of the attack. Returns Eve's record and the light she
    /// forwards toward Bob. `bob_rng` is touched only by `RngControl`.
    pub fn intercept(
        &self,
        gate: u64,
        incoming: &GateIllumination<F>,
        eve_rng: &mut RandomSource,
        bob_rng: &mut RandomSource,
    ) -> Result<(EveGateRecord, GateIllumination<F>)> {
        if !self.attacks_gate(gate) {
            return Ok((EveGateRecord::passive(), incoming.clone()));
        }
        match self.strategy.kind {
            AttackKind::NoAttack => unreachable!("handled by attacks_gate"),
            AttackKind::InterceptResend => Ok(self.measure_and_resend(incoming, eve_rng)),
            AttackKind::RngControl => {
                let (mut record, mut outgoing) =
                    (EveGateRecord::passive(), GateIllumination::dark());
                if let Some((basis, bit)) = self.measure(incoming, eve_rng) {
                    bob_rng.override_bit(basis.bit())?;
                    record.acted = true;
                    record.measured_basis = Some(basis);
                    record.measured_bit = Some(bit);
                    record.candidates.push((basis, bit));
                    outgoing.push(LightPulse::signal(encode(bit, basis)));
                }
                Ok((record.finish(), outgoing))
            }
            AttackKind::BlindingFull | AttackKind::BlindingPartial { .. } => {
                Ok(self.blind_gate(incoming, eve_rng))
            }
        }
    }

    fn measure_and_resend(
        &self,
        incoming: &GateIllumination<F>,
        eve_rng: &mut RandomSource,
    ) -> (EveGateRecord, GateIllumination<F>) {
        let mut record = EveGateRecord::passive();
        let mut outgoing = GateIllumination::dark();
        if let Some((basis, bit)) = self.measure(incoming, eve_rng) {
            record.acted = true;
            record.measured_basis = Some(basis);
            record.measured_bit = Some(bit);
            record.candidates.push((basis, bit));
            outgoing.push(LightPulse::signal(encode(bit, basis)));
        }
        (record.finish(), outgoing)
    }

    fn blind_gate(
        &self,
        incoming: &GateIllumination<F>,
        eve_rng: &mut RandomSource,
    ) -> (EveGateRecord, GateIllumination<F>) {
        let strategy = &self.strategy;
        let mut record = EveGateRecord::passive();
        let mut outgoing = GateIllumination::dark();
        if strategy.cw_power > F::zero() {
            outgoing.push(LightPulse::cw(strategy.cw_power));
        }
        if let Some((basis, bit)) = self.measure(incoming, eve_rng) {
            record.acted = true;
            record.measured_basis = Some(basis);
            record.measured_bit = Some(bit);
            if strategy.pulse_power > F::zero() {
                outgoing.push(LightPulse::bright(encode(bit, basis), strategy.pulse_power));
                record.candidates.push((basis, bit));
            }
        }
        if strategy.prudent_noise {
            for index in 0..4 {
                let fire = eve_rng.bernoulli(strategy.noise_rate);
                if fire && strategy.pulse_power > F::zero() {
                    let (basis, bit) = detector_identity(index);
                    outgoing.push(LightPulse::bright(encode(bit, basis), strategy.pulse_power));
                    record.candidates.push((basis, bit));
                }
            }
        }
        (record.finish(), outgoing)
    }
}
