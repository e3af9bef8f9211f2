//! Light states and the polarization optics of the three receiver layouts.
//!
//! Bright and CW illumination is treated classically: power splits
//! deterministically at beam splitters and polarizing beam splitters (PBS).
//! Only single signal photons are routed probabilistically, sampled from the
//! same split fractions. All split fractions for the four BB84 states and
//! circular light lie in {0, 1/2, 1}, so classical routing is exact in
//! floating point.
//!
//! Detector indexing is fixed: 0 = rectilinear/bit0, 1 = rectilinear/bit1,
//! 2 = diagonal/bit0, 3 = diagonal/bit1. The two-detector PEM receiver uses
//! indices 0 and 1 within whichever basis was selected that gate.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::receiver::ReceiverArchitecture;
use crate::rng::RandomSource;
use crate::scalar::Scalar;

/// BB84 polarization states plus the circular state used by blinding light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    Lin0,
    Lin45,
    Lin90,
    Lin135,
    Circular,
}

/// Measurement bases: rectilinear (0/90 degrees) and diagonal (45/135).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    #[inline]
    pub fn from_bit(bit: u8) -> Basis {
        if bit & 1 == 0 {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        }
    }

    #[inline]
    pub fn bit(self) -> u8 {
        match self {
            Basis::Rectilinear => 0,
            Basis::Diagonal => 1,
        }
    }
}

impl Polarization {
    /// The classical bit this state encodes: 0 degrees and 45 degrees carry
    /// bit 0, 90 and 135 carry bit 1. Circular light carries no bit.
    #[inline]
    pub fn encoded_bit(self) -> Option<u8> {
        match self {
            Polarization::Lin0 | Polarization::Lin45 => Some(0),
            Polarization::Lin90 | Polarization::Lin135 => Some(1),
            Polarization::Circular => None,
        }
    }

    /// The basis in which this state is deterministic, if any.
    #[inline]
    pub fn basis(self) -> Option<Basis> {
        match self {
            Polarization::Lin0 | Polarization::Lin90 => Some(Basis::Rectilinear),
            Polarization::Lin45 | Polarization::Lin135 => Some(Basis::Diagonal),
            Polarization::Circular => None,
        }
    }
}

/// BB84 encoding of (bit, basis) into a linear polarization.
#[inline]
pub fn encode(bit: u8, basis: Basis) -> Polarization {
    match (basis, bit & 1) {
        (Basis::Rectilinear, 0) => Polarization::Lin0,
        (Basis::Rectilinear, _) => Polarization::Lin90,
        (Basis::Diagonal, 0) => Polarization::Lin45,
        (Basis::Diagonal, _) => Polarization::Lin135,
    }
}

/// Kind of light in one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    /// A single quantum signal; photons is 0 or 1 after loss sampling.
    SignalPhoton,
    /// A classical faked-state or noise pulse.
    BrightPulse,
    /// Continuous blinding illumination, accounted per gate.
    CwBlinding,
}

/// One light component arriving within a gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightPulse<F: Scalar> {
    pub polarization: Polarization,
    pub photons: F,
    pub kind: PulseKind,
}

impl<F: Scalar> LightPulse<F> {
    pub fn signal(polarization: Polarization) -> Self {
        LightPulse {
            polarization,
            photons: F::one(),
            kind: PulseKind::SignalPhoton,
        }
    }

    pub fn bright(polarization: Polarization, photons: F) -> Self {
        LightPulse {
            polarization,
            photons,
            kind: PulseKind::BrightPulse,
        }
    }

    pub fn cw(photons: F) -> Self {
        // the blinding attack uses circular CW so it spreads evenly
        LightPulse {
            polarization: Polarization::Circular,
            photons,
            kind: PulseKind::CwBlinding,
        }
    }
}

pub const MAX_PULSES: usize = 8;

/// Everything arriving at the receiver during one gate. Empty means a dark
/// gate where only dark counts can fire.
#[derive(Debug, Clone, Default)]
pub struct GateIllumination<F: Scalar> {
    pub pulses: ArrayVec<LightPulse<F>, MAX_PULSES>,
}

impl<F: Scalar> GateIllumination<F> {
    pub fn dark() -> Self {
        GateIllumination {
            pulses: ArrayVec::new(),
        }
    }

    pub fn of(pulses: &[LightPulse<F>]) -> Self {
        let mut g = Self::dark();
        for &p in pulses {
            g.push(p);
        }
        g
    }

    #[inline]
    pub fn push(&mut self, pulse: LightPulse<F>) {
        self.pulses.push(pulse);
    }

    #[inline]
    pub fn is_dark(&self) -> bool {
        self.pulses.is_empty()
    }
}

/// Per-detector incident light within one gate, split by kind.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dose<F: Scalar> {
    pub cw: F,
    pub bright: F,
    pub signal: F,
}

impl<F: Scalar> Dose<F> {
    #[inline]
    fn add(&mut self, kind: PulseKind, photons: F) {
        match kind {
            PulseKind::CwBlinding => self.cw += photons,
            PulseKind::BrightPulse => self.bright += photons,
            PulseKind::SignalPhoton => self.signal += photons,
        }
    }
}

/// Doses for all detectors of one gate; length 4 for the four-detector
/// layouts, 2 for the PEM receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorDose<F: Scalar> {
    doses: [Dose<F>; 4],
    count: usize,
}

impl<F: Scalar> DetectorDose<F> {
    pub fn zero(count: usize) -> Self {
        debug_assert!(count == 2 || count == 4);
        DetectorDose {
            doses: [Dose::default(); 4],
            count,
        }
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, detector: usize) -> &Dose<F> {
        &self.doses[..self.count][detector]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dose<F>> {
        self.doses[..self.count].iter()
    }
}

/// Detector index for (basis, bit) in the four-detector layouts.
#[inline]
pub fn detector_index(basis: Basis, bit: u8) -> usize {
    (basis.bit() as usize) * 2 + (bit & 1) as usize
}

/// Inverse of [`detector_index`].
#[inline]
pub fn detector_identity(index: usize) -> (Basis, u8) {
    (Basis::from_bit((index / 2) as u8), (index % 2) as u8)
}

/// Fraction of incident power of `pol` leaving a PBS oriented along `basis`
/// on outcome arm `arm` (arm 0 detects bit 0). Aligned states pass whole,
/// the orthogonal state is fully reflected, 45-degree-offset linear states
/// and circular light split evenly.
#[inline]
pub fn split_fraction<F: Scalar>(pol: Polarization, basis: Basis, arm: u8) -> F {
    let arm0 = match (basis, pol) {
        (Basis::Rectilinear, Polarization::Lin0) => F::one(),
        (Basis::Rectilinear, Polarization::Lin90) => F::zero(),
        (Basis::Diagonal, Polarization::Lin45) => F::one(),
        (Basis::Diagonal, Polarization::Lin135) => F::zero(),
        _ => F::half(),
    };
    if arm & 1 == 0 {
        arm0
    } else {
        F::one() - arm0
    }
}

/// Projects `pol` onto `basis`, sampling the outcome bit where the
/// projection is not deterministic. Consumes one draw.
#[inline]
pub fn measure_polarization<F: Scalar>(
    pol: Polarization,
    basis: Basis,
    rng: &mut RandomSource,
) -> u8 {
    let p0: F = split_fraction(pol, basis, 0);
    if rng.bernoulli(p0) {
        0
    } else {
        1
    }
}

/// Routes one gate of illumination through the receiver optics and returns
/// per-detector doses. `bob_basis` is the active basis selection; the
/// passive splitter ignores it. Consumes rng draws only for signal photons.
pub fn route<F: Scalar>(
    architecture: ReceiverArchitecture,
    illumination: &GateIllumination<F>,
    bob_basis: Basis,
    rng: &mut RandomSource,
) -> DetectorDose<F> {
    let mut dose = DetectorDose::zero(architecture.detector_count());
    for pulse in &illumination.pulses {
        match (architecture, pulse.kind) {
            (ReceiverArchitecture::PassiveBS, PulseKind::SignalPhoton) => {
                if pulse.photons > F::zero() {
                    // the 50/50 BS picks the basis, the PBS picks the arm
                    let basis = Basis::from_bit(rng.next_bit());
                    let bit = measure_polarization::<F>(pulse.polarization, basis, rng);
                    dose.doses[detector_index(basis, bit)].add(pulse.kind, pulse.photons);
                }
            }
            (ReceiverArchitecture::PassiveBS, _) => {
                for basis in [Basis::Rectilinear, Basis::Diagonal] {
                    for arm in 0..2u8 {
                        let frac: F = split_fraction(pulse.polarization, basis, arm);
                        dose.doses[detector_index(basis, arm)]
                            .add(pulse.kind, pulse.photons * F::half() * frac);
                    }
                }
            }
            (ReceiverArchitecture::ActivePEM, PulseKind::SignalPhoton) => {
                if pulse.photons > F::zero() {
                    let bit = measure_polarization::<F>(pulse.polarization, bob_basis, rng);
                    dose.doses[bit as usize].add(pulse.kind, pulse.photons);
                }
            }
            (ReceiverArchitecture::ActivePEM, _) => {
                for arm in 0..2u8 {
                    let frac: F = split_fraction(pulse.polarization, bob_basis, arm);
                    dose.doses[arm as usize].add(pulse.kind, pulse.photons * frac);
                }
            }
            (ReceiverArchitecture::ExclusiveMirror, PulseKind::SignalPhoton) => {
                if pulse.photons > F::zero() {
                    let bit = measure_polarization::<F>(pulse.polarization, bob_basis, rng);
                    dose.doses[detector_index(bob_basis, bit)].add(pulse.kind, pulse.photons);
                }
            }
            (ReceiverArchitecture::ExclusiveMirror, _) => {
                // the mirror steers every photon into the selected basis;
                // the other basis's detectors see exactly nothing
                for arm in 0..2u8 {
                    let frac: F = split_fraction(pulse.polarization, bob_basis, arm);
                    dose.doses[detector_index(bob_basis, arm)]
                        .add(pulse.kind, pulse.photons * frac);
                }
            }
        }
    }
    dose
}
