//! Alice's transmitter and the lossy quantum channel.
//!
//! Each gate Alice draws a key bit and a basis from her private source,
//! encodes them as one linearly polarized photon, and launches it into the
//! fiber. Loss is split into two legs around Eve's position: Alice to Eve
//! (`eta_ae`) is applied here at transmission, Eve to Bob (`eta_eb`) is
//! applied by the session loop to whatever leaves Eve's site.

use serde::{Deserialize, Serialize};

use crate::optics::{encode, Basis, GateIllumination, LightPulse, Polarization};
use crate::rng::RandomSource;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// One prepared BB84 qubit, with its fate through the first channel leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedQubit {
    pub bit: u8,
    pub basis: Basis,
    pub polarization: Polarization,
    /// Whether the photon survived the Alice-to-Eve leg.
    pub surviving: bool,
}

/// Channel transmittances, each a survival probability per photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig<F: Scalar> {
    pub eta_ae: F,
    pub eta_eb: F,
}

impl<F: Scalar> Default for ChannelConfig<F> {
    fn default() -> Self {
        ChannelConfig {
            eta_ae: F::one(),
            eta_eb: F::one(),
        }
    }
}

impl<F: Scalar> ChannelConfig<F> {
    /// Lumps all loss into the first leg, putting Eve right at Bob's door;
    /// that is her strongest position and the usual worst-case assumption.
    pub fn from_total(eta: F) -> Self {
        ChannelConfig {
            eta_ae: eta,
            eta_eb: F::one(),
        }
    }

    /// End-to-end transmittance seen when nobody tampers with the channel.
    pub fn total(&self) -> F {
        self.eta_ae * self.eta_eb
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [("eta_ae", self.eta_ae), ("eta_eb", self.eta_eb)] {
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

/// Draws one (bit, basis) pair from Alice's source and encodes it. The bit
/// is drawn first, then the basis; both are single-bit draws.
pub fn prepare(rng: &mut RandomSource) -> PreparedQubit {
    let bit = rng.next_bit();
    let basis = Basis::from_bit(rng.next_bit());
    PreparedQubit {
        bit,
        basis,
        polarization: encode(bit, basis),
        surviving: true,
    }
}

/// Sends the qubit down the first channel leg. With probability `eta_ae`
/// the photon survives and the gate carries it; otherwise the gate is dark.
/// Consumes exactly one draw.
pub fn transmit<F: Scalar>(
    qubit: PreparedQubit,
    eta_ae: F,
    rng: &mut RandomSource,
) -> (PreparedQubit, GateIllumination<F>) {
    let surviving = rng.bernoulli(eta_ae);
    let sent = PreparedQubit { surviving, ..qubit };
    let illumination = if surviving {
        GateIllumination::of(&[LightPulse::signal(qubit.polarization)])
    } else {
        GateIllumination::dark()
    };
    (sent, illumination)
}

/// Applies one lossy leg to a gate of light in flight: each signal photon
/// survives with probability `eta`, classical pulse powers scale by `eta`.
/// `eta = 1` is an exact identity and consumes no draws.
pub fn attenuate<F: Scalar>(
    illumination: &GateIllumination<F>,
    eta: F,
    rng: &mut RandomSource,
) -> GateIllumination<F> {
    if eta == F::one() {
        return illumination.clone();
    }
    let mut out = GateIllumination::dark();
    for pulse in &illumination.pulses {
        match pulse.kind {
            crate::optics::PulseKind::SignalPhoton => {
                if rng.bernoulli(eta) {
                    out.push(*pulse);
                }
            }
            _ => {
                let attenuated = LightPulse {
                    photons: pulse.photons * eta,
                    ..*pulse
                };
                if attenuated.photons > F::zero() {
                    out.push(attenuated);
                }
            }
        }
    }
    out
}
