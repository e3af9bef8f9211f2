//! Run configuration: defaults, named presets, TOML file loading, and the
//! override pipeline.
//!
//! Precedence is strictly layered: built-in defaults, then a named preset,
//! then a config file, then command-line flags. Every numeric field is
//! range-checked with a field-level message before any gate executes.
//!
//! Faked-state pulse power depends on the receiver in front of it, so when
//! neither a preset nor the user pins `p_pulse`/`p_cw`, they are derived
//! from the final architecture and thresholds after all layers are applied.

use serde::{Deserialize, Serialize};

use crate::alice::ChannelConfig;
use crate::detector::DetectorConfig;
use crate::eve::{tailored_pulse_power, AttackKind, AttackStrategy};
use crate::output::OutputOptions;
use crate::receiver::ReceiverArchitecture;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Default master seed for reproducible runs.
pub const DEFAULT_SEED: u64 = 0xA11C_EB0B;

/// Everything one batch run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig<F: Scalar> {
    pub gates: u64,
    pub sessions: u32,
    pub seed: u64,
    pub architecture: ReceiverArchitecture,
    pub detectors: DetectorConfig<F>,
    pub channel: ChannelConfig<F>,
    pub attack: AttackStrategy<F>,
    /// Fraction of sifted bits publicly compared (and burned) for QBER.
    pub qber_sample_fraction: F,
    /// Keep per-gate records in transcripts (memory-heavy on long runs).
    pub keep_records: bool,
    /// Where and how to write results; `None` prints a summary only.
    pub output: Option<OutputOptions>,
    /// Whether the attack powers were pinned by a preset, file, or flag,
    /// as opposed to awaiting architecture-based derivation.
    #[serde(default)]
    powers_pinned: bool,
}

impl<F: Scalar> Default for SimulationConfig<F> {
    fn default() -> Self {
        SimulationConfig {
            gates: 1_000_000,
            sessions: 1,
            seed: DEFAULT_SEED,
            architecture: ReceiverArchitecture::PassiveBS,
            detectors: DetectorConfig::default(),
            channel: ChannelConfig::default(),
            attack: AttackStrategy::default(),
            qber_sample_fraction: F::real(0.1),
            keep_records: false,
            output: None,
            powers_pinned: false,
        }
    }
}

impl<F: Scalar> SimulationConfig<F> {
    /// Marks attack powers as explicitly chosen, exempting them from
    /// architecture-based derivation in [`finalize`](Self::finalize).
    pub fn pin_powers(&mut self) {
        self.powers_pinned = true;
    }

    /// Derives unpinned attack powers from the final architecture and
    /// detector thresholds: the faked pulse lands mid-window for the
    /// receiver in front of it, the CW keeps every reachable detector at
    /// or above the blinding threshold.
    pub fn finalize(&mut self) {
        if !self.powers_pinned {
            self.attack.pulse_power =
                tailored_pulse_power(self.architecture, self.detectors.click_threshold);
            self.attack.cw_power = F::real(4.0) * self.detectors.blind_threshold;
            self.powers_pinned = true;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detectors.validate("detectors")?;
        self.channel.validate("channel")?;
        self.attack.validate("attack")?;
        let f = self.qber_sample_fraction;
        if !(f > F::zero()) || f > F::one() || !f.is_finite() {
            return Err(Error::invalid(
                "run.qber_sample_fraction",
                format!("{f} is outside (0, 1]"),
            ));
        }
        Ok(())
    }
}

/// Parses a `--receiver` value or `[receiver] architecture` key.
pub fn parse_architecture(name: &str) -> Result<ReceiverArchitecture> {
    match name {
        "passive" => Ok(ReceiverArchitecture::PassiveBS),
        "pem" => Ok(ReceiverArchitecture::ActivePEM),
        "mirror" => Ok(ReceiverArchitecture::ExclusiveMirror),
        other => Err(Error::invalid(
            "receiver.architecture",
            format!("unknown receiver '{other}' (expected passive, pem, or mirror)"),
        )),
    }
}

/// Parses a `--attack` value: `none`, `intercept`, `blind`,
/// `blind-partial:<fraction>`, or `rng-control`.
pub fn parse_attack_spec<F: Scalar>(spec: &str) -> Result<AttackKind<F>> {
    match spec {
        "none" => Ok(AttackKind::NoAttack),
        "intercept" => Ok(AttackKind::InterceptResend),
        "blind" => Ok(AttackKind::BlindingFull),
        "rng-control" => Ok(AttackKind::RngControl),
        other => {
            if let Some(raw) = other.strip_prefix("blind-partial:") {
                let fraction: f64 = raw
                    .parse()
                    .map_err(|_| Error::invalid("attack.kind", format!("bad fraction '{raw}'")))?;
                Ok(AttackKind::BlindingPartial {
                    fraction: F::real(fraction),
                })
            } else {
                Err(Error::invalid(
                    "attack.kind",
                    format!(
                        "unknown attack '{other}' (expected none, intercept, blind, \
                         blind-partial:<f>, or rng-control)"
                    ),
                ))
            }
        }
    }
}

/// Expands a named preset into a full configuration. Presets pin the
/// attack powers (they are part of the scenario being reproduced).
pub fn preset<F: Scalar>(name: &str) -> Result<SimulationConfig<F>> {
    let mut cfg = SimulationConfig::<F>::default();
    let ideal = DetectorConfig {
        efficiency: F::one(),
        dark_prob: F::zero(),
        ..DetectorConfig::default()
    };
    let blind_power = F::real(4.0) * cfg.detectors.blind_threshold;
    match name {
        "baseline" => {
            cfg.architecture = ReceiverArchitecture::PassiveBS;
            cfg.detectors = ideal;
        }
        "fig1a-blind" | "fig1b-blind" | "fig1c-blind" => {
            cfg.architecture = match name {
                "fig1a-blind" => ReceiverArchitecture::PassiveBS,
                "fig1b-blind" => ReceiverArchitecture::ActivePEM,
                _ => ReceiverArchitecture::ExclusiveMirror,
            };
            cfg.attack.kind = AttackKind::BlindingFull;
            cfg.attack.cw_power = blind_power;
            cfg.attack.pulse_power =
                tailored_pulse_power(cfg.architecture, cfg.detectors.click_threshold);
        }
        "intercept" => {
            cfg.architecture = ReceiverArchitecture::PassiveBS;
            cfg.detectors = ideal;
            cfg.attack.kind = AttackKind::InterceptResend;
            cfg.qber_sample_fraction = F::half();
        }
        "rng-control" => {
            cfg.architecture = ReceiverArchitecture::ActivePEM;
            cfg.detectors = ideal;
            cfg.attack.kind = AttackKind::RngControl;
            cfg.attack.cw_power = F::zero();
            cfg.attack.pulse_power = F::zero();
        }
        "weak-cw" => {
            // CW trickled to 10 photons per selected detector: far below
            // the power a real blinding attack needs, yet these sensitive
            // detectors still saturate, and every basis switch exposes a
            // freshly receptive pair to all 10 photons at once. Dark rate
            // and transmittance sit at the documented operating point of
            // ~1% per-gate noise and accidental coincidences near 1e-4.
            cfg.architecture = ReceiverArchitecture::ExclusiveMirror;
            cfg.detectors.dark_prob = F::real(2.5e-3);
            cfg.detectors.blind_threshold = F::real(10.0);
            cfg.channel = ChannelConfig::from_total(F::real(0.04));
            cfg.attack.kind = AttackKind::BlindingFull;
            cfg.attack.cw_power = F::real(20.0);
            cfg.attack.pulse_power = F::zero();
        }
        other => {
            if let Some(raw) = other.strip_prefix("partial:") {
                let fraction: f64 = raw
                    .parse()
                    .map_err(|_| Error::UnknownPreset(other.to_string()))?;
                cfg.architecture = ReceiverArchitecture::ExclusiveMirror;
                cfg.attack.kind = AttackKind::BlindingPartial {
                    fraction: F::real(fraction),
                };
                cfg.attack.cw_power = blind_power;
                cfg.attack.pulse_power =
                    tailored_pulse_power(cfg.architecture, cfg.detectors.click_threshold);
            } else {
                return Err(Error::UnknownPreset(other.to_string()));
            }
        }
    }
    cfg.pin_powers();
    Ok(cfg)
}

/// The config-file schema. Every key is optional and overlays the current
/// configuration; unknown keys anywhere are errors.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    run: RunSection,
    receiver: ReceiverSection,
    detectors: DetectorsSection,
    channel: ChannelSection,
    attack: AttackSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    gates: Option<u64>,
    sessions: Option<u32>,
    seed: Option<u64>,
    qber_sample_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReceiverSection {
    architecture: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectorsSection {
    efficiency: Option<f64>,
    dark_prob: Option<f64>,
    blind_threshold: Option<f64>,
    click_threshold: Option<f64>,
    superlinear_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ChannelSection {
    eta: Option<f64>,
    eta_ae: Option<f64>,
    eta_eb: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AttackSection {
    kind: Option<String>,
    fraction: Option<f64>,
    p_cw: Option<f64>,
    p_pulse: Option<f64>,
    prudent_noise: Option<bool>,
    noise_rate: Option<f64>,
    station_efficiency: Option<f64>,
}

impl FileConfig {
    /// Parses TOML text. Syntax errors and unknown keys are reported with
    /// the parser's position information.
    pub fn parse(text: &str) -> Result<FileConfig> {
        toml::from_str(text).map_err(|e| Error::invalid("config file", e.to_string()))
    }

    /// Overlays every present key onto `cfg`.
    pub fn apply<F: Scalar>(&self, cfg: &mut SimulationConfig<F>) -> Result<()> {
        if let Some(v) = self.run.gates {
            cfg.gates = v;
        }
        if let Some(v) = self.run.sessions {
            cfg.sessions = v;
        }
        if let Some(v) = self.run.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.run.qber_sample_fraction {
            cfg.qber_sample_fraction = F::real(v);
        }
        if let Some(name) = &self.receiver.architecture {
            cfg.architecture = parse_architecture(name)?;
        }

        let d = &self.detectors;
        for (slot, value) in [
            (&mut cfg.detectors.efficiency, d.efficiency),
            (&mut cfg.detectors.dark_prob, d.dark_prob),
            (&mut cfg.detectors.blind_threshold, d.blind_threshold),
            (&mut cfg.detectors.click_threshold, d.click_threshold),
            (
                &mut cfg.detectors.superlinear_exponent,
                d.superlinear_exponent,
            ),
        ] {
            if let Some(v) = value {
                *slot = F::real(v);
            }
        }

        let c = &self.channel;
        if c.eta.is_some() && (c.eta_ae.is_some() || c.eta_eb.is_some()) {
            return Err(Error::invalid(
                "channel.eta",
                "set either eta or the eta_ae/eta_eb pair, not both".to_string(),
            ));
        }
        if let Some(v) = c.eta {
            cfg.channel = ChannelConfig::from_total(F::real(v));
        }
        if let Some(v) = c.eta_ae {
            cfg.channel.eta_ae = F::real(v);
        }
        if let Some(v) = c.eta_eb {
            cfg.channel.eta_eb = F::real(v);
        }

        let a = &self.attack;
        if let Some(kind) = &a.kind {
            cfg.attack.kind = parse_attack_spec(kind)?;
        }
        if let Some(f) = a.fraction {
            match &mut cfg.attack.kind {
                AttackKind::BlindingPartial { fraction } => *fraction = F::real(f),
                _ => {
                    return Err(Error::invalid(
                        "attack.fraction",
                        "only meaningful for kind = \"blind-partial\"".to_string(),
                    ))
                }
            }
        }
        if let Some(v) = a.p_cw {
            cfg.attack.cw_power = F::real(v);
            cfg.pin_powers();
        }
        if let Some(v) = a.p_pulse {
            cfg.attack.pulse_power = F::real(v);
            cfg.pin_powers();
        }
        if let Some(v) = a.prudent_noise {
            cfg.attack.prudent_noise = v;
        }
        if let Some(v) = a.noise_rate {
            cfg.attack.noise_rate = F::real(v);
        }
        if let Some(v) = a.station_efficiency {
            cfg.attack.station_efficiency = F::real(v);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Config = SimulationConfig<f64>;

    #[test]
    fn defaults_are_valid_and_finalize_to_passive_powers() {
        let mut cfg = Config::default();
        cfg.validate().unwrap();
        cfg.finalize();
        assert_eq!(cfg.attack.pulse_power, 150.0);
        assert_eq!(cfg.attack.cw_power, 400.0);
    }

    #[test]
    fn preset_table_matches_the_scenarios() {
        let baseline: Config = preset("baseline").unwrap();
        assert_eq!(baseline.architecture, ReceiverArchitecture::PassiveBS);
        assert_eq!(baseline.attack.kind, AttackKind::NoAttack);
        assert_eq!(baseline.detectors.efficiency, 1.0);
        assert_eq!(baseline.detectors.dark_prob, 0.0);
        assert_eq!(baseline.channel.total(), 1.0);

        let a: Config = preset("fig1a-blind").unwrap();
        assert_eq!(a.architecture, ReceiverArchitecture::PassiveBS);
        assert_eq!(a.attack.kind, AttackKind::BlindingFull);
        assert_eq!((a.attack.cw_power, a.attack.pulse_power), (400.0, 150.0));
        assert_eq!(a.detectors.efficiency, 0.25);

        let b: Config = preset("fig1b-blind").unwrap();
        assert_eq!(b.architecture, ReceiverArchitecture::ActivePEM);
        assert_eq!(b.attack.pulse_power, 75.0);

        let c: Config = preset("fig1c-blind").unwrap();
        assert_eq!(c.architecture, ReceiverArchitecture::ExclusiveMirror);
        assert_eq!(c.attack.pulse_power, 75.0);

        let i: Config = preset("intercept").unwrap();
        assert_eq!(i.attack.kind, AttackKind::InterceptResend);
        assert_eq!(i.qber_sample_fraction, 0.5);

        let r: Config = preset("rng-control").unwrap();
        assert_eq!(r.architecture, ReceiverArchitecture::ActivePEM);
        assert_eq!(r.attack.kind, AttackKind::RngControl);
        assert_eq!((r.attack.cw_power, r.attack.pulse_power), (0.0, 0.0));

        let p: Config = preset("partial:0.25").unwrap();
        assert_eq!(p.architecture, ReceiverArchitecture::ExclusiveMirror);
        assert_eq!(
            p.attack.kind,
            AttackKind::BlindingPartial { fraction: 0.25 }
        );

        let w: Config = preset("weak-cw").unwrap();
        assert_eq!(w.architecture, ReceiverArchitecture::ExclusiveMirror);
        assert_eq!(w.attack.cw_power, 20.0);
        assert_eq!(w.attack.pulse_power, 0.0);
        assert_eq!(w.detectors.blind_threshold, 10.0);
        assert_eq!(w.detectors.dark_prob, 2.5e-3);
        assert_eq!(w.channel.total(), 0.04);

        assert!(matches!(
            preset::<f64>("fig2-blind"),
            Err(Error::UnknownPreset(_))
        ));
        let over: Config = preset("partial:1.5").unwrap();
        assert!(over.validate().is_err(), "fraction out of range");
    }

    #[test]
    fn attack_spec_grammar_round_trips() {
        assert_eq!(
            parse_attack_spec::<f64>("none").unwrap(),
            AttackKind::NoAttack
        );
        assert_eq!(
            parse_attack_spec::<f64>("intercept").unwrap(),
            AttackKind::InterceptResend
        );
        assert_eq!(
            parse_attack_spec::<f64>("blind").unwrap(),
            AttackKind::BlindingFull
        );
        assert_eq!(
            parse_attack_spec::<f64>("blind-partial:0.1").unwrap(),
            AttackKind::BlindingPartial { fraction: 0.1 }
        );
        assert_eq!(
            parse_attack_spec::<f64>("rng-control").unwrap(),
            AttackKind::RngControl
        );
        assert!(parse_attack_spec::<f64>("blind-partial:x").is_err());
        assert!(parse_attack_spec::<f64>("jam").is_err());
    }

    #[test]
    fn file_overlays_and_rejects_unknown_keys() {
        let mut cfg: Config = preset("fig1c-blind").unwrap();
        let file = FileConfig::parse(
            r#"
            [run]
            gates = 5000
            seed = 7

            [detectors]
            dark_prob = 0.001

            [attack]
            prudent_noise = true
            "#,
        )
        .unwrap();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.gates, 5000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.detectors.dark_prob, 0.001);
        assert!(cfg.attack.prudent_noise);
        // untouched preset values survive
        assert_eq!(cfg.attack.pulse_power, 75.0);
        cfg.validate().unwrap();

        assert!(FileConfig::parse("[run]\nbogus = 1\n").is_err());
        assert!(FileConfig::parse("[detektors]\nefficiency = 1\n").is_err());
        assert!(FileConfig::parse("[run]\ngates = \n").is_err());
    }

    #[test]
    fn file_channel_shorthand_conflicts_are_rejected() {
        let file = FileConfig::parse("[channel]\neta = 0.3\neta_eb = 0.5\n").unwrap();
        let mut cfg = Config::default();
        let err = file.apply(&mut cfg).unwrap_err();
        assert!(err.to_string().contains("channel.eta"));

        let file = FileConfig::parse("[channel]\neta = 0.3\n").unwrap();
        file.apply(&mut cfg).unwrap();
        assert_eq!((cfg.channel.eta_ae, cfg.channel.eta_eb), (0.3, 1.0));

        let file = FileConfig::parse("[channel]\neta_ae = 0.5\neta_eb = 0.9\n").unwrap();
        file.apply(&mut cfg).unwrap();
        assert_eq!((cfg.channel.eta_ae, cfg.channel.eta_eb), (0.5, 0.9));
    }

    #[test]
    fn out_of_range_values_are_rejected_with_field_names() {
        let mut cfg = Config::default();
        let file = FileConfig::parse("[detectors]\nefficiency = 1.3\n").unwrap();
        file.apply(&mut cfg).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("detectors.efficiency"));

        let mut cfg = Config::default();
        let file = FileConfig::parse("[run]\nqber_sample_fraction = 0.0\n").unwrap();
        file.apply(&mut cfg).unwrap();
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("qber_sample_fraction"));
    }

    #[test]
    fn fraction_key_requires_the_partial_kind() {
        let mut cfg = Config::default();
        let file = FileConfig::parse("[attack]\nfraction = 0.2\n").unwrap();
        assert!(file.apply(&mut cfg).is_err());

        let file =
            FileConfig::parse("[attack]\nkind = \"blind-partial:0.5\"\nfraction = 0.2\n").unwrap();
        let mut cfg = Config::default();
        file.apply(&mut cfg).unwrap();
        assert_eq!(
            cfg.attack.kind,
            AttackKind::BlindingPartial { fraction: 0.2 }
        );
    }

    #[test]
    fn unpinned_powers_follow_the_architecture() {
        let mut cfg = Config::default();
        let file = FileConfig::parse(
            "[receiver]\narchitecture = \"mirror\"\n[attack]\nkind = \"blind\"\n",
        )
        .unwrap();
        file.apply(&mut cfg).unwrap();
        cfg.finalize();
        assert_eq!(cfg.attack.pulse_power, 75.0);
        assert_eq!(cfg.attack.cw_power, 400.0);

        // an explicit p_pulse survives finalize
        let mut cfg = Config::default();
        let file = FileConfig::parse("[attack]\np_pulse = 120\n").unwrap();
        file.apply(&mut cfg).unwrap();
        cfg.finalize();
        assert_eq!(cfg.attack.pulse_power, 120.0);
    }
}
