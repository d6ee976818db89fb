//! Configuration file: one TOML section per module, every key optional, unknown keys rejected.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qdtele::protocol::{
    EntangleConfig, ExperimentConfig, G2Config, HomConfig, InputState, NoiseModel, QubitConfig, GHZ,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub lifetime_ps: f64,
    /// Color splitting of the teleportation and spin-photon runs.
    pub delta_ghz: f64,
    /// Color splitting of the photonic-qubit and interference runs.
    pub qubit_delta_ghz: f64,
    pub p_exc: f64,
    pub residual_g2: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { lifetime_ps: 650.0, delta_ghz: 4.9, qubit_delta_ghz: 3.45, p_exc: 0.8, residual_g2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinSection {
    /// `inf` switches dephasing off.
    pub t2star_ps: f64,
    pub t_echo_ps: f64,
    pub readout_error: f64,
    pub p_up_init: f64,
}

impl Default for SpinSection {
    fn default() -> Self {
        let n = NoiseModel::calibrated();
        Self { t2star_ps: n.t2star, t_echo_ps: 13_000.0, readout_error: n.readout_error, p_up_init: n.p_up_init }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSection {
    pub overlap: f64,
    /// Two-fold window `[−half_window, half_window]`.
    pub half_window_ps: f64,
    pub side_periods: usize,
    /// Extra delay of one photon in the interference run.
    pub delay_ps: f64,
    /// State of both photons in the interference run.
    pub hom_input: InputState,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        Self { overlap: 0.80, half_window_ps: 1200.0, side_periods: 3, delay_ps: 0.0, hom_input: InputState::Plus }
    }
}

/// `all` or one input label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSelection {
    All,
    OmegaR,
    OmegaB,
    Plus,
    Minus,
}

impl InputSelection {
    pub fn inputs(self) -> Vec<InputState> {
        match self {
            InputSelection::All => InputState::ALL.to_vec(),
            InputSelection::OmegaR => vec![InputState::OmegaR],
            InputSelection::OmegaB => vec![InputState::OmegaB],
            InputSelection::Plus => vec![InputState::Plus],
            InputSelection::Minus => vec![InputState::Minus],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub input: InputSelection,
    pub repetition_ps: f64,
    pub propagation_ps: f64,
    pub herald_start_ps: f64,
    pub herald_length_ps: f64,
    pub readout_start_ps: f64,
    pub readout_length_ps: f64,
    pub periods: usize,
    /// Trials (teleport, g2), pairs (hom) or events (entangle, qubit).
    pub trials: u64,
    pub seed: u64,
    pub efficiency: f64,
    /// Histogram range of the spin-photon correlation run.
    pub entangle_window_ps: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            input: InputSelection::All,
            repetition_ps: e.repetition,
            propagation_ps: e.propagation,
            herald_start_ps: e.herald_start,
            herald_length_ps: e.herald_length,
            readout_start_ps: e.readout_start,
            readout_length_ps: e.readout_length,
            periods: e.periods,
            trials: e.trials,
            seed: e.seed,
            efficiency: 1.0,
            entangle_window_ps: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagstreamSection {
    pub bin_width_ps: f64,
    pub jitter_ps: f64,
    pub dark_rate_hz: f64,
    /// Beat-fit period search range of the photonic-qubit run.
    pub fit_min_ps: f64,
    pub fit_max_ps: f64,
    pub qubit_window_ps: f64,
    /// Write raw clicks of Monte Carlo teleportation runs.
    pub record_tags: bool,
}

impl Default for TagstreamSection {
    fn default() -> Self {
        Self {
            bin_width_ps: 50.0,
            jitter_ps: 60.0,
            dark_rate_hz: 0.0,
            fit_min_ps: 150.0,
            fit_max_ps: 400.0,
            qubit_window_ps: 2000.0,
            record_tags: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub source: SourceSection,
    pub spin: SpinSection,
    pub interference: InterferenceSection,
    pub protocol: ProtocolSection,
    pub tagstream: TagstreamSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.message()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks everything the experiment builders would reject, so that bad files fail early.
    pub fn check(&self) -> Result<()> {
        self.noise().validate()?;
        for input in InputState::ALL {
            self.experiment(input).validate()?;
        }
        self.hom().validate()?;
        self.entangle().validate()?;
        self.qubit().validate()?;
        if self.protocol.trials == 0 {
            bail!("protocol.trials must be positive");
        }
        Ok(())
    }

    /// The resolved configuration, every key spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            overlap: self.interference.overlap,
            jitter: self.tagstream.jitter_ps,
            t2star: self.spin.t2star_ps,
            p_exc: self.source.p_exc,
            p_up_init: self.spin.p_up_init,
            readout_error: self.spin.readout_error,
            dark_rate: self.tagstream.dark_rate_hz * 1e-12,
            efficiency: self.protocol.efficiency,
            residual_g2: self.source.residual_g2,
        }
    }

    pub fn experiment(&self, input: InputState) -> ExperimentConfig {
        let p = &self.protocol;
        ExperimentConfig {
            input,
            delta: self.source.delta_ghz * GHZ,
            lifetime: self.source.lifetime_ps,
            repetition: p.repetition_ps,
            t_echo: self.spin.t_echo_ps,
            propagation: p.propagation_ps,
            herald_start: p.herald_start_ps,
            herald_length: p.herald_length_ps,
            readout_start: p.readout_start_ps,
            readout_length: p.readout_length_ps,
            periods: p.periods,
            bin_width: self.tagstream.bin_width_ps,
            trials: p.trials,
            seed: p.seed,
        }
    }

    pub fn hom(&self) -> HomConfig {
        HomConfig {
            delta: self.source.qubit_delta_ghz * GHZ,
            lifetime: self.source.lifetime_ps,
            repetition: self.protocol.repetition_ps,
            half_window: self.interference.half_window_ps,
            side_periods: self.interference.side_periods,
            bin_width: self.tagstream.bin_width_ps,
            input: self.interference.hom_input,
            delay: self.interference.delay_ps,
            pairs: self.protocol.trials,
            seed: self.protocol.seed,
        }
    }

    pub fn entangle(&self) -> EntangleConfig {
        EntangleConfig {
            delta: self.source.delta_ghz * GHZ,
            lifetime: self.source.lifetime_ps,
            t_echo: self.spin.t_echo_ps,
            readout_length: self.protocol.readout_length_ps,
            window: self.protocol.entangle_window_ps,
            bin_width: self.tagstream.bin_width_ps,
            events: self.protocol.trials,
            seed: self.protocol.seed,
        }
    }

    pub fn qubit(&self) -> QubitConfig {
        QubitConfig {
            delta: self.source.qubit_delta_ghz * GHZ,
            lifetime: self.source.lifetime_ps,
            input: InputState::Plus,
            window: self.tagstream.qubit_window_ps,
            bin_width: self.tagstream.bin_width_ps,
            fit_min: self.tagstream.fit_min_ps,
            fit_max: self.tagstream.fit_max_ps,
            events: self.protocol.trials,
            seed: self.protocol.seed,
        }
    }

    pub fn g2(&self) -> G2Config {
        G2Config {
            lifetime: self.source.lifetime_ps,
            repetition: self.protocol.repetition_ps,
            half_window: self.interference.half_window_ps,
            side_periods: self.interference.side_periods,
            bin_width: self.tagstream.bin_width_ps,
            trials: self.protocol.trials,
            seed: self.protocol.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::parse("[spin]\nt2_star_ps = 1000.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("t2_star_ps"), "{err:#}");
        assert!(Config::parse("[sourse]\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = Config::parse("[source]\np_exc = 0.5\n[spin]\nt2star_ps = inf\n").unwrap();
        let again = Config::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert!(again.spin.t2star_ps.is_infinite());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::parse("[interference]\noverlap = 1.5\n").is_err());
        assert!(Config::parse("[source]\nlifetime_ps = -1.0\n").is_err());
        assert!(Config::parse("[protocol]\ninput = \"diagonal\"\n").is_err());
    }
}
