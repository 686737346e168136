use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Species, MU_EARTH_KM3_S2, R_EARTH_KM};

/// Simulation settings. Key names carry their units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub runs: usize,
    pub time: TimeConfig,
    pub grid: GridConfig,
    pub policy: PolicyConfig,
    pub breakup: BreakupConfig,
    pub physics: PhysicsConfig,
    pub atmosphere: AtmosphereConfig,
    pub adr: AdrConfig,
    pub launch: LaunchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_days: f64,
    pub horizon_years: f64,
    /// calendar year of epoch 0
    pub start_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub alt_min_km: f64,
    pub alt_max_km: f64,
    pub shell_km: f64,
    pub inc_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// collision avoidance success fraction
    pub s_cam: f64,
    /// post-mission disposal failure fraction
    pub gamma: f64,
    /// small-fragment collision multiplier
    pub kappa: f64,
    pub mission_lifetime_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakupConfig {
    pub lc_min_m: f64,
    /// radius bins per node for colliding-pair selection
    pub n_size_bins: usize,
    /// replaces the built-in breakup constants when set
    pub constants_file: Option<PathBuf>,
    pub collisions_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircularDrag {
    /// zero-eccentricity limit of the closed form
    Limit,
    /// the closed form evaluated with its unit-β circular branch
    UnitBeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub mu_km3_s2: f64,
    pub r_earth_km: f64,
    pub circular_drag: CircularDrag,
    pub decay_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    Table,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtmosphereConfig {
    pub mode: DensityMode,
    /// CSV (altitude_km, phase_index, rho_kg_m3); the shipped table when unset
    pub density_file: Option<PathBuf>,
    pub solar_cycle_years: f64,
    /// years from epoch 0 to the first solar maximum
    pub solar_max_offset_years: f64,
    pub exp_rho0_kg_m3: f64,
    pub exp_h0_km: f64,
    pub exp_scale_height_km: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciesRates {
    pub payload: f64,
    pub upper_stage: f64,
    pub non_manoeuvrable: f64,
    pub fragment: f64,
}

impl SpeciesRates {
    pub fn get(&self, species: Species) -> f64 {
        match species {
            Species::Payload => self.payload,
            Species::UpperStage => self.upper_stage,
            Species::NonManoeuvrable => self.non_manoeuvrable,
            Species::Fragment => self.fragment,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdrConfig {
    pub removals_per_year: SpeciesRates,
    /// restrict removals to these site ids; all sites when empty
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaunchConfig {
    pub enabled: bool,
    /// built-in forecast name ("lm1", "lm2", "lm3") when no file is given
    pub preset: String,
    /// launch model file written by `fit-launch`
    pub model_file: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 2023,
            runs: 1,
            time: TimeConfig::default(),
            grid: GridConfig::default(),
            policy: PolicyConfig::default(),
            breakup: BreakupConfig::default(),
            physics: PhysicsConfig::default(),
            atmosphere: AtmosphereConfig::default(),
            adr: AdrConfig::default(),
            launch: LaunchConfig::default(),
        }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt_days: 30.0,
            horizon_years: 100.0,
            start_year: 2023.0,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            alt_min_km: 200.0,
            alt_max_km: 2200.0,
            shell_km: 50.0,
            inc_deg: 60.0,
        }
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            s_cam: 0.9999,
            gamma: 0.05,
            kappa: 5.3,
            mission_lifetime_years: 5.0,
        }
    }
}

impl Default for BreakupConfig {
    fn default() -> Self {
        BreakupConfig {
            lc_min_m: 0.1,
            n_size_bins: 50,
            constants_file: None,
            collisions_enabled: true,
        }
    }
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            mu_km3_s2: MU_EARTH_KM3_S2,
            r_earth_km: R_EARTH_KM,
            circular_drag: CircularDrag::Limit,
            decay_enabled: true,
        }
    }
}

impl Default for AtmosphereConfig {
    fn default() -> Self {
        AtmosphereConfig {
            mode: DensityMode::Table,
            density_file: None,
            solar_cycle_years: 11.0,
            // cycle 25 peaked around late 2024
            solar_max_offset_years: 1.5,
            exp_rho0_kg_m3: 2.5e-10,
            exp_h0_km: 200.0,
            exp_scale_height_km: 60.0,
        }
    }
}

impl Default for LaunchConfig {
    fn default() -> Self {
        LaunchConfig {
            enabled: false,
            preset: "lm2".to_string(),
            model_file: None,
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        frac("s_cam", self.policy.s_cam)?;
        frac("gamma", self.policy.gamma)?;
        if !(self.policy.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa = {} must be >= 0", self.policy.kappa)));
        }
        if !(self.time.dt_days > 0.0) {
            return Err(Error::Config(format!("dt_days = {} must be > 0", self.time.dt_days)));
        }
        if !(self.time.horizon_years >= 0.0) {
            return Err(Error::Config("horizon_years must be >= 0".into()));
        }
        if self.breakup.n_size_bins < 1 {
            return Err(Error::Config("n_size_bins must be >= 1".into()));
        }
        if !(self.breakup.lc_min_m > 0.0) {
            return Err(Error::Config("lc_min_m must be > 0".into()));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if !(self.policy.mission_lifetime_years >= 0.0) {
            return Err(Error::Config("mission_lifetime_years must be >= 0".into()));
        }
        Ok(())
    }

    pub fn dt_years(&self) -> f64 {
        self.time.dt_days / super::DAYS_PER_YEAR
    }

    /// Number of steps covering the horizon.
    pub fn n_steps(&self) -> usize {
        (self.time.horizon_years * super::DAYS_PER_YEAR / self.time.dt_days).round() as usize
    }

    /// SHA-256 over the canonical serialized form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.time.dt_days, 30.0);
        assert_eq!(cfg.policy.s_cam, 0.9999);
        assert_eq!(cfg.policy.gamma, 0.05);
        assert_eq!(cfg.policy.kappa, 5.3);
        assert_eq!(cfg.policy.mission_lifetime_years, 5.0);
        assert_eq!(cfg.breakup.n_size_bins, 50);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::default();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = SimConfig::from_toml_str("seed = 7\n[policy]\ngamma = 0.2\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.policy.gamma, 0.2);
        assert_eq!(cfg.policy.kappa, 5.3);
    }

    #[test]
    fn rejects_out_of_range_fractions() {
        let err = SimConfig::from_toml_str("[policy]\ns_cam = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("s_cam"));
        assert!(SimConfig::from_toml_str("[time]\ndt_days = 0\n").is_err());
        assert!(SimConfig::from_toml_str("[breakup]\nn_size_bins = 0\n").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(SimConfig::from_toml_str("[grid]\nshell = 10\n").is_err());
    }
}
