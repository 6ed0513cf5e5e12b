//! Scenario parameters.
//!
//! A config file is flat TOML; every key below is one scenario symbol and
//! unknown keys are rejected. Defaults reproduce the small simulation table
//! (3 users, 3 eRRHs, 16 antennas, 4 RF chains, ...), with power in dB against
//! unit noise variance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How uncached requested subfiles are assigned to eRRHs under HFIT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TransferRule {
    /// Rank all eRRHs by channel gain, keep the top `cooperation` positions,
    /// then drop those that already cache the subfile.
    #[default]
    RankThenExclude,
    /// Rank only the eRRHs that do not cache the subfile and take the top
    /// `cooperation` of them.
    ExcludeThenRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// K_U
    pub users: usize,
    /// K_R
    pub errhs: usize,
    /// N_t per eRRH
    pub tx_antennas: usize,
    /// N_r per user
    pub rx_antennas: usize,
    /// N_eRF per eRRH
    pub errh_rf_chains: usize,
    /// N_uRF per user
    pub user_rf_chains: usize,
    /// F
    pub files: usize,
    /// L
    pub subfiles: usize,
    /// S, normalized file size in bits/symbol
    pub file_size: f64,
    /// d_{f,l}
    pub streams: usize,
    /// P in dB relative to the noise variance
    pub power_db: f64,
    /// C in bits/symbol
    pub fronthaul: f64,
    /// ξ
    pub cache_fraction: f64,
    /// N_F
    pub cooperation: usize,
    /// σ²
    pub noise_var: f64,
    /// N_c
    pub scatterers: usize,
    /// σ²_{k,i}
    pub path_gain_var: f64,
    /// d0 in meters
    pub ref_distance: f64,
    /// α
    pub pathloss_exp: f64,
    pub cell_radius: f64,
    /// d_a / λ_s
    pub spacing_ratio: f64,
    /// ε, stopping tolerance on the minimum rate (bits/symbol)
    pub tolerance: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub backtrack_cap: usize,
    /// ε^(0) of the phase-increment trust region (radians)
    pub initial_radius: f64,
    /// η
    pub shrink: f64,
    pub solver_tolerance: f64,
    pub realizations: usize,
    pub seed: u64,
    pub transfer_rule: TransferRule,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            users: 3,
            errhs: 3,
            tx_antennas: 16,
            rx_antennas: 16,
            errh_rf_chains: 4,
            user_rf_chains: 4,
            files: 4,
            subfiles: 2,
            file_size: 10.0,
            streams: 1,
            power_db: 20.0,
            fronthaul: 5.0,
            cache_fraction: 0.5,
            cooperation: 2,
            noise_var: 1.0,
            scatterers: 5,
            path_gain_var: 1.0,
            ref_distance: 50.0,
            pathloss_exp: 3.0,
            cell_radius: 500.0,
            spacing_ratio: 0.5,
            tolerance: 1e-4,
            inner_iters: 500,
            outer_iters: 20,
            backtrack_cap: 10,
            initial_radius: 0.1,
            shrink: 0.1,
            solver_tolerance: 1e-7,
            realizations: 50,
            seed: 1,
            transfer_rule: TransferRule::RankThenExclude,
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one key from its textual value, using the same parsing as the file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml_string()).map_err(|e| Error::Config(e.to_string()))?;
        if !table.contains_key(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        // integers given where floats are expected
        let parsed = match (&table[key], parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(key.to_string(), parsed);
        let updated: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        *self = updated;
        Ok(())
    }

    /// Parses `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn power_linear(&self) -> f64 {
        10f64.powf(self.power_db / 10.0)
    }

    /// S̄ = S / L
    pub fn subfile_size(&self) -> f64 {
        self.file_size / self.subfiles as f64
    }

    /// ⌊ξ L F⌋
    pub fn cached_per_errh(&self) -> usize {
        (self.cache_fraction * (self.subfiles * self.files) as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("users", self.users),
            ("errhs", self.errhs),
            ("tx_antennas", self.tx_antennas),
            ("rx_antennas", self.rx_antennas),
            ("errh_rf_chains", self.errh_rf_chains),
            ("user_rf_chains", self.user_rf_chains),
            ("files", self.files),
            ("subfiles", self.subfiles),
            ("streams", self.streams),
            ("scatterers", self.scatterers),
            ("inner_iters", self.inner_iters),
            ("outer_iters", self.outer_iters),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.cache_fraction) {
            return Err(Error::Config(format!("cache_fraction {} outside [0, 1]", self.cache_fraction)));
        }
        if self.cooperation > self.errhs {
            return Err(Error::Config(format!(
                "cooperation {} exceeds errhs {}",
                self.cooperation, self.errhs
            )));
        }
        let per_user = self.subfiles * self.streams;
        let budget = self.user_rf_chains.min(self.errhs * self.errh_rf_chains);
        if per_user > budget {
            return Err(Error::Config(format!(
                "{per_user} streams per user exceed min(N_uRF, K_R N_eRF) = {budget}"
            )));
        }
        let checks = [
            ("file_size", self.file_size >= 0.0),
            ("fronthaul", self.fronthaul >= 0.0),
            ("noise_var", self.noise_var > 0.0),
            ("path_gain_var", self.path_gain_var > 0.0),
            ("ref_distance", self.ref_distance > 0.0),
            ("pathloss_exp", self.pathloss_exp > 0.0),
            ("cell_radius", self.cell_radius > 0.0),
            ("spacing_ratio", self.spacing_ratio > 0.0),
            ("tolerance", self.tolerance > 0.0),
            ("initial_radius", self.initial_radius > 0.0 && self.initial_radius <= 0.1),
            ("shrink", self.shrink > 0.0 && self.shrink < 1.0),
            ("solver_tolerance", self.solver_tolerance > 0.0),
            ("power_db", self.power_db.is_finite()),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::Config(format!("{name} out of range")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.cached_per_errh(), 4);
        assert!((cfg.power_linear() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = SystemConfig::from_toml_str("users = 2\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let mut cfg = SystemConfig::default();
        assert!(cfg.apply_override("bogus=1").is_err());
    }

    #[test]
    fn overrides_round_trip() {
        let mut cfg = SystemConfig::default();
        cfg.apply_override("fronthaul=2").unwrap();
        cfg.apply_override("cooperation = 0").unwrap();
        cfg.apply_override("transfer_rule=exclude-then-rank").unwrap();
        assert_eq!(cfg.fronthaul, 2.0);
        assert_eq!(cfg.cooperation, 0);
        assert_eq!(cfg.transfer_rule, TransferRule::ExcludeThenRank);
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn stream_budget_enforced() {
        let mut cfg = SystemConfig::default();
        cfg.user_rf_chains = 1;
        assert!(cfg.validate().is_err());
    }
}
