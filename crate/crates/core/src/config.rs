//! Run configuration.
//!
//! A TOML file with one table per element; every physical key carries its
//! SI unit as a suffix. A JSON document with the same structure (or a JSON
//! sidecar written by a previous run) is accepted as well.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity::{CavityKind, MirrorParams, Opo};
use crate::crystal::{angular_frequency, CrystalParams, PhaseMatchModel};
use crate::polarization::WaveplateParams;
use crate::sweep::{GridSpec, Range, ScanAxis};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalConfig {
    pub length_m: f64,
    pub pump_wavelength_m: f64,
    pub n_pump: f64,
    pub n_signal: f64,
    pub n_idler: f64,
    pub chi2_m_per_v: f64,
    pub dn_signal_dt_per_k: f64,
    pub dn_idler_dt_per_k: f64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self {
            length_m: 10e-3,
            pump_wavelength_m: 531.7e-9,
            n_pump: 1.75,
            n_signal: 1.75,
            n_idler: 1.75,
            chi2_m_per_v: 6.0e-12,
            dn_signal_dt_per_k: 1.3e-5,
            dn_idler_dt_per_k: 1.6e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveplateConfig {
    pub retardance_rad: f64,
    pub angle_rad: f64,
    pub mean_index: f64,
    pub thickness_m: f64,
}

impl Default for WaveplateConfig {
    fn default() -> Self {
        Self {
            retardance_rad: PI,
            angle_rad: 1f64.to_radians(),
            mean_index: 1.54,
            thickness_m: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    pub amplitude_reflectivity: f64,
    pub round_trip_loss: f64,
    pub zeta_pump_rad: f64,
    pub zeta_signal_rad: f64,
    pub zeta_idler_rad: f64,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self {
            amplitude_reflectivity: 0.9f64.sqrt(),
            round_trip_loss: 0.0,
            zeta_pump_rad: 0.0,
            zeta_signal_rad: 0.0,
            zeta_idler_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseMatchConfig {
    pub enabled: bool,
    pub t_pm_k: f64,
    pub fwhm_k: f64,
}

impl Default for PhaseMatchConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            t_pm_k: 0.0,
            fwhm_k: 15.0,
        }
    }
}

/// Single operating point for `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointConfig {
    pub dl_m: f64,
    pub dt_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_rad: Option<f64>,
    pub sigma: f64,
}

impl Default for PointConfig {
    fn default() -> Self {
        Self {
            dl_m: 0.0,
            dt_k: 0.0,
            xi_rad: None,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneConfig {
    pub dl_min_m: f64,
    pub dl_max_m: f64,
    pub dl_count: usize,
    pub dt_min_k: f64,
    pub dt_max_k: f64,
    pub dt_count: usize,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_rad: Option<f64>,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        Self {
            dl_min_m: -30e-9,
            dl_max_m: 30e-9,
            dl_count: 401,
            dt_min_k: -0.5,
            dt_max_k: 0.5,
            dt_count: 401,
            sigma: 3.0,
            xi_rad: None,
        }
    }
}

impl ZoneConfig {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            dl: Range::new(self.dl_min_m, self.dl_max_m, self.dl_count),
            dt: Range::new(self.dt_min_k, self.dt_max_k, self.dt_count),
            xi: self.xi_rad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonanceMode {
    /// σ^res against δT.
    #[serde(rename = "dT")]
    Temperature,
    /// σ^res against ξ.
    Xi,
    /// σ^res over the (ξ, δT) plane.
    Surface,
    /// σ^th against δL at fixed δT.
    Cut,
}

impl ResonanceMode {
    pub fn axis(self) -> Option<ScanAxis> {
        match self {
            ResonanceMode::Temperature => Some(ScanAxis::Temperature),
            ResonanceMode::Xi => Some(ScanAxis::Xi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    pub mode: ResonanceMode,
    pub dt_min_k: f64,
    pub dt_max_k: f64,
    pub dt_count: usize,
    pub xi_min_rad: f64,
    pub xi_max_rad: f64,
    pub xi_count: usize,
    pub dl_min_m: f64,
    pub dl_max_m: f64,
    pub dl_count: usize,
    /// Temperature held fixed for `xi` and `cut` scans.
    pub fixed_dt_k: f64,
    /// ξ held fixed for `dT` and `cut` scans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_xi_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_dl_m: Option<f64>,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self {
            mode: ResonanceMode::Temperature,
            dt_min_k: -20.0,
            dt_max_k: 20.0,
            dt_count: 201,
            xi_min_rad: 0.0,
            xi_max_rad: PI,
            xi_count: 101,
            dl_min_m: -60e-9,
            dl_max_m: 60e-9,
            dl_count: 601,
            fixed_dt_k: 0.0,
            fixed_xi_rad: None,
            window_dl_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WidthsConfig {
    pub sigma: f64,
    pub dt_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_rad: Option<f64>,
}

impl Default for WidthsConfig {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            dt_k: 0.0,
            xi_rad: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            format: OutputFormat::Csv,
        }
    }
}

/// Everything a run needs. Missing tables take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavityKind,
    pub crystal: CrystalConfig,
    pub waveplate: WaveplateConfig,
    pub mirror: MirrorConfig,
    pub phase_match: PhaseMatchConfig,
    pub point: PointConfig,
    pub zone: ZoneConfig,
    pub resonance: ResonanceConfig,
    pub widths: WidthsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cavity: CavityKind::Ring,
            crystal: CrystalConfig::default(),
            waveplate: WaveplateConfig::default(),
            mirror: MirrorConfig::default(),
            phase_match: PhaseMatchConfig::default(),
            point: PointConfig::default(),
            zone: ZoneConfig::default(),
            resonance: ResonanceConfig::default(),
            widths: WidthsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file, a JSON file, or a JSON sidecar (`{"config": …}`).
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false)
            || text.trim_start().starts_with('{');
        let parse_err = |message: String| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        };
        let cfg = if is_json {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".to_string(),
            message: e.to_string(),
        })
    }

    /// Checks every physical parameter before any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.crystal;
        positive("crystal.length_m", c.length_m)?;
        positive("crystal.pump_wavelength_m", c.pump_wavelength_m)?;
        for (field, n) in [
            ("crystal.n_pump", c.n_pump),
            ("crystal.n_signal", c.n_signal),
            ("crystal.n_idler", c.n_idler),
        ] {
            finite(field, n)?;
            if n <= 1.0 {
                return Err(invalid(field, format!("refractive index must exceed 1, got {n}")));
            }
        }
        finite("crystal.chi2_m_per_v", c.chi2_m_per_v)?;
        if c.chi2_m_per_v <= 0.0 {
            return Err(invalid("crystal.chi2_m_per_v", "must be positive"));
        }
        finite("crystal.dn_signal_dt_per_k", c.dn_signal_dt_per_k)?;
        finite("crystal.dn_idler_dt_per_k", c.dn_idler_dt_per_k)?;

        let w = &self.waveplate;
        finite("waveplate.retardance_rad", w.retardance_rad)?;
        finite("waveplate.angle_rad", w.angle_rad)?;
        positive("waveplate.mean_index", w.mean_index)?;
        finite("waveplate.thickness_m", w.thickness_m)?;
        if w.thickness_m < 0.0 {
            return Err(invalid("waveplate.thickness_m", "must be non-negative"));
        }

        let m = &self.mirror;
        finite("mirror.amplitude_reflectivity", m.amplitude_reflectivity)?;
        if !(m.amplitude_reflectivity > 0.0 && m.amplitude_reflectivity < 1.0) {
            return Err(invalid(
                "mirror.amplitude_reflectivity",
                format!("must lie in (0, 1), got {}", m.amplitude_reflectivity),
            ));
        }
        finite("mirror.round_trip_loss", m.round_trip_loss)?;
        if !(0.0..1.0).contains(&m.round_trip_loss) {
            return Err(invalid("mirror.round_trip_loss", "must lie in [0, 1)"));
        }
        for (field, z) in [
            ("mirror.zeta_pump_rad", m.zeta_pump_rad),
            ("mirror.zeta_signal_rad", m.zeta_signal_rad),
            ("mirror.zeta_idler_rad", m.zeta_idler_rad),
        ] {
            finite(field, z)?;
        }

        let pm = &self.phase_match;
        finite("phase_match.t_pm_k", pm.t_pm_k)?;
        if pm.enabled {
            positive("phase_match.fwhm_k", pm.fwhm_k)?;
        }

        let p = &self.point;
        finite("point.dl_m", p.dl_m)?;
        finite("point.dt_k", p.dt_k)?;
        optional_finite("point.xi_rad", p.xi_rad)?;
        non_negative("point.sigma", p.sigma)?;

        let z = &self.zone;
        range("zone.dl", z.dl_min_m, z.dl_max_m, z.dl_count)?;
        range("zone.dt", z.dt_min_k, z.dt_max_k, z.dt_count)?;
        non_negative("zone.sigma", z.sigma)?;
        optional_finite("zone.xi_rad", z.xi_rad)?;

        let r = &self.resonance;
        match r.mode {
            ResonanceMode::Temperature => range("resonance.dt", r.dt_min_k, r.dt_max_k, r.dt_count)?,
            ResonanceMode::Xi => range("resonance.xi", r.xi_min_rad, r.xi_max_rad, r.xi_count)?,
            ResonanceMode::Surface => {
                range("resonance.dt", r.dt_min_k, r.dt_max_k, r.dt_count)?;
                range("resonance.xi", r.xi_min_rad, r.xi_max_rad, r.xi_count)?;
            }
            ResonanceMode::Cut => range("resonance.dl", r.dl_min_m, r.dl_max_m, r.dl_count)?,
        }
        finite("resonance.fixed_dt_k", r.fixed_dt_k)?;
        optional_finite("resonance.fixed_xi_rad", r.fixed_xi_rad)?;
        if let Some(wdw) = r.window_dl_m {
            positive("resonance.window_dl_m", wdw)?;
        }
        if matches!(r.mode, ResonanceMode::Xi | ResonanceMode::Surface)
            && self.cavity != CavityKind::Linear
        {
            return Err(invalid("resonance.mode", "ξ scans require cavity = \"linear\""));
        }

        non_negative("widths.sigma", self.widths.sigma)?;
        finite("widths.dt_k", self.widths.dt_k)?;
        optional_finite("widths.xi_rad", self.widths.xi_rad)?;
        Ok(())
    }

    /// Physical model described by this configuration.
    pub fn opo(&self) -> Opo {
        let c = &self.crystal;
        Opo {
            crystal: CrystalParams {
                length: c.length_m,
                n_pump: c.n_pump,
                n_signal: c.n_signal,
                n_idler: c.n_idler,
                chi2: c.chi2_m_per_v,
                dn_signal_dt: c.dn_signal_dt_per_k,
                dn_idler_dt: c.dn_idler_dt_per_k,
                pump_angular_frequency: angular_frequency(c.pump_wavelength_m),
            },
            waveplate: WaveplateParams {
                retardance: self.waveplate.retardance_rad,
                angle: self.waveplate.angle_rad,
                mean_index: self.waveplate.mean_index,
                thickness: self.waveplate.thickness_m,
            },
            mirrors: MirrorParams {
                reflectivity: self.mirror.amplitude_reflectivity,
                loss: self.mirror.round_trip_loss,
                zeta_pump: self.mirror.zeta_pump_rad,
                zeta_signal: self.mirror.zeta_signal_rad,
                zeta_idler: self.mirror.zeta_idler_rad,
            },
            phase_match: PhaseMatchModel {
                t_pm: self.phase_match.t_pm_k,
                fwhm: self.phase_match.fwhm_k,
                enabled: self.phase_match.enabled,
            },
            kind: self.cavity,
        }
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn optional_finite(field: &str, v: Option<f64>) -> Result<(), ConfigError> {
    v.map_or(Ok(()), |x| finite(field, x))
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be non-negative, got {v}")))
    }
}

fn range(prefix: &str, min: f64, max: f64, count: usize) -> Result<(), ConfigError> {
    let unit = match prefix.rsplit('.').next() {
        Some("dl") => "_m",
        Some("dt") => "_k",
        _ => "_rad",
    };
    finite(&format!("{prefix}_min{unit}"), min)?;
    finite(&format!("{prefix}_max{unit}"), max)?;
    if max <= min {
        return Err(invalid(&format!("{prefix}_max{unit}"), format!("must exceed {prefix}_min{unit}")));
    }
    if count < 2 {
        return Err(invalid(&format!("{prefix}_count"), "must be at least 2"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn negative_length_names_the_field() {
        let cfg = RunConfig::from_toml_str("[crystal]\nlength_m = -0.01\npump_wavelength_m = 5.317e-7\nn_pump = 1.75\nn_signal = 1.75\nn_idler = 1.75\nchi2_m_per_v = 6e-12\ndn_signal_dt_per_k = 1.3e-5\ndn_idler_dt_per_k = 1.6e-5\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("crystal.length_m"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("cavity = \"ring\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn partial_tables_fall_back_to_defaults() {
        let cfg = RunConfig::from_toml_str("cavity = \"linear\"\n").unwrap();
        assert_eq!(cfg.cavity, CavityKind::Linear);
        assert_eq!(cfg.crystal, CrystalConfig::default());
    }

    #[test]
    fn xi_scan_requires_linear_cavity() {
        let mut cfg = RunConfig::default();
        cfg.resonance.mode = ResonanceMode::Surface;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("resonance.mode"));
        cfg.cavity = CavityKind::Linear;
        cfg.validate().unwrap();
    }

    #[test]
    fn grid_range_errors_use_key_names() {
        let mut cfg = RunConfig::default();
        cfg.zone.dt_count = 1;
        assert!(cfg.validate().unwrap_err().to_string().contains("zone.dt_count"));
        let mut cfg = RunConfig::default();
        cfg.zone.dl_max_m = cfg.zone.dl_min_m;
        assert!(cfg.validate().unwrap_err().to_string().contains("zone.dl_max_m"));
    }
}
