//! Run configuration: JSON file, environment and flag overrides merged over
//! defaults (flags > `UXPROP_SEED` > file > defaults).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use uxprop_core::campaign::{CampaignConfig, RouteMode};
use uxprop_core::channel::ChannelParams;
use uxprop_core::geometry::Point2;
use uxprop_core::route::{DEFAULT_EIRPS_DBM, DEFAULT_SENSITIVITY_DBM};
use uxprop_core::visibility::TxConfig;

use crate::error::{io_error, CliError};

pub const SEED_ENV: &str = "UXPROP_SEED";
pub const DEFAULT_UE_HEIGHT_M: f64 = 1.5;
pub const DEFAULT_COVERAGE_RADIUS_M: f64 = 250.0;
pub const DEFAULT_MAX_CELLS: usize = 25_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub x: f64,
    pub y: f64,
    pub altitude_m: f64,
}

impl TxSpec {
    pub fn config(&self, ue_height_m: f64) -> TxConfig {
        TxConfig::new(Point2::new(self.x, self.y), self.altitude_m, ue_height_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub heights_m: Vec<f64>,
    pub n_tx: usize,
    pub routes_per_tx: usize,
    pub route_mode: RouteMode,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            heights_m: vec![30.0, 150.0],
            n_tx: 20,
            routes_per_tx: 10,
            route_mode: RouteMode::Chord,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// GeoJSON scene; absent means open terrain.
    pub scene: Option<PathBuf>,
    pub height_attr: String,
    /// Scene coordinates are already metric.
    pub metric: bool,
    pub tx: Option<TxSpec>,
    pub ue_height_m: f64,
    pub resolution_m: f64,
    pub coverage_radius_m: f64,
    /// Overrides `params.carrier_hz` when set.
    pub carrier_hz: Option<f64>,
    pub params: ChannelParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub eirps_dbm: Vec<f64>,
    pub sensitivity_dbm: f64,
    pub step_m: f64,
    pub no_fading: bool,
    pub route: Option<PathBuf>,
    pub campaign: CampaignSection,
    pub max_cells: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            height_attr: "height".into(),
            metric: false,
            tx: None,
            ue_height_m: DEFAULT_UE_HEIGHT_M,
            resolution_m: 1.0,
            coverage_radius_m: DEFAULT_COVERAGE_RADIUS_M,
            carrier_hz: None,
            params: ChannelParams::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            eirps_dbm: DEFAULT_EIRPS_DBM.to_vec(),
            sensitivity_dbm: DEFAULT_SENSITIVITY_DBM,
            step_m: 1.0,
            no_fading: false,
            route: None,
            campaign: CampaignSection::default(),
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("{v} must be positive")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.ue_height_m >= 0.0) || !self.ue_height_m.is_finite() {
            return Err(CliError::config("ue_height_m", "must be non-negative"));
        }
        positive("resolution_m", self.resolution_m)?;
        positive("coverage_radius_m", self.coverage_radius_m)?;
        positive("step_m", self.step_m)?;
        if let Some(c) = self.carrier_hz {
            positive("carrier_hz", c)?;
        }
        if let Some(tx) = &self.tx {
            if !tx.x.is_finite() || !tx.y.is_finite() {
                return Err(CliError::config("tx", "position must be finite"));
            }
            positive("altitude_m", tx.altitude_m)?;
        }
        if self.eirps_dbm.iter().any(|e| !e.is_finite()) {
            return Err(CliError::config("eirps_dbm", "values must be finite"));
        }
        if !self.sensitivity_dbm.is_finite() {
            return Err(CliError::config("sensitivity_dbm", "must be finite"));
        }
        if self.max_cells == 0 {
            return Err(CliError::config("max_cells", "must be at least 1"));
        }
        self.effective_params().validate()?;
        Ok(())
    }

    pub fn effective_params(&self) -> ChannelParams {
        let mut p = self.params.clone();
        if let Some(c) = self.carrier_hz {
            p.carrier_hz = c;
        }
        p
    }

    pub fn tx_config(&self) -> Result<TxConfig, CliError> {
        let tx = self.tx.ok_or(CliError::Missing("tx"))?;
        Ok(tx.config(self.ue_height_m))
    }

    pub fn campaign_config(&self) -> CampaignConfig {
        CampaignConfig {
            heights_m: self.campaign.heights_m.clone(),
            n_tx: self.campaign.n_tx,
            coverage_radius_m: self.coverage_radius_m,
            routes_per_tx: self.campaign.routes_per_tx,
            resolution_m: self.resolution_m,
            step_m: self.step_m,
            ue_height_m: self.ue_height_m,
            eirps_dbm: self.eirps_dbm.clone(),
            sensitivity_dbm: self.sensitivity_dbm,
            seed: self.seed,
            route_mode: self.campaign.route_mode,
        }
    }

    /// Digest of everything that determines the outputs: the configuration
    /// without file locations, plus the scene content hash.
    pub fn digest(&self, scene_sha256: &str) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            m.remove("scene");
            m.remove("route");
            m.insert("params".into(), serde_json::to_value(self.effective_params()).expect("params serialize"));
            m.remove("carrier_hz");
            m.insert("scene_sha256".into(), Value::String(scene_sha256.to_string()));
        }
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Set `path` (dot-separated) in a JSON object, creating objects as needed.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        if key.is_empty() {
            return Err(CliError::config(path, "empty key in path"));
        }
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parse a `key=value` override; the value is JSON when it parses as such,
/// otherwise a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::config(s, "expected key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Field named in a serde error message such as "unknown field `x`".
pub(crate) fn serde_field(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("config").to_string()
}

pub fn config_from_value(v: Value) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        CliError::config(serde_field(&msg), msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Merge file, environment seed and flag overrides over the defaults.
pub fn load_config(
    file: Option<&Path>,
    env_seed: Option<&str>,
    overrides: &[(String, Value)],
) -> Result<RunConfig, CliError> {
    let mut v = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_error(p.display()))?;
            serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !v.is_object() {
        return Err(CliError::config("config", "top level must be a JSON object"));
    }
    if let Some(s) = env_seed {
        let seed: u64 = s
            .trim()
            .parse()
            .map_err(|_| CliError::config("seed", format!("{SEED_ENV}={s} is not an unsigned integer")))?;
        set_path(&mut v, "seed", Value::from(seed))?;
    }
    for (k, val) in overrides {
        set_path(&mut v, k, val.clone())?;
    }
    config_from_value(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.ue_height_m, 1.5);
        assert_eq!(c.resolution_m, 1.0);
        assert_eq!(c.coverage_radius_m, 250.0);
        assert_eq!(c.effective_params().carrier_hz, 16.95e9);
        assert_eq!(c.sensitivity_dbm, -84.7);
        assert_eq!(c.eirps_dbm, vec![13.0, 23.0]);
    }

    #[test]
    fn precedence_flags_env_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.json");
        std::fs::write(&f, r#"{"seed": 1, "resolution_m": 2.0, "params": {"los_beta": 2.5}}"#).unwrap();
        let c = load_config(Some(&f), None, &[]).unwrap();
        assert_eq!((c.seed, c.resolution_m, c.params.los_beta), (1, 2.0, 2.5));
        assert_eq!(c.params.nlos_beta, 1.91);
        let c = load_config(Some(&f), Some("5"), &[]).unwrap();
        assert_eq!(c.seed, 5);
        let c = load_config(Some(&f), Some("5"), &[("seed".into(), Value::from(9))]).unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_and_invalid_fields_are_named() {
        let e = load_config(None, None, &[("resolutoin_m".into(), Value::from(1))]).unwrap_err();
        assert_eq!(e.field().as_deref(), Some("resolutoin_m"));
        let e = load_config(None, None, &[("step_m".into(), Value::from(-1))]).unwrap_err();
        assert_eq!(e.field().as_deref(), Some("step_m"));
        let e = load_config(None, Some("abc"), &[]).unwrap_err();
        assert_eq!(e.field().as_deref(), Some("seed"));
    }

    #[test]
    fn digest_ignores_locations_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.digest("s"), b.digest("s"));
        b.seed = 1;
        assert_ne!(a.digest("s"), b.digest("s"));
        assert_ne!(a.digest("s"), a.digest("t"));
    }

    #[test]
    fn dotted_assignment() {
        let (k, v) = parse_assignment("params.nlos_ple={\"p1\":3,\"p2\":4,\"p3\":20}").unwrap();
        let mut root = Value::Object(Default::default());
        set_path(&mut root, &k, v).unwrap();
        assert_eq!(root["params"]["nlos_ple"]["p2"], 4);
    }
}
