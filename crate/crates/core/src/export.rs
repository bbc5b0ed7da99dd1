//! Grid artifacts (binary payload plus JSON sidecar), PNG rendering and
//! CSV/JSON report writers.
//!
//! Payloads are little-endian, row-major, starting from the bottom row; the
//! sidecar's `origin` is the center of the lower-left cell.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelMap, ChannelParams};
use crate::geometry::Point2;
use crate::route::{RouteTrace, SegmentStats};
use crate::visibility::{CellState, LosMap, TxConfig};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sidecar mismatch: {0}")]
    SidecarMismatch(String),
    #[error("layer {layer:?} cannot be rendered with the {palette} palette")]
    UnsupportedLayer { layer: LayerKind, palette: &'static str },
    #[error("png encoding failed: {0}")]
    Png(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    LosState,
    Pathloss,
    Lsf,
    Ssf,
    Total,
}

impl LayerKind {
    pub const ALL: [LayerKind; 5] = [
        LayerKind::LosState,
        LayerKind::Pathloss,
        LayerKind::Lsf,
        LayerKind::Ssf,
        LayerKind::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::LosState => "los_state",
            LayerKind::Pathloss => "pathloss",
            LayerKind::Lsf => "lsf",
            LayerKind::Ssf => "ssf",
            LayerKind::Total => "total",
        }
    }

    pub fn dtype(self) -> DType {
        match self {
            LayerKind::LosState => DType::U8,
            _ => DType::F32,
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            LayerKind::LosState => "state code (0 LOS, 1 NLOS, 2 BUILDING)",
            _ => "dB",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    U8,
    F32,
}

impl DType {
    pub fn extension(self) -> &'static str {
        match self {
            DType::U8 => "u8",
            DType::F32 => "f32",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub layer: LayerKind,
    pub dtype: DType,
    pub units: String,
    pub width: usize,
    pub height: usize,
    pub origin: Point2,
    pub resolution_m: f64,
    pub tx: TxConfig,
    pub seed: Option<u64>,
    pub params_digest: Option<String>,
    pub params: Option<ChannelParams>,
    pub byte_order: String,
    pub layout: String,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl GridData {
    pub fn len(&self) -> usize {
        match self {
            GridData::U8(v) => v.len(),
            GridData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            GridData::U8(_) => DType::U8,
            GridData::F32(_) => DType::F32,
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            GridData::U8(v) => v.clone(),
            GridData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_le_bytes(dtype: DType, bytes: Vec<u8>) -> Self {
        match dtype {
            DType::U8 => GridData::U8(bytes),
            DType::F32 => GridData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridArtifact {
    pub sidecar: Sidecar,
    pub data: GridData,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl GridArtifact {
    /// Build an artifact and fill in the sidecar's derived fields.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layer: LayerKind,
        width: usize,
        height: usize,
        origin: Point2,
        resolution_m: f64,
        tx: TxConfig,
        seed: Option<u64>,
        params: Option<ChannelParams>,
        data: GridData,
    ) -> Self {
        let payload_sha256 = sha256_hex(&data.to_le_bytes());
        Self {
            sidecar: Sidecar {
                layer,
                dtype: layer.dtype(),
                units: layer.units().to_string(),
                width,
                height,
                origin,
                resolution_m,
                tx,
                seed,
                params_digest: params.as_ref().map(ChannelParams::digest),
                params,
                byte_order: "little".into(),
                layout: "row-major, first row at the bottom".into(),
                payload_sha256,
            },
            data,
        }
    }

    pub fn from_los_map(map: &LosMap) -> Self {
        Self::new(
            LayerKind::LosState,
            map.width,
            map.height,
            map.origin,
            map.resolution_m,
            map.tx,
            None,
            None,
            GridData::U8(map.states.iter().map(|s| s.code()).collect()),
        )
    }

    /// One artifact per attenuation layer: pathloss, lsf, ssf, total.
    pub fn from_channel_map(map: &ChannelMap) -> Vec<Self> {
        [
            (LayerKind::Pathloss, &map.pathloss_db),
            (LayerKind::Lsf, &map.lsf_db),
            (LayerKind::Ssf, &map.ssf_db),
            (LayerKind::Total, &map.total_db),
        ]
        .into_iter()
        .map(|(kind, v)| {
            Self::new(
                kind,
                map.width,
                map.height,
                map.origin,
                map.resolution_m,
                map.tx,
                Some(map.seed),
                Some(map.params.clone()),
                GridData::F32(v.clone()),
            )
        })
        .collect()
    }

    /// Dimension and type consistency between sidecar and payload.
    pub fn check(&self) -> Result<(), ExportError> {
        let s = &self.sidecar;
        if s.dtype != self.data.dtype() || s.dtype != s.layer.dtype() {
            return Err(ExportError::SidecarMismatch(format!(
                "sidecar dtype {:?} does not fit layer {:?} with {:?} payload",
                s.dtype,
                s.layer,
                self.data.dtype()
            )));
        }
        let cells = s.width.checked_mul(s.height);
        if cells != Some(self.data.len()) {
            return Err(ExportError::SidecarMismatch(format!(
                "sidecar says {}x{} but payload holds {} cells",
                s.width,
                s.height,
                self.data.len()
            )));
        }
        Ok(())
    }
}

/// Write `<dir>/<name>.<u8|f32>` and `<dir>/<name>.json`; returns both paths.
pub fn write_grid(artifact: &GridArtifact, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf), ExportError> {
    artifact.check()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let payload_path = dir.join(format!("{name}.{}", artifact.sidecar.dtype.extension()));
    let sidecar_path = dir.join(format!("{name}.json"));
    let bytes = artifact.data.to_le_bytes();
    let mut sidecar = artifact.sidecar.clone();
    sidecar.payload_sha256 = sha256_hex(&bytes);
    let mut f = BufWriter::new(File::create(&payload_path).map_err(io_err(&payload_path))?);
    f.write_all(&bytes).map_err(io_err(&payload_path))?;
    f.flush().map_err(io_err(&payload_path))?;
    write_json(&sidecar_path, &sidecar)?;
    Ok((payload_path, sidecar_path))
}

/// Read a grid given its sidecar, payload, or extension-less stem.
pub fn read_grid(path: &Path) -> Result<GridArtifact, ExportError> {
    let sidecar_path = path.with_extension("json");
    let text = std::fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| ExportError::SidecarMismatch(format!("unreadable sidecar: {e}")))?;
    let payload_path = path.with_extension(sidecar.dtype.extension());
    let mut bytes = Vec::new();
    File::open(&payload_path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(&payload_path))?;
    let expected = sidecar
        .width
        .checked_mul(sidecar.height)
        .and_then(|n| n.checked_mul(sidecar.dtype.size()));
    if expected != Some(bytes.len()) {
        return Err(ExportError::SidecarMismatch(format!(
            "sidecar says {}x{} {:?} but payload is {} bytes",
            sidecar.width,
            sidecar.height,
            sidecar.dtype,
            bytes.len()
        )));
    }
    let digest = sha256_hex(&bytes);
    if digest != sidecar.payload_sha256 {
        return Err(ExportError::SidecarMismatch("payload checksum differs".into()));
    }
    if let (Some(p), Some(d)) = (&sidecar.params, &sidecar.params_digest) {
        if &p.digest() != d {
            return Err(ExportError::SidecarMismatch("params digest differs".into()));
        }
    }
    let artifact = GridArtifact {
        data: GridData::from_le_bytes(sidecar.dtype, bytes),
        sidecar,
    };
    artifact.check()?;
    Ok(artifact)
}

pub const LOS_COLOR: [u8; 3] = [46, 160, 67];
pub const NLOS_COLOR: [u8; 3] = [207, 34, 46];
pub const MASK_COLOR: [u8; 3] = [128, 128, 128];

/// Ramp stops from low to high attenuation, evenly spaced.
const RAMP: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Palette {
    /// Categorical colors for LOS/NLOS; BUILDING uses the mask color.
    States,
    /// Linear ramp with values clipped to `[min_db, max_db]`.
    Ramp { min_db: f64, max_db: f64 },
    /// Outage mask: attenuation above `threshold_db` in the NLOS color,
    /// at or below it in the LOS color.
    Threshold { threshold_db: f64 },
}

impl Palette {
    fn name(&self) -> &'static str {
        match self {
            Palette::States => "states",
            Palette::Ramp { .. } => "ramp",
            Palette::Threshold { .. } => "threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub palette: Palette,
    pub mask_color: [u8; 3],
}

impl RenderStyle {
    pub fn ramp(min_db: f64, max_db: f64) -> Self {
        Self {
            palette: Palette::Ramp { min_db, max_db },
            mask_color: MASK_COLOR,
        }
    }

    pub fn for_layer(layer: LayerKind) -> Self {
        match layer {
            LayerKind::LosState => Self {
                palette: Palette::States,
                mask_color: MASK_COLOR,
            },
            LayerKind::Pathloss | LayerKind::Total => Self::ramp(60.0, 160.0),
            LayerKind::Lsf | LayerKind::Ssf => Self::ramp(-30.0, 30.0),
        }
    }
}

/// Position of `v` along the ramp, in `[0, 1]`.
pub fn ramp_position(v: f64, min_db: f64, max_db: f64) -> f64 {
    ((v - min_db) / (max_db - min_db)).clamp(0.0, 1.0)
}

pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    std::array::from_fn(|k| (a[k] as f64 + (b[k] as f64 - a[k] as f64) * f).round() as u8)
}

/// RGB pixels, top image row first.
pub fn render_rgb(artifact: &GridArtifact, style: &RenderStyle) -> Result<Vec<u8>, ExportError> {
    artifact.check()?;
    let (w, h) = (artifact.sidecar.width, artifact.sidecar.height);
    let color_of = |i: usize| -> Result<[u8; 3], ExportError> {
        match (&artifact.data, style.palette) {
            (GridData::U8(v), Palette::States) => Ok(match CellState::from_code(v[i]) {
                Some(CellState::Los) => LOS_COLOR,
                Some(CellState::Nlos) => NLOS_COLOR,
                _ => style.mask_color,
            }),
            (GridData::F32(v), Palette::Ramp { min_db, max_db }) => Ok(if v[i].is_finite() {
                ramp_color(ramp_position(v[i] as f64, min_db, max_db))
            } else {
                style.mask_color
            }),
            (GridData::F32(v), Palette::Threshold { threshold_db }) => Ok(if !v[i].is_finite() {
                style.mask_color
            } else if v[i] as f64 > threshold_db {
                NLOS_COLOR
            } else {
                LOS_COLOR
            }),
            _ => Err(ExportError::UnsupportedLayer {
                layer: artifact.sidecar.layer,
                palette: style.palette.name(),
            }),
        }
    };
    let mut out = Vec::with_capacity(w * h * 3);
    for row in (0..h).rev() {
        for col in 0..w {
            out.extend_from_slice(&color_of(row * w + col)?);
        }
    }
    Ok(out)
}

/// Legend text embedded in the PNG under the `legend` keyword.
pub fn legend_json(artifact: &GridArtifact, style: &RenderStyle) -> serde_json::Value {
    let mut legend = serde_json::json!({
        "layer": artifact.sidecar.layer,
        "units": artifact.sidecar.units,
        "palette": style.palette,
        "mask_color": style.mask_color,
    });
    match style.palette {
        Palette::States => {
            legend["colors"] = serde_json::json!({
                "LOS": LOS_COLOR, "NLOS": NLOS_COLOR, "BUILDING": style.mask_color,
            });
        }
        Palette::Ramp { .. } => {
            legend["ramp_stops"] = serde_json::json!(RAMP);
            legend["position"] = serde_json::json!("(value - min_db) / (max_db - min_db), clipped to [0, 1]");
        }
        Palette::Threshold { .. } => {
            legend["colors"] = serde_json::json!({
                "covered": LOS_COLOR, "outage": NLOS_COLOR, "BUILDING": style.mask_color,
            });
        }
    }
    legend
}

pub fn render_png_bytes(artifact: &GridArtifact, style: &RenderStyle) -> Result<Vec<u8>, ExportError> {
    let rgb = render_rgb(artifact, style)?;
    let png_err = |e: png::EncodingError| ExportError::Png(e.to_string());
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(
            &mut buf,
            artifact.sidecar.width as u32,
            artifact.sidecar.height as u32,
        );
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.add_text_chunk("legend".into(), legend_json(artifact, style).to_string())
            .map_err(png_err)?;
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&rgb).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(buf)
}

pub fn render_png(artifact: &GridArtifact, style: &RenderStyle, path: &Path) -> Result<(), ExportError> {
    let bytes = render_png_bytes(artifact, style)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-sample trace: `arc_s,x,y,state,attenuation_db`.
pub fn write_trace_csv<W: Write>(w: W, trace: &RouteTrace) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arc_s", "x", "y", "state", "attenuation_db"])?;
    for s in &trace.samples {
        out.write_record([
            s.arc_s.to_string(),
            s.position.x.to_string(),
            s.position.y.to_string(),
            s.state.label().to_string(),
            fmt_opt(s.attenuation_db),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Runs and outage segments: `kind,label,start_s,end_s,length_m`, where
/// `label` is the state for runs and the EIRP in dBm for outages.
pub fn write_segments_csv<W: Write>(w: W, stats: &SegmentStats) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "label", "start_s", "end_s", "length_m"])?;
    for r in &stats.runs.runs {
        out.write_record([
            "run".to_string(),
            r.state.label().to_string(),
            r.start_s.to_string(),
            r.end_s.to_string(),
            r.length_m.to_string(),
        ])?;
    }
    for o in &stats.outage {
        for g in &o.segments {
            out.write_record([
                "outage".to_string(),
                o.eirp_dbm.to_string(),
                g.start_s.to_string(),
                g.end_s.to_string(),
                g.length_m.to_string(),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Named CDF series: `series,value,cdf`.
pub fn write_cdf_csv<W: Write>(w: W, series: &[(String, Vec<(f64, f64)>)]) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["series", "value", "cdf"])?;
    for (name, points) in series {
        for (v, p) in points {
            out.write_record([name.clone(), v.to_string(), p.to_string()])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv_file(
    path: &Path,
    f: impl FnOnce(BufWriter<File>) -> Result<(), ExportError>,
) -> Result<(), ExportError> {
    let file = File::create(path).map_err(io_err(path))?;
    f(BufWriter::new(file))
}
