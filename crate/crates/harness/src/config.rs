//! Experiment description files.
//!
//! A spec is one TOML document. A top-level `include = ["base.toml", ...]`
//! pulls other documents in first (paths relative to the including file);
//! tables merge key by key and later values win. Command-line overrides are
//! applied last as `dotted.key = value` pairs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tmsk_core::impairments::{PaModel, PnModel};
use tmsk_core::link::{ChannelModel, LinkConfig, Modulation, PaSetting, SoftOrHard};
use tmsk_core::metrics::{DriveGrid, ObwResolution, PaprBasis, PsdParams, RfLimits};
use tmsk_core::rx::DetectorConfig;
use tmsk_core::WaveformConfig;

use crate::error::{HarnessError, Result};

const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Papr,
    Psd,
    Obw,
    Obo,
    Link,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Papr => "papr",
            ExperimentKind::Psd => "psd",
            ExperimentKind::Obw => "obw",
            ExperimentKind::Obo => "obo",
            ExperimentKind::Link => "link",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: ExperimentKind,
    pub waveform: WaveformConfig,
    #[serde(default = "msk")]
    pub modulation: Modulation,
    #[serde(default = "one")]
    pub seed: u64,
    /// Frames (OFDM symbols) per sweep point.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Output directory; not part of the config hash.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// PA in front of the PAPR, PSD and OBW measurements.
    #[serde(default)]
    pub pa: Option<PaSetting>,
    #[serde(default)]
    pub papr: PaprSection,
    #[serde(default)]
    pub psd: PsdSection,
    #[serde(default)]
    pub obw: ObwSection,
    #[serde(default)]
    pub obo: OboSection,
    #[serde(default)]
    pub link: LinkSection,
}

fn msk() -> Modulation {
    Modulation::Msk
}
fn one() -> u64 {
    1
}
fn default_trials() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaprSection {
    pub basis: PaprBasis,
    /// Threshold spacing of the emitted curve.
    pub step_db: f64,
    /// Probabilities at which the PAPR is reported in the metadata.
    pub probabilities: Vec<f64>,
}

impl Default for PaprSection {
    fn default() -> Self {
        PaprSection {
            basis: PaprBasis::PerOfdmSymbol,
            step_db: 0.05,
            probabilities: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSection {
    /// Welch settings; `4N`-sample Hann segments with half overlap if absent.
    pub params: Option<PsdParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObwSection {
    pub ratios_db: Vec<f64>,
    pub resolution: ObwResolution,
    pub params: Option<PsdParams>,
}

impl Default for ObwSection {
    fn default() -> Self {
        ObwSection {
            ratios_db: vec![-20.0, -30.0],
            resolution: ObwResolution::Continuous,
            params: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct OboSection {
    pub pa: PaModel,
    /// Allocation sizes in resource blocks of 12 subcarriers; empty means
    /// the waveform's own `k`.
    pub allocations_prb: Vec<usize>,
    /// Defaults to 12 times the largest allocation.
    pub limits: Option<RfLimits>,
    pub grid: DriveGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub snr_db: Vec<f64>,
    pub detector: DetectorConfig,
    pub channel: ChannelModel,
    pub pn_tx: Option<PnModel>,
    pub pn_rx: Option<PnModel>,
    pub pa: Option<PaSetting>,
    pub genie_rotation: bool,
    pub random_offset: bool,
    pub receiver: SoftOrHard,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            snr_db: (0..=8).map(|i| 2.0 * f64::from(i)).collect(),
            detector: DetectorConfig::default(),
            channel: ChannelModel::Awgn,
            pn_tx: None,
            pn_rx: None,
            pa: None,
            genie_rotation: true,
            random_offset: false,
            receiver: SoftOrHard::Viterbi,
        }
    }
}

impl ExperimentSpec {
    pub fn link_config(&self) -> LinkConfig {
        let l = &self.link;
        LinkConfig {
            waveform: self.waveform.clone(),
            detector: l.detector,
            channel: l.channel.clone(),
            pn_tx: l.pn_tx.clone(),
            pn_rx: l.pn_rx.clone(),
            pa: l.pa,
            genie_rotation: l.genie_rotation,
            random_offset: l.random_offset,
            receiver: l.receiver,
            modulation: self.modulation,
        }
    }

    /// Allocation sizes (in subcarriers) swept by an OBO study.
    pub fn obo_allocations(&self) -> Vec<usize> {
        if self.obo.allocations_prb.is_empty() {
            vec![self.waveform.k]
        } else {
            self.obo.allocations_prb.iter().map(|p| 12 * p).collect()
        }
    }

    pub fn obo_limits(&self) -> RfLimits {
        self.obo
            .limits
            .unwrap_or_else(|| RfLimits::new(self.obo_allocations().into_iter().max().unwrap_or(0)))
    }

    /// Number of rows the sweep will produce where that is known up front.
    pub fn sweep_len(&self) -> Option<usize> {
        match self.kind {
            ExperimentKind::Obw => Some(self.obw.ratios_db.len()),
            ExperimentKind::Obo => Some(self.obo_allocations().len()),
            ExperimentKind::Link => Some(self.link.snr_db.len()),
            ExperimentKind::Papr | ExperimentKind::Psd => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Spec(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.sweep_len() == Some(0) {
            return bad("sweep is empty");
        }
        self.waveform.validate()?;
        if let Some(p) = &self.pa {
            p.model.validate()?;
        }
        match self.kind {
            ExperimentKind::Papr => {
                let p = &self.papr;
                if p.step_db.is_nan()
                    || p.step_db <= 0.0
                    || p.probabilities.iter().any(|&q| !(q > 0.0 && q < 1.0))
                {
                    return bad("papr step must be positive and probabilities in (0, 1)");
                }
            }
            ExperimentKind::Psd => {}
            ExperimentKind::Obw => {
                if self
                    .obw
                    .ratios_db
                    .iter()
                    .any(|r| !(r.is_finite() && *r < 0.0))
                {
                    return bad("OBW ratios must be negative dB values");
                }
            }
            ExperimentKind::Obo => {
                self.obo.pa.validate()?;
                let n = self.waveform.fft_size;
                for k in self.obo_allocations() {
                    if k == 0 || k > n {
                        return bad("allocation must be between 1 and the FFT size");
                    }
                }
                let l = self.obo_limits();
                if l.channel_width
                    + 2 * l
                        .channel_spacing
                        .unwrap_or(l.channel_width)
                        .max(l.channel_width)
                    > n
                {
                    return bad("FFT size must hold the channel and both adjacent channels");
                }
            }
            ExperimentKind::Link => {
                if self.link.snr_db.iter().any(|s| s.is_nan()) {
                    return bad("SNR list contains NaN");
                }
                self.link_config().validate()?;
            }
        }
        Ok(())
    }

    /// Canonical text: the fully defaulted spec as JSON with sorted keys,
    /// `-0.0` folded to `0.0` and the output path dropped.
    pub fn canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("spec serialises");
        if let serde_json::Value::Object(m) = &mut v {
            m.remove("output");
        }
        normalise(&mut v);
        serde_json::to_string(&v).expect("value serialises")
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn normalise(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.as_f64() == Some(0.0) && n.is_f64() {
                *n = serde_json::Number::from_f64(0.0).expect("finite");
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(normalise),
        serde_json::Value::Object(m) => m.values_mut().for_each(normalise),
        _ => {}
    }
}

/// Parses a spec from text. `include` entries are resolved against
/// `base_dir`; without one, includes are rejected.
pub fn parse_spec(text: &str, base_dir: Option<&Path>) -> Result<ExperimentSpec> {
    let table = resolve(text, base_dir, &mut BTreeSet::new(), 0)?;
    from_table(table)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    load_with_overrides(path, &[])
}

/// Loads `path`, resolves includes and applies `key=value` overrides.
pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<ExperimentSpec> {
    let mut seen = BTreeSet::new();
    let mut table = resolve_file(path, &mut seen, 0)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(table)
}

fn from_table(table: toml::Table) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = table
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::Toml(e.message().into()))?;
    spec.validate()?;
    Ok(spec)
}

fn resolve_file(path: &Path, seen: &mut BTreeSet<PathBuf>, depth: usize) -> Result<toml::Table> {
    let canon = path.canonicalize().map_err(|e| HarnessError::io(path, e))?;
    if !seen.insert(canon.clone()) {
        return Err(HarnessError::Spec(format!(
            "include cycle through {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&canon).map_err(|e| HarnessError::io(path, e))?;
    let out = resolve(&text, canon.parent(), seen, depth);
    seen.remove(&canon);
    out
}

fn resolve(
    text: &str,
    base_dir: Option<&Path>,
    seen: &mut BTreeSet<PathBuf>,
    depth: usize,
) -> Result<toml::Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(HarnessError::Spec("includes nested too deeply".into()));
    }
    let mut own: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::Toml(e.to_string()))?;
    let includes = match own.remove("include") {
        None => Vec::new(),
        Some(toml::Value::String(s)) => vec![s],
        Some(toml::Value::Array(a)) => a
            .into_iter()
            .map(|v| match v {
                toml::Value::String(s) => Ok(s),
                _ => Err(HarnessError::Spec("include entries must be strings".into())),
            })
            .collect::<Result<_>>()?,
        Some(_) => {
            return Err(HarnessError::Spec(
                "include must be a string or list of strings".into(),
            ))
        }
    };
    let mut merged = toml::Table::new();
    for inc in includes {
        let dir = base_dir
            .ok_or_else(|| HarnessError::Spec("include without a base directory".into()))?;
        let t = resolve_file(&dir.join(inc), seen, depth + 1)?;
        merge(&mut merged, t);
    }
    merge(&mut merged, own);
    Ok(merged)
}

/// Deep merge; tables merge recursively, anything else is replaced.
pub fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies `a.b.c=value`, where `value` is TOML (`3`, `[0.0, 2.0]`,
/// `"x"`); a bare word is taken as a string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Spec(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Spec(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = table;
    for p in &path[..path.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(HarnessError::Spec(format!(
                    "override {key:?} descends into a non-table"
                )))
            }
        };
    }
    cur.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}
