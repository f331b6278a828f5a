//! Signal metrology: PAPR statistics, Welch PSD, occupied bandwidth, RF
//! emission and quality checks, output back-off search and BER accounting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::impairments::{output_backoff_db, pa_apply, PaModel};
use crate::rx::{rx_frontend, Equalizer};
use crate::tx::WaveformConfig;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaprBasis {
    /// Each sample's power over the mean power of the whole record.
    PerSample,
    /// Peak over mean power of each OFDM symbol's main part.
    PerOfdmSymbol,
}

/// Empirical PAPR distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaprCcdf {
    /// Instantaneous PAPR values in dB, ascending.
    pub values_db: Vec<f64>,
    pub basis: PaprBasis,
}

/// PAPR of a frame stream. Frames are `cp_len + fft_size` samples; only the
/// main part (CP removed) is measured.
pub fn papr_ccdf(frames: &[&[Complex64]], cp_len: usize, basis: PaprBasis) -> Result<PaprCcdf> {
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut values = match basis {
        PaprBasis::PerSample => {
            let total: f64 = frames
                .iter()
                .flat_map(|f| f[cp_len..].iter())
                .map(|s| s.norm_sqr())
                .sum();
            let count: usize = frames.iter().map(|f| f.len() - cp_len).sum();
            if count == 0 {
                return Err(Error::EmptyInput);
            }
            let mean = total / count as f64;
            if mean == 0.0 {
                return Err(Error::InvalidConfig("zero-power signal".into()));
            }
            frames
                .iter()
                .flat_map(|f| f[cp_len..].iter())
                .map(|s| db(s.norm_sqr() / mean))
                .collect::<Vec<_>>()
        }
        PaprBasis::PerOfdmSymbol => frames
            .iter()
            .map(|f| {
                let main = &f[cp_len..];
                let p: Vec<f64> = main.iter().map(|s| s.norm_sqr()).collect();
                let mean = p.iter().sum::<f64>() / p.len() as f64;
                db(p.iter().copied().fold(0.0, f64::max) / mean)
            })
            .collect(),
    };
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidConfig("zero-power OFDM symbol".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(PaprCcdf {
        values_db: values,
        basis,
    })
}

impl PaprCcdf {
    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }

    /// Fraction of values strictly above `threshold_db`.
    pub fn ccdf(&self, threshold_db: f64) -> f64 {
        let above = self.values_db.len() - self.values_db.partition_point(|&v| v <= threshold_db);
        above as f64 / self.values_db.len() as f64
    }

    /// PAPR exceeded with probability `p`, interpolated linearly in
    /// `log10(p)` between order statistics. Value `i` (ascending) is
    /// exceeded-or-reached with probability `(n - i) / n`.
    pub fn value_at(&self, p: f64) -> f64 {
        let n = self.values_db.len();
        let pr = |i: usize| (n - i) as f64 / n as f64;
        if p >= 1.0 {
            return self.values_db[0];
        }
        if p <= pr(n - 1) {
            return self.values_db[n - 1];
        }
        // first i with pr(i) < p
        let i = ((n as f64 * (1.0 - p)).floor() as usize + 1).min(n - 1);
        let (hi, lo) = (pr(i - 1), pr(i));
        let t = (hi.log10() - p.log10()) / (hi.log10() - lo.log10());
        self.values_db[i - 1] + t * (self.values_db[i] - self.values_db[i - 1])
    }

    /// Combines two accumulations.
    pub fn merge(&mut self, other: &PaprCcdf) {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.values_db.len() || j < other.values_db.len() {
            if j == other.values_db.len()
                || (i < self.values_db.len() && self.values_db[i] <= other.values_db[j])
            {
                out.push(self.values_db[i]);
                i += 1;
            } else {
                out.push(other.values_db[j]);
                j += 1;
            }
        }
        self.values_db = out;
    }

    /// `(threshold_db, ccdf)` points on a uniform threshold grid, with
    /// strictly increasing thresholds.
    pub fn curve(&self, step_db: f64) -> Vec<(f64, f64)> {
        let lo = (self.values_db[0] / step_db).floor() * step_db;
        let hi = self.values_db[self.len() - 1];
        let mut out = Vec::new();
        let mut t = lo;
        while t <= hi + step_db {
            out.push((t, self.ccdf(t)));
            t += step_db;
        }
        out
    }
}

/// Welch estimator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdParams {
    pub segment_len: usize,
    /// Overlap as a fraction of the segment.
    #[serde(default = "half")]
    pub overlap: f64,
    #[serde(default)]
    pub window: Window,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl PsdParams {
    /// Segment of `4N` samples, 50% overlap, Hann window.
    pub fn for_fft_size(n: usize) -> Self {
        PsdParams {
            segment_len: 4 * n,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// Averaged periodogram on an `N`-subcarrier grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Frequency relative to the allocation centre, in allocation widths
    /// (the `K` in-band subcarriers span width 1). Ascending.
    pub freq: Vec<f64>,
    /// Linear power per bin, summed over segments (unnormalised).
    pub power: Vec<f64>,
    pub segments: usize,
    pub params: PsdParams,
    /// Allocation width in subcarriers.
    pub k: usize,
}

/// Welch PSD of `samples` at the IFFT rate of `cfg`, with frequency
/// normalised to the allocation.
pub fn psd_estimate(
    samples: &[Complex64],
    cfg: &WaveformConfig,
    params: PsdParams,
) -> Result<PsdEstimate> {
    let m = params.segment_len;
    if m == 0 || !(0.0..1.0).contains(&params.overlap) {
        return Err(Error::InvalidConfig(
            "segment length must be positive and overlap in [0, 1)".into(),
        ));
    }
    if samples.len() < m {
        return Err(Error::TooFewSamples {
            need: m,
            got: samples.len(),
        });
    }
    let w: Vec<f64> = match params.window {
        Window::Hann => (0..m)
            .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / m as f64).cos())
            .collect(),
        Window::Rectangular => vec![1.0; m],
    };
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let hop = ((m as f64) * (1.0 - params.overlap)).round().max(1.0) as usize;
    let mut acc = vec![0.0; m];
    let mut segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let mut start = 0;
    while start + m <= samples.len() {
        for ((b, s), wi) in buf.iter_mut().zip(&samples[start..start + m]).zip(&w) {
            *b = s * wi;
        }
        fft::fft(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr() * m as f64 / wss;
        }
        segments += 1;
        start += hop;
    }
    // reorder to ascending frequency
    let n = cfg.fft_size as f64;
    let center = cfg.allocation_center();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let sc = fft::bin_frequency(i, m) as f64 * n / m as f64;
            ((sc - center) / cfg.k as f64, acc[i])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (freq, power) = pairs.into_iter().unzip();
    Ok(PsdEstimate {
        freq,
        power,
        segments,
        params,
        k: cfg.k,
    })
}

/// How band edges are quantised in [`normalized_obw`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObwResolution {
    /// Edge at the PSD bin where the cumulative power first suffices.
    #[default]
    Continuous,
    /// Band grows one subcarrier per side at a time.
    Subcarrier,
}

/// Result of a bandwidth search; `lower_bound` is set when the ratio could
/// not be met inside the measured span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obw {
    pub width: f64,
    pub lower_bound: bool,
}

impl PsdEstimate {
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Density in dB relative to the peak bin.
    pub fn density_db(&self) -> Vec<f64> {
        let peak = self.power.iter().copied().fold(0.0, f64::max);
        self.power.iter().map(|p| db(p / peak)).collect()
    }

    /// Mean peak-normalised level (dB) over bins with `||f| - f0| < halfwidth`.
    pub fn level_at(&self, f0: f64, halfwidth: f64) -> f64 {
        let peak = self.power.iter().copied().fold(0.0, f64::max);
        let sel: Vec<f64> = self
            .freq
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| (f.abs() - f0).abs() < halfwidth)
            .map(|(_, p)| p / peak)
            .collect();
        db(sel.iter().sum::<f64>() / sel.len() as f64)
    }

    /// Adds another estimate made with identical settings.
    pub fn merge(&mut self, other: &PsdEstimate) -> Result<()> {
        if other.freq != self.freq {
            return Err(Error::LengthMismatch {
                expected: self.freq.len(),
                got: other.freq.len(),
            });
        }
        for (a, b) in self.power.iter_mut().zip(&other.power) {
            *a += b;
        }
        self.segments += other.segments;
        Ok(())
    }
}

/// Smallest symmetric band `W` (allocation widths) around the allocation
/// centre that leaves at most `10^(oob_ratio_db/10)` of the power outside.
pub fn normalized_obw(psd: &PsdEstimate, oob_ratio_db: f64, resolution: ObwResolution) -> Obw {
    let total = psd.total_power();
    let r = 10f64.powf(oob_ratio_db / 10.0);
    let max_d = psd.freq.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    match resolution {
        ObwResolution::Continuous => {
            let mut order: Vec<(f64, f64)> = psd
                .freq
                .iter()
                .map(|f| f.abs())
                .zip(psd.power.iter().copied())
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cum = 0.0;
            for (d, p) in order {
                cum += p;
                if total - cum <= r * total {
                    return Obw {
                        width: 2.0 * d,
                        lower_bound: false,
                    };
                }
            }
            Obw {
                width: 2.0 * max_d,
                lower_bound: true,
            }
        }
        ObwResolution::Subcarrier => {
            let k = psd.k as f64;
            let tol = 1e-9;
            let mut j = -(psd.k as i64) / 2;
            loop {
                let edge = (k / 2.0 + j as f64) / k;
                if edge > max_d + tol {
                    return Obw {
                        width: 2.0 * max_d,
                        lower_bound: true,
                    };
                }
                let mut inside = 0.0;
                for (f, p) in psd.freq.iter().zip(&psd.power) {
                    let d = f.abs();
                    if (d - edge).abs() < tol {
                        inside += 0.5 * p;
                    } else if d < edge {
                        inside += p;
                    }
                }
                if total - inside <= r * total {
                    return Obw {
                        width: 2.0 * edge,
                        lower_bound: false,
                    };
                }
                j += 1;
            }
        }
    }
}

/// RF requirement limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfLimits {
    #[serde(default = "aclr")]
    pub aclr_min_db: f64,
    #[serde(default = "evm")]
    pub evm_max_pct: f64,
    #[serde(default = "obw_fraction")]
    pub obw_fraction: f64,
    /// Flat limit on any unallocated resource block inside the channel,
    /// relative to the mean allocated resource-block power.
    #[serde(default = "ibe")]
    pub ibe_limit_db: f64,
    /// Channel bandwidth in subcarriers, centred on DC.
    pub channel_width: usize,
    /// Subcarriers per resource block for the in-band emission check.
    #[serde(default = "rb")]
    pub rb_size: usize,
    /// Centre-to-centre distance of the adjacent ACLR channels in
    /// subcarriers; `None` puts them edge to edge with the channel.
    #[serde(default)]
    pub channel_spacing: Option<usize>,
}

/// Reported in-band emission when the allocation fills the channel.
pub const IBE_FLOOR_DB: f64 = -400.0;

fn aclr() -> f64 {
    31.0
}
fn evm() -> f64 {
    17.5
}
fn obw_fraction() -> f64 {
    0.99
}
/// The piecewise mask's value next to the allocation,
/// `20 log10(EVM limit) - 3` dB.
fn ibe() -> f64 {
    20.0 * (evm() / 100.0).log10() - 3.0
}

fn rb() -> usize {
    12
}

impl RfLimits {
    pub fn new(channel_width: usize) -> Self {
        RfLimits {
            aclr_min_db: aclr(),
            evm_max_pct: evm(),
            obw_fraction: obw_fraction(),
            ibe_limit_db: ibe(),
            channel_width,
            rb_size: rb(),
            channel_spacing: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Aclr,
    Evm,
    Obw,
    Ibe,
}

impl Requirement {
    pub fn name(self) -> &'static str {
        match self {
            Requirement::Aclr => "aclr",
            Requirement::Evm => "evm",
            Requirement::Obw => "obw",
            Requirement::Ibe => "ibe",
        }
    }
}

/// Measured RF figures with per-requirement margins (positive = passing).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfReport {
    pub aclr_db: f64,
    pub evm_pct: f64,
    /// Width holding `obw_fraction` of the power, in subcarriers.
    pub obw_subcarriers: f64,
    /// Worst unallocated resource block, dB relative to allocated mean.
    pub ibe_db: f64,
    pub aclr_margin_db: f64,
    pub evm_margin_pct: f64,
    pub obw_margin_subcarriers: f64,
    pub ibe_margin_db: f64,
}

impl RfReport {
    pub fn failures(&self) -> Vec<Requirement> {
        let mut v = Vec::new();
        if self.aclr_margin_db < 0.0 {
            v.push(Requirement::Aclr);
        }
        if self.evm_margin_pct < 0.0 {
            v.push(Requirement::Evm);
        }
        if self.obw_margin_subcarriers < 0.0 {
            v.push(Requirement::Obw);
        }
        if self.ibe_margin_db < 0.0 {
            v.push(Requirement::Ibe);
        }
        v
    }

    pub fn passes(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Mean per-bin power of the main symbols (CP removed), FFT order.
pub fn symbol_spectrum(frames: &[Vec<Complex64>], cp_len: usize, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for f in frames {
        buf.copy_from_slice(&f[cp_len..cp_len + n]);
        fft::fft(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    acc
}

/// EVM (%) of `measured` against `reference` after a least-squares complex gain.
pub fn evm_percent(measured: &[Complex64], reference: &[Complex64]) -> f64 {
    let num: Complex64 = measured
        .iter()
        .zip(reference)
        .map(|(r, s)| r * s.conj())
        .sum();
    let den: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if den == 0.0 {
        return 0.0;
    }
    let g = num / den;
    let err: f64 = measured
        .iter()
        .zip(reference)
        .map(|(r, s)| (r - g * s).norm_sqr())
        .sum();
    100.0 * (err / (g.norm_sqr() * den)).sqrt()
}

/// ACLR, EVM, OBW and in-band emission of PA output `tx` against the
/// undistorted `ideal` frames of the same waveform.
pub fn rf_checks(
    tx: &[Vec<Complex64>],
    ideal: &[Vec<Complex64>],
    cfg: &WaveformConfig,
    limits: &RfLimits,
) -> Result<RfReport> {
    if tx.len() != ideal.len() {
        return Err(Error::LengthMismatch {
            expected: ideal.len(),
            got: tx.len(),
        });
    }
    if tx.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = cfg.fft_size;
    let bw = limits.channel_width as i64;
    let spacing = limits.channel_spacing.unwrap_or(limits.channel_width) as i64;
    if spacing < bw || bw + 2 * spacing > n as i64 {
        return Err(Error::InvalidConfig(format!(
            "fft size {n} cannot hold a channel of {bw} and both neighbours {spacing} away"
        )));
    }
    for (a, b) in tx.iter().zip(ideal) {
        if a.len() != b.len() || a.len() != cfg.frame_len() {
            return Err(Error::LengthMismatch {
                expected: cfg.frame_len(),
                got: a.len(),
            });
        }
    }
    let spec = symbol_spectrum(tx, cfg.cp_len, n);
    let band = |lo: i64, hi: i64| -> f64 { (lo..hi).map(|f| spec[fft::frequency_bin(f, n)]).sum() };
    let own = band(-bw / 2, bw - bw / 2);
    let left = band(-bw / 2 - spacing, -bw / 2 - spacing + bw);
    let right = band(-bw / 2 + spacing, -bw / 2 + spacing + bw);
    let aclr_db = db(own / left.max(right).max(f64::MIN_POSITIVE));

    let mut evm_num = Vec::new();
    let mut evm_ref = Vec::new();
    for (a, b) in tx.iter().zip(ideal) {
        evm_num.extend(rx_frontend(a, cfg, None, Equalizer::Zf)?);
        evm_ref.extend(rx_frontend(b, cfg, None, Equalizer::Zf)?);
    }
    let evm_pct = evm_percent(&evm_num, &evm_ref);

    // occupied bandwidth: symmetric about DC on whole subcarriers
    let total: f64 = spec.iter().sum();
    let half_n = (n / 2) as i64;
    let mut obw = n as f64;
    for h in 0..=half_n {
        let inside: f64 = (-h..h.min(half_n - 1) + 1)
            .map(|f| spec[fft::frequency_bin(f, n)])
            .sum();
        if inside >= limits.obw_fraction * total {
            obw = (2 * h + 1) as f64;
            break;
        }
    }

    // in-band emission: resource blocks tiling the channel from its lower edge
    let rb = limits.rb_size.max(1) as i64;
    let alloc: Vec<i64> = (0..cfg.k as i64)
        .map(|i| cfg.allocation_start() as i64 + i - half_n)
        .collect();
    let (alo, ahi) = (alloc[0], alloc[alloc.len() - 1]);
    let mut alloc_rb = Vec::new();
    let mut free_rb = Vec::new();
    let mut lo = -bw / 2;
    while lo + rb <= bw - bw / 2 {
        let p = band(lo, lo + rb) / rb as f64;
        let hi = lo + rb - 1;
        if hi < alo || lo > ahi {
            free_rb.push(p);
        } else if lo >= alo && hi <= ahi {
            alloc_rb.push(p);
        }
        lo += rb;
    }
    let alloc_mean = if alloc_rb.is_empty() {
        (alo..=ahi)
            .map(|f| spec[fft::frequency_bin(f, n)])
            .sum::<f64>()
            / cfg.k as f64
    } else {
        alloc_rb.iter().sum::<f64>() / alloc_rb.len() as f64
    };
    let worst = free_rb.iter().copied().fold(0.0, f64::max);
    let ibe_db = if worst > 0.0 {
        db(worst / alloc_mean).max(IBE_FLOOR_DB)
    } else {
        IBE_FLOOR_DB
    };

    Ok(RfReport {
        aclr_db,
        evm_pct,
        obw_subcarriers: obw,
        ibe_db,
        aclr_margin_db: aclr_db - limits.aclr_min_db,
        evm_margin_pct: limits.evm_max_pct - evm_pct,
        obw_margin_subcarriers: limits.channel_width as f64 - obw,
        ibe_margin_db: limits.ibe_limit_db - ibe_db,
    })
}

/// Drive grid for [`obo_search`]: input back-off from `start_db` down to
/// `stop_db` in `step_db` decrements, refined by bisection to `tol_db`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
    pub tol_db: f64,
}

impl Default for DriveGrid {
    fn default() -> Self {
        DriveGrid {
            start_db: 15.0,
            stop_db: -30.0,
            step_db: 0.1,
            tol_db: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OboResult {
    /// Output back-off of the highest passing drive.
    pub obo_db: f64,
    /// Mean output power of that drive relative to saturation (`-obo_db`).
    pub output_power_db: f64,
    pub input_backoff_db: f64,
    /// Requirement that fails first beyond the returned drive, `None` when the
    /// grid ran out first.
    pub binding: Option<Requirement>,
    pub limited_by_grid: bool,
    pub report: RfReport,
}

/// Scans the PA drive upward until an RF requirement fails and returns the
/// last passing point.
pub fn obo_search(
    ideal: &[Vec<Complex64>],
    cfg: &WaveformConfig,
    pa: &PaModel,
    limits: &RfLimits,
    grid: DriveGrid,
) -> Result<OboResult> {
    pa.validate()?;
    if !(grid.step_db > 0.0 && grid.tol_db > 0.0 && grid.start_db > grid.stop_db) {
        return Err(Error::InvalidConfig(
            "drive grid must step downward in input back-off".into(),
        ));
    }
    let stream: Vec<Complex64> = ideal.iter().flatten().copied().collect();
    let frame_len = cfg.frame_len();
    let eval = |ibo: f64| -> Result<(RfReport, f64)> {
        let y = pa_apply(&stream, pa, ibo);
        let frames: Vec<Vec<Complex64>> = y.chunks(frame_len).map(|c| c.to_vec()).collect();
        let rep = rf_checks(&frames, ideal, cfg, limits)?;
        Ok((rep, output_backoff_db(pa, &y)))
    };
    let (first, first_obo) = eval(grid.start_db)?;
    if !first.passes() {
        let names: Vec<&str> = first.failures().iter().map(|r| r.name()).collect();
        return Err(Error::LowestDriveFails(names.join(",")));
    }
    let steps = ((grid.start_db - grid.stop_db) / grid.step_db).round() as usize;
    let mut pass = (grid.start_db, first, first_obo);
    for i in 1..=steps {
        let ibo = grid.start_db - i as f64 * grid.step_db;
        let (rep, obo) = eval(ibo)?;
        if rep.passes() {
            pass = (ibo, rep, obo);
            continue;
        }
        let mut fail = (ibo, rep);
        while pass.0 - fail.0 > grid.tol_db {
            let mid = 0.5 * (pass.0 + fail.0);
            let (r, o) = eval(mid)?;
            if r.passes() {
                pass = (mid, r, o);
            } else {
                fail = (mid, r);
            }
        }
        let binding = fail.1.failures().first().copied();
        return Ok(OboResult {
            obo_db: pass.2,
            output_power_db: -pass.2,
            input_backoff_db: pass.0,
            binding,
            limited_by_grid: false,
            report: pass.1,
        });
    }
    Ok(OboResult {
        obo_db: pass.2,
        output_power_db: -pass.2,
        input_backoff_db: pass.0,
        binding: None,
        limited_by_grid: true,
        report: pass.1,
    })
}

/// Bit error counts with a Wilson score interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub errors: u64,
    pub bits: u64,
    pub frames: u64,
}

impl LinkStats {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// Wilson interval at normal quantile `z` (1.96 for 95%).
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.bits == 0 {
            return (0.0, 1.0);
        }
        let n = self.bits as f64;
        let p = self.ber();
        let z2 = z * z;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }

    pub fn merge(&mut self, other: &LinkStats) {
        self.errors += other.errors;
        self.bits += other.bits;
        self.frames += other.frames;
    }
}

/// Counts bit errors between equal-length sequences.
pub fn ber_accumulate(tx: &[u8], rx: &[u8]) -> Result<LinkStats> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            got: rx.len(),
        });
    }
    let errors = tx
        .iter()
        .zip(rx)
        .filter(|(a, b)| (*a & 1) != (*b & 1))
        .count() as u64;
    Ok(LinkStats {
        errors,
        bits: tx.len() as u64,
        frames: 1,
    })
}
