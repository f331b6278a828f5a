//! Transmit chain: phase interpolation, DFT spreading with optional excess
//! band, OFDM modulation with cyclic prefix, and the quarter-turn rotation
//! that keeps consecutive DFT-s-OFDM symbols phase continuous.
//!
//! ```text
//! bits -> map_bits -> [interpolate x2] -> exp(j.) -> DFT(L*K) -> K+E bins
//!      -> IFFT(N) + CP -> rotate by u*pi/2
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::mapping::{map_bits, MappingKind, MappingTable, MskBlock};

/// Largest interpolation smoothness accepted by [`WaveformConfig::validate`].
pub const MAX_SMOOTHNESS: f64 = 0.25;

/// Parameters of one DFT-s-OFDM waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    /// In-band subcarriers (also the symbol count per block).
    pub k: usize,
    /// Oversampling factor before the DFT, 1 or 2.
    #[serde(default = "one")]
    pub oversampling: usize,
    /// Extra active subcarriers, split evenly on both sides of the band.
    #[serde(default)]
    pub excess: usize,
    /// IFFT size.
    pub fft_size: usize,
    /// Cyclic-prefix length in IFFT samples.
    pub cp_len: usize,
    /// Interpolation smoothness `a`; unused when `oversampling == 1`.
    #[serde(default)]
    pub smoothness: f64,
    #[serde(default)]
    pub cp_continuity: bool,
    #[serde(default)]
    pub symbol_continuity: bool,
    #[serde(default = "symmetric")]
    pub mapping: MappingKind,
    /// First in-band subcarrier, counted from the lowest grid frequency
    /// (`-N/2`). Defaults to centring the band on DC.
    #[serde(default)]
    pub allocation_offset: Option<usize>,
}

fn one() -> usize {
    1
}

fn symmetric() -> MappingKind {
    MappingKind::Symmetric
}

impl WaveformConfig {
    /// Plain DFT-s-OFDM with no oversampling, excess band or continuity.
    pub fn basic(k: usize, fft_size: usize, cp_len: usize) -> Self {
        Self {
            k,
            oversampling: 1,
            excess: 0,
            fft_size,
            cp_len,
            smoothness: 0.0,
            cp_continuity: false,
            symbol_continuity: false,
            mapping: MappingKind::Symmetric,
            allocation_offset: None,
        }
    }

    pub fn with_oversampling(mut self, l: usize, excess: usize, smoothness: f64) -> Self {
        self.oversampling = l;
        self.excess = excess;
        self.smoothness = smoothness;
        self
    }

    pub fn with_continuity(mut self, cp: bool, symbol: bool) -> Self {
        self.cp_continuity = cp;
        self.symbol_continuity = symbol;
        self
    }

    pub fn with_mapping(mut self, kind: MappingKind) -> Self {
        self.mapping = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 || !self.k.is_multiple_of(2) {
            return bad(format!("k = {} must be positive and even", self.k));
        }
        if !(1..=2).contains(&self.oversampling) {
            return bad(format!(
                "oversampling = {} must be 1 or 2",
                self.oversampling
            ));
        }
        if !self.excess.is_multiple_of(2) {
            return bad(format!("excess = {} must be even", self.excess));
        }
        if self.excess > self.oversampling * self.k - self.k {
            return bad(format!(
                "excess = {} exceeds the {} spare DFT bins",
                self.excess,
                self.oversampling * self.k - self.k
            ));
        }
        if !self.fft_size.is_multiple_of(2) || self.fft_size < self.k + self.excess {
            return bad(format!(
                "fft_size = {} must be even and >= k + excess",
                self.fft_size
            ));
        }
        if self.cp_len > self.fft_size {
            return bad(format!("cp_len = {} exceeds fft_size", self.cp_len));
        }
        if !(0.0..=MAX_SMOOTHNESS).contains(&self.smoothness) {
            return bad(format!(
                "smoothness = {} outside [0, {MAX_SMOOTHNESS}]",
                self.smoothness
            ));
        }
        if self.cp_continuity && self.k < 4 {
            return bad("cp_continuity needs k >= 4".into());
        }
        let off = self.allocation_start();
        if off < self.excess / 2 || off + self.k + self.excess / 2 > self.fft_size {
            return bad(format!(
                "allocation at {off} does not fit the {}-bin grid",
                self.fft_size
            ));
        }
        Ok(())
    }

    /// DFT size `L * K`.
    pub fn dft_size(&self) -> usize {
        self.oversampling * self.k
    }

    pub fn frame_len(&self) -> usize {
        self.cp_len + self.fft_size
    }

    pub fn bits_per_frame(&self) -> usize {
        MappingTable::bits_per_block(self.k, self.cp_continuity)
    }

    /// First in-band subcarrier on the `[-N/2, N/2)` grid, as an index from 0.
    pub fn allocation_start(&self) -> usize {
        self.allocation_offset
            .unwrap_or((self.fft_size / 2).saturating_sub(self.k / 2))
    }

    /// FFT bin carrying signed DFT frequency `f` (in-band is `-K/2..K/2`).
    pub fn grid_bin(&self, f: i64) -> usize {
        let s = self.allocation_start() as i64 + (self.k / 2) as i64 + f;
        fft::frequency_bin(s - (self.fft_size / 2) as i64, self.fft_size)
    }

    /// FFT bins of the in-band subcarriers, lowest frequency first.
    pub fn in_band_bins(&self) -> Vec<usize> {
        let h = (self.k / 2) as i64;
        (-h..h).map(|f| self.grid_bin(f)).collect()
    }

    /// FFT bins of every active subcarrier (in-band plus excess).
    pub fn occupied_bins(&self) -> Vec<usize> {
        let h = ((self.k + self.excess) / 2) as i64;
        (-h..h).map(|f| self.grid_bin(f)).collect()
    }

    /// Centre of the in-band allocation in subcarriers relative to DC.
    pub fn allocation_center(&self) -> f64 {
        self.allocation_start() as f64 + self.k as f64 / 2.0 - 0.5 - (self.fft_size / 2) as f64
    }

    /// True when the cyclic prefix spans a whole number of symbols, which
    /// makes the inter-symbol rotation exact.
    pub fn exact_numerology(&self) -> bool {
        (self.cp_len * self.k).is_multiple_of(self.fft_size)
    }

    pub fn mapping_table(&self) -> MappingTable {
        MappingTable::for_kind(self.mapping)
    }
}

/// Time-domain samples of one DFT-s-OFDM symbol, CP first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSamples {
    pub samples: Vec<Complex64>,
    pub cp_len: usize,
    /// Applied rotation in quarter turns.
    pub u: i32,
    /// Phase of the final sample after rotation.
    pub last_phase: f64,
    /// `|u * pi/2 - phi_diff|` of the applied rotation (0 when none applied).
    pub residual: f64,
    /// CP spans a whole number of symbols.
    pub exact_continuity: bool,
}

impl FrameSamples {
    pub fn main_symbol(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }
}

fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Doubles the phase rate. Even outputs are the input phases; the odd output
/// between symbols `k` and `k+1` is `phi_k + s_{k+1}/2 + a (s_k - s_{k+2})`,
/// the 7-tap filter `[-a, 0, 0.5+a, 1, 0.5+a, 0, -a]` applied to the
/// zero-stuffed phases, written in terms of the steps `s_k = phi_k - phi_{k-1}`
/// so that 2pi wraps cannot leak in. Steps are indexed cyclically and must be
/// the same length as `phases`.
pub fn interpolate_phases(phases: &[f64], steps: &[f64], smoothness: f64) -> Vec<f64> {
    let n = phases.len();
    assert_eq!(steps.len(), n, "one step per phase");
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        out.push(phases[k]);
        let next = steps[(k + 1) % n];
        out.push(phases[k] + 0.5 * next + smoothness * (steps[k] - steps[(k + 2) % n]));
    }
    out
}

/// Unit-modulus DFT input of length `L * K` for a block.
pub fn pre_dft_samples(block: &MskBlock, cfg: &WaveformConfig) -> Vec<Complex64> {
    if cfg.oversampling == 1 {
        return block.symbols.clone();
    }
    let steps: Vec<f64> = block
        .cyclic_steps()
        .iter()
        .map(|&s| f64::from(s) * FRAC_PI_2)
        .collect();
    let phases = interpolate_phases(&block.phases, &steps, cfg.smoothness);
    phases
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if i % 2 == 0 {
                block.symbols[i / 2]
            } else {
                Complex64::from_polar(1.0, p)
            }
        })
        .collect()
}

/// `L*K`-point unitary DFT, then the `K + E` bins centred on the band copied
/// onto the `N`-bin grid (FFT order). Other bins are zero.
pub fn dft_spread_and_map(block: &[Complex64], cfg: &WaveformConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let kp = cfg.dft_size();
    if block.len() != kp {
        return Err(Error::LengthMismatch {
            expected: kp,
            got: block.len(),
        });
    }
    let mut spec = block.to_vec();
    fft::fft(&mut spec);
    let mut grid = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let h = ((cfg.k + cfg.excess) / 2) as i64;
    for f in -h..h {
        grid[cfg.grid_bin(f)] = spec[fft::frequency_bin(f, kp)];
    }
    Ok(grid)
}

/// Unitary IFFT of the grid with the last `cp_len` samples prepended.
pub fn ofdm_modulate(grid: &[Complex64], cp_len: usize) -> Result<FrameSamples> {
    let n = grid.len();
    if cp_len > n {
        return Err(Error::InvalidConfig(format!(
            "cp_len {cp_len} exceeds symbol length {n}"
        )));
    }
    let mut body = grid.to_vec();
    fft::ifft(&mut body);
    let mut samples = Vec::with_capacity(n + cp_len);
    samples.extend_from_slice(&body[n - cp_len..]);
    samples.extend_from_slice(&body);
    let last_phase = samples.last().map_or(0.0, |s| s.arg());
    Ok(FrameSamples {
        samples,
        cp_len,
        u: 0,
        last_phase,
        residual: 0.0,
        exact_continuity: false,
    })
}

/// Integer `u` minimising `|u pi/2 - phi_diff|` with `phi_diff` wrapped to
/// `(-pi, pi]`; ties go to the smaller `|u|`, then to positive `u`.
pub fn quarter_rotation(phi_diff: f64) -> i32 {
    let d = wrap_phase(phi_diff);
    let x = d / FRAC_PI_2;
    let lo = x.floor() as i32;
    let hi = lo + 1;
    let e_lo = (x - f64::from(lo)).abs();
    let e_hi = (f64::from(hi) - x).abs();
    if (e_lo - e_hi).abs() < 1e-12 {
        if lo.abs() < hi.abs() || (lo.abs() == hi.abs() && lo > 0) {
            lo
        } else {
            hi
        }
    } else if e_lo < e_hi {
        lo
    } else {
        hi
    }
}

/// Rotates the whole frame (CP included) by `u * pi/2` so that its first
/// sample lines up with the last sample of the previous frame.
pub fn rotate_for_continuity(current: FrameSamples, prev_last_phase: Option<f64>) -> FrameSamples {
    let Some(prev) = prev_last_phase else {
        return current;
    };
    let first = current.samples.first().map_or(0.0, |s| s.arg());
    let diff = wrap_phase(prev - first);
    let u = quarter_rotation(diff);
    let rot = QUARTER_ROTATION[u.rem_euclid(4) as usize];
    let mut out = current;
    for s in out.samples.iter_mut() {
        *s *= rot;
    }
    out.u = u;
    out.residual = (f64::from(u) * FRAC_PI_2 - diff).abs();
    out.last_phase = out.samples.last().map_or(0.0, |s| s.arg());
    out
}

const QUARTER_ROTATION: [Complex64; 4] = crate::mapping::QUARTER_SYMBOLS;

/// One transmitted DFT-s-OFDM symbol with the data it carries.
#[derive(Clone, Debug)]
pub struct TxFrame {
    pub frame: FrameSamples,
    /// `None` for the QPSK reference.
    pub block: Option<MskBlock>,
    /// Symbol-rate data symbols before spreading.
    pub symbols: Vec<Complex64>,
    pub bits: Vec<u8>,
}

/// Stateful frame generator; the rotation rule couples consecutive frames.
#[derive(Clone, Debug)]
pub struct Modulator {
    cfg: WaveformConfig,
    table: MappingTable,
    prev_last_phase: Option<f64>,
}

impl Modulator {
    pub fn new(cfg: WaveformConfig) -> Result<Self> {
        let table = cfg.mapping_table();
        Self::with_table(cfg, table)
    }

    pub fn with_table(cfg: WaveformConfig, table: MappingTable) -> Result<Self> {
        cfg.validate()?;
        if cfg.cp_continuity && table.terminal().is_none() {
            return Err(Error::InvalidConfig(
                "mapping table has no terminal rows for cp_continuity".into(),
            ));
        }
        Ok(Self {
            cfg,
            table,
            prev_last_phase: None,
        })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.cfg
    }

    pub fn table(&self) -> &MappingTable {
        &self.table
    }

    /// Modulates one frame's worth of bits.
    pub fn next_frame(&mut self, bits: &[u8]) -> Result<TxFrame> {
        let block = map_bits(bits, self.cfg.k, &self.table, self.cfg.cp_continuity, 0)?;
        let pre = pre_dft_samples(&block, &self.cfg);
        let grid = dft_spread_and_map(&pre, &self.cfg)?;
        let mut frame = ofdm_modulate(&grid, self.cfg.cp_len)?;
        frame.exact_continuity = self.cfg.exact_numerology();
        if self.cfg.symbol_continuity {
            frame = rotate_for_continuity(frame, self.prev_last_phase);
        }
        self.prev_last_phase = Some(frame.last_phase);
        Ok(TxFrame {
            frame,
            symbols: block.symbols.clone(),
            bits: block.bits.clone(),
            block: Some(block),
        })
    }
}

/// Full chain over a bit stream whose length is a multiple of the per-frame
/// budget.
pub fn modulate_frame_stream(bits: &[u8], cfg: &WaveformConfig) -> Result<Vec<FrameSamples>> {
    let mut m = Modulator::new(cfg.clone())?;
    let b = cfg.bits_per_frame();
    if !bits.len().is_multiple_of(b) {
        return Err(Error::BitCount {
            expected: bits.len().div_ceil(b) * b,
            got: bits.len(),
        });
    }
    bits.chunks_exact(b)
        .map(|c| m.next_frame(c).map(|f| f.frame))
        .collect()
}

/// Gray-mapped QPSK, `(1 - 2 b0 + j (1 - 2 b1)) / sqrt 2`.
pub fn qpsk_symbols(bits: &[u8]) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    bits.chunks_exact(2)
        .map(|b| {
            Complex64::new(
                s * (1.0 - 2.0 * f64::from(b[0] & 1)),
                s * (1.0 - 2.0 * f64::from(b[1] & 1)),
            )
        })
        .collect()
}

/// Hard Gray demapping of QPSK symbols.
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// The QPSK reference version of `cfg`: no oversampling, excess band or
/// continuity.
pub fn qpsk_config(cfg: &WaveformConfig) -> WaveformConfig {
    WaveformConfig {
        oversampling: 1,
        excess: 0,
        smoothness: 0.0,
        cp_continuity: false,
        symbol_continuity: false,
        ..cfg.clone()
    }
}

/// One QPSK DFT-s-OFDM frame carrying `2K` bits.
pub fn qpsk_frame(bits: &[u8], cfg: &WaveformConfig) -> Result<TxFrame> {
    let cfg = qpsk_config(cfg);
    if bits.len() != 2 * cfg.k {
        return Err(Error::BitCount {
            expected: 2 * cfg.k,
            got: bits.len(),
        });
    }
    let symbols = qpsk_symbols(bits);
    let grid = dft_spread_and_map(&symbols, &cfg)?;
    let frame = ofdm_modulate(&grid, cfg.cp_len)?;
    Ok(TxFrame {
        frame,
        block: None,
        symbols,
        bits: bits.to_vec(),
    })
}

/// QPSK through the same DFT-s-OFDM chain, `2K` bits per frame.
pub fn qpsk_reference_frame_stream(bits: &[u8], cfg: &WaveformConfig) -> Result<Vec<FrameSamples>> {
    let per = 2 * cfg.k;
    if !bits.len().is_multiple_of(per) {
        return Err(Error::BitCount {
            expected: bits.len().div_ceil(per) * per,
            got: bits.len(),
        });
    }
    bits.chunks_exact(per)
        .map(|c| qpsk_frame(c, cfg).map(|f| f.frame))
        .collect()
}

/// Concatenates frames into one sample stream.
pub fn concat_frames(frames: &[FrameSamples]) -> Vec<Complex64> {
    frames
        .iter()
        .flat_map(|f| f.samples.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::Transition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2)).collect()
    }

    #[test]
    fn linear_midpoint() {
        let out = interpolate_phases(&[0.0, FRAC_PI_2], &[FRAC_PI_2, FRAC_PI_2], 0.0);
        assert!((out[1] - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn smoothed_midpoint() {
        // steps into phi_k, phi_{k+1}, phi_{k+2}: +pi/2, +pi/2, 0
        let phases = [0.0, FRAC_PI_2, FRAC_PI_2];
        let steps = [FRAC_PI_2, FRAC_PI_2, 0.0];
        let out = interpolate_phases(&phases, &steps, 0.05);
        let expected = 0.0 + PI / 4.0 + 0.05 * FRAC_PI_2;
        assert!((out[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn smoothed_midpoint_matches_filter() {
        // direct convolution of zero-stuffed unwrapped phases with the 7-tap filter
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = 0.07;
        let n = 16;
        let steps: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-1i8..=1)) * FRAC_PI_2)
            .collect();
        let mut phases = vec![0.0; n];
        let mut acc = 0.0;
        for k in 0..n {
            acc += steps[k];
            phases[k] = acc;
        }
        let out = interpolate_phases(&phases, &steps, a);
        let h = [-a, 0.0, 0.5 + a, 1.0, 0.5 + a, 0.0, -a];
        for k in 2..n - 3 {
            let mut z = vec![0.0; 2 * n];
            for (i, p) in phases.iter().enumerate() {
                z[2 * i] = *p;
            }
            let idx = 2 * k + 1;
            let conv: f64 = (0..7).map(|j| h[j] * z[idx + 3 - j]).sum();
            assert!((conv - out[idx]).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn even_indices_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = 2 * rng.random_range(2..20);
            let phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let steps: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let a = rng.random_range(0.0..MAX_SMOOTHNESS);
            let out = interpolate_phases(&phases, &steps, a);
            for k in 0..n {
                assert_eq!(out[2 * k], phases[k]);
            }
        }
    }

    #[test]
    fn basic_grid_has_k_bins() {
        let cfg = WaveformConfig::basic(12, 64, 16);
        let x: Vec<Complex64> = (0..12)
            .map(|i| Complex64::from_polar(1.0, i as f64))
            .collect();
        let g = dft_spread_and_map(&x, &cfg).unwrap();
        assert_eq!(g.iter().filter(|v| v.norm() > 1e-12).count(), 12);
    }

    #[test]
    fn full_excess_maps_every_bin_and_keeps_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Complex64> = (0..32)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))
            .collect();
        let e_in: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        for excess in [0, 4, 8, 16] {
            let cfg = WaveformConfig::basic(16, 64, 8).with_oversampling(2, excess, 0.0);
            let g = dft_spread_and_map(&x, &cfg).unwrap();
            let e: f64 = g.iter().map(|v| v.norm_sqr()).sum();
            assert_eq!(g.iter().filter(|v| v.norm() > 1e-12).count(), 16 + excess);
            if excess == 16 {
                assert!((e - e_in).abs() < 1e-9);
            } else {
                assert!(e < e_in);
            }
        }
    }

    #[test]
    fn mapping_errors() {
        let cfg = WaveformConfig::basic(12, 64, 16);
        assert!(matches!(
            dft_spread_and_map(&[Complex64::new(1.0, 0.0); 5], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
        let mut bad = cfg.clone().with_oversampling(2, 3, 0.0);
        assert!(bad.validate().is_err());
        bad.excess = 2;
        bad.allocation_offset = Some(63);
        assert!(dft_spread_and_map(&[Complex64::new(1.0, 0.0); 24], &bad).is_err());
        assert!(ofdm_modulate(&[Complex64::new(0.0, 0.0); 4], 5).is_err());
    }

    #[test]
    fn dc_bin_gives_constant_signal() {
        let mut grid = vec![Complex64::new(0.0, 0.0); 32];
        grid[0] = Complex64::new(2.0, 0.0);
        let f = ofdm_modulate(&grid, 8).unwrap();
        let v = f.samples[0];
        assert!(f.samples.iter().all(|s| (s - v).norm() < 1e-12));
        assert_eq!(f.samples.len(), 40);
    }

    #[test]
    fn cp_is_tail_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = WaveformConfig::basic(12, 64, 16).with_continuity(true, true);
        let bits = random_bits(&mut rng, 10 * cfg.bits_per_frame());
        for f in modulate_frame_stream(&bits, &cfg).unwrap() {
            assert_eq!(&f.samples[..16], &f.samples[64..]);
        }
    }

    #[test]
    fn symbol_instant_impulse_response_is_isi_free() {
        // K = 16, L = 2, E = 0: N / (L K) = 8 IFFT samples per DFT input sample.
        let cfg = WaveformConfig::basic(16, 256, 0).with_oversampling(2, 0, 0.0);
        for p in [0usize, 6] {
            let mut x = vec![Complex64::new(0.0, 0.0); 32];
            x[p] = Complex64::new(1.0, 0.0);
            let g = dft_spread_and_map(&x, &cfg).unwrap();
            let f = ofdm_modulate(&g, 0).unwrap();
            let peak = f.samples[p * 8].norm();
            assert!(peak > 0.1);
            for q in (0..32).filter(|q| q % 2 == p % 2 && *q != p) {
                assert!(
                    f.samples[q * 8].norm() < 1e-12 * peak.max(1.0),
                    "lag {}",
                    q as i64 - p as i64
                );
            }
            // odd lags do interfere
            assert!(f.samples[(p + 1) * 8].norm() > 1e-3);
        }
    }

    #[test]
    fn rotation_rule() {
        assert_eq!(quarter_rotation(FRAC_PI_2), 1);
        assert_eq!(quarter_rotation(0.3 * PI), 1);
        assert_eq!(quarter_rotation(0.2 * PI), 0);
        assert_eq!(quarter_rotation(PI), 2);
        assert_eq!(quarter_rotation(-0.6 * PI), -1);
        // ties
        assert_eq!(quarter_rotation(PI / 4.0), 0);
        assert_eq!(quarter_rotation(-PI / 4.0), 0);
        assert_eq!(quarter_rotation(3.0 * PI / 4.0), 1);
        assert_eq!(quarter_rotation(-3.0 * PI / 4.0), -1);
    }

    #[test]
    fn rotation_residual_exact_when_critically_sampled() {
        // N = K: every IFFT sample is a symbol instant, so phi_diff is a multiple of pi/2.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = WaveformConfig::basic(16, 16, 4).with_continuity(true, true);
        let bits = random_bits(&mut rng, 50 * cfg.bits_per_frame());
        let frames = modulate_frame_stream(&bits, &cfg).unwrap();
        for f in &frames {
            assert!(f.exact_continuity);
            assert!(f.residual < 1e-9, "{}", f.residual);
        }
    }

    #[test]
    fn constant_envelope_before_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let table = MappingTable::symmetric();
        for l in [1, 2] {
            for a in [0.0, 0.05, 0.25] {
                let cfg = WaveformConfig::basic(24, 128, 16)
                    .with_oversampling(l, 0, a)
                    .with_continuity(true, false);
                let bits = random_bits(&mut rng, cfg.bits_per_frame());
                let block = map_bits(&bits, 24, &table, true, 0).unwrap();
                for s in pre_dft_samples(&block, &cfg) {
                    assert!((s.norm() - 1.0).abs() < 4.0 * f64::EPSILON);
                }
            }
        }
    }

    #[test]
    fn stream_edge_cases() {
        let cfg = WaveformConfig::basic(12, 64, 16);
        assert!(modulate_frame_stream(&[], &cfg).unwrap().is_empty());
        assert!(modulate_frame_stream(&[0; 5], &cfg).is_err());
        assert!(qpsk_reference_frame_stream(&[0; 23], &cfg).is_err());
        let q = qpsk_reference_frame_stream(&[0; 24], &cfg).unwrap();
        let p0 = q[0].samples[0].norm();
        assert!(q[0].samples.iter().all(|s| (s.norm() - p0).abs() < 1e-12));
    }

    #[test]
    fn first_frame_unrotated() {
        let mut m =
            Modulator::new(WaveformConfig::basic(12, 64, 16).with_continuity(true, true)).unwrap();
        let f = m.next_frame(&[1; 16]).unwrap();
        assert_eq!(f.frame.u, 0);
        assert_eq!(f.block.unwrap().transitions.len(), 12);
        let _ = Transition::ALL;
    }
}
