//! Monte-Carlo link simulation: transmitter, impairments, receiver and BER.
//!
//! Frames are processed in fixed batches. Each batch owns one transmit
//! stream (so the inter-frame rotation runs across its frames) and draws
//! every random stage from generators keyed by `(seed, stage, batch)`.
//! Results are therefore independent of the thread count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::impairments::{self, PaModel, PnModel, TdlProfile};
use crate::metrics::{ber_accumulate, LinkStats};
use crate::rx::{
    self, bcjr_detect, derotate, llr_to_bits, viterbi_detect, DetectorConfig, Equalizer, Rotation,
};
use crate::seed::{self, stream};
use crate::tx::{qpsk_demap, qpsk_frame, Modulator, TxFrame, WaveformConfig};

/// Frames per independent transmit stream.
pub const BATCH_FRAMES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    Awgn,
    Tdl {
        profile: TdlProfile,
        #[serde(default = "yes")]
        block_fading: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Msk,
    /// Gray QPSK through the same DFT-s-OFDM chain.
    Qpsk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftOrHard {
    Viterbi,
    /// Hard decisions taken from BCJR LLRs.
    Bcjr,
}

/// PA operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaSetting {
    pub model: PaModel,
    pub input_backoff_db: f64,
}

/// Everything one link point needs besides SNR, frame count and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub waveform: WaveformConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "awgn")]
    pub channel: ChannelModel,
    #[serde(default)]
    pub pn_tx: Option<PnModel>,
    #[serde(default)]
    pub pn_rx: Option<PnModel>,
    #[serde(default)]
    pub pa: Option<PaSetting>,
    /// Undo the transmitter's rotation (and any injected offset) with side
    /// information; otherwise leave it to the detector.
    #[serde(default = "yes")]
    pub genie_rotation: bool,
    /// Rotate each received frame by a random multiple of `pi/2`.
    #[serde(default)]
    pub random_offset: bool,
    #[serde(default = "viterbi")]
    pub receiver: SoftOrHard,
    #[serde(default = "msk")]
    pub modulation: Modulation,
}

fn awgn() -> ChannelModel {
    ChannelModel::Awgn
}
fn viterbi() -> SoftOrHard {
    SoftOrHard::Viterbi
}
fn msk() -> Modulation {
    Modulation::Msk
}

impl LinkConfig {
    pub fn awgn(waveform: WaveformConfig, detector: DetectorConfig) -> Self {
        LinkConfig {
            waveform,
            detector,
            channel: ChannelModel::Awgn,
            pn_tx: None,
            pn_rx: None,
            pa: None,
            genie_rotation: true,
            random_offset: false,
            receiver: SoftOrHard::Viterbi,
            modulation: Modulation::Msk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        self.detector.validate()?;
        if let Some(p) = &self.pn_tx {
            p.validate()?;
        }
        if let Some(p) = &self.pn_rx {
            p.validate()?;
        }
        if let Some(p) = &self.pa {
            p.model.validate()?;
        }
        if let ChannelModel::Tdl { profile, .. } = &self.channel {
            profile.validate()?;
            if profile.max_delay() >= self.waveform.frame_len() {
                return Err(Error::DelayTooLong {
                    delay: profile.max_delay(),
                    len: self.waveform.frame_len(),
                });
            }
        }
        Ok(())
    }

    pub fn bits_per_frame(&self) -> usize {
        match self.modulation {
            Modulation::Msk => self.waveform.bits_per_frame(),
            Modulation::Qpsk => 2 * self.waveform.k,
        }
    }
}

/// In-band energy per symbol of a frame's main part.
pub fn in_band_energy_per_symbol(frame: &[Complex64], cfg: &WaveformConfig) -> f64 {
    let mut body = frame[cfg.cp_len..].to_vec();
    fft::fft(&mut body);
    cfg.in_band_bins()
        .iter()
        .map(|&b| body[b].norm_sqr())
        .sum::<f64>()
        / cfg.k as f64
}

/// Simulates `n_frames` frames at `snr_db` (Es/N0 over the in-band symbols).
pub fn simulate_link(
    cfg: &LinkConfig,
    snr_db: f64,
    n_frames: usize,
    seed: u64,
) -> Result<LinkStats> {
    cfg.validate()?;
    let batches = n_frames.div_ceil(BATCH_FRAMES);
    let parts: Vec<Result<LinkStats>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH_FRAMES.min(n_frames - b * BATCH_FRAMES);
            run_batch(cfg, snr_db, count, seed, b as u64)
        })
        .collect();
    let mut total = LinkStats::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

fn run_batch(
    cfg: &LinkConfig,
    snr_db: f64,
    count: usize,
    seed: u64,
    batch: u64,
) -> Result<LinkStats> {
    let w = &cfg.waveform;
    let mut bit_rng = seed::derive_rng(seed, &[stream::BITS, batch]);
    let mut noise_rng = seed::derive_rng(seed, &[stream::AWGN, batch]);
    let mut offset_rng = seed::derive_rng(seed, &[stream::OFFSET, batch]);
    let mut modulator = Modulator::new(w.clone())?;
    let table = modulator.table().clone();

    let mut txs: Vec<TxFrame> = Vec::with_capacity(count);
    for _ in 0..count {
        let bits: Vec<u8> = (0..cfg.bits_per_frame())
            .map(|_| bit_rng.random_range(0..2u8))
            .collect();
        txs.push(match cfg.modulation {
            Modulation::Msk => modulator.next_frame(&bits)?,
            Modulation::Qpsk => qpsk_frame(&bits, w)?,
        });
    }

    let mut frames: Vec<Vec<Complex64>> = txs.iter().map(|t| t.frame.samples.clone()).collect();
    if let Some(pa) = &cfg.pa {
        // one operating point for the whole batch
        let stream_in: Vec<Complex64> = frames.iter().flatten().copied().collect();
        let out = impairments::pa_apply(&stream_in, &pa.model, pa.input_backoff_db);
        frames = out.chunks(w.frame_len()).map(|c| c.to_vec()).collect();
    }
    let es: Vec<f64> = frames
        .iter()
        .map(|f| in_band_energy_per_symbol(f, w))
        .collect();
    if let Some(pn) = &cfg.pn_tx {
        for (i, f) in frames.iter_mut().enumerate() {
            let trace = impairments::pn_generate(
                pn,
                f.len(),
                seed::derive(seed, &[stream::PN_TX, batch, i as u64]),
            )?;
            impairments::apply_phase(f, &trace);
        }
    }
    let responses: Option<Vec<Vec<Complex64>>> = match &cfg.channel {
        ChannelModel::Awgn => None,
        ChannelModel::Tdl {
            profile,
            block_fading,
        } => {
            let (out, h) = impairments::tdl_apply(
                &frames,
                profile,
                w.fft_size,
                *block_fading,
                seed::derive(seed, &[stream::TDL, batch]),
            )?;
            frames = out;
            Some(h)
        }
    };

    let mut stats = LinkStats::default();
    for (i, (mut f, tx)) in frames.into_iter().zip(&txs).enumerate() {
        let offset = if cfg.random_offset {
            offset_rng.random_range(0..4i32)
        } else {
            0
        };
        if offset != 0 {
            let r = crate::mapping::QUARTER_SYMBOLS[offset as usize];
            f.iter_mut().for_each(|s| *s *= r);
        }
        let nv = impairments::noise_variance(es[i], snr_db);
        impairments::add_awgn(&mut f, nv, &mut noise_rng);
        if let Some(pn) = &cfg.pn_rx {
            let trace = impairments::pn_generate(
                pn,
                f.len(),
                seed::derive(seed, &[stream::PN_RX, batch, i as u64]),
            )?;
            impairments::apply_phase(&mut f, &trace);
        }
        let h = responses.as_ref().map(|r| r[i].as_slice());
        let eq = Equalizer::for_noise(nv / es[i].max(f64::MIN_POSITIVE));
        let symbols = rx::rx_frontend(&f, w, h, eq)?;
        let rot = if cfg.genie_rotation {
            Rotation::Known(tx.frame.u + offset)
        } else {
            Rotation::Estimated
        };
        let symbols = derotate(&symbols, rot);
        let decided = match cfg.modulation {
            Modulation::Qpsk => qpsk_demap(&symbols),
            Modulation::Msk => match cfg.receiver {
                SoftOrHard::Viterbi => {
                    viterbi_detect(&symbols, &cfg.detector, &table, w.cp_continuity)?.bits
                }
                SoftOrHard::Bcjr => {
                    let det_nv = nv / w.oversampling as f64;
                    llr_to_bits(&bcjr_detect(
                        &symbols,
                        &cfg.detector,
                        &table,
                        w.cp_continuity,
                        det_nv,
                    )?)
                }
            },
        };
        let s = ber_accumulate(&tx.bits, &decided)?;
        stats.merge(&s);
    }
    Ok(stats)
}

/// SNR at which a BER curve crosses `target`, interpolating linearly in
/// `log10(BER)` between the bracketing points. Points must be sorted by SNR.
pub fn snr_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (s0, b0) = w[0];
        let (s1, b1) = w[1];
        if b0 >= target && b1 <= target && b0 > 0.0 {
            if b1 <= 0.0 {
                return Some(s1);
            }
            if b0 == b1 {
                return Some(s0);
            }
            let t = (b0.log10() - target.log10()) / (b0.log10() - b1.log10());
            return Some(s0 + t * (s1 - s0));
        }
    }
    None
}
