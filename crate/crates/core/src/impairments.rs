//! Channel and hardware impairments: AWGN, block-fading tapped delay line,
//! oscillator phase noise and a memoryless power amplifier.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::seed;

/// Circular complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Per-sample noise variance giving `snr_db` for in-band energy `es` per
/// symbol. With unitary transforms the per-sample time-domain variance
/// equals the per-subcarrier and per-symbol variance after the receiver.
pub fn noise_variance(es: f64, snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        es / 10f64.powf(snr_db / 10.0)
    }
}

/// Adds white noise of the given per-sample variance in place.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], variance: f64, rng: &mut R) {
    if variance <= 0.0 {
        return;
    }
    for s in samples.iter_mut() {
        *s += complex_gaussian(rng, variance);
    }
}

/// AWGN at `snr_db` (Es/N0, `es` = in-band energy per symbol). `+inf`
/// returns the input unchanged.
pub fn awgn_apply(samples: &[Complex64], es: f64, snr_db: f64, rng_seed: u64) -> Vec<Complex64> {
    let mut out = samples.to_vec();
    add_awgn(
        &mut out,
        noise_variance(es, snr_db),
        &mut seed::rng(rng_seed),
    );
    out
}

/// Tapped delay line with integer sample delays. Powers are normalised to a
/// unit sum on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdlProfile {
    pub delays: Vec<usize>,
    pub powers_db: Vec<f64>,
}

impl TdlProfile {
    pub fn new(delays: Vec<usize>, powers_db: Vec<f64>) -> Result<Self> {
        let p = TdlProfile { delays, powers_db };
        p.validate()?;
        // relative to the strongest tap so extreme dB values stay finite
        let max = p
            .powers_db
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = p
            .powers_db
            .iter()
            .map(|d| 10f64.powf((d - max) / 10.0))
            .sum();
        let shift = max + 10.0 * total.log10();
        Ok(TdlProfile {
            powers_db: p.powers_db.iter().map(|d| d - shift).collect(),
            ..p
        })
    }

    /// Single tap at delay 0.
    pub fn flat() -> Self {
        TdlProfile {
            delays: vec![0],
            powers_db: vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() {
            return Err(Error::InvalidConfig("tdl profile has no taps".into()));
        }
        if self.delays.len() != self.powers_db.len() {
            return Err(Error::LengthMismatch {
                expected: self.delays.len(),
                got: self.powers_db.len(),
            });
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("tdl tap power must be finite".into()));
        }
        Ok(())
    }

    fn linear_powers_raw(&self) -> Vec<f64> {
        self.powers_db
            .iter()
            .map(|d| 10f64.powf(d / 10.0))
            .collect()
    }

    /// Tap powers rescaled to sum to one.
    pub fn linear_powers(&self) -> Vec<f64> {
        let raw = self.linear_powers_raw();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|p| p / total).collect()
    }

    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    /// One random realisation as an impulse response of length `max_delay + 1`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let mut h = vec![Complex64::new(0.0, 0.0); self.max_delay() + 1];
        for (&d, p) in self.delays.iter().zip(self.linear_powers()) {
            h[d] += complex_gaussian(rng, p);
        }
        h
    }
}

/// `n`-point unitary-scaled frequency response of an impulse response
/// (plain DFT sum, so a unit tap at delay 0 gives 1 on every bin).
pub fn frequency_response(taps: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, t) in taps.iter().enumerate() {
        buf[i % n] += t;
    }
    fft::fft(&mut buf);
    let s = (n as f64).sqrt();
    buf.iter().map(|v| v * s).collect()
}

/// Faded frames and the per-frame channel frequency responses.
pub type FadedFrames = (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>);

/// Passes a stream of frames through the TDL. Taps are drawn per frame when
/// `block_fading`, otherwise once for the whole stream; the tail of each
/// frame spills into the next. Returns the received frames and the
/// `n_fft`-bin frequency response seen by each.
pub fn tdl_apply(
    frames: &[Vec<Complex64>],
    profile: &TdlProfile,
    n_fft: usize,
    block_fading: bool,
    rng_seed: u64,
) -> Result<FadedFrames> {
    profile.validate()?;
    let mut rng = seed::rng(rng_seed);
    let mut taps = profile.draw(&mut rng);
    let mut spill: Vec<Complex64> = Vec::new();
    let mut out = Vec::with_capacity(frames.len());
    let mut responses = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        if profile.max_delay() >= frame.len() {
            return Err(Error::DelayTooLong {
                delay: profile.max_delay(),
                len: frame.len(),
            });
        }
        if block_fading && i > 0 {
            taps = profile.draw(&mut rng);
        }
        let mut y = vec![Complex64::new(0.0, 0.0); frame.len() + taps.len() - 1];
        for (n, x) in frame.iter().enumerate() {
            for (d, h) in taps.iter().enumerate() {
                y[n + d] += x * h;
            }
        }
        for (n, s) in spill.iter().enumerate() {
            y[n] += s;
        }
        spill = y.split_off(frame.len());
        out.push(y);
        responses.push(frequency_response(&taps, n_fft));
    }
    Ok((out, responses))
}

/// Oscillator phase-noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PnModel {
    /// Random walk with increment variance `2 pi linewidth / sample_rate`.
    Wiener {
        linewidth_hz: f64,
        sample_rate_hz: f64,
    },
    /// Gaussian phase with a two-sided PSD interpolated log-log through
    /// `(frequency Hz, dBc/Hz)` breakpoints, flat outside them.
    ShapedPsd {
        breakpoints: Vec<(f64, f64)>,
        sample_rate_hz: f64,
    },
}

impl PnModel {
    /// Wiener model whose per-sample increment variance is `var`.
    pub fn wiener_from_variance(var: f64, sample_rate_hz: f64) -> Self {
        PnModel::Wiener {
            linewidth_hz: var * sample_rate_hz / TAU,
            sample_rate_hz,
        }
    }

    /// Wiener model whose phase has RMS `rms` after `n` samples.
    pub fn wiener_with_drift(rms: f64, n: usize, sample_rate_hz: f64) -> Self {
        Self::wiener_from_variance(rms * rms / n as f64, sample_rate_hz)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PnModel::Wiener {
                linewidth_hz,
                sample_rate_hz,
            } => {
                if linewidth_hz.is_nan() || *linewidth_hz < 0.0 || !positive(*sample_rate_hz) {
                    return Err(Error::InvalidConfig(
                        "wiener linewidth must be >= 0 and sample rate > 0".into(),
                    ));
                }
            }
            PnModel::ShapedPsd {
                breakpoints,
                sample_rate_hz,
            } => {
                if !positive(*sample_rate_hz) {
                    return Err(Error::InvalidConfig("sample rate must be > 0".into()));
                }
                if breakpoints.is_empty() {
                    return Err(Error::InvalidConfig(
                        "psd needs at least one breakpoint".into(),
                    ));
                }
                if breakpoints
                    .iter()
                    .any(|(f, l)| !positive(*f) || !l.is_finite())
                {
                    return Err(Error::InvalidConfig(
                        "psd breakpoints need f > 0 and finite level".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidConfig(
                        "psd breakpoints must increase in frequency".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Two-sided phase PSD in rad^2/Hz at `|f|` (ShapedPsd only).
    pub fn psd_at(&self, f: f64) -> f64 {
        match self {
            PnModel::Wiener { linewidth_hz, .. } => {
                // random walk: S(f) = linewidth / (pi f^2)
                if f == 0.0 {
                    f64::INFINITY
                } else {
                    linewidth_hz / (PI * f * f)
                }
            }
            PnModel::ShapedPsd { breakpoints, .. } => {
                10f64.powf(interp_level(breakpoints, f.abs()) / 10.0)
            }
        }
    }
}

fn interp_level(bp: &[(f64, f64)], f: f64) -> f64 {
    let first = bp[0];
    let last = bp[bp.len() - 1];
    if f <= first.0 {
        return first.1;
    }
    if f >= last.0 {
        return last.1;
    }
    let i = bp.partition_point(|p| p.0 <= f) - 1;
    let (f0, l0) = bp[i];
    let (f1, l1) = bp[i + 1];
    let t = (f.ln() - f0.ln()) / (f1.ln() - f0.ln());
    l0 + t * (l1 - l0)
}

/// Phase trace of `n_samples` samples starting near 0.
pub fn pn_generate(model: &PnModel, n_samples: usize, rng_seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = seed::rng(rng_seed);
    match model {
        PnModel::Wiener {
            linewidth_hz,
            sample_rate_hz,
        } => {
            let sigma = (TAU * linewidth_hz / sample_rate_hz).sqrt();
            let mut phi = 0.0;
            Ok((0..n_samples)
                .map(|_| {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    phi += sigma * w;
                    phi
                })
                .collect())
        }
        PnModel::ShapedPsd { sample_rate_hz, .. } => {
            if n_samples == 0 {
                return Ok(Vec::new());
            }
            let m = n_samples.next_power_of_two().max(2);
            let df = sample_rate_hz / m as f64;
            let mut spec: Vec<Complex64> = (0..m)
                .map(|k| {
                    let f = fft::bin_frequency(k, m) as f64 * df;
                    let s = if k == 0 { 0.0 } else { model.psd_at(f) };
                    complex_gaussian(&mut rng, s * df)
                })
                .collect();
            fft::ifft(&mut spec);
            let g = (m as f64).sqrt() * std::f64::consts::SQRT_2;
            Ok(spec.iter().take(n_samples).map(|z| z.re * g).collect())
        }
    }
}

/// Multiplies sample `n` by `exp(j phase[n])`.
pub fn apply_phase(samples: &mut [Complex64], phase: &[f64]) {
    for (s, p) in samples.iter_mut().zip(phase) {
        *s *= Complex64::from_polar(1.0, *p);
    }
}

/// Parametric AM/PM, `alpha A^q1 / (1 + (A/beta)^q2)` degrees at input amplitude `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmPm {
    pub alpha_deg: f64,
    pub beta: f64,
    pub q1: f64,
    pub q2: f64,
}

impl Default for AmPm {
    fn default() -> Self {
        AmPm {
            alpha_deg: 2560.0,
            beta: 0.114,
            q1: 2.4,
            q2: 2.3,
        }
    }
}

/// Memoryless power amplifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaModel {
    /// Modified Rapp AM/AM with optional AM/PM.
    Rapp {
        gain: f64,
        vsat: f64,
        p: f64,
        am_pm: Option<AmPm>,
    },
    /// Ideal linear gain. `vsat` only sets the output reference level.
    Linear { gain: f64, vsat: f64 },
}

impl Default for PaModel {
    fn default() -> Self {
        PaModel::Rapp {
            gain: 4.65,
            vsat: 0.58,
            p: 0.81,
            am_pm: Some(AmPm::default()),
        }
    }
}

impl PaModel {
    pub fn linear() -> Self {
        PaModel::Linear {
            gain: 4.65,
            vsat: 0.58,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (gain, vsat, p) = match *self {
            PaModel::Rapp { gain, vsat, p, .. } => (gain, vsat, p),
            PaModel::Linear { gain, vsat } => (gain, vsat, 1.0),
        };
        if !(gain > 0.0 && vsat > 0.0 && p > 0.0) {
            return Err(Error::InvalidConfig(
                "pa gain, vsat and p must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        match *self {
            PaModel::Rapp { gain, .. } | PaModel::Linear { gain, .. } => gain,
        }
    }

    pub fn vsat(&self) -> f64 {
        match *self {
            PaModel::Rapp { vsat, .. } | PaModel::Linear { vsat, .. } => vsat,
        }
    }

    /// Input amplitude at which the linear asymptote reaches `vsat`.
    pub fn saturation_drive(&self) -> f64 {
        self.vsat() / self.gain()
    }

    /// Output for one input sample.
    pub fn amplify(&self, x: Complex64) -> Complex64 {
        match *self {
            PaModel::Linear { gain, .. } => x * gain,
            PaModel::Rapp {
                gain,
                vsat,
                p,
                am_pm,
            } => {
                let a = x.norm();
                if a == 0.0 {
                    return x;
                }
                let ga = gain * a;
                let out = ga / (1.0 + (ga / vsat).powf(2.0 * p)).powf(1.0 / (2.0 * p));
                let shift = am_pm.map_or(0.0, |m| {
                    (m.alpha_deg * a.powf(m.q1) / (1.0 + (a / m.beta).powf(m.q2))).to_radians()
                });
                x / a * Complex64::from_polar(out, shift)
            }
        }
    }
}

pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Scales `samples` so their mean power sits `input_backoff_db` below the
/// saturation drive power, then applies the PA.
pub fn pa_apply(samples: &[Complex64], pa: &PaModel, input_backoff_db: f64) -> Vec<Complex64> {
    let p = mean_power(samples);
    if p == 0.0 {
        return samples.to_vec();
    }
    let target = pa.saturation_drive().powi(2) * 10f64.powf(-input_backoff_db / 10.0);
    let scale = (target / p).sqrt();
    samples.iter().map(|&s| pa.amplify(s * scale)).collect()
}

/// Output back-off in dB: saturation power over mean output power.
pub fn output_backoff_db(pa: &PaModel, output: &[Complex64]) -> f64 {
    10.0 * (pa.vsat().powi(2) / mean_power(output)).log10()
}

fn positive(x: f64) -> bool {
    x > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn awgn_off_is_identity() {
        let x: Vec<Complex64> = (0..50).map(|i| Complex64::new(i as f64, -1.0)).collect();
        assert_eq!(awgn_apply(&x, 1.0, f64::INFINITY, 3), x);
    }

    #[test]
    fn awgn_variance() {
        let x = vec![Complex64::new(0.0, 0.0); 1_000_000];
        let y = awgn_apply(&x, 1.0, 10.0, 8);
        let v = mean_power(&y);
        assert!((v / 0.1 - 1.0).abs() < 0.01, "{v}");
        let re: f64 = y.iter().map(|s| s.re * s.re).sum::<f64>() / y.len() as f64;
        assert!((re / 0.05 - 1.0).abs() < 0.01);
    }

    #[test]
    fn awgn_deterministic() {
        let x = vec![Complex64::new(1.0, 0.0); 100];
        assert_eq!(awgn_apply(&x, 1.0, 5.0, 1), awgn_apply(&x, 1.0, 5.0, 1));
        assert_ne!(awgn_apply(&x, 1.0, 5.0, 1), awgn_apply(&x, 1.0, 5.0, 2));
    }

    #[test]
    fn tdl_flat_unit_tap_scales() {
        let x: Vec<Complex64> = (0..32)
            .map(|i| Complex64::from_polar(1.0, i as f64))
            .collect();
        let (y, h) = tdl_apply(std::slice::from_ref(&x), &TdlProfile::flat(), 32, true, 4).unwrap();
        let g = y[0][0] / x[0];
        for (a, b) in y[0].iter().zip(&x) {
            assert!((a - b * g).norm() < 1e-12);
        }
        assert!(h[0].iter().all(|v| (v - g).norm() < 1e-12));
    }

    #[test]
    fn tdl_normalised_energy() {
        let p = TdlProfile::new(vec![0, 1, 3, 7], vec![0.0, -3.0, -6.0, -10.0]).unwrap();
        assert!((p.linear_powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = seed::rng(5);
        let n = 10_000;
        let e: f64 = (0..n)
            .map(|_| p.draw(&mut rng).iter().map(|h| h.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        assert!((e - 1.0).abs() < 0.02, "{e}");
    }

    #[test]
    fn tdl_extreme_powers_normalise() {
        for db in [4000.0, -4000.0] {
            let p = TdlProfile::new(vec![0, 1], vec![db, db - 3.0]).unwrap();
            let lin = p.linear_powers();
            assert!((lin.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{lin:?}");
        }
    }

    #[test]
    fn tdl_response_is_fft_of_taps() {
        let p = TdlProfile::new(vec![0, 2, 5], vec![0.0, -2.0, -4.0]).unwrap();
        let x = vec![Complex64::new(0.0, 0.0); 16];
        let mut impulse = x.clone();
        impulse[0] = Complex64::new(1.0, 0.0);
        let (y, h) = tdl_apply(&[impulse, x], &p, 16, false, 9).unwrap();
        let direct = frequency_response(&y[0][..6], 16);
        for (a, b) in direct.iter().zip(&h[0]) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(h[0], h[1]);
    }

    #[test]
    fn tdl_circular_after_cp() {
        let p = TdlProfile::new(vec![0, 1, 3], vec![0.0, -1.0, -3.0]).unwrap();
        let n = 16;
        let cp = 4;
        let mut rng = seed::rng(2);
        let frames: Vec<Vec<Complex64>> = (0..3)
            .map(|_| {
                let body: Vec<Complex64> =
                    (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
                let mut f = body[n - cp..].to_vec();
                f.extend(body);
                f
            })
            .collect();
        let (y, h) = tdl_apply(&frames, &p, n, true, 3).unwrap();
        for i in 0..3 {
            let mut xf = frames[i][cp..].to_vec();
            let mut yf = y[i][cp..].to_vec();
            fft::fft(&mut xf);
            fft::fft(&mut yf);
            for k in 0..n {
                assert!((yf[k] - xf[k] * h[i][k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tdl_delay_too_long() {
        let p = TdlProfile::new(vec![0, 8], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            tdl_apply(&[vec![Complex64::new(0.0, 0.0); 8]], &p, 8, true, 0),
            Err(Error::DelayTooLong { .. })
        ));
    }

    #[test]
    fn wiener_zero_linewidth() {
        let m = PnModel::Wiener {
            linewidth_hz: 0.0,
            sample_rate_hz: 1e6,
        };
        assert!(pn_generate(&m, 100, 1).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn wiener_variance_grows_linearly() {
        let m = PnModel::wiener_from_variance(1e-3, 1.0);
        let lags = [10usize, 50, 100];
        let mut acc = [0.0; 3];
        let runs = 10_000;
        for r in 0..runs {
            let t = pn_generate(&m, 100, r).unwrap();
            for (a, &l) in acc.iter_mut().zip(&lags) {
                *a += t[l - 1].powi(2);
            }
        }
        for (a, &l) in acc.iter().zip(&lags) {
            let v = a / runs as f64;
            assert!((v / (l as f64 * 1e-3) - 1.0).abs() < 0.05, "lag {l}: {v}");
        }
    }

    #[test]
    fn wiener_autocorrelation_positive_and_decaying() {
        let m = PnModel::wiener_from_variance(1e-3, 1.0);
        let mut c = [0.0; 3];
        for r in 0..2000 {
            let t = pn_generate(&m, 400, r).unwrap();
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            let d: Vec<f64> = t.iter().map(|v| v - mean).collect();
            for (i, lag) in [1usize, 50, 200].iter().enumerate() {
                c[i] += d.iter().zip(&d[*lag..]).map(|(a, b)| a * b).sum::<f64>()
                    / (d.len() - lag) as f64;
            }
        }
        assert!(c[0] > 0.0 && c[0] > c[1] && c[1] > c[2]);
    }

    #[test]
    fn shaped_psd_matches_breakpoints() {
        let bp = vec![(1e3, -60.0), (1e4, -80.0), (1e5, -100.0), (1e6, -110.0)];
        let fs = 8e6;
        let m = PnModel::ShapedPsd {
            breakpoints: bp.clone(),
            sample_rate_hz: fs,
        };
        let n = 1 << 14;
        let mut psd = vec![0.0; n];
        let runs = 200;
        for r in 0..runs {
            let t = pn_generate(&m, n, r).unwrap();
            let mut buf: Vec<Complex64> = t.iter().map(|&p| Complex64::new(p, 0.0)).collect();
            fft::fft(&mut buf);
            for (a, b) in psd.iter_mut().zip(&buf) {
                *a += b.norm_sqr() / fs;
            }
        }
        let df = fs / n as f64;
        for &(f, level) in &bp {
            let k = (f / df).round() as usize;
            let lo = k.saturating_sub(k / 8).max(1);
            let hi = k + k / 8 + 1;
            let avg = psd[lo..hi].iter().sum::<f64>() / ((hi - lo) * runs as usize) as f64;
            let est = 10.0 * avg.log10();
            assert!((est - level).abs() < 1.0, "{f} Hz: {est} vs {level}");
        }
    }

    #[test]
    fn pn_validation() {
        assert!(PnModel::ShapedPsd {
            breakpoints: vec![(2.0, 0.0), (1.0, 0.0)],
            sample_rate_hz: 1.0
        }
        .validate()
        .is_err());
        assert!(PnModel::Wiener {
            linewidth_hz: -1.0,
            sample_rate_hz: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn phase_noise_preserves_magnitude() {
        let mut x: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let before: Vec<f64> = x.iter().map(|s| s.norm()).collect();
        let pn = pn_generate(&PnModel::wiener_from_variance(0.01, 1.0), 64, 2).unwrap();
        apply_phase(&mut x, &pn);
        for (a, b) in x.iter().zip(before) {
            assert!((a.norm() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rapp_asymptotes() {
        let pa = PaModel::default();
        let small = Complex64::new(1e-5, 0.0);
        assert!((pa.amplify(small).norm() / (4.65e-5) - 1.0).abs() < 1e-3);
        let big = Complex64::new(1e4, 0.0);
        assert!((pa.amplify(big).norm() / 0.58 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rapp_keeps_constant_envelope() {
        let x: Vec<Complex64> = (0..100)
            .map(|i| Complex64::from_polar(1.0, 0.1 * i as f64))
            .collect();
        let y = pa_apply(&x, &PaModel::default(), -10.0);
        let a = y[0].norm();
        assert!(y.iter().all(|s| (s.norm() - a).abs() < 1e-12));
        let rot = y[0] / x[0];
        for (o, i) in y.iter().zip(&x) {
            assert!((o / i - rot).norm() < 1e-12);
        }
    }

    #[test]
    fn pa_sets_input_backoff() {
        let x = vec![Complex64::new(3.0, 0.0); 10];
        let pa = PaModel::linear();
        let y = pa_apply(&x, &pa, 6.0);
        let ob = output_backoff_db(&pa, &y);
        assert!((ob - 6.0).abs() < 1e-9);
    }
}
