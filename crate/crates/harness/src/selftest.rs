//! Quick structural checks of the signal chain, run by `tmsk selftest`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmsk_core::link::{simulate_link, LinkConfig};
use tmsk_core::mapping::{demap_transitions, map_bits, Transition};
use tmsk_core::metrics::{normalized_obw, psd_estimate, ObwResolution, PsdParams};
use tmsk_core::rx::DetectorConfig;
use tmsk_core::tx::{
    concat_frames, dft_spread_and_map, interpolate_phases, modulate_frame_stream, ofdm_modulate,
    pre_dft_samples,
};
use tmsk_core::{MappingKind, MappingTable, WaveformConfig};

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_blocks(
    seed: u64,
    n: usize,
) -> impl Iterator<Item = (Vec<u8>, usize, bool, MappingTable, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |i| {
        let k = 2 * rng.random_range(2..40);
        let cp = i % 2 == 0;
        let table = if i % 3 == 0 {
            MappingTable::non_symmetric()
        } else {
            MappingTable::symmetric()
        };
        let bits = (0..MappingTable::bits_per_block(k, cp))
            .map(|_| rng.random_range(0..2))
            .collect();
        (bits, k, cp, table, rng.random_range(0..4))
    })
}

fn unit_envelope() -> Result<(), String> {
    for (bits, k, cp, table, start) in random_blocks(1, 400) {
        let b = map_bits(&bits, k, &table, cp, start).map_err(|e| e.to_string())?;
        for cfg in [
            WaveformConfig::basic(k, 4 * k, 0),
            WaveformConfig::basic(k, 4 * k, 0).with_oversampling(2, 0, 0.05),
        ] {
            for s in pre_dft_samples(&b, &cfg) {
                ensure((s.norm() - 1.0).abs() < 1e-12, || {
                    format!("|x| = {}", s.norm())
                })?;
            }
        }
    }
    Ok(())
}

fn transitions_and_exclusion() -> Result<(), String> {
    for (bits, k, cp, table, start) in random_blocks(2, 400) {
        let b = map_bits(&bits, k, &table, cp, start).map_err(|e| e.to_string())?;
        let mut prev = start;
        for &q in &b.quarters {
            let step = (i16::from(q) - i16::from(prev)).rem_euclid(4);
            ensure(step != 2, || format!("half-turn step in block of {k}"))?;
            prev = q;
        }
        if table.kind() == MappingKind::Symmetric {
            ensure(
                b.transitions
                    .chunks(2)
                    .all(|p| p != [Transition::Zero, Transition::Zero]),
                || "symmetric mapping emitted (0, 0)".into(),
            )?;
        }
        ensure(
            demap_transitions(&b.transitions, &table, cp).as_deref() == Ok(&bits[..]),
            || "map/demap mismatch".into(),
        )?;
        if cp {
            ensure(*b.quarters.last().unwrap() == start, || {
                "block does not close on its start phase".into()
            })?;
        }
    }
    Ok(())
}

fn noiseless_identity() -> Result<(), String> {
    for l2 in [false, true] {
        for cp in [false, true] {
            for sym in [false, true] {
                for kind in [MappingKind::Symmetric, MappingKind::NonSymmetric] {
                    let mut w = WaveformConfig::basic(12, 64, 16)
                        .with_continuity(cp, sym)
                        .with_mapping(kind);
                    if l2 {
                        w = w.with_oversampling(2, 4, 0.05);
                    }
                    let s = simulate_link(
                        &LinkConfig::awgn(w, DetectorConfig::default()),
                        f64::INFINITY,
                        64,
                        3,
                    )
                    .map_err(|e| e.to_string())?;
                    ensure(s.errors == 0, || {
                        format!("L2={l2} cp={cp} sym={sym} {kind:?}: {} errors", s.errors)
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn interpolation_even_samples() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(2..64);
        let steps: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-1..=1i8)) * FRAC_PI_2)
            .collect();
        let phases: Vec<f64> = steps
            .iter()
            .scan(0.0, |a, s| {
                *a += s;
                Some(*a)
            })
            .collect();
        let out = interpolate_phases(&phases, &steps, rng.random_range(0.0..0.25));
        ensure((0..n).all(|k| out[2 * k] == phases[k]), || {
            "even output differs from input".into()
        })?;
    }
    Ok(())
}

fn isi_free_impulse() -> Result<(), String> {
    let cfg = WaveformConfig::basic(16, 256, 0).with_oversampling(2, 0, 0.0);
    let up = cfg.fft_size / cfg.dft_size();
    for p in 0..32 {
        let mut x = vec![Complex64::new(0.0, 0.0); 32];
        x[p] = Complex64::new(1.0, 0.0);
        let g = dft_spread_and_map(&x, &cfg).map_err(|e| e.to_string())?;
        let f = ofdm_modulate(&g, 0).map_err(|e| e.to_string())?;
        let peak = f.samples[p * up].norm();
        for q in (0..32).filter(|q| q % 2 == p % 2 && *q != p) {
            ensure(f.samples[q * up].norm() < 1e-12 * peak, || {
                format!("leak from {p} into {q}")
            })?;
        }
    }
    Ok(())
}

fn obw_monotone() -> Result<(), String> {
    let cfg = WaveformConfig::basic(24, 256, 18)
        .with_continuity(true, true)
        .with_oversampling(2, 12, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bits: Vec<u8> = (0..cfg.bits_per_frame() * 64)
        .map(|_| rng.random_range(0..2))
        .collect();
    let frames = modulate_frame_stream(&bits, &cfg).map_err(|e| e.to_string())?;
    let psd = psd_estimate(&concat_frames(&frames), &cfg, PsdParams::for_fft_size(256))
        .map_err(|e| e.to_string())?;
    for res in [ObwResolution::Continuous, ObwResolution::Subcarrier] {
        let w: Vec<f64> = [-10.0, -20.0, -30.0, -40.0]
            .iter()
            .map(|&r| normalized_obw(&psd, r, res).width)
            .collect();
        ensure(w.windows(2).all(|p| p[1] >= p[0]), || {
            format!("{res:?} widths {w:?}")
        })?;
    }
    Ok(())
}

fn determinism() -> Result<(), String> {
    let w = WaveformConfig::basic(12, 64, 16).with_continuity(true, true);
    let cfg = LinkConfig::awgn(w, DetectorConfig::default());
    let a = simulate_link(&cfg, 3.0, 100, 9).map_err(|e| e.to_string())?;
    let b = simulate_link(&cfg, 3.0, 100, 9).map_err(|e| e.to_string())?;
    ensure(a == b && a.errors > 0, || format!("{a:?} vs {b:?}"))
}

type CheckFn = fn() -> Result<(), String>;

/// Runs every check.
pub fn run() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 7] = [
        ("pre-DFT unit envelope", unit_envelope),
        (
            "transition set, (0,0) exclusion, endpoints, map/demap",
            transitions_and_exclusion,
        ),
        (
            "noiseless identity over 16 flag combinations",
            noiseless_identity,
        ),
        (
            "interpolation keeps even samples",
            interpolation_even_samples,
        ),
        ("ISI-free symbol-instant impulse response", isi_free_impulse),
        ("OBW monotone in ratio", obw_monotone),
        ("determinism under fixed seed", determinism),
    ];
    checks
        .into_iter()
        .map(|(name, f)| Check { name, outcome: f() })
        .collect()
}
