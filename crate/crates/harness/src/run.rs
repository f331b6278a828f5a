//! Study execution. Each sweep point gets its own seed derived from the
//! master seed and the point index; within a point, frames are produced in
//! fixed batches keyed by batch index, so results do not depend on the
//! thread count or on completion order.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use tmsk_core::impairments::pa_apply;
use tmsk_core::link::{simulate_link, snr_at_ber, Modulation, PaSetting, BATCH_FRAMES};
use tmsk_core::metrics::{
    normalized_obw, obo_search, papr_ccdf, psd_estimate, PaprCcdf, PsdEstimate, PsdParams,
};
use tmsk_core::seed::{self, stream};
use tmsk_core::tx::qpsk_frame;
use tmsk_core::{Modulator, WaveformConfig};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::Result;
use crate::report::ResultRecord;

/// Generated frames of one batch plus the rotation residuals the
/// transmitter had to accept.
struct Batch {
    frames: Vec<Vec<Complex64>>,
    residuals: Vec<f64>,
}

/// Column names, rows and metadata of one study.
type Study = (Vec<String>, Vec<Vec<f64>>, BTreeMap<String, Value>);

/// `count` consecutive frames of one transmit stream, optionally through
/// the PA at a single operating point.
fn generate(
    w: &WaveformConfig,
    modulation: Modulation,
    pa: Option<&PaSetting>,
    count: usize,
    seed: u64,
    batch: u64,
) -> Result<Batch> {
    let mut rng = seed::derive_rng(seed, &[stream::BITS, batch]);
    let mut modulator = Modulator::new(w.clone())?;
    let per = match modulation {
        Modulation::Msk => w.bits_per_frame(),
        Modulation::Qpsk => 2 * w.k,
    };
    let mut frames = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for _ in 0..count {
        let bits: Vec<u8> = (0..per).map(|_| rng.random_range(0..2u8)).collect();
        let f = match modulation {
            Modulation::Msk => modulator.next_frame(&bits)?,
            Modulation::Qpsk => qpsk_frame(&bits, w)?,
        };
        residuals.push(f.frame.residual);
        frames.push(f.frame.samples);
    }
    if let Some(pa) = pa {
        let flat: Vec<Complex64> = frames.iter().flatten().copied().collect();
        let out = pa_apply(&flat, &pa.model, pa.input_backoff_db);
        frames = out
            .chunks(w.frame_len())
            .map(<[Complex64]>::to_vec)
            .collect();
    }
    Ok(Batch { frames, residuals })
}

fn batches(
    w: &WaveformConfig,
    modulation: Modulation,
    pa: Option<&PaSetting>,
    total: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    let n = total.div_ceil(BATCH_FRAMES);
    (0..n)
        .into_par_iter()
        .map(|b| {
            generate(
                w,
                modulation,
                pa,
                BATCH_FRAMES.min(total - b * BATCH_FRAMES),
                seed,
                b as u64,
            )
        })
        .collect()
}

fn continuity_metadata(
    spec: &ExperimentSpec,
    residuals: impl Iterator<Item = f64>,
) -> BTreeMap<String, Value> {
    let (mut n, mut sum, mut max) = (0usize, 0.0, 0.0f64);
    for r in residuals {
        n += 1;
        sum += r;
        max = max.max(r);
    }
    let mut m = BTreeMap::new();
    m.insert(
        "exact_numerology".into(),
        json!(spec.waveform.exact_numerology()),
    );
    m.insert(
        "rotation_residual_mean_rad".into(),
        json!(if n == 0 { 0.0 } else { sum / n as f64 }),
    );
    m.insert("rotation_residual_max_rad".into(), json!(max));
    m
}

fn welch(
    spec: &ExperimentSpec,
    params: Option<PsdParams>,
) -> Result<(PsdEstimate, BTreeMap<String, Value>)> {
    let w = &spec.waveform;
    let params = params.unwrap_or_else(|| PsdParams::for_fft_size(w.fft_size));
    let seed = seed::derive(spec.seed, &[0]);
    let parts = batches(w, spec.modulation, spec.pa.as_ref(), spec.trials, seed)?;
    // a batch shorter than one segment contributes nothing
    let ests: Vec<PsdEstimate> = parts
        .par_iter()
        .filter(|b| b.frames.iter().map(Vec::len).sum::<usize>() >= params.segment_len)
        .map(|b| psd_estimate(&b.frames.concat(), w, params))
        .collect::<std::result::Result<_, _>>()?;
    let mut it = ests.into_iter();
    let mut psd = it.next().ok_or(tmsk_core::Error::TooFewSamples {
        need: params.segment_len,
        got: spec.trials * w.frame_len(),
    })?;
    for e in it {
        psd.merge(&e)?;
    }
    let mut meta =
        continuity_metadata(spec, parts.iter().flat_map(|b| b.residuals.iter().copied()));
    meta.insert("welch".into(), serde_json::to_value(params)?);
    meta.insert("segments".into(), json!(psd.segments));
    Ok((psd, meta))
}

fn run_papr(spec: &ExperimentSpec) -> Result<Study> {
    let w = &spec.waveform;
    let seed = seed::derive(spec.seed, &[0]);
    let parts = batches(w, spec.modulation, spec.pa.as_ref(), spec.trials, seed)?;
    let ccdfs: Vec<PaprCcdf> = parts
        .par_iter()
        .map(|b| {
            let refs: Vec<&[Complex64]> = b.frames.iter().map(Vec::as_slice).collect();
            papr_ccdf(&refs, w.cp_len, spec.papr.basis)
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut it = ccdfs.into_iter();
    let mut acc = it.next().expect("at least one batch");
    for c in it {
        acc.merge(&c);
    }
    // keep only points where the CCDF actually drops
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (t, p) in acc.curve(spec.papr.step_db) {
        if rows.last().is_none_or(|r| p < r[1]) {
            rows.push(vec![t, p]);
        }
    }
    let mut meta =
        continuity_metadata(spec, parts.iter().flat_map(|b| b.residuals.iter().copied()));
    meta.insert("basis".into(), serde_json::to_value(spec.papr.basis)?);
    meta.insert("values".into(), json!(acc.len()));
    let at: BTreeMap<String, f64> = spec
        .papr
        .probabilities
        .iter()
        .map(|&p| (format!("{p:e}"), acc.value_at(p)))
        .collect();
    meta.insert("papr_db_at_probability".into(), serde_json::to_value(at)?);
    Ok((vec!["threshold_db".into(), "ccdf".into()], rows, meta))
}

fn run_psd(spec: &ExperimentSpec) -> Result<Study> {
    let (psd, meta) = welch(spec, spec.psd.params)?;
    let k = spec.waveform.k as f64;
    let rows = psd
        .freq
        .iter()
        .zip(psd.density_db())
        .map(|(&f, d)| vec![f, f * k, d.max(-400.0)])
        .collect();
    Ok((
        vec![
            "freq_alloc".into(),
            "freq_subcarrier".into(),
            "psd_db".into(),
        ],
        rows,
        meta,
    ))
}

fn run_obw(spec: &ExperimentSpec) -> Result<Study> {
    let (psd, mut meta) = welch(spec, spec.obw.params)?;
    let rows = spec
        .obw
        .ratios_db
        .iter()
        .map(|&r| {
            let o = normalized_obw(&psd, r, spec.obw.resolution);
            vec![r, o.width, f64::from(u8::from(o.lower_bound))]
        })
        .collect();
    meta.insert(
        "resolution".into(),
        serde_json::to_value(spec.obw.resolution)?,
    );
    Ok((
        vec![
            "oob_ratio_db".into(),
            "normalized_obw".into(),
            "lower_bound".into(),
        ],
        rows,
        meta,
    ))
}

/// Waveform for an allocation of `k` subcarriers; the excess band scales
/// with the allocation so its percentage is preserved.
pub fn waveform_for_allocation(w: &WaveformConfig, k: usize) -> WaveformConfig {
    let excess = if w.excess == 0 {
        0
    } else {
        (w.excess * k / w.k).max(1)
    };
    WaveformConfig {
        k,
        excess,
        ..w.clone()
    }
}

fn run_obo(spec: &ExperimentSpec) -> Result<Study> {
    let limits = spec.obo_limits();
    let points: Vec<(Vec<f64>, String)> = spec
        .obo_allocations()
        .par_iter()
        .enumerate()
        .map(|(i, &k)| -> Result<(Vec<f64>, String)> {
            let w = waveform_for_allocation(&spec.waveform, k);
            w.validate()?;
            // a single stream so the inter-frame rotation is continuous
            let b = generate(
                &w,
                spec.modulation,
                None,
                spec.trials,
                seed::derive(spec.seed, &[i as u64]),
                0,
            )?;
            let r = obo_search(&b.frames, &w, &spec.obo.pa, &limits, spec.obo.grid)?;
            let binding = r.binding.map_or("none", |b| b.name()).to_string();
            let code = r.binding.map_or(0.0, |b| b as u8 as f64 + 1.0);
            let rep = r.report;
            Ok((
                vec![
                    k as f64 / 12.0,
                    k as f64,
                    r.obo_db,
                    r.input_backoff_db,
                    rep.aclr_db,
                    rep.evm_pct,
                    rep.obw_subcarriers,
                    rep.ibe_db,
                    code,
                    f64::from(u8::from(r.limited_by_grid)),
                ],
                binding,
            ))
        })
        .collect::<Result<_>>()?;
    let mut meta = BTreeMap::new();
    meta.insert("limits".into(), serde_json::to_value(limits)?);
    meta.insert("pa".into(), serde_json::to_value(spec.obo.pa)?);
    meta.insert(
        "binding".into(),
        json!(points.iter().map(|p| p.1.clone()).collect::<Vec<_>>()),
    );
    meta.insert(
        "binding_codes".into(),
        json!({"0": "none", "1": "aclr", "2": "evm", "3": "obw", "4": "ibe"}),
    );
    let columns = [
        "prb",
        "subcarriers",
        "obo_db",
        "input_backoff_db",
        "aclr_db",
        "evm_pct",
        "obw_subcarriers",
        "ibe_db",
        "binding",
        "limited_by_grid",
    ];
    Ok((
        columns.map(String::from).to_vec(),
        points.into_iter().map(|p| p.0).collect(),
        meta,
    ))
}

fn run_link(spec: &ExperimentSpec) -> Result<Study> {
    let cfg = spec.link_config();
    let rows: Vec<Vec<f64>> = spec
        .link
        .snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| -> Result<Vec<f64>> {
            let s = simulate_link(&cfg, snr, spec.trials, seed::derive(spec.seed, &[i as u64]))?;
            let (lo, hi) = s.wilson(1.96);
            Ok(vec![snr, s.errors as f64, s.bits as f64, s.ber(), lo, hi])
        })
        .collect::<Result<_>>()?;
    let curve: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[3])).collect();
    let mut meta = BTreeMap::new();
    meta.insert(
        "exact_numerology".into(),
        json!(spec.waveform.exact_numerology()),
    );
    for target in [1e-1, 1e-2, 1e-3] {
        meta.insert(
            format!("snr_db_at_ber_{target:e}"),
            json!(snr_at_ber(&curve, target)),
        );
    }
    let columns = ["snr_db", "errors", "bits", "ber", "ber_low", "ber_high"];
    Ok((columns.map(String::from).to_vec(), rows, meta))
}

/// Runs the study described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultRecord> {
    spec.validate()?;
    let start = Instant::now();
    let (columns, rows, metadata) = match spec.kind {
        ExperimentKind::Papr => run_papr(spec)?,
        ExperimentKind::Psd => run_psd(spec)?,
        ExperimentKind::Obw => run_obw(spec)?,
        ExperimentKind::Obo => run_obo(spec)?,
        ExperimentKind::Link => run_link(spec)?,
    };
    Ok(ResultRecord {
        experiment_id: spec.id.clone(),
        kind: spec.kind,
        config_hash: spec.config_hash(),
        build: crate::build_id(),
        spec: spec.clone(),
        columns,
        rows,
        metadata,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
