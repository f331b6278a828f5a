//! File formats: IQ streams, soft outputs, detector diagnostics and the
//! small structured-text profiles used by the impairment models.

use std::io::Write;

use num_complex::Complex64;
use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::impairments::{PnModel, TdlProfile};
use crate::rx::ViterbiOutput;

/// Interleaved I/Q as little-endian `f64`, 16 bytes per sample.
pub fn write_iq_binary<W: Write>(mut w: W, samples: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * samples.len());
    for s in samples {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_iq_binary(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::LengthMismatch {
            expected: bytes.len() / 16 * 16 + 16,
            got: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// `index,i,q` with a header row. Values use the shortest round-tripping
/// decimal form.
pub fn write_iq_csv<W: Write>(mut w: W, samples: &[Complex64]) -> Result<()> {
    writeln!(w, "index,i,q")?;
    for (n, s) in samples.iter().enumerate() {
        writeln!(w, "{n},{:?},{:?}", s.re, s.im)?;
    }
    Ok(())
}

/// Reads what [`write_iq_csv`] writes. The header is optional; indices must
/// count up from 0.
pub fn parse_iq_csv(text: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() || (i == 0 && line.starts_with("index")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [idx, re, im] = fields[..] else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        };
        let idx: usize = idx.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad index {idx:?}"),
        })?;
        if idx != out.len() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("index {idx} out of sequence"),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad number {s:?}"),
            })
        };
        out.push(Complex64::new(num(re)?, num(im)?));
    }
    Ok(out)
}

/// `bit,llr` rows; positive LLR favours a one.
pub fn write_llr_csv<W: Write>(mut w: W, llrs: &[f64]) -> Result<()> {
    writeln!(w, "bit,llr")?;
    for (n, l) in llrs.iter().enumerate() {
        writeln!(w, "{n},{l:?}")?;
    }
    Ok(())
}

/// Per-stage phase-error estimates of every state's survivor, one row per
/// section boundary. Columns `stage,s0..s3`.
pub fn write_delta_trace<W: Write>(mut w: W, out: &ViterbiOutput) -> Result<()> {
    writeln!(w, "stage,s0,s1,s2,s3")?;
    for (n, d) in out.stage_deltas.iter().enumerate() {
        writeln!(w, "{n},{:?},{:?},{:?},{:?}", d[0], d[1], d[2], d[3])?;
    }
    Ok(())
}

fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| {
            text[..s.start.min(text.len())].matches('\n').count() + 1
        });
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })
}

/// Reads a delay profile:
///
/// ```toml
/// delays = [0, 3, 7]
/// powers_db = [0.0, -3.0, -9.0]
/// ```
///
/// Powers are renormalised to unit sum.
pub fn parse_tdl_profile(text: &str) -> Result<TdlProfile> {
    let raw: TdlProfile = parse_toml(text)?;
    TdlProfile::new(raw.delays, raw.powers_db)
}

/// Reads a phase-noise model, for example
///
/// ```toml
/// kind = "shaped_psd"
/// sample_rate_hz = 30.72e6
/// breakpoints = [[1e3, -80.0], [1e5, -100.0], [1e7, -130.0]]
/// ```
pub fn parse_pn_model(text: &str) -> Result<PnModel> {
    let m: PnModel = parse_toml(text)?;
    m.validate()?;
    Ok(m)
}
