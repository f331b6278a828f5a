//! Bit-to-transition mapping for the three-level constrained-phase modulation.
//!
//! Three bits select an ordered pair of phase transitions drawn from
//! `{0, +pi/2, -pi/2}`. Phases are tracked as quarter turns (`0..4`) so that
//! all symbol values are exact members of `{1, j, -1, -j}`.
//!
//! With cyclic-prefix continuity the last pair of a block carries a single
//! bit and is chosen from a terminal table so the block ends on its start
//! phase.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-circle symbol for each quarter-turn phase.
pub const QUARTER_SYMBOLS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Phase step between consecutive symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    Zero,
    PlusHalfPi,
    MinusHalfPi,
}

impl Transition {
    pub const ALL: [Transition; 3] = [
        Transition::Zero,
        Transition::PlusHalfPi,
        Transition::MinusHalfPi,
    ];

    /// Signed step in quarter turns.
    pub fn quarters(self) -> i8 {
        match self {
            Transition::Zero => 0,
            Transition::PlusHalfPi => 1,
            Transition::MinusHalfPi => -1,
        }
    }

    pub fn radians(self) -> f64 {
        f64::from(self.quarters()) * FRAC_PI_2
    }

    /// Inverse of [`Transition::quarters`], modulo a full turn.
    pub fn from_quarters(q: i8) -> Option<Self> {
        match q.rem_euclid(4) {
            0 => Some(Transition::Zero),
            1 => Some(Transition::PlusHalfPi),
            3 => Some(Transition::MinusHalfPi),
            _ => None,
        }
    }

    fn glyph(self) -> char {
        match self {
            Transition::Zero => '0',
            Transition::PlusHalfPi => '+',
            Transition::MinusHalfPi => '-',
        }
    }

    fn from_glyph(s: &str) -> Option<Self> {
        match s {
            "0" => Some(Transition::Zero),
            "+" | "+1" => Some(Transition::PlusHalfPi),
            "-" | "-1" => Some(Transition::MinusHalfPi),
            _ => None,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.glyph())
    }
}

pub type Pair = (Transition, Transition);

fn pair_quarters(p: Pair) -> i8 {
    p.0.quarters() + p.1.quarters()
}

/// Which of the nine possible transition pairs a table leaves out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    /// The `(0, 0)` pair is excluded.
    Symmetric,
    /// Some other pair is excluded.
    NonSymmetric,
}

/// Three-bit to transition-pair table plus the optional terminal table used
/// for cyclic-prefix continuity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MappingTable {
    entries: [Pair; 8],
    terminal: Option<[[Pair; 2]; 4]>,
}

use Transition::{MinusHalfPi as M, PlusHalfPi as P, Zero as Z};

impl MappingTable {
    /// Symmetric table found by exhaustive search over four-symbol sequences.
    pub fn symmetric() -> Self {
        Self::from_entries([
            (M, P),
            (P, M),
            (M, Z),
            (Z, M),
            (Z, P),
            (P, Z),
            (M, M),
            (P, P),
        ])
        .expect("built-in table is valid")
    }

    /// Symmetric table with the `(+pi/2, -pi/2)` pair replaced by `(0, 0)`.
    pub fn non_symmetric() -> Self {
        Self::from_entries([
            (M, P),
            (Z, Z),
            (M, Z),
            (Z, M),
            (Z, P),
            (P, Z),
            (M, M),
            (P, P),
        ])
        .expect("built-in table is valid")
    }

    pub fn for_kind(kind: MappingKind) -> Self {
        match kind {
            MappingKind::Symmetric => Self::symmetric(),
            MappingKind::NonSymmetric => Self::non_symmetric(),
        }
    }

    /// Builds a table and derives its terminal rows: for each prior phase the
    /// two entries that return the phase to zero, in table order (first row
    /// encodes last bit 0). Tables without exactly two such entries per prior
    /// phase get no terminal table.
    pub fn from_entries(entries: [Pair; 8]) -> Result<Self> {
        let terminal = derive_terminal(&entries);
        Self::new(entries, terminal)
    }

    pub fn new(entries: [Pair; 8], terminal: Option<[[Pair; 2]; 4]>) -> Result<Self> {
        for i in 0..8 {
            for j in (i + 1)..8 {
                if entries[i] == entries[j] {
                    return Err(Error::InvalidTable(format!(
                        "rows {i:03b} and {j:03b} share pair ({}, {})",
                        entries[i].0, entries[i].1
                    )));
                }
            }
        }
        if let Some(term) = &terminal {
            for (prior, rows) in term.iter().enumerate() {
                if rows[0] == rows[1] {
                    return Err(Error::InvalidTable(format!(
                        "terminal rows for prior {prior} coincide"
                    )));
                }
                for p in rows {
                    if (prior as i8 + pair_quarters(*p)).rem_euclid(4) != 0 {
                        return Err(Error::InvalidTable(format!(
                            "terminal pair ({}, {}) does not return prior {prior} to zero",
                            p.0, p.1
                        )));
                    }
                }
            }
        }
        Ok(Self { entries, terminal })
    }

    pub fn kind(&self) -> MappingKind {
        if self.entries.contains(&(Z, Z)) {
            MappingKind::NonSymmetric
        } else {
            MappingKind::Symmetric
        }
    }

    pub fn entries(&self) -> &[Pair; 8] {
        &self.entries
    }

    pub fn terminal(&self) -> Option<&[[Pair; 2]; 4]> {
        self.terminal.as_ref()
    }

    /// Pair for a three-bit value `b2 b1 b0` (b2 is the MSB).
    pub fn pair(&self, value: u8) -> Pair {
        self.entries[usize::from(value & 7)]
    }

    pub fn lookup(&self, pair: Pair) -> Option<u8> {
        self.entries
            .iter()
            .position(|&p| p == pair)
            .map(|i| i as u8)
    }

    /// Terminal pair for a prior phase (quarter turns relative to the block
    /// start) and last bit.
    pub fn terminal_pair(&self, prior: u8, bit: u8) -> Option<Pair> {
        self.terminal
            .map(|t| t[usize::from(prior & 3)][usize::from(bit & 1)])
    }

    /// Finds `(prior, bit)` for a terminal pair.
    pub fn lookup_terminal(&self, pair: Pair) -> Option<(u8, u8)> {
        let t = self.terminal.as_ref()?;
        for (prior, rows) in t.iter().enumerate() {
            for (bit, &p) in rows.iter().enumerate() {
                if p == pair {
                    return Some((prior as u8, bit as u8));
                }
            }
        }
        None
    }

    /// Number of bits carried by a block of `k_b` symbols.
    pub fn bits_per_block(k_b: usize, cp_continuous: bool) -> usize {
        let full = 3 * k_b / 2;
        if cp_continuous {
            full.saturating_sub(2)
        } else {
            full
        }
    }

    /// Parses the line-oriented table format.
    ///
    /// ```text
    /// # b2b1b0 first second
    /// 000 - +
    /// 001 + -
    /// ...
    /// # optional: terminal <prior quarter turns 0..3> <last bit> first second
    /// terminal 1 0 - 0
    /// ```
    ///
    /// All eight main rows are required. Terminal rows are either all present
    /// (eight of them) or all absent, in which case they are derived.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: [Option<Pair>; 8] = [None; 8];
        let mut terminal: [[Option<Pair>; 2]; 4] = [[None; 2]; 4];
        let mut n_terminal = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens[0] == "terminal" {
                if tokens.len() != 5 {
                    return Err(err(
                        "terminal row needs: terminal <prior> <bit> <first> <second>",
                    ));
                }
                let prior: usize = tokens[1].parse().map_err(|_| err("bad prior phase"))?;
                let bit: usize = tokens[2].parse().map_err(|_| err("bad bit"))?;
                if prior > 3 || bit > 1 {
                    return Err(err("prior must be 0..3 and bit 0..1"));
                }
                let pair = parse_pair(tokens[3], tokens[4]).ok_or_else(|| err("bad transition"))?;
                if terminal[prior][bit].replace(pair).is_some() {
                    return Err(err("duplicate terminal row"));
                }
                n_terminal += 1;
            } else {
                if tokens.len() != 3 {
                    return Err(err("row needs: <b2b1b0> <first> <second>"));
                }
                let bits = tokens[0];
                if bits.len() != 3 || !bits.bytes().all(|b| b == b'0' || b == b'1') {
                    return Err(err("bit label must be three binary digits"));
                }
                let value = usize::from_str_radix(bits, 2).map_err(|_| err("bad bit label"))?;
                let pair = parse_pair(tokens[1], tokens[2]).ok_or_else(|| err("bad transition"))?;
                if entries[value].replace(pair).is_some() {
                    return Err(err("duplicate row"));
                }
            }
        }
        let mut main = [(Z, Z); 8];
        for (slot, e) in main.iter_mut().zip(entries) {
            *slot = e.ok_or_else(|| Error::InvalidTable("missing main row".into()))?;
        }
        let term = match n_terminal {
            0 => derive_terminal(&main),
            8 => {
                let mut t = [[(Z, Z); 2]; 4];
                for (p, rows) in terminal.iter().enumerate() {
                    for (b, r) in rows.iter().enumerate() {
                        t[p][b] = r.expect("all eight terminal rows counted");
                    }
                }
                Some(t)
            }
            _ => {
                return Err(Error::InvalidTable(
                    "terminal table must have 0 or 8 rows".into(),
                ))
            }
        };
        Self::new(main, term)
    }

    /// Serialises in the format accepted by [`MappingTable::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::from("# b2b1b0 first second\n");
        for (v, p) in self.entries.iter().enumerate() {
            s.push_str(&format!("{v:03b} {} {}\n", p.0, p.1));
        }
        if let Some(t) = &self.terminal {
            s.push_str("# terminal <prior quarter turns> <last bit> first second\n");
            for (prior, rows) in t.iter().enumerate() {
                for (bit, p) in rows.iter().enumerate() {
                    s.push_str(&format!("terminal {prior} {bit} {} {}\n", p.0, p.1));
                }
            }
        }
        s
    }
}

fn parse_pair(a: &str, b: &str) -> Option<Pair> {
    Some((Transition::from_glyph(a)?, Transition::from_glyph(b)?))
}

fn derive_terminal(entries: &[Pair; 8]) -> Option<[[Pair; 2]; 4]> {
    let mut t = [[(Z, Z); 2]; 4];
    for (prior, rows) in t.iter_mut().enumerate() {
        let mut found = entries
            .iter()
            .filter(|p| (prior as i8 + pair_quarters(**p)).rem_euclid(4) == 0);
        rows[0] = *found.next()?;
        rows[1] = *found.next()?;
        if found.next().is_some() {
            return None;
        }
    }
    Some(t)
}

/// One block of constrained-phase symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct MskBlock {
    /// Cumulative phases in `[0, 2pi)`.
    pub phases: Vec<f64>,
    /// Same phases as quarter turns.
    pub quarters: Vec<u8>,
    /// `exp(j * phase)`, exact.
    pub symbols: Vec<Complex64>,
    /// Transition into each symbol; the first one leaves the start phase.
    pub transitions: Vec<Transition>,
    pub bits: Vec<u8>,
    pub cp_continuous: bool,
    /// Phase before the first symbol, in quarter turns.
    pub start_quarter: u8,
}

impl MskBlock {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Cyclic phase steps: entry `k` is the step from symbol `k-1` into
    /// symbol `k`, with entry 0 taken from the last symbol. Wrapped to
    /// `(-2, 2]` quarter turns, so a half-turn jump reads as `+2`.
    pub fn cyclic_steps(&self) -> Vec<i8> {
        let n = self.quarters.len();
        (0..n)
            .map(|k| {
                let prev = self.quarters[(k + n - 1) % n] as i8;
                let d = (self.quarters[k] as i8 - prev).rem_euclid(4);
                if d > 2 {
                    d - 4
                } else {
                    d
                }
            })
            .collect()
    }
}

/// Maps `bits` onto a block of `k_b` symbols starting after phase
/// `start_quarter` (quarter turns; 0 is the usual receiver assumption).
///
/// With `cp_continuous`, `3 k_b / 2 - 2` bits are consumed: the leading pairs
/// use the main table and the final pair carries one bit chosen from the
/// terminal table so that the last symbol lands back on the start phase. The
/// internal `k_b + 1` sequence therefore begins and ends on the same phase;
/// its leading reference symbol is the one not transmitted.
pub fn map_bits(
    bits: &[u8],
    k_b: usize,
    table: &MappingTable,
    cp_continuous: bool,
    start_quarter: u8,
) -> Result<MskBlock> {
    if !k_b.is_multiple_of(2) {
        return Err(Error::OddBlockLength(k_b));
    }
    if cp_continuous && k_b < 4 {
        return Err(Error::BlockTooShort(k_b));
    }
    let expected = MappingTable::bits_per_block(k_b, cp_continuous);
    if bits.len() != expected {
        return Err(Error::BitCount {
            expected,
            got: bits.len(),
        });
    }
    let start = start_quarter & 3;
    let mut transitions = Vec::with_capacity(k_b);
    let full_pairs = if cp_continuous { k_b / 2 - 1 } else { k_b / 2 };
    for chunk in bits[..3 * full_pairs].chunks_exact(3) {
        let value = ((chunk[0] & 1) << 2) | ((chunk[1] & 1) << 1) | (chunk[2] & 1);
        let (a, b) = table.pair(value);
        transitions.push(a);
        transitions.push(b);
    }
    if cp_continuous {
        let rel: i32 = transitions.iter().map(|t| i32::from(t.quarters())).sum();
        let prior = rel.rem_euclid(4) as u8;
        let last_bit = bits[bits.len() - 1] & 1;
        let (a, b) = table
            .terminal_pair(prior, last_bit)
            .ok_or_else(|| Error::InvalidTable("table has no terminal rows".into()))?;
        transitions.push(a);
        transitions.push(b);
    }
    let quarters = accumulate_quarters(&transitions, start);
    Ok(MskBlock {
        phases: quarters.iter().map(|&q| f64::from(q) * FRAC_PI_2).collect(),
        symbols: quarters
            .iter()
            .map(|&q| QUARTER_SYMBOLS[usize::from(q)])
            .collect(),
        quarters,
        transitions,
        bits: bits.iter().map(|b| b & 1).collect(),
        cp_continuous,
        start_quarter: start,
    })
}

pub(crate) fn accumulate_quarters(transitions: &[Transition], start: u8) -> Vec<u8> {
    let mut q = i16::from(start);
    transitions
        .iter()
        .map(|t| {
            q = (q + i16::from(t.quarters())).rem_euclid(4);
            q as u8
        })
        .collect()
}

/// Running phase `phi_k = (phi_{k-1} + t_k) mod 2pi` with `phi_{-1} = start`.
pub fn accumulate_phases(transitions: &[Transition], start_phase: f64) -> Vec<f64> {
    let mut steps = 0i64;
    transitions
        .iter()
        .map(|t| {
            steps += i64::from(t.quarters());
            (start_phase + steps as f64 * FRAC_PI_2).rem_euclid(TAU)
        })
        .collect()
}

/// Inverse of [`map_bits`]. With `cp_continuous` the final pair is decoded
/// through the terminal table and must agree with the phase accumulated by
/// the preceding pairs.
pub fn demap_transitions(
    transitions: &[Transition],
    table: &MappingTable,
    cp_continuous: bool,
) -> Result<Vec<u8>> {
    if !transitions.len().is_multiple_of(2) {
        return Err(Error::OddBlockLength(transitions.len()));
    }
    let n_pairs = transitions.len() / 2;
    let full_pairs = if cp_continuous {
        n_pairs.saturating_sub(1)
    } else {
        n_pairs
    };
    let mut bits = Vec::with_capacity(3 * n_pairs);
    let mut rel = 0i32;
    for pair in transitions.chunks_exact(2).take(full_pairs) {
        let value = table
            .lookup((pair[0], pair[1]))
            .ok_or(Error::UnknownPair(pair[0].quarters(), pair[1].quarters()))?;
        bits.extend_from_slice(&[(value >> 2) & 1, (value >> 1) & 1, value & 1]);
        rel += i32::from(pair[0].quarters() + pair[1].quarters());
    }
    if cp_continuous && n_pairs > 0 {
        let last = (transitions[2 * n_pairs - 2], transitions[2 * n_pairs - 1]);
        let prior = rel.rem_euclid(4) as u8;
        let (p, bit) = table
            .lookup_terminal(last)
            .ok_or(Error::UnknownPair(last.0.quarters(), last.1.quarters()))?;
        if p != prior {
            return Err(Error::TerminalMismatch(prior));
        }
        bits.push(bit);
    }
    Ok(bits)
}

/// Distance profile of a mapping over all four-symbol (six-bit) sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingMetric {
    /// Smallest Euclidean distance between two distinct sequences.
    pub min_distance: f64,
    /// Number of sequence pairs at that distance.
    pub pairs_at_min: usize,
    /// Sum of bit-label Hamming distances over those pairs.
    pub hamming_at_min_total: usize,
    /// Smallest bit-label Hamming distance among those pairs.
    pub hamming_at_min_min: usize,
}

impl MappingMetric {
    /// Larger minimum distance wins; ties go to fewer bit errors per
    /// minimum-distance event.
    pub fn at_least_as_good_as(&self, other: &MappingMetric) -> bool {
        const EPS: f64 = 1e-9;
        if self.min_distance > other.min_distance + EPS {
            return true;
        }
        if self.min_distance < other.min_distance - EPS {
            return false;
        }
        self.hamming_at_min_total <= other.hamming_at_min_total
    }
}

/// Brute-force evaluation over all pairs of distinct six-bit inputs.
pub fn evaluate_mapping(table: &MappingTable) -> MappingMetric {
    evaluate_mapping_from(table, 0)
}

/// As [`evaluate_mapping`] but with the sequences rotated to start after
/// `start_quarter`.
pub fn evaluate_mapping_from(table: &MappingTable, start_quarter: u8) -> MappingMetric {
    let seqs: Vec<[Complex64; 4]> = (0u8..64)
        .map(|v| {
            let (a, b) = table.pair(v >> 3);
            let (c, d) = table.pair(v & 7);
            let q = accumulate_quarters(&[a, b, c, d], start_quarter);
            [0, 1, 2, 3].map(|i| QUARTER_SYMBOLS[usize::from(q[i])])
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut count = 0;
    let mut ham_total = 0;
    let mut ham_min = usize::MAX;
    for i in 0..64 {
        for j in (i + 1)..64 {
            let d2: f64 = seqs[i]
                .iter()
                .zip(&seqs[j])
                .map(|(x, y)| (x - y).norm_sqr())
                .sum();
            let ham = (i ^ j).count_ones() as usize;
            if d2 < best - 1e-9 {
                best = d2;
                count = 1;
                ham_total = ham;
                ham_min = ham;
            } else if (d2 - best).abs() <= 1e-9 {
                count += 1;
                ham_total += ham;
                ham_min = ham_min.min(ham);
            }
        }
    }
    MappingMetric {
        min_distance: best.sqrt(),
        pairs_at_min: count,
        hamming_at_min_total: ham_total,
        hamming_at_min_min: ham_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn table_rows() {
        let t = MappingTable::symmetric();
        let b = map_bits(&[0, 0, 0, 0, 0, 0], 4, &t, false, 0).unwrap();
        assert_eq!(&b.transitions[..2], &[M, P]);
        let b = map_bits(&[1, 1, 1, 1, 1, 1], 4, &t, false, 0).unwrap();
        assert_eq!(&b.transitions[..2], &[P, P]);
    }

    #[test]
    fn all_zero_bits_phases() {
        let t = MappingTable::symmetric();
        let b = map_bits(&[0; 6], 4, &t, false, 0).unwrap();
        assert!(close(
            &b.phases,
            &[3.0 * PI / 2.0, 0.0, 3.0 * PI / 2.0, 0.0]
        ));
    }

    #[test]
    fn terminal_from_half_turn() {
        let t = MappingTable::symmetric();
        // 110 -> (-,-) takes the phase to pi; last bit 0 selects (-,-) again.
        let b = map_bits(&[1, 1, 0, 0], 4, &t, true, 0).unwrap();
        assert_eq!(b.transitions, vec![M, M, M, M]);
        assert_eq!(b.quarters, vec![3, 2, 1, 0]);
        assert_eq!(*b.quarters.last().unwrap(), b.start_quarter);
    }

    #[test]
    fn terminal_rows_match_second_table() {
        let t = MappingTable::symmetric();
        let term = t.terminal().unwrap();
        assert_eq!(term[0], [(M, P), (P, M)]);
        assert_eq!(term[1], [(M, Z), (Z, M)]);
        assert_eq!(term[3], [(Z, P), (P, Z)]);
        assert_eq!(term[2], [(M, M), (P, P)]);
    }

    #[test]
    fn bad_lengths() {
        let t = MappingTable::symmetric();
        assert_eq!(
            map_bits(&[0; 5], 4, &t, false, 0),
            Err(Error::BitCount {
                expected: 6,
                got: 5
            })
        );
        assert_eq!(
            map_bits(&[0; 3], 3, &t, false, 0),
            Err(Error::OddBlockLength(3))
        );
        assert_eq!(
            map_bits(&[0; 1], 2, &t, true, 0),
            Err(Error::BlockTooShort(2))
        );
    }

    #[test]
    fn accumulate() {
        assert!(close(&accumulate_phases(&[P, P], 0.0), &[PI / 2.0, PI]));
        assert!(accumulate_phases(&[], 1.0).is_empty());
        assert!(close(
            &accumulate_phases(&[P, M, Z], PI),
            &[3.0 * PI / 2.0, PI, PI]
        ));
    }

    #[test]
    fn demap_examples() {
        let t = MappingTable::symmetric();
        assert_eq!(
            demap_transitions(&[M, P], &t, false).unwrap(),
            vec![0, 0, 0]
        );
        assert_eq!(
            demap_transitions(&[Z, Z], &t, false),
            Err(Error::UnknownPair(0, 0))
        );
        // terminal pair that does not close the block
        assert_eq!(
            demap_transitions(&[P, P, M, P], &t, true),
            Err(Error::TerminalMismatch(2))
        );
    }

    #[test]
    fn round_trip_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for table in [MappingTable::symmetric(), MappingTable::non_symmetric()] {
            for cp in [false, true] {
                for _ in 0..10_000 {
                    let k = 2 * rng.random_range(2..40);
                    let n = MappingTable::bits_per_block(k, cp);
                    let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                    let start = rng.random_range(0..4);
                    let b = map_bits(&bits, k, &table, cp, start).unwrap();
                    assert_eq!(demap_transitions(&b.transitions, &table, cp).unwrap(), bits);
                }
            }
        }
    }

    #[test]
    fn non_symmetric_terminal() {
        let t = MappingTable::non_symmetric();
        assert_eq!(t.kind(), MappingKind::NonSymmetric);
        assert_eq!(t.terminal().unwrap()[0], [(M, P), (Z, Z)]);
        // dropping a pair outside the zero-sum group leaves no terminal table
        let t = MappingTable::from_entries([
            (M, P),
            (P, M),
            (M, Z),
            (Z, M),
            (Z, Z),
            (P, Z),
            (M, M),
            (P, P),
        ])
        .unwrap();
        assert!(t.terminal().is_none());
        assert!(map_bits(&[0; 4], 4, &t, true, 0).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        for t in [MappingTable::symmetric(), MappingTable::non_symmetric()] {
            assert_eq!(MappingTable::parse(&t.to_text()).unwrap(), t);
        }
        let derived = MappingTable::parse(
            "000 - +\n001 + -\n010 - 0\n011 0 -\n100 0 +\n101 + 0\n110 - -\n111 + +\n",
        )
        .unwrap();
        assert_eq!(derived, MappingTable::symmetric());
        assert!(matches!(
            MappingTable::parse("000 - +\n000 + -\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(MappingTable::parse("000 - x").is_err());
        assert!(MappingTable::parse("").is_err());
        let dup = "000 - +\n001 - +\n010 - 0\n011 0 -\n100 0 +\n101 + 0\n110 - -\n111 + +\n";
        assert!(matches!(
            MappingTable::parse(dup),
            Err(Error::InvalidTable(_))
        ));
    }

    fn brute_min_distance(table: &MappingTable) -> f64 {
        // phases summed directly in radians, independent of the quarter bookkeeping
        let seq = |v: u8| {
            let (a, b) = table.pair(v >> 3);
            let (c, d) = table.pair(v & 7);
            let ph = accumulate_phases(&[a, b, c, d], 0.0);
            ph.iter()
                .map(|p| Complex64::from_polar(1.0, *p))
                .collect::<Vec<_>>()
        };
        let all: Vec<_> = (0..64).map(seq).collect();
        let mut best = f64::INFINITY;
        for i in 0..64 {
            for j in i + 1..64 {
                let d: f64 = all[i]
                    .iter()
                    .zip(&all[j])
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum();
                best = best.min(d.sqrt());
            }
        }
        best
    }

    #[test]
    fn evaluate_table_one() {
        let t = MappingTable::symmetric();
        let m = evaluate_mapping(&t);
        assert!(m.min_distance.is_finite() && m.min_distance > 0.0);
        assert!((m.min_distance - brute_min_distance(&t)).abs() < 1e-12);
        assert!(m.hamming_at_min_min >= 1);
        assert_eq!(evaluate_mapping(&t), m);
    }

    #[test]
    fn evaluate_rotation_invariant() {
        for t in [MappingTable::symmetric(), MappingTable::non_symmetric()] {
            let m0 = evaluate_mapping(&t);
            for s in 1..4 {
                let m = evaluate_mapping_from(&t, s);
                assert!((m.min_distance - m0.min_distance).abs() < 1e-12);
                assert_eq!(m.pairs_at_min, m0.pairs_at_min);
                assert_eq!(m.hamming_at_min_total, m0.hamming_at_min_total);
            }
        }
    }

    #[test]
    fn table_one_beats_scrambled_labels() {
        let good = MappingTable::symmetric();
        let mut e = *good.entries();
        // put the most distant transition pairs on adjacent labels
        e.swap(1, 7);
        e.swap(2, 4);
        let bad = MappingTable::from_entries(e).unwrap();
        let (mg, mb) = (evaluate_mapping(&good), evaluate_mapping(&bad));
        assert!(mg.at_least_as_good_as(&mb));
        assert!(!mb.at_least_as_good_as(&mg), "{mg:?} {mb:?}");
    }
}
