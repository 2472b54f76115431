//! Per-sequence inner code.
//!
//! Layout of one reference sequence (markers on, `D` data symbols, `s` bases
//! per symbol, blocks of two symbols):
//!
//! ```text
//! [sym0 sym1 AC][sym2 sym3 AC] ... [sym(D-2) sym(D-1) AC][barcode(check)]
//! ```
//!
//! Without markers the blocks are simply concatenated. The `D` data symbols
//! are the information symbols followed by `c_in` guess parities; the check
//! parity is the next RS coordinate and only appears through its barcode.
//! With `c_in = 0` there is no RS layer, no barcode and no markers.

pub mod barcode;
pub mod trellis;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dna::{push_symbol, symbol_from, Dna};
use crate::error::{Error, Result};
use crate::gf::{Field, Symbol};
use crate::rs::RsCode;

pub use barcode::{build_barcode_codebook, decode_barcode, BarcodeCodebook};
pub use trellis::{ChannelEstimate, DriftEstimate, Trellis};

pub const DEFAULT_NEIGHBOR_BUDGET: usize = 64;
pub const DEFAULT_GUESS_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerParams {
    /// Bits per inner symbol.
    pub l_in: u32,
    /// Bits of the indexed fragment, k + l_out.
    pub info_bits: usize,
    pub c_in: usize,
    pub beta: usize,
    pub d_min: usize,
    pub markers: bool,
    pub codebook_seed: u64,
}

impl InnerParams {
    pub fn info_symbols(&self) -> usize {
        self.info_bits / self.l_in as usize
    }

    pub fn data_symbols(&self) -> usize {
        self.info_symbols() + self.c_in
    }

    pub fn bases_per_symbol(&self) -> usize {
        self.l_in as usize / 2
    }

    pub fn markers_active(&self) -> bool {
        self.markers && self.c_in > 0
    }

    pub fn marker_count(&self) -> usize {
        if self.markers_active() {
            self.data_symbols() / 2
        } else {
            0
        }
    }

    pub fn barcode_len(&self) -> usize {
        if self.c_in > 0 {
            self.beta
        } else {
            0
        }
    }

    /// Bases before the barcode.
    pub fn body_len(&self) -> usize {
        self.data_symbols() * self.bases_per_symbol() + 2 * self.marker_count()
    }

    pub fn sequence_len(&self) -> usize {
        self.body_len() + self.barcode_len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_in != 8 && self.l_in != 16 {
            return Err(Error::Params(format!("l_in = {} (must be 8 or 16)", self.l_in)));
        }
        if self.info_bits == 0 || self.info_bits % self.l_in as usize != 0 {
            return Err(Error::Params(format!(
                "indexed fragment of {} bits is not a multiple of l_in = {}",
                self.info_bits, self.l_in
            )));
        }
        if self.c_in > 0 && self.data_symbols() + 1 > 1usize << self.l_in {
            return Err(Error::Params(format!(
                "{} inner symbols exceed GF(2^{})",
                self.data_symbols() + 1,
                self.l_in
            )));
        }
        if self.markers_active() && self.data_symbols() % 2 != 0 {
            return Err(Error::Params(format!(
                "marker mode needs an even symbol count, got {}",
                self.data_symbols()
            )));
        }
        if self.c_in > 0 && (self.beta == 0 || self.d_min == 0) {
            return Err(Error::Params("barcode length and distance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerStats {
    /// Candidate offset patterns tried after the first estimate.
    pub search_iterations: usize,
    pub check_erased: bool,
    pub erasures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InnerOutcome {
    Decoded { fragment: Vec<u8>, stats: InnerStats },
    Dropout { stats: InnerStats },
}

impl InnerOutcome {
    pub fn fragment(&self) -> Option<&[u8]> {
        match self {
            InnerOutcome::Decoded { fragment, .. } => Some(fragment),
            InnerOutcome::Dropout { .. } => None,
        }
    }

    pub fn stats(&self) -> InnerStats {
        match self {
            InnerOutcome::Decoded { stats, .. } | InnerOutcome::Dropout { stats } => *stats,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerCodec {
    params: InnerParams,
    // RS(D + 1, K_in); the last coordinate is the check parity.
    full: Option<RsCode>,
    // RS(D, K_in), same evaluation points without the check.
    data: Option<RsCode>,
    codebook: Option<Arc<BarcodeCodebook>>,
    trellis: Option<Trellis>,
    pub neighbor_budget: usize,
    pub guess_budget: usize,
}

impl InnerCodec {
    pub fn new(params: InnerParams, channel: &ChannelEstimate) -> Result<InnerCodec> {
        params.validate()?;
        let field = Field::for_bits(params.l_in)?;
        let (full, data, codebook) = if params.c_in > 0 {
            let k = params.info_symbols();
            let d = params.data_symbols();
            (
                Some(RsCode::new(field, k, d + 1)?),
                Some(RsCode::new(field, k, d)?),
                Some(barcode::cached_codebook(
                    params.l_in,
                    params.beta,
                    params.d_min,
                    params.codebook_seed,
                )?),
            )
        } else {
            (None, None, None)
        };
        let trellis = params
            .markers_active()
            .then(|| Trellis::new(params.l_in as usize, params.marker_count(), channel));
        Ok(InnerCodec {
            params,
            full,
            data,
            codebook,
            trellis,
            neighbor_budget: DEFAULT_NEIGHBOR_BUDGET,
            guess_budget: DEFAULT_GUESS_BUDGET,
        })
    }

    pub fn params(&self) -> &InnerParams {
        &self.params
    }

    pub fn codebook(&self) -> Option<&BarcodeCodebook> {
        self.codebook.as_deref()
    }

    pub fn trellis(&self) -> Option<&Trellis> {
        self.trellis.as_ref()
    }

    fn bytes_to_symbols(&self, bytes: &[u8]) -> Vec<Symbol> {
        match self.params.l_in {
            8 => bytes.iter().map(|&b| b as Symbol).collect(),
            _ => bytes
                .chunks(2)
                .map(|c| (c[0] as Symbol) << 8 | c[1] as Symbol)
                .collect(),
        }
    }

    fn symbols_to_bytes(&self, syms: &[Symbol]) -> Vec<u8> {
        match self.params.l_in {
            8 => syms.iter().map(|&s| s as u8).collect(),
            _ => syms.iter().flat_map(|&s| [(s >> 8) as u8, s as u8]).collect(),
        }
    }

    pub fn encode(&self, fragment: &[u8]) -> Result<Dna> {
        let p = &self.params;
        if fragment.len() * 8 != p.info_bits {
            return Err(Error::Length {
                expected: p.info_bits / 8,
                got: fragment.len(),
            });
        }
        let info = self.bytes_to_symbols(fragment);
        let mut out = Dna::with_capacity(p.sequence_len());
        let Some(full) = &self.full else {
            for &s in &info {
                push_symbol(&mut out, s, p.l_in);
            }
            return Ok(out);
        };
        let cw = full.encode(&info)?;
        let d = p.data_symbols();
        for (i, &s) in cw[..d].iter().enumerate() {
            push_symbol(&mut out, s, p.l_in);
            if p.markers_active() && i % 2 == 1 {
                out.extend_from_slice(&trellis::MARKER);
            }
        }
        let cb = self.codebook.as_ref().expect("codebook present with c_in > 0");
        out.extend_from_slice(cb.entry(cw[d]));
        Ok(out)
    }

    /// Decodes one read (fill already removed).
    pub fn decode(&self, read: &[u8]) -> InnerOutcome {
        let p = &self.params;
        if self.full.is_none() {
            let stats = InnerStats::default();
            if read.len() != p.sequence_len() {
                return InnerOutcome::Dropout { stats };
            }
            let s = p.bases_per_symbol();
            let syms: Option<Vec<Symbol>> = read.chunks(s).map(symbol_from).collect();
            return match syms {
                Some(syms) => InnerOutcome::Decoded {
                    fragment: self.symbols_to_bytes(&syms),
                    stats,
                },
                None => InnerOutcome::Dropout { stats },
            };
        }
        if p.markers_active() {
            self.decode_marked(read)
        } else {
            self.decode_markerless(read)
        }
    }

    fn check_symbol(&self, tail: &[u8]) -> Option<Symbol> {
        decode_barcode(tail, self.codebook.as_ref()?)
    }

    /// Erasure-decodes the data symbols and validates against the check.
    /// `strict` demands leftover redundancy when the check is unavailable.
    fn try_candidate(&self, syms: &[Option<Symbol>], check: Option<Symbol>, strict: bool) -> Option<Vec<Symbol>> {
        let data = self.data.as_ref()?;
        let full = self.full.as_ref()?;
        let erasures = syms.iter().filter(|s| s.is_none()).count();
        if erasures > self.params.c_in {
            return None;
        }
        let msg = data.decode_full(syms).ok()?;
        match check {
            Some(c) => (full.symbol_at(&msg, self.params.data_symbols()) == c).then_some(msg),
            None => {
                if !strict {
                    return Some(msg);
                }
                let cw = data.encode(&msg).ok()?;
                let errs = syms
                    .iter()
                    .zip(&cw)
                    .filter(|(r, c)| matches!(r, Some(v) if v != *c))
                    .count();
                (erasures + 2 * errs < self.params.c_in).then_some(msg)
            }
        }
    }

    fn finish(&self, msg: &[Symbol], stats: InnerStats) -> InnerOutcome {
        InnerOutcome::Decoded {
            fragment: self.symbols_to_bytes(msg),
            stats,
        }
    }

    /// Data symbols under a drift trajectory; blocks with nonzero increments
    /// (or out of range) are erased.
    fn parse_marked(&self, read: &[u8], z: &[i32]) -> Vec<Option<Symbol>> {
        let p = &self.params;
        let s = p.bases_per_symbol();
        let lp = p.l_in as i64 + 2;
        let mut out = Vec::with_capacity(p.data_symbols());
        for i in 1..z.len() {
            let start = (i as i64 - 1) * lp + z[i - 1] as i64;
            let keep = z[i] == z[i - 1] && start >= 0 && start + 2 * s as i64 <= read.len() as i64;
            for h in 0..2 {
                if keep {
                    let a = start as usize + h * s;
                    out.push(symbol_from(&read[a..a + s]));
                } else {
                    out.push(None);
                }
            }
        }
        out
    }

    fn barcode_tail<'a>(&self, read: &'a [u8], z_end: i32) -> &'a [u8] {
        let start = (self.params.body_len() as i64 + z_end as i64).clamp(0, read.len() as i64);
        &read[start as usize..]
    }

    fn decode_marked(&self, read: &[u8]) -> InnerOutcome {
        let trellis = self.trellis.as_ref().expect("trellis built in marker mode");
        let p = &self.params;
        let mut stats = InnerStats::default();
        let dev = read.len() as i32 - p.sequence_len() as i32;
        let phi = trellis::default_phi(dev);
        let est = match trellis.estimate(read, phi, dev) {
            Ok(e) => e,
            Err(_) => return InnerOutcome::Dropout { stats },
        };
        let z_end = *est.z.last().unwrap();
        let check = self.check_symbol(self.barcode_tail(read, z_end));
        stats.check_erased = check.is_none();
        let syms = self.parse_marked(read, &est.z);
        stats.erasures = syms.iter().filter(|s| s.is_none()).count();
        if let Some(msg) = self.try_candidate(&syms, check, false) {
            return self.finish(&msg, stats);
        }
        // Neighborhood: move one unit of drift between two blocks.
        let v = est.blocks();
        let d = est.increments();
        let mut cands: Vec<(f64, usize, Vec<i32>)> = Vec::new();
        for a in 0..v {
            for b in 0..v {
                if a == b {
                    continue;
                }
                let mut dd = d.clone();
                dd[a] += 1;
                dd[b] -= 1;
                let mut z = vec![0i32; v + 1];
                let mut ok = true;
                for i in 0..v {
                    z[i + 1] = z[i] + dd[i];
                    ok &= z[i + 1].abs() <= phi;
                }
                if !ok {
                    continue;
                }
                let m = trellis.path_log_metric(read, &z);
                if m.is_finite() {
                    cands.push((m, cands.len(), z));
                }
            }
        }
        cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for (_, _, z) in cands.into_iter().take(self.neighbor_budget) {
            stats.search_iterations += 1;
            let syms = self.parse_marked(read, &z);
            if let Some(msg) = self.try_candidate(&syms, check, true) {
                stats.erasures = syms.iter().filter(|s| s.is_none()).count();
                return self.finish(&msg, stats);
            }
        }
        InnerOutcome::Dropout { stats }
    }

    /// Symbols under per-slot increments `inc` (slot D is the barcode).
    fn parse_markerless(&self, read: &[u8], inc: &[i32]) -> Vec<Option<Symbol>> {
        let p = &self.params;
        let s = p.bases_per_symbol() as i64;
        let mut z = 0i64;
        let mut out = Vec::with_capacity(p.data_symbols());
        for (j, &dj) in inc[..p.data_symbols()].iter().enumerate() {
            let start = j as i64 * s + z;
            if dj == 0 && start >= 0 && start + s <= read.len() as i64 {
                out.push(symbol_from(&read[start as usize..(start + s) as usize]));
            } else {
                out.push(None);
            }
            z += dj as i64;
        }
        out
    }

    fn decode_markerless(&self, read: &[u8]) -> InnerOutcome {
        let p = &self.params;
        let mut stats = InnerStats::default();
        let beta = p.barcode_len();
        let tail = &read[read.len().saturating_sub(beta)..];
        let check = self.check_symbol(tail);
        stats.check_erased = check.is_none();
        let delta = read.len() as i64 - p.sequence_len() as i64;
        let slots = p.data_symbols() + 1;
        let mut found: Option<(Vec<Symbol>, usize)> = None;
        let mut tried = 0usize;
        let budget = self.guess_budget;
        let mut visit = |inc: &[i32]| -> bool {
            if tried >= budget {
                return true;
            }
            tried += 1;
            let syms = self.parse_markerless(read, inc);
            let strict = tried > 1;
            if let Some(msg) = self.try_candidate(&syms, check, strict) {
                let e = syms.iter().filter(|s| s.is_none()).count();
                found = Some((msg, e));
                return true;
            }
            false
        };
        let max_card = (delta.unsigned_abs() as usize + 2 * p.c_in).max(1);
        let mut c = delta.unsigned_abs() as usize;
        while c <= max_card {
            if enumerate_increments(slots, p.c_in, delta, c, &mut visit) {
                break;
            }
            c += 2;
        }
        stats.search_iterations = tried.saturating_sub(1);
        match found {
            Some((msg, e)) => {
                stats.erasures = e;
                self.finish(&msg, stats)
            }
            None => InnerOutcome::Dropout { stats },
        }
    }
}

/// Calls `f` on every increment vector over `slots` positions with sum
/// `delta` and absolute sum `card`, using at most `max_data` nonzero entries
/// among the first `slots - 1` positions. Stops early when `f` returns true,
/// in which case this returns true.
pub fn enumerate_increments(
    slots: usize,
    max_data: usize,
    delta: i64,
    card: usize,
    f: &mut dyn FnMut(&[i32]) -> bool,
) -> bool {
    let card = card as i64;
    if (card + delta) % 2 != 0 || card < delta.abs() {
        return false;
    }
    let pos = ((card + delta) / 2) as i32;
    let neg = ((card - delta) / 2) as i32;
    let mut inc = vec![0i32; slots];
    rec(0, slots, max_data, pos, neg, &mut inc, f)
}

fn rec(
    j: usize,
    slots: usize,
    data_left: usize,
    pos: i32,
    neg: i32,
    inc: &mut Vec<i32>,
    f: &mut dyn FnMut(&[i32]) -> bool,
) -> bool {
    if pos == 0 && neg == 0 {
        return f(inc);
    }
    if j == slots {
        return false;
    }
    let last = j == slots - 1;
    if last {
        // The free slot takes whatever remains, but only one sign.
        if pos > 0 && neg > 0 {
            return false;
        }
        inc[j] = pos - neg;
        let stop = f(inc);
        inc[j] = 0;
        return stop;
    }
    // Leave this slot untouched first so low-index perturbations come last.
    if rec(j + 1, slots, data_left, pos, neg, inc, f) {
        return true;
    }
    if data_left == 0 {
        return false;
    }
    for a in 1..=pos {
        inc[j] = a;
        if rec(j + 1, slots, data_left - 1, pos - a, neg, inc, f) {
            inc[j] = 0;
            return true;
        }
    }
    for b in 1..=neg {
        inc[j] = -b;
        if rec(j + 1, slots, data_left - 1, pos, neg - b, inc, f) {
            inc[j] = 0;
            return true;
        }
    }
    inc[j] = 0;
    false
}
