//! Edit-distance codebook carrying the check parity symbol.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dna::{edit_distance_within, Dna, BASES};
use crate::error::{Error, Result};
use crate::gf::Symbol;

pub const DEFAULT_CODEBOOK_SEED: u64 = 0x6d67_632b;
const CANDIDATE_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarcodeCodebook {
    entries: Vec<Dna>,
    beta: usize,
    d_min: usize,
    seed: u64,
}

impl BarcodeCodebook {
    pub fn entries(&self) -> &[Dna] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry(&self, sym: Symbol) -> &[u8] {
        &self.entries[sym as usize]
    }

    /// Unique correction radius, floor((d_min - 1) / 2).
    pub fn radius(&self) -> usize {
        self.d_min.saturating_sub(1) / 2
    }
}

/// Greedy randomized construction: draw candidates from a seeded stream and
/// keep each one that is at edit distance >= `d_min` from all kept entries.
pub fn build_barcode_codebook(l_in: u32, beta: usize, d_min: usize, seed: u64) -> Result<BarcodeCodebook> {
    build_with_budget(l_in, beta, d_min, seed, CANDIDATE_BUDGET)
}

fn build_with_budget(l_in: u32, beta: usize, d_min: usize, seed: u64, budget: usize) -> Result<BarcodeCodebook> {
    if beta == 0 || d_min == 0 {
        return Err(Error::Codebook("beta and d_min must be positive".into()));
    }
    if l_in > 12 {
        return Err(Error::Codebook(format!(
            "2^{l_in} codewords is beyond the greedy construction"
        )));
    }
    let want = 1usize << l_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<Dna> = Vec::with_capacity(want);
    let mut tried = 0usize;
    while entries.len() < want {
        if tried == budget {
            return Err(Error::Codebook(format!(
                "found {} of {want} codewords (beta={beta}, d_min={d_min}) after {tried} candidates",
                entries.len()
            )));
        }
        tried += 1;
        let cand: Dna = (0..beta).map(|_| BASES[rng.random_range(0..4)]).collect();
        let ok = entries
            .iter()
            .all(|e| edit_distance_within(&cand, e, d_min - 1).is_none());
        if ok {
            entries.push(cand);
        }
    }
    Ok(BarcodeCodebook {
        entries,
        beta,
        d_min,
        seed,
    })
}

/// Shared, lazily built codebooks keyed by their construction inputs.
pub fn cached_codebook(l_in: u32, beta: usize, d_min: usize, seed: u64) -> Result<Arc<BarcodeCodebook>> {
    type Cache = Mutex<HashMap<(u32, usize, usize, u64), Arc<BarcodeCodebook>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (l_in, beta, d_min, seed);
    if let Some(cb) = cache.lock().unwrap().get(&key) {
        return Ok(cb.clone());
    }
    let cb = Arc::new(build_barcode_codebook(l_in, beta, d_min, seed)?);
    cache.lock().unwrap().insert(key, cb.clone());
    Ok(cb)
}

/// Minimum-distance decoding. `None` is an erasure: a tie, or a best
/// distance beyond the unique radius.
pub fn decode_barcode(tail: &[u8], codebook: &BarcodeCodebook) -> Option<Symbol> {
    let r = codebook.radius();
    let mut best: Option<(usize, usize)> = None;
    let mut tie = false;
    for (i, e) in codebook.entries.iter().enumerate() {
        let Some(d) = edit_distance_within(tail, e, r) else {
            continue;
        };
        match best {
            Some((bd, _)) if d > bd => {}
            Some((bd, _)) if d == bd => tie = true,
            _ => {
                best = Some((d, i));
                tie = false;
            }
        }
    }
    match best {
        Some((_, i)) if !tie => Some(i as Symbol),
        _ => None,
    }
}

/// Best distance and the number of entries attaining it, without a radius.
pub fn nearest_entries(tail: &[u8], codebook: &BarcodeCodebook) -> (usize, Vec<Symbol>) {
    let mut best = usize::MAX;
    let mut who = Vec::new();
    for (i, e) in codebook.entries.iter().enumerate() {
        let d = crate::dna::edit_distance(tail, e);
        if d < best {
            best = d;
            who.clear();
        }
        if d == best {
            who.push(i as Symbol);
        }
    }
    (best, who)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna::edit_distance;

    #[test]
    fn single_entry() {
        let cb = build_barcode_codebook(0, 12, 5, 1).unwrap();
        assert_eq!(cb.len(), 1);
        assert_eq!(cb.entry(0).len(), 12);
    }

    #[test]
    fn deterministic_small() {
        let a = build_barcode_codebook(4, 8, 3, 11).unwrap();
        let b = build_barcode_codebook(4, 8, 3, 11).unwrap();
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                assert!(edit_distance(&a.entries()[i], &a.entries()[j]) >= 3);
            }
        }
    }

    #[test]
    fn infeasible_reports() {
        assert!(build_with_budget(4, 2, 3, 0, 10_000).is_err());
    }
}
