//! Fragmentation, outer RS encoding across fragments, and its decoding.
//!
//! Fragments are striped column-wise: outer symbol `s` of every fragment
//! forms stream `s`, and each stream is an independent RS codeword over
//! GF(2^l_out) whose coordinate `j` belongs to the sequence with index `j`.

use std::collections::{BTreeMap, HashMap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{Field, Symbol};
use crate::rs::{PuncturedDecoder, RsCode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSet {
    /// `k / 8` bytes each.
    pub fragments: Vec<Vec<u8>>,
    pub k: usize,
    pub pad_bits: usize,
    pub file_bits: usize,
}

impl FragmentSet {
    pub fn count(&self) -> usize {
        self.fragments.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexedFragment {
    pub index: u32,
    pub payload: Vec<u8>,
}

impl IndexedFragment {
    /// Index bytes (big-endian, `l_out / 8` of them) followed by the payload.
    pub fn to_bytes(&self, l_out: u32) -> Vec<u8> {
        let nb = l_out as usize / 8;
        let mut out = Vec::with_capacity(nb + self.payload.len());
        for i in (0..nb).rev() {
            out.push((self.index >> (8 * i)) as u8);
        }
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8], l_out: u32) -> IndexedFragment {
        let nb = l_out as usize / 8;
        let index = bytes[..nb].iter().fold(0u32, |a, &b| a << 8 | b as u32);
        IndexedFragment {
            index,
            payload: bytes[nb..].to_vec(),
        }
    }
}

/// Splits `data` into `k`-bit fragments, padding the last one with bytes
/// from a ChaCha20 stream seeded by `pad_seed`.
pub fn fragment_file(data: &[u8], k: usize, pad_seed: u64) -> Result<FragmentSet> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 || k % 8 != 0 {
        return Err(Error::Params(format!("fragment length {k} is not a positive multiple of 8")));
    }
    let kb = k / 8;
    let count = data.len().div_ceil(kb);
    let pad = count * kb - data.len();
    let mut rng = ChaCha20Rng::seed_from_u64(pad_seed);
    let mut padding = vec![0u8; pad];
    rng.fill_bytes(&mut padding);
    let mut fragments: Vec<Vec<u8>> = data.chunks(kb).map(|c| c.to_vec()).collect();
    if let Some(last) = fragments.last_mut() {
        last.extend_from_slice(&padding);
    }
    Ok(FragmentSet {
        fragments,
        k,
        pad_bits: pad * 8,
        file_bits: data.len() * 8,
    })
}

pub fn defragment(fs: &FragmentSet) -> Result<Vec<u8>> {
    if fs.pad_bits >= fs.k.max(1) || fs.count() * fs.k != fs.file_bits + fs.pad_bits {
        return Err(Error::Params(format!(
            "inconsistent fragment metadata: {} x {} bits, {} padding, {} file bits",
            fs.count(),
            fs.k,
            fs.pad_bits,
            fs.file_bits
        )));
    }
    let mut out: Vec<u8> = fs.fragments.concat();
    out.truncate(fs.file_bits / 8);
    Ok(out)
}

fn payload_symbols(payload: &[u8], l_out: u32) -> Vec<Symbol> {
    match l_out {
        8 => payload.iter().map(|&b| b as Symbol).collect(),
        _ => payload
            .chunks(2)
            .map(|c| (c[0] as Symbol) << 8 | c[1] as Symbol)
            .collect(),
    }
}

fn push_symbol_bytes(out: &mut Vec<u8>, s: Symbol, l_out: u32) {
    if l_out == 8 {
        out.push(s as u8);
    } else {
        out.push((s >> 8) as u8);
        out.push(s as u8);
    }
}

/// Produces outer codeword fragments on demand, so that filtering can draw
/// candidates up to the field size without materializing all of them.
#[derive(Debug, Clone)]
pub struct OuterEncoder {
    code: RsCode,
    l_out: u32,
    // streams[s][j] = symbol s of data fragment j
    streams: Vec<Vec<Symbol>>,
}

impl OuterEncoder {
    /// `max_len` bounds the indices that can be requested.
    pub fn new(fs: &FragmentSet, l_out: u32, max_len: usize) -> Result<OuterEncoder> {
        let field = Field::for_bits(l_out)?;
        if fs.k % l_out as usize != 0 {
            return Err(Error::Params(format!(
                "k = {} is not a multiple of l_out = {l_out}",
                fs.k
            )));
        }
        if max_len > field.size() {
            return Err(Error::Params(format!(
                "N = {max_len} exceeds 2^{l_out}"
            )));
        }
        let code = RsCode::new(field, fs.count(), max_len.max(fs.count()))?;
        let ns = fs.k / l_out as usize;
        let mut streams = vec![Vec::with_capacity(fs.count()); ns];
        for frag in &fs.fragments {
            for (s, sym) in payload_symbols(frag, l_out).into_iter().enumerate() {
                streams[s].push(sym);
            }
        }
        Ok(OuterEncoder { code, l_out, streams })
    }

    pub fn max_len(&self) -> usize {
        self.code.codeword_len()
    }

    pub fn fragment(&self, index: usize) -> IndexedFragment {
        let mut payload = Vec::with_capacity(self.streams.len() * self.l_out as usize / 8);
        for st in &self.streams {
            push_symbol_bytes(&mut payload, self.code.symbol_at(st, index), self.l_out);
        }
        IndexedFragment {
            index: index as u32,
            payload,
        }
    }

    /// Fragments `0..n` in order.
    pub fn fragments(&self, n: usize) -> Result<Vec<IndexedFragment>> {
        let cws = self.code.encode_many_range(&self.streams, n)?;
        Ok((0..n)
            .map(|j| {
                let mut payload = Vec::with_capacity(cws.len() * self.l_out as usize / 8);
                for cw in &cws {
                    push_symbol_bytes(&mut payload, cw[j], self.l_out);
                }
                IndexedFragment {
                    index: j as u32,
                    payload,
                }
            })
            .collect())
    }
}

/// Systematic outer encoding to `K + c_out` indexed fragments.
pub fn outer_encode(fs: &FragmentSet, c_out: usize, l_out: u32) -> Result<Vec<IndexedFragment>> {
    let n = fs.count() + c_out;
    OuterEncoder::new(fs, l_out, n)?.fragments(n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateSet {
    /// Indices `0..N`.
    Full(usize),
    /// Sorted retained indices of a filtered encoding.
    Retained(Vec<u32>),
}

impl CoordinateSet {
    pub fn len(&self) -> usize {
        match self {
            CoordinateSet::Full(n) => *n,
            CoordinateSet::Retained(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: u32) -> bool {
        match self {
            CoordinateSet::Full(n) => (idx as usize) < *n,
            CoordinateSet::Retained(v) => v.binary_search(&idx).is_ok(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateStats {
    pub inputs: usize,
    pub unique_indices: usize,
    pub conflicting_indices: usize,
    pub out_of_range: usize,
}

/// Majority payload per index, ties to the lexicographically smallest
/// payload. Indices outside `coords` are discarded and counted.
pub fn resolve_duplicates(frags: &[IndexedFragment], coords: &CoordinateSet) -> (BTreeMap<u32, Vec<u8>>, DuplicateStats) {
    let mut stats = DuplicateStats {
        inputs: frags.len(),
        ..Default::default()
    };
    let mut votes: BTreeMap<u32, HashMap<&[u8], usize>> = BTreeMap::new();
    for f in frags {
        if !coords.contains(f.index) {
            stats.out_of_range += 1;
            continue;
        }
        *votes.entry(f.index).or_default().entry(&f.payload).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for (idx, v) in votes {
        if v.len() > 1 {
            stats.conflicting_indices += 1;
        }
        let best = v
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(p, _)| p.to_vec())
            .expect("non-empty vote");
        out.insert(idx, best);
    }
    stats.unique_indices = out.len();
    (out, stats)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterDiagnostics {
    pub coordinates: usize,
    pub received: usize,
    /// Coordinates with no payload.
    pub erasures: usize,
    /// Received payloads that disagree with the decoded codeword.
    pub residual_errors: Option<usize>,
    pub failed_streams: Vec<usize>,
}

/// Decodes the data fragments from resolved payloads. `k` is the fragment
/// length in bits, `count` the number of data fragments `K`.
pub fn outer_decode(
    received: &BTreeMap<u32, Vec<u8>>,
    count: usize,
    k: usize,
    l_out: u32,
    coords: &CoordinateSet,
) -> (Result<Vec<Vec<u8>>>, OuterDiagnostics) {
    let mut diag = OuterDiagnostics {
        coordinates: coords.len(),
        ..Default::default()
    };
    let res = outer_decode_inner(received, count, k, l_out, coords, &mut diag);
    (res, diag)
}

fn outer_decode_inner(
    received: &BTreeMap<u32, Vec<u8>>,
    count: usize,
    k: usize,
    l_out: u32,
    coords: &CoordinateSet,
    diag: &mut OuterDiagnostics,
) -> Result<Vec<Vec<u8>>> {
    let field = Field::for_bits(l_out)?;
    let ns = k / l_out as usize;
    let kb = k / 8;
    let present: Vec<(u32, Vec<Symbol>)> = received
        .iter()
        .filter(|(i, p)| coords.contains(**i) && p.len() == kb)
        .map(|(&i, p)| (i, payload_symbols(p, l_out)))
        .collect();
    diag.received = present.len();
    diag.erasures = coords.len() - present.len();
    if present.len() < count {
        return Err(Error::Decode(format!(
            "{} fragments received, {count} needed",
            present.len()
        )));
    }
    let streams: Vec<Result<Vec<Symbol>>> = match coords {
        CoordinateSet::Full(n) => {
            let code = RsCode::new(field, count, *n)?;
            (0..ns)
                .into_par_iter()
                .map(|s| {
                    let mut rx: Vec<Option<Symbol>> = vec![None; *n];
                    for (i, syms) in &present {
                        rx[*i as usize] = Some(syms[s]);
                    }
                    code.decode_full(&rx)
                })
                .collect()
        }
        CoordinateSet::Retained(_) => {
            let max_idx = present.iter().map(|p| p.0).max().unwrap_or(0) as usize;
            let pts_all = crate::rs::evaluation_points(field, (max_idx + 1).max(count));
            let pts: Vec<Symbol> = present.iter().map(|(i, _)| pts_all[*i as usize]).collect();
            let dec = PuncturedDecoder::new(field, &pts, count)?;
            let msg_pts: Vec<Symbol> = crate::rs::evaluation_points(field, count);
            (0..ns)
                .into_par_iter()
                .map(|s| {
                    let vals: Vec<Symbol> = present.iter().map(|(_, v)| v[s]).collect();
                    let f = dec.decode_poly(&vals)?;
                    Ok(msg_pts.iter().map(|&x| crate::rs::poly_eval(field, &f, x)).collect())
                })
                .collect()
        }
    };
    let mut msgs = Vec::with_capacity(ns);
    for (s, r) in streams.into_iter().enumerate() {
        match r {
            Ok(m) => msgs.push(m),
            Err(_) => diag.failed_streams.push(s),
        }
    }
    if !diag.failed_streams.is_empty() {
        return Err(Error::Decode(format!(
            "{} of {ns} outer streams failed",
            diag.failed_streams.len()
        )));
    }
    // Residual errors: received payloads that differ from the decoded codeword.
    let top = present.iter().map(|p| p.0 as usize + 1).max().unwrap_or(count).max(count);
    let code = RsCode::new(field, count, top)?;
    let wrong = present
        .par_iter()
        .filter(|(i, syms)| code.symbols_at(&msgs, *i as usize) != *syms)
        .count();
    diag.residual_errors = Some(wrong);
    let mut frags = vec![Vec::with_capacity(kb); count];
    for m in &msgs {
        for (j, frag) in frags.iter_mut().enumerate() {
            push_symbol_bytes(frag, m[j], l_out);
        }
    }
    Ok(frags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bytes(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn fragment_counts() {
        let fs = fragment_file(&[7u8; 14], 112, 1).unwrap();
        assert_eq!((fs.count(), fs.pad_bits), (1, 0));
        let fs = fragment_file(&vec![0u8; 15360], 112, 1).unwrap();
        assert_eq!((fs.count(), fs.pad_bits), (1098, 96));
        let fs = fragment_file(&[1u8; 15], 112, 1).unwrap();
        assert_eq!((fs.count(), fs.pad_bits), (2, 104));
        assert!(fragment_file(&[], 112, 1).is_err());
    }

    #[test]
    fn defragment_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for n in [1usize, 13, 14, 15, 1000] {
            let data = random_bytes(&mut rng, n);
            let fs = fragment_file(&data, 112, 9).unwrap();
            assert_eq!(defragment(&fs).unwrap(), data);
        }
        let mut bad = fragment_file(&[1, 2, 3], 16, 0).unwrap();
        bad.pad_bits = 16;
        assert!(defragment(&bad).is_err());
    }

    #[test]
    fn systematic_and_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fs = fragment_file(&random_bytes(&mut rng, 300), 112, 0).unwrap();
        let out = outer_encode(&fs, 10, 16).unwrap();
        assert_eq!(out.len(), fs.count() + 10);
        for (j, f) in out.iter().enumerate() {
            assert_eq!(f.index as usize, j);
            if j < fs.count() {
                assert_eq!(f.payload, fs.fragments[j]);
            }
        }
        let enc = OuterEncoder::new(&fs, 16, 1000).unwrap();
        assert_eq!(enc.fragment(fs.count() + 3), out[fs.count() + 3]);
        let no_red = outer_encode(&fs, 0, 16).unwrap();
        assert_eq!(no_red.len(), fs.count());
    }

    #[test]
    fn exhaustive_small_dropouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (count, c_out) in [(1usize, 3usize), (2, 2), (3, 5), (4, 6)] {
            let data = random_bytes(&mut rng, count * 2);
            let fs = fragment_file(&data, 16, 0).unwrap();
            assert_eq!(fs.count(), count);
            let out = outer_encode(&fs, c_out, 16).unwrap();
            let n = out.len();
            for mask in 0u32..(1 << n) {
                let kept: Vec<_> = out.iter().filter(|f| mask >> f.index & 1 == 1).cloned().collect();
                if kept.len() < count {
                    continue;
                }
                let (map, _) = resolve_duplicates(&kept, &CoordinateSet::Full(n));
                let (res, diag) = outer_decode(&map, count, 16, 16, &CoordinateSet::Full(n));
                assert_eq!(res.unwrap(), fs.fragments, "mask {mask:b}");
                assert_eq!(diag.residual_errors, Some(0));
                // same subset through the punctured path
                let coords = CoordinateSet::Retained((0..n as u32).collect());
                let (res, _) = outer_decode(&map, count, 16, 16, &coords);
                assert_eq!(res.unwrap(), fs.fragments);
            }
        }
    }

    #[test]
    fn errors_counted() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let fs = fragment_file(&random_bytes(&mut rng, 140), 112, 0).unwrap();
        let out = outer_encode(&fs, 8, 16).unwrap();
        let mut rx = out.clone();
        rx[2].payload[0] ^= 1;
        rx[15].payload[5] ^= 0x80;
        rx.remove(7);
        let n = out.len();
        let (map, _) = resolve_duplicates(&rx, &CoordinateSet::Full(n));
        let (res, diag) = outer_decode(&map, fs.count(), 112, 16, &CoordinateSet::Full(n));
        assert_eq!(res.unwrap(), fs.fragments);
        assert_eq!(diag.erasures, 1);
        assert_eq!(diag.residual_errors, Some(2));
    }

    #[test]
    fn duplicate_policy_is_order_independent() {
        let a = IndexedFragment { index: 3, payload: vec![9, 9] };
        let b = IndexedFragment { index: 3, payload: vec![1, 2] };
        let c = IndexedFragment { index: 99, payload: vec![0, 0] };
        let coords = CoordinateSet::Full(10);
        let (m1, s1) = resolve_duplicates(&[a.clone(), b.clone(), a.clone(), c.clone()], &coords);
        let (m2, _) = resolve_duplicates(&[b.clone(), a.clone(), c.clone(), a.clone()], &coords);
        assert_eq!(m1, m2);
        assert_eq!(m1[&3], vec![9, 9]);
        assert_eq!(s1.out_of_range, 1);
        let (m3, _) = resolve_duplicates(&[a, b], &coords);
        assert_eq!(m3[&3], vec![1, 2]);
    }
}
