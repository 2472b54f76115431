//! End-to-end encoder and decoder.

use std::collections::{BTreeMap, HashMap};
use web_time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dna::{contains_motif, gc_fraction, max_homopolymer, Dna, BASES};
use crate::error::{Error, Result};
use crate::inner::barcode::DEFAULT_CODEBOOK_SEED;
use crate::inner::{ChannelEstimate, InnerCodec, InnerParams};
use crate::outer::{
    defragment, fragment_file, outer_decode, resolve_duplicates, CoordinateSet, DuplicateStats,
    FragmentSet, IndexedFragment, OuterDiagnostics, OuterEncoder,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecParams {
    /// Payload bits per fragment.
    pub k: usize,
    pub l_in: u32,
    pub l_out: u32,
    pub c_in: usize,
    pub c_out: usize,
    pub d_min: usize,
    pub beta: usize,
    pub markers: bool,
    /// Design length; also the exact output length when `fill` is set.
    #[serde(default)]
    pub l_target: Option<usize>,
    /// Pad every sequence with random bases up to `l_target`.
    #[serde(default)]
    pub fill: bool,
    #[serde(default = "default_codebook_seed")]
    pub codebook_seed: u64,
}

fn default_codebook_seed() -> u64 {
    DEFAULT_CODEBOOK_SEED
}

impl CodecParams {
    fn base(k: usize, c_in: usize, c_out: usize, markers: bool, l_target: usize) -> CodecParams {
        CodecParams {
            k,
            l_in: 8,
            l_out: 16,
            c_in,
            c_out,
            d_min: 5,
            beta: 12,
            markers,
            l_target: Some(l_target),
            fill: false,
            codebook_seed: DEFAULT_CODEBOOK_SEED,
        }
    }

    /// Low-rate configuration (about 0.5 bits/nt).
    pub fn low() -> CodecParams {
        Self::base(112, 12, 520, true, 152)
    }

    /// Medium-rate configuration (about 1 bit/nt).
    pub fn medium() -> CodecParams {
        Self::base(208, 6, 240, false, 148)
    }

    /// High-rate configuration without inner redundancy (about 1.5 bits/nt).
    pub fn high() -> CodecParams {
        Self::base(288, 0, 112, false, 152)
    }

    /// Medium inner code with enough outer redundancy for rate 0.5.
    pub fn optimized() -> CodecParams {
        Self::base(208, 6, 1070, false, 148)
    }

    /// Short-sequence design without markers.
    pub fn design_a() -> CodecParams {
        Self::base(160, 6, 306, false, 126)
    }

    /// Short-sequence design with markers.
    pub fn design_b() -> CodecParams {
        Self::base(112, 6, 525, true, 126)
    }

    pub fn preset(name: &str) -> Result<CodecParams> {
        match name.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::low()),
            "medium" => Ok(Self::medium()),
            "high" => Ok(Self::high()),
            "optimized" | "opt" => Ok(Self::optimized()),
            "design-a" | "design_a" | "a" => Ok(Self::design_a()),
            "design-b" | "design_b" | "b" => Ok(Self::design_b()),
            _ => Err(Error::Params(format!("unknown preset {name:?}"))),
        }
    }

    pub const PRESETS: [&'static str; 6] = ["low", "medium", "high", "optimized", "design-a", "design-b"];

    pub fn inner(&self) -> InnerParams {
        InnerParams {
            l_in: self.l_in,
            info_bits: self.k + self.l_out as usize,
            c_in: self.c_in,
            beta: self.beta,
            d_min: self.d_min,
            markers: self.markers,
            codebook_seed: self.codebook_seed,
        }
    }

    pub fn reference_length(&self) -> Result<usize> {
        compute_reference_length(self.k, self)
    }

    /// Structural constraints that do not depend on the file size.
    pub fn validate(&self) -> Result<()> {
        if self.l_in != 8 && self.l_in != 16 {
            return Err(Error::Params(format!("l_in = {} (must be 8 or 16)", self.l_in)));
        }
        if self.l_out != 8 && self.l_out != 16 {
            return Err(Error::Params(format!("l_out = {} (must be 8 or 16)", self.l_out)));
        }
        if self.l_out % self.l_in != 0 {
            return Err(Error::Params(format!(
                "l_out = {} is not a multiple of l_in = {}",
                self.l_out, self.l_in
            )));
        }
        if self.k == 0 || self.k % self.l_in as usize != 0 || self.k % self.l_out as usize != 0 {
            return Err(Error::Params(format!(
                "k = {} must be a positive multiple of l_in and l_out",
                self.k
            )));
        }
        self.inner().validate()?;
        if let Some(t) = self.l_target {
            let l = self.reference_length()?;
            if l > t {
                return Err(Error::Params(format!("L_ref = {l} exceeds L_target = {t}")));
            }
        }
        if self.fill && self.l_target.is_none() {
            return Err(Error::Params("fill requires l_target".into()));
        }
        Ok(())
    }

    /// Bases appended after the barcode.
    pub fn fill_len(&self) -> usize {
        match (self.fill, self.l_target) {
            (true, Some(t)) => t.saturating_sub(self.reference_length().unwrap_or(t)),
            _ => 0,
        }
    }

    pub fn emitted_length(&self) -> Result<usize> {
        Ok(self.reference_length()? + self.fill_len())
    }
}

/// L_ref = (k + l_out + c_in l_in)/2 + 2 * markers + beta, with one marker per
/// l_in data bases and no barcode or markers when c_in = 0.
pub fn compute_reference_length(k: usize, p: &CodecParams) -> Result<usize> {
    let mut q = p.clone();
    q.k = k;
    q.inner().validate()?;
    let bits = k + p.l_out as usize + p.c_in * p.l_in as usize;
    if bits % 2 != 0 {
        return Err(Error::Params(format!("{bits} bits do not map to whole bases")));
    }
    Ok(q.inner().sequence_len())
}

/// The largest admissible k with L_ref(k) <= L_target.
pub fn resolve_fragment_length(l_target: usize, p: &CodecParams) -> Result<usize> {
    let step = lcm(p.l_in as usize, p.l_out as usize);
    let mut best = None;
    let mut k = step;
    while k / 2 <= l_target {
        let mut q = p.clone();
        q.k = k;
        q.l_target = None;
        if q.validate().is_ok() {
            if let Ok(l) = compute_reference_length(k, p) {
                if l <= l_target {
                    best = Some(k);
                }
            }
        }
        k += step;
    }
    best.ok_or_else(|| Error::Params(format!("no admissible k for L_target = {l_target}")))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub params: CodecParams,
    #[serde(rename = "K")]
    pub k_count: usize,
    #[serde(rename = "N")]
    pub n_count: usize,
    pub pad_bits: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained_indices: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_digest: Option<String>,
    pub file_bits: usize,
    pub l_ref: usize,
    pub fill_len: usize,
    pub code_rate: f64,
    pub file_sha256: String,
}

impl Manifest {
    pub fn coordinates(&self) -> CoordinateSet {
        match &self.retained_indices {
            Some(r) => CoordinateSet::Retained(r.clone()),
            None => CoordinateSet::Full(self.n_count),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(s)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Params(format!("unsupported manifest version {}", m.version)));
        }
        m.params.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub sequences: Vec<Dna>,
    pub manifest: Manifest,
}

pub fn code_rate(file_bits: usize, n: usize, l_ref: usize) -> f64 {
    file_bits as f64 / (n as f64 * l_ref as f64)
}

fn fill_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

struct Prepared {
    fs: FragmentSet,
    inner: InnerCodec,
    l_ref: usize,
    fill_len: usize,
}

fn prepare(data: &[u8], params: &CodecParams, seed: u64) -> Result<Prepared> {
    params.validate()?;
    let fs = fragment_file(data, params.k, seed)?;
    let inner = InnerCodec::new(params.inner(), &ChannelEstimate::noiseless())?;
    Ok(Prepared {
        fs,
        inner,
        l_ref: params.reference_length()?,
        fill_len: params.fill_len(),
    })
}

fn emit(p: &Prepared, frag: &IndexedFragment, l_out: u32, fill_rng: &mut ChaCha20Rng) -> Result<Dna> {
    let mut s = p.inner.encode(&frag.to_bytes(l_out))?;
    for _ in 0..p.fill_len {
        s.push(BASES[fill_rng.random_range(0..4)]);
    }
    Ok(s)
}

/// Encodes `data` into `K + c_out` sequences.
pub fn encode_file(data: &[u8], params: &CodecParams, seed: u64) -> Result<Encoded> {
    let p = prepare(data, params, seed)?;
    let n = p.fs.count() + params.c_out;
    let field_size = 1usize << params.l_out;
    if n > field_size {
        return Err(Error::Params(format!(
            "N = {n} exceeds 2^{} = {field_size}; the file needs {} fragments",
            params.l_out,
            p.fs.count()
        )));
    }
    let enc = OuterEncoder::new(&p.fs, params.l_out, n)?;
    let frags = enc.fragments(n)?;
    let mut fill_rng = ChaCha20Rng::seed_from_u64(fill_seed(seed));
    let sequences = frags
        .iter()
        .map(|f| emit(&p, f, params.l_out, &mut fill_rng))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        params: params.clone(),
        k_count: p.fs.count(),
        n_count: n,
        pad_bits: p.fs.pad_bits,
        seed,
        retained_indices: None,
        policy_digest: None,
        file_bits: p.fs.file_bits,
        l_ref: p.l_ref,
        fill_len: p.fill_len,
        code_rate: code_rate(p.fs.file_bits, n, p.l_ref),
        file_sha256: sha256_hex(data),
    };
    Ok(Encoded { sequences, manifest })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    #[serde(default)]
    pub max_homopolymer: Option<usize>,
    #[serde(default)]
    pub gc_range: Option<(f64, f64)>,
    #[serde(default)]
    pub forbidden_motifs: Vec<String>,
    /// Candidates generated per retained sequence when scores drive the ranking.
    #[serde(default = "default_overprovision")]
    pub overprovision: f64,
}

fn default_overprovision() -> f64 {
    2.0
}

impl FilterPolicy {
    pub fn unconstrained() -> FilterPolicy {
        FilterPolicy {
            overprovision: default_overprovision(),
            ..Default::default()
        }
    }

    /// Homopolymers at most 4, GC in [0.45, 0.55], no di- or trinucleotide
    /// repeats of `copies` units.
    pub fn standard(copies: usize) -> FilterPolicy {
        let mut motifs = repeat_motifs(2, copies);
        motifs.extend(repeat_motifs(3, copies));
        FilterPolicy {
            max_homopolymer: Some(4),
            gc_range: Some((0.45, 0.55)),
            forbidden_motifs: motifs,
            overprovision: default_overprovision(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.gc_range {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::Params(format!("GC range [{lo}, {hi}] is invalid")));
            }
        }
        for m in &self.forbidden_motifs {
            if m.is_empty() || !crate::dna::is_dna(m.as_bytes()) {
                return Err(Error::Params(format!("motif {m:?} is not a DNA string")));
            }
        }
        if self.overprovision < 1.0 {
            return Err(Error::Params("overprovision must be at least 1".into()));
        }
        Ok(())
    }

    pub fn admits(&self, s: &[u8]) -> bool {
        if let Some(h) = self.max_homopolymer {
            if max_homopolymer(s) > h {
                return false;
            }
        }
        if let Some((lo, hi)) = self.gc_range {
            let g = gc_fraction(s);
            if g < lo - 1e-12 || g > hi + 1e-12 {
                return false;
            }
        }
        !self
            .forbidden_motifs
            .iter()
            .any(|m| contains_motif(s, m.as_bytes()))
    }

    pub fn digest(&self, scores: Option<&HashMap<u32, f64>>) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("policy serializes"));
        if let Some(sc) = scores {
            let sorted: BTreeMap<u32, u64> = sc.iter().map(|(k, v)| (*k, v.to_bits())).collect();
            h.update(serde_json::to_vec(&sorted).expect("scores serialize"));
        }
        hex::encode(h.finalize())
    }
}

/// All repeats of `copies` copies of a `unit_len`-base unit that is not a
/// single repeated base (e.g. ACACAC for unit 2, 3 copies).
pub fn repeat_motifs(unit_len: usize, copies: usize) -> Vec<String> {
    let mut out = Vec::new();
    let total = 4usize.pow(unit_len as u32);
    for code in 0..total {
        let unit: Vec<u8> = (0..unit_len)
            .map(|i| BASES[(code >> (2 * (unit_len - 1 - i))) & 3])
            .collect();
        if unit.iter().all(|&b| b == unit[0]) {
            continue;
        }
        // skip units that are themselves a repeat of a shorter unit
        if unit_len % 2 == 0 && unit[..unit_len / 2] == unit[unit_len / 2..] {
            continue;
        }
        out.push(String::from_utf8(unit.repeat(copies)).unwrap());
    }
    out
}

/// Generates candidates in index order from the maximal outer code and keeps
/// `n_keep` that pass the hard constraints. With scores, candidates are
/// ranked by |score| ascending (missing scores last, then by index) among the
/// first `overprovision * n_keep` admissible ones.
pub fn filter_encode(
    data: &[u8],
    params: &CodecParams,
    n_keep: usize,
    policy: &FilterPolicy,
    scores: Option<&HashMap<u32, f64>>,
    seed: u64,
) -> Result<Encoded> {
    policy.validate()?;
    let p = prepare(data, params, seed)?;
    let n_max = 1usize << params.l_out;
    let count = p.fs.count();
    if n_keep < count {
        return Err(Error::Params(format!(
            "N_keep = {n_keep} is below K = {count}"
        )));
    }
    if n_keep > n_max {
        return Err(Error::Params(format!("N_keep = {n_keep} exceeds 2^{}", params.l_out)));
    }
    let enc = OuterEncoder::new(&p.fs, params.l_out, n_max)?;
    let want = match scores {
        Some(_) => ((n_keep as f64 * policy.overprovision).ceil() as usize).max(n_keep),
        None => n_keep,
    };
    // The fill stream is keyed by index so that a retained sequence does not
    // depend on which other candidates were rejected.
    let mut admitted: Vec<(u32, Dna)> = Vec::with_capacity(want);
    let batch = 256usize;
    let mut next = 0usize;
    while admitted.len() < want && next < n_max {
        let hi = (next + batch).min(n_max);
        let cands: Vec<Result<Option<(u32, Dna)>>> = (next..hi)
            .into_par_iter()
            .map(|j| {
                let frag = enc.fragment(j);
                let mut rng = ChaCha20Rng::seed_from_u64(fill_seed(seed).wrapping_add(j as u64));
                let s = emit(&p, &frag, params.l_out, &mut rng)?;
                Ok(policy.admits(&s).then_some((j as u32, s)))
            })
            .collect();
        for c in cands {
            if let Some(x) = c? {
                if admitted.len() < want {
                    admitted.push(x);
                }
            }
        }
        next = hi;
    }
    if admitted.len() < n_keep {
        return Err(Error::Shortfall {
            wanted: n_keep,
            found: admitted.len(),
        });
    }
    if let Some(sc) = scores {
        admitted.sort_by(|a, b| {
            let ka = sc.get(&a.0).map(|v| v.abs());
            let kb = sc.get(&b.0).map(|v| v.abs());
            match (ka, kb) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            }
            .then(a.0.cmp(&b.0))
        });
        admitted.truncate(n_keep);
        admitted.sort_by_key(|a| a.0);
    }
    let retained: Vec<u32> = admitted.iter().map(|a| a.0).collect();
    let sequences = admitted.into_iter().map(|a| a.1).collect();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        params: params.clone(),
        k_count: count,
        n_count: n_keep,
        pad_bits: p.fs.pad_bits,
        seed,
        retained_indices: Some(retained),
        policy_digest: Some(policy.digest(scores)),
        file_bits: p.fs.file_bits,
        l_ref: p.l_ref,
        fill_len: p.fill_len,
        code_rate: code_rate(p.fs.file_bits, n_keep, p.l_ref),
        file_sha256: sha256_hex(data),
    };
    Ok(Encoded { sequences, manifest })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    pub reads: usize,
    pub inner_decoded: usize,
    pub inner_dropouts: usize,
    pub inner_attempts: usize,
    pub inner_search_iterations: usize,
    pub duplicates: DuplicateStats,
    pub outer: OuterDiagnostics,
    pub hash_match: bool,
    pub decode_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct DecodeReport {
    pub data: Option<Vec<u8>>,
    pub diagnostics: DecodeDiagnostics,
    pub error: Option<String>,
}

impl DecodeReport {
    pub fn success(&self) -> bool {
        self.data.is_some() && self.diagnostics.hash_match
    }
}

/// Builds an inner decoder for a manifest's parameters under `channel`.
pub fn inner_decoder(manifest: &Manifest, channel: &ChannelEstimate) -> Result<InnerCodec> {
    InnerCodec::new(manifest.params.inner(), channel)
}

/// Inner-decodes reads (fill removed here) into indexed fragments.
pub fn inner_decode_reads(reads: &[Dna], manifest: &Manifest, codec: &InnerCodec) -> (Vec<IndexedFragment>, DecodeDiagnostics) {
    let groups: Vec<Vec<&[u8]>> = reads.iter().map(|r| vec![r.as_slice()]).collect();
    inner_decode_groups(&groups, manifest, codec)
}

/// Each group yields at most one fragment: its members are tried in order
/// and the first that decodes is kept (e.g. a consensus, then the reads
/// that formed it).
pub fn inner_decode_groups(groups: &[Vec<&[u8]>], manifest: &Manifest, codec: &InnerCodec) -> (Vec<IndexedFragment>, DecodeDiagnostics) {
    let fill = manifest.fill_len;
    let l_out = manifest.params.l_out;
    let results: Vec<(Option<Vec<u8>>, usize, usize)> = groups
        .par_iter()
        .map(|g| {
            let mut iters = 0;
            for (tried, r) in g.iter().enumerate() {
                let body = if fill > 0 && r.len() > fill { &r[..r.len() - fill] } else { r };
                let o = codec.decode(body);
                iters += o.stats().search_iterations;
                if let Some(b) = o.fragment() {
                    return (Some(b.to_vec()), iters, tried + 1);
                }
            }
            (None, iters, g.len())
        })
        .collect();
    let mut diag = DecodeDiagnostics {
        reads: groups.iter().map(Vec::len).sum(),
        ..Default::default()
    };
    let mut frags = Vec::with_capacity(results.len());
    for (frag, iters, tried) in results {
        diag.inner_search_iterations += iters;
        diag.inner_attempts += tried;
        match frag {
            Some(b) => {
                diag.inner_decoded += 1;
                frags.push(IndexedFragment::from_bytes(&b, l_out));
            }
            None => diag.inner_dropouts += 1,
        }
    }
    (frags, diag)
}

/// Outer stage: duplicate resolution, outer decoding, defragmentation and
/// the hash check against the manifest.
pub fn outer_stage(frags: &[IndexedFragment], manifest: &Manifest, diag: &mut DecodeDiagnostics) -> Result<Vec<u8>> {
    let coords = manifest.coordinates();
    let (map, dups) = resolve_duplicates(frags, &coords);
    diag.duplicates = dups;
    let p = &manifest.params;
    let (res, od) = outer_decode(&map, manifest.k_count, p.k, p.l_out, &coords);
    diag.outer = od;
    let fragments = res?;
    let fs = FragmentSet {
        fragments,
        k: p.k,
        pad_bits: manifest.pad_bits,
        file_bits: manifest.file_bits,
    };
    let data = defragment(&fs)?;
    diag.hash_match = sha256_hex(&data) == manifest.file_sha256;
    if !diag.hash_match {
        return Err(Error::Decode("decoded file does not match the recorded hash".into()));
    }
    Ok(data)
}

/// Decodes reads (or consensus sequences) back to the file.
pub fn decode_reads(reads: &[Dna], manifest: &Manifest, channel: &ChannelEstimate) -> DecodeReport {
    let t0 = Instant::now();
    let codec = match inner_decoder(manifest, channel) {
        Ok(c) => c,
        Err(e) => {
            return DecodeReport {
                data: None,
                diagnostics: DecodeDiagnostics::default(),
                error: Some(e.to_string()),
            }
        }
    };
    decode_with(reads, manifest, &codec, t0)
}

pub(crate) fn decode_with(reads: &[Dna], manifest: &Manifest, codec: &InnerCodec, t0: Instant) -> DecodeReport {
    let groups: Vec<Vec<&[u8]>> = reads.iter().map(|r| vec![r.as_slice()]).collect();
    decode_groups_with(&groups, manifest, codec, t0)
}

/// Like [`decode_reads`] with fallback groups (see [`inner_decode_groups`]).
pub fn decode_groups(groups: &[Vec<&[u8]>], manifest: &Manifest, channel: &ChannelEstimate) -> DecodeReport {
    let t0 = Instant::now();
    match inner_decoder(manifest, channel) {
        Ok(c) => decode_groups_with(groups, manifest, &c, t0),
        Err(e) => DecodeReport {
            data: None,
            diagnostics: DecodeDiagnostics::default(),
            error: Some(e.to_string()),
        },
    }
}

pub(crate) fn decode_groups_with(groups: &[Vec<&[u8]>], manifest: &Manifest, codec: &InnerCodec, t0: Instant) -> DecodeReport {
    let (frags, mut diag) = inner_decode_groups(groups, manifest, codec);
    let res = outer_stage(&frags, manifest, &mut diag);
    diag.decode_time_s = t0.elapsed().as_secs_f64();
    match res {
        Ok(d) => DecodeReport {
            data: Some(d),
            diagnostics: diag,
            error: None,
        },
        Err(e) => DecodeReport {
            data: None,
            diagnostics: diag,
            error: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn file(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    #[test]
    fn reference_lengths() {
        assert_eq!(CodecParams::low().reference_length().unwrap(), 152);
        assert_eq!(CodecParams::medium().reference_length().unwrap(), 148);
        assert_eq!(CodecParams::high().reference_length().unwrap(), 152);
        assert_eq!(CodecParams::optimized().reference_length().unwrap(), 148);
        assert_eq!(CodecParams::design_a().reference_length().unwrap(), 124);
        assert_eq!(CodecParams::design_b().reference_length().unwrap(), 122);
    }

    #[test]
    fn k_star() {
        for (p, t, k) in [
            (CodecParams::low(), 152, 112),
            (CodecParams::medium(), 148, 208),
            (CodecParams::high(), 152, 288),
            (CodecParams::design_a(), 126, 160),
            (CodecParams::design_b(), 126, 112),
        ] {
            assert_eq!(resolve_fragment_length(t, &p).unwrap(), k);
        }
        assert!(resolve_fragment_length(20, &CodecParams::low()).is_err());
    }

    #[test]
    fn repeat_motif_sets() {
        let di = repeat_motifs(2, 3);
        assert_eq!(di.len(), 12);
        assert!(di.contains(&"ACACAC".to_string()));
        assert_eq!(repeat_motifs(3, 2).len(), 60);
    }

    #[test]
    fn small_round_trips() {
        for name in CodecParams::PRESETS {
            let p = CodecParams::preset(name).unwrap();
            let data = file(700, 1);
            let enc = encode_file(&data, &p, 5).unwrap();
            let l = p.reference_length().unwrap();
            assert!(enc.sequences.iter().all(|s| s.len() == l));
            let rep = decode_reads(&enc.sequences, &enc.manifest, &ChannelEstimate::noiseless());
            assert_eq!(rep.data.as_deref(), Some(&data[..]), "{name}: {:?}", rep.error);
            assert!(rep.success());
        }
    }

    #[test]
    fn fill_is_stripped() {
        let mut p = CodecParams::design_b();
        p.fill = true;
        let data = file(200, 2);
        let enc = encode_file(&data, &p, 1).unwrap();
        assert!(enc.sequences.iter().all(|s| s.len() == 126));
        assert_eq!(enc.manifest.fill_len, 4);
        let rep = decode_reads(&enc.sequences, &enc.manifest, &ChannelEstimate::noiseless());
        assert!(rep.success());
    }

    #[test]
    fn filtered_round_trip() {
        let data = file(500, 3);
        let p = CodecParams::medium();
        let policy = FilterPolicy::standard(4);
        let enc = filter_encode(&data, &p, 60, &policy, None, 7).unwrap();
        assert_eq!(enc.sequences.len(), 60);
        for s in &enc.sequences {
            assert!(policy.admits(s));
        }
        let rep = decode_reads(&enc.sequences[10..], &enc.manifest, &ChannelEstimate::noiseless());
        assert!(rep.success(), "{:?}", rep.error);
    }

    #[test]
    fn manifest_json_round_trip() {
        let enc = encode_file(&file(100, 4), &CodecParams::low(), 9).unwrap();
        let js = enc.manifest.to_json().unwrap();
        assert!(js.contains("\"K\"") && js.contains("\"N\""));
        assert_eq!(Manifest::from_json(&js).unwrap(), enc.manifest);
    }
}
