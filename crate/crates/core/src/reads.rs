//! Read preprocessing: primer trimming, clustering and consensus.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dna::{edit_distance_within, reverse_complement, Dna};

pub const DEFAULT_FWD_PRIMER: &str = "AGCGTGCGTTACTTAGATAC";
pub const DEFAULT_REV_PRIMER: &str = "TCACCGTATTGCGTAGTATG";
pub const DEFAULT_TAGS: [&str; 4] = ["GGAT", "AGTG", "CAAG", "GACA"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub fwd_primer: String,
    /// As it appears at the 3' end of the read.
    pub rev_primer: String,
    /// Exact tags expected at the end of each payload; empty disables routing.
    pub tags: Vec<String>,
    /// Payload length (tag excluded) the window is centred on.
    pub design_len: usize,
    pub window: usize,
    pub mismatch_rate: f64,
    pub try_reverse_complement: bool,
}

impl ExtractConfig {
    pub fn new(design_len: usize) -> ExtractConfig {
        ExtractConfig {
            fwd_primer: DEFAULT_FWD_PRIMER.into(),
            rev_primer: DEFAULT_REV_PRIMER.into(),
            tags: Vec::new(),
            design_len,
            window: 10,
            mismatch_rate: 0.15,
            try_reverse_complement: true,
        }
    }

    fn budget(&self, primer: &str) -> usize {
        (primer.len() as f64 * self.mismatch_rate + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    /// Payloads per tag; the key is empty when tags are not used.
    pub bins: BTreeMap<String, Vec<Dna>>,
    pub no_primer: usize,
    pub out_of_window: usize,
    pub no_tag: usize,
}

impl ExtractReport {
    pub fn extracted(&self) -> usize {
        self.bins.values().map(Vec::len).sum()
    }
}

/// Best placement of `pattern` inside `text` with a free start. Returns
/// (distance, end position in text).
fn fit(pattern: &[u8], text: &[u8]) -> (usize, usize) {
    let m = text.len();
    let mut prev = vec![0usize; m + 1];
    let mut cur = vec![0usize; m + 1];
    for (i, &p) in pattern.iter().enumerate() {
        cur[0] = i + 1;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(text[j - 1] != p);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut best = (usize::MAX, 0);
    for (j, &d) in prev.iter().enumerate() {
        if d < best.0 {
            best = (d, j);
        }
    }
    best
}

fn trim(read: &[u8], cfg: &ExtractConfig) -> Option<Dna> {
    let f = cfg.fwd_primer.as_bytes();
    let r = cfg.rev_primer.as_bytes();
    let slack = 8;
    let head = &read[..read.len().min(f.len() + cfg.budget(&cfg.fwd_primer) + slack)];
    let (df, start) = fit(f, head);
    if df > cfg.budget(&cfg.fwd_primer) {
        return None;
    }
    let tail_len = read.len().min(r.len() + cfg.budget(&cfg.rev_primer) + slack);
    let tail: Vec<u8> = read[read.len() - tail_len..].iter().rev().copied().collect();
    let rr: Vec<u8> = r.iter().rev().copied().collect();
    let (dr, back) = fit(&rr, &tail);
    if dr > cfg.budget(&cfg.rev_primer) {
        return None;
    }
    let end = read.len() - back;
    (start <= end).then(|| read[start..end].to_vec())
}

/// Trims primers, filters by length and routes payloads by their last four
/// bases. Failures are counted, never raised.
pub fn extract_payloads(reads: &[Dna], cfg: &ExtractConfig) -> ExtractReport {
    let mut rep = ExtractReport::default();
    let lo = cfg.design_len.saturating_sub(cfg.window);
    let hi = cfg.design_len + cfg.window;
    let tag_len = cfg.tags.first().map_or(0, String::len);
    for read in reads {
        let mut payload = trim(read, cfg);
        if payload.is_none() && cfg.try_reverse_complement {
            payload = trim(&reverse_complement(read), cfg);
        }
        let Some(mut p) = payload else {
            rep.no_primer += 1;
            continue;
        };
        let key = if cfg.tags.is_empty() {
            String::new()
        } else {
            let hit = (p.len() >= tag_len)
                .then(|| &p[p.len() - tag_len..])
                .and_then(|t| cfg.tags.iter().find(|x| x.as_bytes() == t));
            match hit {
                Some(t) => {
                    p.truncate(p.len() - tag_len);
                    t.clone()
                }
                None => {
                    rep.no_tag += 1;
                    continue;
                }
            }
        };
        if p.len() < lo || p.len() > hi {
            rep.out_of_window += 1;
            continue;
        }
        rep.bins.entry(key).or_default().push(p);
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterMode {
    Greedy,
    Binned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Index of the representative in the input.
    pub representative: usize,
    /// Member indices in admission order; the representative comes first.
    pub members: Vec<usize>,
}

const KMER: usize = 8;
const MIN_SHARED: usize = 3;
const SIGNATURE: usize = 6;

fn kmers(s: &[u8]) -> Vec<u32> {
    let mut out: Vec<u32> = s
        .windows(KMER)
        .map(|w| w.iter().fold(0u32, |a, &b| (a << 2) | u32::from(crate::dna::bits_of(b).unwrap_or(0))))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Greedy clustering: each read joins the first representative within
/// `radius` edits, otherwise it opens a new cluster. Representatives are
/// only compared when they share at least three 8-mers with the read (or
/// when either sequence is too short to have 8-mers). In binned mode a read
/// only meets representatives with the same 6-base prefix or suffix.
pub fn cluster_reads(reads: &[Dna], radius: usize, mode: ClusterMode) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut index: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut short_reps: Vec<u32> = Vec::new();
    let mut bins: HashMap<(u8, Vec<u8>), Vec<u32>> = HashMap::new();
    let mut shared: Vec<u32> = Vec::new();
    for (ri, read) in reads.iter().enumerate() {
        match first_match(reads, read, &clusters, radius, &index, &short_reps, &bins, mode, &mut shared) {
            Some(c) => clusters[c as usize].members.push(ri),
            None => {
                let c = clusters.len() as u32;
                clusters.push(Cluster {
                    representative: ri,
                    members: vec![ri],
                });
                let ks = kmers(read);
                if ks.is_empty() {
                    short_reps.push(c);
                }
                for k in ks {
                    index.entry(k).or_default().push(c);
                }
                if mode == ClusterMode::Binned {
                    for key in signatures(read) {
                        bins.entry(key).or_default().push(c);
                    }
                }
            }
        }
    }
    clusters
}

fn signatures(s: &[u8]) -> Vec<(u8, Vec<u8>)> {
    let w = SIGNATURE.min(s.len());
    vec![(0, s[..w].to_vec()), (1, s[s.len() - w..].to_vec())]
}

#[allow(clippy::too_many_arguments)]
fn first_match(
    reads: &[Dna],
    read: &[u8],
    clusters: &[Cluster],
    radius: usize,
    index: &HashMap<u32, Vec<u32>>,
    short_reps: &[u32],
    bins: &HashMap<(u8, Vec<u8>), Vec<u32>>,
    mode: ClusterMode,
    counts: &mut Vec<u32>,
) -> Option<u32> {
    counts.clear();
    counts.resize(clusters.len(), 0);
    let ks = kmers(read);
    let mut cands: Vec<u32> = Vec::new();
    if ks.is_empty() {
        cands.extend(0..clusters.len() as u32);
    } else {
        for k in &ks {
            if let Some(list) = index.get(k) {
                for &c in list {
                    counts[c as usize] += 1;
                    if counts[c as usize] as usize == MIN_SHARED {
                        cands.push(c);
                    }
                }
            }
        }
        cands.extend_from_slice(short_reps);
    }
    if mode == ClusterMode::Binned {
        let allowed: Vec<u32> = signatures(read)
            .into_iter()
            .filter_map(|k| bins.get(&k))
            .flatten()
            .copied()
            .collect();
        cands.retain(|c| allowed.contains(c));
    }
    cands.sort_unstable();
    cands.dedup();
    cands.into_iter().find(|&c| {
        let rep = &reads[clusters[c as usize].representative];
        edit_distance_within(read, rep, radius).is_some()
    })
}

/// Clustering radius for a design length (20%).
pub fn default_radius(design_len: usize) -> usize {
    design_len / 5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Del,
    Ins,
}

/// Banded global alignment of `s` against `center`. For every center
/// position returns the aligned base (or None for a gap), and for every slot
/// 0..=len the bases inserted before that position.
fn align(center: &[u8], s: &[u8], band: usize) -> (Vec<Option<u8>>, Vec<Vec<u8>>) {
    let (n, m) = (center.len(), s.len());
    let band = band.max(n.abs_diff(m) + 2);
    const INF: u32 = u32::MAX / 2;
    let w = m + 1;
    let mut dp = vec![INF; (n + 1) * w];
    let mut op = vec![Op::Match; (n + 1) * w];
    for j in 0..=m.min(band) {
        dp[j] = j as u32;
        op[j] = Op::Ins;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        for j in lo..=hi {
            let mut best = INF;
            let mut o = Op::Match;
            if j > 0 {
                let d = dp[(i - 1) * w + j - 1] + u32::from(center[i - 1] != s[j - 1]);
                if d < best {
                    best = d;
                    o = Op::Match;
                }
            }
            let d = dp[(i - 1) * w + j] + 1;
            if d < best {
                best = d;
                o = Op::Del;
            }
            if j > 0 {
                let d = dp[i * w + j - 1] + 1;
                if d < best {
                    best = d;
                    o = Op::Ins;
                }
            }
            dp[i * w + j] = best;
            op[i * w + j] = o;
        }
    }
    let mut cols = vec![None; n];
    let mut ins = vec![Vec::new(); n + 1];
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let o = if i == 0 { Op::Ins } else if j == 0 { Op::Del } else { op[i * w + j] };
        match o {
            Op::Match => {
                cols[i - 1] = Some(s[j - 1]);
                i -= 1;
                j -= 1;
            }
            Op::Del => i -= 1,
            Op::Ins => {
                ins[i].push(s[j - 1]);
                j -= 1;
            }
        }
    }
    for v in &mut ins {
        v.reverse();
    }
    (cols, ins)
}

fn vote_round(center: &[u8], members: &[&[u8]], band: usize) -> Dna {
    let aligned: Vec<_> = members.iter().map(|s| align(center, s, band)).collect();
    let mut out = Vec::with_capacity(center.len() + 4);
    let half = members.len();
    for slot in 0..=center.len() {
        // insertions before this position need a strict majority
        let mut tally: BTreeMap<&[u8], usize> = BTreeMap::new();
        for (_, ins) in &aligned {
            if !ins[slot].is_empty() {
                *tally.entry(&ins[slot][..]).or_default() += 1;
            }
        }
        let with_ins: usize = tally.values().sum();
        if 2 * with_ins > half {
            let best = tally.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap();
            out.extend_from_slice(best.0);
        }
        if slot == center.len() {
            break;
        }
        let mut votes = [0usize; 5]; // A T C G gap
        for (cols, _) in &aligned {
            let k = match cols[slot] {
                Some(b) => crate::dna::bits_of(b).map_or(4, usize::from),
                None => 4,
            };
            votes[k] += 1;
        }
        let own = crate::dna::bits_of(center[slot]).map_or(4, usize::from);
        let top = *votes.iter().max().unwrap();
        let pick = if votes[own] == top {
            own
        } else {
            (0..5).find(|&k| votes[k] == top).unwrap()
        };
        if pick < 4 {
            out.push(crate::dna::BASES[pick]);
        }
    }
    out
}

/// Star-alignment consensus around `members[0]`: per-column plurality with
/// gaps as a symbol, ties to the centre, majority insertions. A second
/// round re-aligns against the first consensus.
pub fn consensus(members: &[&[u8]], band: usize) -> Dna {
    match members.len() {
        0 => Vec::new(),
        1 | 2 => members[0].to_vec(),
        _ => {
            let first = vote_round(members[0], members, band);
            vote_round(&first, members, band)
        }
    }
}

/// Alignment band for a drift bound.
pub fn consensus_band(phi: usize) -> usize {
    2 * phi + 4
}

/// Canonical order, clustering and consensus in one step. Returns the
/// consensus of every cluster and the clusters (indices into the sorted
/// reads).
pub fn cluster_consensus(reads: &[Dna], radius: usize, mode: ClusterMode, band: usize) -> (Vec<Dna>, Vec<Dna>, Vec<Cluster>) {
    let mut sorted = reads.to_vec();
    sorted.sort_unstable();
    let clusters = cluster_reads(&sorted, radius, mode);
    let cons = clusters
        .par_iter()
        .map(|c| {
            let ms: Vec<&[u8]> = c.members.iter().map(|&i| sorted[i].as_slice()).collect();
            consensus(&ms, band)
        })
        .collect();
    (cons, sorted, clusters)
}

/// Reads tried after a cluster's consensus.
pub const FALLBACK_READS: usize = 3;

/// Decoding groups: each cluster's consensus followed by up to
/// [`FALLBACK_READS`] of its distinct reads.
pub fn consensus_groups<'a>(cons: &'a [Dna], sorted: &'a [Dna], clusters: &[Cluster]) -> Vec<Vec<&'a [u8]>> {
    clusters
        .iter()
        .zip(cons)
        .map(|(c, s)| {
            let mut g: Vec<&[u8]> = vec![s.as_slice()];
            for &m in &c.members {
                let r = sorted[m].as_slice();
                if g.len() > FALLBACK_READS {
                    break;
                }
                if !g.contains(&r) {
                    g.push(r);
                }
            }
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dna::{edit_distance, BASES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dna(n: usize, rng: &mut ChaCha8Rng) -> Dna {
        (0..n).map(|_| BASES[rng.random_range(0..4)]).collect()
    }

    #[test]
    fn exact_and_noisy_primers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let payload = random_dna(120, &mut rng);
        let mut cfg = ExtractConfig::new(120);
        cfg.tags = DEFAULT_TAGS.iter().map(|s| s.to_string()).collect();
        let build = |f: &[u8], tag: &str| -> Dna {
            [f, &payload[..], tag.as_bytes(), DEFAULT_REV_PRIMER.as_bytes()].concat()
        };
        let mut f = DEFAULT_FWD_PRIMER.as_bytes().to_vec();
        let exact = build(&f, "AGTG");
        f[3] = if f[3] == b'A' { b'C' } else { b'A' };
        f[12] = if f[12] == b'A' { b'C' } else { b'A' };
        let noisy = build(&f, "CAAG");
        let rc = reverse_complement(&build(DEFAULT_FWD_PRIMER.as_bytes(), "GGAT"));
        let rep = extract_payloads(&[exact, noisy, rc], &cfg);
        for t in ["AGTG", "CAAG", "GGAT"] {
            assert_eq!(rep.bins[t], vec![payload.clone()], "{t}");
        }
    }

    #[test]
    fn length_window_and_missing_tag() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cfg = ExtractConfig::new(100);
        cfg.tags = vec!["GGAT".into()];
        let mk = |len: usize, rng: &mut ChaCha8Rng, tag: &str| -> Dna {
            [DEFAULT_FWD_PRIMER.as_bytes(), &random_dna(len, rng)[..], tag.as_bytes(), DEFAULT_REV_PRIMER.as_bytes()].concat()
        };
        let reads = vec![mk(89, &mut rng, "GGAT"), mk(90, &mut rng, "GGAT"), mk(110, &mut rng, "GGAT"), mk(111, &mut rng, "GGAT"), mk(100, &mut rng, "TTTT")];
        let rep = extract_payloads(&reads, &cfg);
        assert_eq!(rep.extracted(), 2);
        assert_eq!(rep.out_of_window, 2);
        assert_eq!(rep.no_tag, 1);
        assert_eq!(extract_payloads(&[random_dna(150, &mut rng)], &cfg).no_primer, 1);
    }

    #[test]
    fn identical_reads_one_cluster() {
        let reads = vec![b"ACGTACGTTTGACCA".to_vec(); 6];
        let cl = cluster_reads(&reads, 3, ClusterMode::Greedy);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].members, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn radius_zero_groups_duplicates() {
        let reads: Vec<Dna> = ["ACGTACGTAA", "ACGTACGTAA", "ACGTACGTAT", "ACGTACGTAT", "ACGTACGTAA"]
            .iter()
            .map(|s| s.as_bytes().to_vec())
            .collect();
        let cl = cluster_reads(&reads, 0, ClusterMode::Greedy);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].members, vec![0, 1, 4]);
        assert_eq!(cl[1].members, vec![2, 3]);
    }

    #[test]
    fn majority_fixes_substitutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_dna(100, &mut rng);
        let copies: Vec<Dna> = (0..5)
            .map(|i| {
                let mut c = r.clone();
                let pos = 10 + 17 * i;
                c[pos] = BASES[(crate::dna::bits_of(c[pos]).unwrap() as usize + 1) % 4];
                c
            })
            .collect();
        let ms: Vec<&[u8]> = copies.iter().map(|c| c.as_slice()).collect();
        assert_eq!(consensus(&ms, 12), r);
        let same = vec![r.as_slice(); 3];
        assert_eq!(consensus(&same, 12), r);
    }

    #[test]
    fn shared_deletion_persists() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_dna(80, &mut rng);
        let mut d = r.clone();
        d.remove(40);
        let ms = vec![d.as_slice(); 3];
        assert_eq!(consensus(&ms, 12), d);
        assert_eq!(edit_distance(&consensus(&ms, 12), &r), 1);
    }

    #[test]
    fn consensus_recovers_indels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_dna(120, &mut rng);
        let mut copies = Vec::new();
        for i in 0..7 {
            let mut c = r.clone();
            match i % 3 {
                0 => {
                    c.remove(5 + 13 * i);
                }
                1 => c.insert(5 + 13 * i, b'A'),
                _ => c[5 + 13 * i] = if c[5 + 13 * i] == b'G' { b'T' } else { b'G' },
            }
            copies.push(c);
        }
        let ms: Vec<&[u8]> = copies.iter().map(|c| c.as_slice()).collect();
        assert_eq!(consensus(&ms, 12), r);
    }
}
