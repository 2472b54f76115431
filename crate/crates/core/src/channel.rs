//! Synthetic storage channel: lognormal bias, sampling, IDS errors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dna::{Dna, BASES};
use crate::error::{Error, Result};

/// Default (substitution, deletion, insertion) split.
pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.53, 0.45, 0.02);

/// Exabytes per gram at one copy per sequence and 1 bit/nt.
pub const DENSITY_SCALE: f64 = 113.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub sigma: f64,
    pub depth: f64,
    pub error_rate: f64,
    #[serde(default = "default_split")]
    pub split: (f64, f64, f64),
    #[serde(default)]
    pub seed: u64,
    /// Copies per reference for the two-stage model.
    #[serde(default)]
    pub physical_redundancy: Option<f64>,
    /// Share of each (sub, del, ins) component attributed to synthesis in the
    /// two-stage model; the rest happens at sequencing.
    #[serde(default = "default_synthesis_share")]
    pub synthesis_share: (f64, f64, f64),
}

fn default_split() -> (f64, f64, f64) {
    DEFAULT_SPLIT
}

fn default_synthesis_share() -> (f64, f64, f64) {
    (0.0, 1.0, 1.0)
}

impl ChannelParams {
    pub fn new(sigma: f64, depth: f64, error_rate: f64, seed: u64) -> ChannelParams {
        ChannelParams {
            sigma,
            depth,
            error_rate,
            split: DEFAULT_SPLIT,
            seed,
            physical_redundancy: None,
            synthesis_share: default_synthesis_share(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s, d, i) = self.split;
        if [s, d, i].iter().any(|x| !(0.0..=1.0).contains(x)) || (s + d + i - 1.0).abs() > 1e-9 {
            return Err(Error::Params(format!("split {:?} does not sum to 1", self.split)));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(Error::Params(format!("error rate {} outside [0, 1]", self.error_rate)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Params(format!("sigma = {}", self.sigma)));
        }
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(Error::Params(format!("depth = {} must be positive", self.depth)));
        }
        if let Some(rho) = self.physical_redundancy {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Params(format!("physical redundancy {rho} must be positive")));
            }
        }
        let (a, b, c) = self.synthesis_share;
        if [a, b, c].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Params("synthesis shares must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Per-base (sub, del, ins) probabilities.
    pub fn rates(&self) -> (f64, f64, f64) {
        let p = self.error_rate;
        (p * self.split.0, p * self.split.1, p * self.split.2)
    }

    fn stage_rates(&self) -> ((f64, f64, f64), (f64, f64, f64)) {
        let (s, d, i) = self.rates();
        let (a, b, c) = self.synthesis_share;
        ((s * a, d * b, i * c), (s * (1.0 - a), d * (1.0 - b), i * (1.0 - c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Read {
    /// Index of the reference the read came from.
    pub source: u32,
    pub seq: Dna,
}

fn derived_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    r.set_stream(stream);
    r
}

/// Normalized lognormal weights with unit mean and standard deviation `sigma`
/// before normalization.
pub fn lognormal_weights<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    let raw = lognormal_raw(n, sigma, rng);
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

pub(crate) fn lognormal_raw<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0; n];
    }
    let var_ln = (1.0 + sigma * sigma).ln();
    let dist = LogNormal::new(-var_ln / 2.0, var_ln.sqrt()).expect("valid lognormal");
    (0..n).map(|_| dist.sample(rng)).collect()
}

pub fn read_count(n: usize, depth: f64) -> usize {
    (n as f64 * depth).round_ties_even().max(0.0) as usize
}

/// Draws round(n * depth) reference indices with replacement.
pub fn sample_reads<R: Rng + ?Sized>(probs: &[f64], depth: f64, rng: &mut R) -> Vec<u32> {
    let draws = read_count(probs.len(), depth);
    if draws == 0 || probs.is_empty() {
        return Vec::new();
    }
    let idx = WeightedIndex::new(probs).expect("valid probability vector");
    (0..draws).map(|_| idx.sample(rng) as u32).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdsCounts {
    pub positions: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

/// Independent per-position deletion, substitution (to a different base) or
/// insertion (random base before the current one).
pub fn apply_ids_errors<R: Rng + ?Sized>(seq: &[u8], rates: (f64, f64, f64), rng: &mut R) -> Dna {
    apply_ids_errors_counted(seq, rates, rng).0
}

/// [`apply_ids_errors`] that also reports the events it drew.
pub fn apply_ids_errors_counted<R: Rng + ?Sized>(seq: &[u8], rates: (f64, f64, f64), rng: &mut R) -> (Dna, IdsCounts) {
    let (ps, pd, pi) = rates;
    let mut out = Vec::with_capacity(seq.len() + 4);
    let mut n = IdsCounts {
        positions: seq.len(),
        ..Default::default()
    };
    for &b in seq {
        let u: f64 = rng.random();
        if u < pd {
            n.deletions += 1;
        } else if u < pd + ps {
            let others: Vec<u8> = BASES.iter().copied().filter(|&x| x != b).collect();
            out.push(others[rng.random_range(0..3)]);
            n.substitutions += 1;
        } else if u < pd + ps + pi {
            out.push(BASES[rng.random_range(0..4)]);
            out.push(b);
            n.insertions += 1;
        } else {
            out.push(b);
        }
    }
    (out, n)
}

fn corrupt(refs: &[Dna], picks: &[u32], rates: (f64, f64, f64), seed: u64, stream: u64) -> Vec<Read> {
    picks
        .par_iter()
        .enumerate()
        .map(|(j, &src)| {
            let mut rng = derived_rng(seed, stream, j as u64);
            Read {
                source: src,
                seq: apply_ids_errors(&refs[src as usize], rates, &mut rng),
            }
        })
        .collect()
}

/// Bias, coverage and error stages. In the two-stage model the bias and
/// synthesis errors act on round(N * rho) molecules, and reads are drawn
/// uniformly from those molecules.
pub fn run_channel(refs: &[Dna], params: &ChannelParams) -> Result<Vec<Read>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let probs = lognormal_weights(refs.len(), params.sigma, &mut rng);
    match params.physical_redundancy {
        None => {
            let picks = sample_reads(&probs, params.depth, &mut rng);
            Ok(corrupt(refs, &picks, params.rates(), params.seed, 1))
        }
        Some(rho) => {
            let (synth, seq) = params.stage_rates();
            let mols = sample_reads(&probs, rho, &mut rng);
            let molecules = corrupt(refs, &mols, synth, params.seed, 2);
            let n_reads = read_count(refs.len(), params.depth);
            if molecules.is_empty() {
                return Ok(Vec::new());
            }
            let picks: Vec<u32> = (0..n_reads)
                .map(|_| rng.random_range(0..molecules.len()) as u32)
                .collect();
            let mol_seqs: Vec<Dna> = molecules.iter().map(|m| m.seq.clone()).collect();
            let mut reads = corrupt(&mol_seqs, &picks, seq, params.seed, 3);
            for r in &mut reads {
                r.source = molecules[r.source as usize].source;
            }
            Ok(reads)
        }
    }
}

/// Reads per reference.
pub fn coverage_counts(reads: &[Read], n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for r in reads {
        if let Some(x) = c.get_mut(r.source as usize) {
            *x += 1;
        }
    }
    c
}

pub fn dropout_fraction(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().filter(|&&c| c == 0).count() as f64 / counts.len() as f64
}

/// Histogram of coverage values; entry c counts references with c reads.
pub fn coverage_histogram(counts: &[usize]) -> Vec<usize> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut h = vec![0; max + 1];
    for &c in counts {
        h[c] += 1;
    }
    h
}

/// EB per gram for a code rate and physical redundancy.
pub fn storage_density(code_rate: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Params(format!("physical redundancy {rho} must be positive")));
    }
    Ok(code_rate / rho * DENSITY_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_at_zero_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = lognormal_weights(7, 0.0, &mut rng);
        assert!(w.iter().all(|&x| x == 1.0 / 7.0));
    }

    #[test]
    fn lognormal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = lognormal_raw(100_000, 1.0, &mut rng);
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let sd = (raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!((sd - 1.0).abs() < 0.03, "{sd}");
        let w = lognormal_weights(1234, 0.7, &mut rng);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn read_counts_round_to_even() {
        assert_eq!(read_count(2, 1.25), 2);
        assert_eq!(read_count(2, 1.75), 4);
        assert_eq!(read_count(10, 0.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_reads(&[0.5, 0.5], 0.0, &mut rng).is_empty());
    }

    #[test]
    fn ids_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = b"ACGTACGTAC".to_vec();
        assert_eq!(apply_ids_errors(&s, (0.0, 0.0, 0.0), &mut rng), s);
        assert!(apply_ids_errors(&s, (0.0, 1.0, 0.0), &mut rng).is_empty());
        let subbed = apply_ids_errors(&s, (1.0, 0.0, 0.0), &mut rng);
        assert!(subbed.iter().zip(&s).all(|(a, b)| a != b));
        assert_eq!(apply_ids_errors(&s, (0.0, 0.0, 1.0), &mut rng).len(), 20);
    }

    #[test]
    fn noiseless_channel_copies() {
        let refs: Vec<Dna> = (0..50u8).map(|i| vec![BASES[(i % 4) as usize]; 20]).collect();
        let reads = run_channel(&refs, &ChannelParams::new(0.0, 1.0, 0.0, 4)).unwrap();
        assert_eq!(reads.len(), 50);
        assert!(reads.iter().all(|r| r.seq == refs[r.source as usize]));
    }

    #[test]
    fn seed_determinism() {
        let refs: Vec<Dna> = (0..30u8).map(|i| vec![BASES[(i % 4) as usize]; 30]).collect();
        let mut p = ChannelParams::new(1.0, 3.0, 0.05, 11);
        assert_eq!(run_channel(&refs, &p).unwrap(), run_channel(&refs, &p).unwrap());
        p.physical_redundancy = Some(2.0);
        assert_eq!(run_channel(&refs, &p).unwrap(), run_channel(&refs, &p).unwrap());
    }

    #[test]
    fn densities() {
        assert!((storage_density(0.5, 1.0).unwrap() - 56.85).abs() < 1e-9);
        assert!((storage_density(1.0, 113.7).unwrap() - 1.0).abs() < 1e-12);
        assert!((storage_density(0.5, 2.25).unwrap() - 25.2667).abs() < 1e-3);
        assert!(storage_density(0.5, 0.0).is_err());
    }
}
