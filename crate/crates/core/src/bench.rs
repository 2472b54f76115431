//! Reliability sweeps: minimum depth, read cost, regions and density.

use web_time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{run_channel, storage_density, ChannelParams, DEFAULT_SPLIT};
use crate::codec::{decode_groups_with, decode_with, encode_file, CodecParams, Encoded};
use crate::dna::Dna;
use crate::error::{Error, Result};
use crate::inner::{ChannelEstimate, InnerCodec};
use crate::reads::{cluster_consensus, consensus_band, consensus_groups, default_radius, ClusterMode};

/// Error rate assumed by the decoder when the channel is noiseless.
pub const MIN_ESTIMATE: f64 = 0.005;

/// Channel estimate handed to the inner decoder for a nominal error rate.
pub fn decoder_estimate(error_rate: f64, split: (f64, f64, f64)) -> ChannelEstimate {
    ChannelEstimate::from_rate(error_rate.max(MIN_ESTIMATE), split)
}

/// Deterministic pseudo-random test file.
pub fn random_file(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    /// Decode every read on its own.
    Direct,
    /// Cluster and decode one consensus per cluster, falling back to the
    /// cluster's reads when the consensus does not decode.
    Consensus(ClusterMode),
}

impl Pipeline {
    pub fn id(&self) -> &'static str {
        match self {
            Pipeline::Direct => "direct",
            Pipeline::Consensus(ClusterMode::Greedy) => "greedy-star",
            Pipeline::Consensus(ClusterMode::Binned) => "binned-star",
        }
    }

    pub fn parse(s: &str) -> Result<Pipeline> {
        match s {
            "direct" => Ok(Pipeline::Direct),
            "greedy-star" | "greedy" => Ok(Pipeline::Consensus(ClusterMode::Greedy)),
            "binned-star" | "binned" => Ok(Pipeline::Consensus(ClusterMode::Binned)),
            _ => Err(Error::Params(format!("unknown pipeline {s:?}"))),
        }
    }
}

/// Bias, error rate and optional two-stage settings; depth (or rho) is the
/// swept quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub sigma: f64,
    pub error_rate: f64,
    #[serde(default = "default_split")]
    pub split: (f64, f64, f64),
    #[serde(default)]
    pub synthesis_share: Option<(f64, f64, f64)>,
}

fn default_split() -> (f64, f64, f64) {
    DEFAULT_SPLIT
}

impl Scenario {
    pub fn new(sigma: f64, error_rate: f64) -> Scenario {
        Scenario {
            name: format!("sigma={sigma},p={error_rate}"),
            sigma,
            error_rate,
            split: DEFAULT_SPLIT,
            synthesis_share: None,
        }
    }

    /// The twelve (bias, error) combinations.
    pub fn matrix() -> Vec<Scenario> {
        let mut v = Vec::new();
        for (bn, s) in [("no-bias", 0.0), ("moderate-bias", 0.5), ("strong-bias", 1.0)] {
            for p in [0.01, 0.05, 0.10, 0.15] {
                let mut sc = Scenario::new(s, p);
                sc.name = format!("{bn},{}%", (p * 100.0).round());
                v.push(sc);
            }
        }
        v
    }

    /// Two-stage stand-in for a low-fidelity synthesis and sequencing
    /// workflow: moderate bias, 3% errors, deletions and insertions at
    /// synthesis, substitutions at sequencing.
    pub fn low_fidelity() -> Scenario {
        Scenario {
            name: "low-fidelity".into(),
            sigma: 0.5,
            error_rate: 0.03,
            split: DEFAULT_SPLIT,
            synthesis_share: Some((0.0, 1.0, 1.0)),
        }
    }

    pub fn channel(&self, depth: f64, rho: Option<f64>, seed: u64) -> ChannelParams {
        let mut c = ChannelParams::new(self.sigma, depth, self.error_rate, seed);
        c.split = self.split;
        c.physical_redundancy = rho;
        if let Some(s) = self.synthesis_share {
            c.synthesis_share = s;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub depth: f64,
    pub rho: Option<f64>,
    pub success: bool,
    pub decode_time_s: f64,
    pub preprocess_time_s: f64,
    pub reads: usize,
    pub decoder_inputs: usize,
    pub dropouts: usize,
    pub residual_errors: Option<usize>,
    pub pipeline: String,
}

/// Encoded file plus everything needed to run trials against it.
pub struct Bench {
    pub params: CodecParams,
    pub encoded: Encoded,
    pub pipeline: Pipeline,
    pub scenario: Scenario,
    codec: InnerCodec,
    /// Clustering radius; defaults to 20% of the design length.
    pub radius: Option<usize>,
    /// Hook run before preprocessing; only used to check timing isolation.
    pub preprocess_hook: Option<fn()>,
}

impl Bench {
    pub fn new(params: &CodecParams, file: &[u8], encode_seed: u64, scenario: Scenario, pipeline: Pipeline) -> Result<Bench> {
        let encoded = encode_file(file, params, encode_seed)?;
        let est = decoder_estimate(scenario.error_rate, scenario.split);
        let codec = InnerCodec::new(params.inner(), &est)?;
        Ok(Bench {
            params: params.clone(),
            encoded,
            pipeline,
            scenario,
            codec,
            radius: None,
            preprocess_hook: None,
        })
    }

    pub fn code_rate(&self) -> f64 {
        self.encoded.manifest.code_rate
    }

    pub fn references(&self) -> &[Dna] {
        &self.encoded.sequences
    }

    pub fn run_trial(&self, depth: f64, rho: Option<f64>, seed: u64) -> Result<TrialOutcome> {
        let ch = self.scenario.channel(depth, rho, seed);
        let reads: Vec<Dna> = run_channel(&self.encoded.sequences, &ch)?.into_iter().map(|r| r.seq).collect();
        let t0 = Instant::now();
        if let Some(h) = self.preprocess_hook {
            h();
        }
        let (rep, inputs) = match self.pipeline {
            Pipeline::Direct => {
                let preprocess_time_s = t0.elapsed().as_secs_f64();
                let rep = decode_with(&reads, &self.encoded.manifest, &self.codec, Instant::now());
                (rep, (reads.len(), preprocess_time_s))
            }
            Pipeline::Consensus(mode) => {
                let design = self.encoded.manifest.l_ref + self.encoded.manifest.fill_len;
                let (cons, sorted, clusters) = cluster_consensus(&reads, self.radius.unwrap_or(default_radius(design)), mode, consensus_band(4));
                let groups = consensus_groups(&cons, &sorted, &clusters);
                let preprocess_time_s = t0.elapsed().as_secs_f64();
                let rep = decode_groups_with(&groups, &self.encoded.manifest, &self.codec, Instant::now());
                (rep, (cons.len(), preprocess_time_s))
            }
        };
        let (inputs, preprocess_time_s) = inputs;
        let d = &rep.diagnostics;
        Ok(TrialOutcome {
            seed,
            depth,
            rho,
            success: rep.success(),
            decode_time_s: d.decode_time_s,
            preprocess_time_s,
            reads: reads.len(),
            decoder_inputs: inputs,
            dropouts: d.outer.erasures,
            residual_errors: d.outer.residual_errors,
            pipeline: self.pipeline.id().to_string(),
        })
    }

    /// Runs seeds base_seed.. until the first failure or `trials` successes.
    pub fn probe(&self, depth: f64, rho: Option<f64>, trials: usize, base_seed: u64) -> Result<Probe> {
        let mut outcomes = Vec::new();
        for i in 0..trials {
            let o = self.run_trial(depth, rho, base_seed + i as u64)?;
            let ok = o.success;
            outcomes.push(o);
            if !ok {
                break;
            }
        }
        let successes = outcomes.iter().filter(|o| o.success).count();
        Ok(Probe {
            value: rho.unwrap_or(depth),
            base_seed,
            trials_run: outcomes.len(),
            successes,
            passed: successes == trials,
            outcomes,
        })
    }

    /// Smallest grid depth with `trials` out of `trials` successes.
    pub fn min_reliable_depth(&self, grid: Grid, trials: usize, base_seed: u64) -> Result<SweepResult> {
        let search = grid_search(&grid, |x| self.probe(x, None, trials, base_seed))?;
        Ok(self.finish(search, grid, trials, base_seed, "depth"))
    }

    /// Smallest grid physical redundancy with all trials passing at `depth`.
    pub fn min_physical_redundancy(&self, depth: f64, grid: Grid, trials: usize, base_seed: u64) -> Result<SweepResult> {
        let search = grid_search(&grid, |x| self.probe(depth, Some(x), trials, base_seed))?;
        Ok(self.finish(search, grid, trials, base_seed, "rho"))
    }

    fn finish(&self, s: Search, grid: Grid, trials: usize, base_seed: u64, swept: &str) -> SweepResult {
        let rate = self.code_rate();
        let at_min: Vec<f64> = s
            .min
            .and_then(|m| s.probes.iter().find(|p| p.value == m))
            .map(|p| p.outcomes.iter().map(|o| o.decode_time_s).collect())
            .unwrap_or_default();
        let (mean, std) = mean_std(&at_min);
        SweepResult {
            scenario: self.scenario.name.clone(),
            config: config_name(&self.params),
            pipeline: self.pipeline.id().to_string(),
            swept: swept.to_string(),
            code_rate: rate,
            min_value: s.min,
            read_cost: s.min.filter(|_| swept == "depth").map(|m| m / rate),
            reason: s.min.is_none().then(|| format!("no reliable {swept} in [{}, {}]", grid.lo, grid.hi)),
            decode_time_mean_s: s.min.map(|_| mean),
            decode_time_std_s: s.min.map(|_| std),
            grid,
            trials,
            base_seed,
            threads: rayon::current_num_threads(),
            monotonicity_log: s.log,
            probes: s.probes,
        }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

pub fn config_name(p: &CodecParams) -> String {
    for name in CodecParams::PRESETS {
        if CodecParams::preset(name).ok().as_ref() == Some(p) {
            return name.to_string();
        }
    }
    format!("k{}-cin{}-cout{}{}", p.k, p.c_in, p.c_out, if p.markers { "-m" } else { "" })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub const DEPTH: Grid = Grid { lo: 1.0, hi: 32.0, step: 0.25 };

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub value: f64,
    pub base_seed: u64,
    pub trials_run: usize,
    pub successes: usize,
    pub passed: bool,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub config: String,
    pub pipeline: String,
    /// "depth" or "rho".
    pub swept: String,
    pub code_rate: f64,
    pub min_value: Option<f64>,
    pub read_cost: Option<f64>,
    pub reason: Option<String>,
    pub decode_time_mean_s: Option<f64>,
    pub decode_time_std_s: Option<f64>,
    pub grid: Grid,
    pub trials: usize,
    pub base_seed: u64,
    pub threads: usize,
    pub monotonicity_log: Vec<String>,
    pub probes: Vec<Probe>,
}

struct Search {
    min: Option<f64>,
    probes: Vec<Probe>,
    log: Vec<String>,
}

/// Search over grid points assuming success is monotone in the swept
/// value: probe the bottom of the grid, gallop upwards with doubling index
/// steps until a probe passes (or the top fails), then bisect the last
/// bracket. Cheap low-value probes come first; the result equals plain
/// bisection whenever success is monotone. A probe that contradicts an
/// earlier one is logged.
fn grid_search<F: FnMut(f64) -> Result<Probe>>(grid: &Grid, mut probe: F) -> Result<Search> {
    let pts = grid.points();
    let mut probes: Vec<Probe> = Vec::new();
    let mut log = Vec::new();
    let mut run = |i: usize, probes: &mut Vec<Probe>, log: &mut Vec<String>| -> Result<bool> {
        let p = probe(pts[i])?;
        let ok = p.passed;
        for q in probes.iter() {
            if q.passed && !ok && q.value < p.value {
                log.push(format!("{} passed but {} failed", q.value, p.value));
            }
            if !q.passed && ok && q.value > p.value {
                log.push(format!("{} failed but {} passed", q.value, p.value));
            }
        }
        probes.push(p);
        Ok(ok)
    };
    let last = pts.len() - 1;
    if run(0, &mut probes, &mut log)? {
        return Ok(Search { min: Some(pts[0]), probes, log });
    }
    let (mut lo, mut step) = (0usize, 1usize);
    let mut hi = loop {
        let i = (lo + step).min(last);
        if run(i, &mut probes, &mut log)? {
            break i;
        }
        if i == last {
            return Ok(Search { min: None, probes, log });
        }
        lo = i;
        step *= 2;
    };
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if run(mid, &mut probes, &mut log)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Search { min: Some(pts[hi]), probes, log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub error_rate: f64,
    pub min_depth: Option<f64>,
    pub reason: Option<String>,
}

/// Minimum reliable depth for every error rate in `errors`.
pub fn reliable_region(
    params: &CodecParams,
    file: &[u8],
    sigma: f64,
    errors: &[f64],
    grid: Grid,
    trials: usize,
    base_seed: u64,
    pipeline: Pipeline,
) -> Result<Vec<RegionRow>> {
    let mut rows = Vec::new();
    for &p in errors {
        let b = Bench::new(params, file, base_seed, Scenario::new(sigma, p), pipeline)?;
        let r = b.min_reliable_depth(grid, trials, base_seed)?;
        rows.push(RegionRow {
            error_rate: p,
            min_depth: r.min_value,
            reason: r.reason,
        });
    }
    Ok(rows)
}

/// Largest error rate in a region with a reliable depth.
pub fn max_reliable_error(rows: &[RegionRow]) -> Option<f64> {
    rows.iter().filter(|r| r.min_depth.is_some()).map(|r| r.error_rate).fold(None, |a, x| Some(a.map_or(x, |y: f64| y.max(x))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub sweep: SweepResult,
    pub min_rho: Option<f64>,
    pub density_eb_per_g: Option<f64>,
}

/// Minimum physical redundancy at fixed depth and the resulting density.
pub fn density_sweep(bench: &Bench, depth: f64, rho_grid: Grid, trials: usize, base_seed: u64) -> Result<DensityResult> {
    let sweep = bench.min_physical_redundancy(depth, rho_grid, trials, base_seed)?;
    let density = match sweep.min_value {
        Some(r) => Some(storage_density(sweep.code_rate, r)?),
        None => None,
    };
    Ok(DensityResult {
        min_rho: sweep.min_value,
        density_eb_per_g: density,
        sweep,
    })
}

pub const CSV_HEADER: &str = "scenario,config,pipeline,swept,code_rate,min_value,read_cost,decode_time_mean_s,decode_time_std_s,reason,trials,base_seed,threads";

/// One CSV row per sweep; unreachable values are left empty.
pub fn sweep_csv(rows: &[SweepResult]) -> String {
    let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.6},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.scenario),
            csv_field(&r.config),
            r.pipeline,
            r.swept,
            r.code_rate,
            opt(r.min_value),
            opt(r.read_cost),
            opt(r.decode_time_mean_s),
            opt(r.decode_time_std_s),
            csv_field(r.reason.as_deref().unwrap_or("")),
            r.trials,
            r.base_seed,
            r.threads
        ));
    }
    s
}

pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut s = String::from("error_rate,min_depth,reason\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{}\n",
            r.error_rate,
            r.min_depth.map(|v| v.to_string()).unwrap_or_default(),
            csv_field(r.reason.as_deref().unwrap_or(""))
        ));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(value: f64, passed: bool) -> Probe {
        Probe {
            value,
            base_seed: 0,
            trials_run: 1,
            successes: usize::from(passed),
            passed,
            outcomes: Vec::new(),
        }
    }

    #[test]
    fn grid_points() {
        let p = Grid::DEPTH.points();
        assert_eq!(p.len(), 125);
        assert_eq!(p[0], 1.0);
        assert_eq!(*p.last().unwrap(), 32.0);
    }

    #[test]
    fn bisection_finds_threshold() {
        for t in [1.0, 1.25, 2.0, 7.75, 31.75, 32.0] {
            let s = grid_search(&Grid::DEPTH, |x| Ok(fake(x, x >= t))).unwrap();
            assert_eq!(s.min, Some(t));
            assert!(s.probes.len() <= 14);
            assert!(s.log.is_empty());
        }
        let s = grid_search(&Grid::DEPTH, |x| Ok(fake(x, false))).unwrap();
        assert_eq!(s.min, None);
        assert_eq!(s.probes.last().unwrap().value, 32.0);
        // non-monotone oracle: the answer still passes and its lower
        // neighbour was probed and failed
        let s = grid_search(&Grid::DEPTH, |x| Ok(fake(x, x == 1.75 || x >= 8.0))).unwrap();
        assert_eq!(s.min, Some(1.75));
        assert!(s.probes.iter().any(|p| p.value == 1.5 && !p.passed));
    }

    #[test]
    fn noiseless_trial() {
        let data: Vec<u8> = (0..400u32).map(|i| (i * 7) as u8).collect();
        let b = Bench::new(&CodecParams::medium(), &data, 1, Scenario::new(0.0, 0.0), Pipeline::Direct).unwrap();
        let o = b.run_trial(32.0, None, 3).unwrap();
        assert!(o.success);
        assert_eq!(o.dropouts, 0);
        assert_eq!(o.residual_errors, Some(0));
    }

    fn slow_preprocessing() {
        std::thread::sleep(std::time::Duration::from_millis(400));
    }

    #[test]
    fn decode_time_excludes_preprocessing() {
        let data: Vec<u8> = (0..3000u32).map(|i| (i * 31 % 253) as u8).collect();
        let mut b = Bench::new(&CodecParams::low(), &data, 2, Scenario::new(0.0, 0.02), Pipeline::Consensus(ClusterMode::Greedy)).unwrap();
        let median = |b: &Bench| {
            let mut runs: Vec<TrialOutcome> = (0..3).map(|_| b.run_trial(6.0, None, 9).unwrap()).collect();
            runs.sort_by(|x, y| x.decode_time_s.total_cmp(&y.decode_time_s));
            runs.swap_remove(1)
        };
        let plain = median(&b);
        b.preprocess_hook = Some(slow_preprocessing);
        let hooked = median(&b);
        assert!(plain.success && hooked.success);
        assert!(hooked.preprocess_time_s >= 0.4);
        let rel = (hooked.decode_time_s - plain.decode_time_s).abs() / plain.decode_time_s;
        assert!(rel <= 0.10, "decode time moved by {:.1}% ({} vs {})", rel * 100.0, plain.decode_time_s, hooked.decode_time_s);
    }

    #[test]
    fn csv_rows() {
        let r = SweepResult {
            scenario: "a,b".into(),
            config: "low".into(),
            pipeline: "direct".into(),
            swept: "depth".into(),
            code_rate: 0.5,
            min_value: Some(2.0),
            read_cost: Some(4.0),
            reason: None,
            decode_time_mean_s: Some(0.1),
            decode_time_std_s: Some(0.0),
            grid: Grid::DEPTH,
            trials: 50,
            base_seed: 0,
            threads: 1,
            monotonicity_log: vec![],
            probes: vec![],
        };
        let csv = sweep_csv(&[r]);
        assert!(csv.lines().nth(1).unwrap().starts_with("\"a,b\",low,direct,depth,0.500000,2,4,"));
    }
}
