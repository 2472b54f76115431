use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mgcplus::bench::{decoder_estimate, random_file, region_csv, reliable_region, sweep_csv, Bench, Grid, Pipeline, Scenario, SweepResult};
use mgcplus::channel::{coverage_counts, dropout_fraction, run_channel, ChannelParams, DEFAULT_SPLIT};
use mgcplus::codec::{decode_groups, encode_file, filter_encode, CodecParams, DecodeDiagnostics, Encoded, FilterPolicy, Manifest};
use mgcplus::dna::Dna;
use mgcplus::io::{numbered, read_records, read_scores, write_fasta, write_fastq, Record};
use mgcplus::reads::{
    cluster_consensus, consensus_band, consensus_groups, default_radius, extract_payloads, Cluster, ExtractConfig,
    DEFAULT_FWD_PRIMER, DEFAULT_REV_PRIMER, DEFAULT_TAGS,
};

const EXIT_DECODE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "mgcplus", version, about = "DNA storage codec: encode, simulate, preprocess, decode and benchmark")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the effective configuration as JSON to this path.
    #[arg(long, global = true)]
    dump_config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a file into sequences.fasta and manifest.json.
    Encode(EncodeArgs),
    /// Encode while keeping only sequences that satisfy sequence constraints.
    FilterEncode(FilterArgs),
    /// Sample noisy reads from reference sequences.
    Simulate(SimulateArgs),
    /// Extract payloads, cluster reads and write consensus sequences.
    Preprocess(PreprocessArgs),
    /// Decode reads back into the original file.
    Decode(DecodeArgs),
    /// Minimum reliable depth (or physical redundancy) sweeps.
    Bench(BenchArgs),
    /// Summarize bench JSON as a table.
    Report(ReportArgs),
}

/// Settings shared by all commands; every field can come from `--config`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codec: Option<CodecParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<ChannelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<FilterPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_keep: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extract: Option<ExtractConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decoder_error_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bench: Option<BenchConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    scenarios: Vec<Scenario>,
    grid: Grid,
    trials: usize,
    base_seed: u64,
    file_size: usize,
    /// Sweep physical redundancy at this depth instead of depth.
    #[serde(default)]
    rho_depth: Option<f64>,
    /// Error rates for a reliable-region sweep (one scenario's bias only).
    #[serde(default)]
    region_errors: Option<Vec<f64>>,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct CodecArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// low, medium, high, optimized, design-a or design-b.
    #[arg(long)]
    preset: Option<String>,
    /// Payload bits per fragment.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    c_in: Option<usize>,
    #[arg(long)]
    c_out: Option<usize>,
    /// Design length; the largest fitting k is chosen when --k is absent.
    #[arg(long)]
    l_target: Option<usize>,
    /// Pad every sequence with random bases to exactly --l-target.
    #[arg(long)]
    fill: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl CodecArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<CodecParams> {
        if self.preset.is_some() {
            cfg.preset.clone_from(&self.preset);
            cfg.codec = None;
        }
        let mut p = match (&cfg.codec, &cfg.preset) {
            (Some(c), _) => c.clone(),
            (None, Some(name)) => CodecParams::preset(name)?,
            (None, None) => CodecParams::low(),
        };
        if let Some(v) = self.c_in {
            p.c_in = v;
        }
        if let Some(v) = self.c_out {
            p.c_out = v;
        }
        if let Some(v) = self.l_target {
            p.l_target = Some(v);
            if self.k.is_none() {
                p.k = mgcplus::codec::resolve_fragment_length(v, &p)?;
            }
        }
        if let Some(v) = self.k {
            p.k = v;
        }
        if self.fill {
            p.fill = true;
        }
        p.validate()?;
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        cfg.preset = None;
        cfg.codec = Some(p.clone());
        Ok(p)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out_dir: PathBuf,
    #[command(flatten)]
    codec: CodecArgs,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out_dir: PathBuf,
    #[command(flatten)]
    codec: CodecArgs,
    /// Sequences to keep (default K + c_out).
    #[arg(long)]
    n_keep: Option<usize>,
    /// Homopolymer <= 4, GC 45-55% and no di/trinucleotide repeats of this many copies.
    #[arg(long)]
    standard: Option<usize>,
    #[arg(long)]
    max_homopolymer: Option<usize>,
    #[arg(long)]
    gc_min: Option<f64>,
    #[arg(long)]
    gc_max: Option<f64>,
    /// Forbidden motif (repeatable).
    #[arg(long = "motif")]
    motifs: Vec<String>,
    #[arg(long)]
    overprovision: Option<f64>,
    /// TSV of `index<TAB>score`; low |score| is preferred.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Reference FASTA (e.g. sequences.fasta from encode).
    #[arg(long, short)]
    references: PathBuf,
    /// Output reads; FASTA when the name ends in .fa/.fasta, else FASTQ.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    depth: Option<f64>,
    #[arg(long)]
    error_rate: Option<f64>,
    /// Physical redundancy; enables the two-stage channel.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Wrap each read in the default primers and the given tag index.
    #[arg(long)]
    with_primers: Option<usize>,
}

#[derive(Args, Clone)]
struct StageArgs {
    /// Trim primers and route by tag before clustering.
    #[arg(long)]
    extract: bool,
    /// Tags for demultiplexing with --extract (repeatable).
    #[arg(long = "tag")]
    tags: Vec<String>,
    /// direct, greedy-star or binned-star.
    #[arg(long)]
    pipeline: Option<String>,
    /// Clustering radius in edits (default 20% of the design length).
    #[arg(long)]
    radius: Option<usize>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long, short)]
    reads: Vec<PathBuf>,
    #[arg(long, short)]
    out_dir: PathBuf,
    /// Manifest giving the design length.
    #[arg(long, short)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    design_len: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    stages: StageArgs,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long, short, required = true)]
    reads: Vec<PathBuf>,
    #[arg(long, short)]
    manifest: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Diagnostics JSON (default: <out>.diagnostics.json).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Error rate assumed by the inner decoder.
    #[arg(long)]
    error_rate: Option<f64>,
    #[command(flatten)]
    stages: StageArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    codec: CodecArgs,
    /// Run the twelve bias x error scenarios.
    #[arg(long)]
    matrix: bool,
    /// Use the two-stage low-fidelity scenario.
    #[arg(long)]
    low_fidelity: bool,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    error_rate: Option<f64>,
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// lo:hi:step
    #[arg(long)]
    grid: Option<String>,
    /// Input file (default: random bytes of --file-size).
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    file_size: Option<usize>,
    /// Sweep physical redundancy at this depth.
    #[arg(long)]
    rho_depth: Option<f64>,
    /// Comma-separated error rates: minimum depth per error rate.
    #[arg(long, value_delimiter = ',')]
    region: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON written by `bench --out-json`.
    #[arg(long, short)]
    input: PathBuf,
    /// table or csv.
    #[arg(long, default_value = "table")]
    format: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(me) = cause.downcast_ref::<mgcplus::Error>() {
            return match me {
                mgcplus::Error::Io(_) => EXIT_IO,
                mgcplus::Error::Decode(_) | mgcplus::Error::NoValidPath => EXIT_DECODE,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.cmd {
        Cmd::Encode(a) => cmd_encode(cli, a),
        Cmd::FilterEncode(a) => cmd_filter_encode(cli, a),
        Cmd::Simulate(a) => cmd_simulate(cli, a),
        Cmd::Preprocess(a) => cmd_preprocess(cli, a),
        Cmd::Decode(a) => cmd_decode(cli, a),
        Cmd::Bench(a) => cmd_bench(cli, a),
        Cmd::Report(a) => cmd_report(a),
    }
}

fn dump(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    if let Some(p) = &cli.dump_config {
        write_file(p, serde_json::to_string_pretty(cfg)?.as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_seqs(paths: &[PathBuf]) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for p in paths {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        out.extend(read_records(BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))?);
    }
    Ok(out)
}

fn write_records(path: &Path, recs: &[Record]) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    let fasta = matches!(path.extension().and_then(|e| e.to_str()), Some("fa" | "fasta" | "fna"));
    if fasta {
        write_fasta(&mut w, recs)?;
    } else {
        write_fastq(&mut w, recs)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_encoded(dir: &Path, enc: &Encoded, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records(&dir.join("sequences.fasta"), &numbered("seq", &enc.sequences))?;
    write_file(&dir.join("manifest.json"), enc.manifest.to_json()?.as_bytes())?;
    write_file(&dir.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    let m = &enc.manifest;
    println!("N={} K={} L_ref={} length={} rate={:.4}", m.n_count, m.k_count, m.l_ref, m.l_ref + m.fill_len, m.code_rate);
    Ok(())
}

fn cmd_encode(cli: &Cli, a: &EncodeArgs) -> Result<u8> {
    let mut cfg = load_config(a.codec.config.as_deref())?;
    let params = a.codec.apply(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    dump(cli, &cfg)?;
    let data = read_input(&a.input)?;
    let enc = encode_file(&data, &params, seed)?;
    write_encoded(&a.out_dir, &enc, &cfg)?;
    Ok(0)
}

fn cmd_filter_encode(cli: &Cli, a: &FilterArgs) -> Result<u8> {
    let mut cfg = load_config(a.codec.config.as_deref())?;
    let params = a.codec.apply(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let mut policy = match a.standard {
        Some(c) => FilterPolicy::standard(c),
        None => cfg.policy.clone().unwrap_or_else(FilterPolicy::unconstrained),
    };
    if let Some(h) = a.max_homopolymer {
        policy.max_homopolymer = Some(h);
    }
    match (a.gc_min, a.gc_max) {
        (None, None) => {}
        (lo, hi) => {
            let (l0, h0) = policy.gc_range.unwrap_or((0.0, 1.0));
            policy.gc_range = Some((lo.unwrap_or(l0), hi.unwrap_or(h0)));
        }
    }
    policy.forbidden_motifs.extend(a.motifs.iter().map(|m| m.to_ascii_uppercase()));
    if let Some(o) = a.overprovision {
        policy.overprovision = o;
    }
    policy.validate()?;
    cfg.policy = Some(policy.clone());
    let data = read_input(&a.input)?;
    let k_count = (data.len() * 8).div_ceil(params.k);
    let n_keep = a.n_keep.or(cfg.n_keep).unwrap_or(k_count + params.c_out);
    cfg.n_keep = Some(n_keep);
    dump(cli, &cfg)?;
    let scores = match &a.scores {
        Some(p) => {
            let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(read_scores(BufReader::new(f))?)
        }
        None => None,
    };
    let enc = filter_encode(&data, &params, n_keep, &policy, scores.as_ref(), seed)?;
    write_encoded(&a.out_dir, &enc, &cfg)?;
    Ok(0)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    let mut cfg = load_config(a.config.as_deref())?;
    let mut ch = cfg.channel.clone().unwrap_or_else(|| ChannelParams::new(0.0, 10.0, 0.0, 0));
    if let Some(v) = a.sigma {
        ch.sigma = v;
    }
    if let Some(v) = a.depth {
        ch.depth = v;
    }
    if let Some(v) = a.error_rate {
        ch.error_rate = v;
    }
    if a.rho.is_some() {
        ch.physical_redundancy = a.rho;
    }
    if let Some(v) = a.seed.or(cfg.seed) {
        ch.seed = v;
    }
    ch.validate()?;
    cfg.channel = Some(ch.clone());
    cfg.seed = Some(ch.seed);
    dump(cli, &cfg)?;
    let refs: Vec<Dna> = read_seqs(std::slice::from_ref(&a.references))?.into_iter().map(|r| r.seq).collect();
    if refs.is_empty() {
        bail!(mgcplus::Error::EmptyInput);
    }
    let reads = run_channel(&refs, &ch)?;
    let tag = match a.with_primers {
        Some(t) => Some(*DEFAULT_TAGS.get(t).ok_or_else(|| anyhow!(mgcplus::Error::Params(format!("tag index {t} out of range"))))?),
        None => None,
    };
    let recs: Vec<Record> = reads
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let seq = match tag {
                Some(t) => [DEFAULT_FWD_PRIMER.as_bytes(), &r.seq, t.as_bytes(), DEFAULT_REV_PRIMER.as_bytes()].concat(),
                None => r.seq.clone(),
            };
            Record {
                id: format!("read{i} source={}", r.source),
                seq,
            }
        })
        .collect();
    write_records(&a.out, &recs)?;
    let counts = coverage_counts(&reads, refs.len());
    println!("reads={} references={} dropout={:.4}", reads.len(), refs.len(), dropout_fraction(&counts));
    Ok(0)
}

#[derive(Debug, Default, Serialize)]
struct StageCounts {
    reads_in: usize,
    extracted: Option<usize>,
    no_primer: Option<usize>,
    out_of_window: Option<usize>,
    no_tag: Option<usize>,
    clusters: Option<usize>,
    decoder_inputs: usize,
}

#[derive(Debug, Default, Serialize)]
struct StageTimes {
    extract_s: f64,
    cluster_s: f64,
    /// Codec decoding only; preprocessing is excluded.
    decode_s: f64,
}

struct Prepared {
    counts: StageCounts,
    times: StageTimes,
    payloads: Vec<Dna>,
    bins: BTreeMap<String, Vec<Dna>>,
}

fn stage_settings(cfg: &mut RunConfig, st: &StageArgs, design_len: usize) -> Result<(Option<ExtractConfig>, Pipeline, usize)> {
    let extract = if st.extract || cfg.extract.is_some() {
        let mut e = cfg.extract.clone().unwrap_or_else(|| ExtractConfig::new(design_len));
        if !st.tags.is_empty() {
            e.tags = st.tags.iter().map(|t| t.to_ascii_uppercase()).collect();
        }
        cfg.extract = Some(e.clone());
        Some(e)
    } else {
        None
    };
    let pipeline = Pipeline::parse(st.pipeline.as_deref().or(cfg.pipeline.as_deref()).unwrap_or("greedy-star"))?;
    cfg.pipeline = Some(pipeline.id().to_string());
    let radius = st.radius.or(cfg.radius).unwrap_or(default_radius(design_len));
    cfg.radius = Some(radius);
    Ok((extract, pipeline, radius))
}

fn extract_stage(reads: Vec<Dna>, extract: Option<&ExtractConfig>) -> Prepared {
    let mut prep = Prepared {
        counts: StageCounts {
            reads_in: reads.len(),
            ..Default::default()
        },
        times: StageTimes::default(),
        payloads: reads,
        bins: BTreeMap::new(),
    };
    if let Some(e) = extract {
        let t = Instant::now();
        let rep = extract_payloads(&prep.payloads, e);
        prep.times.extract_s = t.elapsed().as_secs_f64();
        prep.counts.extracted = Some(rep.extracted());
        prep.counts.no_primer = Some(rep.no_primer);
        prep.counts.out_of_window = Some(rep.out_of_window);
        prep.counts.no_tag = Some(rep.no_tag);
        prep.payloads = rep.bins.values().flatten().cloned().collect();
        prep.bins = rep.bins;
    }
    prep
}

fn cmd_preprocess(cli: &Cli, a: &PreprocessArgs) -> Result<u8> {
    let mut cfg = load_config(a.config.as_deref())?;
    let design_len = match (&a.manifest, a.design_len) {
        (_, Some(d)) => d,
        (Some(m), None) => {
            let m = load_manifest(m)?;
            m.l_ref + m.fill_len
        }
        (None, None) => bail!(mgcplus::Error::Params("give --manifest or --design-len".into())),
    };
    let (extract, pipeline, radius) = stage_settings(&mut cfg, &a.stages, design_len)?;
    dump(cli, &cfg)?;
    let reads: Vec<Dna> = read_seqs(&a.reads)?.into_iter().map(|r| r.seq).collect();
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut prep = extract_stage(reads, extract.as_ref());
    for (tag, seqs) in &prep.bins {
            let name = if tag.is_empty() { "payloads.fasta".to_string() } else { format!("payloads_{tag}.fasta") };
        write_records(&a.out_dir.join(name), &numbered("p", seqs))?;
    }
    let t = Instant::now();
    let out = match pipeline {
        Pipeline::Direct => prep.payloads.clone(),
        Pipeline::Consensus(mode) => {
            let (cons, _sorted, clusters) = cluster_consensus(&prep.payloads, radius, mode, consensus_band(4));
            write_clusters(&a.out_dir.join("clusters.tsv"), &clusters)?;
            prep.counts.clusters = Some(clusters.len());
            cons
        }
    };
    prep.times.cluster_s = t.elapsed().as_secs_f64();
    prep.counts.decoder_inputs = out.len();
    write_records(&a.out_dir.join("consensus.fasta"), &numbered("c", &out))?;
    let summary = serde_json::json!({ "counts": prep.counts, "times": prep.times, "bins": prep.bins.iter().map(|(k, v)| (k.clone(), v.len())).collect::<BTreeMap<_, _>>(), "pipeline": pipeline.id(), "radius": radius });
    write_file(&a.out_dir.join("preprocess.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!("reads={} inputs={} clusters={}", prep.counts.reads_in, out.len(), prep.counts.clusters.map_or("-".into(), |c| c.to_string()));
    Ok(0)
}

/// `cluster<TAB>member<TAB>role`, members as indices into the clustered
/// (length-sorted) read list.
fn write_clusters(path: &Path, clusters: &[Cluster]) -> Result<()> {
    let mut s = String::from("cluster\tmember\trole\n");
    for (i, c) in clusters.iter().enumerate() {
        for &m in &c.members {
            let role = if m == c.representative { "representative" } else { "member" };
            s.push_str(&format!("{i}\t{m}\t{role}\n"));
        }
    }
    write_file(path, s.as_bytes())
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Manifest::from_json(&text).with_context(|| format!("parsing manifest {}", path.display()))?)
}

#[derive(Serialize)]
struct DecodeOutput {
    success: bool,
    error: Option<String>,
    pipeline: String,
    dropouts: usize,
    residual_errors: Option<usize>,
    counts: StageCounts,
    times: StageTimes,
    threads: usize,
    decode: DecodeDiagnostics,
}

fn cmd_decode(cli: &Cli, a: &DecodeArgs) -> Result<u8> {
    let mut cfg = load_config(a.config.as_deref())?;
    let manifest = load_manifest(&a.manifest)?;
    let design_len = manifest.l_ref + manifest.fill_len;
    let (extract, pipeline, radius) = stage_settings(&mut cfg, &a.stages, design_len)?;
    let rate = a.error_rate.or(cfg.decoder_error_rate).unwrap_or(0.01);
    if !(0.0..1.0).contains(&rate) {
        bail!(mgcplus::Error::Params(format!("error rate {rate} outside [0, 1)")));
    }
    cfg.decoder_error_rate = Some(rate);
    dump(cli, &cfg)?;
    let reads: Vec<Dna> = read_seqs(&a.reads)?.into_iter().map(|r| r.seq).collect();
    let mut prep = extract_stage(reads, extract.as_ref());
    let est = decoder_estimate(rate, DEFAULT_SPLIT);
    let t = Instant::now();
    let rep = match pipeline {
        Pipeline::Direct => {
            prep.times.cluster_s = 0.0;
            prep.counts.decoder_inputs = prep.payloads.len();
            let groups: Vec<Vec<&[u8]>> = prep.payloads.iter().map(|r| vec![r.as_slice()]).collect();
            decode_groups(&groups, &manifest, &est)
        }
        Pipeline::Consensus(mode) => {
            let (cons, sorted, clusters) = cluster_consensus(&prep.payloads, radius, mode, consensus_band(4));
            prep.times.cluster_s = t.elapsed().as_secs_f64();
            prep.counts.clusters = Some(clusters.len());
            prep.counts.decoder_inputs = cons.len();
            let groups = consensus_groups(&cons, &sorted, &clusters);
            decode_groups(&groups, &manifest, &est)
        }
    };
    prep.times.decode_s = rep.diagnostics.decode_time_s;
    let success = rep.success();
    if let Some(data) = rep.data.as_ref().filter(|_| success) {
        write_file(&a.out, data)?;
    }
    let diag_path = a.diagnostics.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".diagnostics.json");
        PathBuf::from(p)
    });
    let out = DecodeOutput {
        success,
        error: rep.error.clone(),
        pipeline: pipeline.id().to_string(),
        dropouts: rep.diagnostics.outer.erasures,
        residual_errors: rep.diagnostics.outer.residual_errors,
        counts: prep.counts,
        times: prep.times,
        threads: rayon::current_num_threads(),
        decode: rep.diagnostics,
    };
    write_file(&diag_path, serde_json::to_string_pretty(&out)?.as_bytes())?;
    let residual = out.residual_errors.map_or("-".into(), |s| s.to_string());
    if success {
        println!("decoded {} bytes; E={} S={residual} decode_time={:.3}s", manifest.file_bits / 8, out.dropouts, out.times.decode_s);
        Ok(0)
    } else {
        eprintln!(
            "decode failed: {}; E={} S={residual} (outer code corrects E + 2S <= {})",
            out.error.as_deref().unwrap_or("unknown"),
            out.dropouts,
            manifest.params.c_out
        );
        Ok(EXIT_DECODE)
    }
}

fn parse_grid(s: &str) -> Result<Grid> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| mgcplus::Error::Params(format!("grid {s:?} is not lo:hi:step")))?;
    match parts[..] {
        [lo, hi, step] if step > 0.0 && lo > 0.0 && hi >= lo => Ok(Grid { lo, hi, step }),
        _ => bail!(mgcplus::Error::Params(format!("grid {s:?} is not lo:hi:step with 0 < lo <= hi, step > 0"))),
    }
}

#[derive(Serialize, Deserialize)]
struct BenchOutput {
    config: RunConfig,
    sweeps: Vec<SweepResult>,
    #[serde(default)]
    region: Option<Vec<mgcplus::bench::RegionRow>>,
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<u8> {
    let mut cfg = load_config(a.codec.config.as_deref())?;
    let params = a.codec.apply(&mut cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let mut b = cfg.bench.clone().unwrap_or(BenchConfig {
        scenarios: vec![Scenario::new(0.5, 0.05)],
        grid: Grid::DEPTH,
        trials: 50,
        base_seed: 1000,
        file_size: 15 * 1024,
        rho_depth: None,
        region_errors: None,
    });
    if a.matrix {
        b.scenarios = Scenario::matrix();
    } else if a.low_fidelity {
        b.scenarios = vec![Scenario::low_fidelity()];
    } else if a.sigma.is_some() || a.error_rate.is_some() {
        let base = b.scenarios.first().cloned().unwrap_or_else(|| Scenario::new(0.0, 0.0));
        b.scenarios = vec![Scenario::new(a.sigma.unwrap_or(base.sigma), a.error_rate.unwrap_or(base.error_rate))];
    }
    if let Some(g) = &a.grid {
        b.grid = parse_grid(g)?;
    }
    if let Some(t) = a.trials {
        b.trials = t;
    }
    if let Some(s) = a.base_seed {
        b.base_seed = s;
    }
    if let Some(s) = a.file_size {
        b.file_size = s;
    }
    if a.rho_depth.is_some() {
        b.rho_depth = a.rho_depth;
    }
    if a.region.is_some() {
        b.region_errors.clone_from(&a.region);
    }
    if b.trials == 0 || b.scenarios.is_empty() {
        bail!(mgcplus::Error::Params("bench needs at least one trial and one scenario".into()));
    }
    let pipeline = Pipeline::parse(a.pipeline.as_deref().or(cfg.pipeline.as_deref()).unwrap_or("greedy-star"))?;
    cfg.pipeline = Some(pipeline.id().to_string());
    if a.radius.is_some() {
        cfg.radius = a.radius;
    }
    cfg.bench = Some(b.clone());
    dump(cli, &cfg)?;
    let file = match &a.file {
        Some(p) => read_input(p)?,
        None => random_file(b.file_size, seed),
    };
    let mut sweeps = Vec::new();
    let mut region = None;
    if let Some(errors) = &b.region_errors {
        let sigma = b.scenarios[0].sigma;
        let rows = reliable_region(&params, &file, sigma, errors, b.grid, b.trials, b.base_seed, pipeline)?;
        print!("{}", region_csv(&rows));
        region = Some(rows);
    } else {
        for sc in &b.scenarios {
            let mut bench = Bench::new(&params, &file, seed, sc.clone(), pipeline)?;
            bench.radius = cfg.radius;
            let r = match b.rho_depth {
                Some(d) => bench.min_physical_redundancy(d, b.grid, b.trials, b.base_seed)?,
                None => bench.min_reliable_depth(b.grid, b.trials, b.base_seed)?,
            };
            eprintln!("{}: {} = {}", r.scenario, r.swept, r.min_value.map_or("unreachable".into(), |v| v.to_string()));
            sweeps.push(r);
        }
        print!("{}", sweep_csv(&sweeps));
    }
    if let Some(p) = &a.out_csv {
        let csv = match &region {
            Some(rows) => region_csv(rows),
            None => sweep_csv(&sweeps),
        };
        write_file(p, csv.as_bytes())?;
    }
    if let Some(p) = &a.out_json {
        let out = BenchOutput { config: cfg, sweeps, region };
        write_file(p, serde_json::to_string_pretty(&out)?.as_bytes())?;
    }
    Ok(0)
}

fn cmd_report(a: &ReportArgs) -> Result<u8> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let out: BenchOutput = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    match a.format.as_str() {
        "csv" => {
            print!("{}", sweep_csv(&out.sweeps));
            if let Some(rows) = &out.region {
                print!("{}", region_csv(rows));
            }
        }
        "table" => {
            let fmt = |x: Option<f64>, d: usize| x.map_or("-".to_string(), |v| format!("{v:.d$}"));
            println!("| scenario | config | pipeline | rate | min {} | read cost | decode time (s) |", out.sweeps.first().map_or("depth", |s| s.swept.as_str()));
            println!("|---|---|---|---|---|---|---|");
            for s in &out.sweeps {
                let time = match (s.decode_time_mean_s, s.decode_time_std_s) {
                    (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
                    _ => "-".into(),
                };
                println!(
                    "| {} | {} | {} | {:.4} | {} | {} | {time} |",
                    s.scenario,
                    s.config,
                    s.pipeline,
                    s.code_rate,
                    fmt(s.min_value, 2),
                    fmt(s.read_cost, 2)
                );
            }
            if let Some(rows) = &out.region {
                println!("\n| error rate | min depth |\n|---|---|");
                for r in rows {
                    println!("| {} | {} |", r.error_rate, fmt(r.min_depth, 2));
                }
            }
        }
        f => bail!(mgcplus::Error::Params(format!("unknown format {f:?}"))),
    }
    Ok(0)
}
