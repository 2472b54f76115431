use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mgcplus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgcplus")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_input(dir: &Path, len: usize) -> std::path::PathBuf {
    let data: Vec<u8> = (0..len).map(|i| (i * 131 % 251) as u8).collect();
    let path = dir.join("input.bin");
    fs::write(&path, data).unwrap();
    path
}

#[test]
fn encode_low_15kb() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 15 * 1024);
    let out = t.path().join("enc");
    let o = mgcplus(&["encode", "-i", p(&input), "-o", p(&out), "--preset", "low", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("N=1618") && stdout.contains("L_ref=152") && stdout.contains("rate=0.4996"), "{stdout}");
    let fasta = fs::read_to_string(out.join("sequences.fasta")).unwrap();
    let seqs: Vec<&str> = fasta.lines().filter(|l| !l.starts_with('>')).collect();
    assert_eq!(seqs.len(), 1618);
    assert!(seqs.iter().all(|s| s.len() == 152));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn encode_is_deterministic() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 3000);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(d), "--preset", "medium", "--seed", "9"])), 0);
    }
    for f in ["sequences.fasta", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let t = TempDir::new().unwrap();
    let empty = t.path().join("empty");
    fs::write(&empty, b"").unwrap();
    let out = t.path().join("o");
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&empty), "-o", p(&out)])), 3);
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&t.path().join("missing")), "-o", p(&out)])), 4);
    let input = write_input(t.path(), 100);
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&out), "--preset", "nope"])), 3);
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&out), "--c-in", "1"])), 3);
    assert_eq!(code(&mgcplus(&["encode", "--bogus-flag"])), 3);
    let bad = t.path().join("bad.json");
    fs::write(&bad, "{\"preset\": \"low\", \"unknown\": 1}").unwrap();
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&out), "--config", p(&bad)])), 3);
}

#[test]
fn decode_references_and_failure() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 2000);
    let enc = t.path().join("enc");
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&enc), "--preset", "medium"])), 0);
    let manifest = enc.join("manifest.json");
    let refs = enc.join("sequences.fasta");
    let out = t.path().join("out.bin");
    let o = mgcplus(&["decode", "-r", p(&refs), "-m", p(&manifest), "-o", p(&out), "--pipeline", "direct"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("out.bin.diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["success"], true);
    assert_eq!(diag["dropouts"], 0);
    assert!(diag["times"]["decode_s"].as_f64().unwrap() >= 0.0);

    // drop c_out + 1 references: beyond what the outer code can fill in
    let text = fs::read_to_string(&refs).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let manifest_json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let c_out = manifest_json["params"]["c_out"].as_u64().unwrap() as usize;
    let kept = lines[2 * (c_out + 1)..].join("\n");
    let few = t.path().join("few.fasta");
    fs::write(&few, kept).unwrap();
    let out2 = t.path().join("fail.bin");
    let diag2 = t.path().join("fail.json");
    let o = mgcplus(&["decode", "-r", p(&few), "-m", p(&manifest), "-o", p(&out2), "--diagnostics", p(&diag2)]);
    assert_eq!(code(&o), 2);
    assert!(!out2.exists());
    let d: serde_json::Value = serde_json::from_str(&fs::read_to_string(&diag2).unwrap()).unwrap();
    assert_eq!(d["success"], false);
    assert_eq!(d["dropouts"].as_u64().unwrap() as usize, c_out + 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("E + 2S"));
}

#[test]
fn simulate_preprocess_decode_chain() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 1500);
    let enc = t.path().join("enc");
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&enc), "--preset", "low", "--seed", "4"])), 0);
    let reads = t.path().join("reads.fastq");
    let sim = |out: &Path| {
        mgcplus(&[
            "simulate", "-r", p(&enc.join("sequences.fasta")), "-o", p(out), "--sigma", "0.5", "--depth", "6",
            "--error-rate", "0.05", "--seed", "11", "--with-primers", "1",
        ])
    };
    assert_eq!(code(&sim(&reads)), 0);
    let again = t.path().join("again.fastq");
    assert_eq!(code(&sim(&again)), 0);
    assert_eq!(fs::read(&reads).unwrap(), fs::read(&again).unwrap());

    let pre = t.path().join("pre");
    let manifest = enc.join("manifest.json");
    let o = mgcplus(&["preprocess", "-r", p(&reads), "-o", p(&pre), "-m", p(&manifest), "--extract", "--tag", "GGAT", "--tag", "AGTG"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(pre.join("payloads_AGTG.fasta").exists());
    assert!(pre.join("clusters.tsv").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(pre.join("preprocess.json")).unwrap()).unwrap();
    assert_eq!(summary["counts"]["no_tag"], 0);

    let out = t.path().join("out.bin");
    let o = mgcplus(&["decode", "-r", p(&reads), "-m", p(&manifest), "-o", p(&out), "--extract", "--error-rate", "0.05"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn noiseless_simulation_copies_references() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 500);
    let enc = t.path().join("enc");
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&enc), "--preset", "high"])), 0);
    let refs = fs::read_to_string(enc.join("sequences.fasta")).unwrap();
    let refs: std::collections::HashSet<&str> = refs.lines().filter(|l| !l.starts_with('>')).collect();
    let reads = t.path().join("reads.fasta");
    let o = mgcplus(&["simulate", "-r", p(&enc.join("sequences.fasta")), "-o", p(&reads), "--depth", "3", "--error-rate", "0", "--sigma", "0"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&reads).unwrap();
    let seqs: Vec<&str> = text.lines().filter(|l| !l.starts_with('>')).collect();
    assert_eq!(seqs.len(), 3 * refs.len());
    assert!(seqs.iter().all(|s| refs.contains(s)));
}

#[test]
fn filter_encode_respects_policy() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 800);
    let enc = t.path().join("enc");
    let o = mgcplus(&["filter-encode", "-i", p(&input), "-o", p(&enc), "--preset", "medium", "--standard", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(enc.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["retained_indices"].is_array());
    let out = t.path().join("out.bin");
    let o = mgcplus(&["decode", "-r", p(&enc.join("sequences.fasta")), "-m", p(&enc.join("manifest.json")), "-o", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn config_round_trip() {
    let t = TempDir::new().unwrap();
    let input = write_input(t.path(), 1200);
    let cfg = t.path().join("cfg.json");
    let a = t.path().join("a");
    let o = mgcplus(&["--dump-config", p(&cfg), "encode", "-i", p(&input), "-o", p(&a), "--preset", "design-a", "--fill", "--seed", "5"]);
    assert_eq!(code(&o), 0);
    let b = t.path().join("b");
    assert_eq!(code(&mgcplus(&["encode", "-i", p(&input), "-o", p(&b), "--config", p(&cfg)])), 0);
    assert_eq!(fs::read(a.join("sequences.fasta")).unwrap(), fs::read(b.join("sequences.fasta")).unwrap());
    let fasta = fs::read_to_string(b.join("sequences.fasta")).unwrap();
    assert!(fasta.lines().filter(|l| !l.starts_with('>')).all(|s| s.len() == 126));
}

#[test]
fn bench_matrix_and_report() {
    let t = TempDir::new().unwrap();
    let csv = t.path().join("bench.csv");
    let json = t.path().join("bench.json");
    let args = [
        "bench", "--preset", "high", "--matrix", "--trials", "1", "--grid", "30:32:1", "--file-size", "200", "--pipeline", "direct",
        "--out-csv", p(&csv), "--out-json", p(&json),
    ];
    let o = mgcplus(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 13);
    let first = fs::read(&csv).unwrap();
    assert_eq!(code(&mgcplus(&args)), 0);
    // timings differ between runs; everything else must not
    let strip = |b: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(b)
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                [&f[..7], &f[9..]].concat().join(",")
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&fs::read(&csv).unwrap()));
    let o = mgcplus(&["report", "-i", p(&json)]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| l.contains("high")).count(), 12);
}
