//! Browser bindings: encode a text, pass it through the simulated channel,
//! decode it back. Values cross the boundary as JSON strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use mgcplus::bench::{decoder_estimate, Pipeline};
use mgcplus::channel::{coverage_counts, dropout_fraction, run_channel, ChannelParams, DEFAULT_SPLIT};
use mgcplus::codec::{decode_groups, encode_file, CodecParams, Manifest};
use mgcplus::reads::{cluster_consensus, consensus_band, consensus_groups, default_radius};

#[derive(Serialize, Deserialize)]
pub struct Encoded {
    pub sequences: Vec<String>,
    pub manifest: Manifest,
}

#[derive(Serialize, Deserialize)]
pub struct Simulated {
    pub reads: Vec<String>,
    pub dropout: f64,
}

#[derive(Serialize, Deserialize)]
pub struct Decoded {
    pub success: bool,
    pub text: Option<String>,
    pub error: Option<String>,
    pub decoder_inputs: usize,
    pub dropouts: usize,
    pub residual_errors: Option<usize>,
    pub decode_time_s: f64,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_strings(seqs: &[Vec<u8>]) -> Vec<String> {
    seqs.iter().map(|s| String::from_utf8_lossy(s).into_owned()).collect()
}

pub fn encode_impl(text: &str, preset: &str, seed: u64) -> mgcplus::Result<Encoded> {
    let params = CodecParams::preset(preset)?;
    let enc = encode_file(text.as_bytes(), &params, seed)?;
    Ok(Encoded {
        sequences: to_strings(&enc.sequences),
        manifest: enc.manifest,
    })
}

pub fn simulate_impl(sequences: &[String], sigma: f64, depth: f64, error_rate: f64, seed: u64) -> mgcplus::Result<Simulated> {
    let refs: Vec<Vec<u8>> = sequences.iter().map(|s| s.as_bytes().to_vec()).collect();
    let ch = ChannelParams::new(sigma, depth, error_rate, seed);
    ch.validate()?;
    let reads = run_channel(&refs, &ch)?;
    let counts = coverage_counts(&reads, refs.len());
    Ok(Simulated {
        dropout: dropout_fraction(&counts),
        reads: reads.iter().map(|r| String::from_utf8_lossy(&r.seq).into_owned()).collect(),
    })
}

pub fn decode_impl(reads: &[String], manifest: &Manifest, error_rate: f64, pipeline: &str) -> mgcplus::Result<Decoded> {
    let reads: Vec<Vec<u8>> = reads.iter().map(|s| s.trim().to_ascii_uppercase().into_bytes()).collect();
    let est = decoder_estimate(error_rate, DEFAULT_SPLIT);
    let (rep, inputs) = match Pipeline::parse(pipeline)? {
        Pipeline::Direct => {
            let groups: Vec<Vec<&[u8]>> = reads.iter().map(|r| vec![r.as_slice()]).collect();
            (decode_groups(&groups, manifest, &est), reads.len())
        }
        Pipeline::Consensus(mode) => {
            let radius = default_radius(manifest.l_ref + manifest.fill_len);
            let (cons, sorted, clusters) = cluster_consensus(&reads, radius, mode, consensus_band(4));
            let groups = consensus_groups(&cons, &sorted, &clusters);
            (decode_groups(&groups, manifest, &est), cons.len())
        }
    };
    Ok(Decoded {
        success: rep.success(),
        text: rep.data.as_ref().map(|d| String::from_utf8_lossy(d).into_owned()),
        error: rep.error.clone(),
        decoder_inputs: inputs,
        dropouts: rep.diagnostics.outer.erasures,
        residual_errors: rep.diagnostics.outer.residual_errors,
        decode_time_s: rep.diagnostics.decode_time_s,
    })
}

/// Returns `{sequences, manifest}` as JSON.
#[wasm_bindgen]
pub fn encode_text(text: &str, preset: &str, seed: u32) -> Result<String, JsError> {
    let enc = encode_impl(text, preset, u64::from(seed)).map_err(js_err)?;
    serde_json::to_string(&enc).map_err(js_err)
}

/// Takes the JSON from `encode_text`; returns `{reads, dropout}`.
#[wasm_bindgen]
pub fn simulate_channel(encoded_json: &str, sigma: f64, depth: f64, error_rate: f64, seed: u32) -> Result<String, JsError> {
    let enc: Encoded = serde_json::from_str(encoded_json).map_err(js_err)?;
    let sim = simulate_impl(&enc.sequences, sigma, depth, error_rate, u64::from(seed)).map_err(js_err)?;
    serde_json::to_string(&sim).map_err(js_err)
}

/// Decodes newline-separated reads against the manifest inside `encoded_json`.
#[wasm_bindgen]
pub fn decode_reads(reads: &str, encoded_json: &str, error_rate: f64, pipeline: &str) -> Result<String, JsError> {
    let enc: Encoded = serde_json::from_str(encoded_json).map_err(js_err)?;
    let reads: Vec<String> = reads.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('>')).map(str::to_string).collect();
    let dec = decode_impl(&reads, &enc.manifest, error_rate, pipeline).map_err(js_err)?;
    serde_json::to_string(&dec).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_survives_noisy_channel() {
        let text = "The quick brown fox jumps over the lazy dog. ".repeat(8);
        let enc = encode_impl(&text, "low", 3).unwrap();
        let sim = simulate_impl(&enc.sequences, 0.5, 8.0, 0.03, 5).unwrap();
        let dec = decode_impl(&sim.reads, &enc.manifest, 0.03, "greedy-star").unwrap();
        assert!(dec.success, "{:?}", dec.error);
        assert_eq!(dec.text.as_deref(), Some(text.as_str()));
    }

    #[test]
    fn json_boundary() {
        let json = encode_text("hello", "medium", 1).unwrap();
        let reads: Encoded = serde_json::from_str(&json).unwrap();
        let out = decode_reads(&reads.sequences.join("\n"), &json, 0.0, "direct").unwrap();
        let d: Decoded = serde_json::from_str(&out).unwrap();
        assert_eq!(d.text.as_deref(), Some("hello"));
    }
}
