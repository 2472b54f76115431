//! Marker-centric MAP drift estimation.
//!
//! A marked read is a sequence of `v` blocks of `l` data bases followed by
//! the marker `AC`. The state after block `i` is the cumulative drift `z_i`;
//! the observation for a transition into `z_i` is the two bases ending at
//! `i * (l + 2) + z_i`. Transition weights convolve the data-offset pmf with
//! the marker table below.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MARKER: [u8; 2] = *b"AC";
pub const P0: f64 = 0.25;
/// Largest marker offset modeled by the table.
pub const MU: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub p_del: f64,
    pub p_ins: f64,
    pub p_sub: f64,
}

impl ChannelEstimate {
    pub fn new(p_del: f64, p_ins: f64, p_sub: f64) -> Result<ChannelEstimate> {
        let c = ChannelEstimate { p_del, p_ins, p_sub };
        let ok = [p_del, p_ins, p_sub].iter().all(|p| (0.0..=1.0).contains(p))
            && p_del + p_ins + p_sub <= 1.0 + 1e-12;
        if !ok {
            return Err(Error::Params(format!("invalid channel estimate {c:?}")));
        }
        Ok(c)
    }

    pub fn noiseless() -> ChannelEstimate {
        ChannelEstimate {
            p_del: 0.0,
            p_ins: 0.0,
            p_sub: 0.0,
        }
    }

    /// Splits a total error rate by (substitution, deletion, insertion) fractions.
    pub fn from_rate(p: f64, split: (f64, f64, f64)) -> ChannelEstimate {
        ChannelEstimate {
            p_sub: p * split.0,
            p_del: p * split.1,
            p_ins: p * split.2,
        }
    }

    pub fn p_r(&self) -> f64 {
        1.0 - self.p_del - self.p_ins - self.p_sub
    }
}

/// Offset distribution of `l` data bases under deletions and insertions.
/// Entry `t + l` holds Pr(D = t); the total mass is (1 - P_s)^l.
pub fn data_offset_pmf(l: usize, ch: &ChannelEstimate) -> Vec<f64> {
    let (pd, pi, pr) = (ch.p_del, ch.p_ins, ch.p_r());
    let li = l as i64;
    let mut lf = vec![0.0f64; l + 1];
    for i in 1..=l {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    let pw = |p: f64, e: i64| if e == 0 { 1.0 } else { p.powi(e as i32) };
    (-li..=li)
        .map(|t| {
            let mut s = 0.0;
            let mut j = (-t).max(0);
            while 2 * j + t <= li {
                let (a, b, c) = (j, j + t, li - 2 * j - t);
                let coef = (lf[l] - lf[a as usize] - lf[b as usize] - lf[c as usize]).exp();
                s += coef * pw(pd, a) * pw(pi, b) * pw(pr, c);
                j += 1;
            }
            s
        })
        .collect()
}

/// Minimal ring interface so the marker table can be evaluated both
/// numerically and symbolically.
pub trait TableRing: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn int(n: i64) -> Self;
}

impl TableRing for f64 {
    fn int(n: i64) -> f64 {
        n as f64
    }
}

/// Pr(received marker `m`, marker offset `t`) for the marker `AC`, or
/// `None` where the table has no entry.
pub fn marker_table<T: TableRing>(m: [u8; 2], t: i32, pd: T, pi: T, ps: T, pr: T, p0: T) -> Option<T> {
    let one = T::int(1);
    let two = T::int(2);
    let sq = |x: &T| x.clone() * x.clone();
    let minus2 = sq(&p0) * sq(&pd);
    let v = match (&m, t) {
        (b"AC", 0) => p0.clone() * pi.clone() * pd.clone() + sq(&pr),
        (b"AC", 1) => pr.clone() * pi.clone() + (one - pd.clone() - pi.clone()) * pi.clone() * p0.clone(),
        (b"AC", 2) => sq(&pi) * p0,
        (b"AC", -1) => p0.clone() * pr * pd.clone() + sq(&p0) * pd * ps,
        (b"AC", -2) => minus2,

        (b"AT" | b"AG", 0) => ps * p0 * pr,
        (b"AT" | b"AG", 1) => pi * p0 * ps,
        (b"AT" | b"AG", -1) => two * pd * sq(&p0) * ps,
        (b"AT" | b"AG", -2) => minus2,

        (b"AA", 0) => pr * ps * p0.clone() + pi * pd * p0,
        (b"AA", 1) => pi * ps * p0,
        (b"AA", -1) => pd.clone() * p0.clone() * pr + sq(&p0) * pd * ps,
        (b"AA", -2) => minus2,

        (b"CC" | b"TC" | b"GC", 0) => p0.clone() * ps * pr + pd * pi * p0,
        (b"CC" | b"TC" | b"GC", 1) => (one - pd - pi.clone()) * pi * p0,
        (b"CC" | b"TC" | b"GC", 2) => sq(&pi) * p0,
        (b"CC" | b"TC" | b"GC", -1) => p0.clone() * pr * pd.clone() + sq(&p0) * pd * ps,
        (b"CC" | b"TC" | b"GC", -2) => minus2,

        (b"CT" | b"CG" | b"TT" | b"GT" | b"GG" | b"TG", 0) => sq(&ps) * sq(&p0),
        (b"CT" | b"CG" | b"TT" | b"GT" | b"GG" | b"TG", -1) => two * sq(&p0) * ps * pd,
        (b"CT" | b"CG" | b"TT" | b"GT" | b"GG" | b"TG", -2) => minus2,

        (b"CA" | b"TA" | b"GA", 0) => p0.clone() * pi * pd + sq(&ps) * sq(&p0),
        (b"CA" | b"TA" | b"GA", -1) => p0.clone() * pr * pd.clone() + sq(&p0) * ps * pd,
        (b"CA" | b"TA" | b"GA", -2) => minus2,
        _ => return None,
    };
    Some(v)
}

pub fn marker_transition_prob(m: &[u8], t: i32, ch: &ChannelEstimate) -> f64 {
    if m.len() != 2 {
        return 0.0;
    }
    marker_table([m[0], m[1]], t, ch.p_del, ch.p_ins, ch.p_sub, ch.p_r(), P0).unwrap_or(0.0)
}

/// Pr(m, d) = sum_t Pr(D_data = d - t) Pr(m, D_mar = t), t in [-2, 2].
pub fn block_transition_prob(m: &[u8], d: i32, l: usize, ch: &ChannelEstimate) -> f64 {
    let pmf = data_offset_pmf(l, ch);
    block_prob_with(&pmf, l, m, d, ch)
}

fn block_prob_with(pmf: &[f64], l: usize, m: &[u8], d: i32, ch: &ChannelEstimate) -> f64 {
    let li = l as i32;
    (-MU..=MU)
        .map(|t| {
            let x = d - t;
            if x < -li || x > li {
                0.0
            } else {
                pmf[(x + li) as usize] * marker_transition_prob(m, t, ch)
            }
        })
        .sum()
}

fn two_mer_index(m: &[u8]) -> Option<usize> {
    let a = crate::dna::bits_of(m[0])?;
    let b = crate::dna::bits_of(m[1])?;
    Some((a * 4 + b) as usize)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftEstimate {
    /// z_0 = 0, z_1, ..., z_v
    pub z: Vec<i32>,
    pub phi: i32,
}

impl DriftEstimate {
    pub fn increments(&self) -> Vec<i32> {
        self.z.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn blocks(&self) -> usize {
        self.z.len() - 1
    }
}

/// Precomputed transition weights for one block geometry and channel.
#[derive(Debug, Clone)]
pub struct Trellis {
    l: usize,
    v: usize,
    // weight[m][d + span], d in [-span, span]
    weight: Vec<Vec<f64>>,
    span: i32,
}

impl Trellis {
    /// `l` data bases per block, `v` blocks.
    pub fn new(l: usize, v: usize, ch: &ChannelEstimate) -> Trellis {
        let pmf = data_offset_pmf(l, ch);
        let span = l as i32 + MU;
        let mut weight = Vec::with_capacity(16);
        for a in 0..4u8 {
            for b in 0..4u8 {
                let m = [crate::dna::base_of(a), crate::dna::base_of(b)];
                weight.push(
                    (-span..=span)
                        .map(|d| block_prob_with(&pmf, l, &m, d, ch))
                        .collect(),
                );
            }
        }
        Trellis { l, v, weight, span }
    }

    pub fn block_len(&self) -> usize {
        self.l + 2
    }

    pub fn blocks(&self) -> usize {
        self.v
    }

    /// Weight of moving from `z_prev` to `z` into block `i` (1-based).
    pub fn transition(&self, y: &[u8], i: usize, z_prev: i32, z: i32) -> f64 {
        let d = z - z_prev;
        if d.abs() > self.span {
            return 0.0;
        }
        let lp = self.block_len() as i64;
        let start = (i as i64 - 1) * lp + z_prev as i64;
        let end = i as i64 * lp + z as i64;
        if start < 0 || end - start < 2 || end > y.len() as i64 {
            return 0.0;
        }
        let e = end as usize;
        match two_mer_index(&y[e - 2..e]) {
            Some(mi) => self.weight[mi][(d + self.span) as usize],
            None => 0.0,
        }
    }

    /// Natural-log metric of a full trajectory (z[0] must be 0).
    pub fn path_log_metric(&self, y: &[u8], z: &[i32]) -> f64 {
        let mut s = 0.0;
        for i in 1..z.len() {
            let w = self.transition(y, i, z[i - 1], z[i]);
            if w <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += w.ln();
        }
        s
    }

    /// Viterbi over states [-phi, phi]. Ties prefer the smaller |increment|,
    /// then the smaller state; the final state ties prefer the one closest
    /// to the observed length deviation `dev`.
    pub fn estimate(&self, y: &[u8], phi: i32, dev: i32) -> Result<DriftEstimate> {
        let ns = (2 * phi + 1) as usize;
        let mut alpha = vec![0.0f64; ns];
        alpha[phi as usize] = 1.0;
        let mut pred = vec![vec![0u16; ns]; self.v];
        let mut next = vec![0.0f64; ns];
        for i in 1..=self.v {
            let mut top = 0.0f64;
            for (zi, slot) in next.iter_mut().enumerate() {
                let z = zi as i32 - phi;
                let mut best = 0.0;
                let mut arg: Option<usize> = None;
                for (pi, &a) in alpha.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let zp = pi as i32 - phi;
                    let m = a * self.transition(y, i, zp, z);
                    if m <= 0.0 {
                        continue;
                    }
                    let better = match arg {
                        None => true,
                        Some(b) => {
                            m > best
                                || (m == best && {
                                    let db = (z - (b as i32 - phi)).abs();
                                    let dn = (z - zp).abs();
                                    dn < db
                                })
                        }
                    };
                    if better {
                        best = m;
                        arg = Some(pi);
                    }
                }
                *slot = best;
                pred[i - 1][zi] = arg.unwrap_or(0) as u16;
                top = top.max(best);
            }
            if top == 0.0 {
                return Err(Error::NoValidPath);
            }
            for (a, n) in alpha.iter_mut().zip(next.iter()) {
                *a = n / top;
            }
        }
        let mut end = 0usize;
        for zi in 1..ns {
            let better = alpha[zi] > alpha[end]
                || (alpha[zi] == alpha[end]
                    && (zi as i32 - phi - dev).abs() < (end as i32 - phi - dev).abs());
            if better {
                end = zi;
            }
        }
        let mut z = vec![0i32; self.v + 1];
        let mut cur = end;
        for i in (1..=self.v).rev() {
            z[i] = cur as i32 - phi;
            cur = pred[i - 1][cur] as usize;
        }
        Ok(DriftEstimate { z, phi })
    }
}

/// Φ = max(4, |dev| + 3).
pub fn default_phi(dev: i32) -> i32 {
    4.max(dev.abs() + 3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(pd: f64, pi: f64, ps: f64) -> ChannelEstimate {
        ChannelEstimate::new(pd, pi, ps).unwrap()
    }

    #[test]
    fn pmf_small_case() {
        let c = ch(0.1, 0.05, 0.05);
        let p = data_offset_pmf(2, &c);
        let want = [0.01, 0.16, 0.65, 0.08, 0.0025];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn pmf_noiseless_indels() {
        let c = ch(0.0, 0.0, 0.1);
        let p = data_offset_pmf(8, &c);
        for (i, x) in p.iter().enumerate() {
            if i == 8 {
                assert!((x - 0.9f64.powi(8)).abs() < 1e-12);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn pmf_normalization() {
        let mut s = 0x1234_5678u64;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 10_000) as f64 / 10_000.0
        };
        for l in 0..=32 {
            let c = ch(next() * 0.2, next() * 0.2, next() * 0.2);
            let total: f64 = data_offset_pmf(l, &c).iter().sum();
            assert!((total - (1.0 - c.p_sub).powi(l as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_spot_values() {
        let c = ch(0.1, 0.05, 0.05);
        let pr = c.p_r();
        let ac0 = marker_transition_prob(b"AC", 0, &c);
        assert!((ac0 - (P0 * 0.05 * 0.1 + pr * pr)).abs() < 1e-15);
        assert_eq!(marker_transition_prob(b"AT", 2, &c), 0.0);
        assert_eq!(marker_transition_prob(b"ACG", 0, &c), 0.0);
    }

    #[test]
    fn noiseless_block_transition() {
        let c = ChannelEstimate::noiseless();
        assert_eq!(block_transition_prob(b"AC", 0, 8, &c), 1.0);
        for d in [-3, -1, 1, 2] {
            assert_eq!(block_transition_prob(b"AC", d, 8, &c), 0.0);
        }
    }

    #[test]
    fn block_transition_is_convolution() {
        let c = ch(0.02, 0.01, 0.03);
        let pmf = data_offset_pmf(8, &c);
        for m in [b"AC", b"AA", b"GC", b"TG"] {
            for d in -4..=4 {
                let mut want = 0.0;
                for t in -2..=2 {
                    let x: i32 = d - t;
                    if x.abs() <= 8 {
                        want += pmf[(x + 8) as usize] * marker_transition_prob(m, t, &c);
                    }
                }
                assert!((block_transition_prob(m, d, 8, &c) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn clean_read_zero_drift() {
        let c = ch(0.01, 0.001, 0.01);
        let t = Trellis::new(8, 5, &c);
        let data = b"GATTACAGCCGTAGGTTTCAGATCGGATCCATGCATTAGC";
        let mut y = Vec::new();
        for chunk in data.chunks(8).take(5) {
            y.extend_from_slice(chunk);
            y.extend_from_slice(b"AC");
        }
        let est = t.estimate(&y, 4, 0).unwrap();
        assert_eq!(est.z, vec![0; 6]);
    }

    #[test]
    fn hopeless_read_has_no_path() {
        let c = ch(0.01, 0.001, 0.01);
        let t = Trellis::new(8, 10, &c);
        assert!(matches!(t.estimate(b"ACGT", 4, -96), Err(Error::NoValidPath)));
    }
}
