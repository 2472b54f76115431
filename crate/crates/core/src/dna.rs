//! Nucleotide strings and edit distances.
//!
//! Sequences are ASCII bytes over `ACGT`. Two bits map to one base as
//! 00→A, 01→T, 10→C, 11→G, most significant pair first.

use crate::gf::Symbol;

pub type Dna = Vec<u8>;

pub const BASES: [u8; 4] = [b'A', b'T', b'C', b'G'];

#[inline]
pub fn base_of(bits: u8) -> u8 {
    BASES[(bits & 3) as usize]
}

#[inline]
pub fn bits_of(base: u8) -> Option<u8> {
    match base {
        b'A' => Some(0),
        b'T' => Some(1),
        b'C' => Some(2),
        b'G' => Some(3),
        _ => None,
    }
}

/// Appends the `bits / 2` bases of `sym`.
pub fn push_symbol(out: &mut Dna, sym: Symbol, bits: u32) {
    let mut shift = bits;
    while shift >= 2 {
        shift -= 2;
        out.push(base_of((sym >> shift) as u8));
    }
}

/// Reads one symbol from exactly `bits / 2` bases.
pub fn symbol_from(nts: &[u8]) -> Option<Symbol> {
    let mut v: Symbol = 0;
    for &b in nts {
        v = (v << 2) | bits_of(b)? as Symbol;
    }
    Some(v)
}

pub fn is_dna(s: &[u8]) -> bool {
    s.iter().all(|b| bits_of(*b).is_some())
}

pub fn reverse_complement(s: &[u8]) -> Dna {
    s.iter()
        .rev()
        .map(|&b| match b {
            b'A' => b'T',
            b'T' => b'A',
            b'C' => b'G',
            b'G' => b'C',
            x => x,
        })
        .collect()
}

pub fn max_homopolymer(s: &[u8]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = 0u8;
    for &b in s {
        if b == prev {
            run += 1;
        } else {
            run = 1;
            prev = b;
        }
        best = best.max(run);
    }
    best
}

pub fn gc_fraction(s: &[u8]) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let gc = s.iter().filter(|&&b| b == b'G' || b == b'C').count();
    gc as f64 / s.len() as f64
}

pub fn contains_motif(s: &[u8], motif: &[u8]) -> bool {
    !motif.is_empty() && s.windows(motif.len()).any(|w| w == motif)
}

pub fn edit_distance(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Global edit distance with the bit-vector recurrence, 64 rows of `a` per
/// word. Bytes other than A, C, G, T never match.
pub fn edit_distance_bits(a: &[u8], b: &[u8]) -> usize {
    let m = a.len();
    if m == 0 {
        return b.len();
    }
    let words = m.div_ceil(64);
    let mut peq = vec![[0u64; 4]; words];
    for (i, &c) in a.iter().enumerate() {
        if let Some(k) = bits_of(c) {
            peq[i / 64][k as usize] |= 1 << (i % 64);
        }
    }
    let last_bits = m - 64 * (words - 1);
    let high = |w: usize| -> u64 {
        if w + 1 == words {
            1u64 << (last_bits - 1)
        } else {
            1u64 << 63
        }
    };
    let mut pv: Vec<u64> = (0..words)
        .map(|w| if w + 1 == words && last_bits < 64 { (1u64 << last_bits) - 1 } else { u64::MAX })
        .collect();
    let mut mv = vec![0u64; words];
    let mut score = m as i64;
    for &c in b {
        let k = bits_of(c);
        // top row of a global alignment grows by one per column
        let mut hin: i64 = 1;
        for w in 0..words {
            let mut eq = match k {
                Some(k) => peq[w][k as usize],
                None => 0,
            };
            let xv = eq | mv[w];
            if hin < 0 {
                eq |= 1;
            }
            let xh = (((eq & pv[w]).wrapping_add(pv[w])) ^ pv[w]) | eq;
            let mut ph = mv[w] | !(xh | pv[w]);
            let mut mh = pv[w] & xh;
            let hb = high(w);
            let hout = if ph & hb != 0 {
                1
            } else if mh & hb != 0 {
                -1
            } else {
                0
            };
            ph <<= 1;
            mh <<= 1;
            if hin < 0 {
                mh |= 1;
            } else if hin > 0 {
                ph |= 1;
            }
            pv[w] = mh | !(xv | ph);
            mv[w] = ph & xv;
            if w + 1 == words {
                score += hout;
            }
            hin = hout;
        }
    }
    score as usize
}

/// Edit distance if it is at most `max`, else `None`. Only cells within
/// `max` of the diagonal are filled; wide bands use the bit-vector kernel.
pub fn edit_distance_within(a: &[u8], b: &[u8], max: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > max {
        return None;
    }
    if max >= 8 {
        let d = edit_distance_bits(a, b);
        return (d <= max).then_some(d);
    }
    const INF: usize = usize::MAX / 2;
    let mut prev = vec![INF; m + 1];
    let mut cur = vec![INF; m + 1];
    for (j, p) in prev.iter_mut().enumerate().take(max.min(m) + 1) {
        *p = j;
    }
    for i in 1..=n {
        let lo = i.saturating_sub(max);
        let hi = (i + max).min(m);
        if lo > 0 {
            cur[lo - 1] = INF;
        }
        let mut row_min = INF;
        for j in lo..=hi {
            let v = if j == 0 {
                i
            } else {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                sub.min(prev[j] + 1).min(cur[j - 1] + 1)
            };
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = INF;
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= max).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mapping() {
        let mut s = Vec::new();
        push_symbol(&mut s, 0b00011011, 8);
        assert_eq!(s, b"ATCG");
        assert_eq!(symbol_from(b"ATCG"), Some(0b00011011));
        assert_eq!(symbol_from(b"ANCG"), None);
        assert_eq!(reverse_complement(b"AACGT"), b"ACGTT");
    }

    #[test]
    fn stats() {
        assert_eq!(max_homopolymer(b"ACCCGTTTTA"), 4);
        assert_eq!(max_homopolymer(b""), 0);
        assert!((gc_fraction(b"ACGT") - 0.5).abs() < 1e-12);
        assert!(contains_motif(b"AACACAG", b"CACA"));
    }

    #[test]
    fn bit_vector_matches_dp() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..600 {
            let la = rng.random_range(0..300);
            let a: Vec<u8> = (0..la).map(|_| BASES[rng.random_range(0..4)]).collect();
            let mut b = a.clone();
            for _ in 0..rng.random_range(0..40) {
                let pos = rng.random_range(0..=b.len());
                match rng.random_range(0..3) {
                    0 if pos < b.len() => {
                        b.remove(pos);
                    }
                    1 => b.insert(pos, BASES[rng.random_range(0..4)]),
                    _ if pos < b.len() => b[pos] = BASES[rng.random_range(0..4)],
                    _ => {}
                }
            }
            if rng.random_bool(0.2) {
                b = (0..rng.random_range(0..200)).map(|_| BASES[rng.random_range(0..4)]).collect();
            }
            assert_eq!(edit_distance_bits(&a, &b), edit_distance(&a, &b), "{la} {}", b.len());
            let d = edit_distance(&a, &b);
            assert_eq!(edit_distance_within(&a, &b, 30), (d <= 30).then_some(d));
        }
    }

    #[test]
    fn distances_agree() {
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let la = rng.random_range(0..14);
            let lb = rng.random_range(0..14);
            let a: Vec<u8> = (0..la).map(|_| BASES[rng.random_range(0..4)]).collect();
            let b: Vec<u8> = (0..lb).map(|_| BASES[rng.random_range(0..4)]).collect();
            let d = edit_distance(&a, &b);
            for max in 0..8 {
                let w = edit_distance_within(&a, &b, max);
                if d <= max {
                    assert_eq!(w, Some(d));
                } else {
                    assert_eq!(w, None);
                }
            }
        }
    }
}
