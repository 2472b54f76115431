//! FASTA, FASTQ and TSV readers and writers.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::dna::{is_dna, Dna};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub seq: Dna,
}

/// Parses FASTA, FASTQ (qualities ignored) or one sequence per line,
/// detected from the first non-empty line. Lowercase bases are accepted.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<Record>> {
    let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().map(|l| l.trim_end()).enumerate().filter(|(_, l)| !l.is_empty()).peekable();
    let mut out = Vec::new();
    let check = |line: usize, s: &str| -> Result<Dna> {
        let seq = s.trim().to_ascii_uppercase().into_bytes();
        if !is_dna(&seq) {
            return Err(Error::Parse(format!("line {}: not a DNA sequence", line + 1)));
        }
        Ok(seq)
    };
    match it.peek().map(|(_, l)| l.as_bytes()[0]) {
        None => {}
        Some(b'>') => {
            let mut cur: Option<Record> = None;
            for (n, l) in it {
                if let Some(id) = l.strip_prefix('>') {
                    out.extend(cur.take());
                    cur = Some(Record {
                        id: id.trim().to_string(),
                        seq: Vec::new(),
                    });
                } else {
                    let r = cur.as_mut().ok_or_else(|| Error::Parse(format!("line {}: sequence before header", n + 1)))?;
                    r.seq.extend(check(n, l)?);
                }
            }
            out.extend(cur);
        }
        Some(b'@') => {
            while let Some((n, head)) = it.next() {
                let id = head
                    .strip_prefix('@')
                    .ok_or_else(|| Error::Parse(format!("line {}: expected '@'", n + 1)))?;
                let (sn, seq) = it.next().ok_or_else(|| Error::Parse("truncated FASTQ record".into()))?;
                let (pn, plus) = it.next().ok_or_else(|| Error::Parse("truncated FASTQ record".into()))?;
                if !plus.starts_with('+') {
                    return Err(Error::Parse(format!("line {}: expected '+'", pn + 1)));
                }
                let (qn, qual) = it.next().ok_or_else(|| Error::Parse("truncated FASTQ record".into()))?;
                if qual.len() != seq.len() {
                    return Err(Error::Parse(format!("line {}: quality length mismatch", qn + 1)));
                }
                out.push(Record {
                    id: id.split_whitespace().next().unwrap_or("").to_string(),
                    seq: check(sn, seq)?,
                });
            }
        }
        Some(_) => {
            for (i, (n, l)) in it.enumerate() {
                out.push(Record {
                    id: format!("seq{i}"),
                    seq: check(n, l)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_fasta<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    for r in records {
        writeln!(w, ">{}", r.id)?;
        w.write_all(&r.seq)?;
        writeln!(w)?;
    }
    Ok(())
}

/// FASTQ with a constant quality character.
pub fn write_fastq<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    for r in records {
        writeln!(w, "@{}", r.id)?;
        w.write_all(&r.seq)?;
        writeln!(w, "\n+")?;
        w.write_all(&vec![b'I'; r.seq.len()])?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn numbered(prefix: &str, seqs: &[Dna]) -> Vec<Record> {
    seqs.iter()
        .enumerate()
        .map(|(i, s)| Record {
            id: format!("{prefix}{i}"),
            seq: s.clone(),
        })
        .collect()
}

/// `index<TAB>score` lines; '#' starts a comment, a non-numeric first line
/// is taken as a header.
pub fn read_scores<R: BufRead>(input: R) -> Result<HashMap<u32, f64>> {
    let mut out = HashMap::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut f = l.split('\t');
        let (a, b) = (f.next().unwrap_or(""), f.next().unwrap_or(""));
        match (a.trim().parse::<u32>(), b.trim().parse::<f64>()) {
            (Ok(i), Ok(s)) => {
                out.insert(i, s);
            }
            _ if n == 0 => continue,
            _ => return Err(Error::Parse(format!("line {}: expected index and score", n + 1))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fasta_round_trip() {
        let recs = numbered("r", &[b"ACGT".to_vec(), b"GGTTA".to_vec()]);
        let mut buf = Vec::new();
        write_fasta(&mut buf, &recs).unwrap();
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
        let mut q = Vec::new();
        write_fastq(&mut q, &recs).unwrap();
        assert_eq!(read_records(&q[..]).unwrap(), recs);
    }

    #[test]
    fn multiline_and_plain() {
        let fa = b">a desc\nACG\nTT\n\n>b\nggg\n";
        let r = read_records(&fa[..]).unwrap();
        assert_eq!(r[0].seq, b"ACGTT");
        assert_eq!(r[1].seq, b"GGG");
        let plain = read_records(&b"ACGT\nTTTT\n"[..]).unwrap();
        assert_eq!(plain.len(), 2);
        assert!(read_records(&b">x\nACGN\n"[..]).is_err());
        assert!(read_records(&b"@x\nACG\n+\nII\n"[..]).is_err());
    }

    #[test]
    fn scores() {
        let s = read_scores(&b"index\tscore\n0\t-1.5\n7\t2\n# note\n"[..]).unwrap();
        assert_eq!(s[&0], -1.5);
        assert_eq!(s[&7], 2.0);
        assert!(read_scores(&b"0\t1\nx\ty\n"[..]).is_err());
    }
}
