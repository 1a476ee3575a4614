//! Spectrum matrices and their on-disk forms.
//!
//! Text form: one grid row per line, comma separated, `NA` for an
//! unknown entry. Binary form: magic `TVWS`, version `u16`, rows and
//! cols as `u32`, row-major `f64` values, then a row-major bitset mask
//! (LSB first). All integers and floats are little endian.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"TVWS";
pub const MATRIX_VERSION: u16 = 1;
const NA: &str = "NA";

/// Fully known `p × m` matrix of average received power (dBm).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatrix {
    pub values: DMatrix<f64>,
}

impl SpectrumMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        SpectrumMatrix { values }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn to_partial(&self) -> PartialSpectrumMatrix {
        let (r, c) = self.shape();
        PartialSpectrumMatrix {
            values: self.values.clone(),
            known: DMatrix::from_element(r, c, true),
        }
    }
}

/// Partially observed matrix: `values` holds data where `known` is set
/// and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSpectrumMatrix {
    pub values: DMatrix<f64>,
    pub known: DMatrix<bool>,
}

impl PartialSpectrumMatrix {
    pub fn unknown(rows: usize, cols: usize) -> Self {
        PartialSpectrumMatrix {
            values: DMatrix::zeros(rows, cols),
            known: DMatrix::from_element(rows, cols, false),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[(row, col)] = value;
        self.known[(row, col)] = true;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.known[(row, col)].then(|| self.values[(row, col)])
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|k| **k).count()
    }

    pub fn known_fraction(&self) -> f64 {
        let n = self.known.len();
        if n == 0 {
            0.0
        } else {
            self.known_count() as f64 / n as f64
        }
    }

    /// Converts to a full matrix when every entry is known.
    pub fn into_complete(self) -> Option<SpectrumMatrix> {
        self.known.iter().all(|k| *k).then_some(SpectrumMatrix::new(self.values))
    }

    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let (rows, cols) = self.shape();
        for r in 0..rows {
            let rec: Vec<String> = (0..cols)
                .map(|c| match self.get(r, c) {
                    Some(v) => v.to_string(),
                    None => NA.to_string(),
                })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    if f == NA {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::parse(i + 1, format!("bad entry {f:?}: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::parse(i + 1, format!("expected {} columns, got {}", first.len(), row.len())));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Format("empty matrix file".into()));
        }
        let (nr, nc) = (rows.len(), rows[0].len());
        let mut m = PartialSpectrumMatrix::unknown(nr, nc);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    m.set(r, c, *v);
                }
            }
        }
        Ok(m)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let (rows, cols) = self.shape();
        out.write_all(MATRIX_MAGIC)?;
        out.write_all(&MATRIX_VERSION.to_le_bytes())?;
        out.write_all(&(rows as u32).to_le_bytes())?;
        out.write_all(&(cols as u32).to_le_bytes())?;
        for r in 0..rows {
            for c in 0..cols {
                let v = if self.known[(r, c)] { self.values[(r, c)] } else { 0.0 };
                out.write_all(&v.to_le_bytes())?;
            }
        }
        let mut bits = vec![0u8; (rows * cols).div_ceil(8)];
        for r in 0..rows {
            for c in 0..cols {
                if self.known[(r, c)] {
                    let k = r * cols + c;
                    bits[k / 8] |= 1 << (k % 8);
                }
            }
        }
        out.write_all(&bits)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        let mut cur = ByteCursor::new(&buf);
        if cur.take(4)? != MATRIX_MAGIC {
            return Err(Error::Format("bad magic, not a spectrum matrix".into()));
        }
        let version = u16::from_le_bytes(cur.array()?);
        if version != MATRIX_VERSION {
            return Err(Error::Format(format!("unsupported matrix version {version}")));
        }
        let rows = u32::from_le_bytes(cur.array()?) as usize;
        let cols = u32::from_le_bytes(cur.array()?) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
        let mut m = PartialSpectrumMatrix::unknown(rows, cols);
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(f64::from_le_bytes(cur.array()?));
        }
        let bits = cur.take(n.div_ceil(8))?;
        for (k, v) in vals.into_iter().enumerate() {
            if bits[k / 8] & (1 << (k % 8)) != 0 {
                m.set(k / cols, k % cols, v);
            }
        }
        if !cur.is_empty() {
            return Err(Error::Format("trailing bytes after matrix".into()));
        }
        Ok(m)
    }
}

pub(crate) struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteCursor { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> PartialSpectrumMatrix {
        let mut m = PartialSpectrumMatrix::unknown(3, 4);
        m.set(0, 0, -78.25);
        m.set(1, 2, -100.0625);
        m.set(2, 3, 1e-300);
        m
    }

    #[test]
    fn text_uses_na_for_unknown() {
        let mut out = Vec::new();
        sample().write_text(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s.lines().next().unwrap(), "-78.25,NA,NA,NA");
        let back = PartialSpectrumMatrix::read_text(s.as_bytes()).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn text_rejects_ragged_rows() {
        assert!(PartialSpectrumMatrix::read_text("1,2\n3\n".as_bytes()).is_err());
        assert!(PartialSpectrumMatrix::read_text("1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_header_layout() {
        let mut out = Vec::new();
        sample().write_binary(&mut out).unwrap();
        assert_eq!(&out[..4], b"TVWS");
        assert_eq!(u16::from_le_bytes([out[4], out[5]]), 1);
        assert_eq!(out.len(), 4 + 2 + 8 + 12 * 8 + 2);
        assert!(PartialSpectrumMatrix::read_binary(&out[..out.len() - 1]).is_err());
        let mut bad = out.clone();
        bad[0] = b'X';
        assert!(matches!(PartialSpectrumMatrix::read_binary(&bad[..]), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn binary_roundtrip(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
            let mut m = PartialSpectrumMatrix::unknown(rows, cols);
            let mut s = seed;
            for r in 0..rows {
                for c in 0..cols {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    if s >> 63 == 1 {
                        m.set(r, c, f64::from_bits(s >> 2));
                    }
                }
            }
            let mut out = Vec::new();
            m.write_binary(&mut out).unwrap();
            let back = PartialSpectrumMatrix::read_binary(&out[..]).unwrap();
            prop_assert_eq!(&back.known, &m.known);
            for r in 0..rows {
                for c in 0..cols {
                    prop_assert_eq!(back.get(r, c).map(f64::to_bits), m.get(r, c).map(f64::to_bits));
                }
            }
        }
    }
}
