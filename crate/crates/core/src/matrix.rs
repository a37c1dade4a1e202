//! Matrix representations of the projected ND map and of its derivative.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{check_len, Error, Result};

/// `J×J` matrix of `𝒫Λ𝒫` in a boundary basis: `entries[(i, j)] = ⟨Λ f_j, f_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct NdMatrix {
    pub entries: DMatrix<C64>,
}

impl NdMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        check_len("ND matrix columns", entries.nrows(), entries.ncols())?;
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Entries as a `J²` vector, row index fastest.
    pub fn vectorised(&self) -> Vec<C64> {
        self.entries.as_slice().to_vec()
    }

    /// `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# ND J={}\n", self.size());
        write_rows(&mut out, &self.entries);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (header, rows) = read_rows(text)?;
        let j = parse_key(&header, "# ND", "J")?;
        let entries = to_matrix(rows, j, j)?;
        Self::new(entries)
    }
}

/// `J²×N` matrix of `ℱ = 𝒫DΛ(A;·)𝒫` on the pixel space; column `n` is the
/// vectorised (row index fastest) `J×J` matrix of the derivative in the
/// direction of the `n`-th pixel indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    pub entries: DMatrix<C64>,
    basis_size: usize,
}

impl DerivativeMatrix {
    pub fn new(basis_size: usize, entries: DMatrix<C64>) -> Result<Self> {
        check_len("derivative matrix rows", basis_size * basis_size, entries.nrows())?;
        Ok(Self { entries, basis_size })
    }

    /// Stacks per-pixel `J×J` blocks as columns.
    pub fn from_blocks(basis_size: usize, blocks: &[DMatrix<C64>]) -> Result<Self> {
        let mut entries = DMatrix::zeros(basis_size * basis_size, blocks.len());
        for (n, b) in blocks.iter().enumerate() {
            check_len("derivative block", basis_size * basis_size, b.len())?;
            entries.column_mut(n).copy_from_slice(b.as_slice());
        }
        Ok(Self { entries, basis_size })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.ncols()
    }

    /// Column `n` reshaped back to `J×J`.
    pub fn block(&self, n: usize) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.basis_size, self.basis_size, self.entries.column(n).as_slice())
    }

    /// `J×J` derivative in the direction `b` (one value per pixel).
    pub fn apply(&self, b: &[C64]) -> Result<DMatrix<C64>> {
        check_len("derivative direction", self.parameter_count(), b.len())?;
        let v = &self.entries * nalgebra::DVector::from_column_slice(b);
        Ok(DMatrix::from_column_slice(
            self.basis_size,
            self.basis_size,
            v.as_slice(),
        ))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# DL J={} N={}\n", self.basis_size, self.parameter_count());
        write_rows(&mut out, &self.entries);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (header, rows) = read_rows(text)?;
        let j = parse_key(&header, "# DL", "J")?;
        let n = parse_key(&header, "# DL", "N")?;
        let entries = to_matrix(rows, j * j, n)?;
        Self::new(j, entries)
    }
}

/// `re+imi` with round-trip precision.
pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(s: &str) -> Option<C64> {
    let body = s.trim().strip_suffix('i')?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some(C64::new(re, im))
}

fn write_rows(out: &mut String, m: &DMatrix<C64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
}

fn read_rows(text: &str) -> Result<(String, Vec<Vec<C64>>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty matrix file".into(),
    })?;
    let rows = lines
        .map(|(i, l)| {
            l.split(',')
                .map(|tok| {
                    parse_complex(tok).ok_or(Error::Parse {
                        line: i + 1,
                        message: format!("bad complex entry {tok:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header.trim().to_string(), rows))
}

fn parse_key(header: &str, tag: &str, key: &str) -> Result<usize> {
    let bad = || Error::Parse {
        line: 1,
        message: format!("bad header {header:?}"),
    };
    let rest = header.strip_prefix(tag).ok_or_else(bad)?;
    rest.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)
}

fn to_matrix(rows: Vec<Vec<C64>>, nrows: usize, ncols: usize) -> Result<DMatrix<C64>> {
    check_len("matrix rows", nrows, rows.len())?;
    for r in &rows {
        check_len("matrix columns", ncols, r.len())?;
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn blocks_are_vectorised_row_index_fastest() {
        let b = DMatrix::from_fn(2, 2, |i, j| C64::new((i + 10 * j) as f64, 0.0));
        let d = DerivativeMatrix::from_blocks(2, std::slice::from_ref(&b)).unwrap();
        let col: Vec<f64> = d.entries.column(0).iter().map(|z| z.re).collect();
        assert_eq!(col, vec![0.0, 1.0, 10.0, 11.0]);
        assert_eq!(d.block(0), b);
    }

    #[test]
    fn csv_headers() {
        let m = NdMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!(m.to_csv().starts_with("# ND J=3\n"));
        let d = DerivativeMatrix::new(2, DMatrix::zeros(4, 5)).unwrap();
        assert!(d.to_csv().starts_with("# DL J=2 N=5\n"));
        assert_eq!(DerivativeMatrix::from_csv(&d.to_csv()).unwrap(), d);
    }

    proptest! {
        #[test]
        fn complex_text_round_trips(re in any::<f64>(), im in any::<f64>()) {
            prop_assume!(re.is_finite() && im.is_finite());
            let z = C64::new(re, im);
            let back = parse_complex(&format_complex(z)).unwrap();
            prop_assert_eq!(back.re.to_bits(), z.re.to_bits());
            prop_assert_eq!(back.im.abs().to_bits(), z.im.abs().to_bits());
        }

        #[test]
        fn nd_csv_round_trips(vals in proptest::collection::vec(-1e3f64..1e3, 18)) {
            let m = NdMatrix::new(DMatrix::from_fn(3, 3, |i, j| C64::new(vals[3 * i + j], vals[9 + 3 * i + j]))).unwrap();
            prop_assert_eq!(NdMatrix::from_csv(&m.to_csv()).unwrap(), m);
        }
    }
}
