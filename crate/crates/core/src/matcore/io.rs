//! Matrix file format: a `dim <d>` text container with `re+imj` entries, or
//! the binary `UMAT` container. Readers detect the container by magic bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"UMAT";

/// Reads a matrix file in either container. Only shape is validated here;
/// unitarity is the caller's concern since tolerances differ by use.
pub fn read_matrix_file(path: &Path) -> Result<CMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&bytes).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_matrix(bytes: &[u8]) -> std::result::Result<CMatrix, String> {
    if bytes.starts_with(MAGIC) {
        parse_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8 text: {e}"))?;
        parse_text(text)
    }
}

fn parse_binary(bytes: &[u8]) -> std::result::Result<CMatrix, String> {
    if bytes.len() < 8 {
        return Err("truncated UMAT header".into());
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err("UMAT dimension is zero".into());
    }
    let want = dim
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(16))
        .ok_or("UMAT dimension overflows")?;
    let body = &bytes[8..];
    if body.len() != want {
        return Err(format!(
            "UMAT body has {} bytes, expected {want} for dim {dim}",
            body.len()
        ));
    }
    let vals: Vec<C64> = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(CMatrix::from_row_slice(dim, dim, &vals))
}

fn parse_text(text: &str) -> std::result::Result<CMatrix, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or("empty matrix file")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("dim") {
        return Err(format!("line {ln}: expected `dim <d>` header"));
    }
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(format!("line {ln}: bad dimension"))?;
    if dim == 0 || parts.next().is_some() {
        return Err(format!("line {ln}: bad dimension"));
    }
    let mut vals = Vec::with_capacity(dim * dim);
    for row in 0..dim {
        let (ln, line) = lines
            .next()
            .ok_or(format!("expected {dim} rows, found {row}"))?;
        let before = vals.len();
        for tok in line.split_whitespace() {
            vals.push(parse_complex(tok).map_err(|e| format!("line {ln}: {e}"))?);
        }
        if vals.len() - before != dim {
            return Err(format!(
                "line {ln}: expected {dim} entries, found {}",
                vals.len() - before
            ));
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(format!("line {ln}: trailing content after {dim} rows"));
    }
    Ok(CMatrix::from_row_slice(dim, dim, &vals))
}

/// Parses `re+imj`, `re-imj`, a bare real, or a bare imaginary `imj`.
pub(crate) fn parse_complex(tok: &str) -> std::result::Result<C64, String> {
    let bad = || format!("cannot parse complex entry `{tok}`");
    let s = tok.trim_start_matches('(').trim_end_matches(')');
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not the leading sign or part of an exponent.
    let b = body.as_bytes();
    let split = (1..b.len())
        .rev()
        .find(|&k| (b[k] == b'+' || b[k] == b'-') && !matches!(b[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            let im_str = &body[k..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_str.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(C64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(C64::new(0.0, im))
        }
    }
}

pub(crate) fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

pub fn matrix_to_text(m: &CMatrix) -> String {
    let mut out = format!("dim {}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn write_matrix_text(path: &Path, m: &CMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_text(m)).map_err(|e| Error::io(path, e))
}

pub fn write_matrix_binary(path: &Path, m: &CMatrix) -> Result<()> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(8 + 16 * d * d);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for i in 0..d {
        for j in 0..d {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{haar_unitary, RngHandle};

    #[test]
    fn complex_tokens() {
        assert_eq!(parse_complex("0.5-0.5j").unwrap(), C64::new(0.5, -0.5));
        assert_eq!(parse_complex("1").unwrap(), C64::new(1.0, 0.0));
        assert_eq!(parse_complex("-2j").unwrap(), C64::new(0.0, -2.0));
        assert_eq!(parse_complex("1e-3+2.5E+2j").unwrap(), C64::new(1e-3, 250.0));
        assert_eq!(parse_complex("-1-1e-17j").unwrap(), C64::new(-1.0, -1e-17));
        assert_eq!(parse_complex("(0+1j)").unwrap(), C64::new(0.0, 1.0));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1+xj").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = haar_unitary(4, &mut RngHandle::new(8)).unwrap().into_matrix();
        let back = parse_matrix(matrix_to_text(&m).as_bytes()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.umat");
        let m = haar_unitary(8, &mut RngHandle::new(2)).unwrap().into_matrix();
        write_matrix_binary(&p, &m).unwrap();
        assert_eq!(read_matrix_file(&p).unwrap(), m);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let err = parse_matrix(b"dim 2\n1+0j 0+0j\n0+0j\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(parse_matrix(b"size 2\n").is_err());
        assert!(parse_matrix(b"dim 1\n1\n2\n").is_err());
        assert!(parse_matrix(b"UMAT\x02\x00\x00\x00").is_err());
    }
}
