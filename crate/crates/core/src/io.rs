//! File formats: datasets as CSV, observed matrices as MatrixMarket
//! coordinate files, dense arrays in a small binary layout, and resampled
//! estimates as CSV.
//!
//! Dense binary layout, all little endian: the magic bytes `SSDM`, a `u32`
//! version (1), `u64` rows, `u64` columns, then `rows * cols` `f64` values
//! in row-major order. A low-rank estimate is three such arrays back to
//! back: `U`, the singular values as a column, and `V`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, ObservedMatrix};
use crate::error::{Error, Result};
use crate::matcomp::LowRankEstimate;

const MAGIC: &[u8; 4] = b"SSDM";
const VERSION: u32 = 1;

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))
}

/// Reads a dataset from CSV with a header row. Every column is a feature
/// except `response`, when given.
pub fn read_dataset_csv<R: Read>(reader: R, response: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let target = match response {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("no column named `{name}`")))?,
        ),
        None => None,
    };
    let d = header.len() - usize::from(target.is_some());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            let v = parse_f64(field, &format!("row {}, column {}", line + 1, j + 1))?;
            if Some(j) == target {
                labels.push(v);
            } else {
                features.push(v);
            }
        }
    }
    Dataset::new(features, d, target.map(|_| labels))
}

/// Writes `x0, x1, ...` feature columns followed by a `y` response column.
pub fn write_dataset_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.d()).map(|j| format!("x{j}")).collect();
    if data.response().is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(y) = data.response() {
            row.push(y[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a real general MatrixMarket coordinate file (1-based indices).
pub fn read_matrix_market<R: Read>(reader: R) -> Result<ObservedMatrix> {
    let mut lines = BufReader::new(reader).lines();
    let banner = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))??;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::Parse(format!("not a MatrixMarket coordinate file: `{banner}`")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::Parse(format!("unsupported field `{}`", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(Error::Parse(format!("unsupported symmetry `{}`", tokens[4])));
    }
    let mut size: Option<(usize, usize, usize)> = None;
    let mut omega = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let index = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad index `{s}` in `{t}`")))
        };
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad size line `{t}`")));
                }
                size = Some((index(fields[0])?, index(fields[1])?, index(fields[2])?));
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(Error::Parse(format!("bad entry line `{t}`")));
                }
                let (i, j) = (index(fields[0])?, index(fields[1])?);
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(Error::Parse(format!("entry ({i}, {j}) outside {m}x{n}")));
                }
                omega.push((i - 1, j - 1));
                values.push(parse_f64(fields[2], "entry value")?);
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if nnz != omega.len() {
        return Err(Error::Parse(format!("size line announces {nnz} entries, found {}", omega.len())));
    }
    ObservedMatrix::new(m, n, omega, values)
}

pub fn write_matrix_market<W: Write>(writer: W, observed: &ObservedMatrix) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", observed.nrows(), observed.ncols(), observed.len())?;
    for (i, j, v) in observed.iter() {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dense<W: Write>(writer: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(m.nrows() as u64).to_le_bytes())?;
    writer.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writer.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dense<R: Read>(reader: &mut R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("bad magic bytes for a dense array".into()));
    }
    let mut b4 = [0u8; 4];
    reader.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported dense array version {version}")));
    }
    let mut b8 = [0u8; 8];
    reader.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    reader.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse(format!("array size {rows}x{cols} overflows")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        reader.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn save_low_rank(path: &Path, est: &LowRankEstimate) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dense(&mut w, est.u())?;
    write_dense(&mut w, &DMatrix::from_column_slice(est.rank(), 1, est.sigma().as_slice()))?;
    write_dense(&mut w, est.v())?;
    w.flush()?;
    Ok(())
}

pub fn load_low_rank(path: &Path) -> Result<LowRankEstimate> {
    let mut r = BufReader::new(File::open(path)?);
    let u = read_dense(&mut r)?;
    let s = read_dense(&mut r)?;
    let v = read_dense(&mut r)?;
    if s.ncols() != 1 && s.nrows() != 0 {
        return Err(Error::Parse("singular values must be stored as a column".into()));
    }
    LowRankEstimate::new(u, DVector::from_column_slice(s.as_slice()), v)
}

/// One row per resampled estimate, columns `beta0, beta1, ...`.
pub fn write_estimates_csv<W: Write>(writer: W, estimates: &[Vec<f64>]) -> Result<()> {
    let d = estimates.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..d).map(|j| format!("beta{j}")))?;
    for e in estimates {
        if e.len() != d {
            return Err(Error::invalid("estimates of differing dimension"));
        }
        w.write_record(e.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_with_named_response() {
        let ds = Dataset::from_rows(&[vec![1.0, -2.5], vec![0.125, 3.0]], Some(vec![1.0, 0.0])).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        assert_eq!(read_dataset_csv(&buf[..], Some("y")).unwrap(), ds);
        let text = "y,a\n1,2\n0,3\n";
        let back = read_dataset_csv(text.as_bytes(), Some("y")).unwrap();
        assert_eq!(back.features(), &[2.0, 3.0]);
        assert_eq!(back.response().unwrap(), &[1.0, 0.0]);
        assert!(read_dataset_csv(text.as_bytes(), Some("z")).is_err());
        assert!(read_dataset_csv("a\nfoo\n".as_bytes(), None).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let obs = ObservedMatrix::new(3, 2, vec![(0, 1), (2, 0)], vec![1.5, -1e-300]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &obs).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\n1 2 "));
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), obs);
    }

    #[test]
    fn matrix_market_rejects_bad_input() {
        let bad = [
            "%%MatrixMarket matrix array real general\n1 1\n1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1.0\n",
        ];
        for text in bad {
            assert!(read_matrix_market(text.as_bytes()).is_err(), "{text}");
        }
    }

    #[test]
    fn dense_layout_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut buf = Vec::new();
        write_dense(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"SSDM");
        assert_eq!(buf.len(), 4 + 4 + 16 + 6 * 8);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 2.0);
        assert_eq!(read_dense(&mut &buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(read_dense(&mut &buf[..]).is_err());
    }

    #[test]
    fn low_rank_round_trip() {
        let a = DMatrix::from_fn(5, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let b = DMatrix::from_fn(4, 2, |i, j| ((i * j) as f64).cos());
        let est = LowRankEstimate::from_factors(&a, &b, 1e-12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("est.bin");
        save_low_rank(&path, &est).unwrap();
        assert_eq!(load_low_rank(&path).unwrap(), est);
    }

    #[test]
    fn estimates_csv_has_one_row_per_resample() {
        let mut buf = Vec::new();
        write_estimates_csv(&mut buf, &[vec![1.0, 2.0], vec![3.0, 4.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "beta0,beta1\n1,2\n3,4.5\n");
        assert!(write_estimates_csv(Vec::new(), &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
