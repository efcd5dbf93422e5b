//! Series files.
//!
//! CSV: `#`-prefixed header lines `delta=`, `t_end=`, `seed=` and `meta=`
//! (JSON), then a column `increment` with one value per row.
//!
//! Binary: `MSM1`, format version (u32), n (u64), Δ (f64), meta length
//! (u32), meta JSON, then n doubles. All little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{IncrementSeries, SeriesMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSM1";
const VERSION: u32 = 1;

pub fn write_csv<W: Write>(series: &IncrementSeries, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "# delta={}", series.delta)?;
    writeln!(out, "# t_end={}", series.t_end)?;
    match series.meta.seed {
        Some(s) => writeln!(out, "# seed={s}")?,
        None => writeln!(out, "# seed=")?,
    }
    writeln!(out, "# meta={}", serde_json::to_string(&series.meta)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["increment"])?;
    for x in &series.increments {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV layout. `delta` is used when the file has no `delta=`
/// header line; a file that has one must agree with it.
pub fn read_csv<R: Read>(input: R, delta: Option<f64>) -> Result<IncrementSeries> {
    let mut reader = BufReader::new(input);
    let mut file_delta = None;
    let mut meta = None;
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let Some(rest) = line.trim_end().strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let rest = rest.trim();
        if let Some(v) = rest.strip_prefix("delta=") {
            file_delta = Some(
                v.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad delta '{v}': {e}")))?,
            );
        } else if let Some(v) = rest.strip_prefix("meta=") {
            meta = Some(serde_json::from_str::<SeriesMeta>(v)?);
        }
    }
    reader.read_to_string(&mut body)?;
    let delta = match (file_delta, delta) {
        (Some(a), Some(b)) if (a - b).abs() > 1e-12 * a.abs() => {
            return Err(Error::Parse(format!(
                "file step {a} disagrees with requested step {b}"
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Parse("no step size: add '# delta=' or pass one".into())),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let mut increments = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = rec
            .get(0)
            .ok_or_else(|| Error::Parse("empty row".into()))?;
        increments.push(
            field
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad increment '{field}': {e}")))?,
        );
    }
    IncrementSeries::new(increments, delta, meta.unwrap_or_else(SeriesMeta::observed))
}

pub fn write_binary<W: Write>(series: &IncrementSeries, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let meta = serde_json::to_vec(&series.meta)?;
    let meta_len = u32::try_from(meta.len())
        .map_err(|_| Error::Invalid("metadata too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(series.increments.len() as u64).to_le_bytes())?;
    out.write_all(&series.delta.to_le_bytes())?;
    out.write_all(&meta_len.to_le_bytes())?;
    out.write_all(&meta)?;
    for x in &series.increments {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_binary<R: Read>(input: R) -> Result<IncrementSeries> {
    let mut r = BufReader::new(input);
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not an MSM1 file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported format version {version}")));
    }
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let delta = f64::from_le_bytes(read_array(&mut r)?);
    let meta_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta: SeriesMeta = serde_json::from_slice(&meta)?;
    let mut increments = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        increments.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    IncrementSeries::new(increments, delta, meta)
}

fn is_binary_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("bin" | "msm" | "msm1")
    )
}

/// Writes binary for `.bin`/`.msm`/`.msm1` paths and CSV otherwise.
pub fn write_series(series: &IncrementSeries, path: &Path) -> Result<()> {
    let f = File::create(path)?;
    if is_binary_path(path) {
        write_binary(series, f)
    } else {
        write_csv(series, f)
    }
}

/// Reads either format, recognising binary files by their magic bytes.
pub fn read_series(path: &Path, delta: Option<f64>) -> Result<IncrementSeries> {
    let mut f = File::open(path)?;
    let mut head = [0u8; 4];
    let got = f.read(&mut head)?;
    let f = File::open(path)?;
    if got == 4 && &head == MAGIC {
        read_binary(f)
    } else {
        read_csv(f, delta)
    }
}
