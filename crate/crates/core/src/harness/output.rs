//! Snapshot and time-series files.
//!
//! Raw field file: a 64-byte ASCII header `FCHF1 m=<m> L=<L> time=<t>`,
//! space padded and terminated by `\n` as its 64th byte, followed by `m*m`
//! little-endian `f64` values with `i` fastest. Numbers in the header use
//! the shortest representation that parses back to the same `f64`.
//!
//! Image: binary 8-bit PGM (`P5`), with `y` pointing up (the first image row
//! is `j = m - 1`). Gray levels scale linearly from the field minimum (0) to
//! its maximum (255); a constant field is drawn at level 128. A sidecar text
//! file next to the image records `min`, `max` and `flat`.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{FchError, Result};
use crate::grid::{CellField, GridSpec};
use crate::scheme::{RunHooks, SeriesRow};

pub const HEADER_LEN: usize = 64;
pub const SERIES_HEADER: &str = "step,time,energy,energy_convex,energy_concave,mass,psd_iters,residual";
const MAGIC: &str = "FCHF1";

fn header(grid: &GridSpec, time: f64) -> Result<[u8; HEADER_LEN]> {
    let text = format!("{MAGIC} m={} L={} time={}", grid.m(), grid.length(), time);
    if text.len() > HEADER_LEN - 1 {
        return Err(FchError::Config(format!("header `{text}` exceeds {HEADER_LEN} bytes")));
    }
    let mut out = [b' '; HEADER_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[HEADER_LEN - 1] = b'\n';
    Ok(out)
}

/// Serializes a field in the raw format.
pub fn encode_raw(phi: &CellField, time: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * phi.values().len());
    buf.extend_from_slice(&header(phi.grid(), time)?);
    for v in phi.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

/// Parses the raw format; `path` only labels errors.
pub fn decode_raw(bytes: &[u8], path: &Path) -> Result<(CellField, f64)> {
    let bad = |reason: String| FchError::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN || bytes[HEADER_LEN - 1] != b'\n' {
        return Err(bad("missing 64-byte header".into()));
    }
    let head = std::str::from_utf8(&bytes[..HEADER_LEN - 1]).map_err(|_| bad("header is not ASCII".into()))?;
    let mut words = head.split_whitespace();
    if words.next() != Some(MAGIC) {
        return Err(bad(format!("expected magic {MAGIC}")));
    }
    let mut field = |key: &str| -> Result<&str> {
        words
            .next()
            .and_then(|w| w.strip_prefix(key))
            .ok_or_else(|| bad(format!("expected `{key}` in header")))
    };
    let m: usize = field("m=")?.parse().map_err(|e| bad(format!("m: {e}")))?;
    let length: f64 = field("L=")?.parse().map_err(|e| bad(format!("L: {e}")))?;
    let time: f64 = field("time=")?.parse().map_err(|e| bad(format!("time: {e}")))?;
    let grid = GridSpec::new(m, length).map_err(|e| bad(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(bad(format!(
            "expected {} data bytes for m = {m}, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((CellField::from_values(grid, values)?, time))
}

pub fn write_raw(phi: &CellField, time: f64, path: &Path) -> Result<()> {
    fs::write(path, encode_raw(phi, time)?).map_err(|e| FchError::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<(CellField, f64)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FchError::io(path, e))?;
    decode_raw(&bytes, path)
}

/// Field range used to scale an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageRange {
    pub min: f64,
    pub max: f64,
    pub flat: bool,
}

/// Encodes the PGM image and returns it with the range it was scaled by.
pub fn encode_pgm(phi: &CellField) -> (Vec<u8>, ImageRange) {
    let v = phi.values();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let flat = !(max > min);
    let m = phi.grid().m();
    let mut out = format!("P5\n{m} {m}\n255\n").into_bytes();
    for j in (0..m).rev() {
        for i in 0..m {
            let level = if flat {
                128
            } else {
                (255.0 * (phi[(i, j)] - min) / (max - min)).round().clamp(0.0, 255.0) as u8
            };
            out.push(level);
        }
    }
    (out, ImageRange { min, max, flat })
}

pub fn range_sidecar(range: &ImageRange) -> String {
    format!("min={}\nmax={}\nflat={}\n", range.min, range.max, range.flat)
}

/// Writes `<base>.fchf`, `<base>.pgm` and `<base>.pgm.txt`.
pub fn write_snapshot(phi: &CellField, time: f64, base: &Path) -> Result<()> {
    let with_ext = |ext: &str| {
        let mut s = base.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    write_raw(phi, time, &with_ext(".fchf"))?;
    let (pgm, range) = encode_pgm(phi);
    let image = with_ext(".pgm");
    fs::write(&image, pgm).map_err(|e| FchError::io(&image, e))?;
    let side = with_ext(".pgm.txt");
    fs::write(&side, range_sidecar(&range)).map_err(|e| FchError::io(&side, e))
}

pub fn series_line(row: &SeriesRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.step,
        row.time,
        row.energy,
        row.energy_convex,
        row.energy_concave,
        row.mass,
        row.psd_iters,
        row.residual
    )
}

/// Writes a complete series CSV.
pub fn write_series(rows: &[SeriesRow], path: &Path) -> Result<()> {
    let mut text = String::from(SERIES_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&series_line(row));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| FchError::io(path, e))
}

/// [`RunHooks`] writing snapshots as `<dir>/phi_<step>` and streaming the
/// series to `<dir>/series.csv`.
pub struct FileOutput {
    dir: PathBuf,
    series_path: PathBuf,
    series: BufWriter<File>,
}

impl FileOutput {
    /// Creates `dir` if needed and starts a fresh series file.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| FchError::io(dir, e))?;
        let series_path = dir.join("series.csv");
        let file = File::create(&series_path).map_err(|e| FchError::io(&series_path, e))?;
        let mut series = BufWriter::new(file);
        writeln!(series, "{SERIES_HEADER}").map_err(|e| FchError::io(&series_path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            series_path,
            series,
        })
    }

    pub fn snapshot_base(&self, step: usize) -> PathBuf {
        self.dir.join(format!("phi_{step:08}"))
    }

    pub fn series_path(&self) -> &Path {
        &self.series_path
    }

    pub fn finish(mut self) -> Result<()> {
        self.series.flush().map_err(|e| FchError::io(&self.series_path, e))
    }
}

impl RunHooks for FileOutput {
    fn snapshot(&mut self, step: usize, time: f64, phi: &CellField) -> Result<()> {
        write_snapshot(phi, time, &self.snapshot_base(step))
    }

    fn series(&mut self, row: &SeriesRow) -> Result<()> {
        writeln!(self.series, "{}", series_line(row)).map_err(|e| FchError::io(&self.series_path, e))
    }
}
