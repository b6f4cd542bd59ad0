//! On-disk formats.
//!
//! * Frames: binary PGM (`P5`, maxval 65535, big-endian 16-bit samples, rows
//!   top to bottom) with a JSON sidecar of the same stem. Stored samples are
//!   `round(value / gain)`; `gain` is 1 unless the frame peak exceeds 65535,
//!   in which case it is the smallest power of two that brings it in range.
//! * Correlation matrices: `<stem>.bin` holds `n × n` little-endian `f64` in
//!   row-major order, `<stem>.json` holds `{n, dx, axis, trace_norm}`.
//! * Signed images: little-endian grayscale PFM (`Pf`, scale `-1.0`, rows
//!   bottom to top), with an optional 16-bit PGM preview.
//! * Tables: CSV with a header row.
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coherence::CorrelationMatrix;
use crate::config::hex;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::interferometer::{Frame, FrameMeta, ValidRegion};
use crate::reconstruct::FieldAxis;

const PGM_MAX: f64 = 65535.0;

/// Write `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| Error::format(path, e.to_string()))
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Parse the whitespace-separated header tokens of a Netpbm-style file and
/// return them with the offset of the first data byte.
fn header_tokens(bytes: &[u8], count: usize, path: &Path) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::format(path, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the data.
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(Error::format(path, "missing data after header"));
    }
    Ok((tokens, i + 1))
}

fn parse<T: std::str::FromStr>(token: &str, what: &str, path: &Path) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::format(path, format!("bad {what} `{token}`")))
}

/// Encode 16-bit samples as `P5`.
pub fn encode_pgm16(samples: &Array2<u16>) -> Vec<u8> {
    let (h, w) = samples.dim();
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    out.reserve(2 * w * h);
    for v in samples.iter() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8], path: &Path) -> Result<Array2<u16>> {
    let (t, offset) = header_tokens(bytes, 4, path)?;
    if t[0] != "P5" {
        return Err(Error::format(path, format!("expected P5 magic, found `{}`", t[0])));
    }
    let w: usize = parse(&t[1], "width", path)?;
    let h: usize = parse(&t[2], "height", path)?;
    let maxval: u32 = parse(&t[3], "maxval", path)?;
    if maxval != 65535 {
        return Err(Error::format(path, format!("expected maxval 65535, found {maxval}")));
    }
    let data = &bytes[offset..];
    if data.len() != 2 * w * h {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", 2 * w * h, data.len()),
        ));
    }
    let v: Vec<u16> = data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Array2::from_shape_vec((h, w), v).map_err(|e| Error::format(path, e.to_string()))
}

/// JSON sidecar of a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSidecar {
    pub phi: f64,
    pub m: f64,
    pub bs_present: bool,
    pub seed: Option<u64>,
    pub counts_scale: f64,
    pub pixel_pitch: f64,
    pub width: usize,
    pub height: usize,
    pub valid_region: ValidRegion,
    /// Counts per stored PGM unit.
    pub gain: f64,
    pub exposure_tag: String,
}

/// Write `<stem>.pgm` and `<stem>.json`. Values are rounded to whole stored
/// units and negative values to zero.
pub fn write_frame(stem: &Path, frame: &Frame) -> Result<()> {
    let peak = frame.max().max(0.0);
    let gain = if peak > PGM_MAX {
        (peak / PGM_MAX).log2().ceil().exp2()
    } else {
        1.0
    };
    let samples = frame.values.mapv(|v| (v / gain).round().clamp(0.0, PGM_MAX) as u16);
    let m = &frame.meta;
    let sidecar = FrameSidecar {
        phi: m.phi,
        m: m.m,
        bs_present: m.bs_present,
        seed: m.seed,
        counts_scale: m.counts_scale,
        pixel_pitch: m.pixel_pitch,
        width: frame.width(),
        height: frame.height(),
        valid_region: m.valid_region,
        gain,
        exposure_tag: m.exposure_tag.clone(),
    };
    write_atomic(&with_ext(stem, "pgm"), &encode_pgm16(&samples))?;
    write_json(&with_ext(stem, "json"), &sidecar)
}

pub fn read_frame(stem: &Path) -> Result<Frame> {
    let pgm_path = with_ext(stem, "pgm");
    let json_path = with_ext(stem, "json");
    let samples = decode_pgm16(&read(&pgm_path)?, &pgm_path)?;
    let s: FrameSidecar = read_json(&json_path)?;
    if samples.dim() != (s.height, s.width) {
        return Err(Error::DataContract(format!(
            "{}: sidecar says {}x{}, image is {}x{}",
            stem.display(),
            s.width,
            s.height,
            samples.ncols(),
            samples.nrows()
        )));
    }
    if !(s.gain.is_finite() && s.gain > 0.0) {
        return Err(Error::format(&json_path, format!("gain must be positive, got {}", s.gain)));
    }
    let r = s.valid_region;
    if r.x1 > s.width || r.y1 > s.height {
        return Err(Error::format(&json_path, "valid region exceeds the frame"));
    }
    Ok(Frame {
        values: samples.mapv(|v| v as f64 * s.gain),
        meta: FrameMeta {
            phi: s.phi,
            m: s.m,
            bs_present: s.bs_present,
            seed: s.seed,
            counts_scale: s.counts_scale,
            pixel_pitch: s.pixel_pitch,
            exposure_tag: s.exposure_tag,
            valid_region: r,
        },
    })
}

/// JSON header of a correlation-matrix binary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixHeader {
    pub n: usize,
    pub dx: f64,
    pub axis: FieldAxis,
    pub trace_norm: f64,
}

pub fn write_matrix(stem: &Path, w: &CorrelationMatrix, axis: FieldAxis) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * w.values.len());
    for v in w.values.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&with_ext(stem, "bin"), &bytes)?;
    write_json(
        &with_ext(stem, "json"),
        &MatrixHeader {
            n: w.n(),
            dx: w.grid.dx(),
            axis,
            trace_norm: w.trace_norm,
        },
    )
}

pub fn read_matrix(stem: &Path) -> Result<(CorrelationMatrix, FieldAxis)> {
    let bin = with_ext(stem, "bin");
    let h: MatrixHeader = read_json(&with_ext(stem, "json"))?;
    let bytes = read(&bin)?;
    if bytes.len() != 8 * h.n * h.n {
        return Err(Error::LengthMismatch {
            expected: 8 * h.n * h.n,
            actual: bytes.len(),
        });
    }
    let v: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let values = Array2::from_shape_vec((h.n, h.n), v).map_err(|e| Error::format(&bin, e.to_string()))?;
    let grid = Grid1D::new(h.n, h.dx)?;
    Ok((CorrelationMatrix::from_values(grid, values, h.trace_norm)?, h.axis))
}

/// JSON header of a mode-matrix binary: `n` samples by `k` modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesHeader {
    pub n: usize,
    pub k: usize,
    pub dx: f64,
}

/// `<stem>.bin` (row-major little-endian `f64`, `n` rows of `k` modes) and
/// `<stem>.json`.
pub fn write_modes(stem: &Path, grid: &Grid1D, modes: &Array2<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * modes.len());
    for v in modes.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&with_ext(stem, "bin"), &bytes)?;
    write_json(
        &with_ext(stem, "json"),
        &ModesHeader {
            n: modes.nrows(),
            k: modes.ncols(),
            dx: grid.dx(),
        },
    )
}

pub fn read_modes(stem: &Path) -> Result<(Grid1D, Array2<f64>)> {
    let bin = with_ext(stem, "bin");
    let h: ModesHeader = read_json(&with_ext(stem, "json"))?;
    let bytes = read(&bin)?;
    if bytes.len() != 8 * h.n * h.k {
        return Err(Error::LengthMismatch {
            expected: 8 * h.n * h.k,
            actual: bytes.len(),
        });
    }
    let v: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let modes = Array2::from_shape_vec((h.n, h.k), v).map_err(|e| Error::format(&bin, e.to_string()))?;
    Ok((Grid1D::new(h.n, h.dx)?, modes))
}

/// Grayscale PFM; `values[(0, _)]` is the top row of the image.
pub fn encode_pfm(values: &Array2<f64>) -> Vec<u8> {
    let (h, w) = values.dim();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for r in (0..h).rev() {
        for c in 0..w {
            out.extend_from_slice(&(values[(r, c)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let (t, offset) = header_tokens(bytes, 4, path)?;
    if t[0] != "Pf" {
        return Err(Error::format(path, format!("expected grayscale Pf magic, found `{}`", t[0])));
    }
    let w: usize = parse(&t[1], "width", path)?;
    let h: usize = parse(&t[2], "height", path)?;
    let scale: f64 = parse(&t[3], "scale", path)?;
    let data = &bytes[offset..];
    if data.len() != 4 * w * h {
        return Err(Error::format(
            path,
            format!("expected {} data bytes, found {}", 4 * w * h, data.len()),
        ));
    }
    let little = scale < 0.0;
    let mut out = Array2::zeros((h, w));
    for (i, c) in data.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        out[(h - 1 - i / w, i % w)] = v as f64;
    }
    Ok(out)
}

pub fn write_pfm(path: &Path, values: &Array2<f64>) -> Result<()> {
    write_atomic(path, &encode_pfm(values))
}

pub fn read_pfm(path: &Path) -> Result<Array2<f64>> {
    decode_pfm(&read(path)?, path)
}

/// 16-bit preview of a signed image: `-max|v|` maps to 0, zero to mid-grey.
pub fn write_signed_preview(path: &Path, values: &Array2<f64>) -> Result<()> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.5 * PGM_MAX / peak } else { 0.0 };
    let samples = values.mapv(|v| (0.5 * PGM_MAX + v * scale).round().clamp(0.0, PGM_MAX) as u16);
    write_atomic(path, &encode_pgm16(&samples))
}

/// Serialize rows to CSV bytes with the given header.
pub fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::DataContract(e.to_string()))
}

pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}

pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
        _ => Error::Csv(e),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Record of what a command wrote, for reproducibility checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    /// Path relative to the output directory to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Manifest {
            command: command.to_string(),
            config_sha256,
            artifacts: BTreeMap::new(),
        }
    }

    /// Hash `path` (inside `root`) into the manifest.
    pub fn record(&mut self, root: &Path, path: &Path) -> Result<()> {
        let digest = hex(&Sha256::digest(read(path)?));
        let key = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
        self.artifacts.insert(key, digest);
        Ok(())
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join(format!("manifest_{}.json", self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: Array2<f64>) -> Frame {
        let (h, w) = values.dim();
        Frame {
            values,
            meta: FrameMeta {
                phi: 0.25,
                m: 2.0,
                bs_present: true,
                seed: Some(5),
                counts_scale: 1000.0,
                pixel_pitch: 4.6e-6,
                exposure_tag: "t".into(),
                valid_region: ValidRegion::full(w, h),
            },
        }
    }

    #[test]
    fn pgm_layout_is_big_endian() {
        let s = Array2::from_shape_vec((1, 2), vec![0x0102u16, 0xA0B0]).unwrap();
        let bytes = encode_pgm16(&s);
        assert_eq!(&bytes[..13], b"P5\n2 1\n65535\n");
        assert_eq!(&bytes[13..], &[0x01, 0x02, 0xA0, 0xB0]);
        assert_eq!(decode_pgm16(&bytes, Path::new("x")).unwrap(), s);
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let mut bytes = b"P5\n# camera\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 7]);
        assert_eq!(decode_pgm16(&bytes, Path::new("x")).unwrap()[(0, 0)], 7);
        assert!(decode_pgm16(b"P2\n1 1\n65535\n\0\0", Path::new("x")).is_err());
        assert!(decode_pgm16(b"P5\n2 1\n65535\n\0\0", Path::new("x")).is_err());
    }

    #[test]
    fn frame_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("f");
        let f = frame(Array2::from_shape_fn((3, 4), |(r, c)| (r * 10 + c) as f64));
        write_frame(&stem, &f).unwrap();
        let back = read_frame(&stem).unwrap();
        assert_eq!(back, f);
        let first = fs::read(dir.path().join("f.pgm")).unwrap();
        write_frame(&stem, &back).unwrap();
        assert_eq!(fs::read(dir.path().join("f.pgm")).unwrap(), first);
    }

    #[test]
    fn bright_frames_use_gain() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("g");
        let f = frame(Array2::from_shape_vec((2, 2), vec![0.0, 1000.0, 2000.0, 250000.0]).unwrap());
        write_frame(&stem, &f).unwrap();
        let s: FrameSidecar = read_json(&dir.path().join("g.json")).unwrap();
        assert_eq!(s.gain, 4.0);
        let back = read_frame(&stem).unwrap();
        assert_eq!(back.values, f.values);
        let bytes = fs::read(dir.path().join("g.json")).unwrap();
        write_frame(&stem, &back).unwrap();
        assert_eq!(fs::read(dir.path().join("g.json")).unwrap(), bytes);
    }

    #[test]
    fn matrix_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid1D::new(6, 0.3).unwrap();
        let v = Array2::from_shape_fn((6, 6), |(j, k)| 1.0 / (1.0 + (j as f64 - k as f64).abs()) + 1e-17 * (j * k) as f64);
        let w = CorrelationMatrix::normalized(grid, v).unwrap();
        let stem = dir.path().join("w_x");
        write_matrix(&stem, &w, FieldAxis::X).unwrap();
        let (back, axis) = read_matrix(&stem).unwrap();
        assert_eq!(axis, FieldAxis::X);
        assert_eq!(back, w);
        assert_eq!(fs::metadata(dir.path().join("w_x.bin")).unwrap().len(), 8 * 36);
    }

    #[test]
    fn modes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid1D::new(4, 0.5).unwrap();
        let m = Array2::from_shape_fn((4, 3), |(j, i)| (j as f64 - 1.5) * (i as f64 + 0.1));
        let stem = dir.path().join("o");
        write_modes(&stem, &grid, &m).unwrap();
        assert_eq!(read_modes(&stem).unwrap(), (grid, m));
    }

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = Array2::from_shape_fn((3, 5), |(r, c)| r as f64 - 0.5 * c as f64);
        let p = dir.path().join("m.pfm");
        write_pfm(&p, &v).unwrap();
        assert_eq!(read_pfm(&p).unwrap(), v);
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"Pf\n5 3\n-1.0\n"));
        // Bottom row first.
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 2.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_csv(&p, &["index", "lambda"], [(0usize, 0.5f64), (1, 0.25)]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "index,lambda\n0,0.5\n1,0.25\n");
        let rows: Vec<(usize, f64)> = read_csv(&p).unwrap();
        assert_eq!(rows, vec![(0, 0.5), (1, 0.25)]);
    }

    #[test]
    fn manifest_is_sorted_and_relative() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("test", "abc".into());
        for name in ["b.txt", "a.txt"] {
            let p = dir.path().join(name);
            write_atomic(&p, name.as_bytes()).unwrap();
            m.record(dir.path(), &p).unwrap();
        }
        let keys: Vec<&String> = m.artifacts.keys().collect();
        assert_eq!(keys, vec!["a.txt", "b.txt"]);
        let path = m.write(dir.path()).unwrap();
        let back: Manifest = read_json(&path).unwrap();
        assert_eq!(back, m);
    }
}
