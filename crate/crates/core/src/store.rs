//! Binary persistence of sample grids and series checkpoints.
//!
//! Grid file, little-endian:
//!
//! ```text
//! 0   "HZGRID01"
//! 8   t_min f64 | t_max f64 | step f64
//! 32  cfg_fingerprint u64 | sample_count u64 | checksum u64
//! 56  sample_count × f64
//! ```
//!
//! Checkpoint file:
//!
//! ```text
//! 0   "HZCKPT01"
//! 8   kind u32 | k u32 | count u64 | checksum u64
//! 32  count × (t f64, sum f64, compensation f64)
//! ```
//!
//! Checksums are CRC-64/XZ over the payload. Files are written to a
//! temporary sibling and renamed into place.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::checksum::crc64;
use crate::error::{Error, Result};
use crate::moments::{Checkpoint, SeriesKind, ZSampleGrid};
use crate::special::EvalConfig;

pub const GRID_MAGIC: &[u8; 8] = b"HZGRID01";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HZCKPT01";
pub const GRID_HEADER_LEN: usize = 56;
pub const CHECKPOINT_HEADER_LEN: usize = 32;

fn corrupt(path: &Path, detail: impl Into<String>) -> Error {
    Error::Corruption { path: path.to_path_buf(), detail: detail.into() }
}

fn incompatible(path: &Path, detail: impl Into<String>) -> Error {
    Error::Incompatible { path: path.to_path_buf(), detail: detail.into() }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to `path` atomically (temporary file, fsync, rename).
pub fn commit(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    let res = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

pub fn encode_grid(grid: &ZSampleGrid) -> Vec<u8> {
    let mut payload = Vec::with_capacity(8 * grid.len());
    for v in grid.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + payload.len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&grid.t_min().to_le_bytes());
    out.extend_from_slice(&grid.t_max().to_le_bytes());
    out.extend_from_slice(&grid.step().to_le_bytes());
    out.extend_from_slice(&grid.cfg_fingerprint().to_le_bytes());
    out.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc64(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn decode_grid(path: &Path, b: &[u8]) -> Result<ZSampleGrid> {
    if b.len() < 8 {
        return Err(corrupt(path, format!("file is {} bytes, shorter than the magic tag", b.len())));
    }
    if &b[..8] != GRID_MAGIC {
        return Err(incompatible(path, format!("unrecognized tag {:?}", String::from_utf8_lossy(&b[..8]))));
    }
    if b.len() < GRID_HEADER_LEN {
        return Err(corrupt(path, format!("header truncated at {} of {GRID_HEADER_LEN} bytes", b.len())));
    }
    let (t_min, t_max, step) = (f64_at(b, 8), f64_at(b, 16), f64_at(b, 24));
    let fingerprint = u64_at(b, 32);
    let count = u64_at(b, 40);
    let checksum = u64_at(b, 48);
    let want = count
        .checked_mul(8)
        .and_then(|n| n.checked_add(GRID_HEADER_LEN as u64))
        .ok_or_else(|| corrupt(path, format!("sample count {count} overflows")))?;
    if b.len() as u64 != want {
        return Err(corrupt(
            path,
            format!("payload bytes [{GRID_HEADER_LEN}, {want}) expected, file has {} bytes", b.len()),
        ));
    }
    let payload = &b[GRID_HEADER_LEN..];
    if crc64(payload) != checksum {
        return Err(corrupt(
            path,
            format!("checksum mismatch over payload bytes [{GRID_HEADER_LEN}, {want})"),
        ));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    ZSampleGrid::from_parts(t_min, t_max, step, values, fingerprint)
        .map_err(|e| corrupt(path, format!("header inconsistent with payload: {e}")))
}

pub fn save_grid(grid: &ZSampleGrid, path: &Path) -> Result<()> {
    commit(path, &encode_grid(grid))
}

pub fn load_grid(path: &Path) -> Result<ZSampleGrid> {
    decode_grid(path, &fs::read(path)?)
}

/// Loads the grid at `path`, appends samples up to `new_t_max` and commits
/// the result. The stored samples are reused as they are.
pub fn extend_grid(path: &Path, new_t_max: f64, cfg: &EvalConfig) -> Result<ZSampleGrid> {
    let mut grid = load_grid(path)?;
    if grid.cfg_fingerprint() != cfg.fingerprint() {
        return Err(incompatible(
            path,
            format!(
                "grid built with config {:016x}, extension requested with {:016x}",
                grid.cfg_fingerprint(),
                cfg.fingerprint()
            ),
        ));
    }
    if new_t_max > grid.t_max() {
        grid.extend(new_t_max, cfg)?;
        save_grid(&grid, path)?;
    }
    Ok(grid)
}

/// File name of the cached grid for an evaluation config and step.
pub fn grid_cache_name(cfg_fingerprint: u64, step: f64) -> String {
    format!("grid_{cfg_fingerprint:016x}_{:016x}.bin", step.to_bits())
}

/// Loads `path` when it holds a compatible grid covering `[t_min, t_max]`
/// with the given step, extends it when it only falls short at the top, and
/// builds and stores a fresh grid when there is no file.
pub fn load_or_build(path: &Path, t_min: f64, t_max: f64, step: f64, cfg: &EvalConfig) -> Result<ZSampleGrid> {
    if !path.exists() {
        let g = crate::moments::build_grid(t_min, t_max, step, cfg)?;
        save_grid(&g, path)?;
        return Ok(g);
    }
    let g = load_grid(path)?;
    if g.t_min() != t_min || g.step() != step {
        return Err(incompatible(
            path,
            format!("cached grid starts at {} with step {}, need {t_min} / {step}", g.t_min(), g.step()),
        ));
    }
    if g.t_max() < t_max {
        return extend_grid(path, t_max, cfg);
    }
    if g.cfg_fingerprint() != cfg.fingerprint() {
        return Err(incompatible(path, "cached grid was built with a different evaluation config"));
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointFile {
    pub kind: SeriesKind,
    pub k: u32,
    pub ladder: Vec<Checkpoint>,
}

fn check_ladder(ladder: &[Checkpoint]) -> Result<()> {
    if ladder.windows(2).any(|w| !(w[0].t < w[1].t)) {
        return Err(Error::Precondition("checkpoint ladder not strictly increasing".into()));
    }
    Ok(())
}

pub fn encode_checkpoints(file: &CheckpointFile) -> Result<Vec<u8>> {
    check_ladder(&file.ladder)?;
    let mut payload = Vec::with_capacity(24 * file.ladder.len());
    for c in &file.ladder {
        payload.extend_from_slice(&c.t.to_le_bytes());
        payload.extend_from_slice(&c.sum.to_le_bytes());
        payload.extend_from_slice(&c.compensation.to_le_bytes());
    }
    let mut out = Vec::with_capacity(CHECKPOINT_HEADER_LEN + payload.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&file.kind.code().to_le_bytes());
    out.extend_from_slice(&file.k.to_le_bytes());
    out.extend_from_slice(&(file.ladder.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc64(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoints(path: &Path, b: &[u8]) -> Result<CheckpointFile> {
    if b.len() < 8 || &b[..8] != CHECKPOINT_MAGIC {
        return Err(incompatible(path, "not a checkpoint file"));
    }
    if b.len() < CHECKPOINT_HEADER_LEN {
        return Err(corrupt(path, format!("header truncated at {} of {CHECKPOINT_HEADER_LEN} bytes", b.len())));
    }
    let kind = SeriesKind::from_code(u32_at(b, 8))
        .ok_or_else(|| incompatible(path, format!("unknown series kind {}", u32_at(b, 8))))?;
    let k = u32_at(b, 12);
    let count = u64_at(b, 16);
    let checksum = u64_at(b, 24);
    let want = count
        .checked_mul(24)
        .and_then(|n| n.checked_add(CHECKPOINT_HEADER_LEN as u64))
        .ok_or_else(|| corrupt(path, format!("checkpoint count {count} overflows")))?;
    if b.len() as u64 != want {
        return Err(corrupt(
            path,
            format!("payload bytes [{CHECKPOINT_HEADER_LEN}, {want}) expected, file has {} bytes", b.len()),
        ));
    }
    let payload = &b[CHECKPOINT_HEADER_LEN..];
    if crc64(payload) != checksum {
        return Err(corrupt(
            path,
            format!("checksum mismatch over payload bytes [{CHECKPOINT_HEADER_LEN}, {want})"),
        ));
    }
    let ladder: Vec<Checkpoint> = payload
        .chunks_exact(24)
        .map(|c| Checkpoint { t: f64_at(c, 0), sum: f64_at(c, 8), compensation: f64_at(c, 16) })
        .collect();
    check_ladder(&ladder).map_err(|e| corrupt(path, e.to_string()))?;
    Ok(CheckpointFile { kind, k, ladder })
}

pub fn save_checkpoints(file: &CheckpointFile, path: &Path) -> Result<()> {
    commit(path, &encode_checkpoints(file)?)
}

pub fn load_checkpoints(path: &Path) -> Result<CheckpointFile> {
    decode_checkpoints(path, &fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{build_grid, power_series_with_checkpoints, resume_power_series};
    use proptest::prelude::*;

    fn small() -> ZSampleGrid {
        build_grid(1.0, 100.0, 0.05, &EvalConfig::default()).unwrap()
    }

    fn same_bits(a: &ZSampleGrid, b: &ZSampleGrid) -> bool {
        a.len() == b.len() && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
    }

    #[test]
    fn round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        let g = small();
        save_grid(&g, &p).unwrap();
        let h = load_grid(&p).unwrap();
        assert_eq!(g, h);
        assert!(same_bits(&g, &h));
        assert_eq!(&fs::read(&p).unwrap()[..8], b"HZGRID01");
    }

    #[test]
    fn extend_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        let cfg = EvalConfig::default();
        let g = small();
        save_grid(&g, &p).unwrap();
        extend_grid(&p, 200.0, &cfg).unwrap();
        let h = load_grid(&p).unwrap();
        assert_eq!(h.t_max(), 200.0);
        assert!(h.values()[..g.len()].iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let other = EvalConfig::oracle(1e-10);
        assert!(matches!(extend_grid(&p, 300.0, &other), Err(Error::Incompatible { .. })));
    }

    #[test]
    fn flipped_byte_names_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        save_grid(&small(), &p).unwrap();
        let mut b = fs::read(&p).unwrap();
        b[GRID_HEADER_LEN + 100] ^= 0x01;
        fs::write(&p, &b).unwrap();
        match load_grid(&p) {
            Err(Error::Corruption { detail, .. }) => assert!(detail.contains("[56,"), "{detail}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_file_fails_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        save_grid(&small(), &p).unwrap();
        let b = fs::read(&p).unwrap();
        for cut in [4, 30, GRID_HEADER_LEN + 3, b.len() - 8] {
            fs::write(&p, &b[..cut]).unwrap();
            assert!(load_grid(&p).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn unknown_tag_incompatible() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        let mut b = encode_grid(&small());
        b[7] = b'2';
        fs::write(&p, &b).unwrap();
        assert!(matches!(load_grid(&p), Err(Error::Incompatible { .. })));
    }

    #[test]
    fn checkpoint_resume_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let g = small();
        let (full, cps) = power_series_with_checkpoints(SeriesKind::Ik, 1, &g, &[10.0, 50.0]).unwrap();
        save_checkpoints(&CheckpointFile { kind: SeriesKind::Ik, k: 1, ladder: cps.clone() }, &p).unwrap();
        let back = load_checkpoints(&p).unwrap();
        assert_eq!(back.ladder, cps);
        let cp = back.ladder[1];
        let resumed = resume_power_series(back.kind, back.k, &g, &cp).unwrap();
        let off = g.index_of(cp.t).unwrap();
        for (i, v) in resumed.values().iter().enumerate().skip(1) {
            assert_eq!(v.to_bits(), full.values()[off + i].to_bits());
        }
    }

    #[test]
    fn decreasing_ladder_rejected() {
        let c = |t| Checkpoint { t, sum: 0.0, compensation: 0.0 };
        let f = CheckpointFile { kind: SeriesKind::Fk, k: 1, ladder: vec![c(2.0), c(1.0)] };
        assert!(encode_checkpoints(&f).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_payload_flip_detected(pos in 0usize..800, bit in 0u8..8) {
            let g = ZSampleGrid::from_parts(1.0, 10.95, 0.05, (0..200).map(|i| (i as f64).sin()).collect(), 7).unwrap();
            let mut b = encode_grid(&g);
            b[GRID_HEADER_LEN + pos.min(8 * 200 - 1)] ^= 1 << bit;
            prop_assert!(matches!(decode_grid(Path::new("x"), &b), Err(Error::Corruption { .. })), "flip not detected");
        }
    }
}
