//! Model persistence and heatmap export.
//!
//! Model file layout, all integers and floats little-endian:
//!
//! ```text
//! magic     4 bytes  "KNNN"
//! version   u16      1
//! header    u32 × 9  D, N, L, S, k_nnn, n, floor policy id, method id, k
//! perm      u32 × D  permuted position → original feature
//! train     f64 × N·D
//! packs     N·S blocks (point-major); block (i, s) holds m = min(n, w_s)
//!           eigenvalues then m eigenvectors of w_s components each
//! checksum  u64      FNV-1a over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{write_values, FeatureMatrix};
use crate::error::{Error, Result};
use crate::index::{FloorPolicy, TrainedModel};
use crate::linalg::EigenPack;
use crate::partition::PartitionPlan;
use crate::scoring::{score, Method, ScoreConfig};
use crate::synth::BBox;

pub const MAGIC: &[u8; 4] = b"KNNN";
pub const VERSION: u16 = 1;

const HEADER_FIELDS: usize = 9;
const HEADER_END: usize = 4 + 2 + 4 * HEADER_FIELDS;

/// A fitted model plus the scorer it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: TrainedModel,
    pub method: Method,
    pub k: usize,
}

impl ModelFile {
    /// Scoring configuration implied by the file.
    pub fn config(&self) -> ScoreConfig {
        let dim = self.model.plan().dim();
        let mut config = ScoreConfig::new(self.method)
            .with_k(self.k)
            .with_k_nnn(self.model.k_nnn())
            .with_set_width(self.model.plan().set_width());
        config.n = Some(if self.model.has_packs() {
            self.model.n()
        } else {
            config.resolved_n(dim)
        });
        config.reorder = self.model.plan().permutation().iter().enumerate().any(|(p, &f)| p != f);
        config
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} = {v} does not fit in 32 bits")))
}

pub fn encode_model(file: &ModelFile) -> Result<Vec<u8>> {
    let model = &file.model;
    let plan = model.plan();
    let train = model.train();
    let mut out = Vec::with_capacity(HEADER_END + 8 * train.as_slice().len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header = [
        to_u32(plan.dim(), "D")?,
        to_u32(train.rows(), "N")?,
        to_u32(plan.set_width(), "L")?,
        to_u32(plan.set_count(), "S")?,
        to_u32(model.k_nnn(), "k_nnn")?,
        to_u32(model.n(), "n")?,
        model.floor_policy().id(),
        file.method.id(),
        to_u32(file.k, "k")?,
    ];
    for h in header {
        out.extend_from_slice(&h.to_le_bytes());
    }
    for &p in plan.permutation() {
        out.extend_from_slice(&to_u32(p, "permutation entry")?.to_le_bytes());
    }
    for v in train.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for pack in model.packs() {
        for v in pack.values().iter().chain(pack.vectors_flat()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let slice = self.bytes.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or(Error::TruncatedFile)?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 6 {
        return Err(Error::TruncatedFile);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER_END + 8 {
        return Err(Error::TruncatedFile);
    }

    let mut cur = Cursor { bytes, pos: 6 };
    let mut header = [0usize; HEADER_FIELDS];
    for h in &mut header {
        *h = cur.u32()? as usize;
    }
    let [dim, rows, width, sets, k_nnn, n, floor_id, method_id, k] = header;

    // Expected size, in u128 so corrupt headers cannot overflow.
    let (d, r, w) = (dim as u128, rows as u128, width.max(1) as u128);
    let mut pack_floats: u128 = 0;
    if k_nnn > 0 && width > 0 {
        for s in 0..sets as u128 {
            let ws = w.min(d.saturating_sub(s * w));
            let m = (n as u128).min(ws);
            pack_floats += m + m * ws;
        }
    }
    let expected = HEADER_END as u128 + 4 * d + 8 * r * d + 8 * r * pack_floats + 8;
    if (bytes.len() as u128) < expected {
        return Err(Error::TruncatedFile);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let floor = FloorPolicy::from_id(floor_id as u32)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown eigenvalue floor policy {floor_id}")))?;
    let method = Method::from_id(method_id as u32)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown method id {method_id}")))?;

    let permutation = (0..dim).map(|_| cur.u32().map(|p| p as usize)).collect::<Result<Vec<_>>>()?;
    let plan = PartitionPlan::new(permutation, width)?;
    if plan.set_count() != sets {
        return Err(Error::InvalidConfig(format!("header says {sets} sets, plan has {}", plan.set_count())));
    }
    let train = FeatureMatrix::new(dim, cur.f64s(rows * dim)?)?;

    let mut packs = Vec::new();
    if k_nnn > 0 {
        packs.reserve(rows * sets);
        for _ in 0..rows {
            for range in plan.set_ranges() {
                let ws = range.len();
                let m = n.min(ws);
                let values = cur.f64s(m)?;
                let vectors = cur.f64s(m * ws)?;
                packs.push(EigenPack::from_parts(ws, values, vectors)?);
            }
        }
    }
    if cur.pos != body.len() {
        return Err(Error::InvalidConfig(format!("{} unexpected trailing bytes", body.len() - cur.pos)));
    }
    let model = TrainedModel::from_parts(train, plan, k_nnn, n, packs)?;
    debug_assert_eq!(model.floor_policy(), floor);
    Ok(ModelFile { model, method, k })
}

pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(file)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    decode_model(&fs::read(path)?)
}

/// Scores sampled on a regular grid over a 2-D box. Row 0 is the top row
/// (largest y); values are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub bbox: BBox,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl HeatmapGrid {
    pub fn cell_center(bbox: &BBox, width: usize, height: usize, row: usize, col: usize) -> [f64; 2] {
        let x = bbox.min[0] + (col as f64 + 0.5) * bbox.width() / width as f64;
        let y = bbox.max[1] - (row as f64 + 0.5) * bbox.height() / height as f64;
        [x, y]
    }

    pub fn center(&self, row: usize, col: usize) -> [f64; 2] {
        Self::cell_center(&self.bbox, self.width, self.height, row, col)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// One grid row per line.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for row in self.values.chunks_exact(self.width) {
            write_values(out, row)?;
        }
        Ok(())
    }

    /// Binary PGM (P5), min–max normalized so the highest score maps to 255.
    pub fn write_pgm<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.gray_levels())?;
        Ok(())
    }

    pub fn gray_levels(&self) -> Vec<u8> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        self.values
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .collect()
    }
}

/// Evaluates the configured scorer at every cell center.
pub fn render_heatmap(
    model: &TrainedModel,
    config: &ScoreConfig,
    bbox: &BBox,
    resolution: (usize, usize),
) -> Result<HeatmapGrid> {
    if model.plan().dim() != 2 {
        return Err(Error::DimensionError(format!(
            "heatmaps need 2-D models, this one has D = {}",
            model.plan().dim()
        )));
    }
    let (width, height) = resolution;
    if width == 0 || height == 0 {
        return Err(Error::InvalidConfig("heatmap resolution must be positive".into()));
    }
    let values = (0..width * height)
        .into_par_iter()
        .map(|cell| {
            let center = HeatmapGrid::cell_center(bbox, width, height, cell / width, cell % width);
            score(model, &center, config)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample(format!("non-finite heatmap score {bad}")));
    }
    Ok(HeatmapGrid { bbox: *bbox, width, height, values })
}
