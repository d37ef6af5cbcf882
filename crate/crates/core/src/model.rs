//! Parameter storage for the three embedding models, initialization, and the
//! checkpoint file format.
//!
//! Parameters live in one flat `Vec<f64>`: all concept blocks first, then all
//! role blocks. Per-concept and per-role layouts (n = dimension):
//!
//! | model  | concept block                    | role block                                   |
//! |--------|----------------------------------|----------------------------------------------|
//! | ELEm   | center (n), radius (1)           | translation vector (n)                       |
//! | ELBE   | center (n), offset (n)           | translation vector (n)                       |
//! | Box²EL | center (n), offset (n), bump (n) | head center, head offset, tail center, tail offset (n each) |
//!
//! # Checkpoint layout
//!
//! ```text
//! magic        8 bytes   "GEOELCK1"
//! header_len   u64 LE
//! header       header_len bytes of UTF-8 JSON (see CheckpointHeader)
//! block_count  u32 LE
//! per block:   name_len u32 LE, name bytes, value_count u64 LE, value_count × f64 LE
//! ```
//!
//! Blocks are `concepts` (|C| × concept stride) and `roles` (|R| × role stride).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{AABox, Ball};
use crate::kb::{ConceptId, RoleId, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ELEM")]
    Elem,
    #[serde(rename = "ELBE")]
    Elbe,
    #[serde(rename = "BOX2EL")]
    Box2El,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Elem, ModelKind::Elbe, ModelKind::Box2El];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Elem => "ELEM",
            ModelKind::Elbe => "ELBE",
            ModelKind::Box2El => "BOX2EL",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace(['-', '_', '²'], "").as_str() {
            "ELEM" | "ELEMBEDDINGS" => Ok(ModelKind::Elem),
            "ELBE" => Ok(ModelKind::Elbe),
            "BOX2EL" => Ok(ModelKind::Box2El),
            _ => Err(format!("unknown model `{s}` (expected ELEM, ELBE or BOX2EL)")),
        }
    }
}

/// Loss hyperparameters: γ (margin), ε (minimum radius/offset norm),
/// δ (Box²EL negative distance), λ (Box²EL bump regularization weight).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub margin: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            margin: 0.0,
            epsilon: 0.01,
            delta: 1.0,
            lambda: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub num_concepts: usize,
    pub num_roles: usize,
    pub hyper: Hyper,
    pub params: Vec<f64>,
}

impl GeometricModel {
    /// All-zero parameters.
    pub fn zeros(kind: ModelKind, dim: usize, num_concepts: usize, num_roles: usize, hyper: Hyper) -> Self {
        let mut m = GeometricModel {
            kind,
            dim,
            num_concepts,
            num_roles,
            hyper,
            params: Vec::new(),
        };
        m.params = vec![0.0; m.num_params()];
        m
    }

    pub fn concept_stride(&self) -> usize {
        match self.kind {
            ModelKind::Elem => self.dim + 1,
            ModelKind::Elbe => 2 * self.dim,
            ModelKind::Box2El => 3 * self.dim,
        }
    }

    pub fn role_stride(&self) -> usize {
        match self.kind {
            ModelKind::Elem | ModelKind::Elbe => self.dim,
            ModelKind::Box2El => 4 * self.dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.num_concepts * self.concept_stride() + self.num_roles * self.role_stride()
    }

    fn concept_base(&self, c: ConceptId) -> usize {
        c.index() * self.concept_stride()
    }

    fn role_base(&self, r: RoleId) -> usize {
        self.num_concepts * self.concept_stride() + r.index() * self.role_stride()
    }

    pub fn center_range(&self, c: ConceptId) -> Range<usize> {
        let b = self.concept_base(c);
        b..b + self.dim
    }

    /// Index of the ELEm radius.
    pub fn radius_index(&self, c: ConceptId) -> usize {
        debug_assert_eq!(self.kind, ModelKind::Elem);
        self.concept_base(c) + self.dim
    }

    /// Offsets of a box model concept.
    pub fn offset_range(&self, c: ConceptId) -> Range<usize> {
        debug_assert_ne!(self.kind, ModelKind::Elem);
        let b = self.concept_base(c) + self.dim;
        b..b + self.dim
    }

    pub fn bump_range(&self, c: ConceptId) -> Range<usize> {
        debug_assert_eq!(self.kind, ModelKind::Box2El);
        let b = self.concept_base(c) + 2 * self.dim;
        b..b + self.dim
    }

    /// Translation vector of ELEm / ELBE roles.
    pub fn role_vector_range(&self, r: RoleId) -> Range<usize> {
        debug_assert_ne!(self.kind, ModelKind::Box2El);
        let b = self.role_base(r);
        b..b + self.dim
    }

    /// Box²EL head box as (center, offset) ranges.
    pub fn head_ranges(&self, r: RoleId) -> (Range<usize>, Range<usize>) {
        let b = self.role_base(r);
        let n = self.dim;
        (b..b + n, b + n..b + 2 * n)
    }

    /// Box²EL tail box as (center, offset) ranges.
    pub fn tail_ranges(&self, r: RoleId) -> (Range<usize>, Range<usize>) {
        let b = self.role_base(r) + 2 * self.dim;
        let n = self.dim;
        (b..b + n, b + n..b + 2 * n)
    }

    pub fn center(&self, c: ConceptId) -> &[f64] {
        &self.params[self.center_range(c)]
    }

    pub fn ball(&self, c: ConceptId) -> Ball {
        Ball {
            center: self.center(c).to_vec(),
            radius: self.params[self.radius_index(c)],
        }
    }

    pub fn concept_box(&self, c: ConceptId) -> AABox {
        AABox {
            center: self.center(c).to_vec(),
            offset: self.params[self.offset_range(c)].to_vec(),
        }
    }

    pub fn role_vector(&self, r: RoleId) -> &[f64] {
        &self.params[self.role_vector_range(r)]
    }

    pub fn bump(&self, c: ConceptId) -> &[f64] {
        &self.params[self.bump_range(c)]
    }

    pub fn head(&self, r: RoleId) -> AABox {
        let (c, o) = self.head_ranges(r);
        AABox {
            center: self.params[c].to_vec(),
            offset: self.params[o].to_vec(),
        }
    }

    pub fn tail(&self, r: RoleId) -> AABox {
        let (c, o) = self.tail_ranges(r);
        AABox {
            center: self.params[c].to_vec(),
            offset: self.params[o].to_vec(),
        }
    }

    /// Indices of all radius / offset parameters (the ones kept non-negative).
    pub fn nonneg_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for c in 0..self.num_concepts as u32 {
            let c = ConceptId(c);
            match self.kind {
                ModelKind::Elem => out.push(self.radius_index(c)),
                _ => out.extend(self.offset_range(c)),
            }
        }
        if self.kind == ModelKind::Box2El {
            for r in 0..self.num_roles as u32 {
                out.extend(self.head_ranges(RoleId(r)).1);
                out.extend(self.tail_ranges(RoleId(r)).1);
            }
        }
        out
    }

    /// Clamps radii and offsets at zero.
    pub fn clamp(&mut self) {
        for i in self.nonneg_indices() {
            if self.params[i] < 0.0 {
                self.params[i] = 0.0;
            }
        }
    }

    /// Random initialization: centers and translation vectors uniform in
    /// [−0.5, 0.5]ⁿ (ELEm concept centers then projected to the unit sphere),
    /// radii and offsets uniform in [0.05, 0.3], bumps uniform in [−0.1, 0.1].
    pub fn init<R: Rng>(
        kind: ModelKind,
        dim: usize,
        num_concepts: usize,
        num_roles: usize,
        hyper: Hyper,
        rng: &mut R,
    ) -> Self {
        let mut m = GeometricModel::zeros(kind, dim, num_concepts, num_roles, hyper);
        let uni = |rng: &mut R, lo: f64, hi: f64, out: &mut [f64]| {
            for x in out.iter_mut() {
                *x = rng.random_range(lo..hi);
            }
        };
        for c in 0..num_concepts as u32 {
            let c = ConceptId(c);
            let cr = m.center_range(c);
            uni(rng, -0.5, 0.5, &mut m.params[cr.clone()]);
            match kind {
                ModelKind::Elem => {
                    let center = &mut m.params[cr];
                    let nrm = crate::geometry::norm(center);
                    if nrm > 0.0 {
                        center.iter_mut().for_each(|x| *x /= nrm);
                    }
                    let ri = m.radius_index(c);
                    m.params[ri] = rng.random_range(0.05..0.3);
                }
                ModelKind::Elbe => {
                    let or = m.offset_range(c);
                    uni(rng, 0.05, 0.3, &mut m.params[or]);
                }
                ModelKind::Box2El => {
                    let or = m.offset_range(c);
                    uni(rng, 0.05, 0.3, &mut m.params[or]);
                    let br = m.bump_range(c);
                    uni(rng, -0.1, 0.1, &mut m.params[br]);
                }
            }
        }
        for r in 0..num_roles as u32 {
            let r = RoleId(r);
            match kind {
                ModelKind::Elem | ModelKind::Elbe => {
                    let vr = m.role_vector_range(r);
                    uni(rng, -0.5, 0.5, &mut m.params[vr]);
                }
                ModelKind::Box2El => {
                    let (hc, ho) = m.head_ranges(r);
                    let (tc, to) = m.tail_ranges(r);
                    uni(rng, -0.5, 0.5, &mut m.params[hc]);
                    uni(rng, 0.05, 0.3, &mut m.params[ho]);
                    uni(rng, -0.5, 0.5, &mut m.params[tc]);
                    uni(rng, 0.05, 0.3, &mut m.params[to]);
                }
            }
        }
        m
    }
}

/// Hex SHA-256 over the concept and role names in id order.
pub fn signature_hash(sig: &Signature) -> String {
    let mut h = Sha256::new();
    for name in sig.concept_names() {
        h.update(b"c:");
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    for name in sig.role_names() {
        h.update(b"r:");
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GEOELCK1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model: ModelKind,
    pub dim: usize,
    pub num_concepts: usize,
    pub num_roles: usize,
    pub signature_hash: String,
    pub hyper: Hyper,
    pub concepts: Vec<String>,
    pub roles: Vec<String>,
    /// Free-form training configuration, stored for provenance.
    pub config: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint block `{name}` has {found} values, expected {expected}")]
    BlockSize {
        name: String,
        found: usize,
        expected: usize,
    },
    #[error("checkpoint is missing block `{0}`")]
    MissingBlock(&'static str),
    #[error("checkpoint signature does not match: {0}")]
    Signature(String),
}

pub fn write_checkpoint(m: &GeometricModel, sig: &Signature, config: serde_json::Value) -> Vec<u8> {
    let header = CheckpointHeader {
        format_version: 1,
        model: m.kind,
        dim: m.dim,
        num_concepts: m.num_concepts,
        num_roles: m.num_roles,
        signature_hash: signature_hash(sig),
        hyper: m.hyper,
        concepts: sig.concept_names().to_vec(),
        roles: sig.role_names().to_vec(),
        config,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let split = m.num_concepts * m.concept_stride();
    let blocks: [(&str, &[f64]); 2] = [("concepts", &m.params[..split]), ("roles", &m.params[split..])];
    let mut out = Vec::with_capacity(32 + json.len() + m.params.len() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, values) in blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a checkpoint back into a model and its header.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(GeometricModel, CheckpointHeader), CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let hlen = r.u64()? as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(hlen)?)?;
    let mut m = GeometricModel::zeros(header.model, header.dim, header.num_concepts, header.num_roles, header.hyper);
    let split = m.num_concepts * m.concept_stride();
    let total = m.params.len();
    let count = r.u32()?;
    let mut seen = [false; 2];
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let name = String::from_utf8_lossy(r.take(nlen)?).into_owned();
        let len = r.u64()? as usize;
        let (slot, range) = match name.as_str() {
            "concepts" => (0, 0..split),
            "roles" => (1, split..total),
            _ => {
                r.take(len.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
                continue;
            }
        };
        if len != range.len() {
            return Err(CheckpointError::BlockSize {
                name,
                found: len,
                expected: range.len(),
            });
        }
        let raw = r.take(len * 8)?;
        for (dst, chunk) in m.params[range].iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        seen[slot] = true;
    }
    if !seen[0] {
        return Err(CheckpointError::MissingBlock("concepts"));
    }
    if !seen[1] {
        return Err(CheckpointError::MissingBlock("roles"));
    }
    Ok((m, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn sig() -> Signature {
        let mut s = Signature::new();
        for n in ["A", "B", "C", "D", "E", "F"] {
            s.intern_concept(n);
        }
        s.intern_role("r");
        s
    }

    #[test]
    fn elem_layout_counts() {
        let m = GeometricModel::zeros(ModelKind::Elem, 2, 8, 1, Hyper::default());
        assert_eq!(m.num_params(), 8 * 3 + 2);
        let m = GeometricModel::zeros(ModelKind::Box2El, 3, 4, 2, Hyper::default());
        assert_eq!(m.num_params(), 4 * 9 + 2 * 12);
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        for kind in ModelKind::ALL {
            let a = GeometricModel::init(kind, 4, 8, 2, Hyper::default(), &mut Xoshiro256PlusPlus::seed_from_u64(3));
            let b = GeometricModel::init(kind, 4, 8, 2, Hyper::default(), &mut Xoshiro256PlusPlus::seed_from_u64(3));
            assert_eq!(a, b);
            for i in a.nonneg_indices() {
                assert!((0.05..0.3).contains(&a.params[i]));
            }
            if kind == ModelKind::Elem {
                for c in 0..8 {
                    let n = crate::geometry::norm(a.center(ConceptId(c)));
                    assert!((n - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let s = sig();
        for kind in ModelKind::ALL {
            let m = GeometricModel::init(kind, 3, s.num_concepts(), s.num_roles(), Hyper::default(), &mut Xoshiro256PlusPlus::seed_from_u64(9));
            let bytes = write_checkpoint(&m, &s, serde_json::json!({"epochs": 3}));
            let (back, header) = read_checkpoint(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(header.signature_hash, signature_hash(&s));
            assert_eq!(header.config["epochs"], 3);
            assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        }
        assert!(matches!(read_checkpoint(b"nope"), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn clamp_zeroes_negative_offsets() {
        let mut m = GeometricModel::zeros(ModelKind::Box2El, 2, 3, 1, Hyper::default());
        m.params.iter_mut().for_each(|x| *x = -1.0);
        m.clamp();
        for i in m.nonneg_indices() {
            assert_eq!(m.params[i], 0.0);
        }
        assert_eq!(m.center(ConceptId(0)), &[-1.0, -1.0]);
    }
}
