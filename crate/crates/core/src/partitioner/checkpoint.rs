//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "GAPCKPT\0"
//! version    u32 LE
//! meta_len   u64 LE
//! metadata   meta_len bytes of JSON (model spec, feature digest, shapes, ...)
//! payload    every parameter in store order as f64 LE, row-major; then, if
//!            the metadata says so, Adam first moments and second moments in
//!            the same order
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{GapModel, ModelSpec};
use crate::error::{GapError, Result};
use crate::graph::atomic_write;
use crate::numeric::{AdamConfig, AdamState, Matrix};

pub const MAGIC: &[u8; 8] = b"GAPCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimizerMeta {
    config: AdamConfig,
    t: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: ModelSpec,
    pub init_seed: u64,
    /// SHA-256 of the feature spec's JSON form.
    pub feature_digest: String,
    pub config_fingerprint: Option<String>,
    pub shapes: Vec<ShapeEntry>,
    optimizer: Option<OptimizerMeta>,
}

pub struct Checkpoint {
    pub model: GapModel,
    pub optimizer: Option<AdamState>,
    pub meta: CheckpointMeta,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn feature_digest(spec: &ModelSpec) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(&spec.features)?))
}

pub fn encode_checkpoint(model: &GapModel, optimizer: Option<&AdamState>, fingerprint: Option<&str>) -> Result<Vec<u8>> {
    let shapes: Vec<ShapeEntry> = model
        .store()
        .iter()
        .map(|(_, p)| ShapeEntry {
            name: p.name.clone(),
            rows: p.value.rows(),
            cols: p.value.cols(),
            trainable: p.trainable,
        })
        .collect();
    let meta = CheckpointMeta {
        spec: model.spec().clone(),
        init_seed: model.init_seed(),
        feature_digest: feature_digest(model.spec())?,
        config_fingerprint: fingerprint.map(str::to_string),
        shapes,
        optimizer: optimizer.map(|o| OptimizerMeta { config: o.config, t: o.t }),
    };
    let meta_bytes = serde_json::to_vec(&meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    let mut put = |m: &Matrix| {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (_, p) in model.store().iter() {
        put(&p.value);
    }
    if let Some(o) = optimizer {
        let (first, second) = o.moments();
        first.iter().chain(second).for_each(&mut put);
    }
    Ok(out)
}

/// Writes atomically (temporary file, then rename).
pub fn save_checkpoint(
    model: &GapModel,
    path: &Path,
    optimizer: Option<&AdamState>,
    fingerprint: Option<&str>,
) -> Result<()> {
    atomic_write(path, &encode_checkpoint(model, optimizer, fingerprint)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| GapError::io(path, e))?;
    decode_checkpoint(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            GapError::Checkpoint(format!("truncated file while reading {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<Matrix> {
        let len = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| GapError::Checkpoint(format!("shape of {what} overflows")))?;
        let raw = self.take(len, what)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data).map_err(|_| GapError::Checkpoint(format!("{what} holds non-finite values")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic bytes")? != MAGIC {
        return Err(GapError::Checkpoint("bad magic bytes: not a GAP checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.take(4, "format version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(GapError::Checkpoint(format!(
            "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let meta_len = u64::from_le_bytes(r.take(8, "metadata length")?.try_into().unwrap());
    let meta_len = usize::try_from(meta_len).map_err(|_| GapError::Checkpoint("metadata length overflows".into()))?;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| GapError::Checkpoint(format!("bad metadata: {e}")))?;
    if feature_digest(&meta.spec)? != meta.feature_digest {
        return Err(GapError::Checkpoint("feature spec digest does not match".into()));
    }

    let mut model = GapModel::new(meta.spec.clone(), meta.init_seed)?;
    if model.store().len() != meta.shapes.len() {
        return Err(GapError::Checkpoint(format!(
            "shape table lists {} parameters, the model has {}",
            meta.shapes.len(),
            model.store().len()
        )));
    }
    let ids: Vec<_> = model.store().ids().collect();
    for (&id, entry) in ids.iter().zip(&meta.shapes) {
        let p = model.store().get(id);
        if p.name != entry.name || p.value.shape() != (entry.rows, entry.cols) || p.trainable != entry.trainable {
            return Err(GapError::Checkpoint(format!(
                "shape table entry {} ({}x{}) does not match parameter {} {:?}",
                entry.name,
                entry.rows,
                entry.cols,
                p.name,
                p.value.shape()
            )));
        }
    }
    for (&id, entry) in ids.iter().zip(&meta.shapes) {
        *model.store_mut().value_mut(id) = r.matrix(entry.rows, entry.cols, &entry.name)?;
    }
    let optimizer = match &meta.optimizer {
        None => None,
        Some(o) => {
            let mut moments = Vec::with_capacity(2 * ids.len());
            for entry in meta.shapes.iter().chain(&meta.shapes) {
                moments.push(r.matrix(entry.rows, entry.cols, "optimizer moments")?);
            }
            let second = moments.split_off(ids.len());
            Some(AdamState::from_parts(o.config, o.t, moments, second))
        }
    };
    if r.pos != bytes.len() {
        return Err(GapError::Checkpoint(format!(
            "{} unexpected trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { model, optimizer, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingKind, EmbeddingMode, NeighborSample, ProjectionBias};
    use crate::graph::{clique_chain, FeatureSpec};

    fn model(kind: EmbeddingKind) -> GapModel {
        let spec = ModelSpec {
            partitions: 3,
            embedding: kind,
            embedding_mode: EmbeddingMode::Offline,
            hidden: 6,
            sage_steps: 2,
            shared_pooling: true,
            neighbor_sample: NeighborSample::Count(3),
            projection_bias: ProjectionBias::Proj,
            head_layers: vec![5, 4],
            features: FeatureSpec::Pca { dim: 4 },
        };
        GapModel::new(spec, 17).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = clique_chain(&[4, 3, 5]).unwrap();
        for kind in [EmbeddingKind::Gcn, EmbeddingKind::Sage, EmbeddingKind::None] {
            let mut m = model(kind);
            // move weights away from their seeded initialization
            for id in m.store().ids().collect::<Vec<_>>() {
                let v = m.store().value(id).map(|x| x * 1.5 + 0.125);
                *m.store_mut().value_mut(id) = v;
            }
            let adam = AdamState::new(AdamConfig::new(0.01), m.store());
            let bytes = encode_checkpoint(&m, Some(&adam), Some("abc")).unwrap();
            let back = decode_checkpoint(&bytes).unwrap();
            for id in m.store().ids() {
                assert_eq!(m.store().value(id), back.model.store().value(id));
            }
            assert_eq!(back.optimizer.unwrap(), adam);
            assert_eq!(back.meta.config_fingerprint.as_deref(), Some("abc"));
            let a = m.infer(&g).unwrap().probabilities;
            let b = back.model.infer(&g).unwrap().probabilities;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let m = model(EmbeddingKind::Gcn);
        let bytes = encode_checkpoint(&m, None, None).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(GapError::Checkpoint(e)) if e.contains("magic")));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_checkpoint(&bad), Err(GapError::Checkpoint(e)) if e.contains("version")));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 3]), Err(GapError::Checkpoint(e)) if e.contains("truncated")));
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
        assert!(decode_checkpoint(&bytes).unwrap().optimizer.is_none());
    }

    #[test]
    fn shape_table_mismatch_is_rejected() {
        let m = model(EmbeddingKind::Gcn);
        let bytes = encode_checkpoint(&m, None, None).unwrap();
        let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let mut meta: serde_json::Value = serde_json::from_slice(&bytes[20..20 + meta_len]).unwrap();
        meta["shapes"][0]["rows"] = serde_json::json!(99);
        let new_meta = serde_json::to_vec(&meta).unwrap();
        let mut out = bytes[..12].to_vec();
        out.extend_from_slice(&(new_meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&new_meta);
        out.extend_from_slice(&bytes[20 + meta_len..]);
        assert!(matches!(decode_checkpoint(&out), Err(GapError::Checkpoint(e)) if e.contains("shape table")));
    }

    #[test]
    fn file_round_trip_and_partition_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model(EmbeddingKind::Sage);
        save_checkpoint(&m, &path, None, None).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert!(back.model.check_partitions(2).is_err());
        assert!(back.model.check_partitions(3).is_ok());
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(GapError::Io { .. })));
    }
}
