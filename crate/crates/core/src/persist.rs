//! Model files.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "MMDL" | version u16 | header_len u32 | header JSON | body_len u64 | body | SHA-256
//! ```
//!
//! The header is a human-readable summary (configuration, features, slot
//! kinds). The body is bincode: the ensemble without its learners, followed
//! by one section per slot holding the learner kind tag and its payload. The
//! digest covers every byte before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::importance::ImportanceVector;
use crate::learners::{LearnerSpec, TrainedLearner};
use crate::metamodel::{Candidate, FeaturePruning, MetaModel, MetaModelConfig, SubModelSlot};
use crate::metrics::{MetricKind, MetricValue};
use crate::tabular::{ColumnFilterReport, DataSplit, ScalerParams, Task};

pub const MAGIC: &[u8; 4] = b"MMDL";
pub const FORMAT_VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct SlotCore {
    spec: LearnerSpec,
    roster_index: usize,
    split_seed: u64,
    learner_seed: u64,
    split: DataSplit,
    score: MetricValue,
    weight: f64,
    importance: ImportanceVector,
}

#[derive(Serialize, Deserialize)]
struct Core {
    config: MetaModelConfig,
    task: Task,
    target_name: String,
    metric: MetricKind,
    features: Vec<String>,
    scaler: ScalerParams,
    filter_report: ColumnFilterReport,
    candidates: Vec<Candidate>,
    pruning: FeaturePruning,
    slots: Vec<SlotCore>,
}

#[derive(Serialize, Deserialize)]
struct Section {
    kind: String,
    task: Task,
    payload: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    core: Core,
    sections: Vec<Section>,
}

fn encode_err(e: bincode::Error) -> Error {
    Error::CorruptModel(format!("encoding failed: {e}"))
}

fn body_of(model: &MetaModel) -> Result<Body> {
    let slots = model
        .slots
        .iter()
        .map(|s| SlotCore {
            spec: s.spec.clone(),
            roster_index: s.roster_index,
            split_seed: s.split_seed,
            learner_seed: s.learner_seed,
            split: s.split.clone(),
            score: s.score,
            weight: s.weight,
            importance: s.importance.clone(),
        })
        .collect();
    let sections = model
        .slots
        .iter()
        .map(|s| {
            Ok(Section {
                kind: s.model.kind_name().to_string(),
                task: s.spec.task(),
                payload: bincode::serialize(&s.model).map_err(encode_err)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Body {
        core: Core {
            config: model.config.clone(),
            task: model.task,
            target_name: model.target_name.clone(),
            metric: model.metric,
            features: model.features.clone(),
            scaler: model.scaler.clone(),
            filter_report: model.filter_report.clone(),
            candidates: model.candidates.clone(),
            pruning: model.pruning.clone(),
            slots,
        },
        sections,
    })
}

fn header_of(model: &MetaModel) -> serde_json::Value {
    serde_json::json!({
        "format_version": FORMAT_VERSION,
        "task": model.task,
        "target": model.target_name,
        "metric": model.metric,
        "features": model.features,
        "slots": model.slots.iter().map(|s| serde_json::json!({
            "kind": s.model.kind_name(),
            "weight": s.weight,
            "score": s.score.value,
        })).collect::<Vec<_>>(),
        "config": model.config,
    })
}

fn assemble(header: &[u8], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 2 + 4 + header.len() + 8 + body.len() + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn to_bytes(model: &MetaModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&header_of(model)).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let body = bincode::serialize(&body_of(model)?).map_err(encode_err)?;
    Ok(assemble(&header, &body))
}

pub fn save_metamodel(model: &MetaModel, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = at
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::CorruptModel(format!("file truncated in {what}")))?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

pub fn from_bytes(bytes: &[u8]) -> Result<MetaModel> {
    let mut at = 0;
    if take(bytes, &mut at, 4, "magic")? != MAGIC {
        return Err(Error::CorruptModel("not a model file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(take(bytes, &mut at, 2, "version")?.try_into().expect("two bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let header_len = u32::from_le_bytes(take(bytes, &mut at, 4, "header length")?.try_into().expect("four bytes"));
    let header = take(bytes, &mut at, header_len as usize, "header")?;
    let body_len = u64::from_le_bytes(take(bytes, &mut at, 8, "body length")?.try_into().expect("eight bytes"));
    let body_len = usize::try_from(body_len).map_err(|_| Error::CorruptModel("body length overflow".into()))?;
    let body = take(bytes, &mut at, body_len, "body")?;
    let covered = at;
    let digest = take(bytes, &mut at, DIGEST_LEN, "checksum")?;
    if at != bytes.len() {
        return Err(Error::CorruptModel("trailing bytes after checksum".into()));
    }
    if Sha256::digest(&bytes[..covered]).as_slice() != digest {
        return Err(Error::CorruptModel("checksum mismatch".into()));
    }
    serde_json::from_slice::<serde_json::Value>(header)
        .map_err(|e| Error::CorruptModel(format!("header: {e}")))?;
    let body: Body = bincode::deserialize(body).map_err(|e| Error::CorruptModel(format!("body: {e}")))?;
    if body.sections.len() != body.core.slots.len() {
        return Err(Error::CorruptModel("slot count mismatch".into()));
    }
    let Body { core: c, sections } = body;
    let mut slots = Vec::with_capacity(sections.len());
    for (core, section) in c.slots.into_iter().zip(sections) {
        // resolve the tag against the catalogue before touching the payload
        LearnerSpec::from_kind_name(section.task, &section.kind, 0)?;
        let model: TrainedLearner =
            bincode::deserialize(&section.payload).map_err(|e| Error::CorruptModel(format!("slot payload: {e}")))?;
        if model.kind_name() != section.kind {
            return Err(Error::CorruptModel(format!(
                "slot tagged `{}` holds a `{}` model",
                section.kind,
                model.kind_name()
            )));
        }
        slots.push(SubModelSlot {
            spec: core.spec,
            roster_index: core.roster_index,
            split_seed: core.split_seed,
            learner_seed: core.learner_seed,
            split: core.split,
            score: core.score,
            weight: core.weight,
            model,
            importance: core.importance,
        });
    }
    Ok(MetaModel {
        config: c.config,
        task: c.task,
        target_name: c.target_name,
        metric: c.metric,
        slots,
        features: c.features,
        scaler: c.scaler,
        filter_report: c.filter_report,
        candidates: c.candidates,
        pruning: c.pruning,
    })
}

pub fn load_metamodel(path: &Path) -> Result<MetaModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
