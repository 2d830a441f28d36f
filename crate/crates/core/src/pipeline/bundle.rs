//! A trained detector in one file: embedder, network, edge generator and the
//! settings they were trained with.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{PipelineError, TrainConfig};
use crate::embedder::Doc2VecModel;
use crate::fsgnn::Model;
use crate::persist;
use crate::resampler::EdgeGenerator;
use crate::slicer::PoiConfig;

const MAGIC: &[u8; 8] = b"MVDBNDL1";
const EDGE_MAGIC: &[u8; 8] = b"MVDEDGE1";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub poi: PoiConfig,
    pub doc2vec: Doc2VecModel,
    pub gnn: Model,
    pub edge_gen: EdgeGenerator,
    pub loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    config: TrainConfig,
    poi: PoiConfig,
    loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeHeader {
    dim: usize,
    threshold: f64,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>, PipelineError> {
        let header = serde_json::to_vec(&Header {
            version: VERSION,
            config: self.config.clone(),
            poi: self.poi.clone(),
            loss_history: self.loss_history.clone(),
        })
        .map_err(|e| PipelineError::Bundle(e.to_string()))?;
        let mut edge = Vec::new();
        let s = self.edge_gen.s.as_standard_layout().into_owned();
        persist::write_container(
            &mut edge,
            EDGE_MAGIC,
            &EdgeHeader {
                dim: self.edge_gen.dim(),
                threshold: self.edge_gen.threshold,
            },
            &[s.as_slice().unwrap()],
        )?;
        let gnn = self.gnn.to_bytes()?;
        let d2v = self.doc2vec.to_bytes()?;
        let mut out = Vec::new();
        persist::write_sections(&mut out, MAGIC, &[&header, &gnn, &d2v, &edge])?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let sections = persist::read_sections(bytes, MAGIC)?;
        let [header, gnn, d2v, edge] = sections[..] else {
            return Err(PipelineError::Bundle(format!(
                "expected 4 sections, found {}",
                sections.len()
            )));
        };
        let header: Header =
            serde_json::from_slice(header).map_err(|e| PipelineError::Bundle(e.to_string()))?;
        if header.version != VERSION {
            return Err(PipelineError::Bundle(format!(
                "unsupported version {}",
                header.version
            )));
        }
        let gnn = Model::from_bytes(gnn)?;
        let doc2vec = Doc2VecModel::from_bytes(d2v)?;
        let (eh, mut arrays): (EdgeHeader, _) = persist::read_container(edge, EDGE_MAGIC)?;
        let s = match arrays.pop() {
            Some(a) if arrays.is_empty() => Array2::from_shape_vec((eh.dim, eh.dim), a)
                .map_err(|_| PipelineError::Bundle("edge generator size mismatch".into()))?,
            _ => {
                return Err(PipelineError::Bundle(
                    "edge generator needs one matrix".into(),
                ))
            }
        };
        if gnn.config.dim != doc2vec.dim() || eh.dim != gnn.config.dim {
            return Err(PipelineError::Bundle(
                "component dimensions disagree".into(),
            ));
        }
        Ok(TrainedModel {
            config: header.config,
            poi: header.poi,
            doc2vec,
            gnn,
            edge_gen: EdgeGenerator {
                s,
                threshold: eh.threshold,
            },
            loss_history: header.loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| PipelineError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| PipelineError::io(path, e))?)
    }
}
