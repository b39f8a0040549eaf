//! Dataset manifest, embedding matrices and the held-out split.

pub mod emb1;
mod manifest;
mod split;

use std::collections::{HashMap, HashSet};
use std::path::Path;

pub use manifest::{ImageRecord, Manifest};
pub use split::{split_holdout, Split, SplitSpec};

use crate::types::ModelId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("format error: {0}")]
    Format(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Embedding vectors for a set of images, one row per image.
///
/// Rows are stored row-major in single precision, exactly as the encoder
/// produced them; nothing is normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    model_id: ModelId,
    dim: usize,
    row_ids: Vec<String>,
    values: Vec<f32>,
    positions: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix, checking shape, distinct ids and finiteness.
    ///
    /// The encoder-width invariant (`model_id.dim() == dim`) is enforced at
    /// the file boundary by [`load_embeddings`] and [`save_embeddings`], so
    /// small in-memory matrices can be used freely.
    pub fn new(
        model_id: ModelId,
        dim: usize,
        row_ids: Vec<String>,
        values: Vec<f32>,
    ) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::Format("dim must be positive".into()));
        }
        if values.len() != row_ids.len() * dim {
            return Err(StoreError::Format(format!(
                "{} values for {} rows of dim {dim}",
                values.len(),
                row_ids.len()
            )));
        }
        let mut positions = HashMap::with_capacity(row_ids.len());
        for (i, id) in row_ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(StoreError::Data(format!("duplicate row id `{id}`")));
            }
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::Data(format!(
                "non-finite value in row `{}`",
                row_ids[bad / dim]
            )));
        }
        Ok(EmbeddingMatrix {
            model_id,
            dim,
            row_ids,
            values,
            positions,
        })
    }

    pub fn from_rows(
        model_id: ModelId,
        rows: Vec<(String, Vec<f32>)>,
    ) -> Result<Self, StoreError> {
        let dim = rows.first().map_or(model_id.dim(), |(_, r)| r.len());
        if let Some((id, _)) = rows.iter().find(|(_, r)| r.len() != dim) {
            return Err(StoreError::Format(format!("row `{id}` has the wrong width")));
        }
        let (ids, vals): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        Self::new(model_id, dim, ids, vals.concat())
    }

    pub fn model_id(&self) -> ModelId {
        self.model_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.positions.get(image_id).copied()
    }

    pub fn row_by_id(&self, image_id: &str) -> Option<&[f32]> {
        self.position(image_id).map(|i| self.row(i))
    }

    pub fn row_f64(&self, index: usize) -> Vec<f64> {
        self.row(index).iter().map(|&v| f64::from(v)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.row_ids
            .iter()
            .map(String::as_str)
            .zip(self.values.chunks_exact(self.dim))
    }

    /// Sub-matrix with the given rows, in the given order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<EmbeddingMatrix, StoreError> {
        let mut values = Vec::with_capacity(ids.len() * self.dim);
        let mut row_ids = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let row = self
                .row_by_id(id)
                .ok_or_else(|| StoreError::Alignment(format!("no row for `{id}`")))?;
            values.extend_from_slice(row);
            row_ids.push(id.to_string());
        }
        Self::new(self.model_id, self.dim, row_ids, values)
    }

    fn check_model_dim(&self) -> Result<(), StoreError> {
        if self.dim != self.model_id.dim() {
            return Err(StoreError::Format(format!(
                "{} embeddings must have dim {}, found {}",
                self.model_id,
                self.model_id.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    fn to_raw(&self) -> emb1::RawEmbeddings {
        emb1::RawEmbeddings {
            model_id: self.model_id.as_str().to_string(),
            dim: self.dim,
            row_ids: self.row_ids.clone(),
            values: self.values.clone(),
        }
    }

    fn from_raw(raw: emb1::RawEmbeddings) -> Result<Self, StoreError> {
        let model_id = raw
            .model_id
            .parse::<ModelId>()
            .map_err(|e| StoreError::Format(e.to_string()))?;
        Self::new(model_id, raw.dim, raw.row_ids, raw.values)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, StoreError> {
    std::fs::read(path).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
}

/// Structural read: format, shape, distinct ids, finiteness. No manifest or
/// encoder-width checks.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, StoreError> {
    EmbeddingMatrix::from_raw(emb1::decode(&read_file(path)?)?)
}

/// Loads an EMB1 file and validates it against the manifest.
pub fn load_embeddings(path: &Path, manifest: &Manifest) -> Result<EmbeddingMatrix, StoreError> {
    let matrix = read_embeddings(path)?;
    matrix.check_model_dim()?;
    let known: HashSet<&str> = manifest.records.iter().map(|r| r.image_id.as_str()).collect();
    if let Some(id) = matrix.row_ids.iter().find(|id| !known.contains(id.as_str())) {
        return Err(StoreError::Manifest(format!(
            "row `{id}` in {} is not in the manifest",
            path.display()
        )));
    }
    Ok(matrix)
}

pub fn save_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), StoreError> {
    matrix.check_model_dim()?;
    write_embeddings(path, matrix)
}

/// Writes without the encoder-width check.
pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), StoreError> {
    let bytes = emb1::encode(&matrix.to_raw())?;
    std::fs::write(path, bytes).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
}

/// Column-wise concatenation; row `i` of the result is `a_i` followed by `b_i`.
pub fn concat_embeddings(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix, StoreError> {
    if a.row_ids != b.row_ids {
        let first = a
            .row_ids
            .iter()
            .zip(&b.row_ids)
            .position(|(x, y)| x != y)
            .unwrap_or(a.len().min(b.len()));
        return Err(StoreError::Alignment(format!(
            "row ids diverge at position {first} ({} vs {} rows)",
            a.len(),
            b.len()
        )));
    }
    let dim = a.dim + b.dim;
    let mut values = Vec::with_capacity(a.len() * dim);
    for i in 0..a.len() {
        values.extend_from_slice(a.row(i));
        values.extend_from_slice(b.row(i));
    }
    EmbeddingMatrix::new(ModelId::Concat, dim, a.row_ids.clone(), values)
}
