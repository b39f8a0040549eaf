//! EMB1 binary container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic b"EMB1"
//! 4       4           model_id byte length L (u32 LE)
//! 8       L           model_id, UTF-8
//! 8+L     4           dim (u32 LE)
//! 12+L    4           row count N (u32 LE)
//! 16+L    4*N*dim     values, row-major f32 LE
//! ...     4           row-id block byte length K (u32 LE)
//! ...     K           row ids joined by '\n', UTF-8
//! ```
//!
//! The file ends exactly after the row-id block. The codec here is purely
//! structural; model/dimension and manifest checks live in
//! [`super::load_embeddings`].

use super::StoreError;

pub const MAGIC: &[u8; 4] = b"EMB1";

/// Structurally decoded EMB1 payload.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbeddings {
    pub model_id: String,
    pub dim: usize,
    pub row_ids: Vec<String>,
    pub values: Vec<f32>,
}

pub fn encode(raw: &RawEmbeddings) -> Result<Vec<u8>, StoreError> {
    let count = raw.row_ids.len();
    if raw.values.len() != count * raw.dim {
        return Err(StoreError::Format(format!(
            "{} values do not fill {count} rows of dim {}",
            raw.values.len(),
            raw.dim
        )));
    }
    if let Some(id) = raw.row_ids.iter().find(|id| id.contains('\n') || id.is_empty()) {
        return Err(StoreError::Format(format!("unencodable row id {id:?}")));
    }
    let ids = raw.row_ids.join("\n");
    let mut out = Vec::with_capacity(24 + raw.model_id.len() + raw.values.len() * 4 + ids.len());
    out.extend_from_slice(MAGIC);
    put_len(&mut out, raw.model_id.len())?;
    out.extend_from_slice(raw.model_id.as_bytes());
    put_len(&mut out, raw.dim)?;
    put_len(&mut out, count)?;
    for v in &raw.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_len(&mut out, ids.len())?;
    out.extend_from_slice(ids.as_bytes());
    Ok(out)
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<(), StoreError> {
    let n = u32::try_from(n).map_err(|_| StoreError::Format(format!("{n} exceeds u32")))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| {
                StoreError::Format(format!(
                    "truncated while reading {what} at byte {}",
                    self.pos
                ))
            })?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<usize, StoreError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn utf8(&mut self, n: usize, what: &str) -> Result<&'a str, StoreError> {
        std::str::from_utf8(self.take(n, what)?)
            .map_err(|e| StoreError::Format(format!("{what} is not UTF-8: {e}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<RawEmbeddings, StoreError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(StoreError::Format("bad magic or version".into()));
    }
    let id_len = r.u32("model_id length")?;
    let model_id = r.utf8(id_len, "model_id")?.to_string();
    let dim = r.u32("dim")?;
    let count = r.u32("row count")?;
    if dim == 0 {
        return Err(StoreError::Format("dim must be positive".into()));
    }
    let n_values = count
        .checked_mul(dim)
        .ok_or_else(|| StoreError::Format("row count overflows".into()))?;
    let payload = r.take(
        n_values
            .checked_mul(4)
            .ok_or_else(|| StoreError::Format("payload size overflows".into()))?,
        "values",
    )?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let ids_len = r.u32("row-id block length")?;
    let ids = r.utf8(ids_len, "row-id block")?;
    if r.pos != bytes.len() {
        return Err(StoreError::Format(format!(
            "{} trailing bytes after row-id block",
            bytes.len() - r.pos
        )));
    }
    let row_ids: Vec<String> = if ids.is_empty() {
        Vec::new()
    } else {
        ids.split('\n').map(str::to_string).collect()
    };
    if row_ids.len() != count {
        return Err(StoreError::Format(format!(
            "header declares {count} rows but the id block lists {}",
            row_ids.len()
        )));
    }
    Ok(RawEmbeddings {
        model_id,
        dim,
        row_ids,
        values,
    })
}
