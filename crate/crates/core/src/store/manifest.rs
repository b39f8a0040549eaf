//! Line-oriented dataset manifest.
//!
//! Each non-empty line is a set of whitespace-separated `key=value` pairs.
//! Values containing whitespace are wrapped in double quotes (`\"` and `\\`
//! escape inside quotes). `#` starts a comment line. A line whose first token
//! is `@meta` carries free-form dataset metadata (for example the extractor's
//! pooling and normalisation choices) instead of an image record.
//!
//! Record keys: `image_id`, `condition`, `role` (required); `method`,
//! `source`, `file` (optional).

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::types::{Condition, Method, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub condition: Condition,
    pub role: Role,
    pub method: Option<Method>,
    /// Clear-day image an augmentation was derived from.
    pub source_id: Option<String>,
    pub file_path: Option<String>,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |msg: &str| Err(StoreError::Manifest(format!("{}: {msg}", self.image_id)));
        if self.image_id.is_empty() || self.image_id.contains(char::is_whitespace) {
            return Err(StoreError::Manifest(format!(
                "invalid image_id `{}`",
                self.image_id
            )));
        }
        match (self.role, self.method) {
            (Role::Augmented, None) => return bad("augmented image without a method"),
            (Role::Augmented, Some(_)) => {}
            (_, Some(_)) => return bad("only augmented images carry a method"),
            _ => {}
        }
        if self.role.is_real_adverse() && !self.condition.is_adverse() {
            return bad("real reference images must depict an adverse condition");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub records: Vec<ImageRecord>,
    pub meta: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(records: Vec<ImageRecord>) -> Result<Self, StoreError> {
        let manifest = Manifest {
            records,
            meta: BTreeMap::new(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let mut seen = HashSet::new();
        for r in &self.records {
            r.validate()?;
            if !seen.insert(r.image_id.as_str()) {
                return Err(StoreError::Manifest(format!(
                    "duplicate image_id `{}`",
                    r.image_id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }

    pub fn index(&self) -> BTreeMap<&str, &ImageRecord> {
        self.records
            .iter()
            .map(|r| (r.image_id.as_str(), r))
            .collect()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| r.role == role)
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut manifest = Manifest::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| StoreError::Manifest(format!("line {}: {msg}", lineno + 1));
            let (is_meta, rest) = match line.strip_prefix("@meta") {
                Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => {
                    (true, rest)
                }
                _ => (false, line),
            };
            let pairs = tokenize(rest).map_err(err)?;
            if is_meta {
                manifest.meta.extend(pairs);
                continue;
            }
            manifest.records.push(record_from_pairs(pairs).map_err(err)?);
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.meta.is_empty() {
            out.push_str("@meta");
            for (k, v) in &self.meta {
                let _ = write!(out, " {k}={}", quote(v));
            }
            out.push('\n');
        }
        for r in &self.records {
            let _ = write!(
                out,
                "image_id={} condition={} role={}",
                quote(&r.image_id),
                r.condition,
                r.role
            );
            if let Some(m) = r.method {
                let _ = write!(out, " method={m}");
            }
            if let Some(s) = &r.source_id {
                let _ = write!(out, " source={}", quote(s));
            }
            if let Some(f) = &r.file_path {
                let _ = write!(out, " file={}", quote(f));
            }
            out.push('\n');
        }
        out
    }
}

fn record_from_pairs(pairs: Vec<(String, String)>) -> Result<ImageRecord, String> {
    let mut map = BTreeMap::new();
    for (k, v) in pairs {
        if map.insert(k.clone(), v).is_some() {
            return Err(format!("repeated key `{k}`"));
        }
    }
    let mut take = |key: &str| map.remove(key);
    let image_id = take("image_id").ok_or("missing image_id")?;
    let condition = take("condition")
        .ok_or("missing condition")?
        .parse::<Condition>()
        .map_err(|e| e.to_string())?;
    let role = take("role")
        .ok_or("missing role")?
        .parse::<Role>()
        .map_err(|e| e.to_string())?;
    let method = match take("method").as_deref() {
        None | Some("none") => None,
        Some(m) => Some(m.parse::<Method>().map_err(|e| e.to_string())?),
    };
    let source_id = take("source");
    let file_path = take("file");
    if let Some(key) = map.keys().next() {
        return Err(format!("unknown key `{key}`"));
    }
    Ok(ImageRecord {
        image_id,
        condition,
        role,
        method,
        source_id,
        file_path,
    })
}

fn tokenize(line: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    let mut chars = line.trim().chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            break;
        }
        let mut key = String::new();
        for c in chars.by_ref() {
            if c == '=' {
                break;
            }
            if c.is_whitespace() {
                return Err(format!("token `{key}` is not a key=value pair"));
            }
            key.push(c);
        }
        if key.is_empty() {
            return Err("empty key".into());
        }
        let mut value = String::new();
        if chars.peek() == Some(&'"') {
            chars.next();
            let mut closed = false;
            while let Some(c) = chars.next() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => value.push(chars.next().ok_or("dangling escape")?),
                    c => value.push(c),
                }
            }
            if !closed {
                return Err(format!("unterminated quote for `{key}`"));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

fn quote(value: &str) -> String {
    if !value.is_empty() && !value.contains(|c: char| c.is_whitespace() || c == '"' || c == '\\')
    {
        return value.to_string();
    }
    let mut out = String::from("\"");
    for c in value.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
