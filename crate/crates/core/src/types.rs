//! Domain vocabulary shared by every module: conditions, augmentation
//! methods, dataset roles and embedding model identifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Weather or lighting condition an image depicts (or targets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Fog,
    Rain,
    Snow,
    Night,
    Clear,
}

impl Condition {
    /// The four adverse conditions, in reporting order.
    pub const ADVERSE: [Condition; 4] = [
        Condition::Fog,
        Condition::Rain,
        Condition::Snow,
        Condition::Night,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Fog => "fog",
            Condition::Rain => "rain",
            Condition::Snow => "snow",
            Condition::Night => "night",
            Condition::Clear => "clear",
        }
    }

    pub fn is_adverse(self) -> bool {
        self != Condition::Clear
    }
}

/// Augmentation method that produced an augmented image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Imgaug,
    Albumentations,
    Openai,
    Gemini,
    Qwen,
    Flux,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Imgaug,
        Method::Albumentations,
        Method::Openai,
        Method::Gemini,
        Method::Qwen,
        Method::Flux,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Imgaug => "imgaug",
            Method::Albumentations => "albumentations",
            Method::Openai => "openai",
            Method::Gemini => "gemini",
            Method::Qwen => "qwen",
            Method::Flux => "flux",
        }
    }

    /// Generative image-editing model, as opposed to a rule-based library.
    pub fn is_generative(self) -> bool {
        !matches!(self, Method::Imgaug | Method::Albumentations)
    }
}

/// Role an image plays in an evaluation dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Augmented,
    ReferenceReal,
    HeldoutReal,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Augmented => "augmented",
            Role::ReferenceReal => "reference_real",
            Role::HeldoutReal => "heldout_real",
        }
    }

    pub fn is_real_adverse(self) -> bool {
        matches!(self, Role::ReferenceReal | Role::HeldoutReal)
    }
}

/// Embedding space identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    ClipVitl14,
    Dinov3Vitl,
    Concat,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::ClipVitl14, ModelId::Dinov3Vitl, ModelId::Concat];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::ClipVitl14 => "clip_vitl14",
            ModelId::Dinov3Vitl => "dinov3_vitl",
            ModelId::Concat => "concat",
        }
    }

    /// Output width of the encoder (or of the concatenation).
    pub fn dim(self) -> usize {
        match self {
            ModelId::ClipVitl14 => 768,
            ModelId::Dinov3Vitl => 1024,
            ModelId::Concat => 1792,
        }
    }
}

/// Error returned when parsing one of the enums above from text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! text_enum {
    ($ty:ty, $kind:literal, [$($variant:expr),+ $(,)?]) => {
        impl FromStr for $ty {
            type Err = UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                [$($variant),+]
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| UnknownVariant { kind: $kind, value: s.to_string() })
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

text_enum!(
    Condition,
    "condition",
    [Condition::Fog, Condition::Rain, Condition::Snow, Condition::Night, Condition::Clear]
);
text_enum!(
    Method,
    "method",
    [
        Method::Imgaug,
        Method::Albumentations,
        Method::Openai,
        Method::Gemini,
        Method::Qwen,
        Method::Flux
    ]
);
text_enum!(
    Role,
    "role",
    [Role::Source, Role::Augmented, Role::ReferenceReal, Role::HeldoutReal]
);
text_enum!(
    ModelId,
    "model_id",
    [ModelId::ClipVitl14, ModelId::Dinov3Vitl, ModelId::Concat]
);

/// Reporting scope: one condition, or all conditions pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Condition(Condition),
    Overall,
}

impl Scope {
    /// Each adverse condition, then the pooled scope.
    pub const ALL: [Scope; 5] = [
        Scope::Condition(Condition::Fog),
        Scope::Condition(Condition::Rain),
        Scope::Condition(Condition::Snow),
        Scope::Condition(Condition::Night),
        Scope::Overall,
    ];

    pub fn includes(self, condition: Condition) -> bool {
        match self {
            Scope::Overall => true,
            Scope::Condition(c) => c == condition,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Condition(c) => f.write_str(c.as_str()),
            Scope::Overall => f.write_str("overall"),
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        for c in [Condition::Fog, Condition::Clear] {
            assert_eq!(c.to_string().parse::<Condition>().unwrap(), c);
        }
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        for id in ModelId::ALL {
            assert_eq!(id.as_str().parse::<ModelId>().unwrap(), id);
        }
        assert!("hail".parse::<Condition>().is_err());
    }

    #[test]
    fn model_dims() {
        assert_eq!(
            ModelId::ClipVitl14.dim() + ModelId::Dinov3Vitl.dim(),
            ModelId::Concat.dim()
        );
    }
}
