use std::fs;
use std::path::Path;

use super::JuryError;
use crate::types::Condition;

const PAIR: &str = include_str!("../../templates/pair.txt");
const SINGLE: &str = include_str!("../../templates/single.txt");
const CLASSIFY: &str = include_str!("../../templates/classify.txt");

/// Appended to the prompt when the previous answer could not be parsed.
pub const REASK_SUFFIX: &str = "\n\nYour previous answer did not end with a valid JSON object. \
Answer again and finish with the JSON object exactly as specified.";

/// What a convincing depiction of each adverse condition should show.
pub fn guidance(condition: Condition) -> Option<&'static str> {
    match condition {
        Condition::Snow => Some("It should show evidence of falling or accumulated snow."),
        Condition::Rain => Some("It should show precipitation or wet surfaces."),
        Condition::Fog => Some("It should show atmospheric obscuration with reduced visibility."),
        Condition::Night => Some(
            "It should show appropriate darkness, artificial lighting, and illumination \
             characteristics.",
        ),
        Condition::Clear => None,
    }
}

/// Prompt templates with `{condition}`, `{guidance}` and `{explanation}`
/// placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub pair: String,
    pub single: String,
    pub classify: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            pair: PAIR.to_string(),
            single: SINGLE.to_string(),
            classify: CLASSIFY.to_string(),
        }
    }
}

impl PromptSet {
    /// Built-in templates, overridden by any of `pair.txt`, `single.txt` and
    /// `classify.txt` found in `dir`.
    pub fn load(dir: Option<&Path>) -> Result<Self, JuryError> {
        let mut set = PromptSet::default();
        let Some(dir) = dir else { return Ok(set) };
        for (name, slot) in [
            ("pair.txt", &mut set.pair),
            ("single.txt", &mut set.single),
            ("classify.txt", &mut set.classify),
        ] {
            let path = dir.join(name);
            if path.exists() {
                *slot = fs::read_to_string(&path)
                    .map_err(|e| JuryError::Config(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(set)
    }

    pub fn render_pair(&self, condition: &str) -> Result<String, JuryError> {
        render(&self.pair, condition, None)
    }

    pub fn render_single(&self, condition: &str) -> Result<String, JuryError> {
        render(&self.single, condition, None)
    }

    pub fn render_classify(&self, condition: &str, explanation: &str) -> Result<String, JuryError> {
        render(&self.classify, condition, Some(explanation))
    }
}

/// Pair prompt from the built-in template.
pub fn render_pair_prompt(condition: &str) -> Result<String, JuryError> {
    render(PAIR, condition, None)
}

/// Single-image baseline prompt from the built-in template.
pub fn render_single_prompt(condition: &str) -> Result<String, JuryError> {
    render(SINGLE, condition, None)
}

fn render(template: &str, condition: &str, explanation: Option<&str>) -> Result<String, JuryError> {
    let parsed: Condition = condition
        .parse()
        .map_err(|_| JuryError::Config(format!("unknown condition `{condition}`")))?;
    let guidance = guidance(parsed)
        .ok_or_else(|| JuryError::Config(format!("`{condition}` is not an adverse condition")))?;
    // explanation goes last so text inside it is never treated as a placeholder
    let mut out = template
        .replace("{condition}", parsed.as_str())
        .replace("{guidance}", guidance);
    if let Some(e) = explanation {
        out = out.replace("{explanation}", e);
    }
    Ok(out)
}
