use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable response: {0}")]
pub struct ParseError(pub String);

/// Finds the JSON object in a model response: the whole body if it is an
/// object, else the first fenced block or brace-delimited object that
/// parses, preferring one with a field named `key`.
pub fn extract_json_object(raw: &str, key: &str) -> Option<Map<String, Value>> {
    if let Ok(Value::Object(m)) = serde_json::from_str(raw.trim()) {
        return Some(m);
    }
    let mut candidates: Vec<Map<String, Value>> = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(end) = after.find("```") else { break };
        let body = after[..end].trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        if let Ok(Value::Object(m)) = serde_json::from_str(body.trim()) {
            candidates.push(m);
        }
        rest = &after[end + 3..];
    }
    for (i, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(m))) = stream.next() {
            candidates.push(m);
        }
    }
    let preferred = candidates.iter().position(|m| m.contains_key(key));
    match preferred {
        Some(i) => Some(candidates.swap_remove(i)),
        None => candidates.into_iter().next(),
    }
}

/// Parses `{"decision": bool, "explanation": string}` from a judge response.
pub fn parse_verdict(raw: &str) -> Result<(bool, String), ParseError> {
    let obj = extract_json_object(raw, "decision")
        .ok_or_else(|| ParseError("no JSON object found".into()))?;
    let decision = match obj.get("decision") {
        Some(Value::Bool(b)) => *b,
        Some(other) => return Err(ParseError(format!("`decision` is not a boolean: {other}"))),
        None => return Err(ParseError("missing `decision`".into())),
    };
    let explanation = match obj.get("explanation") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(ParseError(format!("`explanation` is not a string: {other}"))),
        None => return Err(ParseError("missing `explanation`".into())),
    };
    Ok((decision, explanation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_body() {
        assert_eq!(
            parse_verdict(r#"{"explanation": "looks fine", "decision": true}"#).unwrap(),
            (true, "looks fine".to_string())
        );
    }

    #[test]
    fn lenient_fenced_and_embedded() {
        let fenced = "Step 1: fog is dense.\n```json\n{\"explanation\": \"ok\", \"decision\": false}\n```";
        assert_eq!(parse_verdict(fenced).unwrap(), (false, "ok".to_string()));
        let embedded =
            "Reasoning {not json}. Final: {\"decision\": true, \"explanation\": \"a {b}\"} done";
        assert_eq!(parse_verdict(embedded).unwrap(), (true, "a {b}".to_string()));
    }

    #[test]
    fn prefers_object_with_decision() {
        let raw = r#"Scene: {"objects": 3}. Answer: {"explanation": "x", "decision": true}"#;
        assert!(parse_verdict(raw).unwrap().0);
    }

    #[test]
    fn ill_typed_or_missing_fields_fail() {
        assert!(parse_verdict(r#"{"decision": "yes", "explanation": "x"}"#).is_err());
        assert!(parse_verdict(r#"{"decision": 1, "explanation": "x"}"#).is_err());
        assert!(parse_verdict(r#"{"decision": true}"#).is_err());
        assert!(parse_verdict(r#"{"decision": true, "explanation": 5}"#).is_err());
        assert!(parse_verdict("I accept this image.").is_err());
        assert!(parse_verdict("").is_err());
    }
}
