use serde::Serialize;

use super::{JuryError, Verdict};

/// Accepted over evaluated verdicts. Failed calls are excluded from both
/// and counted in `dropped`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceRate {
    pub accepted: usize,
    pub evaluated: usize,
    pub dropped: usize,
    pub rate: f64,
}

/// Pools every verdict matching `filter` (typically one condition, method,
/// judge or jury subset).
pub fn acceptance_rate<'a>(
    verdicts: impl IntoIterator<Item = &'a Verdict>,
    filter: impl Fn(&Verdict) -> bool,
) -> Result<AcceptanceRate, JuryError> {
    let (mut accepted, mut evaluated, mut dropped) = (0, 0, 0);
    for v in verdicts.into_iter().filter(|v| filter(v)) {
        match (v.is_ok(), v.decision) {
            (true, Some(d)) => {
                evaluated += 1;
                accepted += usize::from(d);
            }
            _ => dropped += 1,
        }
    }
    if evaluated == 0 {
        return Err(JuryError::Stat(format!(
            "no successful verdicts in selection ({dropped} dropped)"
        )));
    }
    Ok(AcceptanceRate {
        accepted,
        evaluated,
        dropped,
        rate: accepted as f64 / evaluated as f64,
    })
}
