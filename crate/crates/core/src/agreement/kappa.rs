use serde::Serialize;

use super::StatError;

/// Chance-corrected agreement, or the observed agreement when chance
/// agreement is already 1 and κ is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    Value(f64),
    Degenerate { observed_agreement: f64 },
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(k) => Some(k),
            Kappa::Degenerate { .. } => None,
        }
    }

    /// Landis–Koch band for a defined κ.
    pub fn interpretation(self) -> &'static str {
        match self.value() {
            None => "undefined",
            Some(k) if k < 0.0 => "poor",
            Some(k) if k <= 0.20 => "slight",
            Some(k) if k <= 0.40 => "fair",
            Some(k) if k <= 0.60 => "moderate",
            Some(k) if k <= 0.80 => "substantial",
            Some(_) => "almost perfect",
        }
    }
}

/// Cohen's κ for two binary raters. Pairs with a missing rating are dropped.
pub fn cohen_kappa<T>(a: &[T], b: &[T]) -> Result<Kappa, StatError>
where
    T: Copy + Into<Option<bool>>,
{
    if a.len() != b.len() {
        return Err(StatError(format!(
            "rating lists differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    // [both true, a only, b only, both false]
    let mut table = [0u64; 4];
    for (&x, &y) in a.iter().zip(b) {
        match (x.into(), y.into()) {
            (Some(true), Some(true)) => table[0] += 1,
            (Some(true), Some(false)) => table[1] += 1,
            (Some(false), Some(true)) => table[2] += 1,
            (Some(false), Some(false)) => table[3] += 1,
            _ => {}
        }
    }
    let n = table.iter().sum::<u64>();
    if n == 0 {
        return Err(StatError("no pairs rated by both raters".into()));
    }
    let a_true = table[0] + table[1];
    let b_true = table[0] + table[2];
    let nf = n as f64;
    let p_o = (table[0] + table[3]) as f64 / nf;
    if (a_true == n && b_true == n) || (a_true == 0 && b_true == 0) {
        return Ok(Kappa::Degenerate {
            observed_agreement: p_o,
        });
    }
    let p_e = (a_true * b_true + (n - a_true) * (n - b_true)) as f64 / (nf * nf);
    Ok(Kappa::Value((p_o - p_e) / (1.0 - p_e)))
}

/// Items × raters matrix of optional binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTable {
    items: Vec<String>,
    raters: Vec<String>,
    labels: Vec<Vec<Option<bool>>>,
}

impl RatingTable {
    pub fn new(
        items: Vec<String>,
        raters: Vec<String>,
        labels: Vec<Vec<Option<bool>>>,
    ) -> Result<Self, StatError> {
        if labels.len() != items.len() {
            return Err(StatError(format!(
                "{} label rows for {} items",
                labels.len(),
                items.len()
            )));
        }
        if let Some(i) = labels.iter().position(|row| row.len() != raters.len()) {
            return Err(StatError(format!(
                "item `{}` has {} labels for {} raters",
                items[i],
                labels[i].len(),
                raters.len()
            )));
        }
        Ok(RatingTable {
            items,
            raters,
            labels,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn labels(&self) -> &[Vec<Option<bool>>] {
        &self.labels
    }

    /// Labels of one rater across all items.
    pub fn column(&self, rater: usize) -> Vec<Option<bool>> {
        self.labels.iter().map(|row| row[rater]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FleissKappa {
    pub kappa: Kappa,
    pub items_used: usize,
    pub items_dropped: usize,
    pub raters: usize,
}

/// Fleiss' κ over two categories. Items missing any rating are dropped so
/// every included item has the same number of raters.
pub fn fleiss_kappa(table: &RatingTable) -> Result<FleissKappa, StatError> {
    let n = table.raters.len();
    if n < 2 {
        return Err(StatError(format!("Fleiss' kappa needs 2+ raters, got {n}")));
    }
    let mut per_item = Vec::with_capacity(table.items.len());
    for row in &table.labels {
        if row.iter().all(Option::is_some) {
            per_item.push(row.iter().filter(|l| **l == Some(true)).count() as u64);
        }
    }
    let used = per_item.len();
    if used == 0 {
        return Err(StatError("no item is rated by every rater".into()));
    }
    let nn = n as u64;
    let agreement_sum: f64 = per_item
        .iter()
        .map(|&t| {
            let f = nn - t;
            (t * t + f * f - nn) as f64 / (nn * (nn - 1)) as f64
        })
        .sum();
    let p_bar = agreement_sum / used as f64;
    let total_true: u64 = per_item.iter().sum();
    let total = nn * used as u64;
    let kappa = if total_true == 0 || total_true == total {
        Kappa::Degenerate {
            observed_agreement: p_bar,
        }
    } else {
        let p_true = total_true as f64 / total as f64;
        let p_e = p_true * p_true + (1.0 - p_true) * (1.0 - p_true);
        Kappa::Value((p_bar - p_e) / (1.0 - p_e))
    };
    Ok(FleissKappa {
        kappa,
        items_used: used,
        items_dropped: table.items.len() - used,
        raters: n,
    })
}
