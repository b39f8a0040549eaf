use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ImageRecord, StoreError};
use crate::types::{Condition, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub heldout_per_condition: usize,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            seed,
            heldout_per_condition: 100,
        }
    }
}

/// Partition of the real adverse-condition images into the Gaussian fitting
/// pool and the held-out baseline pool. Ids keep manifest order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub fit: BTreeMap<Condition, Vec<String>>,
    pub heldout: BTreeMap<Condition, Vec<String>>,
}

impl Split {
    pub fn fit_ids(&self) -> Vec<String> {
        self.fit.values().flatten().cloned().collect()
    }

    pub fn heldout_ids(&self) -> Vec<String> {
        self.heldout.values().flatten().cloned().collect()
    }
}

/// Chooses `heldout_per_condition` real images per adverse condition.
///
/// Records marked `heldout_real` are always held out and count toward the
/// quota; the remainder is drawn from `reference_real` records with a
/// ChaCha stream keyed by the seed and the condition.
pub fn split_holdout(records: &[ImageRecord], spec: &SplitSpec) -> Result<Split, StoreError> {
    if spec.heldout_per_condition == 0 {
        return Err(StoreError::Split(
            "heldout_per_condition must be positive".into(),
        ));
    }
    let mut split = Split::default();
    for condition in Condition::ADVERSE {
        let pool: Vec<&ImageRecord> = records
            .iter()
            .filter(|r| r.condition == condition && r.role.is_real_adverse())
            .collect();
        if pool.is_empty() {
            continue;
        }
        if pool.len() < spec.heldout_per_condition {
            return Err(StoreError::Split(format!(
                "{condition}: {} real images, {} requested for hold-out",
                pool.len(),
                spec.heldout_per_condition
            )));
        }
        let pinned = pool.iter().filter(|r| r.role == Role::HeldoutReal).count();
        if pinned > spec.heldout_per_condition {
            return Err(StoreError::Split(format!(
                "{condition}: {pinned} images marked heldout_real exceed the quota of {}",
                spec.heldout_per_condition
            )));
        }
        let mut candidates: Vec<usize> = (0..pool.len())
            .filter(|&i| pool[i].role == Role::ReferenceReal)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(condition as u64);
        let (drawn, _) = candidates.partial_shuffle(&mut rng, spec.heldout_per_condition - pinned);
        let mut held = vec![false; pool.len()];
        for &i in drawn.iter() {
            held[i] = true;
        }
        for (i, r) in pool.iter().enumerate() {
            let bucket = if held[i] || r.role == Role::HeldoutReal {
                &mut split.heldout
            } else {
                &mut split.fit
            };
            bucket.entry(condition).or_default().push(r.image_id.clone());
        }
    }
    Ok(split)
}
