//! Latin-square counterbalancing of model conditions and video segments.
//!
//! A participant's 25 trials are five blocks of five. In block `b` the model
//! order is row `b` of a model square `M`, and the segment paired with model
//! `m` is `S[b][m]` from an independent segment square `S`. Because `S` is
//! Latin, each model meets every segment exactly once over the five blocks.
//! Participant `p` starts at row `p mod 5` of both squares, so five
//! consecutive participants cover every row once.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of models and of segments in the canonical design.
pub const CANONICAL_CONDITIONS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("latin square order must be at least 1")]
    ZeroOrder,
    #[error("design needs exactly {expected} models and {expected} segments, got {models} and {segments}")]
    ConditionCount {
        expected: usize,
        models: usize,
        segments: usize,
    },
    #[error("at least one participant required")]
    NoParticipants,
}

pub type LatinSquare = Vec<Vec<usize>>;

/// `L[i][j] = (i + j) mod n`.
pub fn cyclic_latin_square(n: usize) -> Result<LatinSquare, ScheduleError> {
    if n == 0 {
        return Err(ScheduleError::ZeroOrder);
    }
    Ok((0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect())
}

/// Cyclic square with seeded row and column shuffles.
pub fn latin_square(n: usize, seed: u64) -> Result<LatinSquare, ScheduleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled_square(n, &mut rng)
}

fn shuffled_square(n: usize, rng: &mut ChaCha8Rng) -> Result<LatinSquare, ScheduleError> {
    let base = cyclic_latin_square(n)?;
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    Ok(rows
        .iter()
        .map(|&r| cols.iter().map(|&c| base[r][c]).collect())
        .collect())
}

pub fn is_latin(square: &[Vec<usize>]) -> bool {
    let n = square.len();
    let is_perm = |values: Vec<usize>| {
        let mut seen = vec![false; n];
        values
            .into_iter()
            .all(|v| v < n && !std::mem::replace(&mut seen[v], true))
    };
    square.iter().all(|r| r.len() == n)
        && square.iter().all(|r| is_perm(r.clone()))
        && (0..n).all(|c| is_perm(square.iter().map(|r| r[c]).collect()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub model_id: String,
    pub segment_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub participant_id: String,
    pub trials: Vec<Trial>,
    /// Neutral labels shown instead of model ids.
    pub blinded_labels: BTreeMap<String, String>,
}

/// Trial plans for `participants` raters over the canonical 5 × 5 design.
pub fn build_plans(
    participants: usize,
    models: &[String],
    segments: &[String],
    seed: u64,
) -> Result<Vec<TrialPlan>, ScheduleError> {
    if models.len() != CANONICAL_CONDITIONS || segments.len() != CANONICAL_CONDITIONS {
        return Err(ScheduleError::ConditionCount {
            expected: CANONICAL_CONDITIONS,
            models: models.len(),
            segments: segments.len(),
        });
    }
    if participants == 0 {
        return Err(ScheduleError::NoParticipants);
    }
    let n = CANONICAL_CONDITIONS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model_square = shuffled_square(n, &mut rng)?;
    let segment_square = shuffled_square(n, &mut rng)?;

    let mut plans = Vec::with_capacity(participants);
    for p in 0..participants {
        let mut trials = Vec::with_capacity(n * n);
        for block in 0..n {
            let row = (block + p) % n;
            for &m in &model_square[row] {
                trials.push(Trial {
                    model_id: models[m].clone(),
                    segment_id: segments[segment_square[row][m]].clone(),
                });
            }
        }
        let mut labels: Vec<usize> = (1..=n).collect();
        labels.shuffle(&mut rng);
        let blinded_labels = models
            .iter()
            .zip(labels)
            .map(|(m, k)| (m.clone(), format!("Model {k}")))
            .collect();
        plans.push(TrialPlan {
            participant_id: format!("P{}", p + 1),
            trials,
            blinded_labels,
        });
    }
    Ok(plans)
}
