//! Synthetic raters that mimic how evaluators judged heatmaps: a quick
//! rejection of checkered-looking output, partial inspection that starts
//! with outliers and spot-checks uni-color rows, and suspicion of any model
//! that reports a spy object.
//!
//! With a full inspection budget the rater verifies every cell, so the
//! shortcuts (checkered rejection, spy penalty, extrapolation) drop out and
//! the rating is `round10(100 * accuracy)` plus noise.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Dataset, GroundTruth, ModelDescriptor, SelectedObject};
use crate::fixture::SPY_CANDIDATES;
use crate::metrics::{f1_global, MetricsError};
use crate::patterns::{analyze_row, checkeredness, PatternError};
use crate::providers::{keyed_u64, predict, CacheStore, ProviderError};
use crate::session::{CreateParams, DisplayGrid, Session, SessionError, MAX_FRAMES};
use crate::stats::{analyze, AnalysisOptions, AnalysisReport, RatingRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("reference labels do not cover {0:?}")]
    MissingTruth(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("experiment needs at least {0}")]
    Config(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RaterPolicy {
    /// Checkered score above which the grid is judged random-looking.
    pub checkered_penalty_threshold: f64,
    /// Confidence gained per unit fraction of verified-correct outliers.
    pub outlier_verify_bonus: f64,
    /// Weight of unchecked cells in rows whose spot checks passed.
    pub unicolor_trust_weight: f64,
    /// Fraction of cells actually verified, in (0, 1].
    pub inspection_budget: f64,
    /// Rating noise in percentage points.
    pub noise_sd: f64,
    /// Score multiplier when any spy cell shows as present.
    pub spy_penalty: f64,
    pub seed: u64,
}

impl Default for RaterPolicy {
    fn default() -> Self {
        Self {
            checkered_penalty_threshold: 0.35,
            outlier_verify_bonus: 0.1,
            unicolor_trust_weight: 1.0,
            inspection_budget: 0.5,
            noise_sd: 5.0,
            spy_penalty: 0.5,
            seed: 0,
        }
    }
}

impl RaterPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        let weights = [
            self.checkered_penalty_threshold,
            self.outlier_verify_bonus,
            self.unicolor_trust_weight,
            self.noise_sd,
            self.spy_penalty,
        ];
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(SimError::Policy("weights must be finite".into()));
        }
        if !(self.inspection_budget > 0.0 && self.inspection_budget <= 1.0) {
            return Err(SimError::Policy(format!(
                "inspection budget {} outside (0, 1]",
                self.inspection_budget
            )));
        }
        if self.noise_sd < 0.0 {
            return Err(SimError::Policy("noise_sd must be non-negative".into()));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Ceiling of the quick-rejection rating.
const REJECT_CEILING: f64 = 30.0;
/// Checkered score of a fair-coin grid.
const COIN_CHECKEREDNESS: f64 = 0.5;

fn round_rating(x: f64) -> u8 {
    ((x / 10.0).round() * 10.0).clamp(0.0, 100.0) as u8
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Probe {
    Outlier,
    SpotCheck,
    Other,
}

/// Rates one displayed grid against the labels of the same selection.
pub fn simulate_rating(policy: &RaterPolicy, display: &DisplayGrid, gt: &GroundTruth) -> Result<u8, SimError> {
    policy.validate()?;
    let shown = display.shown_matrix();
    let truth: Vec<Vec<bool>> = display
        .rows
        .iter()
        .map(|row| match gt.row(&row.object) {
            Some(labels) => Ok(display.frames.iter().map(|&f| labels[f]).collect()),
            None if row.is_spy => Ok(vec![false; display.frames.len()]),
            None => Err(SimError::MissingTruth(row.object.clone())),
        })
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let noise = Normal::new(0.0, policy.noise_sd).expect("validated sd");
    let full = policy.inspection_budget >= 1.0;

    let checkered: f64 = checkeredness(&shown)?;
    if !full && checkered > policy.checkered_penalty_threshold {
        let span = (COIN_CHECKEREDNESS - policy.checkered_penalty_threshold).max(f64::EPSILON);
        let grade = ((COIN_CHECKEREDNESS - checkered) / span).clamp(0.0, 1.0);
        let rating = (REJECT_CEILING * grade + noise.sample(&mut rng)).clamp(0.0, REJECT_CEILING);
        return Ok(round_rating(rating));
    }

    let cols = display.frames.len();
    let cells = shown.len() * cols;
    let correct = |r: usize, c: usize| shown[r][c] == truth[r][c];

    // inspection order: outliers and islands, then the first cells of
    // uni-color rows, then everything else at random
    let mut order: Vec<(usize, usize, Probe)> = Vec::with_capacity(cells);
    let mut queued = BTreeSet::new();
    let mut uni_rows = Vec::new();
    for (r, row) in shown.iter().enumerate() {
        let p = analyze_row(row);
        if p.uni_color.is_some() {
            uni_rows.push(r);
        }
        let outlier_cols = p
            .outliers
            .iter()
            .copied()
            .chain(p.islands.iter().flat_map(|run| run.start..run.start + run.len));
        for c in outlier_cols {
            if queued.insert((r, c)) {
                order.push((r, c, Probe::Outlier));
            }
        }
    }
    for &r in &uni_rows {
        for c in 0..cols.min(2) {
            if queued.insert((r, c)) {
                order.push((r, c, Probe::SpotCheck));
            }
        }
    }
    let mut rest: Vec<(usize, usize)> = (0..shown.len())
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|rc| !queued.contains(rc))
        .collect();
    rest.shuffle(&mut rng);
    order.extend(rest.into_iter().map(|(r, c)| (r, c, Probe::Other)));

    let budget = ((policy.inspection_budget * cells as f64).ceil() as usize).clamp(1, cells);
    let (inspected, unchecked) = order.split_at(budget);
    let verified = inspected.iter().filter(|(r, c, _)| correct(*r, *c)).count() as f64;
    let accuracy = verified / inspected.len() as f64;

    let score = if full {
        accuracy
    } else {
        let outliers: Vec<_> = inspected.iter().filter(|p| p.2 == Probe::Outlier).collect();
        let outlier_ok = if outliers.is_empty() {
            0.0
        } else {
            outliers.iter().filter(|(r, c, _)| correct(*r, *c)).count() as f64 / outliers.len() as f64
        };
        let prior = (accuracy + policy.outlier_verify_bonus * outlier_ok).min(1.0);
        let trusted: BTreeSet<usize> = uni_rows
            .iter()
            .copied()
            .filter(|&r| {
                inspected
                    .iter()
                    .filter(|p| p.0 == r && p.2 == Probe::SpotCheck)
                    .all(|p| correct(p.0, p.1))
            })
            .collect();
        let (mut num, mut den) = (verified, inspected.len() as f64);
        for &(r, _, _) in unchecked {
            if trusted.contains(&r) {
                num += policy.unicolor_trust_weight;
                den += policy.unicolor_trust_weight;
            } else {
                num += prior;
                den += 1.0;
            }
        }
        let mut score = num / den;
        let spy_hit = display
            .rows
            .iter()
            .zip(&shown)
            .any(|(row, cells)| row.is_spy && cells.iter().any(|&v| v));
        if spy_hit {
            score *= policy.spy_penalty;
        }
        score
    };

    let rating = 100.0 * score
        + if policy.noise_sd > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
    Ok(round_rating(rating))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub models: Vec<ModelDescriptor>,
    pub segments: Vec<String>,
    pub raters: usize,
    #[serde(default)]
    pub policy: RaterPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_objects_per_trial")]
    pub objects_per_trial: usize,
    #[serde(default)]
    pub spies_per_trial: usize,
}

fn default_objects_per_trial() -> usize {
    8
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RatingRecord>,
    /// Dataset-level F1 of every model.
    pub model_f1: BTreeMap<String, f64>,
    pub report: AnalysisReport<f64>,
}

/// Picks half present and half absent objects for a trial, plus spies.
fn choose_selection(
    dataset: &Dataset,
    gt: &GroundTruth,
    frames: usize,
    count: usize,
    spies: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<SelectedObject> {
    let regular: Vec<&String> = dataset
        .vocabulary
        .objects()
        .iter()
        .filter(|o| !SPY_CANDIDATES.contains(&o.as_str()))
        .collect();
    let (present, absent): (Vec<&String>, Vec<&String>) = regular
        .into_iter()
        .partition(|o| gt.row(o).is_some_and(|r| r[..frames].iter().any(|&v| v)));
    let want_present = (count / 2).min(present.len());
    let mut chosen: Vec<SelectedObject> = present
        .choose_multiple(rng, want_present)
        .map(|o| SelectedObject::new(o.as_str()))
        .collect();
    chosen.extend(
        absent
            .choose_multiple(rng, count.saturating_sub(chosen.len()))
            .map(|o| SelectedObject::new(o.as_str())),
    );
    chosen.extend(
        SPY_CANDIDATES
            .choose_multiple(rng, spies)
            .map(|s| SelectedObject::spy(*s)),
    );
    chosen
}

fn epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(0, 0).expect("epoch")
}

/// Every rater rates every (model, segment) pair through a session; the
/// report regresses median normalized rating on dataset-level F1.
pub fn run_experiment(
    dataset: &Dataset,
    caches: &CacheStore,
    config: &ExperimentConfig,
) -> Result<ExperimentOutput, SimError> {
    config.policy.validate()?;
    if config.raters == 0 {
        return Err(SimError::Config("one rater".into()));
    }
    if config.models.is_empty() || config.segments.is_empty() {
        return Err(SimError::Config("one model and one segment".into()));
    }
    if config.objects_per_trial == 0 {
        return Err(SimError::Config("one object per trial".into()));
    }

    let mut model_f1 = BTreeMap::new();
    for model in &config.models {
        model_f1.insert(model.model_id.clone(), f1_global::<f64>(model, dataset, caches)?);
    }

    let mut records = Vec::new();
    let mut trial = 0i64;
    for r in 0..config.raters {
        let rater_id = format!("sim-{:02}", r + 1);
        for segment_id in &config.segments {
            let segment = dataset
                .segment(segment_id)
                .ok_or_else(|| SimError::UnknownSegment(segment_id.clone()))?;
            let gt = &dataset.ground_truth[segment_id];
            let frames = segment.frame_count().min(MAX_FRAMES);
            let mut sel_rng = ChaCha8Rng::seed_from_u64(keyed_u64(config.seed, &[&rater_id, segment_id], 0));
            let selection = choose_selection(
                dataset,
                gt,
                frames,
                config.objects_per_trial,
                config.spies_per_trial,
                &mut sel_rng,
            );
            for model in &config.models {
                let start = epoch() + Duration::seconds(trial * 60);
                trial += 1;
                let mut session = Session::create_at(
                    format!("{rater_id}/{}/{segment_id}", model.model_id),
                    CreateParams {
                        rater_id: rater_id.clone(),
                        dataset_id: dataset.dataset_id.clone(),
                        model_id: model.model_id.clone(),
                        segment_id: segment_id.clone(),
                        frame_count: segment.frame_count(),
                    },
                    start,
                )?;
                for obj in &selection {
                    let raw = if obj.is_spy {
                        format!("*{}", obj.name)
                    } else {
                        obj.name.clone()
                    };
                    session.submit_at(
                        crate::session::EventKind::AddObject { raw_name: raw },
                        start,
                        &dataset.vocabulary,
                    )?;
                }
                let grid = predict(model, segment, &session.state().selected_objects, gt, caches)?;
                let display = session.render(&grid)?;
                let policy = config.policy.with_seed(keyed_u64(
                    config.seed ^ config.policy.seed,
                    &[&rater_id, &model.model_id, segment_id],
                    1,
                ));
                let rating = simulate_rating(&policy, &display, gt)?;
                let mut record = session.record_and_reset_at(rating, None, &grid, gt, &dataset.vocabulary, start)?;
                record.completion_seconds = None;
                records.push(record);
            }
        }
    }

    let options = AnalysisOptions {
        random_models: config
            .models
            .iter()
            .filter(|m| m.is_random())
            .map(|m| m.model_id.clone())
            .collect(),
        model_f1: model_f1.clone(),
    };
    let report = analyze(&records, &options);
    Ok(ExperimentOutput {
        records,
        model_f1,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::CellColor;
    use crate::session::{ColorMode, DisplayCell, DisplayRow};

    fn display(rows: &[(&str, bool, Vec<bool>)]) -> DisplayGrid {
        let cols = rows[0].2.len();
        DisplayGrid {
            session_id: "s".into(),
            model_id: "m".into(),
            segment_id: "seg".into(),
            color_mode: ColorMode::Default,
            frames: (0..cols).collect(),
            rows: rows
                .iter()
                .map(|(name, spy, cells)| DisplayRow {
                    object: name.to_string(),
                    is_spy: *spy,
                    cells: cells
                        .iter()
                        .enumerate()
                        .map(|(f, &v)| DisplayCell {
                            frame: f,
                            predicted: v,
                            shown_color: CellColor::of(v),
                            is_toggled: false,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn truth(rows: &[(&str, bool, Vec<bool>)]) -> GroundTruth {
        GroundTruth {
            segment_id: "seg".into(),
            labels: rows
                .iter()
                .filter(|r| !r.1)
                .map(|(n, _, c)| (n.to_string(), c.clone()))
                .collect(),
        }
    }

    fn blocky() -> Vec<(&'static str, bool, Vec<bool>)> {
        vec![
            ("Car", false, vec![true, true, true, true, false, false, false, false]),
            ("Tree", false, vec![false; 8]),
            ("Bench", false, vec![false, false, true, true, true, true, true, true]),
        ]
    }

    #[test]
    fn perfect_grid_rates_high() {
        let rows = blocky();
        for seed in 0..50 {
            let policy = RaterPolicy {
                seed,
                ..Default::default()
            };
            assert!(simulate_rating(&policy, &display(&rows), &truth(&rows)).unwrap() >= 80);
        }
    }

    #[test]
    fn checkered_grid_is_rejected() {
        let alt: Vec<bool> = (0..8).map(|i| i % 2 == 0).collect();
        let rows = vec![("Car", false, alt.clone()), ("Tree", false, alt)];
        let r = simulate_rating(&RaterPolicy::default(), &display(&rows), &truth(&rows)).unwrap();
        assert!(r <= 30);
    }

    #[test]
    fn hallucinated_spy_halves_the_score() {
        let mut rows = blocky();
        rows.push(("Snow", true, vec![false; 8]));
        let policy = RaterPolicy {
            noise_sd: 0.0,
            ..Default::default()
        };
        let gt = truth(&rows);
        assert_eq!(simulate_rating(&policy, &display(&rows), &gt).unwrap(), 100);
        let mut shown = rows.clone();
        shown[3].2[7] = true;
        let r = simulate_rating(&policy, &display(&shown), &gt).unwrap();
        assert!(r <= 50, "{r}");
    }

    #[test]
    fn full_information_rating_is_accuracy() {
        let rows = blocky();
        let gt = truth(&rows);
        let policy = RaterPolicy {
            inspection_budget: 1.0,
            noise_sd: 0.0,
            ..Default::default()
        };
        let mut shown = rows.clone();
        for c in 0..6 {
            shown[1].2[c] = true;
        }
        // 18 of 24 cells right
        assert_eq!(simulate_rating(&policy, &display(&shown), &gt).unwrap(), 80);
    }

    #[test]
    fn invalid_policy_and_missing_truth() {
        let rows = blocky();
        let bad = RaterPolicy {
            inspection_budget: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            simulate_rating(&bad, &display(&rows), &truth(&rows)),
            Err(SimError::Policy(_))
        ));
        let gt = truth(&rows[..1]);
        assert!(matches!(
            simulate_rating(&RaterPolicy::default(), &display(&rows), &gt),
            Err(SimError::MissingTruth(_))
        ));
    }
}
