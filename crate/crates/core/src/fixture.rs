//! Seeded synthetic dataset standing in for real navigation videos.
//!
//! Labels follow a two-state Markov chain per object row, so objects stay in
//! view for several consecutive keyframes like they do in real footage.
//! Image references are placeholder URIs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Dataset, GroundTruth, Keyframe, ModelDescriptor, ModelKind, Segment, Vocabulary};
use crate::providers::PredictionCache;

/// Objects that essentially never occur in street footage.
pub const SPY_CANDIDATES: [&str; 4] = ["Turnstile", "Snow", "Hose", "Flush Door"];

const OBJECT_NAMES: [&str; 86] = [
    "Car",
    "Person",
    "Bicycle",
    "Motorcycle",
    "Bus",
    "Truck",
    "Traffic Light",
    "Stop Sign",
    "Crosswalk",
    "Sidewalk",
    "Curb",
    "Sloped Curb",
    "Sloped Driveway",
    "Pole",
    "Tree",
    "Bench",
    "Fire Hydrant",
    "Trash Can",
    "Mailbox",
    "Parking Meter",
    "Street Sign",
    "Door",
    "Stairs",
    "Escalator",
    "Elevator",
    "Handrail",
    "Ramp",
    "Wall",
    "Fence",
    "Gate",
    "Window",
    "Building",
    "Bus Stop",
    "Shelter",
    "Bollard",
    "Cone",
    "Barrier",
    "Construction Sign",
    "Scaffolding",
    "Manhole",
    "Grate",
    "Puddle",
    "Pothole",
    "Tactile Paving",
    "Pedestrian Signal",
    "Dog",
    "Stroller",
    "Wheelchair",
    "Shopping Cart",
    "Scooter",
    "Skateboard",
    "Planter",
    "Bush",
    "Grass",
    "Lamp Post",
    "Awning",
    "Table",
    "Chair",
    "Umbrella",
    "Sign Board",
    "Kiosk",
    "Vending Machine",
    "ATM",
    "Bicycle Rack",
    "Parking Lot",
    "Driveway",
    "Alley",
    "Bridge",
    "Tunnel",
    "Train",
    "Tram",
    "Taxi",
    "Van",
    "Traffic Cone",
    "Speed Bump",
    "Median",
    "Island",
    "Roundabout",
    "Intersection",
    "Road",
    "Lane Marking",
    "Parked Car",
    "Fountain",
    "Statue",
    "Newspaper Box",
    "Phone Booth",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prevalence {
    /// Every non-spy object is present with this stationary probability.
    Fixed(f64),
    /// Per-object probability drawn uniformly from `[min, max)`.
    PerObject { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureConfig {
    pub seed: u64,
    pub dataset_id: String,
    pub objects: usize,
    pub segments: usize,
    pub videos: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub prevalence: Prevalence,
    /// Label switching rate scale; smaller means longer runs.
    pub switch_rate: f64,
    /// Put the spy candidates at the end of the vocabulary.
    pub include_spies: bool,
}

impl FixtureConfig {
    /// 90 objects, 31 segments from 21 videos, 3 to 20 keyframes each.
    pub fn reference(seed: u64) -> Self {
        Self {
            seed,
            dataset_id: "fixture".into(),
            objects: 90,
            segments: 31,
            videos: 21,
            min_frames: 3,
            max_frames: 20,
            prevalence: Prevalence::PerObject { min: 0.05, max: 0.5 },
            switch_rate: 0.25,
            include_spies: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureBundle {
    pub dataset: Dataset,
    pub models: Vec<ModelDescriptor>,
    pub caches: Vec<PredictionCache>,
}

pub fn vocabulary_names(n: usize, include_spies: bool) -> Vec<String> {
    let regular = if include_spies {
        n.saturating_sub(SPY_CANDIDATES.len())
    } else {
        n
    };
    let mut names: Vec<String> = OBJECT_NAMES.iter().take(regular).map(|s| s.to_string()).collect();
    names.extend((names.len()..regular).map(|i| format!("Object {i}")));
    names.extend(SPY_CANDIDATES.iter().take(n - names.len()).map(|s| s.to_string()));
    names
}

fn markov_row(rng: &mut ChaCha8Rng, frames: usize, rho: f64, switch_rate: f64) -> Vec<bool> {
    let up = switch_rate * rho;
    let down = switch_rate * (1.0 - rho);
    let mut state = rng.random_bool(rho);
    (0..frames)
        .map(|_| {
            let v = state;
            state = if state {
                !rng.random_bool(down)
            } else {
                rng.random_bool(up)
            };
            v
        })
        .collect()
}

pub fn generate_dataset(config: &FixtureConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names = vocabulary_names(config.objects, config.include_spies);
    let vocabulary = Vocabulary::new(&names).expect("fixture names are unique");
    let rho: Vec<f64> = names
        .iter()
        .map(|n| {
            if SPY_CANDIDATES.contains(&n.as_str()) {
                0.0
            } else {
                match config.prevalence {
                    Prevalence::Fixed(p) => p,
                    Prevalence::PerObject { min, max } => rng.random_range(min..max),
                }
            }
        })
        .collect();

    let mut segments = Vec::with_capacity(config.segments);
    let mut ground_truth = BTreeMap::new();
    for s in 0..config.segments {
        // pin both ends of the frame range so the display cap gets exercised
        let frames = match s {
            0 => config.max_frames,
            1 => config.min_frames,
            _ => rng.random_range(config.min_frames..=config.max_frames),
        };
        let segment_id = format!("seg-{:02}", s + 1);
        let video_id = format!("video-{:02}", s % config.videos.max(1) + 1);
        let labels = names
            .iter()
            .zip(&rho)
            .map(|(name, &p)| (name.clone(), markov_row(&mut rng, frames, p, config.switch_rate)))
            .collect();
        segments.push(Segment {
            segment_id: segment_id.clone(),
            video_id: video_id.clone(),
            frames: (0..frames)
                .map(|index| Keyframe {
                    index,
                    image_ref: format!("placeholder://{video_id}/{segment_id}/{index:02}.jpg"),
                })
                .collect(),
        });
        ground_truth.insert(segment_id.clone(), GroundTruth { segment_id, labels });
    }
    Dataset {
        dataset_id: config.dataset_id.clone(),
        vocabulary,
        segments,
        ground_truth,
    }
}

pub const CACHED_MODEL_ID: &str = "cached-lmm";

/// Cached responses of an imperfect recognizer covering the whole
/// vocabulary: some rows are missed entirely, the rest carry sparse cell
/// errors.
pub fn generate_cached_responses(dataset: &Dataset, model_id: &str, seed: u64) -> Vec<PredictionCache> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cac4e);
    dataset
        .segments
        .iter()
        .map(|segment| {
            let gt = &dataset.ground_truth[&segment.segment_id];
            let predictions = gt
                .labels
                .iter()
                .map(|(name, row)| {
                    let missed = rng.random_bool(0.15);
                    let pred = row.iter().map(|&v| !missed && (v ^ rng.random_bool(0.08))).collect();
                    (name.clone(), pred)
                })
                .collect();
            PredictionCache {
                model_id: model_id.to_string(),
                dataset_id: dataset.dataset_id.clone(),
                segment_id: segment.segment_id.clone(),
                predictions,
            }
        })
        .collect()
}

/// The five study conditions: ground truth, fair coin, two synthetic noisy
/// recognizers and one cached recognizer.
pub fn default_models(seed: u64) -> Vec<ModelDescriptor> {
    vec![
        ModelDescriptor::new("gt", ModelKind::GroundTruth),
        ModelDescriptor::new("random", ModelKind::Random { seed }),
        ModelDescriptor::new(
            "noisy-10",
            ModelKind::SyntheticNoisy {
                flip_probability: 0.1,
                seed,
            },
        ),
        ModelDescriptor::new(
            "noisy-25",
            ModelKind::SyntheticNoisy {
                flip_probability: 0.25,
                seed,
            },
        ),
        ModelDescriptor::new(
            CACHED_MODEL_ID,
            ModelKind::Cached {
                cache_ref: CACHED_MODEL_ID.into(),
            },
        ),
    ]
}

pub fn generate(config: &FixtureConfig) -> FixtureBundle {
    let dataset = generate_dataset(config);
    let caches = generate_cached_responses(&dataset, CACHED_MODEL_ID, config.seed);
    FixtureBundle {
        dataset,
        models: default_models(config.seed),
        caches,
    }
}
