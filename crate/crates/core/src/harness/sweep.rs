use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{run_comparison, Registries, RunPoint, RunRecord};
use super::spec::{ExperimentSpec, SourceSpec, SweepAxis};
use super::{aggregate, batch_size_for, mean, standard_error, AggregateMode, Summary};
use crate::data::{
    apply_grouping, generate_circles, subsample, CircleSpec, DatasetBundle, LabeledDataset,
    SourceRegistry, SplitKind,
};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn::match_capacity;
use crate::seed;

const POOL_STREAM: u64 = 10;
const TEST_STREAM: u64 = 11;
const REPLICATE_STREAM: u64 = 12;
const FRESH_DATA_STREAM: u64 = 13;

/// Where the training samples of each replicate come from.
#[derive(Debug, Clone)]
pub enum TrainSource {
    /// A fixed pool that every replicate subsamples.
    Pool(LabeledDataset),
    /// A fresh circles draw per replicate, seeded by the replicate.
    Circles(CircleSpec),
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: TrainSource,
    pub test: LabeledDataset,
}

impl PreparedData {
    /// Training pool for one replicate.
    pub fn pool_for(&self, train_size: usize, replicate_seed: u64) -> Result<LabeledDataset> {
        match &self.train {
            TrainSource::Pool(pool) => Ok(pool.clone()),
            TrainSource::Circles(template) => generate_circles(&CircleSpec {
                n_points: train_size,
                seed: seed::derive(replicate_seed, FRESH_DATA_STREAM),
                ..template.clone()
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.test.dim()
    }

    pub fn k(&self) -> usize {
        self.test.k()
    }
}

/// Loads or generates the data a spec describes. `redundancy` overrides the
/// circles redundancy for the redundancy axis.
pub fn prepare_data(
    spec: &ExperimentSpec,
    sources: &SourceRegistry,
    redundancy: Option<f64>,
) -> Result<PreparedData> {
    let test_seed = seed::derive(spec.seed, TEST_STREAM);
    match &spec.source {
        SourceSpec::Circles { pool_size, .. } => {
            let test_spec = spec
                .source
                .circle_spec(spec.test_size, test_seed, redundancy)
                .expect("circles source");
            let test = generate_circles(&test_spec)?;
            let train = match pool_size {
                Some(n) => {
                    let pool_seed = seed::derive(spec.seed, POOL_STREAM);
                    let s = spec
                        .source
                        .circle_spec(*n, pool_seed, redundancy)
                        .expect("circles");
                    TrainSource::Pool(generate_circles(&s)?)
                }
                None => TrainSource::Circles(test_spec),
            };
            Ok(PreparedData { train, test })
        }
        SourceSpec::Real {
            dataset, grouping, ..
        } => {
            let dir = spec.source.data_dir().ok_or_else(|| {
                Error::config(format!(
                    "no data directory: set data_dir or {}",
                    super::DATA_DIR_ENV
                ))
            })?;
            let source = sources.get(dataset)?;
            let grouping = grouping.resolve()?;
            let pool = apply_grouping(&source.load(&dir, SplitKind::Train)?, &grouping)?;
            let test_all = apply_grouping(&source.load(&dir, SplitKind::Test)?, &grouping)?;
            let n = spec.test_size.min(test_all.len());
            let test = subsample(&test_all, n, test_seed, true)?;
            Ok(PreparedData {
                train: TrainSource::Pool(pool),
                test,
            })
        }
        SourceSpec::File { path } => {
            let bundle = DatasetBundle::load(path)?;
            split_bundle(bundle, spec.test_size, test_seed)
        }
    }
}

/// Uses the bundle's own test set when it has one; otherwise holds out
/// `test_size` stratified samples of the training data.
pub fn split_bundle(bundle: DatasetBundle, test_size: usize, seed_: u64) -> Result<PreparedData> {
    let (pool, test) = match bundle.test {
        Some(test) => {
            let n = test_size.min(test.len());
            let test = subsample(&test, n, seed_, true)?;
            (bundle.train, test)
        }
        None => {
            let all = bundle.train;
            if test_size >= all.len() {
                return Err(Error::domain(format!(
                    "cannot hold out {test_size} test samples from a dataset of {}",
                    all.len()
                )));
            }
            let held = crate::data::subsample_indices(&all, test_size, seed_, true)?;
            let mut is_held = vec![false; all.len()];
            for &i in &held {
                is_held[i] = true;
            }
            let rest: Vec<usize> = (0..all.len()).filter(|&i| !is_held[i]).collect();
            (all.select(&rest), all.select(&held))
        }
    };
    Ok(PreparedData {
        train: TrainSource::Pool(pool),
        test,
    })
}

/// One position on the sweep axis, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub redundancy: Option<f64>,
    pub run: RunPoint,
}

/// Resolves every axis value into a run configuration.
///
/// `d` and `k` are needed for capacity matching. Points of the
/// `param_data_ratio` axis are ordered by their `n/p` value.
pub fn sweep_points(spec: &ExperimentSpec, d: usize, k: usize) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let make = |train_size: usize, fine_hidden: usize, loss: LossKind| {
        let coarse_hidden = spec
            .coarse_hidden
            .unwrap_or_else(|| match_capacity(fine_hidden, d, k));
        let mut train = spec.train.clone();
        train.batch_size = spec
            .batch_size
            .unwrap_or_else(|| batch_size_for(train_size));
        RunPoint {
            train_size,
            fine_hidden,
            coarse_hidden,
            activation: spec.activation,
            fine_loss: loss,
            train,
            stratified: spec.stratified,
        }
    };
    let fixed = spec.train_size.unwrap_or(0);
    let mut points: Vec<SweepPoint> = Vec::new();
    for &v in &spec.values {
        match spec.axis {
            SweepAxis::TrainSize => points.push(SweepPoint {
                axis_value: v,
                redundancy: None,
                run: make(v as usize, spec.fine_hidden, spec.fine_loss),
            }),
            SweepAxis::HiddenNeurons => points.push(SweepPoint {
                axis_value: v,
                redundancy: None,
                run: make(fixed, v as usize, spec.fine_loss),
            }),
            SweepAxis::Redundancy => points.push(SweepPoint {
                axis_value: v,
                redundancy: Some(v),
                run: make(fixed, spec.fine_hidden, spec.fine_loss),
            }),
            SweepAxis::Beta => points.push(SweepPoint {
                axis_value: v,
                redundancy: None,
                run: make(fixed, spec.fine_hidden, LossKind::Hybrid { beta: v }),
            }),
            SweepAxis::ParamDataRatio => {
                for &n in &spec.hidden_values {
                    let run = make(v as usize, n, spec.fine_loss);
                    let params = n * (d + 1) + k * (n + 1);
                    points.push(SweepPoint {
                        axis_value: params as f64 / run.train_size as f64,
                        redundancy: None,
                        run,
                    });
                }
            }
        }
    }
    points.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    Ok(points)
}

/// Replicate seed `i` of a spec; shared by every point so that points form a
/// paired design.
pub fn replicate_seed(spec_seed: u64, replicate: usize) -> u64 {
    seed::derive(seed::derive(spec_seed, REPLICATE_STREAM), replicate as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ReplicateOutcome {
    Ok(RunRecord),
    Failed { seed: u64, error: String },
}

impl ReplicateOutcome {
    pub fn record(&self) -> Option<&RunRecord> {
        match self {
            ReplicateOutcome::Ok(r) => Some(r),
            ReplicateOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    /// In replicate order.
    pub replicates: Vec<ReplicateOutcome>,
}

impl PointResult {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.replicates.iter().filter_map(ReplicateOutcome::record)
    }

    pub fn failures(&self) -> usize {
        self.replicates.len() - self.records().count()
    }

    pub fn summarize(&self, mode: AggregateMode) -> AggregatedPoint {
        let fine: Vec<f64> = self.records().map(|r| r.acc_fine_test).collect();
        let coarse: Vec<f64> = self.records().map(|r| r.acc_coarse_test).collect();
        let deltas: Vec<f64> = self.records().map(RunRecord::delta).collect();
        let summarize = |v: &[f64]| -> Option<Summary> {
            match (v.len(), mode) {
                (0, _) => None,
                // A lone run has no spread; report it with an undefined one.
                (1, AggregateMode::StandardError) => Some(Summary::StandardError {
                    mean: v[0],
                    se: f64::NAN,
                }),
                _ => aggregate(v, mode).ok(),
            }
        };
        let run = &self.point.run;
        AggregatedPoint {
            axis_value: self.point.axis_value,
            fine: summarize(&fine),
            coarse: summarize(&coarse),
            delta: (!deltas.is_empty()).then(|| mean(&deltas)),
            delta_se: (!deltas.is_empty()).then(|| standard_error(&deltas).unwrap_or(f64::NAN)),
            n_over_p: self.records().next().map_or(f64::NAN, RunRecord::n_over_p),
            train_size: run.train_size,
            fine_hidden: run.fine_hidden,
            coarse_hidden: run.coarse_hidden,
            replicates: fine.len(),
            failures: self.failures(),
        }
    }
}

/// Replicate statistics at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedPoint {
    pub axis_value: f64,
    pub fine: Option<Summary>,
    pub coarse: Option<Summary>,
    /// Mean paired difference `acc_fine - acc_coarse`.
    pub delta: Option<f64>,
    pub delta_se: Option<f64>,
    pub n_over_p: f64,
    pub train_size: usize,
    pub fine_hidden: usize,
    pub coarse_hidden: usize,
    /// Successful replicates.
    pub replicates: usize,
    pub failures: usize,
}

/// Progress report emitted after each completed point.
#[derive(Debug, Clone)]
pub struct PointProgress<'a> {
    pub index: usize,
    pub total: usize,
    pub result: &'a PointResult,
    pub summary: AggregatedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn aggregated(&self) -> Vec<AggregatedPoint> {
        self.points
            .iter()
            .map(|p| p.summarize(self.spec.aggregate))
            .collect()
    }

    /// True when some point has no successful replicate.
    pub fn has_empty_point(&self) -> bool {
        self.points.iter().any(|p| p.records().next().is_none())
    }
}

/// Runs every point of a spec. Replicates of a point run in parallel and are
/// collected in replicate order; failed replicates are recorded, not fatal.
pub fn sweep(
    spec: &ExperimentSpec,
    registries: &Registries,
    sources: &SourceRegistry,
    mut progress: impl FnMut(PointProgress<'_>),
) -> Result<SweepResult> {
    spec.validate()?;
    let base = prepare_data(spec, sources, None)?;
    let points = sweep_points(spec, base.dim(), base.k())?;
    let seeds: Vec<u64> = (0..spec.replicates)
        .map(|i| replicate_seed(spec.seed, i))
        .collect();
    let total = points.len();
    let mut results = Vec::with_capacity(total);
    for (index, point) in points.into_iter().enumerate() {
        let data = match point.redundancy {
            Some(r) => prepare_data(spec, sources, Some(r))?,
            None => base.clone(),
        };
        let replicates: Vec<ReplicateOutcome> = seeds
            .par_iter()
            .map(|&s| {
                data.pool_for(point.run.train_size, s)
                    .and_then(|pool| run_comparison(registries, &pool, &data.test, &point.run, s))
                    .map_or_else(
                        |e| ReplicateOutcome::Failed {
                            seed: s,
                            error: e.to_string(),
                        },
                        ReplicateOutcome::Ok,
                    )
            })
            .collect();
        let result = PointResult { point, replicates };
        progress(PointProgress {
            index,
            total,
            result: &result,
            summary: result.summarize(spec.aggregate),
        });
        results.push(result);
    }
    Ok(SweepResult {
        spec: spec.clone(),
        points: results,
    })
}
