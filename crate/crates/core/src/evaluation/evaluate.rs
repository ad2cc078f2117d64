use crate::error::{Error, Result};
use crate::geometry::SurfacePoint;
use crate::pipeline::{extract_samples, train_pipeline, training_stats, PipelineConfig, PipelineModel, SampleSet};
use crate::simulator::Dataset;

use super::metrics::{
    error_vs_force_profile, localization_error, rg_force_baseline, rg_loc_baseline, ErrorMap, ErrorProfile,
};
use super::receptive::{receptive_field_report, ReceptiveFieldReport};
use super::split::SplitPlan;
use super::stats::{cohens_d, median_iqr, wilcoxon_signed_rank, WilcoxonResult};

/// Row labels of the localization tables: the four grid nets, then the fusion.
pub const NET_NAMES: [&str; 5] = ["SG-NN", "VSG-NN", "HSG-NN", "DSG-NN", "UNION"];

const PROFILE_BINS: usize = 10;
const MAP_PITCH_MM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub iqr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        let (median, iqr) = median_iqr(values)?;
        Ok(Self { median, iqr, n: values.len() })
    }
}

/// Paired comparison of a baseline's errors against the model's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// `x` = baseline errors, `y` = model errors.
    pub wilcoxon: WilcoxonResult,
    /// Effect size of `baseline − model` error differences.
    pub cohens_d: f64,
}

impl Comparison {
    fn of(baseline: &[f64], model: &[f64]) -> Result<Self> {
        let diffs: Vec<f64> = baseline.iter().zip(model).map(|(b, m)| b - m).collect();
        Ok(Self { wilcoxon: wilcoxon_signed_rank(baseline, model, true)?, cohens_d: cohens_d(&diffs)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub force_train: Summary,
    pub force_val: Summary,
    /// One entry per [`NET_NAMES`] row.
    pub loc_train: Vec<Summary>,
    pub loc_val: Vec<Summary>,
}

/// Fold-level aggregates in both reporting conventions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSummary {
    pub median_of_medians: f64,
    pub iqr_of_medians: f64,
    /// All validation errors pooled across folds.
    pub pooled: Summary,
}

impl CvSummary {
    fn of(fold_medians: &[f64], pooled: &[f64]) -> Result<Self> {
        let (median_of_medians, iqr_of_medians) = median_iqr(fold_medians)?;
        Ok(Self { median_of_medians, iqr_of_medians, pooled: Summary::of(pooled)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub force: CvSummary,
    /// One entry per [`NET_NAMES`] row.
    pub loc: Vec<CvSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMetrics {
    pub force: Summary,
    /// One entry per [`NET_NAMES`] row.
    pub loc: Vec<Summary>,
    pub rg_force: f64,
    pub rg_force_error: Summary,
    pub rg_loc: SurfacePoint,
    pub rg_loc_error: Summary,
    pub force_vs_rg: Comparison,
    pub loc_vs_rg: Comparison,
    pub profile: ErrorProfile,
    pub force_map: ErrorMap,
    pub loc_map: ErrorMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub test: TestMetrics,
    pub cv: CrossValidation,
    pub receptive: ReceptiveFieldReport,
}

fn force_errors(model: &PipelineModel, s: &SampleSet) -> Result<Vec<f64>> {
    let pred = model.predict_forces(&s.windows)?;
    Ok(pred.iter().zip(&s.force).map(|(p, t)| (p - t).abs()).collect())
}

/// Errors of each grid net followed by the fused prediction.
fn loc_errors(model: &PipelineModel, s: &SampleSet) -> Result<Vec<Vec<f64>>> {
    let loc = model.localize(&s.frames)?;
    let err = |pts: &[SurfacePoint]| pts.iter().zip(&s.location).map(|(p, t)| localization_error(*p, *t)).collect();
    let mut out: Vec<Vec<f64>> = loc.per_grid.iter().map(|p| err(p)).collect();
    out.push(err(&loc.fused));
    Ok(out)
}

fn samples(dataset: &Dataset, ids: &[u64], config: &PipelineConfig) -> Result<(SampleSet, SampleSet)> {
    let all = extract_samples(dataset, ids, config.frame_stride, config.window)?;
    let loc = all.above(config.gate);
    if all.is_empty() || loc.is_empty() {
        return Err(Error::Validation("split yields no evaluation samples".into()));
    }
    Ok((all, loc))
}

/// Held-out test metrics of `model`, with random-guess baselines fitted on
/// the plan's training split.
pub fn test_metrics(
    model: &PipelineModel,
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &PipelineConfig,
) -> Result<TestMetrics> {
    let (train, train_loc) = samples(dataset, &plan.train, config)?;
    let (test, test_loc) = samples(dataset, &plan.test, config)?;

    let force_err = force_errors(model, &test)?;
    let loc_err = loc_errors(model, &test_loc)?;
    let union_err = loc_err.last().expect("fused errors");

    let rg_force = rg_force_baseline(&train.force)?;
    let rg_force_err: Vec<f64> = test.force.iter().map(|f| (f - rg_force).abs()).collect();
    let rg_loc = rg_loc_baseline(&train_loc.location)?;
    let rg_loc_err: Vec<f64> = test_loc.location.iter().map(|p| localization_error(rg_loc, *p)).collect();

    let pairs: Vec<(f64, f64)> = test.force.iter().copied().zip(force_err.iter().copied()).collect();
    let area = dataset.layout.area();
    let force_map = ErrorMap::build(
        area,
        MAP_PITCH_MM,
        &test.location.iter().copied().zip(force_err.iter().copied()).collect::<Vec<_>>(),
    )?;
    let loc_map = ErrorMap::build(
        area,
        MAP_PITCH_MM,
        &test_loc.location.iter().copied().zip(union_err.iter().copied()).collect::<Vec<_>>(),
    )?;

    Ok(TestMetrics {
        force: Summary::of(&force_err)?,
        loc: loc_err.iter().map(|e| Summary::of(e)).collect::<Result<_>>()?,
        rg_force,
        rg_force_error: Summary::of(&rg_force_err)?,
        rg_loc,
        rg_loc_error: Summary::of(&rg_loc_err)?,
        force_vs_rg: Comparison::of(&rg_force_err, &force_err)?,
        loc_vs_rg: Comparison::of(&rg_loc_err, union_err)?,
        profile: error_vs_force_profile(&pairs, PROFILE_BINS)?,
        force_map,
        loc_map,
    })
}

/// Retrains the full pipeline once per fold and scores train and validation errors.
pub fn cross_validate(dataset: &Dataset, plan: &SplitPlan, config: &PipelineConfig) -> Result<CrossValidation> {
    plan.validate(dataset)?;
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut pooled_force = Vec::new();
    let mut pooled_loc: Vec<Vec<f64>> = vec![Vec::new(); NET_NAMES.len()];
    for (k, held) in plan.folds.iter().enumerate() {
        let split = plan.fold_split(k)?;
        let model = train_pipeline(dataset, &split, config)?;
        let (train, train_loc) = samples(dataset, &split.train, config)?;
        let (val, val_loc) = samples(dataset, held, config)?;
        let fv = force_errors(&model, &val)?;
        let lv = loc_errors(&model, &val_loc)?;
        let lt = loc_errors(&model, &train_loc)?;
        folds.push(FoldResult {
            fold: k + 1,
            force_train: Summary::of(&force_errors(&model, &train)?)?,
            force_val: Summary::of(&fv)?,
            loc_train: lt.iter().map(|e| Summary::of(e)).collect::<Result<_>>()?,
            loc_val: lv.iter().map(|e| Summary::of(e)).collect::<Result<_>>()?,
        });
        pooled_force.extend(fv);
        for (p, e) in pooled_loc.iter_mut().zip(lv) {
            p.extend(e);
        }
    }
    let force_medians: Vec<f64> = folds.iter().map(|f| f.force_val.median).collect();
    let loc = (0..NET_NAMES.len())
        .map(|i| {
            let medians: Vec<f64> = folds.iter().map(|f| f.loc_val[i].median).collect();
            CvSummary::of(&medians, &pooled_loc[i])
        })
        .collect::<Result<_>>()?;
    Ok(CrossValidation { force: CvSummary::of(&force_medians, &pooled_force)?, loc, folds })
}

/// Full evaluation: held-out test metrics, 5-fold cross-validation and the
/// simulator's receptive fields.
pub fn evaluate(
    model: &PipelineModel,
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    plan.validate(dataset)?;
    if model.window != config.window || model.gate != config.gate {
        return Err(Error::Validation("model window or gate differs from the evaluation config".into()));
    }
    let (force_stats, loc_stats) = training_stats(dataset, &plan.final_split(), config)?;
    if force_stats != model.force_stats || loc_stats != model.loc_stats {
        return Err(Error::Validation("model was not trained on this plan's training split".into()));
    }
    Ok(EvalReport {
        test: test_metrics(model, dataset, plan, config)?,
        cv: cross_validate(dataset, plan, config)?,
        receptive: receptive_field_report(&dataset.layout, &dataset.params)?,
    })
}
