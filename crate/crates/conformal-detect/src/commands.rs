//! The six end-to-end operations behind the CLI, exposed as plain functions
//! so examples and tests can drive them without a subprocess.
//!
//! Every command reads and writes files under caller-supplied paths, returns
//! a small serializable summary for display, and is deterministic given the
//! same inputs (the one exception, `calibrate`'s wall-clock timestamp, can be
//! pinned). Manifests identify their inputs by basename and SHA-256 rather
//! than absolute path so reruns from different directories agree byte for
//! byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::alphabet::Alphabet;
use crate::calibration::calibrate;
use crate::datasplit::{partition, split, ChallengingReason, Subset};
use crate::error::{Error, Result};
use crate::inference::{infer_with, ChallengeRule, SampleResult};
use crate::io::dataset::{read_dataset, write_dataset, DatasetEntry};
use crate::io::model::{read_model, write_model};
use crate::io::results::{write_report_csv, write_results};
use crate::io::FileDigest;
use crate::metrics::{
    mean_average_precision, score_dataset, two_proportion_test, ApReport, EvaluationReport,
    MatchSpec, Regime,
};
use crate::optimizer::{select_by_auroc, select_by_ppv, Selection, ThresholdGrid};
use crate::sample::{GroundTruthLabel, Sample};
use crate::simulator::{generate, SimConfig};

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn shown(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub dataset: String,
    pub generator_truth: String,
    pub samples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub ambiguous: usize,
}

/// Draws a synthetic corpus and writes `dataset.jsonl` plus
/// `generator_truth.json` (what the generator intended, for later scoring).
pub fn cmd_simulate(config: &SimConfig, out_dir: &Path) -> Result<SimulateSummary> {
    fs::create_dir_all(out_dir)?;
    let corpus = generate(config)?;
    let entries: Vec<DatasetEntry> = corpus
        .samples
        .into_iter()
        .map(|s| DatasetEntry::from_sample(s, &config.alphabet))
        .collect();
    let dataset = out_dir.join("dataset.jsonl");
    write_dataset(&dataset, &entries)?;
    let truth_path = out_dir.join("generator_truth.json");
    write_pretty_json(&truth_path, &corpus.generator_truth)?;
    let positives = corpus
        .generator_truth
        .iter()
        .filter(|t| t.primary.is_some())
        .count();
    Ok(SimulateSummary {
        dataset: shown(&dataset),
        generator_truth: shown(&truth_path),
        samples: corpus.generator_truth.len(),
        positives,
        negatives: corpus.generator_truth.len() - positives,
        ambiguous: corpus.generator_truth.iter().filter(|t| t.ambiguous).count(),
    })
}

// ---------------------------------------------------------------------------
// split

#[derive(Debug, Clone, Serialize)]
struct ChallengingNote {
    slice_id: String,
    reason: ChallengingReason,
    disputed: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct ExcludedNote {
    slice_id: String,
    reason: String,
}

#[derive(Debug, Clone, Serialize)]
struct PartitionManifest {
    input: FileDigest,
    classes: Vec<String>,
    definite: usize,
    challenging: Vec<ChallengingNote>,
    negative: usize,
    excluded: Vec<ExcludedNote>,
}

#[derive(Debug, Clone, Serialize)]
struct SplitManifest {
    input: FileDigest,
    seed: u64,
    fractions: [f64; 4],
    subset_slice_counts: BTreeMap<String, usize>,
    groups: BTreeMap<String, Subset>,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitSummary {
    pub out_dir: String,
    pub definite: usize,
    pub challenging: usize,
    pub negative: usize,
    pub excluded: usize,
    pub subsets: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

/// Partitions a dataset by reader consensus, then splits the definite part
/// into leakage-free training/tuning/calibration/test subsets.
///
/// Writes the four consensus files (`definite.jsonl`, `challenging.jsonl`,
/// `negative.jsonl`, `excluded.jsonl`), the four subset files, and two
/// manifests recording the routing and the group-to-subset assignment.
/// Negative and challenging samples are not placed in subsets; how to use
/// them (review queues, extra calibration mass) is the caller's call.
pub fn cmd_split(
    dataset: &Path,
    alphabet: &Alphabet,
    fractions: [f64; 4],
    seed: u64,
    out_dir: &Path,
) -> Result<SplitSummary> {
    let entries = read_dataset(dataset, alphabet)?;
    let samples: Vec<Sample> = entries.iter().map(|e| e.sample.clone()).collect();
    let parts = partition(&samples, alphabet)?;
    let assignment = split(&parts.definite, alphabet, fractions, seed)?;

    fs::create_dir_all(out_dir)?;
    let by_id: BTreeMap<&str, &DatasetEntry> = entries
        .iter()
        .map(|e| (e.sample.slice_id.as_str(), e))
        .collect();
    let pick = |ids: Vec<&str>| -> Vec<DatasetEntry> {
        ids.iter().map(|id| by_id[id].clone()).collect()
    };

    write_dataset(
        &out_dir.join("definite.jsonl"),
        &pick(parts.definite.iter().map(|e| e.sample.slice_id.as_str()).collect()),
    )?;
    write_dataset(
        &out_dir.join("challenging.jsonl"),
        &pick(parts.challenging.iter().map(|e| e.sample.slice_id.as_str()).collect()),
    )?;
    write_dataset(
        &out_dir.join("negative.jsonl"),
        &pick(parts.negative.iter().map(|s| s.slice_id.as_str()).collect()),
    )?;
    write_dataset(
        &out_dir.join("excluded.jsonl"),
        &pick(parts.excluded.iter().map(|e| e.sample.slice_id.as_str()).collect()),
    )?;

    let mut subset_entries: BTreeMap<Subset, Vec<DatasetEntry>> =
        Subset::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for entry in &parts.definite {
        let subset = assignment
            .subset_of(&entry.sample)
            .expect("every definite sample's group was assigned");
        subset_entries
            .get_mut(&subset)
            .expect("all subsets pre-inserted")
            .push(by_id[entry.sample.slice_id.as_str()].clone());
    }
    for (subset, subset_rows) in &subset_entries {
        write_dataset(&out_dir.join(format!("{subset}.jsonl")), subset_rows)?;
    }

    let input = FileDigest::of(dataset)?;
    write_pretty_json(
        &out_dir.join("partition_manifest.json"),
        &PartitionManifest {
            input: input.clone(),
            classes: alphabet.names().to_vec(),
            definite: parts.definite.len(),
            challenging: parts
                .challenging
                .iter()
                .map(|e| ChallengingNote {
                    slice_id: e.sample.slice_id.clone(),
                    reason: e.reason,
                    disputed: e.disputed.iter().map(|&l| alphabet.name(l).to_string()).collect(),
                })
                .collect(),
            negative: parts.negative.len(),
            excluded: parts
                .excluded
                .iter()
                .map(|e| ExcludedNote {
                    slice_id: e.sample.slice_id.clone(),
                    reason: e.reason.clone(),
                })
                .collect(),
        },
    )?;
    let subsets: BTreeMap<String, usize> = Subset::ALL
        .iter()
        .map(|&s| (s.to_string(), assignment.subset_slice_counts[s as usize]))
        .collect();
    write_pretty_json(
        &out_dir.join("split_manifest.json"),
        &SplitManifest {
            input,
            seed,
            fractions,
            subset_slice_counts: subsets.clone(),
            groups: assignment.assignment.clone(),
            warnings: assignment.warnings.clone(),
        },
    )?;

    Ok(SplitSummary {
        out_dir: shown(out_dir),
        definite: parts.definite.len(),
        challenging: parts.challenging.len(),
        negative: parts.negative.len(),
        excluded: parts.excluded.len(),
        subsets,
        warnings: assignment.warnings,
    })
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Debug, Clone, Serialize)]
pub struct CalibrateSummary {
    pub model: String,
    pub input: FileDigest,
    pub classes: usize,
    pub groups: usize,
    pub sample_count: usize,
    pub created_at: String,
}

/// Builds a calibration model from every sample in `dataset` and writes it
/// to `model.json`. Pass `timestamp` to pin `created_at` for reproducible
/// bytes; otherwise the current UTC time is recorded.
pub fn cmd_calibrate(
    dataset: &Path,
    alphabet: &Alphabet,
    timestamp: Option<&str>,
    out_dir: &Path,
) -> Result<CalibrateSummary> {
    let entries = read_dataset(dataset, alphabet)?;
    let samples: Vec<Sample> = entries.into_iter().map(|e| e.sample).collect();
    let mut model = calibrate(&samples, alphabet)?;
    model.set_created_at(match timestamp {
        Some(t) => t.to_string(),
        None => chrono::Utc::now().to_rfc3339(),
    });
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("model.json");
    write_model(&path, &model)?;
    Ok(CalibrateSummary {
        model: shown(&path),
        input: FileDigest::of(dataset)?,
        classes: alphabet.len(),
        groups: 2 * alphabet.len(),
        sample_count: model.sample_count(),
        created_at: model.created_at().to_string(),
    })
}

// ---------------------------------------------------------------------------
// predict

#[derive(Debug, Clone, Serialize)]
pub struct PredictSummary {
    pub results: String,
    pub dataset: FileDigest,
    pub model: FileDigest,
    pub samples: usize,
    pub challenging: usize,
    pub mean_prediction_set_size: f64,
}

/// Runs clustering and conformal scoring over a dataset with a stored model
/// and writes per-slice results to `results.jsonl`.
pub fn cmd_predict(
    dataset: &Path,
    model_path: &Path,
    iou_threshold: f64,
    conformal_threshold: f64,
    rule: ChallengeRule,
    out_dir: &Path,
) -> Result<PredictSummary> {
    let model = read_model(model_path)?;
    let entries = read_dataset(dataset, model.alphabet())?;
    let results: Vec<SampleResult> = entries
        .iter()
        .map(|e| infer_with(&e.sample, &model, iou_threshold, conformal_threshold, rule))
        .collect::<Result<_>>()?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("results.jsonl");
    write_results(&path, &results, model.alphabet())?;
    let entries_total: usize = results
        .iter()
        .flat_map(|r| &r.clusters)
        .map(|c| c.prediction_set.len())
        .sum();
    Ok(PredictSummary {
        results: shown(&path),
        dataset: FileDigest::of(dataset)?,
        model: FileDigest::of(model_path)?,
        samples: results.len(),
        challenging: results.iter().filter(|r| r.challenging).count(),
        mean_prediction_set_size: if results.is_empty() {
            0.0
        } else {
            entries_total as f64 / results.len() as f64
        },
    })
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug, Clone, Serialize)]
pub struct ChallengingStats {
    pub flagged: usize,
    pub total: usize,
    pub rate: f64,
    /// Flag rate among generator-ambiguous samples, when a sidecar is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ambiguous_flag_rate: Option<f64>,
    /// Flag rate among the remaining samples, when a sidecar is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plain_flag_rate: Option<f64>,
    /// Share of samples where the flag agrees with generator ambiguity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_rate: Option<f64>,
    /// Two-sided two-proportion p-value for the rate difference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_p_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct EvaluateReportFile {
    dataset: FileDigest,
    model: FileDigest,
    iou_threshold: f64,
    conformal_threshold: f64,
    reports: Vec<EvaluationReport>,
    challenging: ChallengingStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_average_precision: Option<ApReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub report: String,
    pub report_csv: String,
    pub regimes: usize,
    pub samples: usize,
    pub challenging: ChallengingStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
}

fn challenging_stats(
    results: &[SampleResult],
    sidecar: Option<&Path>,
) -> Result<ChallengingStats> {
    let flagged = results.iter().filter(|r| r.challenging).count();
    let mut stats = ChallengingStats {
        flagged,
        total: results.len(),
        rate: if results.is_empty() {
            0.0
        } else {
            flagged as f64 / results.len() as f64
        },
        ambiguous_flag_rate: None,
        plain_flag_rate: None,
        agreement_rate: None,
        separation_p_value: None,
    };
    let Some(path) = sidecar else {
        return Ok(stats);
    };
    let truth: Vec<crate::simulator::SimTruth> =
        serde_json::from_reader(std::io::BufReader::new(fs::File::open(path)?))?;
    let ambiguous: BTreeMap<&str, bool> = truth
        .iter()
        .map(|t| (t.slice_id.as_str(), t.ambiguous))
        .collect();
    if ambiguous.len() != truth.len() {
        return Err(Error::InvalidInput(
            "generator truth repeats a slice id".into(),
        ));
    }
    let mut flagged_by = [0u64; 2];
    let mut total_by = [0u64; 2];
    let mut agree = 0usize;
    for r in results {
        let Some(&is_ambiguous) = ambiguous.get(r.slice_id.as_str()) else {
            return Err(Error::InvalidInput(format!(
                "slice {} is missing from the generator truth",
                r.slice_id
            )));
        };
        let bucket = usize::from(is_ambiguous);
        total_by[bucket] += 1;
        flagged_by[bucket] += u64::from(r.challenging);
        agree += usize::from(r.challenging == is_ambiguous);
    }
    if total_by[1] > 0 {
        stats.ambiguous_flag_rate = Some(flagged_by[1] as f64 / total_by[1] as f64);
    }
    if total_by[0] > 0 {
        stats.plain_flag_rate = Some(flagged_by[0] as f64 / total_by[0] as f64);
    }
    if !results.is_empty() {
        stats.agreement_rate = Some(agree as f64 / results.len() as f64);
    }
    if total_by[0] > 0 && total_by[1] > 0 {
        stats.separation_p_value = Some(two_proportion_test(
            flagged_by[1],
            total_by[1],
            flagged_by[0],
            total_by[0],
        )?);
    }
    Ok(stats)
}

/// Scores a dataset (which must carry ground truth) at one threshold pair
/// under the requested counting regimes; writes `report.json` and
/// `report.csv`. With `map_iou`, also reports mean average precision; with a
/// generator-truth sidecar, also reports how well the challenging flag
/// tracks injected ambiguity.
#[allow(clippy::too_many_arguments)]
pub fn cmd_evaluate(
    dataset: &Path,
    model_path: &Path,
    iou_threshold: f64,
    conformal_threshold: f64,
    regimes: &[Regime],
    map_iou: Option<f64>,
    generator_truth: Option<&Path>,
    out_dir: &Path,
) -> Result<EvaluateSummary> {
    let model = read_model(model_path)?;
    let alphabet = model.alphabet();
    let entries = read_dataset(dataset, alphabet)?;
    let truths: Vec<Vec<GroundTruthLabel>> = entries
        .iter()
        .map(|e| {
            e.sample
                .ground_truth
                .clone()
                .ok_or_else(|| Error::MissingGroundTruth {
                    slice_id: e.sample.slice_id.clone(),
                })
        })
        .collect::<Result<_>>()?;
    let results: Vec<SampleResult> = entries
        .iter()
        .map(|e| {
            infer_with(
                &e.sample,
                &model,
                iou_threshold,
                conformal_threshold,
                ChallengeRule::default(),
            )
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(regimes.len());
    for &regime in regimes {
        let counts = score_dataset(&results, &truths, alphabet, MatchSpec::default_for(regime))?;
        reports.push(EvaluationReport::new(
            regime,
            iou_threshold,
            conformal_threshold,
            counts,
        ));
    }
    let ap = map_iou
        .map(|thr| mean_average_precision(&results, &truths, alphabet, thr))
        .transpose()?;
    let challenging = challenging_stats(&results, generator_truth)?;

    fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    write_pretty_json(
        &report_path,
        &EvaluateReportFile {
            dataset: FileDigest::of(dataset)?,
            model: FileDigest::of(model_path)?,
            iou_threshold,
            conformal_threshold,
            reports: reports.clone(),
            challenging: challenging.clone(),
            mean_average_precision: ap.clone(),
        },
    )?;
    let csv_path = out_dir.join("report.csv");
    write_report_csv(&csv_path, &reports)?;
    Ok(EvaluateSummary {
        report: shown(&report_path),
        report_csv: shown(&csv_path),
        regimes: reports.len(),
        samples: results.len(),
        challenging,
        map: ap.and_then(|a| a.mean),
    })
}

// ---------------------------------------------------------------------------
// optimize

#[derive(Debug, Clone, Serialize)]
struct SelectionNote {
    method: &'static str,
    #[serde(flatten)]
    selection: Selection,
}

#[derive(Debug, Clone, Serialize)]
struct SelectionsFile {
    dataset: FileDigest,
    model: FileDigest,
    iou_values: Vec<f64>,
    conformal_values: Vec<f64>,
    selections: Vec<SelectionNote>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub grid_csv: String,
    pub selections: String,
    pub cells: usize,
    pub picks: BTreeMap<String, [f64; 2]>,
}

/// Sweeps the threshold grid over a ground-truthed dataset, writes every
/// cell to `grid.csv`, and records one operating point per regime in
/// `selections.json` — chosen by AUROC/Youden's J where the regime defines
/// both error rates, and by positive predictive value otherwise.
pub fn cmd_optimize(
    dataset: &Path,
    model_path: &Path,
    grid: &ThresholdGrid,
    regimes: &[Regime],
    out_dir: &Path,
) -> Result<OptimizeSummary> {
    let model = read_model(model_path)?;
    let entries = read_dataset(dataset, model.alphabet())?;
    let samples: Vec<Sample> = entries.into_iter().map(|e| e.sample).collect();
    let specs: Vec<MatchSpec> = regimes.iter().map(|&r| MatchSpec::default_for(r)).collect();
    let cells = crate::optimizer::sweep(&samples, &model, grid, &specs)?;

    fs::create_dir_all(out_dir)?;
    let grid_path = out_dir.join("grid.csv");
    write_report_csv(
        &grid_path,
        cells.iter().flat_map(|c| c.reports.values()),
    )?;

    let mut selections = Vec::with_capacity(regimes.len());
    for &regime in regimes {
        let (method, selection) = match regime {
            Regime::MatrixC | Regime::ExtExactClassification => {
                ("ppv", select_by_ppv(&cells, regime)?)
            }
            _ => ("auroc", select_by_auroc(&cells, regime)?),
        };
        selections.push(SelectionNote { method, selection });
    }
    let selections_path = out_dir.join("selections.json");
    write_pretty_json(
        &selections_path,
        &SelectionsFile {
            dataset: FileDigest::of(dataset)?,
            model: FileDigest::of(model_path)?,
            iou_values: grid.iou_values().to_vec(),
            conformal_values: grid.conformal_values().to_vec(),
            selections: selections.clone(),
        },
    )?;
    Ok(OptimizeSummary {
        grid_csv: shown(&grid_path),
        selections: shown(&selections_path),
        cells: cells.len(),
        picks: selections
            .iter()
            .map(|n| {
                (
                    n.selection.regime.to_string(),
                    [n.selection.iou_threshold, n.selection.conformal_threshold],
                )
            })
            .collect(),
    })
}
