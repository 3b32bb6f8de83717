//! Thin command-line front end: parses arguments, calls the corresponding
//! library command, and prints its JSON summary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use conformal_detect::commands::{
    cmd_calibrate, cmd_evaluate, cmd_optimize, cmd_predict, cmd_simulate, cmd_split,
};
use conformal_detect::datasplit::DEFAULT_FRACTIONS;
use conformal_detect::inference::ChallengeRule;
use conformal_detect::metrics::Regime;
use conformal_detect::optimizer::ThresholdGrid;
use conformal_detect::simulator::SimConfig;
use conformal_detect::{Alphabet, Result};

#[derive(Parser)]
#[command(
    name = "conformal-detect",
    about = "Calibrated prediction sets and challenging-case flags for object-detection outputs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".", env = "CONFORMAL_DETECT_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Classes {
    /// Comma-separated class names defining the alphabet.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    classes: Option<Vec<String>>,
}

impl Classes {
    fn alphabet(&self) -> Result<Alphabet> {
        match &self.classes {
            Some(names) => Alphabet::new(names.clone()),
            None => Ok(Alphabet::default()),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Contradictions are sought within each cluster's prediction set.
    PerCluster,
    /// Contradictions are sought across the union of all prediction sets.
    AcrossClusters,
}

impl From<RuleArg> for ChallengeRule {
    fn from(rule: RuleArg) -> ChallengeRule {
        match rule {
            RuleArg::PerCluster => ChallengeRule::PerCluster,
            RuleArg::AcrossClusters => ChallengeRule::AcrossClusters,
        }
    }
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    s.parse::<Regime>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Partition a dataset by reader consensus and split the definite part
    /// into leakage-free training/tuning/calibration/test subsets.
    Split {
        /// Input dataset (JSON lines).
        dataset: PathBuf,
        #[command(flatten)]
        classes: Classes,
        /// Training,tuning,calibration,test fractions (must sum to 1).
        #[arg(long, value_delimiter = ',', num_args = 4)]
        fractions: Option<Vec<f64>>,
        /// Seed for the shuffle that breaks assignment ties.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Build a calibration model from every sample in a dataset.
    Calibrate {
        dataset: PathBuf,
        #[command(flatten)]
        classes: Classes,
        /// Pin the model's created_at field (RFC 3339) for reproducible bytes.
        #[arg(long)]
        timestamp: Option<String>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Cluster detections and emit conformal prediction sets per slice.
    Predict {
        dataset: PathBuf,
        /// Calibration model file.
        #[arg(long)]
        model: PathBuf,
        /// Overlap threshold for clustering.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Conformal score threshold for set membership.
        #[arg(long, default_value_t = 0.5)]
        conformal: f64,
        /// Scope over which contradictions flag a slice as challenging.
        #[arg(long, value_enum, default_value_t = RuleArg::PerCluster)]
        challenge_rule: RuleArg,
        #[command(flatten)]
        out: OutDir,
    },
    /// Score predictions against ground truth under one or more regimes.
    Evaluate {
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, default_value_t = 0.5)]
        conformal: f64,
        /// Counting regimes to report (defaults to all five).
        #[arg(long, value_parser = parse_regime, value_delimiter = ',', num_args = 1..)]
        regimes: Option<Vec<Regime>>,
        /// Also compute mean average precision at this match IoU.
        #[arg(long)]
        map_iou: Option<f64>,
        /// Generator-truth sidecar; scores the challenging flag against
        /// injected ambiguity.
        #[arg(long)]
        generator_truth: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Sweep a threshold grid and select an operating point per regime.
    Optimize {
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Overlap-threshold grid values (defaults to 0.00..1.00 step 0.05).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        iou_values: Option<Vec<f64>>,
        /// Conformal-threshold grid values (same default).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        conformal_values: Option<Vec<f64>>,
        #[arg(long, value_parser = parse_regime, value_delimiter = ',', num_args = 1..)]
        regimes: Option<Vec<Regime>>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Draw a synthetic corpus from the detector simulator.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        classes: Classes,
        /// Per-class probability of being the primary finding; leftover mass
        /// yields negative slices (defaults to uniform over the alphabet).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        priors: Option<Vec<f64>>,
        /// Probability that a positive slice carries an overlapping second
        /// class with near-equal confidence.
        #[arg(long, default_value_t = 0.3)]
        ambiguity_rate: f64,
        /// Expected spurious low-confidence boxes per slice.
        #[arg(long, default_value_t = 0.0)]
        clutter_rate: f64,
        /// Logit-space confidence noise scale.
        #[arg(long, default_value_t = 1.0)]
        confidence_noise: f64,
        /// Group slices under this many patients (0 = one slice per group).
        #[arg(long, default_value_t = 0)]
        patients: usize,
        #[command(flatten)]
        out: OutDir,
    },
}

fn fractions_of(values: Option<Vec<f64>>) -> [f64; 4] {
    match values {
        Some(v) => [v[0], v[1], v[2], v[3]],
        None => DEFAULT_FRACTIONS,
    }
}

fn regimes_of(values: Option<Vec<Regime>>) -> Vec<Regime> {
    values.unwrap_or_else(|| Regime::ALL.to_vec())
}

fn run(cli: Cli) -> Result<String> {
    let summary = match cli.command {
        Command::Split {
            dataset,
            classes,
            fractions,
            seed,
            out,
        } => serde_json::to_string_pretty(&cmd_split(
            &dataset,
            &classes.alphabet()?,
            fractions_of(fractions),
            seed,
            &out.out_dir,
        )?)?,
        Command::Calibrate {
            dataset,
            classes,
            timestamp,
            out,
        } => serde_json::to_string_pretty(&cmd_calibrate(
            &dataset,
            &classes.alphabet()?,
            timestamp.as_deref(),
            &out.out_dir,
        )?)?,
        Command::Predict {
            dataset,
            model,
            iou,
            conformal,
            challenge_rule,
            out,
        } => serde_json::to_string_pretty(&cmd_predict(
            &dataset,
            &model,
            iou,
            conformal,
            challenge_rule.into(),
            &out.out_dir,
        )?)?,
        Command::Evaluate {
            dataset,
            model,
            iou,
            conformal,
            regimes,
            map_iou,
            generator_truth,
            out,
        } => serde_json::to_string_pretty(&cmd_evaluate(
            &dataset,
            &model,
            iou,
            conformal,
            &regimes_of(regimes),
            map_iou,
            generator_truth.as_deref(),
            &out.out_dir,
        )?)?,
        Command::Optimize {
            dataset,
            model,
            iou_values,
            conformal_values,
            regimes,
            out,
        } => {
            let default_axis = || ThresholdGrid::default().iou_values().to_vec();
            let grid = ThresholdGrid::new(
                iou_values.unwrap_or_else(default_axis),
                conformal_values.unwrap_or_else(default_axis),
            )?;
            serde_json::to_string_pretty(&cmd_optimize(
                &dataset,
                &model,
                &grid,
                &regimes_of(regimes),
                &out.out_dir,
            )?)?
        }
        Command::Simulate {
            seed,
            samples,
            classes,
            priors,
            ambiguity_rate,
            clutter_rate,
            confidence_noise,
            patients,
            out,
        } => {
            let alphabet = classes.alphabet()?;
            let class_priors = priors
                .unwrap_or_else(|| vec![1.0 / alphabet.len() as f64; alphabet.len()]);
            let config = SimConfig {
                seed,
                n_samples: samples,
                alphabet,
                class_priors,
                confidence_noise,
                ambiguity_rate,
                clutter_rate,
                n_patients: patients,
                ..SimConfig::default()
            };
            serde_json::to_string_pretty(&cmd_simulate(&config, &out.out_dir)?)?
        }
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}
