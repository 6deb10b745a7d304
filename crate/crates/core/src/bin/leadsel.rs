use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leadsel::bandit::NeuralThompson;
use leadsel::classifier::{build_verdict_table, train_reduced_classifier, VerdictTable};
use leadsel::harness::{
    debias_training_set, planted_verdicts, prepare_rounds, read_round_logs, report, run_prepared,
    summarize, write_json, write_round_logs, PolicyKind, SimConfig,
};
use leadsel::signal::{load_segments, synthetic_dataset, write_segments, DatasetSpec};
use leadsel::{Error, Execution, Result};

#[derive(Parser)]
#[command(name = "leadsel", version, about = "Dynamic ECG lead selection with Neural Thompson Sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic 12-lead dataset as CSV.
    GenData(GenData),
    /// Train the lead-subset classifier and write its verdict table.
    TrainClassifier(TrainClassifier),
    /// Rebalance the training folds by optimal arm.
    Debias(Debias),
    /// Run one policy over a dataset.
    Simulate(Simulate),
    /// Summarise one or more simulation output directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<SimConfig> {
        match &self.config {
            Some(p) => SimConfig::load(p),
            None => Ok(SimConfig::default()),
        }
    }
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    n_segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 100.0)]
    fs: f64,
    #[arg(long, default_value_t = 0.02)]
    noise_std: f64,
    /// Also write a verdict table where only arm `label % K` is correct.
    #[arg(long)]
    planted_verdicts: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct TrainClassifier {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Fold held out of training (verdicts still cover every segment).
    #[arg(long, default_value_t = 10)]
    validation_fold: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct Debias {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    validation_fold: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the JSON report; next to `--out` by default.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct Simulate {
    /// nts, random, oracle or fixed:K
    #[arg(long, default_value = "nts")]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Choose arms without updating the bandit.
    #[arg(long)]
    freeze: bool,
    /// Seeded shuffle of the round order.
    #[arg(long)]
    shuffle: bool,
    /// Resume from a saved bandit.
    #[arg(long)]
    checkpoint_in: Option<PathBuf>,
    /// Save the bandit after the last round.
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct ReportArgs {
    /// Directories written by `simulate`.
    #[arg(long = "run", required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn gen_data(a: GenData) -> Result<()> {
    let cfg = a.config.load()?;
    let segments = synthetic_dataset(&DatasetSpec {
        n_segments: a.n_segments,
        duration_s: a.duration_s,
        fs: a.fs,
        noise_std: a.noise_std,
        seed: a.seed,
        ..Default::default()
    })?;
    write_segments(&a.out, &segments)?;
    if let Some(p) = a.planted_verdicts {
        planted_verdicts(&segments, cfg.catalog()?.len())?.write_csv(p)?;
    }
    eprintln!("wrote {} segments to {}", segments.len(), a.out.display());
    Ok(())
}

fn train_classifier(a: TrainClassifier) -> Result<()> {
    let cfg = a.config.load()?;
    let catalog = cfg.catalog()?;
    let segments = load_segments(&a.dataset)?;
    let train: Vec<_> = segments.iter().filter(|s| s.fold != a.validation_fold).cloned().collect();
    let (model, trace) = train_reduced_classifier(&train, &cfg.classifier, &catalog, &cfg.training, a.seed)?;
    create_dir(&a.out_dir)?;
    model.save(a.out_dir.join("model.json"))?;
    let verdicts = build_verdict_table(&model, &segments, &catalog, Execution::default())?;
    verdicts.write_csv(a.out_dir.join("verdicts.csv"))?;
    write_json(&a.out_dir.join("train_report.json"), &trace)?;
    eprintln!(
        "trained on {} segments; per-arm accuracy {:?}",
        train.len(),
        verdicts.arm_accuracy()
    );
    Ok(())
}

fn debias(a: Debias) -> Result<()> {
    let cfg = a.config.load()?;
    let catalog = cfg.catalog()?;
    let segments = load_segments(&a.dataset)?;
    let verdicts = VerdictTable::load_csv(&a.verdicts)?;
    let out = debias_training_set(&segments, a.validation_fold, &verdicts, &cfg.reward, &catalog, a.seed)?;
    if let Some(w) = &out.report.warning {
        eprintln!("warning: {w}");
    }
    write_segments(&a.out, &out.dataset)?;
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("report.json"));
    write_json(&report_path, &out.report)?;
    eprintln!(
        "kept {} of {} segments; entropy {:.4} -> {:.4}",
        out.dataset.len(),
        segments.len(),
        out.report.entropy_before,
        out.report.entropy_after
    );
    Ok(())
}

fn simulate(a: Simulate) -> Result<()> {
    let cfg = a.config.load()?;
    let catalog = cfg.catalog()?;
    let policy: PolicyKind = a.policy.parse()?;
    let mut episode = cfg.episode();
    episode.freeze |= a.freeze;
    episode.shuffle |= a.shuffle;
    let energy = cfg.energy_models()?;
    let segments = load_segments(&a.dataset)?;
    let verdicts = VerdictTable::load_csv(&a.verdicts)?;
    let rounds = prepare_rounds(&segments, &verdicts, &catalog, episode.d, episode.resample, Execution::default())?;
    drop(segments);
    let initial = a.checkpoint_in.as_ref().map(NeuralThompson::load).transpose()?;
    if initial.is_some() && policy != PolicyKind::Nts {
        return Err(Error::Config("--checkpoint-in only applies to the nts policy".into()));
    }
    let out = run_prepared(&rounds, &catalog, &energy, &episode, policy, a.seed, initial)?;

    create_dir(&a.out_dir)?;
    write_round_logs(a.out_dir.join("rounds.csv"), &out.logs)?;
    for ledger in &out.energy {
        let name: String = ledger
            .protocol()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        ledger.write_csv(a.out_dir.join(format!("energy_{name}.csv")))?;
    }
    let energy_summary: Vec<_> = out.energy.iter().map(|l| l.summary()).collect();
    write_json(&a.out_dir.join("energy_summary.json"), &energy_summary)?;
    let summary = summarize(&policy.to_string(), &out.logs, catalog.len());
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    if let (Some(path), Some(b)) = (&a.checkpoint_out, &out.bandit) {
        b.save(path)?;
    }
    eprintln!(
        "{policy}: {} rounds ({} skipped), regret {:.3}, accuracy {}",
        summary.rounds,
        summary.skipped,
        summary.cumulative_regret,
        summary.accuracy.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let catalog = cfg.catalog()?;
    let mut runs = Vec::with_capacity(a.runs.len());
    for dir in &a.runs {
        let summary_path = dir.join("summary.json");
        let policy = match std::fs::read_to_string(&summary_path) {
            Ok(text) => serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.get("policy").and_then(|p| p.as_str()).map(str::to_string)),
            Err(_) => None,
        }
        .unwrap_or_else(|| dir.display().to_string());
        runs.push((policy, read_round_logs(dir.join("rounds.csv"))?));
    }
    let baselines = [
        PolicyKind::Fixed(catalog.widest_arm()).to_string(),
        PolicyKind::Fixed(catalog.narrowest_arm()).to_string(),
    ];
    let rep = report(&runs, catalog.len(), &baselines);
    rep.write(&a.out_dir, &runs)?;
    for s in &rep.policies {
        eprintln!(
            "{:>10}: regret {:.3}, total energy {:.1} uJ",
            s.policy, s.cumulative_regret, s.energy.total_uj
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::TrainClassifier(a) => train_classifier(a),
        Command::Debias(a) => debias(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
