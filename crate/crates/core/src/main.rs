use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use freqtime::channel::TdlModel;
use freqtime::config::{parse_list, resolve_path, ConfigFile};
use freqtime::dataset::{build_split, read_dataset, write_dataset, MixConfig, Scenario, Split};
use freqtime::estimators::{
    complexity_report, load_checkpoint, save_checkpoint, EstimatorModel, FreqTimeConfig, Variant,
};
use freqtime::link::GridConfig;
use freqtime::train::{
    evaluate_mse, scenario_eval, train_with_progress, ChannelEstimator, EvalReport, InterpBaseline, TrainConfig,
};
use freqtime::{Error, Result};

#[derive(Parser)]
#[command(
    name = "freqtime",
    version,
    about = "OFDM channel estimation: data generation, training and evaluation"
)]
struct Cli {
    /// key = value file supplying defaults for any flag not given
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for relative dataset/model/report paths
    #[arg(long, global = true, env = freqtime::config::DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mixed-scenario dataset
    GenData(GenDataArgs),
    /// Train an estimator on a dataset
    Train(TrainArgs),
    /// Per-SNR MSE of a model (or the LS + bilinear baseline)
    Eval(EvalArgs),
    /// Parameter and FLOP counts
    Complexity(ComplexityArgs),
    /// Convert a JSON report to CSV
    Export(ExportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// train | validation | test
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated TDL models, e.g. a,b,c
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    ds_min: Option<f64>,
    #[arg(long)]
    ds_max: Option<f64>,
    #[arg(long)]
    speed_min: Option<f64>,
    #[arg(long)]
    speed_max: Option<f64>,
    /// Comma-separated SNR grid in dB
    #[arg(long)]
    snrs: Option<String>,
    #[arg(long)]
    carrier: Option<f64>,
    #[arg(long)]
    noiseless: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// freqtime | atten
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Optional validation set
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    l_group: Option<usize>,
    #[arg(long)]
    share_freq: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Allow unordered gradient reduction when threads > 1
    #[arg(long)]
    no_determinism: bool,
    /// Checkpoint path
    #[arg(long)]
    out: PathBuf,
    /// Write the loss history as JSON
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "baseline")]
    model: Option<PathBuf>,
    /// Evaluate LS + bilinear interpolation instead of a model
    #[arg(long)]
    baseline: bool,
    #[arg(long, conflicts_with = "scenario")]
    data: Option<PathBuf>,
    /// tdlc100 | tdld30
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    per_snr: Option<usize>,
    #[arg(long)]
    snrs: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON report
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    l_group: Option<usize>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    report: PathBuf,
    /// Output file; stdout when absent
    #[arg(long)]
    csv: Option<PathBuf>,
}

struct Ctx {
    file: ConfigFile,
    data_dir: Option<PathBuf>,
}

impl Ctx {
    fn pick<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.file.get(key)?.unwrap_or(default)),
        }
    }

    fn pick_opt<T: FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        resolve_path(p, self.data_dir.as_deref())
    }

    fn required_path(&self, cli: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        let p = self
            .pick_opt(cli, key)?
            .ok_or_else(|| Error::InvalidInput(format!("--{} is required", key.replace('_', "-"))))?;
        Ok(self.path(&p))
    }
}

fn gen_data(ctx: &Ctx, a: GenDataArgs) -> Result<()> {
    let defaults = MixConfig::default();
    let models = match ctx.pick_opt(a.models, "models")? {
        Some(list) => parse_list::<TdlModel>(&list)?,
        None => defaults.models.clone(),
    };
    let snrs = match ctx.pick_opt(a.snrs, "snrs")? {
        Some(list) => parse_list::<f64>(&list)?,
        None => defaults.snr_grid_db.clone(),
    };
    let mix = MixConfig {
        models,
        ds_range_ns: [
            ctx.pick(a.ds_min, "ds_min", defaults.ds_range_ns[0])?,
            ctx.pick(a.ds_max, "ds_max", defaults.ds_range_ns[1])?,
        ],
        speed_range_kmh: [
            ctx.pick(a.speed_min, "speed_min", defaults.speed_range_kmh[0])?,
            ctx.pick(a.speed_max, "speed_max", defaults.speed_range_kmh[1])?,
        ],
        snr_grid_db: snrs,
        carrier_hz: ctx.pick(a.carrier, "carrier", defaults.carrier_hz)?,
        master_seed: ctx.pick(a.seed, "data_seed", defaults.master_seed)?,
        noiseless: a.noiseless || ctx.pick(None, "noiseless", false)?,
    };
    let split = match ctx.pick_opt(a.split, "split")? {
        Some(s) => parse_split(&s)?,
        None => Split::Train,
    };
    let n = ctx.pick(a.samples, "samples", 1000)?;
    let ds = build_split(n, &mix, &GridConfig::default(), split)?;
    let out = ctx.path(&a.out);
    write_dataset(&ds, &out)?;
    eprintln!("wrote {} samples to {}", ds.len(), out.display());
    for (snr, count) in ds.snr_counts() {
        eprintln!("  snr {snr:>5} dB: {count}");
    }
    Ok(())
}

fn parse_split(s: &str) -> Result<Split> {
    match s.to_ascii_lowercase().as_str() {
        "train" => Ok(Split::Train),
        "val" | "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        _ => Err(Error::InvalidInput(format!("unknown split {s:?}"))),
    }
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let variant: Variant = ctx.pick(a.variant, "variant", "freqtime".to_string())?.parse()?;
    let train_ds = read_dataset(ctx.required_path(a.data, "data")?)?;
    let val_ds = ctx
        .pick_opt(a.val, "val")?
        .map(|p| read_dataset(ctx.path(&p)))
        .transpose()?;

    let defaults = TrainConfig::default();
    let seed = ctx.pick(a.seed, "train_seed", defaults.seed)?;
    let cfg = TrainConfig {
        epochs: ctx.pick(a.epochs, "epochs", defaults.epochs)?,
        batch_size: ctx.pick(a.batch, "batch", defaults.batch_size)?,
        lr: ctx.pick(a.lr, "lr", defaults.lr)?,
        seed,
        determinism: !(a.no_determinism || ctx.pick(None, "no_determinism", false)?),
        threads: ctx.pick(a.threads, "threads", defaults.threads)?,
    };
    let mut net_cfg = FreqTimeConfig::from_grid(&train_ds.grid, ctx.pick(a.l_group, "l_group", 12)?);
    net_cfg.share_freq_blocks = a.share_freq || ctx.pick(None, "share_freq", false)?;
    let mut model = EstimatorModel::new(variant, net_cfg, seed)?;

    let quiet = a.quiet;
    let history = train_with_progress(&mut model, &train_ds, val_ds.as_ref(), &cfg, |epoch, loss, val| {
        if !quiet {
            match val {
                Some(v) => eprintln!("epoch {epoch:>4}  train {loss:.6e}  val {v:.6e}"),
                None => eprintln!("epoch {epoch:>4}  train {loss:.6e}"),
            }
        }
    })?;

    let out = ctx.path(&a.out);
    save_checkpoint(&model, &out)?;
    if let Some(p) = a.history {
        std::fs::write(ctx.path(&p), serde_json::to_string_pretty(&history)?)?;
    }
    eprintln!(
        "saved {} ({} params) to {}; train loss {:.6e} -> {:.6e}",
        variant.name(),
        model.param_count(),
        out.display(),
        history.initial_train_loss,
        history.final_train_loss
    );
    Ok(())
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let grid = GridConfig::default();
    let estimator: Box<dyn ChannelEstimator> = if a.baseline {
        Box::new(InterpBaseline::new(&grid)?)
    } else {
        Box::new(load_checkpoint(ctx.required_path(a.model, "model")?)?)
    };
    let scenario = ctx.pick_opt(a.scenario, "scenario")?;
    let report = match (a.data, scenario) {
        (Some(data), _) => {
            let ds = read_dataset(ctx.path(&data))?;
            if a.baseline && ds.grid != grid {
                evaluate_mse(&InterpBaseline::new(&ds.grid)?, &ds)?
            } else {
                evaluate_mse(estimator.as_ref(), &ds)?
            }
        }
        (None, Some(name)) => {
            let sc = Scenario::preset(&name, ctx.pick(a.speed, "speed", 3.0)?)?;
            let snrs = match ctx.pick_opt(a.snrs, "snrs")? {
                Some(list) => parse_list::<f64>(&list)?,
                None => MixConfig::default().snr_grid_db,
            };
            scenario_eval(
                estimator.as_ref(),
                &sc,
                &snrs,
                ctx.pick(a.per_snr, "per_snr", 2000)?,
                &grid,
                MixConfig::default().carrier_hz,
                ctx.pick(a.seed, "eval_seed", 1)?,
            )?
        }
        (None, None) => match ctx.file.raw("data") {
            Some(p) => evaluate_mse(estimator.as_ref(), &read_dataset(ctx.path(Path::new(p)))?)?,
            None => return Err(Error::InvalidInput("eval needs --data or --scenario".into())),
        },
    };
    print!("{}", report.to_csv());
    if let Some(p) = a.out {
        report.write_json(ctx.path(&p))?;
    }
    if let Some(p) = a.csv {
        report.write_csv(ctx.path(&p))?;
    }
    Ok(())
}

fn complexity_cmd(ctx: &Ctx, a: ComplexityArgs) -> Result<()> {
    let variant: Variant = ctx.pick(a.variant, "variant", "freqtime".to_string())?.parse()?;
    let cfg = FreqTimeConfig::from_grid(&GridConfig::default(), ctx.pick(a.l_group, "l_group", 12)?);
    let model = EstimatorModel::new(variant, cfg, 0)?;
    println!("{}", complexity_report(&model));
    Ok(())
}

fn export_cmd(ctx: &Ctx, a: ExportArgs) -> Result<()> {
    let report = EvalReport::read_json(ctx.path(&a.report))?;
    match a.csv {
        Some(p) => report.write_csv(ctx.path(&p))?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let data_dir = cli.data_dir.clone().or_else(|| file.data_dir());
    let ctx = Ctx { file, data_dir };
    match cli.command {
        Command::GenData(a) => gen_data(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Complexity(a) => complexity_cmd(&ctx, a),
        Command::Export(a) => export_cmd(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
