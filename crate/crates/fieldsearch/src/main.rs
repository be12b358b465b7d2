//! Command-line driver: field generation, training, evaluation,
//! coverage planning and curve plotting.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use fieldsearch::config::RunConfig;
use fieldsearch::coverage::{plan_coverage, Corner};
use fieldsearch::dqn::{train_from, write_reward_log, Checkpoint};
use fieldsearch::env::{ObservationSource, SearchEnv};
use fieldsearch::eval::{
    read_curves_csv, render_curves_svg, run_level, run_level1, write_report_dir, EvalRun,
    PriorQualityRow, RealismLevel,
};
use fieldsearch::field::{generate_field, generate_prior_map};
use fieldsearch::geo::DatasetBundle;
use fieldsearch::nn::QNetwork;
use fieldsearch::rng::{derive_seed, tag};

/// Default output directory, overridable with FIELDSEARCH_OUT_DIR.
fn default_out_dir() -> PathBuf {
    std::env::var_os("FIELDSEARCH_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Parser)]
#[command(
    name = "fieldsearch",
    version,
    about = "Learned and full-coverage drone search over clustered object fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration JSON; omitted means built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (env: FIELDSEARCH_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> anyhow::Result<RunConfig> {
        Ok(match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        })
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(default_out_dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a field and its prior map
    GenField {
        #[command(flatten)]
        common: Common,
    },
    /// Train the Q-network on simulated fields
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from a saved checkpoint, appending to the reward log.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run planners at one realism level and write the report
    Eval {
        #[command(flatten)]
        common: Common,
        /// Realism level (L1..L4).
        #[arg(long)]
        level: String,
        /// Trained checkpoint; required unless --coverage-only.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run only the coverage baseline.
        #[arg(long)]
        coverage_only: bool,
        /// Dataset bundle directory (repeatable); required for L2..L4.
        #[arg(long = "dataset")]
        datasets: Vec<PathBuf>,
        /// Episodes for L1 (defaults to the config's eval.n_fields).
        #[arg(long)]
        n_fields: Option<usize>,
        /// Worker threads for independent episodes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Force single-threaded execution.
        #[arg(long)]
        deterministic: bool,
    },
    /// Emit the boustrophedon coverage plan
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Starting corner of the sweep.
        #[arg(long, value_enum, default_value_t = CornerArg::NorthWest)]
        corner: CornerArg,
    },
    /// Render recall curves (a curves.csv) to SVG
    Plot {
        /// Input curves CSV (level,planner,step,mean_recall).
        #[arg(long)]
        input: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CornerArg {
    NorthWest,
    NorthEast,
    SouthWest,
    SouthEast,
}

impl From<CornerArg> for Corner {
    fn from(c: CornerArg) -> Corner {
        match c {
            CornerArg::NorthWest => Corner::NorthWest,
            CornerArg::NorthEast => Corner::NorthEast,
            CornerArg::SouthWest => Corner::SouthWest,
            CornerArg::SouthEast => Corner::SouthEast,
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenField { common } => cmd_gen_field(&common),
        Command::Train { common, resume } => cmd_train(&common, resume.as_deref()),
        Command::Eval {
            common,
            level,
            checkpoint,
            coverage_only,
            datasets,
            n_fields,
            jobs,
            deterministic,
        } => cmd_eval(
            &common,
            &level,
            checkpoint.as_deref(),
            coverage_only,
            &datasets,
            n_fields,
            if deterministic { 1 } else { jobs.max(1) },
        ),
        Command::Coverage { common, corner } => cmd_coverage(&common, corner.into()),
        Command::Plot { input, out } => cmd_plot(&input, &out),
    }
}

fn cmd_gen_field(common: &Common) -> anyhow::Result<()> {
    let config = common.config()?;
    config.validate()?;
    let out = common.out_dir();
    fs::create_dir_all(&out)?;

    let field = generate_field(&config.field, derive_seed(common.seed, tag::FIELD))?;
    let prior = generate_prior_map(&field, &config.noise, derive_seed(common.seed, tag::PRIOR))?;

    fs::write(out.join("field.json"), serde_json::to_string_pretty(&field)?)?;
    let mut pgm = Vec::new();
    field.occupancy().write_pgm(&mut pgm)?;
    fs::write(out.join("field.pgm"), &pgm)?;
    pgm.clear();
    prior.write_pgm(&mut pgm)?;
    fs::write(out.join("prior.pgm"), &pgm)?;
    fs::write(out.join("prior.json"), serde_json::to_string_pretty(&prior)?)?;

    println!(
        "wrote {}: {} objects on a {}x{} grid, {} prior cells",
        out.display(),
        field.objects().len(),
        field.size(),
        field.size(),
        prior.true_cells().len()
    );
    Ok(())
}

fn cmd_train(common: &Common, resume: Option<&Path>) -> anyhow::Result<()> {
    let config = common.config()?;
    config.validate()?;
    let out = common.out_dir();
    fs::create_dir_all(&out)?;

    let resume_ck = resume.map(Checkpoint::load).transpose()?;
    let field_config = config.field.clone();
    let noise = config.noise.clone();
    let env_config = config.env.clone();
    let factory = move |seed: u64| -> fieldsearch::Result<SearchEnv> {
        let field = generate_field(&field_config, derive_seed(seed, tag::FIELD))?;
        let prior = generate_prior_map(&field, &noise, derive_seed(seed, tag::PRIOR))?;
        SearchEnv::reset(
            field,
            prior,
            &env_config,
            ObservationSource::simulated(noise.clone(), seed),
            seed,
        )
    };

    let result = train_from(
        factory,
        config.network_spec(),
        &config.train,
        common.seed,
        resume_ck.as_ref(),
    )?;

    result.best.save(&out.join("best.ckpt"))?;
    result.last.save(&out.join("last.ckpt"))?;

    // A resumed run appends to the existing log so the curve stays
    // contiguous across invocations.
    let log_path = out.join("reward_log.csv");
    if resume_ck.is_some() && log_path.is_file() {
        let mut buf = Vec::new();
        write_reward_log(&result.reward_log, &mut buf)?;
        let body = buf.splitn(2, |&b| b == b'\n').nth(1).unwrap_or(&[]).to_vec();
        let mut existing = fs::read(&log_path)?;
        existing.extend_from_slice(&body);
        fs::write(&log_path, existing)?;
    } else {
        let mut buf = Vec::new();
        write_reward_log(&result.reward_log, &mut buf)?;
        fs::write(&log_path, buf)?;
    }

    println!(
        "trained {} env steps ({} gradient steps): best eval reward {} at step {}",
        config.train.total_steps,
        result.gradient_steps,
        result
            .best
            .eval_mean_reward
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "n/a".into()),
        result.best.train_step
    );
    Ok(())
}

fn cmd_eval(
    common: &Common,
    level: &str,
    checkpoint: Option<&Path>,
    coverage_only: bool,
    datasets: &[PathBuf],
    n_fields: Option<usize>,
    jobs: usize,
) -> anyhow::Result<()> {
    let config = common.config()?;
    config.validate()?;
    let level: RealismLevel = level.parse()?;
    let out = common.out_dir();

    let policy: Option<QNetwork<f32>> = match (checkpoint, coverage_only) {
        (_, true) => None,
        (Some(path), false) => Some(Checkpoint::load(path)?.build_network()?),
        (None, false) => anyhow::bail!("--checkpoint is required unless --coverage-only is set"),
    };

    let (runs, prior_quality): (Vec<EvalRun>, Vec<PriorQualityRow>) = if level == RealismLevel::L1
    {
        let runs = run_level1(
            policy.as_ref(),
            &config.field,
            &config.noise,
            &config.env,
            n_fields.unwrap_or(config.eval.n_fields),
            common.seed,
            jobs,
        )?;
        (runs, Vec::new())
    } else {
        if datasets.is_empty() {
            anyhow::bail!("{level} needs at least one --dataset bundle directory");
        }
        let bundles = datasets
            .iter()
            .map(|d| DatasetBundle::load(d))
            .collect::<fieldsearch::Result<Vec<_>>>()?;
        let result = run_level(
            level,
            policy.as_ref(),
            &bundles,
            &config.eval.rotations_deg,
            &config.noise,
            &config.env,
            common.seed,
        )?;
        (result.runs, result.prior_quality)
    };

    for q in &prior_quality {
        println!(
            "prior quality {} rot {:>3}: precision {:.3} recall {:.3}",
            q.dataset, q.rotation_deg, q.precision, q.recall
        );
    }
    write_report_dir(&runs, &prior_quality, &out)?;
    println!("wrote {} runs to {}", runs.len(), out.display());
    Ok(())
}

fn cmd_coverage(common: &Common, corner: Corner) -> anyhow::Result<()> {
    let config = common.config()?;
    config.validate()?;
    let out = common.out_dir();
    fs::create_dir_all(&out)?;

    let plan = plan_coverage(config.field.grid_size, config.env.fov_size, corner)?;
    fs::write(
        out.join("coverage_plan.json"),
        serde_json::to_string_pretty(&plan)?,
    )?;
    println!(
        "{}x{0} grid, {} FOV: {} waypoints, {} moves, covers {} cells",
        plan.grid_size,
        plan.fov_size,
        plan.waypoints.len(),
        plan.move_count(),
        plan.covered().true_cells().len()
    );
    Ok(())
}

fn cmd_plot(input: &Path, out: &Path) -> anyhow::Result<()> {
    if !input.is_file() {
        anyhow::bail!("no such curves file: {}", input.display());
    }
    let curves = read_curves_csv(BufReader::new(fs::File::open(input)?))?;
    fs::write(out, render_curves_svg(&curves))?;
    println!("wrote {} with {} curves", out.display(), curves.len());
    Ok(())
}
