//! `polyamix` command line: scripted studies plus fitting, sampling and
//! density evaluation on user data. Every output is a CSV whose first line is
//! a `# {json}` comment with the parameters and seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyamix::encoding::{fit_encoding, EncodingOptions, Schema};
use polyamix::posterior::ModelDoc;
use polyamix::predictive::{sample_posterior_predictive, sample_predictive, MixtureApproximation};
use polyamix::{PosteriorModel, SegmentationFamily};
use polyamix_sim::output::{read_numeric_csv, Table};
use polyamix_sim::studies::density1d::{run_sim1d, Sim1dConfig};
use polyamix_sim::studies::density2d::{run_sim2d, Sim2dConfig};
use polyamix_sim::studies::highdim::{run_highdim, HighdimConfig};
use polyamix_sim::studies::prior_cdf::run_prior_cdf;
use polyamix_sim::studies::quantreg::{run_conformal_coverage, run_quantreg, CoverageConfig, QuantregConfig};
use polyamix_sim::studies::table1::run_table1;
use polyamix_sim::studies::Report;
use polyamix_sim::{stream_rng, SimError, SimResult};
use serde_json::json;

#[derive(Parser)]
#[command(name = "polyamix", version, about = "Mixtures of finite Polya trees over dyadic segmentations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Segmentation probabilities of five depth-2 segmentations on four points.
    Table1 {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        a0: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Prior draws of the leaf CDF on [0, 1].
    PriorCdf {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        a0: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        levels: usize,
        /// Draws per concentration.
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// One-dimensional density estimation errors.
    Sim1d {
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 5, 10])]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Two-dimensional approximation errors, residuals and segmentation weights.
    Sim2d {
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Quantile regression: predictive quantiles, credible and conformal bands.
    Quantreg {
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 50)]
        draws_per_seg: usize,
        /// Total level of the credible band; the conformal band uses half per side.
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        /// Points of the y grid searched for conformal endpoints.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Skip conformity scores and the conformal band.
        #[arg(long)]
        no_conformal: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo coverage of conformal prediction sets.
    Conformal {
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
        /// Number of trials.
        #[arg(long, default_value_t = 400)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mixed continuous and categorical data in ten encoded dimensions.
    Highdim {
        #[arg(long, default_value_t = 400)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        /// Predictive draws.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fits a model to a CSV of points and writes `model.json` and `weights.csv`.
    Fit {
        /// Points in the unit cube, or raw rows when `--schema` is given.
        #[arg(long)]
        data: PathBuf,
        /// JSON column schema; the data are encoded into the cube first.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Splits per dimension; the family holds every ordering of them.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        a0: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Draws from the posterior predictive of a fitted model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Use a mixture with this many draws per segmentation instead of
        /// exact sampling.
        #[arg(long)]
        draws_per_seg: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluates the posterior predictive density at points.
    Density {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn write_report(report: &impl Report, out: &Path) -> SimResult<()> {
    for path in report.write(out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn load_model(path: &Path) -> SimResult<PosteriorModel> {
    let doc: ModelDoc = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(PosteriorModel::try_from(doc)?)
}

fn write_table(table: &Table, path: PathBuf, meta: &serde_json::Value) -> SimResult<()> {
    table.write(&path, meta)?;
    println!("{}", path.display());
    Ok(())
}

fn fit(data: &Path, schema: Option<&Path>, levels: &[usize], a0: f64, common: &Common) -> SimResult<()> {
    fs::create_dir_all(&common.out)?;
    let points: Vec<Vec<f64>> = match schema {
        Some(schema_path) => {
            let schema = Schema::from_json(&fs::read_to_string(schema_path)?)?;
            let rows = schema.read_csv(fs::File::open(data)?)?;
            let spec = fit_encoding(&rows, &schema, EncodingOptions::default())?;
            let path = common.out.join("encoding.json");
            fs::write(&path, spec.to_json())?;
            println!("{}", path.display());
            rows.iter()
                .map(|r| spec.encode(r).map(|e| e.point))
                .collect::<polyamix::Result<_>>()?
        }
        None => read_numeric_csv(data)?,
    };
    if levels.len() != points.first().map_or(levels.len(), Vec::len) {
        return Err(SimError::Validation(format!(
            "--levels names {} dimensions but the data have {}",
            levels.len(),
            points[0].len()
        )));
    }
    let splits: BTreeMap<usize, usize> = levels
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(d, &n)| (d + 1, n))
        .collect();
    let family = SegmentationFamily::balanced(levels.len(), &splits, &[])?;
    let model = PosteriorModel::fit(&points, &family, a0)?;
    let path = common.out.join("model.json");
    fs::write(&path, serde_json::to_string(&model.to_doc())?)?;
    println!("{}", path.display());
    let mut weights = Table::new(&["segmentation", "log_unnormalized", "weight"]);
    for (i, seg) in family.members().iter().enumerate() {
        weights.push([seg.to_string(), model.log_unnormalized()[i].to_string(), model.weights()[i].to_string()]);
    }
    let meta = json!({"command": "fit", "a0": a0, "levels": levels, "m": points.len(), "members": family.len()});
    write_table(&weights, common.out.join("weights.csv"), &meta)
}

fn sample(model: &Path, n: usize, draws_per_seg: Option<usize>, common: &Common) -> SimResult<()> {
    let model = load_model(model)?;
    if n == 0 {
        return Err(SimError::Validation("--n must be positive".into()));
    }
    let mut rng = stream_rng(common.seed, 0);
    let sample = match draws_per_seg {
        Some(h) => sample_predictive(&MixtureApproximation::build(&model, h, &mut rng)?, n, &mut rng)?,
        None => sample_posterior_predictive(&model, n, &mut rng)?,
    };
    let mut header: Vec<String> = (1..=model.ambient_dim()).map(|d| format!("u{d}")).collect();
    header.extend(["member".to_string(), "draw".to_string()]);
    let mut table = Table::new(&header);
    for (u, p) in sample.points.iter().zip(&sample.provenance) {
        let mut row: Vec<String> = u.iter().map(f64::to_string).collect();
        row.extend([p.member.to_string(), p.draw.to_string()]);
        table.push(row);
    }
    let meta = json!({"command": "sample", "n": n, "draws_per_seg": draws_per_seg, "seed": common.seed});
    write_table(&table, common.out.join("samples.csv"), &meta)
}

fn density(model: &Path, points: &Path, common: &Common) -> SimResult<()> {
    let model = load_model(model)?;
    let points = read_numeric_csv(points)?;
    let mut header: Vec<String> = (1..=model.ambient_dim()).map(|d| format!("u{d}")).collect();
    header.push("density".into());
    let mut table = Table::new(&header);
    for u in &points {
        let f = model.mixture_predictive_density(u)?;
        let mut row: Vec<String> = u.iter().map(f64::to_string).collect();
        row.push(f.to_string());
        table.push(row);
    }
    let meta = json!({"command": "density", "points": points.len()});
    write_table(&table, common.out.join("density.csv"), &meta)
}

fn run(cli: Cli) -> SimResult<()> {
    match cli.command {
        Command::Table1 { a0, common } => write_report(&run_table1(&a0)?, &common.out),
        Command::PriorCdf { a0, levels, runs, common } => {
            write_report(&run_prior_cdf(&a0, runs, levels, common.seed)?, &common.out)
        }
        Command::Sim1d { m, a0, runs, levels, grid, common } => {
            let config = Sim1dConfig { m, a0, runs, levels, grid, seed: common.seed };
            write_report(&run_sim1d(&config)?, &common.out)
        }
        Command::Sim2d { m, a0, runs, grid, common } => {
            let config = Sim2dConfig { m, a0, runs, grid, seed: common.seed };
            write_report(&run_sim2d(&config)?, &common.out)
        }
        Command::Quantreg { m, a0, draws_per_seg, alpha, grid, n, no_conformal, common } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(SimError::Validation(format!("--alpha must lie in (0, 1), got {alpha}")));
            }
            let config = QuantregConfig {
                m,
                a0,
                draws_per_seg,
                n_pred: n,
                alpha_credible: alpha,
                alpha_conformal: alpha / 2.0,
                y_grid: grid,
                conformal: !no_conformal,
                seed: common.seed,
            };
            write_report(&run_quantreg(&config)?, &common.out)
        }
        Command::Conformal { m, a0, alpha, runs, common } => {
            let config = CoverageConfig { m, alpha, trials: runs, a0, seed: common.seed };
            let report = run_conformal_coverage(&config)?;
            println!("coverage {:.4} +- {:.4}", report.coverage(), report.std_error());
            write_report(&report, &common.out)
        }
        Command::Highdim { m, a0, n, common } => {
            let report = run_highdim(&HighdimConfig { m, n, a0, seed: common.seed })?;
            write_report(&report, &common.out)
        }
        Command::Fit { data, schema, levels, a0, common } => fit(&data, schema.as_deref(), &levels, a0, &common),
        Command::Sample { model, n, draws_per_seg, common } => sample(&model, n, draws_per_seg, &common),
        Command::Density { model, points, common } => density(&model, &points, &common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
