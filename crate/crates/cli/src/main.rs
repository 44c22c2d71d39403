use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rsa_exh::analysis::{self, Predicate, RegionReport};
use rsa_exh::data::{self, ColumnMapping, Dataset, Design, NoiseParams};
use rsa_exh::fitting::{self, FitOptions, FitRecord};
use rsa_exh::math::fmt_sig;
use rsa_exh::models::ModelId;
use rsa_exh::oracle;
use rsa_exh::scenario::{Message, ModelParams, World};

#[derive(Parser)]
#[command(
    name = "rsa-exh",
    version,
    about = "Rational Speech Act models of (anti-)exhaustivity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predictions and predicate flags over a grid of priors.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// Number of interior priors i/(N+1).
        #[arg(long, default_value_t = 99)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Regions of the prior where a predicate holds.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "listener-anti-exh", value_parser = parse_predicate)]
        predicate: Predicate,
        /// Grid step before refining boundaries by bisection.
        #[arg(long, default_value_t = 0.001)]
        grid_step: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Maximum-likelihood fit of one model.
    Fit {
        #[arg(long, value_parser = parse_model)]
        model: ModelId,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit several models and rank them by AIC.
    Compare {
        /// Comma-separated model names, or `all`.
        #[arg(long, default_value = "all")]
        models: String,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Speaker and listener tables of the generic recursion.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Prior probability of W_AB.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.33)]
        sigma_a: f64,
        #[arg(long, default_value_t = 0.22)]
        sigma_ab: f64,
        #[arg(long, default_value_t = 0.022)]
        epsilon: f64,
        /// TOML file overriding the default design.
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelId,
    /// JSON file with lambda, delta_ab, delta_anb and optionally xi, chi, rho.
    /// Flags given alongside override its values.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    cost_ab: Option<f64>,
    #[arg(long)]
    cost_anb: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML column mapping for datasets in another layout.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 3000)]
    max_iters: u64,
    /// Constrain Δ_ab = Δ_anb.
    #[arg(long)]
    equal_costs: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse::<ModelId>().map_err(|e| e.to_string())
}

fn parse_predicate(s: &str) -> Result<Predicate, String> {
    s.parse()
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime {
        module: &'static str,
        message: String,
    },
}

fn runtime(module: &'static str) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Runtime {
        module,
        message: e.to_string(),
    }
}

fn io_error(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime {
        module: "io",
        message: format!("{}: {e}", path.display()),
    }
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelParams, CliError> {
        let base = match &self.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_error(path))?;
                Some(ModelParams::from_json(&text).map_err(|e| {
                    CliError::Usage(format!("{}: {e}; expected a JSON object such as {{\"lambda\":3,\"delta_ab\":1,\"delta_anb\":1.2}}", path.display()))
                })?)
            }
            None => None,
        };
        let need = |flag: &str, value: Option<f64>, fallback: Option<f64>| {
            value.or(fallback).ok_or_else(|| {
                CliError::Usage(format!(
                    "model {} needs --{flag} (or pass --params FILE)",
                    self.model
                ))
            })
        };
        let mut params = ModelParams::new(
            need("lambda", self.lambda, base.map(|b| b.lambda))?,
            need("cost-ab", self.cost_ab, base.map(|b| b.delta_ab))?,
            need("cost-anb", self.cost_anb, base.map(|b| b.delta_anb))?,
        );
        if let Some(b) = base {
            params.chi = b.chi;
            params.rho = b.rho;
        }
        params.xi = self.xi.or(base.and_then(|b| b.xi));
        if self.model.uses_xi() && params.xi.is_none() {
            return Err(CliError::Usage(format!("model {} needs --xi", self.model)));
        }
        params
            .validate()
            .map_err(|e| CliError::Usage(format!("{e}; check the parameter flags")))?;
        Ok(params)
    }
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, CliError> {
        let text = fs::read_to_string(&self.data).map_err(io_error(&self.data))?;
        let parsed = match &self.mapping {
            Some(path) => {
                let mapping =
                    ColumnMapping::from_toml(&fs::read_to_string(path).map_err(io_error(path))?)
                        .map_err(|e| runtime("data")(&e))?;
                data::parse_dataset_with(&text, &mapping)
            }
            None => data::parse_dataset(&text),
        };
        let (dataset, errors) = parsed.map_err(|e| runtime("data")(&e))?;
        for e in &errors {
            eprintln!("warning: {}: skipped {e}", self.data.display());
        }
        Ok(data::preprocess(&dataset))
    }
}

impl SearchArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed: self.seed,
            ..FitOptions::default()
        }
    }
}

impl OutputArgs {
    fn emit(&self, body: Vec<u8>) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, body).map_err(io_error(path)),
            None => io::stdout().write_all(&body).map_err(|e| runtime("io")(&e)),
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_vec_pretty(value).map_err(|e| runtime("io")(&e))?;
        body.push(b'\n');
        self.emit(body)
    }
}

fn csv_body<E: std::fmt::Display>(
    write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    module: &'static str,
) -> Result<Vec<u8>, CliError> {
    let mut body = Vec::new();
    write(&mut body).map_err(|e| runtime(module)(&e))?;
    Ok(body)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    #[serde(flatten)]
    report: &'a RegionReport,
    /// Largest ω with a BwRSA anti-exhaustivity region at these costs and λ.
    bwrsa_threshold: f64,
}

#[derive(Serialize)]
struct TableRow {
    level: usize,
    role: &'static str,
    context: usize,
    world: &'static str,
    message: &'static str,
    /// Empty when the listener never hears the message.
    prob: Option<f64>,
}

const WORLD_LABELS: [&str; 2] = ["W_A", "W_AB"];

fn simulate_rows(
    model: ModelId,
    params: &ModelParams,
    p: f64,
    depth: usize,
) -> Result<Vec<TableRow>, CliError> {
    let scenario = oracle::scenario_for(model, params, p).map_err(|e| runtime("engine")(&e))?;
    let rec = scenario
        .iterate(depth, params.lambda)
        .map_err(|e| runtime("engine")(&e))?;
    let mut rows = Vec::new();
    for level in 1..=depth {
        let s = rec.speaker(level);
        for w in World::ALL {
            for ctx in 0..s.n_contexts() {
                for m in Message::ALL {
                    let prob = Some(s.prob(m.index(), w.index(), ctx));
                    rows.push(TableRow {
                        level,
                        role: "speaker",
                        context: ctx,
                        world: WORLD_LABELS[w.index()],
                        message: m.label(),
                        prob,
                    });
                }
            }
        }
        let l = rec.listener(level);
        for m in Message::ALL {
            for w in World::ALL {
                for ctx in 0..l.n_contexts() {
                    let prob = l.joint(m.index(), w.index(), ctx);
                    rows.push(TableRow {
                        level,
                        role: "listener",
                        context: ctx,
                        world: WORLD_LABELS[w.index()],
                        message: m.label(),
                        prob,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn table_csv(rows: &[TableRow]) -> Vec<u8> {
    let mut text = String::from("level,role,context,world,message,prob\n");
    for r in rows {
        let prob = r.prob.map(|x| fmt_sig(x, 12)).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{prob}\n",
            r.level, r.role, r.context, r.world, r.message
        ));
    }
    text.into_bytes()
}

fn parse_models(list: &str) -> Result<Vec<ModelId>, CliError> {
    if list == "all" {
        return Ok(ModelId::ALL.to_vec());
    }
    list.split(',')
        .map(|s| {
            parse_model(s.trim())
                .map_err(|e| CliError::Usage(format!("{e}; use `all` or names like wrsa,svrsa1")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep {
            model,
            grid,
            output,
        } => {
            let params = model.resolve()?;
            if grid == 0 {
                return Err(CliError::Usage("--grid must be at least 1".into()));
            }
            let rows = analysis::sweep(model.model, &params, &analysis::uniform_grid(grid))
                .map_err(|e| runtime("analysis")(&e))?;
            match output.format {
                Format::Csv => output.emit(csv_body(
                    |b| analysis::write_sweep_csv(&rows, b),
                    "analysis",
                )?),
                Format::Json => output.json(&rows),
            }
        }
        Command::Check {
            model,
            predicate,
            grid_step,
            output,
        } => {
            let params = model.resolve()?;
            if !(grid_step > 0.0 && grid_step <= 0.01) {
                return Err(CliError::Usage(format!(
                    "--grid-step must be in (0, 0.01], got {grid_step}"
                )));
            }
            let report = analysis::scan_regions(model.model, &params, predicate, grid_step)
                .map_err(|e| runtime("analysis")(&e))?;
            let threshold = analysis::bwrsa_antiexh_threshold(&params);
            if model.model == ModelId::Bwrsa {
                eprintln!("bwrsa anti-exhaustivity threshold: {threshold}");
            }
            match output.format {
                Format::Csv => output.emit(csv_body(
                    |b| analysis::write_regions_csv(&[report], b),
                    "analysis",
                )?),
                Format::Json => output.json(&CheckReport {
                    report: &report,
                    bwrsa_threshold: threshold,
                }),
            }
        }
        Command::Fit {
            model,
            data,
            search,
            output,
        } => {
            let dataset = data.load()?;
            let fit = if search.equal_costs {
                fitting::fit_equal_costs(model, &dataset, &search.options())
            } else {
                fitting::fit(model, &dataset, &search.options())
            }
            .map_err(|e| runtime("fitting")(&e))?;
            if !fit.converged {
                eprintln!("warning: {model} stopped at the iteration limit");
            }
            let record = FitRecord::from(&fit);
            match output.format {
                Format::Csv => output.emit(csv_body(
                    |b| fitting::write_fits_csv(&[record], b),
                    "fitting",
                )?),
                Format::Json => output.json(&record),
            }
        }
        Command::Compare {
            models,
            data,
            search,
            output,
        } => {
            let models = parse_models(&models)?;
            let dataset = data.load()?;
            let rows = fitting::compare(&models, &dataset, &search.options(), search.equal_costs);
            for row in &rows {
                if let Err(e) = &row.outcome {
                    eprintln!("warning: {} failed: {e}", row.model);
                }
            }
            let records: Vec<FitRecord> = rows.iter().map(FitRecord::from).collect();
            match output.format {
                Format::Csv => output.emit(csv_body(
                    |b| fitting::write_fits_csv(&records, b),
                    "fitting",
                )?),
                Format::Json => output.json(&records),
            }
        }
        Command::Simulate {
            model,
            p,
            depth,
            output,
        } => {
            let params = model.resolve()?;
            if !(0.0..=1.0).contains(&p) {
                return Err(CliError::Usage(format!("--p must be in [0, 1], got {p}")));
            }
            if depth == 0 {
                return Err(CliError::Usage("--depth must be at least 1".into()));
            }
            let rows = simulate_rows(model.model, &params, p, depth)?;
            match output.format {
                Format::Csv => output.emit(table_csv(&rows)),
                Format::Json => output.json(&rows),
            }
        }
        Command::Synth {
            model,
            sigma_a,
            sigma_ab,
            epsilon,
            design,
            seed,
            output,
        } => {
            let params = model.resolve()?;
            let noise = NoiseParams {
                sigma_a,
                sigma_ab,
                epsilon,
            };
            let design = match design {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
                    Design::from_toml(&text)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
                }
                None => Design::default(),
            };
            let dataset = data::synth_generate(model.model, &params, &noise, &design, seed)
                .map_err(|e| runtime("data")(&e))?;
            match output.format {
                Format::Csv => output.emit(csv_body(|b| data::write_dataset(&dataset, b), "data")?),
                Format::Json => output.json(&dataset.rows),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime { module, message }) => {
            eprintln!("error ({module}): {message}");
            ExitCode::from(1)
        }
    }
}
