use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pathexplain::benchlab::{
    convergence_study, gen_interaction_task, hardware_descriptor, prepare_rank_corr, rank_correlation,
    sanity_checks, timing_harness, xor_demo, ConvergenceConfig, ConvergenceRow, InteractionKind, RankCorrConfig,
    RankCorrMethod, RankCorrVariant, RoarConfig, RoarCurve, RoarMethod, RoarStudy, Table, TaskConfig, TimingConfig,
    TimingMethod, TimingRow, XorConfig,
};
use pathexplain::data::{
    attributions_table, dataset_table, interactions_table, ranked_pairs_table, read_dataset_path, read_features_path,
};
use pathexplain::interaction::InteractionDoc;
use pathexplain::{
    expected_gradients, expected_hessians, fit, input_hessian, integrated_gradients, integrated_hessians,
    neural_interaction_detection, sii_exact, sii_monte_carlo, Activation, AttributionVector, Background,
    CoalitionGame, DenseNetwork, Error, InteractionMatrix, LrSchedule, NidAggregation, PathSampling, QuadratureSpec,
    Result, RiemannRule, TrainConfig,
};

const SEED_ENV: &str = "PATHEXPLAIN_SEED";

/// Integrated Gradients, Integrated Hessians and interaction benchmarks for dense networks.
#[derive(Parser, Serialize)]
#[command(name = "pathexplain", version)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed; PATHEXPLAIN_SEED overrides it when set.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Fit a regression network to a CSV dataset (last column is the label).
    Train(TrainArgs),
    /// Explain rows of a CSV file with an attribution or interaction method.
    Explain(ExplainArgs),
    /// Run one of the benchmark protocols and write plot-ready CSV tables.
    Bench {
        #[command(subcommand)]
        bench: Bench,
    },
    /// Generate a synthetic pairwise-interaction regression task.
    Gen(GenArgs),
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Layer widths from input to output, e.g. `10-64-64-64-1`.
    #[arg(long)]
    arch: String,
    /// Hidden activation: relu, tanh, sigmoid, gelu, softplus or softplus:<beta>.
    #[arg(long, default_value = "relu")]
    activation: Activation,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = Schedule::Constant)]
    schedule: Schedule,
    /// Output directory; receives model.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Schedule {
    Constant,
    Cosine,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Ig,
    Ih,
    Eg,
    Eh,
    Hessian,
    Sii,
    SiiMc,
    Nid,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Rule {
    Right,
    Midpoint,
}

impl From<Rule> for RiemannRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Right => RiemannRule::Right,
            Rule::Midpoint => RiemannRule::Midpoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Aggregation {
    Min,
    Mean,
}

impl From<Aggregation> for NidAggregation {
    fn from(a: Aggregation) -> Self {
        match a {
            Aggregation::Min => NidAggregation::Min,
            Aggregation::Mean => NidAggregation::Mean,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Serialize)]
struct ExplainArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of inputs to explain; a trailing label column is ignored.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// `zeros` or comma-separated values; required by ig, ih, sii and sii-mc.
    #[arg(long)]
    baseline: Option<String>,
    /// CSV of reference samples for eg and eh.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Monte-Carlo draws for eg and eh.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Outer path steps.
    #[arg(long, default_value_t = 64)]
    k: usize,
    /// Inner path steps for ih; defaults to k.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value_t = Rule::Right)]
    rule: Rule,
    /// Replace ReLU with SoftPlus of this sharpness before explaining.
    #[arg(long)]
    surgery_beta: Option<f64>,
    /// Permutations for sii-mc.
    #[arg(long, default_value_t = 200)]
    sii_samples: usize,
    #[arg(long, value_enum, default_value_t = Aggregation::Min)]
    nid_aggregation: Aggregation,
    /// Interaction CSVs hold the lower triangle and diagonal; off-diagonal rows count twice in a sum.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Bench {
    /// Remove-and-retrain on a synthetic interaction task.
    Roar(RoarArgs),
    /// Rank correlation against known interactions.
    Rankcorr(RankCorrArgs),
    /// Randomized-weights and randomized-labels sanity checks.
    Sanity(SanityArgs),
    /// Interaction-completeness error against SoftPlus sharpness and path steps.
    Convergence(ConvergenceArgs),
    /// Wall-clock cost of every interaction method as the input dimension grows.
    Timing(TimingArgs),
    /// Train a ReLU network on XOR and explain it.
    Xor(XorArgs),
}

#[derive(Args, Serialize)]
struct TaskArgs {
    /// tanhsum, cossum, multiply, maximum or minimum.
    #[arg(long, default_value = "tanhsum")]
    kind: InteractionKind,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    n_pairs: usize,
    #[arg(long, default_value_t = 10_000)]
    n_samples: usize,
}

impl TaskArgs {
    fn config(&self, seed: u64) -> TaskConfig {
        TaskConfig {
            d: self.d,
            n_pairs: self.n_pairs,
            kind: self.kind,
            n_samples: self.n_samples,
            seed,
        }
    }
}

#[derive(Args, Serialize)]
struct RoarArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// ih, hessian, nid, sii-mc, sii, random.
    #[arg(long, value_delimiter = ',', default_value = "ih,hessian,nid,sii-mc,random")]
    methods: Vec<RoarMethod>,
    #[arg(long, default_value_t = 5)]
    retrains: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    /// Ablation counts to evaluate; default is every count.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10.0)]
    surgery_beta: f64,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    sii_samples: usize,
    #[arg(long, value_enum, default_value_t = Aggregation::Mean)]
    nid_aggregation: Aggregation,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RankCorrArgs {
    /// multiplicative or minmax; both when omitted.
    #[arg(long, value_delimiter = ',', default_value = "multiplicative,minmax")]
    variant: Vec<RankCorrVariant>,
    /// ih, hessian, sii, sii-mc, nid, truth.
    #[arg(long, value_delimiter = ',', default_value = "ih,hessian,sii,sii-mc,nid")]
    method: Vec<RankCorrMethod>,
    #[command(flatten)]
    common: RankCorrCommon,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RankCorrCommon {
    #[arg(long, default_value_t = 10_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 150)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    n_explain: usize,
    #[arg(long, value_enum, default_value_t = Aggregation::Mean)]
    nid_aggregation: Aggregation,
}

impl RankCorrCommon {
    fn config(&self, seed: u64) -> Result<RankCorrConfig> {
        let mut cfg = RankCorrConfig {
            n_samples: self.n_samples,
            quad: QuadratureSpec::square(self.k)?,
            n_explain: self.n_explain,
            nid_aggregation: self.nid_aggregation.into(),
            seed,
            ..RankCorrConfig::default()
        };
        cfg.trainer.epochs = self.epochs;
        Ok(cfg)
    }
}

#[derive(Args, Serialize)]
struct SanityArgs {
    #[arg(long, default_value = "multiplicative")]
    variant: RankCorrVariant,
    /// Number of randomization seeds.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[command(flatten)]
    common: RankCorrCommon,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ConvergenceArgs {
    /// Hidden layers of the random network.
    #[arg(long, default_value_t = 5)]
    layers: usize,
    #[arg(long, default_value_t = 50)]
    width: usize,
    #[arg(long, default_value_t = 100)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "10,5,2,1")]
    betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128,256")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = Rule::Midpoint)]
    rule: Rule,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TimingArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,50,500")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// ih, hessian, sii-mc, sii, nid.
    #[arg(long, value_delimiter = ',', default_value = "ih,hessian,sii-mc,sii,nid")]
    methods: Vec<TimingMethod>,
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    sii_samples: usize,
    /// Per-method budget in seconds; longer runs are recorded as capped.
    #[arg(long, default_value_t = 600.0)]
    time_cap: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct XorArgs {
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 10.0)]
    surgery_beta: f64,
    #[arg(long, default_value_t = 256)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Collects artifacts for one output directory and writes its manifest last.
struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.into());
        self.dir.join(name)
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let p = self.path(name);
        table.write_csv(&p)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, text)?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    flags: &'a Cli,
    seed: u64,
    artifacts: &'a [String],
    version: &'static str,
    duration_seconds: f64,
}

fn write_manifest(out: &OutDir, cli: &Cli, started: Instant) -> Result<()> {
    let command = match &cli.command {
        Command::Train(_) => "train",
        Command::Explain(_) => "explain",
        Command::Gen(_) => "gen",
        Command::Bench { bench } => match bench {
            Bench::Roar(_) => "bench roar",
            Bench::Rankcorr(_) => "bench rankcorr",
            Bench::Sanity(_) => "bench sanity",
            Bench::Convergence(_) => "bench convergence",
            Bench::Timing(_) => "bench timing",
            Bench::Xor(_) => "bench xor",
        },
    };
    let manifest = Manifest {
        command,
        argv: std::env::args().skip(1).collect(),
        flags: cli,
        seed: cli.seed,
        artifacts: &out.artifacts,
        version: env!("CARGO_PKG_VERSION"),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    fs::write(out.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn parse_arch(arch: &str) -> Result<Vec<usize>> {
    let widths = arch
        .split('-')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::InvalidArgument(format!("bad layer width `{w}` in --arch `{arch}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 2 || widths[widths.len() - 1] != 1 {
        return Err(Error::InvalidArgument(format!(
            "--arch `{arch}` must list at least an input and an output width, ending in 1"
        )));
    }
    Ok(widths)
}

fn train(args: &TrainArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let widths = parse_arch(&args.arch)?;
    let ds = read_dataset_path(&args.data)?;
    if ds.xs.ncols() != widths[0] {
        return Err(Error::InvalidArgument(format!(
            "--arch input width {} does not match the {} feature columns of {}",
            widths[0],
            ds.xs.ncols(),
            args.data.display()
        )));
    }
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
        schedule: match args.schedule {
            Schedule::Constant => LrSchedule::Constant,
            Schedule::Cosine => LrSchedule::Cosine,
        },
        ..TrainConfig::default()
    };
    let (net, report) = fit(&widths, args.activation, Activation::Identity, ds.xs.view(), ds.ys.view(), &cfg)?;
    out.text("model.json", &(net.to_json()? + "\n"))?;
    println!("final loss: {:e}", report.final_loss);
    Ok(())
}

fn parse_baseline(spec: &str, d: usize) -> Result<Vec<f64>> {
    if spec.trim() == "zeros" {
        return Ok(vec![0.0; d]);
    }
    let values = spec
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("--baseline value `{v}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != d {
        return Err(Error::InvalidArgument(format!(
            "--baseline has {} values but the model takes {d} inputs",
            values.len()
        )));
    }
    Ok(values)
}

fn explain(args: &ExplainArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let mut net = DenseNetwork::from_json(&fs::read_to_string(&args.model)?)?;
    if let Some(beta) = args.surgery_beta {
        net = net.softplus_surgery(beta)?;
    }
    let d = net.input_dim();
    let xs = read_features_path(&args.input, d)?;
    let rows: Vec<Vec<f64>> = xs.rows().into_iter().map(|r| r.to_vec()).collect();
    let quad = QuadratureSpec::new(args.k, args.m.unwrap_or(args.k))?.with_rule(args.rule.into());
    let baseline = || -> Result<Vec<f64>> {
        let spec = args.baseline.as_deref().ok_or_else(|| {
            Error::InvalidArgument("--baseline is required for this method (e.g. --baseline zeros)".into())
        })?;
        parse_baseline(spec, d)
    };
    let background = || -> Result<Background> {
        let path = args
            .background
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--background is required for eg and eh".into()))?;
        Ok(Background {
            seed,
            ..Background::new(read_features_path(path, d)?)
        })
    };
    let sampling = |i: usize| PathSampling {
        draws: args.draws,
        seed: pathexplain::seed::derive(seed, 0, i as u64),
    };
    let name = |stem: &str| match args.format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    };

    let tag = |mut v: Vec<AttributionVector>| {
        for a in &mut v {
            a.meta.surgery_beta = args.surgery_beta;
        }
        v
    };
    let tag_im = |mut v: Vec<InteractionMatrix>| {
        for m in &mut v {
            m.meta.surgery_beta = args.surgery_beta;
        }
        v
    };

    match args.method {
        Method::Ig | Method::Eg => {
            let attrs = if args.method == Method::Ig {
                let b = baseline()?;
                rows.iter().map(|x| integrated_gradients(&net, x, &b, &quad)).collect::<Result<Vec<_>>>()?
            } else {
                let bg = background()?;
                rows.iter()
                    .enumerate()
                    .map(|(i, x)| expected_gradients(&net, x, &bg, &sampling(i)))
                    .collect::<Result<Vec<_>>>()?
            };
            let attrs = tag(attrs);
            match args.format {
                Format::Csv => out.table(&name("attributions"), &attributions_table(&attrs))?,
                Format::Json => out.json(&name("attributions"), &attrs)?,
            }
        }
        Method::Nid => {
            let ranked = neural_interaction_detection(&net, args.nid_aggregation.into());
            match args.format {
                Format::Csv => out.table(&name("interactions"), &ranked_pairs_table(&ranked))?,
                Format::Json => out.json(&name("interactions"), &ranked)?,
            }
        }
        method => {
            let mats = rows
                .iter()
                .enumerate()
                .map(|(i, x)| match method {
                    Method::Ih => integrated_hessians(&net, x, &baseline()?, &quad),
                    Method::Eh => expected_hessians(&net, x, &background()?, &sampling(i)),
                    Method::Hessian => input_hessian(&net, x),
                    Method::Sii => sii_exact(&CoalitionGame::new(&net, x, &baseline()?)?),
                    Method::SiiMc => sii_monte_carlo(
                        &CoalitionGame::new(&net, x, &baseline()?)?,
                        args.sii_samples,
                        pathexplain::seed::derive(seed, 0, i as u64),
                    ),
                    Method::Ig | Method::Eg | Method::Nid => unreachable!("handled above"),
                })
                .collect::<Result<Vec<_>>>()?;
            let mats = tag_im(mats);
            match args.format {
                Format::Csv => out.table(&name("interactions"), &interactions_table(&mats))?,
                Format::Json => {
                    let docs: Vec<InteractionDoc> = mats.iter().map(InteractionDoc::from).collect();
                    out.json(&name("interactions"), &docs)?
                }
            }
        }
    }
    println!("explained {} rows with {}", rows.len(), method_name(args.method));
    Ok(())
}

fn method_name(m: Method) -> String {
    m.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn gen(args: &GenArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let task = gen_interaction_task(&args.task.config(seed))?;
    out.table("task.csv", &dataset_table(&task.xs, &task.ys))?;
    out.json("task.json", &task.manifest())?;
    println!("generated {} samples with {} interaction terms", task.n_samples(), task.terms.len());
    Ok(())
}

fn bench_roar(args: &RoarArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let task = gen_interaction_task(&args.task.config(seed))?;
    out.json("task.json", &task.manifest())?;
    let mut cfg = RoarConfig {
        retrains: args.retrains,
        surgery_beta: args.surgery_beta,
        quad: QuadratureSpec::square(args.k)?,
        sii_samples: args.sii_samples,
        nid_aggregation: args.nid_aggregation.into(),
        steps: args.steps.clone(),
        noise_seed: seed,
        seed,
        ..RoarConfig::default()
    };
    cfg.trainer.epochs = args.epochs;
    let study = RoarStudy::prepare(task, cfg)?;
    println!("reference network held-out R^2 = {:.4}", study.reference_r2);
    let mut curves = Vec::new();
    for &m in &args.methods {
        let c = study.curve(m)?;
        println!("{m:>8}  AUC {:.6}", c.auc());
        curves.push(c);
    }
    out.table("roar.csv", &RoarCurve::table(&curves).meta("reference_r2", study.reference_r2))?;
    let mut auc = Table::new(["method", "auc"]);
    for c in &curves {
        auc.push(vec![c.method.clone(), format!("{:?}", c.auc())]);
    }
    out.table("roar_auc.csv", &auc)
}

fn bench_rankcorr(args: &RankCorrArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let cfg = args.common.config(seed)?;
    let mut t = Table::new(["variant", "method", "global", "local", "validation_r2"]);
    for &variant in &args.variant {
        let model = prepare_rank_corr(variant, &cfg)?;
        for &method in &args.method {
            let r = rank_correlation(&model, method)?;
            let local = r.local.map_or_else(|| "n/a".to_string(), |l| format!("{l:?}"));
            println!("{:>14} {:>8}  global {:.3}  local {}", variant.name(), method.name(), r.global, local);
            t.push(vec![
                variant.name().into(),
                method.name().into(),
                format!("{:?}", r.global),
                local,
                format!("{:?}", model.validation_r2),
            ]);
        }
    }
    out.table("rankcorr.csv", &t)
}

fn bench_sanity(args: &SanityArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let model = prepare_rank_corr(args.variant, &args.common.config(seed)?)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|s| seed.wrapping_add(s)).collect();
    let r = sanity_checks(&model, &seeds)?;
    let mut t = Table::new(["seed", "rho_random_weights", "rho_random_labels"])
        .meta("median_abs_random_weights", r.median_abs_random_weights())
        .meta("median_abs_random_labels", r.median_abs_random_labels());
    for (i, s) in r.seeds.iter().enumerate() {
        t.push(vec![
            s.to_string(),
            format!("{:?}", r.rho_random_weights[i]),
            format!("{:?}", r.rho_random_labels[i]),
        ]);
    }
    println!(
        "median |rho|: random weights {:.3}, random labels {:.3}",
        r.median_abs_random_weights(),
        r.median_abs_random_labels()
    );
    out.table("sanity.csv", &t)
}

fn bench_convergence(args: &ConvergenceArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let cfg = ConvergenceConfig {
        d: args.d,
        hidden_layers: args.layers,
        width: args.width,
        betas: args.betas.clone(),
        ks: args.ks.clone(),
        n_samples: args.samples,
        rule: args.rule.into(),
        seed,
    };
    let rows = convergence_study(&cfg)?;
    for r in &rows {
        println!("beta {:>5}  k {:>4}  median error {:.3e}", r.beta, r.k, r.median_error);
    }
    out.table("convergence.csv", &ConvergenceRow::table(&rows))
}

fn bench_timing(args: &TimingArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    if !(args.time_cap >= 0.0 && args.time_cap.is_finite()) {
        return Err(Error::InvalidArgument("--time-cap must be a finite number of seconds".into()));
    }
    let cfg = TimingConfig {
        dims: args.dims.clone(),
        n_samples: args.samples,
        methods: args.methods.clone(),
        quad: QuadratureSpec::square(args.k)?,
        sii_samples: args.sii_samples,
        time_cap: Duration::from_secs_f64(args.time_cap),
        seed,
        ..TimingConfig::default()
    };
    let rows = timing_harness(&cfg)?;
    for r in &rows {
        println!("d {:>4}  {:>8}  {:>10.3}s  {}", r.d, r.method.name(), r.projected_seconds, r.status);
    }
    out.table("timing.csv", &TimingRow::table(&rows, &hardware_descriptor()))
}

fn bench_xor(args: &XorArgs, seed: u64, out: &mut OutDir) -> Result<()> {
    let mut cfg = XorConfig {
        hidden: args.hidden,
        surgery_beta: args.surgery_beta,
        quad: QuadratureSpec::square(args.k)?,
        ..XorConfig::default()
    };
    cfg.trainer.seed = seed;
    let r = xor_demo(&cfg)?;
    println!("phi(0,0) = {:?}", r.phi_00.values);
    println!("phi(1,1) = {:?}", r.phi_11.values);
    println!("Gamma_12(1,1) = {:.4}", r.gamma_11.gamma[[0, 1]]);
    println!(
        "sum Gamma(1,1) = {:.4}, f(1,1) - f(0,0) = {:.4}",
        r.gamma_11.total(),
        r.outputs[3] - r.outputs[0]
    );
    out.text("xor_model.json", &(r.net.to_json()? + "\n"))?;
    out.table("xor.csv", &r.table())
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: &mut Cli) -> Result<()> {
    let started = Instant::now();
    cli.seed = effective_seed(cli.seed)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--threads: {e}")))?;
    }
    let seed = cli.seed;
    let mut out = match &cli.command {
        Command::Train(a) => OutDir::create(&a.out)?,
        Command::Explain(a) => OutDir::create(&a.out)?,
        Command::Gen(a) => OutDir::create(&a.out)?,
        Command::Bench { bench } => OutDir::create(match bench {
            Bench::Roar(a) => &a.out,
            Bench::Rankcorr(a) => &a.out,
            Bench::Sanity(a) => &a.out,
            Bench::Convergence(a) => &a.out,
            Bench::Timing(a) => &a.out,
            Bench::Xor(a) => &a.out,
        })?,
    };
    match &cli.command {
        Command::Train(a) => train(a, seed, &mut out)?,
        Command::Explain(a) => explain(a, seed, &mut out)?,
        Command::Gen(a) => gen(a, seed, &mut out)?,
        Command::Bench { bench } => match bench {
            Bench::Roar(a) => bench_roar(a, seed, &mut out)?,
            Bench::Rankcorr(a) => bench_rankcorr(a, seed, &mut out)?,
            Bench::Sanity(a) => bench_sanity(a, seed, &mut out)?,
            Bench::Convergence(a) => bench_convergence(a, seed, &mut out)?,
            Bench::Timing(a) => bench_timing(a, seed, &mut out)?,
            Bench::Xor(a) => bench_xor(a, seed, &mut out)?,
        },
    }
    write_manifest(&out, cli, started)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    match run(&mut cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
