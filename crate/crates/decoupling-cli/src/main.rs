//! Command-line front end. Every subcommand writes its full result to a file
//! under the output directory and prints a one-line summary; numeric output
//! files embed the instance fingerprint and the seed that produced them.
//!
//! Exit codes: 0 success, 1 a contract verdict failed (experiment threshold,
//! certificate, tangency/CI check), 2 usage or resource errors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use decoupling::banach::SpaceDescriptor;
use decoupling::estimator::{
    decoupling_ratio, lp_norm_mc, weak_type_constant, RatioEstimate, SumSide,
};
use decoupling::experiments::{
    exp_c0_growth, exp_fubini_lift, exp_garling_split, exp_l1_bounded, exp_p_dependence,
    exp_schatten_probe, ExperimentConfig, ExperimentReport, EXPERIMENT_NAMES,
};
use decoupling::martingale::{check_ci, check_tangent, decouple, GeneratorKernel};
use decoupling::probspace::{Coordinate, CoordinateSpace, DEFAULT_ATOM_CAP};
use decoupling::search::{
    dimension_sweep, umd_constant_exact, Mode, PaleyWalshInstance, SearchConfig,
};
use decoupling::{davis, mix_seed};

#[derive(Parser)]
#[command(
    name = "decoupling",
    about = "Exact and searched decoupling constants for vector-valued martingales",
    version
)]
struct Cli {
    /// Flat key=value config file; flags override it, it overrides defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Rayon worker count. Changes speed, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for result files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Atom budget for constructed spaces, doubled space included.
    #[arg(long, global = true)]
    atom_cap: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Serialized kernel file; omit to generate a random instance instead.
    #[arg(long)]
    kernel: Option<PathBuf>,

    /// Value-space descriptor, e.g. lp:dim=4,p=inf or trace:k=2.
    #[arg(long)]
    space: Option<String>,

    /// Number of steps for a generated instance.
    #[arg(long)]
    n: Option<usize>,

    /// Seed for generated instances and Monte Carlo streams.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Decoupling ratio of a kernel's plain and decoupled partial sums.
    Ratio {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        p: Option<f64>,
        /// exact or mc.
        #[arg(long)]
        engine: Option<String>,
        /// Monte Carlo sample count.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Best level constant in lambda P(||f_N|| >= lambda) <= C E||g_N||.
    WeakType {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Exhaustive sign-enumeration constant of a Paley-Walsh kernel.
    Umd {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Hill-climb worst instances across a dimension ladder.
    Sweep {
        #[arg(long)]
        space: Option<String>,
        /// Comma-separated dimensions, strictly increasing.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        /// decoupling, umd_exact, garling_forward, or garling_reverse.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Run a named experiment and write its CSV, JSON, and chart.
    Experiment {
        /// c0-growth, l1-bounded, fubini-lift, p-dependence, schatten-probe,
        /// or garling-split.
        name: String,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        /// Exponent list for p-dependence.
        #[arg(long)]
        ps: Option<String>,
        /// Matrix sizes for schatten-probe.
        #[arg(long)]
        ks: Option<String>,
        /// Section weights for fubini-lift.
        #[arg(long)]
        weights: Option<String>,
        /// Inner-space descriptor for fubini-lift.
        #[arg(long)]
        inner: Option<String>,
        #[arg(long)]
        space: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Davis-split a kernel and check every certificate inequality.
    Certify {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Verify tangency and conditional independence of a kernel's pair.
    Check {
        #[command(flatten)]
        instance: InstanceArgs,
    },
}

/// Resolved settings shared by the subcommands, after flag > config file >
/// default precedence.
struct RunConfig {
    out_dir: PathBuf,
    atom_cap: u64,
    seed: u64,
    budget: u64,
}

const DEFAULT_SEED: u64 = 2026;
const DEFAULT_BUDGET: u64 = 10_000;
const DEFAULT_RESTARTS: usize = 4;
const DEFAULT_SAMPLES: u64 = 65_536;

const CONFIG_KEYS: [&str; 18] = [
    "atom-cap", "budget", "dims", "engine", "inner", "kernel", "ks", "mode", "n", "out-dir", "p",
    "ps", "restarts", "samples", "seed", "space", "threads", "weights",
];

/// Flat key=value file. Unknown keys are errors, not warnings, so a typo
/// cannot silently fall back to a default.
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut map = HashMap::new();
        let Some(path) = path else {
            return Ok(Self(map));
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("--config {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
            let key = key.trim();
            if !CONFIG_KEYS.contains(&key) {
                bail!("config line {}: unknown key {key:?}", i + 1);
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow!("config key {key}: cannot parse {raw:?}")),
        }
    }
}

/// flag value, else config value, else default.
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
    default: T,
) -> anyhow::Result<T> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

fn require<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
) -> anyhow::Result<T> {
    flag.or(cfg.get(key)?)
        .ok_or_else(|| anyhow!("missing required flag --{key}"))
}

fn parse_list<T: std::str::FromStr>(raw: &str, flag: &str) -> anyhow::Result<Vec<T>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| anyhow!("--{flag}: cannot parse {s:?}"))
        })
        .collect()
}

/// Uniform wrapper for JSON result files: whatever the result is, the file
/// carries the fingerprint of the instance and the seed in play.
#[derive(Serialize)]
struct Envelope<T: Serialize> {
    command: &'static str,
    seed: Option<u64>,
    fingerprint: String,
    result: T,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, envelope: &Envelope<T>) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(envelope)?;
    fs::write(&path, text)?;
    Ok(path)
}

fn rademacher_with_cap(n: usize, cap: u64) -> decoupling::Result<CoordinateSpace> {
    CoordinateSpace::with_cap(vec![Coordinate::rademacher(); n], cap)
}

/// Enforce the cap override on a kernel read from a file, counting the
/// doubled space it will be decoupled on.
fn check_kernel_cap(kernel: &GeneratorKernel, cap: u64) -> anyhow::Result<()> {
    let mut required: u128 = 1;
    for c in kernel.space().levels() {
        required = required.saturating_mul((c.arity() as u128).pow(2));
    }
    if required > cap as u128 {
        bail!("space requires {required} atoms, cap is {cap}");
    }
    Ok(())
}

/// Load the kernel named by --kernel, or generate one from --space, --n, and
/// the seed. A --space given alongside --kernel reinterprets the stored
/// tables in that space, which must have the same total dimension.
fn load_instance(
    inst: &InstanceArgs,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<(GeneratorKernel, u64)> {
    let seed = resolve(inst.seed, cfg, "seed", run.seed)?;
    let space_text: Option<String> = inst.space.clone().or(cfg.get("space")?);
    let kernel_path: Option<PathBuf> = inst.kernel.clone().or(cfg.get("kernel")?);
    let kernel = match kernel_path {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("--kernel {}", path.display()))?;
            let k = GeneratorKernel::parse(&text)?;
            check_kernel_cap(&k, run.atom_cap)?;
            match space_text {
                Some(ref t) => {
                    let banach = SpaceDescriptor::parse(t)?;
                    if banach == *k.banach() {
                        k
                    } else {
                        k.with_banach(banach)?
                    }
                }
                None => k,
            }
        }
        None => {
            let text = space_text
                .ok_or_else(|| anyhow!("missing required flag --kernel or --space"))?;
            let banach = SpaceDescriptor::parse(&text)?;
            let n = require(inst.n, cfg, "n")?;
            let space = rademacher_with_cap(n, run.atom_cap)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            GeneratorKernel::random(&space, &banach, &mut rng)?
        }
    };
    Ok((kernel, seed))
}

fn run_ratio(
    instance: &InstanceArgs,
    p: Option<f64>,
    engine: Option<String>,
    samples: Option<u64>,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let p = require(p, cfg, "p")?;
    let engine = resolve(engine, cfg, "engine", "exact".to_string())?;
    let (kernel, seed) = load_instance(instance, cfg, run)?;
    match engine.as_str() {
        "exact" => {
            let pair = decouple(&kernel)?;
            let n = resolve(instance.n, cfg, "n", pair.steps())?;
            let est = decoupling_ratio(&pair, p, n)?;
            let path = write_json(
                &run.out_dir,
                "ratio.json",
                &Envelope {
                    command: "ratio",
                    seed: None,
                    fingerprint: est.fingerprint.clone(),
                    result: &est,
                },
            )?;
            println!("{} -> {}", summary_of(&est), path.display());
        }
        "mc" => {
            let samples = resolve(samples, cfg, "samples", DEFAULT_SAMPLES)?;
            let f = lp_norm_mc(&kernel, SumSide::F, p, samples, mix_seed(seed, 0))?;
            let g = lp_norm_mc(&kernel, SumSide::G, p, samples, mix_seed(seed, 1))?;
            let forward = (g.value > 0.0).then(|| (f.value / g.value).powf(1.0 / p));
            #[derive(Serialize)]
            struct McRatio {
                forward: Option<f64>,
                p: f64,
                f: decoupling::estimator::ConstantEstimate,
                g: decoupling::estimator::ConstantEstimate,
            }
            let out = McRatio { forward, p, f, g };
            let path = write_json(
                &run.out_dir,
                "ratio.json",
                &Envelope {
                    command: "ratio",
                    seed: Some(seed),
                    fingerprint: out.f.fingerprint.clone(),
                    result: &out,
                },
            )?;
            match out.forward {
                Some(v) => println!(
                    "ratio forward={v} p={p} engine=mc samples={samples} seed={seed} -> {}",
                    path.display()
                ),
                None => println!(
                    "ratio degenerate (decoupled side vanished in {samples} samples) -> {}",
                    path.display()
                ),
            }
        }
        other => bail!("--engine must be exact or mc, got {other:?}"),
    }
    Ok(true)
}

fn summary_of(est: &RatioEstimate) -> String {
    match (est.forward, est.reverse) {
        (Some(f), Some(r)) => format!(
            "ratio forward={f} reverse={r} p={} n={} fingerprint={}",
            est.p, est.n, est.fingerprint
        ),
        (Some(f), None) => format!(
            "ratio forward={f} reverse=degenerate p={} n={} fingerprint={}",
            est.p, est.n, est.fingerprint
        ),
        (None, Some(r)) => format!(
            "ratio forward=degenerate reverse={r} p={} n={} fingerprint={}",
            est.p, est.n, est.fingerprint
        ),
        (None, None) => format!(
            "ratio degenerate (both sums vanish) p={} n={} fingerprint={}",
            est.p, est.n, est.fingerprint
        ),
    }
}

fn run_weak_type(
    instance: &InstanceArgs,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let (kernel, _) = load_instance(instance, cfg, run)?;
    let pair = decouple(&kernel)?;
    let n = resolve(instance.n, cfg, "n", pair.steps())?;
    let est = weak_type_constant(&pair, n)?;
    let path = write_json(
        &run.out_dir,
        "weak_type.json",
        &Envelope {
            command: "weak-type",
            seed: None,
            fingerprint: est.fingerprint.clone(),
            result: &est,
        },
    )?;
    match est.value {
        Some(v) => println!(
            "weak_type={v} at_level={} n={n} fingerprint={} -> {}",
            est.at_level,
            est.fingerprint,
            path.display()
        ),
        None => println!(
            "weak_type degenerate (E||g_N|| = 0) fingerprint={} -> {}",
            est.fingerprint,
            path.display()
        ),
    }
    Ok(true)
}

fn run_umd(
    instance: &InstanceArgs,
    p: Option<f64>,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let p = require(p, cfg, "p")?;
    let (kernel, _) = load_instance(instance, cfg, run)?;
    let inst = PaleyWalshInstance::from_kernel(&kernel)?;
    let est = umd_constant_exact(&inst, p)?;
    let path = write_json(
        &run.out_dir,
        "umd.json",
        &Envelope {
            command: "umd",
            seed: None,
            fingerprint: est.estimate.fingerprint.clone(),
            result: &est,
        },
    )?;
    let signs: String = est
        .signs
        .iter()
        .map(|s| if *s > 0 { '+' } else { '-' })
        .collect();
    println!(
        "umd={} signs={signs} p={p} fingerprint={} -> {}",
        est.estimate.value,
        est.estimate.fingerprint,
        path.display()
    );
    Ok(true)
}

fn run_sweep(
    space: Option<String>,
    dims: Option<String>,
    n: Option<usize>,
    p: Option<f64>,
    mode: Option<String>,
    budget: Option<u64>,
    seed: Option<u64>,
    restarts: Option<usize>,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let space = SpaceDescriptor::parse(&require(space, cfg, "space")?)?;
    let dims: Vec<usize> = parse_list(&require(dims, cfg, "dims")?, "dims")?;
    let n = require(n, cfg, "n")?;
    let p = require(p, cfg, "p")?;
    let mode = Mode::parse(&resolve(mode, cfg, "mode", "decoupling".to_string())?)?;
    let budget = resolve(budget, cfg, "budget", run.budget)?;
    let seed = resolve(seed, cfg, "seed", run.seed)?;
    let restarts = resolve(restarts, cfg, "restarts", DEFAULT_RESTARTS)?;
    rademacher_with_cap(n, run.atom_cap)?.doubled()?;
    let template = SearchConfig::new(space, p, n, mode, budget, seed, restarts)?;
    let table = dimension_sweep(&template, &dims)?;
    fs::create_dir_all(&run.out_dir)?;
    let csv_path = run.out_dir.join("sweep.csv");
    fs::write(&csv_path, table.to_csv())?;
    let last = table.rows.last().expect("nonempty sweep");
    write_json(
        &run.out_dir,
        "sweep.json",
        &Envelope {
            command: "sweep",
            seed: Some(seed),
            fingerprint: last.fingerprint.clone(),
            result: &table,
        },
    )?;
    println!(
        "sweep mode={mode} dims={dims:?} best_last={} seed={seed} -> {}",
        last.best_constant,
        csv_path.display()
    );
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn run_experiment(
    name: &str,
    dims: Option<String>,
    n: Option<usize>,
    p: Option<f64>,
    ps: Option<String>,
    ks: Option<String>,
    weights: Option<String>,
    inner: Option<String>,
    space: Option<String>,
    seed: Option<u64>,
    budget: Option<u64>,
    restarts: Option<usize>,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let exp_cfg = ExperimentConfig {
        seed: resolve(seed, cfg, "seed", run.seed)?,
        budget: resolve(budget, cfg, "budget", run.budget)?,
        restarts: resolve(restarts, cfg, "restarts", DEFAULT_RESTARTS)?,
        ..ExperimentConfig::default()
    };
    let dims: Option<Vec<usize>> = match dims.or(cfg.get("dims")?) {
        Some(raw) => Some(parse_list(&raw, "dims")?),
        None => None,
    };
    let ps: Option<Vec<f64>> = match ps.or(cfg.get("ps")?) {
        Some(raw) => Some(parse_list(&raw, "ps")?),
        None => None,
    };
    let ks: Option<Vec<usize>> = match ks.or(cfg.get("ks")?) {
        Some(raw) => Some(parse_list(&raw, "ks")?),
        None => None,
    };
    let weights: Option<Vec<f64>> = match weights.or(cfg.get("weights")?) {
        Some(raw) => Some(parse_list(&raw, "weights")?),
        None => None,
    };
    let inner = match inner.or(cfg.get("inner")?) {
        Some(t) => Some(SpaceDescriptor::parse(&t)?),
        None => None,
    };
    let space = match space.or(cfg.get("space")?) {
        Some(t) => Some(SpaceDescriptor::parse(&t)?),
        None => None,
    };
    let n = match n {
        Some(v) => Some(v),
        None => cfg.get("n")?,
    };
    let p = match p {
        Some(v) => Some(v),
        None => cfg.get("p")?,
    };

    // Per-name defaults; an override flag replaces only its own slot.
    let report: ExperimentReport = match name {
        "c0-growth" => exp_c0_growth(
            &dims.unwrap_or_else(|| vec![2, 4, 8]),
            n.unwrap_or(4),
            p.unwrap_or(1.0),
            &exp_cfg,
        )?,
        "l1-bounded" => exp_l1_bounded(
            &dims.unwrap_or_else(|| vec![2, 4, 8]),
            n.unwrap_or(4),
            p.unwrap_or(1.0),
            &exp_cfg,
        )?,
        "fubini-lift" => exp_fubini_lift(
            &weights.unwrap_or_else(|| vec![0.25, 0.75]),
            &inner.unwrap_or_else(|| SpaceDescriptor::lp(2, 1.0)),
            n.unwrap_or(3),
            p.unwrap_or(1.0),
            &exp_cfg,
        )?,
        "p-dependence" => exp_p_dependence(
            &space.unwrap_or_else(|| SpaceDescriptor::lp(4, 1.0)),
            n.unwrap_or(3),
            &ps.unwrap_or_else(|| vec![1.0, 1.5, 2.0, 4.0]),
            &exp_cfg,
        )?,
        "schatten-probe" => exp_schatten_probe(
            &ks.unwrap_or_else(|| vec![2, 3, 4]),
            n.unwrap_or(3),
            p.unwrap_or(1.0),
            exp_cfg.budget.min(2_000),
            &exp_cfg,
        )?,
        "garling-split" => exp_garling_split(
            &space.unwrap_or_else(|| SpaceDescriptor::linf(4)),
            n.unwrap_or(4),
            p.unwrap_or(1.0),
            exp_cfg.budget,
            &exp_cfg,
        )?,
        other => bail!(
            "unknown experiment {other:?}; expected one of {}",
            EXPERIMENT_NAMES.join(", ")
        ),
    };

    fs::create_dir_all(&run.out_dir)?;
    let csv_path = run.out_dir.join(format!("{name}.csv"));
    fs::write(&csv_path, report.to_csv())?;
    fs::write(run.out_dir.join(format!("{name}.json")), report.summary_json())?;
    if let Some(svg) = report.svg() {
        fs::write(run.out_dir.join(format!("{name}.svg")), svg)?;
    }
    let passed = report.verdicts.iter().filter(|v| v.passed).count();
    println!(
        "{name}: {} rows, verdicts {passed}/{} passed, seed={} -> {}",
        report.rows.len(),
        report.verdicts.len(),
        exp_cfg.seed,
        csv_path.display()
    );
    Ok(report.passed())
}

fn run_certify(
    instance: &InstanceArgs,
    cfg: &FileConfig,
    run: &RunConfig,
) -> anyhow::Result<bool> {
    let (kernel, _) = load_instance(instance, cfg, run)?;
    let split = davis::davis_split(&kernel)?;
    let report = davis::certify_davis(&split);
    let path = write_json(
        &run.out_dir,
        "davis_certificate.json",
        &Envelope {
            command: "certify",
            seed: None,
            fingerprint: kernel.fingerprint(),
            result: &report,
        },
    )?;
    let verdict = if report.passed() { "ok" } else { "FAILED" };
    println!(
        "davis certificate: {verdict} worst_slack={} entries={} fingerprint={} -> {}",
        report.worst(),
        report.entries.len(),
        kernel.fingerprint(),
        path.display()
    );
    Ok(report.passed())
}

fn run_check(instance: &InstanceArgs, cfg: &FileConfig, run: &RunConfig) -> anyhow::Result<bool> {
    let (kernel, _) = load_instance(instance, cfg, run)?;
    let pair = decouple(&kernel)?;
    let tangent = check_tangent(pair.d(), pair.e())?;
    let ci = check_ci(&pair);
    #[derive(Serialize)]
    struct CheckResult {
        tangent: bool,
        ci: bool,
        tangent_witness: Option<String>,
        ci_witness: Option<String>,
    }
    let result = CheckResult {
        tangent: tangent.is_tangent(),
        ci: ci.holds(),
        tangent_witness: match &tangent {
            decoupling::martingale::TangentOutcome::Tangent => None,
            decoupling::martingale::TangentOutcome::Failed(w) => Some(format!("{w:?}")),
        },
        ci_witness: match &ci {
            decoupling::martingale::CiOutcome::ConditionallyIndependent => None,
            decoupling::martingale::CiOutcome::Failed(w) => Some(format!("{w:?}")),
        },
    };
    let ok = result.tangent && result.ci;
    let line = format!(
        "tangent: {}, CI: {}",
        if result.tangent { "yes" } else { "no" },
        if result.ci { "yes" } else { "no" }
    );
    write_json(
        &run.out_dir,
        "check.json",
        &Envelope {
            command: "check",
            seed: None,
            fingerprint: kernel.fingerprint(),
            result: &result,
        },
    )?;
    println!("{line}");
    Ok(ok)
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    if let Some(threads) = cli.threads.or(cfg.get("threads")?) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("--threads")?;
    }
    let run = RunConfig {
        out_dir: cli
            .out_dir
            .or(cfg.get("out-dir")?)
            .unwrap_or_else(|| PathBuf::from(".")),
        atom_cap: resolve(cli.atom_cap, &cfg, "atom-cap", DEFAULT_ATOM_CAP)?,
        seed: cfg.get("seed")?.unwrap_or(DEFAULT_SEED),
        budget: cfg.get("budget")?.unwrap_or(DEFAULT_BUDGET),
    };
    match cli.command {
        Command::Ratio {
            instance,
            p,
            engine,
            samples,
        } => run_ratio(&instance, p, engine, samples, &cfg, &run),
        Command::WeakType { instance } => run_weak_type(&instance, &cfg, &run),
        Command::Umd { instance, p } => run_umd(&instance, p, &cfg, &run),
        Command::Sweep {
            space,
            dims,
            n,
            p,
            mode,
            budget,
            seed,
            restarts,
        } => run_sweep(space, dims, n, p, mode, budget, seed, restarts, &cfg, &run),
        Command::Experiment {
            name,
            dims,
            n,
            p,
            ps,
            ks,
            weights,
            inner,
            space,
            seed,
            budget,
            restarts,
        } => run_experiment(
            &name, dims, n, p, ps, ks, weights, inner, space, seed, budget, restarts, &cfg, &run,
        ),
        Command::Certify { instance } => run_certify(&instance, &cfg, &run),
        Command::Check { instance } => run_check(&instance, &cfg, &run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
