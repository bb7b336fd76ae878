use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use necpd::diagnostics::{compare_traces, rank_scan, select_rank, ConvergenceTrace};
use necpd::pipeline::{
    evaluate_bootstrap, read_manifest, run_stream, synth_cp, synth_shm, write_events, EventRecord, PipelineConfig,
    ShmParams, StreamOutput,
};
use necpd::solvers::{als_best_of, fit_method, Method, SliceOrder};
use necpd::tensor::{read_tensor, write_matrix_csv, write_tensor};
use necpd::{DenseTensor, Parallelism};

const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "necpd", version, about = "Online CP decomposition and damage detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set gamma=0.5`
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short = 'i', global = true)]
    input: Option<PathBuf>,
    /// Output directory
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Use differences of adjacent sensor pairs as feature channels
    #[arg(long, global = true)]
    diff_adjacent: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random CP tensor with uniform factors
    SynthCp,
    /// Simulated acceleration events with injected damage
    SynthShm,
    /// Decompose a tensor file
    Decompose {
        /// als, sgd, psgd or necpd
        #[arg(long)]
        method: Option<String>,
    },
    /// Train on the leading events of a manifest and stream the rest
    Stream,
    /// Core consistency for ranks 1..=rmax
    RankScan {
        #[arg(long)]
        rmax: Option<usize>,
    },
    /// Per-event decision values of a stream run
    Detect,
    /// Per-event location scores of a stream run
    Localize {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Bootstrap detection scores
    Evaluate {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Align convergence traces and summarize them
    Compare {
        /// `label=path` of a trace CSV; repeat per trace
        #[arg(long = "trace", value_name = "LABEL=PATH", required = true)]
        traces: Vec<String>,
        #[arg(long)]
        target: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let diverged = e
                .chain()
                .any(|c| c.downcast_ref::<necpd::Error>().is_some_and(necpd::Error::is_divergence));
            ExitCode::from(if diverged { EXIT_DIVERGED } else { EXIT_INVALID })
        }
    }
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::parse(&text)?
        }
        None => PipelineConfig::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = &c.input {
        cfg.input = Some(p.clone());
    }
    if let Some(p) = &c.output {
        cfg.output = Some(p.clone());
    }
    if c.diff_adjacent {
        cfg.diff_adjacent = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn input(cfg: &PipelineConfig) -> Result<&Path> {
    cfg.input.as_deref().ok_or_else(|| anyhow!("no input given (use --input)"))
}

fn output_dir(cfg: &PipelineConfig) -> Result<&Path> {
    let dir = cfg.output.as_deref().ok_or_else(|| anyhow!("no output directory given (use --output)"))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_tensor(cfg: &PipelineConfig) -> Result<DenseTensor> {
    let p = input(cfg)?;
    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
    Ok(read_tensor(BufReader::new(f))?)
}

fn write_factors(dir: &Path, prefix: &str, factors: &[necpd::Matrix]) -> Result<()> {
    for (n, f) in factors.iter().enumerate() {
        write_matrix_csv(create(&dir.join(format!("{prefix}{n}.csv")))?, f)?;
    }
    Ok(())
}

fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<()> {
    trace.write_csv(create(path)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    let par = Parallelism::default();
    match cli.cmd {
        Cmd::SynthCp => {
            let dir = output_dir(&cfg)?;
            let (x, truth) = synth_cp(&cfg.dims, cfg.true_rank, cfg.noise_std, cfg.seed)?;
            write_tensor(create(&dir.join("tensor.nten"))?, &x)?;
            write_factors(dir, "truth_factor_", truth.factors())?;
        }
        Cmd::SynthShm => {
            let dir = output_dir(&cfg)?;
            write_events(dir, &synth_shm(&ShmParams::from_config(&cfg))?)?;
        }
        Cmd::Decompose { method } => {
            if let Some(m) = method {
                cfg.set("method", &m)?;
            }
            let x = load_tensor(&cfg)?;
            let dir = output_dir(&cfg)?;
            let solver = cfg.solver(cfg.resolve_rank(&x, par)?);
            let (model, trace) = if cfg.method == "als" {
                let mut als = solver.clone();
                als.max_epochs = cfg.als_iters;
                als_best_of(&x, &als, cfg.restarts.max(1), par)?
            } else {
                let m: Method = cfg.method.parse()?;
                let (state, trace) = fit_method(&x, &solver, m, SliceOrder::Shuffled)?;
                (state.into_model(), trace)
            };
            write_factors(dir, "factor_", model.factors())?;
            write_trace(&dir.join("trace.csv"), &trace)?;
        }
        Cmd::RankScan { rmax } => {
            if let Some(r) = rmax {
                cfg.rmax = r;
            }
            let x = load_tensor(&cfg)?;
            let dir = output_dir(&cfg)?;
            let rows = rank_scan(&x, cfg.rmax, &cfg.als_solver(1), cfg.restarts.max(1), par)?;
            let mut w = create(&dir.join("rank_scan.csv"))?;
            writeln!(w, "rank,corcondia,fit,ill_conditioned")?;
            for r in &rows {
                writeln!(w, "{},{},{},{}", r.rank, r.corcondia, r.fit, r.ill_conditioned)?;
            }
            w.flush()?;
            println!("selected rank {}", select_rank(&rows));
        }
        Cmd::Stream => {
            let (events, out, streamed) = stream(&cfg)?;
            let dir = output_dir(&cfg)?;
            write_trace(&dir.join("trace.csv"), &out.trace)?;
            write_decisions(&dir.join("decisions.csv"), &events, &streamed, &out)?;
            write_localization(&dir.join("localization.csv"), &events, &streamed, &out)?;
            write_factors(dir, "factor_", out.model.factors())?;
        }
        Cmd::Detect => {
            let (events, out, streamed) = stream(&cfg)?;
            let dir = output_dir(&cfg)?;
            write_decisions(&dir.join("decisions.csv"), &events, &streamed, &out)?;
        }
        Cmd::Localize { k } => {
            if let Some(k) = k {
                cfg.k = k;
            }
            let (events, out, streamed) = stream(&cfg)?;
            let dir = output_dir(&cfg)?;
            write_localization(&dir.join("localization.csv"), &events, &streamed, &out)?;
        }
        Cmd::Evaluate { trials } => {
            if let Some(t) = trials {
                cfg.trials = t;
                cfg.validate()?;
            }
            let events = read_manifest(input(&cfg)?)?;
            let dir = output_dir(&cfg)?;
            let res = evaluate_bootstrap(&cfg, &events, par)?;
            res.report.write_trials_csv(create(&dir.join("trials.csv"))?)?;
            let mut summary = res.report.summary_text();
            for (label, v) in res.mean_decision_by_label(&events) {
                summary.push_str(&format!("mean_decision_value[{label}] = {v}\n"));
            }
            fs::write(dir.join("summary.txt"), &summary)?;
            print!("{summary}");
        }
        Cmd::Compare { traces, target } => {
            let target = target.unwrap_or(cfg.target_rmse);
            let mut loaded = Vec::new();
            for t in &traces {
                let (label, path) = t
                    .split_once('=')
                    .ok_or_else(|| anyhow!("--trace expects LABEL=PATH, got {t:?}"))?;
                let f = File::open(path).with_context(|| format!("opening {path}"))?;
                loaded.push((label.to_string(), ConvergenceTrace::read_csv(BufReader::new(f))?));
            }
            let dir = output_dir(&cfg)?;
            let report = compare_traces(&loaded, target)?;
            report.write_csv(create(&dir.join("compare.csv"))?)?;
            fs::write(dir.join("summary.txt"), report.summary_text())?;
            print!("{}", report.summary_text());
        }
    }
    Ok(())
}

/// Split a manifest into a training window and the streamed remainder, then
/// run the stream. Returns the events, the run and the streamed indexes.
fn stream(cfg: &PipelineConfig) -> Result<(Vec<EventRecord>, StreamOutput, Vec<usize>)> {
    let events = read_manifest(input(cfg)?)?;
    let train: Vec<usize> = match cfg.train_window {
        Some(n) => {
            if n < 2 || n >= events.len() {
                bail!("train_window must be in 2..{}, got {n}", events.len());
            }
            (0..n).collect()
        }
        None => {
            let healthy: Vec<usize> = (0..events.len()).filter(|&i| !events[i].label.is_damage()).collect();
            let n = (cfg.bootstrap_fraction * healthy.len() as f64).round() as usize;
            healthy[..n.min(healthy.len())].to_vec()
        }
    };
    let streamed: Vec<usize> = (0..events.len()).filter(|i| !train.contains(i)).collect();
    let pick = |idx: &[usize]| idx.iter().map(|&i| events[i].clone()).collect::<Vec<_>>();
    let out = run_stream(cfg, &pick(&train), &pick(&streamed))?;
    Ok((events, out, streamed))
}

fn write_decisions(path: &Path, events: &[EventRecord], streamed: &[usize], out: &StreamOutput) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "event,decision_value,label")?;
    for (&i, v) in streamed.iter().zip(&out.decision_values) {
        writeln!(w, "{},{},{}", events[i].id, v, events[i].label)?;
    }
    w.flush()?;
    Ok(())
}

fn write_localization(path: &Path, events: &[EventRecord], streamed: &[usize], out: &StreamOutput) -> Result<()> {
    let mut w = create(path)?;
    let l = out.localization.ncols();
    let header: Vec<String> = (0..l).map(|j| format!("loc{j}")).collect();
    writeln!(w, "event,{}", header.join(","))?;
    for (row, &i) in streamed.iter().enumerate() {
        let vals: Vec<String> = out.localization.row(row).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", events[i].id, vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}
