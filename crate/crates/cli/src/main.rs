//! Command-line entry point: verification suites, pretraining, training,
//! ablations, and export.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or configuration error.

use cermic::checkpoint;
use cermic::config::LabConfig;
use cermic::csvio::{fmt, read_csv, CsvTable};
use cermic::harness::{
    self, ablation_csv, intrinsic_decay_probe, make_pretrain_corpus, run_training, RunSpec,
};
use cermic::memory::{pretrain_memory, MemoryModule};
use cermic::rng;
use cermic::stats;
use cermic::verify::run_suites;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const USAGE: &str = "usage: cermic <command> [flags]

commands:
  verify    run verification suites       --suite NAME (theorem1|appendix_b|appendix_c|gradients|all)
  pretrain  pretrain the intention memory --config PATH --out DIR
  train     run one training run          --config PATH --out DIR [--pretrained PATH] [--trace]
  ablate    run the ablation grid         --config PATH --out DIR [--jobs N]
  export    consolidate a run directory   --run DIR --out DIR

common flags:
  --config PATH   JSON configuration document
  --out DIR       output directory
  --seed N        root seed override
  --jobs N        worker threads (or CERMIC_LAB_JOBS)";

struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    run_dir: Option<PathBuf>,
    seed: Option<u64>,
    suite: String,
    jobs: usize,
    pretrained: Option<PathBuf>,
    trace: bool,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let command = argv.next().ok_or_else(|| "missing command".to_string())?;
    let mut args = Args {
        command,
        config: None,
        out: None,
        run_dir: None,
        seed: None,
        suite: "all".into(),
        jobs: std::env::var("CERMIC_LAB_JOBS").ok().and_then(|v| v.parse().ok()).unwrap_or(1),
        pretrained: None,
        trace: false,
    };
    while let Some(flag) = argv.next() {
        let mut take = |name: &str| -> Result<String, String> {
            argv.next().ok_or_else(|| format!("{name} needs a value"))
        };
        match flag.as_str() {
            "--config" => args.config = Some(PathBuf::from(take("--config")?)),
            "--out" => args.out = Some(PathBuf::from(take("--out")?)),
            "--run" => args.run_dir = Some(PathBuf::from(take("--run")?)),
            "--seed" => {
                args.seed = Some(take("--seed")?.parse().map_err(|e| format!("--seed: {e}"))?)
            }
            "--suite" => args.suite = take("--suite")?,
            "--jobs" => {
                args.jobs = take("--jobs")?.parse().map_err(|e| format!("--jobs: {e}"))?
            }
            "--pretrained" => args.pretrained = Some(PathBuf::from(take("--pretrained")?)),
            "--trace" => args.trace = true,
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    let result = match args.command.as_str() {
        "verify" => cmd_verify(&args),
        "pretrain" => cmd_pretrain(&args),
        "train" => cmd_train(&args),
        "ablate" => cmd_ablate(&args),
        "export" => cmd_export(&args),
        other => {
            eprintln!("error: unknown command {other}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("check failure: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl From<cermic::Error> for CliError {
    fn from(e: cermic::Error) -> Self {
        match e {
            cermic::Error::Config(_) | cermic::Error::InvalidParameter { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

type CliResult = Result<ExitCode, CliError>;

fn load_config(args: &Args) -> Result<LabConfig, CliError> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = LabConfig::from_path(path).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(args: &Args) -> Result<&Path, CliError> {
    args.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
}

fn cmd_verify(args: &Args) -> CliResult {
    let seed = args.seed.unwrap_or(17);
    let outcomes = run_suites(&args.suite, seed).map_err(|e| match e {
        cermic::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
        other => CliError::Failure(other.to_string()),
    })?;
    let mut all_ok = true;
    for o in &outcomes {
        println!(
            "suite {:<12} {}  ({})",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.details
        );
        all_ok &= o.passed;
        if let (Some(csv), Some(dir)) = (&o.csv, args.out.as_deref()) {
            let path = dir.join(format!("{}.csv", o.name));
            csv.write(&path).map_err(|e| CliError::Failure(e.to_string()))?;
        }
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_pretrain(args: &Args) -> CliResult {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(e.to_string()))?;
    let corpus = make_pretrain_corpus(&cfg, cfg.seed, cfg.pretrain.corpus_size)?;
    let mut module = {
        let mut r = rng::stream(cfg.seed, "pretrain-init", 0);
        MemoryModule::new(
            cfg.gridworld.obs_len(),
            cfg.gridworld.n_agents,
            cfg.memory.d_node,
            2 + cermic::gridworld::N_ACTIONS,
            cfg.model.hidden,
            cfg.memory.tau_det,
            &mut r,
        )
    };
    if cfg.pretrain.epochs == 0 {
        eprintln!("warning: zero-epoch budget, writing an untrained checkpoint");
    }
    let mut r = rng::stream(cfg.seed, "pretrain-train", 0);
    let report = pretrain_memory(
        &mut module,
        &corpus,
        cfg.pretrain.epochs,
        cfg.pretrain.lr,
        cfg.pretrain.holdout_frac,
        &mut r,
    )?;
    let ckpt = dir.join("pretrained_memory.ckpt");
    checkpoint::save_groups(&ckpt, &module.checkpoint_groups())
        .map_err(|e| CliError::Failure(e.to_string()))?;
    println!(
        "pretrained on {} examples ({} epochs): detector_bce={} node_mse={} edge_mse={}",
        corpus.len(),
        report.epochs,
        fmt(report.detector_bce),
        fmt(report.node_mse),
        fmt(report.edge_mse)
    );
    println!("checkpoint: {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: &Args) -> CliResult {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(e.to_string()))?;
    let mut spec = RunSpec::new(cfg.clone(), cfg.seed);
    spec.collect_trace = args.trace;
    if let Some(path) = &args.pretrained {
        let groups = checkpoint::load_groups(path).map_err(|e| CliError::Usage(e.to_string()))?;
        spec.pretrained_memory = Some(groups);
    }
    let log = run_training(&spec)?;
    let metrics_path = dir.join(format!("metrics_seed{:04}.csv", cfg.seed));
    log.csv().write(&metrics_path).map_err(|e| CliError::Failure(e.to_string()))?;
    if args.trace {
        harness::trace_csv(&log.trace)
            .write(&dir.join(format!("trace_seed{:04}.csv", cfg.seed)))
            .map_err(|e| CliError::Failure(e.to_string()))?;
    }
    let decay = intrinsic_decay_probe(&log);
    println!(
        "run complete: variant={} episodes={} first_success={} final_return={}",
        log.variant.name(),
        cfg.training.episodes,
        log.first_success.map_or(-1, |e| e as i64),
        fmt(log.final_return())
    );
    if let Some(monotone) = decay.monotone {
        println!(
            "probe decay: monotone={} violations={} probes={}",
            monotone, decay.violations, decay.probe_count
        );
    }
    println!("metrics: {}", metrics_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(args: &Args) -> CliResult {
    let cfg = load_config(args)?;
    let dir = out_dir(args)?;
    let rows = harness::ablation_suite(&cfg, &cfg.training.seeds, args.jobs)?;
    let table = ablation_csv(&rows);
    table.write(&dir.join("ablation.csv")).map_err(|e| CliError::Failure(e.to_string()))?;
    for r in &rows {
        println!(
            "{:<18} final_return {} ± {}  first_success {}",
            r.name,
            fmt(r.mean_final_return),
            fmt(r.std_final_return),
            fmt(r.mean_first_success)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(args: &Args) -> CliResult {
    let run_dir = args
        .run_dir
        .as_deref()
        .ok_or_else(|| CliError::Usage("--run is required".into()))?;
    let dir = out_dir(args)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(e.to_string()))?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(run_dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", run_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("metrics_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no metrics_*.csv files in {}",
            run_dir.display()
        )));
    }
    let mut merged = CsvTable::new(harness::METRICS_HEADER);
    let mut first_successes = Vec::new();
    let mut final_returns = Vec::new();
    for path in &files {
        let (header, rows) = read_csv(path).map_err(|e| CliError::Failure(e.to_string()))?;
        if header != harness::METRICS_HEADER {
            return Err(CliError::Usage(format!(
                "{}: unexpected header {header}",
                path.display()
            )));
        }
        let n = rows.len();
        let tail = (n / 5).max(1);
        let mut tail_sum = 0.0;
        for (i, row) in rows.iter().enumerate() {
            merged.push(row.join(","));
            if i + tail >= n {
                tail_sum += row[2].parse::<f64>().unwrap_or(0.0);
            }
            if i + 1 == n {
                let fs = row[3].parse::<f64>().unwrap_or(-1.0);
                first_successes.push(if fs < 0.0 { n as f64 } else { fs });
            }
        }
        final_returns.push(tail_sum / tail as f64);
    }
    merged.write(&dir.join("consolidated.csv")).map_err(|e| CliError::Failure(e.to_string()))?;
    let mut summary = CsvTable::new("metric,median,q1,q3,mean");
    let (fs_q1, fs_q3) = stats::iqr_bounds(&first_successes);
    summary.push(format!(
        "first_success,{},{},{},{}",
        fmt(stats::median(&first_successes)),
        fmt(fs_q1),
        fmt(fs_q3),
        fmt(stats::mean(&first_successes))
    ));
    let (fr_q1, fr_q3) = stats::iqr_bounds(&final_returns);
    summary.push(format!(
        "final_return,{},{},{},{}",
        fmt(stats::median(&final_returns)),
        fmt(fr_q1),
        fmt(fr_q3),
        fmt(stats::mean(&final_returns))
    ));
    summary.write(&dir.join("summary.csv")).map_err(|e| CliError::Failure(e.to_string()))?;
    println!("exported {} runs to {}", files.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}
