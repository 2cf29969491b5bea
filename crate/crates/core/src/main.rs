use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use psod_eval::losses::{min_loss_select, LossConfig};
use psod_eval::mask::{parse_manifest, write_manifest, ManifestEntry, ManifestFile, PredEntry};
use psod_eval::pluralistic::{self, best_f1_point, curve_csv, default_taus, MatchCache};
use psod_eval::preference::{alignment_accuracy, load_pairs, PreferenceMetric, TiePolicy};
use psod_eval::synth::{generate_benchmark, parse_schedule, BenchmarkConfig};
use psod_eval::{load_manifest, load_mask, Error, MetricConfig, MetricSet, Result};

/// Environment variable holding the default worker count.
const THREADS_ENV: &str = "PSOD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "psod", version, about = "Pluralistic salient object detection evaluation")]
struct Cli {
    /// Worker threads (default: $PSOD_THREADS, else available parallelism).
    /// Never changes numeric results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best-match AP/AR/F1 over a manifest
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Quality threshold; predictions scoring below it are dropped
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        /// Sweep tau over 0.0..0.9 and report the best-F1 point
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Report images where every prediction fell below tau
        #[arg(long)]
        verbose: bool,
    },
    /// Single-pair metrics between a prediction and a ground truth mask
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mask loss table and minimum-loss pair
    Losses {
        #[arg(long, num_args = 1.., required = true)]
        preds: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        gts: Vec<PathBuf>,
        /// Cross-entropy weight
        #[arg(long, default_value_t = 2.5)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Pairwise preference alignment accuracy
    Align {
        #[arg(long)]
        pairs: PathBuf,
        /// half | wrong
        #[arg(long, default_value = "half")]
        tie_policy: String,
        /// Metric for mask-path entries: mae, f_max, f_avg, e_mean, s_measure, match
        #[arg(long, default_value = "match")]
        metric: String,
    },
    /// Write a synthetic multi-ground-truth benchmark
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Objects per scene (2 or 3)
        #[arg(long, default_value_t = 2)]
        objects: usize,
        /// Comma-separated kind:severity list
        #[arg(long, default_value = "erode:20,holes:400")]
        degradations: String,
        /// Image side length in pixels
        #[arg(long, default_value_t = 512)]
        size: usize,
        /// Keep all ground truths of three-object scenes
        #[arg(long)]
        no_cap: bool,
    },
    /// Merge per-method manifests, keeping the best-scored mask per image
    Select {
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Eval {
            manifest,
            tau,
            sweep,
            out,
            format,
            verbose,
        } => cmd_eval(&manifest, tau, sweep, out.as_deref(), format, verbose),
        Command::Metrics { pred, gt, format } => cmd_metrics(&pred, &gt, format),
        Command::Losses {
            preds,
            gts,
            lambda,
            format,
        } => cmd_losses(&preds, &gts, lambda, format),
        Command::Align {
            pairs,
            tie_policy,
            metric,
        } => cmd_align(&pairs, &tie_policy, &metric),
        Command::Gen {
            out,
            n,
            seed,
            objects,
            degradations,
            size,
            no_cap,
        } => {
            let cfg = BenchmarkConfig {
                n_images: n,
                width: size,
                height: size,
                n_objects: objects,
                cap_gts: !no_cap,
                seed,
                schedule: parse_schedule(&degradations)?,
            };
            let path = generate_benchmark(&cfg, &MetricConfig::default(), &out)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Select { manifests, out } => cmd_select(&manifests, &out),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn cmd_eval(manifest: &Path, tau: f64, sweep: bool, out: Option<&Path>, format: Format, verbose: bool) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    let (_, records) = load_manifest(manifest)?;
    let cfg = MetricConfig::default();
    let cache = MatchCache::build(&records, &cfg)?;
    if sweep {
        let curve = default_taus()
            .into_iter()
            .map(|t| cache.evaluate(t).map(|r| r.point()))
            .collect::<Result<Vec<_>>>()?;
        let best = best_f1_point(&curve).expect("ten-point sweep");
        let text = match format {
            Format::Csv => curve_csv(&curve, Some(&best)),
            Format::Json => to_json(&json!({ "curve": curve, "best": best })),
        };
        return emit(out, &text);
    }
    let report = cache.evaluate(tau)?;
    if verbose {
        for s in report.per_image.iter().filter(|s| s.fallback) {
            eprintln!("{}: no prediction scored >= {tau}, kept top-1 (index {})", s.id, s.kept_pred_indices[0]);
        }
    }
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&report),
    };
    emit(out, &text)
}

fn cmd_metrics(pred: &Path, gt: &Path, format: Format) -> Result<()> {
    let pred = load_mask(pred)?;
    let gt = load_mask(gt)?;
    let set = MetricSet::compute(&pred, &gt, &MetricConfig::default())?;
    let text = match format {
        Format::Csv => set.to_csv(),
        Format::Json => to_json(&set),
    };
    emit(None, &text)
}

fn cmd_losses(preds: &[PathBuf], gts: &[PathBuf], lambda: f64, format: Format) -> Result<()> {
    let cfg = LossConfig {
        lambda_ce: lambda,
        ..LossConfig::default()
    };
    cfg.validate()?;
    let preds = preds.iter().map(load_mask).collect::<Result<Vec<_>>>()?;
    let gts = gts.iter().map(load_mask).collect::<Result<Vec<_>>>()?;
    let sel = min_loss_select(&preds, &gts, &cfg)?;
    let text = match format {
        Format::Json => to_json(&sel),
        Format::Csv => {
            let mut s = String::from("pred,gt,ce,dice,total\n");
            for (k, row) in sel.table.iter().enumerate() {
                for (j, l) in row.iter().enumerate() {
                    s.push_str(&format!("{k},{j},{:.4},{:.4},{:.4}\n", l.ce, l.dice, l.total));
                }
            }
            let l = sel.loss;
            s.push_str(&format!(
                "min,{},{},{:.4},{:.4},{:.4}\n",
                sel.pred_index, sel.gt_index, l.ce, l.dice, l.total
            ));
            s
        }
    };
    emit(None, &text)
}

fn cmd_align(pairs: &Path, tie_policy: &str, metric: &str) -> Result<()> {
    let policy: TiePolicy = tie_policy.parse()?;
    let metric: PreferenceMetric = metric.parse()?;
    let pairs = load_pairs(pairs, metric, &MetricConfig::default())?;
    let acc = alignment_accuracy(&pairs, policy)?;
    emit(None, &format!("{acc:.4}\n"))
}

fn read_manifest(path: &Path) -> Result<psod_eval::Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_manifest(&text, path.parent().unwrap_or_else(|| Path::new("")))
}

fn absolute(path: PathBuf) -> Result<String> {
    let abs = std::path::absolute(&path).map_err(|e| Error::Io { path, source: e })?;
    Ok(abs.to_string_lossy().into_owned())
}

fn cmd_select(manifests: &[PathBuf], out: &Path) -> Result<()> {
    let methods = manifests.iter().map(|p| read_manifest(p)).collect::<Result<Vec<_>>>()?;
    let lookup: Vec<HashMap<&str, &ManifestEntry>> = methods
        .iter()
        .map(|m| m.entries.iter().map(|e| (e.id.as_str(), e)).collect())
        .collect();
    let base = &methods[0];
    for (m, map) in manifests.iter().zip(&lookup).skip(1) {
        if map.len() != base.entries.len() || base.entries.iter().any(|e| !map.contains_key(e.id.as_str())) {
            return Err(Error::InvalidManifest(format!(
                "{} does not cover the same image ids as {}",
                m.display(),
                manifests[0].display()
            )));
        }
    }

    // candidates per image: every prediction of every method, in method order
    let mut candidates = Vec::with_capacity(base.entries.len());
    let mut scores = Vec::with_capacity(base.entries.len());
    for entry in &base.entries {
        let mut cands = Vec::new();
        for (method, map) in methods.iter().zip(&lookup) {
            for p in &map[entry.id.as_str()].preds {
                cands.push((method, p));
            }
        }
        scores.push(cands.iter().map(|(_, p)| p.score).collect::<Vec<_>>());
        candidates.push(cands);
    }
    let chosen = pluralistic::select_best_scores(&scores)?;

    let mut images = Vec::with_capacity(base.entries.len());
    for ((entry, cands), &k) in base.entries.iter().zip(&candidates).zip(&chosen) {
        let (method, pred) = cands[k];
        images.push(ManifestEntry {
            id: entry.id.clone(),
            gts: entry
                .gts
                .iter()
                .map(|g| absolute(base.resolve(g)))
                .collect::<Result<_>>()?,
            preds: vec![PredEntry {
                path: absolute(method.resolve(&pred.path))?,
                score: pred.score,
            }],
        });
    }
    write_manifest(&ManifestFile { root: None, images }, out)?;
    println!("{}", out.display());
    Ok(())
}
