//! `sumset`: classify parameters, run the certificate pipeline, build
//! brute-force covers and replay certificates.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use sumset_core::baselines::{brute_sumset, classify_region, grid_csv, region_grid, SumsetOp, DEFAULT_SUMSET_CAP};
use sumset_core::certificate::{replay, Certificate};
use sumset_core::io::{histogram_csv, intervals_csv, read_ifs};
use sumset_core::pipeline::{run_pipeline, RunConfig};
use sumset_core::rational::{format_rational, parse_rational, Rational};
use sumset_core::recurrent::Mode;
use sumset_core::search::DEFAULT_RATIO_CAP;
use sumset_core::HomogeneousIfs;

const EXIT_IO: u8 = 1;
const EXIT_PARSE: u8 = 2;

#[derive(Parser)]
#[command(name = "sumset", version, about = "Interval certificates for differences of perturbed homogeneous Cantor sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regime of C_a + C_b: cantor, gap-lemma or mysterious.
    Classify {
        #[arg(value_parser = rational)]
        a: Rational,
        #[arg(value_parser = rational)]
        b: Rational,
        /// Also write verdict.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a perturbation and certify an interval in K^ω - K'.
    Pipeline {
        /// K, then optionally K' (defaults to K).
        #[arg(long, num_args = 1..=2, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, default_value = "cross")]
        mode: Mode,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, value_parser = rational)]
        c0: Option<Rational>,
        #[arg(long, value_parser = rational)]
        c2: Option<Rational>,
        #[arg(long, default_value_t = 2)]
        refine: usize,
        /// Deepest pushforward histogram.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_RATIO_CAP)]
        ratio_cap: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth-n cover of K + K' or K - K'.
    Oracle {
        #[arg(long, num_args = 1..=2, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value = "difference")]
        op: SumsetOp,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verdicts and sum-cover gap counts over a grid of (a, b).
    RegionGrid {
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a certificate against the base configs; exit 0 iff it holds.
    Replay {
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, num_args = 1..=2, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RATIO_CAP)]
        ratio_cap: u32,
    },
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_IO, message: format!("io: {}: {e}", path.display()) }
}

fn parse_fail(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_PARSE, message: format!("parse: {e}") }
}

fn load_configs(paths: &[PathBuf]) -> Result<(HomogeneousIfs, HomogeneousIfs), Failure> {
    let k = read_ifs(&paths[0]).map_err(parse_fail)?;
    let kp = match paths.get(1) {
        Some(p) => read_ifs(p).map_err(parse_fail)?,
        None => k.clone(),
    };
    Ok((k, kp))
}

/// Writes files under `dir` and records them for the manifest.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_fail(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, extra: serde_json::Value) -> Result<(), Failure> {
        self.files.push("manifest.json".into());
        let manifest = json!({ "command": command, "files": self.files, "run": extra });
        let text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| io_fail(&path, e))
    }
}

fn classify(a: &Rational, b: &Rational, out: Option<&Path>) -> Result<u8, Failure> {
    let v = classify_region(a, b).map_err(parse_fail)?;
    let text = serde_json::to_string_pretty(&v).expect("plain data serializes");
    println!("{}", v.verdict);
    println!("{text}");
    if let Some(dir) = out {
        let mut o = Output::new(dir)?;
        o.write("verdict.json", &(text + "\n"))?;
        o.finish("classify", json!({ "a": format_rational(&v.a), "b": format_rational(&v.b) }))?;
    }
    Ok(0)
}

fn pipeline(cfg: RunConfig, paths: &[PathBuf], out: &Path) -> Result<u8, Failure> {
    let outcome = run_pipeline(&cfg);
    let mut o = Output::new(out)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut report = outcome.report.render(&format!("# sumset pipeline report, generated at unix time {stamp}"));
    for w in &outcome.warnings {
        report.push_str(&format!("warning: {w}\n"));
    }
    o.write("report.txt", &report)?;
    let stats = json!({
        "search": outcome.stats,
        "slices": outcome.slices,
        "derived_constants": outcome.derived,
        "warnings": outcome.warnings,
    });
    o.write("stats.json", &(serde_json::to_string_pretty(&stats).expect("plain data serializes") + "\n"))?;
    if let Some(h) = &outcome.histogram {
        o.write("histogram.csv", &histogram_csv(h))?;
    }
    if let Some(c) = &outcome.candidate {
        o.write("l.csv", &intervals_csv(&c.l))?;
    }
    if let Some(cert) = &outcome.certificate {
        o.write("certificate.json", &cert.to_json())?;
    }
    let code = outcome.exit_code();
    let failed_stage = outcome.failure.as_ref().map(|f| f.stage.name());
    o.finish(
        "pipeline",
        json!({
            "configs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "mode": cfg.mode.to_string(),
            "seed": cfg.seed,
            "trials": cfg.trials,
            "refine": cfg.refine,
            "c0": cfg.c0.as_ref().map(format_rational),
            "c2": cfg.c2.as_ref().map(format_rational),
            "exit_code": code,
            "failed_stage": failed_stage,
        }),
    )?;
    match &outcome.failure {
        Some(f) => eprintln!("{}: {}", f.stage.name(), f.message),
        None => println!("replay passed; J = {}", outcome.report.get("j").unwrap_or("?")),
    }
    Ok(code as u8)
}

fn oracle(paths: &[PathBuf], depth: usize, op: SumsetOp, out: &Path) -> Result<u8, Failure> {
    let (k, kp) = load_configs(paths)?;
    let cover = brute_sumset(&k, &kp, depth, op, DEFAULT_SUMSET_CAP).map_err(|e| Failure { code: 3, message: e.to_string() })?;
    let mut o = Output::new(out)?;
    o.write("intervals.csv", &intervals_csv(&cover))?;
    o.finish(
        "oracle",
        json!({
            "configs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "depth": depth,
            "op": format!("{op:?}").to_lowercase(),
            "components": cover.len(),
            "measure": format_rational(&cover.measure()),
        }),
    )?;
    println!("{} components, measure {}", cover.len(), format_rational(&cover.measure()));
    Ok(0)
}

fn grid(resolution: usize, depth: usize, out: &Path) -> Result<u8, Failure> {
    let rows = region_grid(resolution, depth).map_err(parse_fail)?;
    let mut o = Output::new(out)?;
    o.write("grid.csv", &grid_csv(&rows, depth))?;
    o.finish("region-grid", json!({ "resolution": resolution, "depth": depth, "cells": rows.len() }))?;
    println!("{} cells", rows.len());
    Ok(0)
}

fn replay_cmd(cert_path: &Path, paths: &[PathBuf], ratio_cap: u32) -> Result<u8, Failure> {
    let text = fs::read_to_string(cert_path).map_err(|e| parse_fail(format!("{}: {e}", cert_path.display())))?;
    let cert = Certificate::from_json(&text).map_err(parse_fail)?;
    let (k, kp) = load_configs(paths)?;
    let report = replay(&cert, &k, &kp, ratio_cap);
    for issue in &report.issues {
        match issue.index {
            Some(i) => eprintln!("interval {i}: {}", issue.detail),
            None => eprintln!("{}", issue.detail),
        }
    }
    if report.passed() {
        println!("replay passed: {} cover intervals checked", report.checked);
        Ok(0)
    } else {
        println!("replay failed: {} issues", report.issues.len());
        Ok(8)
    }
}

fn configure_workers() {
    if let Some(n) = std::env::var("SUMSET_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    configure_workers();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Classify { a, b, out } => classify(&a, &b, out.as_deref()),
        Command::Pipeline { config, mode, seed, trials, c0, c2, refine, depth, ratio_cap, out } => load_configs(&config)
            .and_then(|(k, kp)| {
                let mut cfg = RunConfig::new(k, kp, mode, seed);
                cfg.trials = trials;
                cfg.c0 = c0;
                cfg.c2 = c2;
                cfg.refine = refine;
                cfg.ratio_cap = ratio_cap;
                cfg.histogram_depths = (1..=depth.max(3)).collect();
                pipeline(cfg, &config, &out)
            }),
        Command::Oracle { config, depth, op, out } => oracle(&config, depth, op, &out),
        Command::RegionGrid { resolution, depth, out } => grid(resolution, depth, &out),
        Command::Replay { certificate, config, ratio_cap } => replay_cmd(&certificate, &config, ratio_cap),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
