// Copyright (c) The psc Contributors
// SPDX-License-Identifier: Apache-2.0

//! `psc-sim`: run, audit and replay private-contract experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use psc_core::harness::{run_experiment, Adversary, Finalizer, GroupChoice, RunConfig};
use psc_core::transcript::{self, ProofKind, Transcript};

#[derive(Parser)]
#[command(name = "psc-sim", version, about = "Private smart contract simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment. Exits 0 iff the run's invariants hold.
    Run(RunArgs),
    /// Re-verify every proof in a transcript without secrets.
    Verify { path: PathBuf },
    /// Replay a transcript through a fresh blockchain and compare state hashes.
    Replay { path: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// auction, identity or bad.
    #[arg(long)]
    contract: Option<String>,
    /// Comma-separated party values, e.g. 0,5,3.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<u64>>,
    /// Comma-separated per-party aux strings.
    #[arg(long, value_delimiter = ',')]
    aux: Option<Vec<String>>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, corrupt-bit-proof, swap-candidate, bad-contract, duplicate-freeze, early-finalize.
    #[arg(long)]
    adversary: Option<String>,
    /// production or toy-insecure.
    #[arg(long)]
    group: Option<String>,
    /// Party number (1-based) or "all".
    #[arg(long)]
    finalizer: Option<String>,
    /// Write the JSONL transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build_config(args: RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => {
            let (Some(contract), Some(values)) = (&args.contract, &args.values) else {
                bail!("either --config or both --contract and --values are required");
            };
            RunConfig::new(contract.clone(), values.clone())
        }
    };
    if let Some(c) = args.contract {
        cfg.contract = c;
    }
    if let Some(v) = args.values {
        cfg.values = v;
    }
    if let Some(a) = args.aux {
        cfg.aux = a;
    }
    if let Some(l) = args.ell {
        cfg.ell = l;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.adversary {
        cfg.adversary = a.parse::<Adversary>()?;
    }
    if let Some(g) = args.group {
        cfg.group = g.parse::<GroupChoice>()?;
    }
    if let Some(f) = args.finalizer {
        cfg.finalizer = f.parse::<Finalizer>()?;
    }
    if let Some(t) = args.transcript {
        cfg.transcript = Some(t);
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<bool> {
    let cfg = build_config(args)?;
    let report = run_experiment(&cfg)?;
    print!("{}", report.summary());
    if let Some(path) = &cfg.transcript {
        println!("transcript {}", path.display());
    }
    Ok(report.invariants_hold())
}

fn verify(path: &Path) -> Result<bool> {
    let t = Transcript::load(path)?;
    let report = transcript::verify(&t)?;
    let (mut bits, mut balances) = (0, 0);
    for c in &report.checks {
        match c.kind {
            ProofKind::Bit { .. } => bits += 1,
            ProofKind::Balance => balances += 1,
            ProofKind::Message => {}
        }
        if !c.ok {
            let what = match &c.kind {
                ProofKind::Bit { party, bit, slot } => {
                    format!("bit proof party {} bit {bit} slot {slot}", party + 1)
                }
                ProofKind::Balance => "balance proof".into(),
                ProofKind::Message => "message".into(),
            };
            println!(
                "FAIL line {} seq {} from {}: {what}: {}",
                c.line,
                c.seq,
                c.sender,
                c.detail.as_deref().unwrap_or("")
            );
        }
    }
    let failed = report.failures().count();
    println!("checked {bits} bit proofs, {balances} balance proofs; {failed} failed");
    Ok(report.all_pass())
}

fn replay(path: &Path) -> Result<bool> {
    let t = Transcript::load(path)?;
    let report = transcript::replay(&t)?;
    println!("messages   {}", report.messages);
    println!("replayed   {}", report.final_state_hash);
    println!(
        "recorded   {}",
        report.recorded_state_hash.as_deref().unwrap_or("-")
    );
    for seq in &report.mismatches {
        println!("mismatch at seq {seq}");
    }
    println!(
        "{}",
        if report.matches() {
            "match"
        } else {
            "MISMATCH"
        }
    );
    Ok(report.matches())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Verify { path } => verify(&path),
        Command::Replay { path } => replay(&path),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
