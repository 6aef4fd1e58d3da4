mod config;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wvaml::learner::{compare_losses, fit_model, FitConfig, LossKind};
use wvaml::mdp::{generate, save_mdp};
use wvaml::planner::greedy_policy;
use wvaml::vaml::theorem_bound;
use wvaml::{gvi, BackupOperator, FiniteMdp, GviConfig};

use config::{config_error, ConfigError, ExperimentConfig, Overrides};
use suites::Suite;

#[derive(Parser)]
#[command(name = "wvaml", version, about = "Verification suites and experiments for value-aware model learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a property suite over a seeded random grid.
    Verify {
        suite: SuiteArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run a pipeline and write its artifacts.
    Run {
        what: RunArg,
        #[command(flatten)]
        common: Common,
    },
    /// Write a generated MDP as JSON.
    GenMdp {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Duality,
    Equivalence,
    Theorem,
    Operators,
    Lemmas,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunArg {
    Gvi,
    Learn,
    Compare,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Duality => Suite::Duality,
            SuiteArg::Equivalence => Suite::Equivalence,
            SuiteArg::Theorem => Suite::Theorem,
            SuiteArg::Operators => Suite::Operators,
            SuiteArg::Lemmas => Suite::Lemmas,
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let flags = Overrides { seed: common.seed, out: common.out.clone(), trials: common.trials, tol: common.tol };
    ExperimentConfig::load(common.config.as_deref(), &flags)
}

fn write_file(dir: &Path, name: &str, body: &str, command: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    // Timestamps live in a sidecar so report bodies stay byte-identical.
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({ "file": name, "command": command, "created_unix_seconds": created });
    std::fs::write(dir.join(format!("{name}.meta.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, command: &str) -> Result<PathBuf> {
    write_file(dir, name, &(serde_json::to_string_pretty(value)? + "\n"), command)
}

fn parse_operator(cfg: &ExperimentConfig) -> Result<BackupOperator> {
    let text = cfg.operator.as_deref().unwrap_or("max");
    text.parse().map_err(|e| config_error(format!("{e}")))
}

/// Bare `vaml` takes its radius from the theorem bound of `mdp`.
fn parse_kind(text: &str, mdp: &FiniteMdp) -> Result<LossKind> {
    if text.trim().eq_ignore_ascii_case("vaml") {
        let b = theorem_bound(mdp).context("`vaml` without a radius needs gamma*K_W < 1")?;
        return Ok(LossKind::Vaml(b.c.value()));
    }
    text.parse().map_err(|e| config_error(format!("{e}")))
}

fn fit_config(cfg: &ExperimentConfig) -> FitConfig {
    let f = &cfg.fit;
    FitConfig {
        iters: f.iters,
        step_size: f.step_size,
        seed: cfg.seed(),
        fd_epsilon: f.fd_epsilon,
        log_every: f.log_every,
        class: f.class,
        init_scale: f.init_scale,
    }
}

fn cmd_verify(suite: Suite, common: &Common) -> Result<bool> {
    let cfg = load_config(common)?;
    let report = suites::run(suite, &cfg)?;
    let path = write_json(&cfg.out_dir(), &format!("verify_{}.json", suite.name()), &report, &format!("verify {}", suite.name()))?;
    for f in &report.failures {
        eprintln!("FAIL cell {} (seed {}): violation {:e}: {}", f.cell, f.seed, f.violation, f.detail);
    }
    println!(
        "{}: {} trials={} excluded={} max_violation={:e} tol={:e} report={}",
        report.suite,
        if report.pass { "PASS" } else { "FAIL" },
        report.trials,
        report.excluded.len(),
        report.max_violation,
        report.tol,
        path.display()
    );
    Ok(report.pass)
}

fn cmd_run(what: RunArg, common: &Common) -> Result<bool> {
    let cfg = load_config(common)?;
    let mdp = cfg.mdp()?;
    let out = cfg.out_dir();
    match what {
        RunArg::Gvi => {
            let op = parse_operator(&cfg)?;
            let mut gcfg = GviConfig::default();
            if let Some(d) = cfg.delta {
                gcfg.delta = d;
            }
            if let Some(m) = cfg.max_iter {
                gcfg.max_iter = m;
            }
            let res = gvi(&mdp, op, &gcfg)?;
            let policy = greedy_policy(&res.q);
            for s in 0..mdp.states() {
                println!("s={s} v={:.10} greedy={} q={:?}", res.v[s], policy[s], res.q.row(s));
            }
            let path = write_json(&out, "gvi_result.json", &res, "run gvi")?;
            println!("gvi {op}: iterations={} final_diff={:e} result={}", res.iterations, res.final_diff, path.display());
        }
        RunArg::Learn => {
            let text = cfg.kind.clone().or_else(|| cfg.kinds.as_ref().and_then(|k| k.first().cloned())).unwrap_or_else(|| "kl".into());
            let kind = parse_kind(&text, &mdp)?;
            let report = fit_model(&mdp, kind, &fit_config(&cfg))?;
            let m = mdp.actions();
            for (k, l) in report.final_losses.iter().enumerate() {
                println!("s={} a={} {kind}={l:e}", k / m, k % m);
            }
            write_file(&out, "loss_curve.csv", &report.loss_curve_csv(), "run learn")?;
            let path = write_json(&out, "train_report.json", &report, "run learn")?;
            println!(
                "learn {kind}: final loss={:e} planning_gap={:e} report={}",
                report.loss_curve.last().copied().unwrap_or(f64::NAN),
                report.planning_gap,
                path.display()
            );
        }
        RunArg::Compare => {
            let texts = cfg.kinds.clone().unwrap_or_else(|| vec!["kl".into(), "wasserstein".into(), "vaml".into()]);
            let kinds = texts.iter().map(|t| parse_kind(t, &mdp)).collect::<Result<Vec<_>>>()?;
            let cmp = compare_losses(&mdp, &kinds, &fit_config(&cfg))?;
            for r in &cmp.rows {
                println!("trained_on={} planning_gap={:e} cross={:?}", r.trained_on, r.planning_gap, r.cross_losses);
            }
            write_file(&out, "comparison.csv", &cmp.to_csv(), "run compare")?;
            write_file(&out, "cross_matrix.csv", &cmp.cross_matrix_csv(), "run compare")?;
            let path = write_json(&out, "comparison.json", &cmp, "run compare")?;
            println!("compare: kinds={} theorem_c={:?} contraction={:e} report={}", kinds.len(), cmp.theorem_c, cmp.contraction, path.display());
        }
    }
    Ok(true)
}

fn cmd_gen_mdp(common: &Common) -> Result<bool> {
    let cfg = load_config(common)?;
    let g = generate(&cfg.generator()).map_err(|e| config_error(format!("bad generator: {e}")))?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path = out.join("mdp.json");
    save_mdp(&g.mdp, &path)?;
    println!(
        "gen-mdp: n={} m={} K(R)={:e} K_W={:e} gamma*K_W={:e} file={}",
        g.mdp.states(),
        g.mdp.actions(),
        g.reward.constant,
        g.kernel.constant,
        g.mdp.gamma() * g.kernel.constant,
        path.display()
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify { suite, common } => cmd_verify((*suite).into(), common),
        Command::Run { what, common } => cmd_run(*what, common),
        Command::GenMdp { common } => cmd_gen_mdp(common),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
