use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coverassert_core::canonical;
use coverassert_core::config::RunConfig;
use coverassert_core::feedback::{CommandGenerator, GeneratorAdapter, LlmGenerator, ScriptedGenerator};
use coverassert_core::pipeline::{load_inputs, PipelineError};
use coverassert_core::report::{analyze, render_from_dir, run_feedback, write_artifacts, RunOutput};
use coverassert_core::rtl_ast::parse_rtl;
use coverassert_core::semantic::{ProviderMode, Semantics};
use coverassert_core::struct_features::extract;
use coverassert_core::sva::ingest_assertions;

#[derive(Parser)]
#[command(name = "coverassert", version, about = "Measure how well SVA assertions cover a design specification")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single analysis pass; exit 2 when a sub-spec is not above theta.
    Analyze(Common),
    /// Coverage-driven loop with a generator.
    Loop {
        #[command(flatten)]
        common: Common,
        /// Stub fixture (`.json`, point id -> assertion text) or an
        /// executable reading the payload on stdin. Omit with a live
        /// provider to generate with the chat model.
        #[arg(long)]
        generator: Option<PathBuf>,
    },
    /// Render report.md from a previous run's report.json.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the parsed syntax trees as JSON.
    DumpAst(Common),
    /// Write sd.json and q.json for the configured assertions.
    DumpFeatures(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Never contact a provider.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rtl: Option<PathBuf>,
    #[arg(long)]
    assertions: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if self.offline {
            cfg.provider.mode = ProviderMode::Offline;
        }
        if let Some(v) = self.theta {
            cfg.loop_.theta = v;
        }
        if let Some(v) = self.tau {
            cfg.fusion.tau = v;
        }
        if let Some(v) = self.alpha {
            cfg.mapping.alpha = v;
        }
        if let Some(v) = self.sigma {
            cfg.mapping.sigma = v;
        }
        if let Some(v) = self.max_iter {
            cfg.loop_.max_iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let p = &mut cfg.paths;
        for (flag, slot) in [
            (&self.out, &mut p.out_dir),
            (&self.rtl, &mut p.rtl_dir),
            (&self.assertions, &mut p.assertions_file),
            (&self.spec, &mut p.spec_file),
        ] {
            if let Some(v) = flag {
                *slot = v.clone();
            }
        }
        if let Some(c) = &self.cache {
            p.cache_dir = Some(c.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exclusive claim on an output directory, released on drop.
struct OutLock {
    path: PathBuf,
    _file: File,
}

impl OutLock {
    fn acquire(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
        let path = out_dir.join(".coverassert.lock");
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("{} is in use by another run (remove {} if stale)", out_dir.display(), path.display()))?;
        Ok(OutLock { path, _file: file })
    }
}

impl Drop for OutLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn semantics(cfg: &RunConfig) -> Result<Semantics> {
    Ok(Semantics::new(cfg.provider.clone(), cfg.seed, cfg.paths.cache_dir.as_deref())?)
}

fn finish(cfg: &RunConfig, run: &RunOutput) -> Result<u8> {
    write_artifacts(&cfg.paths.out_dir, run)?;
    let g = &run.report.global;
    println!(
        "N={} S={} min_degree={:.3} mean_degree={:.3} -> {}",
        g.n,
        g.s,
        g.min_degree,
        g.mean_degree,
        cfg.paths.out_dir.display()
    );
    for s in &run.report.subspecs {
        for p in &s.uncovered {
            println!("uncovered {} ({}): {}", p.id, s.id, p.text);
        }
    }
    Ok(run.report.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Cmd::Analyze(common) => {
            let cfg = common.config()?;
            let _lock = OutLock::acquire(&cfg.paths.out_dir)?;
            let sem = semantics(&cfg)?;
            let run = analyze(&cfg, &sem)?;
            finish(&cfg, &run)
        }
        Cmd::Loop { common, generator } => {
            let cfg = common.config()?;
            let sem = semantics(&cfg)?;
            let mut adapter: Box<dyn GeneratorAdapter + '_> = match &generator {
                Some(p) if p.extension().is_some_and(|e| e == "json") => Box::new(ScriptedGenerator::from_path(p)?),
                Some(p) => Box::new(CommandGenerator::new(p)?),
                None if sem.is_live() => Box::new(LlmGenerator::new(&sem)),
                None => bail!("offline loop needs --generator"),
            };
            let _lock = OutLock::acquire(&cfg.paths.out_dir)?;
            let run = run_feedback(&cfg, &sem, adapter.as_mut())?;
            if let Some(reason) = run.report.terminated_reason {
                println!("terminated: {}", reason.as_str());
            }
            finish(&cfg, &run)
        }
        Cmd::Report { out } => {
            print!("{}", render_from_dir(&out)?);
            Ok(0)
        }
        Cmd::DumpAst(common) => {
            let cfg = common.config()?;
            let files = coverassert_core::pipeline::read_rtl_dir(&cfg.paths.rtl_dir)?;
            let index = parse_rtl(&files).map_err(|source| PipelineError::Ast { path: cfg.paths.rtl_dir.clone(), source })?;
            print!("{}", canonical::to_string(&index.dump()));
            Ok(0)
        }
        Cmd::DumpFeatures(common) => {
            let cfg = common.config()?;
            let _lock = OutLock::acquire(&cfg.paths.out_dir)?;
            let sem = semantics(&cfg)?;
            let inputs = load_inputs(&cfg, &sem)?;
            let all = ingest_assertions(&inputs.seeds, &cfg.signal_filter())?;
            let valid: Vec<_> = all.into_iter().filter(|a| a.syntax_ok).collect();
            let ids: Vec<String> = valid.iter().map(|a| a.id.clone()).collect();
            let f = extract(&valid, &inputs.index);
            let out = &cfg.paths.out_dir;
            fs::write(out.join("sd.json"), canonical::to_string(&f.sd_json(&ids)))?;
            fs::write(out.join("q.json"), canonical::to_string(&f.q_json(&ids)))?;
            println!("wrote sd.json and q.json for {} assertions to {}", ids.len(), out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
