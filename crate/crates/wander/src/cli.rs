//! `wander <command>`: exit 0 when every certificate passes or is waived,
//! 1 when one fails, 2 on a bad configuration and 3 when a computation fails.

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::suites::{self, ChainData, SuiteOutput};
use crate::with_threads;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "wander", version, about = "Certified construction of entire functions with a wandering domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (overrides the configuration).
    #[arg(long)]
    threads: Option<usize>,
    /// Excuse failures that only a large tau_1 rules out.
    #[arg(long)]
    relaxed: bool,
    /// Waive a certificate id or id prefix; repeatable.
    #[arg(long = "waive", value_name = "CERT_ID")]
    waive: Vec<String>,
}

#[derive(Debug, Args)]
struct AtlasArgs {
    /// Bundle directory written by `construct`.
    #[arg(long)]
    state: PathBuf,
    /// Window as x0,y0,x1,y1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    window: Vec<f64>,
    /// Pixels along the real axis.
    #[arg(long, default_value_t = 128)]
    res: usize,
    #[arg(long, default_value_t = 8)]
    nmax: usize,
    /// Output prefix for .png, .csv and .json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Riemann maps of nearly round domains and their distortion bounds.
    Riemann(Common),
    /// Punctured subharmonic weights.
    Weight(Common),
    /// Cauchy-transform dbar solver against the disk-indicator closed form.
    Dbar(Common),
    /// Parameter schedules and their growth conditions.
    Schedule(Common),
    /// The local approximation lemma with measured constants.
    Local(Common),
    /// Base and inductive stages; writes stage bundles.
    Construct(Common),
    /// Orbits, growth order and univalence on a built chain.
    Dynamics(Common),
    /// Per-pixel orbit classes over a window.
    OrbitAtlas(AtlasArgs),
}

pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("wander: {e}");
            e.exit_code()
        }
    }
}

fn load<P: DeserializeOwned + Default>(c: &Common) -> Result<RunConfig<P>> {
    let mut cfg = RunConfig::<P>::load(c.config.as_deref())?;
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if c.threads == Some(0) {
        return Err(AppError::Schema("threads must be at least 1".into()));
    }
    if c.relaxed {
        cfg.relaxed = Some(true);
    }
    cfg.waive.extend(c.waive.iter().cloned());
    Ok(cfg)
}

fn finish(mut out: SuiteOutput, waive: &[String], dir: &Path) -> Result<bool> {
    out.waive(waive);
    out.write(dir)?;
    for c in out.certificates.iter().filter(|c| !c.accepted()) {
        eprintln!("FAIL {}: measured {:e}, bound {:e}", c.id, c.measured, c.bound);
    }
    Ok(out.all_accepted())
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Riemann(c) => {
            let cfg = load(&c)?;
            let out = with_threads(cfg.threads, || suites::riemann(&cfg.params))??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::Weight(c) => {
            let cfg = load(&c)?;
            let out = with_threads(cfg.threads, || suites::weight(&cfg.params))??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::Dbar(c) => {
            let cfg = load(&c)?;
            let out = with_threads(cfg.threads, || suites::dbar(&cfg.params))??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::Schedule(c) => {
            let cfg = load(&c)?;
            let out = with_threads(cfg.threads, || suites::schedule(&cfg.params))??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::Local(c) => {
            let cfg = load(&c)?;
            let out = with_threads(cfg.threads, || suites::local(&cfg.params))??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::Construct(c) => {
            let cfg = load::<crate::config::ConstructParams>(&c)?;
            let (out, ok) = with_threads(cfg.threads, || -> Result<(SuiteOutput, bool)> {
                let (out, state, report) = suites::construct_suite(&cfg.params, cfg.relaxed, &cfg.waive)?;
                suites::write_bundle(&c.out, &cfg.params, &state, &report)?;
                let ok = report.all_accepted;
                Ok((out, ok))
            })??;
            Ok(finish(out, &[], &c.out)? && ok)
        }
        Command::Dynamics(c) => {
            let cfg = load::<crate::config::DynamicsParams>(&c)?;
            let out = with_threads(cfg.threads, || -> Result<SuiteOutput> {
                let data = match &cfg.params.state {
                    Some(dir) => ChainData::load(dir)?,
                    None => {
                        let (state, _) = suites::build_chain(&cfg.params.construct, cfg.relaxed, &cfg.waive)?;
                        ChainData::from_state(&state)?
                    }
                };
                suites::dynamics(&cfg.params, &data)
            })??;
            finish(out, &cfg.waive, &c.out)
        }
        Command::OrbitAtlas(a) => {
            if a.threads == Some(0) {
                return Err(AppError::Schema("threads must be at least 1".into()));
            }
            let window: [f64; 4] = a
                .window
                .as_slice()
                .try_into()
                .map_err(|_| AppError::Schema("window needs four numbers".into()))?;
            let data = ChainData::load(&a.state)?;
            with_threads(a.threads, || suites::orbit_atlas(&data.chain, window, a.res, a.nmax, &a.out))??;
            Ok(true)
        }
    }
}
