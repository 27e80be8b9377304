use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tirestab::analysis::{certify, CertifyOptions};
use tirestab::config::{Config, SweepAxis};
use tirestab::equilibrium::solve_equilibrium;
use tirestab::sweep::{run_sweep, to_csv};
use tirestab::Error;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "tirestab", version, about = "Lateral vehicle dynamics with distributed tire friction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and summary.json.
    Simulate(Common),
    /// Solve for the stationary point and print it as JSON.
    Equilibrium(Common),
    /// Run the numerical certificates; exit status 0 iff every check passes.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Random open-loop trajectories for the passivity check.
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Run one scenario per value of a single parameter; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides `sweep.axis` from the configuration.
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated values; overrides `sweep.values`.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; omitted keys take reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "TIRESTAB_OUT", default_value = "tirestab-out")]
    out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Delay,
    IcScale,
    ObserverGain,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Delay => SweepAxis::Delay,
            AxisArg::IcScale => SweepAxis::IcScale,
            AxisArg::ObserverGain => SweepAxis::ObserverGain,
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_path: Option<PathBuf>,
    /// Fully resolved configuration; rerunning it reproduces the outputs.
    config: String,
    seed: u64,
    out_dir: PathBuf,
    artifacts: Vec<String>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParameter { .. } => EXIT_CONFIG,
            Error::Io(_) => EXIT_FAILED,
            _ => EXIT_SOLVER,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_FAILED,
        msg: format!("{}: {e}", path.display()),
    }
}

fn load(common: &Common) -> Result<Config, Failure> {
    let mut cfg = match &common.config {
        Some(p) => Config::from_file(p).map_err(|e| match e {
            Error::Io(io) => Failure {
                code: EXIT_CONFIG,
                msg: format!("{}: {io}", p.display()),
            },
            other => other.into(),
        })?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.sim.seed = s;
    }
    Ok(cfg)
}

/// Collects artifacts and writes them, plus the manifest, in one place.
struct Outputs<'a> {
    common: &'a Common,
    command: &'static str,
    cfg: &'a Config,
    files: Vec<(String, String)>,
}

impl<'a> Outputs<'a> {
    fn new(common: &'a Common, command: &'static str, cfg: &'a Config) -> Self {
        Self {
            common,
            command,
            cfg,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn write(mut self) -> Result<(), Failure> {
        let dir = &self.common.out;
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let echo = self.cfg.to_toml_string();
        self.add("config.toml", echo.clone());
        let mut artifacts: Vec<String> = self.files.iter().map(|(n, _)| n.clone()).collect();
        artifacts.push("manifest.json".into());
        let manifest = RunManifest {
            command: self.command,
            config_path: self.common.config.clone(),
            config: echo,
            seed: self.cfg.sim.seed,
            out_dir: dir.clone(),
            artifacts,
        };
        self.add("manifest.json", to_json(&manifest));
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn simulate(common: &Common) -> Result<u8, Failure> {
    let cfg = load(common)?;
    let trace = cfg.assemble()?.scenario.run()?;
    let s = &trace.summary;
    eprintln!(
        "{:?}: {:?} after {:.3} s, max norm {:.4}",
        s.mode, s.outcome, s.t_final, s.max_norm
    );
    let mut out = Outputs::new(common, "simulate", &cfg);
    out.add("trace.csv", trace.to_csv());
    out.add("summary.json", to_json(s));
    out.write()?;
    Ok(if s.diverged { EXIT_DIVERGED } else { 0 })
}

fn equilibrium(common: &Common) -> Result<u8, Failure> {
    let cfg = load(common)?;
    let plant = cfg.plant()?;
    let eq = solve_equilibrium(&plant, cfg.controller.target())?;
    print!("{}", to_json(&eq));
    Ok(0)
}

fn verify(common: &Common, trials: usize) -> Result<u8, Failure> {
    let cfg = load(common)?;
    let opts = CertifyOptions {
        passivity_trials: trials,
        dt: cfg.sim.dt,
        seed: cfg.sim.seed,
        observer_p: cfg.observer.p,
        gain_form: cfg.observer.gain_form,
        target: cfg.controller.target(),
        ..CertifyOptions::default()
    };
    let report = certify(&cfg.vehicle()?, cfg.sim.n_intervals, &opts)?;
    print!("{}", report.to_text());
    let mut out = Outputs::new(common, "verify", &cfg);
    out.add("report.json", to_json(&report));
    out.write()?;
    Ok(if report.all_pass { 0 } else { EXIT_FAILED })
}

fn sweep(common: &Common, axis: Option<AxisArg>, values: Option<Vec<f64>>) -> Result<u8, Failure> {
    let mut cfg = load(common)?;
    if let Some(a) = axis {
        cfg.sweep.axis = Some(a.into());
    }
    if let Some(v) = values {
        cfg.sweep.values = v;
    }
    let Some(axis) = cfg.sweep.axis else {
        return Err(Error::Config("sweep.axis is not set".into()).into());
    };
    if cfg.sweep.values.is_empty() {
        return Err(Error::Config("sweep.values is empty".into()).into());
    }
    // Surface configuration errors before spending time on the runs.
    cfg.assemble()?;
    let rows = run_sweep(&cfg, axis, &cfg.sweep.values);
    for r in &rows {
        match (&r.outcome, &r.error) {
            (Some(o), _) => eprintln!("{axis:?} = {}: {o:?}", r.value),
            (None, Some(e)) => eprintln!("{axis:?} = {}: failed: {e}", r.value),
            _ => {}
        }
    }
    let mut out = Outputs::new(common, "sweep", &cfg);
    out.add("sweep.csv", to_csv(&rows));
    out.write()?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Equilibrium(c) => equilibrium(c),
        Command::Verify { common, trials } => verify(common, *trials),
        Command::Sweep { common, axis, values } => sweep(common, *axis, values.clone()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
