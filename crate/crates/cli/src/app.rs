//! Command-line surface, dispatch and exit codes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use fracheat_core::Error;
use serde_json::{json, Value};

use crate::config::{Config, Needs, ParseError, Violation};
use crate::report::{write_outputs, Report, Table};
use crate::stages::{self, Sink};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    KernelVerify,
    OsgoodCheck,
    SemigroupBound,
    Prop23Verify,
    BlowupScan,
    Simulate,
    FullPipeline,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().unwrap().get_name().to_string()
    }

    pub fn needs(self) -> Needs {
        let mut n = Needs::default();
        match self {
            Command::KernelVerify => n.kernel = true,
            Command::OsgoodCheck => n.osgood = true,
            Command::SemigroupBound | Command::Prop23Verify => {
                n.kernel = true;
                n.semigroup = true;
            }
            Command::BlowupScan | Command::FullPipeline => {
                n.kernel = true;
                n.osgood = true;
                n.semigroup = true;
                n.blowup = true;
            }
            Command::Simulate => {
                n.osgood = true;
                n.simulate = true;
            }
        }
        n
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fracheat",
    version,
    about = "Certify kernel bounds, Osgood families, semigroup lower bounds and blow-up trends"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment config; defaults to the canonical experiment.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Flags that override single config fields.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, help_heading = "Overrides")]
    pub n: Option<usize>,
    #[arg(long, help_heading = "Overrides")]
    pub q: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub alpha: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub k: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub phi0: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub i_max: Option<usize>,
    #[arg(long, help_heading = "Overrides")]
    pub seed: Option<u64>,
    #[arg(long, help_heading = "Overrides")]
    pub beta: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub gamma: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub radius: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub phi: Option<f64>,
    /// Comma-separated truncation levels.
    #[arg(long, value_delimiter = ',', help_heading = "Overrides")]
    pub n_list: Option<Vec<f64>>,
    #[arg(long, help_heading = "Overrides")]
    pub t0: Option<f64>,
    #[arg(long, help_heading = "Overrides")]
    pub steps: Option<usize>,
    #[arg(long, help_heading = "Overrides")]
    pub rungs: Option<usize>,
    #[arg(long, help_heading = "Overrides")]
    pub rho: Option<f64>,
    /// `osgood` or `power`.
    #[arg(long, help_heading = "Overrides")]
    pub reaction: Option<String>,
    /// Any field by dotted path, value as JSON, e.g. `--set blowup.min_points=4096`.
    #[arg(long = "set", value_name = "KEY=VALUE", help_heading = "Overrides")]
    pub set: Vec<String>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) -> Result<(), ParseError> {
        let typed: [(&str, Option<Value>); 17] = [
            ("model.n", self.n.map(|v| json!(v))),
            ("model.q", self.q.map(|v| json!(v))),
            ("model.alpha", self.alpha.map(|v| json!(v))),
            ("model.k", self.k.map(|v| json!(v))),
            ("osgood.phi0", self.phi0.map(|v| json!(v))),
            ("osgood.i_max", self.i_max.map(|v| json!(v))),
            ("osgood.seed", self.seed.map(|v| json!(v))),
            ("semigroup.beta", self.beta.map(|v| json!(v))),
            ("semigroup.gamma", self.gamma.map(|v| json!(v))),
            ("semigroup.radius", self.radius.map(|v| json!(v))),
            ("semigroup.phi", self.phi.map(|v| json!(v))),
            ("blowup.n_list", self.n_list.as_ref().map(|v| json!(v))),
            ("blowup.t0", self.t0.map(|v| json!(v))),
            ("blowup.steps", self.steps.map(|v| json!(v))),
            ("blowup.rungs", self.rungs.map(|v| json!(v))),
            ("blowup.rho", self.rho.map(|v| json!(v))),
            ("blowup.reaction", self.reaction.as_ref().map(|v| json!(v))),
        ];
        for (path, value) in typed {
            if let Some(v) = value {
                cfg.set(path, v)?;
            }
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        Ok(())
    }
}

/// Result of one invocation, before anything is written.
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Accuracy { .. } | Error::Overflow { .. } | Error::Resolution(_) => EXIT_NUMERIC,
        Error::Parameter(_) | Error::Range(_) => EXIT_CONFIG,
        Error::Admissibility(_)
        | Error::Infeasible(_)
        | Error::Unsupported(_)
        | Error::Certification { .. } => EXIT_CERTIFICATION,
    }
}

fn violation_code(v: &[Violation]) -> i32 {
    if v.iter().all(|x| x.admissibility) {
        EXIT_CERTIFICATION
    } else {
        EXIT_CONFIG
    }
}

fn dispatch(cmd: Command, cfg: &Config, sink: &mut Sink) -> fracheat_core::Result<()> {
    match cmd {
        Command::KernelVerify => {
            stages::kernel_stage(cfg, sink)?;
        }
        Command::OsgoodCheck => {
            stages::osgood_stage(cfg, sink)?;
        }
        Command::SemigroupBound => {
            let k = stages::kernel_constants(cfg, sink)?;
            stages::semigroup_stage(cfg, &k, sink)?;
        }
        Command::Prop23Verify => {
            let k = stages::kernel_constants(cfg, sink)?;
            let sg = stages::semigroup_constants(cfg, &k.kernel, sink)?;
            stages::prop_stage(cfg, &k, &sg, sink)?;
        }
        Command::BlowupScan => {
            let k = stages::kernel_constants(cfg, sink)?;
            let sg = stages::semigroup_constants(cfg, &k.kernel, sink)?;
            let m = &cfg.model;
            let fam = fracheat_core::build_family(m.alpha, m.k, cfg.osgood.phi0, cfg.osgood.i_max)?;
            stages::blowup_stage(cfg, &k, &fam, &sg, sink)?;
        }
        Command::Simulate => stages::simulate_stage(cfg, sink)?,
        Command::FullPipeline => {
            let k = stages::kernel_stage(cfg, sink)?;
            let fam = stages::osgood_stage(cfg, sink)?;
            let sg = stages::semigroup_stage(cfg, &k, sink)?;
            stages::prop_stage(cfg, &k, &sg, sink)?;
            stages::blowup_stage(cfg, &k, &fam, &sg, sink)?;
        }
    }
    Ok(())
}

/// Validate, then run `cmd` on a pool of `common.jobs` workers.
pub fn execute(cmd: Command, cfg: &Config) -> Outcome {
    let mut report = Report::new(&cmd.name(), cfg);
    let violations = cfg.validate(cmd.needs());
    if !violations.is_empty() {
        report.status = "invalid";
        report.exit_code = violation_code(&violations);
        report.violations = violations;
        return Outcome {
            report,
            tables: Vec::new(),
        };
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.common.jobs {
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            report.status = "error";
            report.exit_code = EXIT_CONFIG;
            report.error = Some(format!("worker pool: {e}"));
            return Outcome {
                report,
                tables: Vec::new(),
            };
        }
    };
    let mut sink = Sink::default();
    let result = pool.install(|| dispatch(cmd, cfg, &mut sink));
    report.checks = sink.checks;
    report.constants = Value::Object(sink.constants);
    report.stages = Value::Object(sink.stages);
    report.tables = sink.tables.iter().map(|t| t.file.clone()).collect();
    match result {
        Err(e) => {
            report.status = "error";
            report.exit_code = exit_code_for(&e);
            report.error = Some(e.to_string());
        }
        Ok(()) if report.failed_checks().next().is_some() => {
            report.status = "fail";
            report.exit_code = EXIT_CERTIFICATION;
        }
        Ok(()) => {}
    }
    Outcome {
        report,
        tables: sink.tables,
    }
}

/// Build the effective config from the file, flags and overrides.
pub fn resolve_config(cli: &Cli) -> Result<Config, ParseError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    if let Some(out) = &cli.out {
        cfg.common.out = out.to_string_lossy().into_owned();
    }
    if cli.jobs.is_some() {
        cfg.common.jobs = cli.jobs;
    }
    Ok(cfg)
}

/// Full invocation: returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = execute(cli.command, &cfg);
    let report = &outcome.report;
    for v in &report.violations {
        eprintln!("{v}");
    }
    for c in &report.checks {
        println!(
            "{} {}/{}: {}",
            match c.verdict {
                crate::report::Verdict::Pass => "PASS",
                crate::report::Verdict::Fail => "FAIL",
                crate::report::Verdict::Skip => "SKIP",
            },
            c.stage,
            c.name,
            c.detail
        );
    }
    for c in report.failed_checks() {
        eprintln!("certification failed: {}/{}", c.stage, c.name);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    let dir = Path::new(&cfg.common.out);
    if let Err(e) = write_outputs(dir, report, &outcome.tables) {
        eprintln!("error: cannot write outputs to {}: {e}", dir.display());
        return EXIT_CONFIG.max(report.exit_code);
    }
    println!(
        "{}: {} (exit {}), report in {}",
        report.command,
        report.status,
        report.exit_code,
        dir.join("report.json").display()
    );
    report.exit_code
}
