use std::path::Path;
use std::process::ExitCode;

use sbd_core::harness::{
    run_cuts, run_experiment, validate_text, workers_from_env, CutsConfig, Experiment, ValidatedConfig, WORKERS_ENV,
};

const USAGE: &str = "usage: sbd <run|cuts|validate> <config.json>";

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (command, path) = match args.as_slice() {
        [c, p] => (c.as_str(), Path::new(p)),
        _ => {
            eprintln!("{USAGE}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let workers = match workers_from_env() {
        Ok(w) => w,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot start {WORKERS_ENV} worker pool: {err}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    pool.install(|| match command {
        "run" => run(path),
        "cuts" => cuts(path),
        "validate" => validate(path),
        other => {
            eprintln!("unknown command `{other}`\n{USAGE}");
            ExitCode::from(EXIT_CONFIG)
        }
    })
}

fn run(path: &Path) -> ExitCode {
    let experiment = match Experiment::load(path) {
        Ok(e) => e,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&experiment) {
        Ok(report) => {
            for failure in &report.failures {
                eprintln!("run failed: {failure}");
            }
            println!("wrote {}", report.summary_path.display());
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_RUNTIME)
            }
        }
        Err(err) => {
            eprintln!("runtime error: {err}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn cuts(path: &Path) -> ExitCode {
    let cfg = match CutsConfig::load(path) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_cuts(&cfg) {
        Ok(_) => {
            println!("wrote {}", cfg.output.display());
            ExitCode::SUCCESS
        }
        Err(err @ sbd_core::SbdError::Config { .. }) => {
            eprintln!("config error: {err}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(err) => {
            eprintln!("runtime error: {err}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn validate(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(err) => {
            eprintln!("config error: {}: {err}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match validate_text(&text) {
        Ok(ValidatedConfig::Experiment(e)) => {
            let arms: usize = e.arms.iter().map(Vec::len).sum();
            println!(
                "ok: experiment with {} problem(s), {arms} arm(s), {} seed(s); sha256 {}",
                e.config.problems.len(),
                e.seeds.len(),
                e.digest
            );
            ExitCode::SUCCESS
        }
        Ok(ValidatedConfig::Cuts(c)) => {
            println!("ok: cuts over {} points; sha256 {}", c.points, c.digest());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("config error: {err}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
