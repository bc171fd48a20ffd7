use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use preempt::harness::{
    capacity_json, compare, measure_capacity, run_scenario_with, run_validation, write_comparison,
    write_run, HarnessError, RunOptions, ScenarioConfig, CONFIG_KEYS,
};
use preempt::traffic::Strategy;

const DEFAULT_GRID: &str = "600,900,1200,1500,1800,2100,2400,2700,3000,3300,3600,3900,4200";

fn scenario_args(cmd: Command) -> Command {
    let cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value scenario file"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .default_value("preempt-out")
                .help("output directory"),
        );
    CONFIG_KEYS.iter().fold(cmd, |cmd, key| {
        let flag = key.replace('_', "-");
        cmd.arg(
            Arg::new(*key)
                .long(flag)
                .value_name("VALUE")
                .action(ArgAction::Set),
        )
    })
}

fn cli() -> Command {
    Command::new("preempt")
        .about("On-ramp merge experiments: baseline car-following vs preemptive coordination")
        .subcommand_required(true)
        .subcommand(scenario_args(Command::new("run").about("Run one scenario")))
        .subcommand(scenario_args(
            Command::new("compare").about("Run baseline and preemptive on the same demand"),
        ))
        .subcommand(scenario_args(
            Command::new("capacity")
                .about("Sweep combined demand and report capacity")
                .arg(
                    Arg::new("grid")
                        .long("grid")
                        .value_name("VEH_PER_H,...")
                        .default_value(DEFAULT_GRID),
                ),
        ))
        .subcommand(scenario_args(
            Command::new("validate").about("Run invariant suites on small instances"),
        ))
}

/// Defaults, then the config file, then individual flags.
fn load_config(m: &ArgMatches) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {path}: {e}")))?;
        cfg.apply_text(&text)?;
    }
    for key in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad grid value `{x}`")))
        })
        .collect()
}

fn recorded() -> RunOptions {
    RunOptions {
        record_trajectories: true,
        ..RunOptions::default()
    }
}

fn execute(name: &str, m: &ArgMatches) -> Result<ExitCode, HarnessError> {
    let cfg = load_config(m)?;
    let out = PathBuf::from(m.get_one::<String>("out").expect("has default"));
    match name {
        "run" => {
            let run = run_scenario_with(&cfg, &recorded())?;
            write_run(&out, &run)?;
            let r = run.metrics;
            println!(
                "{}: mean delay {:.3} s, throughput {:.1} veh/h, {} collisions, {} protocol failures",
                cfg.strategy, r.mean_delay, r.throughput, r.collisions, r.protocol_failures
            );
        }
        "compare" => {
            let (result, b, p) = compare(&cfg, &recorded())?;
            write_comparison(&out, &result, &b, &p)?;
            println!(
                "mean delay {:.3} s -> {:.3} s, collisions {} -> {}",
                result.baseline.mean_delay,
                result.preemptive.mean_delay,
                result.baseline.collisions,
                result.preemptive.collisions
            );
            match result.delay_reduction {
                Some(r) => println!("delay reduction {:.1}%", 100.0 * r),
                None => println!("delay reduction not applicable"),
            }
        }
        "capacity" => {
            let grid = parse_grid(m.get_one::<String>("grid").expect("has default"))?;
            let b = measure_capacity(&cfg.with_strategy(Strategy::Baseline), &grid)?;
            let p = measure_capacity(&cfg.with_strategy(Strategy::Preemptive), &grid)?;
            write_file(&out, "metrics.json", &capacity_json(&b, &p))?;
            let show = |c: Option<f64>| c.map_or("none".into(), |c| format!("{c:.0} veh/h"));
            println!(
                "capacity: baseline {}, preemptive {}",
                show(b.capacity),
                show(p.capacity)
            );
        }
        "validate" => {
            let results = run_validation(&cfg);
            for r in &results {
                match &r.outcome {
                    Ok(msg) => println!("ok   {}: {msg}", r.name),
                    Err(msg) => println!("FAIL {}: {msg}", r.name),
                }
            }
            if !results.iter().all(|r| r.passed()) {
                return Ok(ExitCode::from(2));
            }
        }
        _ => unreachable!("subcommand is required"),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are configuration errors; 2 is reserved for `validate`
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match execute(name, sub) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
