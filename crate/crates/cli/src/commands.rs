use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use relu_regions::gp_theory::{crossing_table, theory_table};
use relu_regions::montecarlo::{self, ExperimentConfig, Mode};
use relu_regions::network::{forward_pwl, init_network, NetworkParams, NetworkSpec};
use relu_regions::sparsity::{
    check_region_adaptive_sparsity, theoretical_expected_regions, RegionSource, TargetFamily,
    TargetFunction,
};

use crate::error::{CliError, CliResult};
use crate::output::{config_hash, num, Run};
use crate::{parse, Cli, Command, SimulateArgs, SparsityArgs, TheoryArgs};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Theory(args) => theory(cli, args),
        Command::Sparsity(args) => sparsity(cli, args),
    })
}

/// Reads an input file; a missing or unreadable input is a validation error.
fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> CliResult<()> {
    let mut run = Run::start(&cli.out, "simulate");
    let text = read_input(&args.config)?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad config {}: {e}", args.config.display())))?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    config.validate()?;
    let result = montecarlo::run(&config)?;
    run.write_json("result.json", &result)?;
    if !args.no_trials_csv {
        let rows = result
            .per_trial_values
            .iter()
            .map(|t| vec![t.trial.to_string(), num(t.value)]);
        run.write_csv("trials.csv", &["trial", "value"], rows)?;
    }
    run.finish(config_hash(&config)?, config.base_seed)
}

/// Canonical form of the theory arguments, hashed into the manifest.
#[derive(Serialize)]
struct TheoryConfig {
    layers: Vec<usize>,
    x: Vec<f64>,
    sigma_b: f64,
    intervals: Vec<[String; 2]>,
}

fn theory(cli: &Cli, args: &TheoryArgs) -> CliResult<()> {
    let mut run = Run::start(&cli.out, "theory");
    let layers = parse::layers(&args.layers)?;
    let xs = parse::grid(&args.x)?;
    let mut intervals = vec![(f64::NEG_INFINITY, f64::INFINITY)];
    for spec in &args.intervals {
        let iv = parse::interval(spec)?;
        if !intervals.contains(&iv) {
            intervals.push(iv);
        }
    }
    let table = theory_table(&layers, &xs, args.sigma_b)?;
    let crossings = crossing_table(&layers, &intervals, args.sigma_b)?;
    run.write_csv(
        "theory.csv",
        &["layer", "x", "variance", "density", "A_coeff"],
        table.iter().map(|r| {
            vec![
                r.layer.to_string(),
                num(r.x),
                num(r.variance),
                num(r.density),
                num(r.a_coeff),
            ]
        }),
    )?;
    run.write_csv(
        "crossings.csv",
        &["layer", "A", "B", "expected_crossings"],
        crossings.iter().map(|r| {
            vec![
                r.layer.to_string(),
                num(r.a),
                num(r.b),
                num(r.expected_crossings),
            ]
        }),
    )?;
    let config = TheoryConfig {
        layers,
        x: xs,
        sigma_b: args.sigma_b,
        intervals: intervals.iter().map(|&(a, b)| [num(a), num(b)]).collect(),
    };
    run.finish(config_hash(&config)?, cli.seed.unwrap_or(0))
}

#[derive(Deserialize)]
struct Sample {
    x: f64,
    y: f64,
}

fn load_target(args: &SparsityArgs) -> CliResult<TargetFunction> {
    if let Ok(family) = args.target.parse::<TargetFamily>() {
        let (a, b) = parse::domain(&args.domain)?;
        return Ok(TargetFunction::builtin(family, a, b, args.points)?);
    }
    let path = Path::new(&args.target);
    let text = read_input(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let samples = reader
        .deserialize::<Sample>()
        .map(|r| {
            r.map(|s| (s.x, s.y))
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TargetFunction::new(samples)?)
}

/// Canonical form of the sparsity arguments, hashed into the manifest.
#[derive(Serialize)]
struct SparsityConfig {
    target: String,
    samples: Vec<(f64, f64)>,
    network: NetworkSpec,
    eps0: f64,
    alpha: f64,
    c: f64,
    regions_source: RegionSource,
    mc_trials: Option<u64>,
    expected_regions: Option<f64>,
}

fn sparsity(cli: &Cli, args: &SparsityArgs) -> CliResult<()> {
    let mut run = Run::start(&cli.out, "sparsity");
    let target = load_target(args)?;
    let net: NetworkParams = match (&args.topology, &args.network) {
        (Some(t), None) => init_network(&parse::topology(t)?, args.sigma_b, cli.seed.unwrap_or(0))?,
        (None, Some(path)) => {
            let spec: NetworkSpec = serde_json::from_str(&read_input(path)?).map_err(|e| {
                CliError::Validation(format!("bad network spec {}: {e}", path.display()))
            })?;
            spec.build()?
        }
        _ => {
            return Err(CliError::Validation(
                "give exactly one of --topology or --network".into(),
            ))
        }
    };
    let spec = net
        .spec()
        .ok_or_else(|| CliError::Invariant("sampled network without seed".into()))?;
    let (expected, source) = match (args.expected_regions, args.mc_trials) {
        (Some(v), _) => (v, RegionSource::Supplied),
        (None, Some(trials)) => {
            let cfg = ExperimentConfig::new(
                spec.topology.clone(),
                spec.sigma_b,
                trials,
                spec.seed,
                Mode::Regions,
            );
            (
                montecarlo::run(&cfg)?.estimate_mean + 1.0,
                RegionSource::MonteCarlo,
            )
        }
        (None, None) => (
            theoretical_expected_regions(&spec.topology),
            RegionSource::Theory,
        ),
    };
    let phi = forward_pwl(&net);
    let report = check_region_adaptive_sparsity(
        &phi, &target, args.eps0, args.alpha, args.c, expected, source,
    )?;
    run.write_json("sparsity.json", &report)?;
    let config = SparsityConfig {
        target: args.target.clone(),
        samples: target.samples().to_vec(),
        network: spec.clone(),
        eps0: args.eps0,
        alpha: args.alpha,
        c: args.c,
        regions_source: source,
        mc_trials: args.mc_trials,
        expected_regions: args.expected_regions,
    };
    run.finish(config_hash(&config)?, spec.seed)
}
