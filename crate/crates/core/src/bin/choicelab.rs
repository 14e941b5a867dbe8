use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use choicelab::harness::{emit, emit_curve, query_curve, run, ConfigLayer, ExperimentConfig, Mode, OutputFormat};
use choicelab::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Simulate and infer position-selecting choice functions.
#[derive(Debug, Parser)]
#[command(name = "choicelab", version)]
struct Cli {
    /// recover-active, classify, estimate-mixture, recover-mixed,
    /// recover-passive, distance-median, distance-sort or feasibility.
    mode: Option<Mode>,

    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ell: Option<usize>,
    /// Mixture probabilities, comma separated, lowest position first.
    #[arg(long, value_delimiter = ',')]
    pi: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Passive stream density multiplier.
    #[arg(long)]
    b: Option<f64>,
    /// Passive arrival rate; use with --t1 and --t2.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    /// Passive phase probabilities; use together.
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    /// Point dimension for distance modes.
    #[arg(long)]
    dim: Option<usize>,
    /// Sampled k-sets when scoring large passive instances.
    #[arg(long)]
    sample_size: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, env = "CHOICELAB_SEED")]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// JSON file of settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write wall_ms as 0 so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Comma-separated n values: emit a query-count curve instead of rows.
    #[arg(long, value_delimiter = ',')]
    curve: Option<Vec<usize>>,
}

impl Cli {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            mode: self.mode,
            n: self.n,
            k: self.k,
            ell: self.ell,
            pi: self.pi.clone(),
            gamma: self.gamma,
            epsilon: self.epsilon,
            delta: self.delta,
            b: self.b,
            alpha: self.alpha,
            t1: self.t1,
            t2: self.t2,
            p1: self.p1,
            p2: self.p2,
            dim: self.dim,
            sample_size: self.sample_size,
            trials: self.trials,
            seed: self.seed,
            format: self.format,
            timing: self.no_timing.then_some(false),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Configuration(_) | Error::InvalidArity(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Json(j) if j.is_io() => EXIT_IO,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let file_layer = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ConfigLayer>(&text)
                .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?
        }
        None => ConfigLayer::default(),
    };
    let config = ExperimentConfig::from_layer(file_layer.overridden_by(cli.layer()))?;

    let sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match &cli.curve {
        Some(ns) => emit_curve(&query_curve(&config, ns)?, config.format, sink),
        None => emit(&run(&config)?, config.format, sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("choicelab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_valid() {
        Cli::command().debug_assert();
    }

    #[test]
    fn pi_is_comma_separated() {
        let cli = Cli::try_parse_from(["choicelab", "estimate-mixture", "--pi", "0.5,0.3,0.2", "--gamma", "0.1"]).unwrap();
        assert_eq!(cli.pi, Some(vec![0.5, 0.3, 0.2]));
        assert_eq!(cli.mode, Some(Mode::EstimateMixture));
        assert_eq!(OutputFormat::Csv, cli.layer().format.unwrap_or_default());
    }

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("choicelab").chain(args.iter().copied())).unwrap()
    }

    fn run_to_file(args: &[&str], dir: &tempfile::TempDir, name: &str) -> Result<String, Error> {
        let path = dir.path().join(name);
        let mut cli = parse(args);
        cli.out = Some(path.clone());
        execute(&cli)?;
        Ok(std::fs::read_to_string(path).unwrap())
    }

    #[test]
    fn reruns_without_timing_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let args = ["recover-active", "--n", "20", "--k", "4", "--ell", "2", "--trials", "3", "--seed", "11", "--no-timing"];
        let first = run_to_file(&args, &dir, "a.csv").unwrap();
        let second = run_to_file(&args, &dir, "b.csv").unwrap();
        assert_eq!(first, second);
        assert!(first.starts_with(&choicelab::harness::CSV_HEADER.join(",")));
        assert_eq!(first.lines().count(), 4);
    }

    #[test]
    fn json_output_parses() {
        let dir = tempfile::tempdir().unwrap();
        let text = run_to_file(&["classify", "--n", "8", "--k", "3", "--ell", "2", "--format", "json", "--no-timing"], &dir, "r.json").unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(value.is_object());
    }

    #[test]
    fn configuration_errors_map_to_usage_code() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_to_file(&["recover-active", "--n", "4", "--k", "3", "--ell", "2"], &dir, "x.csv").unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        let err = execute(&parse(&["recover-active", "--n", "10", "--k", "3", "--ell", "7"])).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn missing_mode_is_a_usage_error() {
        let err = execute(&parse(&["--n", "10"])).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn unknown_mode_is_rejected_by_parser() {
        assert!(Cli::try_parse_from(["choicelab", "sort-everything"]).is_err());
    }

    #[test]
    fn unwritable_output_maps_to_io_code() {
        let mut cli = parse(&["feasibility", "--n", "4"]);
        cli.out = Some(PathBuf::from("/nonexistent-dir/out.csv"));
        assert_eq!(exit_code(&execute(&cli).unwrap_err()), EXIT_IO);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("c.json");
        std::fs::write(&config, r#"{"mode":"recover-active","n":12,"k":3,"ell":2,"trials":2,"seed":5,"timing":false}"#).unwrap();
        let config = config.to_str().unwrap().to_owned();
        let from_file = run_to_file(&["--config", &config], &dir, "f.csv").unwrap();
        assert_eq!(from_file.lines().count(), 3);
        let overridden = run_to_file(&["--config", &config, "--trials", "4"], &dir, "o.csv").unwrap();
        assert_eq!(overridden.lines().count(), 5);
        assert_eq!(from_file.lines().nth(1), overridden.lines().nth(1));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("c.json");
        std::fs::write(&config, r#"{"mode":"feasibility","n":4,"colour":"red"}"#).unwrap();
        let err = execute(&parse(&["--config", config.to_str().unwrap()])).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
    }

    #[test]
    fn seed_falls_back_to_environment() {
        std::env::set_var("CHOICELAB_SEED", "99");
        let from_env = parse(&["feasibility"]);
        let explicit = parse(&["feasibility", "--seed", "7"]);
        std::env::remove_var("CHOICELAB_SEED");
        assert_eq!(from_env.seed, Some(99));
        assert_eq!(explicit.seed, Some(7));
    }
}
