use std::path::PathBuf;
use std::process::ExitCode;

use srosync::error::Error;
use srosync_cli::config::{load_config, Condition, RunConfig};
use srosync_cli::pipeline::{compare_wavs, metrics_from_wav, run_condition, run_grid};

const USAGE: &str = "\
srosync — sample-rate-offset simulation, estimation and compensation

USAGE:
    srosync run     --config <FILE> [--condition <NAME>] [--output-dir <DIR>] [--seed <N>] [--sro <q1,q2>]
    srosync grid    --config <FILE> [--output-dir <DIR>] [--seed <N>]
    srosync metrics --wav <EARS.wav> [--output-dir <DIR>]
    srosync compare --wav <EARS.wav> --reference <REF.wav> [--output-dir <DIR>]

Conditions: reference | uncompensated | oracle_comp | estimated_comp
Exit codes: 0 success, 2 config error, 3 domain/validity error, 4 I/O error.
";

struct Args {
    flags: Vec<(String, String)>,
}

impl Args {
    fn parse(args: &[String]) -> Result<Self, String> {
        let mut flags = Vec::new();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let Some(name) = a.strip_prefix("--") else {
                return Err(format!("unexpected argument: {a}"));
            };
            let Some(value) = it.next() else {
                return Err(format!("flag --{name} needs a value"));
            };
            flags.push((name.to_string(), value.clone()));
        }
        Ok(Self { flags })
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.flags.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse(_) => 2,
        Error::Io(_) | Error::Wav(_) => 4,
        _ => 3,
    }
}

fn apply_overrides(cfg: &mut RunConfig, args: &Args) -> Result<(), Error> {
    if let Some(v) = args.get("condition") {
        cfg.condition = Condition::parse(v)?;
    }
    if let Some(v) = args.get("output-dir") {
        cfg.output_dir = PathBuf::from(v);
    }
    if let Some(v) = args.get("seed") {
        cfg.seed = v.parse().map_err(|_| Error::Config(format!("bad seed {v}")))?;
        cfg.scene.noise_seed = cfg.seed;
    }
    if let Some(v) = args.get("sro") {
        let parts: Vec<f64> = v
            .split(',')
            .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad sro value {p}"))))
            .collect::<Result<_, _>>()?;
        if parts.len() != 2 {
            return Err(Error::Config(format!("--sro wants q1,q2 in ppm, got {v}")));
        }
        cfg.scene.sro = srosync::room::SroSetup::new(
            cfg.scene.sro.primary.ppm(),
            parts[0],
            parts[1],
        )?;
    }
    cfg.validate()
}

fn dispatch() -> Result<(), Error> {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = argv.first() else {
        eprint!("{USAGE}");
        return Err(Error::Config("missing subcommand".into()));
    };
    let args = Args::parse(&argv[1..]).map_err(Error::Config)?;

    match command.as_str() {
        "run" => {
            let config_path =
                args.get("config").ok_or_else(|| Error::Config("run needs --config".into()))?;
            let mut cfg = load_config(config_path)?;
            apply_overrides(&mut cfg, &args)?;
            let manifest = run_condition(&cfg)?;
            println!(
                "{}: mean |dIC| {:.4}, mean |dITD| {:.2} us{}",
                manifest.condition,
                manifest.summary.mean_abs_delta_ic,
                manifest.summary.mean_abs_delta_itd_us,
                manifest
                    .summary
                    .final_sro_error_ppm
                    .map(|e| format!(", final sro error {:.3}/{:.3} ppm", e[0], e[1]))
                    .unwrap_or_default()
            );
            println!("outputs in {}", cfg.output_dir.join(manifest.condition).display());
            Ok(())
        }
        "grid" => {
            let config_path =
                args.get("config").ok_or_else(|| Error::Config("grid needs --config".into()))?;
            let mut cfg = load_config(config_path)?;
            apply_overrides(&mut cfg, &args)?;
            let manifests = run_grid(&cfg)?;
            for m in &manifests {
                println!(
                    "sro ({:>4}, {:>5}) {:>15}: mean |dIC| {:.4}, mean |dITD| {:.2} us",
                    m.sro_ppm[1],
                    m.sro_ppm[2],
                    m.condition,
                    m.summary.mean_abs_delta_ic,
                    m.summary.mean_abs_delta_itd_us
                );
            }
            Ok(())
        }
        "metrics" => {
            let wav = args.get("wav").ok_or_else(|| Error::Config("metrics needs --wav".into()))?;
            let out = PathBuf::from(args.get("output-dir").unwrap_or("metrics_out"));
            let map = metrics_from_wav(std::path::Path::new(wav), &out)?;
            println!(
                "{} bands x {} blocks written to {}",
                map.bands(),
                map.blocks(),
                out.display()
            );
            Ok(())
        }
        "compare" => {
            let wav = args.get("wav").ok_or_else(|| Error::Config("compare needs --wav".into()))?;
            let reference = args
                .get("reference")
                .ok_or_else(|| Error::Config("compare needs --reference".into()))?;
            let out = PathBuf::from(args.get("output-dir").unwrap_or("compare_out"));
            let diff = compare_wavs(
                std::path::Path::new(wav),
                std::path::Path::new(reference),
                &out,
            )?;
            println!(
                "mean |dIC| {:.4}, mean |dITD| {:.2} us, outputs in {}",
                diff.mean_abs_ic(),
                diff.mean_abs_itd() * 1e6,
                out.display()
            );
            Ok(())
        }
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            Ok(())
        }
        other => {
            eprint!("{USAGE}");
            Err(Error::Config(format!("unknown subcommand: {other}")))
        }
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
