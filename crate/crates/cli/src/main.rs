use clap::{Parser, Subcommand, ValueEnum};
use folideform_cli::{builtin, exit_code, run_scenario, Overrides, ScenarioConfig, BUILTINS, EXIT_VALIDATION};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "folideform", version, about = "Deformation analyses of codimension-one foliations on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a built-in given as `builtin:<name>`.
    Run {
        path: String,
        /// Overrides the residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Overrides the scenario bandwidth.
        #[arg(long)]
        bandwidth: Option<usize>,
        /// Directory for `<scenario>.json` / `<scenario>.csv`; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// List the built-in scenarios.
    ListBuiltins,
    /// Print the TOML source of a built-in scenario.
    Describe { name: String },
}

fn configure_threads() {
    if let Ok(v) = std::env::var("FOLIDEFORM_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring FOLIDEFORM_THREADS={v}: expected a positive integer"),
        }
    }
}

fn run(path: &str, overrides: Overrides, out: Option<PathBuf>, format: Format) -> i32 {
    let text = match path.strip_prefix("builtin:") {
        Some(name) => match builtin(name) {
            Some(s) => s.to_string(),
            None => {
                eprintln!("unknown built-in scenario `{name}`");
                return EXIT_VALIDATION;
            }
        },
        None => match std::fs::read_to_string(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("cannot read {path}: {e}");
                return EXIT_VALIDATION;
            }
        },
    };
    let report = match run_scenario(&text, &overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_VALIDATION;
        }
    };
    let (body, ext) = match format {
        Format::Json => (report.to_json(), "json"),
        Format::Csv => (report.to_csv(), "csv"),
    };
    match out {
        None => print!("{body}"),
        Some(dir) => {
            let file = dir.join(format!("{}.{ext}", report.scenario));
            if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&file, body)) {
                eprintln!("cannot write {}: {e}", file.display());
                return 1;
            }
        }
    }
    for a in report.analyses.iter().filter(|a| a.error.is_some()) {
        eprintln!("analysis {} ({}) failed: {}", a.index, a.kind, a.error.as_deref().unwrap_or_default());
    }
    exit_code(&report)
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { path, tol, bandwidth, out, format } => run(&path, Overrides { tol, bandwidth }, out, format),
        Command::ListBuiltins => {
            for (name, src) in BUILTINS {
                let desc = ScenarioConfig::parse(src).map(|c| c.description).unwrap_or_default();
                println!("{name}\t{desc}");
            }
            0
        }
        Command::Describe { name } => match builtin(&name) {
            Some(src) => {
                print!("{src}");
                0
            }
            None => {
                eprintln!("unknown built-in scenario `{name}`");
                EXIT_VALIDATION
            }
        },
    };
    ExitCode::from(code as u8)
}
