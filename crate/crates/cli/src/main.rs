//! `maxseat`: command-line front end for the enumeration library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};

use maxseat_core::adsorption::{
    density_comparison_1d, rsa_pgf_1d, simulate_rsa, uniform_mean_1d, uniform_pgf_1d,
};
use maxseat_core::automaton::build_automaton;
use maxseat_core::oracle::weight_enumerator_bruteforce;
use maxseat_core::poly::ratio_to_f64;
use maxseat_core::transfer::{round_sig, DEFAULT_TOLERANCE};
use maxseat_core::{
    generating_function, limiting_density, weight_enumerator, Builtin, Error, Guards, PatternSet,
    WeightEnumerator,
};

const GUARD_ENV: &str = "MAXSEAT_GUARDS";

#[derive(Parser, Debug)]
#[command(name = "maxseat", version, about = "Exact counts of maximal pattern-avoiding 0-1 grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    output: Format,

    /// Largest rows*cols the exhaustive oracle will enumerate.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    guard_cells: Option<u64>,

    /// Largest number of automaton states to build.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    guard_states: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Builtin pattern family, `name[:param]` (hrun:b, spaced:b, dimers, kings, block22, tblock).
    #[arg(long)]
    builtin: Option<String>,

    /// JSON pattern file.
    #[arg(long)]
    patterns: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<PatternSet, Error> {
        match (&self.builtin, &self.patterns) {
            (Some(name), None) => name.parse::<Builtin>()?.pattern_set(),
            (None, Some(path)) => PatternSet::load(path),
            _ => Err(Error::InvalidInput("give exactly one of --builtin and --patterns".into())),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weight enumerator W(z) of maximal rows x cols grids.
    Count {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[command(flatten)]
        source: Source,
    },
    /// Bivariate generating function f(z, x) = sum_s W_s(z) x^s.
    Genfunc {
        #[arg(long)]
        rows: usize,
        #[command(flatten)]
        source: Source,
    },
    /// Limiting density of ones as the number of columns grows.
    Density {
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[command(flatten)]
        source: Source,
    },
    /// Random sequential adsorption trials.
    Simulate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        source: Source,
    },
    /// Weight enumerator by exhaustive search.
    Oracle {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[command(flatten)]
        source: Source,
    },
    /// Exact one-row adsorption densities against the uniform ones.
    Rsa1d {
        /// Row length.
        #[arg(long, alias = "n")]
        cols: usize,
        /// Also print the occupancy distribution F_n(z).
        #[arg(long)]
        pgf: bool,
    },
    /// Exact one-row uniform distribution over maximal rows.
    Uniform1d {
        /// Row length.
        #[arg(long, alias = "n")]
        cols: usize,
    },
    /// The column automaton as JSON.
    DumpAutomaton {
        #[arg(long)]
        rows: usize,
        #[command(flatten)]
        source: Source,
    },
}

struct Report {
    json: Value,
    text: String,
}

fn guards(cli: &Cli) -> Result<Guards, Error> {
    let mut g = Guards::default();
    if let Ok(spec) = std::env::var(GUARD_ENV) {
        g = g.with_overrides(&spec)?;
    }
    if let Some(c) = cli.guard_cells {
        g.cells = usize::try_from(c).unwrap_or(usize::MAX);
    }
    if let Some(s) = cli.guard_states {
        g.states = usize::try_from(s).unwrap_or(usize::MAX);
    }
    Ok(g)
}

fn enumerator_text(w: &WeightEnumerator) -> String {
    let degrees = match (w.poly.min_degree(), w.poly.degree()) {
        (Some(lo), Some(hi)) => format!("ones: {lo}..{hi}"),
        _ => "ones: none".to_string(),
    };
    format!("{}\ntotal: {}\n{degrees}", w.poly, w.total())
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let guards = guards(cli)?;
    let report = match &cli.command {
        Command::Count { rows, cols, source } => {
            let w = weight_enumerator(*rows, *cols, &source.load()?, &guards)?;
            Report { json: w.to_json(), text: enumerator_text(&w) }
        }
        Command::Oracle { rows, cols, source } => {
            let w = weight_enumerator_bruteforce(*rows, *cols, &source.load()?, &guards)?;
            Report { json: w.to_json(), text: enumerator_text(&w) }
        }
        Command::Genfunc { rows, source } => {
            let set = source.load()?;
            let g = generating_function(*rows, &set, &guards)?;
            Report {
                json: json!({
                    "rows": rows,
                    "patterns": set.name(),
                    "states": g.dim,
                    "function": g.function.to_json(),
                }),
                text: format!("({}) / ({})", g.function.num(), g.function.den()),
            }
        }
        Command::Density { rows, tol, source } => {
            let d = limiting_density(*rows, &source.load()?, *tol, &guards)?;
            Report {
                json: d.to_json(),
                text: format!("{}\ncrosscheck: {}", round_sig(d.density), round_sig(d.crosscheck)),
            }
        }
        Command::Simulate { rows, cols, trials, seed, source } => {
            let stats = simulate_rsa(*rows, *cols, &source.load()?, *trials, *seed)?;
            let mut text = format!(
                "mean density: {} (stderr {})\n",
                round_sig(stats.mean_density),
                round_sig(stats.stderr)
            );
            for (count, freq) in &stats.histogram {
                text.push_str(&format!("{count}: {freq}\n"));
            }
            text.pop();
            Report { json: stats.to_json(), text }
        }
        Command::Rsa1d { cols, pgf } => {
            let cmp = density_comparison_1d(*cols)?;
            let mut json = cmp.to_json();
            let mut text = format!(
                "rsa: {}\nuniform: {}\nratio: {}",
                round_sig(cmp.rsa_f64()),
                round_sig(cmp.uniform_f64()),
                round_sig(cmp.ratio_f64())
            );
            if *pgf {
                let f = rsa_pgf_1d(*cols);
                text = format!("{f}\n{text}");
                json["pgf"] = f.to_json();
            }
            Report { json, text }
        }
        Command::Uniform1d { cols } => {
            if *cols == 0 {
                return Err(Error::InvalidInput("row length must be at least 1".into()));
            }
            let (g, pgf) = uniform_pgf_1d(*cols);
            let density = uniform_mean_1d(*cols) / BigRational::from_integer((*cols).into());
            let cmp_density = round_sig(ratio_to_f64(&density));
            Report {
                json: json!({
                    "n": cols,
                    "enumerator": g.to_json(),
                    "total": g.eval_one().to_string(),
                    "pgf": pgf.to_json(),
                    "density": cmp_density,
                }),
                text: format!("{g}\n{pgf}\ndensity: {cmp_density}"),
            }
        }
        Command::DumpAutomaton { rows, source } => {
            let a = build_automaton(*rows, &source.load()?, &guards)?;
            let accepting = (0..a.num_states()).filter(|&i| a.is_accepting(i)).count();
            Report {
                json: a.to_json(),
                text: format!(
                    "states: {}\naccepting: {accepting}\ntransitions: {}",
                    a.num_states(),
                    a.num_transitions()
                ),
            }
        }
    };
    Ok(report)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) => 2,
        Error::Guard { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            match cli.output {
                Format::Json => println!("{}", report.json),
                Format::Text => println!("{}", report.text),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("maxseat: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
