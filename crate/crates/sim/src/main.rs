use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use treevault::crypto::Profile;
use treevault_sim::metrics::{format_rows, OverheadRow};
use treevault_sim::output::{ratio_rows, read_csv, write_csv, EventRow};
use treevault_sim::{
    effectiveness_experiment, fp_experiment, overhead_report, run_scenario, security_probes, EffectivenessReport,
    EventMix, RequestMix, Result, ScenarioConfig, Shape, SimError,
};

#[derive(Parser)]
#[command(name = "treevault", version, about = "Scenarios, experiments and probes for treevault")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write events, overhead and effectiveness CSVs.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_profile)]
        framework: Option<Profile>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Extirpation-based against common key-group sizes over tree shapes.
    Effectiveness {
        /// Structures separated by ';', e.g. "30;10,10,10;(5,5),(5,(3,2)),10".
        #[arg(long, default_value = "30;10,10,10;(5,5),(5,(3,2)),10")]
        structures: String,
        /// Required file count per structure.
        #[arg(long, default_value_t = 30)]
        files: usize,
        /// Depth-first index of the re-keyed file.
        #[arg(long, default_value_t = 0)]
        updated: usize,
        #[arg(long, value_enum, default_value_t = Mix::Random)]
        mix: Mix,
        #[arg(long, default_value_t = 100)]
        requests: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measured against predicted filter false-positive rates.
    Fp {
        #[arg(long, default_value = "100,200,300,400,500,1000", value_delimiter = ',')]
        groups: Vec<u64>,
        /// Filter bits per keyword (m/n).
        #[arg(long, default_value_t = 20)]
        ratio: u64,
        #[arg(long, default_value_t = 14)]
        k: u32,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eavesdropper, insider and collusion attacks.
    Probes {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_parser = parse_profile)]
        framework: Option<Profile>,
    },
    /// Print the overhead table from a previous run's output directory.
    Report {
        #[arg(long = "in", default_value = "out")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mix {
    /// Every request covers the folder holding the re-keyed file.
    Folder,
    Random,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse()
}

fn default_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::new(Profile::FrameworkI, "10,(5,5),10", 1);
    c.users = 4;
    c.events = EventMix { count: 200, request: 5.0, revoke: 1.0, update: 2.0, add: 0.5, delete: 0.5 };
    c
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| SimError::Io { path: dir.display().to_string(), source })
}

fn print_means(r: &EffectivenessReport) {
    println!("{:<32} {:>8} {:>10}", "structure", "samples", "mean");
    for (name, mean) in &r.means {
        let n = r.samples.iter().filter(|s| &s.structure == name).count();
        println!("{name:<32} {n:>8} {mean:>10.4}");
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, framework, out } => {
            let mut c = match config {
                Some(path) => ScenarioConfig::load(&path)?,
                None => default_config(),
            };
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(p) = framework {
                c.framework = p.to_string();
            }
            let result = run_scenario(&c)?;
            create_dir(&out)?;
            let events: Vec<EventRow> = result.log.iter().map(EventRow::from).collect();
            write_csv(&out.join("events.csv"), &events)?;
            write_csv(&out.join("overhead.csv"), &result.overhead.rows())?;
            write_csv(&out.join("effectiveness.csv"), &ratio_rows(&result.effectiveness))?;
            println!("framework {} seed {}: {} deliveries", c.framework, c.seed, result.log.len());
            print!("{}", overhead_report(&result.overhead));
            println!();
            print_means(&result.effectiveness);
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Effectiveness { structures, files, updated, mix, requests, seed, out } => {
            let shapes = Shape::parse_many(&structures)?;
            for s in &shapes {
                if s.file_count() != files {
                    return Err(SimError::ConfigInvalid(format!(
                        "structure {s} holds {} files, expected {files}",
                        s.file_count()
                    )));
                }
            }
            let mix = match mix {
                Mix::Folder => RequestMix::UpdatedFolder { requests },
                Mix::Random => RequestMix::Random { requests },
            };
            let r = effectiveness_experiment(&shapes, Some(updated), mix, seed)?;
            print_means(&r);
            if let Some(out) = out {
                create_dir(&out)?;
                write_csv(&out.join("effectiveness.csv"), &ratio_rows(&r))?;
            }
            Ok(true)
        }
        Command::Fp { groups, ratio, k, trials, seed, out } => {
            let rows = fp_experiment(&groups, ratio, k, trials, seed)?;
            println!(
                "{:>6} {:>8} {:>4} {:>12} {:>12} {:>10} {:>8}",
                "n", "BF(bit)", "k", "predicted", "measured", "hits", "hash/q"
            );
            let mut ok = true;
            for r in &rows {
                let within = r.measured >= r.predicted / 3.0 && r.measured <= r.predicted * 3.0;
                ok &= within;
                println!(
                    "{:>6} {:>8} {:>4} {:>12.3e} {:>12.3e} {:>10} {:>8.2}{}",
                    r.n,
                    r.filter_bits,
                    r.k,
                    r.predicted,
                    r.measured,
                    r.hits,
                    r.hashes_per_query,
                    if within { "" } else { "  outside [c/3, 3c]" }
                );
            }
            if let Some(out) = out {
                create_dir(&out)?;
                write_csv(&out.join("fp.csv"), &rows)?;
            }
            Ok(ok)
        }
        Command::Probes { seed, framework } => {
            let profiles = match framework {
                Some(p) => vec![p],
                None => vec![Profile::FrameworkI, Profile::FrameworkII],
            };
            let mut ok = true;
            for p in profiles {
                let r = security_probes(p, seed)?;
                ok &= r.passed();
                print!("{r}");
            }
            Ok(ok)
        }
        Command::Report { input } => {
            let rows: Vec<OverheadRow> = read_csv(&input.join("overhead.csv"))?;
            print!("{}", format_rows(&rows));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
