use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mpat_core::config::{ConfigDocument, Method};
use mpat_core::estimators::{rank_subsets, select_subset, SubsetStrategy, DEFAULT_CONDITION_CEILING, DEFAULT_SUBSET_BUDGET};
use mpat_core::io::{self, FormatError, GridSpec, Provenance, ResultsFile, ScatterTable};
use mpat_core::simulator::{aggregate_study, analyze, run_campaign, simulate_dataset, AnalysisOptions, CampaignResult};
use mpat_core::vsh::{oriented_dipole_coefficients, SphericalAngle, VshCoefficients};
use mpat_core::{Error, Execution};

mod report;

#[derive(Parser, Debug)]
#[command(name = "mpat", version, about = "Antenna pattern reconstruction from multipath sense-antenna voltages")]
struct Cli {
    /// Run everything on the calling thread
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default configuration as TOML
    Config {
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate a measurement file (.json or .csv) from a configuration
    Simulate {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate AUT orientations, patterns and radiation resistance from a measurement file
    Estimate {
        measurements: PathBuf,
        #[arg(short, long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        /// Sensors used by matrix inversion
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Greedy instead of exhaustive subset search
        #[arg(long)]
        greedy: bool,
        /// Terminal current in amperes; defaults to the value recorded in the file, else 1
        #[arg(long)]
        current: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rank sensor subsets by 1-entropy
    Select {
        measurements: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        greedy: bool,
        /// Enumeration limit for the exhaustive search
        #[arg(long, default_value_t = DEFAULT_SUBSET_BUDGET)]
        budget: u64,
        /// Also write the ranking as CSV
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the reconstructed (and, when known, theoretical) far field on a grid
    Pattern {
        results: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(short, long, value_enum, default_value_t = MethodArg::Clse)]
        method: MethodArg,
        /// `<step>` or `<theta_step>x<phi_step>` in degrees
        #[arg(long, default_value = "1x1")]
        grid: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Entropy and condition-number study over every sensor subset
    Study {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds to aggregate
        #[arg(long)]
        aggregate_seeds: Option<usize>,
    },
    /// Simulate and analyze a campaign in one step
    Campaign {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-run a results file from its provenance and compare
    Reproduce {
        results: PathBuf,
        /// Write the regenerated file here
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mi,
    Lse,
    Clse,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Mi => vec![Method::Mi],
            MethodArg::Lse => vec![Method::Lse],
            MethodArg::Clse => vec![Method::Clse],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

enum Failure {
    Format(FormatError),
    Mismatch(String),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Format(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Format(FormatError::Numerical(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.serial { Execution::Serial } else { Execution::default() };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Format(e)) => {
            eprintln!("error: {e}");
            if let FormatError::Numerical(Error::BudgetExceeded { .. }) = e {
                eprintln!("hint: pass --greedy to skip exhaustive enumeration");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &FormatError) -> u8 {
    match e {
        FormatError::Numerical(Error::InvalidConfig(_) | Error::InvalidSubsetSize { .. }) => 2,
        FormatError::Numerical(_) => 3,
        _ => 2,
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ConfigDocument, FormatError> {
    let mut doc = io::read_config(path)?;
    if let Some(s) = seed {
        doc.environment.seed = s;
    }
    Ok(doc)
}

fn run(command: Command, exec: Execution) -> Result<(), Failure> {
    match command {
        Command::Config { output } => {
            io::write_atomic(&output, io::config_to_toml(&ConfigDocument::default()).as_bytes())?;
            println!("wrote {}", output.display());
        }

        Command::Simulate { config, output, seed } => {
            let doc = load_config(&config, seed)?;
            let mut set = simulate_dataset(&doc.campaign_config())?;
            set.source_config = Some(doc);
            set.generated_at_unix_s = Some(unix_now());
            io::write_measurements(&output, &set)?;
            println!(
                "wrote {}: {} sensors, {} references, {} AUTs",
                output.display(),
                set.sense_ids.len(),
                set.references.len(),
                set.auts.len()
            );
        }

        Command::Estimate { measurements, method, k, greedy, current, output } => {
            let set = io::read_measurements(&measurements)?;
            let terminal_current_a = current
                .or_else(|| set.source_config.as_ref().map(|c| c.environment.terminal_current_a))
                .unwrap_or(1.0);
            let options = AnalysisOptions {
                methods: method.methods(),
                subset_k: k,
                strategy: if greedy {
                    SubsetStrategy::Greedy
                } else {
                    SubsetStrategy::Exhaustive { budget: DEFAULT_SUBSET_BUDGET }
                },
                terminal_current_a,
                ..AnalysisOptions::default()
            };
            let seed = set.source_config.as_ref().map(|c| c.environment.seed);
            let result = analyze(&set, &options, seed, exec)?;
            let provenance = Provenance::Measurements {
                path: measurements.display().to_string(),
                methods: options.methods.clone(),
                subset_k: k,
                greedy,
                subset_budget: DEFAULT_SUBSET_BUDGET,
                terminal_current_a,
                source_config: set.source_config.clone(),
            };
            finish_results(&output, provenance, result)?;
        }

        Command::Select { measurements, k, greedy, budget, output } => {
            let set = io::read_measurements(&measurements)?;
            let (full, _, _) = mpat_core::simulator::corrected_inputs(&set, DEFAULT_CONDITION_CEILING)?;
            let ranked = if greedy {
                let g = select_subset(&full, k, SubsetStrategy::Greedy, exec)?;
                if let Ok(best) = select_subset(&full, k, SubsetStrategy::Exhaustive { budget }, exec) {
                    println!(
                        "greedy H1 = {:.6} bits, exhaustive best H1 = {:.6} bits, gap = {:.6} bits",
                        g.h1_bits,
                        best.h1_bits,
                        best.h1_bits - g.h1_bits
                    );
                }
                vec![g]
            } else {
                rank_subsets(&full, k, budget, exec)?
            };
            report::print_ranking(&ranked, full.sense_ids());
            if let Some(path) = output {
                io::write_atomic(&path, io::ranked_subsets_to_csv(&ranked, full.sense_ids()).as_bytes())?;
                println!("wrote {}", path.display());
            }
        }

        Command::Pattern { results, label, method, grid, output } => {
            let file = io::read_results(&results)?;
            pattern(&file.result, &label, method, &grid, &output)?;
        }

        Command::Study { config, output, seed, aggregate_seeds } => {
            let doc = load_config(&config, seed)?;
            let n = aggregate_seeds.unwrap_or(doc.study.aggregate_seeds);
            let agg = aggregate_study(&doc.campaign_config(), n, exec)?;
            let table = ScatterTable::from_aggregate(&agg);
            io::write_atomic(&output, io::scatter_to_csv(&table).as_bytes())?;
            println!("wrote {}: {} rows over {n} seed(s)", output.display(), table.rows.len());
            println!("spearman(H1, mean RMSE dB)      = {}", report::corr(agg.mean_spearman_h1_rmse));
            println!("spearman(log10 cond, H1)        = {}", report::corr(agg.mean_spearman_cond_h1));
        }

        Command::Campaign { config, output, seed } => {
            let doc = load_config(&config, seed)?;
            let result = run_campaign(&doc.campaign_config(), exec)?;
            finish_results(&output, Provenance::Campaign { config: doc }, result)?;
        }

        Command::Reproduce { results, output } => {
            let file = io::read_results(&results)?;
            let again = io::reproduce(&file, exec)?;
            if let Some(path) = output {
                io::write_results(&path, &ResultsFile { generated_at_unix_s: Some(unix_now()), ..again.clone() })?;
            }
            if again.comparable_json() != file.comparable_json() {
                return Err(Failure::Mismatch(format!("{} does not reproduce", results.display())));
            }
            println!("{} reproduces exactly", results.display());
        }
    }
    Ok(())
}

fn finish_results(output: &Path, provenance: Provenance, result: CampaignResult) -> Result<(), FormatError> {
    report::print_table(&result);
    let file = ResultsFile::new(provenance, result);
    io::write_results(output, &file)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn pattern(result: &CampaignResult, label: &str, method: MethodArg, grid: &str, output: &Path) -> Result<(), Failure> {
    let method = match method {
        MethodArg::All => return Err(Error::InvalidConfig("pattern needs a single --method".into()).into()),
        m => m.methods()[0],
    };
    let row = result.row(label).ok_or_else(|| {
        let known: Vec<&str> = result.rows.iter().map(|r| r.label.as_str()).collect();
        Error::InvalidConfig(format!("unknown label {label:?}; results contain {known:?}"))
    })?;
    let est = row
        .estimate(method)
        .ok_or_else(|| Error::InvalidConfig(format!("results for {label:?} have no {} estimate", method.name())))?;
    let coeffs = match (&est.coefficients, &est.error) {
        (Some(c), _) if c.len() == 3 => VshCoefficients::dipole([c[0], c[1], c[2]]),
        (_, Some(e)) => {
            return Err(Failure::Format(FormatError::Numerical(Error::InvalidConfig(format!(
                "{} estimate for {label:?} failed: {e}",
                method.name()
            )))))
        }
        _ => return Err(Error::InvalidConfig(format!("{} estimate for {label:?} has no coefficients", method.name())).into()),
    };
    let grid: GridSpec = grid.parse()?;
    let constants = result.constants()?;
    let recon = io::pattern_grid(&coeffs, &constants, grid)?;
    let mut meta = vec![("label", label.to_string()), ("method", method.name().to_string()), ("kind", "reconstructed".to_string())];

    let truth = match (row.theta_deg, row.phi_deg) {
        (Some(t), Some(p)) => Some((t, p)),
        _ => None,
    };
    if let Some((t, p)) = truth {
        let theory = io::pattern_grid(&oriented_dipole_coefficients(SphericalAngle::from_degrees(t, p)?, &constants), &constants, grid)?;
        let dev = io::pattern_rms_deviation(&recon, &theory)?;
        let peak = theory.iter().map(|q| q.magnitude).fold(0.0, f64::max);
        meta.push(("rms_deviation", dev.to_string()));
        meta.push(("relative_rms_deviation", (dev / peak).to_string()));
        let theory_path = sibling(output, "_theory");
        let theory_meta = [("label", label.to_string()), ("kind", "theoretical".to_string())];
        io::write_atomic(&theory_path, io::pattern_to_csv(&theory, &theory_meta).as_bytes())?;
        println!("wrote {} ({} points)", theory_path.display(), theory.len());
        println!("pattern magnitude RMS deviation: {dev:.6e} V ({:.4}% of peak)", 100.0 * dev / peak);
    }
    io::write_atomic(output, io::pattern_to_csv(&recon, &meta).as_bytes())?;
    println!("wrote {} ({} points)", output.display(), recon.len());
    Ok(())
}

/// `dir/name.csv` → `dir/name<suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
