use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flate2::read::GzDecoder;
use log::{error, info};

use hyperneat::cppn::CppnGenome;
use hyperneat::experiment::{
    ExperimentConfig, ExperimentError, Mode, dump_features, emit_plots, final_test,
    final_test_text, parse_generation_csv, run_experiment,
};
use hyperneat::mnist::{self, Mnist};

const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_RUNTIME: u8 = 5;

const DEFAULT_MIRROR: &str = "https://ossci-datasets.s3.amazonaws.com/mnist";

#[derive(Parser)]
#[command(name = "hyperneat", version, about = "HyperNEAT-LEO experiments on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Full,
    Desk,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file; keys not given keep the preset's values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    preset: Preset,
    #[arg(long)]
    mode: Option<Mode>,
    /// Run seed; repeat for several runs. Overrides the config's seeds.
    #[arg(long)]
    seed: Vec<u64>,
    /// MNIST directory with the four uncompressed IDX files.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve, then test the champion; one output directory per seed.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a saved champion genome on the MNIST test set.
    FinalTest {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        genome: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate generation logs into one plot-data CSV.
    EmitPlots {
        /// generations.csv files or run directories containing one.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a champion's cut-layer features as CSV.
    DumpFeatures {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        #[arg(long, default_value_t = usize::MAX)]
        limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Download and unpack the MNIST IDX files.
    FetchData {
        #[arg(long, default_value = "data/mnist")]
        data: PathBuf,
        #[arg(long, default_value = DEFAULT_MIRROR)]
        mirror: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Test,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Failure::Config(e.to_string()),
            ExperimentError::Data(_) => Failure::Data(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), Preset::Full) => ExperimentConfig::load(path)?,
            (Some(path), Preset::Desk) => {
                // file keys override the desk preset
                let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                let base = ExperimentConfig::desk().to_toml();
                let merged = merge_toml(&base, &text).map_err(Failure::Config)?;
                ExperimentConfig::from_toml(&merged)?
            }
            (None, Preset::Full) => ExperimentConfig::default(),
            (None, Preset::Desk) => ExperimentConfig::desk(),
        };
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(d) = &self.data {
            cfg.data_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn merge_toml(base: &str, over: &str) -> Result<String, String> {
    fn merge(a: &mut toml::Table, b: toml::Table) {
        for (k, v) in b {
            match (a.get_mut(&k), v) {
                (Some(toml::Value::Table(x)), toml::Value::Table(y)) => merge(x, y),
                (_, v) => {
                    a.insert(k, v);
                }
            }
        }
    }
    let mut a: toml::Table = base.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let b: toml::Table = over.parse().map_err(|e: toml::de::Error| e.to_string())?;
    merge(&mut a, b);
    toml::to_string(&a).map_err(|e| e.to_string())
}

fn load_data(dir: &Path) -> Result<Mnist, Failure> {
    Mnist::load_dir(dir).map_err(|e| {
        Failure::Data(format!("{e} (run `hyperneat fetch-data --data {}` first)", dir.display()))
    })
}

fn load_genome(path: &Path) -> Result<CppnGenome, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    CppnGenome::from_text(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
            }
            fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fetch(dir: &Path, mirror: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    for name in [mnist::TRAIN_IMAGES, mnist::TRAIN_LABELS, mnist::TEST_IMAGES, mnist::TEST_LABELS] {
        let target = dir.join(name);
        if target.exists() {
            info!("{} already present", target.display());
            continue;
        }
        let url = format!("{}/{name}.gz", mirror.trim_end_matches('/'));
        info!("downloading {url}");
        let mut gz = Vec::new();
        ureq::get(&url)
            .call()
            .map_err(|e| Failure::Data(format!("{url}: {e}")))?
            .into_body()
            .into_reader()
            .read_to_end(&mut gz)
            .map_err(|e| Failure::Data(format!("{url}: {e}")))?;
        let bytes = gunzip(&gz).map_err(|e| Failure::Data(format!("{url}: {e}")))?;
        mnist::write_idx(&target, &bytes).map_err(|e| Failure::Data(e.to_string()))?;
    }
    let data = load_data(dir)?;
    println!(
        "{}: {} training and {} test images",
        dir.display(),
        data.train.len(),
        data.test.len()
    );
    Ok(())
}

fn gunzip(bytes: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(bytes).read_to_end(&mut out)?;
    Ok(out)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { cfg, out } => {
            let mut cfg = cfg.resolve()?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let data = load_data(&cfg.data_dir)?;
            for &seed in &cfg.seeds {
                let dir = cfg.run_dir(seed);
                let record = run_experiment(&cfg, seed, &data, Some(&dir))?;
                println!(
                    "{} seed {seed}: champion fitness {:.4} (generation {}), test accuracy {:.4} -> {}",
                    cfg.mode,
                    record.champion.fitness,
                    record.champion.generation,
                    record.final_test.accuracy,
                    dir.display()
                );
            }
            Ok(())
        }
        Command::FinalTest { cfg, genome, out } => {
            let cfg = cfg.resolve()?;
            let genome = load_genome(&genome)?;
            let data = load_data(&cfg.data_dir)?;
            let seed = cfg.seeds[0];
            let (test, _) = final_test(&genome, &cfg, &data, seed)?;
            let champion = hyperneat::evolution::Champion {
                genome,
                fitness: f64::NAN,
                accuracy: None,
                generation: 0,
            };
            write_or_print(out.as_deref(), &final_test_text(cfg.mode, seed, &champion, &test))
        }
        Command::EmitPlots { inputs, out } => {
            let mut runs = Vec::new();
            for input in inputs {
                let path = if input.is_dir() { input.join("generations.csv") } else { input };
                let text = fs::read_to_string(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
                runs.push(parse_generation_csv(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?);
            }
            let csv = emit_plots(&runs)?;
            write_or_print(out.as_deref(), &csv)
        }
        Command::DumpFeatures { cfg, genome, split, limit, out } => {
            let cfg = cfg.resolve()?;
            let genome = load_genome(&genome)?;
            let data = load_data(&cfg.data_dir)?;
            let split = match split {
                SplitName::Train => &data.train,
                SplitName::Test => &data.test,
            };
            let csv = dump_features(&genome, cfg.mode, split, limit)?;
            write_or_print(out.as_deref(), &csv)
        }
        Command::PrintConfig { cfg } => {
            print!("{}", cfg.resolve()?.to_toml());
            Ok(())
        }
        Command::FetchData { data, mirror } => fetch(&data, &mirror),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Config(m) => (EXIT_CONFIG, "config", m),
                Failure::Data(m) => (EXIT_DATA, "data", m),
                Failure::Runtime(m) => (EXIT_RUNTIME, "runtime", m),
            };
            error!("{kind} error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overrides_nested_keys() {
        let base = ExperimentConfig::desk().to_toml();
        let merged = merge_toml(&base, "generations = 3\n[evolution]\nelitism = 2\n").unwrap();
        let cfg = ExperimentConfig::from_toml(&merged).unwrap();
        assert_eq!(cfg.generations, 3);
        assert_eq!(cfg.evolution.elitism, 2);
        assert_eq!(cfg.evolution.population_size, 32);
    }

    #[test]
    fn gunzip_round_trip() {
        use flate2::{Compression, write::GzEncoder};
        use std::io::Write;
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(b"idx bytes").unwrap();
        assert_eq!(gunzip(&enc.finish().unwrap()).unwrap(), b"idx bytes");
        assert!(gunzip(b"not gzip").is_err());
    }
}
