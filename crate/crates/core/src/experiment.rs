//! The four experimental configurations (dense/LeNet substrate × direct
//! classifier/feature extractor), run orchestration, final testing and
//! plot-data aggregation.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backprop::{HeadNetwork, TrainConfig, TrainError, predict, train_head};
use crate::cppn::{CppnGenome, InnovationRegistry};
use crate::evolution::{
    Champion, Evaluation, EvolutionError, EvolutionParams, Evaluator, Population,
    checkpoint_text, evolve_generation,
};
use crate::metrics::{FitnessForm, FitnessReport, MetricsError, Scores, fitness_score};
use crate::mnist::{DataError, Image, Mnist, Split, SubsetIndices, disjoint_sample, sample_balanced};
use crate::network::RuntimeError;
use crate::substrate::{
    CompiledNetwork, LENET5_CUT, SubstrateError, SubstrateSpec, TRADITIONAL_CUT, compile,
    lenet5_substrate, traditional_substrate,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Parse(String),
}

impl ExperimentError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DenseDirect,
    DenseFeature,
    CnnDirect,
    CnnFeature,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::DenseDirect, Mode::DenseFeature, Mode::CnnDirect, Mode::CnnFeature];

    pub fn name(self) -> &'static str {
        match self {
            Mode::DenseDirect => "dense-direct",
            Mode::DenseFeature => "dense-feature",
            Mode::CnnDirect => "cnn-direct",
            Mode::CnnFeature => "cnn-feature",
        }
    }

    pub fn is_feature(self) -> bool {
        matches!(self, Mode::DenseFeature | Mode::CnnFeature)
    }

    /// The full substrate of this mode's architecture, uncut.
    pub fn full_substrate(self) -> SubstrateSpec {
        match self {
            Mode::DenseDirect | Mode::DenseFeature => traditional_substrate(),
            Mode::CnnDirect | Mode::CnnFeature => lenet5_substrate(),
        }
    }

    /// Substrate actually compiled for each genome: cut for feature modes.
    pub fn substrate(self) -> SubstrateSpec {
        let full = self.full_substrate();
        match self {
            Mode::DenseFeature => full.with_cut(TRADITIONAL_CUT).expect("valid cut"),
            Mode::CnnFeature => full.with_cut(LENET5_CUT).expect("valid cut"),
            _ => full,
        }
    }

    /// Layer sizes of the backprop head: the substrate's layers from the cut on.
    pub fn head_sizes(self) -> Option<Vec<usize>> {
        let cut = match self {
            Mode::DenseFeature => TRADITIONAL_CUT,
            Mode::CnnFeature => LENET5_CUT,
            _ => return None,
        };
        Some(self.full_substrate().layers[cut..].iter().map(|l| l.nodes()).collect())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected dense-direct, dense-feature, cnn-direct or cnn-feature)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub generations: usize,
    /// Images per class in the fitness training subset.
    pub train_per_class: usize,
    /// Images per class in the held-out validation subset (feature modes).
    pub validation_per_class: usize,
    /// Write a checkpoint every this many generations; 0 disables.
    pub checkpoint_interval: usize,
    /// Also test each generation's best genome on the test set.
    pub test_every_generation: bool,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub fitness: FitnessForm,
    pub train: TrainConfig,
    pub evolution: EvolutionParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::CnnFeature,
            seeds: vec![1],
            generations: 2500,
            train_per_class: 30,
            validation_per_class: 100,
            checkpoint_interval: 100,
            test_every_generation: false,
            data_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("runs"),
            fitness: FitnessForm::default(),
            train: TrainConfig::default(),
            evolution: EvolutionParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Small preset that finishes on a desktop.
    pub fn desk() -> Self {
        let mut cfg = Self {
            generations: 30,
            train_per_class: 10,
            validation_per_class: 30,
            checkpoint_interval: 10,
            ..Self::default()
        };
        cfg.evolution.population_size = 32;
        cfg.evolution.target_species = Some(4);
        cfg.train.epochs = 50;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "default" | "full" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            _ => Err(ExperimentError::Config(format!("unknown preset `{name}` (expected full or desk)"))),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if self.train_per_class == 0 {
            return bad("train_per_class must be at least 1");
        }
        if self.mode.is_feature() && self.validation_per_class == 0 {
            return bad("feature modes need validation_per_class of at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.evolution.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Directory of one run's artifacts.
    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!("{}-seed{seed}", self.mode))
    }
}

/// Independent RNG streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sampling = 1,
    Initial = 2,
    Generation = 3,
    Head = 4,
    FinalHead = 5,
}

/// Stream `index` of `purpose` under the run seed.
pub fn stream_rng(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | index);
    rng
}

/// Fitness subsets drawn once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsets {
    pub train: SubsetIndices,
    /// Empty in direct modes.
    pub validation: SubsetIndices,
}

pub fn draw_subsets(cfg: &ExperimentConfig, data: &Mnist, seed: u64) -> Result<Subsets, ExperimentError> {
    let mut rng = stream_rng(seed, Stream::Sampling, 0);
    let train = sample_balanced(&data.train.labels, cfg.train_per_class, &mut rng)?;
    let validation = if cfg.mode.is_feature() {
        disjoint_sample(&data.train.labels, cfg.validation_per_class, &train, &mut rng)?
    } else {
        SubsetIndices::default()
    };
    assert!(train.is_disjoint(&validation), "fitness subsets overlap");
    Ok(Subsets { train, validation })
}

fn gather<'a>(split: &'a Split, idx: &SubsetIndices) -> (Vec<&'a Image>, Vec<usize>) {
    idx.indices
        .iter()
        .map(|&i| (split.images.get(i), split.labels.get(i)))
        .unzip()
}

/// Genome → fitness for one run.
pub struct FitnessEvaluator<'a> {
    mode: Mode,
    spec: SubstrateSpec,
    form: FitnessForm,
    train_cfg: TrainConfig,
    head_seed: u64,
    train_images: Vec<&'a Image>,
    train_labels: Vec<usize>,
    val_images: Vec<&'a Image>,
    val_labels: Vec<usize>,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(cfg: &ExperimentConfig, data: &'a Mnist, subsets: &Subsets, seed: u64) -> Self {
        let (train_images, train_labels) = gather(&data.train, &subsets.train);
        let (val_images, val_labels) = gather(&data.train, &subsets.validation);
        Self {
            mode: cfg.mode,
            spec: cfg.mode.substrate(),
            form: cfg.fitness,
            train_cfg: cfg.train.clone(),
            head_seed: seed,
            train_images,
            train_labels,
            val_images,
            val_labels,
        }
    }

    pub fn report(&self, genome: &CppnGenome) -> Result<FitnessReport, ExperimentError> {
        let net = compile(&self.spec, genome)?;
        if !self.mode.is_feature() {
            let out: Vec<(Scores, usize)> = self
                .train_images
                .iter()
                .map(|img| net.classify(img.as_slice()))
                .collect::<Result<_, _>>()?;
            let (scores, preds): (Vec<Scores>, Vec<usize>) = out.into_iter().unzip();
            return Ok(fitness_score(&scores, &preds, &self.train_labels, self.form)?);
        }
        let features = |imgs: &[&Image]| -> Result<Vec<Vec<f64>>, RuntimeError> {
            imgs.iter().map(|img| net.extract_features(img.as_slice())).collect()
        };
        let train_features = features(&self.train_images)?;
        let val_features = features(&self.val_images)?;
        let mut rng = stream_rng(self.head_seed, Stream::Head, 0);
        let sizes = self.mode.head_sizes().unwrap();
        let head = train_head(&train_features, &self.train_labels, &sizes, &self.train_cfg, &mut rng)?;
        let (scores, preds) = predict_all(&head, &val_features)?;
        Ok(fitness_score(&scores, &preds, &self.val_labels, self.form)?)
    }
}

impl Evaluator for FitnessEvaluator<'_> {
    fn evaluate(&self, genome: &CppnGenome) -> Result<Evaluation, String> {
        self.report(genome)
            .map(|r| Evaluation {
                fitness: r.fitness,
                accuracy: Some(r.accuracy),
            })
            .map_err(|e| e.to_string())
    }
}

fn predict_all(head: &HeadNetwork, features: &[Vec<f64>]) -> Result<(Vec<Scores>, Vec<usize>), TrainError> {
    let out: Vec<(Scores, usize)> = features
        .par_iter()
        .map(|f| predict(head, f))
        .collect::<Result<_, _>>()?;
    Ok(out.into_iter().unzip())
}

/// One generation's CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species_count: usize,
    pub champion_fitness: f64,
    /// Fitness-set accuracy of the best-ever champion.
    pub champion_accuracy: Option<f64>,
    /// Test accuracy of this generation's best genome, when enabled.
    pub test_accuracy: Option<f64>,
}

pub const GENERATION_CSV_HEADER: &str =
    "generation,best_fitness,mean_fitness,species_count,champion_fitness,champion_accuracy,test_accuracy";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl GenerationRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.generation,
            self.best_fitness,
            self.mean_fitness,
            self.species_count,
            self.champion_fitness,
            opt(self.champion_accuracy),
            opt(self.test_accuracy)
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 7 {
            return Err(format!("expected 7 fields, got {}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer `{s}`"));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        Ok(Self {
            generation: int(f[0])?,
            best_fitness: num(f[1])?,
            mean_fitness: num(f[2])?,
            species_count: int(f[3])?,
            champion_fitness: num(f[4])?,
            champion_accuracy: opt(f[5])?,
            test_accuracy: opt(f[6])?,
        })
    }
}

pub fn generation_csv(rows: &[GenerationRow]) -> String {
    let mut s = format!("{GENERATION_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn parse_generation_csv(text: &str) -> Result<Vec<GenerationRow>, ExperimentError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == GENERATION_CSV_HEADER => {}
        _ => return Err(ExperimentError::Parse("missing generation CSV header".into())),
    }
    lines
        .map(|(n, l)| GenerationRow::from_csv(l).map_err(|e| ExperimentError::Parse(format!("line {}: {e}", n + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalTest {
    pub accuracy: f64,
    pub report: FitnessReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub rows: Vec<GenerationRow>,
    pub champion: Champion,
    pub final_test: FinalTest,
    /// Head retrained for the final test (feature modes).
    pub final_head: Option<HeadNetwork>,
}

/// Tests a genome on the test set. Feature modes first train a fresh head
/// on features of the whole training split.
pub fn final_test(
    genome: &CppnGenome,
    cfg: &ExperimentConfig,
    data: &Mnist,
    seed: u64,
) -> Result<(FinalTest, Option<HeadNetwork>), ExperimentError> {
    let net = compile(&cfg.mode.substrate(), genome)?;
    let test_labels: Vec<usize> = (0..data.test.len()).map(|i| data.test.labels.get(i)).collect();
    let (scores, preds, head) = if cfg.mode.is_feature() {
        let train_features = extract_split(&net, &data.train)?;
        let train_labels: Vec<usize> = (0..data.train.len()).map(|i| data.train.labels.get(i)).collect();
        let mut rng = stream_rng(seed, Stream::FinalHead, 0);
        let sizes = cfg.mode.head_sizes().unwrap();
        let head = train_head(&train_features, &train_labels, &sizes, &cfg.train, &mut rng)?;
        drop(train_features);
        let test_features = extract_split(&net, &data.test)?;
        let (s, p) = predict_all(&head, &test_features)?;
        (s, p, Some(head))
    } else {
        let out = net.classify_batch(data.test.images.iter().collect::<Vec<_>>().into_par_iter().map(|i| i.as_slice()))?;
        let (s, p) = out.into_iter().unzip();
        (s, p, None)
    };
    let report = fitness_score(&scores, &preds, &test_labels, cfg.fitness)?;
    Ok((
        FinalTest {
            accuracy: report.accuracy,
            report,
        },
        head,
    ))
}

fn extract_split(net: &CompiledNetwork, split: &Split) -> Result<Vec<Vec<f64>>, RuntimeError> {
    let images: Vec<&Image> = split.images.iter().collect();
    net.extract_batch(images.into_par_iter().map(|i| i.as_slice()))
}

/// Test accuracy of a genome, without retraining anything for direct modes.
fn direct_test_accuracy(genome: &CppnGenome, mode: Mode, data: &Mnist) -> Result<f64, ExperimentError> {
    let net = compile(&mode.substrate(), genome)?;
    let images: Vec<&Image> = data.test.images.iter().collect();
    let out = net.classify_batch(images.into_par_iter().map(|i| i.as_slice()))?;
    let correct = out
        .iter()
        .enumerate()
        .filter(|(i, (_, p))| *p == data.test.labels.get(*i))
        .count();
    Ok(correct as f64 / data.test.len() as f64)
}

fn write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| ExperimentError::io(path, e))
}

/// Appends a line, creating the file if needed.
fn append(path: &Path, line: &str) -> Result<(), ExperimentError> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ExperimentError::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| ExperimentError::io(path, e))
}

/// Final test summary as `key = value` text.
pub fn final_test_text(mode: Mode, seed: u64, champion: &Champion, test: &FinalTest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode = \"{mode}\"");
    let _ = writeln!(s, "seed = {seed}");
    let _ = writeln!(s, "champion_generation = {}", champion.generation);
    let _ = writeln!(s, "champion_fitness = {}", champion.fitness);
    let _ = writeln!(s, "test_accuracy = {}", test.accuracy);
    let _ = writeln!(s, "test_fitness = {}", test.report.fitness);
    let _ = writeln!(s, "test_mse = {}", test.report.mse);
    s.push_str("confusion = [\n");
    for row in &test.report.confusion {
        let r: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "  [{}],", r.join(", "));
    }
    s.push_str("]\n");
    s
}

/// Runs evolution for one seed, then final-tests the best-ever champion.
///
/// With `out` set, writes into it `config.toml`, `generations.csv` (appended
/// as generations finish), `checkpoints/gen-NNNNN.txt`, `champion.txt`,
/// `final.toml` and, for feature modes, `head.txt`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Mnist,
    out: Option<&Path>,
) -> Result<RunRecord, ExperimentError> {
    cfg.validate()?;
    let mut run_cfg = cfg.clone();
    run_cfg.seeds = vec![seed];
    let csv_path = out.map(|d| d.join("generations.csv"));
    if let Some(dir) = out {
        write(&dir.join("config.toml"), &run_cfg.to_toml())?;
        write(csv_path.as_ref().unwrap(), &format!("{GENERATION_CSV_HEADER}\n"))?;
    }

    let subsets = draw_subsets(cfg, data, seed)?;
    let evaluator = FitnessEvaluator::new(cfg, data, &subsets, seed);
    let mut registry = InnovationRegistry::new();
    let mut pop = Population::new(&cfg.evolution, &mut stream_rng(seed, Stream::Initial, 0))?;
    let mut rows = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let mut rng = stream_rng(seed, Stream::Generation, generation as u64);
        let (next, stats) = evolve_generation(pop, &evaluator, &cfg.evolution, &mut rng, &mut registry)?;
        pop = next;
        let test_accuracy = if cfg.test_every_generation {
            Some(if cfg.mode.is_feature() {
                final_test(&stats.best_genome, cfg, data, seed)?.0.accuracy
            } else {
                direct_test_accuracy(&stats.best_genome, cfg.mode, data)?
            })
        } else {
            None
        };
        let row = GenerationRow {
            generation,
            best_fitness: stats.best_fitness,
            mean_fitness: stats.mean_fitness,
            species_count: stats.species_count,
            champion_fitness: stats.champion_fitness,
            champion_accuracy: pop.champion.as_ref().and_then(|c| c.accuracy),
            test_accuracy,
        };
        info!(
            "{} seed {seed} gen {generation}: best {:.4} mean {:.4} species {} champion {:.4}",
            cfg.mode, row.best_fitness, row.mean_fitness, row.species_count, row.champion_fitness
        );
        if let Some(path) = &csv_path {
            append(path, &row.to_csv())?;
        }
        rows.push(row);
        if let Some(dir) = out
            && cfg.checkpoint_interval > 0
            && (generation + 1) % cfg.checkpoint_interval == 0
        {
            let path = dir.join("checkpoints").join(format!("gen-{:05}.txt", generation + 1));
            write(&path, &checkpoint_text(&pop, &registry))?;
        }
    }

    let champion = pop.champion.clone().expect("at least one generation ran");
    let (test, head) = final_test(&champion.genome, cfg, data, seed)?;
    info!("{} seed {seed}: champion test accuracy {:.4}", cfg.mode, test.accuracy);
    if let Some(dir) = out {
        write(&dir.join("champion.txt"), &champion.genome.to_text())?;
        write(&dir.join("final.toml"), &final_test_text(cfg.mode, seed, &champion, &test))?;
        if let Some(h) = &head {
            write(&dir.join("head.txt"), &h.to_text())?;
        }
    }
    Ok(RunRecord {
        seed,
        config: run_cfg,
        rows,
        champion,
        final_test: test,
        final_head: head,
    })
}

pub const PLOT_CSV_HEADER: &str = "generation,runs,mean_best_fitness,std_best_fitness,mean_champion_fitness,std_champion_fitness";

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-generation mean and (population) standard deviation of best and
/// champion fitness across runs. Runs of different length contribute to the
/// generations they reached.
pub fn emit_plots(runs: &[Vec<GenerationRow>]) -> Result<String, ExperimentError> {
    if runs.is_empty() || runs.iter().all(Vec::is_empty) {
        return Err(ExperimentError::Parse("no runs to aggregate".into()));
    }
    let longest = runs.iter().map(Vec::len).max().unwrap();
    let mut s = format!("{PLOT_CSV_HEADER}\n");
    for g in 0..longest {
        let rows: Vec<&GenerationRow> = runs.iter().filter_map(|r| r.get(g)).collect();
        let best: Vec<f64> = rows.iter().map(|r| r.best_fitness).collect();
        let champ: Vec<f64> = rows.iter().map(|r| r.champion_fitness).collect();
        let (mb, sb) = mean_std(&best);
        let (mc, sc) = mean_std(&champ);
        let _ = writeln!(s, "{g},{},{mb},{sb},{mc},{sc}", rows.len());
    }
    Ok(s)
}

/// Feature CSV (`index,label,f0..`) of the first `limit` images of `split`.
pub fn dump_features(
    genome: &CppnGenome,
    mode: Mode,
    split: &Split,
    limit: usize,
) -> Result<String, ExperimentError> {
    if !mode.is_feature() {
        return Err(ExperimentError::Config(format!("{mode} is not a feature mode")));
    }
    let net = compile(&mode.substrate(), genome)?;
    let n = limit.min(split.len());
    let images: Vec<&Image> = split.images.iter().take(n).collect();
    let features = net.extract_batch(images.into_par_iter().map(|i| i.as_slice()))?;
    let width = features.first().map_or(0, Vec::len);
    let mut s = String::from("index,label");
    for k in 0..width {
        let _ = write!(s, ",f{k}");
    }
    s.push('\n');
    for (i, f) in features.iter().enumerate() {
        let _ = write!(s, "{i},{}", split.labels.get(i));
        for v in f {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    Ok(s)
}
