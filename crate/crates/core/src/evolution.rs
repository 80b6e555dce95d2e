//! Generational NEAT loop over CPPN genomes.
//!
//! One generation: evaluate every genome (in parallel), update the champion,
//! speciate against last generation's representatives, drop stale species,
//! share offspring between species by mean fitness and breed the next
//! population. All randomness comes from the caller's RNG and is consumed on
//! the orchestrating thread only, so results do not depend on thread count.

use std::fmt::Write as _;

use log::warn;
use rand::Rng;
use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::{
    CompatibilityCoeffs, CppnGenome, GenomeError, InnovationRegistry, MutationParams,
    compatibility_distance, crossover, mutate, seed_genome,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution params: {0}")]
    Params(String),
    #[error("checkpoint line {0}: {1}")]
    Checkpoint(usize, String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    pub population_size: usize,
    pub compatibility: CompatibilityCoeffs,
    /// Starting compatibility threshold.
    pub compatibility_threshold: f64,
    /// Steer the threshold toward this many species; `None` keeps it fixed.
    pub target_species: Option<usize>,
    pub threshold_step: f64,
    pub threshold_min: f64,
    /// Best members of each species copied unchanged.
    pub elitism: usize,
    /// Fraction of each species (best first) allowed to reproduce.
    pub survival_fraction: f64,
    pub interspecies_rate: f64,
    /// Probability an offspring is a mutated clone instead of a crossover child.
    pub asexual_rate: f64,
    /// Generations without improvement before a species is removed.
    pub stale_cutoff: usize,
    /// Fitness assigned when evaluation fails.
    pub failure_fitness: f64,
    pub mutation: MutationParams,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            population_size: 256,
            compatibility: CompatibilityCoeffs::default(),
            compatibility_threshold: 3.0,
            target_species: Some(16),
            threshold_step: 0.1,
            threshold_min: 0.1,
            elitism: 1,
            survival_fraction: 0.2,
            interspecies_rate: 0.001,
            asexual_rate: 0.25,
            stale_cutoff: 15,
            failure_fitness: 0.0,
            mutation: MutationParams::default(),
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), EvolutionError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(EvolutionError::Params(format!("{name} must be in [0, 1], got {p}")))
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::Params(m.into()));
        if self.population_size < 2 {
            return bad("population size must be at least 2");
        }
        if !(self.survival_fraction > 0.0 && self.survival_fraction <= 1.0) {
            return bad("survival fraction must be in (0, 1]");
        }
        if self.compatibility_threshold.is_nan() || self.compatibility_threshold <= 0.0 {
            return bad("compatibility threshold must be positive");
        }
        if self.target_species == Some(0) {
            return bad("target species count must be at least 1");
        }
        if !(self.threshold_step >= 0.0 && self.threshold_min > 0.0) {
            return bad("threshold step must be non-negative and threshold minimum positive");
        }
        if !(self.failure_fitness >= 0.0 && self.failure_fitness.is_finite()) {
            return bad("failure fitness must be finite and non-negative");
        }
        let m = &self.mutation;
        for (name, p) in [
            ("interspecies_rate", self.interspecies_rate),
            ("asexual_rate", self.asexual_rate),
            ("weight_rate", m.weight_rate),
            ("weight_replace_rate", m.weight_replace_rate),
            ("add_connection_rate", m.add_connection_rate),
            ("add_node_rate", m.add_node_rate),
            ("activation_rate", m.activation_rate),
            ("disabled_inherit", m.disabled_inherit),
        ] {
            probability(name, p)?;
        }
        if m.hidden_activations.is_empty() {
            return bad("hidden activation set is empty");
        }
        Ok(())
    }
}

/// What an evaluator reports for one genome.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Evaluation {
    /// Finite and non-negative.
    pub fitness: f64,
    /// Classification accuracy, when the evaluator measures one.
    pub accuracy: Option<f64>,
}

impl From<f64> for Evaluation {
    fn from(fitness: f64) -> Self {
        Self { fitness, accuracy: None }
    }
}

/// A pure genome → fitness function. Called concurrently.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &CppnGenome) -> Result<Evaluation, String>;
}

impl<F, E> Evaluator for F
where
    F: Fn(&CppnGenome) -> Result<E, String> + Sync,
    E: Into<Evaluation>,
{
    fn evaluate(&self, genome: &CppnGenome) -> Result<Evaluation, String> {
        self(genome).map(Into::into)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: usize,
    pub representative: CppnGenome,
    /// Indices into the population's genomes.
    pub members: Vec<usize>,
    /// Best member fitness seen so far.
    pub best_fitness: f64,
    /// Generations since `best_fitness` last improved.
    pub staleness: usize,
}

impl Species {
    /// Shared (adjusted) fitness of a member: raw fitness over species size.
    pub fn shared_fitness(&self, raw: f64) -> f64 {
        raw / self.members.len() as f64
    }

    /// Sum of shared fitnesses, i.e. the mean raw fitness.
    pub fn mean_fitness(&self, fitness: &[f64]) -> f64 {
        self.members.iter().map(|&i| self.shared_fitness(fitness[i])).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Champion {
    pub genome: CppnGenome,
    pub fitness: f64,
    pub accuracy: Option<f64>,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub genomes: Vec<CppnGenome>,
    /// Filled in by evaluation; `None` for a freshly bred generation.
    pub evaluations: Vec<Option<Evaluation>>,
    pub species: Vec<Species>,
    pub generation: usize,
    pub champion: Option<Champion>,
    pub threshold: f64,
    pub next_species_id: usize,
}

/// Per-generation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species_count: usize,
    /// Accuracy of this generation's best genome, when measured.
    pub best_accuracy: Option<f64>,
    pub champion_fitness: f64,
    pub champion_improved: bool,
    pub threshold: f64,
    pub failures: usize,
    /// This generation's best genome.
    pub best_genome: CppnGenome,
}

impl Population {
    /// Seed genomes with independent random weights.
    pub fn new<R: Rng + ?Sized>(params: &EvolutionParams, rng: &mut R) -> Result<Self, EvolutionError> {
        params.validate()?;
        let genomes: Vec<CppnGenome> = (0..params.population_size).map(|_| seed_genome(rng)).collect();
        Ok(Self {
            evaluations: vec![None; genomes.len()],
            genomes,
            species: Vec::new(),
            generation: 0,
            champion: None,
            threshold: params.compatibility_threshold,
            next_species_id: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    pub fn fitness(&self) -> Vec<Option<f64>> {
        self.evaluations.iter().map(|e| e.map(|e| e.fitness)).collect()
    }

    /// Evaluates every genome. Failures and invalid fitness values get
    /// `failure_fitness`; returns the number of failures.
    pub fn evaluate<E: Evaluator + ?Sized>(&mut self, evaluator: &E, params: &EvolutionParams) -> usize {
        let results: Vec<Result<Evaluation, String>> =
            self.genomes.par_iter().map(|g| evaluator.evaluate(g)).collect();
        let mut failures = 0;
        for (i, r) in results.into_iter().enumerate() {
            let eval = match r {
                Ok(e) if e.fitness.is_finite() && e.fitness >= 0.0 => e,
                Ok(e) => {
                    warn!("generation {} genome {i}: invalid fitness {}", self.generation, e.fitness);
                    failures += 1;
                    params.failure_fitness.into()
                }
                Err(msg) => {
                    warn!("generation {} genome {i}: evaluation failed: {msg}", self.generation);
                    failures += 1;
                    params.failure_fitness.into()
                }
            };
            self.evaluations[i] = Some(eval);
        }
        failures
    }
}

/// Assigns each genome to the first species whose representative is within
/// the population's threshold, founding new species as needed. Species left
/// without members are dropped.
pub fn speciate(pop: &mut Population, params: &EvolutionParams) {
    for s in &mut pop.species {
        s.members.clear();
    }
    for (i, g) in pop.genomes.iter().enumerate() {
        let found = pop.species.iter_mut().find(|s| {
            compatibility_distance(&s.representative, g, &params.compatibility) <= pop.threshold
        });
        match found {
            Some(s) => s.members.push(i),
            None => {
                pop.species.push(Species {
                    id: pop.next_species_id,
                    representative: g.clone(),
                    members: vec![i],
                    best_fitness: f64::NEG_INFINITY,
                    staleness: 0,
                });
                pop.next_species_id += 1;
            }
        }
    }
    pop.species.retain(|s| !s.members.is_empty());
}

/// Splits `total` offspring in proportion to `shares` by the largest
/// remainder method; remainder ties go to the lower index. Equal shares are
/// used when all shares are zero.
pub fn allocate_offspring(shares: &[f64], total: usize) -> Vec<usize> {
    if shares.is_empty() {
        return Vec::new();
    }
    let sum: f64 = shares.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        shares.iter().map(|s| s / sum * total as f64).collect()
    } else {
        vec![total as f64 / shares.len() as f64; shares.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn adjust_threshold(pop: &mut Population, params: &EvolutionParams) {
    if let Some(target) = params.target_species {
        let n = pop.species.len();
        if n < target {
            pop.threshold = (pop.threshold - params.threshold_step).max(params.threshold_min);
        } else if n > target {
            pop.threshold += params.threshold_step;
        }
    }
}

/// Members sorted best first; ties keep population order.
fn ranked(members: &[usize], fitness: &[f64]) -> Vec<usize> {
    let mut m = members.to_vec();
    m.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    m
}

/// Evaluates `pop`, then breeds and returns the next generation along with
/// the statistics of the evaluated one.
pub fn evolve_generation<E, R>(
    mut pop: Population,
    evaluator: &E,
    params: &EvolutionParams,
    rng: &mut R,
    registry: &mut InnovationRegistry,
) -> Result<(Population, GenerationStats), EvolutionError>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
{
    params.validate()?;
    if pop.len() != params.population_size {
        return Err(EvolutionError::Params(format!(
            "population holds {} genomes, params say {}",
            pop.len(),
            params.population_size
        )));
    }
    let failures = pop.evaluate(evaluator, params);
    let evals: Vec<Evaluation> = pop.evaluations.iter().map(|e| e.unwrap()).collect();
    let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();

    let best = ranked(&(0..pop.len()).collect::<Vec<_>>(), &fitness)[0];
    let improved = pop.champion.as_ref().is_none_or(|c| fitness[best] > c.fitness);
    if improved {
        pop.champion = Some(Champion {
            genome: pop.genomes[best].clone(),
            fitness: fitness[best],
            accuracy: evals[best].accuracy,
            generation: pop.generation,
        });
    }

    speciate(&mut pop, params);
    for s in &mut pop.species {
        let top = s.members.iter().map(|&i| fitness[i]).fold(f64::NEG_INFINITY, f64::max);
        if top > s.best_fitness {
            s.best_fitness = top;
            s.staleness = 0;
        } else {
            s.staleness += 1;
        }
    }
    let species_count = pop.species.len();
    let stats = GenerationStats {
        generation: pop.generation,
        best_fitness: fitness[best],
        mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
        species_count,
        best_accuracy: evals[best].accuracy,
        champion_fitness: pop.champion.as_ref().unwrap().fitness,
        champion_improved: improved,
        threshold: pop.threshold,
        failures,
        best_genome: pop.genomes[best].clone(),
    };
    adjust_threshold(&mut pop, params);

    // stale species go, except the one holding the best current genome
    let best_species = pop.species.iter().position(|s| s.members.contains(&best)).unwrap();
    let mut idx = 0;
    pop.species.retain(|s| {
        let keep = idx == best_species || s.staleness < params.stale_cutoff;
        idx += 1;
        keep
    });

    let shares: Vec<f64> = pop.species.iter().map(|s| s.mean_fitness(&fitness)).collect();
    let counts = allocate_offspring(&shares, params.population_size);
    let ranks: Vec<Vec<usize>> = pop.species.iter().map(|s| ranked(&s.members, &fitness)).collect();
    let survivors: Vec<&[usize]> = ranks
        .iter()
        .map(|r| {
            let n = ((r.len() as f64 * params.survival_fraction).ceil() as usize).clamp(1, r.len());
            &r[..n]
        })
        .collect();

    let mut next = Vec::with_capacity(params.population_size);
    for (si, &count) in counts.iter().enumerate() {
        let elites = params.elitism.min(count).min(ranks[si].len());
        next.extend(ranks[si][..elites].iter().map(|&i| pop.genomes[i].clone()));
        let pool = survivors[si];
        for _ in elites..count {
            let a = *pool.choose(rng).unwrap();
            let child = if pool.len() == 1 && pop.species.len() == 1 || rng.random_bool(params.asexual_rate) {
                pop.genomes[a].clone()
            } else {
                let b = if pop.species.len() > 1 && rng.random_bool(params.interspecies_rate) {
                    let other = rng.random_range(0..pop.species.len() - 1);
                    let other = if other >= si { other + 1 } else { other };
                    *survivors[other].choose(rng).unwrap()
                } else {
                    *pool.choose(rng).unwrap()
                };
                let (fitter, weaker) = if fitness[b] > fitness[a] { (b, a) } else { (a, b) };
                crossover(&pop.genomes[fitter], &pop.genomes[weaker], &params.mutation, rng)
            };
            next.push(mutate(&child, &params.mutation, rng, registry));
        }
    }
    debug_assert_eq!(next.len(), params.population_size);

    // representatives for the next round are drawn from this round's members
    for s in &mut pop.species {
        let r = *s.members.choose(rng).unwrap();
        s.representative = pop.genomes[r].clone();
        s.members.clear();
    }
    let next_pop = Population {
        evaluations: vec![None; next.len()],
        genomes: next,
        species: pop.species,
        generation: pop.generation + 1,
        champion: pop.champion,
        threshold: pop.threshold,
        next_species_id: pop.next_species_id,
    };
    Ok((next_pop, stats))
}

/// Text checkpoint of a bred (not yet evaluated) population and the
/// innovation registry.
pub fn checkpoint_text(pop: &Population, registry: &InnovationRegistry) -> String {
    let mut s = String::from("population 1\n");
    let _ = writeln!(s, "generation {}", pop.generation);
    let _ = writeln!(s, "threshold {}", pop.threshold);
    let _ = writeln!(s, "next-species {}", pop.next_species_id);
    match &pop.champion {
        Some(c) => {
            let acc = c.accuracy.map_or("none".to_string(), |a| a.to_string());
            let _ = writeln!(s, "champion {} {} {}", c.fitness, acc, c.generation);
            s.push_str(&c.genome.to_text());
        }
        None => s.push_str("champion none\n"),
    }
    let _ = writeln!(s, "species {}", pop.species.len());
    for sp in &pop.species {
        let _ = writeln!(s, "species-entry {} {} {}", sp.id, sp.best_fitness, sp.staleness);
        s.push_str(&sp.representative.to_text());
    }
    let _ = writeln!(s, "genomes {}", pop.genomes.len());
    for g in &pop.genomes {
        s.push_str(&g.to_text());
    }
    s.push_str(&registry.to_text());
    s
}

type Lines<'a> = dyn Iterator<Item = (usize, &'a str)> + 'a;

fn header(key: &str, lines: &mut Lines<'_>) -> Result<(usize, Vec<String>), EvolutionError> {
    let (n, line) = lines
        .next()
        .ok_or_else(|| EvolutionError::Checkpoint(0, "truncated checkpoint".into()))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(EvolutionError::Checkpoint(n + 1, format!("expected `{key}`")));
    }
    Ok((n, parts.map(str::to_string).collect()))
}

fn num<T: std::str::FromStr>(n: usize, v: Option<&String>) -> Result<T, EvolutionError> {
    v.and_then(|v| v.parse().ok())
        .ok_or_else(|| EvolutionError::Checkpoint(n + 1, "bad number".into()))
}

fn genome_block(lines: &mut Lines<'_>) -> Result<CppnGenome, EvolutionError> {
    Ok(CppnGenome::parse_text(lines)?.0)
}

pub fn parse_checkpoint(text: &str) -> Result<(Population, InnovationRegistry), EvolutionError> {
    let mut filtered = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let lines: &mut Lines<'_> = &mut filtered;
    let (n, v) = header("population", lines)?;
    if v != ["1"] {
        return Err(EvolutionError::Checkpoint(n + 1, "unsupported checkpoint version".into()));
    }
    let (n, v) = header("generation", lines)?;
    let generation: usize = num(n, v.first())?;
    let (n, v) = header("threshold", lines)?;
    let threshold: f64 = num(n, v.first())?;
    let (n, v) = header("next-species", lines)?;
    let next_species_id: usize = num(n, v.first())?;
    let (n, champ) = header("champion", lines)?;
    let champion = if champ.first().map(String::as_str) == Some("none") {
        None
    } else {
        let fitness: f64 = num(n, champ.first())?;
        let accuracy = match champ.get(1).map(String::as_str) {
            Some("none") => None,
            _ => Some(num(n, champ.get(1))?),
        };
        let generation: usize = num(n, champ.get(2))?;
        Some(Champion {
            genome: genome_block(lines)?,
            fitness,
            accuracy,
            generation,
        })
    };
    let (n, v) = header("species", lines)?;
    let species_count: usize = num(n, v.first())?;
    let mut species = Vec::with_capacity(species_count);
    for _ in 0..species_count {
        let (n, v) = header("species-entry", lines)?;
        species.push(Species {
            id: num(n, v.first())?,
            best_fitness: num(n, v.get(1))?,
            staleness: num(n, v.get(2))?,
            representative: genome_block(lines)?,
            members: Vec::new(),
        });
    }
    let (n, v) = header("genomes", lines)?;
    let count: usize = num(n, v.first())?;
    let genomes = (0..count)
        .map(|_| genome_block(lines))
        .collect::<Result<Vec<_>, _>>()?;
    let (registry, _) =
        InnovationRegistry::parse_text(lines).map_err(|m| EvolutionError::Checkpoint(0, m))?;
    Ok((
        Population {
            evaluations: vec![None; genomes.len()],
            genomes,
            species,
            generation,
            champion,
            threshold,
            next_species_id,
        },
        registry,
    ))
}
