//! NEAT variation operators: mutation, crossover and compatibility distance.

use rand::Rng;
use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::genome::{ConnectionGene, CppnGenome, NodeGene, NodeId, NodeRole};
use super::innovation::InnovationRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationParams {
    /// Probability that a genome's weights are mutated at all.
    pub weight_rate: f64,
    /// Per-connection probability of replacing instead of perturbing.
    pub weight_replace_rate: f64,
    pub weight_power: f64,
    pub weight_replace_range: f64,
    pub weight_clamp: f64,
    pub add_connection_rate: f64,
    pub add_connection_attempts: usize,
    pub add_node_rate: f64,
    pub activation_rate: f64,
    pub hidden_activations: Vec<Activation>,
    /// Probability a matching gene stays disabled when either parent has it disabled.
    pub disabled_inherit: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            weight_rate: 0.8,
            weight_replace_rate: 0.1,
            weight_power: 0.5,
            weight_replace_range: 1.0,
            weight_clamp: 8.0,
            add_connection_rate: 0.1,
            add_connection_attempts: 20,
            add_node_rate: 0.03,
            activation_rate: 0.05,
            hidden_activations: Activation::ALL.to_vec(),
            disabled_inherit: 0.75,
        }
    }
}

/// Applies each mutation independently with its configured probability.
pub fn mutate<R: Rng + ?Sized>(
    genome: &CppnGenome,
    params: &MutationParams,
    rng: &mut R,
    registry: &mut InnovationRegistry,
) -> CppnGenome {
    let mut g = genome.clone();
    if rng.random_bool(params.weight_rate) {
        mutate_weights(&mut g, params, rng);
    }
    if rng.random_bool(params.add_connection_rate) {
        mutate_add_connection(&mut g, params, rng, registry);
    }
    if rng.random_bool(params.add_node_rate) {
        mutate_add_node(&mut g, params, rng, registry);
    }
    if rng.random_bool(params.activation_rate) {
        mutate_activation(&mut g, params, rng);
    }
    g
}

pub fn mutate_weights<R: Rng + ?Sized>(g: &mut CppnGenome, params: &MutationParams, rng: &mut R) {
    let normal = Normal::new(0.0, params.weight_power).expect("weight power must be finite");
    for c in &mut g.connections {
        if rng.random_bool(params.weight_replace_rate) {
            c.weight = rng.random_range(-params.weight_replace_range..=params.weight_replace_range);
        } else {
            c.weight += normal.sample(rng);
        }
        c.weight = c.weight.clamp(-params.weight_clamp, params.weight_clamp);
    }
}

/// Adds `source -> target` unless it already exists, would close a cycle, or
/// targets an input. Returns whether the genome changed.
pub fn add_connection(
    g: &mut CppnGenome,
    source: NodeId,
    target: NodeId,
    weight: f64,
    registry: &mut InnovationRegistry,
) -> bool {
    let (Some(s), Some(t)) = (g.node(source), g.node(target)) else {
        return false;
    };
    let source_ok = matches!(s.role, NodeRole::Input | NodeRole::Hidden);
    let target_ok = t.role != NodeRole::Input;
    if !source_ok || !target_ok || g.has_connection(source, target) || g.would_create_cycle(source, target)
    {
        return false;
    }
    g.insert_connection(ConnectionGene {
        innovation: registry.link(source, target),
        source,
        target,
        weight,
        enabled: true,
    });
    true
}

pub fn mutate_add_connection<R: Rng + ?Sized>(
    g: &mut CppnGenome,
    params: &MutationParams,
    rng: &mut R,
    registry: &mut InnovationRegistry,
) -> bool {
    let sources: Vec<NodeId> = g
        .nodes
        .iter()
        .filter(|n| matches!(n.role, NodeRole::Input | NodeRole::Hidden))
        .map(|n| n.id)
        .collect();
    let targets: Vec<NodeId> = g
        .nodes
        .iter()
        .filter(|n| n.role != NodeRole::Input)
        .map(|n| n.id)
        .collect();
    for _ in 0..params.add_connection_attempts {
        let s = *sources.choose(rng).expect("inputs exist");
        let t = *targets.choose(rng).expect("outputs exist");
        let w = rng.random_range(-params.weight_replace_range..=params.weight_replace_range);
        if add_connection(g, s, t, w, registry) {
            return true;
        }
    }
    false
}

/// Splits the connection at `index`: `A -> B` becomes `A -> new` (weight 1)
/// and `new -> B` (old weight) with the original disabled.
pub fn split_connection(
    g: &mut CppnGenome,
    index: usize,
    activation: Activation,
    registry: &mut InnovationRegistry,
) -> bool {
    let old = g.connections[index];
    if !old.enabled {
        return false;
    }
    let split = registry.split(old.innovation, old.source, old.target);
    if g.node(split.node).is_some() {
        return false;
    }
    g.connections[index].enabled = false;
    g.insert_node(NodeGene {
        id: split.node,
        role: NodeRole::Hidden,
        activation,
    });
    g.insert_connection(ConnectionGene {
        innovation: split.incoming,
        source: old.source,
        target: split.node,
        weight: 1.0,
        enabled: true,
    });
    g.insert_connection(ConnectionGene {
        innovation: split.outgoing,
        source: split.node,
        target: old.target,
        weight: old.weight,
        enabled: true,
    });
    true
}

pub fn mutate_add_node<R: Rng + ?Sized>(
    g: &mut CppnGenome,
    params: &MutationParams,
    rng: &mut R,
    registry: &mut InnovationRegistry,
) -> bool {
    let enabled: Vec<usize> = (0..g.connections.len())
        .filter(|&i| g.connections[i].enabled)
        .collect();
    let Some(&index) = enabled.choose(rng) else {
        return false;
    };
    let activation = *params
        .hidden_activations
        .choose(rng)
        .unwrap_or(&Activation::BipolarSigmoid);
    split_connection(g, index, activation, registry)
}

pub fn mutate_activation<R: Rng + ?Sized>(g: &mut CppnGenome, params: &MutationParams, rng: &mut R) {
    let hidden: Vec<usize> = (0..g.nodes.len())
        .filter(|&i| g.nodes[i].role == NodeRole::Hidden)
        .collect();
    let Some(&i) = hidden.choose(rng) else {
        return;
    };
    let current = g.nodes[i].activation;
    let choices: Vec<Activation> = params
        .hidden_activations
        .iter()
        .copied()
        .filter(|&a| a != current)
        .collect();
    if let Some(&a) = choices.choose(rng) {
        g.nodes[i].activation = a;
    }
}

/// NEAT crossover. Matching genes take their weight from a random parent;
/// disjoint and excess genes come from `fitter`, so the child's topology is
/// the fitter parent's.
pub fn crossover<R: Rng + ?Sized>(
    fitter: &CppnGenome,
    other: &CppnGenome,
    params: &MutationParams,
    rng: &mut R,
) -> CppnGenome {
    let mut child = fitter.clone();
    let mut j = 0;
    for c in &mut child.connections {
        while j < other.connections.len() && other.connections[j].innovation < c.innovation {
            j += 1;
        }
        let Some(o) = other.connections.get(j).filter(|o| o.innovation == c.innovation) else {
            continue;
        };
        if rng.random_bool(0.5) {
            c.weight = o.weight;
        }
        c.enabled = if !c.enabled || !o.enabled {
            !rng.random_bool(params.disabled_inherit)
        } else {
            true
        };
    }
    for n in &mut child.nodes {
        if n.role == NodeRole::Hidden
            && let Some(o) = other.node(n.id)
            && rng.random_bool(0.5)
        {
            n.activation = o.activation;
        }
    }
    if child.topological_order().is_err() {
        // re-enabling genes the fitter parent had disabled closed a cycle
        for (c, f) in child.connections.iter_mut().zip(&fitter.connections) {
            c.enabled = f.enabled;
        }
    }
    child
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompatibilityCoeffs {
    pub excess: f64,
    pub disjoint: f64,
    pub weight: f64,
    /// Genomes with fewer genes than this are not size-normalized (N = 1).
    pub normalize_above: usize,
}

impl Default for CompatibilityCoeffs {
    fn default() -> Self {
        Self {
            excess: 1.0,
            disjoint: 1.0,
            weight: 0.4,
            normalize_above: 20,
        }
    }
}

/// `c1·E/N + c2·D/N + c3·mean|Δw|` over genes aligned by innovation.
pub fn compatibility_distance(a: &CppnGenome, b: &CppnGenome, coeffs: &CompatibilityCoeffs) -> f64 {
    let (ga, gb) = (&a.connections, &b.connections);
    let (mut i, mut j) = (0, 0);
    let (mut disjoint, mut matching, mut weight_diff) = (0usize, 0usize, 0.0);
    while i < ga.len() && j < gb.len() {
        let (x, y) = (&ga[i], &gb[j]);
        match x.innovation.cmp(&y.innovation) {
            std::cmp::Ordering::Equal => {
                matching += 1;
                weight_diff += (x.weight - y.weight).abs();
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => {
                disjoint += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                disjoint += 1;
                j += 1;
            }
        }
    }
    let excess = (ga.len() - i) + (gb.len() - j);
    let largest = ga.len().max(gb.len());
    let n = if largest < coeffs.normalize_above { 1.0 } else { largest as f64 };
    let mean_diff = if matching > 0 { weight_diff / matching as f64 } else { 0.0 };
    coeffs.excess * excess as f64 / n + coeffs.disjoint * disjoint as f64 / n + coeffs.weight * mean_diff
}
