//! Compositional pattern producing networks: the genome that encodes
//! substrate weights and link expression as a function of node geometry.

mod activation;
mod genome;
mod innovation;
mod variation;

use thiserror::Error;

pub use activation::{Activation, bipolar_sigmoid};
pub use genome::{
    BIAS_INPUT, ConnectionGene, Coords, Cppn, CppnGenome, FIRST_FREE_NODE, INPUT_COUNT, Innovation,
    LEO_OUTPUT, LOCALITY_X, LOCALITY_Y, NodeGene, NodeId, NodeRole, WEIGHT_OUTPUT, evaluate_cppn,
    seed_genome,
};
pub use innovation::{InnovationRegistry, Split};
pub use variation::{
    CompatibilityCoeffs, MutationParams, add_connection, compatibility_distance, crossover, mutate,
    mutate_activation, mutate_add_connection, mutate_add_node, mutate_weights, split_connection,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("enabled connections form a cycle")]
    Cycle,
    #[error("expected exactly one {0} node, found {1}")]
    Outputs(&'static str, usize),
    #[error("input nodes must be ids 0..9 with linear activation")]
    BadInputs,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate innovation number {0}")]
    DuplicateInnovation(Innovation),
    #[error("connection {0} references unknown node {1}")]
    UnknownNode(Innovation, NodeId),
    #[error("connection {0} is a self-loop")]
    SelfLoop(Innovation),
    #[error("connection {0} targets an input node")]
    InputTarget(Innovation),
    #[error("line {0}: {1}")]
    Parse(usize, String),
}
