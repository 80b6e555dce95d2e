use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;

use super::activation::Activation;
use super::innovation::seed_links;
use super::GenomeError;

pub type NodeId = u32;
pub type Innovation = u64;

/// x1, y1, f1, z1, x2, y2, f2, z2 followed by the constant bias input.
pub const INPUT_COUNT: usize = 9;
pub const BIAS_INPUT: NodeId = 8;
pub const WEIGHT_OUTPUT: NodeId = 9;
pub const LEO_OUTPUT: NodeId = 10;
pub const LOCALITY_X: NodeId = 11;
pub const LOCALITY_Y: NodeId = 12;
/// First id handed out to hidden nodes created by mutation.
pub const FIRST_FREE_NODE: NodeId = 13;

pub const INIT_WEIGHT_RANGE: f64 = 1.0;

/// The 8 coordinates of a substrate connection: source (x, y, f, z) then target (x, y, f, z).
pub type Coords = [f64; 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Input,
    OutputWeight,
    OutputLeo,
    Hidden,
}

impl NodeRole {
    fn name(self) -> &'static str {
        match self {
            NodeRole::Input => "input",
            NodeRole::OutputWeight => "output-weight",
            NodeRole::OutputLeo => "output-leo",
            NodeRole::Hidden => "hidden",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            NodeRole::Input,
            NodeRole::OutputWeight,
            NodeRole::OutputLeo,
            NodeRole::Hidden,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGene {
    pub id: NodeId,
    pub role: NodeRole,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

/// A CPPN genome. Nodes are kept sorted by id and connections by innovation.
#[derive(Debug, Clone, PartialEq)]
pub struct CppnGenome {
    pub(crate) nodes: Vec<NodeGene>,
    pub(crate) connections: Vec<ConnectionGene>,
}

impl CppnGenome {
    /// Builds a genome from raw genes and validates it.
    pub fn from_parts(
        mut nodes: Vec<NodeGene>,
        mut connections: Vec<ConnectionGene>,
    ) -> Result<Self, GenomeError> {
        nodes.sort_by_key(|n| n.id);
        connections.sort_by_key(|c| c.innovation);
        let genome = Self { nodes, connections };
        genome.validate()?;
        Ok(genome)
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn connections(&self) -> &[ConnectionGene] {
        &self.connections
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn has_connection(&self, source: NodeId, target: NodeId) -> bool {
        self.connections
            .iter()
            .any(|c| c.source == source && c.target == target)
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Hidden)
            .count()
    }

    /// Copy of this genome with every connection weight set to `value`.
    pub fn with_uniform_weights(&self, value: f64) -> Self {
        let mut g = self.clone();
        for c in &mut g.connections {
            c.weight = value;
        }
        g
    }

    pub(crate) fn insert_node(&mut self, node: NodeGene) {
        let pos = self.nodes.partition_point(|n| n.id < node.id);
        self.nodes.insert(pos, node);
    }

    pub(crate) fn insert_connection(&mut self, conn: ConnectionGene) {
        let pos = self
            .connections
            .partition_point(|c| c.innovation < conn.innovation);
        self.connections.insert(pos, conn);
    }

    /// Checks structural invariants: the nine inputs, one output of each kind,
    /// known endpoints, no self-loops, unique innovations and an acyclic
    /// enabled graph.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(GenomeError::DuplicateNode(n.id));
            }
        }
        for i in 0..INPUT_COUNT as NodeId {
            match self.node(i) {
                Some(n) if n.role == NodeRole::Input && n.activation == Activation::Linear => {}
                _ => return Err(GenomeError::BadInputs),
            }
        }
        let inputs = self
            .nodes
            .iter()
            .filter(|n| n.role == NodeRole::Input)
            .count();
        if inputs != INPUT_COUNT {
            return Err(GenomeError::BadInputs);
        }
        for role in [NodeRole::OutputWeight, NodeRole::OutputLeo] {
            let count = self.nodes.iter().filter(|n| n.role == role).count();
            if count != 1 {
                return Err(GenomeError::Outputs(role.name(), count));
            }
        }
        let mut innovations = HashSet::new();
        for c in &self.connections {
            if !innovations.insert(c.innovation) {
                return Err(GenomeError::DuplicateInnovation(c.innovation));
            }
            if c.source == c.target {
                return Err(GenomeError::SelfLoop(c.innovation));
            }
            let target = self
                .node(c.target)
                .ok_or(GenomeError::UnknownNode(c.innovation, c.target))?;
            self.node(c.source)
                .ok_or(GenomeError::UnknownNode(c.innovation, c.source))?;
            if target.role == NodeRole::Input {
                return Err(GenomeError::InputTarget(c.innovation));
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Non-input node ids in evaluation order (Kahn's algorithm over enabled
    /// connections, ties broken by lowest id).
    pub(crate) fn topological_order(&self) -> Result<Vec<NodeId>, GenomeError> {
        let mut indegree: HashMap<NodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut out: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for c in self.connections.iter().filter(|c| c.enabled) {
            *indegree.get_mut(&c.target).unwrap() += 1;
            out.entry(c.source).or_default().push(c.target);
        }
        let mut ready: std::collections::BTreeSet<NodeId> = indegree
            .iter()
            .filter(|&(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for t in out.get(&id).into_iter().flatten() {
                let d = indegree.get_mut(t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(*t);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(GenomeError::Cycle);
        }
        Ok(order
            .into_iter()
            .filter(|&id| self.node(id).map(|n| n.role) != Some(NodeRole::Input))
            .collect())
    }

    /// True if adding `source -> target` would close a cycle through any
    /// existing connection, enabled or not.
    pub fn would_create_cycle(&self, source: NodeId, target: NodeId) -> bool {
        if source == target {
            return true;
        }
        let mut stack = vec![target];
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if n == source {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            stack.extend(
                self.connections
                    .iter()
                    .filter(|c| c.source == n)
                    .map(|c| c.target),
            );
        }
        false
    }

    /// Line-oriented text encoding used for checkpoints and champion export.
    pub fn to_text(&self) -> String {
        let mut s = String::from("cppn-genome 1\n");
        for n in &self.nodes {
            let _ = writeln!(s, "node {} {} {}", n.id, n.role.name(), n.activation);
        }
        for c in &self.connections {
            let _ = writeln!(
                s,
                "conn {} {} {} {} {}",
                c.innovation,
                c.source,
                c.target,
                c.weight,
                u8::from(c.enabled)
            );
        }
        s.push_str("end\n");
        s
    }

    /// Parses [`to_text`](Self::to_text) output. Lines after `end` are ignored.
    pub fn from_text(text: &str) -> Result<Self, GenomeError> {
        let (genome, _) = Self::parse_text(text.lines().enumerate())?;
        Ok(genome)
    }

    /// Parses one genome block from a line iterator, leaving the iterator
    /// positioned after the block's `end` line.
    pub(crate) fn parse_text<'a, I>(mut lines: I) -> Result<(Self, I), GenomeError>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let bad = |line: usize, msg: &str| GenomeError::Parse(line + 1, msg.to_string());
        let (n, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| bad(0, "empty input"))?;
        if header.trim() != "cppn-genome 1" {
            return Err(bad(n, "expected `cppn-genome 1` header"));
        }
        let mut nodes = Vec::new();
        let mut connections = Vec::new();
        let mut closed = false;
        for (n, line) in lines.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                ["end"] => {
                    closed = true;
                    break;
                }
                ["node", id, role, act] => nodes.push(NodeGene {
                    id: id.parse().map_err(|_| bad(n, "bad node id"))?,
                    role: NodeRole::parse(role).ok_or_else(|| bad(n, "bad node role"))?,
                    activation: act.parse().map_err(|e: String| bad(n, &e))?,
                }),
                ["conn", innov, src, tgt, w, en] => connections.push(ConnectionGene {
                    innovation: innov.parse().map_err(|_| bad(n, "bad innovation"))?,
                    source: src.parse().map_err(|_| bad(n, "bad source id"))?,
                    target: tgt.parse().map_err(|_| bad(n, "bad target id"))?,
                    weight: w.parse().map_err(|_| bad(n, "bad weight"))?,
                    enabled: match *en {
                        "1" => true,
                        "0" => false,
                        _ => return Err(bad(n, "enabled flag must be 0 or 1")),
                    },
                }),
                _ => return Err(bad(n, "unrecognized line")),
            }
        }
        if !closed {
            return Err(GenomeError::Parse(0, "missing `end`".into()));
        }
        Ok((Self::from_parts(nodes, connections)?, lines))
    }
}

/// The minimal starting genome.
///
/// All nine inputs feed the weight output with random weights. The LEO output
/// is driven by two Gaussian hidden nodes over `x1 - x2` and `y1 - y2`, each
/// wired with weight +1 into the LEO, plus a -1 bias, so expression starts out
/// restricted to spatially local pairs.
pub fn seed_genome<R: Rng + ?Sized>(rng: &mut R) -> CppnGenome {
    let mut nodes: Vec<NodeGene> = (0..INPUT_COUNT as NodeId)
        .map(|id| NodeGene {
            id,
            role: NodeRole::Input,
            activation: Activation::Linear,
        })
        .collect();
    nodes.push(NodeGene {
        id: WEIGHT_OUTPUT,
        role: NodeRole::OutputWeight,
        activation: Activation::BipolarSigmoid,
    });
    nodes.push(NodeGene {
        id: LEO_OUTPUT,
        role: NodeRole::OutputLeo,
        activation: Activation::BipolarSigmoid,
    });
    for id in [LOCALITY_X, LOCALITY_Y] {
        nodes.push(NodeGene {
            id,
            role: NodeRole::Hidden,
            activation: Activation::Gaussian,
        });
    }
    let connections = seed_links()
        .iter()
        .enumerate()
        .map(|(i, link)| ConnectionGene {
            innovation: i as Innovation,
            source: link.source,
            target: link.target,
            weight: link
                .fixed_weight
                .unwrap_or_else(|| rng.random_range(-INIT_WEIGHT_RANGE..=INIT_WEIGHT_RANGE)),
            enabled: true,
        })
        .collect();
    CppnGenome { nodes, connections }
}

/// A genome flattened into an evaluation plan.
#[derive(Debug, Clone)]
pub struct Cppn {
    steps: Vec<Step>,
    edge_source: Vec<usize>,
    edge_weight: Vec<f64>,
    slots: usize,
    weight_slot: usize,
    leo_slot: usize,
}

#[derive(Debug, Clone)]
struct Step {
    slot: usize,
    activation: Activation,
    edges: std::ops::Range<usize>,
}

impl Cppn {
    pub fn new(genome: &CppnGenome) -> Result<Self, GenomeError> {
        genome.validate()?;
        let slot_of = |id: NodeId| genome.nodes.binary_search_by_key(&id, |n| n.id).unwrap();
        let mut incoming: HashMap<NodeId, Vec<&ConnectionGene>> = HashMap::new();
        for c in genome.connections.iter().filter(|c| c.enabled) {
            incoming.entry(c.target).or_default().push(c);
        }
        let mut steps = Vec::new();
        let mut edge_source = Vec::new();
        let mut edge_weight = Vec::new();
        for id in genome.topological_order()? {
            let start = edge_source.len();
            // connections are sorted by innovation, which fixes summation order
            for c in incoming.get(&id).into_iter().flatten() {
                edge_source.push(slot_of(c.source));
                edge_weight.push(c.weight);
            }
            steps.push(Step {
                slot: slot_of(id),
                activation: genome.node(id).unwrap().activation,
                edges: start..edge_source.len(),
            });
        }
        let find = |role| {
            genome
                .nodes
                .iter()
                .position(|n| n.role == role)
                .expect("validated")
        };
        Ok(Self {
            steps,
            edge_source,
            edge_weight,
            slots: genome.nodes.len(),
            weight_slot: find(NodeRole::OutputWeight),
            leo_slot: find(NodeRole::OutputLeo),
        })
    }

    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.slots]
    }

    /// Returns `(weight, expression)` for one connection query.
    pub fn query(&self, coords: &Coords) -> (f64, f64) {
        self.query_with(coords, &mut self.scratch())
    }

    /// Same as [`query`](Self::query) with a caller-owned buffer of
    /// [`scratch`](Self::scratch) length.
    #[inline]
    pub fn query_with(&self, coords: &Coords, values: &mut [f64]) -> (f64, f64) {
        values[..8].copy_from_slice(coords);
        values[BIAS_INPUT as usize] = 1.0;
        for step in &self.steps {
            let mut sum = 0.0;
            for e in step.edges.clone() {
                sum += values[self.edge_source[e]] * self.edge_weight[e];
            }
            values[step.slot] = step.activation.apply(sum);
        }
        (values[self.weight_slot], values[self.leo_slot])
    }
}

/// One-shot query of a genome. Compile with [`Cppn::new`] for repeated use.
pub fn evaluate_cppn(genome: &CppnGenome, coords: &Coords) -> Result<(f64, f64), GenomeError> {
    Ok(Cppn::new(genome)?.query(coords))
}
