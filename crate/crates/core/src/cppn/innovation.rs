use std::collections::HashMap;

use super::genome::{
    BIAS_INPUT, FIRST_FREE_NODE, INPUT_COUNT, Innovation, LEO_OUTPUT, LOCALITY_X, LOCALITY_Y,
    NodeId, WEIGHT_OUTPUT,
};

pub(crate) struct SeedLink {
    pub source: NodeId,
    pub target: NodeId,
    pub fixed_weight: Option<f64>,
}

/// Seed topology in innovation order: inputs into the weight output, then the
/// locality wiring of the LEO output.
pub(crate) fn seed_links() -> Vec<SeedLink> {
    let mut links: Vec<SeedLink> = (0..INPUT_COUNT as NodeId)
        .map(|source| SeedLink {
            source,
            target: WEIGHT_OUTPUT,
            fixed_weight: None,
        })
        .collect();
    // inputs: 0 x1, 1 y1, 4 x2, 5 y2
    for (source, target, w) in [
        (0, LOCALITY_X, 1.0),
        (4, LOCALITY_X, -1.0),
        (1, LOCALITY_Y, 1.0),
        (5, LOCALITY_Y, -1.0),
        (LOCALITY_X, LEO_OUTPUT, 1.0),
        (LOCALITY_Y, LEO_OUTPUT, 1.0),
        (BIAS_INPUT, LEO_OUTPUT, -1.0),
    ] {
        links.push(SeedLink {
            source,
            target,
            fixed_weight: Some(w),
        });
    }
    links
}

/// Result of registering a connection split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Split {
    pub node: NodeId,
    pub incoming: Innovation,
    pub outgoing: Innovation,
}

/// Historical markings for structural mutations.
///
/// Every `(source, target)` pair gets exactly one innovation number for the
/// lifetime of the registry, and splitting a given connection always yields
/// the same node id and pair of innovations. The registry is pre-loaded with
/// the seed topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnovationRegistry {
    links: HashMap<(NodeId, NodeId), Innovation>,
    splits: HashMap<Innovation, Split>,
    next_innovation: Innovation,
    next_node: NodeId,
}

impl Default for InnovationRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl InnovationRegistry {
    pub fn new() -> Self {
        let links: HashMap<_, _> = seed_links()
            .iter()
            .enumerate()
            .map(|(i, l)| ((l.source, l.target), i as Innovation))
            .collect();
        Self {
            next_innovation: links.len() as Innovation,
            links,
            splits: HashMap::new(),
            next_node: FIRST_FREE_NODE,
        }
    }

    pub fn link(&mut self, source: NodeId, target: NodeId) -> Innovation {
        let next = &mut self.next_innovation;
        *self.links.entry((source, target)).or_insert_with(|| {
            let i = *next;
            *next += 1;
            i
        })
    }

    pub fn split(&mut self, connection: Innovation, source: NodeId, target: NodeId) -> Split {
        if let Some(s) = self.splits.get(&connection) {
            return *s;
        }
        let node = self.next_node;
        self.next_node += 1;
        let split = Split {
            node,
            incoming: self.link(source, node),
            outgoing: self.link(node, target),
        };
        self.splits.insert(connection, split);
        split
    }

    pub fn next_innovation(&self) -> Innovation {
        self.next_innovation
    }

    pub fn next_node(&self) -> NodeId {
        self.next_node
    }

    /// Serializes as text lines (`link s t i`, `split c node in out`), sorted.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!(
            "registry {} {}",
            self.next_innovation, self.next_node
        )];
        let mut links: Vec<_> = self.links.iter().collect();
        links.sort_by_key(|(_, i)| **i);
        lines.extend(links.into_iter().map(|((s, t), i)| format!("link {s} {t} {i}")));
        let mut splits: Vec<_> = self.splits.iter().collect();
        splits.sort_by_key(|(c, _)| **c);
        lines.extend(
            splits
                .into_iter()
                .map(|(c, s)| format!("split {c} {} {} {}", s.node, s.incoming, s.outgoing)),
        );
        lines.push("end".into());
        lines.join("\n") + "\n"
    }

    pub(crate) fn parse_text<'a, I>(mut lines: I) -> Result<(Self, I), String>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let num = |s: &str| s.parse::<u64>().map_err(|_| format!("bad number `{s}`"));
        let (_, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or("missing registry")?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let mut reg = match head.as_slice() {
            ["registry", i, n] => Self {
                links: HashMap::new(),
                splits: HashMap::new(),
                next_innovation: num(i)?,
                next_node: num(n)? as NodeId,
            },
            _ => return Err(format!("expected registry header, got `{header}`")),
        };
        for (_, line) in lines.by_ref() {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["end"] => return Ok((reg, lines)),
                ["link", s, t, i] => {
                    reg.links
                        .insert((num(s)? as NodeId, num(t)? as NodeId), num(i)?);
                }
                ["split", c, n, a, b] => {
                    reg.splits.insert(
                        num(c)?,
                        Split {
                            node: num(n)? as NodeId,
                            incoming: num(a)?,
                            outgoing: num(b)?,
                        },
                    );
                }
                _ => return Err(format!("bad registry line `{line}`")),
            }
        }
        Err("registry block missing `end`".into())
    }
}
