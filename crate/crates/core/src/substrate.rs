//! Substrate geometry and CPPN compilation.
//!
//! Every node sits at `(x, y, f, z)` in `[-1, 1]^4`: `x, y` from its pixel
//! position, `f` from its feature index and `z` from its layer depth. A CPPN
//! turns each pair of node coordinates into a weight and a link-expression
//! value; the link exists only when the expression is strictly positive.
//!
//! Within a layer, node `(ix, iy, if)` lives at flat index `(if * Y + iy) * X + ix`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::{Coords, Cppn, CppnGenome, GenomeError};
use crate::mnist::SIDE;

pub const DEFAULT_WEIGHT_SCALE: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubstrateError {
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("layer {layer}: {reason}")]
    Geometry { layer: usize, reason: String },
    #[error("index ({ix}, {iy}, {if_}) outside layer {layer}")]
    Index {
        layer: usize,
        ix: usize,
        iy: usize,
        if_: usize,
    },
    #[error("{0}")]
    Kind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LayerKind {
    /// Raw image, zero-padded by `pad` pixels on every side before use.
    Input { pad: usize },
    /// Fully connected to the previous layer.
    Dense,
    /// Valid cross-correlation with a shared `kernel × kernel` bank.
    Conv { kernel: usize },
    /// Non-overlapping average over `window × window` blocks.
    AvgPool { window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub x: usize,
    pub y: usize,
    pub f: usize,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub const fn new(x: usize, y: usize, f: usize, kind: LayerKind) -> Self {
        Self { x, y, f, kind }
    }

    pub fn nodes(&self) -> usize {
        self.x * self.y * self.f
    }

    /// Spatial size after input padding.
    pub fn padded(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Input { pad } => (self.x + 2 * pad, self.y + 2 * pad),
            _ => (self.x, self.y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstrateSpec {
    pub layers: Vec<LayerSpec>,
    pub weight_scale: f64,
    /// Index of the last layer kept when the substrate is used as a feature
    /// extractor.
    pub feature_cut: Option<usize>,
}

/// Linear map of `i` in `0..n` onto `[-1, 1]`; a singleton axis maps to 0.
pub fn axis_coord(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

impl SubstrateSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self, SubstrateError> {
        let spec = Self {
            layers,
            weight_scale: DEFAULT_WEIGHT_SCALE,
            feature_cut: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The same geometry truncated after layer `cut` for feature extraction.
    pub fn with_cut(mut self, cut: usize) -> Result<Self, SubstrateError> {
        self.feature_cut = Some(cut);
        self.validate()?;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layers that get compiled: all of them, or up to the cut inclusive.
    pub fn active_layers(&self) -> &[LayerSpec] {
        match self.feature_cut {
            Some(c) => &self.layers[..=c],
            None => &self.layers,
        }
    }

    /// Depth coordinate of layer `index`, normalized over the full stack so a
    /// cut substrate shares coordinates with its uncut original.
    pub fn z(&self, index: usize) -> f64 {
        axis_coord(index, self.depth())
    }

    pub fn node_coordinates(
        &self,
        layer: usize,
        ix: usize,
        iy: usize,
        if_: usize,
    ) -> Result<[f64; 4], SubstrateError> {
        let l = self.layers.get(layer).ok_or_else(|| SubstrateError::Geometry {
            layer,
            reason: "no such layer".into(),
        })?;
        if ix >= l.x || iy >= l.y || if_ >= l.f {
            return Err(SubstrateError::Index { layer, ix, iy, if_ });
        }
        Ok([
            axis_coord(ix, l.x),
            axis_coord(iy, l.y),
            axis_coord(if_, l.f),
            self.z(layer),
        ])
    }

    /// Coordinates of every node of a layer in flat index order.
    pub fn layer_coordinates(&self, layer: usize) -> Vec<[f64; 4]> {
        let l = &self.layers[layer];
        let z = self.z(layer);
        let mut out = Vec::with_capacity(l.nodes());
        for f in 0..l.f {
            for y in 0..l.y {
                for x in 0..l.x {
                    out.push([axis_coord(x, l.x), axis_coord(y, l.y), axis_coord(f, l.f), z]);
                }
            }
        }
        out
    }

    /// The reserved point queried as the source of a bias: the origin of the
    /// x, y, f axes, half a layer spacing below the target layer.
    pub fn bias_source(&self, target_layer: usize) -> [f64; 4] {
        let spacing = if self.depth() > 1 { 2.0 / (self.depth() - 1) as f64 } else { 0.0 };
        [0.0, 0.0, 0.0, self.z(target_layer) - 0.5 * spacing]
    }

    pub fn validate(&self) -> Result<(), SubstrateError> {
        let geo = |layer: usize, reason: String| SubstrateError::Geometry { layer, reason };
        let first = self.layers.first().ok_or_else(|| geo(0, "empty substrate".into()))?;
        if !matches!(first.kind, LayerKind::Input { .. }) || (first.x, first.y, first.f) != (SIDE, SIDE, 1) {
            return Err(geo(0, "first layer must be a (28,28,1) input".into()));
        }
        if self.layers.len() < 2 {
            return Err(geo(0, "substrate needs at least two layers".into()));
        }
        if !self.weight_scale.is_finite() {
            return Err(geo(0, "weight scale must be finite".into()));
        }
        if let Some(cut) = self.feature_cut
            && (cut == 0 || cut >= self.layers.len())
        {
            return Err(geo(cut, "feature cut must name a non-input layer".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            let (src, dst) = (&pair[0], &pair[1]);
            let l = i + 1;
            if dst.nodes() == 0 {
                return Err(geo(l, "empty layer".into()));
            }
            let (sx, sy) = src.padded();
            match dst.kind {
                LayerKind::Input { .. } => return Err(geo(l, "input layer after the first".into())),
                LayerKind::Dense => {
                    if matches!(src.kind, LayerKind::Input { pad } if pad > 0) {
                        return Err(geo(l, "dense layer cannot follow a padded input".into()));
                    }
                }
                LayerKind::Conv { kernel } => {
                    if kernel == 0 || kernel > sx || kernel > sy {
                        return Err(geo(l, format!("kernel {kernel} larger than source {sx}x{sy}")));
                    }
                    if (dst.x, dst.y) != (sx - kernel + 1, sy - kernel + 1) {
                        return Err(geo(l, format!("valid {kernel}x{kernel} conv of {sx}x{sy} cannot give {}x{}", dst.x, dst.y)));
                    }
                }
                LayerKind::AvgPool { window } => {
                    if window == 0 || sx % window != 0 || sy % window != 0 {
                        return Err(geo(l, format!("window {window} does not tile {sx}x{sy}")));
                    }
                    if (dst.x, dst.y, dst.f) != (sx / window, sy / window, src.f) {
                        return Err(geo(l, "pooling output shape mismatch".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Connection queries a compilation issues, not counting biases.
    pub fn connection_query_count(&self) -> usize {
        self.active_layers()
            .windows(2)
            .map(|p| match p[1].kind {
                LayerKind::Dense => p[0].nodes() * p[1].nodes(),
                LayerKind::Conv { kernel } => p[0].f * p[1].f * kernel * kernel,
                _ => 0,
            })
            .sum()
    }
}

/// The eight-triple fully connected architecture, dense throughout.
pub fn traditional_substrate() -> SubstrateSpec {
    let triples = [
        (16, 16, 3),
        (8, 8, 3),
        (6, 6, 8),
        (3, 3, 8),
        (1, 1, 100),
        (1, 1, 64),
        (1, 1, 10),
    ];
    let mut layers = vec![LayerSpec::new(SIDE, SIDE, 1, LayerKind::Input { pad: 0 })];
    layers.extend(triples.iter().map(|&(x, y, f)| LayerSpec::new(x, y, f, LayerKind::Dense)));
    SubstrateSpec::new(layers).expect("fixed geometry")
}

/// Layer index of the (1,1,100) feature layer.
pub const TRADITIONAL_CUT: usize = 5;

/// LeNet-5 with full C3 connectivity and fixed average pooling.
pub fn lenet5_substrate() -> SubstrateSpec {
    use LayerKind::*;
    SubstrateSpec::new(vec![
        LayerSpec::new(SIDE, SIDE, 1, Input { pad: 2 }),
        LayerSpec::new(28, 28, 6, Conv { kernel: 5 }),
        LayerSpec::new(14, 14, 6, AvgPool { window: 2 }),
        LayerSpec::new(10, 10, 16, Conv { kernel: 5 }),
        LayerSpec::new(5, 5, 16, AvgPool { window: 2 }),
        LayerSpec::new(1, 1, 120, Conv { kernel: 5 }),
        LayerSpec::new(1, 1, 84, Dense),
        LayerSpec::new(1, 1, 10, Dense),
    ])
    .expect("fixed geometry")
}

/// Layer index of the 120-unit C5 layer.
pub const LENET5_CUT: usize = 5;

/// Concrete parameters for one consecutive layer pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Dense {
        n_in: usize,
        n_out: usize,
        /// Row-major `n_out × n_in`.
        weights: Vec<f64>,
        expressed: Vec<bool>,
        bias: Vec<f64>,
    },
    Conv {
        f_in: usize,
        f_out: usize,
        kernel: usize,
        in_x: usize,
        in_y: usize,
        out_x: usize,
        out_y: usize,
        /// `f_out × f_in × kernel × kernel`, row-major.
        kernels: Vec<f64>,
        expressed: Vec<bool>,
        bias: Vec<f64>,
    },
    Pool {
        f: usize,
        window: usize,
        in_x: usize,
        in_y: usize,
    },
}

impl Stage {
    pub fn expressed_count(&self) -> usize {
        match self {
            Stage::Dense { expressed, .. } | Stage::Conv { expressed, .. } => {
                expressed.iter().filter(|&&e| e).count()
            }
            Stage::Pool { .. } => 0,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            Stage::Dense { n_out, .. } => *n_out,
            Stage::Conv { f_out, out_x, out_y, .. } => f_out * out_x * out_y,
            Stage::Pool { f, window, in_x, in_y } => f * (in_x / window) * (in_y / window),
        }
    }
}

/// A substrate with every weight filled in. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledNetwork {
    pub layers: Vec<LayerSpec>,
    pub stages: Vec<Stage>,
    pub input_pad: usize,
    /// Built from a feature-cut substrate.
    pub is_cut: bool,
    pub connection_queries: usize,
    pub bias_queries: usize,
}

impl CompiledNetwork {
    pub fn expressed_count(&self) -> usize {
        self.stages.iter().map(Stage::expressed_count).sum()
    }

    pub fn output_len(&self) -> usize {
        self.stages.last().map_or(0, Stage::output_len)
    }

    /// Text dump: a header describing each layer, then every stage's
    /// parameters, one matrix row or kernel row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("compiled-network 1\n");
        let _ = writeln!(s, "input-pad {}", self.input_pad);
        let _ = writeln!(s, "cut {}", u8::from(self.is_cut));
        for (i, l) in self.layers.iter().enumerate() {
            let kind = match l.kind {
                LayerKind::Input { pad } => format!("input pad={pad}"),
                LayerKind::Dense => "dense".into(),
                LayerKind::Conv { kernel } => format!("conv kernel={kernel}"),
                LayerKind::AvgPool { window } => format!("avgpool window={window}"),
            };
            let _ = writeln!(s, "layer {i} {} {} {} {kind}", l.x, l.y, l.f);
        }
        let row = |s: &mut String, vals: &[f64]| {
            let line: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        };
        for (i, stage) in self.stages.iter().enumerate() {
            match stage {
                Stage::Dense { n_in, n_out, weights, bias, .. } => {
                    let _ = writeln!(s, "stage {} dense {n_out} {n_in}", i + 1);
                    for r in weights.chunks(*n_in) {
                        row(&mut s, r);
                    }
                    s.push_str("bias\n");
                    row(&mut s, bias);
                }
                Stage::Conv { f_in, f_out, kernel, kernels, bias, .. } => {
                    let _ = writeln!(s, "stage {} conv {f_out} {f_in} {kernel}", i + 1);
                    for r in kernels.chunks(*kernel) {
                        row(&mut s, r);
                    }
                    s.push_str("bias\n");
                    row(&mut s, bias);
                }
                Stage::Pool { f, window, .. } => {
                    let _ = writeln!(s, "stage {} avgpool {f} {window}", i + 1);
                }
            }
        }
        s.push_str("end\n");
        s
    }
}

fn coords(source: &[f64; 4], target: &[f64; 4]) -> Coords {
    [
        source[0], source[1], source[2], source[3], target[0], target[1], target[2], target[3],
    ]
}

/// Compiles any mix of dense, convolutional and pooling layers.
pub fn compile(spec: &SubstrateSpec, genome: &CppnGenome) -> Result<CompiledNetwork, SubstrateError> {
    spec.validate()?;
    let cppn = Cppn::new(genome)?;
    let scale = spec.weight_scale;
    let active = spec.active_layers();
    let input_pad = match active[0].kind {
        LayerKind::Input { pad } => pad,
        _ => 0,
    };
    let mut stages = Vec::with_capacity(active.len() - 1);
    let mut connection_queries = 0;
    let mut bias_queries = 0;
    for t in 1..active.len() {
        let (src, dst) = (&active[t - 1], &active[t]);
        let z_src = spec.z(t - 1);
        let z_dst = spec.z(t);
        let bias_src = spec.bias_source(t);
        let stage = match dst.kind {
            LayerKind::Dense => {
                let sources = spec.layer_coordinates(t - 1);
                let targets = spec.layer_coordinates(t);
                let (n_in, n_out) = (sources.len(), targets.len());
                let mut weights = vec![0.0; n_in * n_out];
                let mut expressed = vec![false; n_in * n_out];
                weights
                    .par_chunks_mut(n_in)
                    .zip(expressed.par_chunks_mut(n_in))
                    .zip(targets.par_iter())
                    .for_each_init(
                        || cppn.scratch(),
                        |scratch, ((w_row, e_row), tgt)| {
                            for ((w, e), s) in w_row.iter_mut().zip(e_row.iter_mut()).zip(&sources) {
                                let (cw, ce) = cppn.query_with(&coords(s, tgt), scratch);
                                if ce > 0.0 {
                                    *w = scale * cw;
                                    *e = true;
                                }
                            }
                        },
                    );
                let mut scratch = cppn.scratch();
                let bias = targets
                    .iter()
                    .map(|tgt| scale * cppn.query_with(&coords(&bias_src, tgt), &mut scratch).0)
                    .collect();
                connection_queries += n_in * n_out;
                bias_queries += n_out;
                Stage::Dense { n_in, n_out, weights, expressed, bias }
            }
            LayerKind::Conv { kernel } => {
                let (in_x, in_y) = src.padded();
                let (f_in, f_out) = (src.f, dst.f);
                let half = (kernel - 1) / 2;
                let offset = |k: usize| {
                    if half == 0 { 0.0 } else { (k as f64 - half as f64) / half as f64 }
                };
                let mut kernels = vec![0.0; f_out * f_in * kernel * kernel];
                let mut expressed = vec![false; kernels.len()];
                let mut scratch = cppn.scratch();
                let mut bias = Vec::with_capacity(f_out);
                for fo in 0..f_out {
                    let tgt = [0.0, 0.0, axis_coord(fo, f_out), z_dst];
                    for fi in 0..f_in {
                        for ky in 0..kernel {
                            for kx in 0..kernel {
                                let s = [offset(kx), offset(ky), axis_coord(fi, f_in), z_src];
                                let (cw, ce) = cppn.query_with(&coords(&s, &tgt), &mut scratch);
                                if ce > 0.0 {
                                    let i = ((fo * f_in + fi) * kernel + ky) * kernel + kx;
                                    kernels[i] = scale * cw;
                                    expressed[i] = true;
                                }
                            }
                        }
                    }
                    bias.push(scale * cppn.query_with(&coords(&bias_src, &tgt), &mut scratch).0);
                }
                connection_queries += kernels.len();
                bias_queries += f_out;
                Stage::Conv {
                    f_in,
                    f_out,
                    kernel,
                    in_x,
                    in_y,
                    out_x: dst.x,
                    out_y: dst.y,
                    kernels,
                    expressed,
                    bias,
                }
            }
            LayerKind::AvgPool { window } => {
                let (in_x, in_y) = src.padded();
                Stage::Pool { f: src.f, window, in_x, in_y }
            }
            LayerKind::Input { .. } => unreachable!("validated"),
        };
        stages.push(stage);
    }
    Ok(CompiledNetwork {
        layers: active.to_vec(),
        stages,
        input_pad,
        is_cut: spec.feature_cut.is_some(),
        connection_queries,
        bias_queries,
    })
}

/// Compiles a substrate whose layer pairs are all dense.
pub fn compile_dense(spec: &SubstrateSpec, genome: &CppnGenome) -> Result<CompiledNetwork, SubstrateError> {
    if spec.layers[1..].iter().any(|l| l.kind != LayerKind::Dense) {
        return Err(SubstrateError::Kind("compile_dense needs dense layers only".into()));
    }
    compile(spec, genome)
}

/// Compiles a substrate containing convolution or pooling layers.
pub fn compile_conv(spec: &SubstrateSpec, genome: &CppnGenome) -> Result<CompiledNetwork, SubstrateError> {
    if !spec
        .layers
        .iter()
        .any(|l| matches!(l.kind, LayerKind::Conv { .. } | LayerKind::AvgPool { .. }))
    {
        return Err(SubstrateError::Kind("compile_conv needs a conv or pooling layer".into()));
    }
    compile(spec, genome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::{LEO_OUTPUT, seed_genome};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seed() -> CppnGenome {
        seed_genome(&mut ChaCha8Rng::seed_from_u64(21))
    }

    /// A seed whose LEO is driven only by a large negative bias.
    fn closed_gate() -> CppnGenome {
        let mut g = seed();
        for c in &mut g.connections {
            if c.target == LEO_OUTPUT {
                c.weight = if c.source == crate::cppn::BIAS_INPUT { -8.0 } else { 0.0 };
            }
        }
        g
    }

    fn open_gate_zero_weights() -> CppnGenome {
        let mut g = seed().with_uniform_weights(0.0);
        for c in &mut g.connections {
            if c.target == LEO_OUTPUT && c.source == crate::cppn::BIAS_INPUT {
                c.weight = 8.0;
            }
        }
        g
    }

    #[test]
    fn endpoint_coordinates() {
        let spec = traditional_substrate();
        assert_eq!(spec.node_coordinates(0, 0, 0, 0).unwrap(), [-1.0, -1.0, 0.0, -1.0]);
        let c = spec.node_coordinates(4, 1, 1, 0).unwrap();
        assert_eq!((c[0], c[1]), (0.0, 0.0));
        assert_eq!(spec.node_coordinates(5, 0, 0, 0).unwrap()[2], -1.0);
        assert_eq!(spec.node_coordinates(5, 0, 0, 99).unwrap()[2], 1.0);
        assert_eq!(spec.node_coordinates(7, 0, 0, 0).unwrap()[3], 1.0);
        assert!(matches!(spec.node_coordinates(5, 1, 0, 0), Err(SubstrateError::Index { .. })));
    }

    #[test]
    fn traditional_shape() {
        let spec = traditional_substrate();
        assert_eq!(spec.layers[0], LayerSpec::new(28, 28, 1, LayerKind::Input { pad: 0 }));
        assert_eq!((spec.layers[7].x, spec.layers[7].y, spec.layers[7].f), (1, 1, 10));
        let cut = spec.with_cut(TRADITIONAL_CUT).unwrap();
        let last = cut.active_layers().last().unwrap();
        assert_eq!((last.x, last.y, last.f), (1, 1, 100));
    }

    #[test]
    fn lenet_shape() {
        let spec = lenet5_substrate();
        let last = spec.layers.last().unwrap();
        assert_eq!((last.x, last.y, last.f), (1, 1, 10));
        let cut = spec.clone().with_cut(LENET5_CUT).unwrap();
        assert_eq!(cut.active_layers().last().unwrap().f, 120);
        assert_eq!(spec.layers[0].padded(), (32, 32));
    }

    #[test]
    fn oversized_kernel_is_geometry_error() {
        let err = SubstrateSpec::new(vec![
            LayerSpec::new(28, 28, 1, LayerKind::Input { pad: 0 }),
            LayerSpec::new(14, 14, 2, LayerKind::AvgPool { window: 2 }),
        ]);
        assert!(err.is_err());
        let err = SubstrateSpec::new(vec![
            LayerSpec::new(28, 28, 1, LayerKind::Input { pad: 0 }),
            LayerSpec::new(1, 1, 1, LayerKind::Conv { kernel: 29 }),
        ])
        .unwrap_err();
        assert!(matches!(err, SubstrateError::Geometry { layer: 1, .. }));
    }

    #[test]
    fn lenet_c1_query_count() {
        let spec = lenet5_substrate();
        let net = compile_conv(&spec, &seed()).unwrap();
        match &net.stages[0] {
            Stage::Conv { kernels, bias, .. } => {
                assert_eq!(kernels.len(), 6 * 25);
                assert_eq!(bias.len(), 6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(net.connection_queries, 150 + 16 * 6 * 25 + 120 * 16 * 25 + 120 * 84 + 84 * 10);
        assert_eq!(net.bias_queries, 6 + 16 + 120 + 84 + 10);
    }

    #[test]
    fn closed_gate_expresses_nothing() {
        let net = compile(&lenet5_substrate(), &closed_gate()).unwrap();
        assert_eq!(net.expressed_count(), 0);
        for st in &net.stages {
            if let Stage::Conv { kernels, .. } | Stage::Dense { weights: kernels, .. } = st {
                assert!(kernels.iter().all(|&w| w == 0.0));
            }
        }
    }

    #[test]
    fn zero_weights_with_open_gate() {
        let net = compile(&lenet5_substrate(), &open_gate_zero_weights()).unwrap();
        assert_eq!(net.expressed_count(), net.connection_queries);
        for st in &net.stages {
            if let Stage::Conv { kernels, .. } | Stage::Dense { weights: kernels, .. } = st {
                assert!(kernels.iter().all(|&w| w == 0.0));
            }
        }
    }

    #[test]
    fn compile_kind_checks() {
        assert!(compile_dense(&lenet5_substrate(), &seed()).is_err());
        assert!(compile_conv(&traditional_substrate(), &seed()).is_err());
    }

    #[test]
    fn compilation_is_deterministic() {
        let spec = lenet5_substrate();
        let g = seed();
        assert_eq!(compile(&spec, &g).unwrap(), compile(&spec, &g).unwrap());
    }

    #[test]
    fn text_dump_has_header() {
        let net = compile(&lenet5_substrate().with_cut(LENET5_CUT).unwrap(), &seed()).unwrap();
        let text = net.to_text();
        assert!(text.starts_with("compiled-network 1\ninput-pad 2\ncut 1\nlayer 0 28 28 1 input pad=2\n"));
        assert!(text.contains("stage 1 conv 6 1 5\n"));
        assert!(text.ends_with("end\n"));
    }
}
