//! Forward execution of compiled substrates.
//!
//! Convolutions are cross-correlations (no kernel flip) with valid borders;
//! the only padding is the input pad declared by the substrate. Every
//! non-input layer, pooling included, applies the bipolar sigmoid.

use rayon::prelude::*;
use thiserror::Error;

use crate::cppn::bipolar_sigmoid;
use crate::metrics::{Scores, argmax};
use crate::mnist::{NUM_CLASSES, PIXELS, SIDE};
use crate::substrate::{CompiledNetwork, Stage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("image has {found} pixels, network expects {expected}")]
    Shape { expected: usize, found: usize },
    #[error("network was not built from a feature-cut substrate")]
    NoCut,
    #[error("network is a feature extractor; it has no class outputs")]
    IsCut,
    #[error("network has {0} outputs, expected {NUM_CLASSES}")]
    Outputs(usize),
}

/// Four-lane dot product.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4 * 4;
    for (x, y) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        s += x * y;
    }
    s
}

fn pad_input(image: &[f64], pad: usize) -> Vec<f64> {
    if pad == 0 {
        return image.to_vec();
    }
    let side = SIDE + 2 * pad;
    let mut out = vec![0.0; side * side];
    for (y, row) in image.chunks_exact(SIDE).enumerate() {
        let start = (y + pad) * side + pad;
        out[start..start + SIDE].copy_from_slice(row);
    }
    out
}

pub(crate) fn run_stage(stage: &Stage, input: &[f64]) -> Vec<f64> {
    match stage {
        Stage::Dense { n_in, weights, bias, .. } => weights
            .chunks_exact(*n_in)
            .zip(bias)
            .map(|(row, b)| bipolar_sigmoid(b + dot(row, input)))
            .collect(),
        Stage::Conv {
            f_in,
            f_out,
            kernel: k,
            in_x,
            in_y,
            out_x,
            out_y,
            kernels,
            bias,
            ..
        } => {
            let (k, in_x, in_y, out_x, out_y) = (*k, *in_x, *in_y, *out_x, *out_y);
            if out_x == 1 && out_y == 1 && in_x == k && in_y == k {
                // kernel covers the whole input: one dot product per output map
                let span = f_in * k * k;
                return kernels
                    .chunks_exact(span)
                    .zip(bias)
                    .map(|(kern, b)| bipolar_sigmoid(b + dot(kern, input)))
                    .collect();
            }
            let mut out = vec![0.0; f_out * out_x * out_y];
            for fo in 0..*f_out {
                let plane = &mut out[fo * out_x * out_y..(fo + 1) * out_x * out_y];
                plane.fill(bias[fo]);
                for fi in 0..*f_in {
                    let src = &input[fi * in_x * in_y..(fi + 1) * in_x * in_y];
                    let kern = &kernels[(fo * f_in + fi) * k * k..(fo * f_in + fi + 1) * k * k];
                    for ky in 0..k {
                        for kx in 0..k {
                            let w = kern[ky * k + kx];
                            if w == 0.0 {
                                continue;
                            }
                            for oy in 0..out_y {
                                let srow = &src[(oy + ky) * in_x + kx..(oy + ky) * in_x + kx + out_x];
                                let orow = &mut plane[oy * out_x..(oy + 1) * out_x];
                                for (o, s) in orow.iter_mut().zip(srow) {
                                    *o += w * s;
                                }
                            }
                        }
                    }
                }
            }
            out.iter_mut().for_each(|v| *v = bipolar_sigmoid(*v));
            out
        }
        Stage::Pool { f, window, in_x, in_y } => {
            let (p, in_x, in_y) = (*window, *in_x, *in_y);
            let (out_x, out_y) = (in_x / p, in_y / p);
            let norm = 1.0 / (p * p) as f64;
            let mut out = Vec::with_capacity(f * out_x * out_y);
            for fi in 0..*f {
                let src = &input[fi * in_x * in_y..(fi + 1) * in_x * in_y];
                for oy in 0..out_y {
                    for ox in 0..out_x {
                        let mut s = 0.0;
                        for dy in 0..p {
                            for dx in 0..p {
                                s += src[(oy * p + dy) * in_x + ox * p + dx];
                            }
                        }
                        out.push(bipolar_sigmoid(s * norm));
                    }
                }
            }
            out
        }
    }
}

impl CompiledNetwork {
    /// Activations of every layer, starting with the (padded) input.
    pub fn activations(&self, image: &[f64]) -> Result<Vec<Vec<f64>>, RuntimeError> {
        if image.len() != PIXELS {
            return Err(RuntimeError::Shape {
                expected: PIXELS,
                found: image.len(),
            });
        }
        let mut layers = vec![pad_input(image, self.input_pad)];
        for stage in &self.stages {
            let next = run_stage(stage, layers.last().unwrap());
            layers.push(next);
        }
        Ok(layers)
    }

    /// Activations of the last compiled layer.
    pub fn propagate(&self, image: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        if image.len() != PIXELS {
            return Err(RuntimeError::Shape {
                expected: PIXELS,
                found: image.len(),
            });
        }
        let mut current = pad_input(image, self.input_pad);
        for stage in &self.stages {
            current = run_stage(stage, &current);
        }
        Ok(current)
    }

    /// Class scores of an uncut network.
    pub fn forward(&self, image: &[f64]) -> Result<Scores, RuntimeError> {
        if self.is_cut {
            return Err(RuntimeError::IsCut);
        }
        let out = self.propagate(image)?;
        out.try_into().map_err(|v: Vec<f64>| RuntimeError::Outputs(v.len()))
    }

    /// Scores and the predicted class (lowest index wins ties).
    pub fn classify(&self, image: &[f64]) -> Result<(Scores, usize), RuntimeError> {
        let scores = self.forward(image)?;
        Ok((scores, argmax(&scores)))
    }

    /// Cut-layer activations of a feature-extractor network.
    pub fn extract_features(&self, image: &[f64]) -> Result<Vec<f64>, RuntimeError> {
        if !self.is_cut {
            return Err(RuntimeError::NoCut);
        }
        self.propagate(image)
    }

    /// [`classify`](Self::classify) over many images; order preserved.
    pub fn classify_batch<'a, I>(&self, images: I) -> Result<Vec<(Scores, usize)>, RuntimeError>
    where
        I: IntoParallelIterator<Item = &'a [f64]>,
        I::Iter: IndexedParallelIterator,
    {
        images.into_par_iter().map(|img| self.classify(img)).collect()
    }

    /// [`extract_features`](Self::extract_features) over many images; order preserved.
    pub fn extract_batch<'a, I>(&self, images: I) -> Result<Vec<Vec<f64>>, RuntimeError>
    where
        I: IntoParallelIterator<Item = &'a [f64]>,
        I::Iter: IndexedParallelIterator,
    {
        images.into_par_iter().map(|img| self.extract_features(img)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::{CppnGenome, seed_genome};
    use crate::substrate::{
        LENET5_CUT, LayerKind, LayerSpec, SubstrateSpec, TRADITIONAL_CUT, compile, lenet5_substrate,
        traditional_substrate,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_genome() -> CppnGenome {
        seed_genome(&mut ChaCha8Rng::seed_from_u64(0)).with_uniform_weights(0.0)
    }

    fn random_image(rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..PIXELS).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn zero_network_predicts_class_zero() {
        let net = compile(&lenet5_substrate(), &zero_genome()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (scores, class) = net.classify(&random_image(&mut rng)).unwrap();
        assert_eq!(scores, [0.0; 10]);
        assert_eq!(class, 0);
    }

    #[test]
    fn zero_network_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(&mut rng);
        let lenet = compile(&lenet5_substrate().with_cut(LENET5_CUT).unwrap(), &zero_genome()).unwrap();
        let f = lenet.extract_features(&img).unwrap();
        assert_eq!(f, vec![0.0; 120]);
        let trad = compile(&traditional_substrate().with_cut(TRADITIONAL_CUT).unwrap(), &zero_genome()).unwrap();
        assert_eq!(trad.extract_features(&img).unwrap().len(), 100);
    }

    #[test]
    fn cut_and_uncut_are_not_interchangeable() {
        let g = zero_genome();
        let img = vec![0.0; PIXELS];
        let full = compile(&lenet5_substrate(), &g).unwrap();
        let cut = compile(&lenet5_substrate().with_cut(LENET5_CUT).unwrap(), &g).unwrap();
        assert_eq!(full.extract_features(&img), Err(RuntimeError::NoCut));
        assert_eq!(cut.forward(&img), Err(RuntimeError::IsCut));
        assert!(matches!(full.forward(&[0.0; 10]), Err(RuntimeError::Shape { .. })));
    }

    #[test]
    fn single_dense_unit() {
        let stage = Stage::Dense {
            n_in: 1,
            n_out: 1,
            weights: vec![0.0],
            expressed: vec![true],
            bias: vec![0.0],
        };
        assert_eq!(run_stage(&stage, &[0.7]), vec![0.0]);
        let stage = Stage::Dense {
            n_in: 1,
            n_out: 1,
            weights: vec![2.0],
            expressed: vec![true],
            bias: vec![0.0],
        };
        let expected = 2.0 / (1.0 + (-1.4f64).exp()) - 1.0;
        assert!((run_stage(&stage, &[0.7])[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn padding_keeps_zero_image_zero() {
        let padded = pad_input(&[0.0; PIXELS], 2);
        assert_eq!(padded.len(), 32 * 32);
        assert!(padded.iter().all(|&p| p == 0.0));
        let mut img = [0.0; PIXELS];
        img[0] = 1.0;
        let padded = pad_input(&img, 2);
        assert_eq!(padded[2 * 32 + 2], 1.0);
        assert_eq!(padded.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn batch_matches_singles() {
        let g = seed_genome(&mut ChaCha8Rng::seed_from_u64(4));
        let spec = SubstrateSpec::new(vec![
            LayerSpec::new(28, 28, 1, LayerKind::Input { pad: 0 }),
            LayerSpec::new(4, 4, 2, LayerKind::Dense),
            LayerSpec::new(1, 1, 10, LayerKind::Dense),
        ])
        .unwrap();
        let net = compile(&spec, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let images: Vec<Vec<f64>> = (0..6).map(|_| random_image(&mut rng)).collect();
        let batch = net.classify_batch(images.par_iter().map(|v| v.as_slice())).unwrap();
        for (img, b) in images.iter().zip(&batch) {
            assert_eq!(&net.classify(img).unwrap(), b);
        }
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
