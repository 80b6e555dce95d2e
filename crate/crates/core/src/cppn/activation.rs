use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Node activation functions available to CPPNs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    BipolarSigmoid,
    Gaussian,
    Sine,
    Abs,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Linear,
        Activation::BipolarSigmoid,
        Activation::Gaussian,
        Activation::Sine,
        Activation::Abs,
    ];

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Linear => v,
            Activation::BipolarSigmoid => bipolar_sigmoid(v),
            Activation::Gaussian => (-v * v).exp(),
            Activation::Sine => v.sin(),
            Activation::Abs => v.abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::BipolarSigmoid => "bipolar-sigmoid",
            Activation::Gaussian => "gaussian",
            Activation::Sine => "sine",
            Activation::Abs => "abs",
        }
    }
}

/// `2 / (1 + e^-v) - 1`, range (-1, 1), zero at zero.
#[inline]
pub fn bipolar_sigmoid(v: f64) -> f64 {
    // tanh(v/2) is the same function with better precision near 0 and no
    // overflow for large |v|.
    (0.5 * v).tanh()
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown activation `{s}`"))
    }
}
