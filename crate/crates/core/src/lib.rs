//! HyperNEAT with link expression output, usable both as a direct image
//! classifier and as an evolved feature extractor feeding a backprop-trained
//! classification head.

pub mod backprop;
pub mod cppn;
pub mod evolution;
pub mod experiment;
pub mod mnist;
pub mod metrics;
pub mod network;
pub mod substrate;
