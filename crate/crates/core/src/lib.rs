//! Simulation and classification pipeline for a two-qubit noise sensor.
//!
//! A pair of Ising-coupled qubits is driven by a two-tone STIRAP-like
//! protocol. The final population of `|ee>` under three pump/Stokes
//! amplitude ratios forms a three-component feature vector that a small
//! multilayer perceptron maps to one of six classes of classical noise
//! (quasistatic or white; correlated, anticorrelated or independent).

pub mod classifier;
pub mod config;
pub mod dataset;
pub mod dynamics;
pub mod efficiency;
pub mod error;
pub mod model;
pub mod noise;
pub mod seed;

pub use error::{Error, Result};
