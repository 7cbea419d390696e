//! Generalized inner fluctuations of finite real spectral triples.

pub mod algebra;
pub mod matrix;
pub mod perturbation;
pub mod toy;
pub mod triple;
pub mod morita;
pub mod optimize;
pub mod action;
pub mod io;
pub mod cli;
