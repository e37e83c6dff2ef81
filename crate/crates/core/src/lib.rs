#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod bounds;
pub mod error;
pub mod net;
pub mod potential;
pub mod rng;
pub mod sgd;
pub mod sde;
pub mod gibbs;
pub mod data;
pub mod config;
pub mod cli;
