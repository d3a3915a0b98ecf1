pub mod config;
pub mod corpus;
pub mod dpmm;
pub mod eval;
pub mod generator;
pub mod graphs;
pub mod pipeline;
