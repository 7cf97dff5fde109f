pub mod ablation;
pub mod backend;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod prompting;
pub mod rerank;
mod seed;
