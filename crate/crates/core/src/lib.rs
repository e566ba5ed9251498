//! Adversarial distractor generation and evaluation for extractive
//! question answering over SQuAD-format corpora.

pub mod adversary;
pub mod augment;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod llm;
pub mod metrics;
pub mod reader;
pub mod text;
