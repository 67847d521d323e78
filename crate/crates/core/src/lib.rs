pub mod adr;
pub mod agents;
pub mod cli;
pub mod config;
pub mod eval;
pub mod extract;
pub mod llm;
pub mod model;
pub mod orchestrator;
pub mod retrieval;
