pub mod agents;
pub mod dynamics;
pub mod harness;
pub mod llm;
pub mod orchestrator;
pub mod plan;
pub mod validator;
