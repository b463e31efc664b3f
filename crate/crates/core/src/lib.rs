//! Two-agent infrastructure verification.
//!
//! A verifier agent and a tool-generation agent share a [`history::ToolHistory`]
//! that holds, per property, up to K records made with pairwise-distinct
//! tools. A verdict is only accepted once K independent tools agree on the
//! evidence, which makes the pair robust to tools that fail silently.

pub mod agents;
pub mod cli;
pub mod env;
pub mod harness;
pub mod history;
pub mod llm;
pub mod spec;
pub mod toolkit;
