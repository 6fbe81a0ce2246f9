//! LLM-guided mobile GUI test generation: page observation, dialogue-driven
//! exploration, script synthesis, linting and migration.

pub mod bundled;
pub mod device;
pub mod explorer;
pub mod gateway;
pub mod model;
pub mod prompt;
pub mod synth;
pub mod transport;
