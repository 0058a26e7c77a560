//! Task prompts for the four trajectory tasks, request payloads built from
//! interleaved sequences, and the seed-driven refinement loop.

pub mod optimize;
pub mod payload;
pub mod template;

pub use optimize::{
    apply_refinement, default_target, optimize, optimize_default, seed_score, OptimizationTrace, OptimizeError,
    OptimizeOptions, Round, Seed, SeedOutcome, SeedSet, StopReason, MAX_SEEDS, REFINER_SYSTEM,
};
pub use payload::{build_request, text_only, user_content};
pub use template::{builtin, placeholders_in, PromptError, TaskPrompt};
