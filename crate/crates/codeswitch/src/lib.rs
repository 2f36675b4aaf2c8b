//! Synthesize code-switched text for language pairs that have no
//! code-switched training data.
//!
//! The toolkit trains a small multilingual translation backbone on a
//! synthetic toy-language world, attaches a parameter-efficient
//! code-switching module (bottleneck adapter or attention prefixes) while
//! keeping the backbone frozen, and refines the module on a target pair
//! with a self-training loop whose pseudo-labels are screened by a
//! character n-gram language identifier.
//!
//! Start with the runnable examples (`cargo run --example full_pipeline`)
//! or the `codeswitch` binary (`codeswitch run --config <file>`).

pub mod corpus;
pub mod error;
pub mod nn;
pub mod seeding;
pub mod tokenizer;

pub use error::{Error, Result};
