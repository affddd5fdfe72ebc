//! Command implementations behind the `daug` binary, exposed as a
//! library so the commands can be driven in-process by tests.

pub mod commands;
pub mod config;
pub mod seed;
pub mod workers;

pub use commands::{
    cmd_augment, cmd_bench, cmd_extract, cmd_gen, cmd_validate, AugmentArgs, BenchArgs, CorpusSpec,
    ExtractArgs, GenArgs, ValidateArgs,
};

/// Exit codes: 0 success, 1 augmentation shortfall or validation
/// violation, 2 configuration error, 3 data-integrity error.
pub fn exit_code_for(e: &daug_core::Error) -> i32 {
    match e {
        daug_core::Error::Config(_) | daug_core::Error::SynthSpec(_) => 2,
        _ => 3,
    }
}
