pub mod augment;
pub mod bench;
pub mod extract;
pub mod gen;
pub mod validate;

pub use augment::{cmd_augment, AugmentArgs};
pub use bench::{cmd_bench, BenchArgs};
pub use extract::{cmd_extract, ExtractArgs};
pub use gen::{cmd_gen, CorpusSpec, GenArgs};
pub use validate::{cmd_validate, ValidateArgs};
