//! Library side of the `ocp` command: dataset generation, previews,
//! statistics and evaluation.

pub mod error;
pub mod generate;
pub mod io;
pub mod preview;
pub mod report;

pub use error::CliError;
pub use generate::{run_generate, GenerateArgs, RunManifest};
pub use io::{load_config, DirImages};
pub use preview::{run_preview, PreviewArgs};
pub use report::{run_eval, run_stats};
