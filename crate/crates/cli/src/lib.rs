//! Command-line front end for delaykit: JSON problem files in, CSV or JSON
//! tables out.

pub mod app;
pub mod config;
pub mod error;
pub mod expr;
pub mod run;
pub mod table;

pub use config::{parse_config, Kind, Overrides, ProblemConfig};
pub use error::CliError;
pub use run::{run, RunOutput};
pub use table::{Cell, Format, ResultTable};
