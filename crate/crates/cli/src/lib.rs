//! Derivation scripts for the grassfield engine: a small language, its
//! interpreter and structured run reports.

pub mod dsl;
pub mod interp;
pub mod report;

use std::fmt;

pub use dsl::{parse_script, render_script, ParseError};
pub use interp::{bind_check, run_script, BindError, Options};
pub use report::{AssertionRecord, OracleRecord, Report, Status};

/// Reasons a script could not be started.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptError {
    Parse(ParseError),
    Bind(Vec<BindError>),
}

impl ScriptError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

impl fmt::Display for ScriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptError::Parse(e) => write!(f, "{e}"),
            ScriptError::Bind(es) => {
                let lines: Vec<String> = es.iter().map(|e| e.to_string()).collect();
                f.write_str(&lines.join("\n"))
            }
        }
    }
}

impl std::error::Error for ScriptError {}

/// Parses, bind-checks and runs script text.
pub fn run_source(src: &str, script_name: &str, opts: &Options) -> Result<Report, ScriptError> {
    let script = parse_script(src).map_err(ScriptError::Parse)?;
    bind_check(&script).map_err(ScriptError::Bind)?;
    Ok(run_script(&script, script_name, opts))
}
