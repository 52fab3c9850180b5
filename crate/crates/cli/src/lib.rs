//! Experiment harness around the `gammaflow` library: run configuration,
//! the p-sweep pipeline, the acceptance criteria and the verification suite.
//!
//! Exit codes of the binary: 0 success, 1 failed verification, 2 invalid
//! input, 3 a minimisation that hit its iteration cap, 4 internal error.

pub mod config;
pub mod criteria;
pub mod pipeline;
pub mod verify;

use gammaflow::Error;

/// Some exponent of a sweep stopped at the iteration cap. Outputs are still
/// written; the binary exits with code 3.
#[derive(Debug, thiserror::Error)]
#[error("minimisation did not converge: {0}")]
pub struct NonConvergence(pub String);

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECKS_FAILED: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

fn library_code(e: &Error) -> u8 {
    match e {
        Error::NotMinimizer(_) => EXIT_NONCONVERGENCE,
        Error::Lp(_) => EXIT_INTERNAL,
        _ => EXIT_VALIDATION,
    }
}

/// Maps an error chain to the exit code of the binary.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<NonConvergence>() {
            return EXIT_NONCONVERGENCE;
        }
        if cause.is::<config::ConfigError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
        {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return library_code(e);
        }
    }
    EXIT_INTERNAL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let v: anyhow::Error = Error::Validation("x".into()).into();
        assert_eq!(exit_code(&v), EXIT_VALIDATION);
        let n: anyhow::Error = NonConvergence("p = 1.9".into()).into();
        assert_eq!(exit_code(&n.context("sweep")), EXIT_NONCONVERGENCE);
        let l: anyhow::Error = Error::Lp("cycling".into()).into();
        assert_eq!(exit_code(&l), EXIT_INTERNAL);
        assert_eq!(exit_code(&anyhow::anyhow!("unexpected")), EXIT_INTERNAL);
    }
}
