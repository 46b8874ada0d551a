use fdp_core::Error;

/// Exit status for validation errors, including capacity and unsupported requests.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit status for numerical failures and violated approximation assumptions.
pub const EXIT_NUMERICAL: u8 = 3;
/// Exit status for I/O and audit infrastructure failures.
pub const EXIT_INFRA: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(m: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: m.into() }
    }

    pub fn infra(m: impl Into<String>) -> Self {
        CliError { code: EXIT_INFRA, message: m.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) | Error::AssumptionViolated(_) => EXIT_NUMERICAL,
            Error::InvalidParameter(_)
            | Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::Capacity(_)
            | Error::Unsupported(_) => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}
