use gvarsv_core::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, missing or malformed inputs.
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    /// Some countries failed; the rest were written.
    #[error("{message}")]
    Partial { message: String, code: i32 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
            CliError::Core(e) => core_code(e),
            CliError::Partial { code, .. } => *code,
        }
    }
}

/// Errors a user can fix by changing inputs or settings exit with 2;
/// numerical breakdowns and broken invariants with 1.
pub fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Parse { .. }
        | CoreError::NoRows(_)
        | CoreError::MissingSeries(_)
        | CoreError::NonPositiveLevel { .. }
        | CoreError::Gap { .. }
        | CoreError::WeightSum { .. }
        | CoreError::IsolatedCountry(_)
        | CoreError::MissingPartnerVariable { .. }
        | CoreError::TrainingTooShort { .. }
        | CoreError::ZeroVariance(_)
        | CoreError::SignRestrictionCap { .. }
        | CoreError::TooFewDraws { .. }
        | CoreError::Config(_)
        | CoreError::Io { .. }
        | CoreError::Csv(_) => 2,
        CoreError::Invariant(_)
        | CoreError::NonFiniteDraw { .. }
        | CoreError::NonFiniteSimulation { .. }
        | CoreError::NotPositiveDefinite(_)
        | CoreError::Singular { .. }
        | CoreError::Json(_) => 1,
    }
}
