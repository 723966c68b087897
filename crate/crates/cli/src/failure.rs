use dsym_core::conservation::ConservationError;
use dsym_core::detsolve::DetError;
use dsym_core::reduction::ReductionError;
use dsym_core::slsc::SlscError;
use dsym_core::system::SystemError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_RANK: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Error message with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Failure::new(EXIT_PARSE, message)
    }
}

fn system_code(e: &SystemError) -> i32 {
    match e {
        SystemError::Degenerate(_) => EXIT_DEGENERATE,
        _ => EXIT_PARSE,
    }
}

fn slsc_code(e: &SlscError) -> i32 {
    match e {
        SlscError::NoValidSample => EXIT_VERIFY,
        _ => EXIT_PARSE,
    }
}

fn det_code(e: &DetError) -> i32 {
    match e {
        DetError::RankUnstable { .. } | DetError::SingularLeading { .. } => EXIT_RANK,
        DetError::Verification { .. } | DetError::Sampling { .. } => EXIT_VERIFY,
        DetError::Slsc(s) => slsc_code(s),
        _ => EXIT_PARSE,
    }
}

impl From<SystemError> for Failure {
    fn from(e: SystemError) -> Self {
        Failure::new(system_code(&e), e.to_string())
    }
}

impl From<SlscError> for Failure {
    fn from(e: SlscError) -> Self {
        Failure::new(slsc_code(&e), e.to_string())
    }
}

impl From<DetError> for Failure {
    fn from(e: DetError) -> Self {
        Failure::new(det_code(&e), e.to_string())
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        let code = match &e {
            ReductionError::ZeroCrossing { .. }
            | ReductionError::Quadrature(_)
            | ReductionError::OrbitBudget { .. } => EXIT_VERIFY,
            ReductionError::Slsc(s) => slsc_code(s),
            ReductionError::System(s) => system_code(s),
            _ => EXIT_PARSE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ConservationError> for Failure {
    fn from(e: ConservationError) -> Self {
        let code = match &e {
            ConservationError::NotExact { .. }
            | ConservationError::Inconsistent { .. }
            | ConservationError::OrbitBudget { .. }
            | ConservationError::NoValidSample => EXIT_VERIFY,
            ConservationError::Det(d) => det_code(d),
            ConservationError::System(s) => system_code(s),
            _ => EXIT_PARSE,
        };
        Failure::new(code, e.to_string())
    }
}
