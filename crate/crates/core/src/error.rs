use thiserror::Error;

/// Problems found while reading or validating an instance description.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("malformed instance text: {0}")]
    Syntax(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` must be an integer")]
    NotInteger { field: String },
    #[error("field `{field}` is out of the supported range ({detail})")]
    OutOfRange { field: String, detail: String },
    #[error("coefficient count mismatch in `{field}`: expected {expected}, found {found}")]
    CoefficientCountMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("field `bits` must be at least 1, found {0}")]
    InvalidBits(i64),
    #[error("field `variables` must be at least 1, found {0}")]
    InvalidVariables(i64),
    #[error("field `{field}` must be \"ge\" or \"eq\", found {found}")]
    InvalidSense { field: String, found: String },
    #[error("field `{field}` has the wrong type: expected {expected}")]
    WrongType { field: String, expected: &'static str },
}

/// Structural problems with circuits and register layouts.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("qubit {qubit} is outside the layout of {total} qubits")]
    QubitOutOfRange { qubit: usize, total: usize },
    #[error("qubit {0} appears more than once in a gate")]
    RepeatedQubit(usize),
    #[error("rotation angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("register `{0}` overlaps another register")]
    OverlappingRegisters(String),
    #[error("registers leave qubit {0} unassigned")]
    LayoutGap(usize),
    #[error("duplicate register name `{0}`")]
    DuplicateRegister(String),
    #[error("circuit layouts differ ({left} vs {right} qubits)")]
    LayoutMismatch { left: usize, right: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("infeasible instance: no point of the search space satisfies every constraint")]
    Infeasible,
    #[error("size guard: {0}")]
    Guard(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("measurement over a state with zero probability mass")]
    ZeroMass,
    #[error("marginal snapshots were not recorded for this run")]
    MarginalsNotRecorded,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
