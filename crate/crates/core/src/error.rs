use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),
    #[error("invalid clause: {0}")]
    InvalidClause(String),
    #[error("session `{0}` has no split assignment")]
    UnassignedSession(String),
    #[error("duplicate session id `{0}`")]
    DuplicateSession(String),
    #[error("feature space is empty at rare threshold {threshold}")]
    EmptyFeatureSpace { threshold: u32 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("agreement undefined: data contains a single value")]
    ConstantData,
    #[error("feature space fingerprint does not match the one the model was trained with")]
    SpaceMismatch,
}
