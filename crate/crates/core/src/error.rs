use thiserror::Error;

/// Errors raised by site construction, value arithmetic and element building.
///
/// Check failures are never errors: they are recorded as counterexamples in a
/// [`crate::report::CheckReport`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("cannot compose {outer} after {inner}: {inner} does not land in the source of {outer}")]
    Composition { outer: String, inner: String },
    #[error("cospan {f} / {g} does not share a target")]
    Cospan { f: String, g: String },
    #[error("cannot paste {h}: it does not land in the source of {g}")]
    Pasting { g: String, h: String },
    #[error("{s} is not a section of {f}")]
    NotASection { f: String, s: String },
    #[error("value lives on {found} but {expected} was required")]
    Domain { expected: String, found: String },
    #[error("{g} does not land in the target {target} of the element support")]
    Index { g: String, target: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("site error: {0}")]
    Site(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("operation {0} has no image under the correspondence")]
    UnmappedOperation(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
