use thiserror::Error;

/// Errors raised by graph construction, spectral computations and the
/// manifold analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("edge `{edge}` has non-positive or non-finite length {length}")]
    NonpositiveLength { edge: String, length: f64 },
    #[error("Dirichlet condition at vertex `{vertex}` of degree {degree}")]
    DirichletAtInternalVertex { vertex: String, degree: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("vertex `{0}` has no incident edges")]
    IsolatedVertex(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("offset {offset} not strictly inside edge of length {length}")]
    OffsetOutOfRange { offset: f64, length: f64 },
    #[error("partition of vertex `{0}` does not split its edge-ends into two non-empty covering sets")]
    PartitionNotCovering(String),
    #[error("alphas {alpha1} + {alpha2} do not sum to {expected}")]
    AlphaSumMismatch { alpha1: f64, alpha2: f64, expected: f64 },
    #[error("cannot glue Dirichlet vertex `{0}`")]
    DirichletGlue(String),
    #[error("perturbation {epsilon} must be non-negative and below the minimal edge length {min_length}")]
    EpsilonTooLarge { epsilon: f64, min_length: f64 },

    #[error("wavenumber must be positive, got {0}")]
    NonpositiveK(f64),
    #[error("torus function is only defined for graphs with Neumann-Kirchhoff or Dirichlet conditions")]
    RobinNotSupportedOnTorus,
    #[error("torus point has {got} coordinates, graph has {expected} edges")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("found {found} eigenvalues, expected {expected:.3} +/- {tolerance}")]
    WeylCountMismatch { found: usize, expected: f64, tolerance: f64 },
    #[error("root refinement did not converge near k = {0}")]
    NoConvergence(f64),

    #[error("eigenspace at lambda = {lambda} has dimension {found}, expected {expected}")]
    NullSpaceDimensionMismatch { lambda: f64, expected: usize, found: usize },
    #[error("coordinate {x} outside edge of length {length}")]
    CoordinateOutOfRange { x: f64, length: f64 },

    #[error("graph is equivalent to a circle")]
    CircleExcluded,
    #[error("no admissible point found in the window after {0} candidates")]
    NoPointFound(usize),
    #[error("vertex `{0}` must have degree one")]
    NotALeaf(String),
    #[error("number of turns must be even, got {0}")]
    OddTurns(i64),
    #[error("theta path crosses a degeneracy near theta = {theta}")]
    PathThroughDegeneracy { theta: f64 },
    #[error("eigenvalue index {index} not available (computed {available})")]
    IndexOutOfRange { index: usize, available: usize },

    #[error("torus dimension {0} exceeds the supported maximum of 4")]
    DimensionTooLarge(usize),
    #[error("resolution {0} below the minimum of 16")]
    ResolutionTooSmall(usize),
    #[error("mesh export requires a three-edge graph, got {0}")]
    DimensionNot3(usize),
    #[error("gradient components of mixed sign at smooth cell {cell}")]
    MixedSignAtSmoothCell { cell: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical consistency check, as opposed to
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::WeylCountMismatch { .. }
                | Error::NoConvergence(_)
                | Error::NullSpaceDimensionMismatch { .. }
                | Error::NoPointFound(_)
                | Error::PathThroughDegeneracy { .. }
                | Error::MixedSignAtSmoothCell { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
