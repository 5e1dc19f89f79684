use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("height parity violated at column {column}: n = {value} (even columns take odd n or 0, odd columns take even n)")]
    ParityViolation { column: u32, value: u32 },

    #[error("invalid lattice parameters: {0}")]
    InvalidSpec(String),

    #[error("profile has {got} columns, lattice expects {expected}")]
    ProfileLength { expected: usize, got: usize },

    #[error("site (column {column}, row {row}) is not in the region")]
    SiteNotInRegion { column: u32, row: i64 },

    #[error("deformation carries {got} values, region has {expected} sites")]
    DeformationLength { expected: usize, got: usize },

    #[error("deformation value is not finite at site index {0}")]
    NonFiniteValue(usize),

    #[error("bond length is zero at bond index {0} (singular potential)")]
    ZeroBondLength(usize),

    #[error("initial deformation violates orientation on {0} triangle(s)")]
    OrientationViolation(usize),

    #[error("Yosida slope parameter must be positive, got {0}")]
    NonPositiveSlope(f64),

    #[error("approximant volume {have} exceeds target {target}")]
    VolumeExceedsTarget { have: f64, target: f64 },

    #[error("approximant carries no mass, cannot rebalance")]
    DegenerateMass,

    #[error("profile is not Lipschitz (vertical segment at x = {0})")]
    NotLipschitz(f64),

    #[error("volume delta {0} is odd in half-step units; parity-preserving edits reach only even deltas")]
    OddVolumeDelta(i64),

    #[error("no host interval of positive height and constant slope long enough for a {0}-column block")]
    NoHostInterval(usize),

    #[error("column {column} cannot lose {remove} half-steps (has {have})")]
    InsufficientHeight { column: u32, remove: u32, have: u32 },

    #[error("cuts overlap at x = {0}")]
    OverlappingCuts(f64),

    #[error("invalid continuum profile: {0}")]
    InvalidProfile(String),

    #[error("mesh does not match the profile region: {0}")]
    MeshMismatch(String),

    #[error("mesh triangle {0} straddles the film/substrate line x2 = 0")]
    StraddlingTriangle(usize),

    #[error("rigid-motion fit needs at least 2 distinct sites")]
    UnderdeterminedFit,

    #[error("probe subregion contains no triangles")]
    EmptySubregion,

    #[error("annealing schedule is empty")]
    EmptySchedule,

    #[error("field is not defined at ({0}, {1})")]
    FieldDomain(f64, f64),

    #[error("document error: {0}")]
    Document(String),
}

pub type Result<T> = std::result::Result<T, Error>;
