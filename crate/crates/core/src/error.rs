use std::fmt;

/// Named enumeration limits. Each exponential sum in the crate is gated by one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    /// Number of vertex labelings a trace sum would visit.
    Maps,
    /// Number of partition tuples an exhaustive search would visit.
    Partitions,
    /// Dimension of a dense full-space matrix.
    Dense,
}

impl fmt::Display for GuardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardKind::Maps => "maps",
            GuardKind::Partitions => "partitions",
            GuardKind::Dense => "dense",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("{kind} guard exceeded: {needed} > {limit}")]
    GuardExceeded {
        kind: GuardKind,
        needed: u128,
        limit: u128,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Resource limits for the exponential enumerations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guards {
    /// Upper bound on vertex labelings per trace evaluation.
    pub maps: u128,
    /// Upper bound on partition tuples per exhaustive search.
    pub partitions: u128,
    /// Upper bound on the side length of dense full-space matrices.
    pub dense_dim: u128,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            maps: 1 << 24,
            partitions: 10_000_000,
            dense_dim: 1 << 20,
        }
    }
}

impl Guards {
    pub(crate) fn check(&self, kind: GuardKind, needed: u128) -> Result<()> {
        let limit = match kind {
            GuardKind::Maps => self.maps,
            GuardKind::Partitions => self.partitions,
            GuardKind::Dense => self.dense_dim,
        };
        if needed > limit {
            Err(Error::GuardExceeded {
                kind,
                needed,
                limit,
            })
        } else {
            Ok(())
        }
    }
}

/// `base^exp` saturating at `u128::MAX`.
pub(crate) fn saturating_pow(base: u128, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base);
    }
    acc
}
