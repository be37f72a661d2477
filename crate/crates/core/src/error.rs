use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar argument was outside its admissible range.
    #[error("{name} out of range: {value:e} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error("SNR is undefined without transmitted molecules")]
    NoSignal,

    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),

    #[error("threshold {threshold:e} m^-3 must lie below the peak concentration {peak:e} m^-3")]
    ThresholdAbovePeak { threshold: f64, peak: f64 },

    #[error("memory length {0} exceeds the enumeration limit of {max}", max = crate::detection::MAX_MEMORY_LENGTH)]
    MemoryTooLong(usize),

    #[error("ISI pattern has {got} bits but the tap vector carries memory length {expected}")]
    PatternLength { expected: usize, got: usize },

    #[error("cannot normalize a constant series")]
    DegenerateNormalization,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
