use std::fmt;

/// Bad flag values or flag combinations detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const OK: i32 = 0;
pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const NUMERIC: i32 = 3;

/// Maps an error chain to a process exit code.
pub fn code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<neuroalign::Error>() {
            return match e {
                neuroalign::Error::InvalidArgument(_) | neuroalign::Error::InvalidSpec(_) => USAGE,
                neuroalign::Error::NonFinite(_) | neuroalign::Error::Diverged(_) | neuroalign::Error::ZeroNorm { .. } => {
                    NUMERIC
                }
                _ => DATA,
            };
        }
    }
    DATA
}
