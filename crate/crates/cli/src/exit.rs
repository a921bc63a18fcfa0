use dirspeech_core::Error;

pub const VALIDATION: u8 = 1;
pub const IO: u8 = 2;
pub const BACKEND: u8 = 3;

/// Maps an error chain onto the exit-code classes.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io(_) | Error::Format(_) => IO,
                Error::Backend(_) => BACKEND,
                Error::Parse { .. } | Error::Validation(_) | Error::Argument(_) | Error::Config(_) => VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { IO } else { VALIDATION };
        }
    }
    VALIDATION
}

pub fn validation(msg: impl Into<String>) -> anyhow::Error {
    Error::Validation(msg.into()).into()
}
