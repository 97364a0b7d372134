use std::fmt;
use std::io::ErrorKind as IoKind;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Validation,
    Computation,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Validation => 2,
            Kind::Computation => 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Validation,
            message: message.into(),
        }
    }

    pub fn computation(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Computation,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind_str(), self.message)
    }
}

impl CliError {
    fn kind_str(&self) -> &'static str {
        match self.kind {
            Kind::Validation => "validation",
            Kind::Computation => "computation",
        }
    }
}

fn io_kind(e: &std::io::Error) -> Kind {
    match e.kind() {
        IoKind::NotFound | IoKind::PermissionDenied | IoKind::InvalidData | IoKind::IsADirectory => {
            Kind::Validation
        }
        _ => Kind::Computation,
    }
}

impl From<piqflow_core::Error> for CliError {
    fn from(e: piqflow_core::Error) -> Self {
        let kind = match &e {
            piqflow_core::Error::Io(io) => io_kind(io),
            piqflow_core::Error::Tile { source, .. } if source.is_validation() => Kind::Validation,
            e if e.is_validation() => Kind::Validation,
            _ => Kind::Computation,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            kind: io_kind(&e),
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::computation(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::computation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let e: CliError = piqflow_core::Error::Invalid("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = piqflow_core::Error::InsufficientData("x".into()).into();
        assert_eq!(e.exit_code(), 3);
        let missing = std::io::Error::new(IoKind::NotFound, "gone");
        assert_eq!(CliError::from(piqflow_core::Error::Io(missing)).exit_code(), 2);
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::from_str(&CliError::validation("bad").to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "validation");
        assert_eq!(v["error"]["message"], "bad");
    }
}
