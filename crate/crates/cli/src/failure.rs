use std::fmt;
use std::process::ExitCode;

use serde::Serialize;

/// Everything that ends a run with a nonzero exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or a missing input file. Exit 2.
    Usage(String),
    /// Unreadable or unusable input. Exit 3.
    Input { kind: String, message: String },
    /// A numerical routine gave up. Exit 4.
    Numerical { kind: String, message: String },
    /// A checked property failed. Exit 5.
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input { .. } => 3,
            Failure::Numerical { .. } => 4,
            Failure::Verification(_) => 5,
        }
    }

    fn kind(&self) -> &str {
        match self {
            Failure::Usage(_) => "Usage",
            Failure::Input { kind, .. } | Failure::Numerical { kind, .. } => kind,
            Failure::Verification(_) => "VerificationFailed",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) => m,
            Failure::Input { message, .. } | Failure::Numerical { message, .. } => message,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            error: &'a str,
            message: &'a str,
            exit_code: u8,
        }
        serde_json::to_string(&Out {
            error: self.kind(),
            message: self.message(),
            exit_code: self.exit_code(),
        })
        .expect("plain struct serializes")
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<polycurve::Error> for Failure {
    fn from(e: polycurve::Error) -> Self {
        use polycurve::Error as E;
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("Error")
            .to_string();
        let message = e.to_string();
        match e {
            E::DegreeZero
            | E::SingularAtOrigin { .. }
            | E::EpsNotDivisor { .. }
            | E::ApertureTooWide { .. }
            | E::DegenerateTorsion
            | E::ZeroVolume
            | E::InvalidInput(_) => Failure::Input { kind, message },
            _ => Failure::Numerical { kind, message },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input {
            kind: "Io".into(),
            message: e.to_string(),
        }
    }
}
