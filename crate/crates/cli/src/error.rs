use std::fmt;

use pacroute_core::CoreError;
use pacroute_gateway::GatewayError;

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// No threshold met the budget; the policy was still written.
    Infeasible,
    /// A simulation assertion failed; the report was still written.
    AssertionFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::AssertionFailed => 1,
            Status::Infeasible => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Transport,
    Config,
}

impl FailureKind {
    pub fn code(self) -> u8 {
        match self {
            FailureKind::Transport => 3,
            FailureKind::Config => 4,
        }
    }
}

/// A failed run: the cause plus the class that picks the exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::Config,
            error: error.into(),
        }
    }

    pub fn msg(message: impl fmt::Display) -> Self {
        Self::config(anyhow::anyhow!("{message}"))
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }

    pub fn context(self, context: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(context),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn gateway_kind(e: &GatewayError) -> FailureKind {
    match e {
        GatewayError::Transport { .. } | GatewayError::Decode(_) => FailureKind::Transport,
        GatewayError::Core(c) => core_kind(c),
        _ => FailureKind::Config,
    }
}

fn core_kind(e: &CoreError) -> FailureKind {
    match e {
        CoreError::Oracle { source, .. } => match source.downcast_ref::<GatewayError>() {
            Some(g) => gateway_kind(g),
            None => FailureKind::Config,
        },
        _ => FailureKind::Config,
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        Self {
            kind: gateway_kind(&e),
            error: e.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self {
            kind: core_kind(&e),
            error: e.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(e)
    }
}
