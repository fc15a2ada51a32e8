use std::fmt;

/// A command failure and the exit code it maps to: 2 for unreadable or
/// malformed inputs, 1 for everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Input(String),
    Domain(String),
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure::Input(message.into())
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Failure::Domain(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Domain(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Domain(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

impl From<tabsynth::Error> for Failure {
    fn from(e: tabsynth::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

/// Writes `contents`, mapping failures to input errors.
pub fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}
