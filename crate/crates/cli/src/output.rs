use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::Usage(format!("unknown format '{other}', expected csv or json"))),
        }
    }
}

/// Where results and human-readable notes go. Notes use stdout unless the
/// results themselves are being written there.
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Output {
    pub fn note(&self, msg: &str) {
        if self.path.is_some() {
            println!("{msg}");
        } else {
            eprintln!("{msg}");
        }
    }

    pub fn warn(&self, msg: &str) {
        eprintln!("warning: {msg}");
    }

    pub fn emit(&self, write: impl FnOnce(&mut dyn Write, Format) -> symmpi::Result<()>) -> Result<(), CliError> {
        match &self.path {
            Some(path) => {
                let file = File::create(path)
                    .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
                let mut w = BufWriter::new(file);
                write(&mut w, self.format)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                write(&mut w, self.format)?;
                if self.format == Format::Json {
                    writeln!(w)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}
