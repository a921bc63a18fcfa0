use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use tempfile::NamedTempFile;

/// A file written next to its destination and moved into place on
/// `commit`, so an interrupted run never leaves a truncated output.
pub struct AtomicFile {
    dest: PathBuf,
    writer: BufWriter<NamedTempFile>,
}

impl AtomicFile {
    pub fn create(dest: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let dest = dest.into();
        let dir = dest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(dirspeech_core::Error::Io).with_context(|| format!("creating {}", dir.display()))?;
        let tmp = NamedTempFile::new_in(dir).map_err(dirspeech_core::Error::Io).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
        Ok(Self { dest, writer: BufWriter::new(tmp) })
    }

    pub fn json_line<T: Serialize>(&mut self, value: &T) -> anyhow::Result<()> {
        serde_json::to_writer(&mut self.writer, value)?;
        self.writer.write_all(b"\n").map_err(dirspeech_core::Error::Io)?;
        Ok(())
    }

    pub fn writer(&mut self) -> &mut impl Write {
        &mut self.writer
    }

    pub fn commit(self) -> anyhow::Result<PathBuf> {
        let tmp = self.writer.into_inner().map_err(|e| dirspeech_core::Error::Io(e.into_error()))?;
        tmp.persist(&self.dest).map_err(|e| dirspeech_core::Error::Io(e.error)).with_context(|| format!("writing {}", self.dest.display()))?;
        Ok(self.dest)
    }
}

pub fn write_json_pretty<T: Serialize>(dest: impl Into<PathBuf>, value: &T) -> anyhow::Result<PathBuf> {
    let mut f = AtomicFile::create(dest)?;
    serde_json::to_writer_pretty(f.writer(), value)?;
    f.writer().write_all(b"\n").map_err(dirspeech_core::Error::Io)?;
    f.commit()
}
