//! Append-only record files.
//!
//! Framing per record: `u32` big-endian payload length, payload, then the
//! SHA-256 of the payload. A torn final record (crash during append) is
//! dropped on read; a checksum failure anywhere else is corruption.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use thiserror::Error;

use crate::codec::Hash256;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt record at offset {0}")]
    Corrupt(usize),
}

#[derive(Clone, Debug)]
enum Backend {
    Memory(Arc<Mutex<Vec<u8>>>),
    File(PathBuf),
}

/// A durable append-only log. Cloning shares the underlying storage, which
/// is how a simulated node keeps its files across a crash.
#[derive(Clone, Debug)]
pub struct RecordLog {
    backend: Backend,
}

impl RecordLog {
    pub fn memory() -> Self {
        Self { backend: Backend::Memory(Arc::default()) }
    }

    pub fn file(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { backend: Backend::File(path) })
    }

    pub fn frame(payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(payload.len() + 36);
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(payload);
        out.extend_from_slice(Hash256::digest(payload).as_bytes());
        out
    }

    pub fn append(&self, payload: &[u8]) -> Result<(), LogError> {
        self.append_raw(&Self::frame(payload))
    }

    /// Writes raw bytes. Used to model a torn write.
    pub fn append_raw(&self, bytes: &[u8]) -> Result<(), LogError> {
        match &self.backend {
            Backend::Memory(m) => m.lock().extend_from_slice(bytes),
            Backend::File(p) => {
                let mut f = OpenOptions::new().append(true).open(p)?;
                f.write_all(bytes)?;
                f.sync_data()?;
            }
        }
        Ok(())
    }

    pub fn bytes(&self) -> Result<Vec<u8>, LogError> {
        Ok(match &self.backend {
            Backend::Memory(m) => m.lock().clone(),
            Backend::File(p) => {
                let mut v = Vec::new();
                File::open(p)?.read_to_end(&mut v)?;
                v
            }
        })
    }

    pub fn read_all(&self) -> Result<Vec<Vec<u8>>, LogError> {
        parse(&self.bytes()?)
    }

    /// Copies the log contents to a file.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        std::fs::write(path, self.bytes()?)?;
        Ok(())
    }
}

pub fn parse(buf: &[u8]) -> Result<Vec<Vec<u8>>, LogError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < buf.len() {
        if buf.len() - pos < 4 {
            break;
        }
        let n = u32::from_be_bytes(buf[pos..pos + 4].try_into().unwrap()) as usize;
        let end = pos + 4 + n + 32;
        if end > buf.len() {
            break;
        }
        let payload = &buf[pos + 4..pos + 4 + n];
        if Hash256::digest(payload).as_bytes()[..] != buf[pos + 4 + n..end] {
            return Err(LogError::Corrupt(pos));
        }
        out.push(payload.to_vec());
        pos = end;
    }
    Ok(out)
}
