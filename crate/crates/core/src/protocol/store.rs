use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::hash::Hash32;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no proof stored under {0}")]
    Missing(Hash32),
    #[error("stored bytes for {0} hash to a different value")]
    HashMismatch(Hash32),
    #[error("proof store i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
enum Backend {
    Memory(BTreeMap<Hash32, Vec<u8>>),
    Directory(PathBuf),
}

/// Content-addressed proof documents keyed by SHA-256. The directory backend
/// names each file by the lowercase hex of its hash.
#[derive(Debug, Clone)]
pub struct ProofStore {
    backend: Backend,
}

impl ProofStore {
    pub fn in_memory() -> Self {
        ProofStore { backend: Backend::Memory(BTreeMap::new()) }
    }

    pub fn at_dir(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ProofStore { backend: Backend::Directory(dir.as_ref().to_path_buf()) })
    }

    pub fn put(&mut self, bytes: &[u8]) -> Result<Hash32, StoreError> {
        let hash = Hash32::of(bytes);
        self.write_raw(&hash, bytes)?;
        Ok(hash)
    }

    /// Returns the document for `hash`, rejecting content that does not hash
    /// to the key it is stored under.
    pub fn get(&self, hash: &Hash32) -> Result<Vec<u8>, StoreError> {
        let bytes = match &self.backend {
            Backend::Memory(map) => map.get(hash).cloned().ok_or(StoreError::Missing(*hash))?,
            Backend::Directory(dir) => match fs::read(dir.join(hash.to_hex())) {
                Ok(b) => b,
                Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::Missing(*hash)),
                Err(e) => return Err(e.into()),
            },
        };
        if Hash32::of(&bytes) != *hash {
            return Err(StoreError::HashMismatch(*hash));
        }
        Ok(bytes)
    }

    /// Stores `bytes` under `hash` without checking; used to simulate a
    /// tampered or corrupted store.
    pub fn write_raw(&mut self, hash: &Hash32, bytes: &[u8]) -> Result<(), StoreError> {
        match &mut self.backend {
            Backend::Memory(map) => {
                map.insert(*hash, bytes.to_vec());
            }
            Backend::Directory(dir) => fs::write(dir.join(hash.to_hex()), bytes)?,
        }
        Ok(())
    }

    pub fn remove(&mut self, hash: &Hash32) -> Result<(), StoreError> {
        match &mut self.backend {
            Backend::Memory(map) => {
                map.remove(hash);
            }
            Backend::Directory(dir) => match fs::remove_file(dir.join(hash.to_hex())) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
                _ => {}
            },
        }
        Ok(())
    }
}
