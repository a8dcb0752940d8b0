//! FDTD pairing results kept on disk between runs, one array file per key.

use std::fs;
use std::path::PathBuf;

use bslab_core::arrayio::{decode, encode};
use bslab_core::scattering::PairingCache;
use sha2::{Digest, Sha256};

pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{}.bslb", hex::encode(Sha256::digest(key.as_bytes()))))
    }
}

impl PairingCache for DiskCache {
    fn load(&self, key: &str) -> Option<Vec<f64>> {
        let bytes = fs::read(self.path(key)).ok()?;
        match decode(&bytes) {
            Ok((_, values)) => Some(values),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry: {e}");
                None
            }
        }
    }

    fn store(&self, key: &str, values: &[f64]) {
        let path = self.path(key);
        let tmp = path.with_extension("tmp");
        let result = encode(&[values.len()], values)
            .map_err(std::io::Error::other)
            .and_then(|bytes| fs::write(&tmp, bytes))
            .and_then(|_| fs::rename(&tmp, &path));
        if let Err(e) = result {
            log::warn!("could not store cache entry {}: {e}", path.display());
        }
    }
}
