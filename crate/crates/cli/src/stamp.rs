use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use ponwatch::config::KvConfig;

/// Provenance written into every artifact.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub seed: u64,
    pub digest: String,
}

impl Stamp {
    pub fn new(cfg: &KvConfig, seed: u64) -> Self {
        Stamp { seed, digest: cfg.digest_hex() }
    }

    pub fn header(&self) -> String {
        format!("# ponwatch {} seed={} config={}\n", ponwatch::VERSION, self.seed, self.digest)
    }

    pub fn meta(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("ponwatch_version".to_string(), ponwatch::VERSION.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("config_digest".to_string(), self.digest.clone()),
        ])
    }

    /// Write `body` behind the provenance comment line.
    pub fn write(&self, path: &Path, body: &[u8]) -> anyhow::Result<()> {
        let mut bytes = self.header().into_bytes();
        bytes.extend_from_slice(body);
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}

/// Render into a buffer with a writer-taking function.
pub fn render<F>(f: F) -> anyhow::Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> ponwatch::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}
