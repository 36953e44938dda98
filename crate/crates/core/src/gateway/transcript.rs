//! Line-delimited JSON transcripts of model calls.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the rendered prompt bytes.
pub fn digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub prompt: String,
    pub response: String,
    pub latency_ms: u64,
}

impl TranscriptEntry {
    pub fn new(prompt: impl Into<String>, response: impl Into<String>) -> Self {
        let prompt = prompt.into();
        Self {
            digest: digest(&prompt),
            prompt,
            response: response.into(),
            latency_ms: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, prompt: impl Into<String>, response: impl Into<String>) {
        self.entries.push(TranscriptEntry::new(prompt, response));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

/// Replay lookup: the n-th request for a digest gets the n-th recorded
/// response for it; once those run out the last one repeats.
#[derive(Debug, Default)]
pub(crate) struct ReplayIndex {
    by_digest: HashMap<String, Vec<usize>>,
    cursor: HashMap<String, usize>,
}

impl ReplayIndex {
    pub(crate) fn build(t: &Transcript) -> Self {
        let mut by_digest: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in t.entries.iter().enumerate() {
            by_digest.entry(e.digest.clone()).or_default().push(i);
        }
        Self {
            by_digest,
            cursor: HashMap::new(),
        }
    }

    pub(crate) fn next(&mut self, digest: &str) -> Option<usize> {
        let slots = self.by_digest.get(digest)?;
        let c = self.cursor.entry(digest.to_string()).or_insert(0);
        let idx = slots[(*c).min(slots.len() - 1)];
        *c += 1;
        Some(idx)
    }
}
