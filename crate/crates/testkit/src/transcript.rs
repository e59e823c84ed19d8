use std::collections::BTreeMap;
use std::sync::Mutex;

use ecu_core::gateway::{Stage, TranscriptEntry, TranscriptSink};

/// Collects gateway transcript entries in arrival order.
#[derive(Debug, Default)]
pub struct TranscriptRecorder {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl TranscriptRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).is_empty()
    }

    pub fn clear(&self) {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }

    /// Entries grouped by correlation id, each group in arrival order.
    pub fn by_request(&self) -> BTreeMap<u64, Vec<TranscriptEntry>> {
        let mut out: BTreeMap<u64, Vec<TranscriptEntry>> = BTreeMap::new();
        for e in self.entries() {
            out.entry(e.correlation).or_default().push(e);
        }
        out
    }

    /// The message recorded at `stage` for one request, as text.
    pub fn message(&self, correlation: u64, stage: Stage) -> Option<String> {
        self.entries()
            .into_iter()
            .find(|e| e.correlation == correlation && e.stage == stage)
            .map(|e| String::from_utf8_lossy(&e.bytes).into_owned())
    }
}

impl TranscriptSink for TranscriptRecorder {
    fn record(&self, entry: TranscriptEntry) {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
    }
}
