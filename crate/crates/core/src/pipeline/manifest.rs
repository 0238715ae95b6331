use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounts {
    pub papers_seen: usize,
    pub papers_candidate: usize,
    pub papers_target: usize,
    pub tables_seen: usize,
    pub tables_target: usize,
    /// Drafts that came out of extraction (final attempt of each table).
    pub records_extracted: usize,
    /// Extracted records that passed validation and survived fusion.
    pub records_validated: usize,
    pub records_quarantined: usize,
    /// Extracted records folded into a duplicate during fusion.
    pub records_dedup_removed: usize,
    /// Records read from external datasets.
    pub records_fused: usize,
    pub records_unified: usize,
    pub cells_skipped: usize,
    pub subjects_quarantined: usize,
}

impl RunCounts {
    pub fn accounting_holds(&self) -> bool {
        self.records_extracted == self.records_validated + self.records_quarantined + self.records_dedup_removed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_digest: String,
    pub corpus_digest: String,
    pub backend_id: String,
    pub counts: RunCounts,
    pub rollback_events: usize,
    pub rollback_resolved: usize,
    pub max_attempts_used: u32,
    pub load_warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    /// The manifest without its wall time, for comparing runs.
    pub fn identity(&self) -> RunManifest {
        RunManifest { wall_time_s: 0.0, ..self.clone() }
    }

    /// 0 on a clean run, 2 when anything was quarantined.
    pub fn exit_code(&self) -> i32 {
        if self.counts.records_quarantined > 0 || self.counts.subjects_quarantined > 0 {
            2
        } else {
            0
        }
    }
}
