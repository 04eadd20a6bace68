//! Report rows distilled from run outcomes. The CSV column set is fixed:
//! `variant,n,m,d,delta,chi,pir_indices,ciphertexts,store_entries,rounds,bytes,ms`.

use crate::fpsu::Variant;
use crate::harness::runner::RunOutcome;

pub const CSV_HEADER: &str =
    "variant,n,m,d,delta,chi,pir_indices,ciphertexts,store_entries,rounds,bytes,ms";

#[derive(Debug, Clone)]
pub struct MeterRow {
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub delta: u64,
    pub chi: Option<u32>,
    pub pir_indices: u64,
    pub ciphertexts: u64,
    pub store_entries: u64,
    pub rounds: u32,
    pub bytes: u64,
    pub ms: f64,
}

impl MeterRow {
    pub fn from_outcome(
        variant: Variant,
        n: usize,
        m: usize,
        d: usize,
        delta: u64,
        outcome: &RunOutcome,
    ) -> Self {
        MeterRow {
            variant,
            n,
            m,
            d,
            delta,
            chi: outcome.chi,
            pir_indices: outcome.stats.pir_index_requests,
            ciphertexts: outcome.stats.ciphertexts_sent,
            store_entries: outcome.stats.store_entries.iter().map(|&e| e as u64).sum(),
            rounds: outcome.transcript.rounds(),
            bytes: outcome.transcript.total_bytes(),
            ms: outcome.stats.elapsed_ms,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.variant,
            self.n,
            self.m,
            self.d,
            self.delta,
            self.chi.map_or(String::new(), |c| c.to_string()),
            self.pir_indices,
            self.ciphertexts,
            self.store_entries,
            self.rounds,
            self.bytes,
            self.ms
        )
    }
}

/// One row per run, with the fixed header line.
pub fn meter_report(rows: &[MeterRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}
