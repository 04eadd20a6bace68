//! The verification grid: seeded random instances per variant, each checked
//! against the brute-force union oracle, the membership-count leakage law,
//! and the count laws on the transcript.

use crate::crypto::KeyPair;
use crate::error::Result;
use crate::fpsu::{FpsuConfig, Variant};
use crate::harness::dataset::{gen_dataset, DatasetSpec, StructureClass};
use crate::harness::meter::MeterRow;
use crate::harness::runner::{run_protocol_with_keys, RunOutcome};
use crate::seed::derive_rng;
use crate::sokvs::RHO_SLACK;
use rand::Rng;
use rayon::prelude::*;

/// The parameter grid the verification trials draw from.
pub const GRID_N: [usize; 3] = [8, 16, 32];
pub const GRID_M: [usize; 3] = [2, 4, 8];
pub const GRID_D: [usize; 3] = [2, 3, 4];
pub const GRID_DELTA: [u64; 3] = [1, 2, 4];
pub const GRID_WIDTH: u32 = 16;
pub const GRID_LAMBDA: u32 = 40;

#[derive(Debug, Clone)]
pub struct TrialParams {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub delta: u64,
    pub inside: usize,
    pub exc_axis: usize,
    pub seed: u64,
}

/// Draws one grid point; `max_n` restricts the receiver size (the
/// residuosity sweep runs at n <= 16).
pub fn sample_params(variant: Variant, base_seed: u64, trial: u64, max_n: usize) -> TrialParams {
    let mut rng = derive_rng(base_seed, &format!("grid/{}/{}", variant, trial));
    let ns: Vec<usize> = GRID_N.iter().copied().filter(|&n| n <= max_n).collect();
    let n = ns[rng.gen_range(0..ns.len())];
    let m = GRID_M[rng.gen_range(0..GRID_M.len())];
    let d = GRID_D[rng.gen_range(0..GRID_D.len())];
    let delta = GRID_DELTA[rng.gen_range(0..GRID_DELTA.len())];
    TrialParams {
        n,
        m,
        d,
        delta,
        inside: rng.gen_range(0..=m),
        exc_axis: rng.gen_range(1..=d),
        seed: rng.gen(),
    }
}

#[derive(Debug, Clone)]
pub struct TrialReport {
    pub params: TrialParams,
    pub oracle_match: bool,
    pub leakage_match: bool,
    /// Count-law violations, empty when all hold.
    pub violations: Vec<String>,
    pub row: MeterRow,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.oracle_match && self.leakage_match && self.violations.is_empty()
    }
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Transcript-level count laws for one run.
pub fn check_count_laws(
    cfg: &FpsuConfig,
    n: usize,
    m: usize,
    outcome: &RunOutcome,
) -> Vec<String> {
    let mut violations = Vec::new();
    let capacity = cfg.store_capacity(n);
    for (idx, &entries) in outcome.stats.store_entries.iter().enumerate() {
        if entries != capacity {
            violations.push(format!(
                "store {idx}: {entries} entries, expected exactly {capacity}"
            ));
        }
    }

    // per dimension, per layer or candidate axis, at most alpha * m indices
    let units_per_batch: u64 = match cfg.variant {
        Variant::Ng | Variant::Nf => 1,
        Variant::Lay => outcome.chi.unwrap_or(1) as u64,
        Variant::Exc | Variant::Str => (cfg.dim - 1) as u64,
    };
    let alpha = 3u64;
    for &(axis, keys) in &outcome.stats.batch_sizes {
        if keys as u64 != units_per_batch * m as u64 {
            violations.push(format!(
                "axis {axis}: batch of {keys} keys, expected {} per unit x {units_per_batch}",
                m
            ));
        }
    }
    let bound = alpha * m as u64 * units_per_batch * outcome.stats.batch_sizes.len() as u64;
    if outcome.stats.pir_index_requests > bound {
        violations.push(format!(
            "PIR index requests {} exceed alpha*m bound {bound}",
            outcome.stats.pir_index_requests
        ));
    }

    let want_r = cfg.effective_lambda() as usize + ceil_log2(capacity).max(1) + RHO_SLACK;
    for (idx, &w) in outcome.stats.r_widths.iter().enumerate() {
        if w != want_r {
            violations.push(format!("R width {w} for store {idx}, expected {want_r}"));
        }
    }

    let want_rounds = if cfg.variant == Variant::Lay { 4 } else { 3 };
    if outcome.transcript.rounds() != want_rounds {
        violations.push(format!(
            "{} rounds, expected {want_rounds}",
            outcome.transcript.rounds()
        ));
    }
    violations
}

/// One seeded trial: generate, run, compare to the oracle.
pub fn run_trial(
    variant: Variant,
    cfg_template: &FpsuConfig,
    params: &TrialParams,
    reuse_keys: Option<&KeyPair>,
) -> Result<TrialReport> {
    let class = StructureClass::for_variant(variant, params.exc_axis);
    let spec = DatasetSpec {
        class,
        n: params.n,
        m: params.m,
        d: params.d,
        delta: params.delta,
        width_bits: GRID_WIDTH,
        inside_count: params.inside,
        seed: params.seed,
    };
    let (x, ys) = gen_dataset(&spec)?;

    let mut cfg = cfg_template.clone();
    cfg.variant = variant;
    cfg.dim = params.d;
    cfg.delta = params.delta;
    cfg.width_bits = GRID_WIDTH;
    cfg.exc_axis = params.exc_axis;

    let outcome = run_protocol_with_keys(&x, &ys, &cfg, params.seed ^ 0x5eed, reuse_keys)?;

    let thresholds = match class {
        StructureClass::NonFuzzyId => x.exact_first_axis_thresholds(),
        _ => x.uniform_thresholds(),
    };
    let expected = x.fuzzy_union_oracle_with_thresholds(&ys, &thresholds)?;
    let members = x.fuzzy_membership_count_with_thresholds(&ys, &thresholds)?;

    let row = MeterRow::from_outcome(variant, params.n, params.m, params.d, params.delta, &outcome);
    Ok(TrialReport {
        params: params.clone(),
        oracle_match: outcome.union == expected,
        leakage_match: outcome.zero_count == members,
        violations: check_count_laws(&cfg, params.n, ys.len(), &outcome),
        row,
    })
}

/// Runs `trials` seeded instances in parallel and collects the reports.
pub fn verify_grid(
    variant: Variant,
    cfg_template: &FpsuConfig,
    trials: u64,
    base_seed: u64,
    max_n: usize,
    reuse_keys: Option<&KeyPair>,
) -> Result<Vec<TrialReport>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let params = sample_params(variant, base_seed, t, max_n);
            run_trial(variant, cfg_template, &params, reuse_keys)
        })
        .collect()
}
