//! Split oblivious key-value store.
//!
//! A key maps to two keyed pseudorandom rows: a sparse row `l(q)` with
//! exactly `α` ones over the long vector `L`, and a dense row `r(q)` over
//! the short vector `R` of `ρ = λ + ⌈log2 N⌉ + slack` positions. Encoding
//! solves the linear system `⟨l(k_i)‖r(k_i), L‖R⟩ = c_i` over the
//! ciphertext group: the sparse part is triangulated by repeatedly deferring
//! rows that own a degree-one column (a free pivot), the small residual core
//! is eliminated densely over the plaintext ring with the same row
//! operations applied to the ciphertext column, and every unconstrained
//! cell is filled with a fresh random ciphertext. Decoding a key — on
//! either side — is the inner product against `l(q)‖r(q)`, that is, a
//! homomorphic sum of `α` cells of `L` and about `ρ/2` cells of `R`.
//!
//! `L` stays with the encoder; only `R` and the mapping seeds travel.

use crate::crypto::{CipherValue, PublicKey};
use crate::error::{Error, Result};
use crate::seed;
use crate::wire::{self, Reader};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use std::collections::HashSet;

/// Left-row weight.
pub const DEFAULT_ALPHA: usize = 3;
/// |L| = ceil(EXPANSION_NUM/EXPANSION_DEN * N).
const EXPANSION_NUM: usize = 13;
const EXPANSION_DEN: usize = 10;
/// Extra width of R beyond lambda + ceil(log2 N).
pub const RHO_SLACK: usize = 8;
const DEFAULT_MAX_RETRIES: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SokvsParams {
    capacity: usize,
    alpha: usize,
    left_len: usize,
    rho: usize,
    lambda: u32,
    seed: [u8; 32],
    max_retries: u32,
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Both parties end up holding an identical copy: the mappings are public.
pub fn sokvs_setup<R: Rng>(_kappa: u32, lambda: u32, capacity: usize, rng: &mut R) -> SokvsParams {
    assert!(capacity >= 1, "store capacity must be positive");
    let left_len = (capacity * EXPANSION_NUM)
        .div_ceil(EXPANSION_DEN)
        .max(DEFAULT_ALPHA);
    let rho = lambda as usize + ceil_log2(capacity).max(1) + RHO_SLACK;
    let mut s = [0u8; 32];
    rng.fill(&mut s);
    SokvsParams {
        capacity,
        alpha: DEFAULT_ALPHA,
        left_len,
        rho,
        lambda,
        seed: s,
        max_retries: DEFAULT_MAX_RETRIES,
    }
}

impl SokvsParams {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn left_len(&self) -> usize {
        self.left_len
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        wire::put_u64(out, self.capacity as u64);
        wire::put_u8(out, self.alpha as u8);
        wire::put_u64(out, self.left_len as u64);
        wire::put_u32(out, self.rho as u32);
        wire::put_u32(out, self.lambda);
        out.extend_from_slice(&self.seed);
        wire::put_u32(out, self.max_retries);
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let capacity = r.u64()? as usize;
        let alpha = r.u8()? as usize;
        let left_len = r.u64()? as usize;
        let rho = r.u32()? as usize;
        let lambda = r.u32()?;
        let seed: [u8; 32] = r.fixed(32)?.try_into().unwrap();
        let max_retries = r.u32()?;
        if alpha == 0 || left_len < alpha || rho == 0 {
            return Err(Error::Wire("inconsistent store parameters".into()));
        }
        Ok(SokvsParams {
            capacity,
            alpha,
            left_len,
            rho,
            lambda,
            seed,
            max_retries,
        })
    }
}

/// Sparse binary row: the `α` one-positions over `[left_len]`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRow {
    pub len: usize,
    pub ones: Vec<usize>,
}

fn derive_rows(params: &SokvsParams, attempt: u32, q: &[u8]) -> (Vec<usize>, Vec<u64>) {
    let mut material = Vec::with_capacity(36 + q.len());
    material.extend_from_slice(&params.seed);
    material.extend_from_slice(&attempt.to_be_bytes());
    material.extend_from_slice(q);
    let mut rng = seed::rng_from_bytes(&material, "sokvs-row");
    let mut ones = Vec::with_capacity(params.alpha);
    while ones.len() < params.alpha {
        let pos = rng.gen_range(0..params.left_len);
        if !ones.contains(&pos) {
            ones.push(pos);
        }
    }
    ones.sort_unstable();
    let words = params.rho.div_ceil(64);
    let mut right = vec![0u64; words];
    for w in right.iter_mut() {
        *w = rng.gen();
    }
    let tail = params.rho % 64;
    if tail != 0 {
        right[words - 1] &= (1u64 << tail) - 1;
    }
    (ones, right)
}

/// `l(q)` as its non-zero index set; deterministic in (seed, q).
pub fn row_left(params: &SokvsParams, q: &[u8]) -> SparseRow {
    row_left_attempt(params, 0, q)
}

pub(crate) fn row_left_attempt(params: &SokvsParams, attempt: u32, q: &[u8]) -> SparseRow {
    SparseRow {
        len: params.left_len,
        ones: derive_rows(params, attempt, q).0,
    }
}

/// `r(q)` as packed bit words of width `ρ`.
pub fn row_right(params: &SokvsParams, q: &[u8]) -> Vec<u64> {
    derive_rows(params, 0, q).1
}

#[derive(Debug, Clone)]
pub struct SplitEncoding {
    pub attempt: u32,
    pub left: Vec<CipherValue>,
    pub right: Vec<CipherValue>,
}

/// Encodes with the setup-fixed mappings only (attempt 0). This is the
/// protocol path: the querier derived its rows from the setup message, so a
/// reseed here would desynchronize the parties. Failure probability is the
/// 2^-λ encode budget.
pub fn sokvs_encode_pinned<R: Rng>(
    params: &SokvsParams,
    pairs: &[(Vec<u8>, CipherValue)],
    pk: &PublicKey,
    rng: &mut R,
) -> Result<SplitEncoding> {
    encode_inner(params, pairs, pk, rng, 0)
}

/// Standalone encoding: on a singular system, re-derive the mappings with a
/// salted attempt counter, up to `max_retries` reseedings. The surviving
/// attempt is recorded in the encoding and honored by the local decoder.
pub fn sokvs_encode<R: Rng>(
    params: &SokvsParams,
    pairs: &[(Vec<u8>, CipherValue)],
    pk: &PublicKey,
    rng: &mut R,
) -> Result<SplitEncoding> {
    encode_inner(params, pairs, pk, rng, params.max_retries)
}

fn encode_inner<R: Rng>(
    params: &SokvsParams,
    pairs: &[(Vec<u8>, CipherValue)],
    pk: &PublicKey,
    rng: &mut R,
    max_retries: u32,
) -> Result<SplitEncoding> {
    if pairs.len() > params.capacity {
        return Err(Error::InvalidParameter(format!(
            "{} pairs exceed store capacity {}",
            pairs.len(),
            params.capacity
        )));
    }
    let mut keys = HashSet::with_capacity(pairs.len());
    for (k, _) in pairs {
        if !keys.insert(k.as_slice()) {
            return Err(Error::DuplicateKeys);
        }
    }
    for attempt in 0..=max_retries {
        if let Some(enc) = try_encode(params, pairs, pk, rng, attempt)? {
            return Ok(enc);
        }
    }
    Err(Error::EncodeFailure {
        attempts: max_retries + 1,
    })
}

struct Row {
    left: Vec<usize>,
    right: Vec<u64>,
}

impl Row {
    fn right_bits(&self, rho: usize) -> impl Iterator<Item = usize> + '_ {
        (0..rho).filter(move |j| self.right[j / 64] >> (j % 64) & 1 == 1)
    }
}

fn try_encode<R: Rng>(
    params: &SokvsParams,
    pairs: &[(Vec<u8>, CipherValue)],
    pk: &PublicKey,
    rng: &mut R,
    attempt: u32,
) -> Result<Option<SplitEncoding>> {
    let n = pairs.len();
    let rows: Vec<Row> = pairs
        .iter()
        .map(|(k, _)| {
            let (left, right) = derive_rows(params, attempt, k);
            Row { left, right }
        })
        .collect();

    // Sparse phase: defer any row owning a column no other active row uses.
    let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); params.left_len];
    let mut degree: Vec<u32> = vec![0; params.left_len];
    for (r, row) in rows.iter().enumerate() {
        for &c in &row.left {
            col_rows[c].push(r as u32);
            degree[c] += 1;
        }
    }
    let mut active = vec![true; n];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut queue: std::collections::VecDeque<usize> =
        (0..params.left_len).filter(|&c| degree[c] == 1).collect();
    while let Some(c) = queue.pop_front() {
        if degree[c] != 1 {
            continue;
        }
        let r = *col_rows[c]
            .iter()
            .find(|&&r| active[r as usize])
            .expect("degree-one column has an active row") as usize;
        stack.push((r, c));
        active[r] = false;
        for &c2 in &rows[r].left {
            degree[c2] -= 1;
            if c2 != c && degree[c2] == 1 {
                queue.push_back(c2);
            }
        }
    }

    let mut left_cells: Vec<Option<CipherValue>> = vec![None; params.left_len];
    let mut right_cells: Vec<Option<CipherValue>> = vec![None; params.rho];

    // Dense core: the rows whose sparse columns all stayed contested. Their
    // dense tails make the residual system full rank with overwhelming
    // probability; eliminate over the plaintext ring, mirroring every row
    // operation on the ciphertext column.
    let core: Vec<usize> = (0..n).filter(|&r| active[r]).collect();
    if !core.is_empty() {
        let mut core_cols: Vec<usize> = core
            .iter()
            .flat_map(|&r| rows[r].left.iter().copied())
            .collect();
        core_cols.sort_unstable();
        core_cols.dedup();
        let left_core_cols = core_cols.len();
        let width = left_core_cols + params.rho;
        let modulus = pk.plaintext_modulus();

        let mut mat: Vec<Vec<BigUint>> = Vec::with_capacity(core.len());
        let mut rhs: Vec<CipherValue> = Vec::with_capacity(core.len());
        for &r in &core {
            let mut coeffs = vec![BigUint::zero(); width];
            for &c in &rows[r].left {
                let idx = core_cols.binary_search(&c).unwrap();
                coeffs[idx] = BigUint::one();
            }
            for j in rows[r].right_bits(params.rho) {
                coeffs[left_core_cols + j] = BigUint::one();
            }
            mat.push(coeffs);
            rhs.push(pairs[r].1.clone());
        }

        let mut pivot_of_row: Vec<Option<usize>> = vec![None; core.len()];
        let mut is_pivot_col = vec![false; width];
        let mut pivoted_rows = 0usize;
        for c in 0..width {
            let Some(r) =
                (0..core.len()).find(|&r| pivot_of_row[r].is_none() && !mat[r][c].is_zero())
            else {
                continue;
            };
            let inv = match crate::crypto::primes::mod_inverse(&mat[r][c], &modulus) {
                Some(inv) => inv,
                None => return Ok(None), // composite ring corner: treat as singular
            };
            if !inv.is_one() {
                for x in mat[r].iter_mut() {
                    *x = (&*x * &inv) % &modulus;
                }
                rhs[r] = pk.scalar_mul(&inv, &rhs[r])?;
            }
            for r2 in 0..core.len() {
                if r2 == r || mat[r2][c].is_zero() {
                    continue;
                }
                let f = std::mem::replace(&mut mat[r2][c], BigUint::zero());
                for x in 0..width {
                    if x == c || mat[r][x].is_zero() {
                        continue;
                    }
                    let delta = (&f * &mat[r][x]) % &modulus;
                    let (up, dn) = (std::mem::take(&mut mat[r2][x]), delta);
                    mat[r2][x] = ((up + &modulus) - dn) % &modulus;
                }
                let scaled = pk.scalar_mul(&f, &rhs[r])?;
                rhs[r2] = pk.sub_ct(&rhs[r2], &scaled)?;
            }
            pivot_of_row[r] = Some(c);
            is_pivot_col[c] = true;
            pivoted_rows += 1;
            if pivoted_rows == core.len() {
                break;
            }
        }
        if pivot_of_row.iter().any(|p| p.is_none()) {
            return Ok(None); // rank deficient
        }

        let mut core_cells: Vec<Option<CipherValue>> = vec![None; width];
        for (c, cell) in core_cells.iter_mut().enumerate() {
            if !is_pivot_col[c] {
                *cell = Some(pk.random_cipher(rng));
            }
        }
        for r in 0..core.len() {
            let c = pivot_of_row[r].unwrap();
            let mut acc = rhs[r].clone();
            for x in 0..width {
                if x == c || mat[r][x].is_zero() {
                    continue;
                }
                let term = pk.scalar_mul(&mat[r][x], core_cells[x].as_ref().unwrap())?;
                acc = pk.sub_ct(&acc, &term)?;
            }
            core_cells[c] = Some(acc);
        }
        for (i, &c) in core_cols.iter().enumerate() {
            left_cells[c] = core_cells[i].take();
        }
        for j in 0..params.rho {
            right_cells[j] = core_cells[left_core_cols + j].take();
        }
    }

    // Back-substitution in reverse deferral order: every other cell a
    // deferred row touches is already assigned or free.
    for &(r, pivot_col) in stack.iter().rev() {
        let mut acc: Option<CipherValue> = None;
        for &c in &rows[r].left {
            if c != pivot_col {
                let value = left_cells[c]
                    .get_or_insert_with(|| pk.random_cipher(rng))
                    .clone();
                acc = Some(match acc.take() {
                    None => value,
                    Some(a) => pk.add_ct(&a, &value)?,
                });
            }
        }
        for j in rows[r].right_bits(params.rho) {
            let value = right_cells[j]
                .get_or_insert_with(|| pk.random_cipher(rng))
                .clone();
            acc = Some(match acc.take() {
                None => value,
                Some(a) => pk.add_ct(&a, &value)?,
            });
        }
        let value = match acc {
            None => pairs[r].1.clone(),
            Some(sum) => pk.sub_ct(&pairs[r].1, &sum)?,
        };
        left_cells[pivot_col] = Some(value);
    }

    let left = left_cells
        .into_iter()
        .map(|c| c.unwrap_or_else(|| pk.random_cipher(rng)))
        .collect();
    let right = right_cells
        .into_iter()
        .map(|c| c.unwrap_or_else(|| pk.random_cipher(rng)))
        .collect();
    Ok(Some(SplitEncoding {
        attempt,
        left,
        right,
    }))
}

/// `⟨l(q)‖r(q), L‖R⟩` under homomorphic addition.
pub fn sokvs_decode_local(
    enc: &SplitEncoding,
    params: &SokvsParams,
    pk: &PublicKey,
    q: &[u8],
) -> Result<CipherValue> {
    let (ones, right) = derive_rows(params, enc.attempt, q);
    let mut acc: Option<CipherValue> = None;
    let mut push = |v: &CipherValue| -> Result<()> {
        acc = Some(match acc.take() {
            None => v.clone(),
            Some(a) => pk.add_ct(&a, v)?,
        });
        Ok(())
    };
    for &i in &ones {
        push(&enc.left[i])?;
    }
    for j in 0..params.rho {
        if right[j / 64] >> (j % 64) & 1 == 1 {
            push(&enc.right[j])?;
        }
    }
    acc.ok_or_else(|| Error::InvalidParameter("empty decode row".into()))
}
