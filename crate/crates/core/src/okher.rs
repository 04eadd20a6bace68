//! Oblivious key homomorphic-encryption retrieval.
//!
//! The responder holds key-value pairs; the querier holds keys. For each
//! queried key the querier ends up with a live ciphertext under the
//! responder's key: the encryption of the stored value on a hit, a
//! random-looking ciphertext on a miss — and the responder learns nothing
//! about the queried keys.
//!
//! Composition: values are freshly encrypted and encoded into a split store
//! `(L, R)`; the querier turns each key into its `α` sparse positions
//! (`NZIndices`), merges the batches into distinct indices (`Merge`),
//! fetches the needed cells of `L` through batch PIR, and finishes locally
//! as `e_i = ⟨r(q_i), R⟩ + Σ_j w_{β_ij}`.
//!
//! Setup is one round trip: the responder ships the encryption public key
//! and the store mappings; the querier ships the PIR receiver material.

use crate::crypto::{CipherValue, KeyPair, PublicKey};
use crate::error::{Error, Result};
use crate::pir::{
    pir_decode, pir_query, pir_resp, pir_setup, PirBackend, PirQueryState, PirReceiverSetup,
    PirSenderSetup,
};
use crate::sokvs::{
    row_left, row_right, sokvs_decode_local, sokvs_encode_pinned, sokvs_setup, SokvsParams,
    SparseRow, SplitEncoding,
};
use crate::wire::{self, Reader};
use num_bigint::BigUint;
use rand::Rng;

/// Indices of the non-zero coefficients of a sparse row; the row weight must
/// be exactly the store's `α`.
pub fn nz_indices(row: &SparseRow, alpha: usize) -> Result<Vec<usize>> {
    if row.ones.len() != alpha {
        return Err(Error::WrongRowWeight {
            got: row.ones.len(),
            expected: alpha,
        });
    }
    Ok(row.ones.clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeResult {
    /// Distinct indices, in first-occurrence order; `|U| <= α·m`.
    pub merged: Vec<usize>,
    /// Per input row, the positions of its entries inside `merged`.
    pub beta: Vec<Vec<usize>>,
}

/// Concatenates index rows, removing duplicates and remembering where each
/// row's entries landed.
pub fn merge(rows: &[Vec<usize>]) -> MergeResult {
    let mut merged = Vec::new();
    let mut position: std::collections::HashMap<usize, usize> = Default::default();
    let mut beta = Vec::with_capacity(rows.len());
    for row in rows {
        let mut b = Vec::with_capacity(row.len());
        for &idx in row {
            let pos = *position.entry(idx).or_insert_with(|| {
                merged.push(idx);
                merged.len() - 1
            });
            b.push(pos);
        }
        beta.push(b);
    }
    MergeResult { merged, beta }
}

#[derive(Debug, Clone)]
pub struct OkherReceiver {
    pub keys: KeyPair,
    pub sokvs: SokvsParams,
    pub pir: PirReceiverSetup,
}

#[derive(Debug, Clone)]
pub struct OkherSender {
    pub pk: PublicKey,
    pub sokvs: SokvsParams,
    pub pir: PirSenderSetup,
}

/// Responder state between sending its setup message and receiving the
/// querier's.
#[derive(Debug, Clone)]
pub struct OkherReceiverInit {
    keys: KeyPair,
    sokvs: SokvsParams,
}

/// Responder half of setup: fixes the encryption keys and store mappings,
/// and emits the message carrying `pk` and the mappings.
pub fn receiver_init<R: Rng>(
    keys: KeyPair,
    _kappa: u32,
    lambda: u32,
    capacity: usize,
    rng: &mut R,
) -> (OkherReceiverInit, Vec<u8>) {
    let sokvs = sokvs_setup(_kappa, lambda, capacity, rng);
    let mut msg = Vec::new();
    wire::put_bytes(&mut msg, &keys.public.to_bytes());
    let mut sokvs_bytes = Vec::new();
    sokvs.write(&mut sokvs_bytes);
    wire::put_bytes(&mut msg, &sokvs_bytes);
    (OkherReceiverInit { keys, sokvs }, msg)
}

/// Querier half of setup: reads the responder's message, runs the PIR
/// setup, keeps the PIR keys and returns the receiver-side PIR material to
/// ship back.
pub fn sender_init<R: Rng>(
    kappa: u32,
    lambda: u32,
    backend: PirBackend,
    setup_r_msg: &[u8],
    rng: &mut R,
) -> Result<(OkherSender, Vec<u8>)> {
    let mut r = Reader::new(setup_r_msg);
    let pk = PublicKey::from_bytes(r.bytes()?)?;
    let sokvs = SokvsParams::read(&mut Reader::new(r.bytes()?))?;
    r.finish()?;
    let (pir_r, pir_s) = pir_setup(kappa, lambda, backend, rng)?;
    let mut msg = Vec::new();
    pir_r.write(&mut msg);
    Ok((
        OkherSender {
            pk,
            sokvs,
            pir: pir_s,
        },
        msg,
    ))
}

pub fn receiver_finish(init: OkherReceiverInit, setup_s_msg: &[u8]) -> Result<OkherReceiver> {
    let mut r = Reader::new(setup_s_msg);
    let pir = PirReceiverSetup::read(&mut r)?;
    r.finish()?;
    Ok(OkherReceiver {
        keys: init.keys,
        sokvs: init.sokvs,
        pir,
    })
}

/// In-process setup for direct use; protocol runners drive the three-step
/// flow themselves to meter the exchanged messages.
pub fn okher_setup<R1: Rng, R2: Rng>(
    keys: KeyPair,
    kappa: u32,
    lambda: u32,
    capacity: usize,
    backend: PirBackend,
    receiver_rng: &mut R1,
    sender_rng: &mut R2,
) -> Result<(OkherReceiver, OkherSender)> {
    let (init, msg_r) = receiver_init(keys, kappa, lambda, capacity, receiver_rng);
    let (sender, msg_s) = sender_init(kappa, lambda, backend, &msg_r, sender_rng)?;
    let receiver = receiver_finish(init, &msg_s)?;
    Ok((receiver, sender))
}

#[derive(Debug, Clone)]
pub struct OkherQueryState {
    queries: Vec<Vec<u8>>,
    beta: Vec<Vec<usize>>,
    pir: PirQueryState,
    /// α per query key, before dedup: the metered request count.
    pub index_requests: usize,
    /// |U| after Merge.
    pub merged_len: usize,
}

/// Builds the batched PIR query for the key batch `Q`.
pub fn okher_query<R: Rng>(
    sender: &OkherSender,
    queries: &[Vec<u8>],
    rng: &mut R,
) -> Result<(Vec<u8>, OkherQueryState)> {
    if queries.is_empty() {
        return Err(Error::InvalidParameter("empty query batch".into()));
    }
    let alpha = sender.sokvs.alpha();
    let rows: Vec<Vec<usize>> = queries
        .iter()
        .map(|q| nz_indices(&row_left(&sender.sokvs, q), alpha))
        .collect::<Result<_>>()?;
    let MergeResult { merged, beta } = merge(&rows);
    let (msg, pir_state) = pir_query(&sender.pir, &merged, sender.sokvs.left_len(), rng)?;
    Ok((
        msg,
        OkherQueryState {
            queries: queries.to_vec(),
            beta,
            pir: pir_state,
            index_requests: alpha * queries.len(),
            merged_len: merged.len(),
        },
    ))
}

/// Encrypts the values, encodes the split store, answers the PIR query over
/// `L`, and emits `R` plus the bucketed response. `L` never leaves this
/// side.
pub fn okher_resp<R: Rng>(
    receiver: &OkherReceiver,
    kv: &[(Vec<u8>, BigUint)],
    query_msg: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>> {
    let pk = &receiver.keys.public;
    // fresh encryptions every execution, never cached
    let kc: Vec<(Vec<u8>, CipherValue)> = kv
        .iter()
        .map(|(k, v)| (k.clone(), receiver.keys.encrypt(v, rng)))
        .collect();
    let enc: SplitEncoding = sokvs_encode_pinned(&receiver.sokvs, &kc, pk, rng)?;

    let left_bytes: Vec<Vec<u8>> = enc
        .left
        .iter()
        .map(|c| pk.cipher_to_bytes(c))
        .collect::<Result<_>>()?;
    let pir_resp_bytes = pir_resp(&receiver.pir, &left_bytes, query_msg)?;

    let mut msg = Vec::new();
    wire::put_u32(&mut msg, enc.right.len() as u32);
    for c in &enc.right {
        msg.extend_from_slice(&pk.cipher_to_bytes(c)?);
    }
    wire::put_bytes(&mut msg, &pir_resp_bytes);
    Ok(msg)
}

#[derive(Debug, Clone)]
pub struct OkherOutput {
    /// One ciphertext per query, in query order.
    pub values: Vec<CipherValue>,
    /// Width of the received `R` vector, for metering.
    pub r_len: usize,
}

/// Finishes locally: `e_i = ⟨r(q_i), R⟩ + Σ_j w_{β_ij}`.
pub fn okher_decode(
    sender: &OkherSender,
    state: &OkherQueryState,
    resp_msg: &[u8],
) -> Result<OkherOutput> {
    let pk = &sender.pk;
    let mut r = Reader::new(resp_msg);
    let r_len = r.u32()? as usize;
    let right: Vec<CipherValue> = (0..r_len)
        .map(|_| pk.cipher_from_bytes(r.fixed(pk.cipher_len())?))
        .collect::<Result<_>>()?;
    let pir_bytes = r.bytes()?;
    r.finish()?;
    if r_len != sender.sokvs.rho() {
        return Err(Error::Wire(format!(
            "R width {} != expected {}",
            r_len,
            sender.sokvs.rho()
        )));
    }

    let fetched = pir_decode(&sender.pir, &state.pir, pir_bytes)?;
    let w: Vec<CipherValue> = fetched
        .iter()
        .map(|bytes| pk.cipher_from_bytes(bytes))
        .collect::<Result<_>>()?;

    let rho = sender.sokvs.rho();
    let mut values = Vec::with_capacity(state.queries.len());
    for (q, beta_row) in state.queries.iter().zip(&state.beta) {
        let rbits = row_right(&sender.sokvs, q);
        let mut acc: Option<CipherValue> = None;
        for (j, cell) in right.iter().enumerate().take(rho) {
            if rbits[j / 64] >> (j % 64) & 1 == 1 {
                acc = Some(match acc {
                    None => cell.clone(),
                    Some(a) => pk.add_ct(&a, cell)?,
                });
            }
        }
        for &pos in beta_row {
            let cell = w
                .get(pos)
                .ok_or_else(|| Error::Wire("response shorter than merged batch".into()))?;
            acc = Some(match acc {
                None => cell.clone(),
                Some(a) => pk.add_ct(&a, cell)?,
            });
        }
        values.push(acc.expect("alpha >= 1 guarantees at least one term"));
    }
    Ok(OkherOutput { values, r_len })
}

/// Local-only reference path used by tests: decode the split store directly
/// without PIR. Matches the protocol output ciphertext-for-ciphertext.
pub fn decode_via_store(
    receiver: &OkherReceiver,
    enc: &SplitEncoding,
    q: &[u8],
) -> Result<CipherValue> {
    sokvs_decode_local(enc, &receiver.sokvs, &receiver.keys.public, q)
}
