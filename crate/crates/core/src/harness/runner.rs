//! Two-party protocol execution over the metered channel. The receiver owns
//! `X`, the sender owns `Y`; every message crosses the channel as bytes and
//! the parties reconstruct their state from those bytes alone.

use crate::crypto::{e_setup, KeyPair, PublicKey, SchemeKind};
use crate::error::{Error, Result};
use crate::fpsu::{
    self, FpsuConfig, FpsuResponse, KeyBlueprint, QueryPlan, UnionOutcome, Variant,
};
use crate::geometry::{FuzzyDataset, Point};
use crate::graph;
use crate::harness::transcript::{Channel, MsgTag, Party, Transcript};
use crate::okher::{self, OkherQueryState, OkherReceiver};
use crate::seed::derive_rng;
use crate::wire::{self, Reader};
use num_bigint::BigUint;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// α per queried key, summed over every per-dimension batch.
    pub pir_index_requests: u64,
    /// Distinct store positions actually fetched (post-merge).
    pub pir_indices_distinct: u64,
    /// Entries programmed into each per-dimension store.
    pub store_entries: Vec<usize>,
    /// Width of each received R vector.
    pub r_widths: Vec<usize>,
    /// Ciphertext objects that crossed the channel, in either direction.
    pub ciphertexts_sent: u64,
    /// (axis, keys) per query batch.
    pub batch_sizes: Vec<(usize, usize)>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub union: BTreeSet<Point>,
    /// |{i : t_i = 0}| over the deduplicated sender set.
    pub zero_count: usize,
    pub chi: Option<u32>,
    pub transcript: Transcript,
    pub stats: RunStats,
    /// Simulator-side debug data: the receiver's share values, exposed so
    /// tests can scan the recorded transcript for plaintext leaks. Not part
    /// of any protocol message.
    pub shares: Vec<BigUint>,
}

/// Receiver-side precondition checks; they run before any message is sent.
fn check_preconditions(cfg: &FpsuConfig, x: &FuzzyDataset) -> Result<Option<graph::Partition>> {
    match cfg.variant {
        Variant::Ng => {
            let g = graph::build_induced_graph(x);
            if let Some((&(i, j), &mask)) = g.edges().iter().next() {
                return Err(Error::NotNullGraph {
                    i,
                    j,
                    axis: mask.trailing_zeros() as usize + 1,
                }
                .at("receiver"));
            }
            Ok(None)
        }
        Variant::Nf => {
            let mut ids = std::collections::HashSet::new();
            for p in x.points() {
                if !ids.insert(p.coords[0]) {
                    return Err(Error::DuplicateId.at("receiver"));
                }
            }
            Ok(None)
        }
        Variant::Lay => Ok(None),
        Variant::Exc => {
            let g = graph::build_induced_graph(x);
            if !graph::is_a_exclusive(&g, cfg.exc_axis) {
                return Err(Error::NotExclusive {
                    axis: cfg.exc_axis,
                }
                .at("receiver"));
            }
            Ok(None)
        }
        Variant::Str => {
            // heuristic first, then the constructive bounded-degree route
            let partition = graph::strips(x).or_else(|_| graph::strip_by_theorem(x));
            match partition {
                Ok(p) => Ok(Some(p)),
                Err(_) => Err(Error::StripsFailed.at("receiver")),
            }
        }
    }
}

fn build_blueprint(
    cfg: &FpsuConfig,
    x: &FuzzyDataset,
    partition: Option<&graph::Partition>,
    modulus: &BigUint,
    rng: &mut ChaCha20Rng,
) -> Result<KeyBlueprint> {
    let bp = match cfg.variant {
        Variant::Ng => fpsu::ng_build_kv(x, modulus, rng)?,
        Variant::Nf => fpsu::nf_build_kv(x, modulus, rng)?,
        Variant::Lay => fpsu::lay_build_kv(x, modulus, rng)?.1,
        Variant::Exc => fpsu::exc_build_kv(x, cfg.exc_axis, modulus, rng)?,
        Variant::Str => fpsu::str_build_kv(
            x,
            partition.expect("stripable partition computed in preconditions"),
            modulus,
            rng,
        )?,
    };
    debug_assert!(bp.zero_sum_holds(modulus));
    Ok(bp)
}

/// Counts the fixed-width ciphertext payloads inside a per-dimension query
/// message (the encrypted selector vectors).
fn count_query_ciphertexts(msg: &[u8], pir_cipher_len: usize) -> Result<u64> {
    let mut r = Reader::new(msg);
    let backend = crate::pir::PirBackend::from_tag(r.u8()?)?;
    let b = r.u32()? as usize;
    let _salt = r.u32()?;
    let _db_len = r.u64()?;
    let mut count = 0u64;
    for _ in 0..b {
        match backend {
            crate::pir::PirBackend::InsecureClear => {
                let _ = r.u32()?;
            }
            crate::pir::PirBackend::ReferenceLhe => {
                let sel = r.u32()? as usize;
                r.fixed(sel * pir_cipher_len)?;
                count += sel as u64;
            }
        }
    }
    r.finish()?;
    Ok(count)
}

/// Counts ciphertexts inside a per-dimension response: the R vector plus the
/// bucketed PIR chunks.
fn count_resp_ciphertexts(
    msg: &[u8],
    fpsu_cipher_len: usize,
    pir_cipher_len: usize,
) -> Result<u64> {
    let mut r = Reader::new(msg);
    let r_len = r.u32()? as usize;
    r.fixed(r_len * fpsu_cipher_len)?;
    let pir = r.bytes()?;
    r.finish()?;
    let mut count = r_len as u64;
    let mut pr = Reader::new(pir);
    let backend = crate::pir::PirBackend::from_tag(pr.u8()?)?;
    let _entry_len = pr.u32()?;
    let b = pr.u32()? as usize;
    for _ in 0..b {
        match backend {
            crate::pir::PirBackend::InsecureClear => {
                let _ = pr.bytes()?;
            }
            crate::pir::PirBackend::ReferenceLhe => {
                let chunks = pr.u32()? as usize;
                pr.fixed(chunks * pir_cipher_len)?;
                count += chunks as u64;
            }
        }
    }
    pr.finish()?;
    Ok(count)
}

fn encode_result_msg(pk: &PublicKey, resp: &FpsuResponse) -> Result<Vec<u8>> {
    let mut msg = Vec::new();
    wire::put_u32(&mut msg, resp.t_hat.len() as u32);
    let d = resp.u_hat.first().map_or(0, |u| u.len());
    wire::put_u32(&mut msg, d as u32);
    for (t, u) in resp.t_hat.iter().zip(&resp.u_hat) {
        msg.extend_from_slice(&pk.cipher_to_bytes(t)?);
        for c in u {
            msg.extend_from_slice(&pk.cipher_to_bytes(c)?);
        }
    }
    Ok(msg)
}

fn decode_result_msg(pk: &PublicKey, msg: &[u8]) -> Result<FpsuResponse> {
    let mut r = Reader::new(msg);
    let m = r.u32()? as usize;
    let d = r.u32()? as usize;
    let mut t_hat = Vec::with_capacity(m);
    let mut u_hat = Vec::with_capacity(m);
    for _ in 0..m {
        t_hat.push(pk.cipher_from_bytes(r.fixed(pk.cipher_len())?)?);
        let mut u = Vec::with_capacity(d);
        for _ in 0..d {
            u.push(pk.cipher_from_bytes(r.fixed(pk.cipher_len())?)?);
        }
        u_hat.push(u);
    }
    r.finish()?;
    Ok(FpsuResponse { t_hat, u_hat })
}

pub fn run_protocol(
    x: &FuzzyDataset,
    ys: &[Point],
    cfg: &FpsuConfig,
    master_seed: u64,
) -> Result<RunOutcome> {
    run_protocol_with_keys(x, ys, cfg, master_seed, None)
}

/// Same, but reusing a pre-generated long-term key pair for the union layer
/// (key generation for the residuosity scheme is the one expensive setup
/// step, so sweeps amortize it).
pub fn run_protocol_with_keys(
    x: &FuzzyDataset,
    ys: &[Point],
    cfg: &FpsuConfig,
    master_seed: u64,
    reuse_keys: Option<&KeyPair>,
) -> Result<RunOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    if x.dim() != cfg.dim {
        return Err(Error::DimensionMismatch(x.dim(), cfg.dim));
    }
    if ys.is_empty() {
        return Err(Error::InvalidParameter("empty sender set".into()));
    }
    for y in ys {
        if y.dim() != cfg.dim {
            return Err(Error::DimensionMismatch(y.dim(), cfg.dim));
        }
    }
    // the union is a set: duplicate queries are collapsed before running
    let ys: Vec<Point> = {
        let mut seen = BTreeSet::new();
        ys.iter()
            .filter(|y| seen.insert((*y).clone()))
            .cloned()
            .collect()
    };

    let mut rng_r = derive_rng(master_seed, "party/receiver");
    let mut rng_s = derive_rng(master_seed, "party/sender");
    let mut channel = Channel::new();
    let mut stats = RunStats::default();

    // ---- receiver: preconditions, keys, store setup --------------------
    let partition = check_preconditions(cfg, x)?;
    let keys: KeyPair = match reuse_keys {
        Some(k) => {
            if k.public.kind() != cfg.scheme.kind {
                return Err(Error::SchemeMismatch.at("receiver"));
            }
            k.clone()
        }
        None => e_setup(&cfg.scheme, &mut rng_r).map_err(|e| e.at("receiver"))?,
    };
    if cfg.scheme.kind == SchemeKind::LheResiduosity {
        // shares and scaled coordinates need headroom in the plaintext ring
        let need = BigUint::from(1u8) << (cfg.width_bits + cfg.effective_lambda());
        if keys.public.plaintext_modulus() <= need {
            return Err(Error::InvalidParameter(
                "plaintext modulus too small for the coordinate and share ranges".into(),
            ));
        }
    }

    let capacity = cfg.store_capacity(x.len());
    let lambda_eff = cfg.effective_lambda();
    let (receiver_init, setup_r_msg) =
        okher::receiver_init(keys, cfg.kappa, lambda_eff, capacity, &mut rng_r);
    channel.send(Party::Receiver, MsgTag::SetupR, setup_r_msg)?;

    // ---- sender: PIR setup ---------------------------------------------
    let setup_r_bytes = channel.recv(Party::Sender, MsgTag::SetupR)?;
    let (okher_sender, setup_s_msg) = okher::sender_init(
        cfg.kappa,
        lambda_eff,
        cfg.pir_backend,
        &setup_r_bytes,
        &mut rng_s,
    )
    .map_err(|e| e.at("sender"))?;
    channel.send(Party::Sender, MsgTag::SetupS, setup_s_msg)?;

    let setup_s_bytes = channel.recv(Party::Receiver, MsgTag::SetupS)?;
    let okher_receiver: OkherReceiver = okher::receiver_finish(receiver_init, &setup_s_bytes)
        .map_err(|e| e.at("receiver"))?;

    // ---- layer count disclosure (lay only) ------------------------------
    let chi: Option<u32> = if cfg.variant == Variant::Lay {
        let chi = graph::dsatur(x, None).part_count() as u32;
        let mut msg = Vec::new();
        wire::put_u32(&mut msg, chi);
        channel.send(Party::Receiver, MsgTag::Chromatic, msg)?;
        let bytes = channel.recv(Party::Sender, MsgTag::Chromatic)?;
        let mut r = Reader::new(&bytes);
        let got = r.u32()?;
        r.finish()?;
        Some(got)
    } else {
        None
    };

    // ---- sender: per-dimension queries ----------------------------------
    let plan: QueryPlan = fpsu::fpsu_query_keys(cfg.variant, cfg.dim, chi, &ys)
        .map_err(|e| e.at("sender"))?;
    let mut query_states: Vec<OkherQueryState> = Vec::with_capacity(plan.batches.len());
    let mut query_msg = Vec::new();
    wire::put_u32(&mut query_msg, plan.batches.len() as u32);
    let pir_cipher_len = 1 + 16; // mock PIR-layer ciphertext width
    for batch in &plan.batches {
        stats.batch_sizes.push((batch.axis, batch.keys.len()));
        let (msg, state) =
            okher::okher_query(&okher_sender, &batch.keys, &mut rng_s).map_err(|e| e.at("sender"))?;
        stats.pir_index_requests += state.index_requests as u64;
        stats.pir_indices_distinct += state.merged_len as u64;
        stats.ciphertexts_sent += count_query_ciphertexts(&msg, pir_cipher_len)?;
        wire::put_bytes(&mut query_msg, &msg);
        query_states.push(state);
    }
    channel.send(Party::Sender, MsgTag::Query, query_msg)?;

    // ---- receiver: blueprint, encodings, PIR answers ---------------------
    let query_bytes = channel.recv(Party::Receiver, MsgTag::Query)?;
    let modulus = okher_receiver.keys.public.plaintext_modulus();
    let blueprint = build_blueprint(cfg, x, partition.as_ref(), &modulus, &mut rng_r)
        .map_err(|e| e.at("receiver"))?;
    blueprint.check_well_formed().map_err(|e| e.at("receiver"))?;
    let shares: Vec<BigUint> = blueprint.groups.iter().flatten().cloned().collect();

    let expected_axes = cfg.variant.store_axes(cfg.dim);
    let store_axes: Vec<usize> = blueprint.stores.iter().map(|s| s.axis).collect();
    if store_axes != expected_axes {
        return Err(Error::InvalidParameter(format!(
            "store axes {store_axes:?} do not match the protocol plan {expected_axes:?}"
        )));
    }

    let mut r = Reader::new(&query_bytes);
    let batch_count = r.u32()? as usize;
    if batch_count != blueprint.stores.len() {
        return Err(Error::Wire(format!(
            "query carries {batch_count} batches, receiver holds {} stores",
            blueprint.stores.len()
        ))
        .at("receiver"));
    }
    let mut resp_msg = Vec::new();
    wire::put_u32(&mut resp_msg, batch_count as u32);
    let fpsu_cipher_len = okher_receiver.keys.public.cipher_len();
    for store in &blueprint.stores {
        stats.store_entries.push(store.pairs.len());
        let dim_query = r.bytes()?;
        let dim_resp = okher::okher_resp(&okher_receiver, &store.pairs, dim_query, &mut rng_r)
            .map_err(|e| e.at("receiver"))?;
        stats.ciphertexts_sent +=
            count_resp_ciphertexts(&dim_resp, fpsu_cipher_len, pir_cipher_len)?;
        wire::put_bytes(&mut resp_msg, &dim_resp);
    }
    r.finish()?;
    channel.send(Party::Receiver, MsgTag::Resp, resp_msg)?;

    // ---- sender: decode and combine --------------------------------------
    let resp_bytes = channel.recv(Party::Sender, MsgTag::Resp)?;
    let mut r = Reader::new(&resp_bytes);
    let got = r.u32()? as usize;
    if got != query_states.len() {
        return Err(Error::Wire("response batch count mismatch".into()).at("sender"));
    }
    let mut retrieved = Vec::with_capacity(got);
    for state in &query_states {
        let dim_resp = r.bytes()?;
        let out = okher::okher_decode(&okher_sender, state, dim_resp).map_err(|e| e.at("sender"))?;
        stats.r_widths.push(out.r_len);
        retrieved.push(out.values);
    }
    r.finish()?;
    let combined = fpsu::fpsu_combine(cfg.variant, &okher_sender.pk, &retrieved, &ys, chi)
        .map_err(|e| e.at("sender"))?;
    let result_msg = encode_result_msg(&okher_sender.pk, &combined)?;
    stats.ciphertexts_sent += (combined.t_hat.len() * (1 + cfg.dim)) as u64;
    channel.send(Party::Sender, MsgTag::Result, result_msg)?;

    // ---- receiver: union --------------------------------------------------
    let result_bytes = channel.recv(Party::Receiver, MsgTag::Result)?;
    let response = decode_result_msg(&okher_receiver.keys.public, &result_bytes)?;
    let UnionOutcome { union, zero_count } = fpsu::fpsu_union(
        x,
        &response,
        &okher_receiver.keys.secret,
        &okher_receiver.keys.public,
    )
    .map_err(|e| e.at("receiver"))?;

    stats.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(RunOutcome {
        union,
        zero_count,
        chi,
        transcript: channel.transcript,
        stats,
        shares,
    })
}
