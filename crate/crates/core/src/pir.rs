//! Batch private information retrieval over a vector of equal-length byte
//! entries.
//!
//! The database is organized into `b = ⌈1.5·M⌉` buckets by `z = 3` keyed
//! hash functions, every index landing in each of its candidate buckets.
//! The querier cuckoo-places its `M` wanted indices so each bucket holds at
//! most one real index, then issues one single-index query per bucket; empty
//! buckets carry dummies. Two backends answer those queries:
//!
//! * `reference-lhe` — per bucket, an encrypted selector vector under the
//!   querier's PIR-layer key; the response is the selector-weighted sum of
//!   the bucket's entries, chunked below the plaintext modulus. Upload is
//!   linear per bucket, which is functionally faithful but not
//!   communication-optimal.
//! * `insecure-clear` — positions travel in clear. Debug/baseline only; the
//!   message tag marks the channel as insecure.

use crate::crypto::{e_setup, CipherValue, KeyPair, PublicKey, SchemeDescriptor};
use crate::error::{Error, Result};
use crate::wire::{self, Reader};
use rand::Rng;
use sha2::{Digest, Sha256};

pub const BUCKET_HASHES: usize = 3;
const CHUNK_BYTES: usize = 7;
const MAX_KICKS: usize = 512;
const MAX_SALTS: u32 = 16;

const BACKEND_TAG_LHE: u8 = 0x01;
const BACKEND_TAG_CLEAR: u8 = 0x02;
const DUMMY_POS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PirBackend {
    ReferenceLhe,
    InsecureClear,
}

impl PirBackend {
    pub fn tag(self) -> u8 {
        match self {
            PirBackend::ReferenceLhe => BACKEND_TAG_LHE,
            PirBackend::InsecureClear => BACKEND_TAG_CLEAR,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            BACKEND_TAG_LHE => Ok(PirBackend::ReferenceLhe),
            BACKEND_TAG_CLEAR => Ok(PirBackend::InsecureClear),
            t => Err(Error::Wire(format!("unknown PIR backend tag {t:#x}"))),
        }
    }

    pub fn is_insecure(self) -> bool {
        matches!(self, PirBackend::InsecureClear)
    }
}

/// Sender-held material: the PIR-layer key pair stays on this side only.
#[derive(Debug, Clone)]
pub struct PirSenderSetup {
    pub backend: PirBackend,
    keys: KeyPair,
    bucket_seed: [u8; 32],
}

/// Receiver-held material: public key and layout seeds, no secrets.
#[derive(Debug, Clone)]
pub struct PirReceiverSetup {
    pub backend: PirBackend,
    pk: PublicKey,
    bucket_seed: [u8; 32],
}

/// The PIR layer always runs over the mock scheme: it stands in for the
/// lattice-based query encryption, and only its LHE surface is used here.
pub fn pir_setup<R: Rng>(
    _kappa: u32,
    _lambda: u32,
    backend: PirBackend,
    rng: &mut R,
) -> Result<(PirReceiverSetup, PirSenderSetup)> {
    let keys = e_setup(&SchemeDescriptor::mock_fhe(), rng)?;
    let mut bucket_seed = [0u8; 32];
    rng.fill(&mut bucket_seed);
    Ok((
        PirReceiverSetup {
            backend,
            pk: keys.public.clone(),
            bucket_seed,
        },
        PirSenderSetup {
            backend,
            keys,
            bucket_seed,
        },
    ))
}

impl PirReceiverSetup {
    pub fn write(&self, out: &mut Vec<u8>) {
        wire::put_u8(out, self.backend.tag());
        out.extend_from_slice(&self.bucket_seed);
        wire::put_bytes(out, &self.pk.to_bytes());
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let backend = PirBackend::from_tag(r.u8()?)?;
        let bucket_seed: [u8; 32] = r.fixed(32)?.try_into().unwrap();
        let pk = PublicKey::from_bytes(r.bytes()?)?;
        Ok(PirReceiverSetup {
            backend,
            pk,
            bucket_seed,
        })
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_keys(bucket_seed: &[u8; 32], salt: u32) -> [u64; BUCKET_HASHES] {
    let mut h = Sha256::new();
    h.update(bucket_seed);
    h.update(salt.to_be_bytes());
    let digest = h.finalize();
    let mut keys = [0u64; BUCKET_HASHES];
    for (t, k) in keys.iter_mut().enumerate() {
        *k = u64::from_be_bytes(digest[t * 8..t * 8 + 8].try_into().unwrap());
    }
    keys
}

fn candidate_buckets(keys: &[u64; BUCKET_HASHES], index: usize, b: usize) -> [usize; BUCKET_HASHES] {
    let mut out = [0usize; BUCKET_HASHES];
    for (t, o) in out.iter_mut().enumerate() {
        *o = (mix64(keys[t] ^ index as u64) % b as u64) as usize;
    }
    out
}

/// Sorted content of every bucket; identical on both sides by construction.
fn bucket_contents(keys: &[u64; BUCKET_HASHES], db_len: usize, b: usize) -> Vec<Vec<usize>> {
    let mut contents = vec![Vec::new(); b];
    for i in 0..db_len {
        let cands = candidate_buckets(keys, i, b);
        for t in 0..BUCKET_HASHES {
            // an index may map to the same bucket under two hashes: store once
            if !cands[..t].contains(&cands[t]) {
                contents[cands[t]].push(i);
            }
        }
    }
    contents
}

fn bucket_count(batch: usize) -> usize {
    ((batch * 3).div_ceil(2)).max(1)
}

/// Private query state: which database index sits in which bucket.
#[derive(Debug, Clone)]
pub struct PirQueryState {
    backend: PirBackend,
    b: usize,
    /// (requested index, bucket) in request order.
    placement: Vec<(usize, usize)>,
}

impl PirQueryState {
    pub fn placement(&self) -> &[(usize, usize)] {
        &self.placement
    }

    pub fn bucket_count(&self) -> usize {
        self.b
    }
}

/// Builds the encrypted per-bucket queries for the distinct indices `U`.
pub fn pir_query<R: Rng>(
    setup: &PirSenderSetup,
    u: &[usize],
    db_len: usize,
    rng: &mut R,
) -> Result<(Vec<u8>, PirQueryState)> {
    let mut seen = std::collections::HashSet::new();
    for &idx in u {
        if idx >= db_len {
            return Err(Error::IndexOutOfRange {
                index: idx,
                len: db_len,
            });
        }
        if !seen.insert(idx) {
            return Err(Error::DuplicateIndex);
        }
    }
    let b = bucket_count(u.len());

    // Cuckoo placement with random-walk eviction; a failure reseeds the
    // bucket hashes via the salt, which travels with the query.
    let (salt, slots) = 'outer: {
        for salt in 0..MAX_SALTS {
            let keys = hash_keys(&setup.bucket_seed, salt);
            let mut slots: Vec<Option<usize>> = vec![None; b];
            let mut ok = true;
            'place: for &idx in u {
                let mut cur = idx;
                for _ in 0..MAX_KICKS {
                    let cands = candidate_buckets(&keys, cur, b);
                    if let Some(&free) = cands.iter().find(|&&c| slots[c].is_none()) {
                        slots[free] = Some(cur);
                        continue 'place;
                    }
                    let victim = cands[rng.gen_range(0..BUCKET_HASHES)];
                    let evicted = slots[victim].replace(cur).unwrap();
                    cur = evicted;
                }
                ok = false;
                break;
            }
            if ok {
                break 'outer (salt, slots);
            }
        }
        return Err(Error::CuckooFailure { attempts: MAX_SALTS });
    };

    let keys = hash_keys(&setup.bucket_seed, salt);
    let contents = bucket_contents(&keys, db_len, b);

    let mut msg = Vec::new();
    wire::put_u8(&mut msg, setup.backend.tag());
    wire::put_u32(&mut msg, b as u32);
    wire::put_u32(&mut msg, salt);
    wire::put_u64(&mut msg, db_len as u64);
    for (bucket, slot) in slots.iter().enumerate() {
        let content = &contents[bucket];
        let pos = slot.map(|idx| {
            content
                .iter()
                .position(|&i| i == idx)
                .expect("placed index maps to its bucket")
        });
        match setup.backend {
            PirBackend::InsecureClear => {
                wire::put_u32(&mut msg, pos.map_or(DUMMY_POS, |p| p as u32));
            }
            PirBackend::ReferenceLhe => {
                wire::put_u32(&mut msg, content.len() as u32);
                for p in 0..content.len() {
                    // dummy buckets carry an all-zero selector mask
                    let bit = u64::from(pos == Some(p));
                    let sel = setup.keys.encrypt(&bit.into(), rng);
                    msg.extend_from_slice(&setup.keys.public.cipher_to_bytes(&sel)?);
                }
            }
        }
    }

    let placement = u
        .iter()
        .map(|&idx| {
            let bucket = slots
                .iter()
                .position(|s| *s == Some(idx))
                .expect("every index was placed");
            (idx, bucket)
        })
        .collect();
    Ok((
        msg,
        PirQueryState {
            backend: setup.backend,
            b,
            placement,
        },
    ))
}

fn chunk_count(entry_len: usize) -> usize {
    entry_len.div_ceil(CHUNK_BYTES).max(1)
}

fn chunk_value(entry: &[u8], chunk: usize) -> u64 {
    let start = chunk * CHUNK_BYTES;
    let end = (start + CHUNK_BYTES).min(entry.len());
    let mut v = 0u64;
    for &byte in &entry[start..end] {
        v = (v << 8) | byte as u64;
    }
    v
}

/// Answers a bucketed query over `entries` (all the same length).
pub fn pir_resp(setup: &PirReceiverSetup, entries: &[Vec<u8>], query: &[u8]) -> Result<Vec<u8>> {
    let entry_len = entries.first().map_or(0, |e| e.len());
    if entries.iter().any(|e| e.len() != entry_len) {
        return Err(Error::InvalidParameter(
            "PIR entries must share one length".into(),
        ));
    }

    let mut r = Reader::new(query);
    let backend = PirBackend::from_tag(r.u8()?)?;
    if backend != setup.backend {
        return Err(Error::Wire("query backend differs from setup".into()));
    }
    let b = r.u32()? as usize;
    let salt = r.u32()?;
    let db_len = r.u64()? as usize;
    if db_len != entries.len() || b == 0 {
        return Err(Error::Wire(format!(
            "layout mismatch: query built for {db_len} entries, have {}",
            entries.len()
        )));
    }
    let keys = hash_keys(&setup.bucket_seed, salt);
    let contents = bucket_contents(&keys, db_len, b);

    let mut out = Vec::new();
    wire::put_u8(&mut out, backend.tag());
    wire::put_u32(&mut out, entry_len as u32);
    wire::put_u32(&mut out, b as u32);
    for content in contents.iter() {
        match backend {
            PirBackend::InsecureClear => {
                let pos = r.u32()?;
                if pos == DUMMY_POS {
                    wire::put_bytes(&mut out, &[]);
                } else {
                    let idx = *content.get(pos as usize).ok_or_else(|| {
                        Error::Wire("clear query position outside bucket".into())
                    })?;
                    wire::put_bytes(&mut out, &entries[idx]);
                }
            }
            PirBackend::ReferenceLhe => {
                let count = r.u32()? as usize;
                if count != content.len() {
                    return Err(Error::Wire(format!(
                        "layout mismatch: bucket selector of {count}, content {}",
                        content.len()
                    )));
                }
                let sel: Vec<CipherValue> = (0..count)
                    .map(|_| {
                        let bytes = r.fixed(setup.pk.cipher_len())?;
                        setup.pk.cipher_from_bytes(bytes)
                    })
                    .collect::<Result<_>>()?;
                let chunks = chunk_count(entry_len);
                wire::put_u32(&mut out, if count == 0 { 0 } else { chunks as u32 });
                if count == 0 {
                    continue;
                }
                for chunk in 0..chunks {
                    let mut acc: Option<CipherValue> = None;
                    for (p, s) in sel.iter().enumerate() {
                        let v = chunk_value(&entries[content[p]], chunk);
                        let term = setup.pk.scalar_mul(&v.into(), s)?;
                        acc = Some(match acc {
                            None => term,
                            Some(a) => setup.pk.add_ct(&a, &term)?,
                        });
                    }
                    out.extend_from_slice(&setup.pk.cipher_to_bytes(&acc.unwrap())?);
                }
            }
        }
    }
    r.finish()?;
    Ok(out)
}

/// Recovers `K[U]`, in request order.
pub fn pir_decode(
    setup: &PirSenderSetup,
    state: &PirQueryState,
    resp: &[u8],
) -> Result<Vec<Vec<u8>>> {
    let mut r = Reader::new(resp);
    let backend = PirBackend::from_tag(r.u8()?)?;
    if backend != state.backend {
        return Err(Error::Wire("response backend differs from query".into()));
    }
    let entry_len = r.u32()? as usize;
    let b = r.u32()? as usize;
    if b != state.b {
        return Err(Error::Wire("response bucket count differs from query".into()));
    }

    let mut per_bucket: Vec<Option<Vec<u8>>> = vec![None; b];
    match backend {
        PirBackend::InsecureClear => {
            for slot in per_bucket.iter_mut() {
                let bytes = r.bytes()?;
                if !bytes.is_empty() {
                    if bytes.len() != entry_len {
                        return Err(Error::Wire("corrupted response entry length".into()));
                    }
                    *slot = Some(bytes.to_vec());
                }
            }
        }
        PirBackend::ReferenceLhe => {
            let sk = &setup.keys.secret;
            let want_chunks = chunk_count(entry_len);
            for slot in per_bucket.iter_mut() {
                let chunks = r.u32()? as usize;
                if chunks == 0 {
                    continue;
                }
                if chunks != want_chunks {
                    return Err(Error::Wire(format!(
                        "corrupted response: {chunks} chunks, expected {want_chunks}"
                    )));
                }
                let mut entry = Vec::with_capacity(entry_len);
                for chunk in 0..chunks {
                    let c = setup
                        .keys
                        .public
                        .cipher_from_bytes(r.fixed(setup.keys.public.cipher_len())?)?;
                    let v = sk.decrypt(&c)?;
                    let v: u64 = v.try_into().map_err(|_| {
                        Error::Wire("chunk decrypts outside the 56-bit range".into())
                    })?;
                    let start = chunk * CHUNK_BYTES;
                    let width = CHUNK_BYTES.min(entry_len - start);
                    entry.extend_from_slice(&v.to_be_bytes()[8 - width..]);
                }
                *slot = Some(entry);
            }
        }
    }
    r.finish()?;

    state
        .placement
        .iter()
        .map(|&(idx, bucket)| {
            per_bucket[bucket]
                .clone()
                .ok_or_else(|| Error::Wire(format!("no response for requested index {idx}")))
        })
        .collect()
}
