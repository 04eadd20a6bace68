//! Cross-module protocol runs over the metered channel: oracle agreement,
//! transcript shape, determinism, backend parity and leak scanning.

use fpsu_core::crypto::{e_setup, SchemeDescriptor};
use fpsu_core::error::Error;
use fpsu_core::fpsu::{FpsuConfig, Variant};
use fpsu_core::harness::dataset::{gen_dataset, DatasetSpec, StructureClass};
use fpsu_core::harness::runner::{run_protocol, run_protocol_with_keys, RunOutcome};
use fpsu_core::harness::transcript::{MsgTag, Party};
use fpsu_core::harness::verify::check_count_laws;
use fpsu_core::pir::PirBackend;
use fpsu_core::seed::derive_rng;
use fpsu_core::wire::Reader;

fn spec_for(variant: Variant, n: usize, m: usize, d: usize, inside: usize, seed: u64) -> DatasetSpec {
    DatasetSpec {
        class: StructureClass::for_variant(variant, 1),
        n,
        m,
        d,
        delta: 2,
        width_bits: 16,
        inside_count: inside,
        seed,
    }
}

fn mock_cfg(variant: Variant, d: usize) -> FpsuConfig {
    let mut cfg = FpsuConfig::new(variant, SchemeDescriptor::mock_fhe());
    cfg.dim = d;
    cfg.delta = 2;
    cfg.width_bits = 16;
    cfg
}

fn oracle_thresholds(variant: Variant, x: &fpsu_core::FuzzyDataset) -> Vec<u64> {
    match variant {
        Variant::Nf => x.exact_first_axis_thresholds(),
        _ => x.uniform_thresholds(),
    }
}

fn run_and_check(variant: Variant, seed: u64) -> RunOutcome {
    let spec = spec_for(variant, 8, 5, 3, 2, seed);
    let (x, ys) = gen_dataset(&spec).unwrap();
    let cfg = mock_cfg(variant, 3);
    let out = run_protocol(&x, &ys, &cfg, seed).unwrap();
    let thr = oracle_thresholds(variant, &x);
    assert_eq!(
        out.union,
        x.fuzzy_union_oracle_with_thresholds(&ys, &thr).unwrap(),
        "{variant} union vs oracle"
    );
    assert_eq!(
        out.zero_count,
        x.fuzzy_membership_count_with_thresholds(&ys, &thr).unwrap(),
        "{variant} membership leakage"
    );
    assert!(check_count_laws(&cfg, 8, ys.len(), &out).is_empty());
    out
}

#[test]
fn every_variant_matches_oracle_and_count_laws() {
    for variant in Variant::ALL {
        for seed in [1u64, 2, 3] {
            run_and_check(variant, seed);
        }
    }
}

#[test]
fn round_counts_follow_the_variant() {
    for variant in Variant::ALL {
        let out = run_and_check(variant, 11);
        let want = if variant == Variant::Lay { 4 } else { 3 };
        assert_eq!(out.transcript.rounds(), want, "{variant}");
        // setup is exactly one round trip: receiver first, then sender
        let setups: Vec<_> = out
            .transcript
            .entries
            .iter()
            .filter(|e| e.tag.is_setup())
            .collect();
        assert_eq!(setups.len(), 2);
        assert_eq!((setups[0].from, setups[0].tag), (Party::Receiver, MsgTag::SetupR));
        assert_eq!((setups[1].from, setups[1].tag), (Party::Sender, MsgTag::SetupS));
    }
}

#[test]
fn lay_reveals_the_layer_count_before_queries() {
    let spec = spec_for(Variant::Lay, 10, 4, 2, 1, 21);
    let (x, ys) = gen_dataset(&spec).unwrap();
    let out = run_protocol(&x, &ys, &mock_cfg(Variant::Lay, 2), 21).unwrap();
    let tags: Vec<MsgTag> = out.transcript.entries.iter().map(|e| e.tag).collect();
    assert_eq!(
        tags,
        vec![
            MsgTag::SetupR,
            MsgTag::SetupS,
            MsgTag::Chromatic,
            MsgTag::Query,
            MsgTag::Resp,
            MsgTag::Result
        ]
    );
    let chromatic = out.transcript.find(MsgTag::Chromatic).unwrap();
    let mut r = Reader::new(&chromatic.payload);
    assert_eq!(r.u32().unwrap(), out.chi.unwrap());
    r.finish().unwrap();
}

#[test]
fn same_master_seed_replays_bit_identically() {
    let spec = spec_for(Variant::Ng, 8, 4, 3, 1, 31);
    let (x, ys) = gen_dataset(&spec).unwrap();
    let cfg = mock_cfg(Variant::Ng, 3);
    let a = run_protocol(&x, &ys, &cfg, 99).unwrap();
    let b = run_protocol(&x, &ys, &cfg, 99).unwrap();
    assert_eq!(a.transcript.to_bytes(), b.transcript.to_bytes());
    assert_eq!(a.union, b.union);
    let c = run_protocol(&x, &ys, &cfg, 100).unwrap();
    assert_ne!(a.transcript.to_bytes(), c.transcript.to_bytes());
}

#[test]
fn insecure_clear_backend_reaches_the_same_union() {
    for variant in [Variant::Ng, Variant::Exc] {
        let spec = spec_for(variant, 8, 4, 2, 2, 41);
        let (x, ys) = gen_dataset(&spec).unwrap();
        let mut cfg = mock_cfg(variant, 2);
        cfg.pir_backend = PirBackend::InsecureClear;
        let out = run_protocol(&x, &ys, &cfg, 41).unwrap();
        assert_eq!(out.union, x.fuzzy_union_oracle(&ys).unwrap());
    }
}

#[test]
fn residuosity_scheme_runs_ng_and_nf() {
    let mut rng = derive_rng(7, "protocol-paillier");
    let desc = SchemeDescriptor::lhe_residuosity(2048);
    let keys = e_setup(&desc, &mut rng).unwrap();
    for variant in [Variant::Ng, Variant::Nf] {
        let spec = spec_for(variant, 8, 3, 2, 1, 51);
        let (x, ys) = gen_dataset(&spec).unwrap();
        let mut cfg = FpsuConfig::new(variant, desc.clone());
        cfg.dim = 2;
        cfg.delta = 2;
        cfg.width_bits = 16;
        let out = run_protocol_with_keys(&x, &ys, &cfg, 51, Some(&keys)).unwrap();
        let thr = oracle_thresholds(variant, &x);
        assert_eq!(
            out.union,
            x.fuzzy_union_oracle_with_thresholds(&ys, &thr).unwrap()
        );
        assert_eq!(
            out.zero_count,
            x.fuzzy_membership_count_with_thresholds(&ys, &thr).unwrap()
        );
    }
}

#[test]
fn preconditions_fail_before_any_message() {
    // a random (edged) dataset offered to variants with structure demands
    let spec = DatasetSpec {
        class: StructureClass::Random,
        n: 12,
        m: 2,
        d: 2,
        delta: 4,
        width_bits: 8,
        inside_count: 0,
        seed: 61,
    };
    let (x, ys) = gen_dataset(&spec).unwrap();
    let g = fpsu_core::graph::build_induced_graph(&x);
    assert!(!g.is_null(), "instance should carry edges");

    let err = run_protocol(&x, &ys, &mock_cfg(Variant::Ng, 2), 1).unwrap_err();
    assert!(matches!(
        err,
        Error::Party { party: "receiver", ref source }
            if matches!(**source, Error::NotNullGraph { .. })
    ));
    if !fpsu_core::graph::is_a_exclusive(&g, 1) {
        let err = run_protocol(&x, &ys, &mock_cfg(Variant::Exc, 2), 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Party { party: "receiver", ref source }
                if matches!(**source, Error::NotExclusive { .. })
        ));
    }
}

#[test]
fn scheme_contract_enforced_for_multiplicative_variants() {
    let spec = spec_for(Variant::Lay, 4, 2, 2, 0, 71);
    let (x, ys) = gen_dataset(&spec).unwrap();
    let mut cfg = mock_cfg(Variant::Lay, 2);
    cfg.scheme = SchemeDescriptor::lhe_residuosity(2048);
    assert!(matches!(
        run_protocol(&x, &ys, &cfg, 1),
        Err(Error::UnsupportedOperation(_))
    ));
}

#[test]
fn duplicate_sender_points_are_collapsed() {
    let spec = spec_for(Variant::Ng, 6, 3, 2, 1, 81);
    let (x, mut ys) = gen_dataset(&spec).unwrap();
    ys.push(ys[0].clone());
    ys.push(ys[1].clone());
    let out = run_protocol(&x, &ys, &mock_cfg(Variant::Ng, 2), 81).unwrap();
    assert_eq!(out.union, x.fuzzy_union_oracle(&ys).unwrap());
    assert_eq!(
        out.zero_count,
        x.fuzzy_membership_count(&ys).unwrap()
    );
}

// ---------------------------------------------------------------------
// Transcript schema walk + plaintext scans. The harness holds both
// parties' secrets, so it can search the recorded bytes for them.
// ---------------------------------------------------------------------

const MOCK_CT: usize = 17;

fn walk_pir_query(r: &mut Reader<'_>) {
    let backend = r.u8().unwrap();
    let b = r.u32().unwrap() as usize;
    let _salt = r.u32().unwrap();
    let _db_len = r.u64().unwrap();
    for _ in 0..b {
        match backend {
            0x01 => {
                let sel = r.u32().unwrap() as usize;
                r.fixed(sel * MOCK_CT).unwrap();
            }
            0x02 => {
                let _ = r.u32().unwrap();
            }
            t => panic!("unknown backend tag {t}"),
        }
    }
}

fn walk_pir_resp(r: &mut Reader<'_>) {
    let backend = r.u8().unwrap();
    let _entry_len = r.u32().unwrap();
    let b = r.u32().unwrap() as usize;
    for _ in 0..b {
        match backend {
            0x01 => {
                let chunks = r.u32().unwrap() as usize;
                r.fixed(chunks * MOCK_CT).unwrap();
            }
            0x02 => {
                let _ = r.bytes().unwrap();
            }
            t => panic!("unknown backend tag {t}"),
        }
    }
}

/// Every message must parse completely under the wire schema: ciphertext
/// payloads, counts, lengths and seeds only.
fn walk_transcript(out: &RunOutcome, fpsu_ct: usize) {
    for entry in &out.transcript.entries {
        let mut r = Reader::new(&entry.payload);
        match entry.tag {
            MsgTag::SetupR => {
                let _pk = r.bytes().unwrap();
                let _sokvs = r.bytes().unwrap();
            }
            MsgTag::SetupS => {
                let _backend = r.u8().unwrap();
                r.fixed(32).unwrap(); // bucket seed
                let _pk1 = r.bytes().unwrap();
            }
            MsgTag::Chromatic => {
                let _ = r.u32().unwrap();
            }
            MsgTag::Query => {
                let dims = r.u32().unwrap() as usize;
                for _ in 0..dims {
                    walk_pir_query(&mut Reader::new(r.bytes().unwrap()));
                }
            }
            MsgTag::Resp => {
                let dims = r.u32().unwrap() as usize;
                for _ in 0..dims {
                    let mut dr = Reader::new(r.bytes().unwrap());
                    let r_len = dr.u32().unwrap() as usize;
                    dr.fixed(r_len * fpsu_ct).unwrap();
                    walk_pir_resp(&mut Reader::new(dr.bytes().unwrap()));
                    dr.finish().unwrap();
                }
            }
            MsgTag::Result => {
                let m = r.u32().unwrap() as usize;
                let d = r.u32().unwrap() as usize;
                r.fixed(m * (1 + d) * fpsu_ct).unwrap();
            }
        }
        r.finish().unwrap_or_else(|e| {
            panic!("{} message has unmodeled trailing data: {e}", entry.tag)
        });
    }
}

fn contains_pattern(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

fn point_pattern(p: &fpsu_core::Point) -> Vec<u8> {
    let mut out = Vec::with_capacity(p.dim() * 8);
    for &c in &p.coords {
        out.extend_from_slice(&c.to_be_bytes());
    }
    out
}

#[test]
fn transcript_carries_no_plaintext_coordinates_or_shares() {
    for variant in Variant::ALL {
        let spec = spec_for(variant, 8, 5, 3, 2, 91);
        let (x, ys) = gen_dataset(&spec).unwrap();
        let out = run_protocol(&x, &ys, &mock_cfg(variant, 3), 91).unwrap();
        walk_transcript(&out, MOCK_CT);

        let to_receiver: Vec<u8> = out
            .transcript
            .entries
            .iter()
            .filter(|e| e.from == Party::Sender)
            .flat_map(|e| e.payload.iter().copied())
            .collect();
        let to_sender: Vec<u8> = out
            .transcript
            .entries
            .iter()
            .filter(|e| e.from == Party::Receiver)
            .flat_map(|e| e.payload.iter().copied())
            .collect();

        // sender messages never carry a sender point in clear
        for y in &ys {
            assert!(
                !contains_pattern(&to_receiver, &point_pattern(y)),
                "{variant}: sender point visible in transcript"
            );
        }
        // receiver messages never carry a center or a share value in clear
        for p in x.points() {
            assert!(
                !contains_pattern(&to_sender, &point_pattern(p)),
                "{variant}: receiver point visible in transcript"
            );
        }
        for share in &out.shares {
            let bytes = share.to_bytes_be();
            if bytes.len() < 4 {
                continue; // tiny values collide with length fields
            }
            assert!(
                !contains_pattern(&to_sender, &bytes),
                "{variant}: share value visible in transcript"
            );
        }
    }
}

#[test]
fn false_zero_never_observed_on_outside_points() {
    // 100 runs x 100 distinct outside points = 1e4 non-member retrievals
    let mut total = 0usize;
    for seed in 0..100u64 {
        let spec = DatasetSpec {
            class: StructureClass::NullGraph,
            n: 8,
            m: 100,
            d: 2,
            delta: 2,
            width_bits: 16,
            inside_count: 0,
            seed: 7000 + seed,
        };
        let (x, ys) = gen_dataset(&spec).unwrap();
        let out = run_protocol(&x, &ys, &mock_cfg(Variant::Ng, 2), seed).unwrap();
        assert_eq!(out.zero_count, 0, "false zero at seed {seed}");
        total += ys.len();
    }
    assert!(total >= 10_000);
}
