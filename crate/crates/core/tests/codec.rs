use proptest::prelude::*;
use rcpolar::codec::{read_golden, write_golden, GoldenVector};
use rcpolar::reliability::{ga_evolve, mother_channel_means, puncture_pattern, select_info_set, LlrDistribution};
use rcpolar::{rcp_encode, sc_decode, transmit, ChannelParams, LlrWordF32, PolarCodeSpec, RcpCode};
use std::io::BufReader;

#[test]
fn golden_vectors_match_reference_encoder() {
    let f = std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden.jsonl")).unwrap();
    let vectors = read_golden(BufReader::new(f)).unwrap();
    assert_eq!(vectors.len(), 8);
    for v in &vectors {
        assert!(v.verify().unwrap(), "{:?}", v.spec);
    }
    let mut buf = Vec::new();
    write_golden(&mut buf, &vectors).unwrap();
    assert_eq!(read_golden(&buf[..]).unwrap(), vectors);
}

#[test]
fn golden_vector_detects_corruption() {
    let code = RcpCode::new(PolarCodeSpec::new(8, vec![3, 5, 6, 7], vec![0]).unwrap(), 9, vec![3, 3]).unwrap();
    let mut v = GoldenVector::generate(&code, &[1, 0, 1, 1]).unwrap();
    assert!(v.verify().unwrap());
    v.codeword_hex = "0000".into();
    assert!(!v.verify().unwrap());
}

fn code_strategy() -> impl Strategy<Value = (RcpCode, Vec<u8>)> {
    (2u32..=8, any::<u64>()).prop_flat_map(|(log_n0, salt)| {
        let n0 = 1usize << log_n0;
        (n0 / 2 + 1..=n0).prop_flat_map(move |m| {
            (1..=m, 0..=m).prop_flat_map(move |(k, reps)| {
                (
                    prop::collection::vec(0..k, reps),
                    prop::collection::vec(0u8..=1, k),
                )
                    .prop_map(move |(r, bits)| {
                        let punct = puncture_pattern(n0, m).unwrap();
                        let strong = LlrDistribution::new(10.0 + (salt % 7) as f64).unwrap();
                        let table = ga_evolve(&mother_channel_means(n0, &punct, &strong)).unwrap();
                        let info = select_info_set(&table, k).unwrap();
                        let rep = r.iter().map(|&j| info[j]).collect::<Vec<_>>();
                        let spec = PolarCodeSpec::new(n0, info, punct).unwrap();
                        (RcpCode::new(spec, m + rep.len(), rep).unwrap(), bits)
                    })
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn noiseless_round_trip((code, bits) in code_strategy(), seed in any::<u64>()) {
        let word = rcp_encode(&bits, &code).unwrap();
        prop_assert_eq!(word.len(), code.n());
        let p = ChannelParams::from_sigma(1e-6).unwrap();
        let llrs = transmit::<f64>(&word, &p, seed).unwrap();
        prop_assert_eq!(sc_decode(&llrs, &code).unwrap(), bits.clone());
        let llrs32: LlrWordF32 = transmit::<f32>(&word, &p, seed).unwrap();
        prop_assert_eq!(sc_decode(&llrs32, &code).unwrap(), bits);
    }

    #[test]
    fn json_round_trip((code, _bits) in code_strategy()) {
        let s = serde_json::to_string(&code).unwrap();
        let back: RcpCode = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, code);
    }
}
