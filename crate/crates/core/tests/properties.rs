use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mgcplus::channel::apply_ids_errors;
use mgcplus::codec::{decode_reads, encode_file, CodecParams};
use mgcplus::dna::{edit_distance, edit_distance_bits, reverse_complement};
use mgcplus::gf::Field;
use mgcplus::inner::ChannelEstimate;
use mgcplus::rs::RsCode;

fn dna(max: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(prop::sample::select(b"ACGT".to_vec()), 0..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gf16_field_laws(a in 0u16.., b in 0u16.., c in 0u16..) {
        let f = Field::gf65536();
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn rs_corrects_up_to_half_distance(
        msg in proptest::collection::vec(0u16..256, 1..20),
        parity in 1usize..12,
        seed in any::<u64>(),
    ) {
        use rand::seq::index::sample;
        use rand::Rng;
        let f = Field::gf256();
        let n = msg.len() + parity;
        let code = RsCode::new(f, msg.len(), n).unwrap();
        let cw = code.encode(&msg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let erasures = rng.random_range(0..=parity);
        let errors = (parity - erasures) / 2;
        let mut rx: Vec<Option<u16>> = cw.iter().map(|&s| Some(s)).collect();
        let picks = sample(&mut rng, n, erasures + errors);
        for (i, pos) in picks.into_iter().enumerate() {
            if i < erasures {
                rx[pos] = None;
            } else {
                rx[pos] = Some(cw[pos] ^ rng.random_range(1..256u16));
            }
        }
        prop_assert_eq!(code.decode_full(&rx).unwrap(), msg);
    }

    #[test]
    fn bit_vector_edit_distance_equals_dp(a in dna(200), b in dna(200)) {
        prop_assert_eq!(edit_distance_bits(&a, &b), edit_distance(&a, &b));
    }

    #[test]
    fn reverse_complement_is_involution(s in dna(100)) {
        prop_assert_eq!(reverse_complement(&reverse_complement(&s)), s);
    }

    #[test]
    fn noiseless_channel_is_identity(s in dna(150), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(apply_ids_errors(&s, (0.0, 0.0, 0.0), &mut rng), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn round_trip_any_file(data in proptest::collection::vec(any::<u8>(), 1..600), preset in 0usize..6, seed in any::<u64>()) {
        let p = CodecParams::preset(CodecParams::PRESETS[preset]).unwrap();
        let enc = encode_file(&data, &p, seed).unwrap();
        let rep = decode_reads(&enc.sequences, &enc.manifest, &ChannelEstimate::noiseless());
        prop_assert_eq!(rep.data, Some(data));
    }
}
