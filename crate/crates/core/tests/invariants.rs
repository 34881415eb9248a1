use ntcf::gaussian::TruncatedGaussian;
use ntcf::ntcf::gen;
use ntcf::params::NtcfParams;
use ntcf::protocol::{frame_decode, frame_encode, Message, Verdict};
use ntcf::prover::{claw_residual, red, sample_image, valid_b_prime, RedOutcome};
use ntcf::trapdoor::invert;
use ntcf::zq::{mat_vec_mul, BitString, Modulus, ZqVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q521() -> Modulus {
    Modulus::new(521).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_round_trip(
        y in proptest::collection::vec(0u32..521, 1..12),
        b in 0u32..8,
        bits in proptest::collection::vec(0u8..2, 1..40),
        verdict in 0usize..3,
        reason in "[a-z' =.]{0,30}",
    ) {
        let q = q521();
        let msgs = [
            Message::Image(ZqVector::new(y.clone(), q).unwrap()),
            Message::PreimageResp { b, x: ZqVector::new(y, q).unwrap() },
            Message::EquationResp { b_prime: b, c: bits[0], d: BitString::new(bits).unwrap() },
            Message::RoundResult { verdict: [Verdict::Accept, Verdict::Reject, Verdict::Retry][verdict], reason },
        ];
        for msg in msgs {
            let bytes = frame_encode(&msg);
            prop_assert_eq!(frame_decode(&bytes).unwrap(), msg);
        }
    }

    #[test]
    fn red_successes_satisfy_the_shift_identity(seed in any::<u64>(), kappa in 3u32..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ZqVector::random(2, q521(), &mut rng);
        let x0 = ZqVector::random(2, q521(), &mut rng);
        let r = claw_residual(ZqVector::zero(4, q521()), &x0, &s, kappa);
        if let RedOutcome::Success { b_hat_prime, state } = red(&r, kappa, &mut rng).unwrap() {
            prop_assert!(valid_b_prime(kappa).contains(&b_hat_prime));
            prop_assert_eq!(state.s_bar(), s.scale(2 * b_hat_prime as i64));
        }
    }

    #[test]
    fn honest_images_pass_chk_and_invert(seed in any::<u64>(), kappa in 2u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (key, td) = gen(&NtcfParams::desk(kappa), &mut rng).unwrap();
        let (y, b, x) = sample_image(&key, &mut rng).unwrap();
        prop_assert!(key.chk(b, &x, &y));
        prop_assert_eq!(td.inv(&key, b, &y).unwrap(), x.clone());
        let claw = td.claw_enumerate(&key, &y).unwrap();
        prop_assert!(claw.is_consistent(&td.s));
        prop_assert_eq!(&claw.xs[b as usize], &x);
    }

    #[test]
    fn invert_recovers_bounded_noise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = NtcfParams::desk(3);
        let (_, td) = gen(&p, &mut rng).unwrap();
        let a = td.trapdoor.matrix();
        let s = ZqVector::random(p.n, p.q, &mut rng);
        let e = TruncatedGaussian::new(p.q, p.b_v, p.m).unwrap().sample(&mut rng);
        let v = mat_vec_mul(a, &s).unwrap().add(&e).unwrap();
        prop_assert_eq!(invert(&td.trapdoor, &v).unwrap(), (s, e));
    }

    #[test]
    fn gaussian_samples_stay_in_the_box(seed in any::<u64>(), width in 0.5f64..6.0, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TruncatedGaussian::new(q521(), width, dim).unwrap();
        let x = g.sample(&mut rng);
        prop_assert!(g.contains(&x));
        prop_assert!(x.max_abs() as f64 <= width);
        prop_assert!(g.density_eval(&x) > 0.0);
    }
}
