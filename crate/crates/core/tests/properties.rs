//! Property tests over randomly parameterised codes, channels and symbols.

use dstbc::channel::{build_G, effective_channel, vec_tilde, ChannelRealization, PowerConfig};
use dstbc::constellation::{
    difference_set, make_pam, make_rotated_lattice, verify_rotation, RotationMatrix,
};
use dstbc::construct::{build, drop_relays, rate_cspcu, DstbcCode};
use dstbc::decode::{
    ml_decode, pic_decode, pic_sic_decode, projector_complement, residual, DecodeProblem, RANK_TOL,
};
use dstbc::design::CodProfile;
use dstbc::diversity::check_pic_sic;
use dstbc::sim::symbols_from_indices;
use dstbc::{Cx, Real};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(alamouti?, L, λ, n)` with `λ ≤ L`.
fn code_params() -> impl Strategy<Value = (bool, usize, usize, usize)> {
    (any::<bool>(), 1usize..=3, 1usize..=3)
        .prop_flat_map(|(alamouti, l, n)| (Just(alamouti), Just(l), 1..=l, Just(n)))
}

fn make_code<T: Real>(alamouti: bool, l: usize, lambda: usize, n: usize) -> DstbcCode<T> {
    let cod = if alamouti {
        CodProfile::alamouti()
    } else {
        CodProfile::trivial()
    };
    build(l * cod.cols(), &cod, lambda, n).unwrap()
}

fn random_x(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn max_dev(a: &DMatrix<Cx<f64>>, b: &DMatrix<Cx<f64>>) -> f64 {
    (a - b).iter().map(|e| e.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evaluate_is_real_linear((al, l, lam, n) in code_params(), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let code = make_code::<f64>(al, l, lam, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = code.num_symbols();
        let (x, y) = (random_x(k, &mut rng), random_x(k, &mut rng));
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let d = code.design();
        let lhs = d.evaluate(&mix).unwrap();
        let rhs = d.evaluate(&x).unwrap() * Cx::new(a, 0.0) + d.evaluate(&y).unwrap() * Cx::new(b, 0.0);
        prop_assert!(max_dev(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn cod_codewords_have_orthogonal_columns(alamouti in any::<bool>(), seed in any::<u64>()) {
        let cod = if alamouti { CodProfile::<f64>::alamouti() } else { CodProfile::trivial() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_x(cod.num_symbols(), &mut rng);
        let c = cod.design().evaluate(&x).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let expect = DMatrix::<Cx<f64>>::identity(cod.cols(), cod.cols()) * Cx::new(energy, 0.0);
        prop_assert!(max_dev(&(c.adjoint() * &c), &expect) < 1e-10);
    }

    #[test]
    fn relay_form_reconstructs_codeword((al, l, lam, n) in code_params(), seed in any::<u64>()) {
        let code = make_code::<f64>(al, l, lam, n);
        let form = code.relay_form().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_x(code.num_symbols(), &mut rng);
        prop_assert!(max_dev(&form.reconstruct(&x), &code.design().evaluate(&x).unwrap()) < 1e-10);
        prop_assert_eq!(form.t1(), code.num_symbols() / 2);
    }

    #[test]
    fn dropping_relays_removes_columns((al, l, lam, n) in code_params(), seed in any::<u64>()) {
        let code = make_code::<f64>(al, l, lam, n);
        prop_assume!(code.relays() > 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drop = rng.random_range(0..code.relays());
        let reduced = drop_relays(&code, &[drop]).unwrap();
        let x = random_x(code.num_symbols(), &mut rng);
        let keep: Vec<usize> = (0..code.relays()).filter(|&j| j != drop).collect();
        let full = code.design().evaluate(&x).unwrap().select_columns(&keep);
        prop_assert!(max_dev(&reduced.design().evaluate(&x).unwrap(), &full) < 1e-12);
        let form = reduced.relay_form().unwrap();
        prop_assert!(max_dev(&form.reconstruct(&x), &full) < 1e-10);
    }

    #[test]
    fn symbols_sit_on_their_layer((al, l, lam, n) in code_params()) {
        let code = make_code::<f64>(al, l, lam, n);
        let p = code.params().unwrap();
        let (tp, np, kp) = (p.cod.rows(), p.cod.cols(), p.cod.num_symbols());
        for (s, w) in code.design().weights().iter().enumerate() {
            let layer = s / (lam * kp);
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    if w[(r, c)].norm() > 0.0 {
                        prop_assert_eq!(r / tp - c / np, layer);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_check_ignores_component_order(theta in 0.05f64..1.5, seed in any::<u64>()) {
        let q = RotationMatrix::planar(theta);
        let mut comps: Vec<f64> = vec![-3.0, -1.0, 1.0, 3.0];
        let before = verify_rotation(&q, &comps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..comps.len()).rev() {
            comps.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(before, verify_rotation(&q, &comps));
    }

    #[test]
    fn verified_rotations_give_nonzero_difference_coordinates(theta in 0.05f64..1.5) {
        let q = RotationMatrix::planar(theta);
        let pam = make_pam::<f64>(4).unwrap();
        let set = make_rotated_lattice(&pam, &q).unwrap();
        if verify_rotation(&q, pam.components()) {
            for d in difference_set(&set).iter().skip(1) {
                prop_assert!(d.iter().all(|v| v.abs() > 1e-9));
            }
        }
    }

    #[test]
    fn projectors_annihilate_interference((al, l, lam, n) in code_params(), seed in any::<u64>()) {
        let code = make_code::<f64>(al, l, lam, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelRealization::<f64>::draw(code.relays(), 2, &mut rng);
        let g = build_G(&code, &effective_channel(&code, &ch).unwrap(), 3.0).unwrap();
        let grouping = code.grouping();
        for k in 0..grouping.len() {
            for (set, sic) in [(grouping.complement(k), false), (grouping.tail(k), true)] {
                let p = projector_complement(&g.select_columns(&set), RANK_TOL);
                prop_assert!((&p * &p - &p).amax() < 1e-10);
                prop_assert!((&p - p.transpose()).amax() < 1e-10);
                for l2 in 0..grouping.len() {
                    if l2 != k && (!sic || l2 > k) {
                        prop_assert!((&p * g.select_columns(grouping.group(l2))).amax() < 1e-10 * g.amax().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_decoding_is_exact((al, l, lam, n) in code_params(), seed in any::<u64>()) {
        let code = make_code::<f64>(al, l, lam, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelRealization::<f64>::draw(code.relays(), 1, &mut rng);
        let g = build_G(&code, &effective_channel(&code, &ch).unwrap(), 1.0).unwrap();
        let idx: Vec<usize> = code.group_sets().iter().map(|s| rng.random_range(0..s.len())).collect();
        let y = &g * symbols_from_indices(&code, &idx);
        let p = DecodeProblem::new(&g, &y, code.grouping(), code.group_sets()).unwrap();
        prop_assert_eq!(&pic_sic_decode(&p).indices, &idx);
        if n <= 2 {
            prop_assert_eq!(&pic_decode(&p).indices, &idx);
        }
    }

    #[test]
    fn ml_residual_never_exceeds_pic_sic(seed in any::<u64>(), snr in 0.0f64..3.0) {
        let code = make_code::<f64>(false, 2, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelRealization::<f64>::draw(code.relays(), 1, &mut rng);
        let g = build_G(&code, &effective_channel(&code, &ch).unwrap(), snr).unwrap();
        let y = DVector::from_fn(g.nrows(), |_, _| rng.random_range(-2.0..2.0));
        let p = DecodeProblem::new(&g, &y, code.grouping(), code.group_sets()).unwrap();
        let ml = ml_decode(&p).unwrap();
        let sic = pic_sic_decode(&p);
        prop_assert!(residual(&g, &y, &ml.x_hat) <= residual(&g, &y, &sic.x_hat) + 1e-12);
        prop_assert!((residual(&g, &y, &ml.x_hat) - ml.per_group_residuals[0]).abs() < 1e-9);
    }

    #[test]
    fn build_g_matches_direct_evaluation((al, l, lam, n) in code_params(), seed in any::<u64>(), rho in 0.1f64..10.0) {
        let code = make_code::<f64>(al, l, lam, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = ChannelRealization::<f64>::draw(code.relays(), 2, &mut rng);
        let h = effective_channel(&code, &ch).unwrap();
        let x = random_x(code.num_symbols(), &mut rng);
        let lhs = build_G(&code, &h, rho).unwrap() * DVector::from_vec(x.clone());
        let rhs = vec_tilde(&(code.design().evaluate(&x).unwrap() * &h)) * rho.sqrt();
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn default_power_split_meets_constraint((al, l, lam, n) in code_params(), p in 0.0f64..1e4) {
        let code = make_code::<f64>(al, l, lam, n);
        let power = PowerConfig::for_code(&code, p).unwrap();
        let r = rate_cspcu(&code).unwrap();
        let rate = *r.numer() as f64 / *r.denom() as f64;
        prop_assert!(power.satisfies_constraint(code.t1().unwrap(), code.t2(), rate));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn check_outcome_is_scale_invariant((al, l, lam, n) in code_params(), scale in 1e-3f64..1e3) {
        let code = make_code::<f64>(al, l, lam, n);
        let scaled = dstbc::design::LinearDesign::new(
            code.design().rows(),
            code.design().cols(),
            code.design().weights().iter().map(|w| w * Cx::new(scale, 0.0)).collect(),
        ).unwrap();
        let scaled = DstbcCode::from_design(scaled, code.grouping().clone()).unwrap();
        let a = check_pic_sic(&code, 20, &mut ChaCha8Rng::seed_from_u64(1));
        let b = check_pic_sic(&scaled, 20, &mut ChaCha8Rng::seed_from_u64(1));
        prop_assert_eq!(a.passed, b.passed);
        prop_assert!((a.min_singular_value - b.min_singular_value).abs() < 1e-8);
    }
}

#[test]
fn single_precision_pipeline_recovers_noiseless_symbols() {
    let code = make_code::<f32>(true, 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let ch = ChannelRealization::<f32>::draw(code.relays(), 2, &mut rng);
        let g = build_G(&code, &effective_channel(&code, &ch).unwrap(), 1.0).unwrap();
        let idx: Vec<usize> = code
            .group_sets()
            .iter()
            .map(|s| rng.random_range(0..s.len()))
            .collect();
        let y = &g * symbols_from_indices(&code, &idx);
        let p = DecodeProblem::new(&g, &y, code.grouping(), code.group_sets()).unwrap();
        assert_eq!(pic_sic_decode(&p).indices, idx);
    }
}
