//! Worked examples of the code family, the diversity checks and the channel
//! model, each compared against an independent oracle.

use dstbc::channel::{
    covariance_bound, effective_channel, noise_covariance, simulate_transmission_with,
    ChannelRealization, NoiseInjection, PowerConfig,
};
use dstbc::construct::{
    bits_per_channel_use, build, drop_relays, preset, rate_cspcu, PresetName, PresetParams,
};
use dstbc::design::CodProfile;
use dstbc::diversity::{
    check_pic, check_pic_sic, check_zf, cod_certificate, is_witness, relay_failure_sweep,
    Criterion, Witness,
};
use dstbc::{Code, Complex, Rational};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn alamouti_family_broadcast_length_and_conjugated_relays() {
    // The first column of the stacked Alamouti blocks carries all 2nλ complex
    // symbols; every second relay column is conjugated.
    for (n_relays, lambda, layers) in [(2, 1, 1), (4, 2, 1), (6, 2, 2), (8, 1, 3), (8, 4, 2)] {
        let code: Code = build(n_relays, &CodProfile::alamouti(), lambda, layers).unwrap();
        assert_eq!(code.t1(), Some(2 * layers * lambda));
        let expect: Vec<usize> = (1..n_relays).step_by(2).collect();
        assert_eq!(code.relay_form().unwrap().conjugated(), expect.as_slice());
        assert_eq!(code.t2(), n_relays + 2 * (layers - 1));
        assert_eq!(code.num_symbols(), 4 * layers * lambda);
    }
}

#[test]
fn trivial_family_broadcast_length_and_no_conjugation() {
    for (n_relays, lambda, layers) in [(1, 1, 1), (2, 1, 2), (3, 2, 2), (4, 4, 3), (5, 3, 1)] {
        let code: Code = build(n_relays, &CodProfile::trivial(), lambda, layers).unwrap();
        assert_eq!(code.t1(), Some(layers * lambda));
        assert!(code.relay_form().unwrap().conjugated().is_empty());
        assert_eq!(code.t2(), n_relays + layers - 1);
        assert_eq!(code.grouping().len(), 2 * layers);
    }
}

#[test]
fn rates_follow_closed_forms() {
    for n_relays in 1..=8usize {
        for layers in 1..=4usize {
            for lambda in 1..=n_relays {
                let c: Code = build(n_relays, &CodProfile::trivial(), lambda, layers).unwrap();
                // λ / (λ + 1 + (N−1)/n) = λn / (λn + n + N − 1)
                let expect = Rational::new(
                    (lambda * layers) as u64,
                    (lambda * layers + layers + n_relays - 1) as u64,
                );
                assert_eq!(rate_cspcu(&c).unwrap(), expect);
                if n_relays % 2 == 0 && lambda <= n_relays / 2 {
                    let c: Code = build(n_relays, &CodProfile::alamouti(), lambda, layers).unwrap();
                    // λ / (λ + 1 + (N−2)/(2n)) = 2λn / (2λn + 2n + N − 2)
                    let expect = Rational::new(
                        (2 * lambda * layers) as u64,
                        (2 * lambda * layers + 2 * layers + n_relays - 2) as u64,
                    );
                    assert_eq!(rate_cspcu(&c).unwrap(), expect);
                }
            }
        }
    }
}

#[test]
fn reference_setups_carry_two_bits_per_channel_use() {
    let pam_setup: Code = build(8, &CodProfile::alamouti(), 1, 3).unwrap();
    let pam_setup = pam_setup
        .with_signal_set(dstbc::constellation::make_pam(8).unwrap())
        .unwrap();
    assert_eq!(rate_cspcu(&pam_setup).unwrap(), Rational::new(1, 3));
    assert_eq!(
        bits_per_channel_use(&pam_setup).unwrap(),
        Rational::from_integer(2)
    );
    let qam_setup: Code = build(6, &CodProfile::alamouti(), 2, 2).unwrap();
    let qam = dstbc::constellation::signal_set_with_order(2, 16).unwrap();
    let qam_setup = qam_setup.with_signal_set(qam).unwrap();
    assert_eq!(rate_cspcu(&qam_setup).unwrap(), Rational::new(1, 2));
    assert_eq!(
        bits_per_channel_use(&qam_setup).unwrap(),
        Rational::from_integer(2)
    );
}

#[test]
fn layered_codes_pass_pic_sic_with_certificate() {
    for (alamouti, n_relays, lambda, layers) in [
        (true, 4, 2, 2),
        (true, 8, 1, 3),
        (false, 4, 2, 2),
        (false, 3, 1, 3),
    ] {
        let cod = if alamouti {
            CodProfile::alamouti()
        } else {
            CodProfile::trivial()
        };
        let code: Code = build(n_relays, &cod, lambda, layers).unwrap();
        let r = check_pic_sic(&code, 200, &mut rng(1));
        assert!(r.passed);
        assert_eq!(r.analytic_certificate, Some(true));
    }
}

#[test]
fn two_relay_single_layer_pair_code_passes_pic() {
    let code: Code = build(2, &CodProfile::trivial(), 2, 1).unwrap();
    let r = check_pic(&code, 1000, &mut rng(2));
    assert!(r.passed);
    assert!(r.samples_tested >= 1000);
}

#[test]
fn three_layer_code_fails_pic_but_not_pic_sic() {
    // N = 2, λ = 2, n = 3, trivial block: block (r, c) holds
    // z_{r−c, c} = x_{4(r−c)+c} + i x_{4(r−c)+c+2}. For group 2 = {x4, x5}
    // (layer 1, real parts), choosing z_{0,0} = z_{2,1} = 0, z_{0,1} = z_{1,0}
    // and z_{2,0} = z_{1,1} makes both columns equal.
    let code: Code = build(2, &CodProfile::trivial(), 2, 3).unwrap();
    let set = &code.group_sets()[2];
    let a = (set.point(0) - set.point(3))
        .iter()
        .copied()
        .collect::<Vec<f64>>();
    assert!(a.iter().all(|v| v.abs() > 1e-9));
    let mut u = vec![0.0; 12];
    u[1] = a[0];
    u[8] = a[1];
    let w = Witness { k: 2, a_k: a, u };
    assert!(is_witness(&code, Criterion::Pic, &w));
    assert!(!is_witness(&code, Criterion::PicSic, &w));
    let v = w.symbol_vector(&code, Criterion::Pic);
    let x = code.design().evaluate(&v).unwrap();
    assert!((x.column(0) - x.column(1)).iter().all(|e| e.norm() < 1e-15));
    let sic = check_pic_sic(&code, 500, &mut rng(3));
    assert!(sic.passed);
    assert_eq!(sic.analytic_certificate, Some(true));
    // Three layers are outside the PIC certificate.
    assert_eq!(check_pic(&code, 10, &mut rng(3)).analytic_certificate, None);
}

fn duplicated_column_code() -> Code {
    let base: Code = build(4, &CodProfile::alamouti(), 1, 1).unwrap();
    let d = base.design();
    let weights = d
        .weights()
        .iter()
        .map(|w| {
            let mut w = w.clone();
            let c0 = w.column(0).into_owned();
            w.set_column(1, &c0);
            w
        })
        .collect();
    let d = dstbc::design::LinearDesign::new(d.rows(), d.cols(), weights).unwrap();
    Code::from_design(d, base.grouping().clone()).unwrap()
}

#[test]
fn witnesses_nest_from_pic_sic_to_zf() {
    let code = duplicated_column_code();
    let sic = check_pic_sic(&code, 50, &mut rng(4));
    let pic = check_pic(&code, 50, &mut rng(4));
    let zf = check_zf(&code, 50, &mut rng(4));
    assert!(!sic.passed && !pic.passed && !zf.passed);
    for (report, c) in [(&sic, Criterion::PicSic), (&pic, Criterion::Pic)] {
        let w = report.witness.as_ref().unwrap();
        assert!(is_witness(&code, c, w));
        assert!(is_witness(&code, Criterion::Zf, &w.to_zf(&code, c)));
    }
    let w = sic.witness.unwrap();
    assert!(is_witness(&code, Criterion::Pic, &w));
}

#[test]
fn single_relay_failures_keep_full_diversity() {
    let code: Code = build(4, &CodProfile::alamouti(), 1, 2).unwrap();
    let sweep = relay_failure_sweep(&code, 1, 200, &mut rng(5)).unwrap();
    assert_eq!(sweep.len(), 5);
    assert!(sweep.iter().all(|r| r.report.passed));
    assert_eq!(
        sweep[1..]
            .iter()
            .map(|r| r.dropped.clone())
            .collect::<Vec<_>>(),
        vec![vec![0], vec![1], vec![2], vec![3]]
    );
}

#[test]
fn duplicate_columns_fail_when_both_are_kept() {
    let code = duplicated_column_code();
    let reduced = drop_relays(&code, &[3]).unwrap();
    assert!(!check_pic_sic(&reduced, 20, &mut rng(6)).passed);
    let reduced = drop_relays(&code, &[1]).unwrap();
    assert!(check_pic_sic(&reduced, 20, &mut rng(6)).passed);
}

#[test]
fn certificate_refuses_non_layered_codes() {
    let code = duplicated_column_code();
    assert!(cod_certificate(&code).is_err());
    let shi: Code = preset(
        PresetName::ShiZhang,
        PresetParams {
            relays: 4,
            lambda: None,
            layers: 1,
        },
    )
    .unwrap();
    assert!(cod_certificate(&shi).is_ok());
}

#[test]
fn transmission_mean_matches_equivalent_model() {
    // With only destination noise the sample mean of Y over many draws
    // converges to √ρ X H at rate 1/√trials.
    let code: Code = build(2, &CodProfile::trivial(), 1, 2).unwrap();
    let mut r = rng(7);
    let ch = ChannelRealization::draw(2, 2, &mut r);
    let power = PowerConfig::for_code(&code, 3.0).unwrap();
    let x: Vec<f64> = (0..code.num_symbols())
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    let h = effective_channel(&code, &ch).unwrap();
    let expect = code.design().evaluate(&x).unwrap() * &h * Complex::new(power.rho().sqrt(), 0.0);
    let trials = 10_000;
    let mut mean = DMatrix::<Complex>::zeros(expect.nrows(), expect.ncols());
    for _ in 0..trials {
        mean += simulate_transmission_with(&code, &x, &ch, &power, NoiseInjection::ALL, &mut r)
            .unwrap();
    }
    mean /= Complex::new(trials as f64, 0.0);
    // Per-entry noise variance is at most the largest eigenvalue of Γ′.
    let noise = noise_covariance(&code, &ch, &power).unwrap();
    let sd = (2.0 * noise.eigenvalues.max() / trials as f64).sqrt();
    assert!((mean - expect).iter().all(|e| e.norm() < 5.0 * sd));
}

#[test]
fn covariance_bound_holds_on_random_channels() {
    let mut r = rng(8);
    for code in [
        build::<f64>(2, &CodProfile::trivial(), 1, 2).unwrap(),
        build::<f64>(4, &CodProfile::alamouti(), 2, 2).unwrap(),
    ] {
        for _ in 0..100 {
            let ch = ChannelRealization::draw(code.relays(), 2, &mut r);
            let p = PowerConfig::for_code(&code, r.random_range(0.1..1000.0)).unwrap();
            let b = covariance_bound(&code, &ch, &p).unwrap();
            assert!(b.holds(), "{b:?}");
            let noise = noise_covariance(&code, &ch, &p).unwrap();
            assert!(noise.eigenvalues.min() >= -1e-10);
        }
    }
}
