use std::f64::consts::{E, PI};
use std::sync::Arc;

use approx::assert_relative_eq;
use bsde_core::forward::{coupled_fine_reference, reference_exit_times, ExitSamples, Storage};
use bsde_core::moments::{
    ball_cutoff_threshold, check_h_prime, exp_moment_scan, freidlin_bound, freidlin_check_bundle,
    geometric_batches, one_d_threshold, power_from_exp, CheckVerdict, ScanVerdict,
};
use bsde_core::problem::{Domain, GridSpec, ProblemSpec};
use bsde_core::rng::stream;
use bsde_core::Error;
use proptest::prelude::*;

#[test]
fn thresholds() {
    assert_relative_eq!(one_d_threshold(1.0, 1.0).unwrap(), PI * PI / 8.0);
    assert_relative_eq!(one_d_threshold(0.5, 0.5).unwrap(), PI * PI / 2.0);
    assert_relative_eq!(one_d_threshold(1.0, 3.0).unwrap(), 0.5 * (PI / 4.0).powi(2));
    assert!(one_d_threshold(0.0, 1.0).is_err());
    assert_eq!(ball_cutoff_threshold(1, 1.0).unwrap(), 0.125);
    assert_eq!(ball_cutoff_threshold(2, 1.0).unwrap(), 0.25);
    assert_eq!(ball_cutoff_threshold(1, 2.0).unwrap(), 0.03125);
    assert_eq!(freidlin_bound(1, 1.0, 1).unwrap(), 8.0);
    assert_eq!(freidlin_bound(1, 1.0, 2).unwrap(), 128.0);
}

#[test]
fn power_bounds() {
    assert_relative_eq!(power_from_exp(E, 1.0, 1).unwrap(), E);
    assert_relative_eq!(power_from_exp(2.0, 0.5, 2).unwrap(), 16.0);
    // M = 1 only for tau = 0, whose moments vanish.
    assert!(power_from_exp(1.0, 3.0, 4).unwrap() >= 0.0);
    assert!(power_from_exp(0.0, 1.0, 1).is_err());
}

#[test]
fn constant_time_scan() {
    let s = ExitSamples { times: vec![Some(1.0); 10_000], t_max: 5.0 };
    let rows = exp_moment_scan(&s, &[2.0], &geometric_batches(s.len())).unwrap();
    assert_relative_eq!(rows[0].estimates.last().unwrap().1, E * E, max_relative = 1e-9);
    assert_eq!(rows[0].verdict, ScanVerdict::Stable);
    assert_eq!(rows[0].censor_mass, 0.0);
}

#[test]
fn scan_errors() {
    let censored = ExitSamples { times: vec![None; 10_000], t_max: 5.0 };
    assert!(matches!(exp_moment_scan(&censored, &[1.0], &[10_000]), Err(Error::Numerical(_))));
    let small = ExitSamples { times: vec![Some(1.0); 100], t_max: 5.0 };
    assert!(exp_moment_scan(&small, &[1.0], &[100]).is_err());
    let s = ExitSamples { times: vec![Some(1.0); 10_000], t_max: 5.0 };
    assert!(exp_moment_scan(&s, &[1.0], &[5000, 2000]).is_err());
}

fn brownian_bundle(h: f64, refine: usize, n: usize, seed: u64) -> bsde_core::forward::PathBundle {
    let p = Arc::new(ProblemSpec::builder("bm", Domain::interval(-1.0, 1.0), vec![0.0]).build().unwrap());
    coupled_fine_reference(p, GridSpec::new(h, 40.0).unwrap(), refine, n, seed, Storage::Exits).unwrap()
}

#[test]
fn brownian_moments() {
    let b = brownian_bundle(0.02, 8, 20_000, 13);
    let tau = reference_exit_times(&b).unwrap();
    let mean = tau.truncated_mean();
    assert!((mean.mean - 1.0).abs() <= 3.0 * mean.se(), "E[tau] = {} se {}", mean.mean, mean.se());

    let star = one_d_threshold(1.0, 1.0).unwrap();
    let rows = exp_moment_scan(&tau, &[0.25 * star, 0.5], &geometric_batches(tau.len())).unwrap();
    assert_eq!(rows[0].verdict, ScanVerdict::Stable);

    let m_hat = rows[1].estimates.last().unwrap().1;
    let t2: f64 = tau.times.iter().map(|t| t.unwrap().powi(2)).sum::<f64>() / tau.len() as f64;
    assert!(power_from_exp(m_hat, 0.5, 2).unwrap() >= t2);
    assert!(power_from_exp(m_hat, 0.5, 2).unwrap() <= 16.0 * 1.5);
    assert!(t2 <= 16.0);
}

#[test]
fn freidlin_passes() {
    let b = brownian_bundle(0.04, 16, 20_000, 17);
    let r = freidlin_check_bundle(&b, 0.25, &[1, 2, 3]).unwrap();
    assert!(r.censored_fraction <= 0.01);
    for row in &r.rows {
        assert_eq!(row.verdict, CheckVerdict::Pass, "{row:?}");
        assert!(row.estimate >= 0.0 && row.estimate < row.bound);
    }

    let disc = Arc::new(ProblemSpec::builder("disc", Domain::ball(2, 1.0), vec![0.0, 0.0]).build().unwrap());
    let g = GridSpec::new(0.04, 4.0).unwrap();
    let b = coupled_fine_reference(disc, g, 4, 100, 1, Storage::Exits).unwrap();
    assert!(freidlin_check_bundle(&b, 0.25, &[1]).is_err());
}

#[test]
fn freidlin_censoring_is_inconclusive() {
    let p = Arc::new(ProblemSpec::builder("bm", Domain::interval(-1.0, 1.0), vec![0.0]).build().unwrap());
    let b = coupled_fine_reference(p, GridSpec::new(0.04, 0.4).unwrap(), 8, 500, 3, Storage::Exits).unwrap();
    let r = freidlin_check_bundle(&b, 0.25, &[1]).unwrap();
    assert!(r.censored_fraction > 0.01);
    assert_eq!(r.rows[0].verdict, CheckVerdict::Inconclusive);
}

#[test]
fn h_prime() {
    let c = check_h_prime(0.01, 1, 1.0, 0.25).unwrap();
    assert!(c.ok());
    assert!(c.tail_probability < 2e-3);
    let c = check_h_prime(0.6, 1, 1.0, 0.25).unwrap();
    assert!(!c.step_ok && c.tail_ok);
    let c = check_h_prime(0.5, 3, 1.0, 0.45).unwrap();
    assert!(!c.tail_ok);
    assert!(check_h_prime(0.5, 1, 1.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scan_monotone_in_m(seed in any::<u64>(), m1 in 0.0f64..1.0, dm in 0.0f64..1.0) {
        use rand::Rng;
        let mut rng = stream(seed, 0);
        let times = (0..10_000)
            .map(|_| {
                let t: f64 = rng.gen::<f64>() * 3.0;
                (t < 2.9).then_some(t)
            })
            .collect();
        let s = ExitSamples { times, t_max: 3.0 };
        let rows = exp_moment_scan(&s, &[m1, m1 + dm], &[10_000]).unwrap();
        let a = rows[0].estimates[0].1;
        let b = rows[1].estimates[0].1;
        prop_assert!(a >= 1.0 && b >= a);
    }

    #[test]
    fn power_bound_dominates(seed in any::<u64>(), m in 0.1f64..2.0, p in 1u32..4) {
        use rand::Rng;
        let mut rng = stream(seed, 0);
        let t: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>() * 2.0).collect();
        let m_hat = t.iter().map(|x| (m * x).exp()).sum::<f64>() / t.len() as f64;
        let moment = t.iter().map(|x| x.powi(p as i32)).sum::<f64>() / t.len() as f64;
        prop_assert!(power_from_exp(m_hat, m, p).unwrap() >= moment);
    }
}
