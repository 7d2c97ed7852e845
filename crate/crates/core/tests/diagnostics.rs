mod common;

use proptest::prelude::*;
use red_lwsgs::diagnostics::*;
use red_lwsgs::rng::{GaussianSource, RngStream};
use red_lwsgs::{Error, ImageField, Shape};

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    RngStream::new(seed).fill_standard_normal(&mut w);
    let scale = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut x = w[0];
    out.push(x);
    for e in &w[1..] {
        x = phi * x + scale * e;
        out.push(x);
    }
    out
}

fn iid(n: usize, seed: u64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    RngStream::new(seed).fill_standard_normal(&mut w);
    w
}

#[test]
fn psnr_examples() {
    let shape = Shape::gray(10, 10);
    let x = common::random_image(shape, 1);
    assert!(psnr(&x, &x, 1.0).unwrap().is_infinite());
    let zero = ImageField::zeros(shape);
    let off = ImageField::filled(shape, 0.1);
    assert!((psnr(&zero, &off, 1.0).unwrap().db() - 20.0).abs() < 1e-12);
    assert!((mse(&zero, &off).unwrap() - 0.01).abs() < 1e-15);
    assert!(psnr(&zero, &ImageField::zeros(Shape::gray(10, 11)), 1.0).is_err());
    assert!(psnr(&zero, &off, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_symmetric_and_permutation_invariant(seed in any::<u64>()) {
        let shape = Shape::gray(6, 7);
        let a = common::random_image(shape, seed);
        let b = common::random_image(shape, seed ^ 0x55);
        let p = psnr(&a, &b, 1.0).unwrap().db();
        prop_assert_eq!(p, psnr(&b, &a, 1.0).unwrap().db());
        let mut perm: Vec<usize> = (0..shape.len()).collect();
        RngStream::new(seed).shuffle(&mut perm);
        let pa = ImageField::new(shape, perm.iter().map(|&i| a.data()[i]).collect()).unwrap();
        let pb = ImageField::new(shape, perm.iter().map(|&i| b.data()[i]).collect()).unwrap();
        prop_assert!((psnr(&pa, &pb, 1.0).unwrap().db() - p).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_symmetry(seed in any::<u64>()) {
        let shape = Shape::new(13, 16, 2);
        let a = common::random_image(shape, seed);
        let b = common::random_image(shape, seed ^ 7);
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn acf_is_shift_invariant(seed in any::<u64>(), shift in -100.0..100.0f64) {
        let s = ar1(0.6, 2000, seed);
        let t: Vec<f64> = s.iter().map(|v| v + shift).collect();
        let a = acf(&s, 30).unwrap();
        let b = acf(&t, 30).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

fn closed_form_constant(a: f64, b: f64) -> f64 {
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    ((2.0 * a * b + c1) * c2) / ((a * a + b * b + c1) * c2)
}

#[test]
fn ssim_on_constant_images() {
    let shape = Shape::gray(16, 16);
    let r = ImageField::filled(shape, 0.5);
    for delta in [0.0, 0.01, 0.2, -0.4] {
        let t = ImageField::filled(shape, 0.5 + delta);
        let got = ssim(&r, &t).unwrap();
        assert!(
            (got - closed_form_constant(0.5, 0.5 + delta)).abs() < 1e-10,
            "{delta}"
        );
    }
    assert!(ssim(&r, &ImageField::zeros(Shape::gray(10, 16))).is_err());
    assert!(ssim(
        &ImageField::zeros(Shape::gray(10, 16)),
        &ImageField::zeros(Shape::gray(10, 16))
    )
    .is_err());
}

fn brute_force_ssim(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let taps = ssim_taps();
    let k = SSIM_WINDOW;
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..=h - k {
        for j in 0..=w - k {
            let (mut mx, mut my) = (0.0, 0.0);
            for a in 0..k {
                for b in 0..k {
                    let wt = taps[a] * taps[b];
                    mx += wt * x[(i + a) * w + j + b];
                    my += wt * y[(i + a) * w + j + b];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for a in 0..k {
                for b in 0..k {
                    let wt = taps[a] * taps[b];
                    let dx = x[(i + a) * w + j + b] - mx;
                    let dy = y[(i + a) * w + j + b] - my;
                    vx += wt * dx * dx;
                    vy += wt * dy * dy;
                    cxy += wt * dx * dy;
                }
            }
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn contrast_inversion_is_negative() {
    let shape = Shape::gray(20, 17);
    let mut rng = RngStream::new(12);
    let x =
        ImageField::from_fn(shape, |_, _, _| if rng.uniform() < 0.5 { 0.0 } else { 1.0 }).unwrap();
    let y = x.map(|v| 1.0 - v);
    let got = ssim(&x, &y).unwrap();
    assert!(got < 0.0, "{got}");
    assert!((got - brute_force_ssim(x.data(), y.data(), 20, 17)).abs() < 1e-10);

    let z = common::random_image(shape, 4);
    let g = ssim(&x, &z).unwrap();
    assert!((g - brute_force_ssim(x.data(), z.data(), 20, 17)).abs() < 1e-10);
}

#[test]
fn ssim_averages_channels() {
    let shape = Shape::new(12, 12, 2);
    let a = common::random_image(shape, 1);
    let b = common::random_image(shape, 2);
    let per: Vec<f64> = (0..2)
        .map(|c| brute_force_ssim(&a.channel(c), &b.channel(c), 12, 12))
        .collect();
    assert!((ssim(&a, &b).unwrap() - (per[0] + per[1]) / 2.0).abs() < 1e-10);
}

#[test]
fn acf_of_independent_draws() {
    let s = iid(100_000, 1);
    let r = acf(&s, 50).unwrap();
    assert_eq!(r[0], 1.0);
    assert!(r[1..].iter().all(|v| v.abs() < 0.02));
    assert!(matches!(
        acf(&[2.0; 100], 5),
        Err(Error::DegenerateSeries(_))
    ));
    assert!(acf(&s[..10], 10).is_err());
}

#[test]
fn acf_of_ar1() {
    let s = ar1(0.9, 1_000_000, 2);
    let r = acf(&s, 20).unwrap();
    for (k, v) in r.iter().enumerate() {
        assert!((v - 0.9f64.powi(k as i32)).abs() < 0.02, "lag {k}: {v}");
    }
}

#[test]
fn acf_matches_direct_sum() {
    let s = ar1(0.3, 257, 3);
    let n = s.len() as f64;
    let m = s.iter().sum::<f64>() / n;
    let c = |k: usize| {
        (0..s.len() - k)
            .map(|t| (s[t] - m) * (s[t + k] - m))
            .sum::<f64>()
            / n
    };
    let r = acf(&s, 40).unwrap();
    for (k, v) in r.iter().enumerate() {
        assert!((v - c(k) / c(0)).abs() < 1e-12);
    }
}

#[test]
fn iat_values() {
    let v = iat(&iid(1_000_000, 5)).unwrap();
    assert!((0.95..=1.05).contains(&v), "{v}");
    let v = iat(&ar1(0.9, 1_000_000, 6)).unwrap();
    assert!((17.0..=21.0).contains(&v), "{v}");
    let v = iat(&ar1(0.5, 1_000_000, 7)).unwrap();
    assert!((v - 3.0).abs() < 0.3, "{v}");
    assert!(iat(&iid(999, 1)).is_err());
    assert!(iat(&[1.0; 2000]).is_err());
}

#[test]
fn iat_reliability_flag() {
    let e = iat_estimate(&ar1(0.5, 100_000, 8)).unwrap();
    assert!(e.reliable);
    let e = iat_estimate(&ar1(0.999, 2000, 9)).unwrap();
    assert!(!e.reliable);
}

#[test]
fn median_probe() {
    let with_var = |v: f64, seed: u64| -> Vec<f64> {
        let s = iid(200, seed);
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let sd = (s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        s.iter().map(|x| (x - m) / sd * v.sqrt()).collect()
    };
    let three = vec![with_var(3.0, 1), with_var(1.0, 2), with_var(2.0, 3)];
    assert_eq!(median_variance_probe(&three).unwrap(), 2);
    assert_eq!(median_variance_probe(&three[..1]).unwrap(), 0);
    let four = vec![
        with_var(4.0, 1),
        with_var(2.0, 2),
        with_var(1.0, 3),
        with_var(3.0, 4),
    ];
    assert_eq!(median_variance_probe(&four).unwrap(), 1);
    let empty: Vec<Vec<f64>> = Vec::new();
    assert!(median_variance_probe(&empty).is_err());
}

#[test]
fn probe_sets() {
    assert_eq!(default_probe_set(100, 1), (0..100).collect::<Vec<_>>());
    let p = default_probe_set(64 * 64, 3);
    assert_eq!(p.len(), 256);
    assert!(p.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(p, default_probe_set(64 * 64, 3));
    assert_ne!(p, default_probe_set(64 * 64, 4));
}

#[test]
fn standard_error_of_independent_mean() {
    let s = iid(100_000, 11);
    let se = mc_standard_error(&s).unwrap();
    assert!((se - 1.0 / (100_000f64).sqrt()).abs() < 0.05 / (100_000f64).sqrt());
}
