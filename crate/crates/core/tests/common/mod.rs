//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatter_core::conv::{conv2d_direct, Spectrum};
use scatter_core::scattering::{AngularIndex, Layer1Tensor, Path};
use scatter_core::{Complex64, Plane, Scattering};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut ChaCha8Rng, n: usize) -> Plane<f64> {
    Plane::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_complex_plane(rng: &mut ChaCha8Rng, n: usize) -> Plane<Complex64> {
    Plane::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Textured test image: a few random gratings plus noise.
pub fn texture(rng: &mut ChaCha8Rng, n: usize) -> Plane<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let f = rng.gen_range(0.1..1.2);
            let a = rng.gen_range(0.0..PI);
            (f * a.cos(), f * a.sin(), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.2..1.0))
        })
        .collect();
    Plane::from_fn(n, n, |y, x| {
        let s: f64 = waves
            .iter()
            .map(|(fy, fx, ph, amp)| amp * (fy * y as f64 + fx * x as f64 + ph).cos())
            .sum();
        s + 0.3 * rng.gen_range(-1.0..1.0)
    })
}

/// DFT by direct summation, unnormalized.
pub fn dft(p: &Plane<Complex64>) -> Spectrum {
    let (h, w) = (p.height(), p.width());
    Spectrum::from_fn(h, w, |ky, kx| {
        let mut acc = Complex64::default();
        for y in 0..h {
            for x in 0..w {
                let a = -2.0 * PI * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                acc += p.get(y, x) * Complex64::from_polar(1.0, a);
            }
        }
        acc
    })
}

/// Inverse DFT by direct summation, divided by the sample count.
pub fn idft(s: &Spectrum) -> Plane<Complex64> {
    let (h, w) = (s.height(), s.width());
    let norm = 1.0 / (h * w) as f64;
    Plane::from_fn(h, w, |y, x| {
        let mut acc = Complex64::default();
        for ky in 0..h {
            for kx in 0..w {
                let a = 2.0 * PI * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                acc += s.get(ky, kx) * Complex64::from_polar(1.0, a);
            }
        }
        acc * norm
    })
}

pub fn max_abs_diff<T: Copy + Into<Complex64>>(a: &[T], b: &[T]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x.into() - y.into()).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs<T: Copy + Into<Complex64>>(a: &[T]) -> f64 {
    a.iter().map(|&x| x.into().norm()).fold(0.0, f64::max)
}

/// `max |a − b| / max |b|`.
pub fn rel_err<T: Copy + Into<Complex64>>(a: &[T], b: &[T]) -> f64 {
    max_abs_diff(a, b) / max_abs(b).max(f64::MIN_POSITIVE)
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One second-layer path recomputed from its definition: each `U1(j1, θ')`
/// slice is convolved by direct summation with the second-layer wavelet
/// sampled on the slice grid (`s² ψ(s·)`), the results are summed against the
/// angular filter over `θ'`, and the modulus is taken.
pub fn layer2_path_oracle(net: &Scattering, u1: &Layer1Tensor, path: &Path) -> Plane<f64> {
    let Path::Order2 {
        j1,
        theta1,
        j2,
        theta2,
        angular,
    } = *path
    else {
        panic!("not a second-order path");
    };
    let config = net.config();
    let banks = net.banks();
    let k1 = config.k1;
    let n = config.size;
    let r1 = config.stride_log2(j1);
    let r2 = config.stride_log2(j2);
    let s = 1usize << r1;
    let full = idft(&banks.layer2.wavelet(j2, theta2).expect("wavelet").spectrum);
    let sampled = Plane::from_fn(n / s, n / s, |y, x| full.get(y * s, x * s) * (s * s) as f64);
    let weights: Vec<Complex64> = match angular {
        AngularIndex::Wavelet(l) => {
            banks
                .angular
                .psi_b
                .iter()
                .find(|(ll, _)| *ll == l)
                .expect("angular wavelet")
                .1
                .clone()
        }
        AngularIndex::Average => banks.angular.phi_b.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    };
    let mut acc: Option<Plane<Complex64>> = None;
    for t in 0..k1 {
        let slice = u1.get(j1, t).expect("slice").clone().with_scale_log2(0);
        let v = conv2d_direct(&slice, &sampled, r2 - r1).unwrap();
        let wgt = weights[(theta1 + k1 - t) % k1];
        let term = v.map(|z| z * wgt);
        acc = Some(match acc {
            None => term,
            Some(a) => Plane::from_fn(a.height(), a.width(), |y, x| a.get(y, x) + term.get(y, x)),
        });
    }
    acc.unwrap().map(|z| z.norm())
}
