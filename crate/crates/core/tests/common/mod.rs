#![allow(dead_code)]

use tailprofile::law::FnLaw;
use tailprofile::rng::{exponential, StreamRng};
use tailprofile::{GaussianProfileLaw, LawRole, SamplerHandle, Variogram};

use rand::Rng;

/// `sup |F_n - F|` for a continuous reference CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0_f64, |acc, (i, v)| {
        let f = cdf(*v);
        acc.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Two-sample KS critical value at level 0.01.
pub fn ks_two_sample_critical(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn gamma2() -> Variogram {
    Variogram::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

pub fn gamma3() -> Variogram {
    Variogram::from_rows(&[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]]).unwrap()
}

pub fn hr_profile(gamma: &Variogram) -> SamplerHandle {
    GaussianProfileLaw::from_variogram(gamma).sampler().unwrap().into_handle()
}

/// `(Y, -Y)` with a random sign and `Y ~ Exp(rate)`, so `max(T) ~ Exp(rate)`.
pub fn signed_pair(rate: f64, role: LawRole) -> SamplerHandle {
    SamplerHandle::new(
        FnLaw::new(2, move |rng: &mut StreamRng| {
            let y = exponential(rng) / rate;
            if rng.random::<bool>() {
                vec![y, -y]
            } else {
                vec![-y, y]
            }
        }),
        role,
    )
}

pub fn exp_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |s| if s <= 0.0 { 0.0 } else { -(-rate * s).exp_m1() }
}
