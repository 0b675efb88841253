//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical code.

#![allow(dead_code)]

use peaksync::PeakTrain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// erf by its all-positive Taylor form
/// `2/sqrt(pi) * exp(-x^2) * sum 2^k x^(2k+1) / (1*3*...*(2k+1))`,
/// which has no cancellation for moderate x.
pub fn erf_series(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_series(-x);
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > sum * 1e-18 {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x2).exp() * sum
}

pub fn phi_oracle(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

/// Solves `2 Phi(x) - 1 = a0` by plain bisection on the oracle CDF.
pub fn half_width_oracle(a0: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * phi_oracle(mid) - 1.0 < a0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided strip masses `a_0..a_n` for the standard Gaussian.
pub fn gaussian_weights_oracle(a0: f64, tau: f64) -> Vec<f64> {
    let x = half_width_oracle(a0);
    let mut n = 0usize;
    while 2.0 * phi_oracle((2 * n + 1) as f64 * x) - 1.0 < 1.0 - tau {
        n += 1;
    }
    let mut a = vec![a0];
    for j in 1..=n {
        let hi = (2 * j + 1) as f64 * x;
        let lo = (2 * j - 1) as f64 * x;
        a.push(phi_oracle(hi) - phi_oracle(lo));
    }
    a
}

pub fn random_train(rng: &mut ChaCha8Rng, label: &str, len: usize, rate: f64) -> PeakTrain {
    let v = (0..len).map(|_| rng.random_bool(rate) as u8).collect();
    PeakTrain::new(label, v).unwrap()
}

pub fn random_trains(seed: u64, r: usize, len: usize, rate: f64) -> Vec<PeakTrain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r)
        .map(|k| random_train(&mut rng, &format!("s{k}"), len, rate))
        .collect()
}

/// `one_sided[|j|]` summed over peaks of `p` within `t-n..=t+n`.
pub fn field_oracle(p: &[u8], one_sided: &[f64], t: usize) -> f64 {
    let n = one_sided.len() as isize - 1;
    let mut f = 0.0;
    for j in -n..=n {
        let i = t as isize + j;
        if i >= 0 && (i as usize) < p.len() && p[i as usize] == 1 {
            f += one_sided[j.unsigned_abs()];
        }
    }
    f
}

/// Two-train score written straight from its definition, zero outside
/// `n..N-n`.
pub fn pair_oracle(p1: &[u8], p2: &[u8], one_sided: &[f64]) -> Vec<f64> {
    let n = one_sided.len() - 1;
    let len = p1.len();
    let ind = |p: u8| if p == 1 { 0.5 } else { 1.0 };
    (0..len)
        .map(|t| {
            if t < n || t >= len - n {
                return 0.0;
            }
            ind(p1[t]) * field_oracle(p1, one_sided, t) * f64::from(p2[t])
                + ind(p2[t]) * field_oracle(p2, one_sided, t) * f64::from(p1[t])
        })
        .collect()
}

/// Mean of all pairwise series.
pub fn pair_average_oracle(trains: &[&[u8]], one_sided: &[f64]) -> Vec<f64> {
    let r = trains.len();
    let mut acc = vec![0.0; trains[0].len()];
    let mut pairs = 0.0;
    for i in 0..r {
        for j in i + 1..r {
            for (a, v) in acc
                .iter_mut()
                .zip(pair_oracle(trains[i], trains[j], one_sided))
            {
                *a += v;
            }
            pairs += 1.0;
        }
    }
    acc.iter().map(|a| a / pairs).collect()
}

/// Real roots of `x^3 + b x^2 + c x + d` (three real roots assumed), by the
/// trigonometric method, sorted descending.
pub fn cubic_roots_desc(b: f64, c: f64, d: f64) -> [f64; 3] {
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let mut roots = if p.abs() < 1e-300 {
        let r = (-q).cbrt();
        [r + shift; 3]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        [0, 1, 2].map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
    };
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
