//! Peak synchronization series for pairs and groups of peak trains.
//!
//! Indices are 0-based. For a weight vector of half-width `n` the series is
//! defined on `n..=N-n-1` (1-based `n+1..=N-n`) and is zero elsewhere.
//!
//! For trains `p_k` the local field is `f_k(t) = sum_j a_j p_k(t+j)` and the
//! indicator `I_k(t)` is 1 without a peak at `t` and 1/2 with one. The group
//! value is
//!
//! ```text
//! phi(t) = [ (sum_k f_k I_k)(sum_k p_k) - sum_k f_k I_k p_k ] / C(r, 2)
//! ```
//!
//! which equals the mean of all pairwise values
//! `I_i f_i p_j + I_j f_j p_i`. Sums over channels are taken in ascending
//! value order, so the result does not depend on how the trains are ordered.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::peaks::PeakTrain;
use crate::weights::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SyncSeries {
    values: Vec<f64>,
    members: Vec<String>,
    weights: WeightVector,
    valid_range: Range<usize>,
}

impl SyncSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Half-open range of time indices where the measure is defined.
    pub fn valid_range(&self) -> Range<usize> {
        self.valid_range.clone()
    }

    pub fn valid_values(&self) -> &[f64] {
        &self.values[self.valid_range.clone()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Weighted count of peaks within `±n` of `t`; samples outside the train
/// count as zero.
pub fn local_field(train: &PeakTrain, w: &WeightVector, t: usize) -> f64 {
    field_at(train.indicators(), w, t)
}

#[inline]
fn field_at(p: &[u8], w: &WeightVector, t: usize) -> f64 {
    let n = w.n();
    let a = w.coefficients();
    if t >= n && t + n < p.len() {
        // fixed j order keeps the value independent of surrounding context
        let window = &p[t - n..=t + n];
        let mut f = 0.0;
        for (aj, &pj) in a.iter().zip(window) {
            if pj != 0 {
                f += aj;
            }
        }
        f
    } else {
        let mut f = 0.0;
        for (k, aj) in a.iter().enumerate() {
            let idx = t as isize + k as isize - n as isize;
            if idx >= 0 && (idx as usize) < p.len() && p[idx as usize] != 0 {
                f += aj;
            }
        }
        f
    }
}

#[inline]
fn indicator(p: u8) -> f64 {
    if p == 0 {
        1.0
    } else {
        0.5
    }
}

fn check_lengths(trains: &[&PeakTrain], w: &WeightVector) -> Result<usize> {
    let n_samples = trains[0].len();
    if let Some(t) = trains.iter().find(|t| t.len() != n_samples) {
        return Err(Error::validation(format!(
            "train `{}` has length {}, expected {n_samples}",
            t.label(),
            t.len()
        )));
    }
    if n_samples < w.len() {
        return Err(Error::validation(format!(
            "weight vector of length {} is longer than the {n_samples}-sample trains",
            w.len()
        )));
    }
    Ok(n_samples)
}

fn series(values: Vec<f64>, trains: &[&PeakTrain], w: &WeightVector) -> SyncSeries {
    let n = w.n();
    let len = values.len();
    SyncSeries {
        values,
        members: trains.iter().map(|t| t.label().to_owned()).collect(),
        weights: w.clone(),
        valid_range: n..len - n,
    }
}

/// Pairwise series `I_1 f_1 p_2 + I_2 f_2 p_1`.
pub fn pairwise_sync(p1: &PeakTrain, p2: &PeakTrain, w: &WeightVector) -> Result<SyncSeries> {
    let len = check_lengths(&[p1, p2], w)?;
    let (a, b) = (p1.indicators(), p2.indicators());
    let mut values = vec![0.0; len];
    for t in w.n()..len - w.n() {
        let (pa, pb) = (a[t], b[t]);
        if pa == 0 && pb == 0 {
            continue;
        }
        let term_a = if pb != 0 {
            indicator(pa) * field_at(a, w, t)
        } else {
            0.0
        };
        let term_b = if pa != 0 {
            indicator(pb) * field_at(b, w, t)
        } else {
            0.0
        };
        values[t] = term_a + term_b;
    }
    Ok(series(values, &[p1, p2], w))
}

/// The branch formulation: `max(f_1 p_2, f_2 p_1)` unless both trains peak,
/// then `(f_1 p_2 + f_2 p_1) / 2`.
pub fn pairwise_sync_max_form(
    p1: &PeakTrain,
    p2: &PeakTrain,
    w: &WeightVector,
) -> Result<SyncSeries> {
    let len = check_lengths(&[p1, p2], w)?;
    let (a, b) = (p1.indicators(), p2.indicators());
    let mut values = vec![0.0; len];
    for t in w.n()..len - w.n() {
        let fa = field_at(a, w, t) * f64::from(b[t]);
        let fb = field_at(b, w, t) * f64::from(a[t]);
        values[t] = if a[t] as u32 * b[t] as u32 == 0 {
            fa.max(fb)
        } else {
            (fa + fb) / 2.0
        };
    }
    Ok(series(values, &[p1, p2], w))
}

fn binomial2(r: usize) -> f64 {
    (r * (r - 1) / 2) as f64
}

fn ascending_sum(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v.iter().sum()
}

/// Group series in a single sweep over time.
pub fn multi_sync(trains: &[PeakTrain], w: &WeightVector) -> Result<SyncSeries> {
    let refs: Vec<&PeakTrain> = trains.iter().collect();
    multi_sync_refs(&refs, w)
}

pub(crate) fn multi_sync_refs(trains: &[&PeakTrain], w: &WeightVector) -> Result<SyncSeries> {
    let r = trains.len();
    if r < 2 {
        return Err(Error::validation(format!(
            "need at least 2 trains, got {r}"
        )));
    }
    let len = check_lengths(trains, w)?;
    let rows: Vec<&[u8]> = trains.iter().map(|t| t.indicators()).collect();
    let norm = binomial2(r);
    let mut terms = vec![0.0; r];
    let mut values = vec![0.0; len];

    for t in w.n()..len - w.n() {
        let total_peaks: u32 = rows.iter().map(|p| p[t] as u32).sum();
        if total_peaks == 0 {
            continue;
        }
        // (sum f I)(sum p) - sum f I p, regrouped per channel so that no
        // term is subtracted
        for (k, p) in rows.iter().enumerate() {
            let others = total_peaks - u32::from(p[t]);
            terms[k] = field_at(p, w, t) * indicator(p[t]) * f64::from(others);
        }
        values[t] = ascending_sum(&mut terms) / norm;
    }
    Ok(series(values, trains, w))
}

/// Group series as the explicit mean over all pairs.
pub fn multi_sync_pairwise(trains: &[PeakTrain], w: &WeightVector) -> Result<SyncSeries> {
    let r = trains.len();
    if r < 2 {
        return Err(Error::validation(format!(
            "need at least 2 trains, got {r}"
        )));
    }
    let refs: Vec<&PeakTrain> = trains.iter().collect();
    let len = check_lengths(&refs, w)?;
    let mut acc = vec![0.0; len];
    for i in 0..r {
        for j in i + 1..r {
            let s = pairwise_sync(&trains[i], &trains[j], w)?;
            acc.iter_mut().zip(s.values()).for_each(|(a, v)| *a += v);
        }
    }
    let norm = binomial2(r);
    acc.iter_mut().for_each(|v| *v /= norm);
    Ok(series(acc, &refs, w))
}

/// Mean of the series over `t0..t0+span`.
pub fn compound(series: &SyncSeries, t0: usize, span: usize) -> Result<f64> {
    compound_values(series.values(), t0, span)
}

pub fn compound_values(values: &[f64], t0: usize, span: usize) -> Result<f64> {
    if span == 0 || t0.checked_add(span).is_none_or(|end| end > values.len()) {
        return Err(Error::validation(format!(
            "window [{t0}, {t0}+{span}) outside series of length {}",
            values.len()
        )));
    }
    Ok(values[t0..t0 + span].iter().sum::<f64>() / span as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub members: Vec<String>,
    pub interval: (usize, usize),
    pub phi_bar: f64,
}

/// Scores every group by its compound measure over `interval`
/// (`(t0, span)`, whole record when `None`) and sorts descending. Ties are
/// ordered by the group's sorted member labels.
pub fn rank_groups(
    trains: &[PeakTrain],
    groups: &[Vec<String>],
    w: &WeightVector,
    interval: Option<(usize, usize)>,
) -> Result<Vec<GroupScore>> {
    use rayon::prelude::*;

    let mut scores = groups
        .par_iter()
        .map(|group| {
            if group.len() < 2 {
                return Err(Error::validation(format!(
                    "group {group:?} has fewer than 2 members"
                )));
            }
            let members: Vec<&PeakTrain> = group
                .iter()
                .map(|label| {
                    trains.iter().find(|t| t.label() == label).ok_or_else(|| {
                        Error::validation(format!("unknown channel label `{label}`"))
                    })
                })
                .collect::<Result<_>>()?;
            let s = multi_sync_refs(&members, w)?;
            let (t0, span) = interval.unwrap_or((0, s.len()));
            Ok(GroupScore {
                members: group.clone(),
                interval: (t0, span),
                phi_bar: compound(&s, t0, span)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let key = |g: &GroupScore| {
        let mut m = g.members.clone();
        m.sort();
        m
    };
    scores.sort_by(|a, b| {
        b.phi_bar
            .total_cmp(&a.phi_bar)
            .then_with(|| key(a).cmp(&key(b)))
    });
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{build_weights, DensitySpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w() -> WeightVector {
        build_weights(0.5, 1e-3, &DensitySpec::default()).unwrap()
    }

    fn train(label: &str, len: usize, idx: &[usize]) -> PeakTrain {
        PeakTrain::from_indices(label, len, idx).unwrap()
    }

    fn random_train(rng: &mut impl Rng, label: String, len: usize, rate: f64) -> PeakTrain {
        PeakTrain::new(
            label,
            (0..len).map(|_| rng.random_bool(rate) as u8).collect(),
        )
        .unwrap()
    }

    #[test]
    fn local_field_cases() {
        let w = w();
        let zero = train("z", 50, &[]);
        assert!((0..50).all(|t| local_field(&zero, &w, t) == 0.0));

        let one = train("o", 50, &[20]);
        assert_eq!(local_field(&one, &w, 20), w.a0());
        assert_eq!(local_field(&one, &w, 21), w.get(1));
        assert_eq!(local_field(&one, &w, 19), w.get(1));
        assert_eq!(local_field(&one, &w, 23), 0.0);
    }

    #[test]
    fn local_field_matches_naive_dot_product() {
        let w = w();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_train(&mut rng, "r".into(), 500, 0.2);
        let p = t.indicators();
        for _ in 0..100 {
            let c = rng.random_range(2..498);
            let naive: f64 = (-2isize..=2)
                .map(|j| w.get(j) * f64::from(p[(c as isize + j) as usize]))
                .sum();
            assert!((local_field(&t, &w, c) - naive).abs() < 1e-15);
        }
    }

    #[test]
    fn pairwise_basic_cases() {
        let w = w();
        let z = train("a", 40, &[]);
        assert!(pairwise_sync(&z, &z, &w)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));

        let a = train("a", 40, &[20]);
        let b = train("b", 40, &[20]);
        let s = pairwise_sync(&a, &b, &w).unwrap();
        assert_eq!(s.values()[20], w.a0());
        assert_eq!(s.values().iter().filter(|&&v| v != 0.0).count(), 1);

        // lag one: p1 at t, p2 at t+1; hand evaluation of both terms
        let b = train("b", 40, &[21]);
        let s = pairwise_sync(&a, &b, &w).unwrap();
        let v = s.values();
        // t = 20: I_1 f_1 p_2 = 0 (p_2 = 0), I_2 f_2 p_1 = 1 * a_1 * 1
        assert_eq!(v[20], w.get(1));
        // t = 21: I_1 f_1 p_2 = 1 * a_1 * 1, I_2 f_2 p_1 = 0
        assert_eq!(v[21], w.get(1));
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    #[test]
    fn edges_are_zero() {
        let w = w();
        let a = train("a", 10, &[0, 1, 8, 9]);
        let s = pairwise_sync(&a, &a, &w).unwrap();
        assert_eq!(s.valid_range(), 2..8);
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_errors() {
        let w = w();
        let a = train("a", 10, &[]);
        let b = train("b", 11, &[]);
        assert!(pairwise_sync(&a, &b, &w).is_err());
        assert!(multi_sync(&[a.clone(), b], &w).is_err());
        let short = train("s", 4, &[]);
        assert!(pairwise_sync(&short, &short, &w).is_err());
        assert!(multi_sync(std::slice::from_ref(&a), &w).is_err());
    }

    #[test]
    fn multi_with_two_matches_pairwise() {
        let w = w();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = random_train(&mut rng, "a".into(), 300, 0.1);
            let b = random_train(&mut rng, "b".into(), 300, 0.1);
            let m = multi_sync(&[a.clone(), b.clone()], &w).unwrap();
            let p = pairwise_sync(&a, &b, &w).unwrap();
            for (x, y) in m.values().iter().zip(p.values()) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn identical_triple_scores_a0() {
        let w = w();
        let t: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|l| train(l, 40, &[15]))
            .collect();
        let s = multi_sync(&t, &w).unwrap();
        assert_eq!(s.values()[15], w.a0());
    }

    #[test]
    fn multi_equals_pairwise_mean_for_r_3_to_5() {
        let w = w();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for r in 3..=5 {
            let trains: Vec<_> = (0..r)
                .map(|k| random_train(&mut rng, format!("c{k}"), 512, 0.05))
                .collect();
            let fast = multi_sync(&trains, &w).unwrap();
            // independent oracle: explicit pair loop straight from the definition
            let pairs = (r * (r - 1) / 2) as f64;
            for t in 2..510 {
                let mut sum = 0.0;
                for i in 0..r {
                    for j in i + 1..r {
                        let (pi, pj) = (trains[i].indicators(), trains[j].indicators());
                        let fi: f64 = (-2..=2)
                            .map(|d: isize| w.get(d) * f64::from(pi[(t as isize + d) as usize]))
                            .sum();
                        let fj: f64 = (-2..=2)
                            .map(|d: isize| w.get(d) * f64::from(pj[(t as isize + d) as usize]))
                            .sum();
                        let ii = if pi[t] == 1 { 0.5 } else { 1.0 };
                        let ij = if pj[t] == 1 { 0.5 } else { 1.0 };
                        sum += ii * fi * f64::from(pj[t]) + ij * fj * f64::from(pi[t]);
                    }
                }
                assert!((fast.values()[t] - sum / pairs).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn compound_cases() {
        let w = w();
        let a = train("a", 20, &[]);
        let s = pairwise_sync(&a, &a, &w).unwrap();
        assert_eq!(compound(&s, 0, 20).unwrap(), 0.0);
        assert_eq!(compound_values(&[0.25; 10], 2, 5).unwrap(), 0.25);
        assert!(compound(&s, 15, 6).is_err());
        assert!(compound(&s, 0, 0).is_err());
        assert!(compound(&s, usize::MAX, 2).is_err());
    }

    #[test]
    fn rank_single_and_duplicate_groups() {
        let w = w();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trains: Vec<_> = ["a", "b", "c", "d"]
            .iter()
            .map(|l| random_train(&mut rng, l.to_string(), 400, 0.1))
            .collect();
        let g = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();

        let ranked = rank_groups(&trains, &[g(&["a", "b", "c"])], &w, None).unwrap();
        let direct = compound(&multi_sync(&trains[..3], &w).unwrap(), 0, 400).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].phi_bar, direct);

        let ranked = rank_groups(
            &trains,
            &[g(&["c", "a", "b"]), g(&["a", "b", "c"])],
            &w,
            None,
        )
        .unwrap();
        assert_eq!(ranked[0].phi_bar, ranked[1].phi_bar);
        assert_eq!(ranked[0].members, g(&["c", "a", "b"]));

        assert!(rank_groups(&trains, &[g(&["a", "zz"])], &w, None).is_err());
        assert!(rank_groups(&trains, &[g(&["a"])], &w, None).is_err());
    }

    #[test]
    fn lag_decay() {
        let w = w();
        for d in 0..6usize {
            let a = train("a", 60, &[30]);
            let b = train("b", 60, &[30 + d]);
            let max = pairwise_sync(&a, &b, &w)
                .unwrap()
                .values()
                .iter()
                .copied()
                .fold(0.0, f64::max);
            let want = if d <= w.n() { w.get(d as isize) } else { 0.0 };
            assert_eq!(max, want, "lag {d}");
        }
    }

    fn arb_trains(r: usize, len: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(
            prop::collection::vec(prop::bool::weighted(0.15).prop_map(u8::from), len),
            r,
        )
    }

    proptest! {
        #[test]
        fn range_and_permutation_invariance(rows in arb_trains(4, 120), seed in any::<u64>()) {
            let w = w();
            let trains: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(k, v)| PeakTrain::new(format!("c{k}"), v).unwrap())
                .collect();
            let s = multi_sync(&trains, &w).unwrap();
            prop_assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));

            let mut shuffled = trains.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            let s2 = multi_sync(&shuffled, &w).unwrap();
            for (a, b) in s.values().iter().zip(s2.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn max_form_identity(rows in arb_trains(2, 150)) {
            let w = w();
            let a = PeakTrain::new("a", rows[0].clone()).unwrap();
            let b = PeakTrain::new("b", rows[1].clone()).unwrap();
            let s = pairwise_sync(&a, &b, &w).unwrap();
            let m = pairwise_sync_max_form(&a, &b, &w).unwrap();
            for (x, y) in s.values().iter().zip(m.values()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }

        #[test]
        fn binless_locality(rows in arb_trains(3, 100), t in 2usize..98, lo_pad in 0usize..10, hi_pad in 0usize..10) {
            let w = w();
            let n = w.n();
            let trains: Vec<_> = rows
                .into_iter()
                .enumerate()
                .map(|(k, v)| PeakTrain::new(format!("c{k}"), v).unwrap())
                .collect();
            let full = multi_sync(&trains, &w).unwrap();
            let start = t.saturating_sub(n + lo_pad);
            let end = (t + n + 1 + hi_pad).min(100);
            let cropped: Vec<_> = trains.iter().map(|tr| tr.slice(start, end)).collect();
            let part = multi_sync(&cropped, &w).unwrap();
            prop_assert_eq!(full.values()[t].to_bits(), part.values()[t - start].to_bits());
        }
    }
}
