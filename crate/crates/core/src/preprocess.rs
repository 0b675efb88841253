//! Zero-phase Butterworth band-pass and band-stop filtering.
//!
//! Filters are designed from an analog Butterworth prototype, frequency
//! transformed, and mapped to cascaded second-order sections by the bilinear
//! transform (with pre-warping of the band edges). Each channel is run
//! forward then backward through the cascade. Before filtering the signal is
//! extended at both ends by an odd reflection of `3 * (2 * sections + 1)`
//! samples and each section starts from its steady state for the first
//! sample, so edge transients are confined to the first and last few hundred
//! milliseconds for typical EEG bands.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MultiChannelRecord;

pub const DEFAULT_BANDPASS_ORDER: usize = 4;
pub const DEFAULT_NOTCH_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchBand {
    pub low_hz: f64,
    pub high_hz: f64,
}

/// Band-pass plus optional band-stop. `order` counts biquads per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub notch: Option<NotchBand>,
    pub order: usize,
    pub notch_order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_hz: 25.0,
            high_hz: 100.0,
            notch: Some(NotchBand {
                low_hz: 49.0,
                high_hz: 51.0,
            }),
            order: DEFAULT_BANDPASS_ORDER,
            notch_order: DEFAULT_NOTCH_ORDER,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        check_band(self.low_hz, self.high_hz, sample_rate_hz)?;
        if self.order == 0 || self.notch_order == 0 {
            return Err(Error::validation("filter order must be at least 1"));
        }
        if let Some(n) = &self.notch {
            check_band(n.low_hz, n.high_hz, sample_rate_hz)?;
            if n.low_hz < self.low_hz || n.high_hz > self.high_hz {
                return Err(Error::validation(format!(
                    "notch {}-{} Hz lies outside pass band {}-{} Hz",
                    n.low_hz, n.high_hz, self.low_hz, self.high_hz
                )));
            }
        }
        Ok(())
    }
}

fn check_band(low: f64, high: f64, fs: f64) -> Result<()> {
    let nyquist = fs / 2.0;
    if !(low > 0.0 && low < high && high < nyquist) {
        return Err(Error::validation(format!(
            "band {low}-{high} Hz must satisfy 0 < low < high < {nyquist} (Nyquist)"
        )));
    }
    Ok(())
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

#[derive(Clone, Copy)]
enum BandKind {
    Pass,
    Stop,
}

impl Cascade {
    pub fn bandpass(low_hz: f64, high_hz: f64, sample_rate_hz: f64, order: usize) -> Result<Self> {
        Self::design(BandKind::Pass, low_hz, high_hz, sample_rate_hz, order)
    }

    pub fn bandstop(low_hz: f64, high_hz: f64, sample_rate_hz: f64, order: usize) -> Result<Self> {
        Self::design(BandKind::Stop, low_hz, high_hz, sample_rate_hz, order)
    }

    fn design(kind: BandKind, low: f64, high: f64, fs: f64, order: usize) -> Result<Self> {
        check_band(low, high, fs)?;
        if order == 0 {
            return Err(Error::validation("filter order must be at least 1"));
        }
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w1, w2) = (warp(low), warp(high));
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;
        let k = 2.0 * fs;

        let mut z_poles = Vec::with_capacity(2 * order);
        for i in 0..order {
            let theta = PI * (2 * i + 1 + order) as f64 / (2 * order) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            let b = match kind {
                BandKind::Pass => proto * bw,
                BandKind::Stop => bw / proto,
            };
            let disc = (b * b - 4.0 * w0 * w0).sqrt();
            for s in [(b + disc) / 2.0, (b - disc) / 2.0] {
                z_poles.push((k + s) / (k - s));
            }
        }

        let denominators = pair_poles(&z_poles);
        let center = 2.0 * (w0 / k).atan();
        let sections = denominators
            .into_iter()
            .map(|a| {
                let mut bq = Biquad {
                    b: match kind {
                        BandKind::Pass => [1.0, 0.0, -1.0],
                        BandKind::Stop => [1.0, -2.0 * center.cos(), 1.0],
                    },
                    a,
                };
                let gain = match kind {
                    BandKind::Pass => bq.response(Complex64::from_polar(1.0, -center)).norm(),
                    BandKind::Stop => bq.dc_gain().abs(),
                };
                bq.b.iter_mut().for_each(|c| *c /= gain);
                bq
            })
            .collect();
        Ok(Self {
            sections,
            sample_rate_hz: fs,
        })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// |H(e^{jw})| of one (single-direction) pass at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }

    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Forward-backward application; output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.unit_steady_state();
        self.run(&mut ext, &zi);
        ext.reverse();
        self.run(&mut ext, &zi);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }

    /// Direct-form II transposed state for a unit step held forever.
    fn unit_steady_state(&self) -> Vec<[f64; 2]> {
        let mut level = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let h = s.dc_gain();
                let s2 = (s.b[2] - s.a[1] * h) * level;
                let s1 = (s.b[1] - s.a[0] * h) * level + s2;
                level *= h;
                [s1, s2]
            })
            .collect()
    }

    fn run(&self, data: &mut [f64], zi: &[[f64; 2]]) {
        let x0 = data[0];
        for (s, z) in self.sections.iter().zip(zi) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let (mut s1, mut s2) = (z[0] * x0, z[1] * x0);
            for v in data.iter_mut() {
                let x = *v;
                let y = b0 * x + s1;
                s1 = b1 * x - a1 * y + s2;
                s2 = b2 * x - a2 * y;
                *v = y;
            }
        }
    }
}

/// Groups conjugate pole pairs (and leftover real poles) into `[a1, a2]`.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 2]> {
    const EPS: f64 = 1e-12;
    let mut out = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > EPS {
            out.push([-2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= EPS {
            reals.push(p.re);
        }
    }
    reals.sort_by(f64::total_cmp);
    for pair in reals.chunks(2) {
        match *pair {
            [p, q] => out.push([-(p + q), p * q]),
            [p] => out.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

/// Band-pass (and notch, if configured) every channel.
pub fn apply(record: &MultiChannelRecord, spec: &FilterSpec) -> Result<MultiChannelRecord> {
    spec.validate(record.sample_rate_hz())?;
    let fs = record.sample_rate_hz();
    let bp = Cascade::bandpass(spec.low_hz, spec.high_hz, fs, spec.order)?;
    let bs = spec
        .notch
        .map(|n| Cascade::bandstop(n.low_hz, n.high_hz, fs, spec.notch_order))
        .transpose()?;
    Ok(record.map_channels(|x| {
        let y = bp.filtfilt(x);
        match &bs {
            Some(bs) => bs.filtfilt(&y),
            None => y,
        }
    }))
}

/// Band-pass only; `spec.notch` is ignored.
pub fn bandpass(record: &MultiChannelRecord, spec: &FilterSpec) -> Result<MultiChannelRecord> {
    let spec = FilterSpec {
        notch: None,
        ..spec.clone()
    };
    apply(record, &spec)
}

pub fn notch(
    record: &MultiChannelRecord,
    center_hz: f64,
    bandwidth_hz: f64,
) -> Result<MultiChannelRecord> {
    if !(center_hz > 0.0 && bandwidth_hz > 0.0) {
        return Err(Error::validation(
            "notch center and bandwidth must be positive",
        ));
    }
    let bs = Cascade::bandstop(
        center_hz - bandwidth_hz / 2.0,
        center_hz + bandwidth_hz / 2.0,
        record.sample_rate_hz(),
        DEFAULT_NOTCH_ORDER,
    )?;
    Ok(record.map_channels(|x| bs.filtfilt(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 256.0;

    fn one(x: Vec<f64>) -> MultiChannelRecord {
        MultiChannelRecord::new(vec!["x".into()], vec![x], FS).unwrap()
    }

    fn sine(freq: f64, seconds: usize) -> Vec<f64> {
        (0..seconds * FS as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / FS).sin())
            .collect()
    }

    fn rms_inner(x: &[f64]) -> f64 {
        let edge = FS as usize;
        let inner = &x[edge..x.len() - edge];
        (inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64).sqrt()
    }

    fn bp_spec() -> FilterSpec {
        FilterSpec {
            notch: None,
            ..FilterSpec::default()
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let r = one(vec![0.0; 1024]);
        let y = apply(&r, &FilterSpec::default()).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.0));
        let y = notch(&r, 50.0, 2.0).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn section_counts() {
        let bp = Cascade::bandpass(25.0, 100.0, FS, 4).unwrap();
        assert_eq!(bp.sections().len(), 4);
        let bs = Cascade::bandstop(49.0, 51.0, FS, 2).unwrap();
        assert_eq!(bs.sections().len(), 2);
        // every section stable
        for s in bp.sections().iter().chain(bs.sections()) {
            assert!(s.a[1].abs() < 1.0);
        }
    }

    #[test]
    fn butterworth_band_edges_are_half_power() {
        let bp = Cascade::bandpass(25.0, 100.0, FS, 4).unwrap();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!((bp.magnitude(25.0) - half).abs() < 1e-9);
        assert!((bp.magnitude(100.0) - half).abs() < 1e-9);
        assert!(bp.magnitude(0.0) < 1e-12);
        let bs = Cascade::bandstop(49.0, 51.0, FS, 2).unwrap();
        assert!((bs.magnitude(49.0) - half).abs() < 1e-9);
        assert!((bs.magnitude(0.0) - 1.0).abs() < 1e-12);
    }

    /// Measured RMS ratio after forward-backward filtering equals |H(f)|^2.
    fn check_rms_ratio(x: &[f64], y: &[f64], analytic: f64) {
        let ratio = rms_inner(y) / rms_inner(x);
        assert!(
            (ratio - analytic).abs() < 0.01,
            "measured {ratio}, analytic {analytic}"
        );
    }

    #[test]
    fn passes_60hz() {
        let x = sine(60.0, 8);
        let y = bandpass(&one(x.clone()), &bp_spec()).unwrap();
        let analytic = Cascade::bandpass(25.0, 100.0, FS, 4)
            .unwrap()
            .magnitude(60.0)
            .powi(2);
        check_rms_ratio(&x, y.channel(0), analytic);
        let ratio = rms_inner(y.channel(0)) / rms_inner(&x);
        assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_dc() {
        let x = vec![3.0; 8 * FS as usize];
        let y = bandpass(&one(x.clone()), &bp_spec()).unwrap();
        assert!(rms_inner(y.channel(0)) <= 0.01 * rms_inner(&x));
    }

    #[test]
    fn notch_removes_50hz_keeps_30hz() {
        let bs = Cascade::bandstop(49.0, 51.0, FS, DEFAULT_NOTCH_ORDER).unwrap();

        let x = sine(50.0, 8);
        let y = notch(&one(x.clone()), 50.0, 2.0).unwrap();
        check_rms_ratio(&x, y.channel(0), bs.magnitude(50.0).powi(2));
        assert!(rms_inner(y.channel(0)) <= 0.05 * rms_inner(&x));

        let x = sine(30.0, 8);
        let y = notch(&one(x.clone()), 50.0, 2.0).unwrap();
        check_rms_ratio(&x, y.channel(0), bs.magnitude(30.0).powi(2));
        let ratio = rms_inner(y.channel(0)) / rms_inner(&x);
        assert!((0.9..=1.1).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_bands_beyond_nyquist() {
        let r = one(vec![0.0; 512]);
        let spec = FilterSpec {
            high_hz: 130.0,
            ..FilterSpec::default()
        };
        assert!(matches!(apply(&r, &spec), Err(Error::Validation(_))));
        assert!(notch(&r, 127.5, 2.0).is_err());
        let spec = FilterSpec {
            notch: Some(NotchBand {
                low_hz: 10.0,
                high_hz: 12.0,
            }),
            ..FilterSpec::default()
        };
        assert!(spec.validate(FS).is_err());
    }

    #[test]
    fn short_signals_keep_length() {
        let bp = Cascade::bandpass(25.0, 100.0, FS, 4).unwrap();
        for n in [1, 2, 5, 40] {
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let y = bp.filtfilt(&x);
            assert_eq!(y.len(), n);
            assert!(y.iter().all(|v| v.is_finite()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn filtering_is_linear(
            x in prop::collection::vec(-10.0f64..10.0, 300),
            y in prop::collection::vec(-10.0f64..10.0, 300),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let spec = FilterSpec::default();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let f = |v: Vec<f64>| apply(&one(v), &spec).unwrap().channel(0).to_vec();
            let fm = f(mix);
            let (fx, fy) = (f(x), f(y));
            let scale = fm.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..fm.len() {
                let lin = alpha * fx[i] + beta * fy[i];
                prop_assert!((fm[i] - lin).abs() <= 1e-9 * scale);
            }
        }
    }
}
