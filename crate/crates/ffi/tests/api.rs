use std::ffi::{CStr, CString};
use std::ptr;

use peaksync_ffi::*;

fn weights(a0: f64, tau: f64) -> *mut PsWeights {
    let mut w = ptr::null_mut();
    assert_eq!(
        unsafe { ps_weights_build(a0, tau, PsDensity::Gaussian, 1.0, &mut w) },
        PsStatus::Ok
    );
    assert!(!w.is_null());
    w
}

fn last_error() -> String {
    let p = ps_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn version_matches_core() {
    let v = unsafe { CStr::from_ptr(ps_version()) };
    assert_eq!(v.to_str().unwrap(), peaksync::VERSION);
}

#[test]
fn weights_round_trip() {
    let w = weights(0.5, 1e-3);
    unsafe {
        assert_eq!(ps_weights_half_support(w), 2);
        assert_eq!(ps_weights_len(w), 5);
        let mut buf = [0.0; 5];
        assert_eq!(ps_weights_copy(w, buf.as_mut_ptr(), 5), PsStatus::Ok);
        let core = peaksync::build_weights(0.5, 1e-3, &peaksync::DensitySpec::default()).unwrap();
        assert_eq!(&buf[..], core.coefficients());
        assert_eq!(
            ps_weights_copy(w, buf.as_mut_ptr(), 4),
            PsStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 5"));
        ps_weights_free(w);
        ps_weights_free(ptr::null_mut());
    }
}

#[test]
fn invalid_arguments_report_status_and_message() {
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(
            ps_weights_build(1.5, 1e-3, PsDensity::Gaussian, 1.0, &mut w),
            PsStatus::Validation
        );
        assert!(w.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            ps_weights_build(0.5, 1e-3, PsDensity::Uniform, 1.0, ptr::null_mut()),
            PsStatus::NullArgument
        );
        assert!(last_error().contains("out"));
        assert_eq!(ps_weights_len(ptr::null()), 0);

        let mut rec = ptr::null_mut();
        let missing = CString::new("/nonexistent/peaksync.csv").unwrap();
        assert_eq!(
            ps_record_read(missing.as_ptr(), 256.0, &mut rec),
            PsStatus::Io
        );
        assert!(rec.is_null());

        let good = weights(0.5, 1e-3);
        assert!(ps_last_error_message().is_null());
        let p = [0u8, 2, 0, 0, 0, 0];
        let mut out = [0.0; 6];
        assert_eq!(
            ps_pairwise_sync(p.as_ptr(), p.as_ptr(), 6, good, out.as_mut_ptr()),
            PsStatus::Validation
        );
        ps_weights_free(good);
    }
}

#[test]
fn sync_matches_core() {
    let w = weights(0.5, 1e-3);
    let trains = peaksync_test_trains();
    let len = trains[0].len();
    let flat: Vec<u8> = trains
        .iter()
        .flat_map(|t| t.indicators().to_vec())
        .collect();
    let mut out = vec![0.0; len];
    unsafe {
        assert_eq!(
            ps_multi_sync(flat.as_ptr(), 3, len, w, out.as_mut_ptr()),
            PsStatus::Ok
        );
    }
    let core_w = peaksync::build_weights(0.5, 1e-3, &peaksync::DensitySpec::default()).unwrap();
    let want = peaksync::multi_sync(&trains, &core_w).unwrap();
    assert_eq!(out, want.values());

    let mut pair = vec![0.0; len];
    unsafe {
        assert_eq!(
            ps_pairwise_sync(
                flat.as_ptr(),
                flat[len..].as_ptr(),
                len,
                w,
                pair.as_mut_ptr()
            ),
            PsStatus::Ok
        );
    }
    let want = peaksync::pairwise_sync(&trains[0], &trains[1], &core_w).unwrap();
    assert_eq!(pair, want.values());

    let mut phi = 0.0;
    unsafe {
        assert_eq!(
            ps_compound(out.as_ptr(), len, 10, 100, &mut phi),
            PsStatus::Ok
        );
        assert_eq!(
            ps_compound(out.as_ptr(), len, len, 1, &mut phi),
            PsStatus::Validation
        );
        ps_weights_free(w);
    }
    assert_eq!(phi, out[10..110].iter().sum::<f64>() / 100.0);
}

fn peaksync_test_trains() -> Vec<peaksync::PeakTrain> {
    (0..3u64)
        .map(|k| {
            let v = (0..400u64)
                .map(|i| u8::from((i * 7 + k * 3) % 23 == 0))
                .collect();
            peaksync::PeakTrain::new(format!("ch{}", k + 1), v).unwrap()
        })
        .collect()
}

#[test]
fn record_pipeline_and_threshold() {
    let spec = peaksync::synth::SynthSpec {
        r: 3,
        n: 3000,
        base_rate: 0.01,
        coupling: 0.9,
        jitter_std: 1.0,
        segment: None,
        seed: 11,
        emit: peaksync::synth::Emit::Trains,
    };
    let core_rec = peaksync::synth::generate_raw(&spec, 256.0).unwrap();
    let flat: Vec<f64> = core_rec.channels().concat();
    let w = weights(0.5, 1e-3);
    let mut rec = ptr::null_mut();
    unsafe {
        assert_eq!(
            ps_record_from_samples(flat.as_ptr(), 3, 3000, 256.0, &mut rec),
            PsStatus::Ok
        );
        assert_eq!(ps_record_n_channels(rec), 3);
        assert_eq!(ps_record_n_samples(rec), 3000);

        let mut phi = vec![0.0; 3000];
        assert_eq!(
            ps_record_sync(rec, true, w, phi.as_mut_ptr(), 3000),
            PsStatus::Ok
        );
        assert!(phi.iter().any(|&v| v > 0.0));
        assert_eq!(
            ps_record_sync(rec, true, w, phi.as_mut_ptr(), 10),
            PsStatus::BufferTooSmall
        );

        let mut th = -1.0;
        assert_eq!(
            ps_significance_threshold(rec, false, w, 5, 95.0, 1, &mut th),
            PsStatus::Ok
        );
        assert!((0.0..=1.0).contains(&th));
        assert_eq!(
            ps_significance_threshold(rec, false, w, 1, 95.0, 1, &mut th),
            PsStatus::Validation
        );

        ps_record_free(rec);
        ps_weights_free(w);
    }
}

#[test]
fn detection_and_eigenvalues() {
    let mut x = vec![0.0; 64];
    x[10] = 5.0;
    x[40] = -5.0;
    let mut out = vec![9u8; 64];
    unsafe {
        assert_eq!(
            ps_detect_peaks(x.as_ptr(), 64, 32, 2.0, PsPolarity::Both, out.as_mut_ptr()),
            PsStatus::Ok
        );
    }
    let hits: Vec<usize> = (0..64).filter(|&i| out[i] == 1).collect();
    assert_eq!(hits, [10, 40]);

    let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
    let flat: Vec<f64> = a.iter().chain(&a).copied().collect();
    let mut eig = [0.0; 2];
    unsafe {
        assert_eq!(
            ps_corr_eigenvalues(flat.as_ptr(), 2, 50, eig.as_mut_ptr()),
            PsStatus::Ok
        );
        assert_eq!(
            ps_corr_eigenvalues(flat.as_ptr(), 2, 1, eig.as_mut_ptr()),
            PsStatus::Validation
        );
    }
    assert!((eig[0] - 2.0).abs() < 1e-12 && eig[1].abs() < 1e-12);
}
