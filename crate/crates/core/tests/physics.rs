//! Engine results against independent analytic oracles.

use std::f64::consts::TAU;

use num_complex::Complex64;
use simu_core::engine::{reconstruct, run_sequence, simulate, simulate_with, EngineOptions, SpinGrid};
use simu_core::eval::{kspace_peaks, psnr};
use simu_core::fft;
use simu_core::field::{ComplexImage, ScalarField};
use simu_core::phantom::{make_phantom, ParametricMaps, PhantomKind};
use simu_core::sequence::{build_sequence, BuildOptions, EventTimeline, SequenceParams};

const FOV: f64 = 220.0;

/// Direct (non-FFT) DFT of `weight(spin)` over the actual spin positions.
fn direct_dft(g: &SpinGrid, kx: f64, ky: f64, weight: impl Fn(usize) -> f64) -> Complex64 {
    (0..g.len())
        .map(|i| {
            let (x, y) = g.position(i);
            Complex64::from_polar(weight(i), -TAU * (kx * x + ky * y))
        })
        .sum::<Complex64>()
        * g.sample_scale()
}

fn merged_sample_times(shots: &[EventTimeline]) -> Vec<Vec<f64>> {
    let n = shots[0].matrix_n;
    let mut t = vec![vec![f64::NAN; n]; n];
    for s in shots {
        for (row, times) in s.sample_times().into_iter().enumerate() {
            for (col, v) in times.into_iter().enumerate() {
                if !v.is_nan() {
                    t[row][col] = v;
                }
            }
        }
    }
    t
}

#[test]
fn excitation_gives_coherent_sum_along_rotated_axis() {
    let maps = make_phantom(32, PhantomKind::UniformDisc, 0).unwrap();
    let mut g = SpinGrid::from_maps(&maps, 32, 2).unwrap();
    g.apply_rf(90.0, 0.0);
    let s = g.acquire_sample();
    let total: f64 = g.m0().iter().sum::<f64>() * g.sample_scale();
    assert!((s.im - total).abs() < 1e-12 * total);
    assert!(s.re.abs() < 1e-12 * total);
}

#[test]
fn fse_reconstruction_matches_t2_weighted_oracle() {
    // CPMG with ideal pulses: S(k) = F{M0}(k)·exp(−t(k)/T2), t(k) the sample time
    let n = 64;
    let maps = make_phantom(n, PhantomKind::UniformDisc, 0).unwrap();
    let p = SequenceParams::fse(10.0, 90.0).with_shots_for(n);
    let shots = build_sequence(&p, n, FOV, BuildOptions::physical()).unwrap();
    let img = reconstruct(&run_sequence(&maps, &shots, 1).unwrap());

    let g = SpinGrid::from_maps(&maps, n, 1).unwrap();
    let times = merged_sample_times(&shots);
    let h = (n / 2) as f64;
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    for row in 0..n {
        for col in 0..n {
            let f = direct_dft(&g, col as f64 - h, row as f64 - h, |i| g.m0()[i]);
            k[row * n + col] = f * (-times[row][col] / 100.0).exp();
        }
    }
    let oracle = ComplexImage::from_vec(n, fft::centred_ifft2(n, &k)).unwrap();
    let db = psnr(&img, &oracle).unwrap().db();
    assert!(db > 40.0, "PSNR {db}");
}

#[test]
fn epi_without_off_resonance_matches_fse_geometry() {
    let n = 64;
    let maps = make_phantom(n, PhantomKind::UniformDisc, 0).unwrap();
    let fse = simulate(&maps, &SequenceParams::fse(10.0, 45.0).with_shots_for(n), n, FOV, 2).unwrap();
    let epi = simulate(&maps, &SequenceParams::gre_epi(60.0, 0.5, 1.0), n, FOV, 2).unwrap();
    let (a, b) = (fse.magnitude(), epi.magnitude());
    let mean = |f: &ScalarField| f.as_slice().iter().sum::<f64>() / f.as_slice().len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let mut num = 0.0;
    let (mut da, mut db) = (0.0, 0.0);
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    let ncc = num / (da * db).sqrt();
    assert!(ncc > 0.99, "NCC {ncc}");
}

#[test]
fn fse_constant_off_resonance_leaves_kspace_magnitude_unchanged() {
    let n = 32;
    let base = make_phantom(n, PhantomKind::MultiEllipse, 4).unwrap();
    let p = SequenceParams::fse(10.0, 45.0).with_shots_for(n);
    let t = build_sequence(&p, n, FOV, BuildOptions::default()).unwrap();
    let k0 = run_sequence(&base, &t, 1).unwrap();
    let shifted = base.clone().with_db0(ScalarField::constant(n, 100.0)).unwrap();
    let k1 = run_sequence(&shifted, &t, 1).unwrap();
    let peak = k0.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (a, b) in k0.data.iter().zip(&k1.data) {
        assert!((a.norm() - b.norm()).abs() < 1e-9 * peak);
    }
    // the only effect is a phase linear in kx: readout shift of Δf·n·dwell pixels
    let dwell_s = 10.0e-3 / (2 * n) as f64;
    let expected = 100.0 * n as f64 * dwell_s;
    let phase = |kx: i64| (k1.at(kx, 3) / k0.at(kx, 3)).arg();
    let slope = (phase(2) - phase(-2)) / 4.0;
    assert!((-slope / TAU * n as f64 - expected).abs() < 1e-6, "{slope}");
}

#[test]
fn simulate_is_deterministic() {
    let maps = make_phantom(32, PhantomKind::RandomBlobs, 8).unwrap();
    let p = SequenceParams::moled(0.5, 1.02);
    let a = simulate(&maps, &p, 32, FOV, 2).unwrap();
    let b = simulate(&maps, &p, 32, FOV, 2).unwrap();
    assert_eq!(a, b);
    let c = simulate_with(&maps, &p, 32, FOV, &EngineOptions::new(2).threads(2), BuildOptions::default()).unwrap();
    assert_eq!(a, c);
}

#[test]
fn moled_image_has_strip_spectrum() {
    let n = 64;
    let maps = make_phantom(n, PhantomKind::RandomBlobs, 2).unwrap();
    let img = simulate(&maps, &SequenceParams::moled(0.5, 1.0), n, FOV, 2).unwrap();
    let spec = fft::centred_fft2(n, img.as_slice());
    let k = simu_core::engine::KSpace { matrix_n: n, data: spec, reversed: vec![false; n] };
    let mut found: Vec<(i64, i64)> = kspace_peaks(&k, 4).iter().map(|p| (p.kx, p.ky)).collect();
    found.sort();
    assert_eq!(found, vec![(-16, -16), (-16, 16), (16, -16), (16, 16)]);
}

#[test]
fn maps_resampled_to_spin_grid() {
    // a 32² map simulated at matrix 16 with oversample 2 uses the map as is
    let maps: ParametricMaps = make_phantom(32, PhantomKind::MultiEllipse, 1).unwrap();
    let g = SpinGrid::from_maps(&maps, 16, 2).unwrap();
    assert_eq!(g.m0(), maps.m0.as_slice());
    let g = SpinGrid::from_maps(&maps, 32, 2).unwrap();
    assert_eq!(g.len(), 64 * 64);
}
