//! Image-quality and artifact metrics.
//!
//! PSNR and SSIM compare magnitude images after each is scaled to peak 1.

use serde::{Serialize, Serializer};

use crate::engine::KSpace;
use crate::error::{Error, Result};
use crate::field::{ComplexImage, ScalarField};

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_TAPS: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

/// PSNR in dB, or `Identical` when the images do not differ at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Identical,
}

impl Psnr {
    /// Decibels, `+∞` for identical images.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Identical => f64::INFINITY,
        }
    }

    pub fn is_identical(self) -> bool {
        self == Psnr::Identical
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Db(v) => s.serialize_f64(*v),
            Psnr::Identical => s.serialize_str("identical"),
        }
    }
}

fn same_shape(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("{a}×{a} vs {b}×{b}")))
    }
}

/// Magnitude scaled so its maximum is 1 (an all-zero image stays zero).
pub fn normalized_magnitude(img: &ComplexImage) -> ScalarField {
    let mag = img.magnitude();
    let peak = mag.max();
    if peak > 0.0 {
        mag.map(|v| v / peak)
    } else {
        mag
    }
}

/// `10·log10(1/MSE)` of two fields already on a unit scale.
pub fn psnr_fields(a: &ScalarField, b: &ScalarField) -> Result<Psnr> {
    same_shape(a.n(), b.n())?;
    let len = a.as_slice().len() as f64;
    let mse: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / len;
    Ok(if mse == 0.0 { Psnr::Identical } else { Psnr::Db(-10.0 * mse.log10()) })
}

pub fn psnr(a: &ComplexImage, b: &ComplexImage) -> Result<Psnr> {
    same_shape(a.n(), b.n())?;
    psnr_fields(&normalized_magnitude(a), &normalized_magnitude(b))
}

fn gaussian_window() -> [f64; SSIM_TAPS] {
    let mut w = [0.0; SSIM_TAPS];
    let c = (SSIM_TAPS / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering: output side is `n − taps + 1`.
fn filter_valid(n: usize, data: &[f64], w: &[f64]) -> Vec<f64> {
    let m = n - w.len() + 1;
    let mut rows = vec![0.0; n * m];
    for y in 0..n {
        for x in 0..m {
            rows[y * m + x] = w.iter().enumerate().map(|(k, wk)| wk * data[y * n + x + k]).sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for y in 0..m {
        for x in 0..m {
            out[y * m + x] = w.iter().enumerate().map(|(k, wk)| wk * rows[(y + k) * m + x]).sum();
        }
    }
    out
}

/// Mean local SSIM of two fields with dynamic range 1, over window
/// positions that lie fully inside the image.
pub fn ssim_fields(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    same_shape(a.n(), b.n())?;
    let n = a.n();
    if n < SSIM_TAPS {
        return Err(Error::ShapeMismatch(format!("SSIM needs at least {SSIM_TAPS}×{SSIM_TAPS}, got {n}×{n}")));
    }
    let w = gaussian_window();
    let (x, y) = (a.as_slice(), b.as_slice());
    let prod = |f: &dyn Fn(usize) -> f64| (0..n * n).map(f).collect::<Vec<f64>>();
    let mx = filter_valid(n, x, &w);
    let my = filter_valid(n, y, &w);
    let sxx = filter_valid(n, &prod(&|i| x[i] * x[i]), &w);
    let syy = filter_valid(n, &prod(&|i| y[i] * y[i]), &w);
    let sxy = filter_valid(n, &prod(&|i| x[i] * y[i]), &w);
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

pub fn ssim(a: &ComplexImage, b: &ComplexImage) -> Result<f64> {
    same_shape(a.n(), b.n())?;
    ssim_fields(&normalized_magnitude(a), &normalized_magnitude(b))
}

/// `m0 > 0` dilated by a disc of the given Euclidean radius (in voxels).
pub fn support_mask(m0: &ScalarField, radius: f64) -> Vec<bool> {
    let n = m0.n() as i64;
    let r = radius.floor() as i64;
    let mut mask = vec![false; (n * n) as usize];
    for y in 0..n {
        for x in 0..n {
            if m0.get(x as usize, y as usize) <= 0.0 {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xx, yy) = (x + dx, y + dy);
                    if ((dx * dx + dy * dy) as f64) <= radius * radius
                        && (0..n).contains(&xx)
                        && (0..n).contains(&yy)
                    {
                        mask[(yy * n + xx) as usize] = true;
                    }
                }
            }
        }
    }
    mask
}

/// Fraction of `Σ|img|²` falling outside `mask`; 0 for an empty image.
pub fn ghost_energy(img: &ScalarField, mask: &[bool]) -> Result<f64> {
    if mask.len() != img.as_slice().len() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries for {} pixels",
            mask.len(),
            img.as_slice().len()
        )));
    }
    let (mut outside, mut total) = (0.0, 0.0);
    for (v, &inside) in img.as_slice().iter().zip(mask) {
        let e = v * v;
        total += e;
        if !inside {
            outside += e;
        }
    }
    Ok(if total > 0.0 { outside / total } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// centred k coordinates
    pub kx: i64,
    pub ky: i64,
    pub magnitude: f64,
}

/// Local maxima of `|k|` over their 3×3 neighbourhood, largest first.
/// Ties within a neighbourhood go to the earlier raster position; zero
/// samples are never peaks.
pub fn kspace_peaks(k: &KSpace, n_peaks: usize) -> Vec<Peak> {
    let n = k.matrix_n;
    let mag: Vec<f64> = k.data.iter().map(|v| v.norm()).collect();
    let h = (n / 2) as i64;
    let mut peaks = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let p = y * n + x;
            let m = mag[p];
            if m == 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    if (dx, dy) == (0, 0) || xx < 0 || yy < 0 || xx >= n as i64 || yy >= n as i64 {
                        continue;
                    }
                    let q = yy as usize * n + xx as usize;
                    if (q < p && m <= mag[q]) || (q > p && m < mag[q]) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push(Peak { kx: x as i64 - h, ky: y as i64 - h, magnitude: m });
            }
        }
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    peaks.truncate(n_peaks);
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub psnr_db: Psnr,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub images: Vec<ImageMetrics>,
    /// mean/std over images with finite PSNR; `None` if there are none
    pub psnr_mean: Option<f64>,
    pub psnr_std: Option<f64>,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub identical: usize,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Metrics for each `(prediction, reference)` pair and their aggregates.
pub fn metric_report(pairs: &[(ComplexImage, ComplexImage)]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no images to compare".into()));
    }
    let images = pairs
        .iter()
        .map(|(p, r)| Ok(ImageMetrics { psnr_db: psnr(p, r)?, ssim: ssim(p, r)? }))
        .collect::<Result<Vec<_>>>()?;
    let finite: Vec<f64> = images
        .iter()
        .filter_map(|m| match m.psnr_db {
            Psnr::Db(v) => Some(v),
            Psnr::Identical => None,
        })
        .collect();
    let (pm, ps) = if finite.is_empty() { (None, None) } else {
        let (m, s) = mean_std(&finite);
        (Some(m), Some(s))
    };
    let ss: Vec<f64> = images.iter().map(|m| m.ssim).collect();
    let (sm, sd) = mean_std(&ss);
    Ok(MetricReport {
        identical: images.len() - finite.len(),
        images,
        psnr_mean: pm,
        psnr_std: ps,
        ssim_mean: sm,
        ssim_std: sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn field(n: usize, f: impl Fn(usize, usize) -> f64) -> ScalarField {
        ScalarField::from_fn(n, f)
    }

    fn image(f: &ScalarField) -> ComplexImage {
        ComplexImage::from_vec(f.n(), f.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect())
            .unwrap()
    }

    #[test]
    fn psnr_definition() {
        let a = ScalarField::constant(10, 0.5);
        let b = ScalarField::constant(10, 0.51);
        let p = psnr_fields(&a, &b).unwrap().db();
        assert!((p - 40.0).abs() < 1e-9);
        assert!(psnr_fields(&a, &a).unwrap().is_identical());
    }

    #[test]
    fn psnr_normalizes_each_image() {
        let a = field(16, |x, y| ((x * y) % 5) as f64 + 1.0);
        let b = a.map(|v| v * 3.0);
        assert!(psnr(&image(&a), &image(&b)).unwrap().is_identical());
    }

    #[test]
    fn ssim_identity_and_inverse() {
        let a = field(32, |x, y| if (x / 4 + y / 4) % 2 == 0 { 1.0 } else { 0.0 });
        assert!((ssim_fields(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim_fields(&a, &inv).unwrap() < 0.1);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        // constant images: variances vanish, only the luminance term remains
        let a = ScalarField::constant(16, 0.2);
        let b = ScalarField::constant(16, 0.6);
        let c1 = 1e-4;
        let expected = (2.0 * 0.2 * 0.6 + c1) / (0.04 + 0.36 + c1);
        assert!((ssim_fields(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_rejects_tiny_images() {
        let a = ScalarField::constant(8, 1.0);
        assert!(ssim_fields(&a, &a).is_err());
        assert!(ssim_fields(&a, &ScalarField::constant(16, 1.0)).is_err());
    }

    #[test]
    fn ghost_energy_examples() {
        let m0 = field(8, |x, _| if x < 4 { 1.0 } else { 0.0 });
        let img = field(8, |x, _| if x < 4 { 2.0 } else { 0.0 });
        let mask: Vec<bool> = m0.as_slice().iter().map(|&v| v > 0.0).collect();
        assert_eq!(ghost_energy(&img, &mask).unwrap(), 0.0);
        assert_eq!(ghost_energy(&ScalarField::constant(8, 1.0), &mask).unwrap(), 0.5);
        assert_eq!(ghost_energy(&ScalarField::zeros(8), &mask).unwrap(), 0.0);
    }

    #[test]
    fn support_mask_dilates_by_disc() {
        let mut m0 = ScalarField::zeros(9);
        m0.set(4, 4, 1.0);
        let mask = support_mask(&m0, 2.0);
        assert_eq!(mask.iter().filter(|&&b| b).count(), 13);
        assert!(mask[4 * 9 + 6] && !mask[6 * 9 + 6]);
    }

    #[test]
    fn peaks_of_impulses() {
        let mut k = KSpace::zeros(16);
        k.data[3 * 16 + 12] = Complex64::new(0.0, 5.0);
        assert_eq!(kspace_peaks(&k, 1), vec![Peak { kx: 4, ky: -5, magnitude: 5.0 }]);
        k.data[10 * 16 + 2] = Complex64::new(5.0, 0.0);
        let p = kspace_peaks(&k, 2);
        assert_eq!(p.len(), 2);
        assert!(p.iter().any(|p| (p.kx, p.ky) == (-6, 2)));
        // a two-cell plateau yields one peak
        let mut k = KSpace::zeros(8);
        k.data[10] = Complex64::new(1.0, 0.0);
        k.data[11] = Complex64::new(1.0, 0.0);
        let p = kspace_peaks(&k, 5);
        assert_eq!(p[0].magnitude, 1.0);
        assert_eq!(p.iter().filter(|p| p.magnitude == 1.0).count(), 1);
    }

    #[test]
    fn report_aggregates() {
        let a = image(&field(16, |x, y| (x + y) as f64));
        let b = image(&field(16, |x, y| (x + y) as f64 + if x == 3 { 1.0 } else { 0.0 }));
        let r = metric_report(&[(a.clone(), a.clone()), (a, b)]).unwrap();
        assert_eq!(r.identical, 1);
        assert!(r.psnr_mean.unwrap().is_finite() && r.psnr_std == Some(0.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"identical\""));
    }
}
