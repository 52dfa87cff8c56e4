//! Smooth random surfaces for ΔB0 and B1+ maps: a bivariate polynomial of
//! total degree ≤ 3 plus one to four Gaussians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Exponents `(a, b)` of the monomials `u^a v^b`, total degree ≤ 3.
const MONOMIALS: [(i32, i32); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub amplitude: f64,
    /// centre in voxel units
    pub cx: f64,
    pub cy: f64,
    /// width in voxels
    pub sigma: f64,
}

/// Random draw defining one surface before rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCoefficients {
    /// coefficients of [`MONOMIALS`], `u, v ∈ (-1, 1)` across the grid
    pub poly: [f64; 10],
    pub gaussians: Vec<Gaussian2>,
}

impl SurfaceCoefficients {
    pub fn zero() -> Self {
        Self {
            poly: [0.0; 10],
            gaussians: Vec::new(),
        }
    }

    /// Draws coefficients for an `n × n` grid; σ ∈ [n/8, n/2].
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut poly = [0.0; 10];
        for c in &mut poly {
            *c = rng.gen_range(-1.0..=1.0);
        }
        let nf = n as f64;
        let count = rng.gen_range(1..=4);
        let gaussians = (0..count)
            .map(|_| Gaussian2 {
                amplitude: rng.gen_range(-1.0..=1.0),
                cx: rng.gen_range(0.0..nf),
                cy: rng.gen_range(0.0..nf),
                sigma: rng.gen_range(nf / 8.0..=nf / 2.0),
            })
            .collect();
        Self { poly, gaussians }
    }

    /// Evaluates the unscaled surface.
    pub fn evaluate(&self, n: usize) -> ScalarField {
        let nf = n as f64;
        ScalarField::from_fn(n, |x, y| {
            let u = 2.0 * (x as f64 + 0.5) / nf - 1.0;
            let v = 2.0 * (y as f64 + 0.5) / nf - 1.0;
            let poly: f64 = MONOMIALS
                .iter()
                .zip(&self.poly)
                .map(|(&(a, b), c)| c * u.powi(a) * v.powi(b))
                .sum();
            let bumps: f64 = self
                .gaussians
                .iter()
                .map(|g| {
                    let dx = x as f64 + 0.5 - g.cx;
                    let dy = y as f64 + 0.5 - g.cy;
                    g.amplitude * (-(dx * dx + dy * dy) / (2.0 * g.sigma * g.sigma)).exp()
                })
                .sum();
            poly + bumps
        })
    }
}

/// Rescales the surface so its peak magnitude equals `bound`. A zero surface
/// stays zero.
pub fn surface_from_coefficients(n: usize, bound: f64, coeffs: &SurfaceCoefficients) -> ScalarField {
    let raw = coeffs.evaluate(n);
    let peak = raw.max_abs();
    if peak == 0.0 {
        return raw;
    }
    let s = bound / peak;
    raw.map(|v| (v * s).clamp(-bound, bound))
}

/// Random smooth field with `max |value| ≤ bound`, e.g. ΔB0 in Hz.
pub fn make_field_surface(n: usize, bound: f64, seed: u64) -> Result<ScalarField> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidArgument(format!("surface bound must be positive, got {bound}")));
    }
    Ok(surface_from_coefficients(n, bound, &SurfaceCoefficients::random(n, seed)))
}

/// Random smooth field affinely mapped into `[lo, hi]`, e.g. B1+ scaling.
pub fn make_b1_surface(n: usize, lo: f64, hi: f64, seed: u64) -> Result<ScalarField> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("B1 range requires 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let raw = SurfaceCoefficients::random(n, seed).evaluate(n);
    let (min, max) = (raw.min(), raw.max());
    if max == min {
        return Ok(ScalarField::constant(n, 0.5 * (lo + hi)));
    }
    let s = (hi - lo) / (max - min);
    Ok(raw.map(|v| (lo + (v - min) * s).clamp(lo, hi)))
}
