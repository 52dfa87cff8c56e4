//! Virtual objects: tissue-parameter maps, non-ideal field maps and the
//! position encoding template.

mod io;
mod pet;
mod surface;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub use io::{load_maps, read_maps, save_maps, write_maps, MAP_MAGIC};
pub use pet::{make_pet, PositionEncodingTemplate};
pub use surface::{
    make_b1_surface, make_field_surface, surface_from_coefficients, Gaussian2, SurfaceCoefficients,
};

pub const MIN_GRID: usize = 16;
pub const DEFAULT_FOV_MM: f64 = 220.0;

pub const T2_RANGE_MS: (f64, f64) = (0.0, 650.0);
pub const M0_RANGE: (f64, f64) = (0.0, 1.0);
pub const DB0_RANGE_HZ: (f64, f64) = (-150.0, 150.0);
pub const B1_RANGE: (f64, f64) = (0.7, 1.3);

const T1_FLOOR_MS: f64 = 300.0;
const T1_CAP_MS: f64 = 4500.0;

/// Default T1 for tissue with the given T2: `max(4·T2, 300 ms)` capped at 4.5 s.
pub fn default_t1(t2_ms: f64) -> f64 {
    (4.0 * t2_ms).clamp(T1_FLOOR_MS, T1_CAP_MS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    UniformDisc,
    MultiEllipse,
    RandomBlobs,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 3] = [Self::UniformDisc, Self::MultiEllipse, Self::RandomBlobs];

    pub fn name(self) -> &'static str {
        match self {
            Self::UniformDisc => "uniform-disc",
            Self::MultiEllipse => "multi-ellipse",
            Self::RandomBlobs => "random-blobs",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown phantom kind `{s}`")))
    }
}

/// Per-voxel T1/T2/M0/ΔB0/B1 description of the object.
///
/// Values are held at f32 precision so that the map file round-trips
/// bit-exactly; [`ParametricMaps::new`] quantises inward so that quantised
/// values still satisfy the range invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricMaps {
    pub fov_mm: f64,
    /// ms
    pub t1: ScalarField,
    /// ms
    pub t2: ScalarField,
    pub m0: ScalarField,
    /// Hz
    pub db0: ScalarField,
    /// multiplier on the nominal flip angle
    pub b1: ScalarField,
}

fn quantize_within(v: f64, lo: f64, hi: f64) -> f64 {
    let mut q = v as f32;
    if (q as f64) < lo && v >= lo {
        q = next_up(q);
    }
    if (q as f64) > hi && v <= hi {
        q = next_down(q);
    }
    q as f64
}

fn next_up(x: f32) -> f32 {
    if x == 0.0 {
        return f32::from_bits(1);
    }
    let b = x.to_bits();
    f32::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f32) -> f32 {
    -next_up(-x)
}

fn quantize_field(f: &ScalarField, lo: f64, hi: f64) -> ScalarField {
    f.map(|v| quantize_within(v, lo, hi))
}

impl ParametricMaps {
    /// Builds maps from the five fields, quantising to f32 and validating.
    pub fn new(
        fov_mm: f64,
        t1: ScalarField,
        t2: ScalarField,
        m0: ScalarField,
        db0: ScalarField,
        b1: ScalarField,
    ) -> Result<Self> {
        let maps = Self {
            fov_mm,
            t1: quantize_field(&t1, 0.0, f64::INFINITY),
            t2: quantize_field(&t2, T2_RANGE_MS.0, T2_RANGE_MS.1),
            m0: quantize_field(&m0, M0_RANGE.0, M0_RANGE.1),
            db0: quantize_field(&db0, DB0_RANGE_HZ.0, DB0_RANGE_HZ.1),
            b1: quantize_field(&b1, B1_RANGE.0, B1_RANGE.1),
        };
        maps.validate()?;
        Ok(maps)
    }

    /// Tissue maps with ideal fields (ΔB0 ≡ 0, B1 ≡ 1).
    pub fn from_tissue(fov_mm: f64, t1: ScalarField, t2: ScalarField, m0: ScalarField) -> Result<Self> {
        let n = t1.n();
        Self::new(
            fov_mm,
            t1,
            t2,
            m0,
            ScalarField::zeros(n),
            ScalarField::constant(n, 1.0),
        )
    }

    pub fn n(&self) -> usize {
        self.t1.n()
    }

    pub fn with_db0(mut self, db0: ScalarField) -> Result<Self> {
        self.db0 = quantize_field(&db0, DB0_RANGE_HZ.0, DB0_RANGE_HZ.1);
        self.validate()?;
        Ok(self)
    }

    pub fn with_b1(mut self, b1: ScalarField) -> Result<Self> {
        self.b1 = quantize_field(&b1, B1_RANGE.0, B1_RANGE.1);
        self.validate()?;
        Ok(self)
    }

    /// Multiplies M0 by `c`; used for linearity checks. Bypasses quantisation.
    pub fn scaled_m0(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.m0 = self.m0.map(|v| v * c);
        out
    }

    pub fn fields(&self) -> [(&'static str, &ScalarField); 5] {
        [
            ("t1", &self.t1),
            ("t2", &self.t2),
            ("m0", &self.m0),
            ("db0", &self.db0),
            ("b1", &self.b1),
        ]
    }

    /// Checks every invariant and reports the first violating voxel.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !(self.fov_mm.is_finite() && self.fov_mm > 0.0) {
            return Err(Error::InvalidArgument(format!("fov_mm must be positive, got {}", self.fov_mm)));
        }
        for (name, f) in self.fields() {
            if f.n() != n {
                return Err(Error::ShapeMismatch(format!(
                    "field `{name}` is {}×{0}, expected {n}×{n}",
                    f.n()
                )));
            }
        }
        let ranged: [(&'static str, &ScalarField, (f64, f64)); 4] = [
            ("t2", &self.t2, T2_RANGE_MS),
            ("m0", &self.m0, M0_RANGE),
            ("db0", &self.db0, DB0_RANGE_HZ),
            ("b1", &self.b1, B1_RANGE),
        ];
        for y in 0..n {
            for x in 0..n {
                for (name, f, (lo, hi)) in ranged {
                    let v = f.get(x, y);
                    if !v.is_finite() {
                        return Err(Error::MapInvariant { field: name, x, y, value: v, reason: "not finite" });
                    }
                    if v < lo || v > hi {
                        return Err(Error::MapInvariant { field: name, x, y, value: v, reason: "out of range" });
                    }
                }
                let t1 = self.t1.get(x, y);
                if !t1.is_finite() {
                    return Err(Error::MapInvariant { field: "t1", x, y, value: t1, reason: "not finite" });
                }
                if t1 < self.t2.get(x, y) {
                    return Err(Error::MapInvariant { field: "t1", x, y, value: t1, reason: "T1 < T2" });
                }
            }
        }
        Ok(())
    }
}

/// Tissue values painted into a phantom region.
#[derive(Debug, Clone, Copy)]
struct Tissue {
    t2: f64,
    m0: f64,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    tissue: Tissue,
}

impl Ellipse {
    /// `(u, v)` in FOV fractions centred on the object, `[-1/2, 1/2)`.
    fn contains(&self, u: f64, v: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let du = u - self.cx;
        let dv = v - self.cy;
        let p = (du * c + dv * s) / self.a;
        let q = (-du * s + dv * c) / self.b;
        p * p + q * q <= 1.0
    }
}

fn voxel_fraction(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64 - 0.5
}

/// Generates one of the analytic phantoms. Deterministic in `(n, kind, seed)`.
pub fn make_phantom(n: usize, kind: PhantomKind, seed: u64) -> Result<ParametricMaps> {
    if n < MIN_GRID {
        return Err(Error::GridTooSmall { n, min: MIN_GRID });
    }
    let (t2, m0) = match kind {
        PhantomKind::UniformDisc => uniform_disc(n),
        PhantomKind::MultiEllipse => multi_ellipse(n, seed),
        PhantomKind::RandomBlobs => random_blobs(n, seed),
    };
    let t1 = if kind == PhantomKind::UniformDisc {
        m0.map(|m| if m > 0.0 { 1000.0 } else { 0.0 })
    } else {
        ScalarField::from_fn(n, |x, y| {
            if m0.get(x, y) > 0.0 {
                default_t1(t2.get(x, y))
            } else {
                0.0
            }
        })
    };
    ParametricMaps::from_tissue(DEFAULT_FOV_MM, t1, t2, m0)
}

/// Disc of radius `0.4·n`, T2 = 100 ms, T1 = 1000 ms, M0 = 1.
fn uniform_disc(n: usize) -> (ScalarField, ScalarField) {
    let inside = |x: usize, y: usize| {
        let u = voxel_fraction(x, n);
        let v = voxel_fraction(y, n);
        u * u + v * v <= 0.4 * 0.4
    };
    let t2 = ScalarField::from_fn(n, |x, y| if inside(x, y) { 100.0 } else { 0.0 });
    let m0 = ScalarField::from_fn(n, |x, y| if inside(x, y) { 1.0 } else { 0.0 });
    (t2, m0)
}

fn paint(n: usize, ellipses: &[Ellipse]) -> (ScalarField, ScalarField) {
    let mut t2 = ScalarField::zeros(n);
    let mut m0 = ScalarField::zeros(n);
    for y in 0..n {
        for x in 0..n {
            let u = voxel_fraction(x, n);
            let v = voxel_fraction(y, n);
            // later ellipses overwrite earlier ones
            if let Some(e) = ellipses.iter().rev().find(|e| e.contains(u, v)) {
                t2.set(x, y, e.tissue.t2);
                m0.set(x, y, e.tissue.m0);
            }
        }
    }
    (t2, m0)
}

/// Shepp–Logan-like head: scalp, brain, ventricles, grey-matter nuclei and a
/// lesion, each jittered by the seed.
fn multi_ellipse(n: usize, seed: u64) -> (ScalarField, ScalarField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (cx, cy, a, b, angle°, T2 ms, M0), in FOV fractions
    const TEMPLATE: [(f64, f64, f64, f64, f64, f64, f64); 8] = [
        (0.0, 0.0, 0.345, 0.46, 0.0, 60.0, 0.75),
        (0.0, -0.0092, 0.3312, 0.437, 0.0, 85.0, 0.68),
        (0.11, 0.0, 0.055, 0.155, -18.0, 600.0, 1.0),
        (-0.11, 0.0, 0.08, 0.205, 18.0, 600.0, 1.0),
        (0.0, 0.175, 0.105, 0.125, 0.0, 110.0, 0.82),
        (0.0, 0.05, 0.023, 0.023, 0.0, 110.0, 0.82),
        (-0.04, -0.3025, 0.023, 0.0115, 0.0, 250.0, 0.9),
        (0.03, -0.3025, 0.0115, 0.023, 0.0, 130.0, 0.85),
    ];
    let mut jitter = |scale: f64| rng.gen_range(-scale..=scale);
    let ellipses: Vec<Ellipse> = TEMPLATE
        .iter()
        .map(|&(cx, cy, a, b, ang, t2, m0)| Ellipse {
            cx: cx + jitter(0.01),
            cy: cy + jitter(0.01),
            a: a * (1.0 + jitter(0.05)),
            b: b * (1.0 + jitter(0.05)),
            angle: (ang + jitter(5.0)).to_radians(),
            tissue: Tissue {
                t2: (t2 * (1.0 + jitter(0.1))).clamp(1.0, T2_RANGE_MS.1),
                m0: (m0 * (1.0 + jitter(0.1))).clamp(0.05, 1.0),
            },
        })
        .collect();
    paint(n, &ellipses)
}

/// Disc of background tissue modulated by random Gaussian blobs.
fn random_blobs(n: usize, seed: u64) -> (ScalarField, ScalarField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = 0.42;
    let base_t2 = rng.gen_range(60.0..120.0);
    let base_m0 = rng.gen_range(0.5..0.9);
    let count = rng.gen_range(4..=10);
    let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let r = radius * rng.gen_range(0.0f64..0.9).sqrt();
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let sigma = rng.gen_range(0.02..0.1);
            let dt2 = rng.gen_range(-50.0..550.0);
            let dm0 = rng.gen_range(-0.4..0.4);
            (r * phi.cos(), r * phi.sin(), sigma, dt2, dm0)
        })
        .collect();
    let mut t2 = ScalarField::zeros(n);
    let mut m0 = ScalarField::zeros(n);
    for y in 0..n {
        for x in 0..n {
            let u = voxel_fraction(x, n);
            let v = voxel_fraction(y, n);
            if u * u + v * v > radius * radius {
                continue;
            }
            let (mut tv, mut mv) = (base_t2, base_m0);
            for &(bx, by, s, dt2, dm0) in &blobs {
                let g = (-((u - bx).powi(2) + (v - by).powi(2)) / (2.0 * s * s)).exp();
                tv += dt2 * g;
                mv += dm0 * g;
            }
            t2.set(x, y, tv.clamp(5.0, T2_RANGE_MS.1));
            m0.set(x, y, mv.clamp(0.05, 1.0));
        }
    }
    (t2, m0)
}
