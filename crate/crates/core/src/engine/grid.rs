use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phantom::ParametricMaps;

/// Isochromats on an `ns × ns` grid, stored as structure of arrays.
///
/// Transverse magnetization is kept as `Mxy = Mx + i·My`. Positions are in
/// FOV fractions, `(i + 1/2)/ns − 1/2` along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinGrid {
    ns: usize,
    matrix_n: usize,
    pub(crate) x: Vec<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) t1: Vec<f64>,
    pub(crate) t2: Vec<f64>,
    pub(crate) m0: Vec<f64>,
    pub(crate) db0: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) mxy: Vec<Complex64>,
    pub(crate) mz: Vec<f64>,
}

/// `exp(−dt/T)`, with `T = 0` meaning instantaneous decay.
#[inline]
pub(crate) fn decay(dt_ms: f64, t_ms: f64) -> f64 {
    if dt_ms == 0.0 {
        1.0
    } else if t_ms > 0.0 {
        (-dt_ms / t_ms).exp()
    } else {
        0.0
    }
}

impl SpinGrid {
    /// Builds an `oversample·matrix_n` square grid from `maps`, resampling
    /// them bilinearly when sizes differ. Starts at thermal equilibrium.
    pub fn from_maps(maps: &ParametricMaps, matrix_n: usize, oversample: usize) -> Result<Self> {
        if oversample == 0 {
            return Err(Error::InvalidArgument("oversample must be ≥ 1".into()));
        }
        if matrix_n == 0 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        let ns = matrix_n * oversample;
        let field = |f: &crate::field::ScalarField| f.resample(ns).into_vec();
        let coord: Vec<f64> = (0..ns).map(|i| (i as f64 + 0.5) / ns as f64 - 0.5).collect();
        let mut x = Vec::with_capacity(ns * ns);
        let mut y = Vec::with_capacity(ns * ns);
        for j in 0..ns {
            for i in 0..ns {
                x.push(coord[i]);
                y.push(coord[j]);
            }
        }
        let m0 = field(&maps.m0);
        let mut grid = Self {
            ns,
            matrix_n,
            x,
            y,
            t1: field(&maps.t1),
            t2: field(&maps.t2),
            mxy: vec![Complex64::new(0.0, 0.0); m0.len()],
            mz: m0.clone(),
            m0,
            db0: field(&maps.db0),
            b1: field(&maps.b1),
        };
        grid.reset_thermal();
        Ok(grid)
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn matrix_n(&self) -> usize {
        self.matrix_n
    }

    pub fn len(&self) -> usize {
        self.m0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m0.is_empty()
    }

    pub fn position(&self, i: usize) -> (f64, f64) {
        (self.x[i], self.y[i])
    }

    pub fn m0(&self) -> &[f64] {
        &self.m0
    }

    /// `[Mx, My, Mz]` of spin `i`.
    pub fn magnetization(&self, i: usize) -> [f64; 3] {
        [self.mxy[i].re, self.mxy[i].im, self.mz[i]]
    }

    pub fn set_magnetization(&mut self, i: usize, m: [f64; 3]) {
        self.mxy[i] = Complex64::new(m[0], m[1]);
        self.mz[i] = m[2];
    }

    pub fn set_db0(&mut self, hz: &[f64]) {
        assert_eq!(hz.len(), self.len(), "one off-resonance value per spin");
        self.db0.copy_from_slice(hz);
    }

    /// Signal normalization `(matrix_n / ns)²`.
    pub fn sample_scale(&self) -> f64 {
        let r = self.matrix_n as f64 / self.ns as f64;
        r * r
    }

    pub fn reset_thermal(&mut self) {
        self.mxy.fill(Complex64::new(0.0, 0.0));
        self.mz.copy_from_slice(&self.m0);
    }

    /// Rotates every spin by `flip_deg·b1` about the transverse axis at
    /// azimuth `phase_deg`; phase 0° is +x, which takes +z towards +y.
    pub fn apply_rf(&mut self, flip_deg: f64, phase_deg: f64) {
        let to_axis = Complex64::from_polar(1.0, -phase_deg.to_radians());
        let back = to_axis.conj();
        let flip = flip_deg.to_radians();
        let mut cached = (f64::NAN, 0.0, 0.0);
        for i in 0..self.mz.len() {
            let b1 = self.b1[i];
            if b1 != cached.0 {
                let a = flip * b1;
                cached = (b1, a.cos(), a.sin());
            }
            let (_, c, s) = cached;
            let m = self.mxy[i] * to_axis;
            let mz = self.mz[i];
            let my = m.im * c + mz * s;
            self.mz[i] = -m.im * s + mz * c;
            self.mxy[i] = Complex64::new(m.re, my) * back;
        }
    }

    /// Free precession over `dt_ms` while the gradient moves k by `(gx, gy)`
    /// cycles/FOV. Relaxation and phase are applied as one exact update.
    pub fn apply_free_precession(&mut self, dt_ms: f64, gx: f64, gy: f64) {
        if dt_ms == 0.0 && gx == 0.0 && gy == 0.0 {
            return;
        }
        let dt_s = dt_ms * 1e-3;
        for i in 0..self.mz.len() {
            let cycles = gx * self.x[i] + gy * self.y[i] + self.db0[i] * dt_s;
            let rot = Complex64::from_polar(decay(dt_ms, self.t2[i]), -TAU * cycles);
            self.mxy[i] *= rot;
        }
        self.relax_longitudinal(dt_ms);
    }

    pub(crate) fn relax_longitudinal(&mut self, dt_ms: f64) {
        if dt_ms == 0.0 {
            return;
        }
        for i in 0..self.mz.len() {
            let m0 = self.m0[i];
            self.mz[i] = m0 + (self.mz[i] - m0) * decay(dt_ms, self.t1[i]);
        }
    }

    /// Coherent sum of `Mx + i·My`, scaled by `(matrix_n/ns)²`.
    pub fn acquire_sample(&self) -> Complex64 {
        self.raw_sum() * self.sample_scale()
    }

    pub(crate) fn raw_sum(&self) -> Complex64 {
        self.mxy.iter().sum()
    }

    /// Splits into consecutive groups of at most `size` spins.
    pub(crate) fn into_chunks(self, size: usize) -> Vec<SpinGrid> {
        let len = self.len();
        (0..len)
            .step_by(size.max(1))
            .map(|start| {
                let r = start..(start + size).min(len);
                SpinGrid {
                    ns: self.ns,
                    matrix_n: self.matrix_n,
                    x: self.x[r.clone()].to_vec(),
                    y: self.y[r.clone()].to_vec(),
                    t1: self.t1[r.clone()].to_vec(),
                    t2: self.t2[r.clone()].to_vec(),
                    m0: self.m0[r.clone()].to_vec(),
                    db0: self.db0[r.clone()].to_vec(),
                    b1: self.b1[r.clone()].to_vec(),
                    mxy: self.mxy[r.clone()].to_vec(),
                    mz: self.mz[r].to_vec(),
                }
            })
            .collect()
    }
}
