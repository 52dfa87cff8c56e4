//! Square 2D fields stored row-major (`index = y * n + x`).
//!
//! Rows run along the phase-encode direction (y), columns along readout (x).

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    /// Wraps `data`, which must hold exactly `n * n` values.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                data.push(f(x, y));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.n + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.n + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear sample at continuous voxel coordinates, clamped at the border.
    ///
    /// Voxel `(i, j)` sits at coordinate `(i, j)`.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> f64 {
        let last = (self.n - 1) as f64;
        let u = u.clamp(0.0, last);
        let v = v.clamp(0.0, last);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let x1 = (x0 + 1).min(self.n - 1);
        let y1 = (y0 + 1).min(self.n - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        // exact passthrough on grid points
        if fx == 0.0 && fy == 0.0 {
            return self.get(x0, y0);
        }
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resamples onto an `m × m` grid covering the same field of view.
    ///
    /// Both grids place voxel centres at `(i + 1/2) / size` of the FOV, so
    /// resampling to the same size is the identity.
    pub fn resample(&self, m: usize) -> Self {
        if m == self.n {
            return self.clone();
        }
        let scale = self.n as f64 / m as f64;
        Self::from_fn(m, |x, y| {
            let u = (x as f64 + 0.5) * scale - 0.5;
            let v = (y as f64 + 0.5) * scale - 0.5;
            self.sample_bilinear(u, v)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<Complex64>) -> Option<Self> {
        (data.len() == n * n).then_some(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.n + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Complex64) {
        self.data[y * self.n + x] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            n: self.n,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.data {
            *c *= s;
        }
    }
}
