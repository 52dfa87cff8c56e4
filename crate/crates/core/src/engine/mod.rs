//! Bloch simulation by operator splitting: hard RF rotations alternate with
//! exact relaxation/precession updates over piecewise-constant intervals.
//!
//! Spins are split into fixed-size chunks that walk the whole timeline
//! independently; partial k-spaces are summed in chunk order, so results do
//! not depend on the number of threads.

mod bench;
mod grid;
mod io;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::ComplexImage;
use crate::phantom::ParametricMaps;
use crate::sequence::{
    build_sequence, validate_timelines, AcquireLine, BuildOptions, Event, EventTimeline,
    SequenceParams,
};

pub use bench::{benchmark, BenchConfig, BenchReport};
pub use grid::SpinGrid;
pub use io::{
    load_image, load_kspace, read_image, read_kspace, save_image, save_kspace, write_image,
    write_kspace, IMAGE_MAGIC, KSPACE_MAGIC,
};

use grid::decay;

/// Spins per work unit. Fixed so that summation order is reproducible.
const CHUNK_SPINS: usize = 4096;

/// Raster of acquired samples, row = phase-encode line.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace {
    pub matrix_n: usize,
    pub data: Vec<Complex64>,
    /// whether each row was acquired in reversed sample order
    pub reversed: Vec<bool>,
}

impl KSpace {
    pub fn zeros(matrix_n: usize) -> Self {
        Self {
            matrix_n,
            data: vec![Complex64::new(0.0, 0.0); matrix_n * matrix_n],
            reversed: vec![false; matrix_n],
        }
    }

    /// Sample at column `kx + n/2`, row `ky + n/2`.
    pub fn at(&self, kx: i64, ky: i64) -> Complex64 {
        let h = (self.matrix_n / 2) as i64;
        self.data[((ky + h) as usize) * self.matrix_n + (kx + h) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub oversample: usize,
    /// `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl EngineOptions {
    pub fn new(oversample: usize) -> Self {
        Self { oversample, threads: None }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

pub fn run_sequence(
    maps: &ParametricMaps,
    timelines: &[EventTimeline],
    oversample: usize,
) -> Result<KSpace> {
    run_sequence_with(maps, timelines, &EngineOptions::new(oversample))
}

pub fn run_sequence_with(
    maps: &ParametricMaps,
    timelines: &[EventTimeline],
    opts: &EngineOptions,
) -> Result<KSpace> {
    let n = timelines
        .first()
        .map(|t| t.matrix_n)
        .ok_or_else(|| Error::InvalidTimeline("no shots".into()))?;
    let reversed = check_writes(timelines, n)?;
    validate_timelines(timelines).into_result()?;
    let grid = SpinGrid::from_maps(maps, n, opts.oversample)?;
    let scale = grid.sample_scale();
    let plan: Vec<Vec<(f64, Event)>> = timelines.iter().map(sorted_events).collect();

    let work = move || -> Vec<Complex64> {
        let partials: Vec<Vec<Complex64>> = grid
            .into_chunks(CHUNK_SPINS)
            .into_par_iter()
            .map(|mut chunk| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
                for shot in &plan {
                    chunk.reset_thermal();
                    walk(&mut chunk, shot, &mut acc);
                }
                acc
            })
            .collect();
        let mut total = vec![Complex64::new(0.0, 0.0); n * n];
        for p in &partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    };
    let mut data = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    for v in &mut data {
        *v *= scale;
    }
    Ok(KSpace { matrix_n: n, data, reversed })
}

/// Marks every raster cell each line writes; a second write is an error.
fn check_writes(timelines: &[EventTimeline], n: usize) -> Result<Vec<bool>> {
    let mut written = vec![false; n * n];
    let mut reversed = vec![false; n];
    for t in timelines {
        for (_, line) in t.lines() {
            if line.line_index >= n || line.n_samples > n {
                continue; // reported by the validator
            }
            reversed[line.line_index] = line.reversed;
            for i in 0..line.n_samples {
                let col = line.column(i);
                let cell = &mut written[line.line_index * n + col];
                if *cell {
                    return Err(Error::KSpaceCollision { line: line.line_index, column: col });
                }
                *cell = true;
            }
        }
    }
    Ok(reversed)
}

fn sorted_events(t: &EventTimeline) -> Vec<(f64, Event)> {
    let mut ev: Vec<(f64, Event)> = t.events.iter().map(|e| (e.t_ms, e.event)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    ev
}

/// Per-spin update factors for one dwell with a given k step.
struct LineFactors {
    key: [u64; 3],
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

fn line_factors(g: &SpinGrid, step: [f64; 2], dwell_ms: f64) -> LineFactors {
    let factor = |frac: f64, i: usize| {
        let dt = dwell_ms * frac;
        let cycles = frac * (step[0] * g.x[i] + step[1] * g.y[i]) + g.db0[i] * dt * 1e-3;
        Complex64::from_polar(decay(dt, g.t2[i]), -TAU * cycles)
    };
    LineFactors {
        key: [step[0].to_bits(), step[1].to_bits(), dwell_ms.to_bits()],
        half: (0..g.len()).map(|i| factor(0.5, i)).collect(),
        full: (0..g.len()).map(|i| factor(1.0, i)).collect(),
    }
}

fn walk(g: &mut SpinGrid, events: &[(f64, Event)], acc: &mut [Complex64]) {
    let n = g.matrix_n();
    let mut now = 0.0;
    let mut cache: Vec<LineFactors> = Vec::new();
    for &(t, ev) in events {
        if t > now {
            g.apply_free_precession(t - now, 0.0, 0.0);
            now = t;
        }
        match ev {
            Event::RfPulse { flip_deg, phase_deg } => g.apply_rf(flip_deg, phase_deg),
            Event::Gradient { gx, gy, duration_ms } => {
                g.apply_free_precession(duration_ms, gx, gy);
                now = t + duration_ms;
            }
            Event::Delay { duration_ms } => {
                g.apply_free_precession(duration_ms, 0.0, 0.0);
                now = t + duration_ms;
            }
            Event::AcquireLine(line) => {
                let key = [line.k_step[0].to_bits(), line.k_step[1].to_bits(), line.dwell_ms.to_bits()];
                let idx = match cache.iter().position(|f| f.key == key) {
                    Some(i) => i,
                    None => {
                        if cache.len() == 4 {
                            cache.remove(0);
                        }
                        cache.push(line_factors(g, line.k_step, line.dwell_ms));
                        cache.len() - 1
                    }
                };
                acquire_line(g, &line, &cache[idx], &mut acc[line.line_index * n..][..n]);
                now = t + line.duration_ms();
            }
        }
    }
}

/// Half dwell to the first sample, one dwell between samples, half dwell out.
fn acquire_line(g: &mut SpinGrid, line: &AcquireLine, f: &LineFactors, row: &mut [Complex64]) {
    for (m, h) in g.mxy.iter_mut().zip(&f.half) {
        *m *= h;
    }
    for i in 0..line.n_samples {
        if i > 0 {
            for (m, k) in g.mxy.iter_mut().zip(&f.full) {
                *m *= k;
            }
        }
        row[line.column(i)] += g.raw_sum();
    }
    for (m, h) in g.mxy.iter_mut().zip(&f.half) {
        *m *= h;
    }
    g.relax_longitudinal(line.duration_ms());
}

/// Centred inverse DFT of the raster, `1/n²` normalization.
pub fn reconstruct(k: &KSpace) -> ComplexImage {
    let data = fft::centred_ifft2(k.matrix_n, &k.data);
    ComplexImage::from_vec(k.matrix_n, data).expect("n×n image")
}

/// Builds the sequence (enforcing the training ranges), runs it and
/// reconstructs the complex image.
pub fn simulate(
    maps: &ParametricMaps,
    params: &SequenceParams,
    matrix_n: usize,
    fov_mm: f64,
    oversample: usize,
) -> Result<ComplexImage> {
    simulate_with(maps, params, matrix_n, fov_mm, &EngineOptions::new(oversample), BuildOptions::default())
}

pub fn simulate_with(
    maps: &ParametricMaps,
    params: &SequenceParams,
    matrix_n: usize,
    fov_mm: f64,
    opts: &EngineOptions,
    build: BuildOptions,
) -> Result<ComplexImage> {
    let timelines = build_sequence(params, matrix_n, fov_mm, build)?;
    Ok(reconstruct(&run_sequence_with(maps, &timelines, opts)?))
}
