use std::time::Instant;

use serde::Serialize;

use super::{run_sequence_with, reconstruct, sorted_events, EngineOptions};
use crate::error::{Error, Result};
use crate::phantom::ParametricMaps;
use crate::sequence::{build_sequence, BuildOptions, Event, EventTimeline, SequenceParams};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub params: SequenceParams,
    pub matrix_n: usize,
    pub fov_mm: f64,
    pub oversample: usize,
    pub threads: usize,
    pub repeat: usize,
    pub build: BuildOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub sequence: String,
    pub matrix_n: usize,
    pub oversample: usize,
    pub spins: usize,
    pub events: usize,
    /// precession updates per spin over all shots
    pub steps_per_spin: usize,
    pub threads: usize,
    pub repeat: usize,
    pub single_thread_s: Vec<f64>,
    pub multi_thread_s: Vec<f64>,
    pub single_thread_median_s: f64,
    pub multi_thread_median_s: f64,
    pub speedup: f64,
    pub events_per_s: f64,
    pub spin_steps_per_s: f64,
}

impl BenchReport {
    /// Wall time per image at the configured thread count.
    pub fn per_image_s(&self) -> f64 {
        self.multi_thread_median_s
    }

    /// Extrapolated time to simulate `records` images.
    pub fn estimate_s(&self, records: usize) -> f64 {
        self.per_image_s() * records as f64
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn steps_per_spin(timelines: &[EventTimeline]) -> usize {
    let mut steps = 0;
    for t in timelines {
        let mut now = 0.0;
        for (start, ev) in sorted_events(t) {
            if start > now + 1e-9 {
                steps += 1;
                now = start;
            }
            match ev {
                Event::RfPulse { .. } => {}
                Event::Gradient { duration_ms, .. } | Event::Delay { duration_ms } => {
                    steps += 1;
                    now = start + duration_ms;
                }
                Event::AcquireLine(l) => {
                    steps += l.n_samples + 1;
                    now = start + l.duration_ms();
                }
            }
        }
    }
    steps
}

/// Times full simulations (run + reconstruct) single-threaded and at
/// `threads`; each configuration runs `repeat` times.
pub fn benchmark(maps: &ParametricMaps, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repeat == 0 || cfg.threads == 0 {
        return Err(Error::InvalidArgument("repeat and threads must be ≥ 1".into()));
    }
    let timelines = build_sequence(&cfg.params, cfg.matrix_n, cfg.fov_mm, cfg.build)?;
    let time = |threads: usize| -> Result<Vec<f64>> {
        let opts = EngineOptions::new(cfg.oversample).threads(threads);
        (0..cfg.repeat)
            .map(|_| {
                let start = Instant::now();
                let k = run_sequence_with(maps, &timelines, &opts)?;
                std::hint::black_box(reconstruct(&k));
                Ok(start.elapsed().as_secs_f64())
            })
            .collect()
    };
    let single = time(1)?;
    let multi = if cfg.threads == 1 { single.clone() } else { time(cfg.threads)? };
    let (s_med, m_med) = (median(&single), median(&multi));
    let events: usize = timelines.iter().map(|t| t.events.len()).sum();
    let ns = cfg.matrix_n * cfg.oversample;
    let spins = ns * ns;
    let steps = steps_per_spin(&timelines);
    Ok(BenchReport {
        sequence: cfg.params.kind.to_string(),
        matrix_n: cfg.matrix_n,
        oversample: cfg.oversample,
        spins,
        events,
        steps_per_spin: steps,
        threads: cfg.threads,
        repeat: cfg.repeat,
        single_thread_s: single,
        multi_thread_s: multi,
        single_thread_median_s: s_med,
        multi_thread_median_s: m_med,
        speedup: s_med / m_med,
        events_per_s: events as f64 / m_med,
        spin_steps_per_s: (spins * steps) as f64 / m_med,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_phantom, PhantomKind};

    #[test]
    fn report_fields_are_consistent() {
        let maps = make_phantom(16, PhantomKind::UniformDisc, 0).unwrap();
        let cfg = BenchConfig {
            params: SequenceParams::gre_epi(40.0, 0.5, 1.0),
            matrix_n: 16,
            fov_mm: 220.0,
            oversample: 1,
            threads: 2,
            repeat: 3,
            build: BuildOptions::physical(),
        };
        let r = benchmark(&maps, &cfg).unwrap();
        assert_eq!(r.single_thread_s.len(), 3);
        assert_eq!(r.multi_thread_s.len(), 3);
        assert_eq!(r.spins, 256);
        // delay, prephaser, 15 blips, 16 lines of 17 steps
        assert_eq!(r.steps_per_spin, 2 + 15 + 16 * 17);
        assert!(r.speedup > 0.0 && r.events_per_s > 0.0);
        assert!((r.estimate_s(10) - 10.0 * r.per_image_s()).abs() < 1e-12);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
