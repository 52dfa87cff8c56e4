use serde::{Deserialize, Serialize};

/// One readout line: `n_samples` samples spaced by `dwell_ms`.
///
/// Sample `i` is taken at `t + (i + 1/2)·dwell` at physical k-space position
/// `k_start + i·k_step`, so the trajectory enters the line at
/// `k_start − k_step/2` and leaves it at `k_start + (n − 1/2)·k_step`.
/// The sample is stored at raster row `line_index`, column `i` (or
/// `n − 1 − i` for reversed lines).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquireLine {
    pub n_samples: usize,
    pub dwell_ms: f64,
    pub k_start: [f64; 2],
    pub k_step: [f64; 2],
    pub line_index: usize,
    pub reversed: bool,
}

impl AcquireLine {
    #[inline]
    pub fn column(&self, sample: usize) -> usize {
        if self.reversed {
            self.n_samples - 1 - sample
        } else {
            sample
        }
    }

    pub fn duration_ms(&self) -> f64 {
        self.n_samples as f64 * self.dwell_ms
    }

    /// Physical k position on entry to the line.
    pub fn entry_k(&self) -> [f64; 2] {
        [
            self.k_start[0] - 0.5 * self.k_step[0],
            self.k_start[1] - 0.5 * self.k_step[1],
        ]
    }

    /// Total k displacement over the line.
    pub fn area(&self) -> [f64; 2] {
        let n = self.n_samples as f64;
        [n * self.k_step[0], n * self.k_step[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Event {
    /// Instantaneous rotation by `flip_deg` about the transverse axis at
    /// azimuth `phase_deg`.
    RfPulse { flip_deg: f64, phase_deg: f64 },
    /// Constant gradient whose total area moves k by `(gx, gy)` cycles/FOV.
    /// Zero duration means an instantaneous k jump.
    Gradient { gx: f64, gy: f64, duration_ms: f64 },
    Delay { duration_ms: f64 },
    AcquireLine(AcquireLine),
}

impl Event {
    pub fn duration_ms(&self) -> f64 {
        match self {
            Event::RfPulse { .. } => 0.0,
            Event::Gradient { duration_ms, .. } | Event::Delay { duration_ms } => *duration_ms,
            Event::AcquireLine(line) => line.duration_ms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t_ms: f64,
    #[serde(flatten)]
    pub event: Event,
}

impl TimedEvent {
    pub fn end_ms(&self) -> f64 {
        self.t_ms + self.event.duration_ms()
    }
}

/// Events of one shot, ordered in time. Gaps between events are free
/// precession without gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTimeline {
    pub matrix_n: usize,
    pub fov_mm: f64,
    pub events: Vec<TimedEvent>,
}

impl EventTimeline {
    pub fn new(matrix_n: usize, fov_mm: f64) -> Self {
        Self {
            matrix_n,
            fov_mm,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, t_ms: f64, event: Event) {
        self.events.push(TimedEvent { t_ms, event });
    }

    pub fn duration_ms(&self) -> f64 {
        self.events.iter().map(TimedEvent::end_ms).fold(0.0, f64::max)
    }

    /// `(start time, line)` for every acquisition event.
    pub fn lines(&self) -> impl Iterator<Item = (f64, &AcquireLine)> + '_ {
        self.events.iter().filter_map(|e| match &e.event {
            Event::AcquireLine(l) => Some((e.t_ms, l)),
            _ => None,
        })
    }

    /// `(time, flip, phase)` of each RF pulse.
    pub fn pulses(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.events.iter().filter_map(|e| match e.event {
            Event::RfPulse { flip_deg, phase_deg } => Some((e.t_ms, flip_deg, phase_deg)),
            _ => None,
        })
    }

    /// Acquisition time of every sample, indexed `[line_index][column]`.
    pub fn sample_times(&self) -> Vec<Vec<f64>> {
        let n = self.matrix_n;
        let mut times = vec![vec![f64::NAN; n]; n];
        for (t, line) in self.lines() {
            for i in 0..line.n_samples {
                if line.line_index < n && line.column(i) < n {
                    times[line.line_index][line.column(i)] = t + (i as f64 + 0.5) * line.dwell_ms;
                }
            }
        }
        times
    }
}
