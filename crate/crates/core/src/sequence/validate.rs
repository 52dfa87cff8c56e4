//! Structural checks on event timelines.

use std::fmt;

use super::timeline::{Event, EventTimeline};
use crate::error::{Error, Result};

const TIME_EPS_MS: f64 = 1e-9;
const MOMENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty { shot: usize },
    NonFinite { shot: usize, event: usize },
    NegativeDuration { shot: usize, event: usize },
    Overlap { shot: usize, event: usize, start_ms: f64, previous_end_ms: f64 },
    MatrixMismatch { shot: usize, matrix_n: usize, expected: usize },
    SampleCount { shot: usize, line: usize, n_samples: usize, expected: usize },
    LineOutOfRange { shot: usize, line: usize, matrix_n: usize },
    MomentMismatch { shot: usize, line: usize, expected: [f64; 2], actual: [f64; 2] },
    DuplicateLine { line: usize },
    CoverageGap { line: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty { shot } => write!(f, "shot {shot}: timeline has no duration"),
            Self::NonFinite { shot, event } => {
                write!(f, "shot {shot}: event {event} has a non-finite field")
            }
            Self::NegativeDuration { shot, event } => {
                write!(f, "shot {shot}: event {event} has negative duration")
            }
            Self::Overlap { shot, event, start_ms, previous_end_ms } => write!(
                f,
                "shot {shot}: event ordering violation at event {event} \
                 (starts {start_ms} ms, previous ends {previous_end_ms} ms)"
            ),
            Self::MatrixMismatch { shot, matrix_n, expected } => {
                write!(f, "shot {shot}: matrix size {matrix_n}, expected {expected}")
            }
            Self::SampleCount { shot, line, n_samples, expected } => write!(
                f,
                "shot {shot}: line {line} has {n_samples} samples, expected {expected}"
            ),
            Self::LineOutOfRange { shot, line, matrix_n } => {
                write!(f, "shot {shot}: line index {line} outside raster of {matrix_n}")
            }
            Self::MomentMismatch { shot, line, expected, actual } => write!(
                f,
                "shot {shot}: gradient moment at line {line} is ({:.6}, {:.6}), \
                 line expects ({:.6}, {:.6})",
                actual[0], actual[1], expected[0], expected[1]
            ),
            Self::DuplicateLine { line } => write!(f, "k-space line {line} acquired more than once"),
            Self::CoverageGap { line } => write!(f, "k-space coverage gap at line {line}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        Err(Error::InvalidTimeline(msg.join("; ")))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_timeline(timeline: &EventTimeline) -> ValidationReport {
    validate_timelines(std::slice::from_ref(timeline))
}

/// Validates the shots of one acquisition together; raster coverage is
/// checked across all of them.
///
/// The gradient moment is tracked from the most recent RF pulse and must
/// equal each line's entry point when the line starts.
pub fn validate_timelines(shots: &[EventTimeline]) -> ValidationReport {
    let mut v = Vec::new();
    let Some(first) = shots.first() else {
        v.push(Violation::Empty { shot: 0 });
        return ValidationReport { violations: v };
    };
    let n = first.matrix_n;
    let mut hits = vec![0usize; n];

    for (s, t) in shots.iter().enumerate() {
        if t.matrix_n != n {
            v.push(Violation::MatrixMismatch { shot: s, matrix_n: t.matrix_n, expected: n });
        }
        if !(t.duration_ms() > 0.0) {
            v.push(Violation::Empty { shot: s });
        }
        let mut prev_end = f64::NEG_INFINITY;
        let mut k = [0.0f64; 2];
        for (i, e) in t.events.iter().enumerate() {
            if !finite(&e.event) || !e.t_ms.is_finite() {
                v.push(Violation::NonFinite { shot: s, event: i });
                continue;
            }
            let d = e.event.duration_ms();
            if d < 0.0 {
                v.push(Violation::NegativeDuration { shot: s, event: i });
            }
            if e.t_ms < prev_end - TIME_EPS_MS * prev_end.abs().max(1.0) {
                v.push(Violation::Overlap {
                    shot: s,
                    event: i,
                    start_ms: e.t_ms,
                    previous_end_ms: prev_end,
                });
            }
            prev_end = prev_end.max(e.end_ms());
            match &e.event {
                Event::RfPulse { .. } => k = [0.0, 0.0],
                Event::Gradient { gx, gy, .. } => {
                    k[0] += gx;
                    k[1] += gy;
                }
                Event::Delay { .. } => {}
                Event::AcquireLine(line) => {
                    if line.n_samples != n {
                        v.push(Violation::SampleCount {
                            shot: s,
                            line: line.line_index,
                            n_samples: line.n_samples,
                            expected: n,
                        });
                    }
                    if line.line_index >= n {
                        v.push(Violation::LineOutOfRange {
                            shot: s,
                            line: line.line_index,
                            matrix_n: n,
                        });
                    } else {
                        hits[line.line_index] += 1;
                    }
                    let entry = line.entry_k();
                    if (entry[0] - k[0]).abs() > MOMENT_EPS || (entry[1] - k[1]).abs() > MOMENT_EPS {
                        v.push(Violation::MomentMismatch {
                            shot: s,
                            line: line.line_index,
                            expected: entry,
                            actual: k,
                        });
                    }
                    let a = line.area();
                    // continue from where the line actually ends so one bad
                    // line does not cascade
                    k = [entry[0] + a[0], entry[1] + a[1]];
                }
            }
        }
    }
    for (line, &c) in hits.iter().enumerate() {
        match c {
            0 => v.push(Violation::CoverageGap { line }),
            1 => {}
            _ => v.push(Violation::DuplicateLine { line }),
        }
    }
    ValidationReport { violations: v }
}

fn finite(e: &Event) -> bool {
    match e {
        Event::RfPulse { flip_deg, phase_deg } => flip_deg.is_finite() && phase_deg.is_finite(),
        Event::Gradient { gx, gy, duration_ms } => {
            gx.is_finite() && gy.is_finite() && duration_ms.is_finite()
        }
        Event::Delay { duration_ms } => duration_ms.is_finite(),
        Event::AcquireLine(l) => {
            l.dwell_ms.is_finite()
                && l.dwell_ms > 0.0
                && l.k_start.iter().chain(&l.k_step).all(|x| x.is_finite())
        }
    }
}
