//! Builders for the three supported sequences.
//!
//! Conventions shared by all builders: excitation pulses have phase 90°
//! (about +y) and refocusing pulses phase 0° (about +x), i.e. CPMG; RF pulses
//! are hard (instantaneous); a readout line samples `n` points at integer k
//! positions with `dwell = ESP / n` for EPI-style readouts.

use super::timeline::{AcquireLine, Event, EventTimeline};
use super::{SequenceKind, SequenceParams};
use crate::error::{Error, Result};

const EXCITATION_PHASE: f64 = 90.0;
const REFOCUS_PHASE: f64 = 0.0;

/// Duration of the EPI prephasing gradient.
pub const EPI_PREPHASE_MS: f64 = 1.0;
/// Upper bound on the MOLED echo-shifting gradient duration.
const MOLED_SHIFT_MS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Reject parameters outside the empirical training ranges.
    pub enforce_ranges: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { enforce_ranges: true }
    }
}

impl BuildOptions {
    /// Only physical feasibility is checked.
    pub fn physical() -> Self {
        Self { enforce_ranges: false }
    }
}

/// Builds all shots of the sequence described by `p`.
pub fn build_sequence(
    p: &SequenceParams,
    matrix_n: usize,
    fov_mm: f64,
    opts: BuildOptions,
) -> Result<Vec<EventTimeline>> {
    check_common(p, matrix_n, fov_mm)?;
    if opts.enforce_ranges {
        p.check_ranges()?;
    }
    match p.kind {
        SequenceKind::Fse => fse(p, matrix_n, fov_mm),
        SequenceKind::GreEpi => gre_epi(p, matrix_n, fov_mm).map(|t| vec![t]),
        SequenceKind::Moled => moled(p, matrix_n, fov_mm).map(|t| vec![t]),
    }
}

pub fn build_fse(p: &SequenceParams, matrix_n: usize, fov_mm: f64) -> Result<Vec<EventTimeline>> {
    expect_kind(p, SequenceKind::Fse)?;
    build_sequence(p, matrix_n, fov_mm, BuildOptions::default())
}

pub fn build_gre_epi(p: &SequenceParams, matrix_n: usize, fov_mm: f64) -> Result<EventTimeline> {
    expect_kind(p, SequenceKind::GreEpi)?;
    Ok(build_sequence(p, matrix_n, fov_mm, BuildOptions::default())?.remove(0))
}

pub fn build_moled(p: &SequenceParams, matrix_n: usize, fov_mm: f64) -> Result<EventTimeline> {
    expect_kind(p, SequenceKind::Moled)?;
    Ok(build_sequence(p, matrix_n, fov_mm, BuildOptions::default())?.remove(0))
}

fn expect_kind(p: &SequenceParams, kind: SequenceKind) -> Result<()> {
    if p.kind == kind {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("expected {kind} parameters, got {}", p.kind)))
    }
}

fn check_common(p: &SequenceParams, n: usize, fov_mm: f64) -> Result<()> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("matrix size must be even and ≥ 4, got {n}")));
    }
    if !(fov_mm > 0.0 && fov_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!("fov must be positive, got {fov_mm}")));
    }
    if !(p.esp_ms > 0.0 && p.esp_ms.is_finite()) {
        return Err(Error::InvalidArgument(format!("esp must be positive, got {}", p.esp_ms)));
    }
    if !p.fa_deg.is_finite() {
        return Err(Error::InvalidArgument("flip angle must be finite".into()));
    }
    Ok(())
}

fn required<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("missing parameter `{name}`")))
}

/// Multi-shot CPMG fast spin echo.
///
/// Refocusing pulse `j` sits at `(j − 1/2)·ESP`, echo `j` at `j·ESP`. Each
/// echo is read out over `ESP/2` with the kx = 0 sample exactly on the echo,
/// bracketed by phase-encode / rewind gradients so that k = 0 at every
/// refocusing pulse. Shot `s` acquires raster lines `s, s + shots, …`, from
/// most negative to most positive ky.
fn fse(p: &SequenceParams, n: usize, fov_mm: f64) -> Result<Vec<EventTimeline>> {
    let etl = required(p.etl, "etl")?;
    let shots = required(p.shots, "shots")?;
    let refa = required(p.refa_deg, "refa")?;
    if !refa.is_finite() {
        return Err(Error::InvalidArgument("refocusing angle must be finite".into()));
    }
    if etl * shots != n {
        return Err(Error::InvalidArgument(format!(
            "FSE needs shots × ETL = matrix size, got {shots} × {etl} ≠ {n}"
        )));
    }
    let esp = p.esp_ms;
    let half = (n / 2) as f64;
    let dwell = esp / (2 * n) as f64;
    let grad_ms = esp / 8.0;
    let mut out = Vec::with_capacity(shots);
    for s in 0..shots {
        let mut t = EventTimeline::new(n, fov_mm);
        t.push(0.0, Event::RfPulse { flip_deg: p.fa_deg, phase_deg: EXCITATION_PHASE });
        for j in 1..=etl {
            let jf = j as f64;
            let line_index = s + shots * (j - 1);
            let ky = line_index as f64 - half;
            t.push((jf - 0.5) * esp, Event::RfPulse { flip_deg: refa, phase_deg: REFOCUS_PHASE });
            t.push(
                (jf - 0.5) * esp + esp / 16.0,
                Event::Gradient { gx: -(half + 0.5), gy: ky, duration_ms: grad_ms },
            );
            t.push(
                jf * esp - (half + 0.5) * dwell,
                Event::AcquireLine(AcquireLine {
                    n_samples: n,
                    dwell_ms: dwell,
                    k_start: [-half, ky],
                    k_step: [1.0, 0.0],
                    line_index,
                    reversed: false,
                }),
            );
            t.push(
                jf * esp + esp / 4.0 + esp / 16.0,
                Event::Gradient { gx: -(half - 0.5), gy: -ky, duration_ms: grad_ms },
            );
        }
        out.push(t);
    }
    Ok(out)
}

/// Appends a blipped EPI raster of `n` lines starting at `read0`, spaced by
/// `esp`; the trajectory must already sit at `(−(n/2 + 1/2)·sg, −n/2)`.
fn push_epi_readout(t: &mut EventTimeline, n: usize, read0: f64, esp: f64, sg: f64) {
    let half = (n / 2) as f64;
    let dwell = esp / n as f64;
    for i in 0..n {
        let start = read0 + i as f64 * esp;
        let ky = i as f64 - half;
        if i > 0 {
            t.push(start, Event::Gradient { gx: 0.0, gy: 1.0, duration_ms: 0.0 });
        }
        let reversed = i % 2 == 1;
        let (kx0, step) = if reversed { ((half - 1.0) * sg, -sg) } else { (-half * sg, sg) };
        t.push(
            start,
            Event::AcquireLine(AcquireLine {
                n_samples: n,
                dwell_ms: dwell,
                k_start: [kx0, ky],
                k_step: [step, 0.0],
                line_index: i,
                reversed,
            }),
        );
    }
}

/// Minimum TE for a single-shot EPI readout of `n` lines.
pub(crate) fn epi_min_te(n: usize, esp: f64) -> f64 {
    EPI_PREPHASE_MS + ((n / 2) as f64 + 0.5) * esp
}

/// Single-shot gradient-echo EPI; the centre of the ky = 0 line is at TE.
///
/// `sg_scale` scales every readout-axis gradient area (prephaser and lines).
fn gre_epi(p: &SequenceParams, n: usize, fov_mm: f64) -> Result<EventTimeline> {
    let te = required(p.te_ms, "te")?;
    let sg = required(p.sg_scale, "sg")?;
    if !(sg > 0.0 && sg.is_finite()) {
        return Err(Error::InvalidArgument(format!("sg must be positive, got {sg}")));
    }
    let esp = p.esp_ms;
    let min_te = epi_min_te(n, esp);
    if !(te >= min_te) {
        return Err(Error::EchoTimeTooShort { te_ms: te, min_te_ms: min_te });
    }
    let half = (n / 2) as f64;
    let read0 = te - half * esp - 0.5 * esp;
    let pre0 = read0 - EPI_PREPHASE_MS;
    let mut t = EventTimeline::new(n, fov_mm);
    t.push(0.0, Event::RfPulse { flip_deg: p.fa_deg, phase_deg: EXCITATION_PHASE });
    if pre0 > 0.0 {
        t.push(0.0, Event::Delay { duration_ms: pre0 });
    }
    t.push(
        pre0,
        Event::Gradient { gx: -(half + 0.5) * sg, gy: -half, duration_ms: EPI_PREPHASE_MS },
    );
    push_epi_readout(&mut t, n, read0, esp, sg);
    Ok(t)
}

/// Designed k-space centres of the four MOLED echoes, in excitation order,
/// before `sg_scale` is applied.
pub fn moled_quadrant_offsets(n: usize) -> [[f64; 2]; 4] {
    let q = n as f64 / 4.0;
    [[-q, -q], [q, -q], [-q, q], [q, q]]
}

/// MOLED: four 30° excitations, each followed by an echo-shifting gradient,
/// one 180° refocusing pulse, then a blipped EPI readout.
///
/// Echo `i` is centred at `Σ_{j ≥ i} G_j` in the readout raster; the
/// gradients are chosen so that this sum is the `i`-th quadrant centre
/// scaled by `sg_scale`.
fn moled(p: &SequenceParams, n: usize, fov_mm: f64) -> Result<EventTimeline> {
    let sg = required(p.sg_scale, "sg")?;
    let refa = required(p.refa_deg, "refa")?;
    if !(sg > 0.0 && sg.is_finite()) {
        return Err(Error::InvalidArgument(format!("sg must be positive, got {sg}")));
    }
    let esp = p.esp_ms;
    let spacing = p.excitation_spacing_ms.unwrap_or(esp * n as f64 / 2.0);
    let shift_ms = MOLED_SHIFT_MS.min(spacing / 4.0);
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Timing(format!("excitation spacing must be positive, got {spacing}")));
    }
    let centres = moled_quadrant_offsets(n);
    // G_i = c_i − c_{i+1}, G_4 = c_4
    let mut shifts = [[0.0; 2]; 4];
    for i in 0..4 {
        let next = if i < 3 { centres[i + 1] } else { [0.0, 0.0] };
        shifts[i] = [sg * (centres[i][0] - next[0]), sg * (centres[i][1] - next[1])];
    }
    let half = (n / 2) as f64;
    let mut t = EventTimeline::new(n, fov_mm);
    for (i, g) in shifts.iter().enumerate() {
        let t_exc = i as f64 * spacing;
        t.push(t_exc, Event::RfPulse { flip_deg: p.fa_deg, phase_deg: EXCITATION_PHASE });
        t.push(t_exc, Event::Gradient { gx: g[0], gy: g[1], duration_ms: shift_ms });
    }
    let t_ref = 4.0 * spacing;
    t.push(t_ref, Event::RfPulse { flip_deg: refa, phase_deg: REFOCUS_PHASE });
    t.push(
        t_ref,
        Event::Gradient { gx: -(half + 0.5), gy: -half, duration_ms: EPI_PREPHASE_MS },
    );
    push_epi_readout(&mut t, n, t_ref + EPI_PREPHASE_MS, esp, 1.0);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{echo_centers, validate_timelines};

    fn fse_params(esp: f64) -> SequenceParams {
        SequenceParams::fse(esp, 45.0)
    }

    #[test]
    fn fse_echo_centres_fall_on_multiples_of_esp() {
        let shots = build_fse(&fse_params(10.0), 128, 220.0).unwrap();
        assert_eq!(shots.len(), 8);
        for t in &shots {
            for (j, (start, line)) in t.lines().enumerate() {
                // kx = 0 is column n/2
                let i = (0..line.n_samples).find(|&i| line.column(i) == 64).unwrap();
                let centre = start + (i as f64 + 0.5) * line.dwell_ms;
                assert!((centre - 10.0 * (j + 1) as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fse_cpmg_timing() {
        let t = &build_fse(&fse_params(12.0), 128, 220.0).unwrap()[3];
        let pulses: Vec<_> = t.pulses().collect();
        assert_eq!(pulses.len(), 17);
        assert_eq!(pulses[0].2, 90.0);
        assert!((pulses[1].0 - pulses[0].0 - 6.0).abs() < 1e-12);
        for w in pulses[1..].windows(2) {
            assert!((w[1].0 - w[0].0 - 12.0).abs() < 1e-9);
            assert_eq!(w[0].2, 0.0);
        }
    }

    #[test]
    fn fse_lines_cover_raster_once() {
        let shots = build_fse(&fse_params(10.0), 128, 220.0).unwrap();
        let mut seen = vec![0; 128];
        for t in &shots {
            for (_, l) in t.lines() {
                seen[l.line_index] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(validate_timelines(&shots).is_valid());
        // shot 2 acquires 2, 10, 18, … in echo order
        let idx: Vec<usize> = shots[2].lines().map(|(_, l)| l.line_index).collect();
        assert_eq!(idx, (0..16).map(|j| 2 + 8 * j).collect::<Vec<_>>());
    }

    #[test]
    fn fse_phase_encode_and_rewind_cancel() {
        let t = &build_fse(&fse_params(10.0), 64, 220.0).unwrap_err();
        assert!(matches!(t, Error::InvalidArgument(_)));
        let p = fse_params(10.0).with_shots_for(64);
        let shots = build_fse(&p, 64, 220.0).unwrap();
        assert_eq!(shots.len(), 4);
        for t in &shots {
            let grads: Vec<f64> = t
                .events
                .iter()
                .filter_map(|e| match e.event {
                    Event::Gradient { gy, .. } => Some(gy),
                    _ => None,
                })
                .collect();
            for pair in grads.chunks(2) {
                assert_eq!(pair[0] + pair[1], 0.0);
            }
        }
    }

    #[test]
    fn fse_range_enforcement() {
        let p = SequenceParams::fse(10.0, 90.0);
        assert!(matches!(build_fse(&p, 128, 220.0), Err(Error::ParameterOutOfRange { .. })));
        assert!(build_sequence(&p, 128, 220.0, BuildOptions::physical()).is_ok());
    }

    #[test]
    fn epi_line_spacing_and_te() {
        let p = SequenceParams::gre_epi(50.0, 0.5, 1.0);
        let t = build_gre_epi(&p, 64, 220.0).unwrap();
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines.len(), 64);
        for w in lines.windows(2) {
            assert!((w[1].0 - w[0].0 - 0.5).abs() < 1e-12);
        }
        let (start, ky0) = lines[32];
        assert_eq!(ky0.k_start[1], 0.0);
        assert!((start + ky0.duration_ms() / 2.0 - 50.0).abs() < 1e-12);
        for (i, (_, l)) in lines.iter().enumerate() {
            assert_eq!(l.reversed, i % 2 == 1);
        }
        assert!(validate_timelines(std::slice::from_ref(&t)).is_valid());
    }

    #[test]
    fn epi_short_te_reports_minimum() {
        let p = SequenceParams::gre_epi(40.0, 0.55, 1.0);
        match build_sequence(&p, 256, 220.0, BuildOptions::physical()) {
            Err(Error::EchoTimeTooShort { min_te_ms, .. }) => {
                assert!((min_te_ms - (1.0 + 128.5 * 0.55)).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn moled_structure() {
        let t = build_moled(&SequenceParams::moled(0.5, 1.0), 64, 220.0).unwrap();
        let pulses: Vec<_> = t.pulses().collect();
        assert_eq!(pulses.len(), 5);
        assert!(pulses[..4].iter().all(|&(_, f, ph)| f == 30.0 && ph == 90.0));
        assert_eq!((pulses[4].1, pulses[4].2), (180.0, 0.0));
        assert_eq!(t.lines().count(), 64);
        assert!(validate_timelines(std::slice::from_ref(&t)).is_valid());
    }

    #[test]
    fn moled_echo_geometry_from_moment_tracker() {
        for sg in [1.0, 1.05, 0.95] {
            let t = build_moled(&SequenceParams::moled(0.5, sg), 64, 220.0).unwrap();
            let echoes = echo_centers(&t);
            assert_eq!(echoes.len(), 4);
            for (e, c) in echoes.iter().zip(moled_quadrant_offsets(64)) {
                assert!((e.k[0] - sg * c[0]).abs() < 1e-9);
                assert!((e.k[1] - sg * c[1]).abs() < 1e-9);
            }
            let tes: Vec<f64> = echoes.iter().map(|e| e.spin_echo_te_ms.unwrap()).collect();
            // later excitations refocus first
            assert!(tes.windows(2).all(|w| w[0] > w[1]));
        }
    }
}
