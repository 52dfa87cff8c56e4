//! Gradient-moment bookkeeping per coherence pathway.

use serde::Serialize;

use super::timeline::{Event, EventTimeline};

/// Pulses at or above this flip angle invert the transverse phase of the
/// pathways they act on; anything smaller is treated as an excitation.
const REFOCUS_THRESHOLD_DEG: f64 = 135.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EchoCenter {
    pub excitation_ms: f64,
    /// Raster position (cycles/FOV, centred) where this pathway's phase
    /// dispersion is zero.
    pub k: [f64; 2],
    /// `2·(t_refocus − t_excitation)` when a refocusing pulse follows.
    pub spin_echo_te_ms: Option<f64>,
}

/// Locates the echo of every excitation in the first readout line's frame.
///
/// Each excitation starts its own pathway with zero moment. Gradients add
/// to it, refocusing pulses negate it, other excitations leave it alone.
/// All pathways see the same gradients from the first readout on, so the
/// echo sits where the raster offset cancels the pathway's moment.
pub fn echo_centers(timeline: &EventTimeline) -> Vec<EchoCenter> {
    let mut order: Vec<usize> = (0..timeline.events.len()).collect();
    order.sort_by(|&a, &b| timeline.events[a].t_ms.total_cmp(&timeline.events[b].t_ms));
    let Some(first_line) = order
        .iter()
        .position(|&i| matches!(timeline.events[i].event, Event::AcquireLine(_)))
    else {
        return Vec::new();
    };
    let raster = match timeline.events[order[first_line]].event {
        Event::AcquireLine(l) => l.entry_k(),
        _ => unreachable!(),
    };

    let mut out = Vec::new();
    for (pos, &i) in order[..first_line].iter().enumerate() {
        let e = &timeline.events[i];
        let Event::RfPulse { flip_deg, .. } = e.event else { continue };
        if flip_deg.abs() >= REFOCUS_THRESHOLD_DEG {
            continue;
        }
        let mut k = [0.0, 0.0];
        let mut refocus = None;
        for &j in &order[pos + 1..first_line] {
            match timeline.events[j].event {
                Event::Gradient { gx, gy, .. } => {
                    k[0] += gx;
                    k[1] += gy;
                }
                Event::RfPulse { flip_deg, .. } if flip_deg.abs() >= REFOCUS_THRESHOLD_DEG => {
                    k = [-k[0], -k[1]];
                    refocus = Some(timeline.events[j].t_ms);
                }
                _ => {}
            }
        }
        out.push(EchoCenter {
            excitation_ms: e.t_ms,
            k: [raster[0] - k[0], raster[1] - k[1]],
            spin_echo_te_ms: refocus.map(|t| 2.0 * (t - e.t_ms)),
        });
    }
    out
}
