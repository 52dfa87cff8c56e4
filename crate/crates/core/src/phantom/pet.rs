//! Position encoding template: inverse DFT of four quadrant-symmetric
//! impulses of value `1 + 1j`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::field::ComplexImage;

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEncodingTemplate {
    pub offset: usize,
    pub values: ComplexImage,
}

impl PositionEncodingTemplate {
    pub fn n(&self) -> usize {
        self.values.n()
    }

    /// The four impulse positions in unshifted DFT indexing (DC at 0).
    pub fn impulse_bins(n: usize, offset: usize) -> [(usize, usize); 4] {
        let m = n - offset;
        [(offset, offset), (m, offset), (offset, m), (m, m)]
    }
}

/// Builds the template for an `n × n` grid with impulses at `(±offset, ±offset)`.
///
/// No normalisation beyond the inverse DFT's own `1/n²`, so the forward DFT
/// of the result recovers the impulses.
pub fn make_pet(n: usize, offset: usize) -> Result<PositionEncodingTemplate> {
    if offset == 0 || 2 * offset >= n {
        return Err(Error::InvalidArgument(format!(
            "PET offset must lie in (0, n/2) = (0, {}), got {offset}",
            n as f64 / 2.0
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for (x, y) in PositionEncodingTemplate::impulse_bins(n, offset) {
        buf[y * n + x] = Complex64::new(1.0, 1.0);
    }
    fft::ifft2(n, &mut buf);
    Ok(PositionEncodingTemplate {
        offset,
        values: ComplexImage::from_vec(n, buf).expect("n×n buffer"),
    })
}
