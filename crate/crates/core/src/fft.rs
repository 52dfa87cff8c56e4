//! 2D discrete Fourier transforms on square row-major buffers.
//!
//! Two layouts are used in the crate:
//!
//! * *unshifted*: index `u` holds frequency/position `u mod n` (DC at 0);
//! * *centred*: index `c` holds signed frequency/position `c - n/2`.
//!
//! Forward transforms are unnormalised, inverse transforms carry `1/n²`.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

fn transform_2d(n: usize, buf: &mut [Complex64], direction: FftDirection) {
    assert_eq!(buf.len(), n * n, "buffer is not n×n");
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![Complex64::default(); n];
    for x in 0..n {
        for y in 0..n {
            column[y] = buf[y * n + x];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for y in 0..n {
            buf[y * n + x] = column[y];
        }
    }
}

/// Unnormalised forward 2D DFT, `X[k] = Σ x[p] e^{-2πi k·p/n}`.
pub fn fft2(n: usize, buf: &mut [Complex64]) {
    transform_2d(n, buf, FftDirection::Forward);
}

/// Inverse 2D DFT including the `1/n²` factor.
pub fn ifft2(n: usize, buf: &mut [Complex64]) {
    transform_2d(n, buf, FftDirection::Inverse);
    let s = 1.0 / (n * n) as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Moves a centred buffer to unshifted layout (`ifftshift`).
pub fn centred_to_unshifted(n: usize, src: &[Complex64]) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::default(); n * n];
    for uy in 0..n {
        let cy = (uy + h) % n;
        for ux in 0..n {
            let cx = (ux + h) % n;
            out[uy * n + ux] = src[cy * n + cx];
        }
    }
    out
}

/// Moves an unshifted buffer to centred layout (`fftshift`).
pub fn unshifted_to_centred(n: usize, src: &[Complex64]) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::default(); n * n];
    for cy in 0..n {
        let uy = (cy + n - h) % n;
        for cx in 0..n {
            let ux = (cx + n - h) % n;
            out[cy * n + cx] = src[uy * n + ux];
        }
    }
    out
}

/// Centred k-space → centred image, with `1/n²` normalisation.
pub fn centred_ifft2(n: usize, kspace: &[Complex64]) -> Vec<Complex64> {
    let mut buf = centred_to_unshifted(n, kspace);
    ifft2(n, &mut buf);
    unshifted_to_centred(n, &buf)
}

/// Centred image → centred k-space, unnormalised.
pub fn centred_fft2(n: usize, image: &[Complex64]) -> Vec<Complex64> {
    let mut buf = centred_to_unshifted(n, image);
    fft2(n, &mut buf);
    unshifted_to_centred(n, &buf)
}
