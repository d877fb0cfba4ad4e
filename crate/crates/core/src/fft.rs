//! Thin wrappers around rustfft with a thread-local plan cache.
//!
//! Every window length in the hot path is fixed (256 or 512), so plans are
//! reused across calls instead of being rebuilt per window.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT.
pub fn forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place inverse FFT, scaled by 1/n so that `inverse(forward(x)) == x`.
pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(buf);
    });
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward FFT of a real series.
pub fn forward_real(series: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward(&mut buf);
    buf
}
