//! Square 2-D FFTs on row-major buffers, backed by `rustfft`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    /// `e^{-2πi m·x}` kernel, unnormalized.
    Forward,
    /// `e^{+2πi m·x}` kernel, unnormalized.
    Inverse,
}

/// Smallest integer `>= min` whose only prime factors are 2, 3 and 5.
pub fn fft_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut k = n;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return n;
        }
        n += 1;
    }
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

fn transpose_square(buf: &mut [Complex64], g: usize) {
    const B: usize = 32;
    for bi in (0..g).step_by(B) {
        for bj in (bi..g).step_by(B) {
            for i in bi..(bi + B).min(g) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(g) {
                    buf.swap(i * g + j, j * g + i);
                }
            }
        }
    }
}

/// In-place 2-D transform of a `g x g` row-major buffer.
pub(crate) fn fft2(buf: &mut [Complex64], g: usize, dir: Direction) {
    debug_assert_eq!(buf.len(), g * g);
    let fft = plan(g, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, g);
    fft.process_with_scratch(buf, &mut scratch);
    transpose_square(buf, g);
}
