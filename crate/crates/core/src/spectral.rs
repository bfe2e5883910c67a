//! 2-D FFT helpers over row-major complex buffers.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place 2-D DFT of a `w`x`h` row-major buffer. The inverse is scaled by
/// `1 / (w h)` so `fft2(fft2(x), inverse)` returns `x`.
pub fn fft2(buf: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    assert_eq!(buf.len(), w * h);
    let mut planner = FftPlanner::<f64>::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for line in buf.chunks_exact_mut(w) {
        row.process(line);
    }
    let mut column = vec![Complex64::default(); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    if inverse {
        let s = 1.0 / (w * h) as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

pub fn to_complex(data: &[f64]) -> Vec<Complex64> {
    data.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Smallest `n >= m` whose only prime factors are 2, 3 and 5.
pub fn next_fast_len(m: usize) -> usize {
    let mut n = m.max(1);
    loop {
        let mut k = n;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return n;
        }
        n += 1;
    }
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}
