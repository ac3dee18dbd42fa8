//! Iterative radix-2 FFT on `Complex` buffers.
//!
//! Forward transform uses the `exp(-2 pi i j k / n)` kernel, unnormalized.

use alloc::vec::Vec;

use crate::math;
use crate::model::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed twiddles for one transform length.
#[derive(Debug, Clone)]
pub struct Radix2 {
    n: usize,
    twiddles: Vec<Complex>,
}

impl Radix2 {
    /// Panics if `n` is not a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -math::TAU * k as f64 / n as f64;
                Complex::new(math::cos(a), math::sin(a))
            })
            .collect();
        Self { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, buf: &mut [Complex], dir: Direction) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        let n = self.n;
        if n <= 1 {
            return;
        }
        bit_reverse(buf);
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if dir == Direction::Inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

fn bit_reverse(buf: &mut [Complex]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
}

/// One-shot forward transform.
pub fn fft(buf: &mut [Complex]) {
    Radix2::new(buf.len()).process(buf, Direction::Forward);
}

/// Power-of-two length at least `n`.
pub fn padded_len(n: usize) -> usize {
    n.max(1).next_power_of_two()
}
