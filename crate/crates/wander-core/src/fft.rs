//! In-place radix-2 FFT, enough for boundary-correspondence work and
//! grid convolutions.

use crate::C64;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;

/// Forward transform `X_k = Σ x_n e^{-2πi nk/N}`; `N` must be a power of two.
pub fn fft(buf: &mut [C64]) {
    transform(buf, -1.0);
}

/// Inverse transform including the `1/N` factor.
pub fn ifft(buf: &mut [C64]) {
    transform(buf, 1.0);
    let scale = 1.0 / buf.len() as f64;
    for x in buf.iter_mut() {
        *x *= scale;
    }
}

fn transform(buf: &mut [C64], sign: f64) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n < 2 {
        return;
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles computed directly rather than by recurrence to keep the
        // error flat for long transforms.
        let tw: Vec<C64> = (0..half)
            .map(|k| {
                let a = ang * k as f64;
                C64::new(a.cos(), a.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = buf[start + k];
                let v = buf[start + k + half] * tw[k];
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Two-dimensional transform of a row-major `nx × ny` array (both powers of two).
pub fn fft2(buf: &mut [C64], nx: usize, ny: usize, inverse: bool) {
    let mut col = alloc::vec![C64::new(0.0, 0.0); ny];
    for j in 0..ny {
        let row = &mut buf[j * nx..(j + 1) * nx];
        if inverse {
            ifft(row)
        } else {
            fft(row)
        }
    }
    for i in 0..nx {
        for j in 0..ny {
            col[j] = buf[j * nx + i];
        }
        if inverse {
            ifft(&mut col)
        } else {
            fft(&mut col)
        }
        for j in 0..ny {
            buf[j * nx + i] = col[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn roundtrip_and_delta() {
        let mut x: Vec<C64> = (0..16).map(|k| C64::new(k as f64, -(k as f64) * 0.5)).collect();
        let orig = x.clone();
        fft(&mut x);
        ifft(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut d = vec![C64::new(0.0, 0.0); 8];
        d[1] = C64::new(1.0, 0.0);
        fft(&mut d);
        for (k, v) in d.iter().enumerate() {
            let a = -2.0 * PI * k as f64 / 8.0;
            assert!((v - C64::new(a.cos(), a.sin())).norm() < 1e-14);
        }
    }
}
