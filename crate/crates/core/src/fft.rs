//! Discrete Fourier transforms of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform. Any
//! other length is mapped onto a power-of-two circular convolution with
//! Bluestein's chirp substitution `nk = (n² + k² - (k - n)²) / 2`.

use std::f64::consts::PI;

pub use num_complex::Complex64 as Complex;

/// Forward transform `X[k] = Σ x[n] e^{-2πi nk/N}` (no normalisation).
pub fn dft(signal: &[Complex]) -> Vec<Complex> {
    transform(signal, false)
}

/// Inverse transform, normalised by `1/N` so that `idft(dft(x)) == x`.
pub fn idft(spectrum: &[Complex]) -> Vec<Complex> {
    let n = spectrum.len();
    let mut out = transform(spectrum, true);
    let inv = 1.0 / n as f64;
    for v in &mut out {
        *v = v.scale(inv);
    }
    out
}

/// Forward transform of a real signal.
pub fn dft_real(signal: &[f64]) -> Vec<Complex> {
    let buf: Vec<Complex> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    dft(&buf)
}

fn transform(input: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        radix2_in_place(&mut buf, inverse);
        buf
    } else {
        bluestein(input, inverse)
    }
}

fn radix2_in_place(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles computed directly per index rather than by repeated
        // multiplication, which drifts for long transforms.
        let twiddles: Vec<Complex> = (0..half)
            .map(|k| Complex::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(input: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = input.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };

    // n² mod 2n keeps the chirp argument small and exact for large n.
    let chirp: Vec<Complex> = (0..n)
        .map(|k| {
            let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            Complex::from_polar(1.0, sign * PI * k2 / n as f64)
        })
        .collect();

    let mut a = vec![Complex::ZERO; m];
    for k in 0..n {
        a[k] = input[k] * chirp[k];
    }
    let mut b = vec![Complex::ZERO; m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        let c = chirp[k].conj();
        b[k] = c;
        b[m - k] = c;
    }

    radix2_in_place(&mut a, false);
    radix2_in_place(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    radix2_in_place(&mut a, true);

    let inv_m = 1.0 / m as f64;
    (0..n).map(|k| (a[k] * chirp[k]).scale(inv_m)).collect()
}
