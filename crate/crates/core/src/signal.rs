//! Small sequence helpers shared by the modem, channel and equalizer code.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::C64;

/// Full linear convolution, output length `a.len() + b.len() - 1`.
pub fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Draws one circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

/// Fills a vector with i.i.d. CN(0, variance) samples.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng, variance)).collect()
}

/// Sum of squared magnitudes.
pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `e^{j 2 pi num / den}`.
#[inline]
pub fn twiddle(num: i64, den: usize) -> C64 {
    let den = den as i64;
    let r = num.rem_euclid(den) as f64 / den as f64;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * r)
}

/// `j^k` for any integer `k`.
#[inline]
pub fn j_pow(k: i64) -> C64 {
    match k.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolve_matches_hand_result() {
        let a = [C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let b = [C64::new(0.0, 1.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        let c = convolve(&a, &b);
        let want = [
            C64::new(0.0, 1.0),
            C64::new(1.0, 2.0),
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
        ];
        assert_eq!(c, want);
    }

    #[test]
    fn j_pow_cycles() {
        assert_eq!(j_pow(-1), C64::new(0.0, -1.0));
        assert_eq!(j_pow(5), C64::new(0.0, 1.0));
        assert_eq!(j_pow(2), C64::new(-1.0, 0.0));
    }

    #[test]
    fn twiddle_wraps_negative() {
        let a = twiddle(-1, 4);
        assert!((a - C64::new(0.0, -1.0)).norm() < 1e-15);
    }
}
