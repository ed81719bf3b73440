//! Truncated, renormalized Gaussian kernel smoothing.
//!
//! The estimate at `t_i` is `sum_j w_ij v_j / sum_j w_ij` with
//! `w_ij = exp(-(t_j - t_i)^2 / 2b^2)` over `|t_j - t_i| <= 4b`. Renormalizing
//! per point keeps the estimate unbiased at series edges and across gaps.
//!
//! Series sampled on a regular time grid (possibly with gaps) are smoothed by
//! FFT convolution once the kernel is wide; the direct sum handles irregular
//! sampling and narrow kernels.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Kernel half-width in bandwidths.
pub const KERNEL_SUPPORT: f64 = 4.0;
/// Kernels up to this many taps use the direct sum.
const DIRECT_MAX_TAPS: usize = 64;
/// Gridding is abandoned when gaps would inflate the grid beyond this factor.
const MAX_GRID_INFLATION: usize = 4;

struct Gridded {
    dt: f64,
    len: usize,
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// FFT of the mean-removed values placed on the grid (zeros in gaps).
    spec_values: Vec<Complex<f64>>,
    /// FFT of the occupancy mask.
    spec_mask: Vec<Complex<f64>>,
    slots: Vec<usize>,
}

/// A series prepared for smoothing at many bandwidths.
pub struct KernelSmoother {
    times: Vec<f64>,
    values: Vec<f64>,
    mean: f64,
    gridded: Option<Gridded>,
}

impl KernelSmoother {
    /// `times` must be strictly increasing and the same length as `values`.
    pub fn new(times: &[f64], values: &[f64]) -> Self {
        assert_eq!(times.len(), values.len(), "times/values length mismatch");
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        let gridded = grid_layout(times).map(|(dt, slots, len)| {
            let n_fft = (2 * len).next_power_of_two();
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(n_fft);
            let ifft = planner.plan_fft_inverse(n_fft);
            let mut spec_values = vec![Complex::new(0.0, 0.0); n_fft];
            let mut spec_mask = vec![Complex::new(0.0, 0.0); n_fft];
            for (&slot, &v) in slots.iter().zip(values) {
                spec_values[slot].re = v - mean;
                spec_mask[slot].re = 1.0;
            }
            fft.process(&mut spec_values);
            fft.process(&mut spec_mask);
            Gridded {
                dt,
                len,
                n_fft,
                fft,
                ifft,
                spec_values,
                spec_mask,
                slots,
            }
        });
        Self {
            times: times.to_vec(),
            values: values.to_vec(),
            mean,
            gridded,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_gridded(&self) -> bool {
        self.gridded.is_some()
    }

    /// Smoothed series at bandwidth `b` (seconds).
    pub fn smooth(&self, b: f64) -> Vec<f64> {
        assert!(b > 0.0, "bandwidth must be positive");
        match &self.gridded {
            Some(g) => {
                let half = half_width_taps(b, g.dt).min(g.len - 1);
                if 2 * half + 1 <= DIRECT_MAX_TAPS {
                    self.smooth_direct(b)
                } else {
                    self.smooth_fft(g, b, half)
                }
            }
            None => self.smooth_direct(b),
        }
    }

    /// Reference implementation: explicit windowed sum.
    pub fn smooth_direct(&self, b: f64) -> Vec<f64> {
        let reach = KERNEL_SUPPORT * b;
        let inv = 1.0 / (2.0 * b * b);
        let n = self.times.len();
        let mut lo = 0;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let t = self.times[i];
            while self.times[lo] < t - reach {
                lo += 1;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for j in lo..n {
                let d = self.times[j] - t;
                if d > reach {
                    break;
                }
                let w = (-(d * d) * inv).exp();
                num += w * (self.values[j] - self.mean);
                den += w;
            }
            out.push(self.mean + num / den);
        }
        out
    }

    fn smooth_fft(&self, g: &Gridded, b: f64, half: usize) -> Vec<f64> {
        let inv = 1.0 / (2.0 * b * b);
        let mut kernel = vec![Complex::new(0.0, 0.0); g.n_fft];
        kernel[0].re = 1.0;
        for m in 1..=half {
            let d = m as f64 * g.dt;
            let w = (-(d * d) * inv).exp();
            kernel[m].re = w;
            kernel[g.n_fft - m].re = w;
        }
        g.fft.process(&mut kernel);
        let mut num: Vec<Complex<f64>> = kernel.iter().zip(&g.spec_values).map(|(k, v)| k * v).collect();
        let mut den: Vec<Complex<f64>> = kernel.iter().zip(&g.spec_mask).map(|(k, m)| k * m).collect();
        g.ifft.process(&mut num);
        g.ifft.process(&mut den);
        g.slots
            .iter()
            .map(|&s| self.mean + num[s].re / den[s].re)
            .collect()
    }
}

fn half_width_taps(b: f64, dt: f64) -> usize {
    let h = (KERNEL_SUPPORT * b / dt * (1.0 + 1e-12)).floor();
    if h.is_finite() && h < usize::MAX as f64 {
        h as usize
    } else {
        usize::MAX
    }
}

/// Slot of each sample on a regular grid of spacing `dt`, if the times lie on one.
fn grid_layout(times: &[f64]) -> Option<(f64, Vec<usize>, usize)> {
    if times.len() < 2 {
        return None;
    }
    let dt = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if !(dt > 0.0 && dt.is_finite()) {
        return None;
    }
    let t0 = times[0];
    let mut slots = Vec::with_capacity(times.len());
    for &t in times {
        let x = (t - t0) / dt;
        let k = x.round();
        if (x - k).abs() > 1e-6 {
            return None;
        }
        slots.push(k as usize);
    }
    let len = slots.last().copied()? + 1;
    if len > MAX_GRID_INFLATION * times.len() {
        return None;
    }
    Some((dt, slots, len))
}

/// Unbiased (M - 1) sample variance.
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_is_preserved() {
        let t: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let v = vec![7.25; 500];
        let s = KernelSmoother::new(&t, &v);
        for b in [0.3, 5.0, 200.0] {
            assert!(s.smooth(b).iter().all(|x| (x - 7.25).abs() < 1e-9));
        }
    }

    #[test]
    fn fft_path_matches_direct_with_gaps() {
        let mut t: Vec<f64> = (0..3000).map(|i| i as f64).collect();
        t.retain(|x| (*x as usize) % 17 != 3);
        let v: Vec<f64> = noise(t.len(), 1)
            .iter()
            .zip(&t)
            .map(|(n, t)| 100.0 + n + (t / 300.0).sin())
            .collect();
        let s = KernelSmoother::new(&t, &v);
        assert!(s.is_gridded());
        for b in [20.0, 150.0, 5000.0] {
            let fast = s.smooth(b);
            let slow = s.smooth_direct(b);
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "b={b}: {err}");
        }
    }

    #[test]
    fn irregular_sampling_uses_direct() {
        let t = [0.0, 0.7, 1.1, 2.9, 3.0];
        let s = KernelSmoother::new(&t, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(!s.is_gridded());
        assert_eq!(s.smooth(1.0).len(), 5);
    }

    #[test]
    fn slow_sinusoid_tracked() {
        let t: Vec<f64> = (0..20_000).map(|i| i as f64).collect();
        let period = 3600.0;
        let w = 2.0 * std::f64::consts::PI / period;
        let v: Vec<f64> = t.iter().map(|t| (w * t).sin()).collect();
        let s = KernelSmoother::new(&t, &v).smooth(10.0);
        // interior points: continuous-kernel attenuation exp(-(w b)^2 / 2) ~ 0.9998
        let worst = (5000..15_000)
            .map(|i| (s[i] - v[i]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn white_noise_low_pass() {
        let t: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let v = noise(5000, 9);
        let s = KernelSmoother::new(&t, &v).smooth(50.0);
        let ratio = sample_variance(&s).unwrap() / sample_variance(&v).unwrap();
        assert!(ratio < 0.05, "{ratio}");
    }

    #[test]
    fn variance_examples() {
        assert_eq!(sample_variance(&[3.0, 3.0, 3.0]), Some(0.0));
        assert_eq!(sample_variance(&[1.0, 3.0]), Some(2.0));
        assert_eq!(sample_variance(&[1.0]), None);
    }
}
