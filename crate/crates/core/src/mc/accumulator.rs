use alloc::vec::Vec;

/// Single-pass mean / covariance accumulator over a fixed number of
/// statistics (Welford's recurrence, with Chan et al.'s pairwise merge).
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: Vec<f64>,
    // Upper triangle (including the diagonal) of the co-moment matrix,
    // row-major.
    comoment: Vec<f64>,
}

fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl Accumulator {
    pub fn new(dim: usize) -> Accumulator {
        Accumulator { count: 0, mean: alloc::vec![0.0; dim], comoment: alloc::vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    #[allow(clippy::needless_range_loop)]
    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        let dim = self.dim();
        self.count += 1;
        let n = self.count as f64;
        // delta before the mean update, residual after it
        let mut delta = [0.0f64; 16];
        let mut delta_vec;
        let delta: &mut [f64] = if dim <= delta.len() {
            &mut delta[..dim]
        } else {
            delta_vec = alloc::vec![0.0; dim];
            &mut delta_vec
        };
        for i in 0..dim {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                self.comoment[k] += delta[i] * (x[j] - self.mean[j]);
                k += 1;
            }
        }
    }

    /// Combines two accumulators; exact in exact arithmetic.
    #[allow(clippy::needless_range_loop)]
    pub fn merge(&mut self, other: &Accumulator) {
        assert_eq!(self.dim(), other.dim(), "accumulator dimensions differ");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let dim = self.dim();
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta: Vec<f64> = (0..dim).map(|i| other.mean[i] - self.mean[i]).collect();
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                self.comoment[k] += other.comoment[k] + delta[i] * delta[j] * na * nb / n;
                k += 1;
            }
        }
        for i in 0..dim {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Unbiased sample covariance; 0 with fewer than two observations.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[tri_index(self.dim(), i, j)] / (self.count - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i).max(0.0)
    }

    /// Standard error of the mean of statistic `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        libm::sqrt(self.variance(i) / self.count as f64)
    }

    /// Standard error of `sum_k g_k * mean_k` by the delta method.
    pub fn linear_std_error(&self, gradient: &[(usize, f64)]) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let mut var = 0.0;
        for &(i, gi) in gradient {
            for &(j, gj) in gradient {
                var += gi * gj * self.covariance(i, j);
            }
        }
        libm::sqrt(var.max(0.0) / self.count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(data: &[[f64; 2]]) -> (f64, f64, f64, f64) {
        let n = data.len() as f64;
        let ma = data.iter().map(|r| r[0]).sum::<f64>() / n;
        let mb = data.iter().map(|r| r[1]).sum::<f64>() / n;
        let cab = data.iter().map(|r| (r[0] - ma) * (r[1] - mb)).sum::<f64>() / (n - 1.0);
        let va = data.iter().map(|r| (r[0] - ma).powi(2)).sum::<f64>() / (n - 1.0);
        (ma, mb, va, cab)
    }

    #[test]
    fn matches_two_pass_formulas() {
        let data: Vec<[f64; 2]> = (0..100)
            .map(|i| {
                let t = i as f64;
                [1e6 + (t * 0.37).sin(), t * 0.5 + (t * 1.3).cos()]
            })
            .collect();
        let mut acc = Accumulator::new(2);
        for r in &data {
            acc.push(r);
        }
        let (ma, mb, va, cab) = naive(&data);
        assert!((acc.mean(0) - ma).abs() < 1e-9);
        assert!((acc.mean(1) - mb).abs() < 1e-12);
        assert!((acc.variance(0) - va).abs() < 1e-9);
        assert!((acc.covariance(0, 1) - cab).abs() < 1e-8);
        assert_eq!(acc.covariance(0, 1), acc.covariance(1, 0));
    }

    #[test]
    fn constant_stream_has_exactly_zero_variance() {
        let mut a = Accumulator::new(1);
        let mut b = Accumulator::new(1);
        for _ in 0..1000 {
            a.push(&[2.0]);
            b.push(&[2.0]);
        }
        a.merge(&b);
        assert_eq!(a.mean(0), 2.0);
        assert_eq!(a.variance(0), 0.0);
        assert_eq!(a.std_error(0), 0.0);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut a = Accumulator::new(3);
        a.push(&[1.0, 2.0, 3.0]);
        a.push(&[2.0, 0.0, 1.0]);
        let before = a.clone();
        a.merge(&Accumulator::new(3));
        assert_eq!(a, before);
        let mut e = Accumulator::new(3);
        e.merge(&before);
        assert_eq!(e, before);
    }

    #[test]
    fn wide_accumulators_fall_back_to_heap_scratch() {
        let mut a = Accumulator::new(20);
        let row: Vec<f64> = (0..20).map(|i| i as f64).collect();
        a.push(&row);
        a.push(&row);
        assert_eq!(a.mean(19), 19.0);
        assert_eq!(a.variance(19), 0.0);
    }
}
