//! Stationary Gaussian random fields with exponential autocorrelation.
//!
//! White noise on a regular grid is filtered with the circulant embedding of
//! `exp(-r/λ)`, so grid values carry the target covariance exactly up to the
//! torus wrap-around, which is pushed below `exp(-PAD)` by padding. Query
//! points are bilinearly interpolated and rescaled to unit variance.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Padding around the query bounding box, in decorrelation distances.
const PAD: f64 = 8.0;
/// Grid spacing, in decorrelation distances.
const SPACING: f64 = 1.0 / 8.0;
/// Largest grid built before the spacing is coarsened.
const MAX_CELLS: usize = 1 << 23;

/// Unit-variance field values at `positions` (m) with correlation
/// `exp(-Δ/λ)` between them.
pub fn correlated_field<R: Rng + ?Sized>(positions: &[[f64; 2]], lambda: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("decorrelation distance {lambda}")));
    }
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    if positions.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput("non-finite field position".into()));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in positions {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut h = lambda * SPACING;
    let dims = |h: f64| -> [usize; 2] {
        [0, 1].map(|k| (((hi[k] - lo[k]) + PAD * lambda) / h).ceil() as usize + 2).map(fft_size)
    };
    let mut n = dims(h);
    while n[0] * n[1] > MAX_CELLS {
        h *= 1.5;
        n = dims(h);
    }
    if h > lambda * SPACING {
        log::warn!("field grid coarsened to {:.3} m for λ = {lambda} m over the requested area", h);
    }
    let grid = Grid::new(n, h, lambda);
    let values = grid.realize(rng);
    let kernel_at = |dx: f64, dy: f64| (-(dx * dx + dy * dy).sqrt() / lambda).exp();

    Ok(positions
        .iter()
        .map(|p| {
            let gx = (p[0] - lo[0]) / h;
            let gy = (p[1] - lo[1]) / h;
            let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
            let (fx, fy) = (gx - ix as f64, gy - iy as f64);
            let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
            let off = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
            let v = w[0] * values[iy * n[0] + ix]
                + w[1] * values[iy * n[0] + ix + 1]
                + w[2] * values[(iy + 1) * n[0] + ix]
                + w[3] * values[(iy + 1) * n[0] + ix + 1];
            let mut var = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    var += w[a] * w[b] * kernel_at((off[a].0 - off[b].0) * h, (off[a].1 - off[b].1) * h);
                }
            }
            v / var.sqrt()
        })
        .collect())
}

/// Smallest 2^a·3^b ≥ n.
fn fft_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1;
    while p3 < best {
        let mut m = p3;
        while m < n {
            m *= 2;
        }
        best = best.min(m);
        p3 *= 3;
    }
    best
}

struct Grid {
    n: [usize; 2],
    /// Square root of the circulant eigenvalues, scaled for the inverse FFT.
    filter: Vec<f64>,
}

impl Grid {
    fn new(n: [usize; 2], h: f64, lambda: f64) -> Self {
        let [nx, ny] = n;
        let mut c: Vec<Complex<f64>> = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let dy = iy.min(ny - iy) as f64 * h;
            for ix in 0..nx {
                let dx = ix.min(nx - ix) as f64 * h;
                c.push(Complex::new((-(dx * dx + dy * dy).sqrt() / lambda).exp(), 0.0));
            }
        }
        fft2(&mut c, n, false);
        let total = (nx * ny) as f64;
        let eig: Vec<f64> = c.iter().map(|z| z.re.max(0.0)).collect();
        // Variance lost to clipped eigenvalues is restored by the rescale.
        let var = eig.iter().sum::<f64>() / total;
        let filter = eig.iter().map(|e| (e / var).sqrt() / total).collect();
        Self { n, filter }
    }

    fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let [nx, ny] = self.n;
        let mut w: Vec<Complex<f64>> = (0..nx * ny).map(|_| Complex::new(rng.sample(StandardNormal), 0.0)).collect();
        fft2(&mut w, self.n, false);
        for (z, f) in w.iter_mut().zip(&self.filter) {
            *z *= *f;
        }
        fft2(&mut w, self.n, true);
        w.iter().map(|z| z.re).collect()
    }
}

fn fft2(data: &mut [Complex<f64>], n: [usize; 2], inverse: bool) {
    let [nx, ny] = n;
    let mut planner = FftPlanner::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    row.process(data);
    let mut column = vec![Complex::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            column[iy] = data[iy * nx + ix];
        }
        col.process(&mut column);
        for iy in 0..ny {
            data[iy * nx + ix] = column[iy];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn pair_corr(sep: f64, lambda: f64, seed: u64) -> f64 {
        let mut r = rng::stream(seed, &[]);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        // pairs on a lattice 5λ apart, so neighbouring pairs are nearly independent
        for _ in 0..2 {
            let side = 50;
            let mut pos = Vec::with_capacity(2 * side * side);
            for k in 0..side * side {
                let x = (k % side) as f64 * 5.0 * lambda;
                let y = (k / side) as f64 * 5.0 * lambda;
                let a = r.random_range(0.0..std::f64::consts::TAU);
                pos.push([x, y]);
                pos.push([x + sep * a.cos(), y + sep * a.sin()]);
            }
            let v = correlated_field(&pos, lambda, &mut r).unwrap();
            for p in v.chunks(2) {
                sab += p[0] * p[1];
                saa += p[0] * p[0];
                sbb += p[1] * p[1];
            }
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn coincident_points_agree() {
        let v = correlated_field(&[[3.0, 4.0], [3.0, 4.0], [100.0, -20.0]], 50.0, &mut rng::stream(1, &[])).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn autocorrelation_matches_kernel() {
        let lambda = 20.0;
        for (sep, seed) in [(lambda / 2.0, 1), (lambda, 2), (2.0 * lambda, 3)] {
            let c = pair_corr(sep, lambda, seed);
            let want = (-sep / lambda).exp();
            assert!((c - want).abs() < 0.1, "sep {sep}: {c} vs {want}");
        }
        assert!(pair_corr(10.0 * lambda, lambda, 4).abs() < 0.1);
    }

    #[test]
    fn unit_variance() {
        let mut r = rng::stream(5, &[]);
        let pos: Vec<[f64; 2]> = (0..20_000).map(|_| [r.random_range(0.0..5000.0), r.random_range(0.0..5000.0)]).collect();
        let mut v = Vec::new();
        for _ in 0..4 {
            v.extend(correlated_field(&pos, 30.0, &mut r).unwrap());
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn fft_sizes() {
        assert_eq!(fft_size(100), 108);
        assert_eq!(fft_size(64), 64);
        assert_eq!(fft_size(1), 1);
        assert!(correlated_field(&[[0.0, 0.0]], 0.0, &mut rng::stream(1, &[])).is_err());
    }
}
