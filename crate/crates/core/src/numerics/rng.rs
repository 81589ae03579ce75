//! Seeded random stream and the distribution sampler.
//!
//! `RngStream` wraps ChaCha8 so that identical (seed, call sequence) pairs
//! reproduce identical draws bit-for-bit. The gamma/beta transforms are
//! implemented here rather than pulled from a distributions crate so the
//! draw sequence is pinned by this crate alone: Marsaglia-Tsang for gamma
//! (with the shape<1 boost), beta as a ratio of gammas.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::matrix::Matrix;
use super::{NumericsError, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            counter: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of primitive u64 draws made so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Independent substream for a labeled unit of work (replicate, grid
    /// cell, epoch). Mixing is splitmix64 over (seed, label), so derived
    /// streams do not depend on how much the parent has been consumed.
    pub fn derive(&self, label: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(label)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1].
    #[inline]
    fn uniform_open(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer uniform on [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection-free modulo is fine here: n is tiny next to 2^64.
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller. Consumes exactly two u64 draws.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_scaled(&mut self, mu: f64, sigma: f64) -> f64 {
        mu + sigma * self.normal()
    }

    /// Gamma(shape, scale) via Marsaglia-Tsang, boosted for shape < 1.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        debug_assert!(shape > 0.0 && scale > 0.0);
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0, 1.0);
            let u = self.uniform_open();
            return g * u.powf(1.0 / shape) * scale;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_open();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v * scale;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v * scale;
            }
        }
    }

    /// Beta(a, b) as Gamma(a,1) / (Gamma(a,1) + Gamma(b,1)).
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        debug_assert!(a > 0.0 && b > 0.0);
        let x = self.gamma(a, 1.0);
        let y = self.gamma(b, 1.0);
        x / (x + y)
    }

    /// 1.0 with probability p, else 0.0.
    pub fn bernoulli(&mut self, p: f64) -> f64 {
        if self.uniform() < p {
            1.0
        } else {
            0.0
        }
    }

    /// Index draw proportional to `weights`.
    pub fn multinomial(&mut self, weights: &[f64]) -> Result<usize> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w.is_nan() || w < 0.0 || !w.is_finite()) {
            return Err(NumericsError::DegenerateWeights(
                "negative or non-finite weight".into(),
            ));
        }
        if total.is_nan() || total <= 0.0 || !total.is_finite() {
            return Err(NumericsError::DegenerateWeights(format!(
                "weights sum to {total}"
            )));
        }
        let r = self.uniform() * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if r < acc {
                return Ok(i);
            }
        }
        Ok(weights.len() - 1)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Sample `count` distinct indices from [0, n) (count <= n).
    pub fn sample_without_replacement(&mut self, n: usize, count: usize) -> Vec<usize> {
        debug_assert!(count <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx.truncate(count);
        idx
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Distribution families supported by [`sample_distribution`]. Multinomial
/// draws are category indices stored as floats.
#[derive(Debug, Clone)]
pub enum Distribution {
    Normal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
    Beta { a: f64, b: f64 },
    Bernoulli { p: f64 },
    Multinomial { weights: Vec<f64> },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        let fail = |distribution: &'static str, reason: String| {
            Err(NumericsError::InvalidParameter {
                distribution,
                reason,
            })
        };
        match self {
            Distribution::Normal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    return fail("normal", format!("mu={mu}, sigma={sigma}"));
                }
            }
            Distribution::Gamma { shape, scale } => {
                if *shape <= 0.0 || *scale <= 0.0 || !shape.is_finite() || !scale.is_finite() || shape.is_nan() || scale.is_nan() {
                    return fail("gamma", format!("shape={shape}, scale={scale}"));
                }
            }
            Distribution::Beta { a, b } => {
                if *a <= 0.0 || *b <= 0.0 || !a.is_finite() || !b.is_finite() || a.is_nan() || b.is_nan() {
                    return fail("beta", format!("a={a}, b={b}"));
                }
            }
            Distribution::Bernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return fail("bernoulli", format!("p={p}"));
                }
            }
            Distribution::Multinomial { weights } => {
                if weights.is_empty() {
                    return Err(NumericsError::DegenerateWeights("no weights".into()));
                }
                if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                    return Err(NumericsError::DegenerateWeights(
                        "negative or non-finite weight".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if total.is_nan() || total <= 0.0 {
                    return Err(NumericsError::DegenerateWeights(format!(
                        "weights sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Matrix of i.i.d. draws from the given distribution.
pub fn sample_distribution(
    kind: &Distribution,
    rows: usize,
    cols: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    kind.validate()?;
    let mut out = Matrix::zeros(rows, cols);
    for v in out.data_mut() {
        *v = match kind {
            Distribution::Normal { mu, sigma } => rng.normal_scaled(*mu, *sigma),
            Distribution::Gamma { shape, scale } => rng.gamma(*shape, *scale),
            Distribution::Beta { a, b } => rng.beta(*a, *b),
            Distribution::Bernoulli { p } => rng.bernoulli(*p),
            Distribution::Multinomial { weights } => rng.multinomial(weights)? as f64,
        };
    }
    out.check_finite("sample_distribution")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let ga = a.gamma(0.7, 2.0);
        let gb = b.gamma(0.7, 2.0);
        assert_eq!(ga.to_bits(), gb.to_bits());
        assert_eq!(a.counter(), b.counter());
    }

    #[test]
    fn derived_streams_differ() {
        let root = RngStream::new(7);
        let mut a = root.derive(0);
        let mut b = root.derive(1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn beta_mean_matches_analytic() {
        // E[Beta(1,10)] = 1/11.
        let mut rng = RngStream::new(1);
        let n = 1_000_000;
        let m = sample_distribution(&Distribution::Beta { a: 1.0, b: 10.0 }, n, 1, &mut rng)
            .unwrap();
        let mean = m.mean();
        assert!(
            (mean - 1.0 / 11.0).abs() < 0.002,
            "beta(1,10) mean {mean} too far from {}",
            1.0 / 11.0
        );
    }

    #[test]
    fn bernoulli_one_is_all_ones() {
        let mut rng = RngStream::new(3);
        let m =
            sample_distribution(&Distribution::Bernoulli { p: 1.0 }, 17, 5, &mut rng).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gamma_variance_matches_analytic() {
        // Var[Gamma(1,1)] = shape * scale^2 = 1.
        let mut rng = RngStream::new(9);
        let n = 1_000_000;
        let m = sample_distribution(
            &Distribution::Gamma {
                shape: 1.0,
                scale: 1.0,
            },
            n,
            1,
            &mut rng,
        )
        .unwrap();
        let mean = m.mean();
        let var = m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.01, "gamma(1,1) variance {var}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = RngStream::new(0);
        assert!(sample_distribution(
            &Distribution::Gamma {
                shape: -1.0,
                scale: 1.0
            },
            1,
            1,
            &mut rng
        )
        .is_err());
        assert!(sample_distribution(&Distribution::Bernoulli { p: 1.5 }, 1, 1, &mut rng).is_err());
        assert!(matches!(
            sample_distribution(
                &Distribution::Multinomial {
                    weights: vec![0.0, 0.0]
                },
                1,
                1,
                &mut rng
            ),
            Err(NumericsError::DegenerateWeights(_))
        ));
    }

    #[test]
    fn multinomial_returns_weighted_indices() {
        let mut rng = RngStream::new(5);
        let weights = vec![0.0, 1.0, 3.0];
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[rng.multinomial(&weights).unwrap()] += 1;
        }
        assert_eq!(counts[0], 0);
        let frac1 = counts[1] as f64 / 40_000.0;
        assert!((frac1 - 0.25).abs() < 0.02, "index-1 fraction {frac1}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStream::new(11);
        let n = 200_000;
        let m = sample_distribution(
            &Distribution::Normal {
                mu: 2.0,
                sigma: 0.5,
            },
            n,
            1,
            &mut rng,
        )
        .unwrap();
        let mean = m.mean();
        let sd = (m.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 0.01);
        assert!((sd - 0.5).abs() < 0.01);
    }
}
