//! Weakly-paired two-modality dataset simulator.
//!
//! Cells live in a latent space split into shared and per-modality unique
//! dimensions. Perturbations shift targeted latent dimensions (shared
//! shifts hit both modalities with one effect size and one per-cell
//! penetrance; modality-specific shifts are drawn independently), and each
//! modality observes an affine projection of its noisy latents with
//! per-feature scaling. Rows are then shuffled independently per modality
//! so row order carries no pairing hint; the truth structure retains the
//! permutations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::matrix::Matrix;
use crate::numerics::rng::RngStream;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unsupported shared-proportion setting {0}; choose 100, 80, or 50")]
    UnsupportedSetting(u32),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Shared latent dimensions.
    pub d_s: usize,
    /// Unique latent dimensions per modality.
    pub d_u: usize,
    /// Number of perturbations (conditions beyond the control).
    pub n_perturbations: usize,
    pub cells_per_condition: usize,
    /// Observed feature counts.
    pub p_x: usize,
    pub p_y: usize,
    /// Latent signal strength.
    pub scale: f64,
    /// Signal-to-noise ratio; the latent noise is scaled by scale/snr.
    pub snr: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            d_s: 10,
            d_u: 0,
            n_perturbations: 9,
            cells_per_condition: 100,
            p_x: 1000,
            p_y: 500,
            scale: 0.1,
            snr: 0.2,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_s + self.d_u == 0 {
            return Err(SimError::InvalidConfig("zero latent dimensions".into()));
        }
        if self.n_perturbations > 0 && self.d_s == 0 {
            return Err(SimError::InvalidConfig(
                "shared perturbations require d_s >= 1".into(),
            ));
        }
        if self.cells_per_condition == 0 {
            return Err(SimError::InvalidConfig(
                "cells_per_condition must be >= 1".into(),
            ));
        }
        if self.p_x == 0 || self.p_y == 0 {
            return Err(SimError::InvalidConfig("feature counts must be >= 1".into()));
        }
        if self.scale.is_nan() || self.scale <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "scale {} must be > 0",
                self.scale
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "snr {} must be > 0",
                self.snr
            )));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.d_s + self.d_u
    }

    pub fn n_conditions(&self) -> usize {
        self.n_perturbations + 1
    }

    pub fn n_cells(&self) -> usize {
        self.n_conditions() * self.cells_per_condition
    }

    /// Condition index per cell in block order: cells grouped by
    /// condition, condition 0 first (the control).
    pub fn block_labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n_cells());
        for c in 0..self.n_conditions() {
            labels.extend(std::iter::repeat_n(c, self.cells_per_condition));
        }
        labels
    }
}

/// Standard shared-proportion settings: 100% (10 shared, 0 unique),
/// 80% (8 shared, 2 unique per modality), 50% (5 shared, 5 unique).
pub fn make_setting(proportion: u32, seed: u64) -> Result<SimConfig> {
    let (d_s, d_u) = match proportion {
        100 => (10, 0),
        80 => (8, 2),
        50 => (5, 5),
        other => return Err(SimError::UnsupportedSetting(other)),
    };
    Ok(SimConfig {
        d_s,
        d_u,
        seed,
        ..SimConfig::default()
    })
}

#[derive(Debug, Clone)]
pub struct Latents {
    pub z: Matrix,
    pub u_x: Matrix,
    pub u_y: Matrix,
    pub v_x: Matrix,
    pub v_y: Matrix,
}

/// Shared and modality-specific latents, concatenated as V = [Z || U].
pub fn generate_latents(config: &SimConfig, rng: &mut RngStream) -> Result<Latents> {
    config.validate()?;
    let n = config.n_cells();
    let gauss = |rng: &mut RngStream, rows: usize, cols: usize, sd: f64| {
        Matrix::from_fn(rows, cols, |_, _| rng.normal() * sd)
    };
    let z = gauss(rng, n, config.d_s, config.scale);
    let u_x = gauss(rng, n, config.d_u, config.scale);
    let u_y = gauss(rng, n, config.d_u, config.scale);
    let v_x = z.concat_cols(&u_x)?;
    let v_y = z.concat_cols(&u_y)?;
    Ok(Latents {
        z,
        u_x,
        u_y,
        v_x,
        v_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectKind {
    Shared,
    ModalityX,
    ModalityY,
}

/// One perturbation effect: which condition, which latent dimension, the
/// signed effect size, and the per-cell penetrance draws for that
/// condition's block.
#[derive(Debug, Clone)]
pub struct PerturbationEffect {
    pub condition: usize,
    pub kind: EffectKind,
    pub target_dim: usize,
    pub effect_size: f64,
    pub penetrance: Vec<f64>,
}

/// Magnitude floor of 3 on a Gamma(1,1) draw, with a random sign.
fn draw_effect_size(rng: &mut RngStream) -> f64 {
    let magnitude = rng.gamma(1.0, 1.0).max(3.0);
    let sign = 2.0 * rng.bernoulli(0.5) - 1.0;
    sign * magnitude
}

/// Shift targeted latent dimensions of perturbed conditions in place.
/// Cells must be in block order with condition 0 as the untouched
/// control. Shared shifts add the same effect x penetrance to both
/// modalities; modality-specific shifts (skipped when d_u = 0) are drawn
/// independently per modality.
pub fn apply_perturbations(
    v_x: &mut Matrix,
    v_y: &mut Matrix,
    config: &SimConfig,
    rng: &mut RngStream,
) -> Result<Vec<PerturbationEffect>> {
    config.validate()?;
    let cells = config.cells_per_condition;
    let mut effects = Vec::new();
    for pert in 1..=config.n_perturbations {
        let block = pert * cells..(pert + 1) * cells;

        let t_s = (pert - 1) % config.d_s;
        let e_s = draw_effect_size(rng);
        let mut q_s = Vec::with_capacity(cells);
        for i in block.clone() {
            let q = rng.beta(1.0, 10.0);
            q_s.push(q);
            v_x.row_mut(i)[t_s] += e_s * q;
            v_y.row_mut(i)[t_s] += e_s * q;
        }
        effects.push(PerturbationEffect {
            condition: pert,
            kind: EffectKind::Shared,
            target_dim: t_s,
            effect_size: e_s,
            penetrance: q_s,
        });

        if config.d_u == 0 {
            log::debug!(
                "condition {pert}: no unique dimensions, skipping modality-specific perturbation"
            );
            continue;
        }
        let t_u = ((pert - 1) % config.d_u) + config.d_s;
        for (kind, v) in [
            (EffectKind::ModalityX, &mut *v_x),
            (EffectKind::ModalityY, &mut *v_y),
        ] {
            let e_u = draw_effect_size(rng);
            let mut q_u = Vec::with_capacity(cells);
            for i in block.clone() {
                let q = rng.beta(1.0, 10.0);
                q_u.push(q);
                v.row_mut(i)[t_u] += e_u * q;
            }
            effects.push(PerturbationEffect {
                condition: pert,
                kind,
                target_dim: t_u,
                effect_size: e_u,
                penetrance: q_u,
            });
        }
    }
    Ok(effects)
}

/// Projection and noise parameters for one modality.
#[derive(Debug, Clone)]
pub struct ModalityProjection {
    /// d x p loading matrix, N(0,1) entries.
    pub loading: Matrix,
    /// Per-feature bias, N(0,1).
    pub bias: Vec<f64>,
    /// Per-feature positive scaling, Gamma(1,1).
    pub scaling: Vec<f64>,
    /// Per-latent-dimension noise mean, N(0,1).
    pub noise_mean: Vec<f64>,
    /// Per-latent-dimension noise sd, exp(-3 + N(0,1)).
    pub noise_sd: Vec<f64>,
}

impl ModalityProjection {
    fn draw(d: usize, p: usize, rng: &mut RngStream) -> Self {
        ModalityProjection {
            loading: Matrix::from_fn(d, p, |_, _| rng.normal()),
            bias: (0..p).map(|_| rng.normal()).collect(),
            scaling: (0..p).map(|_| rng.gamma(1.0, 1.0)).collect(),
            noise_mean: (0..d).map(|_| rng.normal()).collect(),
            noise_sd: (0..d).map(|_| (-3.0 + rng.normal()).exp()).collect(),
        }
    }

    /// X = ((V + xi) A + b) (x) s with xi ~ N(mu_j, sigma_j^2) * noise_mult.
    fn observe(&self, v: &Matrix, noise_mult: f64, rng: &mut RngStream) -> Result<Matrix> {
        let mut noisy = v.clone();
        for i in 0..noisy.rows() {
            let row = noisy.row_mut(i);
            for (j, val) in row.iter_mut().enumerate() {
                *val += rng.normal_scaled(self.noise_mean[j], self.noise_sd[j]) * noise_mult;
            }
        }
        let mut obs = noisy.matmul(&self.loading)?;
        for i in 0..obs.rows() {
            let row = obs.row_mut(i);
            for (j, val) in row.iter_mut().enumerate() {
                *val = (*val + self.bias[j]) * self.scaling[j];
            }
        }
        Ok(obs)
    }

    /// Noiseless projection from stored parameters, for residual checks.
    pub fn project_noiseless(&self, v: &Matrix) -> Result<Matrix> {
        let mut obs = v.matmul(&self.loading)?;
        for i in 0..obs.rows() {
            let row = obs.row_mut(i);
            for (j, val) in row.iter_mut().enumerate() {
                *val = (*val + self.bias[j]) * self.scaling[j];
            }
        }
        Ok(obs)
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionRegistry {
    pub x: ModalityProjection,
    pub y: ModalityProjection,
    pub noise_multiplier: f64,
}

/// Ground truth retained by the simulator: final (perturbed) latents and
/// labels in block order, the per-modality row shuffles, and the effect
/// registry. In block order, row i of modality X and row i of modality Y
/// are the true pair.
#[derive(Debug, Clone)]
pub struct SimTruth {
    pub v_x: Matrix,
    pub v_y: Matrix,
    /// Condition per cell, in block order.
    pub labels: Vec<usize>,
    /// perm_x[row] = block-order cell held at this shuffled X row.
    pub perm_x: Vec<usize>,
    pub perm_y: Vec<usize>,
    pub effects: Vec<PerturbationEffect>,
}

impl SimTruth {
    /// For each shuffled X row, the shuffled Y row of its true pair.
    pub fn pair_x_to_y(&self) -> Vec<usize> {
        let n = self.perm_y.len();
        let mut inv_y = vec![0usize; n];
        for (row, &cell) in self.perm_y.iter().enumerate() {
            inv_y[cell] = row;
        }
        self.perm_x.iter().map(|&cell| inv_y[cell]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    /// Observed matrices, rows shuffled independently per modality.
    pub x: Matrix,
    pub y: Matrix,
    pub labels_x: Vec<usize>,
    pub labels_y: Vec<usize>,
    pub truth: SimTruth,
    pub registry: ProjectionRegistry,
}

/// Observation stage: draw projections and noise, produce observed
/// matrices in block order (pairing is the identity at this stage).
pub fn observe(
    v_x: &Matrix,
    v_y: &Matrix,
    config: &SimConfig,
    rng: &mut RngStream,
) -> Result<(Matrix, Matrix, ProjectionRegistry)> {
    config.validate()?;
    let d = config.latent_dim();
    let proj_x = ModalityProjection::draw(d, config.p_x, rng);
    let proj_y = ModalityProjection::draw(d, config.p_y, rng);
    let noise_multiplier = config.scale / config.snr;
    let x = proj_x.observe(v_x, noise_multiplier, rng)?;
    let y = proj_y.observe(v_y, noise_multiplier, rng)?;
    x.check_finite("sim::observe x")?;
    y.check_finite("sim::observe y")?;
    Ok((
        x,
        y,
        ProjectionRegistry {
            x: proj_x,
            y: proj_y,
            noise_multiplier,
        },
    ))
}

/// Full pipeline: latents, perturbations, observation, per-modality row
/// shuffles. Deterministic in the config seed.
pub fn simulate(config: &SimConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let mut rng = RngStream::new(config.seed);
    let latents = generate_latents(config, &mut rng)?;
    let mut v_x = latents.v_x;
    let mut v_y = latents.v_y;
    let effects = apply_perturbations(&mut v_x, &mut v_y, config, &mut rng)?;
    let (x_block, y_block, registry) = observe(&v_x, &v_y, config, &mut rng)?;

    let n = config.n_cells();
    let labels = config.block_labels();
    let mut perm_x: Vec<usize> = (0..n).collect();
    let mut perm_y: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm_x);
    rng.shuffle(&mut perm_y);
    let x = x_block.select_rows(&perm_x);
    let y = y_block.select_rows(&perm_y);
    let labels_x = perm_x.iter().map(|&c| labels[c]).collect();
    let labels_y = perm_y.iter().map(|&c| labels[c]).collect();

    Ok(SimulatedDataset {
        x,
        y,
        labels_x,
        labels_y,
        truth: SimTruth {
            v_x,
            v_y,
            labels,
            perm_x,
            perm_y,
            effects,
        },
        registry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig {
            d_s: 3,
            d_u: 2,
            n_perturbations: 4,
            cells_per_condition: 30,
            p_x: 20,
            p_y: 15,
            scale: 0.1,
            snr: 0.2,
            seed: 7,
        }
    }

    #[test]
    fn settings_map_to_documented_dimensions() {
        let c100 = make_setting(100, 0).unwrap();
        assert_eq!((c100.d_s, c100.d_u), (10, 0));
        let c80 = make_setting(80, 0).unwrap();
        assert_eq!((c80.d_s, c80.d_u), (8, 2));
        assert_eq!(c80.latent_dim(), 10);
        let c50 = make_setting(50, 0).unwrap();
        assert_eq!((c50.d_s, c50.d_u), (5, 5));
        assert!(matches!(
            make_setting(75, 0),
            Err(SimError::UnsupportedSetting(75))
        ));
    }

    #[test]
    fn fully_shared_latents_are_equal() {
        let config = SimConfig {
            d_u: 0,
            d_s: 4,
            n_perturbations: 2,
            cells_per_condition: 10,
            ..small_config()
        };
        let mut rng = RngStream::new(1);
        let l = generate_latents(&config, &mut rng).unwrap();
        assert_eq!(l.v_x, l.z);
        assert_eq!(l.v_y, l.z);
    }

    #[test]
    fn shared_columns_are_copied() {
        let config = small_config();
        let mut rng = RngStream::new(2);
        let l = generate_latents(&config, &mut rng).unwrap();
        for i in 0..config.n_cells() {
            for j in 0..config.d_s {
                assert_eq!(l.v_x.get(i, j), l.v_y.get(i, j));
            }
        }
    }

    #[test]
    fn latent_scale_matches_config() {
        let config = SimConfig {
            d_s: 1,
            d_u: 0,
            n_perturbations: 0,
            cells_per_condition: 100_000,
            ..small_config()
        };
        let mut rng = RngStream::new(3);
        let l = generate_latents(&config, &mut rng).unwrap();
        let mean = l.z.mean();
        let sd = (l
            .z
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / l.z.len() as f64)
            .sqrt();
        assert!((sd - 0.1).abs() < 0.002, "sd {sd}");
    }

    #[test]
    fn no_perturbations_is_identity() {
        let config = SimConfig {
            n_perturbations: 0,
            ..small_config()
        };
        let mut rng = RngStream::new(4);
        let l = generate_latents(&config, &mut rng).unwrap();
        let mut v_x = l.v_x.clone();
        let mut v_y = l.v_y.clone();
        let effects = apply_perturbations(&mut v_x, &mut v_y, &config, &mut rng).unwrap();
        assert!(effects.is_empty());
        assert_eq!(v_x, l.v_x);
        assert_eq!(v_y, l.v_y);
    }

    #[test]
    fn shared_effect_magnitudes_are_floored_at_three() {
        let config = small_config();
        let mut rng = RngStream::new(5);
        let l = generate_latents(&config, &mut rng).unwrap();
        let mut v_x = l.v_x.clone();
        let mut v_y = l.v_y.clone();
        let effects = apply_perturbations(&mut v_x, &mut v_y, &config, &mut rng).unwrap();
        assert!(!effects.is_empty());
        for e in &effects {
            assert!(e.effect_size.abs() >= 3.0, "effect {}", e.effect_size);
        }
    }

    #[test]
    fn control_cells_are_untouched() {
        let config = small_config();
        let mut rng = RngStream::new(6);
        let l = generate_latents(&config, &mut rng).unwrap();
        let mut v_x = l.v_x.clone();
        let mut v_y = l.v_y.clone();
        apply_perturbations(&mut v_x, &mut v_y, &config, &mut rng).unwrap();
        for i in 0..config.cells_per_condition {
            assert_eq!(v_x.row(i), l.v_x.row(i));
            assert_eq!(v_y.row(i), l.v_y.row(i));
        }
    }

    #[test]
    fn mean_shift_matches_beta_expectation() {
        // E[Beta(1,10)] = 1/11, so the mean shift of the targeted
        // dimension over a condition's cells is e_s / 11.
        let config = SimConfig {
            d_s: 2,
            d_u: 0,
            n_perturbations: 1,
            cells_per_condition: 20_000,
            ..small_config()
        };
        let mut rng = RngStream::new(7);
        let l = generate_latents(&config, &mut rng).unwrap();
        let mut v_x = l.v_x.clone();
        let mut v_y = l.v_y.clone();
        let effects = apply_perturbations(&mut v_x, &mut v_y, &config, &mut rng).unwrap();
        let e = &effects[0];
        assert_eq!(e.kind, EffectKind::Shared);
        let block = config.cells_per_condition..2 * config.cells_per_condition;
        let shift: f64 = block
            .clone()
            .map(|i| v_x.get(i, e.target_dim) - l.v_x.get(i, e.target_dim))
            .sum::<f64>()
            / config.cells_per_condition as f64;
        let expected = e.effect_size / 11.0;
        assert!(
            (shift - expected).abs() < 0.02,
            "shift {shift} vs {expected}"
        );
        // Shared penetrance is drawn once per cell and reused in Y.
        for i in block {
            assert_eq!(
                v_x.get(i, e.target_dim) - l.v_x.get(i, e.target_dim),
                v_y.get(i, e.target_dim) - l.v_y.get(i, e.target_dim)
            );
        }
    }

    #[test]
    fn near_infinite_snr_recovers_noiseless_projection() {
        let config = SimConfig {
            snr: 1e9,
            ..small_config()
        };
        let mut rng = RngStream::new(8);
        let l = generate_latents(&config, &mut rng).unwrap();
        let (x, _, registry) = observe(&l.v_x, &l.v_y, &config, &mut rng).unwrap();
        let noiseless = registry.x.project_noiseless(&l.v_x).unwrap();
        let residual = x.sub(&noiseless).unwrap().frobenius_norm();
        let signal = noiseless.frobenius_norm();
        assert!(
            residual < 1e-4 * signal,
            "residual {residual} vs signal {signal}"
        );
    }

    #[test]
    fn feature_scalings_are_strictly_positive() {
        let config = small_config();
        let mut rng = RngStream::new(9);
        let l = generate_latents(&config, &mut rng).unwrap();
        let (_, _, registry) = observe(&l.v_x, &l.v_y, &config, &mut rng).unwrap();
        assert!(registry.x.scaling.iter().all(|&s| s > 0.0));
        assert!(registry.y.scaling.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn default_config_shapes() {
        let config = SimConfig {
            cells_per_condition: 2, // keep the test fast; feature dims are the point
            ..SimConfig::default()
        };
        let ds = simulate(&config).unwrap();
        assert_eq!(ds.x.shape(), (20, 1000));
        assert_eq!(ds.y.shape(), (20, 500));
    }

    #[test]
    fn same_seed_is_bit_identical_and_seeds_differ() {
        let config = small_config();
        let a = simulate(&config).unwrap();
        let b = simulate(&config).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.labels_x, b.labels_x);
        let c = simulate(&SimConfig { seed: 8, ..config }).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn label_balance_holds_per_modality() {
        let config = small_config();
        let ds = simulate(&config).unwrap();
        for labels in [&ds.labels_x, &ds.labels_y] {
            let mut counts = vec![0usize; config.n_conditions()];
            for &l in labels.iter() {
                counts[l] += 1;
            }
            assert!(counts.iter().all(|&c| c == config.cells_per_condition));
        }
    }

    #[test]
    fn pairing_map_is_label_consistent() {
        let config = small_config();
        let ds = simulate(&config).unwrap();
        let pair = ds.truth.pair_x_to_y();
        for (x_row, &y_row) in pair.iter().enumerate() {
            assert_eq!(ds.labels_x[x_row], ds.labels_y[y_row]);
            // The paired rows come from the same block-order cell.
            assert_eq!(ds.truth.perm_x[x_row], ds.truth.perm_y[y_row]);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = small_config();
        config.scale = 0.0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.snr = -1.0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.d_s = 0;
        config.d_u = 0;
        assert!(config.validate().is_err());
    }
}
