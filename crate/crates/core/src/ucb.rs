//! Importance-sampled upper confidence bounds on the cumulative error.
//!
//! A single draw of `m` samples is taken from the calibration set: each
//! sample picks an index uniformly with replacement and queries the expert
//! with probability `π_i`. The weighted loss `Z_j = ℓ_i / π_i` (zero when not
//! queried) is an unbiased estimate of the cumulative error, so for every
//! threshold `u` the mean of `Z_j · 1{U_{i_j} ≤ u}` estimates
//! `L(u) = (1/n) Σ ℓ_i 1{U_i ≤ u}`. The same draw is reused for every `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, OracleError, Result};
use crate::quantile::normal_quantile;
use crate::types::{BoundKind, CalibrationRecord};

/// Per-index query probabilities, number of draws and RNG seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    weights: Vec<f64>,
    sample_size: usize,
    seed: u64,
}

impl SamplingPlan {
    pub fn new(weights: Vec<f64>, sample_size: usize, seed: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(CoreError::InvalidPlan("no sampling weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(CoreError::InvalidPlan(format!(
                "sampling weight {w} outside (0, 1]"
            )));
        }
        if sample_size == 0 {
            return Err(CoreError::InvalidPlan("sample size must be positive".into()));
        }
        Ok(Self {
            weights,
            sample_size,
            seed,
        })
    }

    /// Constant weight `pi` for `n` items with `m = ⌈n / pi⌉` draws.
    pub fn constant(n: usize, pi: f64, seed: u64) -> Result<Self> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(CoreError::InvalidPlan(format!("pi {pi} outside (0, 1]")));
        }
        let m = (n as f64 / pi).ceil() as usize;
        Self::new(vec![pi; n], m, seed)
    }

    /// Constant weight `pi` with an explicit number of draws.
    pub fn constant_with_size(n: usize, pi: f64, sample_size: usize, seed: u64) -> Result<Self> {
        Self::new(vec![pi; n], sample_size, seed)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One importance-weighted draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedLossSample {
    /// Zero-based index into the calibration set.
    pub index: usize,
    pub queried: bool,
    /// `min(ℓ, cap) / π` when queried, else 0.
    pub weighted_loss: f64,
    pub uncertainty: f64,
}

impl WeightedLossSample {
    #[inline]
    pub fn at(&self, u: f64) -> f64 {
        if self.uncertainty <= u {
            self.weighted_loss
        } else {
            0.0
        }
    }
}

/// The samples of one draw plus what is needed to bound them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<WeightedLossSample>,
    pub seed: u64,
    pub min_weight: f64,
    pub loss_cap: f64,
    /// Distinct calibration items whose expert label was requested.
    pub unique_queries: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_at(&self, u: f64) -> f64 {
        mean_at(&self.samples, u)
    }
}

/// Draws `plan.sample_size()` weighted samples over the records, asking
/// `loss_of` for each queried record's loss. Every record is asked at most
/// once; queries are issued in order of first appearance.
pub fn draw_samples<F>(
    records: &[CalibrationRecord],
    plan: &SamplingPlan,
    loss_cap: f64,
    mut loss_of: F,
) -> Result<SampleSet>
where
    F: FnMut(&CalibrationRecord) -> Result<f64, OracleError>,
{
    let uncertainties: Vec<f64> = records.iter().map(|r| r.uncertainty).collect();
    draw_samples_indexed(&uncertainties, plan, loss_cap, |i| loss_of(&records[i])).map_err(
        |err| match err {
            CoreError::Oracle {
                position,
                id,
                source,
            } => {
                let id = id
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| records.get(i))
                    .map_or(id, |r| r.id.clone());
                CoreError::Oracle {
                    position,
                    id,
                    source,
                }
            }
            other => other,
        },
    )
}

/// Index-based form of [`draw_samples`]; oracle errors report the index as id.
pub fn draw_samples_indexed<F>(
    uncertainties: &[f64],
    plan: &SamplingPlan,
    loss_cap: f64,
    mut loss_of: F,
) -> Result<SampleSet>
where
    F: FnMut(usize) -> Result<f64, OracleError>,
{
    let n = uncertainties.len();
    if n == 0 {
        return Err(CoreError::InvalidPlan("no calibration records".into()));
    }
    if plan.weights.len() != n {
        return Err(CoreError::InvalidPlan(format!(
            "{} weights for {n} records",
            plan.weights.len()
        )));
    }
    if !(loss_cap.is_finite() && loss_cap > 0.0) {
        return Err(CoreError::InvalidRange(format!("loss cap {loss_cap} must be positive")));
    }

    // All randomness is consumed up front so the draw depends only on the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let draws: Vec<(usize, bool)> = (0..plan.sample_size)
        .map(|_| {
            let i = rng.random_range(0..n);
            let xi = rng.random_bool(plan.weights[i]);
            (i, xi)
        })
        .collect();

    let mut losses: Vec<Option<f64>> = vec![None; n];
    let mut unique_queries = 0;
    for (position, &(i, xi)) in draws.iter().enumerate() {
        if !xi || losses[i].is_some() {
            continue;
        }
        let oracle_err = |source: OracleError| CoreError::Oracle {
            position,
            id: i.to_string(),
            source,
        };
        let loss = loss_of(i).map_err(oracle_err)?;
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(oracle_err(
                format!("loss {loss} must be finite and non-negative").into(),
            ));
        }
        losses[i] = Some(loss);
        unique_queries += 1;
    }

    let samples = draws
        .into_iter()
        .map(|(i, xi)| {
            let weighted_loss = if xi {
                let loss = losses[i].expect("queried index has a loss");
                loss.min(loss_cap) / plan.weights[i]
            } else {
                0.0
            };
            WeightedLossSample {
                index: i,
                queried: xi,
                weighted_loss,
                uncertainty: uncertainties[i],
            }
        })
        .collect();

    Ok(SampleSet {
        samples,
        seed: plan.seed,
        min_weight: plan.min_weight(),
        loss_cap,
        unique_queries,
    })
}

/// `μ̂_Z(u)`.
pub fn mean_at(samples: &[WeightedLossSample], u: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.at(u)).sum::<f64>() / samples.len() as f64
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CoreError::InvalidRange(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// `z_{1−α}`.
pub fn clt_multiplier(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha)
}

/// Normal-approximation bound `μ̂_Z(u) + z_{1−α} σ̂_Z(u) / √m`.
pub fn clt_bound(samples: &[WeightedLossSample], u: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let m = samples.len();
    if m < 2 {
        return Err(CoreError::InsufficientSamples { needed: 2, got: m });
    }
    let mu = mean_at(samples, u);
    let ss: f64 = samples.iter().map(|s| (s.at(u) - mu).powi(2)).sum();
    let sd = (ss / (m - 1) as f64).sqrt();
    Ok(mu + clt_multiplier(alpha) * sd / (m as f64).sqrt())
}

/// Hoeffding slack `sqrt(R² ln(2/α) / (2m))` with `R = loss_cap / min_weight`.
pub fn hoeffding_slack(m: usize, alpha: f64, loss_cap: f64, min_weight: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(loss_cap.is_finite() && loss_cap > 0.0) {
        return Err(CoreError::InvalidRange(format!("loss cap {loss_cap} must be positive")));
    }
    if !(min_weight > 0.0 && min_weight <= 1.0) {
        return Err(CoreError::InvalidRange(format!(
            "minimum sampling weight {min_weight} outside (0, 1]"
        )));
    }
    if m == 0 {
        return Err(CoreError::InsufficientSamples { needed: 1, got: 0 });
    }
    let range = loss_cap / min_weight;
    Ok((range * range * (2.0 / alpha).ln() / (2.0 * m as f64)).sqrt())
}

/// Finite-sample bound `μ̂_Z(u) + sqrt(R² ln(2/α) / (2m))`.
pub fn hoeffding_bound(
    samples: &[WeightedLossSample],
    u: f64,
    alpha: f64,
    loss_cap: f64,
    min_weight: f64,
) -> Result<f64> {
    let slack = hoeffding_slack(samples.len(), alpha, loss_cap, min_weight)?;
    Ok(mean_at(samples, u) + slack)
}

/// Sorted distinct values; non-finite inputs are dropped.
pub fn calibration_grid<I>(uncertainties: I) -> Vec<f64>
where
    I: IntoIterator<Item = f64>,
{
    let mut grid: Vec<f64> = uncertainties.into_iter().filter(|u| u.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Bounds `L̂_u(α)` evaluated over a threshold grid from one sample draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbCurve {
    pub grid: Vec<f64>,
    pub means: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Grid points where every `Z_j(u)` is equal, so the CLT term vanishes.
    pub zero_variance: Vec<bool>,
    pub bound_kind: BoundKind,
    pub alpha: f64,
    pub sample_size: usize,
    pub seed: u64,
}

impl UcbCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn has_zero_variance(&self) -> bool {
        self.zero_variance.iter().any(|z| *z)
    }

    /// Hex SHA-256 over the curve's provenance, grid and bounds.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"pacroute-ucb-curve-v1");
        h.update(self.bound_kind.to_string().as_bytes());
        h.update(self.alpha.to_bits().to_le_bytes());
        h.update((self.sample_size as u64).to_le_bytes());
        h.update(self.seed.to_le_bytes());
        h.update((self.grid.len() as u64).to_le_bytes());
        for (u, b) in self.grid.iter().zip(&self.bounds) {
            h.update(u.to_bits().to_le_bytes());
            h.update(b.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Evaluates the chosen bound at every grid point.
///
/// Samples are sorted by uncertainty once and swept with running sums, so
/// the cost is `O(m log m + |grid|)`.
pub fn build_curve(set: &SampleSet, grid: &[f64], alpha: f64, kind: BoundKind) -> Result<UcbCurve> {
    check_alpha(alpha)?;
    if grid.is_empty() {
        return Err(CoreError::EmptyGrid);
    }
    if let Some(pos) = grid.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(CoreError::UnsortedGrid(pos + 1));
    }
    let m = set.samples.len();
    let (slack, z) = match kind {
        BoundKind::Clt => {
            if m < 2 {
                return Err(CoreError::InsufficientSamples { needed: 2, got: m });
            }
            (0.0, clt_multiplier(alpha))
        }
        BoundKind::Hoeffding => (hoeffding_slack(m, alpha, set.loss_cap, set.min_weight)?, 0.0),
    };

    let mut sorted: Vec<(f64, f64)> = set
        .samples
        .iter()
        .map(|s| (s.uncertainty, s.weighted_loss))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mf = m as f64;
    let mut means = Vec::with_capacity(grid.len());
    let mut bounds = Vec::with_capacity(grid.len());
    let mut zero_variance = Vec::with_capacity(grid.len());
    let (mut next, mut sum, mut sum_sq) = (0usize, 0.0f64, 0.0f64);
    let (mut nonzero, mut lo, mut hi) = (0usize, f64::INFINITY, f64::NEG_INFINITY);

    for &u in grid {
        while next < m && sorted[next].0 <= u {
            let z = sorted[next].1;
            sum += z;
            sum_sq += z * z;
            if z != 0.0 {
                nonzero += 1;
            }
            lo = lo.min(z);
            hi = hi.max(z);
            next += 1;
        }
        let mu = sum / mf;
        // Z_j(u) is the included values padded with zeros.
        let constant = nonzero == 0 || (next == m && lo == hi);
        let bound = match kind {
            BoundKind::Hoeffding => mu + slack,
            BoundKind::Clt if constant => mu,
            BoundKind::Clt => {
                let var = ((sum_sq - sum * mu) / (mf - 1.0)).max(0.0);
                mu + z * var.sqrt() / mf.sqrt()
            }
        };
        means.push(mu);
        bounds.push(bound);
        zero_variance.push(constant);
    }

    Ok(UcbCurve {
        grid: grid.to_vec(),
        means,
        bounds,
        zero_variance,
        bound_kind: kind,
        alpha,
        sample_size: m,
        seed: set.seed,
    })
}
