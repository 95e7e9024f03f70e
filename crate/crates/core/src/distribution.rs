//! Discrete distributions over `m` classes and the closed-form quantities
//! that govern mode estimation: entropy, the exponential gaps `Δᵢ²`, the
//! additive gaps `∇ᵢ`, the information projection onto the set of
//! distributions with a different mode, and the asymptotic query
//! coefficients of each estimator.
//!
//! Classes are addressed by index `0..m`. Nothing here assumes the masses
//! are sorted: the mode and the runner-up are located by scanning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimators::Algorithm;

/// Absolute tolerance for the sum-to-one check.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("need at least two classes with non-zero weight")]
    EmptyOrDegenerate,
    #[error("no strictly unique maximum mass")]
    TiedMode,
    #[error("negative or non-finite weight {weight} at class {class}")]
    NegativeWeight { class: usize, weight: f64 },
    #[error("class {class} is the mode; gaps are defined against non-mode classes only")]
    DegenerateGap { class: usize },
    #[error("class index {class} out of range for {m} classes")]
    ClassOutOfRange { class: usize, m: usize },
    #[error("invalid family parameter: {0}")]
    InvalidFamily(String),
}

/// A validated probability vector with a strictly unique mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    masses: Vec<f64>,
    mode: usize,
}

impl ProbabilityVector {
    /// Normalizes non-negative `weights` into a distribution.
    ///
    /// The unique-mode check is performed on the raw weights, so exact ties
    /// such as `[3, 3]` are rejected regardless of floating-point rounding in
    /// the normalization.
    pub fn new(weights: &[f64]) -> Result<Self, DistributionError> {
        if weights.len() < 2 {
            return Err(DistributionError::EmptyOrDegenerate);
        }
        for (class, &weight) in weights.iter().enumerate() {
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(DistributionError::NegativeWeight { class, weight });
            }
        }
        if weights.iter().filter(|&&w| w > 0.0).count() < 2 {
            return Err(DistributionError::EmptyOrDegenerate);
        }
        let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut at_max = weights.iter().enumerate().filter(|(_, &w)| w == max);
        let (mode, _) = at_max.next().expect("non-empty");
        if at_max.next().is_some() {
            return Err(DistributionError::TiedMode);
        }
        let total: f64 = weights.iter().sum();
        let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Normalization can merge two nearly-equal weights into one float.
        if masses
            .iter()
            .enumerate()
            .any(|(i, &p)| i != mode && p >= masses[mode])
        {
            return Err(DistributionError::TiedMode);
        }
        Ok(Self { masses, mode })
    }

    /// Zipf law `p(k) ∝ 1/k^s` over `m` classes (class 0 is the mode).
    pub fn zipf(s: f64, m: usize) -> Result<Self, DistributionError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(DistributionError::InvalidFamily(format!(
                "zipf exponent must be positive, got {s}"
            )));
        }
        let weights: Vec<f64> = (1..=m).map(|k| (k as f64).powf(-s)).collect();
        Self::new(&weights)
    }

    /// `p(y₁) = 2/m`, `p(y₂) = 2/m − 1/m²`, the rest uniform.
    ///
    /// A hard instance for elimination (tiny top gap, many light classes).
    pub fn footnote1(m: usize) -> Result<Self, DistributionError> {
        if m < 4 {
            return Err(DistributionError::InvalidFamily(format!(
                "footnote1 needs m >= 4, got {m}"
            )));
        }
        let mf = m as f64;
        let top = 2.0 / mf;
        let second = 2.0 / mf - 1.0 / (mf * mf);
        let rest = (1.0 - top - second) / (mf - 2.0);
        let mut weights = vec![rest; m];
        weights[0] = top;
        weights[1] = second;
        Self::new(&weights)
    }

    /// `p(y₁) = 1/2`, the remaining mass spread uniformly over `m − 1` classes.
    pub fn footnote2(m: usize) -> Result<Self, DistributionError> {
        if m < 3 {
            return Err(DistributionError::InvalidFamily(format!(
                "footnote2 needs m >= 3, got {m}"
            )));
        }
        let mut weights = vec![0.5 / (m as f64 - 1.0); m];
        weights[0] = 0.5;
        Self::new(&weights)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, class: usize) -> f64 {
        self.masses[class]
    }

    pub fn num_classes(&self) -> usize {
        self.masses.len()
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Largest non-mode class, lowest index on ties.
    pub fn runner_up(&self) -> usize {
        let mut best = usize::MAX;
        for (i, &p) in self.masses.iter().enumerate() {
            if i == self.mode {
                continue;
            }
            if best == usize::MAX || p > self.masses[best] {
                best = i;
            }
        }
        best
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }
}

/// Inverse-CDF sampler over cumulative masses.
#[derive(Debug, Clone)]
pub struct Sampler {
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(pv: &ProbabilityVector) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = pv
            .masses
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the last bucket so that u ∈ [0, 1) always lands somewhere,
        // then let trailing zero-mass classes keep empty buckets.
        let last_positive = pv.masses.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for c in cumulative.iter_mut().skip(last_positive) {
            *c = f64::INFINITY;
        }
        Self { cumulative }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Draws `n` i.i.d. classes from `pv`, deterministically in `seed`.
pub fn sample(pv: &ProbabilityVector, seed: u64, n: usize) -> Vec<usize> {
    let sampler = pv.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sampler.draw(&mut rng)).collect()
}

/// Shannon entropy in bits.
pub fn entropy_bits(pv: &ProbabilityVector) -> f64 {
    pv.masses
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `−ln(1 − (√a − √b)²)`: the large-deviation rate at which the empirical
/// frequencies of two classes with masses `a > b` swap order.
pub fn squared_gap(a: f64, b: f64) -> f64 {
    let d = a.sqrt() - b.sqrt();
    -(-d * d).ln_1p()
}

/// Per-class gaps to the mode. The mode slot carries the runner-up value.
#[derive(Debug, Clone, PartialEq)]
pub struct GapVector {
    /// `Δᵢ²` in nats.
    pub delta_sq: Vec<f64>,
    /// `∇ᵢ = p(y₁) − p(yᵢ)`.
    pub nabla: Vec<f64>,
}

pub fn gaps(pv: &ProbabilityVector) -> GapVector {
    let top = pv.mass(pv.mode());
    let mut delta_sq: Vec<f64> = pv.masses.iter().map(|&p| squared_gap(top, p)).collect();
    let mut nabla: Vec<f64> = pv.masses.iter().map(|&p| top - p).collect();
    let second = pv.runner_up();
    delta_sq[pv.mode()] = delta_sq[second];
    nabla[pv.mode()] = nabla[second];
    GapVector { delta_sq, nabla }
}

/// Closest distribution to `p` (in KL) whose mode is not `p`'s mode.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationProjection {
    pub lambda: f64,
    pub q_star: Vec<f64>,
    pub divergence_bits: f64,
    pub divergence_nats: f64,
}

pub fn information_projection(pv: &ProbabilityVector) -> InformationProjection {
    let (first, second) = (pv.mode(), pv.runner_up());
    let (p1, p2) = (pv.mass(first), pv.mass(second));
    let divergence_nats = squared_gap(p1, p2);
    let lambda = divergence_nats.exp();
    let tied = (1.0 - lambda * (1.0 - p1 - p2)) / 2.0;
    let q_star = pv
        .masses
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == first || i == second { tied } else { lambda * p })
        .collect();
    InformationProjection {
        lambda,
        q_star,
        divergence_bits: divergence_nats / std::f64::consts::LN_2,
        divergence_nats,
    }
}

/// Upper bound `exp(−nΔ₂²)` on the error of the empirical mode of `n` samples.
pub fn mode_error_bound(pv: &ProbabilityVector, n: u64) -> f64 {
    let g = gaps(pv);
    (-(n as f64) * g.delta_sq[pv.runner_up()]).exp()
}

/// Asymptotic queries-per-`ln(1/δ)` coefficient of each estimator, universal
/// constants dropped.
pub fn theoretical_alpha(pv: &ProbabilityVector, algorithm: Algorithm) -> f64 {
    let g = gaps(pv);
    let inv2 = 1.0 / g.delta_sq[pv.runner_up()];
    let abs_log2 = |p: f64| if p > 0.0 { p.log2().abs() } else { 0.0 };
    let weighted_inv: f64 = pv
        .masses
        .iter()
        .zip(&g.delta_sq)
        .map(|(&p, &d)| if p > 0.0 { p / d } else { 0.0 })
        .sum();
    let top_depth = abs_log2(pv.mass(pv.mode()));
    match algorithm {
        Algorithm::Exhaustive => inv2 + inv2 * (pv.num_classes() as f64).log2(),
        Algorithm::Adaptive => inv2 + inv2 * entropy_bits(pv),
        Algorithm::Truncated => inv2 + inv2 * top_depth,
        Algorithm::Elimination => {
            inv2 + pv
                .masses
                .iter()
                .zip(&g.delta_sq)
                .map(|(&p, &d)| if p > 0.0 { p / d * abs_log2(p) } else { 0.0 })
                .sum::<f64>()
        }
        Algorithm::SetElimination => inv2 + weighted_inv * top_depth,
    }
}

/// Sandwich of `Δᵢ⁻²` between multiples of `p(y₁)∇ᵢ⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapComparison {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn gap_comparison_bounds(
    pv: &ProbabilityVector,
    class: usize,
) -> Result<GapComparison, DistributionError> {
    let m = pv.num_classes();
    if class >= m {
        return Err(DistributionError::ClassOutOfRange { class, m });
    }
    let top = pv.mass(pv.mode());
    let p = pv.mass(class);
    if class == pv.mode() || p >= top {
        return Err(DistributionError::DegenerateGap { class });
    }
    let nabla = top - p;
    let value = 1.0 / squared_gap(top, p);
    let lower = top / -(-top).ln_1p() * top / (nabla * nabla);
    let upper = 4.0 * top / (nabla * nabla);
    Ok(GapComparison {
        lower,
        value,
        upper,
        holds: lower <= value && value <= upper,
    })
}

/// `D(q‖p)` in bits. Infinite when `q` charges a class `p` does not.
pub fn kl_divergence_bits(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&qi, _)| qi > 0.0)
        .map(|(&qi, &pi)| if pi > 0.0 { qi * (qi / pi).log2() } else { f64::INFINITY })
        .sum()
}
