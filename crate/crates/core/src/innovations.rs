//! Standardized innovation distributions (mean 0, variance 1) with exact
//! moment metadata, deterministic stream sampling, and finite supports for
//! the enumeration oracle.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Exact standardized moments of an innovation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub mu3: f64,
    pub mu4: f64,
    /// Fourth cumulant, `mu4 - 3`.
    pub nu4: f64,
    pub mu6: f64,
    pub mu8: f64,
}

impl MomentProfile {
    /// Builds a profile from standardized cumulants `κ3..κ8` (with `κ1 = 0`,
    /// `κ2 = 1`) using the moment-cumulant partition sums.
    fn from_cumulants(k3: f64, k4: f64, k5: f64, k6: f64, k8: f64) -> Self {
        let mu4 = k4 + 3.0;
        let mu6 = k6 + 15.0 * k4 + 10.0 * k3 * k3 + 15.0;
        let mu8 =
            k8 + 28.0 * k6 + 56.0 * k5 * k3 + 35.0 * k4 * k4 + 210.0 * k4 + 280.0 * k3 * k3 + 105.0;
        Self {
            mu3: k3,
            mu4,
            nu4: mu4 - 3.0,
            mu6,
            mu8,
        }
    }

    fn from_support(support: &[(f64, f64)]) -> Self {
        let m = |k: i32| support.iter().map(|(v, p)| p * v.powi(k)).sum::<f64>();
        let mu4 = m(4);
        Self {
            mu3: m(3),
            mu4,
            nu4: mu4 - 3.0,
            mu6: m(6),
            mu8: m(8),
        }
    }

    /// Sixth cumulant `μ6 − 15μ4 − 10μ3² + 30` of a standardized variable.
    pub fn kappa6(&self) -> f64 {
        self.mu6 - 15.0 * self.mu4 - 10.0 * self.mu3 * self.mu3 + 30.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistKind {
    StandardNormal,
    /// Gamma with the given shape and scale, shifted and scaled to mean 0 and
    /// variance 1.
    StandardizedGamma {
        shape: f64,
        scale: f64,
    },
    Rademacher,
    /// Two-point law taking its larger value with probability `prob`.
    TwoPoint {
        prob: f64,
    },
}

/// A standardized innovation law.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationDist {
    kind: DistKind,
    profile: MomentProfile,
    support: Option<Vec<(f64, f64)>>,
}

impl InnovationDist {
    pub fn standard_normal() -> Self {
        Self {
            kind: DistKind::StandardNormal,
            profile: MomentProfile::from_cumulants(0.0, 0.0, 0.0, 0.0, 0.0),
            support: None,
        }
    }

    /// Gamma(shape, scale) standardized as `(g − kθ) / (θ√k)`.
    pub fn standardized_gamma(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!(
                "gamma requires positive finite shape and scale, got ({shape}, {scale})"
            )));
        }
        // Standardized cumulants of a gamma law: (r-1)! k^(1 - r/2).
        let k = shape;
        let profile = MomentProfile::from_cumulants(
            2.0 / k.sqrt(),
            6.0 / k,
            24.0 / k.powf(1.5),
            120.0 / (k * k),
            5040.0 / (k * k * k),
        );
        Ok(Self {
            kind: DistKind::StandardizedGamma { shape, scale },
            profile,
            support: None,
        })
    }

    pub fn rademacher() -> Self {
        let support = vec![(-1.0, 0.5), (1.0, 0.5)];
        Self {
            kind: DistKind::Rademacher,
            profile: MomentProfile::from_support(&support),
            support: Some(support),
        }
    }

    /// Standardized two-point law: `+sqrt(q/p)` with probability `p`,
    /// `-sqrt(p/q)` with probability `q = 1 - p`.
    pub fn two_point(prob: f64) -> Result<Self> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(domain(format!(
                "two-point probability {prob} outside (0, 1)"
            )));
        }
        let q = 1.0 - prob;
        let support = vec![(-(prob / q).sqrt(), q), ((q / prob).sqrt(), prob)];
        Ok(Self {
            kind: DistKind::TwoPoint { prob },
            profile: MomentProfile::from_support(&support),
            support: Some(support),
        })
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn profile(&self) -> MomentProfile {
        self.profile
    }

    pub fn is_enumerable(&self) -> bool {
        self.support.is_some()
    }

    /// Fills `out` with i.i.d. standardized draws from `rng`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            DistKind::StandardNormal => {
                for x in out.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
            }
            DistKind::StandardizedGamma { shape, scale } => {
                let gamma = Gamma::new(shape, scale).expect("validated at construction");
                let mean = shape * scale;
                let sd = scale * shape.sqrt();
                for x in out.iter_mut() {
                    *x = (gamma.sample(rng) - mean) / sd;
                }
            }
            DistKind::Rademacher => {
                for x in out.iter_mut() {
                    *x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            DistKind::TwoPoint { prob } => {
                let support = self.support.as_ref().expect("two-point has support");
                let (lo, hi) = (support[0].0, support[1].0);
                for x in out.iter_mut() {
                    *x = if rng.random::<f64>() < prob { hi } else { lo };
                }
            }
        }
    }
}

impl fmt::Display for InnovationDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistKind::StandardNormal => write!(f, "normal"),
            DistKind::StandardizedGamma { shape, scale } => write!(f, "gamma:{shape}:{scale}"),
            DistKind::Rademacher => write!(f, "rademacher"),
            DistKind::TwoPoint { prob } => write!(f, "twopoint:{prob}"),
        }
    }
}

impl FromStr for InnovationDist {
    type Err = Error;

    /// Parses `normal`, `gamma:k:theta`, `rademacher` or `twopoint:prob`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad number '{v}' in distribution '{s}'")))
        };
        let bad = || {
            Error::Usage(format!(
            "unknown distribution '{s}' (expected normal | gamma:k:theta | rademacher | twopoint:prob)"
        ))
        };
        match parts.as_slice() {
            ["normal"] => Ok(Self::standard_normal()),
            ["rademacher"] => Ok(Self::rademacher()),
            ["gamma", k, theta] => Self::standardized_gamma(num(k)?, num(theta)?),
            ["twopoint", prob] => Self::two_point(num(prob)?),
            _ => Err(bad()),
        }
    }
}

/// Exact standardized moments of `dist`.
pub fn moments_of(dist: &InnovationDist) -> MomentProfile {
    dist.profile
}

/// Finite support of an enumerable law as `(value, probability)` pairs.
pub fn enumerate_support(dist: &InnovationDist) -> Result<Vec<(f64, f64)>> {
    dist.support
        .clone()
        .ok_or_else(|| Error::Unsupported(format!("distribution '{dist}' has continuous support")))
}

/// Derives an independent stream seed from a master seed and a sequence of
/// indices (replication, column, ...). SplitMix64 finalizer applied per
/// index, so distinct index tuples give unrelated streams.
pub fn stream_seed(master_seed: u64, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master_seed ^ 0x6a09_e667_f3bc_c909);
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator owned by one sampling stream.
pub fn stream_rng(stream_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed)
}

/// `count` i.i.d. standardized draws from the stream `stream_seed`.
pub fn sample_block(dist: &InnovationDist, stream_seed: u64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    dist.fill(&mut stream_rng(stream_seed), &mut out);
    out
}
