//! Quasi-Monte Carlo integration over a normal random intercept.
//!
//! A [`NodeSet`] holds `B` standard-normal nodes `z_b = Phi^{-1}(u_b)` built
//! from a one-dimensional Sobol point set. Random effects are taken as
//! `v_b = tau * z_b`, so one node set serves every value of `tau^2` and every
//! study within a fit, and the likelihood surface seen by the optimizer is
//! deterministic and smooth.

use crate::data::StudyRecord;
use crate::error::{Error, Result};
use crate::family::{dot, FamilyKind, FamilySpec};
use crate::special::{norm_quantile, softplus};

/// The one-dimensional Sobol sequence in Gray-code order, as 32-bit
/// fractions. Index 0 is the origin.
#[derive(Debug, Clone, Default)]
pub struct SobolSequence {
    index: u64,
    state: u32,
}

impl SobolSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_unit(x: u32) -> f64 {
        x as f64 / 4_294_967_296.0
    }
}

impl Iterator for SobolSequence {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.index >= 1 << 32 {
            return None;
        }
        let out = self.state;
        // Direction number for the lowest zero bit of the current index.
        let c = (!self.index).trailing_zeros();
        if c < 32 {
            self.state ^= 1u32 << (31 - c);
        }
        self.index += 1;
        Some(out)
    }
}

/// Shared integration nodes for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    u: Vec<f64>,
    z: Vec<f64>,
    seed: u64,
}

impl NodeSet {
    /// The first `count` Sobol points, digitally shifted by a mask derived
    /// from `seed` (seed 0 leaves them unscrambled), then moved by half a
    /// cell of the `2^m >= count` grid so that no point sits on 0 or 1.
    ///
    /// For a power-of-two `count` and seed 0 this is the midpoint rule
    /// `u_b = (b + 1/2) / B` in permuted order.
    pub fn sobol(count: usize, seed: u64) -> Result<Self> {
        if count < 2 {
            return Err(Error::TooFewNodes(count));
        }
        let m = (count as u64).next_power_of_two().trailing_zeros().min(31);
        let half_cell = 1u32 << (31 - m);
        let mask = scramble_mask(seed);
        let u: Vec<f64> = SobolSequence::new()
            .take(count)
            .map(|x| {
                let v = (x ^ mask).wrapping_add(half_cell);
                if v == 0 {
                    0.5 / 4_294_967_296.0
                } else {
                    SobolSequence::to_unit(v)
                }
            })
            .collect();
        let mut nodes = Self::from_uniform(u)?;
        nodes.seed = seed;
        Ok(nodes)
    }

    /// Builds nodes from arbitrary points in (0, 1).
    pub fn from_uniform(u: Vec<f64>) -> Result<Self> {
        if u.len() < 2 {
            return Err(Error::TooFewNodes(u.len()));
        }
        if let Some(&bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidArgument(format!("node {bad} is outside (0, 1)")));
        }
        let z = u.iter().map(|&p| norm_quantile(p)).collect();
        Ok(Self { u, z, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn uniform(&self) -> &[f64] {
        &self.u
    }

    pub fn normal(&self) -> &[f64] {
        &self.z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn scramble_mask(seed: u64) -> u32 {
    if seed == 0 {
        return 0;
    }
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 32) as u32
}

/// Per-record constants for the aggregate log-kernel
/// `w * (ybar * eta - b(eta)) / a(phi)`.
///
/// The kernel is stored centred at its supremum over the linear predictor
/// (the saturated value), which is free of `(beta, tau^2)`. The centred form
/// keeps every node exponent non-positive and of moderate size, so
/// finite-difference derivatives of the summed log-likelihood stay accurate.
#[derive(Debug, Clone)]
pub struct RecordKernel {
    kind: FamilyKind,
    scale: f64,
    ybar: f64,
    saturated: f64,
}

impl RecordKernel {
    pub fn new(record: &StudyRecord, family: FamilySpec) -> Result<Self> {
        let kind = family.kind();
        let w = record.weight();
        let dispersion = match kind {
            FamilyKind::Binomial | FamilyKind::Poisson => 1.0,
            FamilyKind::Gamma | FamilyKind::Normal => match record.phi_hat {
                Some(phi) if phi > 0.0 => phi,
                _ => {
                    return Err(Error::InvalidRecord {
                        record: record.record_id.clone(),
                        message: "missing plug-in dispersion".into(),
                    })
                }
            },
        };
        let scale = w / dispersion;
        let y = record.ybar;
        let xlogx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
        let saturated = scale
            * match kind {
                FamilyKind::Binomial => xlogx(y) + xlogx(1.0 - y),
                FamilyKind::Poisson => xlogx(y) - y,
                FamilyKind::Gamma => -1.0 - y.ln(),
                FamilyKind::Normal => 0.5 * y * y,
            };
        Ok(Self {
            kind,
            scale,
            ybar: y,
            saturated,
        })
    }

    /// The saturated constant removed from every node exponent.
    pub fn saturated(&self) -> f64 {
        self.saturated
    }

    /// Centred log-kernel at linear predictor `theta`.
    #[inline]
    pub fn log_kernel(&self, theta: f64) -> f64 {
        let y = self.ybar;
        let raw = match self.kind {
            FamilyKind::Binomial => y * theta - softplus(theta),
            FamilyKind::Poisson => y * theta - theta.exp(),
            FamilyKind::Gamma => -y * (-theta).exp() - theta,
            FamilyKind::Normal => theta * (y - 0.5 * theta),
        };
        self.scale * raw - self.saturated
    }

    /// `log mean_b exp(kernel(lin + tau * z_b))`, centred.
    pub fn centered_loglik(&self, lin: f64, tau: f64, nodes: &NodeSet) -> f64 {
        if tau == 0.0 {
            return self.log_kernel(lin);
        }
        // Streaming log-sum-exp: rescale the running sum when the maximum moves.
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &z in nodes.normal() {
            let e = self.log_kernel(lin + tau * z);
            if e > max {
                if max.is_finite() {
                    sum *= (max - e).exp();
                }
                sum += 1.0;
                max = e;
            } else if e.is_finite() {
                sum += (e - max).exp();
            }
        }
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        max + (sum / nodes.len() as f64).ln()
    }
}

/// QMC approximation of one study's marginal log-likelihood, with the
/// `(beta, tau^2)`-free normalizing constant `prod e^{c(y, phi)}` omitted.
pub fn marginal_loglik_study(
    record: &StudyRecord,
    family: FamilySpec,
    beta: &[f64],
    tau2: f64,
    nodes: &NodeSet,
) -> Result<f64> {
    if !(tau2 >= 0.0) || !tau2.is_finite() {
        return Err(Error::InvalidArgument(format!("tau2 must be non-negative, got {tau2}")));
    }
    if beta.len() != record.x.len() {
        return Err(Error::InvalidArgument(format!(
            "beta has length {}, record has {} covariates",
            beta.len(),
            record.x.len()
        )));
    }
    let kernel = RecordKernel::new(record, family)?;
    let value = kernel.centered_loglik(dot(&record.x, beta), tau2.sqrt(), nodes);
    if !value.is_finite() {
        return Err(Error::Evaluation {
            record: record.record_id.clone(),
            beta: beta.to_vec(),
            tau2,
        });
    }
    Ok(value + kernel.saturated())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Size, StudyRecord};

    fn binomial_record(n: u64, events: u64) -> StudyRecord {
        StudyRecord {
            study_id: "s".into(),
            record_id: "s".into(),
            arm: None,
            x: vec![1.0],
            size: Size::Subjects(n),
            ybar: events as f64 / n as f64,
            s2: None,
            phi_hat: Some(1.0),
        }
    }

    #[test]
    fn sobol_first_points() {
        let pts: Vec<f64> = SobolSequence::new()
            .skip(1)
            .take(4)
            .map(SobolSequence::to_unit)
            .collect();
        assert_eq!(pts, vec![0.5, 0.75, 0.25, 0.375]);
        let first8: Vec<f64> = SobolSequence::new().take(8).map(SobolSequence::to_unit).collect();
        assert_eq!(first8, vec![0.0, 0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125]);
    }

    #[test]
    fn unscrambled_power_of_two_is_midpoint_grid() {
        let nodes = NodeSet::sobol(8, 0).unwrap();
        let mut u = nodes.uniform().to_vec();
        u.sort_by(f64::total_cmp);
        for (i, v) in u.iter().enumerate() {
            assert_eq!(*v, (i as f64 + 0.5) / 8.0);
        }
        // symmetric nodes
        let s: f64 = nodes.normal().iter().sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn nodes_lie_strictly_inside() {
        for seed in [0u64, 1, 2, 99, u64::MAX] {
            for b in [2usize, 3, 7, 64, 1000, 2048] {
                let nodes = NodeSet::sobol(b, seed).unwrap();
                assert_eq!(nodes.len(), b);
                assert!(nodes.uniform().iter().all(|&u| u > 0.0 && u < 1.0));
                assert!(nodes.normal().iter().all(|z| z.is_finite()));
            }
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(matches!(NodeSet::sobol(0, 0), Err(Error::TooFewNodes(0))));
        assert!(matches!(NodeSet::sobol(1, 0), Err(Error::TooFewNodes(1))));
    }

    #[test]
    fn scrambled_sets_differ_by_seed() {
        let a = NodeSet::sobol(64, 1).unwrap();
        let b = NodeSet::sobol(64, 2).unwrap();
        assert_ne!(a.uniform(), b.uniform());
        assert_eq!(a, NodeSet::sobol(64, 1).unwrap());
    }

    #[test]
    fn zero_tau_is_conditional_loglik() {
        let r = binomial_record(10, 3);
        let nodes = NodeSet::sobol(128, 0).unwrap();
        let got = marginal_loglik_study(&r, FamilySpec::binomial(), &[0.4], 0.0, &nodes).unwrap();
        let expected = 10.0 * (0.3 * 0.4 - (1.0 + 0.4f64.exp()).ln());
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance() {
        let r = binomial_record(40, 9);
        let nodes = NodeSet::sobol(256, 5).unwrap();
        let mut u = nodes.uniform().to_vec();
        u.reverse();
        u.rotate_left(37);
        let permuted = NodeSet::from_uniform(u).unwrap();
        let a = marginal_loglik_study(&r, FamilySpec::binomial(), &[-1.0], 0.7, &nodes).unwrap();
        let b = marginal_loglik_study(&r, FamilySpec::binomial(), &[-1.0], 0.7, &permuted).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn finite_when_some_node_is_finite() {
        // Gamma with an extreme predictor: most nodes underflow, a few survive.
        let r = StudyRecord {
            study_id: "g".into(),
            record_id: "g".into(),
            arm: None,
            x: vec![1.0],
            size: Size::Subjects(50),
            ybar: 3.0,
            s2: Some(9.0 * 0.01),
            phi_hat: Some(0.01),
        };
        let nodes = NodeSet::sobol(1024, 0).unwrap();
        let v = marginal_loglik_study(&r, FamilySpec::gamma(), &[-30.0], 100.0, &nodes).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn negative_tau2_rejected() {
        let r = binomial_record(10, 3);
        let nodes = NodeSet::sobol(16, 0).unwrap();
        assert!(marginal_loglik_study(&r, FamilySpec::binomial(), &[0.0], -1.0, &nodes).is_err());
    }
}
