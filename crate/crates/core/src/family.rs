//! Exponential-family outcome models.
//!
//! Each family is described in the natural-parameter form
//! `exp{(y * eta - b(eta)) / a(phi) + c(y, phi)}` together with the link that
//! connects the study mean to the linear predictor `theta = x'beta + v`.
//! Binomial, Poisson and Normal use their canonical links, so `eta = theta`.
//! Gamma uses the log link for the mean model while keeping the natural
//! parameter `eta = -1 / mu`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{logistic, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Binomial,
    Poisson,
    Gamma,
    Normal,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Binomial => "binomial",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Gamma => "gamma",
            FamilyKind::Normal => "normal",
        }
    }

    /// The link this crate pairs with each family.
    pub fn default_link(self) -> Link {
        match self {
            FamilyKind::Binomial => Link::Logit,
            FamilyKind::Poisson | FamilyKind::Gamma => Link::Log,
            FamilyKind::Normal => Link::Identity,
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binomial" => Ok(FamilyKind::Binomial),
            "poisson" => Ok(FamilyKind::Poisson),
            "gamma" => Ok(FamilyKind::Gamma),
            "normal" => Ok(FamilyKind::Normal),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

impl std::fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    Logit,
    Log,
    Identity,
    NegativeInverse,
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Link::Logit => "logit",
            Link::Log => "log",
            Link::Identity => "identity",
            Link::NegativeInverse => "negative-inverse",
        })
    }
}

/// An outcome family paired with its link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FamilySpec {
    kind: FamilyKind,
    link: Link,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, link: Link) -> Result<Self> {
        if kind.default_link() != link {
            return Err(Error::LinkMismatch(kind, link));
        }
        Ok(Self { kind, link })
    }

    pub fn binomial() -> Self {
        Self::of(FamilyKind::Binomial)
    }

    pub fn poisson() -> Self {
        Self::of(FamilyKind::Poisson)
    }

    pub fn gamma() -> Self {
        Self::of(FamilyKind::Gamma)
    }

    pub fn normal() -> Self {
        Self::of(FamilyKind::Normal)
    }

    pub fn of(kind: FamilyKind) -> Self {
        Self {
            kind,
            link: kind.default_link(),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn link(&self) -> Link {
        self.link
    }

    /// `exposure * b(eta)`.
    ///
    /// Binomial is evaluated per trial (`log(1 + e^eta)`); the number of
    /// trials enters through `exposure` or through the record weight in the
    /// aggregate likelihood.
    pub fn cumulant(&self, eta: f64, exposure: f64) -> Result<f64> {
        if !eta.is_finite() {
            return Err(self.invalid("eta", eta));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(self.invalid("exposure", exposure));
        }
        let b = match self.kind {
            FamilyKind::Binomial => softplus(eta),
            FamilyKind::Poisson => eta.exp(),
            FamilyKind::Gamma => {
                if eta >= 0.0 {
                    return Err(self.invalid("eta", eta));
                }
                -(-eta).ln()
            }
            FamilyKind::Normal => 0.5 * eta * eta,
        };
        Ok(exposure * b)
    }

    /// `b'(eta)`, the mean implied by a natural parameter.
    pub fn cumulant_mean(&self, eta: f64) -> Result<f64> {
        match self.kind {
            FamilyKind::Binomial => Ok(logistic(eta)),
            FamilyKind::Poisson => Ok(eta.exp()),
            FamilyKind::Gamma => {
                if eta >= 0.0 {
                    return Err(self.invalid("eta", eta));
                }
                Ok(-1.0 / eta)
            }
            FamilyKind::Normal => Ok(eta),
        }
    }

    /// `b''(eta)`, the unit variance function on the natural scale.
    pub fn cumulant_variance(&self, eta: f64) -> Result<f64> {
        match self.kind {
            FamilyKind::Binomial => {
                let p = logistic(eta);
                Ok(p * (1.0 - p))
            }
            FamilyKind::Poisson => Ok(eta.exp()),
            FamilyKind::Gamma => {
                if eta >= 0.0 {
                    return Err(self.invalid("eta", eta));
                }
                Ok(1.0 / (eta * eta))
            }
            FamilyKind::Normal => Ok(1.0),
        }
    }

    /// The link `g(mu)`: maps a mean to the linear-predictor scale.
    pub fn link_fn(&self, mu: f64) -> Result<f64> {
        match self.kind {
            FamilyKind::Binomial => {
                if mu <= 0.0 || mu >= 1.0 {
                    return self.boundary(mu);
                }
                Ok((mu / (1.0 - mu)).ln())
            }
            FamilyKind::Poisson | FamilyKind::Gamma => {
                if mu <= 0.0 {
                    return self.boundary(mu);
                }
                Ok(mu.ln())
            }
            FamilyKind::Normal => {
                if !mu.is_finite() {
                    return self.boundary(mu);
                }
                Ok(mu)
            }
        }
    }

    /// The inverse link `g^{-1}(theta)`: the mean at a linear predictor.
    pub fn inverse_link(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Binomial => logistic(theta),
            FamilyKind::Poisson | FamilyKind::Gamma => theta.exp(),
            FamilyKind::Normal => theta,
        }
    }

    /// Natural parameter at a linear predictor. The identity for canonical
    /// links; `-exp(-theta)` for the log-link gamma model.
    #[inline]
    pub fn natural_param_from_theta(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gamma => -(-theta).exp(),
            _ => theta,
        }
    }

    fn invalid(&self, what: &'static str, value: f64) -> Error {
        Error::InvalidParameter {
            family: self.kind,
            what,
            value,
        }
    }

    fn boundary<T>(&self, mu: f64) -> Result<T> {
        Err(Error::BoundaryMean {
            family: self.kind,
            mu,
        })
    }
}

/// A study's linear predictor `x'beta + v`.
#[derive(Debug, Clone, Copy)]
pub struct LinearPredictor<'a> {
    pub covariates: &'a [f64],
    pub coefficients: &'a [f64],
    pub random_effect: f64,
}

impl LinearPredictor<'_> {
    pub fn value(&self) -> f64 {
        dot(self.covariates, self.coefficients) + self.random_effect
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
