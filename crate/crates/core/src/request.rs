//! Virtual cluster requests and DRP template upgrading.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{self, Rational};

pub type VcId = u64;

/// One virtual cluster demand `VC(n, c, b)`.
///
/// `c` is the per-VM share of one host's compute and `b` the per-VM share of
/// one host's access link; both lie in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VcRequest {
    pub id: VcId,
    pub n: u32,
    pub c: Rational,
    pub b: Rational,
    pub arrival: f64,
    pub duration: f64,
}

impl VcRequest {
    pub fn new(
        id: VcId,
        n: u32,
        c: Rational,
        b: Rational,
        arrival: f64,
        duration: f64,
    ) -> Result<Self> {
        let req = Self {
            id,
            n,
            c,
            b,
            arrival,
            duration,
        };
        req.validate()?;
        Ok(req)
    }

    /// A request with no time attached, for one-off embedding or pricing.
    pub fn shape(id: VcId, n: u32, c: Rational, b: Rational) -> Result<Self> {
        Self::new(id, n, c, b, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |r: &Rational| *r > Rational::zero() && *r <= Rational::one();
        if self.n == 0 {
            return Err(Error::InvalidRequest(format!("vc {}: n must be >= 1", self.id)));
        }
        if !unit(&self.c) {
            return Err(Error::InvalidRequest(format!(
                "vc {}: c = {} is outside (0, 1]",
                self.id,
                frac::format(&self.c)
            )));
        }
        if !unit(&self.b) {
            return Err(Error::InvalidRequest(format!(
                "vc {}: b = {} is outside (0, 1]",
                self.id,
                frac::format(&self.b)
            )));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidRequest(format!(
                "vc {}: duration must be positive, got {}",
                self.id, self.duration
            )));
        }
        if !self.arrival.is_finite() {
            return Err(Error::InvalidRequest(format!("vc {}: arrival is not finite", self.id)));
        }
        Ok(())
    }

    /// The resource ratio `c / b`. Balanced requests have ratio 1.
    pub fn resource_ratio(&self) -> Rational {
        self.c / self.b
    }

    pub fn is_balanced(&self) -> bool {
        self.c == self.b
    }

    pub fn departure(&self) -> f64 {
        self.arrival + self.duration
    }

    /// Same request with a different per-VM demand; used for DRP upgrades.
    pub fn with_demand(&self, c: Rational, b: Rational) -> Self {
        Self {
            c,
            b,
            ..self.clone()
        }
    }

    /// Total compute `n * c`.
    pub fn total_compute(&self) -> Rational {
        self.c * Rational::from_integer(self.n as i64)
    }

    /// Total hose bandwidth `n * b`.
    pub fn total_bandwidth(&self) -> Rational {
        self.b * Rational::from_integer(self.n as i64)
    }
}

/// Ordered DRP templates `(t, t)`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateSet {
    #[serde(with = "crate::frac::serde_str_vec")]
    sizes: Vec<Rational>,
}

impl TemplateSet {
    pub fn new(sizes: Vec<Rational>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidTemplates("template set is empty".into()));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTemplates(
                "templates must be strictly increasing".into(),
            ));
        }
        if sizes
            .iter()
            .any(|t| *t <= Rational::zero() || *t > Rational::one())
        {
            return Err(Error::InvalidTemplates("templates must lie in (0, 1]".into()));
        }
        Ok(Self { sizes })
    }

    /// `(1/8, 1/8)`, `(1/4, 1/4)`, `(1/2, 1/2)`.
    pub fn small_medium_large() -> Self {
        Self {
            sizes: vec![frac::ratio(1, 8), frac::ratio(1, 4), frac::ratio(1, 2)],
        }
    }

    pub fn sizes(&self) -> &[Rational] {
        &self.sizes
    }

    pub fn largest(&self) -> Rational {
        *self.sizes.last().expect("nonempty by construction")
    }

    pub fn covers(&self, value: &Rational) -> bool {
        *value <= self.largest()
    }

    /// Smallest template `t >= max(c, b)`, applied to both resources.
    pub fn upgrade(&self, req: &VcRequest) -> Result<(Rational, Rational)> {
        let needed = req.c.max(req.b);
        self.sizes
            .iter()
            .find(|t| **t >= needed)
            .map(|t| (*t, *t))
            .ok_or_else(|| Error::Unpriceable {
                needed: frac::format(&needed),
                largest: frac::format(&self.largest()),
            })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::small_medium_large()
    }
}

pub fn resource_ratio(req: &VcRequest) -> Rational {
    req.resource_ratio()
}

pub fn drp_upgrade(req: &VcRequest, templates: &TemplateSet) -> Result<(Rational, Rational)> {
    templates.upgrade(req)
}
