//! Ideal, dominant-resource (DRP) and demand-specific (DSP) pricing.
//!
//! All prices are per request lifetime and exact. With unit prices `p_c` and
//! `p_b`:
//!
//! * ideal: `n·(c·p_c + b·p_b)`
//! * DRP:   `n·max(c, b)·(p_c + p_b)`
//! * DSP:   ideal plus a skew fee `n·(c−b)·p_b·λ_b` when `c ≥ b`, or
//!   `n·(b−c)·p_c·λ_c` otherwise.
//!
//! DSP interpolates between the two: `λ = 0` gives the ideal price and
//! `λ = 1` the DRP price.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{self, Rational};
use crate::request::{TemplateSet, VcRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitPrices {
    #[serde(with = "crate::frac::serde_str")]
    pub pc: Rational,
    #[serde(with = "crate::frac::serde_str")]
    pub pb: Rational,
}

impl UnitPrices {
    pub fn new(pc: Rational, pb: Rational) -> Result<Self> {
        let p = Self { pc, pb };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pc <= Rational::zero() || self.pb <= Rational::zero() {
            return Err(Error::Config("unit prices must be positive".into()));
        }
        Ok(())
    }
}

impl Default for UnitPrices {
    fn default() -> Self {
        Self {
            pc: Rational::one(),
            pb: Rational::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParams {
    #[serde(with = "crate::frac::serde_str")]
    pub lambda_c: Rational,
    #[serde(with = "crate::frac::serde_str")]
    pub lambda_b: Rational,
}

impl LambdaParams {
    pub fn new(lambda_c: Rational, lambda_b: Rational) -> Result<Self> {
        let l = Self { lambda_c, lambda_b };
        l.validate()?;
        Ok(l)
    }

    pub fn uniform(lambda: Rational) -> Self {
        Self {
            lambda_c: lambda,
            lambda_b: lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_c < Rational::zero() || self.lambda_b < Rational::zero() {
            return Err(Error::Config("lambda weights must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for LambdaParams {
    /// `λ_c = λ_b = 1/6`.
    fn default() -> Self {
        Self::uniform(frac::ratio(1, 6))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ideal,
    Drp,
    Dsp,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ideal => "ideal",
            Scheme::Drp => "drp",
            Scheme::Dsp => "dsp",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(Scheme::Ideal),
            "drp" => Ok(Scheme::Drp),
            "dsp" => Ok(Scheme::Dsp),
            other => Err(Error::Parse(format!("unknown pricing scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceQuote {
    pub scheme: Scheme,
    pub base: Rational,
    pub skew_fee: Rational,
    pub total: Rational,
}

impl PriceQuote {
    fn flat(scheme: Scheme, base: Rational) -> Self {
        Self {
            scheme,
            base,
            skew_fee: Rational::zero(),
            total: base,
        }
    }
}

fn count(req: &VcRequest) -> Rational {
    Rational::from_integer(req.n as i64)
}

pub fn price_ideal(req: &VcRequest, prices: &UnitPrices) -> PriceQuote {
    let base = count(req) * (req.c * prices.pc + req.b * prices.pb);
    PriceQuote::flat(Scheme::Ideal, base)
}

/// Fails when the request is larger than every template.
pub fn price_drp(req: &VcRequest, prices: &UnitPrices, templates: &TemplateSet) -> Result<PriceQuote> {
    templates.upgrade(req)?;
    let base = count(req) * req.c.max(req.b) * (prices.pc + prices.pb);
    Ok(PriceQuote::flat(Scheme::Drp, base))
}

pub fn price_dsp(req: &VcRequest, prices: &UnitPrices, lambdas: &LambdaParams) -> PriceQuote {
    let n = count(req);
    let base = n * (req.b * prices.pb + req.c * prices.pc);
    let skew_fee = if req.c >= req.b {
        n * (req.c - req.b) * prices.pb * lambdas.lambda_b
    } else {
        n * (req.b - req.c) * prices.pc * lambdas.lambda_c
    };
    PriceQuote {
        scheme: Scheme::Dsp,
        base,
        skew_fee,
        total: base + skew_fee,
    }
}

pub fn quote(
    scheme: Scheme,
    req: &VcRequest,
    prices: &UnitPrices,
    lambdas: &LambdaParams,
    templates: &TemplateSet,
) -> Result<PriceQuote> {
    match scheme {
        Scheme::Ideal => Ok(price_ideal(req, prices)),
        Scheme::Drp => price_drp(req, prices, templates),
        Scheme::Dsp => Ok(price_dsp(req, prices, lambdas)),
    }
}

/// Inputs to the λ calibration: `count` VMs of the skew direction being
/// calibrated, with mean per-VM demands `e_c` and `e_b`, and `delta` the
/// provider profit to hand back to customers across both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationInput {
    pub count: Rational,
    pub e_c: Rational,
    pub e_b: Rational,
    pub delta: Rational,
}

impl CalibrationInput {
    pub fn validate(&self) -> Result<()> {
        let unit = |r: &Rational| *r > Rational::zero() && *r <= Rational::one();
        if self.count < Rational::zero() {
            return Err(Error::Calibration("VM count must be >= 0".into()));
        }
        if !unit(&self.e_c) || !unit(&self.e_b) {
            return Err(Error::Calibration("expected demands must lie in (0, 1]".into()));
        }
        if self.delta < Rational::zero() {
            return Err(Error::Calibration("delta must be >= 0".into()));
        }
        Ok(())
    }
}

type Wide = num_rational::Ratio<i128>;

fn wide(r: Rational) -> Wide {
    Wide::new(*r.numer() as i128, *r.denom() as i128)
}

/// `1 − Δ / (2·excess_fee)` clamped to `[0, 1]`. Works in 128 bits because
/// measured inputs can carry large denominators.
fn solve(count: Rational, gap: Rational, unit_price: Rational, delta: Rational) -> Result<Rational> {
    let excess_fee = wide(count) * wide(gap) * wide(unit_price);
    if excess_fee <= Wide::zero() {
        return Err(Error::Calibration(
            "no skewed demand in this direction to calibrate against".into(),
        ));
    }
    let lambda = (Wide::one() - wide(delta) / (Wide::from_integer(2) * excess_fee))
        .clamp(Wide::zero(), Wide::one());
    match (i64::try_from(*lambda.numer()), i64::try_from(*lambda.denom())) {
        (Ok(num), Ok(den)) => Ok(Rational::new(num, den)),
        _ => frac::from_f64(*lambda.numer() as f64 / *lambda.denom() as f64),
    }
}

/// Solves `N·(E[c] − E[b])·p_b·(1 − λ_b) = Δ/2` for `λ_b`, clamped to `[0, 1]`.
pub fn calibrate_lambda_b(input: &CalibrationInput, prices: &UnitPrices) -> Result<Rational> {
    input.validate()?;
    solve(input.count, input.e_c - input.e_b, prices.pb, input.delta)
}

/// Solves `N·(E[b] − E[c])·p_c·(1 − λ_c) = Δ/2` for `λ_c`, clamped to `[0, 1]`.
pub fn calibrate_lambda_c(input: &CalibrationInput, prices: &UnitPrices) -> Result<Rational> {
    input.validate()?;
    solve(input.count, input.e_b - input.e_c, prices.pc, input.delta)
}
