//! Integer-valued probability laws (offspring and initial-population laws)
//! together with their generating functions, means and mgf domains.
//!
//! Infinite-support families are stored truncated at a caller-chosen `K`
//! with the missing mass recorded as `deficit`. The family tag is kept so
//! that the rate-function code can use the exact closed-form generating
//! function instead of the truncated series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(probs) + deficit == 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest truncation deficit accepted when building a truncated family.
pub const MAX_TRUNCATION_DEFICIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Bernoulli,
    Geometric,
    Poisson,
    Explicit,
}

/// Parametric family a [`Pmf`] was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `P(1) = p`, `P(0) = 1 - p`.
    Bernoulli {
        p: f64,
    },
    /// `P(h) = (1 - a) a^h` for `h >= 0`.
    Geometric {
        a: f64,
    },
    /// `P(h) = e^{-lambda} lambda^h / h!`.
    Poisson {
        lambda: f64,
    },
    Explicit,
}

impl Family {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::Bernoulli { .. } => FamilyTag::Bernoulli,
            Family::Geometric { .. } => FamilyTag::Geometric,
            Family::Poisson { .. } => FamilyTag::Poisson,
            Family::Explicit => FamilyTag::Explicit,
        }
    }
}

/// Family parameters as they appear in configuration files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `[support, probability]` pairs of an explicit law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<(u64, f64)>>,
}

/// Serializable description of a law:
/// `{"family": ..., "params": {...}, "truncation_K": int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub family: FamilyTag,
    #[serde(default)]
    pub params: FamilyParams,
    #[serde(rename = "truncation_K", default, skip_serializing_if = "Option::is_none")]
    pub truncation_k: Option<usize>,
}

impl DistSpec {
    pub fn bernoulli(p: f64) -> Self {
        Self {
            family: FamilyTag::Bernoulli,
            params: FamilyParams { p: Some(p), ..Default::default() },
            truncation_k: None,
        }
    }

    pub fn geometric(a: f64, truncation_k: usize) -> Self {
        Self {
            family: FamilyTag::Geometric,
            params: FamilyParams { a: Some(a), ..Default::default() },
            truncation_k: Some(truncation_k),
        }
    }

    pub fn poisson(lambda: f64, truncation_k: usize) -> Self {
        Self {
            family: FamilyTag::Poisson,
            params: FamilyParams { lambda: Some(lambda), ..Default::default() },
            truncation_k: Some(truncation_k),
        }
    }

    pub fn explicit(pairs: &[(u64, f64)]) -> Self {
        Self {
            family: FamilyTag::Explicit,
            params: FamilyParams { probs: Some(pairs.to_vec()), ..Default::default() },
            truncation_k: None,
        }
    }

    pub fn build(&self) -> Result<Pmf> {
        pmf_from_family(self.family, &self.params, self.truncation_k)
    }
}

/// Builds a law from a family tag and its parameters.
pub fn pmf_from_family(tag: FamilyTag, params: &FamilyParams, truncation_k: Option<usize>) -> Result<Pmf> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::ParameterDomain(format!("{tag:?} law requires parameter `{name}`")))
    };
    let need_k = || {
        truncation_k.ok_or_else(|| {
            Error::ParameterDomain(format!("{tag:?} law has infinite support; truncation_K is required"))
        })
    };
    match tag {
        FamilyTag::Bernoulli => Pmf::bernoulli(need(params.p, "p")?),
        FamilyTag::Geometric => Pmf::geometric(need(params.a, "a")?, need_k()?),
        FamilyTag::Poisson => Pmf::poisson(need(params.lambda, "lambda")?, need_k()?),
        FamilyTag::Explicit => {
            let pairs = params.probs.as_ref().ok_or_else(|| {
                Error::ParameterDomain("explicit law requires `probs` as [support, prob] pairs".into())
            })?;
            Pmf::explicit(pairs)
        }
    }
}

/// Domain of finiteness of a generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenFnDomain {
    /// Radius of convergence `R` of the power series.
    pub radius: f64,
    /// `f(R)`, possibly infinite.
    pub value_at_radius: f64,
    /// `log R`, the right end of `{theta : f(e^theta) < inf}`.
    pub theta_max: f64,
    /// Set when the law is a truncated approximation of an unknown
    /// infinite-support law, so the reported radius is an artifact.
    pub approximate: bool,
}

/// A probability mass function on the nonnegative integers.
///
/// `probs[h]` is the mass at `h`; trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
    deficit: f64,
    family: Family,
}

impl Pmf {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParameterDomain(format!("bernoulli p={p} not in [0,1]")));
        }
        Self::from_parts(vec![1.0 - p, p], 0.0, Family::Bernoulli { p })
    }

    pub fn geometric(a: f64, truncation_k: usize) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::ParameterDomain(format!("geometric ratio a={a} not in (0,1)")));
        }
        check_k(truncation_k)?;
        let mut probs = Vec::with_capacity(truncation_k + 1);
        let mut term = 1.0 - a;
        for _ in 0..=truncation_k {
            probs.push(term);
            term *= a;
        }
        Self::truncated_family(probs, truncation_k, Family::Geometric { a })
    }

    pub fn poisson(lambda: f64, truncation_k: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::ParameterDomain(format!("poisson lambda={lambda} must be > 0")));
        }
        check_k(truncation_k)?;
        let mut probs = Vec::with_capacity(truncation_k + 1);
        let mut term = (-lambda).exp();
        for h in 0..=truncation_k {
            if h > 0 {
                term *= lambda / h as f64;
            }
            probs.push(term);
        }
        Self::truncated_family(probs, truncation_k, Family::Poisson { lambda })
    }

    /// Explicit law from `(support, probability)` pairs; mass must sum to one.
    pub fn explicit(pairs: &[(u64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidPmf("explicit law has no support points".into()));
        }
        let top = pairs.iter().map(|&(h, _)| h).max().unwrap_or(0) as usize;
        let mut probs = vec![0.0; top + 1];
        let mut seen = vec![false; top + 1];
        for &(h, p) in pairs {
            let h = h as usize;
            if seen[h] {
                return Err(Error::InvalidPmf(format!("support point {h} listed twice")));
            }
            seen[h] = true;
            probs[h] = p;
        }
        Self::from_parts(probs, 0.0, Family::Explicit)
    }

    /// Dense law with an explicitly recorded missing mass, e.g. a truncated
    /// total-progeny distribution.
    pub fn truncated(probs: Vec<f64>, deficit: f64) -> Result<Self> {
        Self::from_parts(probs, deficit, Family::Explicit)
    }

    fn truncated_family(probs: Vec<f64>, k: usize, family: Family) -> Result<Self> {
        let deficit = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        if deficit > MAX_TRUNCATION_DEFICIT {
            return Err(Error::TruncationInsufficient { k, deficit });
        }
        Self::from_parts(probs, deficit, family)
    }

    fn from_parts(mut probs: Vec<f64>, deficit: f64, family: Family) -> Result<Self> {
        for (h, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidPmf(format!("probability {p} at {h} not in [0,1]")));
            }
        }
        if !(deficit.is_finite() && deficit >= -MASS_TOLERANCE) {
            return Err(Error::InvalidPmf(format!("deficit {deficit} must be >= 0")));
        }
        let deficit = deficit.max(0.0);
        let total: f64 = probs.iter().sum::<f64>() + deficit;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!(
                "mass plus deficit is {total}, expected 1 within {MASS_TOLERANCE:e}"
            )));
        }
        while probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(Error::InvalidPmf("no positive mass".into()));
        }
        Ok(Self { probs, deficit, family })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, h: usize) -> f64 {
        self.probs.get(h).copied().unwrap_or(0.0)
    }

    /// Support points with positive mass, in increasing order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Smallest support point and its mass.
    pub fn min_support(&self) -> (usize, f64) {
        self.support().next().expect("pmf has positive mass")
    }

    /// Largest support point and its mass, `None` for infinite-support families.
    pub fn max_support(&self) -> Option<(usize, f64)> {
        match self.family {
            Family::Geometric { .. } | Family::Poisson { .. } => None,
            _ => self.support().last(),
        }
    }

    /// The point carrying all the mass, if the law is a point mass.
    pub fn degenerate_point(&self) -> Option<usize> {
        let (lo, p) = self.min_support();
        (self.max_support() == Some((lo, p)) && self.deficit == 0.0).then_some(lo)
    }

    /// Mean over the represented support. For truncated laws this understates
    /// the true mean by at most `K * deficit`.
    pub fn mean(&self) -> f64 {
        self.support().map(|(h, p)| h as f64 * p).sum()
    }

    /// Mean of the untruncated law when the family is known.
    pub fn exact_mean(&self) -> f64 {
        match self.family {
            Family::Bernoulli { p } => p,
            Family::Geometric { a } => a / (1.0 - a),
            Family::Poisson { lambda } => lambda,
            Family::Explicit => self.mean(),
        }
    }

    /// `sum_h s^h p_h` over the represented support; `+inf` beyond the radius
    /// of the underlying law.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Argument(format!("pgf argument s={s} must be >= 0")));
        }
        let dom = self.domain();
        if s > dom.radius || (s == dom.radius && dom.value_at_radius.is_infinite()) {
            return Ok(f64::INFINITY);
        }
        Ok(horner(&self.probs, s))
    }

    /// Closed-form generating function of the untruncated family
    /// (series for explicit laws). Requires `s >= 0`.
    pub fn pgf_exact(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match self.family {
            Family::Bernoulli { p } => 1.0 - p + p * s,
            Family::Geometric { a } => {
                if a * s < 1.0 {
                    (1.0 - a) / (1.0 - a * s)
                } else {
                    f64::INFINITY
                }
            }
            Family::Poisson { lambda } => (lambda * (s - 1.0)).exp(),
            Family::Explicit => horner(&self.probs, s),
        }
    }

    /// Derivative of [`Pmf::pgf_exact`].
    pub fn pgf_derivative_exact(&self, s: f64) -> f64 {
        match self.family {
            Family::Bernoulli { p } => p,
            Family::Geometric { a } => {
                if a * s < 1.0 {
                    (1.0 - a) * a / ((1.0 - a * s) * (1.0 - a * s))
                } else {
                    f64::INFINITY
                }
            }
            Family::Poisson { lambda } => lambda * (lambda * (s - 1.0)).exp(),
            Family::Explicit => {
                let mut acc = 0.0;
                for h in (1..self.probs.len()).rev() {
                    acc = acc * s + h as f64 * self.probs[h];
                }
                acc
            }
        }
    }

    /// Cumulant generating function `log f(e^theta)` of the untruncated law,
    /// evaluated without overflow for large `|theta|`.
    pub fn cgf(&self, theta: f64) -> f64 {
        match self.family {
            Family::Bernoulli { p } => {
                if p == 0.0 {
                    0.0
                } else if p == 1.0 {
                    theta
                } else {
                    log_add((1.0 - p).ln(), p.ln() + theta)
                }
            }
            Family::Geometric { a } => {
                if theta >= -a.ln() {
                    f64::INFINITY
                } else {
                    (1.0 - a).ln() - (-a * theta.exp()).ln_1p()
                }
            }
            Family::Poisson { lambda } => lambda * theta.exp_m1(),
            Family::Explicit => {
                let top = self.support().map(|(h, p)| p.ln() + h as f64 * theta).fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = self.support().map(|(h, p)| (p.ln() + h as f64 * theta - top).exp()).sum();
                top + sum.ln()
            }
        }
    }

    pub fn domain(&self) -> GenFnDomain {
        match self.family {
            Family::Geometric { a } => {
                GenFnDomain { radius: 1.0 / a, value_at_radius: f64::INFINITY, theta_max: -a.ln(), approximate: false }
            }
            _ => GenFnDomain {
                radius: f64::INFINITY,
                value_at_radius: if self.probs.len() == 1 { self.probs[0] } else { f64::INFINITY },
                theta_max: f64::INFINITY,
                approximate: self.family == Family::Explicit && self.deficit > 0.0,
            },
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::ParameterDomain("truncation_K must be >= 1".into()));
    }
    Ok(())
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// `log(e^a + e^b)`.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
