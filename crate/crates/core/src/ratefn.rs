//! Legendre-Fenchel transforms of cumulant generating functions and the
//! large-deviation rate functions built from them.
//!
//! Every rate function here comes with two evaluation routes where that is
//! possible:
//!
//! * the *closed* route composes the offspring rate `I_f` and the
//!   initial-population rate `I_g` through the identities
//!   `I_G(y) = y I_f((y-1)/y)` and
//!   `I(y, z) = y I_f((y-z)/y) + I_g(z)`;
//! * the *direct* / *oracle* route computes the supremum defining the rate
//!   from the generating function of the total progeny itself, obtained by
//!   solving `G(s) = s f(G(s))`, and never touches the identities.
//!
//! Agreement of the two routes is what the verification suite checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::Pmf;
use crate::optimize::maximize_unimodal;
use crate::progeny::{require_finite_progeny, require_strictly_subcritical, total_progeny_pgf, ProgenyModel};

/// Largest `|theta|` explored; `e^theta` overflows shortly after 709.
pub const THETA_CAP: f64 = 700.0;
/// Bisection tolerance on the dual variable.
pub const THETA_TOL: f64 = 1e-11;
/// Stopping rule for the edge-of-domain refinement.
pub const EDGE_TOL: f64 = 1e-8;
/// Tolerance of the golden-section searches over `beta` and `z`.
pub const GOLDEN_TOL: f64 = 1e-9;

/// A support point together with the log of its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: f64,
    pub ln_prob: f64,
}

type CgfFn<'a> = dyn Fn(f64) -> Result<f64> + Send + Sync + 'a;

/// A cumulant generating function `theta -> log E[e^{theta W}]` with the
/// metadata the transform needs.
pub struct CgfEvaluator<'a> {
    eval: Box<CgfFn<'a>>,
    theta_max: f64,
    mean: f64,
    lower: Atom,
    upper: Option<Atom>,
}

impl<'a> CgfEvaluator<'a> {
    /// `eval` must be convex, vanish at zero and return `+inf` to the right
    /// of `theta_max`. `lower` / `upper` are the extreme support points of
    /// the law (`upper` is `None` for unbounded support).
    pub fn new<F>(eval: F, theta_max: f64, mean: f64, lower: Atom, upper: Option<Atom>) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'a,
    {
        Self { eval: Box::new(eval), theta_max, mean, lower, upper }
    }

    /// `log f(e^theta)` of a law, using the closed form of tagged families.
    pub fn from_pmf(law: &'a Pmf) -> Self {
        let theta_max = law.domain().theta_max;
        let (lo, p_lo) = law.min_support();
        let upper = law.max_support().map(|(h, p)| Atom { point: h as f64, ln_prob: p.ln() });
        Self::new(
            move |theta| Ok(if theta > theta_max { f64::INFINITY } else { law.cgf(theta) }),
            theta_max,
            law.exact_mean(),
            Atom { point: lo as f64, ln_prob: p_lo.ln() },
            upper,
        )
    }

    /// `log G(e^beta)` for the total progeny with one ancestor, with `G`
    /// obtained by solving its fixed-point equation.
    pub fn total_progeny(f: &'a Pmf) -> Result<Self> {
        require_finite_progeny(f)?;
        let theta_max = progeny_theta_max(f)?;
        let p0 = f.prob(0);
        let no_children = f.degenerate_point() == Some(0);
        let mu = f.exact_mean();
        let mean = if mu < 1.0 { 1.0 / (1.0 - mu) } else { f64::INFINITY };
        Ok(Self::new(
            move |beta| {
                if beta > theta_max {
                    return Ok(f64::INFINITY);
                }
                let s = beta.exp();
                if !s.is_finite() {
                    return Ok(f64::INFINITY);
                }
                Ok(total_progeny_pgf(f, s)?.ln())
            },
            theta_max,
            mean,
            Atom { point: 1.0, ln_prob: p0.ln() },
            no_children.then_some(Atom { point: 1.0, ln_prob: 0.0 }),
        ))
    }

    /// Cgf of the law of `V_0` exponentially tilted by `ln_c`:
    /// `gamma -> log g(e^{gamma + ln_c}) - log g(e^{ln_c})`.
    fn tilted(g: &'a Pmf, ln_c: f64) -> Self {
        let base = g.cgf(ln_c);
        let c = ln_c.exp();
        let mean = c * g.pgf_derivative_exact(c) / g.pgf_exact(c);
        let theta_max = g.domain().theta_max - ln_c;
        let atom = |(h, p): (usize, f64)| Atom { point: h as f64, ln_prob: p.ln() + h as f64 * ln_c - base };
        Self::new(
            move |gamma| Ok(if gamma > theta_max { f64::INFINITY } else { g.cgf(gamma + ln_c) - base }),
            theta_max,
            mean,
            atom(g.min_support()),
            g.max_support().map(atom),
        )
    }

    pub fn eval(&self, theta: f64) -> Result<f64> {
        (self.eval)(theta)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn lower(&self) -> Atom {
        self.lower
    }

    pub fn upper(&self) -> Option<Atom> {
        self.upper
    }

    /// Central-difference slope, one-sided at the right domain edge and
    /// `+inf` beyond it.
    fn slope(&self, theta: f64) -> Result<f64> {
        let h = 1e-7 * theta.abs().max(1.0);
        let mid = self.eval(theta)?;
        if !mid.is_finite() {
            return Ok(f64::INFINITY);
        }
        let left = self.eval(theta - h)?;
        let right = self.eval(theta + h)?;
        Ok(if right.is_finite() { (right - left) / (2.0 * h) } else { (mid - left) / h })
    }
}

/// Right end of the domain of `beta -> log G(e^beta)`.
///
/// `s = u / f(u)` along the fixed-point curve, so the largest admissible
/// `log s` is the supremum of `alpha - log f(e^alpha)` over `alpha >= 0`.
pub fn progeny_theta_max(f: &Pmf) -> Result<f64> {
    if f.degenerate_point() == Some(0) {
        return Ok(f64::INFINITY);
    }
    let upper = f.domain().theta_max.min(THETA_CAP);
    let best = maximize_unimodal(
        |alpha| {
            let v = f.cgf(alpha);
            Ok(if v.is_finite() { alpha - v } else { f64::NEG_INFINITY })
        },
        0.0,
        0.0,
        upper,
        1e-12,
    )?;
    Ok(best.value)
}

/// Where the optimum defining a rate value sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Interior maximizer of `theta x - cgf(theta)`.
    Theta(f64),
    /// Supremum approached as `theta -> -inf` (argument at the lowest support point).
    ThetaToMinusInf,
    /// Supremum approached as `theta -> +inf` (argument at the highest support point).
    ThetaToPlusInf,
    /// Supremum attained at the right end of a finite cgf domain.
    DomainEdge(f64),
    /// Search hit `|theta| = THETA_CAP`; the value is the one at the cap.
    Saturated(f64),
    /// Located minimizer of a variational formula over the initial-population mean.
    Minimizer(f64),
    /// Argument outside the closed convex hull of the support.
    OutsideSupport,
    /// Value assembled from other rate values.
    Composite,
}

/// A rate value in `[0, inf]` with the location of its optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub value: f64,
    pub optimizer: Optimizer,
}

impl RateValue {
    pub fn infinite() -> Self {
        Self { value: f64::INFINITY, optimizer: Optimizer::OutsideSupport }
    }

    fn composite(value: f64) -> Self {
        Self { value: value.max(0.0), optimizer: Optimizer::Composite }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self.optimizer, Optimizer::Saturated(_))
    }
}

/// `sup_theta { theta x - cgf(theta) }`.
pub fn legendre(cgf: &CgfEvaluator<'_>, x: f64) -> Result<RateValue> {
    if x.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    let lower = cgf.lower();
    if x < lower.point {
        return Ok(RateValue::infinite());
    }
    if x == lower.point {
        return Ok(RateValue { value: -lower.ln_prob, optimizer: Optimizer::ThetaToMinusInf });
    }
    if let Some(upper) = cgf.upper() {
        if x > upper.point {
            return Ok(RateValue::infinite());
        }
        if x == upper.point {
            return Ok(RateValue { value: -upper.ln_prob, optimizer: Optimizer::ThetaToPlusInf });
        }
    }
    if !x.is_finite() {
        return Ok(RateValue::infinite());
    }
    if x == cgf.mean() {
        return Ok(RateValue { value: 0.0, optimizer: Optimizer::Theta(0.0) });
    }
    let objective = |theta: f64| -> Result<f64> { Ok(theta * x - cgf.eval(theta)?) };

    // Bracket the root of slope(theta) = x, walking away from zero.
    let upward = x >= cgf.mean();
    let right_limit = cgf.theta_max().min(THETA_CAP);
    let (mut lo, mut hi);
    if upward {
        lo = 0.0;
        hi = 1.0f64.min(right_limit);
        loop {
            if cgf.slope(hi)? >= x {
                break;
            }
            if hi >= right_limit {
                if right_limit >= THETA_CAP && cgf.theta_max() > THETA_CAP {
                    let value = objective(hi)?;
                    return Ok(RateValue { value: value.max(0.0), optimizer: Optimizer::Saturated(hi) });
                }
                return sup_at_edge(cgf, x, lo);
            }
            lo = hi;
            hi = (2.0 * hi).min(right_limit);
        }
    } else {
        hi = 0.0;
        lo = -1.0;
        loop {
            if cgf.slope(lo)? <= x {
                break;
            }
            if lo <= -THETA_CAP {
                let value = objective(lo)?;
                return Ok(RateValue { value: value.max(0.0), optimizer: Optimizer::Saturated(lo) });
            }
            hi = lo;
            lo = (2.0 * lo).max(-THETA_CAP);
        }
    }

    for _ in 0..400 {
        if hi - lo <= THETA_TOL * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cgf.slope(mid)? >= x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut best = (theta, objective(theta)?);
    for t in [lo, hi] {
        let v = objective(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(RateValue { value: best.1.max(0.0), optimizer: Optimizer::Theta(best.0) })
}

/// The slope stays below `x` up to the right end of a finite domain.
fn sup_at_edge(cgf: &CgfEvaluator<'_>, x: f64, last_inside: f64) -> Result<RateValue> {
    let edge = cgf.theta_max();
    let at_edge = cgf.eval(edge)?;
    if at_edge.is_finite() {
        let value = edge * x - at_edge;
        return Ok(RateValue { value: value.max(0.0), optimizer: Optimizer::DomainEdge(edge) });
    }
    // Approach the edge on a geometric grid, extrapolating the sequence of
    // values linearly in the gap.
    let phi = |t: f64| -> Result<f64> { Ok(t * x - cgf.eval(t)?) };
    let mut gap = (edge - last_inside).max(f64::EPSILON);
    let mut best = phi(last_inside)?;
    let mut prev_value = best;
    let mut prev_estimate = f64::NAN;
    for _ in 0..200 {
        gap *= 0.5;
        let t = edge - gap;
        if t >= edge {
            break;
        }
        let v = phi(t)?;
        if !v.is_finite() {
            continue;
        }
        best = best.max(v);
        let estimate = 2.0 * v - prev_value;
        if (estimate - prev_estimate).abs() < EDGE_TOL {
            best = best.max(estimate);
            break;
        }
        prev_estimate = estimate;
        prev_value = v;
    }
    Ok(RateValue { value: best.max(0.0), optimizer: Optimizer::DomainEdge(edge) })
}

/// Rate function of empirical means of the offspring law.
pub fn rate_offspring(f: &Pmf, x: f64) -> Result<RateValue> {
    legendre(&CgfEvaluator::from_pmf(f), x)
}

/// Rate function of empirical means of the initial-population law.
pub fn rate_initial(g: &Pmf, z: f64) -> Result<RateValue> {
    legendre(&CgfEvaluator::from_pmf(g), z)
}

/// Total-progeny rate through the offspring rate: `y I_f((y-1)/y)`.
pub fn rate_progeny_closed(f: &Pmf, y: f64) -> Result<RateValue> {
    require_strictly_subcritical(f)?;
    if y.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if y < 1.0 {
        return Ok(RateValue::infinite());
    }
    let inner = rate_offspring(f, (y - 1.0) / y)?;
    Ok(RateValue::composite(y * inner.value))
}

/// Total-progeny rate as the transform of `log G(e^beta)`.
pub fn rate_progeny_direct(f: &Pmf, y: f64) -> Result<RateValue> {
    require_strictly_subcritical(f)?;
    legendre(&CgfEvaluator::total_progeny(f)?, y)
}

/// Joint rate of (mean total progeny, mean initial population).
pub fn rate_bivariate(model: &ProgenyModel, y: f64, z: f64) -> Result<RateValue> {
    model.require_joint_mgf()?;
    if y.is_nan() || z.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if y >= z && z > 0.0 {
        let i_f = rate_offspring(model.f(), (y - z) / y)?.value;
        let i_g = rate_initial(model.g(), z)?.value;
        Ok(RateValue::composite(y * i_f + i_g))
    } else if y == 0.0 && z == 0.0 {
        Ok(RateValue::composite(rate_initial(model.g(), 0.0)?.value))
    } else {
        Ok(RateValue::infinite())
    }
}

/// Joint rate as the two-dimensional supremum of
/// `beta y + gamma z - log g(e^gamma G(e^beta))`: an outer golden-section
/// search over `beta`, an inner transform over `gamma`.
///
/// Points with `y < z` or `z < 0` are outside the support cone and return
/// `+inf` directly; on the boundary `y = z` the outer search saturates at
/// `beta = -THETA_CAP` with the limiting value.
pub fn rate_bivariate_oracle(model: &ProgenyModel, y: f64, z: f64) -> Result<RateValue> {
    model.require_joint_mgf()?;
    if y.is_nan() || z.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if !(y >= z && z >= 0.0) {
        return Ok(RateValue::infinite());
    }
    let f = model.f();
    let g = model.g();
    let beta_max = progeny_theta_max(f)?.min(THETA_CAP);
    let mut outside = false;
    let profile = |beta: f64| -> Result<f64> {
        let c = total_progeny_pgf(f, beta.exp())?;
        if !(c.is_finite() && c > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let ln_c = c.ln();
        let inner = legendre(&CgfEvaluator::tilted(g, ln_c), z)?;
        Ok(beta * y + inner.value - g.cgf(ln_c))
    };
    let start = 0.0f64.min(beta_max);
    let best = maximize_unimodal(
        |beta| {
            let v = profile(beta)?;
            if v == f64::INFINITY {
                outside = true;
            }
            Ok(v)
        },
        start,
        -THETA_CAP,
        beta_max,
        GOLDEN_TOL,
    )?;
    if outside || best.value == f64::INFINITY {
        return Ok(RateValue::infinite());
    }
    let optimizer = if best.at_lower { Optimizer::Saturated(best.arg) } else { Optimizer::Theta(best.arg) };
    Ok(RateValue { value: best.value.max(0.0), optimizer })
}

/// Rate of the estimator `(Y - Z) / Y`: `-log g(exp(-I_f(x) / (1 - x)))`
/// on `[0, 1)`.
pub fn rate_estimator_ratio(model: &ProgenyModel, x: f64) -> Result<RateValue> {
    model.require_estimator_hypotheses()?;
    if x.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if !(0.0..1.0).contains(&x) {
        return Ok(RateValue::infinite());
    }
    let i_f = rate_offspring(model.f(), x)?.value;
    if !i_f.is_finite() {
        // g(0) = q_0 = 0.
        return Ok(RateValue::infinite());
    }
    Ok(RateValue::composite(-model.g().cgf(-i_f / (1.0 - x))))
}

/// Rate of `(Y - Z) / Y` obtained by minimizing the joint rate along the
/// ray `y = z / (1 - x)` instead of using the closed form.
pub fn rate_estimator_ratio_contraction(model: &ProgenyModel, x: f64) -> Result<RateValue> {
    model.require_estimator_hypotheses()?;
    if x.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if !(0.0..1.0).contains(&x) {
        return Ok(RateValue::infinite());
    }
    let g = model.g();
    let lo = g.min_support().0 as f64;
    let hi = match g.max_support() {
        Some((h, _)) => h as f64,
        None => upper_tail_bound(g),
    };
    minimize_over(lo, hi, model.mu_g(), |z| Ok(rate_bivariate(model, z / (1.0 - x), z)?.value))
}

/// Rate of the estimator built from a deterministic initial population of
/// `mu_g` individuals: `mu_g I_f(x) / (1 - x)` on `[0, 1)`.
pub fn rate_estimator_deterministic(f: &Pmf, mu_g: u64, x: f64) -> Result<RateValue> {
    if mu_g < 1 {
        return Err(Error::Hypothesis("deterministic initial population must be >= 1".into()));
    }
    deterministic_rate(f, mu_g as f64, x)
}

fn deterministic_rate(f: &Pmf, mu_g: f64, x: f64) -> Result<RateValue> {
    require_strictly_subcritical(f)?;
    if x.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if !(0.0..1.0).contains(&x) {
        return Ok(RateValue::infinite());
    }
    let i_f = rate_offspring(f, x)?.value;
    Ok(RateValue::composite(mu_g * i_f / (1.0 - x)))
}

/// Rate of the estimator `(Y - mu_g) / Y`: the infimum over `z` of the
/// joint rate at `(mu_g / (1 - x), z)`.
pub fn rate_estimator_meaninit(model: &ProgenyModel, x: f64) -> Result<RateValue> {
    model.require_estimator_hypotheses()?;
    if x.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if x >= 1.0 {
        return Ok(RateValue::infinite());
    }
    let y = model.mu_g() / (1.0 - x);
    if model.f().degenerate_point() == Some(0) {
        // No offspring: Y = Z and the infimum sits at z = y.
        let r_min = model.r_min() as f64;
        if x < 1.0 - model.mu_g() / r_min {
            return Ok(RateValue::infinite());
        }
        let v = rate_initial(model.g(), y)?;
        return Ok(RateValue { value: v.value, optimizer: Optimizer::Minimizer(y) });
    }
    min_joint_rate_over_z(model, y)
}

/// Rate of the mean total progeny from a random start,
/// `inf_z I(y, z)`. Equals `I_G(y)` when the start is a single ancestor.
pub fn rate_progeny_compound(model: &ProgenyModel, y: f64) -> Result<RateValue> {
    model.require_joint_mgf()?;
    if y.is_nan() {
        return Err(Error::Argument("rate argument is NaN".into()));
    }
    if y < model.r_min() as f64 || y <= 0.0 {
        return Ok(RateValue::infinite());
    }
    min_joint_rate_over_z(model, y)
}

fn min_joint_rate_over_z(model: &ProgenyModel, y: f64) -> Result<RateValue> {
    let f = model.f();
    let g = model.g();
    // Both summands are finite exactly on this bracket.
    let f_min = f.min_support().0 as f64;
    let f_max = f.max_support().map_or(f64::INFINITY, |(h, _)| h as f64);
    let r_min = g.min_support().0 as f64;
    let r_max = g.max_support().map_or(f64::INFINITY, |(h, _)| h as f64);
    let lo = r_min.max(y * (1.0 - f_max)).max(0.0);
    let hi = y.min(r_max).min(y * (1.0 - f_min));
    if lo > hi + 1e-12 * y.max(1.0) {
        return Ok(RateValue::infinite());
    }
    let hi = hi.max(lo);
    minimize_over(lo, hi, model.mu_g(), |z| {
        let i_f = rate_offspring(f, (y - z) / y)?.value;
        let i_g = rate_initial(g, z)?.value;
        Ok(y * i_f + i_g)
    })
}

fn minimize_over<F>(lo: f64, hi: f64, guess: f64, objective: F) -> Result<RateValue>
where
    F: Fn(f64) -> Result<f64>,
{
    let start = guess.clamp(lo, hi);
    let best = maximize_unimodal(|z| Ok(-objective(z)?), start, lo, hi, GOLDEN_TOL)?;
    if best.value == f64::NEG_INFINITY {
        return Ok(RateValue::infinite());
    }
    Ok(RateValue { value: (-best.value).max(0.0), optimizer: Optimizer::Minimizer(best.arg) })
}

/// A point far enough in the upper tail of an infinite-support law that the
/// initial-population rate there exceeds any value of interest.
fn upper_tail_bound(g: &Pmf) -> f64 {
    let mut z = (2.0 * g.exact_mean()).max(g.min_support().0 as f64 + 1.0);
    while z < 1e6 {
        match rate_initial(g, z) {
            Ok(v) if v.value > 50.0 => break,
            _ => z *= 2.0,
        }
    }
    z
}

/// One row of the random-start versus deterministic-start comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub x: f64,
    pub j_random: f64,
    pub j_diamond: f64,
    pub i_f: f64,
    /// `j_random <= j_diamond + 1e-10`.
    pub leq_ok: bool,
    /// `j_diamond - j_random > 1e-9`.
    pub strict: bool,
    /// `j_diamond > i_f > 0`, checked for `x` in `(0,1)` away from `mu_f`
    /// when `mu_g >= 1`.
    pub chain: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub mu_g: f64,
    /// `mu_g` is not an integer, so the deterministic start is not a
    /// population size and the comparison is an extrapolation.
    pub extrapolated: bool,
    pub rows: Vec<ComparisonRow>,
}

/// Tabulates the estimator rate under the random start against the rate
/// under a deterministic start of size `mu_g`.
pub fn compare_rates(model: &ProgenyModel, xs: &[f64]) -> Result<ComparisonTable> {
    model.require_estimator_hypotheses()?;
    let mu_g = model.mu_g();
    let extrapolated = (mu_g - mu_g.round()).abs() > 1e-12;
    let mu_f = model.mu_f();
    let rows = xs
        .iter()
        .map(|&x| {
            let j_random = rate_estimator_ratio(model, x)?.value;
            let j_diamond = deterministic_rate(model.f(), mu_g, x)?.value;
            let i_f = rate_offspring(model.f(), x)?.value;
            let leq_ok = j_random <= j_diamond + 1e-10 || (j_random.is_infinite() && j_diamond.is_infinite());
            let strict = j_diamond.is_finite() && j_diamond - j_random > 1e-9;
            let chain = (x > 0.0 && x < 1.0 && x != mu_f && mu_g >= 1.0).then_some(j_diamond > i_f && i_f > 0.0);
            Ok(ComparisonRow { x, j_random, j_diamond, i_f, leq_ok, strict, chain })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable { mu_g, extrapolated, rows })
}

/// Which rate function a [`RateFunction`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Offspring,
    Initial,
    Progeny,
    ProgenyCompound,
    EstimatorRatio,
    EstimatorDeterministic,
    EstimatorMeaninit,
}

/// How a rate value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Composition of `I_f` and `I_g`.
    Closed,
    /// Transform of the law's own cgf.
    Direct,
    /// Numerical optimization of a variational formula.
    Oracle,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Closed => "closed",
            Route::Direct => "direct",
            Route::Oracle => "oracle",
        }
    }
}

/// A rate function bound to a model, with its domain and zero point.
#[derive(Debug, Clone, Copy)]
pub struct RateFunction<'m> {
    model: &'m ProgenyModel,
    kind: RateKind,
    route: Route,
}

impl<'m> RateFunction<'m> {
    pub fn new(model: &'m ProgenyModel, kind: RateKind, route: Route) -> Result<Self> {
        let ok = match kind {
            RateKind::Offspring | RateKind::Initial => route == Route::Direct,
            RateKind::Progeny => matches!(route, Route::Closed | Route::Direct),
            RateKind::EstimatorRatio => matches!(route, Route::Closed | Route::Oracle),
            RateKind::ProgenyCompound | RateKind::EstimatorMeaninit => route == Route::Oracle,
            RateKind::EstimatorDeterministic => route == Route::Closed,
        };
        if !ok {
            return Err(Error::Argument(format!("route {} is not available for {kind:?}", route.as_str())));
        }
        Ok(Self { model, kind, route })
    }

    /// The route used when none is requested.
    pub fn default_route(kind: RateKind) -> Route {
        match kind {
            RateKind::Offspring | RateKind::Initial => Route::Direct,
            RateKind::ProgenyCompound | RateKind::EstimatorMeaninit => Route::Oracle,
            _ => Route::Closed,
        }
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn eval(&self, x: f64) -> Result<RateValue> {
        let m = self.model;
        match (self.kind, self.route) {
            (RateKind::Offspring, _) => rate_offspring(m.f(), x),
            (RateKind::Initial, _) => rate_initial(m.g(), x),
            (RateKind::Progeny, Route::Direct) => rate_progeny_direct(m.f(), x),
            (RateKind::Progeny, _) => rate_progeny_closed(m.f(), x),
            (RateKind::ProgenyCompound, _) => rate_progeny_compound(m, x),
            (RateKind::EstimatorRatio, Route::Oracle) => rate_estimator_ratio_contraction(m, x),
            (RateKind::EstimatorRatio, _) => rate_estimator_ratio(m, x),
            (RateKind::EstimatorDeterministic, _) => {
                let mu_g = m.mu_g();
                if (mu_g - mu_g.round()).abs() > 1e-12 {
                    return Err(Error::Hypothesis(format!(
                        "a deterministic initial population needs an integer mu_g (got {mu_g})"
                    )));
                }
                rate_estimator_deterministic(m.f(), mu_g.round() as u64, x)
            }
            (RateKind::EstimatorMeaninit, _) => rate_estimator_meaninit(m, x),
        }
    }

    /// The argument at which the rate vanishes.
    pub fn zero_point(&self) -> f64 {
        let m = self.model;
        match self.kind {
            RateKind::Offspring => m.mu_f(),
            RateKind::Initial => m.mu_g(),
            RateKind::Progeny => 1.0 / (1.0 - m.mu_f()),
            RateKind::ProgenyCompound => m.nu(),
            RateKind::EstimatorRatio | RateKind::EstimatorDeterministic | RateKind::EstimatorMeaninit => m.mu_f(),
        }
    }

    /// Closed interval outside which the rate is infinite (right end may be
    /// `+inf`; for the estimators it is the open end 1).
    pub fn domain(&self) -> (f64, f64) {
        let m = self.model;
        let f_lo = m.f().min_support().0 as f64;
        let f_hi = m.f().max_support().map_or(f64::INFINITY, |(h, _)| h as f64);
        let g_lo = m.g().min_support().0 as f64;
        let g_hi = m.g().max_support().map_or(f64::INFINITY, |(h, _)| h as f64);
        match self.kind {
            RateKind::Offspring => (f_lo, f_hi),
            RateKind::Initial => (g_lo, g_hi),
            RateKind::Progeny => (1.0, f64::INFINITY),
            RateKind::ProgenyCompound => (g_lo, f64::INFINITY),
            RateKind::EstimatorRatio | RateKind::EstimatorDeterministic => (0.0, 1.0),
            RateKind::EstimatorMeaninit => (1.0 - m.mu_g() / g_lo, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Binary relative entropy of `x` against Bernoulli(1/2).
    fn kl_half(x: f64) -> f64 {
        let t = |u: f64| if u == 0.0 { 0.0 } else { u * u.ln() };
        2f64.ln() + t(x) + t(1.0 - x)
    }

    fn half() -> Pmf {
        Pmf::bernoulli(0.5).unwrap()
    }

    fn g12() -> Pmf {
        Pmf::explicit(&[(1, 0.5), (2, 0.5)]).unwrap()
    }

    fn model() -> ProgenyModel {
        ProgenyModel::new(half(), g12()).unwrap()
    }

    #[test]
    fn legendre_bernoulli() {
        let law = half();
        let cgf = CgfEvaluator::from_pmf(&law);
        assert_abs_diff_eq!(legendre(&cgf, 0.5).unwrap().value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(legendre(&cgf, 0.25).unwrap().value, 0.130812035941137, epsilon = 1e-10);
        assert_abs_diff_eq!(legendre(&cgf, 0.25).unwrap().value, kl_half(0.25), epsilon = 1e-10);
        let v = legendre(&cgf, 0.0).unwrap();
        assert_abs_diff_eq!(v.value, 2f64.ln(), epsilon = 1e-15);
        assert_eq!(v.optimizer, Optimizer::ThetaToMinusInf);
        assert!(legendre(&cgf, -0.1).unwrap().value.is_infinite());
        assert!(legendre(&cgf, 1.1).unwrap().value.is_infinite());
        assert!(legendre(&cgf, f64::NAN).is_err());
    }

    #[test]
    fn legendre_optimizer_solves_slope_equation() {
        // Bernoulli(1/2): slope e^t / (1 + e^t) = x  =>  t = log(x / (1 - x)).
        let law = half();
        let cgf = CgfEvaluator::from_pmf(&law);
        match legendre(&cgf, 0.8).unwrap().optimizer {
            Optimizer::Theta(t) => assert_abs_diff_eq!(t, 4f64.ln(), epsilon = 1e-6),
            other => panic!("unexpected optimizer {other:?}"),
        }
    }

    #[test]
    fn legendre_domain_edge_formula() {
        // cgf finite at its right edge with a bounded slope: theta * 0.3 on
        // (-inf, 1], +inf beyond, support pinned at 0 below.
        let cgf = CgfEvaluator::new(
            |t| Ok(if t > 1.0 { f64::INFINITY } else { (0.3 * t).max(0.3 * t) }),
            1.0,
            0.3,
            Atom { point: 0.0, ln_prob: f64::NEG_INFINITY },
            None,
        );
        let v = legendre(&cgf, 0.8).unwrap();
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-12);
        assert_eq!(v.optimizer, Optimizer::DomainEdge(1.0));
    }

    #[test]
    fn legendre_domain_edge_grid() {
        // Open right edge: the sup 0.5 is approached but never attained.
        let cgf = CgfEvaluator::new(
            |t| Ok(if t >= 1.0 { f64::INFINITY } else { 0.3 * t }),
            1.0,
            0.3,
            Atom { point: 0.0, ln_prob: f64::NEG_INFINITY },
            None,
        );
        let v = legendre(&cgf, 0.8).unwrap();
        assert_abs_diff_eq!(v.value, 0.5, epsilon = 1e-7);
    }

    #[test]
    fn legendre_saturates_at_cap() {
        // Slope t / sqrt(1 + t^2) never reaches 1; the sup at x = 1 is 1.
        let cgf = CgfEvaluator::new(
            |t: f64| Ok((1.0 + t * t).sqrt() - 1.0),
            f64::INFINITY,
            0.0,
            Atom { point: f64::NEG_INFINITY, ln_prob: 0.0 },
            None,
        );
        let v = legendre(&cgf, 1.0).unwrap();
        assert_eq!(v.optimizer, Optimizer::Saturated(THETA_CAP));
        assert_abs_diff_eq!(v.value, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn offspring_and_initial_rates() {
        assert_abs_diff_eq!(rate_offspring(&half(), 0.5).unwrap().value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rate_offspring(&half(), 2.0 / 3.0).unwrap().value, kl_half(2.0 / 3.0), epsilon = 1e-10);
        let zero = Pmf::explicit(&[(0, 1.0)]).unwrap();
        assert_eq!(rate_offspring(&zero, 0.0).unwrap().value, 0.0);
        assert!(rate_offspring(&zero, 0.1).unwrap().value.is_infinite());
        assert_abs_diff_eq!(rate_initial(&g12(), 1.5).unwrap().value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rate_initial(&g12(), 1.0).unwrap().value, 2f64.ln(), epsilon = 1e-15);
        assert!(rate_initial(&g12(), 0.5).unwrap().value.is_infinite());
    }

    #[test]
    fn progeny_closed_examples() {
        assert_abs_diff_eq!(rate_progeny_closed(&half(), 2.0).unwrap().value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rate_progeny_closed(&half(), 4.0 / 3.0).unwrap().value, 0.174416047921516, epsilon = 1e-9);
        assert_abs_diff_eq!(rate_progeny_closed(&half(), 3.0).unwrap().value, 3.0 * kl_half(2.0 / 3.0), epsilon = 1e-9);
        assert!(rate_progeny_closed(&half(), 0.9).unwrap().value.is_infinite());
        let crit = Pmf::explicit(&[(0, 0.5), (2, 0.5)]).unwrap();
        assert!(matches!(rate_progeny_closed(&crit, 2.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn progeny_direct_examples() {
        assert_abs_diff_eq!(rate_progeny_direct(&half(), 2.0).unwrap().value, 0.0, epsilon = 1e-9);
        let closed = rate_progeny_closed(&half(), 4.0 / 3.0).unwrap().value;
        assert_abs_diff_eq!(rate_progeny_direct(&half(), 4.0 / 3.0).unwrap().value, closed, epsilon = 1e-6);
        assert_abs_diff_eq!(rate_progeny_direct(&half(), 1.0).unwrap().value, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn progeny_theta_max_values() {
        assert_abs_diff_eq!(progeny_theta_max(&half()).unwrap(), 2f64.ln(), epsilon = 1e-9);
        let pois = Pmf::poisson(0.6, 60).unwrap();
        let want = (1.0f64 / 0.6).ln() + 0.6 - 1.0;
        assert_abs_diff_eq!(progeny_theta_max(&pois).unwrap(), want, epsilon = 1e-12);
        assert!(progeny_theta_max(&Pmf::explicit(&[(0, 1.0)]).unwrap()).unwrap().is_infinite());
    }

    #[test]
    fn bivariate_examples() {
        let m = model();
        assert_abs_diff_eq!(rate_bivariate(&m, 3.0, 1.5).unwrap().value, 0.0, epsilon = 1e-12);
        assert!(rate_bivariate(&m, 1.0, 2.0).unwrap().value.is_infinite());
        assert_abs_diff_eq!(rate_bivariate(&m, 2.0, 1.0).unwrap().value, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn bivariate_oracle_examples() {
        let m = model();
        assert_abs_diff_eq!(rate_bivariate_oracle(&m, 3.0, 1.5).unwrap().value, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rate_bivariate_oracle(&m, 2.0, 1.0).unwrap().value, 2f64.ln(), epsilon = 1e-5);
        let closed = rate_bivariate(&m, 2.5, 1.2).unwrap().value;
        assert_abs_diff_eq!(rate_bivariate_oracle(&m, 2.5, 1.2).unwrap().value, closed, epsilon = 1e-5);
        assert!(rate_bivariate_oracle(&m, 1.0, 2.0).unwrap().value.is_infinite());
    }

    #[test]
    fn estimator_ratio_examples() {
        let m = model();
        assert_abs_diff_eq!(rate_estimator_ratio(&m, 0.5).unwrap().value, 0.0, epsilon = 1e-12);
        let t = (-kl_half(0.25) / 0.75).exp();
        let want = -(0.5 * t + 0.5 * t * t).ln();
        assert_abs_diff_eq!(rate_estimator_ratio(&m, 0.25).unwrap().value, want, epsilon = 1e-10);
        assert_abs_diff_eq!(want, 0.257826, epsilon = 1e-6);
        assert!(rate_estimator_ratio(&m, -0.1).unwrap().value.is_infinite());
        assert!(rate_estimator_ratio(&m, 1.0).unwrap().value.is_infinite());
        let with_q0 = ProgenyModel::new(half(), Pmf::explicit(&[(0, 0.5), (1, 0.5)]).unwrap()).unwrap();
        assert!(matches!(rate_estimator_ratio(&with_q0, 0.3), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn estimator_deterministic_examples() {
        let closed = rate_progeny_closed(&half(), 4.0 / 3.0).unwrap().value;
        assert_abs_diff_eq!(rate_estimator_deterministic(&half(), 1, 0.25).unwrap().value, closed, epsilon = 1e-12);
        assert_abs_diff_eq!(rate_estimator_deterministic(&half(), 2, 0.5).unwrap().value, 0.0, epsilon = 1e-12);
        assert!(rate_estimator_deterministic(&half(), 2, 1.2).unwrap().value.is_infinite());
        assert!(matches!(rate_estimator_deterministic(&half(), 0, 0.3), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn estimator_meaninit_examples() {
        let v = rate_estimator_meaninit(&model(), 0.5).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-9);
        match v.optimizer {
            Optimizer::Minimizer(z) => assert_abs_diff_eq!(z, 1.5, epsilon = 1e-4),
            other => panic!("unexpected optimizer {other:?}"),
        }
        let none = ProgenyModel::new(Pmf::explicit(&[(0, 1.0)]).unwrap(), g12()).unwrap();
        assert_abs_diff_eq!(rate_estimator_meaninit(&none, -0.5).unwrap().value, 2f64.ln(), epsilon = 1e-12);
        assert!(rate_estimator_meaninit(&none, -0.6).unwrap().value.is_infinite());
        assert!(rate_estimator_meaninit(&none, 1.0).unwrap().value.is_infinite());
    }

    #[test]
    fn contraction_route_matches_closed_form() {
        let m = model();
        for &x in &[0.0, 0.25, 0.5, 0.7] {
            let a = rate_estimator_ratio(&m, x).unwrap().value;
            let b = rate_estimator_ratio_contraction(&m, x).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn compound_rate_reduces_to_unit_start() {
        let m = ProgenyModel::unit_start(half()).unwrap();
        for &y in &[1.0, 1.5, 3.0, 5.0] {
            let a = rate_progeny_compound(&m, y).unwrap().value;
            let b = rate_progeny_closed(&half(), y).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn comparison_examples() {
        let t = compare_rates(&model(), &[0.5, 0.25]).unwrap();
        assert!(t.extrapolated);
        let r = t.rows[0];
        assert_abs_diff_eq!(r.j_random, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.j_diamond, 0.0, epsilon = 1e-12);
        let r = t.rows[1];
        assert_abs_diff_eq!(r.j_random, 0.257826, epsilon = 1e-6);
        assert_abs_diff_eq!(r.j_diamond, 0.261624, epsilon = 1e-6);
        assert!(r.leq_ok && r.strict);

        let det = ProgenyModel::new(half(), Pmf::explicit(&[(2, 1.0)]).unwrap()).unwrap();
        let t = compare_rates(&det, &[0.0, 0.1, 0.25, 0.6, 0.9]).unwrap();
        assert!(!t.extrapolated);
        for r in t.rows {
            assert_abs_diff_eq!(r.j_random, r.j_diamond, epsilon = 1e-12);
            assert!(r.leq_ok && !r.strict);
        }
    }

    #[test]
    fn rate_function_metadata() {
        let m = model();
        let rf = RateFunction::new(&m, RateKind::Progeny, Route::Direct).unwrap();
        assert_abs_diff_eq!(rf.zero_point(), 2.0);
        assert_abs_diff_eq!(rf.eval(2.0).unwrap().value, 0.0, epsilon = 1e-9);
        assert!(RateFunction::new(&m, RateKind::Offspring, Route::Oracle).is_err());
        let mi = RateFunction::new(&m, RateKind::EstimatorMeaninit, Route::Oracle).unwrap();
        assert_abs_diff_eq!(mi.domain().0, -0.5);
        let det = RateFunction::new(&m, RateKind::EstimatorDeterministic, Route::Closed).unwrap();
        assert!(matches!(det.eval(0.3), Err(Error::Hypothesis(_))));
    }
}
