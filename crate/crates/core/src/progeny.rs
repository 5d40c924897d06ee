//! Total progeny of a Galton-Watson process started from a random initial
//! population: extinction probabilities, the total-progeny law (via iterated
//! convolution) and its generating function (via the fixed-point equation
//! `G(s) = s f(G(s))`).

use crate::error::{Error, Result};
use crate::offspring::Pmf;

/// Convergence threshold for the monotone fixed-point iterations.
pub const FIXED_POINT_TOL: f64 = 1e-14;
pub const FIXED_POINT_MAX_ITER: usize = 1_000_000;
/// Residual accepted by the Newton solve for `s > 1`.
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 200;

/// Offspring law `f`, initial-population law `g` and derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgenyModel {
    f: Pmf,
    g: Pmf,
    mu_f: f64,
    mu_g: f64,
    nu: f64,
    p_ext_unit: f64,
    p_ext: f64,
}

impl ProgenyModel {
    pub fn new(f: Pmf, g: Pmf) -> Result<Self> {
        let mu_f = f.exact_mean();
        let mu_g = g.exact_mean();
        let nu = if mu_f > 1.0 { f64::INFINITY } else { mean_of_progeny(mu_f, mu_g) };
        let p_ext_unit = extinction_probability(&f)?;
        let p_ext = g.pgf_exact(p_ext_unit);
        Ok(Self { f, g, mu_f, mu_g, nu, p_ext_unit, p_ext })
    }

    /// Model with a single ancestor (`g = id`).
    pub fn unit_start(f: Pmf) -> Result<Self> {
        Self::new(f, Pmf::explicit(&[(1, 1.0)])?)
    }

    pub fn f(&self) -> &Pmf {
        &self.f
    }

    pub fn g(&self) -> &Pmf {
        &self.g
    }

    pub fn mu_f(&self) -> f64 {
        self.mu_f
    }

    pub fn mu_g(&self) -> f64 {
        self.mu_g
    }

    /// Mean total progeny `mu_g / (1 - mu_f)`; infinite when `mu_f >= 1`
    /// and `mu_g > 0`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn p_ext_unit(&self) -> f64 {
        self.p_ext_unit
    }

    pub fn p_ext(&self) -> f64 {
        self.p_ext
    }

    pub fn subcritical_strict(&self) -> bool {
        self.mu_f < 1.0
    }

    pub fn q0_zero(&self) -> bool {
        self.g.prob(0) == 0.0
    }

    /// Smallest support point of the initial population.
    pub fn r_min(&self) -> usize {
        self.g.min_support().0
    }

    /// Fails unless the total progeny is almost surely finite.
    pub fn require_finite_progeny(&self) -> Result<()> {
        require_finite_progeny(&self.f)
    }

    /// Fails unless the joint mgf of (total progeny, initial population) is
    /// finite near the origin: `p_0 > 0`, `mu_f < 1` and `g` has a
    /// neighbourhood of zero in its cgf domain.
    pub fn require_joint_mgf(&self) -> Result<()> {
        require_strictly_subcritical(&self.f)?;
        if !(self.g.domain().theta_max > 0.0) {
            return Err(Error::Hypothesis("the initial-population mgf must be finite near the origin".into()));
        }
        Ok(())
    }

    /// [`ProgenyModel::require_joint_mgf`] plus `q_0 = 0`, which keeps the
    /// offspring-mean estimators well defined.
    pub fn require_estimator_hypotheses(&self) -> Result<()> {
        self.require_joint_mgf()?;
        if !self.q0_zero() {
            return Err(Error::Hypothesis(format!("estimators of mu_f need q_0 = 0 (got q_0 = {})", self.g.prob(0))));
        }
        Ok(())
    }
}

pub(crate) fn require_finite_progeny(f: &Pmf) -> Result<()> {
    if f.prob(0) <= 0.0 {
        return Err(Error::Hypothesis("total progeny needs p_0 > 0 (otherwise the process never dies out)".into()));
    }
    if f.exact_mean() > 1.0 {
        return Err(Error::Hypothesis(format!("total progeny needs mu_f <= 1 (got mu_f = {})", f.exact_mean())));
    }
    Ok(())
}

pub(crate) fn require_strictly_subcritical(f: &Pmf) -> Result<()> {
    require_finite_progeny(f)?;
    if f.exact_mean() >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "a finite mgf near the origin needs mu_f < 1 (got mu_f = {})",
            f.exact_mean()
        )));
    }
    Ok(())
}

fn mean_of_progeny(mu_f: f64, mu_g: f64) -> f64 {
    if mu_f < 1.0 {
        mu_g / (1.0 - mu_f)
    } else if mu_g > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Minimal fixed point of `f` on `[0, 1]`.
pub fn extinction_probability(f: &Pmf) -> Result<f64> {
    if f.prob(0) > 0.0 && f.exact_mean() <= 1.0 {
        return Ok(1.0);
    }
    let mut s = 0.0;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = f.pgf_exact(s);
        if (next - s).abs() < FIXED_POINT_TOL {
            return Ok(next);
        }
        s = next;
    }
    Err(Error::Convergence(format!("extinction fixed point did not settle in {FIXED_POINT_MAX_ITER} iterations")))
}

/// Total-progeny law with one ancestor, `pi_k = p^{*k}_{k-1} / k`, for
/// `1 <= k <= k_max`. The missing mass is recorded as the deficit.
pub fn total_progeny_pmf_dwass(f: &Pmf, k_max: usize) -> Result<Pmf> {
    require_finite_progeny(f)?;
    if k_max < 1 {
        return Err(Error::Argument("K_max must be >= 1".into()));
    }
    // Entries above index k_max - 1 never feed p^{*k}_{k-1} for k <= k_max.
    let width = k_max;
    let base: Vec<f64> = f.probs().iter().copied().take(width).collect();
    let mut power = base.clone();
    power.resize(width, 0.0);
    let mut pi = vec![0.0; k_max + 1];
    pi[1] = power[0];
    for k in 2..=k_max {
        power = convolve_truncated(&power, &base, width);
        pi[k] = power[k - 1] / k as f64;
    }
    let deficit = (1.0 - pi.iter().sum::<f64>()).max(0.0);
    Pmf::truncated(pi, deficit)
}

/// Law of the total progeny from a random start: `sum_r q_r pi^{*r}`,
/// truncated at `k_max`.
pub fn compound_progeny_pmf(model: &ProgenyModel, k_max: usize) -> Result<Pmf> {
    let unit = total_progeny_pmf_dwass(model.f(), k_max)?;
    let width = k_max + 1;
    let mut base = unit.probs().to_vec();
    base.resize(width, 0.0);
    let mut out = vec![0.0; width];
    let mut power = vec![0.0; width];
    power[0] = 1.0;
    let mut r = 0usize;
    for (support, q) in model.g().support() {
        while r < support {
            power = convolve_truncated(&power, &base, width);
            r += 1;
        }
        for (o, p) in out.iter_mut().zip(&power) {
            *o += q * p;
        }
    }
    let deficit = (1.0 - out.iter().sum::<f64>()).max(0.0);
    Pmf::truncated(out, deficit)
}

fn convolve_truncated(a: &[f64], b: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; width];
    for (j, &bj) in b.iter().enumerate().filter(|&(_, &v)| v != 0.0) {
        for (i, &ai) in a.iter().enumerate().take(width - j) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Generating function `G(s)` of the total progeny with one ancestor.
///
/// For `s <= 1` this is the limit of `G <- s f(G)` from zero. For `s > 1`
/// it is the smallest root above one of `s f(u) = u`, found by Newton's
/// method from `u = 1`; `+inf` when no such root exists.
pub fn total_progeny_pgf(f: &Pmf, s: f64) -> Result<f64> {
    require_finite_progeny(f)?;
    if !(s >= 0.0) {
        return Err(Error::Argument(format!("pgf argument s={s} must be >= 0")));
    }
    if s == 1.0 {
        return Ok(1.0);
    }
    if s < 1.0 {
        return monotone_fixed_point(f, s);
    }
    newton_root(f, s)
}

fn monotone_fixed_point(f: &Pmf, s: f64) -> Result<f64> {
    let mut u = 0.0;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = s * f.pgf_exact(u);
        if (next - u).abs() <= FIXED_POINT_TOL * next {
            return Ok(polish(f, s, next));
        }
        u = next;
    }
    Err(Error::Convergence(format!("total-progeny pgf fixed point at s={s} did not settle")))
}

/// A few Newton steps on `s f(u) - u` from a converged iterate; the minimal
/// root has `s f'(u) < 1`, so the steps stay on the same root.
fn polish(f: &Pmf, s: f64, mut u: f64) -> f64 {
    for _ in 0..3 {
        let dh = s * f.pgf_derivative_exact(u) - 1.0;
        if !(dh < 0.0) {
            break;
        }
        let next = u - (s * f.pgf_exact(u) - u) / dh;
        if !(next.is_finite() && next >= 0.0) || (next - u).abs() > 1e-10 * u.max(1e-300) {
            break;
        }
        u = next;
    }
    u
}

fn newton_root(f: &Pmf, s: f64) -> Result<f64> {
    // h(u) = s f(u) - u is convex with h(1) = s - 1 > 0, so Newton from 1
    // climbs monotonically to the smallest root while h' < 0.
    let mut u = 1.0;
    for _ in 0..NEWTON_MAX_ITER {
        let fu = f.pgf_exact(u);
        if !fu.is_finite() {
            return Ok(f64::INFINITY);
        }
        let h = s * fu - u;
        let small = h.abs() <= NEWTON_RESIDUAL_TOL * u.max(1.0);
        if h <= 0.0 {
            return Ok(u);
        }
        let dh = s * f.pgf_derivative_exact(u) - 1.0;
        if !(dh < 0.0) {
            // h positive and no longer decreasing: no root unless we sit on
            // a double root.
            return Ok(if small { u } else { f64::INFINITY });
        }
        let mut step = -h / dh;
        if step <= 4.0 * f64::EPSILON * u {
            return Ok(u);
        }
        // Damp steps that leave the domain of f.
        while !f.pgf_exact(u + step).is_finite() {
            step *= 0.5;
            if step <= f64::EPSILON * u {
                return Ok(f64::INFINITY);
            }
        }
        u += step;
    }
    let h = s * f.pgf_exact(u) - u;
    if h.abs() <= NEWTON_RESIDUAL_TOL * u.max(1.0) {
        return Ok(u);
    }
    Err(Error::Convergence(format!("Newton solve for the total-progeny pgf at s={s} exceeded {NEWTON_MAX_ITER} steps")))
}

/// `g(G(s))`, the generating function of the total progeny from a random start.
pub fn compound_pgf(model: &ProgenyModel, s: f64) -> Result<f64> {
    let inner = total_progeny_pgf(model.f(), s)?;
    if inner.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(model.g().pgf_exact(inner))
}

/// Mean total progeny; errors in the supercritical case.
pub fn progeny_mean(model: &ProgenyModel) -> Result<f64> {
    if model.mu_f() > 1.0 {
        return Err(Error::Hypothesis(format!("mean total progeny needs mu_f <= 1 (got mu_f = {})", model.mu_f())));
    }
    Ok(mean_of_progeny(model.mu_f(), model.mu_g()))
}
