//! Morrey-type weight functions and the admissibility class `G_p`.
//!
//! A weight `phi : (0, inf) -> (0, inf)` belongs to `G_p` when it is
//! nondecreasing and `t^(-d/p) phi(t)` is nonincreasing. Membership, the
//! quantitative epsilon growth condition and the tail integral conditions are
//! decided analytically for the symbolic variants and on a finite geometric
//! grid otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbolic or tabulated weight shape. Evaluation is `scale * shape(t)` with
/// the scale kept on [`PhiSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum PhiVariant {
    /// `phi(t) = c`
    Constant { c: f64 },
    /// `phi(t) = t^u`, `u >= 0`
    Power { u: f64 },
    /// `phi(t) = t^(d/u)` for `t <= 1`, `t^(d/v)` for `t > 1`
    PiecewisePower { u: f64, v: f64 },
    /// `phi(t) = t^exponent * (log(shift + t))^a`
    PowerLog { exponent: f64, a: f64, shift: f64 },
    /// Log-linear interpolation through strictly increasing knots
    Tabulated {
        knots: Vec<f64>,
        values: Vec<f64>,
        extrapolate: bool,
    },
}

/// A candidate weight function together with its reference parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSpec {
    #[serde(flatten)]
    pub variant: PhiVariant,
    pub d: u32,
    pub p: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl PhiSpec {
    pub fn new(variant: PhiVariant, d: u32, p: f64) -> Result<Self> {
        let spec = PhiSpec {
            variant,
            d,
            p,
            scale: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(c: f64, d: u32, p: f64) -> Result<Self> {
        PhiSpec::new(PhiVariant::Constant { c }, d, p)
    }

    pub fn one(d: u32, p: f64) -> Self {
        PhiSpec::constant(1.0, d, p).expect("constant one is always valid")
    }

    pub fn power(u: f64, d: u32, p: f64) -> Result<Self> {
        PhiSpec::new(PhiVariant::Power { u }, d, p)
    }

    pub fn piecewise_power(u: f64, v: f64, d: u32, p: f64) -> Result<Self> {
        PhiSpec::new(PhiVariant::PiecewisePower { u, v }, d, p)
    }

    /// The power-log family with base exponent `d/p`.
    pub fn power_log(a: f64, shift: f64, d: u32, p: f64) -> Result<Self> {
        PhiSpec::new(
            PhiVariant::PowerLog {
                exponent: d as f64 / p,
                a,
                shift,
            },
            d,
            p,
        )
    }

    pub fn tabulated(
        knots: Vec<f64>,
        values: Vec<f64>,
        extrapolate: bool,
        d: u32,
        p: f64,
    ) -> Result<Self> {
        PhiSpec::new(
            PhiVariant::Tabulated {
                knots,
                values,
                extrapolate,
            },
            d,
            p,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Argument("dimension d must be >= 1".into()));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::Argument(
                "reference integrability p must be positive".into(),
            ));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Argument("scale must be positive".into()));
        }
        match &self.variant {
            PhiVariant::Constant { c } => {
                if !(*c > 0.0) {
                    return Err(Error::Argument("constant weight must be positive".into()));
                }
            }
            PhiVariant::Power { u } => {
                if !(*u >= 0.0) || !u.is_finite() {
                    return Err(Error::Argument("power exponent u must be >= 0".into()));
                }
            }
            PhiVariant::PiecewisePower { u, v } => {
                if !(*u > 0.0 && *v > 0.0) {
                    return Err(Error::Argument(
                        "piecewise exponents u, v must be positive".into(),
                    ));
                }
            }
            PhiVariant::PowerLog {
                exponent,
                a: _,
                shift,
            } => {
                if !(*shift > 1.0) {
                    return Err(Error::Argument("power-log shift L must exceed 1".into()));
                }
                if !exponent.is_finite() {
                    return Err(Error::Argument("power-log exponent must be finite".into()));
                }
            }
            PhiVariant::Tabulated { knots, values, .. } => {
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(Error::Argument(
                        "tabulated weight needs matching knots and values, at least two".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) || !(knots[0] > 0.0) {
                    return Err(Error::Argument(
                        "tabulated knots must be strictly increasing and positive".into(),
                    ));
                }
                if values.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Argument(
                        "tabulated values must be strictly positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluate `phi(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!(
                "phi evaluated at nonpositive t = {t}"
            )));
        }
        let shape = match &self.variant {
            PhiVariant::Constant { c } => *c,
            PhiVariant::Power { u } => t.powf(*u),
            PhiVariant::PiecewisePower { u, v } => {
                if t <= 1.0 {
                    t.powf(self.d as f64 / u)
                } else {
                    t.powf(self.d as f64 / v)
                }
            }
            PhiVariant::PowerLog { exponent, a, shift } => {
                t.powf(*exponent) * (shift + t).ln().powf(*a)
            }
            PhiVariant::Tabulated {
                knots,
                values,
                extrapolate,
            } => {
                let first = knots[0];
                let last = *knots.last().unwrap();
                if (t < first || t > last) && !extrapolate {
                    return Err(Error::Domain(format!(
                        "t = {t} outside tabulated range [{first}, {last}] and extrapolation is disabled"
                    )));
                }
                let lt = t.ln();
                // segment for log-linear interpolation; end slopes extended
                let seg = match knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
                    Ok(i) => i.min(knots.len() - 2),
                    Err(i) => i.clamp(1, knots.len() - 1) - 1,
                };
                let (t0, t1) = (knots[seg].ln(), knots[seg + 1].ln());
                let (v0, v1) = (values[seg].ln(), values[seg + 1].ln());
                let w = (lt - t0) / (t1 - t0);
                (v0 + w * (v1 - v0)).exp()
            }
        };
        Ok(self.scale * shape)
    }

    /// Return a copy rescaled so that `phi(1) = 1`.
    pub fn normalized(&self) -> Result<PhiSpec> {
        let at_one = self.eval(1.0)?;
        let mut out = self.clone();
        out.scale /= at_one;
        Ok(out)
    }

    /// Multiply the weight by `t^extra`, staying inside the symbolic family.
    /// Used for the embedding with `phi2(t) = phi1(t) t^(d(1/p2 - 1/p1))`.
    pub fn times_power(&self, extra: f64, new_d: u32, new_p: f64) -> Result<PhiSpec> {
        let mut scale = self.scale;
        let variant = match &self.variant {
            PhiVariant::Constant { c } => {
                if extra == 0.0 {
                    PhiVariant::Constant { c: *c }
                } else {
                    scale *= c;
                    PhiVariant::Power { u: extra }
                }
            }
            PhiVariant::Power { u } => PhiVariant::Power { u: u + extra },
            PhiVariant::PiecewisePower { u, v } => {
                let d = self.d as f64;
                PhiVariant::PiecewisePower {
                    u: d / (d / u + extra),
                    v: d / (d / v + extra),
                }
            }
            PhiVariant::PowerLog { exponent, a, shift } => PhiVariant::PowerLog {
                exponent: exponent + extra,
                a: *a,
                shift: *shift,
            },
            PhiVariant::Tabulated {
                knots,
                values,
                extrapolate,
            } => PhiVariant::Tabulated {
                knots: knots.clone(),
                values: knots
                    .iter()
                    .zip(values)
                    .map(|(&k, &v)| v * k.powf(extra))
                    .collect(),
                extrapolate: *extrapolate,
            },
        };
        let mut out = PhiSpec {
            variant,
            d: new_d,
            p: new_p,
            scale,
        };
        out.validate()?;
        if let PhiVariant::Power { u } = out.variant {
            out.variant = PhiVariant::Power { u: u.max(0.0) };
        }
        Ok(out)
    }
}

/// Default geometric grid: 601 points over `[1e-6, 1e6]`.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(1e-6, 1e6, 601)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

const MONOTONE_RTOL: f64 = 1e-12;

/// Membership verdict with an optional violating pair.
#[derive(Clone, Debug, Serialize)]
pub struct GpVerdict {
    pub member: bool,
    /// A pair `(t, s)` with `t <= s` violating monotonicity of `phi` or of
    /// `t^(-d/p) phi(t)`, when the grid exhibits one.
    pub witness: Option<(f64, f64)>,
}

fn grid_for(phi: &PhiSpec, t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument(
            "t grid must be strictly increasing with >= 2 points".into(),
        ));
    }
    if let PhiVariant::Tabulated {
        knots, extrapolate, ..
    } = &phi.variant
    {
        if !extrapolate {
            let lo = knots[0];
            let hi = *knots.last().unwrap();
            let mut g: Vec<f64> = t_grid
                .iter()
                .cloned()
                .filter(|&t| t >= lo && t <= hi)
                .collect();
            g.extend(knots.iter().cloned());
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            g.dedup();
            if g.len() < 2 {
                return Err(Error::Argument(
                    "grid does not overlap tabulated range".into(),
                ));
            }
            return Ok(g);
        }
    }
    Ok(t_grid.to_vec())
}

/// Extrema of `psi(t) = c ln(L + t) + a t / (L + t)` over `(0, inf)`; this is
/// the sign-determining factor of the power-log derivative conditions.
fn power_log_extrema(c: f64, a: f64, shift: f64) -> (f64, f64) {
    let mut candidates = vec![c * shift.ln()];
    if c > 0.0 {
        candidates.push(f64::INFINITY);
    } else if c < 0.0 {
        candidates.push(f64::NEG_INFINITY);
    } else {
        candidates.push(a);
    }
    if c != 0.0 {
        let t_star = -shift * (c + a) / c;
        if t_star > 0.0 {
            candidates.push(c * (shift + t_star).ln() + a * t_star / (shift + t_star));
        }
    }
    let inf = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (inf, sup)
}

/// Exact membership decision for the symbolic variants; `None` for tabulated.
fn analytic_membership(phi: &PhiSpec, p: f64, d: u32) -> Option<bool> {
    let dp = d as f64 / p;
    match &phi.variant {
        PhiVariant::Constant { .. } => Some(true),
        PhiVariant::Power { u } => Some(*u >= 0.0 && *u <= dp),
        PhiVariant::PiecewisePower { u, v } => {
            let dd = phi.d as f64;
            Some(dd / u <= dp && dd / v <= dp)
        }
        PhiVariant::PowerLog { exponent, a, shift } => {
            let tol = 1e-12;
            let (inf_up, _) = power_log_extrema(*exponent, *a, *shift);
            let nondecreasing = inf_up >= -tol;
            let (_, sup_down) = power_log_extrema(exponent - dp, *a, *shift);
            Some(nondecreasing && sup_down <= tol)
        }
        PhiVariant::Tabulated { .. } => None,
    }
}

/// Decide `phi in G_p`: nondecreasing and `t^(-d/p) phi(t)` nonincreasing.
///
/// Adjacent-pair grid checks with relative tolerance 1e-12; symbolic variants
/// are decided exactly and the grid only supplies a witness.
pub fn check_gp_membership(phi: &PhiSpec, p: f64, d: u32, t_grid: &[f64]) -> Result<GpVerdict> {
    if !(p > 0.0) {
        return Err(Error::Argument("p must be positive".into()));
    }
    let grid = grid_for(phi, t_grid)?;
    let dp = d as f64 / p;
    let vals: Vec<f64> = grid.iter().map(|&t| phi.eval(t)).collect::<Result<_>>()?;
    let mut witness = None;
    let mut grid_member = true;
    for i in 0..grid.len() - 1 {
        let (t0, t1) = (grid[i], grid[i + 1]);
        let (v0, v1) = (vals[i], vals[i + 1]);
        let nondecr = v1 >= v0 * (1.0 - MONOTONE_RTOL);
        let r0 = t0.powf(-dp) * v0;
        let r1 = t1.powf(-dp) * v1;
        let ratio_ok = r1 <= r0 * (1.0 + MONOTONE_RTOL);
        if !(nondecr && ratio_ok) {
            grid_member = false;
            if witness.is_none() {
                witness = Some((t0, t1));
            }
        }
    }
    let member = analytic_membership(phi, p, d).unwrap_or(grid_member);
    Ok(GpVerdict { member, witness })
}

/// Verdict for the epsilon growth condition
/// `t^(eps - d/p) phi(t) <= slack * r^(eps - d/p) phi(r)` for `t >= r`.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonVerdict {
    pub holds: bool,
    /// Largest grid quotient of the left side over the right side.
    pub worst_ratio: f64,
    pub witness: Option<(f64, f64)>,
}

/// Exact pair-quotient boundedness of `t^(eps - d/p) phi(t)` for symbolic
/// variants; `None` when undecidable symbolically.
fn analytic_epsilon(phi: &PhiSpec, p: f64, d: u32, eps: f64) -> Option<bool> {
    let dp = d as f64 / p;
    match &phi.variant {
        PhiVariant::Constant { .. } => Some(eps <= dp),
        PhiVariant::Power { u } => Some(u + eps <= dp),
        PhiVariant::PiecewisePower { u, v } => {
            let dd = phi.d as f64;
            Some(dd / u + eps <= dp && dd / v + eps <= dp)
        }
        PhiVariant::PowerLog { exponent, a, .. } => {
            let c = exponent + eps - dp;
            Some(c < 0.0 || (c == 0.0 && *a <= 0.0))
        }
        PhiVariant::Tabulated { .. } => None,
    }
}

pub fn check_epsilon_condition(
    phi: &PhiSpec,
    p: f64,
    d: u32,
    eps: f64,
    t_grid: &[f64],
    slack: f64,
) -> Result<EpsilonVerdict> {
    if !(eps > 0.0) {
        return Err(Error::Argument("eps must be positive".into()));
    }
    if !(slack >= 1.0) {
        return Err(Error::Argument("slack must be >= 1".into()));
    }
    let grid = grid_for(phi, t_grid)?;
    let dp = d as f64 / p;
    let chi: Vec<f64> = grid
        .iter()
        .map(|&t| phi.eval(t).map(|v| t.powf(eps - dp) * v))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut run_min = f64::INFINITY;
    let mut run_min_at = grid[0];
    for (i, &t) in grid.iter().enumerate() {
        if chi[i] < run_min {
            run_min = chi[i];
            run_min_at = t;
        }
        let ratio = chi[i] / run_min;
        if ratio > worst {
            worst = ratio;
            witness = Some((t, run_min_at));
        }
    }
    let holds = analytic_epsilon(phi, p, d, eps).unwrap_or(worst <= slack);
    Ok(EpsilonVerdict {
        holds,
        worst_ratio: worst,
        witness: if worst > slack { witness } else { None },
    })
}

/// Largest candidate `eps` for which the epsilon condition holds
/// (slack `1 + 1e-9`), bisecting the sorted candidate list.
pub fn find_epsilon(phi: &PhiSpec, p: f64, d: u32, candidates: &[f64]) -> Result<Option<f64>> {
    if candidates.is_empty() {
        return Ok(None);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let grid = default_grid();
    let slack = 1.0 + 1e-9;
    let ok =
        |eps: f64| -> Result<bool> { Ok(check_epsilon_condition(phi, p, d, eps, &grid, slack)?.holds) };
    if !ok(sorted[0])? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, sorted.len() - 1);
    if ok(sorted[hi])? {
        return Ok(Some(sorted[hi]));
    }
    // invariant: ok(sorted[lo]) and !ok(sorted[hi])
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(sorted[mid])? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(sorted[lo]))
}

/// Default epsilon candidates: dyadic fractions of `d/p`.
pub fn default_epsilon_candidates(p: f64, d: u32) -> Vec<f64> {
    let dp = d as f64 / p;
    let mut v: Vec<f64> = (1..=16).map(|k| dp * k as f64 / 16.0).collect();
    v.insert(0, dp / 64.0);
    v
}

/// Which tail integral condition to test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegralVariant {
    /// `int_r^inf phi(t) t^(-d/p - 1) dt <= C phi(r) r^(-d/p)`
    Nintc,
    /// epsilon-shifted variant with exponent `d/p - eps`
    Nintc1(f64),
    /// powered variant with integrand `phi^u` and exponent `(d/p) u`
    Nintc2(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct IntegralVerdict {
    pub holds: bool,
    pub estimated_c: f64,
    /// False when the epsilon pre-screen failed; the quadrature verdict then
    /// stands on its own.
    pub conclusive: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureParams {
    /// Initial upper cutoff as a multiple of `max(r_grid)`.
    pub cutoff_factor: f64,
    /// Trapezoid panels per natural-log unit.
    pub panels_per_unit: usize,
    /// Cutoff doublings before declaring the tail unstable.
    pub max_doublings: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        QuadratureParams {
            cutoff_factor: 1e4,
            panels_per_unit: 128,
            max_doublings: 60,
        }
    }
}

fn log_trapezoid(phi: &PhiSpec, w: f64, e: f64, lo: f64, hi: f64, panels: usize) -> Result<f64> {
    // integral of phi(t)^w t^(-e-1) dt  =  integral of phi(e^x)^w e^(-e x) dx
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / panels as f64;
    let g = |x: f64| -> Result<f64> {
        let t = x.exp();
        Ok(phi.eval(t)?.powf(w) * (-e * x).exp())
    };
    let mut acc = 0.5 * (g(a)? + g(b)?);
    for i in 1..panels {
        acc += g(a + h * i as f64)?;
    }
    Ok(acc * h)
}

/// Estimate the tail constant of an integral condition over `r_grid`.
///
/// The integral is extended by cutoff doubling until the added segment is
/// negligible; `holds` requires the estimate to be finite and stable within
/// 1% under doubling of cutoff and panel count, and growth beyond 10x the
/// initial estimate is reported as divergence.
pub fn check_integral_condition(
    phi: &PhiSpec,
    p: f64,
    d: u32,
    variant: IntegralVariant,
    r_grid: &[f64],
    quad: QuadratureParams,
) -> Result<IntegralVerdict> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Argument("r grid must be nonempty and positive".into()));
    }
    let dp = d as f64 / p;
    let (w, e) = match variant {
        IntegralVariant::Nintc => (1.0, dp),
        IntegralVariant::Nintc1(eps) => {
            if !(eps > 0.0) {
                return Err(Error::Argument("eps must be positive".into()));
            }
            (1.0, dp - eps)
        }
        IntegralVariant::Nintc2(u) => {
            if !(u > 0.0) {
                return Err(Error::Argument("power u must be positive".into()));
            }
            (u, dp * u)
        }
    };
    let screen = find_epsilon(phi, p, d, &default_epsilon_candidates(p, d))?.is_some();
    let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
    let mut holds = true;
    let mut worst_c = 0.0f64;
    for &r in r_grid {
        let t0 = (quad.cutoff_factor * r_max).max(2.0 * r);
        let panels =
            |lo: f64, hi: f64| ((hi / lo).ln() * quad.panels_per_unit as f64).ceil() as usize + 1;
        let base = log_trapezoid(phi, w, e, r, t0, panels(r, t0))?;
        let mut acc = base;
        let mut cut = t0;
        let mut stable = false;
        let mut prev_seg: Option<f64> = None;
        let mut prev_q: Option<f64> = None;
        let mut flat = 0usize;
        for _ in 0..quad.max_doublings {
            let seg = log_trapezoid(phi, w, e, cut, 2.0 * cut, panels(cut, 2.0 * cut))?;
            acc += seg;
            cut *= 2.0;
            if !acc.is_finite() || acc > 10.0 * base.max(1e-300) {
                break;
            }
            if seg <= 1e-7 * acc.max(1e-300) {
                stable = true;
                break;
            }
            if let Some(ps) = prev_seg {
                let q = seg / ps;
                // segments that stop shrinking signal a (log-)divergent tail
                if q >= 0.9995 {
                    flat += 1;
                    if flat >= 3 {
                        break;
                    }
                } else {
                    flat = 0;
                }
                // once the decay ratio settles the remaining tail is a
                // geometric series; for pure powers the ratio is exact
                if q < 0.999 {
                    if let Some(pq) = prev_q {
                        if (q - pq).abs() <= (1e-3 * (1.0 - q)).max(1e-12) {
                            acc += seg * q / (1.0 - q);
                            stable = true;
                            break;
                        }
                    }
                }
                prev_q = Some(q);
            }
            prev_seg = Some(seg);
        }
        // panel-doubling stability on the base segment
        if stable && base > 0.0 {
            let refined = log_trapezoid(phi, w, e, r, t0, 2 * panels(r, t0))?;
            if (refined - base).abs() > 0.01 * base {
                stable = false;
            }
        }
        if !stable {
            holds = false;
        }
        let c = acc * r.powf(e) / phi.eval(r)?.powf(w);
        worst_c = worst_c.max(c);
    }
    Ok(IntegralVerdict {
        holds,
        estimated_c: worst_c,
        conclusive: screen || !holds,
    })
}

/// Convergence verdict for the tail sum gate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Convergence {
    Converges,
    Diverges,
    Inconclusive,
}

/// Partial sums of `sum_j phi(2^-j) 2^(-j(s - d/p))` with a ratio-test
/// verdict for the symbolic variants.
#[derive(Clone, Debug, Serialize)]
pub struct NescSum {
    pub partials: Vec<f64>,
    pub verdict: Convergence,
}

pub fn nesc_sum(phi: &PhiSpec, s: f64, p: f64, d: u32, j_hi: usize) -> Result<NescSum> {
    let dp = d as f64 / p;
    let mut partials = Vec::with_capacity(j_hi + 1);
    let mut acc = 0.0;
    for j in 0..=j_hi {
        let t = (-(j as f64)).exp2();
        acc += phi.eval(t)? * (-(j as f64) * (s - dp)).exp2();
        partials.push(acc);
    }
    // term_j ~ 2^(-j(s - d/p + u0)) with u0 the small-t growth exponent
    let small_t_exponent = match &phi.variant {
        PhiVariant::Constant { .. } => Some(0.0),
        PhiVariant::Power { u } => Some(*u),
        PhiVariant::PiecewisePower { u, .. } => Some(phi.d as f64 / u),
        PhiVariant::PowerLog { exponent, .. } => Some(*exponent),
        PhiVariant::Tabulated { .. } => None,
    };
    let verdict = match small_t_exponent {
        Some(u0) => {
            if s - dp + u0 > 0.0 {
                Convergence::Converges
            } else {
                Convergence::Diverges
            }
        }
        None => {
            if j_hi < 4 {
                Convergence::Inconclusive
            } else {
                let term = |j: usize| -> Result<f64> {
                    let t = (-(j as f64)).exp2();
                    Ok(phi.eval(t)? * (-(j as f64) * (s - dp)).exp2())
                };
                let a = term(j_hi - 1)?;
                let b = term(j_hi)?;
                if a == 0.0 || b == 0.0 {
                    Convergence::Inconclusive
                } else {
                    let q = b / a;
                    if q < 0.95 {
                        Convergence::Converges
                    } else if q > 1.05 {
                        Convergence::Diverges
                    } else {
                        Convergence::Inconclusive
                    }
                }
            }
        }
    };
    Ok(NescSum { partials, verdict })
}

/// Smallest shift `L` from a doubling candidate list for which the grid
/// verifies `t^(d/p) (log(L+t))^a` as nondecreasing with nonincreasing
/// ratio, bypassing the analytic override.
pub fn power_log_min_shift(a: f64, d: u32, p: f64, max_doublings: usize) -> Result<Option<f64>> {
    let grid = default_grid();
    let dp = d as f64 / p;
    let mut shift = 1.0 + 1.0 / 16.0;
    for _ in 0..=max_doublings {
        let phi = PhiSpec::power_log(a, shift, d, p)?;
        let mut ok = true;
        let mut prev: Option<(f64, f64)> = None;
        for &t in &grid {
            let v = phi.eval(t)?;
            if let Some((t0, v0)) = prev {
                if v < v0 * (1.0 - MONOTONE_RTOL)
                    || t.powf(-dp) * v > t0.powf(-dp) * v0 * (1.0 + MONOTONE_RTOL)
                {
                    ok = false;
                    break;
                }
            }
            prev = Some((t, v));
        }
        if ok {
            return Ok(Some(shift));
        }
        shift = 1.0 + (shift - 1.0) * 2.0;
    }
    Ok(None)
}

/// Built-in weight catalog for `(d, p)`: constant, an interior and the
/// boundary power, a piecewise power, and a power-log. Used by invariant
/// tests and the verification matrix.
pub fn catalog(d: u32, p: f64) -> Vec<(String, PhiSpec)> {
    let dp = d as f64 / p;
    vec![
        ("one".into(), PhiSpec::one(d, p)),
        ("power_half".into(), PhiSpec::power(dp / 2.0, d, p).unwrap()),
        ("power_boundary".into(), PhiSpec::power(dp, d, p).unwrap()),
        (
            "piecewise".into(),
            PhiSpec::piecewise_power(2.0 * p, 4.0 * p, d, p).unwrap(),
        ),
        (
            "power_log".into(),
            PhiSpec::power_log(-1.0, 100.0, d, p).unwrap(),
        ),
    ]
}
