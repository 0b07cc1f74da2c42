//! Adversarial inner maximization
//!
//! ```text
//! h(θ, γ; ξ, ξ') = c(f(θ; x'); y') − γ d(ξ', ξ) + γρ,      ξ̂* ≈ argmax_{ξ' ∈ Ξ} h
//! ```
//!
//! solved by projected gradient ascent started at the bootstrapped point.
//!
//! Two facts about `h` shape the solver. First, `d` is a norm, so `h` is
//! not differentiable at `ξ' = ξ`; there we use the minimum-norm element of
//! the supergradient, which makes the base stationary exactly when the
//! penalty `γ` outweighs the cost slope. Second, the cost is convex in `z`
//! and the norm is linear along rays from the base, so `h` is convex along
//! every such ray: plain ascent from the base can stall there even when a
//! support boundary point is better. With `path_search` enabled the ascent is
//! also started from the best points of the clamped rays `Π(x ± t θ)`, which
//! contain the feature-space maximizer, at each label the maximizer can have,
//! and the best iterate over all starts is returned.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::{DroConfig, InnerTolerance, TrainState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::policy::{self, NewsvendorParams};
use crate::sample::{transport_distance, Sample, SupportBox};

/// Outcome of one inner maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbResult {
    pub xi_star: Sample,
    pub h_value: f64,
    /// Norm of the projected supergradient at `xi_star`.
    pub grad_norm: f64,
    /// Ascent steps taken to reach `xi_star` on the path that found it.
    pub steps: usize,
    /// That path ran out of its step budget before meeting the tolerance.
    pub hit_step_cap: bool,
}

/// Evaluates `h` at candidate `cand` for the bootstrapped `base`.
pub fn h_eval(
    state: &TrainState,
    base: &Sample,
    cand: &Sample,
    cfg: &DroConfig,
    p: &NewsvendorParams,
) -> Result<f64> {
    let d = transport_distance(cand, base, cfg.cost)?;
    if !d.is_finite() {
        return Err(Error::InfiniteDistance);
    }
    let z = policy::policy_eval(state, &cand.x)?;
    Ok(policy::cost_smoothed(z, cand.y, p) - state.gamma * d + state.gamma * cfg.rho)
}

/// Gradient-norm threshold for the inner loop under `cfg.tolerance`.
pub fn inner_tolerance(state: &TrainState, cfg: &DroConfig, support: &SupportBox, p: &NewsvendorParams) -> f64 {
    match cfg.tolerance {
        InnerTolerance::Fixed { grad_tol } => grad_tol,
        InnerTolerance::Adaptive { mu_floor } => {
            let mu = (state.gamma - policy::lipschitz_xx(state, p)).max(mu_floor);
            let cross = (p.backorder + p.holding) * linalg::norm(state.coefficients()) * support.max_augmented_norm()
                / (2.0 * p.delta);
            let horizon = libm::sqrt(cfg.iterations.max(1) as f64);
            let eps = mu / ((cross * cross + 1.0) * horizon);
            libm::sqrt(2.0 * mu * eps)
        }
    }
}

/// The objective restricted to one base point, with everything the ascent
/// needs precomputed.
struct Objective<'a> {
    coef: &'a [f64],
    intercept: f64,
    gamma: f64,
    rho: f64,
    kappa: f64,
    frozen: bool,
    base: &'a Sample,
    support: &'a SupportBox,
    p: &'a NewsvendorParams,
}

impl<'a> Objective<'a> {
    fn new(
        state: &'a TrainState,
        base: &'a Sample,
        cfg: &DroConfig,
        support: &'a SupportBox,
        p: &'a NewsvendorParams,
    ) -> Result<Self> {
        let d = state.dim();
        if base.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: base.dim() });
        }
        if support.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: support.dim() });
        }
        Ok(Self {
            coef: state.coefficients(),
            intercept: state.intercept(),
            gamma: state.gamma,
            rho: cfg.rho,
            kappa: cfg.cost.kappa(),
            frozen: cfg.cost.labels_frozen(),
            base,
            support,
            p,
        })
    }

    fn distance(&self, x: &[f64], y: f64) -> f64 {
        let dx = linalg::dist(x, &self.base.x);
        if self.frozen {
            dx
        } else {
            dx + self.kappa * libm::fabs(y - self.base.y)
        }
    }

    fn value(&self, x: &[f64], y: f64) -> f64 {
        let z = linalg::dot(self.coef, x) + self.intercept;
        policy::cost_smoothed(z, y, self.p) - self.gamma * self.distance(x, y) + self.gamma * self.rho
    }

    /// Minimum-norm supergradient at `(x, y)`; writes the feature block into
    /// `gx` and returns the label block (zero when labels are frozen).
    fn supergradient(&self, x: &[f64], y: f64, gx: &mut [f64]) -> f64 {
        let z = linalg::dot(self.coef, x) + self.intercept;
        let slope = policy::smoothed_slope(z - y, self.p);
        let r = linalg::dist(x, &self.base.x);
        if r > 0.0 {
            for j in 0..x.len() {
                gx[j] = slope * self.coef[j] - self.gamma * (x[j] - self.base.x[j]) / r;
            }
        } else {
            let c_norm = libm::fabs(slope) * linalg::norm(self.coef);
            let shrink = if c_norm > self.gamma { 1.0 - self.gamma / c_norm } else { 0.0 };
            for j in 0..x.len() {
                gx[j] = shrink * slope * self.coef[j];
            }
        }
        if self.frozen {
            return 0.0;
        }
        let cy = -slope;
        let pull = self.gamma * self.kappa;
        let dy = y - self.base.y;
        if dy > 0.0 {
            cy - pull
        } else if dy < 0.0 {
            cy + pull
        } else if libm::fabs(cy) > pull {
            cy - pull * cy.signum()
        } else {
            0.0
        }
    }

    /// Zeroes components that point out of the box at active bounds and
    /// returns the remaining norm.
    fn projected_norm(&self, x: &[f64], y: f64, gx: &[f64], gy: f64) -> f64 {
        let mut sq = 0.0;
        for j in 0..x.len() {
            let g = gx[j];
            let blocked = (x[j] <= self.support.x_lo[j] && g < 0.0) || (x[j] >= self.support.x_hi[j] && g > 0.0);
            if !blocked {
                sq += g * g;
            }
        }
        if !self.frozen {
            let blocked = (y <= self.support.y_lo && gy < 0.0) || (y >= self.support.y_hi && gy > 0.0);
            if !blocked {
                sq += gy * gy;
            }
        }
        libm::sqrt(sq)
    }

    /// `γ ≥` the Lipschitz constant of the cost in `ξ` means no move can
    /// gain more cost than it pays in transport.
    fn penalty_dominates(&self) -> bool {
        let slope_bound = self.p.backorder.max(self.p.holding);
        let feature_ok = slope_bound * linalg::norm(self.coef) <= self.gamma;
        feature_ok && (self.frozen || slope_bound <= self.gamma * self.kappa)
    }

    /// Best point on the clamped ray `x(t) = Π_B(x₀ + t·sign·θ)`, `t ≥ 0`,
    /// with the label held at `y`.
    ///
    /// For a fixed order level `θᵀx = z` the cheapest feature move is the
    /// projection of the base onto that slice of the box, and those
    /// projections are exactly the points of the clamped ray. Between
    /// breakpoints (where a coordinate hits its bound) the ray is affine,
    /// `r(t)² = C + A t²` and `z` is affine in `t`, so on every piece where the
    /// cost is a single polynomial `φ(t) = c(z(t)) − γ r(t)` is concave and
    /// then convex; its maximum is an endpoint or the root of `φ'` on the
    /// concave part.
    fn path_best(&self, sign: f64, y: f64) -> Option<(Vec<f64>, f64)> {
        let x0 = &self.base.x;
        let (lo, hi) = (&self.support.x_lo, &self.support.x_hi);
        let mut breaks: Vec<(f64, usize)> = Vec::new();
        let mut a = 0.0;
        for (j, &c) in self.coef.iter().enumerate() {
            let v = sign * c;
            if v == 0.0 {
                continue;
            }
            let bound = if v > 0.0 { hi[j] } else { lo[j] };
            breaks.push((((bound - x0[j]) / v).max(0.0), j));
            a += c * c;
        }
        if breaks.is_empty() {
            return None;
        }
        breaks.sort_by(|l, r| l.0.total_cmp(&r.0));

        let y0 = y;
        let delta = self.p.delta;
        let curvature = (self.p.backorder + self.p.holding) / (2.0 * delta);
        let gamma = self.gamma;
        let mut c_sq = 0.0;
        let mut t_prev = 0.0;
        let mut z_prev = linalg::dot(self.coef, x0) + self.intercept;
        let mut best_t = 0.0;
        let mut best_v = f64::NEG_INFINITY;

        for &(t_next, j) in &breaks {
            if t_next > t_prev && a > 0.0 {
                let slope = sign * a;
                let z_at = |t: f64| z_prev + slope * (t - t_prev);
                let r_at = |t: f64| libm::sqrt(c_sq + a * t * t);
                let phi = |t: f64| policy::cost_smoothed(z_at(t), y0, self.p) - gamma * r_at(t);
                let dphi = |t: f64| {
                    let r = r_at(t);
                    let pull = if r > 0.0 { gamma * a * t / r } else { gamma * libm::sqrt(a) };
                    slope * policy::smoothed_slope(z_at(t) - y0, self.p) - pull
                };
                // Piece boundaries where z crosses the edges of the quadratic band.
                let mut cuts = [t_prev, t_next, t_next, t_next];
                for (k, edge) in [y0 - delta, y0 + delta].into_iter().enumerate() {
                    let t = t_prev + (edge - z_prev) / slope;
                    if t > t_prev && t < t_next {
                        cuts[k + 1] = t;
                    }
                }
                cuts[1..3].sort_by(f64::total_cmp);
                for w in cuts.windows(2) {
                    let (t0, t1) = (w[0], w[1]);
                    if !(t1 > t0) {
                        continue;
                    }
                    for t in [t0, t1] {
                        let v = phi(t);
                        if v > best_v {
                            best_v = v;
                            best_t = t;
                        }
                    }
                    let mid_u = z_at(0.5 * (t0 + t1)) - y0;
                    let q2 = if libm::fabs(mid_u) < delta { curvature } else { 0.0 };
                    // End of the concave part: φ'' = A² q'' − γ A C / r³.
                    let t_conc = if c_sq == 0.0 {
                        t0
                    } else if q2 == 0.0 {
                        t1
                    } else {
                        let rc = libm::cbrt(gamma * c_sq / (a * q2));
                        libm::sqrt(((rc * rc - c_sq) / a).max(0.0)).clamp(t0, t1)
                    };
                    if t_conc > t0 && dphi(t0) > 0.0 && dphi(t_conc) < 0.0 {
                        let (mut l, mut r) = (t0, t_conc);
                        for _ in 0..60 {
                            let m = 0.5 * (l + r);
                            if dphi(m) > 0.0 {
                                l = m;
                            } else {
                                r = m;
                            }
                        }
                        let t = 0.5 * (l + r);
                        let v = phi(t);
                        if v > best_v {
                            best_v = v;
                            best_t = t;
                        }
                    }
                }
                z_prev = z_at(t_next);
                t_prev = t_next;
            }
            let c = self.coef[j];
            a -= c * c;
            let moved = t_next * sign * c;
            c_sq += moved * moved;
        }
        if best_t == 0.0 {
            return None;
        }
        let mut x: Vec<f64> = x0.iter().zip(self.coef).map(|(v, c)| v + best_t * sign * c).collect();
        self.support.clamp_features(&mut x);
        Some((x, y0))
    }
}

struct Best {
    x: Vec<f64>,
    y: f64,
    h: f64,
    steps: usize,
    capped: bool,
}

struct AscentParams {
    eta: f64,
    max_steps: usize,
    tol: f64,
}

/// One projected-ascent path; updates `best` whenever it finds a higher `h`.
fn ascend(obj: &Objective<'_>, mut x: Vec<f64>, mut y: f64, ap: &AscentParams, best: &mut Option<Best>) -> Result<()> {
    let mut gx = vec![0.0; x.len()];
    let mut h = obj.value(&x, y);
    let mut path_best: Option<usize> = None;
    let improve = |best: &mut Option<Best>, x: &[f64], y: f64, h: f64, k: usize| -> bool {
        if best.as_ref().map_or(true, |b| h > b.h) {
            *best = Some(Best { x: x.to_vec(), y, h, steps: k, capped: false });
            true
        } else {
            false
        }
    };
    if improve(best, &x, y, h, 0) {
        path_best = Some(0);
    }
    let mut k = 0;
    loop {
        let gy = obj.supergradient(&x, y, &mut gx);
        if !gy.is_finite() || gx.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("inner-ascent gradient"));
        }
        if obj.projected_norm(&x, y, &gx, gy) <= ap.tol {
            break;
        }
        if k == ap.max_steps {
            if path_best.is_some() {
                if let Some(b) = best.as_mut() {
                    b.capped = true;
                }
            }
            break;
        }
        for j in 0..x.len() {
            x[j] += ap.eta * gx[j];
        }
        obj.support.clamp_features(&mut x);
        if !obj.frozen {
            y = (y + ap.eta * gy).clamp(obj.support.y_lo, obj.support.y_hi);
        }
        k += 1;
        h = obj.value(&x, y);
        if !h.is_finite() {
            return Err(Error::NonFinite("inner-ascent objective"));
        }
        if improve(best, &x, y, h, k) {
            path_best = Some(k);
        }
    }
    Ok(())
}

/// Approximate worst-case perturbation of `base`.
pub fn perturb(
    state: &TrainState,
    base: &Sample,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
) -> Result<PerturbResult> {
    let obj = Objective::new(state, base, cfg, support, p)?;
    let ap = AscentParams { eta: cfg.inner_step, max_steps: cfg.max_inner, tol: inner_tolerance(state, cfg, support, p) };
    let mut best: Option<Best> = None;

    if obj.penalty_dominates() {
        best = Some(Best { x: base.x.clone(), y: base.y, h: obj.value(&base.x, base.y), steps: 0, capped: false });
    } else {
        ascend(&obj, base.x.clone(), base.y, &ap, &mut best)?;
        if cfg.path_search {
            // With x fixed, h is convex in y on either side of the base label,
            // so a maximizer has y at the base or at a support end.
            let labels: &[f64] = if obj.frozen { &[base.y] } else { &[base.y, support.y_lo, support.y_hi] };
            for &y in labels {
                if y != base.y {
                    ascend(&obj, base.x.clone(), y, &ap, &mut best)?;
                }
                for sign in [1.0, -1.0] {
                    if let Some((x, y)) = obj.path_best(sign, y) {
                        ascend(&obj, x, y, &ap, &mut best)?;
                    }
                }
            }
        }
    }

    let best = best.expect("at least the base point is evaluated");
    let mut gx = vec![0.0; best.x.len()];
    let gy = obj.supergradient(&best.x, best.y, &mut gx);
    let grad_norm = obj.projected_norm(&best.x, best.y, &gx, gy);
    Ok(PerturbResult {
        xi_star: Sample::new(best.x, best.y),
        h_value: best.h,
        grad_norm,
        steps: best.steps,
        hit_step_cap: best.capped,
    })
}

/// Brute-force maximizer of `h` over a regular grid on the support (test
/// oracle). Each searched axis gets `⌈extent / grid_step⌉ + 1` evenly spaced
/// points including both ends, plus the base point itself; the label axis is searched only when labels
/// may move. At most three searched axes.
pub fn oracle_grid_max(
    state: &TrainState,
    base: &Sample,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
    grid_step: f64,
) -> Result<(Sample, f64)> {
    const MAX_AXES: usize = 3;
    if !(grid_step > 0.0) {
        return Err(Error::InvalidConfig("grid_step must be positive".into()));
    }
    let obj = Objective::new(state, base, cfg, support, p)?;
    let d = state.dim();
    let axes = d + usize::from(!obj.frozen);
    if axes > MAX_AXES {
        return Err(Error::DimensionTooLarge { dim: axes, max: MAX_AXES });
    }
    let mut ranges: Vec<(f64, f64, usize)> = Vec::with_capacity(axes);
    let mut push_axis = |lo: f64, hi: f64| {
        let extent = hi - lo;
        let n = if extent > 0.0 { libm::ceil(extent / grid_step) as usize + 1 } else { 1 };
        ranges.push((lo, hi, n));
    };
    for j in 0..d {
        push_axis(support.x_lo[j], support.x_hi[j]);
    }
    if !obj.frozen {
        push_axis(support.y_lo, support.y_hi);
    }
    let coord = |(lo, hi, n): (f64, f64, usize), i: usize| {
        if n == 1 {
            lo
        } else if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };

    let mut idx = vec![0usize; axes];
    let mut x = vec![0.0; d];
    // The base point is always feasible and is often the maximizer.
    let mut best_x = base.x.clone();
    let mut best_y = base.y;
    let mut best_h = if support.contains(base) { obj.value(&base.x, base.y) } else { f64::NEG_INFINITY };
    loop {
        for j in 0..d {
            x[j] = coord(ranges[j], idx[j]);
        }
        let y = if obj.frozen { base.y } else { coord(ranges[d], idx[d]) };
        let h = obj.value(&x, y);
        if h > best_h {
            best_h = h;
            best_x.copy_from_slice(&x);
            best_y = y;
        }
        // Mixed-radix increment.
        let mut a = 0;
        while a < axes {
            idx[a] += 1;
            if idx[a] < ranges[a].2 {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == axes {
            break;
        }
    }
    Ok((Sample::new(best_x, best_y), best_h))
}
