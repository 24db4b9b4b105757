//! Mean-field approximation.
//!
//! With `u1` the Spreader fraction and `u2` the Stifler fraction,
//!
//! ```text
//! du1/dt = λ u1 (1 - u1 - u2) - α u1² - u1
//! du2/dt = α u1² - u2
//! ```
//!
//! and `u0 = 1 - u1 - u2`. The free-rumor point `(0, 0)` is an equilibrium
//! for all parameters; its Jacobian is `diag(λ - 1, -1)`, so its stability
//! depends on λ alone.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Params;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;

/// How far outside the simplex a trajectory may stray before the step size
/// is declared too large.
pub const SIMPLEX_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldState {
    pub u1: f64,
    pub u2: f64,
}

impl MeanFieldState {
    pub const FREE: MeanFieldState = MeanFieldState { u1: 0.0, u2: 0.0 };

    pub fn new(u1: f64, u2: f64) -> Result<Self> {
        let s = MeanFieldState { u1, u2 };
        if !s.in_simplex(1e-9) {
            return Err(Error::InvalidParams(format!("({u1}, {u2}) is not a valid fraction pair")));
        }
        Ok(s)
    }

    pub fn u0(&self) -> f64 {
        1.0 - self.u1 - self.u2
    }

    pub fn in_simplex(&self, slack: f64) -> bool {
        self.u1.is_finite()
            && self.u2.is_finite()
            && self.u1 >= -slack
            && self.u2 >= -slack
            && self.u1 + self.u2 <= 1.0 + slack
    }
}

/// Right-hand side `(du1/dt, du2/dt)`.
pub fn derivative(s: MeanFieldState, p: &Params) -> (f64, f64) {
    let (l, a) = (p.lambda(), p.alpha());
    let du1 = l * s.u1 * (1.0 - s.u1 - s.u2) - a * s.u1 * s.u1 - s.u1;
    let du2 = a * s.u1 * s.u1 - s.u2;
    (du1, du2)
}

/// Analytic Jacobian `∂(du1, du2)/∂(u1, u2)` as rows.
pub fn jacobian(s: MeanFieldState, p: &Params) -> [[f64; 2]; 2] {
    let (l, a) = (p.lambda(), p.alpha());
    [
        [l * (1.0 - 2.0 * s.u1 - s.u2) - 2.0 * a * s.u1 - 1.0, -l * s.u1],
        [2.0 * a * s.u1, -1.0],
    ]
}

/// Real eigenvalues of a 2×2 matrix, in descending order, or `None` when they
/// are complex. Triangular matrices return their diagonal exactly.
pub fn real_eigenvalues(m: [[f64; 2]; 2]) -> Option<(f64, f64)> {
    let [[a, b], [c, d]] = m;
    if b == 0.0 || c == 0.0 {
        return Some(if a >= d { (a, d) } else { (d, a) });
    }
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some((half_tr + r, half_tr - r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityResult {
    pub eigenvalues: (f64, f64),
    pub classification: Classification,
    /// Set when the leading eigenvalue is exactly zero.
    pub marginal: bool,
}

/// Stability of the free-rumor equilibrium. Unstable iff λ > 1; λ = 1 is
/// reported Stable with `marginal` set.
///
/// Eigenvalues are listed as (u1 direction, u2 direction), i.e. `(λ - 1, -1)`.
pub fn jacobian_at_origin(p: &Params) -> StabilityResult {
    let j = jacobian(MeanFieldState::FREE, p);
    let (lead, _) = real_eigenvalues(j).expect("the Jacobian at the origin is diagonal");
    StabilityResult {
        eigenvalues: (j[0][0], j[1][1]),
        classification: if lead > 0.0 { Classification::Unstable } else { Classification::Stable },
        marginal: lead == 0.0,
    }
}

/// Stability report JSON: `{lambda, alpha, eigenvalues, classification, marginal}`.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub lambda: f64,
    pub alpha: f64,
    pub eigenvalues: [f64; 2],
    pub classification: Classification,
    pub marginal: bool,
}

impl StabilityReport {
    pub fn new(p: &Params) -> Self {
        let r = jacobian_at_origin(p);
        StabilityReport {
            lambda: p.lambda(),
            alpha: p.alpha(),
            eigenvalues: [r.eigenvalues.0, r.eigenvalues.1],
            classification: r.classification,
            marginal: r.marginal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldPoint {
    pub t: f64,
    /// Separately integrated with `du0/dt = -du1/dt - du2/dt`.
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
}

fn rk4_step(s: MeanFieldState, p: &Params, dt: f64) -> (MeanFieldState, f64) {
    let f = |s: MeanFieldState| derivative(s, p);
    let shift = |s: MeanFieldState, k: (f64, f64), h: f64| MeanFieldState {
        u1: s.u1 + h * k.0,
        u2: s.u2 + h * k.1,
    };
    let k1 = f(s);
    let k2 = f(shift(s, k1, dt / 2.0));
    let k3 = f(shift(s, k2, dt / 2.0));
    let k4 = f(shift(s, k3, dt));
    let d1 = dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let d2 = dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    (MeanFieldState { u1: s.u1 + d1, u2: s.u2 + d2 }, -d1 - d2)
}

/// Fixed-step classical RK4 from `t = 0` to `t_max`, recording every step
/// (the last step is shortened to land on `t_max`).
pub fn integrate(s0: MeanFieldState, p: &Params, t_max: f64, dt: f64) -> Result<Vec<MeanFieldPoint>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParams(format!("t_max must be >= 0, got {t_max}")));
    }
    let steps = (t_max / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = s0;
    let mut u0 = s0.u0();
    out.push(MeanFieldPoint { t: 0.0, u0, u1: s.u1, u2: s.u2 });
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = (k as f64 * dt).min(t_max);
        let (next, du0) = rk4_step(s, p, t - t_prev);
        if !next.in_simplex(SIMPLEX_SLACK) {
            return Err(Error::StepSize { time: t, u1: next.u1, u2: next.u2 });
        }
        s = next;
        u0 += du0;
        out.push(MeanFieldPoint { t, u0, u1: s.u1, u2: s.u2 });
    }
    Ok(out)
}

/// Endemic equilibrium. Setting both derivatives to zero with `u1 > 0` gives `u2 = α u1²` and
/// `λ α u1² + (λ + α) u1 + 1 - λ = 0`. Returns `None` when λ ≤ 1.
pub fn endemic_equilibrium(p: &Params) -> Option<MeanFieldState> {
    let (l, a) = (p.lambda(), p.alpha());
    if l <= 1.0 {
        return None;
    }
    let (qa, qb, qc) = (l * a, l + a, 1.0 - l);
    let u1 = if qa == 0.0 {
        -qc / qb
    } else {
        // positive root, written to avoid cancellation
        (2.0 * -qc) / (qb + (qb * qb - 4.0 * qa * qc).sqrt())
    };
    Some(MeanFieldState { u1, u2: a * u1 * u1 })
}

/// CSV time series, header `t,u0,u1,u2`.
pub fn write_csv<W: std::io::Write>(points: &[MeanFieldPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,u0,u1,u2")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.t, p.u0, p.u1, p.u2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(l: f64, a: f64) -> Params {
        Params::new(l, a).unwrap()
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(derivative(MeanFieldState::FREE, &params(3.0, 2.0)), (0.0, 0.0));
        assert_eq!(derivative(MeanFieldState { u1: 0.5, u2: 0.0 }, &params(2.0, 0.0)), (0.0, 0.0));
        assert_eq!(derivative(MeanFieldState { u1: 1.0, u2: 0.0 }, &params(0.0, 1.0)), (-2.0, 1.0));
    }

    #[test]
    fn origin_eigenvalues() {
        let r = jacobian_at_origin(&params(2.0, 0.0));
        assert_eq!(r.eigenvalues, (1.0, -1.0));
        assert_eq!(r.classification, Classification::Unstable);

        let r = jacobian_at_origin(&params(1.0, 3.0));
        assert_eq!(r.eigenvalues, (0.0, -1.0));
        assert_eq!(r.classification, Classification::Stable);
        assert!(r.marginal);

        let r = jacobian_at_origin(&params(0.5, 100.0));
        assert_eq!(r.eigenvalues, (-0.5, -1.0));
        assert_eq!(r.classification, Classification::Stable);
        assert!(!r.marginal);
    }

    #[test]
    fn origin_is_fixed() {
        let pts = integrate(MeanFieldState::FREE, &params(2.0, 1.0), 5.0, 0.01).unwrap();
        assert!(pts.iter().all(|p| p.u1 == 0.0 && p.u2 == 0.0));
        assert_eq!(pts.len(), 501);
    }

    #[test]
    fn endemic_limits() {
        let pts = integrate(MeanFieldState { u1: 0.01, u2: 0.0 }, &params(2.0, 0.0), 50.0, DEFAULT_DT).unwrap();
        assert_abs_diff_eq!(pts.last().unwrap().u1, 0.5, epsilon = 1e-6);

        let u1 = (17f64.sqrt() - 3.0) / 4.0;
        let eq = endemic_equilibrium(&params(2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(eq.u1, u1, epsilon = 1e-15);
        let last = *integrate(MeanFieldState { u1: 0.01, u2: 0.0 }, &params(2.0, 1.0), 50.0, DEFAULT_DT)
            .unwrap()
            .last()
            .unwrap();
        assert_abs_diff_eq!(last.u1, u1, epsilon = 1e-6);
        assert_abs_diff_eq!(last.u2, u1 * u1, epsilon = 1e-6);
        assert!(endemic_equilibrium(&params(1.0, 1.0)).is_none());
    }

    #[test]
    fn coarse_step_is_rejected() {
        let err = integrate(MeanFieldState { u1: 0.9, u2: 0.0 }, &params(50.0, 50.0), 10.0, 1.0);
        assert!(matches!(err, Err(Error::StepSize { .. })));
        assert!(integrate(MeanFieldState::FREE, &params(1.0, 1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn complex_eigenvalues_detected() {
        assert_eq!(real_eigenvalues([[0.0, -1.0], [1.0, 0.0]]), None);
        assert_eq!(real_eigenvalues([[2.0, 1.0], [1.0, 2.0]]), Some((3.0, 1.0)));
    }

    proptest! {
        #[test]
        fn jacobian_matches_central_differences(
            u1 in 0.0..0.9f64, frac in 0.0..1.0f64, l in 0.0..5.0f64, a in 0.0..5.0f64,
        ) {
            let p = params(l, a);
            let s = MeanFieldState { u1, u2: frac * (1.0 - u1) };
            let h = 1e-4;
            let j = jacobian(s, &p);
            let col = |du1: f64, du2: f64| {
                let plus = derivative(MeanFieldState { u1: s.u1 + du1, u2: s.u2 + du2 }, &p);
                let minus = derivative(MeanFieldState { u1: s.u1 - du1, u2: s.u2 - du2 }, &p);
                ((plus.0 - minus.0) / (2.0 * h), (plus.1 - minus.1) / (2.0 * h))
            };
            let (c0, c1) = (col(h, 0.0), col(0.0, h));
            prop_assert!((j[0][0] - c0.0).abs() < 1e-6);
            prop_assert!((j[1][0] - c0.1).abs() < 1e-6);
            prop_assert!((j[0][1] - c1.0).abs() < 1e-6);
            prop_assert!((j[1][1] - c1.1).abs() < 1e-6);
        }

        #[test]
        fn classification_ignores_alpha(l in 0.0..4.0f64) {
            let base = jacobian_at_origin(&params(l, 0.0));
            for a in [1.0, 10.0, 100.0] {
                prop_assert_eq!(&jacobian_at_origin(&params(l, a)), &base);
            }
        }
    }
}
