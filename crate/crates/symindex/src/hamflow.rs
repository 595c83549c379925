//! Hamiltonian flows on R^{2n}, linearized paths along orbits, and action
//! functionals.
//!
//! Vector-field convention: `i_{X_H} omega = -dH` is realized as
//! `x' = J0 DH(x)` with the crate's J0; it is locked by the calibration test
//! `H = pi |z|^2` having 1-periodic orbits, and consistent with the
//! comparison tests (negative-definite Hessians force negative indices).

use crate::czindex::{cz_index, IndexResult};
use crate::error::{Result, SymError};
use crate::maslov::MaslovOptions;
use crate::scalar::Scalar;
use crate::symcore::{integrate_fundamental, SymmetricPath, SymplecticContext, SymplecticPath};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamKind {
    ClosedForm,
    Profile,
    Sampled,
}

type ValFn<T> = Arc<dyn Fn(&DVector<T>) -> T + Send + Sync>;
type GradFn<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;
type HessFn<T> = Arc<dyn Fn(&DVector<T>) -> DMatrix<T> + Send + Sync>;

/// A Hamiltonian on R^{2n} with first and second derivatives.
#[derive(Clone)]
pub struct HamiltonianModel<T: Scalar> {
    pub n: usize,
    pub kind: HamKind,
    value: ValFn<T>,
    grad: GradFn<T>,
    hess: HessFn<T>,
}

impl<T: Scalar> HamiltonianModel<T> {
    pub fn closed_form(
        n: usize,
        value: impl Fn(&DVector<T>) -> T + Send + Sync + 'static,
        grad: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
        hess: impl Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        HamiltonianModel {
            n,
            kind: HamKind::ClosedForm,
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
        }
    }

    pub fn with_kind(mut self, kind: HamKind) -> Self {
        self.kind = kind;
        self
    }

    /// `H(x) = <x, Q x> / 2` for symmetric `Q`.
    pub fn quadratic(q: DMatrix<T>) -> Result<Self> {
        let dim = q.nrows();
        if q.ncols() != dim || dim % 2 != 0 || dim == 0 {
            return Err(SymError::InvalidInput("Q must be square of even size".into()));
        }
        if (&q - q.transpose()).amax() > T::of(1e-9) * T::one().max(q.amax()) {
            return Err(SymError::InvalidInput("Q must be symmetric".into()));
        }
        let q1 = q.clone();
        let q2 = q.clone();
        let q3 = q;
        Ok(Self::closed_form(
            dim / 2,
            move |x| (x.transpose() * &q1 * x)[(0, 0)] * T::of(0.5),
            move |x| &q2 * x,
            move |_| q3.clone(),
        ))
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self::closed_form(
            n,
            move |_| c,
            move |x| DVector::zeros(x.len()),
            move |x| DMatrix::zeros(x.len(), x.len()),
        )
    }

    pub fn value(&self, x: &DVector<T>) -> T {
        (self.value)(x)
    }

    pub fn grad(&self, x: &DVector<T>) -> DVector<T> {
        (self.grad)(x)
    }

    pub fn hess(&self, x: &DVector<T>) -> DMatrix<T> {
        (self.hess)(x)
    }

    /// The Hamiltonian vector field `X_H(x) = J0 DH(x)`.
    pub fn vector_field(&self, ctx: &SymplecticContext<T>, x: &DVector<T>) -> DVector<T> {
        ctx.j0() * self.grad(x)
    }

    /// Consistency of grad with central differences of value, and symmetry
    /// of hess, at the given probes.
    pub fn validate(&self, probes: &[DVector<T>]) -> Result<()> {
        let h = T::of(1e-5);
        for x in probes {
            let g = self.grad(x);
            let scale = T::one().max(g.amax());
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (self.value(&xp) - self.value(&xm)) / (h * T::of(2.0));
                if (fd - g[i]).abs() > T::of(1e-5) * scale {
                    return Err(SymError::InvalidInput(format!(
                        "grad inconsistent with value at component {i}"
                    )));
                }
            }
            let hm = self.hess(x);
            if (&hm - hm.transpose()).amax() > T::of(1e-9) * T::one().max(hm.amax()) {
                return Err(SymError::InvalidInput("hess not symmetric".into()));
            }
        }
        Ok(())
    }
}

/// A sampled orbit with cubic Hermite dense output.
#[derive(Clone)]
pub struct Trajectory<T: Scalar> {
    /// Total flow time; `at(s)` takes the scaled parameter s in [0, 1].
    pub t_max: T,
    pub points: Vec<DVector<T>>,
    pub velocities: Vec<DVector<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// Dense evaluation at scaled time s in [0, 1] (piecewise cubic Hermite,
    /// matching the node values and velocities of the integrator).
    pub fn at(&self, s: T) -> DVector<T> {
        let steps = self.points.len() - 1;
        let sf: f64 = s.to_subset().unwrap_or(0.0);
        let sf = sf.clamp(0.0, 1.0);
        let k = ((sf * steps as f64).floor() as usize).min(steps - 1);
        let h = T::one() / T::of(steps as f64);
        let u = (s - T::of(k as f64) * h) / h;
        let (p0, p1) = (&self.points[k], &self.points[k + 1]);
        // velocities are per unit of scaled time
        let (m0, m1) = (&self.velocities[k], &self.velocities[k + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = T::of(2.0) * u3 - T::of(3.0) * u2 + T::one();
        let h10 = u3 - T::of(2.0) * u2 + u;
        let h01 = -T::of(2.0) * u3 + T::of(3.0) * u2;
        let h11 = u3 - u2;
        p0 * h00 + m0 * (h10 * h) + p1 * h01 + m1 * (h11 * h)
    }

    pub fn endpoint(&self) -> &DVector<T> {
        self.points.last().unwrap()
    }
}

/// Flow of `x' = J0 DH(x)` by classical RK4 over total time `t_max`.
pub fn flow<T: Scalar>(
    h: &HamiltonianModel<T>,
    x0: &DVector<T>,
    t_max: T,
    steps: usize,
) -> Result<Trajectory<T>> {
    if steps < 1 {
        return Err(SymError::InvalidInput("steps must be >= 1".into()));
    }
    if x0.len() != 2 * h.n {
        return Err(SymError::InvalidInput("initial point has wrong dimension".into()));
    }
    let ctx = SymplecticContext::<T>::new(h.n);
    let f = |x: &DVector<T>| h.vector_field(&ctx, x);
    let dt = t_max / T::of(steps as f64);
    let overflow = T::of(1e12);
    let mut points = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    points.push(x.clone());
    velocities.push(f(&x) * t_max);
    for k in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (dt * T::of(0.5))));
        let k3 = f(&(&x + &k2 * (dt * T::of(0.5))));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * T::of(2.0) + k3 * T::of(2.0) + k4) * (dt / T::of(6.0));
        if x.amax() > overflow {
            return Err(SymError::Diverged { t: (k + 1) as f64 / steps as f64 });
        }
        points.push(x.clone());
        velocities.push(f(&x) * t_max);
    }
    Ok(Trajectory { t_max, points, velocities })
}

/// Linearized flow along the time-1 orbit through `x0`: the fundamental
/// solution of `xi' = J0 D^2H(x(t)) xi`.
pub fn linearized_path<T: Scalar>(
    h: &HamiltonianModel<T>,
    x0: &DVector<T>,
    steps: usize,
) -> Result<SymplecticPath<T>> {
    linearized_path_horizon(h, x0, T::one(), steps)
}

/// Linearized flow over `[0, t_max]`, reported as a path on the scaled
/// parameter `s` in [0, 1]: `Phi(s) = D phi_{s t_max}`.
pub fn linearized_path_horizon<T: Scalar>(
    h: &HamiltonianModel<T>,
    x0: &DVector<T>,
    t_max: T,
    steps: usize,
) -> Result<SymplecticPath<T>> {
    let traj = flow(h, x0, t_max, steps)?;
    let hm = h.clone();
    // In scaled time, x' = t_max J0 DH(x), so the generator is t_max D^2H.
    let s_path = SymmetricPath::new(2 * h.n, move |s: T| hm.hess(&traj.at(s)) * t_max);
    integrate_fundamental(&s_path, steps)
}

/// Action of the time-1 orbit through `x0`:
/// `A_H(x) = -int_0^1 (DH(x(t)) . x(t)) / 2 dt + H(x0)`,
/// by Simpson quadrature on the flow grid.
pub fn action<T: Scalar>(h: &HamiltonianModel<T>, x0: &DVector<T>, steps: usize) -> Result<T> {
    let steps = if steps % 2 == 0 { steps } else { steps + 1 };
    let traj = flow(h, x0, T::one(), steps)?;
    let integrand = |x: &DVector<T>| h.grad(x).dot(x) * T::of(0.5);
    let mut sum = T::zero();
    for (k, p) in traj.points.iter().enumerate() {
        let w = if k == 0 || k == steps {
            T::one()
        } else if k % 2 == 1 {
            T::of(4.0)
        } else {
            T::of(2.0)
        };
        sum += integrand(p) * w;
    }
    let integral = sum / T::of(3.0 * steps as f64);
    Ok(-integral + h.value(x0))
}

/// Exact floor of `(n + max_cz) / 2` from the twice-value of `max_cz`.
pub fn floor_half_shift(n: usize, max_cz: crate::half::HalfInt) -> i64 {
    // (n + max_cz)/2 = (2n + twice)/4 exactly.
    (2 * n as i64 + max_cz.twice()).div_euclid(4)
}

/// kappa-corrected action:
/// `A_H(x) + (1/kappa) floor((n + max CZ-ind) / 2)`, with the floor taken in
/// exact rational arithmetic (so no ambiguity is possible).
pub fn action_hat<T: Scalar>(
    h: &HamiltonianModel<T>,
    x0: &DVector<T>,
    kappa: T,
    steps: usize,
    opts: &MaslovOptions<T>,
) -> Result<T> {
    if kappa == T::zero() {
        return Err(SymError::InvalidInput("kappa must be nonzero".into()));
    }
    let a = action(h, x0, steps)?;
    let lin = linearized_path(h, x0, steps)?;
    let idx = cz_index(&lin, opts)?;
    let shift = floor_half_shift(h.n, idx.max_value);
    Ok(a + T::of(shift as f64) / kappa)
}

/// Everything about one time-1 orbit.
#[derive(Clone)]
pub struct OrbitRecord<T: Scalar> {
    pub x0: DVector<T>,
    pub period_check: T,
    pub periodic: bool,
    pub trajectory: Trajectory<T>,
    pub linearized: SymplecticPath<T>,
    pub action: T,
    pub index: IndexResult<T>,
    /// Gauge level for profile Hamiltonians.
    pub level: Option<T>,
}

/// Periodicity tolerance: 1e-8 for closed-form models, doubled for sampled.
pub fn orbit_tol<T: Scalar>(kind: HamKind) -> T {
    match kind {
        HamKind::Sampled => T::of(2e-8),
        _ => T::of(1e-8),
    }
}

pub fn orbit_record<T: Scalar>(
    h: &HamiltonianModel<T>,
    x0: &DVector<T>,
    steps: usize,
    opts: &MaslovOptions<T>,
    level: Option<T>,
) -> Result<OrbitRecord<T>> {
    let trajectory = flow(h, x0, T::one(), steps)?;
    let period_check = (trajectory.endpoint() - x0).norm();
    let periodic = period_check <= orbit_tol::<T>(h.kind);
    let linearized = linearized_path(h, x0, steps)?;
    let a = action(h, x0, steps)?;
    let index = cz_index(&linearized, opts)?;
    Ok(OrbitRecord {
        x0: x0.clone(),
        period_check,
        periodic,
        trajectory,
        linearized,
        action: a,
        index,
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::half::HalfInt;
    use crate::symcore::{is_isotropic_generator, SymplecticForm};

    type M = DMatrix<f64>;
    type V = DVector<f64>;

    fn pi_disc() -> HamiltonianModel<f64> {
        // H = pi |z|^2, n = 1.
        HamiltonianModel::quadratic(M::identity(2, 2) * (2.0 * std::f64::consts::PI)).unwrap()
    }

    #[test]
    fn constant_hamiltonian_is_static() {
        let h = HamiltonianModel::constant(1, 3.5);
        let x0 = V::from_vec(vec![0.3, -0.7]);
        let traj = flow(&h, &x0, 1.0, 100).unwrap();
        assert!((traj.endpoint() - &x0).norm() < 1e-14);
        assert!((action(&h, &x0, 100).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn calibration_pi_disc_is_one_periodic() {
        // Locks the sign realization x' = J0 DH.
        let h = pi_disc();
        let x0 = V::from_vec(vec![1.0, 0.0]);
        let traj = flow(&h, &x0, 1.0, 10_000).unwrap();
        assert!((traj.endpoint() - &x0).norm() < 1e-8);
        // energy conservation along the way
        for p in traj.points.iter().step_by(500) {
            assert!((h.value(p) - h.value(&x0)).abs() < 1e-7);
        }
    }

    #[test]
    fn ellipsoid_round_block_common_period() {
        // f for E(1, 1) in n = 2 is |z|^2; H = pi f has all orbits 1-periodic.
        let h = HamiltonianModel::quadratic(M::identity(4, 4) * (2.0 * std::f64::consts::PI))
            .unwrap();
        let x0 = V::from_vec(vec![0.4, -0.1, 0.3, 0.8]);
        let traj = flow(&h, &x0, 1.0, 10_000).unwrap();
        assert!((traj.endpoint() - &x0).norm() < 1e-7);
    }

    #[test]
    fn quadratic_linearization_is_exact_exponential() {
        let q = M::from_row_slice(2, 2, &[1.3, 0.4, 0.4, -0.6]);
        let h = HamiltonianModel::quadratic(q.clone()).unwrap();
        let x0 = V::from_vec(vec![0.2, 0.1]);
        let lin = linearized_path(&h, &x0, 400).unwrap();
        let form = SymplecticForm::<f64>::standard(1);
        let exact = SymplecticPath::constant_generator(q, &form);
        for &t in &[0.3, 0.7, 1.0] {
            assert!((lin.at(t) - exact.at(t)).amax() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn profile_action_closed_form() {
        // H = chi(f), f = |z|^2, chi(u) = 1 - u: A = -chi'(u) u + chi(u) = 1.
        let h = HamiltonianModel::closed_form(
            1,
            |x: &V| 1.0 - x.norm_squared(),
            |x: &V| x * -2.0,
            |x: &V| M::identity(x.len(), x.len()) * -2.0,
        );
        for u in [0.3_f64, 0.7] {
            let x0 = V::from_vec(vec![u.sqrt(), 0.0]);
            let a = action(&h, &x0, 2000).unwrap();
            assert!((a - 1.0).abs() < 1e-8, "u = {u}: A = {a}");
        }
    }

    #[test]
    fn validate_catches_wrong_gradient() {
        let bad = HamiltonianModel::closed_form(
            1,
            |x: &V| x.norm_squared(),
            |x: &V| x * 3.0, // should be 2x
            |x: &V| M::identity(x.len(), x.len()) * 2.0,
        );
        let probes = vec![V::from_vec(vec![0.5, -0.3])];
        assert!(bad.validate(&probes).is_err());
        let good = HamiltonianModel::quadratic(M::identity(2, 2) * 2.0).unwrap();
        good.validate(&probes).unwrap();
    }

    #[test]
    fn action_hat_arithmetic() {
        assert_eq!(floor_half_shift(1, HalfInt::from_int(-1)), 0);
        assert_eq!(floor_half_shift(1, HalfInt::from_int(-3)), -1);
        assert_eq!(floor_half_shift(2, HalfInt::from_twice(-3)), 0); // (2 - 3/2)/2 = 1/4
        assert_eq!(floor_half_shift(1, HalfInt::from_twice(-5)), -1); // (1 - 5/2)/2 = -3/4
        assert_eq!(floor_half_shift(3, HalfInt::from_int(1)), 2);
    }

    #[test]
    fn action_hat_composes() {
        // H = -pi |z|^2: orbit loop e^{-2 pi J0 t}, max_cz = -1, n = 1:
        // shift = floor(0/2) = 0, so action_hat == action.
        let h = HamiltonianModel::quadratic(M::identity(2, 2) * (-2.0 * std::f64::consts::PI))
            .unwrap();
        let x0 = V::from_vec(vec![0.5, 0.0]);
        let a = action(&h, &x0, 2000).unwrap();
        let ah = action_hat(&h, &x0, -1.0, 2000, &MaslovOptions::default()).unwrap();
        assert!((ah - a).abs() < 1e-12);
    }

    #[test]
    fn orbit_record_flags_periodicity() {
        let h = pi_disc();
        let x0 = V::from_vec(vec![0.7, 0.0]);
        let rec = orbit_record(&h, &x0, 10_000, &MaslovOptions::default(), None).unwrap();
        assert!(rec.periodic);
        // positive rotation e^{2 pi J0 t}: cz = +2
        assert_eq!(rec.index.value, HalfInt::from_int(2));
    }

    #[test]
    fn reparametrization_identity() {
        // (phi^{chi o H}_t)_* = (phi^H_{chi'(H) t})_* (1 + t chi''(H) K),
        // K: xi -> omega(xi, X_H) X_H.
        let ctx = SymplecticContext::<f64>::new(1);
        let form = ctx.form();
        // base H = |z|^2; chi(u) = u + 0.3 u^2 (chi' = 1 + 0.6u, chi'' = 0.6)
        let base = HamiltonianModel::quadratic(M::identity(2, 2) * 2.0).unwrap();
        let chi = |u: f64| u + 0.3 * u * u;
        let dchi = |u: f64| 1.0 + 0.6 * u;
        let ddchi = |_u: f64| 0.6;
        let composed = HamiltonianModel::closed_form(
            1,
            move |x: &V| chi(x.norm_squared()),
            move |x: &V| x * (2.0 * dchi(x.norm_squared())),
            move |x: &V| {
                let u = x.norm_squared();
                M::identity(2, 2) * (2.0 * dchi(u)) + (x * x.transpose()) * (4.0 * ddchi(u))
            },
        );
        composed.validate(&[V::from_vec(vec![0.4, 0.2])]).unwrap();
        let x0 = V::from_vec(vec![0.6, -0.3]);
        let u = x0.norm_squared();
        let lhs_path = linearized_path(&composed, &x0, 4000).unwrap();
        let rhs_base = linearized_path_horizon(&base, &x0, dchi(u), 4000).unwrap();
        let xh = base.vector_field(&ctx, &x0);
        let k_map = {
            // xi -> omega(xi, X_H) X_H = -X_H X_H^T Omega xi
            let xm = M::from_column_slice(2, 1, &[xh[0], xh[1]]);
            crate::symcore::isotropic_shear(&xm, &M::from_element(1, 1, 1.0), form).unwrap()
        };
        let (ok, _) = is_isotropic_generator(&k_map, form);
        assert!(ok, "correction map must lie in the isotropic cone");
        for &t in &[0.25, 0.5, 1.0] {
            let lhs = lhs_path.at(t);
            let rhs = rhs_base.at(t) * (M::identity(2, 2) + &k_map * (t * ddchi(u)));
            let rel = (&lhs - &rhs).amax() / lhs.amax();
            assert!(rel < 1e-6, "t = {t}, rel = {rel}");
        }
    }

    #[test]
    fn corollary_parameter_index_gap() {
        // |max_cz(chi o H orbit) - max_cz(reparametrized base)| <= 1.
        let base = HamiltonianModel::quadratic(M::identity(2, 2) * (-2.0)).unwrap();
        let chi = |u: f64| 2.0 * u - 0.4 * u * u;
        let dchi = |u: f64| 2.0 - 0.8 * u;
        let ddchi = |_u: f64| -0.8;
        // chi o H with H = -|z|^2 in closed form.
        let composed = HamiltonianModel::closed_form(
            1,
            move |x: &V| chi(-x.norm_squared()),
            move |x: &V| x * (-2.0 * dchi(-x.norm_squared())),
            move |x: &V| {
                let u = -x.norm_squared();
                M::identity(2, 2) * (-2.0 * dchi(u)) + (x * x.transpose()) * (4.0 * ddchi(u))
            },
        );
        composed.validate(&[V::from_vec(vec![0.3, 0.5])]).unwrap();
        let x0 = V::from_vec(vec![0.5, 0.1]);
        let u = -x0.norm_squared();
        let opts = MaslovOptions::default();
        let lhs = cz_index(&linearized_path(&composed, &x0, 4000).unwrap(), &opts)
            .unwrap()
            .max_value;
        let rhs_path = linearized_path_horizon(&base, &x0, dchi(u), 4000).unwrap();
        let rhs = cz_index(&rhs_path, &opts).unwrap().max_value;
        assert!((lhs - rhs).abs() <= HalfInt::from_int(1), "{lhs:?} vs {rhs:?}");
    }
}
