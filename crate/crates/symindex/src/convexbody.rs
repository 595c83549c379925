//! Strictly convex bodies and their gauge functions, mollification with
//! certified Hessian bounds, the hat-capacities, profile Hamiltonians,
//! orbit-spectrum window reports, and the Poisson-bracket lower bound.
//!
//! The squared gauge `f` of a body `U` satisfies `f(t y) = t^2` for `t > 0`
//! and `y` on the boundary; its Hessian is 0-homogeneous, so every Hessian
//! certificate is computed on the unit sphere and extended by homogeneity.

use crate::czindex::{cz_index, floor_strict};
use crate::error::{Result, SymError};
use crate::half::HalfInt;
use crate::hamflow::{self, HamKind, HamiltonianModel};
use crate::maslov::MaslovOptions;
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyKind {
    Ellipsoid,
    General,
}

type GaugeFn<T> = Arc<dyn Fn(&DVector<T>) -> T + Send + Sync>;

/// A convex body `U` in R^{2n} with squared gauge `f` (2-homogeneous,
/// `f = 1` on the boundary).
#[derive(Clone)]
pub struct ConvexBodyModel<T: Scalar> {
    pub n: usize,
    pub kind: BodyKind,
    /// Ellipsoid radii, sorted ascending (complex coordinate z_i has radius
    /// r_i): `f(z) = sum |z_i|^2 / r_i^2`.
    pub radii: Option<Vec<T>>,
    /// Defining function for a general body: `U = {F < 0}`, `F(0) < 0`.
    defining: Option<GaugeFn<T>>,
    /// Direct squared gauge, when known in closed form (skips bisection).
    direct_gauge: Option<GaugeFn<T>>,
    /// Certified lower bound `a` on the full Hessian over sphere samples.
    pub hess_lb_full: Option<T>,
    /// Best complex line found: (real 2n x 2 frame, restricted bound a0).
    pub hess_lb_split: Option<(DMatrix<T>, T)>,
}

impl<T: Scalar> ConvexBodyModel<T> {
    /// Ellipsoid E(r_1, ..., r_n); radii are sorted ascending.
    pub fn ellipsoid(mut radii: Vec<T>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| *r <= T::zero()) {
            return Err(SymError::InvalidInput("radii must be positive".into()));
        }
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ConvexBodyModel {
            n: radii.len(),
            kind: BodyKind::Ellipsoid,
            radii: Some(radii),
            defining: None,
            direct_gauge: None,
            hess_lb_full: None,
            hess_lb_split: None,
        })
    }

    pub fn ball(n: usize, r: T) -> Result<Self> {
        Self::ellipsoid(vec![r; n])
    }

    /// General body `{F < 0}` with `F(0) < 0` and `D^2 F > 0`.
    pub fn general(
        n: usize,
        defining: impl Fn(&DVector<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        ConvexBodyModel {
            n,
            kind: BodyKind::General,
            radii: None,
            defining: Some(Arc::new(defining)),
            direct_gauge: None,
            hess_lb_full: None,
            hess_lb_split: None,
        }
    }

    /// General body given directly by its squared gauge (2-homogeneous).
    pub fn from_gauge(
        n: usize,
        gauge_sq: impl Fn(&DVector<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        ConvexBodyModel {
            n,
            kind: BodyKind::General,
            radii: None,
            defining: None,
            direct_gauge: Some(Arc::new(gauge_sq)),
            hess_lb_full: None,
            hess_lb_split: None,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Squared gauge `f(x)`. Ellipsoids in closed form; general bodies by
    /// bisection of `F(x / s) = 0` along the ray through `x` (relative
    /// tolerance below 1e-10). For a general body `f(0)` is undefined.
    pub fn gauge_sq(&self, x: &DVector<T>) -> Result<T> {
        if x.len() != self.dim() {
            return Err(SymError::InvalidInput("point has wrong dimension".into()));
        }
        if let Some(radii) = &self.radii {
            let mut s = T::zero();
            for i in 0..self.n {
                let zi2 = x[2 * i] * x[2 * i] + x[2 * i + 1] * x[2 * i + 1];
                s += zi2 / (radii[i] * radii[i]);
            }
            return Ok(s);
        }
        if let Some(g) = &self.direct_gauge {
            return Ok(g(x));
        }
        if x.norm() == T::zero() {
            return Err(SymError::OriginUndefined);
        }
        let f = self.defining.as_ref().unwrap();
        // Bracket s with F(x / s_lo) > 0 > F(x / s_hi).
        let mut lo = x.norm();
        let mut hi = lo;
        let mut guard = 0;
        while f(&(x / lo)) <= T::zero() {
            lo *= T::of(0.5);
            guard += 1;
            if guard > 200 {
                return Err(SymError::InvalidInput("cannot bracket gauge (F(0) >= 0?)".into()));
            }
        }
        guard = 0;
        while f(&(x / hi)) > T::zero() {
            hi *= T::of(2.0);
            guard += 1;
            if guard > 200 {
                return Err(SymError::InvalidInput("cannot bracket gauge (ray stays outside)".into()));
            }
        }
        // Bisect to near machine precision (well below the 1e-10 contract).
        while (hi - lo) > T::of(1e-14) * hi {
            let mid = (lo + hi) * T::of(0.5);
            if f(&(x / mid)) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = (lo + hi) * T::of(0.5);
        Ok(s * s)
    }

    /// Gradient of the squared gauge (1-homogeneous). Closed form for
    /// ellipsoids; central differences on the unit sphere otherwise.
    pub fn grad_gauge_sq(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if let Some(radii) = &self.radii {
            let mut g = DVector::zeros(self.dim());
            for i in 0..self.n {
                let c = T::of(2.0) / (radii[i] * radii[i]);
                g[2 * i] = x[2 * i] * c;
                g[2 * i + 1] = x[2 * i + 1] * c;
            }
            return Ok(g);
        }
        let r = x.norm();
        if r == T::zero() {
            return Err(SymError::OriginUndefined);
        }
        let xs = x / r;
        let h = T::of(1e-5);
        let mut g = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let mut xp = xs.clone();
            let mut xm = xs.clone();
            xp[i] += h;
            xm[i] -= h;
            g[i] = (self.gauge_sq(&xp)? - self.gauge_sq(&xm)?) / (h * T::of(2.0));
        }
        Ok(g * r)
    }

    /// Hessian of the squared gauge. It is 0-homogeneous, so it is evaluated
    /// at `x / |x|` (this also makes the homogeneity identity
    /// `D^2 f(a x) = D^2 f(x)` exact for general bodies).
    pub fn hess_gauge_sq(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        if let Some(radii) = &self.radii {
            let mut hm = DMatrix::zeros(self.dim(), self.dim());
            for i in 0..self.n {
                let c = T::of(2.0) / (radii[i] * radii[i]);
                hm[(2 * i, 2 * i)] = c;
                hm[(2 * i + 1, 2 * i + 1)] = c;
            }
            return Ok(hm);
        }
        let r = x.norm();
        if r == T::zero() {
            return Err(SymError::OriginUndefined);
        }
        let xs = x / r;
        let d = self.dim();
        let h = T::of(1e-3);
        let f0 = self.gauge_sq(&xs)?;
        let mut hm = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut xp = xs.clone();
            let mut xm = xs.clone();
            xp[i] += h;
            xm[i] -= h;
            hm[(i, i)] = (self.gauge_sq(&xp)? - f0 * T::of(2.0) + self.gauge_sq(&xm)?) / (h * h);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let mut a = xs.clone();
                let mut b = xs.clone();
                let mut c = xs.clone();
                let mut e = xs.clone();
                a[i] += h;
                a[j] += h;
                b[i] += h;
                b[j] -= h;
                c[i] -= h;
                c[j] += h;
                e[i] -= h;
                e[j] -= h;
                let v = (self.gauge_sq(&a)? - self.gauge_sq(&b)? - self.gauge_sq(&c)?
                    + self.gauge_sq(&e)?)
                    / (h * h * T::of(4.0));
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
        Ok(hm)
    }
}

/// Quasi-uniform unit-sphere samples in the given dimension: equal angles on
/// the circle, a deterministic low-discrepancy lattice (seeded normalized
/// Gaussians) in higher dimension.
pub fn sphere_samples<T: Scalar>(dim: usize, count: usize) -> Vec<DVector<T>> {
    if dim == 2 {
        return (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                DVector::from_vec(vec![T::of(th.cos()), T::of(th.sin())])
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1_ab1e);
    (0..count)
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        // Box-Muller from two uniforms.
                        let u1: f64 = rng.gen_range(1e-12..1.0);
                        let u2: f64 = rng.gen_range(0.0..1.0);
                        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                    })
                    .collect();
                let x = DVector::from_vec(v);
                let r = x.norm();
                if r > 1e-6 {
                    return (x / r).map(T::of);
                }
            }
        })
        .collect()
}

fn min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> T {
    let sym = (m + m.transpose()) * T::of(0.5);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(T::of(f64::INFINITY), |a, b| a.min(b))
}

/// Number of certification samples: at least 4096 for n <= 3.
pub fn cert_sample_count(dim: usize) -> usize {
    if dim <= 6 {
        4096
    } else {
        8192
    }
}

/// Certify a lower bound on the minimal eigenvalue of `D^2 f` over the unit
/// sphere (extended to R^{2n} \ 0 by homogeneity). Returns (bound, guard).
pub fn certify_hessian<T: Scalar>(body: &ConvexBodyModel<T>) -> Result<(T, T)> {
    let guard = match body.kind {
        BodyKind::Ellipsoid => T::zero(),
        BodyKind::General => T::of(1e-3),
    };
    let count = match body.kind {
        // D^2 f is constant for an ellipsoid; one sample is exact.
        BodyKind::Ellipsoid => 1,
        BodyKind::General => cert_sample_count(body.dim()),
    };
    let mut a_min = T::of(f64::INFINITY);
    for x in sphere_samples::<T>(body.dim(), count) {
        let eig = min_eigenvalue(&body.hess_gauge_sq(&x)?);
        a_min = a_min.min(eig);
    }
    let bound = a_min - guard;
    if bound <= T::zero() {
        return Err(SymError::Uncertified {
            value: a_min.to_subset().unwrap_or(0.0),
            guard: guard.to_subset().unwrap_or(0.0),
        });
    }
    Ok((bound, guard))
}

#[derive(Clone, Debug)]
pub struct CapacityResult<T: Scalar> {
    pub value: T,
    /// Certified Hessian bound used (full bound `a`, or restricted `a0`).
    pub bound: T,
    pub guard: T,
    /// For hat-C0: the real 2n x 2 frame of the best complex line found.
    pub line: Option<DMatrix<T>>,
    /// True when the value is exact (ellipsoid closed form).
    pub closed_form: bool,
}

/// `hat-C(U) = 2 pi / a`, with `a` the certified lower bound on `D^2 f`.
/// Ellipsoids use the closed form `pi r_n^2`.
pub fn capacity_hat<T: Scalar>(body: &ConvexBodyModel<T>) -> Result<CapacityResult<T>> {
    if let Some(radii) = &body.radii {
        let rn = *radii.last().unwrap();
        return Ok(CapacityResult {
            value: T::of(PI) * rn * rn,
            bound: T::of(2.0) / (rn * rn),
            guard: T::zero(),
            line: None,
            closed_form: true,
        });
    }
    capacity_hat_sampled(body)
}

/// The general sampling pipeline for `hat-C`, usable on any body kind
/// (for cross-checking closed forms).
pub fn capacity_hat_sampled<T: Scalar>(body: &ConvexBodyModel<T>) -> Result<CapacityResult<T>> {
    let count = cert_sample_count(body.dim());
    let guard = T::of(1e-3);
    let mut a_min = T::of(f64::INFINITY);
    for x in sphere_samples::<T>(body.dim(), count) {
        a_min = a_min.min(min_eigenvalue(&body.hess_gauge_sq(&x)?));
    }
    let bound = a_min - guard;
    if bound <= T::zero() {
        return Err(SymError::Uncertified {
            value: a_min.to_subset().unwrap_or(0.0),
            guard: guard.to_subset().unwrap_or(0.0),
        });
    }
    Ok(CapacityResult {
        value: T::of(2.0 * PI) / bound,
        bound,
        guard,
        line: None,
        closed_form: false,
    })
}

/// Real 2n x 2 frame of the complex line through the complex direction
/// encoded by the real unit vector v: columns (v, J0 v).
fn complex_line_frame<T: Scalar>(v: &DVector<T>) -> DMatrix<T> {
    let d = v.len();
    let mut frame = DMatrix::zeros(d, 2);
    frame.set_column(0, v);
    // J0 v in interleaved coordinates: (x, y) -> (-y, x) per block.
    let mut jv = DVector::zeros(d);
    for i in 0..d / 2 {
        jv[2 * i] = -v[2 * i + 1];
        jv[2 * i + 1] = v[2 * i];
    }
    frame.set_column(1, &jv);
    frame
}

/// Worst-case restricted Hessian bound of the body on the complex line of v:
/// min over sphere samples of the smallest eigenvalue of the 2x2 restriction.
fn restricted_bound<T: Scalar>(v: &DVector<T>, hessians: &[DMatrix<T>]) -> T {
    let frame = complex_line_frame(v);
    let mut a = T::of(f64::INFINITY);
    for hm in hessians {
        a = a.min(min_eigenvalue(&(frame.transpose() * hm * &frame)));
    }
    a
}

/// `hat-C0(U) = inf over complex lines V of 2 pi / a0(V)` where
/// `D^2 f >= a0` holds on V uniformly. Ellipsoids use the closed form
/// `pi r_1^2`; general bodies report the best line found by multi-start
/// local search (an upper bound on hat-C0, certificate attached).
pub fn capacity_hat0<T: Scalar>(body: &ConvexBodyModel<T>) -> Result<CapacityResult<T>> {
    if let Some(radii) = &body.radii {
        let r1 = radii[0];
        let d = body.dim();
        let mut v = DVector::zeros(d);
        v[0] = T::one();
        return Ok(CapacityResult {
            value: T::of(PI) * r1 * r1,
            bound: T::of(2.0) / (r1 * r1),
            guard: T::zero(),
            line: Some(complex_line_frame(&v)),
            closed_form: true,
        });
    }
    capacity_hat0_sampled(body)
}

/// Multi-start search over the complex-line Grassmannian. Returns the line
/// with the largest certified restricted bound found (hence an upper bound
/// on hat-C0).
pub fn capacity_hat0_sampled<T: Scalar>(body: &ConvexBodyModel<T>) -> Result<CapacityResult<T>> {
    let d = body.dim();
    let guard = T::of(1e-3);
    // Hessians are sampled once and cached; the line search only touches
    // 2x2 restrictions of the cached matrices.
    let sample_count = match body.kind {
        BodyKind::Ellipsoid => 1,
        BodyKind::General => (cert_sample_count(d) / 8).max(256),
    };
    let hessians: Vec<DMatrix<T>> = sphere_samples::<T>(d, sample_count)
        .iter()
        .map(|x| body.hess_gauge_sq(x))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed_beef);
    let mut best_v: Option<DVector<T>> = None;
    let mut best_a = T::of(f64::NEG_INFINITY);
    let starts = 8;
    for _ in 0..starts {
        let mut v = DVector::from_iterator(
            d,
            (0..d).map(|_| T::of(rng.gen_range(-1.0..1.0_f64))),
        );
        if v.norm() < T::of(1e-6) {
            v[0] = T::one();
        }
        v /= v.norm();
        let mut a = restricted_bound(&v, &hessians);
        // Coordinate hill climb with shrinking step.
        let mut step = 0.4_f64;
        while step > 1e-4 {
            let mut improved = false;
            for i in 0..d {
                for sgn in [1.0_f64, -1.0] {
                    let mut w = v.clone();
                    w[i] += T::of(sgn * step);
                    w /= w.norm();
                    let aw = restricted_bound(&w, &hessians);
                    if aw > a {
                        a = aw;
                        v = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if a > best_a {
            best_a = a;
            best_v = Some(v);
        }
    }
    let bound = best_a - guard;
    if bound <= T::zero() {
        return Err(SymError::Uncertified {
            value: best_a.to_subset().unwrap_or(0.0),
            guard: guard.to_subset().unwrap_or(0.0),
        });
    }
    Ok(CapacityResult {
        value: T::of(2.0 * PI) / bound,
        bound,
        guard,
        line: best_v.map(|v| complex_line_frame(&v)),
        closed_form: false,
    })
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

/// Fixed C-infinity bump used as the mollifier kernel: supported in the ball
/// of radius 0.6 centered at 0.3 e_1 (inside the unit ball). The off-center
/// support gives the kernel a nonzero first moment, which makes the
/// action-deviation bound scale visibly linearly in delta.
const BUMP_CENTER: f64 = 0.3;
const BUMP_RADIUS: f64 = 0.6;

fn bump(u: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for (i, ui) in u.iter().enumerate() {
        let c = if i == 0 { BUMP_CENTER } else { 0.0 };
        r2 += (ui - c) * (ui - c);
    }
    let s = r2 / (BUMP_RADIUS * BUMP_RADIUS);
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

const GAUSS4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.3478548451374538),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.3478548451374538),
];

/// Quadrature nodes (offsets in the kernel's support) and normalized weights
/// for the fixed mollifier: tensor Gauss rule, order 8 up to dimension 4.
fn mollifier_nodes<T: Scalar>(dim: usize) -> (Vec<DVector<T>>, Vec<T>, DVector<T>) {
    let rule: Vec<(f64, f64)> = if dim <= 4 {
        GAUSS8.to_vec()
    } else {
        GAUSS4.to_vec()
    };
    let m = rule.len();
    let total = m.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut sum = 0.0;
    for flat in 0..total {
        let mut idx = flat;
        let mut u = vec![0.0_f64; dim];
        let mut w = 1.0_f64;
        for ui in u.iter_mut() {
            let (x, wx) = rule[idx % m];
            idx /= m;
            *ui = x * BUMP_RADIUS;
            w *= wx * BUMP_RADIUS;
        }
        u[0] += BUMP_CENTER;
        let phi = bump(&u);
        if phi > 0.0 {
            let wk = w * phi;
            sum += wk;
            nodes.push(DVector::from_iterator(dim, u.iter().map(|&v| T::of(v))));
            weights.push(wk);
        }
    }
    let weights: Vec<T> = weights.iter().map(|&w| T::of(w / sum)).collect();
    let mut m1 = DVector::zeros(dim);
    for (u, w) in nodes.iter().zip(&weights) {
        m1 += u * *w;
    }
    (nodes, weights, m1)
}

/// Mollified squared gauge `f_delta = f * phi_delta` with certified Hessian
/// bound. Values and derivatives are discrete convolutions over a fixed node
/// set, so derivatives commute with the smoothing exactly.
#[derive(Clone)]
pub struct MollifiedGauge<T: Scalar> {
    pub delta: T,
    pub n: usize,
    body: ConvexBodyModel<T>,
    nodes: Vec<DVector<T>>,
    weights: Vec<T>,
    /// First moment of the kernel (nonzero for the fixed off-center bump).
    pub first_moment: DVector<T>,
    /// Certified lower bound on `D^2 f_delta` (at sphere samples).
    pub hess_lb: T,
    pub guard: T,
}

impl<T: Scalar> MollifiedGauge<T> {
    pub fn value(&self, x: &DVector<T>) -> Result<T> {
        let mut s = T::zero();
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            s += self.body.gauge_sq(&(x - u * self.delta))? * *w;
        }
        Ok(s)
    }

    pub fn grad(&self, x: &DVector<T>) -> Result<DVector<T>> {
        let mut g = DVector::zeros(x.len());
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            g += self.body.grad_gauge_sq(&(x - u * self.delta))? * *w;
        }
        Ok(g)
    }

    /// Hessian of `f_delta`. Exact for ellipsoids (constant Hessian).
    /// General bodies use central differences of the smooth mollified value
    /// with step tied to delta; this stays valid for merely convex gauges
    /// whose raw Hessian is only distributional.
    pub fn hess(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        if self.body.kind == BodyKind::Ellipsoid {
            // D^2 f is constant; convolution leaves it unchanged.
            return self.body.hess_gauge_sq(x);
        }
        let d = x.len();
        let h = self.delta * T::of(0.25);
        let f0 = self.value(x)?;
        let mut hm = DMatrix::zeros(d, d);
        for i in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            hm[(i, i)] = (self.value(&xp)? - f0 * T::of(2.0) + self.value(&xm)?) / (h * h);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let mut a = x.clone();
                let mut b = x.clone();
                let mut c = x.clone();
                let mut e = x.clone();
                a[i] += h;
                a[j] += h;
                b[i] += h;
                b[j] -= h;
                c[i] -= h;
                c[j] += h;
                e[i] -= h;
                e[j] -= h;
                let v = (self.value(&a)? - self.value(&b)? - self.value(&c)? + self.value(&e)?)
                    / (h * h * T::of(4.0));
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
        Ok(hm)
    }
}

/// Mollify the body's squared gauge with the fixed kernel at scale `delta`.
/// Fails with `DeltaTooLarge` when the support scale is unreasonable for the
/// unit-scale bodies handled here.
pub fn mollify<T: Scalar>(body: &ConvexBodyModel<T>, delta: T) -> Result<MollifiedGauge<T>> {
    if delta <= T::zero() {
        return Err(SymError::InvalidInput("delta must be positive".into()));
    }
    if delta > T::of(0.1) {
        return Err(SymError::DeltaTooLarge {
            delta: delta.to_subset().unwrap_or(f64::NAN),
        });
    }
    let (nodes, weights, first_moment) = mollifier_nodes::<T>(body.dim());
    let guard = T::of(1e-4);
    let mut mg = MollifiedGauge {
        delta,
        n: body.n,
        body: body.clone(),
        nodes,
        weights,
        first_moment,
        hess_lb: T::zero(),
        guard,
    };
    // Certify: sampled eigenvalues of D^2 f_delta, minus the guard. The
    // bound can be near zero for merely convex inputs; strict positivity is
    // only demanded where strict convexity is (capacities, inner bodies).
    let count = match body.kind {
        BodyKind::Ellipsoid => 1,
        BodyKind::General => 128,
    };
    let mut a_min = T::of(f64::INFINITY);
    for x in sphere_samples::<T>(body.dim(), count) {
        a_min = a_min.min(min_eigenvalue(&mg.hess(&x)?));
    }
    mg.hess_lb = a_min - guard;
    Ok(mg)
}

/// Action deviation of a profile Hamiltonian from its flat-model value:
/// `|A_{chi o f_delta}(x) - (-chi'(u) u + chi(u))|` with `u = f_delta(x)`.
/// Decays linearly in delta (slope at most C |chi'|_inf for a body-dependent
/// measured constant C).
pub fn action_deviation<T: Scalar>(
    mollified: &MollifiedGauge<T>,
    chi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
    dchi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
    ddchi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
    x0: &DVector<T>,
    steps: usize,
) -> Result<T> {
    let h = profile_model(mollified, chi.clone(), dchi.clone(), ddchi)?;
    let a = hamflow::action(&h, x0, steps)?;
    let u = mollified.value(x0)?;
    let flat = -dchi(u) * u + chi(u);
    Ok((a - flat).abs())
}

/// Hamiltonian `H = chi(f_delta)` as a closed-form model.
pub fn profile_model<T: Scalar>(
    mollified: &MollifiedGauge<T>,
    chi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
    dchi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
    ddchi: impl Fn(T) -> T + Send + Sync + Clone + 'static,
) -> Result<HamiltonianModel<T>> {
    let m1 = mollified.clone();
    let m2 = mollified.clone();
    let m3 = mollified.clone();
    let dchi2 = dchi.clone();
    Ok(HamiltonianModel::closed_form(
        mollified.n,
        move |x| chi(m1.value(x).unwrap()),
        move |x| {
            let u = m2.value(x).unwrap();
            m2.grad(x).unwrap() * dchi2(u)
        },
        move |x| {
            let u = m3.value(x).unwrap();
            let g = m3.grad(x).unwrap();
            m3.hess(x).unwrap() * dchi(u) + (&g * g.transpose()) * ddchi(u)
        },
    )
    .with_kind(HamKind::Profile))
}

// ---------------------------------------------------------------------------
// Strictly convex inner approximation
// ---------------------------------------------------------------------------

/// Build a strictly convex body `{f_delta + eps |x|^2 < 1}` inside a (merely)
/// convex `U`, containing the compact sample set `K`, with Hessian at least
/// `2 eps`. Sweeps decreasing delta, eps until containment holds.
pub fn strictly_convex_inner<T: Scalar>(
    body: &ConvexBodyModel<T>,
    k_samples: &[DVector<T>],
) -> Result<ConvexBodyModel<T>> {
    let margin = T::of(1e-6);
    for x in k_samples {
        if body.gauge_sq(x)? >= T::one() - margin {
            return Err(SymError::InvalidInput(
                "K must lie strictly inside U".into(),
            ));
        }
    }
    let mut delta = T::of(0.1);
    for _ in 0..8 {
        let mg = mollify(body, delta)?;
        let mut eps = T::of(0.1);
        for _ in 0..8 {
            // Containment of K in {f_delta + eps |x|^2 < 1}.
            let mut contained = true;
            for x in k_samples {
                if mg.value(x)? + eps * x.norm_squared() >= T::one() {
                    contained = false;
                    break;
                }
            }
            if contained {
                // Certificate: directional second quotients of f_delta are
                // nonnegative by convexity; check a sampled sweep, then
                // D^2 (f_delta + eps |x|^2) >= 2 eps - guard.
                let guard = T::of(1e-6);
                let h = T::of(1e-3);
                let mut ok = true;
                'cert: for x in sphere_samples::<T>(body.dim(), 64) {
                    for v in sphere_samples::<T>(body.dim(), 16) {
                        let q = (mg.value(&(&x + &v * h))? - mg.value(&x)? * T::of(2.0)
                            + mg.value(&(&x - &v * h))?)
                            / (h * h);
                        if q < -guard {
                            ok = false;
                            break 'cert;
                        }
                    }
                }
                if ok {
                    let mgc = mg.clone();
                    let epsc = eps;
                    let mut out = ConvexBodyModel::general(body.n, move |x: &DVector<T>| {
                        mgc.value(x).unwrap() + epsc * x.norm_squared() - T::one()
                    });
                    out.hess_lb_full = Some(T::of(2.0) * eps - guard);
                    return Ok(out);
                }
            }
            eps *= T::of(0.5);
        }
        delta *= T::of(0.5);
    }
    Err(SymError::CannotSeparate)
}

// ---------------------------------------------------------------------------
// Profile family chi^s
// ---------------------------------------------------------------------------

/// Smooth cutoff: 1 for t <= 0, 0 for t >= 1, C-infinity in between.
fn cutoff(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let e = |s: f64| (-1.0 / s).exp();
        e(1.0 - t) / (e(t) + e(1.0 - t))
    }
}

fn cutoff_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let h = 1e-6;
        (cutoff(t + h) - cutoff(t - h)) / (2.0 * h)
    }
}

/// The profile family `chi^s = chi_0 + s chi_1`:
/// - `chi_0' = -(2 pi / a + eps')` on `[0, 1 - eps)`, tapering smoothly to 0
///   before u = 1 (so supp chi_0 is inside [0, 1)); convex, decreasing.
/// - `chi_1` is linear on `[0, 1 - 2 eps]` with supp inside `[0, 1 - eps)`.
#[derive(Clone, Debug)]
pub struct ProfileChi<T: Scalar> {
    /// Hessian bound `a` of the body the profile is built for.
    pub a: T,
    pub eps: T,
    pub eps_prime: T,
    pub s: T,
    /// Magnitude of the chi_1 plateau slope.
    slope1: T,
}

impl<T: Scalar> ProfileChi<T> {
    pub fn new(a: T, eps: T, eps_prime: T, s: T) -> Result<Self> {
        if a <= T::zero() || eps <= T::zero() || eps >= T::of(0.4) || eps_prime <= T::zero() {
            return Err(SymError::InvalidInput(
                "need a > 0, 0 < eps < 0.4, eps' > 0".into(),
            ));
        }
        let p = ProfileChi {
            a,
            eps,
            eps_prime,
            s,
            slope1: eps_prime * T::of(0.5),
        };
        // max chi_0 = chi_0(0) must stay below 2 pi / a.
        if p.chi0(T::zero()) >= T::of(2.0 * PI) / a {
            return Err(SymError::InvalidInput(
                "eps' too large: max chi_0 reaches 2 pi / a".into(),
            ));
        }
        Ok(p)
    }

    /// Default eps' for a given (a, eps): small enough that the taper keeps
    /// max chi_0 below 2 pi / a with room to spare.
    pub fn with_defaults(a: T, eps: T, s: T) -> Result<Self> {
        let ep = T::of(0.2) * eps * (T::of(2.0 * PI) / a);
        Self::new(a, eps, ep, s)
    }

    fn plateau0(&self) -> T {
        -(T::of(2.0 * PI) / self.a + self.eps_prime)
    }

    /// chi_0': the constant plateau value times a smooth taper supported on
    /// [1 - eps, 1 - eps/4].
    pub fn dchi0(&self, u: T) -> T {
        if u < T::zero() {
            return T::zero();
        }
        let t0 = T::one() - self.eps;
        let width = self.eps * T::of(0.75);
        let t = ((u - t0) / width).to_subset().unwrap_or(0.0);
        self.plateau0() * T::of(cutoff(t))
    }

    pub fn ddchi0(&self, u: T) -> T {
        let t0 = T::one() - self.eps;
        let width = self.eps * T::of(0.75);
        let t = ((u - t0) / width).to_subset().unwrap_or(0.0);
        self.plateau0() * T::of(cutoff_deriv(t)) / width
    }

    pub fn chi0(&self, u: T) -> T {
        // chi_0(u) = integral of -chi_0' from u to 1 (Gauss-Legendre, the
        // integrand is smooth).
        self.integrate_neg(|v| self.dchi0(v), u)
    }

    /// chi_1': slope plateau on [0, 1 - 2 eps], tapering to 0 inside
    /// [1 - 2 eps, 1 - 1.25 eps], so supp chi_1 is inside [0, 1 - eps).
    pub fn dchi1(&self, u: T) -> T {
        if u < T::zero() {
            return T::zero();
        }
        let t0 = T::one() - self.eps * T::of(2.0);
        let width = self.eps * T::of(0.75);
        let t = ((u - t0) / width).to_subset().unwrap_or(0.0);
        -self.slope1 * T::of(cutoff(t))
    }

    pub fn ddchi1(&self, u: T) -> T {
        let t0 = T::one() - self.eps * T::of(2.0);
        let width = self.eps * T::of(0.75);
        let t = ((u - t0) / width).to_subset().unwrap_or(0.0);
        -self.slope1 * T::of(cutoff_deriv(t)) / width
    }

    pub fn chi1(&self, u: T) -> T {
        self.integrate_neg(|v| self.dchi1(v), u)
    }

    fn integrate_neg(&self, d: impl Fn(T) -> T, u: T) -> T {
        if u >= T::one() {
            return T::zero();
        }
        let lo = u.max(T::zero());
        let hi = T::one();
        let mut s = T::zero();
        // Composite Gauss-8 on 16 panels: plenty for the taper scale eps.
        let panels = 16;
        let hpan = (hi - lo) / T::of(panels as f64);
        for p in 0..panels {
            let c = lo + hpan * (T::of(p as f64) + T::of(0.5));
            for (x, w) in GAUSS8 {
                s += -d(c + hpan * T::of(0.5 * x)) * T::of(w) * hpan * T::of(0.5);
            }
        }
        s
    }

    pub fn chi(&self, u: T) -> T {
        self.chi0(u) + self.s * self.chi1(u)
    }

    pub fn dchi(&self, u: T) -> T {
        self.dchi0(u) + self.s * self.dchi1(u)
    }

    pub fn ddchi(&self, u: T) -> T {
        self.ddchi0(u) + self.s * self.ddchi1(u)
    }

    /// Sup norm of (chi^s)' (attained on the plateau).
    pub fn dchi_inf(&self) -> T {
        (self.plateau0() - self.s * self.slope1).abs()
    }

    /// Sampled invariants: monotone decreasing, nonnegative, support bounds,
    /// plateau slope, max chi_0 < 2 pi / a.
    pub fn validate(&self) -> Result<()> {
        let grid = 400;
        let mut prev = T::of(f64::INFINITY);
        for k in 0..=grid {
            let u = T::of(k as f64 / grid as f64) * T::of(1.2);
            let c = self.chi(u);
            if c < -T::of(1e-12) {
                return Err(SymError::InvalidInput("chi^s must be nonnegative".into()));
            }
            if c > prev + T::of(1e-12) {
                return Err(SymError::InvalidInput("chi^s must be decreasing".into()));
            }
            prev = c;
            if u >= T::one() && c.abs() > T::of(1e-14) {
                return Err(SymError::InvalidInput("supp chi^s must be in [0, 1)".into()));
            }
            if u >= T::one() - self.eps && self.chi1(u).abs() > T::of(1e-14) {
                return Err(SymError::InvalidInput(
                    "supp chi_1 must be in [0, 1 - eps)".into(),
                ));
            }
            if u < T::one() - self.eps
                && (self.dchi0(u) - self.plateau0()).abs() > T::of(1e-12)
            {
                return Err(SymError::InvalidInput(
                    "chi_0' must equal -(2 pi / a + eps') on [0, 1 - eps)".into(),
                ));
            }
        }
        if self.chi0(T::zero()) >= T::of(2.0 * PI) / self.a {
            return Err(SymError::InvalidInput("max chi_0 must stay below 2 pi / a".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Spectrum window report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SpecEntry<T: Scalar> {
    pub level: T,
    /// Ellipsoid block carrying the orbit.
    pub block: usize,
    pub action: T,
    /// kappa-corrected action (only when kappa != 0).
    pub action_hat: Option<T>,
    pub max_cz: HalfInt,
    /// Whether the time-1 orbit at this level is exactly periodic
    /// (per-block resonance condition).
    pub periodic: bool,
    pub inside_window: bool,
}

#[derive(Clone, Debug)]
pub struct SpecReport<T: Scalar> {
    pub kappa: T,
    pub threshold: i64,
    pub entries: Vec<SpecEntry<T>>,
}

/// Representative point at mollified level u on the axis of the given block:
/// solves f_delta(t e) = u along the block's first coordinate axis.
fn level_point<T: Scalar>(mg: &MollifiedGauge<T>, block: usize, u: T) -> Result<DVector<T>> {
    let d = 2 * mg.n;
    let e = {
        let mut e = DVector::zeros(d);
        e[2 * block] = T::one();
        e
    };
    let mut lo = T::zero();
    let mut hi = T::one();
    while mg.value(&(&e * hi))? < u {
        hi *= T::of(2.0);
        if hi > T::of(1e6) {
            return Err(SymError::InvalidInput("level unreachable on block axis".into()));
        }
    }
    for _ in 0..80 {
        let mid = (lo + hi) * T::of(0.5);
        if mg.value(&(&e * mid))? < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(&e * ((lo + hi) * T::of(0.5)))
}

/// Per-level spectrum report for an ellipsoid body under the profile
/// Hamiltonian `H^s = chi^s(f_delta)`. For each level u in the grid and each
/// ellipsoid block, computes the orbit action, max CZ index, the per-block
/// 1-periodicity condition, and the regime window flag:
/// - kappa = 0: max_cz < -n must hold on u <= 1 - eps;
/// - kappa < 0: the corrected action must exceed max chi^0 on that region;
/// - kappa > 0 (requires 2 pi / a <= n / kappa and convex chi): corrected
///   action at most 2 pi / a plus the measured mollification deviation.
pub fn spec_window_report<T: Scalar>(
    body: &ConvexBodyModel<T>,
    profile: &ProfileChi<T>,
    kappa: T,
    delta: T,
    levels: &[T],
) -> Result<SpecReport<T>> {
    let radii = body
        .radii
        .clone()
        .ok_or_else(|| SymError::RegimeViolation("spec windows require an ellipsoid body".into()))?;
    let n = body.n;
    let cap = capacity_hat(body)?; // 2 pi / a
    let two_pi_over_a = cap.value;
    if kappa > T::zero() && two_pi_over_a > T::of(n as f64) / kappa {
        return Err(SymError::RegimeViolation(format!(
            "kappa > 0 requires 2 pi / a <= n / kappa (have {} > {})",
            two_pi_over_a.to_subset().unwrap_or(f64::NAN),
            (T::of(n as f64) / kappa).to_subset().unwrap_or(f64::NAN)
        )));
    }
    let mg = mollify(body, delta)?;
    let pr = profile.clone();
    let ham = profile_model(
        &mg,
        {
            let p = pr.clone();
            move |u| p.chi(u)
        },
        {
            let p = pr.clone();
            move |u| p.dchi(u)
        },
        {
            let p = pr.clone();
            move |u| p.ddchi(u)
        },
    )?;
    // Measured mollification deviation for the kappa > 0 slack.
    let dev = {
        let x = level_point(&mg, 0, T::of(0.5))?;
        let p = pr.clone();
        let p2 = pr.clone();
        let p3 = pr.clone();
        action_deviation(
            &mg,
            move |u| p.chi(u),
            move |u| p2.dchi(u),
            move |u| p3.ddchi(u),
            &x,
            2000,
        )?
    };
    let slack = dev * T::of(4.0) + T::of(1e-6);
    let max_h0 = profile.chi0(T::zero());
    let opts = MaslovOptions::default();
    let steps = 2000;
    let mut entries = Vec::new();
    let mut levels = levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &u in &levels {
        for block in 0..n {
            let x = level_point(&mg, block, u)?;
            let action = hamflow::action(&ham, &x, steps)?;
            let lin = hamflow::linearized_path(&ham, &x, steps)?;
            let idx = cz_index(&lin, &opts)?;
            let max_cz = idx.max_value;
            // Per-block resonance: angular speed 2 chi'(u) / r_i^2 must be a
            // multiple of 2 pi.
            let dchi_u = profile.dchi(mg.value(&x)?);
            let ratio = dchi_u / (T::of(PI) * radii[block] * radii[block]);
            let rf: f64 = ratio.to_subset().unwrap_or(f64::NAN);
            let periodic = (rf - rf.round()).abs() < 1e-6;
            let action_hat = if kappa != T::zero() {
                let shift = hamflow::floor_half_shift(n, max_cz);
                Some(action + T::of(shift as f64) / kappa)
            } else {
                None
            };
            let in_region = u <= T::one() - profile.eps;
            let inside_window = if kappa == T::zero() {
                !in_region || max_cz < HalfInt::from_int(-(n as i64))
            } else if kappa < T::zero() {
                !in_region || action_hat.unwrap() > max_h0
            } else {
                action_hat.unwrap() <= two_pi_over_a + slack
            };
            entries.push(SpecEntry {
                level: u,
                block,
                action,
                action_hat,
                max_cz,
                periodic,
                inside_window,
            });
        }
    }
    Ok(SpecReport {
        kappa,
        threshold: -(n as i64),
        entries,
    })
}

/// The kappa > 0 arithmetic inequality behind the window bound:
/// `y - (n / kappa) floor_strict(a y / 2 pi) <= 2 pi / a` for y > 0, under
/// the regime `2 pi / a <= n / kappa`. Returns the worst slack over the
/// sweep (nonnegative when the inequality holds everywhere).
pub fn kappa_pos_arithmetic(a: f64, n: usize, kappa: f64, ys: &[f64]) -> Result<f64> {
    let cap = 2.0 * PI / a;
    if cap > n as f64 / kappa {
        return Err(SymError::RegimeViolation(
            "need 2 pi / a <= n / kappa".into(),
        ));
    }
    let mut worst = f64::INFINITY;
    for &y in ys {
        if y <= 0.0 {
            continue;
        }
        let k = floor_strict(a * y / (2.0 * PI))?;
        let lhs = y - (n as f64 / kappa) * k as f64;
        worst = worst.min(cap - lhs);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Poisson-bracket lower bound
// ---------------------------------------------------------------------------

/// Which capacity feeds the bound (recorded for reporting only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PbRegime {
    /// kappa <= 0 or small: uses hat-C0.
    KappaNonposOrSmallC0,
    /// kappa > 0: uses hat-C.
    KappaPosC,
}

/// `pb >= 1 / (2 (d + 1)^2 cap)`.
pub fn pb_lower_bound(d: u32, cap: f64, _regime: PbRegime) -> Result<f64> {
    if cap <= 0.0 {
        return Err(SymError::InvalidInput("cap must be positive".into()));
    }
    Ok(1.0 / (2.0 * ((d + 1) as f64).powi(2) * cap))
}

/// Exact rational sidecar: for `cap = (p / q) pi`, the bound is
/// `q / (2 (d+1)^2 p pi)`; returns the reduced coefficient (num, den) of
/// `1 / pi`, i.e. the bound equals `num / (den pi)`.
pub fn pb_lower_bound_exact(d: u32, cap_pi_num: i64, cap_pi_den: i64) -> Result<(i64, i64)> {
    if cap_pi_num <= 0 || cap_pi_den <= 0 {
        return Err(SymError::InvalidInput("cap must be positive".into()));
    }
    let num = cap_pi_den;
    let den = 2 * (d as i64 + 1).pow(2) * cap_pi_num;
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}
