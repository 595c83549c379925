//! Maslov index of a Lagrangian path relative to a fixed Lagrangian, via
//! regular crossings and crossing forms.
//!
//! A crossing is a time where the path meets the train of the reference
//! Lagrangian; there the crossing form is the Gram matrix `Z^T Omega Z'`
//! restricted to the intersection. The index sums crossing-form signatures
//! with weight 1 at interior crossings and 1/2 at endpoints.

use crate::error::{Result, SymError};
use crate::half::HalfInt;
use crate::scalar::Scalar;
use crate::symcore::{
    default_zero_tol, signature, stack_frames, LagrangianFrame, LagrangianPath, QuadraticForm,
    Signature, SymplecticForm,
};
use nalgebra::DMatrix;

/// One crossing of the path with the train of the reference Lagrangian.
#[derive(Clone, Debug)]
pub struct CrossingReport<T: Scalar> {
    /// Crossing time in [0, 1].
    pub t: T,
    pub endpoint: bool,
    pub kernel_dim: usize,
    /// Orthonormal basis of the intersection, as ambient column vectors.
    pub kernel: DMatrix<T>,
    /// Crossing form in the kernel basis.
    pub gram: DMatrix<T>,
    pub signature: Signature,
    /// Contribution to the index: sign (halved at endpoints).
    pub contribution: HalfInt,
}

impl<T: Scalar> CrossingReport<T> {
    pub fn is_regular(&self) -> bool {
        self.signature.is_nondegenerate()
    }
}

/// Full output of a Maslov index computation.
#[derive(Clone, Debug)]
pub struct MaslovResult<T: Scalar> {
    pub index: HalfInt,
    pub crossings: Vec<CrossingReport<T>>,
    /// The epsilon of the interior regularizing rotation, if one was needed.
    pub perturbation_used: Option<T>,
}

/// Tunables for crossing detection and regularization.
#[derive(Clone, Debug)]
pub struct MaslovOptions<T: Scalar> {
    /// Sample count for the initial scan.
    pub grid: usize,
    /// A refined minimum of the (orthonormalized) smallest singular value
    /// below this flags a crossing.
    pub crossing_tol: T,
    /// Crossings closer than this are merged.
    pub merge_tol: T,
    /// Signature zero threshold; `None` uses `1e-7 * max(1, ||G||)`.
    pub zero_tol: Option<T>,
    /// Regularize irregular interior crossings by a small compactly
    /// supported rotation instead of failing.
    pub auto_perturb: bool,
}

impl<T: Scalar> Default for MaslovOptions<T> {
    fn default() -> Self {
        MaslovOptions {
            grid: 512,
            crossing_tol: T::of(1e-8),
            merge_tol: T::of(1e-10),
            zero_tol: None,
            auto_perturb: true,
        }
    }
}

/// Distance-like crossing indicator: smallest singular value of the stacked
/// orthonormalized frames of `alpha(t)` and `L0`. Zero iff the subspaces
/// intersect; scaled so that thresholds are dimensionless.
fn crossing_gap<T: Scalar>(z: &DMatrix<T>, q0: &DMatrix<T>) -> T {
    let qz = orthonormalize(z);
    let m = stack_frames(&qz, q0);
    let svd = m.svd(false, false);
    svd.singular_values.iter().fold(T::of(f64::MAX), |a, b| a.min(*b))
}

fn orthonormalize<T: Scalar>(z: &DMatrix<T>) -> DMatrix<T> {
    let qr = z.clone().qr();
    qr.q()
}

/// Locates all crossings of `alpha` with the train of `l0` and evaluates
/// their crossing forms. Identically degenerate sub-arcs are an error.
pub fn find_crossings<T: Scalar>(
    alpha: &LagrangianPath<T>,
    l0: &LagrangianFrame<T>,
    form: &SymplecticForm<T>,
    opts: &MaslovOptions<T>,
) -> Result<Vec<CrossingReport<T>>> {
    if alpha.ambient_dim() != l0.ambient_dim() {
        return Err(SymError::InvalidInput("path and reference dimensions differ".into()));
    }
    let grid = opts.grid.max(16);
    let q0 = orthonormalize(l0.matrix());
    let gap_at = |t: T| crossing_gap(&alpha.frame(t), &q0);

    let mut gaps = Vec::with_capacity(grid + 1);
    for k in 0..=grid {
        gaps.push(gap_at(T::of(k as f64 / grid as f64)));
    }

    // A stretch of grid-adjacent essentially-zero gaps is an identically
    // degenerate sub-arc. An isolated crossing, even tangential to a few
    // orders, pushes the gap back above this threshold one grid node away;
    // only genuine arcs keep it pinned across several nodes.
    let arc_tol = T::of(1e-9);
    let mut run_start: Option<usize> = None;
    for k in 0..=grid {
        if gaps[k] < arc_tol {
            if run_start.is_none() {
                run_start = Some(k);
            }
        } else if let Some(s) = run_start.take() {
            if k - s >= 3 {
                return Err(SymError::DegenerateArc {
                    start: s as f64 / grid as f64,
                    end: (k - 1) as f64 / grid as f64,
                });
            }
        }
    }
    if let Some(s) = run_start {
        if grid + 1 - s >= 3 {
            return Err(SymError::DegenerateArc { start: s as f64 / grid as f64, end: 1.0 });
        }
    }

    // Candidate times: both endpoints, plus every interior local minimum of
    // the sampled gap, refined by golden-section search.
    let mut times: Vec<T> = vec![T::zero(), T::one()];
    for k in 1..grid {
        if gaps[k] <= gaps[k - 1] && gaps[k] <= gaps[k + 1] {
            let a = T::of((k - 1) as f64 / grid as f64);
            let b = T::of((k + 1) as f64 / grid as f64);
            let t = golden_min(&gap_at, a, b, T::of(1e-13));
            if gap_at(t) < opts.crossing_tol {
                times.push(t);
            }
        }
    }
    // Crossings hiding between the last grid node and an endpoint (e.g.
    // pushed just inside by a regularizing rotation) have their minimum at
    // the boundary node; refine those brackets too.
    if gaps[0] <= gaps[1] {
        let t = golden_min(&gap_at, T::zero(), T::of(1.0 / grid as f64), T::of(1e-13));
        if gap_at(t) < opts.crossing_tol {
            times.push(t);
        }
    }
    if gaps[grid] <= gaps[grid - 1] {
        let t = golden_min(&gap_at, T::of(1.0 - 1.0 / grid as f64), T::one(), T::of(1e-13));
        if gap_at(t) < opts.crossing_tol {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Merge near-coincident detections; clamp near-endpoint hits onto the
    // endpoint so they get the 1/2 weight.
    let endpoint_snap = T::of(1e-9);
    let mut merged: Vec<T> = Vec::new();
    for t in times {
        let t = if t < endpoint_snap {
            T::zero()
        } else if t > T::one() - endpoint_snap {
            T::one()
        } else {
            t
        };
        match merged.last() {
            Some(last) if t - *last < opts.merge_tol => {}
            _ => merged.push(t),
        }
    }

    let mut out = Vec::new();
    for t in merged {
        let endpoint = t == T::zero() || t == T::one();
        if let Some(report) = crossing_report_at(alpha, &q0, form, t, endpoint, opts)? {
            out.push(report);
        }
    }
    Ok(out)
}

/// Builds the crossing report at a single time; `None` if the intersection
/// there is trivial (candidate rejected).
fn crossing_report_at<T: Scalar>(
    alpha: &LagrangianPath<T>,
    q0: &DMatrix<T>,
    form: &SymplecticForm<T>,
    t: T,
    endpoint: bool,
    opts: &MaslovOptions<T>,
) -> Result<Option<CrossingReport<T>>> {
    let z = alpha.frame(t);
    let qz = orthonormalize(&z);
    let stacked = stack_frames(&qz, q0);
    let svd = stacked.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let kernel_tol = opts.crossing_tol.max(T::of(1e-8));
    let mut kernel_cols: Vec<nalgebra::DVector<T>> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= kernel_tol {
            // Right null vector (a; b): Qz a = -Q0 b lies in the intersection.
            let row = v_t.row(i).transpose();
            let a = row.rows(0, qz.ncols()).into_owned();
            kernel_cols.push(&qz * a);
        }
    }
    if kernel_cols.is_empty() {
        return Ok(None);
    }
    let mut raw = DMatrix::zeros(alpha.ambient_dim(), kernel_cols.len());
    for (i, c) in kernel_cols.iter().enumerate() {
        raw.set_column(i, c);
    }
    let kernel = orthonormalize(&raw);
    let kernel_dim = kernel.ncols();

    // Crossing form B = Z^T Omega Z' in frame coordinates, pulled back to the
    // kernel basis through the frame coefficients of each kernel vector.
    let zdot = alpha.frame_deriv(t);
    let b = z.transpose() * form.matrix() * &zdot;
    let b = (&b + b.transpose()) * T::of(0.5);
    let zsvd = z.clone().svd(true, true);
    let coeffs = zsvd
        .solve(&kernel, T::of(1e-12))
        .map_err(|e| SymError::InvalidInput(format!("kernel lift failed: {e}")))?;
    let gram = coeffs.transpose() * b * &coeffs;
    let gram = (&gram + gram.transpose()) * T::of(0.5);
    let zero_tol = opts.zero_tol.unwrap_or_else(|| default_zero_tol(&gram));
    let q = QuadraticForm { basis: kernel.clone(), gram: gram.clone() };
    let sig = signature(&q, zero_tol)?;
    let sign = sig.sign();
    let contribution = if endpoint { HalfInt::half_of(sign) } else { HalfInt::from_int(sign) };
    Ok(Some(CrossingReport {
        t,
        endpoint,
        kernel_dim,
        kernel,
        gram,
        signature: sig,
        contribution,
    }))
}

fn golden_min<T: Scalar>(f: &impl Fn(T) -> T, mut a: T, mut b: T, width: T) -> T {
    let phi = T::of(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * phi;
    let mut d = a + (b - a) * phi;
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > width {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * phi;
            fd = f(d);
        }
    }
    (a + b) * T::of(0.5)
}

/// Maslov index of `alpha` relative to `l0`: half the signature at endpoint
/// crossings plus full signatures at interior crossings.
///
/// Irregular interior crossings are regularized (when `auto_perturb` is on)
/// by composing with `e^{eps tau(t) J}` for a profile `tau` vanishing at both
/// endpoints, so the endpoints — which the definition keeps fixed — are
/// untouched. Irregular *endpoint* crossings are never perturbed and
/// surface as `IrregularEndpoint`.
pub fn maslov_index<T: Scalar>(
    alpha: &LagrangianPath<T>,
    l0: &LagrangianFrame<T>,
    form: &SymplecticForm<T>,
    opts: &MaslovOptions<T>,
) -> Result<MaslovResult<T>> {
    let crossings = find_crossings(alpha, l0, form, opts)?;
    check_endpoints_regular(&crossings)?;

    let first_irregular = crossings.iter().find(|c| !c.endpoint && !c.is_regular());
    if first_irregular.is_none() {
        let index = crossings.iter().fold(HalfInt::ZERO, |acc, c| acc + c.contribution);
        return Ok(MaslovResult { index, crossings, perturbation_used: None });
    }

    if !opts.auto_perturb {
        let c = first_irregular.unwrap();
        return Err(SymError::IrregularCrossing {
            t: c.t.to_subset().unwrap_or(f64::NAN),
            null_dim: c.signature.p_zero,
        });
    }

    // Smallest of 1e-6 and half the gap from any irregular crossing to its
    // nearest neighbour (treating 0 and 1 as crossings of last resort).
    let mut eps = T::of(1e-6);
    for c in crossings.iter().filter(|c| !c.endpoint && !c.is_regular()) {
        let mut nearest = c.t.min(T::one() - c.t);
        for other in &crossings {
            let d = (other.t - c.t).abs();
            if d > opts.merge_tol {
                nearest = nearest.min(d);
            }
        }
        eps = eps.min(nearest * T::of(0.5));
    }

    // Two deterministic bump profiles; the second covers an irregular
    // crossing sitting exactly at the first profile's stationary point.
    let profiles: [(fn(T) -> T, fn(T) -> T); 2] = [
        (|t| T::of(4.0) * t * (T::one() - t), |t| T::of(4.0) - T::of(8.0) * t),
        (
            |t| T::of(6.75) * t * t * (T::one() - t),
            |t| T::of(6.75) * (T::of(2.0) * t - T::of(3.0) * t * t),
        ),
    ];
    for (tau, dtau) in profiles {
        let perturbed = rotate_by_bump(alpha, form, eps, tau, dtau);
        let crossings = find_crossings(&perturbed, l0, form, opts)?;
        check_endpoints_regular(&crossings)?;
        if crossings.iter().all(|c| c.endpoint || c.is_regular()) {
            let index = crossings.iter().fold(HalfInt::ZERO, |acc, c| acc + c.contribution);
            return Ok(MaslovResult { index, crossings, perturbation_used: Some(eps) });
        }
    }
    let c = first_irregular.unwrap();
    Err(SymError::IrregularCrossing {
        t: c.t.to_subset().unwrap_or(f64::NAN),
        null_dim: c.signature.p_zero,
    })
}

fn check_endpoints_regular<T: Scalar>(crossings: &[CrossingReport<T>]) -> Result<()> {
    for c in crossings {
        if c.endpoint && !c.is_regular() {
            return Err(SymError::IrregularEndpoint { t: c.t.to_subset().unwrap_or(f64::NAN) });
        }
    }
    Ok(())
}

/// `t -> e^{eps tau(t) J} alpha(t)` for a scalar profile with
/// tau(0) = tau(1) = 0: an interior perturbation with fixed endpoints.
fn rotate_by_bump<T: Scalar>(
    alpha: &LagrangianPath<T>,
    form: &SymplecticForm<T>,
    eps: T,
    tau: fn(T) -> T,
    dtau: fn(T) -> T,
) -> LagrangianPath<T> {
    let j = form.complex_structure();
    let j2 = j.clone();
    let a = alpha.clone();
    let a2 = alpha.clone();
    LagrangianPath::new_with_deriv(
        alpha.ambient_dim(),
        alpha.rank(),
        move |t: T| (j.clone() * (eps * tau(t))).exp() * a.frame(t),
        move |t: T| {
            let rot = (j2.clone() * (eps * tau(t))).exp();
            &j2 * &rot * a2.frame(t) * (eps * dtau(t)) + rot * a2.frame_deriv(t)
        },
    )
}

/// Independent cross-check of the Maslov index through the unitary reduction
/// of the Lagrangian Grassmannian, for `f64` paths whose endpoints avoid the
/// train of the reference.
///
/// A Lagrangian frame, read as a complex `n x n` matrix column by column
/// (interleaved coordinates `x + iy`), determines the symmetric unitary
/// `S = V conj(V)^{-1}` after rotating the reference onto the real subspace;
/// `det S` winds around the circle, and the winding plus an endpoint
/// eigenphase correction reproduces the crossing-form count. None of the
/// crossing machinery above is used here.
pub mod oracle {
    use super::*;
    use nalgebra::{Complex, DMatrix as DM};

    type CMat = DM<Complex<f64>>;

    fn complexify(z: &DMatrix<f64>) -> CMat {
        let n = z.nrows() / 2;
        CMat::from_fn(n, z.ncols(), |k, j| Complex::new(z[(2 * k, j)], z[(2 * k + 1, j)]))
    }

    fn arg_det(m: &CMat) -> f64 {
        m.determinant().arg()
    }

    /// Eigenphases of the symmetric unitary `S` in [0, 2 pi).
    fn eigenphases(v: &CMat) -> Result<Vec<f64>> {
        let vbar = v.map(|c| c.conj());
        let s = v * vbar
            .lu()
            .try_inverse()
            .ok_or_else(|| SymError::InvalidInput("degenerate frame in oracle".into()))?;
        let schur = s.schur();
        let eig = schur
            .eigenvalues()
            .ok_or_else(|| SymError::InvalidInput("oracle eigenphase extraction failed".into()))?;
        Ok(eig
            .iter()
            .map(|l| {
                let phi = l.arg();
                if phi < 0.0 {
                    phi + std::f64::consts::TAU
                } else {
                    phi
                }
            })
            .collect())
    }

    /// Maslov index of the path by the det-squared winding. Errors if an
    /// endpoint lies on the train (the winding formula needs a gap there) or
    /// if the result does not settle on a half-integer.
    pub fn maslov_winding(
        alpha: &LagrangianPath<f64>,
        l0: &LagrangianFrame<f64>,
        grid: usize,
    ) -> Result<HalfInt> {
        let w0 = complexify(&super::orthonormalize(l0.matrix()));
        let w0_star = w0.map(|c| c.conj()).transpose();
        let v_at = |t: f64| &w0_star * complexify(&alpha.frame(t));

        let tau = std::f64::consts::TAU;
        // Continuous lift of arg det V, refined until steps are small.
        let mut grid = grid.max(64);
        let mut total;
        loop {
            let mut prev = arg_det(&v_at(0.0));
            total = 0.0;
            let mut worst: f64 = 0.0;
            for k in 1..=grid {
                let a = arg_det(&v_at(k as f64 / grid as f64));
                let mut d = a - prev;
                while d > std::f64::consts::PI {
                    d -= tau;
                }
                while d < -std::f64::consts::PI {
                    d += tau;
                }
                worst = worst.max(d.abs());
                total += d;
                prev = a;
            }
            if worst < 0.5 || grid >= 1 << 16 {
                break;
            }
            grid *= 2;
        }
        // Winding of det S = (det V)^2 / |det V|^2.
        let winding = 2.0 * total / tau;

        let ph0 = eigenphases(&v_at(0.0))?;
        let ph1 = eigenphases(&v_at(1.0))?;
        let edge = 1e-7;
        for phi in ph0.iter().chain(ph1.iter()) {
            if *phi < edge || tau - *phi < edge {
                return Err(SymError::InvalidInput(
                    "oracle endpoints must avoid the train of the reference".into(),
                ));
            }
        }
        let correction = (ph0.iter().sum::<f64>() - ph1.iter().sum::<f64>()) / tau;
        let mu = winding + correction;
        let twice = (2.0 * mu).round();
        if (2.0 * mu - twice).abs() > 0.02 {
            return Err(SymError::InvalidInput(format!(
                "oracle value {mu} is not close to a half-integer"
            )));
        }
        Ok(HalfInt::from_twice(twice as i64))
    }
}
