//! Conley-Zehnder index of symplectic paths via the graph construction:
//! the index is the Maslov index of `t -> {(v, Phi(t) v)}` relative to the
//! diagonal in the doubled space carrying `(-omega) (+) omega`.
//!
//! Sign conventions are locked by two calibration tests, not by prose:
//! `cz(const Id) = 0` and `cz(e^{-pi J0 t}) = -1` (n = 1). Any convention
//! change must re-pass both.

use crate::error::{Result, SymError};
use crate::half::HalfInt;
use crate::maslov::{maslov_index, CrossingReport, MaslovOptions};
use crate::scalar::Scalar;
use crate::symcore::{
    integrate_fundamental, LagrangianFrame, LagrangianPath, SymmetricPath, SymplecticForm,
    SymplecticPath,
};
use nalgebra::DMatrix;

/// Output of a Conley-Zehnder computation.
#[derive(Clone, Debug)]
pub struct IndexResult<T: Scalar> {
    /// CZ-ind of the path.
    pub value: HalfInt,
    /// dim Ker(Phi(1) - Id).
    pub kernel_dim: usize,
    /// max CZ-ind = value + kernel_dim / 2.
    pub max_value: HalfInt,
    /// Crossings of the graph path with the diagonal (doubled space).
    pub crossings: Vec<CrossingReport<T>>,
    /// Interior regularization used by the Maslov layer, if any.
    pub perturbation_used: Option<T>,
}

/// Conley-Zehnder index of a path in Sp(2n) starting at the identity.
///
/// The constant identity path is the normalization point: its graph lies on
/// the train of the diagonal for all t (a degenerate arc for the crossing
/// machinery), and its index is 0 by definition.
pub fn cz_index<T: Scalar>(
    phi: &SymplecticPath<T>,
    opts: &MaslovOptions<T>,
) -> Result<IndexResult<T>> {
    let dim = phi.dim();
    let n = dim / 2;
    let id = DMatrix::<T>::identity(dim, dim);
    let id_defect = (phi.at(T::zero()) - &id).amax();
    if id_defect > T::of(1e-9) {
        return Err(SymError::InvalidInput(format!(
            "path must start at the identity (defect {:?})",
            id_defect
        )));
    }
    if is_constant_identity(phi) {
        return Ok(IndexResult {
            value: HalfInt::ZERO,
            kernel_dim: dim,
            max_value: HalfInt::from_int(n as i64),
            crossings: Vec::new(),
            perturbation_used: None,
        });
    }
    let dform = SymplecticForm::<T>::doubled(n);
    let graph = phi.graph_path();
    let delta = LagrangianFrame::diagonal(n);
    let res = maslov_index(&graph, &delta, &dform, opts)?;
    let kernel_dim = endpoint_kernel_dim(phi);
    Ok(IndexResult {
        value: res.index,
        kernel_dim,
        max_value: res.index + HalfInt::half_of(kernel_dim as i64),
        crossings: res.crossings,
        perturbation_used: res.perturbation_used,
    })
}

fn is_constant_identity<T: Scalar>(phi: &SymplecticPath<T>) -> bool {
    let dim = phi.dim();
    let id = DMatrix::<T>::identity(dim, dim);
    for k in 0..=8 {
        let t = T::of(k as f64 / 8.0);
        if (phi.at(t) - &id).amax() > T::of(1e-12) {
            return false;
        }
    }
    true
}

/// dim Ker(Phi(1) - Id) with a scale-aware tolerance.
pub fn endpoint_kernel_dim<T: Scalar>(phi: &SymplecticPath<T>) -> usize {
    let end = phi.endpoint();
    let tol = T::of(1e-7) * T::one().max(end.amax());
    phi.endpoint_kernel_dim(tol)
}

/// max CZ-ind by both of its characterizations: the kernel formula
/// `cz + dim Ker(Phi(1) - Id) / 2` and the index of the positively rotated
/// path `e^{eps J0 t} Phi(t)`. The rotated route is evaluated at `eps` and
/// `eps/2`; instability or disagreement with the formula is an error.
pub fn max_cz_index<T: Scalar>(
    phi: &SymplecticPath<T>,
    eps: T,
    opts: &MaslovOptions<T>,
) -> Result<HalfInt> {
    if eps <= T::zero() {
        return Err(SymError::InvalidInput("eps must be positive".into()));
    }
    let base = cz_index(phi, opts)?;
    let formula = base.max_value;
    let form = SymplecticForm::<T>::standard(phi.dim() / 2);
    let at = |e: T| -> Result<HalfInt> {
        let rotated = phi.premultiply_rotation(e, &form);
        Ok(cz_index(&rotated, opts)?.value)
    };
    let v_eps = at(eps)?;
    let v_half = at(eps * T::of(0.5))?;
    if v_eps != v_half {
        return Err(SymError::EpsilonUnstable {
            eps: eps.to_subset().unwrap_or(f64::NAN),
            at_eps: v_eps.to_string(),
            at_half: v_half.to_string(),
        });
    }
    if v_eps != formula {
        return Err(SymError::MaxCzMismatch {
            formula: formula.to_string(),
            perturbed: v_eps.to_string(),
        });
    }
    Ok(v_eps)
}

/// Default regularizing rotation angle for [`max_cz_index`].
pub fn default_eps<T: Scalar>() -> T {
    T::of(1e-4)
}

/// Block rotation path `(+)_k e^{-2 pi y_k J0 t}`.
pub fn rotation_path<T: Scalar>(freqs: &[T]) -> SymplecticPath<T> {
    SymplecticPath::rotation(freqs)
}

/// Largest integer strictly less than `x`. Exact integers step down by one;
/// values merely *near* an integer (within `1e-12`) are refused, because the
/// answer would be decided by noise.
pub fn floor_strict(x: f64) -> Result<i64> {
    let r = x.round();
    if (x - r).abs() <= 1e-12 {
        if x == r {
            return Ok(r as i64 - 1);
        }
        return Err(SymError::AmbiguousFloor { value: x, tol: 1e-12 });
    }
    Ok(x.floor() as i64)
}

/// Comparison bound for `S(t) <= -C Id`: `max CZ-ind <= -n - 2n [C/2pi]^<`.
pub fn bound_negative_definite(c: f64, n: usize) -> Result<i64> {
    let k = floor_strict(c / std::f64::consts::TAU)?;
    Ok(-(n as i64) - 2 * n as i64 * k)
}

/// Comparison bound for domination on a complex subspace V:
/// `max CZ-ind <= -n - 2 dim_C V [C/2pi]^<`.
pub fn bound_block(c: f64, dim_v: usize, n: usize) -> Result<i64> {
    let k = floor_strict(c / std::f64::consts::TAU)?;
    Ok(-(n as i64) - 2 * dim_v as i64 * k)
}

/// Maslov index of the endpoint path `s -> graph(Phi^s(1))` relative to the
/// diagonal — the finite-dimensional reduction of the spectral flow of a
/// homotopy of generators. Equals `cz(Phi^1) - cz(Phi^0)`.
///
/// The s-grid is refined until the (integer-valued) index agrees across two
/// consecutive refinement levels.
pub fn spectral_flow_endpoint_path<T: Scalar>(
    homotopy: impl Fn(T) -> SymmetricPath<T> + Send + Sync + 'static,
    dim: usize,
    samples: usize,
    steps: usize,
) -> Result<HalfInt> {
    let n = dim / 2;
    let dform = SymplecticForm::<T>::doubled(n);
    let delta = LagrangianFrame::diagonal(n);
    let endpoint = move |s: T| -> DMatrix<T> {
        let path = integrate_fundamental(&homotopy(s), steps).expect("homotopy integration");
        path.endpoint()
    };
    let path = LagrangianPath::new(2 * dim, dim, move |s: T| {
        let phi = endpoint(s);
        let mut z = DMatrix::zeros(2 * dim, dim);
        z.view_mut((0, 0), (dim, dim)).copy_from(&DMatrix::identity(dim, dim));
        z.view_mut((dim, 0), (dim, dim)).copy_from(&phi);
        z
    });
    let mut grid = samples.max(64);
    let mut prev: Option<HalfInt> = None;
    for _ in 0..4 {
        let mut opts = MaslovOptions::<T>::default();
        opts.grid = grid;
        let mu = maslov_index(&path, &delta, &dform, &opts)?.index;
        if prev == Some(mu) {
            return Ok(mu);
        }
        prev = Some(mu);
        grid *= 2;
    }
    Err(SymError::InvalidInput(
        "spectral-flow endpoint index did not stabilize under grid refinement".into(),
    ))
}
