//! Linear toric models: loop indices at fixed points of a torus action,
//! the mixed action-index homomorphism, the special fiber, constancy of the
//! corrected action on rational directions, and the rotation-gap inequality.
//!
//! Everything here is weight arithmetic plus the closed-form rotation
//! indices; no curvature of the ambient manifold enters.
//!
//! Sign convention: the contribution of one weight line with signed
//! frequency `nu = m . w_i` to the loop index is exactly `-2 nu`. The
//! orientation between weights and moment data is locked by requiring the
//! standard projective-line model to put the special fiber at the midpoint
//! of the moment interval; with that choice the special fiber of the
//! standard projective-space model is the barycenter of the moment simplex.

use crate::czindex::floor_strict;
use crate::error::{Result, SymError};
use crate::scalar::Scalar;
use nalgebra::DVector;

/// One fixed point of the torus action: its moment image and the n integer
/// weight vectors of the linearized action on the tangent space.
#[derive(Clone, Debug)]
pub struct FixedPointDatum<T: Scalar> {
    pub p: DVector<T>,
    pub weights: Vec<Vec<i64>>,
}

/// A linear toric model: rank-k torus acting on a 2n-dimensional space with
/// monotone constant kappa > 0.
#[derive(Clone, Debug)]
pub struct TorusActionModel<T: Scalar> {
    pub k: usize,
    pub n: usize,
    pub kappa: T,
    pub fixed_points: Vec<FixedPointDatum<T>>,
    /// Recorded offset from the normalized moment map (zero when the model
    /// is normalized so the moment map integrates to zero).
    pub offset: DVector<T>,
}

impl<T: Scalar> TorusActionModel<T> {
    pub fn new(
        k: usize,
        n: usize,
        kappa: T,
        fixed_points: Vec<FixedPointDatum<T>>,
    ) -> Result<Self> {
        if kappa <= T::zero() {
            return Err(SymError::InvalidInput("kappa must be positive".into()));
        }
        if fixed_points.is_empty() {
            return Err(SymError::InvalidInput("need at least one fixed point".into()));
        }
        for fp in &fixed_points {
            if fp.p.len() != k || fp.weights.len() != n || fp.weights.iter().any(|w| w.len() != k)
            {
                return Err(SymError::InvalidInput(
                    "fixed-point data has wrong dimensions".into(),
                ));
            }
        }
        Ok(TorusActionModel {
            k,
            n,
            kappa,
            fixed_points,
            offset: DVector::zeros(k),
        })
    }

    /// Standard projective-line model: moment interval [0, ell], two fixed
    /// points with opposite weights, kappa = 2 / ell.
    pub fn cp1(ell: T) -> Result<Self> {
        Self::cpn(1, ell)
    }

    /// Standard projective-space model of complex dimension n: the moment
    /// polytope is the simplex with vertices 0, ell e_1, ..., ell e_n and
    /// kappa = (n + 1) / ell (the recorded normalization pair).
    pub fn cpn(n: usize, ell: T) -> Result<Self> {
        if ell <= T::zero() {
            return Err(SymError::InvalidInput("ell must be positive".into()));
        }
        let kappa = T::of((n + 1) as f64) / ell;
        let mut fps = Vec::with_capacity(n + 1);
        // Vertex at the origin: weights -e_i under the locked convention.
        let mut w0 = Vec::new();
        for i in 0..n {
            let mut w = vec![0_i64; n];
            w[i] = -1;
            w0.push(w);
        }
        fps.push(FixedPointDatum { p: DVector::zeros(n), weights: w0 });
        // Vertex ell e_j: weights e_j and e_j - e_i for i != j.
        for j in 0..n {
            let mut p = DVector::zeros(n);
            p[j] = ell;
            let mut ws = Vec::new();
            for i in 0..n {
                let mut w = vec![0_i64; n];
                w[j] = 1;
                if i != j {
                    w[i] = -1;
                }
                ws.push(w);
            }
            fps.push(FixedPointDatum { p, weights: ws });
        }
        Self::new(n, n, kappa, fps)
    }

    /// The same model with the moment map shifted by `offset` (recorded).
    pub fn shifted(&self, offset: &DVector<T>) -> Result<Self> {
        if offset.len() != self.k {
            return Err(SymError::InvalidInput("offset has wrong dimension".into()));
        }
        let mut m = self.clone();
        for fp in &mut m.fixed_points {
            fp.p += offset;
        }
        m.offset = &self.offset + offset;
        Ok(m)
    }
}

/// Loop index of the circle `t -> e^{t m}` at a torus-fixed point: the sum
/// over weight lines of `-2 (m . w_i)`. Always an even integer, exactly.
pub fn loop_cz_at_fixed_point<T: Scalar>(
    model: &TorusActionModel<T>,
    fp: usize,
    m: &[i64],
) -> Result<i64> {
    if fp >= model.fixed_points.len() {
        return Err(SymError::InvalidInput("fixed-point index out of range".into()));
    }
    if m.len() != model.k {
        return Err(SymError::InvalidInput("m has wrong rank".into()));
    }
    let mut total = 0_i64;
    for w in &model.fixed_points[fp].weights {
        let nu: i64 = m.iter().zip(w).map(|(a, b)| a * b).sum();
        total -= 2 * nu;
    }
    Ok(total)
}

/// Solve `p_star . m = p . m + (1 / 2 kappa) loop_cz(m)` for the basis
/// directions, independently at every fixed point; returns the common
/// solution and the worst cross-fixed-point residual (which is exactly the
/// well-definedness of the mixed homomorphism at model level).
pub fn special_fiber_point<T: Scalar>(
    model: &TorusActionModel<T>,
) -> Result<(DVector<T>, T)> {
    let mut candidates = Vec::with_capacity(model.fixed_points.len());
    for (j, fp) in model.fixed_points.iter().enumerate() {
        let mut p_star = fp.p.clone();
        for axis in 0..model.k {
            let mut m = vec![0_i64; model.k];
            m[axis] = 1;
            let cz = loop_cz_at_fixed_point(model, j, &m)?;
            p_star[axis] += T::of(cz as f64) / (T::of(2.0) * model.kappa);
        }
        candidates.push(p_star);
    }
    let mut residual = T::zero();
    for c in &candidates[1..] {
        residual = residual.max((c - &candidates[0]).amax());
    }
    if residual > T::of(1e-9) {
        return Err(SymError::InconsistentModel {
            residual: residual.to_subset().unwrap_or(f64::NAN),
        });
    }
    // Average the (numerically identical) candidates.
    let mut mean = DVector::zeros(model.k);
    for c in &candidates {
        mean += c;
    }
    mean /= T::of(candidates.len() as f64);
    Ok((mean, residual))
}

/// Corrected action of the linear Hamiltonian `f = c + (m / N) . mu` at the
/// fixed point with moment image `p_x`:
/// `tilde-A = f(p_x) + (1 / 2 kappa)(2 n + (1 / N) loop_cz(m))`.
/// Must be independent of the fixed point (it equals `f(p_star) + n/kappa`).
pub fn tilde_action<T: Scalar>(
    model: &TorusActionModel<T>,
    c: T,
    m: &[i64],
    n_div: i64,
    p_x: &DVector<T>,
) -> Result<T> {
    if n_div < 1 {
        return Err(SymError::InvalidInput("N must be >= 1".into()));
    }
    let fp = model
        .fixed_points
        .iter()
        .position(|fp| (&fp.p - p_x).amax() <= T::of(1e-12))
        .ok_or(SymError::NotFixed)?;
    let cz = loop_cz_at_fixed_point(model, fp, m)?;
    let mut f = c;
    for axis in 0..model.k {
        f += T::of(m[axis] as f64) / T::of(n_div as f64) * p_x[axis];
    }
    let n = model.n as f64;
    Ok(f
        + (T::of(2.0 * n) + T::of(cz as f64) / T::of(n_div as f64))
            / (T::of(2.0) * model.kappa))
}

/// The rotation-gap inequality: compare the closed-form
/// `max_cz(e^{-2 pi y J0 t}) = -1 - 2 [y]^<` against
/// `-2 m / N + 1 + 2 |y - m / N|`. Returns (lhs, rhs, holds).
pub fn rotation_lemma_gap(y: f64, m: i64, n_div: i64) -> Result<(f64, f64, bool)> {
    if n_div < 1 {
        return Err(SymError::InvalidInput("N must be >= 1".into()));
    }
    let lhs = (-1 - 2 * floor_strict(y)?) as f64;
    let q = m as f64 / n_div as f64;
    let rhs = -2.0 * q + 1.0 + 2.0 * (y - q).abs();
    Ok((lhs, rhs, lhs <= rhs + 1e-12))
}
