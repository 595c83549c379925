//! Dense linear algebra for the standard symplectic vector space: forms,
//! symplecticity checks, Lagrangian frames, graph constructions, signatures,
//! and fundamental solutions of linear Hamiltonian systems.
//!
//! Conventions (locked by the calibration tests in `czindex`): coordinates
//! are interleaved `(x_1, y_1, ..., x_n, y_n)`; the complex structure J0 is
//! block diagonal with 2x2 blocks `[[0, -1], [1, 0]]` (so `e^{J0 theta}` is
//! the counterclockwise rotation); the form is `omega(u, v) = <J0 u, v>`,
//! whose matrix is `-J0`. Crossing forms are Gram matrices `Z^T Omega Z'`
//! of the frame against its time derivative, restricted to the intersection
//! with the reference Lagrangian.

use crate::error::{Result, SymError};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub const TOL_SYM: f64 = 1e-9;
pub const TOL_LAG: f64 = 1e-9;
pub const TOL_SP: f64 = 1e-7;
pub const TOL_ID: f64 = 1e-9;

type MatFn<T> = Arc<dyn Fn(T) -> DMatrix<T> + Send + Sync>;

/// A constant-coefficient symplectic form `omega(u, v) = u^T Omega v` with
/// `Omega^2 = -Id`. The matrix `-Omega` is then a compatible complex
/// structure (`omega(v, Jv) = |v|^2`), used for the regularizing rotations.
#[derive(Clone)]
pub struct SymplecticForm<T: Scalar> {
    j: DMatrix<T>,
}

impl<T: Scalar> SymplecticForm<T> {
    /// Standard form on R^{2n} in interleaved coordinates:
    /// `omega(e_x, e_y) = 1` per factor.
    pub fn standard(n: usize) -> Self {
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(2 * k, 2 * k + 1)] = T::one();
            j[(2 * k + 1, 2 * k)] = -T::one();
        }
        SymplecticForm { j }
    }

    /// Form `(-omega) (+) omega` on the doubled space R^{2n} x R^{2n}, in
    /// which graphs `{(v, Phi v)}` of symplectic maps are Lagrangian.
    pub fn doubled(n: usize) -> Self {
        let dim = 2 * n;
        let std = Self::standard(n);
        let mut j = DMatrix::zeros(2 * dim, 2 * dim);
        let neg = -&std.j;
        j.view_mut((0, 0), (dim, dim)).copy_from(&neg);
        j.view_mut((dim, dim), (dim, dim)).copy_from(&std.j);
        SymplecticForm { j }
    }

    pub fn from_matrix(j: DMatrix<T>) -> Result<Self> {
        let dim = j.nrows();
        if j.ncols() != dim || dim == 0 || dim % 2 != 0 {
            return Err(SymError::InvalidInput("form matrix must be square of even size".into()));
        }
        let jj = &j * &j;
        let defect = (&jj + DMatrix::<T>::identity(dim, dim)).amax();
        if defect > T::of(TOL_SYM) {
            return Err(SymError::InvalidInput("J^2 != -Id".into()));
        }
        Ok(SymplecticForm { j })
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.j
    }

    /// The compatible complex structure `J = -Omega`, satisfying
    /// `omega(u, v) = <J u, v>` and `omega(v, J v) > 0`.
    pub fn complex_structure(&self) -> DMatrix<T> {
        -&self.j
    }

    pub fn omega(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        (u.transpose() * &self.j * v)[(0, 0)]
    }

    /// max-norm defect of `phi^T J phi - J`.
    pub fn symplecticity_defect(&self, phi: &DMatrix<T>) -> T {
        (phi.transpose() * &self.j * phi - &self.j).amax()
    }

    pub fn check_symplectic(&self, phi: &DMatrix<T>, tol: f64) -> Result<()> {
        let defect = self.symplecticity_defect(phi);
        if defect > T::of(tol) {
            Err(SymError::NotSymplectic { defect: defect.to_subset().unwrap_or(f64::NAN) })
        } else {
            Ok(())
        }
    }

    /// `e^{theta J}` for the compatible complex structure; the positive
    /// rotation used for index regularization.
    pub fn rotation(&self, theta: T) -> DMatrix<T> {
        (self.complex_structure() * theta).exp()
    }
}

/// Exact-dimension context for the standard structure on R^{2n}.
#[derive(Clone)]
pub struct SymplecticContext<T: Scalar> {
    pub n: usize,
    form: SymplecticForm<T>,
    j0: DMatrix<T>,
}

impl<T: Scalar> SymplecticContext<T> {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "half-dimension must be positive");
        let form = SymplecticForm::standard(n);
        let j0 = form.complex_structure();
        SymplecticContext { n, form, j0 }
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// The standard complex structure J0, the coefficient in `x' = J0 S(t) x`.
    pub fn j0(&self) -> &DMatrix<T> {
        &self.j0
    }

    pub fn form(&self) -> &SymplecticForm<T> {
        &self.form
    }

    pub fn omega(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        self.form.omega(u, v)
    }
}

/// A quadratic form on a subspace: a spanning set of basis vectors (columns)
/// together with the symmetric Gram matrix in that basis.
#[derive(Clone, Debug)]
pub struct QuadraticForm<T: Scalar> {
    pub basis: DMatrix<T>,
    pub gram: DMatrix<T>,
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(basis: DMatrix<T>, gram: DMatrix<T>) -> Result<Self> {
        let asym = (&gram - gram.transpose()).amax();
        let scale = T::one().max(gram.amax());
        if asym > T::of(TOL_SYM) * scale {
            return Err(SymError::InvalidInput(format!(
                "Gram matrix not symmetric (defect {:?})",
                asym
            )));
        }
        let gram = (&gram + gram.transpose()) * T::of(0.5);
        Ok(QuadraticForm { basis, gram })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }
}

/// Eigenvalue counts of a symmetric form: `(p_plus, p_zero, p_minus)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub p_plus: usize,
    pub p_zero: usize,
    pub p_minus: usize,
}

impl Signature {
    /// sign = p+ - p-
    pub fn sign(&self) -> i64 {
        self.p_plus as i64 - self.p_minus as i64
    }

    /// s~ign = p+ + p0 - p-
    pub fn sign_tilde(&self) -> i64 {
        self.p_plus as i64 + self.p_zero as i64 - self.p_minus as i64
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.p_zero == 0
    }
}

/// Inertia of a quadratic form: eigenvalues above `zero_tol`, within
/// `[-zero_tol, zero_tol]`, and below `-zero_tol`.
pub fn signature<T: Scalar>(q: &QuadraticForm<T>, zero_tol: T) -> Result<Signature> {
    if q.gram.iter().any(|x| !x.is_finite()) {
        return Err(SymError::InvalidInput("non-finite entries in Gram matrix".into()));
    }
    if zero_tol < T::zero() {
        return Err(SymError::InvalidInput("zero_tol must be nonnegative".into()));
    }
    let eig = q.gram.clone().symmetric_eigen();
    let mut sig = Signature { p_plus: 0, p_zero: 0, p_minus: 0 };
    for ev in eig.eigenvalues.iter() {
        if *ev > zero_tol {
            sig.p_plus += 1;
        } else if *ev < -zero_tol {
            sig.p_minus += 1;
        } else {
            sig.p_zero += 1;
        }
    }
    Ok(sig)
}

/// Default signature tolerance: `1e-7 * max(1, ||G||)`.
pub fn default_zero_tol<T: Scalar>(gram: &DMatrix<T>) -> T {
    T::of(1e-7) * T::one().max(gram.amax())
}

/// A frame of a Lagrangian subspace: a full-column-rank matrix whose column
/// span is isotropic of half dimension.
#[derive(Clone, Debug)]
pub struct LagrangianFrame<T: Scalar> {
    z: DMatrix<T>,
}

impl<T: Scalar> LagrangianFrame<T> {
    pub fn new(z: DMatrix<T>, form: &SymplecticForm<T>) -> Result<Self> {
        let dim = form.dim();
        if z.nrows() != dim || z.ncols() != dim / 2 {
            return Err(SymError::InvalidInput(format!(
                "frame must be {}x{}, got {}x{}",
                dim,
                dim / 2,
                z.nrows(),
                z.ncols()
            )));
        }
        let lag_defect = (z.transpose() * form.matrix() * &z).amax();
        let scale = T::one().max(z.amax()).powi(2);
        if lag_defect > T::of(TOL_LAG) * scale {
            return Err(SymError::InvalidInput(format!(
                "frame is not Lagrangian (defect {:?})",
                lag_defect
            )));
        }
        let svd = z.clone().svd(false, false);
        let smin = svd.singular_values.iter().fold(T::of(f64::MAX), |a, b| a.min(*b));
        if smin <= T::of(1e-9) {
            return Err(SymError::InvalidInput("frame is rank deficient".into()));
        }
        Ok(LagrangianFrame { z })
    }

    /// Frame of the diagonal in the doubled space.
    pub fn diagonal(n: usize) -> Self {
        let dim = 2 * n;
        let mut z = DMatrix::zeros(2 * dim, dim);
        for i in 0..dim {
            z[(i, i)] = T::one();
            z[(dim + i, i)] = T::one();
        }
        LagrangianFrame { z }
    }

    /// Coordinate Lagrangian spanned by `(e_{2k})_k` (the "x-axis" plane).
    pub fn horizontal(n: usize) -> Self {
        let mut z = DMatrix::zeros(2 * n, n);
        for k in 0..n {
            z[(2 * k, k)] = T::one();
        }
        LagrangianFrame { z }
    }

    /// Coordinate Lagrangian spanned by `(e_{2k+1})_k` (the "y-axis" plane).
    pub fn vertical(n: usize) -> Self {
        let mut z = DMatrix::zeros(2 * n, n);
        for k in 0..n {
            z[(2 * k + 1, k)] = T::one();
        }
        LagrangianFrame { z }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.z
    }

    pub fn ambient_dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn rank_dim(&self) -> usize {
        self.z.ncols()
    }

    /// Applies a linear symplectic map to the subspace.
    pub fn transform(&self, phi: &DMatrix<T>) -> Self {
        LagrangianFrame { z: phi * &self.z }
    }

    /// Dimension of the intersection with another Lagrangian, via the rank of
    /// the stacked frame matrix.
    pub fn intersection_dim(&self, other: &LagrangianFrame<T>, tol: T) -> usize {
        let m = stack_frames(&self.z, &other.z);
        let svd = m.svd(false, false);
        svd.singular_values.iter().filter(|s| **s <= tol).count()
    }
}

pub(crate) fn stack_frames<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let rows = a.nrows();
    let mut m = DMatrix::zeros(rows, a.ncols() + b.ncols());
    m.view_mut((0, 0), (rows, a.ncols())).copy_from(a);
    m.view_mut((0, a.ncols()), (rows, b.ncols())).copy_from(b);
    m
}

/// Path of symmetric matrices `t -> S(t)` on [0, 1].
#[derive(Clone)]
pub struct SymmetricPath<T: Scalar> {
    dim: usize,
    eval: MatFn<T>,
}

impl<T: Scalar> SymmetricPath<T> {
    pub fn new(dim: usize, eval: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static) -> Self {
        SymmetricPath { dim, eval: Arc::new(eval) }
    }

    pub fn constant(s: DMatrix<T>) -> Self {
        let dim = s.nrows();
        SymmetricPath { dim, eval: Arc::new(move |_| s.clone()) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: T) -> DMatrix<T> {
        (self.eval)(t)
    }

    /// Checks `||S(t) - S(t)^T|| <= tol` on a sample grid.
    pub fn validate(&self, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let t = T::of(k as f64 / samples as f64);
            let s = self.at(t);
            let defect = (&s - s.transpose()).amax();
            if defect > T::of(TOL_SYM) * T::one().max(s.amax()) {
                return Err(SymError::InvalidInput(format!(
                    "S(t) not symmetric at t = {:?}",
                    t
                )));
            }
        }
        Ok(())
    }
}

/// Path `t -> Phi(t)` in Sp(2n) with `Phi(0) = Id`. Carries an optional
/// closed-form derivative; crossing forms degrade without one, so the
/// constructors supply it whenever a generator is known.
#[derive(Clone)]
pub struct SymplecticPath<T: Scalar> {
    dim: usize,
    eval: MatFn<T>,
    deriv: Option<MatFn<T>>,
}

impl<T: Scalar> SymplecticPath<T> {
    pub fn from_fn(dim: usize, eval: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static) -> Self {
        SymplecticPath { dim, eval: Arc::new(eval), deriv: None }
    }

    pub fn from_fn_with_deriv(
        dim: usize,
        eval: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static,
        deriv: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        SymplecticPath { dim, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) }
    }

    pub fn constant_identity(dim: usize) -> Self {
        SymplecticPath {
            dim,
            eval: Arc::new(move |_| DMatrix::identity(dim, dim)),
            deriv: Some(Arc::new(move |_| DMatrix::zeros(dim, dim))),
        }
    }

    /// Block rotation path `Phi(t) = (+)_k e^{-2 pi y_k J0 t}` in 2x2 blocks:
    /// positive frequencies rotate negatively (clockwise), as for the orbits
    /// of `H = pi |z|^2 / y` on each factor.
    pub fn rotation(freqs: &[T]) -> Self {
        let n = freqs.len();
        let dim = 2 * n;
        let freqs: Vec<T> = freqs.to_vec();
        let f2 = freqs.clone();
        // e^{J0 th} = [[cos th, -sin th], [sin th, cos th]] with th = -2 pi y t.
        let eval = move |t: T| {
            let mut m = DMatrix::zeros(dim, dim);
            for (k, y) in freqs.iter().enumerate() {
                let th = -T::two_pi() * *y * t;
                m[(2 * k, 2 * k)] = th.cos();
                m[(2 * k, 2 * k + 1)] = -th.sin();
                m[(2 * k + 1, 2 * k)] = th.sin();
                m[(2 * k + 1, 2 * k + 1)] = th.cos();
            }
            m
        };
        let deriv = move |t: T| {
            let mut m = DMatrix::zeros(dim, dim);
            for (k, y) in f2.iter().enumerate() {
                let w = -T::two_pi() * *y;
                let th = w * t;
                m[(2 * k, 2 * k)] = -w * th.sin();
                m[(2 * k, 2 * k + 1)] = -w * th.cos();
                m[(2 * k + 1, 2 * k)] = w * th.cos();
                m[(2 * k + 1, 2 * k + 1)] = -w * th.sin();
            }
            m
        };
        SymplecticPath { dim, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) }
    }

    /// `Phi(t) = e^{J0 S t}` for a constant symmetric generator.
    pub fn constant_generator(s: DMatrix<T>, form: &SymplecticForm<T>) -> Self {
        let dim = s.nrows();
        let a = form.complex_structure() * &s;
        let a2 = a.clone();
        let eval = move |t: T| (a.clone() * t).exp();
        let deriv = move |t: T| &a2 * (a2.clone() * t).exp();
        SymplecticPath { dim, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: T) -> DMatrix<T> {
        (self.eval)(t)
    }

    pub fn endpoint(&self) -> DMatrix<T> {
        self.at(T::one())
    }

    /// dim Ker(Phi(1) - Id), with singular values below `tol` counted as zero.
    pub fn endpoint_kernel_dim(&self, tol: T) -> usize {
        let m = self.endpoint() - DMatrix::<T>::identity(self.dim, self.dim);
        let svd = m.svd(false, false);
        svd.singular_values.iter().filter(|s| **s <= tol).count()
    }

    /// Derivative; falls back to 4th-order central differences.
    pub fn deriv_at(&self, t: T) -> DMatrix<T> {
        match &self.deriv {
            Some(d) => d(t),
            None => central_diff(&*self.eval, t, T::of(1e-5)),
        }
    }

    /// Checks Phi(0) = Id and symplecticity on a sample grid; returns the
    /// worst symplecticity defect.
    pub fn validate(&self, form: &SymplecticForm<T>, samples: usize) -> Result<T> {
        let id_defect = (self.at(T::zero()) - DMatrix::<T>::identity(self.dim, self.dim)).amax();
        if id_defect > T::of(TOL_ID) {
            return Err(SymError::InvalidInput(format!(
                "Phi(0) != Id (defect {:?})",
                id_defect
            )));
        }
        let mut worst = T::zero();
        for k in 0..=samples {
            let t = T::of(k as f64 / samples as f64);
            let d = form.symplecticity_defect(&self.at(t));
            worst = worst.max(d);
        }
        if worst > T::of(TOL_SP) {
            return Err(SymError::NotSymplectic { defect: worst.to_subset().unwrap_or(f64::NAN) });
        }
        Ok(worst)
    }

    /// `t -> e^{eps J t} Phi(t)` with the form's compatible rotation.
    pub fn premultiply_rotation(&self, eps: T, form: &SymplecticForm<T>) -> Self {
        let j = form.complex_structure();
        let j2 = j.clone();
        let eval = self.eval.clone();
        let eval2 = self.eval.clone();
        let deriv = self.deriv.clone();
        let dim = self.dim;
        SymplecticPath {
            dim,
            eval: Arc::new(move |t: T| (j.clone() * (eps * t)).exp() * eval(t)),
            deriv: Some(Arc::new(move |t: T| {
                let rot = (j2.clone() * (eps * t)).exp();
                let dphi = match &deriv {
                    Some(d) => d(t),
                    None => central_diff(&*eval2, t, T::of(1e-5)),
                };
                &j2 * &rot * eval2(t) * eps + rot * dphi
            })),
        }
    }

    /// `t -> Phi(t) (1 + t X)`.
    pub fn postcompose_shear(&self, x: DMatrix<T>) -> Self {
        let dim = self.dim;
        let id = DMatrix::<T>::identity(dim, dim);
        let id2 = id.clone();
        let x2 = x.clone();
        let eval = self.eval.clone();
        let eval2 = self.eval.clone();
        let deriv = self.deriv.clone();
        SymplecticPath {
            dim,
            eval: Arc::new(move |t: T| eval(t) * (&id + &x * t)),
            deriv: Some(Arc::new(move |t: T| {
                let dphi = match &deriv {
                    Some(d) => d(t),
                    None => central_diff(&*eval2, t, T::of(1e-5)),
                };
                dphi * (&id2 + &x2 * t) + eval2(t) * &x2
            })),
        }
    }

    /// Catenation: `a` on [0, 1/2] then `a(1) * b` on [1/2, 1], reparametrized.
    pub fn concat(a: &SymplecticPath<T>, b: &SymplecticPath<T>) -> Self {
        assert_eq!(a.dim, b.dim);
        let dim = a.dim;
        let (ae, be) = (a.eval.clone(), b.eval.clone());
        let (ad, bd) = (a.deriv.clone(), b.deriv.clone());
        let (ae2, be2) = (a.eval.clone(), b.eval.clone());
        let half = T::of(0.5);
        let eval = move |t: T| {
            if t <= half {
                ae(t * T::of(2.0))
            } else {
                be((t - half) * T::of(2.0)) * ae(T::one())
            }
        };
        let deriv = move |t: T| {
            let two = T::of(2.0);
            if t <= half {
                let d = match &ad {
                    Some(d) => d(t * two),
                    None => central_diff(&*ae2, t * two, T::of(1e-5)),
                };
                d * two
            } else {
                let s = (t - half) * two;
                let d = match &bd {
                    Some(d) => d(s),
                    None => central_diff(&*be2, s, T::of(1e-5)),
                };
                d * two * ae2(T::one())
            }
        };
        SymplecticPath { dim, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) }
    }

    /// Lagrangian graph path `t -> {(v, Phi(t) v)}` in the doubled space.
    pub fn graph_path(&self) -> LagrangianPath<T> {
        let dim = self.dim;
        let eval = self.eval.clone();
        let me = self.clone();
        let frame = move |t: T| {
            let phi = eval(t);
            let mut z = DMatrix::zeros(2 * dim, dim);
            z.view_mut((0, 0), (dim, dim)).copy_from(&DMatrix::identity(dim, dim));
            z.view_mut((dim, 0), (dim, dim)).copy_from(&phi);
            z
        };
        let deriv = move |t: T| {
            let dphi = me.deriv_at(t);
            let mut z = DMatrix::zeros(2 * dim, dim);
            z.view_mut((dim, 0), (dim, dim)).copy_from(&dphi);
            z
        };
        LagrangianPath::new_with_deriv(2 * dim, dim, frame, deriv)
    }
}

/// Path of Lagrangian frames `t -> Z(t)` (2N x N columns), with an optional
/// closed-form derivative for crossing forms.
#[derive(Clone)]
pub struct LagrangianPath<T: Scalar> {
    ambient_dim: usize,
    rank: usize,
    eval: MatFn<T>,
    deriv: Option<MatFn<T>>,
}

impl<T: Scalar> LagrangianPath<T> {
    pub fn new(
        ambient_dim: usize,
        rank: usize,
        eval: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        LagrangianPath { ambient_dim, rank, eval: Arc::new(eval), deriv: None }
    }

    pub fn new_with_deriv(
        ambient_dim: usize,
        rank: usize,
        eval: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static,
        deriv: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        LagrangianPath { ambient_dim, rank, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) }
    }

    pub fn constant(frame: LagrangianFrame<T>) -> Self {
        let z = frame.matrix().clone();
        let (r, c) = (z.nrows(), z.ncols());
        let z2 = z.clone();
        LagrangianPath {
            ambient_dim: r,
            rank: c,
            eval: Arc::new(move |_| z.clone()),
            deriv: Some(Arc::new(move |_| DMatrix::zeros(z2.nrows(), z2.ncols()))),
        }
    }

    /// Moves a fixed frame by a path of symplectic matrices.
    pub fn from_motion(path: SymplecticPath<T>, frame: LagrangianFrame<T>) -> Self {
        let z = frame.matrix().clone();
        let z2 = z.clone();
        let p = path.clone();
        let p2 = path;
        LagrangianPath {
            ambient_dim: z.nrows(),
            rank: z.ncols(),
            eval: Arc::new(move |t| p.at(t) * &z),
            deriv: Some(Arc::new(move |t| p2.deriv_at(t) * &z2)),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn frame(&self, t: T) -> DMatrix<T> {
        (self.eval)(t)
    }

    pub fn frame_deriv(&self, t: T) -> DMatrix<T> {
        match &self.deriv {
            Some(d) => d(t),
            None => central_diff(&*self.eval, t, T::of(1e-5)),
        }
    }

    /// Applies a fixed linear symplectic map pointwise.
    pub fn transform(&self, phi: DMatrix<T>) -> Self {
        let eval = self.eval.clone();
        let deriv = self.deriv.clone();
        let eval2 = self.eval.clone();
        let phi2 = phi.clone();
        LagrangianPath {
            ambient_dim: self.ambient_dim,
            rank: self.rank,
            eval: Arc::new(move |t| &phi * eval(t)),
            deriv: Some(Arc::new(move |t| match &deriv {
                Some(d) => &phi2 * d(t),
                None => &phi2 * central_diff(&*eval2, t, T::of(1e-5)),
            })),
        }
    }

    /// `t -> e^{eps J t} alpha(t)` with the ambient compatible rotation.
    pub fn premultiply_rotation(&self, eps: T, form: &SymplecticForm<T>) -> Self {
        let j = form.complex_structure();
        let j2 = j.clone();
        let eval = self.eval.clone();
        let eval2 = self.eval.clone();
        let deriv = self.deriv.clone();
        LagrangianPath {
            ambient_dim: self.ambient_dim,
            rank: self.rank,
            eval: Arc::new(move |t: T| (j.clone() * (eps * t)).exp() * eval(t)),
            deriv: Some(Arc::new(move |t: T| {
                let rot = (j2.clone() * (eps * t)).exp();
                let dz = match &deriv {
                    Some(d) => d(t),
                    None => central_diff(&*eval2, t, T::of(1e-5)),
                };
                &j2 * &rot * eval2(t) * eps + rot * dz
            })),
        }
    }

    /// Direct sum of two paths in the block-diagonal symplectic splitting.
    pub fn direct_sum(a: &LagrangianPath<T>, b: &LagrangianPath<T>) -> Self {
        let (da, db) = (a.ambient_dim, b.ambient_dim);
        let (ra, rb) = (a.rank, b.rank);
        let (ae, be) = (a.eval.clone(), b.eval.clone());
        let a2 = a.clone();
        let b2 = b.clone();
        let eval = move |t: T| {
            let (za, zb) = (ae(t), be(t));
            let mut z = DMatrix::zeros(da + db, ra + rb);
            z.view_mut((0, 0), (da, ra)).copy_from(&za);
            z.view_mut((da, ra), (db, rb)).copy_from(&zb);
            z
        };
        let deriv = move |t: T| {
            let (za, zb) = (a2.frame_deriv(t), b2.frame_deriv(t));
            let mut z = DMatrix::zeros(da + db, ra + rb);
            z.view_mut((0, 0), (da, ra)).copy_from(&za);
            z.view_mut((da, ra), (db, rb)).copy_from(&zb);
            z
        };
        LagrangianPath {
            ambient_dim: da + db,
            rank: ra + rb,
            eval: Arc::new(eval),
            deriv: Some(Arc::new(deriv)),
        }
    }

    /// Catenation with the time rescaled to [0, 1].
    pub fn concat(a: &LagrangianPath<T>, b: &LagrangianPath<T>) -> Self {
        assert_eq!(a.ambient_dim, b.ambient_dim);
        assert_eq!(a.rank, b.rank);
        let (ae, be) = (a.eval.clone(), b.eval.clone());
        let a2 = a.clone();
        let b2 = b.clone();
        let half = T::of(0.5);
        let eval = move |t: T| {
            if t <= half {
                ae(t * T::of(2.0))
            } else {
                be((t - half) * T::of(2.0))
            }
        };
        let deriv = move |t: T| {
            let two = T::of(2.0);
            if t <= half {
                a2.frame_deriv(t * two) * two
            } else {
                b2.frame_deriv((t - half) * two) * two
            }
        };
        LagrangianPath {
            ambient_dim: a.ambient_dim,
            rank: a.rank,
            eval: Arc::new(eval),
            deriv: Some(Arc::new(deriv)),
        }
    }

    /// Fixed-endpoint time reparametrization by a monotone tau with
    /// tau(0)=0, tau(1)=1.
    pub fn reparametrize(
        &self,
        tau: impl Fn(T) -> T + Send + Sync + 'static,
        dtau: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        let eval = self.eval.clone();
        let me = self.clone();
        let tau = Arc::new(tau);
        let tau2 = tau.clone();
        LagrangianPath {
            ambient_dim: self.ambient_dim,
            rank: self.rank,
            eval: Arc::new(move |t| eval(tau(t))),
            deriv: Some(Arc::new(move |t| me.frame_deriv(tau2(t)) * dtau(t))),
        }
    }
}

fn central_diff<T: Scalar>(f: &(dyn Fn(T) -> DMatrix<T> + Send + Sync), t: T, h: T) -> DMatrix<T> {
    // 4th-order stencil, shifted one-sided near the ends of [0, 1].
    let t = t.clamp(T::of(0.0) + h * T::of(2.0), T::one() - h * T::of(2.0));
    let two = T::of(2.0);
    let m1 = f(t - h * two);
    let m2 = f(t - h);
    let m3 = f(t + h);
    let m4 = f(t + h * two);
    (m1 - m2 * T::of(8.0) + m3 * T::of(8.0) - m4) / (h * T::of(12.0))
}

/// Graph of a single symplectic matrix as a Lagrangian frame in the doubled
/// space, columns `(e_i, Phi e_i)`.
pub fn graph_lagrangian<T: Scalar>(
    phi: &DMatrix<T>,
    ctx: &SymplecticContext<T>,
) -> Result<LagrangianFrame<T>> {
    ctx.form().check_symplectic(phi, TOL_SP)?;
    let dim = ctx.dim();
    let mut z = DMatrix::zeros(2 * dim, dim);
    z.view_mut((0, 0), (dim, dim)).copy_from(&DMatrix::identity(dim, dim));
    z.view_mut((dim, 0), (dim, dim)).copy_from(phi);
    LagrangianFrame::new(z, &SymplecticForm::doubled(ctx.n))
}

/// Writes `L` as the graph of a quadratic form over `L0` in the splitting
/// `V = L0 (+) L1`, via `F : L1 -> L0^*, v -> -i_v omega`.
pub fn graph_over_decomposition<T: Scalar>(
    l: &LagrangianFrame<T>,
    l0: &LagrangianFrame<T>,
    l1: &LagrangianFrame<T>,
    form: &SymplecticForm<T>,
) -> Result<QuadraticForm<T>> {
    let z0 = l0.matrix();
    let z1 = l1.matrix();
    let zl = l.matrix();
    let span = stack_frames(z0, z1);
    let lu = span.clone().lu();
    let coeffs = lu
        .solve(zl)
        .ok_or_else(|| SymError::InvalidInput("L0 (+) L1 does not span".into()))?;
    let n0 = z0.ncols();
    let a = coeffs.view((0, 0), (n0, zl.ncols())).into_owned();
    let b = coeffs.view((n0, 0), (coeffs.nrows() - n0, zl.ncols())).into_owned();
    // L transverse to L1 iff the L0-coordinate block is invertible.
    let svd = a.clone().svd(false, false);
    let smin = svd.singular_values.iter().fold(T::of(f64::MAX), |x, y| x.min(*y));
    let scale = T::one().max(a.amax());
    if smin <= T::of(1e-10) * scale {
        return Err(SymError::NotTransverse { sigma: smin.to_subset().unwrap_or(f64::NAN) });
    }
    let a_inv = a.lu().try_inverse().ok_or(SymError::NotTransverse {
        sigma: smin.to_subset().unwrap_or(f64::NAN),
    })?;
    let gram = z0.transpose() * form.matrix() * z1 * b * a_inv;
    let gram = (&gram + gram.transpose()) * T::of(0.5);
    QuadraticForm::new(z0.clone(), gram)
}

/// Rebuilds the frame of `graph_{L0}^{L1} q` from a quadratic form.
pub fn graph_of_form<T: Scalar>(
    q: &QuadraticForm<T>,
    l0: &LagrangianFrame<T>,
    l1: &LagrangianFrame<T>,
    form: &SymplecticForm<T>,
) -> Result<LagrangianFrame<T>> {
    // Solve for B with Z0^T J Z1 B = G; frame is Z0 + Z1 B.
    let m = l0.matrix().transpose() * form.matrix() * l1.matrix();
    let b = m
        .lu()
        .solve(&q.gram)
        .ok_or_else(|| SymError::InvalidInput("degenerate pairing between L0 and L1".into()))?;
    let z = l0.matrix() + l1.matrix() * b;
    LagrangianFrame::new(z, form)
}

/// Builds an element of the isotropic-image cone from an isotropic frame `U`
/// (columns spanning an isotropic subspace) and a symmetric coefficient
/// matrix `M`: `X = -U M U^T Omega`. Such `X` lies in sp(2n), has image in
/// span(U), and `1 + tX` is symplectic for every t; its rank is rank `M`.
pub fn isotropic_shear<T: Scalar>(
    u: &DMatrix<T>,
    m: &DMatrix<T>,
    form: &SymplecticForm<T>,
) -> Result<DMatrix<T>> {
    if m.nrows() != m.ncols() || m.nrows() != u.ncols() {
        return Err(SymError::InvalidInput("coefficient matrix must be square of frame rank".into()));
    }
    if (m - m.transpose()).amax() > T::of(TOL_SYM) * T::one().max(m.amax()) {
        return Err(SymError::InvalidInput("coefficient matrix must be symmetric".into()));
    }
    let iso = (u.transpose() * form.matrix() * u).amax();
    if iso > T::of(TOL_LAG) * T::one().max(u.amax()).powi(2) {
        return Err(SymError::InvalidInput("frame does not span an isotropic subspace".into()));
    }
    let x = -(u * m * u.transpose() * form.matrix());
    debug_assert!(is_isotropic_generator(&x, form).0);
    Ok(x)
}

/// Diagnostics from the isotropic-generator test.
#[derive(Clone, Debug)]
pub struct IsotropicDiagnostics<T: Scalar> {
    pub in_sp: bool,
    pub sp_defect: T,
    pub image_isotropic: bool,
    pub isotropy_defect: T,
    pub one_plus_tx_symplectic: bool,
    pub shear_defect: T,
}

/// Tests membership in Xi: `X` in sp(2n) with isotropic image, equivalently
/// `1 + tX` symplectic for all t. Total function; diagnostics say which
/// characterization failed.
pub fn is_isotropic_generator<T: Scalar>(
    x: &DMatrix<T>,
    form: &SymplecticForm<T>,
) -> (bool, IsotropicDiagnostics<T>) {
    let scale = T::one().max(x.amax());
    let tol_sym = T::of(TOL_SYM) * scale;
    let tol_lag = T::of(TOL_LAG) * scale * scale;

    let jx = form.matrix() * x;
    let sp_defect = (&jx - jx.transpose()).amax();
    let in_sp = sp_defect <= tol_sym;

    // X^T J X = 0 iff the image is isotropic.
    let isotropy_defect = (x.transpose() * form.matrix() * x).amax();
    let image_isotropic = isotropy_defect <= tol_lag;

    let dim = x.nrows();
    let id = DMatrix::<T>::identity(dim, dim);
    let mut shear_defect = T::zero();
    for k in 0..=8 {
        let t = T::of(-2.0 + 0.5 * k as f64);
        let m = &id + x * t;
        shear_defect = shear_defect.max(form.symplecticity_defect(&m));
    }
    let one_plus_tx_symplectic = shear_defect <= T::of(TOL_SP) * scale * scale;

    let ok = in_sp && image_isotropic && one_plus_tx_symplectic;
    (
        ok,
        IsotropicDiagnostics {
            in_sp,
            sp_defect,
            image_isotropic,
            isotropy_defect,
            one_plus_tx_symplectic,
            shear_defect,
        },
    )
}

/// Fundamental solution of `x' = J0 S(t) x` by a 4th-order Magnus scheme:
/// each step exponentiates an averaged generator, so the result stays in
/// Sp(2n) up to the accuracy of the matrix exponential.
pub fn integrate_fundamental<T: Scalar>(
    s: &SymmetricPath<T>,
    steps: usize,
) -> Result<SymplecticPath<T>> {
    if steps < 1 {
        return Err(SymError::InvalidInput("steps must be >= 1".into()));
    }
    let dim = s.dim();
    let form = SymplecticForm::<T>::standard(dim / 2);
    let j = form.complex_structure();
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(DMatrix::<T>::identity(dim, dim));
    let h = T::one() / T::of(steps as f64);
    let overflow = T::of(1e12);
    for k in 0..steps {
        let t0 = T::of(k as f64) * h;
        let phi = magnus_step(s, &j, nodes[k].clone(), t0, h);
        if phi.amax() > overflow {
            return Err(SymError::Diverged { t: (k as f64 + 1.0) / steps as f64 });
        }
        nodes.push(phi);
    }
    let nodes = Arc::new(nodes);
    let s_eval = s.clone();
    let s_deriv = s.clone();
    let j2 = j.clone();
    let nodes2 = nodes.clone();
    let eval = move |t: T| {
        let tf: f64 = t.to_subset().unwrap_or(0.0);
        let tf = tf.clamp(0.0, 1.0);
        let k = ((tf * steps as f64).floor() as usize).min(steps);
        let t0 = T::of(k as f64) * h;
        let dt = t - t0;
        if dt.abs() < T::of(1e-15) {
            nodes[k].clone()
        } else {
            magnus_step(&s_eval, &j, nodes[k].clone(), t0, dt)
        }
    };
    let eval2 = eval.clone();
    let deriv = move |t: T| &j2 * s_deriv.at(t) * eval2(t);
    let _ = nodes2;
    Ok(SymplecticPath { dim, eval: Arc::new(eval), deriv: Some(Arc::new(deriv)) })
}

fn magnus_step<T: Scalar>(
    s: &SymmetricPath<T>,
    j: &DMatrix<T>,
    phi: DMatrix<T>,
    t0: T,
    h: T,
) -> DMatrix<T> {
    // Two-node Gauss-Legendre Magnus of order 4.
    let c1 = T::of(0.5 - 0.28867513459481287);
    let c2 = T::of(0.5 + 0.28867513459481287);
    let a1 = j * s.at(t0 + c1 * h);
    let a2 = j * s.at(t0 + c2 * h);
    let comm = &a2 * &a1 - &a1 * &a2;
    let omega = (&a1 + &a2) * (h * T::of(0.5)) + comm * (h * h * T::of(0.28867513459481287 / 2.0));
    omega.exp() * phi
}
