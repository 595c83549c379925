//! JSON descriptors for the CLI: paths, Lagrangian motions, Hamiltonians,
//! bodies, profiles, and toric models. All inputs are schema-versioned
//! ("symindex/1") and deterministic to build.

use crate::convexbody::{mollify, profile_model, ConvexBodyModel, ProfileChi};
use crate::error::{Result, SymError};
use crate::hamflow::HamiltonianModel;
use crate::symcore::{LagrangianFrame, LagrangianPath, SymplecticForm, SymplecticPath};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 || rows.iter().any(|row| row.len() != rows[0].len()) {
        return Err(SymError::InvalidInput("matrix rows must be nonempty and equal-length".into()));
    }
    let c = rows[0].len();
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// A path in Sp(2n) starting at the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathDescriptor {
    /// Block rotations `t -> e^{-2 pi y_i J0 t}` per complex coordinate.
    Rotation { freqs: Vec<f64> },
    /// `t -> e^{J0 S t}` for a constant symmetric generator S.
    QuadraticFlow { s: Vec<Vec<f64>> },
}

impl PathDescriptor {
    pub fn build(&self) -> Result<SymplecticPath<f64>> {
        match self {
            PathDescriptor::Rotation { freqs } => {
                if freqs.is_empty() {
                    return Err(SymError::InvalidInput("freqs must be nonempty".into()));
                }
                Ok(SymplecticPath::rotation(freqs))
            }
            PathDescriptor::QuadraticFlow { s } => {
                let m = matrix_from_rows(s)?;
                if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
                    return Err(SymError::InvalidInput("S must be square of even size".into()));
                }
                let form = SymplecticForm::standard(m.nrows() / 2);
                Ok(SymplecticPath::constant_generator(m, &form))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Horizontal,
    Vertical,
}

impl FrameName {
    pub fn build(self, n: usize) -> LagrangianFrame<f64> {
        match self {
            FrameName::Horizontal => LagrangianFrame::horizontal(n),
            FrameName::Vertical => LagrangianFrame::vertical(n),
        }
    }
}

/// A Lagrangian path plus the reference Lagrangian for the Maslov index.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaslovDescriptor {
    /// The moving frame `alpha(t) = Phi(t) . start`.
    pub motion: PathDescriptor,
    pub start: FrameName,
    /// The reference Lagrangian L0.
    pub reference: FrameName,
}

impl MaslovDescriptor {
    pub fn build(&self) -> Result<(LagrangianPath<f64>, LagrangianFrame<f64>, SymplecticForm<f64>)> {
        let phi = self.motion.build()?;
        let n = phi.dim() / 2;
        let path = LagrangianPath::from_motion(phi, self.start.build(n));
        Ok((path, self.reference.build(n), SymplecticForm::standard(n)))
    }
}

/// A convex body.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyDescriptor {
    Ellipsoid { radii: Vec<f64> },
    /// `U = {F < 0}` with F a polynomial given by monomial terms
    /// (must satisfy F(0) < 0 and be convex).
    General { n: usize, terms: Vec<PolyTerm> },
}

/// One monomial `coeff * prod x_i^{powers_i}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl BodyDescriptor {
    pub fn build(&self) -> Result<ConvexBodyModel<f64>> {
        match self {
            BodyDescriptor::Ellipsoid { radii } => ConvexBodyModel::ellipsoid(radii.clone()),
            BodyDescriptor::General { n, terms } => {
                let dim = 2 * n;
                if terms.is_empty() || terms.iter().any(|t| t.powers.len() != dim) {
                    return Err(SymError::InvalidInput(format!(
                        "each term needs a powers vector of length {dim}"
                    )));
                }
                let terms = terms.clone();
                Ok(ConvexBodyModel::general(*n, move |x: &DVector<f64>| {
                    terms
                        .iter()
                        .map(|t| {
                            t.coeff
                                * t.powers
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &p)| x[i].powi(p as i32))
                                    .product::<f64>()
                        })
                        .sum()
                }))
            }
        }
    }
}

/// Profile parameters for the chi^s family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDescriptor {
    pub eps: f64,
    #[serde(default)]
    pub eps_prime: Option<f64>,
    pub s: f64,
}

impl ProfileDescriptor {
    pub fn build(&self, a: f64) -> Result<ProfileChi<f64>> {
        match self.eps_prime {
            Some(ep) => ProfileChi::new(a, self.eps, ep, self.s),
            None => ProfileChi::with_defaults(a, self.eps, self.s),
        }
    }
}

/// A Hamiltonian on R^{2n}.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianDescriptor {
    /// `H = <x, Q x> / 2`.
    Quadratic { q: Vec<Vec<f64>> },
    /// `H = chi^s(f_delta)` for a body gauge and profile.
    Profile {
        body: BodyDescriptor,
        chi: ProfileDescriptor,
        delta: f64,
    },
}

impl HamiltonianDescriptor {
    pub fn build(&self) -> Result<HamiltonianModel<f64>> {
        match self {
            HamiltonianDescriptor::Quadratic { q } => {
                HamiltonianModel::quadratic(matrix_from_rows(q)?)
            }
            HamiltonianDescriptor::Profile { body, chi, delta } => {
                let body = body.build()?;
                let (a, _) = crate::convexbody::certify_hessian(&body)?;
                let profile = chi.build(a)?;
                let mg = mollify(&body, *delta)?;
                let p1 = profile.clone();
                let p2 = profile.clone();
                let p3 = profile;
                profile_model(
                    &mg,
                    move |u| p1.chi(u),
                    move |u| p2.dchi(u),
                    move |u| p3.ddchi(u),
                )
            }
        }
    }
}

/// A linear toric model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToricModelDescriptor {
    /// Standard projective-space model with the recorded (ell, kappa) pair.
    Cpn { n: usize, ell: f64 },
    Explicit {
        rank: usize,
        n: usize,
        kappa: f64,
        fixed_points: Vec<FixedPointJson>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointJson {
    pub p: Vec<f64>,
    pub weights: Vec<Vec<i64>>,
}

impl ToricModelDescriptor {
    pub fn build(&self) -> Result<crate::toric::TorusActionModel<f64>> {
        match self {
            ToricModelDescriptor::Cpn { n, ell } => crate::toric::TorusActionModel::cpn(*n, *ell),
            ToricModelDescriptor::Explicit { rank, n, kappa, fixed_points } => {
                let fps = fixed_points
                    .iter()
                    .map(|fp| crate::toric::FixedPointDatum {
                        p: DVector::from_vec(fp.p.clone()),
                        weights: fp.weights.clone(),
                    })
                    .collect();
                crate::toric::TorusActionModel::new(*rank, *n, *kappa, fps)
            }
        }
    }
}
