//! Index-theoretic and convex-geometric machinery for linear symplectic
//! dynamics: Maslov and Conley-Zehnder indices via crossing forms, linearized
//! Hamiltonian flows, gauge-function capacities of convex bodies, and linear
//! toric models for the mixed action-Maslov homomorphism.
//!
//! The numeric core is generic over the scalar type (anything implementing
//! [`Scalar`]); concrete `f64` aliases live at the crate root.

pub mod convexbody;
pub mod czindex;
pub mod descriptor;
pub mod error;
pub mod half;
pub mod hamflow;
pub mod maslov;
pub mod report;
pub mod scalar;
pub mod symcore;
pub mod toric;

pub use error::SymError;
pub use half::HalfInt;
pub use scalar::Scalar;

/// Concrete `f64` aliases for the generic core types.
pub type Mat = nalgebra::DMatrix<f64>;
pub type Vec2n = nalgebra::DVector<f64>;
pub type SymplecticContext = symcore::SymplecticContext<f64>;
pub type SymplecticForm = symcore::SymplecticForm<f64>;
pub type SymmetricPath = symcore::SymmetricPath<f64>;
pub type SymplecticPath = symcore::SymplecticPath<f64>;
pub type LagrangianFrame = symcore::LagrangianFrame<f64>;
pub type LagrangianPath = symcore::LagrangianPath<f64>;
pub type QuadraticForm = symcore::QuadraticForm<f64>;
pub type Signature = symcore::Signature;
pub type CrossingReport = maslov::CrossingReport<f64>;
pub type MaslovResult = maslov::MaslovResult<f64>;
pub type MaslovOptions = maslov::MaslovOptions<f64>;
pub type IndexResult = czindex::IndexResult<f64>;
pub type HamiltonianModel = hamflow::HamiltonianModel<f64>;
pub type Trajectory = hamflow::Trajectory<f64>;
pub type OrbitRecord = hamflow::OrbitRecord<f64>;
pub type ConvexBodyModel = convexbody::ConvexBodyModel<f64>;
pub type MollifiedGauge = convexbody::MollifiedGauge<f64>;
pub type ProfileChi = convexbody::ProfileChi<f64>;
pub type CapacityResult = convexbody::CapacityResult<f64>;
pub type SpecReport = convexbody::SpecReport<f64>;
pub type SpecEntry = convexbody::SpecEntry<f64>;
pub type TorusActionModel = toric::TorusActionModel<f64>;
pub type FixedPointDatum = toric::FixedPointDatum<f64>;
