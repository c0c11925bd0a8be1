//! Multi-component cut-and-project sets and their invariant densities.
//!
//! - [`cyclotomic`]: exact arithmetic in Z[xi], xi a primitive fifth root of unity.
//! - [`polygeom`]: convex windows, erosion, rasterization.
//! - [`scheme`]: model-set enumeration, transition windows and translation sets.
//! - [`pfsolve`]: Perron-Frobenius analysis of the weight matrix.
//! - [`refine`]: the matrix refinement operator, its fixed point, and the
//!   Fourier-product solution.
//! - [`verify`]: physical-side checks (equidistribution, invariance equations,
//!   densities).

pub mod cyclotomic;
pub mod error;
pub mod pfsolve;
pub mod polygeom;
pub mod refine;
pub mod scheme;
pub mod verify;

pub use cyclotomic::CycInt;
pub use error::{Error, Result};
pub use pfsolve::{pf_eigen, PfResult};
pub use polygeom::{BoundaryMode, ConvexPolygon, GridSpec, Mat2, Region, Vec2};
pub use refine::{DensityGrid, FixedPoint, RefinementKernel, SolveOptions};
pub use scheme::{LabeledPoint, NuPolicy, SchemeSpec, TransitionData, WindowSystem, WindowWeight};
pub use verify::{VerifyOptions, VerifyReport};
