//! Linearized AC power flow in rectangular voltage coordinates.
//!
//! The crate solves for a complex voltage perturbation `ΔV` around a nominal
//! profile `V` by dropping the quadratic term of the complex power balance,
//! then certifies the result by evaluating that dropped term exactly.
//!
//! - [`netmodel`] builds the partitioned admittance matrix (`Y`, `Ȳ`, `y`) from
//!   a [`netmodel::NetworkCase`] with slack, PV and ZIP buses.
//! - [`linearize`] assembles the perturbation system and solves it, either in
//!   full (`2N` real unknowns) or in closed form around the no-load voltage.
//! - [`transmission`] holds the lossless flat-voltage solution and classical DC
//!   power flow.
//! - [`distribution`] holds the ZIP-feeder closed form, the R/X coupling split,
//!   the decoupled estimate and the `w = -Y⁻¹Ȳ` special case.
//! - [`residuals`] evaluates the neglected term, the `‖·‖†` norm and the a-priori
//!   bounds.
//! - [`oracle`] is a rectangular Newton-Raphson solver used as ground truth.
//! - [`casefile`], [`pipeline`] and [`report`] are the file format, method
//!   dispatch and report emitters behind the `rectflow` binary.
//!
//! ```
//! use num_complex::Complex64;
//! use rectflow::netmodel::{build_admittance, Branch, Bus, BusId, NetworkCase, ZipLoad};
//! use rectflow::distribution::solve_distribution;
//! use rectflow::residuals::nonlinear_mismatch;
//!
//! let case = NetworkCase::new(
//!     vec![
//!         Bus::zip(BusId(1), ZipLoad::constant_power(Complex64::new(-0.1, -0.05))),
//!         Bus::slack(BusId(2), 1.0, 0.0),
//!     ],
//!     vec![Branch::new(BusId(1), BusId(2), Complex64::new(1.0, -5.0))],
//!     100.0,
//! )
//! .unwrap();
//! let partition = build_admittance(&case);
//! let solution = solve_distribution(&partition, &case).unwrap();
//! let mismatch = nonlinear_mismatch(&partition, &solution.approx_voltage(), &case);
//! assert!(mismatch[0].norm() < 1e-2);
//! ```

pub mod casefile;
pub mod distribution;
pub mod error;
pub mod linalg;
pub mod linearize;
pub mod netmodel;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod report;
pub mod residuals;
pub mod synth;
pub mod transmission;

pub use error::{Error, Result};
