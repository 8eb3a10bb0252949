//! Spatial econometrics engine for areal demand analysis.
//!
//! The crate covers the full modeling chain for city-scale trip data:
//!
//! * [`geo`] — polygon regions, contiguity extraction, hexagonal tessellation,
//!   geodesic distance;
//! * [`weights`] — row-standardized spatial weight matrices with a cached
//!   spectrum for fast log-determinants;
//! * [`ingest`] — streaming trip cleaning, per-area demand aggregation and
//!   design-matrix assembly;
//! * [`sdi`] — single-factor exploratory factor analysis (principal-axis
//!   factoring) with Cronbach's alpha;
//! * [`tat`] — transit access time over a hex grid;
//! * [`econometrics`] — OLS, Moran's I permutation inference and Lagrange
//!   multiplier lag/error diagnostics;
//! * [`sdm`] — maximum-likelihood Spatial Durbin Model estimation;
//! * [`impacts`] — direct/indirect/total impact decomposition with Monte
//!   Carlo inference, ride-delta and elasticity translation;
//! * [`simulate`] — synthetic lattices and data-generating processes used by
//!   tests, benchmarks and fixtures.

pub mod econometrics;
pub mod error;
pub mod geo;
pub mod impacts;
pub mod ingest;
pub mod linalg;
pub mod rng;
pub mod sdi;
pub mod sdm;
pub mod simulate;
pub mod stats;
pub mod tat;
pub mod weights;

pub use error::{Error, ErrorClass, Result};
pub use geo::{Adjacency, AreaUnit, GeoPoint, HexGrid, StudyRegion};
pub use impacts::{ImpactTable, RideDelta};
pub use ingest::{AreaPanel, DemandSeries, RejectionStats, TripRecord};
pub use sdi::{FactorModel, ItemMatrix};
pub use sdm::{ModelSpec, SdmFit};
pub use tat::{StationSet, TatResult};
pub use weights::{SpatialWeights, Spectrum};
