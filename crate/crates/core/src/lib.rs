//! Harvest colloquial place names from geotagged rental-listing corpora.
//!
//! The crate is organised as a pipeline over a corpus of geotagged rental
//! advertisements:
//!
//! 1. [`corpus`] — load the ad corpus from CSV and collapse reposts and
//!    near-duplicate texts.
//! 2. [`extract`] — propose candidate place-name mentions, either with the
//!    built-in heuristic extractors or by ingesting external NER annotations,
//!    and pool them into per-term candidate sets with one geotag per
//!    mentioning ad.
//! 3. [`cluster`] — rank candidate terms by how geographically clustered
//!    their mentioning ads are, using multi-scale connected-component
//!    entropy over a geometrically growing distance ladder.
//! 4. [`eval`] — score a ranking against multi-annotator ground truth and
//!    sweep the score threshold for a precision/recall curve.
//! 5. [`footprint`] — turn the accepted terms' point sets into spatial
//!    footprints (convex hulls or kernel-density contours) as GeoJSON.
//! 6. [`gazetteer`] — diff accepted terms against existing gazetteers to
//!    find which names are already known and which are new.
//!
//! [`pipeline`] wires the stages together behind a JSON [`config`], and
//! [`synth`] generates seeded synthetic corpora with known ground truth for
//! end-to-end exercise of the whole chain.

pub mod cluster;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extract;
pub mod footprint;
pub mod gazetteer;
pub mod geo;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use geo::GeoPoint;
