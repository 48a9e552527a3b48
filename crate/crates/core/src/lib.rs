//! Flags short-term rental listings in Irish Rent Pressure Zones that may
//! breach the short-term letting rules.
//!
//! The pipeline runs zone lookup ([`geo`]), photo-based residence
//! deduplication ([`residence`]), permit proximity matching ([`permits`]) and
//! review-based occupancy estimation ([`occupancy`]) and feeds the evidence
//! into a fixed decision table ([`rules`]). [`report`] orchestrates a run and
//! writes its output files; [`synthgen`] builds synthetic worlds with ground
//! truth for end-to-end evaluation.

pub mod fixed;
pub mod geo;
pub mod ingest;
pub mod occupancy;
pub mod permits;
pub mod registry;
pub mod report;
pub mod residence;
pub mod rules;
pub mod synthgen;
