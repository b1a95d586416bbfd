//! Large-language models as translators between modeling formalisms.
//!
//! The crate plans multi-hop translations over a formalism-transformation
//! graph, runs them through rule-based, model-backed or script-backed
//! translators, repairs invalid output by feeding validator diagnostics back
//! to the backend, routes task requests to adapter profiles, and measures
//! trust through round-trip distortion and serving-cost simulation.

pub mod deploy;
pub mod diagnostic;
pub mod element;
pub mod fidelity;
pub mod formalism;
pub mod mini;
pub mod planner;
pub mod repair;
pub mod router;
pub mod taxonomy;
pub mod translate;

pub use diagnostic::{Diagnostic, Location, Severity};
pub use element::{Atom, Cardinality, Element, ElementSet, Scalar, Term};
pub use formalism::{Artifact, Codec, Formalism, FormalismError, FormalismId, Provenance, Registry};
