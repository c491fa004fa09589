//! Counterfactual probing for hallucination detection and mitigation.
//!
//! Statements are extracted from model output, perturbed into plausible but
//! wrong counterfactuals, and scored for how much the model's confidence moves
//! between the original and its perturbations. Statements whose confidence
//! barely moves are flagged, and flagged statements can be rewritten with a
//! hedge matched to the kind of claim.

pub mod backend;
mod causal;
pub mod eval;
pub mod extract;
pub mod kind;
pub mod mitigation;
mod parallel;
pub mod pipeline;
pub mod probe;
pub mod scoring;
pub mod synthetic;
pub mod text;

pub use backend::{Backend, BackendConfig, BackendError, BackendKind, ConfidenceScore, MockKnowledgeBase};
pub use extract::{classify_claim, extract_document, extract_statements, Statement, StatementId};
pub use kind::ProbeKind;
pub use mitigation::{hedge, mitigate, MitigatedStatement};
pub use pipeline::{DocumentReport, Pipeline, RunConfig};
pub use probe::{
    generate_probes, perturb_rule_based, render_probe_prompt, ConfusableLexicon, Counterfactual, ProbeGenerator,
    ProbeStrategy, ProbeTemplate, TemplateSet,
};
pub use scoring::{
    confidence_variance, detect_statement, hallucination_probability, sensitivity, ScoringWeights, SensitivityReport,
};
