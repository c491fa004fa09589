use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kind::ProbeKind;

/// Marks where the statement is substituted into a template instruction.
pub const PLACEHOLDER: &str = "{s}";

const BUILTIN: &str = include_str!("../../data/templates.toml");

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template for {kind} must contain exactly one `{PLACEHOLDER}` placeholder, found {found}")]
    Placeholder { kind: ProbeKind, found: usize },
    #[error("template for {0} has no few-shot examples")]
    NoFewShots(ProbeKind),
    #[error("cannot read templates {path}: {reason}")]
    Load { path: String, reason: String },
}

/// Prompt used to ask the model for a counterfactual of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTemplate {
    #[serde(skip)]
    pub kind: Option<ProbeKind>,
    pub instruction: String,
    /// (original, counterfactual) exemplars.
    #[serde(default)]
    pub few_shots: Vec<(String, String)>,
    #[serde(default)]
    pub constraints: Vec<String>,
}

impl ProbeTemplate {
    fn kind(&self) -> ProbeKind {
        self.kind.unwrap_or(ProbeKind::Factual)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let found = self.instruction.matches(PLACEHOLDER).count();
        if found != 1 {
            return Err(TemplateError::Placeholder { kind: self.kind(), found });
        }
        Ok(())
    }

    pub fn require_few_shots(&self) -> Result<(), TemplateError> {
        if self.few_shots.is_empty() {
            return Err(TemplateError::NoFewShots(self.kind()));
        }
        Ok(())
    }
}

/// Renders the instruction with the statement substituted, then the few-shot
/// pairs as `original -> counterfactual` lines, then the constraints.
pub fn render_probe_prompt(template: &ProbeTemplate, statement: &str) -> Result<String, TemplateError> {
    template.validate()?;
    let mut out = template.instruction.replacen(PLACEHOLDER, statement, 1);
    if !template.few_shots.is_empty() {
        out.push_str("\n\nExamples:");
        for (original, counterfactual) in &template.few_shots {
            out.push_str(&format!("\n{original} -> {counterfactual}"));
        }
    }
    if !template.constraints.is_empty() {
        out.push_str("\n\nConstraints:");
        for c in &template.constraints {
            out.push_str(&format!("\n- {c}"));
        }
    }
    Ok(out)
}

/// Templates keyed by probe kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<ProbeKind, ProbeTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled templates are well-formed")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Load { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse(&text).map_err(|e| match e {
            TemplateError::Load { reason, .. } => TemplateError::Load { path: path.display().to_string(), reason },
            other => other,
        })
    }

    /// TOML tables named after probe kinds.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let load_err = |reason: String| TemplateError::Load { path: "<inline>".into(), reason };
        let raw: BTreeMap<String, ProbeTemplate> = toml::from_str(text).map_err(|e| load_err(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for (name, mut template) in raw {
            let kind: ProbeKind = name.parse().map_err(|e: crate::kind::UnknownProbeKind| load_err(e.to_string()))?;
            template.kind = Some(kind);
            template.validate()?;
            templates.insert(kind, template);
        }
        Ok(TemplateSet { templates })
    }

    pub fn get(&self, kind: ProbeKind) -> Option<&ProbeTemplate> {
        self.templates.get(&kind)
    }

    pub fn insert(&mut self, kind: ProbeKind, mut template: ProbeTemplate) {
        template.kind = Some(kind);
        self.templates.insert(kind, template);
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
