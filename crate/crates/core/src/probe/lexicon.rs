use std::collections::HashMap;
use std::path::Path;

use regex::Regex;

const BUILTIN: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot read lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub entities: Vec<String>,
}

/// Position of an entity found in a statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityMatch {
    pub start: usize,
    pub end: usize,
    pub category: usize,
    pub entity: usize,
}

/// Categories of interchangeable entities used for factual probes.
#[derive(Debug, Clone)]
pub struct ConfusableLexicon {
    categories: Vec<Category>,
    pattern: Option<Regex>,
    index: HashMap<String, (usize, usize)>,
}

impl ConfusableLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled lexicon is well-formed")
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parses `category<TAB>entity, entity, ...` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut categories = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| LexiconError::Malformed { line: n + 1, reason: reason.to_string() };
            let (name, list) = line.split_once('\t').ok_or_else(|| malformed("expected a tab after the category"))?;
            let entities: Vec<String> =
                list.split(',').map(str::trim).filter(|e| !e.is_empty()).map(str::to_string).collect();
            if name.trim().is_empty() {
                return Err(malformed("empty category name"));
            }
            if entities.len() < 2 {
                return Err(malformed("a category needs at least two entities"));
            }
            categories.push(Category { name: name.trim().to_string(), entities });
        }
        Ok(Self::from_categories(categories))
    }

    pub fn from_categories(categories: Vec<Category>) -> Self {
        let mut index = HashMap::new();
        for (c, cat) in categories.iter().enumerate() {
            for (e, entity) in cat.entities.iter().enumerate() {
                index.entry(entity.clone()).or_insert((c, e));
            }
        }
        let mut names: Vec<&String> = index.keys().collect();
        // Longest first so "World War II" wins over "World War I" at the same position.
        names.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let pattern = (!names.is_empty()).then(|| {
            let alt = names.iter().map(|n| regex::escape(n)).collect::<Vec<_>>().join("|");
            Regex::new(&format!(r"\b(?:{alt})\b")).expect("escaped alternation compiles")
        });
        ConfusableLexicon { categories, pattern, index }
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// Leftmost entity occurrence (longest at that position).
    pub fn first_match(&self, text: &str) -> Option<EntityMatch> {
        let m = self.pattern.as_ref()?.find(text)?;
        let &(category, entity) = self.index.get(m.as_str())?;
        Some(EntityMatch { start: m.start(), end: m.end(), category, entity })
    }

    pub fn entity(&self, m: &EntityMatch) -> &str {
        &self.categories[m.category].entities[m.entity]
    }

    /// Same-category alternatives for a match, in file order.
    pub fn confusables(&self, m: &EntityMatch) -> Vec<&str> {
        self.categories[m.category]
            .entities
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != m.entity)
            .map(|(_, e)| e.as_str())
            .collect()
    }

    pub fn starts_with_entity(&self, text: &str) -> bool {
        let trimmed = text.trim_start();
        self.first_match(trimmed).is_some_and(|m| m.start == 0)
    }
}

impl Default for ConfusableLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}
