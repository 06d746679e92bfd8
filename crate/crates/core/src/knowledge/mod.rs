//! Design reference cards and workshop interaction patterns.
//!
//! Both datasets are bundled TOML files, checked when first loaded. Queries
//! and statistics run over the immutable loaded data.

mod categories;

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use categories::{
    AffectCategory, BehaviorPrimitive, CardModule, IntentCategory, Species, TriggerType,
};

pub const PATTERN_COUNT: usize = 35;
pub const CARD_COUNT: usize = 8;

const CARDS_TOML: &str = include_str!("../../data/cards.toml");
const PATTERNS_TOML: &str = include_str!("../../data/patterns.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error("malformed dataset: {0}")]
    Parse(String),
    #[error("dataset check failed: {0}")]
    Invalid(String),
    #[error("no card with id {0:?}")]
    CardNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardSection {
    pub heading: String,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Card {
    pub id: String,
    pub module: CardModule,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Species>,
    pub sections: Vec<CardSection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionPattern {
    pub id: String,
    pub intent: IntentCategory,
    pub trigger: TriggerType,
    /// Primary behavior first.
    pub behaviors: Vec<BehaviorPrimitive>,
    pub affect: AffectCategory,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InteractionPattern {
    pub fn primary_behavior(&self) -> BehaviorPrimitive {
        self.behaviors[0]
    }
}

/// Conjunction of the given predicates; `behavior` matches the primary one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFilter {
    pub intent: Option<IntentCategory>,
    pub trigger: Option<TriggerType>,
    pub behavior: Option<BehaviorPrimitive>,
    pub affect: Option<AffectCategory>,
}

impl PatternFilter {
    pub fn matches(&self, p: &InteractionPattern) -> bool {
        self.intent.is_none_or(|v| v == p.intent)
            && self.trigger.is_none_or(|v| v == p.trigger)
            && self.behavior.is_none_or(|v| v == p.primary_behavior())
            && self.affect.is_none_or(|v| v == p.affect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCount {
    pub category: &'static str,
    pub label: &'static str,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternStats {
    pub total: usize,
    pub intent: Vec<CategoryCount>,
    pub trigger: Vec<CategoryCount>,
    pub behavior: Vec<CategoryCount>,
    pub affect: Vec<CategoryCount>,
    /// Share of patterns with a positive affect category.
    pub positive_affect_percent: f64,
}

impl PatternStats {
    pub fn rows(&self) -> impl Iterator<Item = (&'static str, &CategoryCount)> {
        let dims = [
            ("intent", &self.intent),
            ("trigger", &self.trigger),
            ("behavior", &self.behavior),
            ("affect", &self.affect),
        ];
        dims.into_iter()
            .flat_map(|(d, rows)| rows.iter().map(move |r| (d, r)))
    }
}

/// `100 * n / total` rounded half up to one decimal.
pub fn percent_1dp(n: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let tenths = (2000 * n + total) / (2 * total);
    tenths as f64 / 10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CardsFile {
    cards: Vec<Card>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternsFile {
    patterns: Vec<InteractionPattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    cards: Vec<Card>,
    patterns: Vec<InteractionPattern>,
}

/// Sort key for ids like `G5-1b`: group, index, suffix.
fn pattern_key(id: &str) -> Option<(u32, u32, String)> {
    let rest = id.strip_prefix('G')?;
    let (group, tail) = rest.split_once('-')?;
    let digits = tail.chars().take_while(char::is_ascii_digit).count();
    let (index, suffix) = tail.split_at(digits);
    if group.is_empty() || digits == 0 || !suffix.chars().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    Some((group.parse().ok()?, index.parse().ok()?, suffix.to_string()))
}

impl KnowledgeBase {
    pub fn from_toml(cards: &str, patterns: &str) -> Result<Self, KnowledgeError> {
        let cards: CardsFile =
            toml::from_str(cards).map_err(|e| KnowledgeError::Parse(e.to_string()))?;
        let patterns: PatternsFile =
            toml::from_str(patterns).map_err(|e| KnowledgeError::Parse(e.to_string()))?;
        let kb = KnowledgeBase {
            cards: cards.cards,
            patterns: patterns.patterns,
        };
        kb.check()?;
        Ok(kb)
    }

    fn check(&self) -> Result<(), KnowledgeError> {
        let invalid = |m: String| Err(KnowledgeError::Invalid(m));
        if self.cards.len() != CARD_COUNT {
            return invalid(format!(
                "expected {CARD_COUNT} cards, found {}",
                self.cards.len()
            ));
        }
        let mut ids = HashSet::new();
        for c in &self.cards {
            if !ids.insert(c.id.as_str()) {
                return invalid(format!("duplicate card id {}", c.id));
            }
            if (c.module == CardModule::AnimalCentric) != c.species.is_some() {
                return invalid(format!(
                    "card {}: species is set exactly for animal-centric cards",
                    c.id
                ));
            }
            if c.sections.is_empty() || c.sections.iter().any(|s| s.items.is_empty()) {
                return invalid(format!("card {} has an empty section", c.id));
            }
        }
        let count = |m: CardModule| self.cards.iter().filter(|c| c.module == m).count();
        let species = |s: Species| self.cards.iter().filter(|c| c.species == Some(s)).count();
        let shape = (
            count(CardModule::HumanCentric),
            count(CardModule::Environmental),
            count(CardModule::AnimalCentric),
            species(Species::Cat),
            species(Species::Dog),
        );
        if shape != (3, 1, 4, 2, 2) {
            return invalid(format!("card modules/species out of shape: {shape:?}"));
        }

        if self.patterns.len() != PATTERN_COUNT {
            return invalid(format!(
                "expected {PATTERN_COUNT} patterns, found {}",
                self.patterns.len()
            ));
        }
        let mut prev = None;
        for p in &self.patterns {
            let Some(key) = pattern_key(&p.id) else {
                return invalid(format!("bad pattern id {:?}", p.id));
            };
            if prev.as_ref().is_some_and(|k| *k >= key) {
                return invalid(format!("pattern {} is out of order or duplicated", p.id));
            }
            prev = Some(key);
            if p.behaviors.is_empty() {
                return invalid(format!("pattern {} has no behavior", p.id));
            }
            let unique: HashSet<_> = p.behaviors.iter().collect();
            if unique.len() != p.behaviors.len() {
                return invalid(format!("pattern {} repeats a behavior", p.id));
            }
        }
        Ok(())
    }

    pub fn cards(&self) -> &[Card] {
        &self.cards
    }

    pub fn patterns(&self) -> &[InteractionPattern] {
        &self.patterns
    }

    pub fn list_cards(&self, module: Option<CardModule>) -> Vec<&Card> {
        self.cards
            .iter()
            .filter(|c| module.is_none_or(|m| c.module == m))
            .collect()
    }

    pub fn lookup_card(&self, id: &str) -> Result<&Card, KnowledgeError> {
        self.cards
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| KnowledgeError::CardNotFound(id.to_string()))
    }

    pub fn pattern(&self, id: &str) -> Option<&InteractionPattern> {
        self.patterns.iter().find(|p| p.id == id)
    }

    /// Matching patterns in dataset (id) order.
    pub fn query_patterns(&self, filter: &PatternFilter) -> Vec<&InteractionPattern> {
        self.patterns.iter().filter(|p| filter.matches(p)).collect()
    }

    pub fn compute_stats(&self) -> PatternStats {
        let total = self.patterns.len();
        let rows = |cats: Vec<(&'static str, &'static str, usize)>| {
            cats.into_iter()
                .map(|(category, label, count)| CategoryCount {
                    category,
                    label,
                    count,
                    percent: percent_1dp(count, total),
                })
                .collect::<Vec<_>>()
        };
        let ps = &self.patterns;
        let positive = ps.iter().filter(|p| p.affect.is_positive()).count();
        PatternStats {
            total,
            intent: rows(
                IntentCategory::ALL
                    .iter()
                    .map(|&c| {
                        (
                            c.name(),
                            c.label(),
                            ps.iter().filter(|p| p.intent == c).count(),
                        )
                    })
                    .collect(),
            ),
            trigger: rows(
                TriggerType::ALL
                    .iter()
                    .map(|&c| {
                        (
                            c.name(),
                            c.label(),
                            ps.iter().filter(|p| p.trigger == c).count(),
                        )
                    })
                    .collect(),
            ),
            behavior: rows(
                BehaviorPrimitive::ALL
                    .iter()
                    .map(|&c| {
                        (
                            c.name(),
                            c.label(),
                            ps.iter().filter(|p| p.primary_behavior() == c).count(),
                        )
                    })
                    .collect(),
            ),
            affect: rows(
                AffectCategory::ALL
                    .iter()
                    .map(|&c| {
                        (
                            c.name(),
                            c.label(),
                            ps.iter().filter(|p| p.affect == c).count(),
                        )
                    })
                    .collect(),
            ),
            positive_affect_percent: percent_1dp(positive, total),
        }
    }
}

/// The bundled dataset. Panics if the bundled files fail their checks.
pub fn knowledge() -> &'static KnowledgeBase {
    static KB: OnceLock<KnowledgeBase> = OnceLock::new();
    KB.get_or_init(|| {
        KnowledgeBase::from_toml(CARDS_TOML, PATTERNS_TOML).expect("bundled knowledge base")
    })
}

pub fn query_patterns(filter: &PatternFilter) -> Vec<&'static InteractionPattern> {
    knowledge().query_patterns(filter)
}

pub fn compute_stats() -> PatternStats {
    knowledge().compute_stats()
}

pub fn lookup_card(id: &str) -> Result<&'static Card, KnowledgeError> {
    knowledge().lookup_card(id)
}

pub fn list_cards(module: Option<CardModule>) -> Vec<&'static Card> {
    knowledge().list_cards(module)
}
