//! Proximity semantics: deictic reference resolution over canvas items.
//!
//! Two items are bound when their distance in some measurable space (canvas,
//! semantic, temporal) is within that space's threshold. Connectors such as
//! arrows collapse canvas distance between the items at their two ends.
//! Resolution follows binding chains from a query item and collects every
//! reachable glyph or data region.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Glyph,
    Text,
    DataRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsElement {
    pub id: String,
    pub kind: ElementKind,
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

impl PsElement {
    pub fn glyph(id: &str, x: f64, y: f64) -> Self {
        PsElement {
            id: id.to_string(),
            kind: ElementKind::Glyph,
            position: [x, y],
            text: None,
            timestamp: None,
        }
    }

    pub fn text(id: &str, text: &str, x: f64, y: f64) -> Self {
        PsElement {
            id: id.to_string(),
            kind: ElementKind::Text,
            position: [x, y],
            text: Some(text.to_string()),
            timestamp: None,
        }
    }

    pub fn region(id: &str, x: f64, y: f64) -> Self {
        PsElement {
            kind: ElementKind::DataRegion,
            ..PsElement::glyph(id, x, y)
        }
    }

    pub fn at_time(mut self, seconds: f64) -> Self {
        self.timestamp = Some(seconds);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kind == ElementKind::Text && self.text.is_none() {
            return Err(format!("text element `{}` has no text", self.id));
        }
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(format!("element `{}` has a non-finite position", self.id));
        }
        Ok(())
    }

    fn is_referent(&self) -> bool {
        matches!(self.kind, ElementKind::Glyph | ElementKind::DataRegion)
    }
}

/// An arrow or line whose ends collapse canvas distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsConnector {
    pub from_anchor: [f64; 2],
    pub to_anchor: [f64; 2],
}

pub const DEFAULT_CANVAS_FRACTION: f64 = 0.05;
pub const DEFAULT_SNAP_FRACTION: f64 = 0.02;
pub const DEFAULT_SEMANTIC_THRESHOLD: f64 = 0.34;
pub const DEFAULT_TEMPORAL_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum PsSpace {
    /// Euclidean canvas distance; `snap_radius` decides whether a connector
    /// end touches an element.
    Canvas { threshold: f64, snap_radius: f64 },
    /// Normalized edit distance between texts, in `[0, 1]`.
    Semantic { threshold: f64 },
    /// Absolute timestamp difference in seconds.
    Temporal { threshold: f64 },
}

impl PsSpace {
    /// Canvas space with thresholds relative to the canvas diagonal.
    pub fn canvas_for(width: f64, height: f64) -> Self {
        let diag = width.hypot(height);
        PsSpace::Canvas {
            threshold: DEFAULT_CANVAS_FRACTION * diag,
            snap_radius: DEFAULT_SNAP_FRACTION * diag,
        }
    }

    pub fn semantic() -> Self {
        PsSpace::Semantic {
            threshold: DEFAULT_SEMANTIC_THRESHOLD,
        }
    }

    pub fn temporal() -> Self {
        PsSpace::Temporal {
            threshold: DEFAULT_TEMPORAL_THRESHOLD,
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            PsSpace::Canvas { threshold, .. }
            | PsSpace::Semantic { threshold }
            | PsSpace::Temporal { threshold } => threshold,
        }
    }

    pub fn with_threshold(self, t: f64) -> Self {
        match self {
            PsSpace::Canvas { snap_radius, .. } => PsSpace::Canvas {
                threshold: t,
                snap_radius,
            },
            PsSpace::Semantic { .. } => PsSpace::Semantic { threshold: t },
            PsSpace::Temporal { .. } => PsSpace::Temporal { threshold: t },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    Zero,
    One,
    Many,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionSet {
    pub candidates: BTreeSet<String>,
    pub cardinality: Cardinality,
}

impl ResolutionSet {
    pub fn new(candidates: BTreeSet<String>) -> Self {
        let cardinality = match candidates.len() {
            0 => Cardinality::Zero,
            1 => Cardinality::One,
            _ => Cardinality::Many,
        };
        ResolutionSet {
            candidates,
            cardinality,
        }
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance over the longer length, after trimming and case folding.
pub fn semantic_distance(a: &str, b: &str) -> f64 {
    let a = a.trim().to_lowercase();
    let b = b.trim().to_lowercase();
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(&a, &b) as f64 / longest as f64
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance between two elements within one space; incomparable pairs are
/// infinitely far apart.
pub fn effective_distance(a: &PsElement, b: &PsElement, connectors: &[PsConnector], space: &PsSpace) -> f64 {
    match *space {
        PsSpace::Canvas { snap_radius, .. } => {
            let touches = |anchor: [f64; 2], e: &PsElement| euclid(anchor, e.position) <= snap_radius;
            let linked = connectors.iter().any(|c| {
                (touches(c.from_anchor, a) && touches(c.to_anchor, b))
                    || (touches(c.from_anchor, b) && touches(c.to_anchor, a))
            });
            if linked {
                0.0
            } else {
                euclid(a.position, b.position)
            }
        }
        PsSpace::Semantic { .. } => match (&a.text, &b.text) {
            (Some(x), Some(y)) => semantic_distance(x, y),
            _ => f64::INFINITY,
        },
        PsSpace::Temporal { .. } => match (a.timestamp, b.timestamp) {
            (Some(x), Some(y)) => (x - y).abs(),
            _ => f64::INFINITY,
        },
    }
}

/// Undirected binding edges among `items` (index pairs, `i < j`).
pub fn binding_edges(
    items: &[&PsElement],
    connectors: &[PsConnector],
    spaces: &[PsSpace],
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let bound = spaces
                .iter()
                .any(|s| effective_distance(items[i], items[j], connectors, s) <= s.threshold());
            if bound {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Everything a query reaches through binding chains, restricted to glyphs
/// and data regions. Chains may alternate between spaces freely.
pub fn resolve(
    query: &PsElement,
    elements: &[PsElement],
    connectors: &[PsConnector],
    spaces: &[PsSpace],
) -> ResolutionSet {
    let items: Vec<&PsElement> = std::iter::once(query)
        .chain(elements.iter().filter(|e| e.id != query.id))
        .collect();
    let edges = binding_edges(&items, connectors, spaces);
    let mut adjacency = vec![Vec::new(); items.len()];
    for &(i, j) in &edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut seen = vec![false; items.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let candidates = items
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, e)| seen[*i] && e.is_referent())
        .map(|(_, e)| e.id.clone())
        .collect();
    ResolutionSet::new(candidates)
}

/// A full resolution request: the query element is named by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsScene {
    pub query: String,
    pub elements: Vec<PsElement>,
    #[serde(default)]
    pub connectors: Vec<PsConnector>,
    pub spaces: Vec<PsSpace>,
}

impl PsScene {
    pub fn resolve(&self) -> Result<ResolutionSet, String> {
        for e in &self.elements {
            e.validate()?;
        }
        for s in &self.spaces {
            if !(s.threshold() >= 0.0) {
                return Err(format!("negative threshold in {s:?}"));
            }
        }
        let query = self
            .elements
            .iter()
            .find(|e| e.id == self.query)
            .ok_or_else(|| format!("query element `{}` not found", self.query))?;
        Ok(resolve(query, &self.elements, &self.connectors, &self.spaces))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semantic_distance_cases() {
        assert_eq!(semantic_distance("Wrench", "Wrench"), 0.0);
        assert!((semantic_distance("PPliers", "Pliers") - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(semantic_distance("  HAMMER ", "hammer"), 0.0);
        assert_eq!(semantic_distance("", ""), 0.0);
        assert_eq!(semantic_distance("", "abc"), 1.0);
        // Hand-computed edit distances for the unmatched query.
        assert_eq!(levenshtein("query 3", "wrench"), 6);
        assert!(semantic_distance("Query 3", "Wrench") > DEFAULT_SEMANTIC_THRESHOLD);
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
    }

    #[test]
    fn connector_collapses_canvas_distance() {
        let label = PsElement::text("label", "Wrench", 0.0, 0.0);
        let icon = PsElement::glyph("wrench", 500.0, 400.0);
        let arrow = PsConnector {
            from_anchor: [2.0, 1.0],
            to_anchor: [499.0, 398.0],
        };
        let canvas = PsSpace::Canvas {
            threshold: 10.0,
            snap_radius: 5.0,
        };
        assert_eq!(effective_distance(&label, &icon, &[arrow.clone()], &canvas), 0.0);
        assert_eq!(effective_distance(&icon, &label, &[arrow], &canvas), 0.0);
        assert!(effective_distance(&label, &icon, &[], &canvas) > 600.0);
    }

    #[test]
    fn incomparable_pairs_are_infinite() {
        let glyph = PsElement::glyph("g", 0.0, 0.0);
        let text = PsElement::text("t", "Hammer", 0.0, 0.0);
        assert_eq!(
            effective_distance(&glyph, &text, &[], &PsSpace::semantic()),
            f64::INFINITY
        );
        assert_eq!(
            effective_distance(&glyph, &text, &[], &PsSpace::temporal()),
            f64::INFINITY
        );
        let twin = PsElement::text("u", "Hammer", 90.0, 90.0);
        assert_eq!(effective_distance(&twin, &text, &[], &PsSpace::semantic()), 0.0);
    }

    #[test]
    fn temporal_binding() {
        let a = PsElement::text("a", "this", 0.0, 0.0).at_time(100.0);
        let b = PsElement::glyph("b", 900.0, 900.0).at_time(130.0);
        let r = resolve(&a, &[b], &[], &[PsSpace::temporal()]);
        assert_eq!(r.cardinality, Cardinality::One);
    }

    #[test]
    fn scene_requires_known_query() {
        let scene = PsScene {
            query: "missing".into(),
            elements: vec![PsElement::glyph("g", 0.0, 0.0)],
            connectors: vec![],
            spaces: vec![PsSpace::semantic()],
        };
        assert!(scene.resolve().is_err());
    }

    #[test]
    fn space_json_shape() {
        let json = serde_json::to_string(&PsSpace::Canvas {
            threshold: 50.0,
            snap_radius: 20.0,
        })
        .unwrap();
        assert_eq!(json, r#"{"space":"canvas","threshold":50.0,"snap_radius":20.0}"#);
    }
}
