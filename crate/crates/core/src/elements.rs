//! Game-element catalog, expert tallies and the core → element mapping.
//!
//! The catalog is the five-dimension taxonomy of elements usable in
//! learning environments. Expert tallies record, per cognitive core and
//! dimension, how often each element was selected as suitable. The mapping
//! derivation picks the most-voted feasible element in each configured
//! dimension of a core; the resulting [`ElementMapping`] is a total map from
//! the four cores to ordered element tuples.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::assessment::CognitiveCore;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.toml");
const DEFAULT_TALLIES: &str = include_str!("../data/tallies.csv");
const DEFAULT_DERIVATION: &str = include_str!("../data/derivation.toml");
const DEPLOYED_MAPPING: &str = include_str!("../data/deployed_mapping.toml");

/// Well-known element ids of the shipped catalog.
pub mod ids {
    pub const CHANCE: &str = "chance";
    pub const CHOICE: &str = "choice";
    pub const ECONOMY: &str = "economy";
    pub const RARITY: &str = "rarity";
    pub const TIME_PRESSURE: &str = "time_pressure";
    pub const COMPETITION: &str = "competition";
    pub const COOPERATION: &str = "cooperation";
    pub const REPUTATION: &str = "reputation";
    pub const SOCIAL_PRESSURE: &str = "social_pressure";
    pub const SENSATION: &str = "sensation";
    pub const OBJECTIVE: &str = "objective";
    pub const PUZZLE: &str = "puzzle";
    pub const NOVELTY: &str = "novelty";
    pub const RENOVATION: &str = "renovation";
    pub const AVATAR: &str = "avatar";
    pub const STORYTELLING: &str = "storytelling";
    pub const NARRATIVE: &str = "narrative";
    pub const POINTS: &str = "points";
    pub const PROGRESSION: &str = "progression";
    pub const LEVEL: &str = "level";
    pub const STATS: &str = "stats";
    pub const ACKNOWLEDGEMENT: &str = "acknowledgement";
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot parse catalog: {0}")]
    Parse(String),
    #[error("element id {0:?} defined twice")]
    DuplicateElement(String),
    #[error("name or alias {alias:?} refers to both {first} and {second}")]
    AmbiguousAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("dimension {0} listed twice")]
    DuplicateDimension(Dimension),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerivationError {
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("element {element} belongs to {actual}, not {stated}")]
    WrongDimension {
        element: String,
        stated: Dimension,
        actual: Dimension,
    },
    #[error("tally for {core}/{dimension} lists {element} twice")]
    DuplicateVote {
        core: CognitiveCore,
        dimension: Dimension,
        element: String,
    },
    #[error("every candidate in {core}/{dimension} is excluded or unvoted")]
    NoCandidate {
        core: CognitiveCore,
        dimension: Dimension,
    },
    #[error("no tally recorded for {core}/{dimension}")]
    MissingTally {
        core: CognitiveCore,
        dimension: Dimension,
    },
    #[error("mapping is not total: no tuple for {0:?}")]
    NotTotal(Vec<CognitiveCore>),
    #[error("tuple for {0} is empty")]
    EmptyTuple(CognitiveCore),
    #[error("dimension subset for {0} is empty")]
    EmptySubset(CognitiveCore),
    #[error("dimension {dimension} repeated in subset for {core}")]
    RepeatedDimension {
        core: CognitiveCore,
        dimension: Dimension,
    },
    #[error("unknown tie-break rule {0:?}")]
    UnknownTieBreak(String),
    #[error("cannot parse {what}: {message}")]
    Parse { what: &'static str, message: String },
}

/// Taxonomy dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Performance,
    Ecological,
    Social,
    Personal,
    Fictional,
}

impl Dimension {
    /// Canonical order used when a subset is given without an order of its own.
    pub const CANONICAL_ORDER: [Dimension; 5] = [
        Self::Ecological,
        Self::Social,
        Self::Personal,
        Self::Performance,
        Self::Fictional,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Performance => "performance",
            Self::Ecological => "ecological",
            Self::Social => "social",
            Self::Personal => "personal",
            Self::Fictional => "fictional",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = DerivationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "performance" | "performancemeasurement" | "performanceandmeasurement" => {
                Ok(Self::Performance)
            }
            "ecological" | "environment" => Ok(Self::Ecological),
            "social" => Ok(Self::Social),
            "personal" => Ok(Self::Personal),
            "fictional" | "fiction" => Ok(Self::Fictional),
            _ => Err(DerivationError::UnknownDimension(s.to_string())),
        }
    }
}

/// Stable identifier of a catalog element, e.g. `time_pressure`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for ElementId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for ElementId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameElement {
    pub element_id: ElementId,
    pub name: String,
    pub dimension: Dimension,
    pub description: String,
    /// 1-based position within the dimension's listing.
    pub catalog_rank: u32,
    /// Content-variant tag this element selects, if it is a content selector.
    pub variant_tag: Option<String>,
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    dimensions: Vec<DimensionEntry>,
}

#[derive(Debug, Deserialize)]
struct DimensionEntry {
    name: Dimension,
    #[serde(default)]
    #[allow(dead_code)]
    description: String,
    elements: Vec<ElementEntry>,
}

#[derive(Debug, Deserialize)]
struct ElementEntry {
    id: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    variant: Option<String>,
    #[serde(default)]
    description: String,
}

/// The element taxonomy. Immutable after load.
#[derive(Debug, Clone)]
pub struct ElementCatalog {
    elements: Vec<GameElement>,
    lookup: HashMap<String, usize>,
}

impl ElementCatalog {
    pub fn from_toml(src: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile =
            toml::from_str(src).map_err(|e| CatalogError::Parse(e.to_string()))?;
        let mut elements = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let mut dims = BTreeSet::new();
        for dim in file.dimensions {
            if !dims.insert(dim.name) {
                return Err(CatalogError::DuplicateDimension(dim.name));
            }
            for (rank, e) in dim.elements.into_iter().enumerate() {
                let idx = elements.len();
                if elements.iter().any(|g: &GameElement| g.element_id.0 == e.id) {
                    return Err(CatalogError::DuplicateElement(e.id));
                }
                let keys = std::iter::once(e.id.as_str())
                    .chain(std::iter::once(e.name.as_str()))
                    .chain(e.aliases.iter().map(String::as_str));
                for key in keys {
                    let k = normalize(key);
                    match lookup.get(&k) {
                        Some(&other) if other != idx => {
                            return Err(CatalogError::AmbiguousAlias {
                                alias: key.to_string(),
                                first: elements[other].element_id.to_string(),
                                second: e.id.clone(),
                            })
                        }
                        _ => {
                            lookup.insert(k, idx);
                        }
                    }
                }
                elements.push(GameElement {
                    element_id: ElementId(e.id),
                    name: e.name,
                    dimension: dim.name,
                    description: e.description,
                    catalog_rank: rank as u32 + 1,
                    variant_tag: e.variant,
                });
            }
        }
        Ok(Self { elements, lookup })
    }

    /// The shipped taxonomy.
    pub fn standard() -> Self {
        Self::from_toml(DEFAULT_CATALOG).expect("shipped catalog is valid")
    }

    pub fn elements(&self) -> &[GameElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Look up an element by id, display name, or alias (case and
    /// punctuation insensitive).
    pub fn resolve(&self, name: &str) -> Option<&GameElement> {
        self.lookup.get(&normalize(name)).map(|&i| &self.elements[i])
    }

    pub fn get(&self, id: &ElementId) -> Option<&GameElement> {
        self.elements.iter().find(|e| &e.element_id == id)
    }

    pub fn in_dimension(&self, dimension: Dimension) -> impl Iterator<Item = &GameElement> {
        self.elements.iter().filter(move |e| e.dimension == dimension)
    }

    /// The element selecting a given content-variant tag.
    pub fn by_variant_tag(&self, tag: &str) -> Option<&GameElement> {
        self.elements
            .iter()
            .find(|e| e.variant_tag.as_deref() == Some(tag))
    }

    fn resolve_id(&self, name: &str) -> Result<ElementId, DerivationError> {
        self.resolve(name)
            .map(|e| e.element_id.clone())
            .ok_or_else(|| DerivationError::UnknownElement(name.to_string()))
    }
}

/// Votes per element for one (core, dimension) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpertTally {
    pub core: CognitiveCore,
    pub dimension: Dimension,
    pub votes: BTreeMap<ElementId, u32>,
}

#[derive(Debug, Deserialize)]
struct TallyRow {
    core: String,
    dimension: String,
    element: String,
    votes: u32,
}

fn parse_core(s: &str) -> Result<CognitiveCore, DerivationError> {
    s.parse().map_err(|_| DerivationError::Parse {
        what: "cognitive core",
        message: s.to_string(),
    })
}

/// Parse a `core,dimension,element,votes` tally table.
pub fn parse_tallies(
    csv_src: &str,
    catalog: &ElementCatalog,
) -> Result<Vec<ExpertTally>, DerivationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_src.as_bytes());
    let mut grouped: BTreeMap<(CognitiveCore, Dimension), BTreeMap<ElementId, u32>> =
        BTreeMap::new();
    for row in reader.deserialize::<TallyRow>() {
        let row = row.map_err(|e| DerivationError::Parse {
            what: "tally table",
            message: e.to_string(),
        })?;
        let core = parse_core(&row.core)?;
        let dimension: Dimension = row.dimension.parse()?;
        let element = catalog
            .resolve(&row.element)
            .ok_or_else(|| DerivationError::UnknownElement(row.element.clone()))?;
        if element.dimension != dimension {
            return Err(DerivationError::WrongDimension {
                element: element.element_id.to_string(),
                stated: dimension,
                actual: element.dimension,
            });
        }
        let votes = grouped.entry((core, dimension)).or_default();
        if votes.insert(element.element_id.clone(), row.votes).is_some() {
            return Err(DerivationError::DuplicateVote {
                core,
                dimension,
                element: element.element_id.to_string(),
            });
        }
    }
    Ok(grouped
        .into_iter()
        .map(|((core, dimension), votes)| ExpertTally {
            core,
            dimension,
            votes,
        })
        .collect())
}

/// The shipped expert tallies.
pub fn standard_tallies(catalog: &ElementCatalog) -> Vec<ExpertTally> {
    parse_tallies(DEFAULT_TALLIES, catalog).expect("shipped tallies are valid")
}

/// One expert's multi-select answer for one (core, dimension) question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertSelection {
    pub expert: String,
    pub core: CognitiveCore,
    pub dimension: Dimension,
    pub selected: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SelectionRow {
    expert: String,
    core: String,
    dimension: String,
    selections: String,
}

/// Parse raw questionnaire answers: `expert,core,dimension,selections`, with
/// selections separated by `;`.
pub fn parse_selections(csv_src: &str) -> Result<Vec<ExpertSelection>, DerivationError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_src.as_bytes());
    reader
        .deserialize::<SelectionRow>()
        .map(|row| {
            let row = row.map_err(|e| DerivationError::Parse {
                what: "selection table",
                message: e.to_string(),
            })?;
            Ok(ExpertSelection {
                expert: row.expert,
                core: parse_core(&row.core)?,
                dimension: row.dimension.parse()?,
                selected: row
                    .selections
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            })
        })
        .collect()
}

/// Count selections into tallies. Every element of a dimension that was
/// asked about appears in its tally, with zero votes if never selected.
pub fn aggregate_selections(
    selections: &[ExpertSelection],
    catalog: &ElementCatalog,
) -> Result<Vec<ExpertTally>, DerivationError> {
    let mut grouped: BTreeMap<(CognitiveCore, Dimension), BTreeMap<ElementId, u32>> =
        BTreeMap::new();
    for sel in selections {
        let votes = grouped.entry((sel.core, sel.dimension)).or_insert_with(|| {
            catalog
                .in_dimension(sel.dimension)
                .map(|e| (e.element_id.clone(), 0))
                .collect()
        });
        let mut seen = BTreeSet::new();
        for name in &sel.selected {
            let element = catalog
                .resolve(name)
                .ok_or_else(|| DerivationError::UnknownElement(name.clone()))?;
            if element.dimension != sel.dimension {
                return Err(DerivationError::WrongDimension {
                    element: element.element_id.to_string(),
                    stated: sel.dimension,
                    actual: element.dimension,
                });
            }
            // A repeated tick in one answer counts once.
            if seen.insert(element.element_id.clone()) {
                *votes.entry(element.element_id.clone()).or_insert(0) += 1;
            }
        }
    }
    Ok(grouped
        .into_iter()
        .map(|((core, dimension), votes)| ExpertTally {
            core,
            dimension,
            votes,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    CatalogRankAscending,
}

impl FromStr for TieBreak {
    type Err = DerivationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "catalog_rank_ascending" => Ok(Self::CatalogRankAscending),
            other => Err(DerivationError::UnknownTieBreak(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationConfig {
    pub feasibility_exclusions: BTreeSet<ElementId>,
    /// Dimensions consulted per core. The derived tuple follows list order.
    pub dimension_subsets: BTreeMap<CognitiveCore, Vec<Dimension>>,
    pub tie_break: TieBreak,
}

#[derive(Debug, Deserialize)]
struct DerivationFile {
    #[serde(default)]
    exclusions: Vec<String>,
    #[serde(default)]
    tie_break: Option<String>,
    subsets: BTreeMap<String, Vec<String>>,
}

impl DerivationConfig {
    pub fn from_toml(src: &str, catalog: &ElementCatalog) -> Result<Self, DerivationError> {
        let file: DerivationFile = toml::from_str(src).map_err(|e| DerivationError::Parse {
            what: "derivation config",
            message: e.to_string(),
        })?;
        let feasibility_exclusions = file
            .exclusions
            .iter()
            .map(|n| catalog.resolve_id(n))
            .collect::<Result<_, _>>()?;
        let mut dimension_subsets = BTreeMap::new();
        for (core, dims) in file.subsets {
            let core = parse_core(&core)?;
            let dims = dims
                .iter()
                .map(|d| d.parse())
                .collect::<Result<Vec<Dimension>, _>>()?;
            dimension_subsets.insert(core, dims);
        }
        let tie_break = match file.tie_break {
            Some(t) => t.parse()?,
            None => TieBreak::default(),
        };
        let config = Self {
            feasibility_exclusions,
            dimension_subsets,
            tie_break,
        };
        config.validate()?;
        Ok(config)
    }

    /// The shipped configuration.
    pub fn standard(catalog: &ElementCatalog) -> Self {
        Self::from_toml(DEFAULT_DERIVATION, catalog).expect("shipped derivation config is valid")
    }

    /// Every core consults all five dimensions in canonical order; nothing excluded.
    pub fn all_dimensions() -> Self {
        Self {
            feasibility_exclusions: BTreeSet::new(),
            dimension_subsets: CognitiveCore::ALL
                .iter()
                .map(|&c| (c, Dimension::CANONICAL_ORDER.to_vec()))
                .collect(),
            tie_break: TieBreak::CatalogRankAscending,
        }
    }

    pub fn validate(&self) -> Result<(), DerivationError> {
        for (&core, dims) in &self.dimension_subsets {
            if dims.is_empty() {
                return Err(DerivationError::EmptySubset(core));
            }
            let mut seen = BTreeSet::new();
            for &d in dims {
                if !seen.insert(d) {
                    return Err(DerivationError::RepeatedDimension { core, dimension: d });
                }
            }
        }
        Ok(())
    }
}

/// Most-voted non-excluded element of a tally; ties go to the lower catalog rank.
pub fn dimension_winner<'c>(
    catalog: &'c ElementCatalog,
    tally: &ExpertTally,
    exclusions: &BTreeSet<ElementId>,
) -> Result<&'c GameElement, DerivationError> {
    let mut best: Option<(&GameElement, u32)> = None;
    for (id, &votes) in &tally.votes {
        if exclusions.contains(id) {
            continue;
        }
        let element = catalog
            .get(id)
            .ok_or_else(|| DerivationError::UnknownElement(id.to_string()))?;
        let better = match best {
            None => true,
            Some((b, bv)) => votes > bv || (votes == bv && element.catalog_rank < b.catalog_rank),
        };
        if better {
            best = Some((element, votes));
        }
    }
    best.map(|(e, _)| e).ok_or(DerivationError::NoCandidate {
        core: tally.core,
        dimension: tally.dimension,
    })
}

/// Derive the core → element mapping from expert tallies.
pub fn derive_mapping(
    catalog: &ElementCatalog,
    tallies: &[ExpertTally],
    config: &DerivationConfig,
) -> Result<ElementMapping, DerivationError> {
    config.validate()?;
    let missing: Vec<CognitiveCore> = CognitiveCore::ALL
        .iter()
        .copied()
        .filter(|c| !config.dimension_subsets.contains_key(c))
        .collect();
    if !missing.is_empty() {
        return Err(DerivationError::NotTotal(missing));
    }
    let mut entries = BTreeMap::new();
    for (&core, dims) in &config.dimension_subsets {
        let mut tuple = Vec::with_capacity(dims.len());
        for &dimension in dims {
            let tally = tallies
                .iter()
                .find(|t| t.core == core && t.dimension == dimension)
                .ok_or(DerivationError::MissingTally { core, dimension })?;
            let winner = match config.tie_break {
                TieBreak::CatalogRankAscending => {
                    dimension_winner(catalog, tally, &config.feasibility_exclusions)?
                }
            };
            tuple.push(winner.element_id.clone());
        }
        entries.insert(core, tuple);
    }
    ElementMapping::new(entries, catalog)
}

/// Total map from cognitive core to an ordered, non-empty element tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ElementMapping {
    entries: BTreeMap<CognitiveCore, Vec<ElementId>>,
}

impl ElementMapping {
    pub fn new(
        entries: BTreeMap<CognitiveCore, Vec<ElementId>>,
        catalog: &ElementCatalog,
    ) -> Result<Self, DerivationError> {
        let missing: Vec<CognitiveCore> = CognitiveCore::ALL
            .iter()
            .copied()
            .filter(|c| !entries.contains_key(c))
            .collect();
        if !missing.is_empty() {
            return Err(DerivationError::NotTotal(missing));
        }
        for (&core, tuple) in &entries {
            if tuple.is_empty() {
                return Err(DerivationError::EmptyTuple(core));
            }
            for id in tuple {
                if catalog.get(id).is_none() {
                    return Err(DerivationError::UnknownElement(id.to_string()));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Parse `CORE = ["element", ...]` lines, resolving names through the catalog.
    pub fn from_toml(src: &str, catalog: &ElementCatalog) -> Result<Self, DerivationError> {
        let raw: BTreeMap<String, Vec<String>> =
            toml::from_str(src).map_err(|e| DerivationError::Parse {
                what: "element mapping",
                message: e.to_string(),
            })?;
        let mut entries = BTreeMap::new();
        for (core, names) in raw {
            let tuple = names
                .iter()
                .map(|n| catalog.resolve_id(n))
                .collect::<Result<Vec<_>, _>>()?;
            entries.insert(parse_core(&core)?, tuple);
        }
        Self::new(entries, catalog)
    }

    /// The mapping used by the deployed course.
    pub fn deployed() -> Self {
        Self::from_toml(DEPLOYED_MAPPING, &ElementCatalog::standard())
            .expect("shipped mapping is valid")
    }

    /// Every core gets the same tuple.
    pub fn uniform(tuple: Vec<ElementId>, catalog: &ElementCatalog) -> Result<Self, DerivationError> {
        Self::new(
            CognitiveCore::ALL.iter().map(|&c| (c, tuple.clone())).collect(),
            catalog,
        )
    }

    pub fn active_elements(&self, core: CognitiveCore) -> &[ElementId] {
        // Totality is checked at construction.
        &self.entries[&core]
    }

    pub fn iter(&self) -> impl Iterator<Item = (CognitiveCore, &[ElementId])> {
        self.entries.iter().map(|(&c, t)| (c, t.as_slice()))
    }
}
