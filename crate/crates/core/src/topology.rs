//! Road-network abstraction: cities, weighted undirected edges and the
//! all-pairs shortest-distance oracle every cost computation goes through.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CityId = usize;

pub const TOPOLOGY_FORMAT_VERSION: u32 = 1;

/// Names of the topologies shipped with the crate.
pub const BUNDLED_TOPOLOGIES: [&str; 4] = ["switzerland", "france", "great_britain", "netherlands"];

const SWITZERLAND: &str = include_str!("../topologies/switzerland.json");
const FRANCE: &str = include_str!("../topologies/france.json");
const GREAT_BRITAIN: &str = include_str!("../topologies/great_britain.json");
const NETHERLANDS: &str = include_str!("../topologies/netherlands.json");

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Malformed(String),
    #[error("unsupported topology format_version {0}")]
    UnsupportedVersion(u32),
    #[error("topology has no cities")]
    Empty,
    #[error("city ids must be dense 0..{expected}: city `{name}` has id {id}")]
    NonDenseIds { id: usize, name: String, expected: usize },
    #[error("duplicate city name `{0}`")]
    DuplicateName(String),
    #[error("edge #{index} references unknown city {city}")]
    UnknownCity { index: usize, city: usize },
    #[error("edge #{index} ({a}-{b}) has non-positive length {km}")]
    NonPositiveEdge { index: usize, a: usize, b: usize, km: f64 },
    #[error("edge #{index} is a self-loop on city {city}")]
    SelfLoop { index: usize, city: usize },
    #[error("graph is disconnected: `{from}` cannot reach `{to}`")]
    Disconnected { from: String, to: String },
    #[error("empty city set")]
    EmptyCitySet,
    #[error("unknown topology `{0}` (not bundled and not a readable file)")]
    NotFound(String),
    #[error("failed to read topology: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct City {
    pub id: CityId,
    pub name: String,
    pub x_km: f64,
    pub y_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: CityId,
    pub b: CityId,
    pub km: f64,
}

fn default_format_version() -> u32 {
    TOPOLOGY_FORMAT_VERSION
}

/// On-disk form of a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub cities: Vec<City>,
    pub edges: Vec<Edge>,
}

/// Dense row-major |V|x|V| matrix of shortest-path lengths in km.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    km: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from explicit rows. Used for synthetic instances where
    /// the metric is given directly.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "distance matrix must be square");
        Self {
            n,
            km: rows.into_iter().flatten().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: CityId, b: CityId) -> f64 {
        self.km[a * self.n + b]
    }
}

impl Index<(CityId, CityId)> for DistanceMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (a, b): (CityId, CityId)) -> &f64 {
        &self.km[a * self.n + b]
    }
}

/// Immutable, validated road network with precomputed shortest distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    name: String,
    description: Option<String>,
    cities: Vec<City>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<CityId>>,
    dist: DistanceMatrix,
}

impl Topology {
    pub fn from_doc(doc: TopologyDoc) -> Result<Self, TopologyError> {
        if doc.format_version != TOPOLOGY_FORMAT_VERSION {
            return Err(TopologyError::UnsupportedVersion(doc.format_version));
        }
        let n = doc.cities.len();
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let mut names = HashSet::new();
        for (i, city) in doc.cities.iter().enumerate() {
            if city.id != i {
                return Err(TopologyError::NonDenseIds {
                    id: city.id,
                    name: city.name.clone(),
                    expected: n,
                });
            }
            if !names.insert(city.name.as_str()) {
                return Err(TopologyError::DuplicateName(city.name.clone()));
            }
        }
        for (index, e) in doc.edges.iter().enumerate() {
            for city in [e.a, e.b] {
                if city >= n {
                    return Err(TopologyError::UnknownCity { index, city });
                }
            }
            if e.a == e.b {
                return Err(TopologyError::SelfLoop { index, city: e.a });
            }
            if !(e.km > 0.0 && e.km.is_finite()) {
                return Err(TopologyError::NonPositiveEdge {
                    index,
                    a: e.a,
                    b: e.b,
                    km: e.km,
                });
            }
        }
        let dist = all_pairs_shortest(n, &doc.edges);
        for b in 1..n {
            if !dist.get(0, b).is_finite() {
                return Err(TopologyError::Disconnected {
                    from: doc.cities[0].name.clone(),
                    to: doc.cities[b].name.clone(),
                });
            }
        }
        let mut adjacency: Vec<BTreeSet<CityId>> = vec![BTreeSet::new(); n];
        for e in &doc.edges {
            adjacency[e.a].insert(e.b);
            adjacency[e.b].insert(e.a);
        }
        Ok(Self {
            name: doc.name,
            description: doc.description,
            cities: doc.cities,
            edges: doc.edges,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            dist,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, TopologyError> {
        let doc: TopologyDoc =
            serde_json::from_str(json).map_err(|e| TopologyError::Malformed(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One of [`BUNDLED_TOPOLOGIES`].
    pub fn bundled(key: &str) -> Option<Self> {
        let json = match key {
            "switzerland" => SWITZERLAND,
            "france" => FRANCE,
            "great_britain" => GREAT_BRITAIN,
            "netherlands" => NETHERLANDS,
            _ => return None,
        };
        Some(Self::from_json(json).expect("bundled topology is valid"))
    }

    /// Accepts either a bundled key or a path to a topology document.
    pub fn resolve(name_or_path: &str) -> Result<Self, TopologyError> {
        if let Some(t) = Self::bundled(name_or_path) {
            return Ok(t);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            Self::from_path(path)
        } else {
            Err(TopologyError::NotFound(name_or_path.to_string()))
        }
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            format_version: TOPOLOGY_FORMAT_VERSION,
            name: self.name.clone(),
            description: self.description.clone(),
            cities: self.cities.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_cities(&self) -> usize {
        self.cities.len()
    }

    pub fn dist(&self) -> &DistanceMatrix {
        &self.dist
    }

    #[inline]
    pub fn distance(&self, a: CityId, b: CityId) -> f64 {
        self.dist.get(a, b)
    }

    /// Cities directly connected to `city` by an edge, ascending.
    pub fn neighbors(&self, city: CityId) -> &[CityId] {
        &self.adjacency[city]
    }

    pub fn city_by_name(&self, name: &str) -> Option<CityId> {
        self.cities.iter().position(|c| c.name == name)
    }

    pub fn city_name(&self, id: CityId) -> &str {
        &self.cities[id].name
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} cities, {} edges)",
            self.name,
            self.cities.len(),
            self.edges.len()
        )
    }
}

/// Floyd-Warshall over an undirected edge list. Unreachable pairs stay at
/// `f64::INFINITY`; parallel edges keep the shortest.
pub fn all_pairs_shortest(n: usize, edges: &[Edge]) -> DistanceMatrix {
    let mut km = vec![f64::INFINITY; n * n];
    for i in 0..n {
        km[i * n + i] = 0.0;
    }
    for e in edges {
        let cur = km[e.a * n + e.b];
        if e.km < cur {
            km[e.a * n + e.b] = e.km;
            km[e.b * n + e.a] = e.km;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let ik = km[i * n + k];
            if !ik.is_finite() {
                continue;
            }
            for j in 0..n {
                let through = ik + km[k * n + j];
                if through < km[i * n + j] {
                    km[i * n + j] = through;
                }
            }
        }
    }
    // Symmetrize bitwise: the relaxation order can leave ulp-level asymmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = km[i * n + j].min(km[j * n + i]);
            km[i * n + j] = m;
            km[j * n + i] = m;
        }
    }
    DistanceMatrix { n, km }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    /// (parent, child, km) in the order Prim attached each child.
    pub edges: Vec<(CityId, CityId, f64)>,
    pub weight: f64,
}

/// Prim's algorithm over the complete graph induced by `cities` under `dist`.
/// Duplicate ids are collapsed.
pub fn minimum_spanning_tree(
    cities: &[CityId],
    dist: &DistanceMatrix,
) -> Result<SpanningTree, TopologyError> {
    let mut nodes: Vec<CityId> = cities.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(TopologyError::EmptyCitySet);
    }
    let k = nodes.len();
    let mut in_tree = vec![false; k];
    let mut best = vec![f64::INFINITY; k];
    let mut parent = vec![0usize; k];
    in_tree[0] = true;
    for j in 1..k {
        best[j] = dist.get(nodes[0], nodes[j]);
    }
    let mut edges = Vec::with_capacity(k - 1);
    let mut weight = 0.0;
    for _ in 1..k {
        let mut pick = usize::MAX;
        for j in 0..k {
            if !in_tree[j] && (pick == usize::MAX || best[j] < best[pick]) {
                pick = j;
            }
        }
        in_tree[pick] = true;
        weight += best[pick];
        edges.push((nodes[parent[pick]], nodes[pick], best[pick]));
        for j in 0..k {
            if !in_tree[j] {
                let d = dist.get(nodes[pick], nodes[j]);
                if d < best[j] {
                    best[j] = d;
                    parent[j] = pick;
                }
            }
        }
    }
    Ok(SpanningTree { edges, weight })
}

/// Total weight of a minimum spanning tree over `cities`; zero for a singleton.
pub fn mst_weight(cities: &[CityId], dist: &DistanceMatrix) -> Result<f64, TopologyError> {
    minimum_spanning_tree(cities, dist).map(|t| t.weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(n: usize, edges: &[(usize, usize, f64)]) -> TopologyDoc {
        TopologyDoc {
            format_version: 1,
            name: "t".into(),
            description: None,
            cities: (0..n)
                .map(|i| City {
                    id: i,
                    name: format!("C{i}"),
                    x_km: i as f64,
                    y_km: 0.0,
                })
                .collect(),
            edges: edges.iter().map(|&(a, b, km)| Edge { a, b, km }).collect(),
        }
    }

    #[test]
    fn single_edge() {
        let t = Topology::from_doc(doc(2, &[(0, 1, 100.0)])).unwrap();
        assert_eq!(t.distance(0, 1), 100.0);
        assert_eq!(t.distance(1, 0), 100.0);
    }

    #[test]
    fn triangle_takes_detour() {
        let t = Topology::from_doc(doc(3, &[(0, 1, 3.0), (1, 2, 4.0), (0, 2, 10.0)])).unwrap();
        assert_eq!(t.distance(0, 2), 7.0);
    }

    #[test]
    fn path_and_complete_graphs() {
        let t = Topology::from_doc(doc(3, &[(0, 1, 1.0), (1, 2, 1.0)])).unwrap();
        assert_eq!(t.distance(0, 2), 2.0);
        let all: Vec<_> = (0..5)
            .flat_map(|a| ((a + 1)..5).map(move |b| (a, b, 1.0)))
            .collect();
        let t = Topology::from_doc(doc(5, &all)).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(t.distance(a, b), if a == b { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            Topology::from_doc(doc(2, &[])),
            Err(TopologyError::Disconnected { .. })
        ));
        assert!(matches!(
            Topology::from_doc(doc(2, &[(0, 1, 0.0)])),
            Err(TopologyError::NonPositiveEdge { index: 0, .. })
        ));
        assert!(matches!(
            Topology::from_doc(doc(2, &[(0, 1, -3.0)])),
            Err(TopologyError::NonPositiveEdge { .. })
        ));
        assert!(matches!(
            Topology::from_doc(doc(2, &[(0, 7, 1.0)])),
            Err(TopologyError::UnknownCity { index: 0, city: 7 })
        ));
        let mut d = doc(2, &[(0, 1, 1.0)]);
        d.cities[1].name = "C0".into();
        assert!(matches!(Topology::from_doc(d), Err(TopologyError::DuplicateName(_))));
        let mut d = doc(2, &[(0, 1, 1.0)]);
        d.cities[1].id = 5;
        assert!(matches!(Topology::from_doc(d), Err(TopologyError::NonDenseIds { .. })));
    }

    #[test]
    fn rejects_unknown_fields() {
        let json = r#"{"name":"x","cities":[{"id":0,"name":"A","x_km":0,"y_km":0,"pop":3}],"edges":[]}"#;
        assert!(matches!(Topology::from_json(json), Err(TopologyError::Malformed(_))));
        let json = r#"{"name":"x","cities":[{"id":0,"name":"A","x_km":0,"y_km":0}],"edges":[],"extra":1}"#;
        assert!(matches!(Topology::from_json(json), Err(TopologyError::Malformed(_))));
    }

    #[test]
    fn single_city_is_connected() {
        let t = Topology::from_doc(doc(1, &[])).unwrap();
        assert_eq!(t.distance(0, 0), 0.0);
    }

    #[test]
    fn mst_small_sets() {
        let t = Topology::from_doc(doc(3, &[(0, 1, 3.0), (1, 2, 4.0), (0, 2, 10.0)])).unwrap();
        assert_eq!(mst_weight(&[2], t.dist()).unwrap(), 0.0);
        assert_eq!(mst_weight(&[0, 2], t.dist()).unwrap(), 7.0);
        assert_eq!(mst_weight(&[0, 1, 2, 2], t.dist()).unwrap(), 7.0);
        assert!(matches!(mst_weight(&[], t.dist()), Err(TopologyError::EmptyCitySet)));
    }

    #[test]
    fn bundled_topologies_load() {
        for key in BUNDLED_TOPOLOGIES {
            let t = Topology::bundled(key).unwrap();
            assert!(t.num_cities() >= 20, "{key}");
            let json = serde_json::to_string(&t.to_doc()).unwrap();
            assert_eq!(Topology::from_json(&json).unwrap(), t);
        }
        assert!(Topology::bundled("atlantis").is_none());
    }
}
