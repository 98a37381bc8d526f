//! Combinatorial dessins on the torus built from `2n + 1` loops through the
//! cone point, and their genus-zero quotients by `z ↦ -z`.
//!
//! Vertices of a loop with `E` edges are numbered `0..E` along the loop, with
//! vertex `0` (and `E`) the cone point. Colours alternate along each loop, the
//! cone point having colour `0`; every loop length is even, so this is a proper
//! bipartite colouring.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::torus::{ThetaTriple, TorusError};

pub const SCHEMA_VERSION: u32 = 1;

/// Description of the edge-count convention written into every export.
pub const ALTERNATION_RULE: &str =
    "loops of direction i are ordered along the triangle edge; loop r has 2*m_i edges for even r and 2*N-2*m_i for odd r";

/// How the involution folds the torus dessin, recorded in quotient exports.
pub const FOLDING_RULE: &str = "loop r of a direction with k loops is identified with loop k-1-r, reversed; \
     the middle loop r=(k-1)/2 folds onto a path of E/2 edges from the cone point to a fixed 2-torsion vertex";

pub const BELYI_INNER: &str = "g(z) = ((1 - z^N)/(1 + z^N))^2";
pub const BELYI_OUTER: &str = "h(z) = z/(z - 1)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DessinError {
    #[error(transparent)]
    Theta(#[from] TorusError),
    #[error("theta {theta} belongs to n = {actual}, not n = {expected}")]
    DegreeMismatch {
        theta: ThetaTriple,
        expected: u64,
        actual: u64,
    },
    #[error("lengths m = {m:?} must be positive and sum to N = {order}")]
    Lengths { m: [u64; 3], order: u64 },
    #[error("malformed dessin document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loop {
    pub edge_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusDessin {
    pub n: u64,
    pub order: u64,
    pub theta: ThetaTriple,
    pub m: [u64; 3],
    pub directions: [Vec<Loop>; 3],
}

/// Edge counts of the loops of one direction, in order along the triangle edge.
pub fn alternation(loops: u64, m: u64, order: u64) -> Vec<u64> {
    (0..loops)
        .map(|r| if r % 2 == 0 { 2 * m } else { 2 * order - 2 * m })
        .collect()
}

pub fn loops_in_direction(n: u64, theta_i: u64) -> u64 {
    2 * n + 1 - 2 * theta_i
}

pub fn dessin_from_config(
    n: u64,
    theta: ThetaTriple,
    m: [u64; 3],
    order: u64,
) -> Result<TorusDessin, DessinError> {
    if theta.n() != n {
        return Err(DessinError::DegreeMismatch {
            theta,
            expected: n,
            actual: theta.n(),
        });
    }
    if m.contains(&0) || m.iter().sum::<u64>() != order {
        return Err(DessinError::Lengths { m, order });
    }
    let th = theta.get();
    let directions = std::array::from_fn(|i| {
        alternation(loops_in_direction(n, th[i]), m[i], order)
            .into_iter()
            .map(|edge_count| Loop { edge_count })
            .collect()
    });
    Ok(TorusDessin {
        n,
        order,
        theta,
        m,
        directions,
    })
}

/// An edge of the torus dessin: `(direction, loop, position along the loop)`.
pub type EdgeId = (usize, usize, u64);

/// A vertex of the torus dessin; every loop-interior vertex is `(direction, loop, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexId {
    Cone,
    Loop(usize, usize, u64),
}

impl TorusDessin {
    pub fn loop_count(&self) -> usize {
        self.directions.iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self) -> u64 {
        self.directions.iter().flatten().map(|l| l.edge_count).sum()
    }

    pub fn vertex_count(&self) -> u64 {
        1 + self
            .directions
            .iter()
            .flatten()
            .map(|l| l.edge_count - 1)
            .sum::<u64>()
    }

    /// Faces of the torus embedding, from `V - E + F = 0`.
    pub fn face_count(&self) -> u64 {
        self.edge_count() - self.vertex_count()
    }

    pub fn edges(&self) -> Vec<EdgeId> {
        let mut out = Vec::new();
        for (d, loops) in self.directions.iter().enumerate() {
            for (r, l) in loops.iter().enumerate() {
                out.extend((0..l.edge_count).map(|j| (d, r, j)));
            }
        }
        out
    }

    pub fn edge_endpoints(&self, (d, r, j): EdgeId) -> (VertexId, VertexId) {
        (self.vertex_at(d, r, j), self.vertex_at(d, r, j + 1))
    }

    fn vertex_at(&self, d: usize, r: usize, j: u64) -> VertexId {
        let e = self.directions[d][r].edge_count;
        if j.is_multiple_of(e) {
            VertexId::Cone
        } else {
            VertexId::Loop(d, r, j)
        }
    }

    pub fn vertices(&self) -> Vec<VertexId> {
        let mut out = vec![VertexId::Cone];
        for (d, loops) in self.directions.iter().enumerate() {
            for (r, l) in loops.iter().enumerate() {
                out.extend((1..l.edge_count).map(|j| VertexId::Loop(d, r, j)));
            }
        }
        out
    }

    pub fn colour(&self, v: VertexId) -> u8 {
        match v {
            VertexId::Cone => 0,
            VertexId::Loop(_, _, j) => (j % 2) as u8,
        }
    }

    /// The action of `z ↦ -z` on edges.
    pub fn involution(&self, (d, r, j): EdgeId) -> EdgeId {
        let k = self.directions[d].len();
        let e = self.directions[d][r].edge_count;
        (d, k - 1 - r, e - 1 - j)
    }

    pub fn involution_vertex(&self, v: VertexId) -> VertexId {
        match v {
            VertexId::Cone => VertexId::Cone,
            VertexId::Loop(d, r, j) => {
                let k = self.directions[d].len();
                let e = self.directions[d][r].edge_count;
                VertexId::Loop(d, k - 1 - r, e - j)
            }
        }
    }

    pub fn fixed_vertices(&self) -> Vec<VertexId> {
        self.vertices()
            .into_iter()
            .filter(|&v| self.involution_vertex(v) == v)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = DessinDocument::from_torus(self, None);
        serde_json::to_string_pretty(&doc).expect("dessin documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DessinError> {
        let doc: DessinDocument =
            serde_json::from_str(text).map_err(|e| DessinError::Document(e.to_string()))?;
        doc.torus()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph torus_dessin {{");
        let _ = writeln!(
            out,
            "  label=\"n={} N={} theta={} m=({},{},{})\";",
            self.n, self.order, self.theta, self.m[0], self.m[1], self.m[2]
        );
        let _ = writeln!(out, "  cone [label=\"cone\", colour=0, shape=box];");
        for (d, loops) in self.directions.iter().enumerate() {
            for (r, l) in loops.iter().enumerate() {
                let _ = writeln!(out, "  subgraph loop_d{}_r{} {{", d + 1, r);
                let _ = writeln!(
                    out,
                    "    label=\"direction {} loop {} edges {}\";",
                    d + 1,
                    r,
                    l.edge_count
                );
                for j in 1..l.edge_count {
                    let _ = writeln!(
                        out,
                        "    {} [colour={}];",
                        dot_name(VertexId::Loop(d, r, j)),
                        j % 2
                    );
                }
                for j in 0..l.edge_count {
                    let (a, b) = self.edge_endpoints((d, r, j));
                    let _ = writeln!(
                        out,
                        "    {} -- {} [direction={}];",
                        dot_name(a),
                        dot_name(b),
                        d + 1
                    );
                }
                let _ = writeln!(out, "  }}");
            }
        }
        let _ = writeln!(out, "}}");
        out
    }
}

fn dot_name(v: VertexId) -> String {
    match v {
        VertexId::Cone => "cone".to_string(),
        VertexId::Loop(d, r, j) => format!("d{}r{}v{}", d + 1, r, j),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    /// Image of the cone point.
    Cone,
    /// Image of a 2-torsion point fixed by the involution.
    FixedTorsion,
    /// Image of a free pair of vertices.
    Regular,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientVertex {
    pub id: usize,
    pub colour: u8,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientEdge {
    pub source: usize,
    pub target: usize,
    pub direction: u8,
    /// Index of the representative loop on the torus.
    #[serde(rename = "loop")]
    pub loop_index: usize,
    /// True when the edge comes from the folded middle loop.
    pub folded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientDessin {
    pub source: TorusDessin,
    pub vertices: Vec<QuotientVertex>,
    pub edges: Vec<QuotientEdge>,
    pub faces: u64,
    pub genus: u64,
}

impl QuotientDessin {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces as i64
    }

    pub fn to_json(&self) -> String {
        let doc = DessinDocument::from_torus(
            &self.source,
            Some(QuotientSection {
                vertices: self.vertices.clone(),
                edges: self.edges.clone(),
                faces: self.faces,
                genus: self.genus,
                euler_characteristic: self.euler_characteristic(),
                folding_rule: FOLDING_RULE.to_string(),
            }),
        );
        serde_json::to_string_pretty(&doc).expect("dessin documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DessinError> {
        let doc: DessinDocument =
            serde_json::from_str(text).map_err(|e| DessinError::Document(e.to_string()))?;
        let source = doc.torus()?;
        let q = quotient_dessin(&source);
        let section = doc
            .quotient
            .ok_or_else(|| DessinError::Document("missing quotient section".into()))?;
        if section.vertices != q.vertices
            || section.edges != q.edges
            || section.faces != q.faces
            || section.genus != q.genus
        {
            return Err(DessinError::Document(
                "quotient section does not match its torus dessin".into(),
            ));
        }
        Ok(q)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let s = &self.source;
        let _ = writeln!(out, "graph quotient_dessin {{");
        let _ = writeln!(
            out,
            "  label=\"quotient n={} N={} theta={} genus={}\";",
            s.n, s.order, s.theta, self.genus
        );
        for v in &self.vertices {
            let shape = match v.kind {
                VertexKind::Cone => "box",
                VertexKind::FixedTorsion => "diamond",
                VertexKind::Regular => "circle",
            };
            let _ = writeln!(out, "  q{} [colour={}, shape={}];", v.id, v.colour, shape);
        }
        let mut groups: BTreeMap<(u8, usize), Vec<&QuotientEdge>> = BTreeMap::new();
        for e in &self.edges {
            groups
                .entry((e.direction, e.loop_index))
                .or_default()
                .push(e);
        }
        for ((d, r), edges) in groups {
            let kind = if edges[0].folded { "path" } else { "loop" };
            let _ = writeln!(out, "  subgraph {kind}_d{d}_r{r} {{");
            for e in edges {
                let _ = writeln!(out, "    q{} -- q{} [direction={}];", e.source, e.target, d);
            }
            let _ = writeln!(out, "  }}");
        }
        let _ = writeln!(out, "}}");
        out
    }
}

/// Quotient by `z ↦ -z`: loops pair off, middle loops fold to paths.
pub fn quotient_dessin(d: &TorusDessin) -> QuotientDessin {
    // orbit representative of each vertex, numbered in first-seen order
    let mut ids: BTreeMap<VertexId, usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    for v in d.vertices() {
        let image = d.involution_vertex(v);
        let rep = v.min(image);
        if ids.contains_key(&rep) {
            continue;
        }
        let kind = match rep {
            VertexId::Cone => VertexKind::Cone,
            _ if image == v => VertexKind::FixedTorsion,
            _ => VertexKind::Regular,
        };
        let id = vertices.len();
        ids.insert(rep, id);
        vertices.push(QuotientVertex {
            id,
            colour: d.colour(rep),
            kind,
        });
    }
    let vertex_id = |v: VertexId| ids[&v.min(d.involution_vertex(v))];
    let mut edges = Vec::new();
    for e in d.edges() {
        let image = d.involution(e);
        if image < e {
            continue;
        }
        let (dir, r, _) = e;
        let (a, b) = d.edge_endpoints(e);
        edges.push(QuotientEdge {
            source: vertex_id(a),
            target: vertex_id(b),
            direction: dir as u8 + 1,
            loop_index: r,
            folded: image.1 == r,
        });
    }
    // the involution has only the four 2-torsion points as fixed points, all of
    // them vertices, so faces pair off freely
    let faces = d.face_count() / 2;
    let fixed = d.fixed_vertices().len() as i64;
    // Riemann-Hurwitz for a degree-2 cover of a genus-g surface by the torus
    let genus = ((4 - fixed) / 4) as u64;
    QuotientDessin {
        source: d.clone(),
        vertices,
        edges,
        faces,
        genus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DessinKind {
    Torus,
    Quotient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BelyiMetadata {
    pub inner: String,
    pub outer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientSection {
    pub vertices: Vec<QuotientVertex>,
    pub edges: Vec<QuotientEdge>,
    pub faces: u64,
    pub genus: u64,
    pub euler_characteristic: i64,
    pub folding_rule: String,
}

/// The versioned JSON form of a dessin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DessinDocument {
    pub version: u32,
    pub kind: DessinKind,
    pub n: u64,
    #[serde(rename = "N")]
    pub order: u64,
    pub theta: ThetaTriple,
    pub m: [u64; 3],
    pub directions: Vec<Vec<u64>>,
    pub alternation: String,
    pub belyi: BelyiMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotient: Option<QuotientSection>,
}

impl DessinDocument {
    fn from_torus(d: &TorusDessin, quotient: Option<QuotientSection>) -> Self {
        DessinDocument {
            version: SCHEMA_VERSION,
            kind: if quotient.is_some() {
                DessinKind::Quotient
            } else {
                DessinKind::Torus
            },
            n: d.n,
            order: d.order,
            theta: d.theta,
            m: d.m,
            directions: d
                .directions
                .iter()
                .map(|ls| ls.iter().map(|l| l.edge_count).collect())
                .collect(),
            alternation: ALTERNATION_RULE.to_string(),
            belyi: BelyiMetadata {
                inner: BELYI_INNER.to_string(),
                outer: BELYI_OUTER.to_string(),
            },
            quotient,
        }
    }

    /// Rebuilds the torus dessin and checks the stored loop lengths against it.
    pub fn torus(&self) -> Result<TorusDessin, DessinError> {
        if self.version != SCHEMA_VERSION {
            return Err(DessinError::Document(format!(
                "unsupported schema version {}",
                self.version
            )));
        }
        let d = dessin_from_config(self.n, self.theta, self.m, self.order)?;
        let stored: Vec<Vec<u64>> = d
            .directions
            .iter()
            .map(|ls| ls.iter().map(|l| l.edge_count).collect())
            .collect();
        if stored != self.directions {
            return Err(DessinError::Document(
                "loop lengths disagree with theta, m and N".into(),
            ));
        }
        Ok(d)
    }
}
