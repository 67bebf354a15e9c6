//! P1 triangles, boundary labels, time-dependent data and the discrete
//! admissible set.
//!
//! Degrees of freedom are interleaved: node `i` owns `2i` (x) and `2i + 1` (y).
//! Strains, stresses and plastic strains are elementwise constant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::{ElasticModuli, Material, YieldSurface};
use crate::error::{Error, Result};
use crate::tensor::{DevTensor, SymTensor};

pub const DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeLabel {
    /// Prescribed displacement.
    G0,
    /// Prescribed traction.
    G1,
    /// Outer boundary of a collar; prescribed displacement.
    CO,
}

impl EdgeLabel {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, EdgeLabel::G0 | EdgeLabel::CO)
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeLabel::G0 => "G0",
            EdgeLabel::G1 => "G1",
            EdgeLabel::CO => "CO",
        };
        f.write_str(s)
    }
}

impl FromStr for EdgeLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G0" => Ok(EdgeLabel::G0),
            "G1" => Ok(EdgeLabel::G1),
            "CO" => Ok(EdgeLabel::CO),
            _ => Err(Error::InvalidMesh(format!("unknown edge label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub label: EdgeLabel,
    /// The element the edge belongs to.
    pub element: usize,
}

impl BoundaryEdge {
    pub fn length(&self, mesh: &Mesh) -> f64 {
        let a = mesh.nodes[self.nodes[0]];
        let b = mesh.nodes[self.nodes[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn midpoint(&self, mesh: &Mesh) -> [f64; 2] {
        let a = mesh.nodes[self.nodes[0]];
        let b = mesh.nodes[self.nodes[1]];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Unit normal pointing out of the owning element.
    pub fn outward_normal(&self, mesh: &Mesh) -> [f64; 2] {
        let a = mesh.nodes[self.nodes[0]];
        let b = mesh.nodes[self.nodes[1]];
        let c = mesh.centroid(self.element);
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        let len = (tx * tx + ty * ty).sqrt();
        let mut n = [ty / len, -tx / len];
        if n[0] * (c[0] - a[0]) + n[1] * (c[1] - a[1]) > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    areas: Vec<f64>,
    /// Gradients of the three barycentric shape functions.
    grads: Vec<[[f64; 2]; 3]>,
    edges: Vec<BoundaryEdge>,
    collar: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub left: EdgeLabel,
    pub right: EdgeLabel,
    pub bottom: EdgeLabel,
    pub top: EdgeLabel,
}

impl Mesh {
    /// Validates and builds a mesh. Triangles must be counterclockwise.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 3]>,
        labeled_edges: Vec<([usize; 2], EdgeLabel)>,
        collar: Vec<bool>,
    ) -> Result<Self> {
        if nodes.is_empty() || elements.is_empty() {
            return Err(Error::InvalidMesh("mesh has no nodes or no elements".into()));
        }
        if collar.len() != elements.len() {
            return Err(Error::InvalidMesh(format!(
                "{} collar flags for {} elements",
                collar.len(),
                elements.len()
            )));
        }
        if nodes.iter().any(|x| !x[0].is_finite() || !x[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite node coordinate".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        let mut grads = Vec::with_capacity(elements.len());
        let mut edge_owner: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (k, el) in elements.iter().enumerate() {
            if el.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("element {k} references a missing node")));
            }
            if el[0] == el[1] || el[1] == el[2] || el[0] == el[2] {
                return Err(Error::InvalidMesh(format!("element {k} repeats a node")));
            }
            let [a, b, c] = el.map(|i| nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let area = 0.5 * det;
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "element {k} has non-positive area {area:e} (nodes must be counterclockwise)"
                )));
            }
            // ∇φ_i = perp(x_{i+2} - x_{i+1}) / (2 area)
            let p = [a, b, c];
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let (q, r) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                g[i] = [(q[1] - r[1]) / det, (r[0] - q[0]) / det];
            }
            areas.push(area);
            grads.push(g);
            for i in 0..3 {
                let (u, v) = (el[i], el[(i + 1) % 3]);
                edge_owner.entry((u.min(v), u.max(v))).or_default().push(k);
            }
        }
        let mut boundary: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (key, owners) in &edge_owner {
            match owners.len() {
                1 => {
                    boundary.insert(*key, owners[0]);
                }
                2 => {}
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "edge {key:?} is shared by {n} elements"
                    )))
                }
            }
        }
        let mut edges = Vec::with_capacity(labeled_edges.len());
        let mut seen = BTreeSet::new();
        for (pair, label) in labeled_edges {
            let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            let Some(&element) = boundary.get(&key) else {
                return Err(Error::InvalidMesh(format!(
                    "labeled edge {pair:?} is not a boundary edge"
                )));
            };
            if !seen.insert(key) {
                return Err(Error::InvalidMesh(format!("edge {pair:?} labeled twice")));
            }
            edges.push(BoundaryEdge {
                nodes: pair,
                label,
                element,
            });
        }
        if let Some(key) = boundary.keys().find(|k| !seen.contains(k)) {
            return Err(Error::InvalidMesh(format!("boundary edge {key:?} has no label")));
        }
        if !edges.iter().any(|e| e.label.is_dirichlet()) {
            return Err(Error::InvalidMesh("no Dirichlet boundary edge".into()));
        }
        Ok(Self {
            nodes,
            elements,
            areas,
            grads,
            edges,
            collar,
        })
    }

    /// Structured triangulation of a rectangle; each cell is cut along
    /// alternating diagonals.
    pub fn rectangle(spec: &RectSpec) -> Result<Self> {
        let RectSpec {
            x0,
            y0,
            lx,
            ly,
            nx,
            ny,
            ..
        } = *spec;
        if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "rectangle needs positive sizes and counts, got {lx}x{ly} with {nx}x{ny} cells"
            )));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    x0 + lx * i as f64 / nx as f64,
                    y0 + ly * j as f64 / ny as f64,
                ]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    elements.push([a, b, c]);
                    elements.push([a, c, d]);
                } else {
                    elements.push([a, b, d]);
                    elements.push([b, c, d]);
                }
            }
        }
        let mut edges = Vec::new();
        for i in 0..nx {
            edges.push(([id(i, 0), id(i + 1, 0)], spec.bottom));
            edges.push(([id(i, ny), id(i + 1, ny)], spec.top));
        }
        for j in 0..ny {
            edges.push(([id(0, j), id(0, j + 1)], spec.left));
            edges.push(([id(nx, j), id(nx, j + 1)], spec.right));
        }
        let n = elements.len();
        Self::new(nodes, elements, edges, vec![false; n])
    }

    /// Appends a layer of elements of the given width outside the `G0`
    /// edges. The new outer edges are labeled `CO`, the two ends of an open
    /// `G0` chain `G1`, and the former `G0` edges become interior.
    pub fn with_collar(&self, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidMesh(format!("collar width must be positive, got {width}")));
        }
        let g0: Vec<&BoundaryEdge> = self.edges.iter().filter(|e| e.label == EdgeLabel::G0).collect();
        if g0.is_empty() {
            return Err(Error::InvalidMesh("collar requested but no G0 edge".into()));
        }
        let mut node_normals: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
        for e in &g0 {
            let n = e.outward_normal(self);
            for &v in &e.nodes {
                node_normals.entry(v).or_default().push(n);
            }
        }
        let mut nodes = self.nodes.clone();
        let mut image = BTreeMap::new();
        let mut chain_ends = Vec::new();
        for (&v, ns) in &node_normals {
            if ns.len() > 2 {
                return Err(Error::InvalidMesh(format!("node {v} joins more than two G0 edges")));
            }
            if ns.len() == 1 {
                chain_ends.push(v);
            }
            let s = ns.iter().fold([0.0, 0.0], |acc, n| [acc[0] + n[0], acc[1] + n[1]]);
            let len = (s[0] * s[0] + s[1] * s[1]).sqrt();
            if len < 1e-8 {
                return Err(Error::InvalidMesh(format!("G0 folds back on itself at node {v}")));
            }
            let m = [s[0] / len, s[1] / len];
            // keep the layer thickness equal to `width` across corners
            let cos = m[0] * ns[0][0] + m[1] * ns[0][1];
            let d = width / cos;
            let x = self.nodes[v];
            image.insert(v, nodes.len());
            nodes.push([x[0] + d * m[0], x[1] + d * m[1]]);
        }
        let mut elements = self.elements.clone();
        let mut collar = self.collar.clone();
        let orient = |nodes: &[[f64; 2]], t: [usize; 3]| {
            let [a, b, c] = t.map(|i| nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if det > 0.0 {
                t
            } else {
                [t[0], t[2], t[1]]
            }
        };
        let mut labeled: Vec<([usize; 2], EdgeLabel)> = self
            .edges
            .iter()
            .filter(|e| e.label != EdgeLabel::G0)
            .map(|e| (e.nodes, e.label))
            .collect();
        for e in &g0 {
            let [a, b] = e.nodes;
            let (a2, b2) = (image[&a], image[&b]);
            elements.push(orient(&nodes, [a, b, b2]));
            elements.push(orient(&nodes, [a, b2, a2]));
            collar.push(true);
            collar.push(true);
            labeled.push(([a2, b2], EdgeLabel::CO));
        }
        for v in chain_ends {
            labeled.push(([v, image[&v]], EdgeLabel::G1));
        }
        Self::new(nodes, elements, labeled, collar)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_dofs(&self) -> usize {
        DIM * self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn grads(&self) -> &[[[f64; 2]; 3]] {
        &self.grads
    }

    pub fn edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn is_collar(&self, el: usize) -> bool {
        self.collar[el]
    }

    pub fn collar_flags(&self) -> &[bool] {
        &self.collar
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn centroid(&self, el: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[el].map(|i| self.nodes[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge of an element.
    pub fn diameter(&self, el: usize) -> f64 {
        let p = self.elements[el].map(|i| self.nodes[i]);
        (0..3)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Bounding box `[xmin, ymin, xmax, ymax]` of the non-collar nodes.
    pub fn bbox(&self) -> [f64; 4] {
        let mut used = vec![false; self.nodes.len()];
        for (el, nodes) in self.elements.iter().enumerate() {
            if !self.collar[el] {
                for &i in nodes {
                    used[i] = true;
                }
            }
        }
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, _) in self.nodes.iter().zip(&used).filter(|(_, u)| **u) {
            b[0] = b[0].min(x[0]);
            b[1] = b[1].min(x[1]);
            b[2] = b[2].max(x[0]);
            b[3] = b[3].max(x[1]);
        }
        b
    }

    /// Degrees of freedom on Dirichlet edges, sorted.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let nodes: BTreeSet<usize> = self
            .edges
            .iter()
            .filter(|e| e.label.is_dirichlet())
            .flat_map(|e| e.nodes)
            .collect();
        nodes.into_iter().flat_map(|i| [2 * i, 2 * i + 1]).collect()
    }

    /// Plain-text mesh listing (see [`Mesh::parse`]).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("nodes {}\n", self.nodes.len()));
        for x in &self.nodes {
            s.push_str(&format!("{:?} {:?}\n", x[0], x[1]));
        }
        s.push_str(&format!("elements {}\n", self.elements.len()));
        for (el, c) in self.elements.iter().zip(&self.collar) {
            if *c {
                s.push_str(&format!("{} {} {} collar\n", el[0], el[1], el[2]));
            } else {
                s.push_str(&format!("{} {} {}\n", el[0], el[1], el[2]));
            }
        }
        s.push_str(&format!("edges {}\n", self.edges.len()));
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.nodes[0], e.nodes[1], e.label));
        }
        s
    }

    /// Parses the plain-text format:
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// nodes N
    /// x y                 (N lines)
    /// elements M
    /// i j k [collar]      (M lines, 0-based, counterclockwise)
    /// edges B
    /// i j G0|G1|CO        (B lines, every boundary edge exactly once)
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let bad = |line: usize, msg: &str| Error::InvalidMesh(format!("line {line}: {msg}"));
        let count = |lines: &mut dyn Iterator<Item = (usize, &str)>, name: &str| -> Result<usize> {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::InvalidMesh(format!("missing `{name}` section")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(name) {
                return Err(bad(ln, &format!("expected `{name} <count>`")));
            }
            it.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| bad(ln, "bad count"))
        };
        let n_nodes = count(&mut lines, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = lines.next().ok_or_else(|| Error::InvalidMesh("truncated node list".into()))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "bad coordinate"))?;
            if v.len() != 2 {
                return Err(bad(ln, "expected two coordinates"));
            }
            nodes.push([v[0], v[1]]);
        }
        let n_el = count(&mut lines, "elements")?;
        let mut elements = Vec::with_capacity(n_el);
        let mut collar = Vec::with_capacity(n_el);
        for _ in 0..n_el {
            let (ln, l) = lines.next().ok_or_else(|| Error::InvalidMesh("truncated element list".into()))?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            let flag = match tok.len() {
                3 => false,
                4 if tok[3] == "collar" => true,
                _ => return Err(bad(ln, "expected `i j k [collar]`")),
            };
            let mut el = [0usize; 3];
            for (k, t) in tok[..3].iter().enumerate() {
                el[k] = t.parse().map_err(|_| bad(ln, "bad node index"))?;
            }
            elements.push(el);
            collar.push(flag);
        }
        let n_edges = count(&mut lines, "edges")?;
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (ln, l) = lines.next().ok_or_else(|| Error::InvalidMesh("truncated edge list".into()))?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(bad(ln, "expected `i j label`"));
            }
            let a = tok[0].parse().map_err(|_| bad(ln, "bad node index"))?;
            let b = tok[1].parse().map_err(|_| bad(ln, "bad node index"))?;
            edges.push(([a, b], tok[2].parse()?));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing content"));
        }
        Self::new(nodes, elements, edges, collar)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Exact symmetric gradient of the P1 interpolant of `u`, per element.
pub fn strain(mesh: &Mesh, u: &[f64]) -> Result<Vec<SymTensor>> {
    if u.len() != mesh.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_dofs(),
            got: u.len(),
        });
    }
    Ok(strain_unchecked(mesh, u))
}

pub(crate) fn strain_unchecked(mesh: &Mesh, u: &[f64]) -> Vec<SymTensor> {
    mesh.elements
        .iter()
        .zip(&mesh.grads)
        .map(|(el, g)| element_strain(el, g, u))
        .collect()
}

#[inline]
pub(crate) fn element_strain(el: &[usize; 3], g: &[[f64; 2]; 3], u: &[f64]) -> SymTensor {
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for a in 0..3 {
        let (ux, uy) = (u[2 * el[a]], u[2 * el[a] + 1]);
        xx += ux * g[a][0];
        yy += uy * g[a][1];
        xy += 0.5 * (ux * g[a][1] + uy * g[a][0]);
    }
    SymTensor::new(2, &[xx, yy, xy]).unwrap()
}

/// Nodal vector `Bᵀσ`: the derivative of `Σ area σ:Eu` with respect to `u`.
pub fn internal_force(mesh: &Mesh, sigma: &[SymTensor]) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_dofs()];
    for ((el, g), (area, s)) in mesh.elements.iter().zip(&mesh.grads).zip(mesh.areas.iter().zip(sigma)) {
        let c = s.components();
        let (sxx, syy, sxy) = (c[0], c[1], c[2]);
        for a in 0..3 {
            f[2 * el[a]] += area * (sxx * g[a][0] + sxy * g[a][1]);
            f[2 * el[a] + 1] += area * (sxy * g[a][0] + syy * g[a][1]);
        }
    }
    f
}

/// `Σ area a:b`.
pub fn pairing(mesh: &Mesh, a: &[SymTensor], b: &[SymTensor]) -> f64 {
    mesh.areas
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * x.ddot(y))
        .sum()
}

/// Area-weighted `L²` norm of an elementwise field.
pub fn l2_norm(mesh: &Mesh, a: &[SymTensor]) -> f64 {
    pairing(mesh, a, a).max(0.0).sqrt()
}

/// Area-weighted `L¹` norm of an elementwise deviatoric field.
pub fn l1_norm(mesh: &Mesh, p: &[DevTensor]) -> f64 {
    mesh.areas.iter().zip(p).map(|(w, x)| w * x.norm()).sum()
}

pub fn dev_diff(a: &[DevTensor], b: &[DevTensor]) -> Vec<DevTensor> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn sym_diff(a: &[SymTensor], b: &[SymTensor]) -> Vec<SymTensor> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Piecewise-linear scalar function of time, constant outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Schedule {
    knots: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for Schedule {
    type Error = Error;
    fn try_from(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(knots)
    }
}

impl From<Schedule> for Vec<[f64; 2]> {
    fn from(s: Schedule) -> Self {
        s.knots
    }
}

impl Schedule {
    pub fn new(knots: Vec<[f64; 2]>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidScenario("schedule needs at least one knot".into()));
        }
        if knots.iter().any(|k| !k[0].is_finite() || !k[1].is_finite()) {
            return Err(Error::InvalidScenario("non-finite schedule knot".into()));
        }
        if knots.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::InvalidScenario("schedule times must increase".into()));
        }
        Ok(Self { knots })
    }

    /// `s(t) = t`.
    pub fn ramp() -> Self {
        Self::new(vec![[0.0, 0.0], [1.0, 1.0]]).unwrap()
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![[0.0, v]]).unwrap()
    }

    pub fn knots(&self) -> &[[f64; 2]] {
        &self.knots
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0][0] {
            return k[0][1];
        }
        let n = k.len();
        if t >= k[n - 1][0] {
            return k[n - 1][1];
        }
        let i = k.partition_point(|x| x[0] <= t) - 1;
        let th = (t - k[i][0]) / (k[i + 1][0] - k[i][0]);
        k[i][1] + th * (k[i + 1][1] - k[i][1])
    }

    /// Right derivative.
    pub fn rate(&self, t: f64) -> f64 {
        let k = &self.knots;
        let n = k.len();
        if n < 2 || t < k[0][0] || t >= k[n - 1][0] {
            return 0.0;
        }
        let i = k.partition_point(|x| x[0] <= t) - 1;
        (k[i + 1][1] - k[i][1]) / (k[i + 1][0] - k[i][0])
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k[0])
    }
}

fn default_schedule() -> Schedule {
    Schedule::ramp()
}

/// `w(x, t) = s(t) (G x + c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDisplacement {
    pub grad: [[f64; 2]; 2],
    #[serde(default)]
    pub shift: [f64; 2],
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyForce {
    pub value: [f64; 2],
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
    All,
}

/// Constant traction on the `G1` edges of one side of the bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traction {
    pub side: Side,
    pub value: [f64; 2],
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
}

/// `ρ(x, t) = s(t) (value + x dx + y dy)`, components `[xx, yy, xy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeLoadField {
    pub value: [f64; 3],
    #[serde(default)]
    pub dx: [f64; 3],
    #[serde(default)]
    pub dy: [f64; 3],
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum YieldSpec {
    VonMises { radius: f64 },
    /// Square in the deviatoric coordinates.
    Square { half_width: f64 },
    /// Facets `[a, b, offset]` with `(a, b)` a normal in deviatoric coordinates.
    Polyhedral { facets: Vec<[f64; 3]> },
}

impl YieldSpec {
    pub fn build(&self) -> Result<YieldSurface> {
        match self {
            YieldSpec::VonMises { radius } => YieldSurface::von_mises(*radius),
            YieldSpec::Square { half_width } => YieldSurface::square_2d(*half_width),
            YieldSpec::Polyhedral { facets } => {
                let mut f = Vec::with_capacity(facets.len());
                for [a, b, c] in facets {
                    let len = (a * a + b * b).sqrt();
                    if !(len > 0.0) {
                        return Err(Error::InvalidYieldSurface("zero facet normal".into()));
                    }
                    f.push((DevTensor::from_coords(2, &[a / len, b / len])?, c / len));
                }
                YieldSurface::polyhedral(2, &f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub mu: f64,
    pub kappa: f64,
    #[serde(rename = "yield")]
    pub yield_spec: YieldSpec,
}

/// Elements whose centroid lies in the box get the yield set scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inclusion {
    #[serde(default = "neg_inf")]
    pub x_min: f64,
    #[serde(default = "pos_inf")]
    pub x_max: f64,
    #[serde(default = "neg_inf")]
    pub y_min: f64,
    #[serde(default = "pos_inf")]
    pub y_max: f64,
    pub yield_scale: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum DirichletMode {
    #[default]
    Hard,
    Collar { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    /// Path relative to the scenario file.
    File { path: PathBuf },
    Rectangle(RectSpec),
}

fn default_tol_eq() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub t_final: f64,
    pub alpha: f64,
    pub mesh: MeshSpec,
    pub material: MaterialSpec,
    #[serde(default)]
    pub dirichlet: DirichletMode,
    #[serde(default)]
    pub inclusion: Vec<Inclusion>,
    #[serde(default)]
    pub w: Vec<AffineDisplacement>,
    #[serde(default)]
    pub body_force: Vec<BodyForce>,
    #[serde(default)]
    pub traction: Vec<Traction>,
    #[serde(default)]
    pub rho: Vec<SafeLoadField>,
    /// Relative tolerance of the discrete equilibrium of `ρ`.
    #[serde(default = "default_tol_eq")]
    pub tol_eq: f64,
}

/// Mesh, material, boundary partition and time-dependent data.
///
/// Each generator contributes a fixed spatial field scaled by its schedule,
/// so all data are precomputed once per mesh.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    base_mesh: Mesh,
    mesh: Mesh,
    materials: Vec<Material>,
    material_of: Vec<usize>,
    dirichlet: Vec<usize>,
    w_fields: Vec<(Vec<f64>, Schedule)>,
    load_fields: Vec<(Vec<f64>, Schedule)>,
    rho_fields: Vec<(Vec<SymTensor>, Schedule)>,
}

impl Scenario {
    /// Loads a TOML scenario; a mesh file path is resolved against the
    /// scenario's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ScenarioSpec = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_spec(spec, base)
    }

    pub fn from_spec(spec: ScenarioSpec, base_dir: &Path) -> Result<Self> {
        let mesh = match &spec.mesh {
            MeshSpec::File { path } => Mesh::from_file(&base_dir.join(path))?,
            MeshSpec::Rectangle(r) => Mesh::rectangle(r)?,
        };
        Self::with_mesh(spec, mesh)
    }

    /// Builds from an explicit base mesh; `spec.mesh` is ignored.
    pub fn with_mesh(spec: ScenarioSpec, base_mesh: Mesh) -> Result<Self> {
        if !(spec.t_final > 0.0) {
            return Err(Error::InvalidScenario(format!("t_final must be positive, got {}", spec.t_final)));
        }
        if !(spec.alpha > 0.0) {
            return Err(Error::InvalidScenario(format!("alpha must be positive, got {}", spec.alpha)));
        }
        if !(spec.tol_eq > 0.0) {
            return Err(Error::InvalidScenario("tol_eq must be positive".into()));
        }
        let mesh = match spec.dirichlet {
            DirichletMode::Hard => base_mesh.clone(),
            DirichletMode::Collar { width } => base_mesh.with_collar(width)?,
        };
        let base = Material::new(
            ElasticModuli::new(spec.material.mu, spec.material.kappa)?,
            spec.material.yield_spec.build()?,
        );
        let mut materials = vec![base.clone()];
        for inc in &spec.inclusion {
            materials.push(Material::new(
                base.moduli,
                base.yield_surface.scaled(inc.yield_scale)?,
            ));
        }
        let material_of = (0..mesh.n_elements())
            .map(|el| {
                if mesh.is_collar(el) {
                    return 0;
                }
                let c = mesh.centroid(el);
                spec.inclusion
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| c[0] >= b.x_min && c[0] <= b.x_max && c[1] >= b.y_min && c[1] <= b.y_max)
                    .map(|(k, _)| k + 1)
                    .next_back()
                    .unwrap_or(0)
            })
            .collect();

        let w_fields = spec
            .w
            .iter()
            .map(|g| {
                let mut v = vec![0.0; mesh.n_dofs()];
                for (i, x) in mesh.nodes().iter().enumerate() {
                    v[2 * i] = g.grad[0][0] * x[0] + g.grad[0][1] * x[1] + g.shift[0];
                    v[2 * i + 1] = g.grad[1][0] * x[0] + g.grad[1][1] * x[1] + g.shift[1];
                }
                (v, g.schedule.clone())
            })
            .collect();

        let mut load_fields = Vec::new();
        for f in &spec.body_force {
            let mut v = vec![0.0; mesh.n_dofs()];
            for (el, nodes) in mesh.elements().iter().enumerate() {
                if mesh.is_collar(el) {
                    continue;
                }
                let w = mesh.areas()[el] / 3.0;
                for &i in nodes {
                    v[2 * i] += w * f.value[0];
                    v[2 * i + 1] += w * f.value[1];
                }
            }
            load_fields.push((v, f.schedule.clone()));
        }
        let bb = mesh.bbox();
        let scale = (bb[2] - bb[0]).max(bb[3] - bb[1]);
        let on_side = |x: [f64; 2], side: Side| {
            let tol = 1e-9 * scale;
            match side {
                Side::Left => (x[0] - bb[0]).abs() <= tol,
                Side::Right => (x[0] - bb[2]).abs() <= tol,
                Side::Bottom => (x[1] - bb[1]).abs() <= tol,
                Side::Top => (x[1] - bb[3]).abs() <= tol,
                Side::All => true,
            }
        };
        for g in &spec.traction {
            let mut v = vec![0.0; mesh.n_dofs()];
            let mut hit = false;
            for e in mesh.edges() {
                if e.label != EdgeLabel::G1 || mesh.is_collar(e.element) {
                    continue;
                }
                let [a, b] = e.nodes;
                if !(on_side(mesh.nodes()[a], g.side) && on_side(mesh.nodes()[b], g.side)) {
                    continue;
                }
                hit = true;
                let w = 0.5 * e.length(&mesh);
                for i in [a, b] {
                    v[2 * i] += w * g.value[0];
                    v[2 * i + 1] += w * g.value[1];
                }
            }
            if !hit {
                return Err(Error::InvalidScenario(format!(
                    "traction on side {:?} selects no G1 edge",
                    g.side
                )));
            }
            load_fields.push((v, g.schedule.clone()));
        }
        let rho_fields = spec
            .rho
            .iter()
            .map(|r| {
                let field = (0..mesh.n_elements())
                    .map(|el| {
                        let c = mesh.centroid(el);
                        let v: Vec<f64> = (0..3).map(|k| r.value[k] + c[0] * r.dx[k] + c[1] * r.dy[k]).collect();
                        SymTensor::new(2, &v).unwrap()
                    })
                    .collect();
                (field, r.schedule.clone())
            })
            .collect();
        let dirichlet = mesh.dirichlet_dofs();
        Ok(Self {
            spec,
            base_mesh,
            mesh,
            materials,
            material_of,
            dirichlet,
            w_fields,
            load_fields,
            rho_fields,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// The mesh before any collar is attached.
    pub fn base_mesh(&self) -> &Mesh {
        &self.base_mesh
    }

    /// Rebuilds with modified data on the same base mesh.
    pub fn with_spec(&self, spec: ScenarioSpec) -> Result<Self> {
        Self::with_mesh(spec, self.base_mesh.clone())
    }

    pub fn t_final(&self) -> f64 {
        self.spec.t_final
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn material(&self, el: usize) -> &Material {
        &self.materials[self.material_of[el]]
    }

    pub fn base_material(&self) -> &Material {
        &self.materials[0]
    }

    pub fn moduli(&self) -> ElasticModuli {
        self.materials[0].moduli
    }

    pub fn all_von_mises(&self) -> bool {
        self.materials.iter().all(|m| m.yield_surface.is_von_mises())
    }

    /// Largest outer radius over the materials in use.
    pub fn r_outer(&self) -> f64 {
        self.materials.iter().map(|m| m.yield_surface.r_outer()).fold(0.0, f64::max)
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    /// Knot times of all generators, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .w_fields
            .iter()
            .map(|f| &f.1)
            .chain(self.load_fields.iter().map(|f| &f.1))
            .chain(self.rho_fields.iter().map(|f| &f.1))
            .flat_map(|s| s.breakpoints())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn combine(fields: &[(Vec<f64>, Schedule)], n: usize, s: impl Fn(&Schedule) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (f, sch) in fields {
            let c = s(sch);
            if c != 0.0 {
                for (a, b) in v.iter_mut().zip(f) {
                    *a += c * b;
                }
            }
        }
        v
    }

    /// Nodal values of the boundary datum, extended affinely to every node.
    pub fn w_nodal(&self, t: f64) -> Vec<f64> {
        Self::combine(&self.w_fields, self.mesh.n_dofs(), |s| s.value(t))
    }

    /// Right time derivative of [`Scenario::w_nodal`].
    pub fn w_rate_nodal(&self, t: f64) -> Vec<f64> {
        Self::combine(&self.w_fields, self.mesh.n_dofs(), |s| s.rate(t))
    }

    pub fn ew(&self, t: f64) -> Vec<SymTensor> {
        strain_unchecked(&self.mesh, &self.w_nodal(t))
    }

    pub fn ew_rate(&self, t: f64) -> Vec<SymTensor> {
        strain_unchecked(&self.mesh, &self.w_rate_nodal(t))
    }

    /// Nodal force vector `F(t)` with `F·u = ⟨ℒ(t)|u⟩`.
    pub fn load(&self, t: f64) -> Vec<f64> {
        Self::combine(&self.load_fields, self.mesh.n_dofs(), |s| s.value(t))
    }

    pub fn load_rate(&self, t: f64) -> Vec<f64> {
        Self::combine(&self.load_fields, self.mesh.n_dofs(), |s| s.rate(t))
    }

    fn combine_rho(&self, s: impl Fn(&Schedule) -> f64) -> Vec<SymTensor> {
        let mut v = vec![SymTensor::zeros(2); self.mesh.n_elements()];
        for (f, sch) in &self.rho_fields {
            let c = s(sch);
            if c != 0.0 {
                for (a, b) in v.iter_mut().zip(f) {
                    *a += *b * c;
                }
            }
        }
        v
    }

    pub fn rho(&self, t: f64) -> Vec<SymTensor> {
        self.combine_rho(|s| s.value(t))
    }

    pub fn rho_rate(&self, t: f64) -> Vec<SymTensor> {
        self.combine_rho(|s| s.rate(t))
    }

    /// `𝓗(p) = Σ area H(p)` with the elementwise yield sets.
    pub fn h_functional(&self, p: &[DevTensor]) -> f64 {
        self.mesh
            .areas()
            .iter()
            .zip(p)
            .enumerate()
            .map(|(el, (w, x))| w * self.material(el).support(x))
            .sum()
    }

    /// `𝓠(e) = Σ area Q(e)`.
    pub fn q_functional(&self, e: &[SymTensor]) -> f64 {
        let m = self.moduli();
        self.mesh.areas().iter().zip(e).map(|(w, x)| w * m.quad_q(x)).sum()
    }

    pub fn stress(&self, e: &[SymTensor]) -> Vec<SymTensor> {
        let m = self.moduli();
        e.iter().map(|x| m.stress(x)).collect()
    }

    /// Integral of `‖Eẇ‖₂` over `[a, b]`, exact for piecewise-linear schedules.
    pub fn ew_rate_integral(&self, a: f64, b: f64) -> f64 {
        self.piecewise_integral(a, b, |t| l2_norm(&self.mesh, &self.ew_rate(t)))
    }

    /// Integral of `‖ρ̇‖₂` over `[a, b]`.
    pub fn rho_rate_integral(&self, a: f64, b: f64) -> f64 {
        self.piecewise_integral(a, b, |t| l2_norm(&self.mesh, &self.rho_rate(t)))
    }

    /// Integrates a function that is constant between breakpoints.
    fn piecewise_integral(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| (w[1] - w[0]) * f(0.5 * (w[0] + w[1])))
            .sum()
    }
}

/// Nodal force vector of `⟨ℒ(t)|·⟩`.
pub fn assemble_load(scenario: &Scenario, t: f64) -> Vec<f64> {
    scenario.load(t)
}

/// Outcome of [`check_safe_load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeLoadReport {
    pub t: f64,
    pub alpha: f64,
    /// Smallest distance from `ρ_D` to the complement of `K`.
    pub min_margin: f64,
    pub worst_element: usize,
    /// Elements with margin below `α`.
    pub violating: Vec<usize>,
    /// `‖Bᵀρ - F‖` on free degrees of freedom.
    pub equilibrium_residual: f64,
    pub equilibrium_tol: f64,
    /// Smallest `𝓗(p) - ⟨ρ_D|p⟩ - α‖p‖₁` over the random fields.
    pub coercivity_slack: f64,
    pub passed: bool,
}

impl SafeLoadReport {
    pub fn detail(&self) -> String {
        format!(
            "min margin {:.6e} (alpha {:.6e}, {} violating elements, worst {}), equilibrium residual {:.3e} (tol {:.3e}), coercivity slack {:.3e}",
            self.min_margin,
            self.alpha,
            self.violating.len(),
            self.worst_element,
            self.equilibrium_residual,
            self.equilibrium_tol,
            self.coercivity_slack
        )
    }
}

pub const SAFE_LOAD_SAMPLES: usize = 50;
const COERCIVITY_TOL: f64 = 1e-10;

/// Free-dof Euclidean norm.
pub fn free_norm(v: &[f64], dirichlet: &[usize]) -> f64 {
    let mut fixed = vec![false; v.len()];
    for &d in dirichlet {
        fixed[d] = true;
    }
    v.iter()
        .zip(&fixed)
        .filter(|(_, f)| !**f)
        .map(|(x, _)| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Margin, equilibrium and coercivity of the safe-load field at time `t`.
pub fn check_safe_load(scenario: &Scenario, t: f64) -> SafeLoadReport {
    let mesh = scenario.mesh();
    let rho = scenario.rho(t);
    let alpha = scenario.alpha();
    let mut min_margin = f64::INFINITY;
    let mut worst = 0;
    let mut violating = Vec::new();
    for (el, r) in rho.iter().enumerate() {
        let m = -scenario.material(el).yield_surface.violation(&r.deviator());
        if m < min_margin {
            min_margin = m;
            worst = el;
        }
        if m < alpha - 1e-12 {
            violating.push(el);
        }
    }
    let f = scenario.load(t);
    let b = internal_force(mesh, &rho);
    let res: Vec<f64> = b.iter().zip(&f).map(|(x, y)| x - y).collect();
    let eq_res = free_norm(&res, scenario.dirichlet_dofs());
    let scale = free_norm(&f, &[]).max(free_norm(&b, &[])).max(1.0);
    let eq_tol = scenario.spec().tol_eq * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5afe_10ad ^ t.to_bits());
    let mut slack = f64::INFINITY;
    for _ in 0..SAFE_LOAD_SAMPLES {
        let amp: f64 = rng.random_range(0.0..10.0);
        let p: Vec<DevTensor> = (0..mesh.n_elements())
            .map(|_| {
                if rng.random_bool(0.3) {
                    DevTensor::zeros(2)
                } else {
                    let a = rng.random_range(-amp..amp);
                    let b = rng.random_range(-amp..amp);
                    DevTensor::from_coords(2, &[a, b]).unwrap()
                }
            })
            .collect();
        let pairing: f64 = mesh
            .areas()
            .iter()
            .zip(rho.iter().zip(&p))
            .map(|(w, (r, q))| w * r.deviator().ddot(q))
            .sum();
        let s = scenario.h_functional(&p) - pairing - alpha * l1_norm(mesh, &p);
        slack = slack.min(s);
    }
    let passed = violating.is_empty() && eq_res <= eq_tol && slack >= -COERCIVITY_TOL;
    SafeLoadReport {
        t,
        alpha,
        min_margin,
        worst_element: worst,
        violating,
        equilibrium_residual: eq_res,
        equilibrium_tol: eq_tol,
        coercivity_slack: slack,
        passed,
    }
}

/// Displacement, elastic strain and plastic strain with `Eu = e + p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTriple {
    pub u: Vec<f64>,
    pub e: Vec<SymTensor>,
    pub p: Vec<DevTensor>,
}

impl DiscreteTriple {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            u: vec![0.0; mesh.n_dofs()],
            e: vec![SymTensor::zeros(2); mesh.n_elements()],
            p: vec![DevTensor::zeros(2); mesh.n_elements()],
        }
    }

    /// The triple with `e := Eu - p`.
    pub fn from_up(mesh: &Mesh, u: Vec<f64>, p: Vec<DevTensor>) -> Result<Self> {
        if p.len() != mesh.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_elements(),
                got: p.len(),
            });
        }
        let eu = strain(mesh, &u)?;
        let e = eu.iter().zip(&p).map(|(x, q)| *x - q.into_sym()).collect();
        Ok(Self { u, e, p })
    }

    /// Largest `|Eu - e - p|` over elements.
    pub fn compatibility_error(&self, mesh: &Mesh) -> f64 {
        strain_unchecked(mesh, &self.u)
            .iter()
            .zip(self.e.iter().zip(&self.p))
            .map(|(eu, (e, p))| (*eu - *e - p.into_sym()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from `w` on the Dirichlet degrees of freedom.
    pub fn boundary_error(&self, scenario: &Scenario, t: f64) -> f64 {
        let w = scenario.w_nodal(t);
        scenario
            .dirichlet_dofs()
            .iter()
            .map(|&d| (self.u[d] - w[d]).abs())
            .fold(0.0, f64::max)
    }

    pub fn stress(&self, scenario: &Scenario) -> Vec<SymTensor> {
        scenario.stress(&self.e)
    }
}
