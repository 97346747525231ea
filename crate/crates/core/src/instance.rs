//! TSPLIB ingestion, integer cost matrices and tour arithmetic.
//!
//! Costs are computed once, at construction, with the exact TSPLIB95 distance
//! functions and stored as integers. Nodes are 0-based everywhere inside the
//! crate; the 1-based TSPLIB labels only exist in the text format.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest instance the solver accepts.
pub const MIN_DIMENSION: usize = 3;

/// Earth radius used by the TSPLIB `GEO` distance.
pub const GEO_RADIUS: f64 = 6378.388;

/// The truncated value of pi that the TSPLIB `GEO` definition prescribes.
#[allow(clippy::approx_constant)]
pub const GEO_PI: f64 = 3.141592;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeWeightType {
    #[serde(rename = "EUC_2D")]
    Euc2d,
    #[serde(rename = "GEO")]
    Geo,
    #[serde(rename = "EXPLICIT")]
    Explicit,
}

impl EdgeWeightType {
    pub fn keyword(self) -> &'static str {
        match self {
            EdgeWeightType::Euc2d => "EUC_2D",
            EdgeWeightType::Geo => "GEO",
            EdgeWeightType::Explicit => "EXPLICIT",
        }
    }
}

impl fmt::Display for EdgeWeightType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for EdgeWeightType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EUC_2D" => Ok(EdgeWeightType::Euc2d),
            "GEO" => Ok(EdgeWeightType::Geo),
            "EXPLICIT" => Ok(EdgeWeightType::Explicit),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// TSPLIB distance between two points.
///
/// `EUC_2D` is the Euclidean norm rounded to the nearest integer. `GEO` reads
/// each coordinate as `DDD.MM` (degrees, minutes), converts to radians and
/// applies the great-circle formula, truncating to an integer the way the
/// reference C code does. `EXPLICIT` has no distance function and returns 0.
pub fn distance(kind: EdgeWeightType, a: Point, b: Point) -> u64 {
    match kind {
        EdgeWeightType::Euc2d => {
            let dx = a.x - b.x;
            let dy = a.y - b.y;
            nint((dx * dx + dy * dy).sqrt())
        }
        EdgeWeightType::Geo => {
            let (lat_a, lon_a) = (geo_radians(a.x), geo_radians(a.y));
            let (lat_b, lon_b) = (geo_radians(b.x), geo_radians(b.y));
            let q1 = (lon_a - lon_b).cos();
            let q2 = (lat_a - lat_b).cos();
            let q3 = (lat_a + lat_b).cos();
            let arg = (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).clamp(-1.0, 1.0);
            (GEO_RADIUS * arg.acos() + 1.0) as u64
        }
        EdgeWeightType::Explicit => 0,
    }
}

fn nint(value: f64) -> u64 {
    (value + 0.5) as u64
}

fn geo_radians(value: f64) -> f64 {
    let degrees = value.trunc();
    let minutes = value - degrees;
    GEO_PI * (degrees + 5.0 * minutes / 3.0) / 180.0
}

/// Dense row-major `n x n` matrix of integer edge costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<u64>,
}

impl CostMatrix {
    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.data[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[u64] {
        &self.data[from * self.n..(from + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n).map(<[u64]>::to_vec).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance needs at least {MIN_DIMENSION} nodes, got {0}")]
    TooSmall(usize),
    #[error("cost matrix row {row} has {len} entries, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("cost matrix diagonal entry ({0}, {0}) is not zero")]
    NonZeroDiagonal(usize),
    #[error("coordinates of node {0} are not finite")]
    NonFinite(usize),
    #[error("{0} instances must be built from coordinates")]
    NeedsCoordinates(EdgeWeightType),
    #[error("stored costs disagree with the {0} distance function")]
    CostMismatch(EdgeWeightType),
}

/// An immutable TSP instance with its cost matrix fully materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDocument", into = "InstanceDocument")]
pub struct Instance {
    name: String,
    edge_weight_type: EdgeWeightType,
    coordinates: Option<Vec<Point>>,
    costs: CostMatrix,
    symmetric: bool,
}

impl Instance {
    pub fn from_coordinates(
        name: impl Into<String>,
        edge_weight_type: EdgeWeightType,
        coordinates: Vec<Point>,
    ) -> Result<Self, InstanceError> {
        if edge_weight_type == EdgeWeightType::Explicit {
            return Err(InstanceError::NeedsCoordinates(edge_weight_type));
        }
        let n = coordinates.len();
        if n < MIN_DIMENSION {
            return Err(InstanceError::TooSmall(n));
        }
        if let Some(bad) = coordinates
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(InstanceError::NonFinite(bad));
        }
        let mut data = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    data[i * n + j] = distance(edge_weight_type, coordinates[i], coordinates[j]);
                }
            }
        }
        let costs = CostMatrix { n, data };
        let symmetric = costs.is_symmetric();
        Ok(Instance {
            name: name.into(),
            edge_weight_type,
            coordinates: Some(coordinates),
            costs,
            symmetric,
        })
    }

    pub fn from_matrix(name: impl Into<String>, rows: Vec<Vec<u64>>) -> Result<Self, InstanceError> {
        let n = rows.len();
        if n < MIN_DIMENSION {
            return Err(InstanceError::TooSmall(n));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(InstanceError::Ragged { row: i, len: row.len(), expected: n });
            }
            if row[i] != 0 {
                return Err(InstanceError::NonZeroDiagonal(i));
            }
            data.extend(row);
        }
        let costs = CostMatrix { n, data };
        let symmetric = costs.is_symmetric();
        Ok(Instance {
            name: name.into(),
            edge_weight_type: EdgeWeightType::Explicit,
            coordinates: None,
            costs,
            symmetric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.costs.n
    }

    pub fn edge_weight_type(&self) -> EdgeWeightType {
        self.edge_weight_type
    }

    pub fn coordinates(&self) -> Option<&[Point]> {
        self.coordinates.as_deref()
    }

    pub fn costs(&self) -> &CostMatrix {
        &self.costs
    }

    #[inline]
    pub fn cost(&self, from: usize, to: usize) -> u64 {
        self.costs.get(from, to)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Restriction of the instance to `nodes`, in the given order. Node `k` of
    /// the result is `nodes[k]` of `self`.
    pub fn subset(&self, name: impl Into<String>, nodes: &[usize]) -> Result<Self, InstanceError> {
        match (&self.coordinates, self.edge_weight_type) {
            (Some(coords), kind) if kind != EdgeWeightType::Explicit => Self::from_coordinates(
                name,
                kind,
                nodes.iter().map(|&v| coords[v]).collect(),
            ),
            _ => Self::from_matrix(
                name,
                nodes
                    .iter()
                    .map(|&a| nodes.iter().map(|&b| self.cost(a, b)).collect())
                    .collect(),
            ),
        }
    }

    /// Serializes back to TSPLIB text. Coordinates use the shortest decimal
    /// that round-trips, so re-parsing yields the same cost matrix.
    pub fn to_tsplib(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME: {}", self.name);
        let _ = writeln!(out, "TYPE: TSP");
        let _ = writeln!(out, "DIMENSION: {}", self.dimension());
        let _ = writeln!(out, "EDGE_WEIGHT_TYPE: {}", self.edge_weight_type);
        match &self.coordinates {
            Some(coords) => {
                let _ = writeln!(out, "NODE_COORD_SECTION");
                for (i, p) in coords.iter().enumerate() {
                    let _ = writeln!(out, "{} {:?} {:?}", i + 1, p.x, p.y);
                }
            }
            None => {
                let _ = writeln!(out, "EDGE_WEIGHT_FORMAT: FULL_MATRIX");
                let _ = writeln!(out, "EDGE_WEIGHT_SECTION");
                for row in self.costs.data.chunks(self.costs.n) {
                    let line: Vec<String> = row.iter().map(u64::to_string).collect();
                    let _ = writeln!(out, "{}", line.join(" "));
                }
            }
        }
        out.push_str("EOF\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}

/// Canonical JSON layout of an [`Instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDocument {
    name: String,
    dimension: usize,
    edge_weight_type: EdgeWeightType,
    coordinates: Option<Vec<[f64; 2]>>,
    costs: Vec<Vec<u64>>,
}

impl From<Instance> for InstanceDocument {
    fn from(instance: Instance) -> Self {
        InstanceDocument {
            dimension: instance.dimension(),
            costs: instance.costs.rows(),
            name: instance.name,
            edge_weight_type: instance.edge_weight_type,
            coordinates: instance
                .coordinates
                .map(|c| c.into_iter().map(|p| [p.x, p.y]).collect()),
        }
    }
}

impl TryFrom<InstanceDocument> for Instance {
    type Error = InstanceError;

    fn try_from(doc: InstanceDocument) -> Result<Self, Self::Error> {
        let instance = match doc.coordinates {
            Some(coords) if doc.edge_weight_type != EdgeWeightType::Explicit => {
                let built = Instance::from_coordinates(
                    doc.name,
                    doc.edge_weight_type,
                    coords.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
                )?;
                if built.costs.rows() != doc.costs {
                    return Err(InstanceError::CostMismatch(doc.edge_weight_type));
                }
                built
            }
            Some(_) | None if doc.edge_weight_type == EdgeWeightType::Explicit => {
                Instance::from_matrix(doc.name, doc.costs)?
            }
            _ => return Err(InstanceError::NeedsCoordinates(doc.edge_weight_type)),
        };
        if instance.dimension() != doc.dimension {
            return Err(InstanceError::Ragged {
                row: 0,
                len: instance.dimension(),
                expected: doc.dimension,
            });
        }
        Ok(instance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("missing required field {0}")]
    MissingField(&'static str),
    #[error("unsupported EDGE_WEIGHT_TYPE {0}")]
    UnsupportedEdgeWeightType(String),
    #[error("unsupported EDGE_WEIGHT_FORMAT {0}")]
    UnsupportedEdgeWeightFormat(String),
    #[error("unsupported problem TYPE {0}")]
    UnsupportedProblemType(String),
    #[error("DIMENSION is {expected} but the section holds {found} entries")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed number {0:?}")]
    MalformedNumber(String),
    #[error("node label {0} is out of range or repeated")]
    BadNodeLabel(String),
    #[error("unexpected line {0:?}")]
    UnexpectedLine(String),
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MatrixFormat {
    FullMatrix,
    UpperRow,
    LowerRow,
    UpperDiagRow,
    LowerDiagRow,
}

impl MatrixFormat {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "FULL_MATRIX" => MatrixFormat::FullMatrix,
            "UPPER_ROW" => MatrixFormat::UpperRow,
            "LOWER_ROW" => MatrixFormat::LowerRow,
            "UPPER_DIAG_ROW" => MatrixFormat::UpperDiagRow,
            "LOWER_DIAG_ROW" => MatrixFormat::LowerDiagRow,
            _ => return None,
        })
    }

    fn entry_count(self, n: usize) -> usize {
        match self {
            MatrixFormat::FullMatrix => n * n,
            MatrixFormat::UpperRow | MatrixFormat::LowerRow => n * (n - 1) / 2,
            MatrixFormat::UpperDiagRow | MatrixFormat::LowerDiagRow => n * (n + 1) / 2,
        }
    }

    /// Cells `(i, j)` in the order the format lists them.
    fn cells(self, n: usize) -> Vec<(usize, usize)> {
        let mut cells = Vec::with_capacity(self.entry_count(n));
        for i in 0..n {
            let range = match self {
                MatrixFormat::FullMatrix => 0..n,
                MatrixFormat::UpperRow => i + 1..n,
                MatrixFormat::UpperDiagRow => i..n,
                MatrixFormat::LowerRow => 0..i,
                MatrixFormat::LowerDiagRow => 0..i + 1,
            };
            cells.extend(range.map(|j| (i, j)));
        }
        cells
    }
}

fn is_keyword_line(line: &str) -> bool {
    line.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
}

fn split_header(line: &str) -> (&str, &str) {
    match line.split_once(':') {
        Some((k, v)) => (k.trim(), v.trim()),
        None => (line.trim(), ""),
    }
}

fn parse_num<T: FromStr>(token: &str, line: usize) -> Result<T, ParseError> {
    token.parse().map_err(|_| ParseError {
        line,
        kind: ParseErrorKind::MalformedNumber(token.to_string()),
    })
}

/// Parses the text of a TSPLIB95 `.tsp` file.
pub fn parse_tsplib(text: &str) -> Result<Instance, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let end_line = lines.len().max(1);

    let mut name: Option<String> = None;
    let mut dimension: Option<(usize, usize)> = None;
    let mut kind: Option<EdgeWeightType> = None;
    let mut format: Option<MatrixFormat> = None;
    let mut coords: Option<(Vec<Option<Point>>, usize)> = None;
    let mut weights: Option<(Vec<(u64, usize)>, usize)> = None;

    let mut idx = 0;
    while idx < lines.len() {
        let lineno = idx + 1;
        let line = lines[idx].trim();
        idx += 1;
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_header(line);
        match key {
            "EOF" => break,
            "NAME" => name = Some(value.to_string()),
            "COMMENT" | "DISPLAY_DATA_TYPE" | "NODE_COORD_TYPE" | "EDGE_DATA_FORMAT" => {}
            "TYPE" => {
                if value != "TSP" {
                    return Err(ParseError {
                        line: lineno,
                        kind: ParseErrorKind::UnsupportedProblemType(value.to_string()),
                    });
                }
            }
            "DIMENSION" => dimension = Some((parse_num(value, lineno)?, lineno)),
            "EDGE_WEIGHT_TYPE" => {
                kind = Some(value.parse().map_err(|v| ParseError {
                    line: lineno,
                    kind: ParseErrorKind::UnsupportedEdgeWeightType(v),
                })?)
            }
            "EDGE_WEIGHT_FORMAT" => {
                // FUNCTION means "computed from coordinates".
                if value != "FUNCTION" {
                    format = Some(MatrixFormat::parse(value).ok_or_else(|| ParseError {
                        line: lineno,
                        kind: ParseErrorKind::UnsupportedEdgeWeightFormat(value.to_string()),
                    })?);
                }
            }
            "NODE_COORD_SECTION" => {
                let n = require_dimension(dimension, lineno)?;
                let mut points = vec![None; n];
                let mut found = 0;
                while idx < lines.len() && !is_keyword_line(lines[idx].trim()) {
                    let row = lines[idx].trim();
                    let rowno = idx + 1;
                    idx += 1;
                    if row.is_empty() {
                        continue;
                    }
                    let tokens: Vec<&str> = row.split_whitespace().collect();
                    if tokens.len() != 3 {
                        return Err(ParseError {
                            line: rowno,
                            kind: ParseErrorKind::UnexpectedLine(row.to_string()),
                        });
                    }
                    let label: usize = parse_num(tokens[0], rowno)?;
                    let x: f64 = parse_num(tokens[1], rowno)?;
                    let y: f64 = parse_num(tokens[2], rowno)?;
                    found += 1;
                    if found > n {
                        return Err(ParseError {
                            line: rowno,
                            kind: ParseErrorKind::DimensionMismatch { expected: n, found },
                        });
                    }
                    match label.checked_sub(1).and_then(|k| points.get_mut(k)) {
                        Some(slot @ None) => *slot = Some(Point::new(x, y)),
                        _ => {
                            return Err(ParseError {
                                line: rowno,
                                kind: ParseErrorKind::BadNodeLabel(tokens[0].to_string()),
                            })
                        }
                    }
                }
                if found != n {
                    return Err(ParseError {
                        line: idx.max(1),
                        kind: ParseErrorKind::DimensionMismatch { expected: n, found },
                    });
                }
                coords = Some((points, lineno));
            }
            "EDGE_WEIGHT_SECTION" => {
                let mut values = Vec::new();
                while idx < lines.len() && !is_keyword_line(lines[idx].trim()) {
                    let rowno = idx + 1;
                    for token in lines[idx].split_whitespace() {
                        values.push((parse_num(token, rowno)?, rowno));
                    }
                    idx += 1;
                }
                weights = Some((values, lineno));
            }
            "DISPLAY_DATA_SECTION" => {
                while idx < lines.len() && !is_keyword_line(lines[idx].trim()) {
                    idx += 1;
                }
            }
            _ => {
                return Err(ParseError {
                    line: lineno,
                    kind: ParseErrorKind::UnexpectedLine(line.to_string()),
                })
            }
        }
    }

    let name = name.ok_or(ParseError {
        line: end_line,
        kind: ParseErrorKind::MissingField("NAME"),
    })?;
    let n = require_dimension(dimension, end_line)?;
    let kind = kind.ok_or(ParseError {
        line: end_line,
        kind: ParseErrorKind::MissingField("EDGE_WEIGHT_TYPE"),
    })?;
    let invalid = |line: usize| move |e: InstanceError| ParseError { line, kind: e.into() };

    match kind {
        EdgeWeightType::Explicit => {
            let format = format.ok_or(ParseError {
                line: end_line,
                kind: ParseErrorKind::MissingField("EDGE_WEIGHT_FORMAT"),
            })?;
            let (values, section_line) = weights.ok_or(ParseError {
                line: end_line,
                kind: ParseErrorKind::MissingField("EDGE_WEIGHT_SECTION"),
            })?;
            let expected = format.entry_count(n);
            if values.len() != expected {
                return Err(ParseError {
                    line: values.last().map_or(section_line, |v| v.1),
                    kind: ParseErrorKind::DimensionMismatch { expected, found: values.len() },
                });
            }
            let mut rows = vec![vec![0u64; n]; n];
            for ((i, j), (w, _)) in format.cells(n).into_iter().zip(values) {
                rows[i][j] = w;
                if format != MatrixFormat::FullMatrix {
                    rows[j][i] = w;
                }
            }
            Instance::from_matrix(name, rows).map_err(invalid(section_line))
        }
        geometric => {
            let (points, section_line) = coords.ok_or(ParseError {
                line: end_line,
                kind: ParseErrorKind::MissingField("NODE_COORD_SECTION"),
            })?;
            let points = points.into_iter().map(|p| p.expect("all labels filled")).collect();
            Instance::from_coordinates(name, geometric, points).map_err(invalid(section_line))
        }
    }
}

fn require_dimension(dimension: Option<(usize, usize)>, line: usize) -> Result<usize, ParseError> {
    let (n, at) = dimension.ok_or(ParseError {
        line,
        kind: ParseErrorKind::MissingField("DIMENSION"),
    })?;
    if n < MIN_DIMENSION {
        return Err(ParseError {
            line: at,
            kind: InstanceError::TooSmall(n).into(),
        });
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TourError {
    #[error("tour has {found} nodes, instance has {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("node {0} is out of range")]
    OutOfRange(usize),
    #[error("node {0} is visited twice")]
    Repeated(usize),
}

/// Checks that `order` is a permutation of `0..n`.
pub fn validate_permutation(order: &[usize], n: usize) -> Result<(), TourError> {
    if order.len() != n {
        return Err(TourError::WrongLength { expected: n, found: order.len() });
    }
    let mut seen = vec![false; n];
    for &v in order {
        match seen.get_mut(v) {
            None => return Err(TourError::OutOfRange(v)),
            Some(true) => return Err(TourError::Repeated(v)),
            Some(s) => *s = true,
        }
    }
    Ok(())
}

/// Length of the closed circuit through `order`, closing edge included.
pub fn tour_length(instance: &Instance, order: &[usize]) -> Result<u64, TourError> {
    validate_permutation(order, instance.dimension())?;
    Ok(cycle_length(instance, order))
}

pub(crate) fn cycle_length(instance: &Instance, order: &[usize]) -> u64 {
    let n = order.len();
    (0..n)
        .map(|k| instance.cost(order[k], order[(k + 1) % n]))
        .sum()
}

/// A Hamiltonian circuit with its cached integer length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Tour {
    order: Vec<usize>,
    length: u64,
}

impl Tour {
    pub fn new(instance: &Instance, order: Vec<usize>) -> Result<Self, TourError> {
        let length = tour_length(instance, &order)?;
        Ok(Tour { order, length })
    }

    /// For callers that already know `order` is a permutation.
    pub(crate) fn from_valid(instance: &Instance, order: Vec<usize>) -> Self {
        debug_assert!(validate_permutation(&order, instance.dimension()).is_ok());
        let length = cycle_length(instance, &order);
        Tour { order, length }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Directed edges of the circuit in visiting order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.order.len();
        (0..n).map(move |k| (self.order[k], self.order[(k + 1) % n]))
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }
}
