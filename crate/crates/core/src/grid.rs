//! Uniform node-centred grids on `[-1, 1]^N` and node-valued fields.
//!
//! Nodes are numbered lexicographically with the first axis slowest, so the
//! flat index of `(i_1, ..., i_N)` is `((i_1 * n) + i_2) * n + i_3`. With an odd
//! number of nodes per axis the origin is always a node.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Squared-radius slack used when testing membership of the unit ball.
const BALL_EPS: f64 = 1e-12;

pub const MIN_NODES_PER_AXIS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Ball,
    Cube,
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Ball => "ball",
            Shape::Cube => "cube",
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ball" => Ok(Shape::Ball),
            "cube" => Ok(Shape::Cube),
            other => Err(Error::param(format!("unknown shape '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    shape: Shape,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, shape: Shape) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < MIN_NODES_PER_AXIS || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "nodes per axis must be odd and at least {MIN_NODES_PER_AXIS}, got {n}"
            )));
        }
        Ok(Self { dim, n, shape })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.n - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
}

/// A grid together with its (cached) node classification.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    strides: [usize; 3],
    classes: Vec<NodeClass>,
    interior: Vec<usize>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Arc<Self> {
        let n = spec.n;
        let dim = spec.dim;
        let mut strides = [0usize; 3];
        for (axis, stride) in strides.iter_mut().enumerate().take(dim) {
            *stride = n.pow((dim - 1 - axis) as u32);
        }
        let mut grid = Grid {
            spec,
            h: spec.spacing(),
            strides,
            classes: Vec::new(),
            interior: Vec::new(),
        };
        grid.classes = grid.classify();
        grid.interior = (0..grid.len())
            .filter(|&i| grid.classes[i] == NodeClass::Interior)
            .collect();
        Arc::new(grid)
    }

    /// Convenience constructor combining [`GridSpec::new`] and [`Grid::new`].
    pub fn build(dim: usize, n: usize, shape: Shape) -> Result<Arc<Self>> {
        Ok(Self::new(GridSpec::new(dim, n, shape)?))
    }

    fn classify(&self) -> Vec<NodeClass> {
        let n = self.spec.n;
        let mut out = Vec::with_capacity(self.len());
        let mut idx = [0usize; 3];
        for flat in 0..self.len() {
            self.unflatten(flat, &mut idx);
            let class = match self.spec.shape {
                Shape::Cube => {
                    if idx[..self.dim()].iter().all(|&i| i > 0 && i < n - 1) {
                        NodeClass::Interior
                    } else {
                        NodeClass::Boundary
                    }
                }
                Shape::Ball => {
                    let r2 = self.norm_sq_at(&idx);
                    if r2 > 1.0 + BALL_EPS {
                        NodeClass::Exterior
                    } else if r2 < 1.0 - BALL_EPS && self.neighbours_in_ball(&idx) {
                        NodeClass::Interior
                    } else {
                        NodeClass::Boundary
                    }
                }
            };
            out.push(class);
        }
        out
    }

    fn neighbours_in_ball(&self, idx: &[usize; 3]) -> bool {
        let n = self.spec.n;
        for axis in 0..self.dim() {
            if idx[axis] == 0 || idx[axis] == n - 1 {
                return false;
            }
            for delta in [-1isize, 1] {
                let mut nb = *idx;
                nb[axis] = (idx[axis] as isize + delta) as usize;
                if self.norm_sq_at(&nb) > 1.0 + BALL_EPS {
                    return false;
                }
            }
        }
        true
    }

    fn norm_sq_at(&self, idx: &[usize; 3]) -> f64 {
        idx[..self.dim()]
            .iter()
            .map(|&i| {
                let x = self.axis_coord(i);
                x * x
            })
            .sum()
    }

    /// Coordinate of grid index `i` along any axis; exactly antisymmetric about the centre.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        let m = (self.spec.n - 1) as f64;
        (2.0 * i as f64 - m) / m
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.spec.n
    }

    pub fn shape(&self) -> Shape {
        self.spec.shape
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `h^N`, the volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn len(&self) -> usize {
        self.spec.node_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn class(&self, node: usize) -> NodeClass {
        self.classes[node]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    /// Interior nodes in increasing index order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.classes[i] == NodeClass::Boundary)
    }

    pub fn unflatten(&self, flat: usize, idx: &mut [usize; 3]) {
        let n = self.spec.n;
        let mut rest = flat;
        for axis in (0..self.dim()).rev() {
            idx[axis] = rest % n;
            rest /= n;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    /// Writes the coordinates of `node` into `out[..dim]`.
    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unflatten(node, &mut idx);
        for axis in 0..self.dim() {
            out[axis] = self.axis_coord(idx[axis]);
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coords_into(node, &mut out);
        out
    }

    pub fn norm(&self, node: usize) -> f64 {
        let mut idx = [0usize; 3];
        self.unflatten(node, &mut idx);
        self.norm_sq_at(&idx).sqrt()
    }

    /// Neighbour of `node` one step along `axis` (`forward` selects the sign).
    pub fn neighbour(&self, node: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut idx = [0usize; 3];
        self.unflatten(node, &mut idx);
        if forward {
            (idx[axis] + 1 < self.spec.n).then(|| node + self.strides[axis])
        } else {
            (idx[axis] > 0).then(|| node - self.strides[axis])
        }
    }

    /// Index of the node with the given coordinates, if one exists.
    pub fn locate(&self, coords: &[f64]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let m = (self.spec.n - 1) as f64;
        let mut idx = [0usize; 3];
        for (axis, &x) in coords.iter().enumerate() {
            let pos = (x + 1.0) * m / 2.0;
            let rounded = pos.round();
            if !(0.0..=m).contains(&rounded) || (pos - rounded).abs() > 1e-6 {
                return None;
            }
            idx[axis] = rounded as usize;
        }
        Some(self.flatten(&idx[..self.dim()]))
    }

    /// Nodes with `|x| <= r`, all of which must be interior.
    pub fn interior_ball_nodes(&self, r: f64) -> Result<Vec<usize>> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::param(format!("radius must lie in (0, 1), got {r}")));
        }
        let mut out = Vec::new();
        for node in 0..self.len() {
            if self.norm(node) <= r + BALL_EPS {
                if self.classes[node] != NodeClass::Interior {
                    return Err(Error::param(format!(
                        "radius {r} reaches non-interior node {:?}",
                        self.coords(node)
                    )));
                }
                out.push(node);
            }
        }
        Ok(out)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Node-valued function on a grid. `None` marks a node without a value;
/// exterior nodes are always unset.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<Option<f64>>,
}

impl ScalarField {
    /// A field with no values set.
    pub fn unset(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![None; grid.len()],
        }
    }

    /// Evaluates `f` at every non-exterior node.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![None; grid.len()];
        let mut x = [0.0; 3];
        for (node, slot) in values.iter_mut().enumerate() {
            if grid.class(node) == NodeClass::Exterior {
                continue;
            }
            grid.coords_into(node, &mut x);
            let v = f(&x[..grid.dim()]);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "value {v} at node {:?}",
                    &x[..grid.dim()]
                )));
            }
            *slot = Some(v);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_| c)
    }

    /// Builds a field from raw per-node values; exterior entries are ignored.
    pub fn from_values(grid: &Arc<Grid>, raw: &[f64]) -> Result<Self> {
        if raw.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                raw.len()
            )));
        }
        let mut field = Self::unset(grid);
        for (node, &v) in raw.iter().enumerate() {
            if grid.class(node) != NodeClass::Exterior {
                field.set(node, v)?;
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, node: usize) -> Option<f64> {
        self.values[node]
    }

    pub fn set(&mut self, node: usize, value: f64) -> Result<()> {
        if self.grid.class(node) == NodeClass::Exterior {
            return Err(Error::param(format!(
                "node {node} is exterior and cannot carry a value"
            )));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("value {value} at node {node}")));
        }
        self.values[node] = Some(value);
        Ok(())
    }

    pub fn clear(&mut self, node: usize) {
        self.values[node] = None;
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// `(node, value)` pairs of all set nodes.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    pub fn set_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Dense copy with unset nodes replaced by `fill`.
    pub fn to_dense(&self, fill: f64) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(fill)).collect()
    }

    /// Sup norm over set nodes (0 for an empty field).
    pub fn sup_norm(&self) -> f64 {
        self.iter_set().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    /// Sup norm restricted to interior nodes.
    pub fn interior_sup_norm(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .filter_map(|&i| self.values[i])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map over set nodes.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.map(&mut f)).collect(),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        self.map(|v| lambda * v)
    }

    /// Same field with only the interior values kept.
    pub fn interior_only(&self) -> Self {
        let mut out = Self::unset(&self.grid);
        for &i in self.grid.interior_nodes() {
            out.values[i] = self.values[i];
        }
        out
    }

    /// Largest absolute difference over nodes set in both fields.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max))
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.values == other.values
    }
}
