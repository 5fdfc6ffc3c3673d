//! Marching squares on a rectilinear grid.

use std::collections::HashMap;

/// Ordered list of `(x, y)` points.
pub type Polyline = Vec<(f64, f64)>;

/// A crossing point on a grid edge, keyed by the edge it lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeId {
    /// Edge from node `(i, j)` to `(i + 1, j)`.
    AlongX(usize, usize),
    /// Edge from node `(i, j)` to `(i, j + 1)`.
    AlongY(usize, usize),
}

/// Scalar samples on the tensor grid `xs × ys`, stored with `x` as the slow
/// index: `values[i * ys.len() + j]` is the sample at `(xs[i], ys[j])`.
#[derive(Debug, Clone)]
pub struct ScalarGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn edge_endpoints(&self, e: EdgeId) -> ((usize, usize), (usize, usize)) {
        match e {
            EdgeId::AlongX(i, j) => ((i, j), (i + 1, j)),
            EdgeId::AlongY(i, j) => ((i, j), (i, j + 1)),
        }
    }

    fn crossing(&self, e: EdgeId, level: f64) -> (f64, f64) {
        let ((i0, j0), (i1, j1)) = self.edge_endpoints(e);
        let (v0, v1) = (self.value(i0, j0), self.value(i1, j1));
        let t = if v1 == v0 { 0.5 } else { (level - v0) / (v1 - v0) };
        let x = self.xs[i0] + t * (self.xs[i1] - self.xs[i0]);
        let y = self.ys[j0] + t * (self.ys[j1] - self.ys[j0]);
        (x, y)
    }
}

/// Raw contour segments, each joining crossings on two edges of one cell.
pub fn segments(grid: &ScalarGrid, level: f64) -> Vec<(EdgeId, EdgeId)> {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let mut out = Vec::new();
    if nx < 2 || ny < 2 {
        return out;
    }
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [
                grid.value(i, j),
                grid.value(i + 1, j),
                grid.value(i + 1, j + 1),
                grid.value(i, j + 1),
            ];
            if c.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let above = c.map(|v| v > level);
            // bottom, right, top, left
            let edges = [
                EdgeId::AlongX(i, j),
                EdgeId::AlongY(i + 1, j),
                EdgeId::AlongX(i, j + 1),
                EdgeId::AlongY(i, j),
            ];
            let cut = [
                above[0] != above[1],
                above[1] != above[2],
                above[3] != above[2],
                above[0] != above[3],
            ];
            let hits: Vec<usize> = (0..4).filter(|&k| cut[k]).collect();
            match hits.len() {
                2 => out.push((edges[hits[0]], edges[hits[1]])),
                4 => {
                    // saddle: the cell centre decides which diagonal is connected
                    let centre = c.iter().sum::<f64>() / 4.0 > level;
                    if centre == above[0] {
                        out.push((edges[0], edges[1]));
                        out.push((edges[2], edges[3]));
                    } else {
                        out.push((edges[3], edges[0]));
                        out.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Zero-level (or `level`) contours, with segments chained through shared
/// edge crossings. Open chains come first, then closed loops, in scan order.
pub fn march(grid: &ScalarGrid, level: f64) -> Vec<Polyline> {
    let segs = segments(grid, level);
    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segs.iter().enumerate() {
        by_edge.entry(*a).or_default().push(s);
        by_edge.entry(*b).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut chains: Vec<Vec<EdgeId>> = Vec::new();

    let walk = |start_seg: usize, start_edge: EdgeId, used: &mut Vec<bool>| {
        let mut chain = vec![start_edge];
        let (mut seg, mut at) = (start_seg, start_edge);
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            let next = if a == at { b } else { a };
            chain.push(next);
            at = next;
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        chain
    };

    // open chains start at edges touched by a single segment
    for s in 0..segs.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segs[s];
        for e in [a, b] {
            if by_edge[&e].len() == 1 && !used[s] {
                chains.push(walk(s, e, &mut used));
            }
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            let start = segs[s].0;
            chains.push(walk(s, start, &mut used));
        }
    }

    chains
        .into_iter()
        .map(|c| c.into_iter().map(|e| grid.crossing(e, level)).collect())
        .collect()
}
