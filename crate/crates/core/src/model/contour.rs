use super::ModelParams;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Level set of the effective potential on the `z = 0` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy)]
pub struct ContourOptions {
    /// Grid nodes per axis.
    pub grid: usize,
    /// Half-width of the square window (kpc).
    pub half_width: f64,
    /// Vertex refinement tolerance relative to `|level|`.
    pub rel_tol: f64,
}

impl ContourOptions {
    /// Default window `[−1.5·x_L1, 1.5·x_L1]²` on a 1000×1000 grid.
    pub fn for_params(params: &ModelParams) -> Self {
        let xl = (params.v0 * params.v0 / (params.omega * params.omega) - params.r0_sq())
            .max(params.r0_sq())
            .sqrt();
        Self {
            grid: 1000,
            half_width: 1.5 * xl,
            rel_tol: 1e-9,
        }
    }
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.polylines.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }
}

// Edge keys: 2*(j*n + i) for the horizontal edge leaving node (i, j),
// 2*(j*n + i) + 1 for the vertical one.
fn h_edge(n: usize, i: usize, j: usize) -> usize {
    2 * (j * n + i)
}

fn v_edge(n: usize, i: usize, j: usize) -> usize {
    2 * (j * n + i) + 1
}

/// Extracts the zero-velocity curve `Φ_eff(x, y, 0) = level` by marching squares.
pub fn zero_velocity_curve(params: &ModelParams, level: f64, opts: &ContourOptions) -> Contour {
    let n = opts.grid.max(2);
    let w = opts.half_width;
    let step = 2.0 * w / (n - 1) as f64;
    let coord = |k: usize| -w + k as f64 * step;
    let f = |x: f64, y: f64| params.effective_potential([x, y, 0.0]) - level;

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = coord(j);
            (0..n).map(move |i| f(coord(i), y))
        })
        .collect();
    let val = |i: usize, j: usize| values[j * n + i];

    let tol = opts.rel_tol * level.abs().max(1.0);
    let refine = |a: [f64; 2], b: [f64; 2], fa: f64| -> [f64; 2] {
        let (mut lo, mut hi) = (a, b);
        let mut flo = fa;
        let mut mid = [(lo[0] + hi[0]) * 0.5, (lo[1] + hi[1]) * 0.5];
        for _ in 0..200 {
            mid = [(lo[0] + hi[0]) * 0.5, (lo[1] + hi[1]) * 0.5];
            let fm = f(mid[0], mid[1]);
            if fm.abs() < tol {
                break;
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        mid
    };

    let mut vertex: FxHashMap<usize, [f64; 2]> = FxHashMap::default();
    let mut adjacency: FxHashMap<usize, Vec<usize>> = FxHashMap::default();
    let mut edge_point = |key: usize, i: usize, j: usize, horizontal: bool| {
        vertex.entry(key).or_insert_with(|| {
            let a = [coord(i), coord(j)];
            let (b, fa) = if horizontal {
                ([coord(i + 1), coord(j)], val(i, j))
            } else {
                ([coord(i), coord(j + 1)], val(i, j))
            };
            refine(a, b, fa)
        });
    };

    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let mut idx = 0;
            for (k, v) in c.iter().enumerate() {
                if *v > 0.0 {
                    idx |= 1 << k;
                }
            }
            if idx == 0 || idx == 15 {
                continue;
            }
            // Cell edges: bottom, right, top, left.
            let edges = [
                (h_edge(n, i, j), i, j, true),
                (v_edge(n, i + 1, j), i + 1, j, false),
                (h_edge(n, i, j + 1), i, j + 1, true),
                (v_edge(n, i, j), i, j, false),
            ];
            let crosses = |k: usize| (c[k] > 0.0) != (c[(k + 1) % 4] > 0.0);
            let active: Vec<usize> = (0..4).filter(|&k| crosses(k)).collect();
            let pairs: Vec<(usize, usize)> = if active.len() == 2 {
                vec![(active[0], active[1])]
            } else {
                // Saddle cell: decide by the centre value.
                let centre = f(coord(i) + 0.5 * step, coord(j) + 0.5 * step);
                if (centre > 0.0) == (c[0] > 0.0) {
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(3, 0), (1, 2)]
                }
            };
            for (a, b) in pairs {
                let (ka, ia, ja, ha) = edges[a];
                let (kb, ib, jb, hb) = edges[b];
                edge_point(ka, ia, ja, ha);
                edge_point(kb, ib, jb, hb);
                adjacency.entry(ka).or_default().push(kb);
                adjacency.entry(kb).or_default().push(ka);
            }
        }
    }

    // Walk chains, starting from open ends first so open polylines come out whole.
    let mut keys: Vec<usize> = adjacency.keys().copied().collect();
    keys.sort_unstable();
    keys.sort_by_key(|k| adjacency[k].len());
    let mut visited: FxHashMap<usize, bool> = FxHashMap::default();
    let mut polylines = Vec::new();
    for start in keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut line = vec![vertex[&start]];
        visited.insert(start, true);
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adjacency[&cur]
                .iter()
                .copied()
                .find(|k| *k != prev && !visited.contains_key(k));
            match next {
                Some(k) => {
                    line.push(vertex[&k]);
                    visited.insert(k, true);
                    prev = cur;
                    cur = k;
                }
                None => {
                    if adjacency[&cur].contains(&start) && line.len() > 2 {
                        line.push(vertex[&start]);
                    }
                    break;
                }
            }
        }
        if line.len() > 1 {
            polylines.push(line);
        }
    }
    Contour { level, polylines }
}
