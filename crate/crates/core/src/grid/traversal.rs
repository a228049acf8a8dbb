//! Segment traversal of a unit square lattice (Amanatides-Woo style DDA).
//!
//! The walk is driven by the integer cell indices of both endpoints, so the
//! number of visited cells never depends on floating point drift of the
//! crossing parameters; those only decide the interleaving of x and y steps.
//! An endpoint lying exactly on a cell face belongs to the cell the segment
//! arrives from, and a start point on a face belongs to the cell the segment
//! heads into.

/// Coordinates within this distance of an integer are treated as lying on the face.
const FACE_SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < FACE_SNAP {
        r
    } else {
        v
    }
}

/// One visited cell and the segment parameter interval `[t_enter, t_exit]` inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkStep {
    pub cell: [i64; 2],
    pub t_enter: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone)]
pub struct LatticeWalk {
    cell: [i64; 2],
    step: [i64; 2],
    remaining: [u64; 2],
    t_next: [f64; 2],
    t_delta: [f64; 2],
    t_current: f64,
    done: bool,
}

impl LatticeWalk {
    /// Walk from `from` to `to`, both in lattice units (cell `k` spans `[k, k+1)`).
    pub fn new(from: [f64; 2], to: [f64; 2]) -> Self {
        let from = [snap(from[0]), snap(from[1])];
        let to = [snap(to[0]), snap(to[1])];
        let mut cell = [0i64; 2];
        let mut step = [0i64; 2];
        let mut remaining = [0u64; 2];
        let mut t_next = [f64::INFINITY; 2];
        let mut t_delta = [f64::INFINITY; 2];
        for a in 0..2 {
            let d = to[a] - from[a];
            if d > 0.0 {
                cell[a] = from[a].floor() as i64;
                let end = to[a].ceil() as i64 - 1;
                step[a] = 1;
                remaining[a] = (end - cell[a]).max(0) as u64;
                t_next[a] = ((cell[a] + 1) as f64 - from[a]) / d;
                t_delta[a] = 1.0 / d;
            } else if d < 0.0 {
                cell[a] = from[a].ceil() as i64 - 1;
                let end = to[a].floor() as i64;
                step[a] = -1;
                remaining[a] = (cell[a] - end).max(0) as u64;
                t_next[a] = (cell[a] as f64 - from[a]) / d;
                t_delta[a] = -1.0 / d;
            } else {
                cell[a] = from[a].floor() as i64;
            }
        }
        Self { cell, step, remaining, t_next, t_delta, t_current: 0.0, done: false }
    }

    /// Number of cells the walk visits in total.
    pub fn cell_count(&self) -> u64 {
        1 + self.remaining[0] + self.remaining[1]
    }

    /// Visit the same cells as the iterator without tracking the crossing
    /// parameters. `visit(cell, is_last)` returns `false` to stop early.
    pub fn for_each_cell(self, mut visit: impl FnMut([i64; 2], bool) -> bool) {
        if self.done {
            return;
        }
        let Self { mut cell, step, remaining: [mut rx, mut ry], mut t_next, t_delta, .. } = self;
        loop {
            let last = rx == 0 && ry == 0;
            if !visit(cell, last) || last {
                return;
            }
            let move_x = rx > 0 && (ry == 0 || t_next[0] <= t_next[1]);
            let move_y = ry > 0 && (rx == 0 || t_next[1] <= t_next[0]);
            if move_x {
                cell[0] += step[0];
                rx -= 1;
                t_next[0] += t_delta[0];
            }
            if move_y {
                cell[1] += step[1];
                ry -= 1;
                t_next[1] += t_delta[1];
            }
        }
    }
}

impl Iterator for LatticeWalk {
    type Item = WalkStep;

    fn next(&mut self) -> Option<WalkStep> {
        if self.done {
            return None;
        }
        let cell = self.cell;
        let t_enter = self.t_current;
        let [rx, ry] = self.remaining;
        if rx == 0 && ry == 0 {
            self.done = true;
            return Some(WalkStep { cell, t_enter, t_exit: 1.0 });
        }
        let [tx, ty] = self.t_next;
        let (move_x, move_y) = match (rx > 0, ry > 0) {
            (true, false) => (true, false),
            (false, true) => (false, true),
            _ if tx < ty => (true, false),
            _ if ty < tx => (false, true),
            // exact vertex crossing: diagonal step
            _ => (true, true),
        };
        let mut t_exit = f64::INFINITY;
        if move_x {
            t_exit = t_exit.min(tx);
            self.cell[0] += self.step[0];
            self.remaining[0] -= 1;
            self.t_next[0] += self.t_delta[0];
        }
        if move_y {
            t_exit = t_exit.min(ty);
            self.cell[1] += self.step[1];
            self.remaining[1] -= 1;
            self.t_next[1] += self.t_delta[1];
        }
        let t_exit = t_exit.clamp(t_enter, 1.0);
        self.t_current = t_exit;
        Some(WalkStep { cell, t_enter, t_exit })
    }
}
