//! Exact one-dimensional transport through quantile functions.
//!
//! A cell-wise density has a piecewise-linear quantile function (mass spread
//! uniformly over each cell); its cell-center atomization has a step
//! quantile function. Either way the squared quantile difference is a
//! quadratic on every interval between merged breakpoints, so the transport
//! cost integrates in closed form.

use crate::grid::Density;

/// How cell mass is placed in space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassModel {
    /// Uniformly over the cell (the density is piecewise constant).
    #[default]
    Cellwise,
    /// As a point mass at the cell center.
    Atomic,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub s0: f64,
    pub s1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Piece {
    pub fn eval(&self, s: f64) -> f64 {
        if self.x0 == self.x1 {
            return self.x0;
        }
        self.x0 + (self.x1 - self.x0) * (s - self.s0) / (self.s1 - self.s0)
    }
}

/// Left-continuous quantile function of a 1-D density, optionally lifted
/// periodically (`Q(s + mass) = Q(s) + period`).
#[derive(Debug, Clone)]
pub(crate) struct Quantile {
    pub pieces: Vec<Piece>,
    pub mass: f64,
    pub period: f64,
}

impl Quantile {
    pub fn new(density: &Density, model: MassModel) -> Self {
        let d = density.domain();
        let h = d.spacing(0);
        let mut pieces = Vec::new();
        let mut s = 0.0;
        for (k, m) in density.cell_masses().into_iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let (x0, x1) = match model {
                MassModel::Cellwise => (k as f64 * h, (k + 1) as f64 * h),
                MassModel::Atomic => ((k as f64 + 0.5) * h, (k as f64 + 0.5) * h),
            };
            pieces.push(Piece { s0: s, s1: s + m, x0, x1 });
            s += m;
        }
        Self {
            pieces,
            mass: s,
            period: d.extents()[0],
        }
    }

    fn piece_index(&self, s: f64) -> usize {
        self.pieces
            .partition_point(|p| p.s0 <= s)
            .saturating_sub(1)
    }

    /// Lifted evaluation: the piece containing `s` together with the
    /// periodic offset applied to it.
    pub fn locate(&self, s: f64, lifted: bool) -> (usize, f64, f64) {
        if !lifted || self.mass <= 0.0 {
            return (self.piece_index(s), 0.0, 0.0);
        }
        let wraps = (s / self.mass).floor();
        let local = s - wraps * self.mass;
        (self.piece_index(local), wraps * self.mass, wraps * self.period)
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces
            .iter()
            .map(|p| p.s0)
            .chain(self.pieces.last().map(|p| p.s1))
    }
}

/// Merged breakpoints of `a` on `[0, a.mass]` and of `b(. + shift)`.
pub(crate) fn merged_breakpoints(a: &Quantile, b: &Quantile, shift: f64, lifted: bool) -> Vec<f64> {
    let total = a.mass;
    let mut pts: Vec<f64> = a.breakpoints().collect();
    let wraps: Vec<f64> = if lifted && b.mass > 0.0 {
        let lo = (shift / b.mass).floor() as i64 - 1;
        let hi = ((shift + total) / b.mass).ceil() as i64 + 1;
        (lo..=hi).map(|k| k as f64 * b.mass).collect()
    } else {
        vec![0.0]
    };
    for off in wraps {
        for s in b.breakpoints() {
            let t = s + off - shift;
            if t > 0.0 && t < total {
                pts.push(t);
            }
        }
    }
    pts.push(0.0);
    pts.push(total);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `int_0^M (Q_a(s) - Q_b(s + shift))^2 ds`, exact per merged segment.
pub(crate) fn quantile_cost(a: &Quantile, b: &Quantile, shift: f64, lifted: bool) -> f64 {
    let pts = merged_breakpoints(a, b, shift, lifted);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let pa = &a.pieces[a.piece_index(mid)];
        let (kb, ds, dx) = b.locate(mid + shift, lifted);
        let pb = &b.pieces[kb];
        let d0 = pa.eval(lo) - (pb.eval(lo + shift - ds) + dx);
        let d1 = pa.eval(hi) - (pb.eval(hi + shift - ds) + dx);
        total += len * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    total
}

/// Minimizes the lifted quantile cost over the rotation `shift`, which is
/// convex in the shift. Returns `(cost, shift)`.
pub(crate) fn circle_cost(a: &Quantile, b: &Quantile) -> (f64, f64) {
    let m = b.mass;
    let f = |theta: f64| quantile_cost(a, b, theta, true);
    const SCAN: usize = 64;
    let grid: Vec<f64> = (0..=SCAN).map(|k| -m + 2.0 * m * k as f64 / SCAN as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(SCAN)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * m.max(1e-300) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut candidates = [(f1, x1), (f2, x2), (values[best], grid[best])];
    candidates.sort_by(|p, q| p.0.total_cmp(&q.0));
    candidates[0]
}
