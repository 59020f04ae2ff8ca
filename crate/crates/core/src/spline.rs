//! Natural cubic spline through 2D waypoints, with arc-length lookup.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::Vec2;

/// Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];
/// Quadrature sub-intervals per spline piece.
const SUBDIV: usize = 16;

/// One coordinate: `y(u) = a + b·h + c·h² + d·h³` with `h = u − knots[i]`.
#[derive(Debug, Clone)]
struct Cubic1 {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Cubic1 {
    fn natural(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len() - 1;
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        // Tridiagonal system for second derivatives m_1..m_{n-1}; m_0 = m_n = 0.
        let mut m = alloc::vec![0.0; n + 1];
        if n >= 2 {
            let size = n - 1;
            let mut diag = alloc::vec![0.0; size];
            let mut upper = alloc::vec![0.0; size];
            let mut rhs = alloc::vec![0.0; size];
            for i in 1..n {
                diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
                upper[i - 1] = h[i];
                rhs[i - 1] = 6.0 * ((values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1]);
            }
            // Thomas algorithm; the system is symmetric with sub-diagonal h[i-1].
            for i in 1..size {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[size] = rhs[size - 1] / diag[size - 1];
            for i in (0..size - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            a.push(values[i]);
            b.push((values[i + 1] - values[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0);
            c.push(m[i] / 2.0);
            d.push((m[i + 1] - m[i]) / (6.0 * h[i]));
        }
        Self { a, b, c, d }
    }

    fn eval(&self, i: usize, h: f64) -> f64 {
        self.a[i] + h * (self.b[i] + h * (self.c[i] + h * self.d[i]))
    }

    fn deriv(&self, i: usize, h: f64) -> f64 {
        self.b[i] + h * (2.0 * self.c[i] + h * 3.0 * self.d[i])
    }
}

/// Planar natural cubic spline parameterized by cumulative chord length.
#[derive(Debug, Clone)]
pub(crate) struct PlanarSpline {
    knots: Vec<f64>,
    x: Cubic1,
    y: Cubic1,
    /// Arc length at every quadrature sub-interval boundary.
    arc_table: Vec<f64>,
}

impl PlanarSpline {
    pub fn through(waypoints: &[Vec2]) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidArgument("at least two waypoints are required".into()));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0].distance(w[1]) <= 1e-9) {
            return Err(Error::InvalidArgument(alloc::format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
        let mut knots = alloc::vec![0.0];
        for w in waypoints.windows(2) {
            let last = *knots.last().unwrap();
            knots.push(last + w[0].distance(w[1]));
        }
        let xs: Vec<f64> = waypoints.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = waypoints.iter().map(|p| p.y).collect();
        let mut s = Self {
            x: Cubic1::natural(&knots, &xs),
            y: Cubic1::natural(&knots, &ys),
            knots,
            arc_table: Vec::new(),
        };
        s.build_arc_table();
        Ok(s)
    }

    fn piece(&self, u: f64) -> (usize, f64) {
        let n = self.knots.len() - 1;
        let i = self.knots.partition_point(|&k| k <= u).clamp(1, n) - 1;
        (i, u - self.knots[i])
    }

    pub fn point(&self, u: f64) -> Vec2 {
        let (i, h) = self.piece(u);
        Vec2::new(self.x.eval(i, h), self.y.eval(i, h))
    }

    pub fn tangent(&self, u: f64) -> Vec2 {
        let (i, h) = self.piece(u);
        Vec2::new(self.x.deriv(i, h), self.y.deriv(i, h))
    }

    fn speed_on(&self, i: usize, h: f64) -> f64 {
        Vec2::new(self.x.deriv(i, h), self.y.deriv(i, h)).norm()
    }

    fn arc_on(&self, i: usize, h0: f64, h1: f64) -> f64 {
        let half = 0.5 * (h1 - h0);
        let mid = 0.5 * (h1 + h0);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * self.speed_on(i, mid + half * x))
            .sum::<f64>()
            * half
    }

    fn build_arc_table(&mut self) {
        let mut table = alloc::vec![0.0];
        let mut acc = 0.0;
        for i in 0..self.knots.len() - 1 {
            let len = self.knots[i + 1] - self.knots[i];
            for k in 0..SUBDIV {
                let h0 = len * k as f64 / SUBDIV as f64;
                let h1 = len * (k + 1) as f64 / SUBDIV as f64;
                acc += self.arc_on(i, h0, h1);
                table.push(acc);
            }
        }
        self.arc_table = table;
    }

    pub fn length(&self) -> f64 {
        *self.arc_table.last().unwrap()
    }

    /// Parameter `u` at which the arc length from the start equals `s`.
    pub fn param_at_arc(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let cell = self.arc_table.partition_point(|&a| a <= s).clamp(1, self.arc_table.len() - 1) - 1;
        let piece = cell / SUBDIV;
        let sub = cell % SUBDIV;
        let len = self.knots[piece + 1] - self.knots[piece];
        let h_lo = len * sub as f64 / SUBDIV as f64;
        let h_hi = len * (sub + 1) as f64 / SUBDIV as f64;
        let target = s - self.arc_table[cell];
        // Newton on the arc-length within one cell, safeguarded by bisection.
        let (mut lo, mut hi) = (h_lo, h_hi);
        let mut h = h_lo + (h_hi - h_lo) * (target / (self.arc_table[cell + 1] - self.arc_table[cell]).max(1e-300));
        for _ in 0..50 {
            let f = self.arc_on(piece, h_lo, h) - target;
            if f.abs() < 1e-12 {
                break;
            }
            if f > 0.0 {
                hi = h;
            } else {
                lo = h;
            }
            let v = self.speed_on(piece, h);
            let newton = h - f / v;
            h = if v > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        self.knots[piece] + h
    }
}
