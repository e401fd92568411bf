//! Lagrange polynomials on Gauss–Lobatto nodes of [0, 1].

use super::quadrature::{gauss_lobatto, Rule1d};

#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub order: usize,
    pub nodes: Vec<f64>,
    /// Lobatto weights at the nodes; lumped boundary mass.
    pub lobatto: Rule1d,
}

impl Lagrange1d {
    pub fn new(order: usize) -> Self {
        assert!((1..=4).contains(&order), "order {order} not in 1..=4");
        let lobatto = gauss_lobatto(order + 1);
        Self {
            order,
            nodes: lobatto.points.clone(),
            lobatto,
        }
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and first derivatives of all basis functions at `x`.
    pub fn eval(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let xi = self.nodes[i];
            let mut v = 1.0;
            let mut d = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let inv = 1.0 / (xi - self.nodes[j]);
                let t = (x - self.nodes[j]) * inv;
                d = d * t + v * inv;
                v *= t;
            }
            vals[i] = v;
            ders[i] = d;
        }
    }

    pub fn values(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.eval(x, &mut v, &mut d);
        v
    }
}
