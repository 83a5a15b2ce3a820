//! Forward-mode dual numbers over a fixed number of seed directions.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub const fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Value with derivative `slope` along direction `k`.
    pub fn seeded(v: f64, k: usize, slope: f64) -> Self {
        let mut d = [0.0; N];
        d[k] = slope;
        Self { v, d }
    }

    fn map(self, v: f64, dv: f64) -> Self {
        Self {
            v,
            d: self.d.map(|x| x * dv),
        }
    }

    pub fn cos(self) -> Self {
        self.map(self.v.cos(), -self.v.sin())
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.map(s, 0.5 / s)
    }

    pub fn powi2(self) -> Self {
        self * self
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite())
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Self { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + -o
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = self.d[k] * o.v + self.v * o.d[k];
        }
        Self { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for k in 0..N {
            d[k] = (self.d[k] * o.v - self.v * o.d[k]) / (o.v * o.v);
        }
        Self { v: self.v / o.v, d }
    }
}

impl<const N: usize> Mul<f64> for Dual<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            v: self.v * s,
            d: self.d.map(|x| x * s),
        }
    }
}

impl<const N: usize> Add<f64> for Dual<N> {
    type Output = Self;
    fn add(self, s: f64) -> Self {
        Self { v: self.v + s, d: self.d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_composite() {
        // f(x) = cos(x) * x / sqrt(x + 1)
        let x0 = 0.7;
        let x = Dual::<1>::seeded(x0, 0, 1.0);
        let f = x.cos() * x / (x + 1.0).sqrt();
        let g = |x: f64| x.cos() * x / (x + 1.0).sqrt();
        let h = 1e-6;
        let fd = (g(x0 + h) - g(x0 - h)) / (2.0 * h);
        assert!((f.v - g(x0)).abs() < 1e-15);
        assert!((f.d[0] - fd).abs() < 1e-8);
    }
}
