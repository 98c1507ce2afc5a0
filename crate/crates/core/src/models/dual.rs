//! Forward-mode dual numbers carrying a gradient with respect to the four arm
//! joints, used to differentiate the mass matrix and potential exactly.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimal scalar interface the arm kinematics is written against.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn value(self) -> f64;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn value(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual4 {
    pub v: f64,
    pub d: [f64; 4],
}

impl Dual4 {
    pub fn variable(v: f64, index: usize) -> Self {
        let mut d = [0.0; 4];
        d[index] = 1.0;
        Self { v, d }
    }

    fn map_d(self, f: impl Fn(f64) -> f64) -> [f64; 4] {
        self.d.map(f)
    }
}

impl Add for Dual4 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Self { v: self.v + o.v, d }
    }
}

impl Sub for Dual4 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a -= b;
        }
        Self { v: self.v - o.v, d }
    }
}

impl Mul for Dual4 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; 4];
        for (i, slot) in d.iter_mut().enumerate() {
            *slot = self.d[i] * o.v + self.v * o.d[i];
        }
        Self { v: self.v * o.v, d }
    }
}

impl Div for Dual4 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let mut d = [0.0; 4];
        for (i, slot) in d.iter_mut().enumerate() {
            *slot = (self.d[i] * o.v - self.v * o.d[i]) * inv * inv;
        }
        Self { v: self.v * inv, d }
    }
}

impl Neg for Dual4 {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

impl Scalar for Dual4 {
    fn cst(v: f64) -> Self {
        Self { v, d: [0.0; 4] }
    }
    fn sin(self) -> Self {
        let c = self.v.cos();
        Self {
            v: self.v.sin(),
            d: self.map_d(|x| x * c),
        }
    }
    fn cos(self) -> Self {
        let s = self.v.sin();
        Self {
            v: self.v.cos(),
            d: self.map_d(|x| -x * s),
        }
    }
    fn value(self) -> f64 {
        self.v
    }
}
