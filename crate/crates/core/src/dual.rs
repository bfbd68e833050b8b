//! Vector forward-mode dual numbers.
//!
//! A [`Dual`] carries a value together with its full gradient with respect to
//! the chart coordinates. An empty gradient stands for the zero vector, which
//! lets value-only evaluation share the same code path without allocating.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    /// Partial derivatives; empty means identically zero.
    pub gradient: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64) -> Self {
        Dual {
            value,
            gradient: Vec::new(),
        }
    }

    /// The `index`-th coordinate of an `n`-dimensional chart, seeded with a
    /// unit gradient.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut gradient = vec![0.0; n];
        gradient[index] = 1.0;
        Dual { value, gradient }
    }

    /// Seeds every coordinate of `point`.
    pub fn seed(point: &[f64]) -> Vec<Dual> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::variable(v, i, n))
            .collect()
    }

    /// Lifts a point without derivative information.
    pub fn lift(point: &[f64]) -> Vec<Dual> {
        point.iter().map(|&v| Dual::constant(v)).collect()
    }

    /// Gradient padded to length `n` (zero-filled when empty).
    pub fn gradient_n(&self, n: usize) -> Vec<f64> {
        if self.gradient.is_empty() {
            vec![0.0; n]
        } else {
            self.gradient.clone()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.gradient.iter().all(|&d| d == 0.0)
    }

    /// `value` with gradient `scale * self.gradient`.
    pub fn chain(&self, value: f64, scale: f64) -> Dual {
        Dual {
            value,
            gradient: self.gradient.iter().map(|d| d * scale).collect(),
        }
    }

    /// `value` with gradient `sa * a.gradient + sb * b.gradient`.
    pub fn combine(value: f64, a: &Dual, sa: f64, b: &Dual, sb: f64) -> Dual {
        let gradient = match (a.gradient.is_empty(), b.gradient.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => a.gradient.iter().map(|d| d * sa).collect(),
            (true, false) => b.gradient.iter().map(|d| d * sb).collect(),
            (false, false) => {
                debug_assert_eq!(a.gradient.len(), b.gradient.len());
                a.gradient
                    .iter()
                    .zip(&b.gradient)
                    .map(|(x, y)| x * sa + y * sb)
                    .collect()
            }
        };
        Dual { value, gradient }
    }

    pub fn scale(&self, k: f64) -> Dual {
        self.chain(self.value * k, k)
    }

    pub fn add_const(&self, k: f64) -> Dual {
        Dual {
            value: self.value + k,
            gradient: self.gradient.clone(),
        }
    }

    pub fn sin(&self) -> Dual {
        self.chain(self.value.sin(), self.value.cos())
    }

    pub fn cos(&self) -> Dual {
        self.chain(self.value.cos(), -self.value.sin())
    }

    pub fn exp(&self) -> Dual {
        let e = self.value.exp();
        self.chain(e, e)
    }

    pub fn tanh(&self) -> Dual {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }

    /// Derivative of |x| at 0 is taken as 0.
    pub fn abs(&self) -> Dual {
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.value.abs(), s)
    }

    /// Caller guarantees `value > 0`, or `value == 0` with constant input.
    pub fn sqrt(&self) -> Dual {
        let r = self.value.sqrt();
        if self.is_constant() {
            return Dual {
                value: r,
                gradient: vec![0.0; self.gradient.len()],
            };
        }
        self.chain(r, 0.5 / r)
    }

    pub fn powi(&self, n: i32) -> Dual {
        let value = self.value.powi(n);
        let slope = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.value.powi(n - 1)
        };
        self.chain(value, slope)
    }
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({} | {:?})", self.value, self.gradient)
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual::combine(self.value + rhs.value, self, 1.0, rhs, 1.0)
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual::combine(self.value - rhs.value, self, 1.0, rhs, -1.0)
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        Dual::combine(self.value * rhs.value, self, rhs.value, rhs, self.value)
    }
}

/// Quotient rule; the caller checks for a zero denominator.
impl Div for &Dual {
    type Output = Dual;
    fn div(self, rhs: &Dual) -> Dual {
        let q = self.value / rhs.value;
        Dual::combine(q, self, 1.0 / rhs.value, rhs, -q / rhs.value)
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.chain(-self.value, -1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Dual {
            type Output = Dual;
            fn $m(self, rhs: Dual) -> Dual {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Dual> for Dual {
            type Output = Dual;
            fn $m(self, rhs: &Dual) -> Dual {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        -&self
    }
}
