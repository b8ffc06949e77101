// SPDX-License-Identifier: Apache-2.0

//! Nesterov accelerated gradient with a backtracking step rule.

use crate::error::{Error, Result};

pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    fn value_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Maps a candidate back into the feasible set.
    fn project(&self, _x: &mut [f64]) {}
}

#[derive(Debug, Clone)]
pub struct Nag {
    pub beta: f64,
    pub step: f64,
    pub max_halvings: usize,
    pub growth: f64,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub value: f64,
    pub halvings: usize,
    /// False when every halving still increased the objective; the step is
    /// taken anyway and the momentum is dropped.
    pub descended: bool,
}

impl Nag {
    pub fn new(dim: usize, beta: f64, step: f64) -> Self {
        Self {
            beta,
            step,
            max_halvings: 10,
            growth: 1.05,
            velocity: vec![0.0; dim],
        }
    }

    pub fn reset_momentum(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `v ← βv − s∇f(x + βv)`, `x ← x + v`; `s` is halved while the
    /// objective rises above `f(x)` and grown after an accepted step. If no
    /// halving descends, the search is repeated once without momentum from
    /// `x`; if that fails too the last candidate is taken.
    pub fn step<O: Objective>(&mut self, x: &mut Vec<f64>, obj: &mut O, iter: usize) -> Result<StepInfo> {
        let f0 = obj.value(x)?;
        if !f0.is_finite() {
            return Err(Error::Diverged { iter });
        }
        let with_momentum = self.beta > 0.0 && self.velocity.iter().any(|v| *v != 0.0);
        let attempts = if with_momentum { 2 } else { 1 };
        for attempt in 0..attempts {
            if attempt == 1 {
                self.reset_momentum();
            }
            let mut look: Vec<f64> = x.iter().zip(&self.velocity).map(|(a, v)| a + self.beta * v).collect();
            obj.project(&mut look);
            let (_, g) = obj.value_grad(&look)?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { iter });
            }
            let mut s = self.step;
            for halvings in 0..=self.max_halvings {
                let v: Vec<f64> = self.velocity.iter().zip(&g).map(|(v, g)| self.beta * v - s * g).collect();
                let mut cand: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + b).collect();
                obj.project(&mut cand);
                let f1 = obj.value(&cand)?;
                let ok = f1.is_finite() && f1 <= f0;
                let last = attempt + 1 == attempts && halvings == self.max_halvings;
                if ok || last {
                    if !f1.is_finite() {
                        return Err(Error::Diverged { iter });
                    }
                    // velocity is what the projected step actually moved
                    self.velocity = cand.iter().zip(x.iter()).map(|(c, a)| c - a).collect();
                    *x = cand;
                    if ok {
                        self.step = s * self.growth;
                    } else {
                        self.step = s;
                        self.reset_momentum();
                    }
                    return Ok(StepInfo {
                        value: f1,
                        halvings,
                        descended: ok,
                    });
                }
                s *= 0.5;
            }
        }
        unreachable!("the final attempt always returns")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl Objective for Quadratic {
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            Ok(x.iter().map(|v| v * v).sum())
        }
        fn value_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((self.value(x)?, x.iter().map(|v| 2.0 * v).collect()))
        }
    }

    #[test]
    fn quadratic_converges_monotonically() {
        let mut nag = Nag::new(1, 0.9, 0.1);
        let mut x = vec![1.0];
        let mut prev = 1.0;
        let mut done = None;
        for it in 0..200 {
            let info = nag.step(&mut x, &mut Quadratic, it).unwrap();
            assert!(info.value <= prev);
            prev = info.value;
            if x[0].abs() < 1e-3 {
                done = Some(it);
                break;
            }
        }
        assert!(done.is_some(), "x = {}", x[0]);
    }

    struct Flat;

    impl Objective for Flat {
        fn value(&mut self, _: &[f64]) -> Result<f64> {
            Ok(3.0)
        }
        fn value_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((3.0, vec![0.0; x.len()]))
        }
    }

    #[test]
    fn zero_gradient_keeps_positions() {
        let mut nag = Nag::new(3, 0.9, 1.0);
        let mut x = vec![1.0, -2.0, 0.5];
        for it in 0..5 {
            nag.step(&mut x, &mut Flat, it).unwrap();
        }
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_momentum_is_gradient_descent() {
        let mut nag = Nag::new(2, 0.0, 0.1);
        nag.growth = 1.0;
        let mut x = vec![1.0, -0.5];
        let mut gd = x.clone();
        for it in 0..10 {
            nag.step(&mut x, &mut Quadratic, it).unwrap();
            gd.iter_mut().for_each(|v| *v -= 0.1 * 2.0 * *v);
            for (a, b) in x.iter().zip(&gd) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    struct Explodes;

    impl Objective for Explodes {
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            Ok(if x[0] == 0.0 { 0.0 } else { f64::NAN })
        }
        fn value_grad(&mut self, _: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((0.0, vec![1.0]))
        }
    }

    #[test]
    fn non_finite_objective_is_divergence() {
        let mut nag = Nag::new(1, 0.9, 1.0);
        let mut x = vec![0.0];
        assert!(matches!(nag.step(&mut x, &mut Explodes, 4), Err(Error::Diverged { iter: 4 })));
    }
}
