#![allow(dead_code)]

use std::sync::Arc;

use harvest_core::grid::{CoefficientSet, Domain, DomainKind, ScalarField};
use harvest_core::Model;

pub fn domain(kind: DomainKind, res: &[usize]) -> Arc<Domain> {
    let lengths = vec![1.0; res.len()];
    Domain::new(kind, res.len(), &lengths, res).unwrap()
}

pub fn homogeneous(kind: DomainKind, res: &[usize], mu0: f64, nu0: f64) -> Model {
    let d = domain(kind, res);
    Model::new(CoefficientSet::homogeneous(&d, mu0, nu0).unwrap()).unwrap()
}

pub fn model_from(a: ScalarField, mu: ScalarField) -> Model {
    let d = a.domain().clone();
    Model::new(
        CoefficientSet::new(
            a,
            mu,
            ScalarField::constant(d.clone(), 1.0),
            ScalarField::constant(d, 1.0),
            CoefficientSet::DEFAULT_TAU,
        )
        .unwrap(),
    )
    .unwrap()
}

/// Classical RK4 for a scalar ODE with `steps` equal steps.
pub fn rk4(f: impl Fn(f64, f64) -> f64, y0: f64, t0: f64, t1: f64, steps: usize) -> f64 {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, y + h / 2.0 * k1);
        let k3 = f(t + h / 2.0, y + h / 2.0 * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Cubic smoothstep, written out independently of the library.
pub fn smoothstep(eps: f64, s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= eps {
        1.0
    } else {
        let x = s / eps;
        3.0 * x * x - 2.0 * x * x * x
    }
}
