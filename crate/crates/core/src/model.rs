use crate::error::Result;
use crate::grid::{CoefficientSet, ScalarField};
use crate::operators::{assemble, SparseOperator};

/// Coefficients together with their assembled diffusion operator.
#[derive(Debug)]
pub struct Model {
    pub coeffs: CoefficientSet,
    pub op: SparseOperator,
}

impl Model {
    pub fn new(coeffs: CoefficientSet) -> Result<Model> {
        let op = assemble(coeffs.domain(), &coeffs.a)?;
        Ok(Model { coeffs, op })
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(self.coeffs.domain().clone(), values)
    }

    /// Strong-form residual of the harvested steady equation
    /// `−A u + u(μ − νu) − δh`, written into `out`; returns its sup-norm.
    pub fn steady_residual(&self, u: &[f64], delta: f64, out: &mut [f64]) -> f64 {
        self.op.mul_strong(u, out);
        let (mu, nu, h) = (self.coeffs.mu.values(), self.coeffs.nu.values(), self.coeffs.h.values());
        let mut sup = 0.0f64;
        for i in 0..out.len() {
            out[i] = -out[i] + u[i] * (mu[i] - nu[i] * u[i]) - delta * h[i];
            sup = sup.max(out[i].abs());
        }
        sup
    }

    /// Linearized potential `μ − 2νu`.
    pub fn linearized_growth(&self, u: &[f64]) -> Vec<f64> {
        let (mu, nu) = (self.coeffs.mu.values(), self.coeffs.nu.values());
        u.iter().zip(mu).zip(nu).map(|((ui, m), n)| m - 2.0 * n * ui).collect()
    }
}
