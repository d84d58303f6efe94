use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// How old information is discounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forgetting {
    /// Forget only along the incoming regressor direction, so unexcited
    /// directions keep their information and the covariance stays bounded.
    Directional,
    /// Classic exponential forgetting of the whole information matrix.
    Exponential,
}

/// Recursive least-squares estimate of `z ≈ φᵀψ`.
///
/// `p` and `r` are kept as mutual inverses (covariance and information)
/// without ever inverting a matrix. The last entry of `ψ̂` is the bias; the
/// others are the gradient estimate.
#[derive(Debug, Clone)]
pub struct RlsState {
    psi_hat: DVector<f64>,
    p: DMatrix<f64>,
    r: DMatrix<f64>,
    lambda: f64,
    eps_phi: f64,
    forgetting: Forgetting,
}

impl RlsState {
    /// Starts from `ψ̂ = 0`, `P = R = I`.
    pub fn new(dim: usize, lambda: f64, eps_phi: f64, forgetting: Forgetting) -> Result<Self> {
        Self::with_prior(DVector::zeros(dim), DMatrix::identity(dim, dim), lambda, eps_phi, forgetting)
    }

    pub fn with_prior(
        psi_hat: DVector<f64>,
        p: DMatrix<f64>,
        lambda: f64,
        eps_phi: f64,
        forgetting: Forgetting,
    ) -> Result<Self> {
        let n = psi_hat.len();
        if n < 2 {
            return Err(Error::invalid("regressor needs at least one gradient entry and a bias"));
        }
        if p.shape() != (n, n) {
            return Err(Error::invalid(format!("covariance shape {:?} does not match dimension {n}", p.shape())));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::invalid(format!("forgetting factor {lambda} outside (0, 1]")));
        }
        if !(eps_phi >= 0.0) {
            return Err(Error::invalid(format!("regressor threshold {eps_phi} must be non-negative")));
        }
        let r = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("prior covariance is not positive definite"))?
            .inverse();
        Ok(Self { psi_hat, p, r, lambda, eps_phi, forgetting })
    }

    pub fn dim(&self) -> usize {
        self.psi_hat.len()
    }

    pub fn psi_hat(&self) -> &DVector<f64> {
        &self.psi_hat
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Gradient block of `ψ̂` (everything but the trailing bias).
    pub fn gradient(&self) -> Vec<f64> {
        self.psi_hat.rows(0, self.dim() - 1).iter().copied().collect()
    }

    pub fn bias(&self) -> f64 {
        self.psi_hat[self.dim() - 1]
    }

    /// `‖P R − I‖_F`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.dim();
        (&self.p * &self.r - DMatrix::<f64>::identity(n, n)).norm()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.p)
    }

    /// Absorbs one observation `z` taken at regressor `phi` and returns the
    /// updated gradient estimate.
    pub fn update(&mut self, phi: &[f64], z: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        if phi.len() != n {
            return Err(Error::invalid(format!("regressor has {} entries, expected {n}", phi.len())));
        }
        if phi.iter().any(|v| !v.is_finite()) || !z.is_finite() {
            return Err(Error::invalid("non-finite regressor or observation"));
        }
        let phi = DVector::from_column_slice(phi);
        match self.forgetting {
            Forgetting::Directional => self.update_directional(&phi, z),
            Forgetting::Exponential => self.update_exponential(&phi, z),
        }
        symmetrize(&mut self.p);
        symmetrize(&mut self.r);
        if self.p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("RLS covariance is no longer finite".into()));
        }
        // Exponential forgetting without excitation winds P up until
        // roundoff makes it indefinite (around cond 1e16). That is the
        // failure mode it gets compared against, so only finiteness is
        // required there.
        if self.forgetting == Forgetting::Directional && self.p.clone().cholesky().is_none() {
            return Err(Error::Numerical("RLS covariance lost positive definiteness".into()));
        }
        Ok(self.gradient())
    }

    fn update_directional(&mut self, phi: &DVector<f64>, z: f64) {
        let lambda = self.lambda;
        let (p_bar, m) = if phi.norm() >= self.eps_phi {
            let r_phi = &self.r * phi;
            let phi_r_phi = phi.dot(&r_phi);
            let outer = phi * phi.transpose();
            let p_bar = &self.p + &outer * ((1.0 - lambda) / lambda / phi_r_phi);
            let m = (&r_phi * phi.transpose()) * ((1.0 - lambda) / phi_r_phi);
            (p_bar, Some(m))
        } else {
            (self.p.clone(), None)
        };

        let p_bar_phi = &p_bar * phi;
        let denom = 1.0 + phi.dot(&p_bar_phi);
        let gain = &p_bar_phi / denom;
        let innovation = z - phi.dot(&self.psi_hat);
        self.psi_hat += &gain * innovation;
        self.p = &p_bar - (&p_bar_phi * p_bar_phi.transpose()) / denom;

        let forgotten = match m {
            Some(m) => &self.r - m * &self.r,
            None => self.r.clone(),
        };
        self.r = forgotten + phi * phi.transpose();
    }

    fn update_exponential(&mut self, phi: &DVector<f64>, z: f64) {
        let lambda = self.lambda;
        let p_phi = &self.p * phi;
        let denom = lambda + phi.dot(&p_phi);
        let gain = &p_phi / denom;
        let innovation = z - phi.dot(&self.psi_hat);
        self.psi_hat += &gain * innovation;
        self.p = (&self.p - (&p_phi * p_phi.transpose()) / denom) / lambda;
        self.r = &self.r * lambda + phi * phi.transpose();
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Spectral condition number of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
