use serde::{Deserialize, Serialize};

use super::{check_size, Operator, Spectrum, UndirectedGraph};
use crate::diffusion::DiffusionConfig;
use crate::error::{invalid, Error, Result};
use crate::Matrix;

/// Largest graph [`verify_eigen_transform`] inverts densely.
pub const EIGEN_TRANSFORM_LIMIT: usize = 256;

/// Slack on the `[0, 2]` domain for eigenvalues fresh out of a solver.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum Kernel {
    /// Personalized PageRank with teleport `alpha`.
    Ppr { alpha: f64 },
    /// Heat kernel `e^{-tL}`.
    Heat { t: f64 },
}

/// Laplacian eigenvalue of the diffused operator for a graph Laplacian
/// eigenvalue `λ`. The walk has eigenvalue `1 - λ` on the same eigenvector,
/// and the diffusion maps it to `α / (1 - (1-α)(1-λ))` (PPR) or `e^{-λt}`
/// (heat), so
///
/// ```text
/// ppr:  λ̃ = 1 - α / (1 - (1-α)(1-λ))
/// heat: λ̃ = 1 - e^{-λt}
/// ```
///
/// ```
/// use diffuser::spectral::{diffusion_eigenvalue_map, Kernel};
/// let ppr = Kernel::Ppr { alpha: 0.1 };
/// assert_eq!(diffusion_eigenvalue_map(0.0, ppr).unwrap(), 0.0);
/// assert!((diffusion_eigenvalue_map(1.0, ppr).unwrap() - 0.9).abs() < 1e-15);
/// ```
pub fn diffusion_eigenvalue_map(lambda: f64, kernel: Kernel) -> Result<f64> {
    if !(-DOMAIN_SLACK..=2.0 + DOMAIN_SLACK).contains(&lambda) {
        return Err(invalid(format!("Laplacian eigenvalue {lambda} outside [0, 2]")));
    }
    let lambda = lambda.clamp(0.0, 2.0);
    match kernel {
        Kernel::Ppr { alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
            }
            if lambda == 0.0 {
                return Ok(0.0);
            }
            Ok(1.0 - alpha / (1.0 - (1.0 - alpha) * (1.0 - lambda)))
        }
        Kernel::Heat { t } => {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("heat time must be finite and non-negative, got {t}")));
            }
            Ok(-(-lambda * t).exp_m1())
        }
    }
}

/// Largest gap between the Laplacian spectrum of the exact PPR operator
/// `α (I - (1-α) Â)^-1` on `Â = D^{-1/2} A D^{-1/2}` and
/// [`diffusion_eigenvalue_map`] applied to the spectrum of `I - Â`.
pub fn verify_eigen_transform(g: &UndirectedGraph, alpha: f64) -> Result<f64> {
    check_size(g)?;
    let n = g.n();
    if n > EIGEN_TRANSFORM_LIMIT {
        return Err(invalid(format!(
            "eigen-transform check limited to n ≤ {EIGEN_TRANSFORM_LIMIT}, got {n}"
        )));
    }
    let kernel = Kernel::Ppr { alpha };
    let a_hat = g.normalized_adjacency()?;
    let laplacian = Spectrum::from_symmetric(Operator::NormalizedLaplacian, Matrix::identity(n, n) - &a_hat);
    let predicted = laplacian
        .eigenvalues
        .iter()
        .map(|&l| diffusion_eigenvalue_map(l, kernel))
        .collect::<Result<Vec<f64>>>()?;

    let resolvent = (Matrix::identity(n, n) - (1.0 - alpha) * a_hat)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("diffusion resolvent is singular".into()))?;
    let operator = alpha * resolvent;
    // The inverse of a symmetric matrix is symmetric up to rounding.
    let operator = (&operator + operator.transpose()) * 0.5;
    let measured = Spectrum::from_symmetric(
        Operator::DiffusionLaplacian,
        Matrix::identity(n, n) - operator,
    );
    // λ̃ is increasing in λ, so both sorted lists pair up index by index.
    Ok(measured
        .eigenvalues
        .iter()
        .zip(&predicted)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Spectrum of `I - T_K`, where `T_0 = I` and
/// `T_{k+1} = (1-α) Â T_k + α I` is the `K`-step truncated PPR operator on
/// the symmetric walk `Â = D^{-1/2} A D^{-1/2}`.
pub fn truncated_diffusion_spectrum(g: &UndirectedGraph, cfg: &DiffusionConfig) -> Result<Spectrum> {
    check_size(g)?;
    cfg.validate()?;
    let n = g.n();
    let a_hat = g.normalized_adjacency()?;
    let keep = 1.0 - cfg.alpha();
    let mut t = Matrix::identity(n, n);
    for _ in 0..cfg.steps() {
        t = keep * &a_hat * &t;
        for i in 0..n {
            t[(i, i)] += cfg.alpha();
        }
    }
    // T_K is a polynomial in Â, so symmetric up to rounding.
    let t = (&t + t.transpose()) * 0.5;
    Ok(Spectrum::from_symmetric(
        Operator::DiffusionLaplacian,
        Matrix::identity(n, n) - t,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SelfLoops;
    use crate::graph::{build_regular_random, union};

    #[test]
    fn map_examples() {
        for alpha in [0.05, 0.1, 0.5, 1.0] {
            assert_eq!(diffusion_eigenvalue_map(0.0, Kernel::Ppr { alpha }).unwrap(), 0.0);
        }
        assert_eq!(diffusion_eigenvalue_map(0.0, Kernel::Heat { t: 3.0 }).unwrap(), 0.0);
        let ppr = Kernel::Ppr { alpha: 0.1 };
        assert!((diffusion_eigenvalue_map(2.0, ppr).unwrap() - (1.0 - 0.1 / 1.9)).abs() < 1e-15);
        assert!((diffusion_eigenvalue_map(2.0, ppr).unwrap() - 0.94737).abs() < 1e-5);
        assert!((diffusion_eigenvalue_map(1.0, ppr).unwrap() - 0.9).abs() < 1e-15);
        let heat = diffusion_eigenvalue_map(1.0, Kernel::Heat { t: 2.0 }).unwrap();
        assert!((heat - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn map_rejects_bad_input() {
        let ppr = Kernel::Ppr { alpha: 0.1 };
        assert!(diffusion_eigenvalue_map(-0.1, ppr).is_err());
        assert!(diffusion_eigenvalue_map(2.1, ppr).is_err());
        assert!(diffusion_eigenvalue_map(1.0, Kernel::Ppr { alpha: 0.0 }).is_err());
        assert!(diffusion_eigenvalue_map(1.0, Kernel::Heat { t: -1.0 }).is_err());
    }

    #[test]
    fn map_is_low_pass() {
        for alpha in [0.1, 0.25, 0.5, 0.9] {
            let ppr = Kernel::Ppr { alpha };
            let mut prev = -1.0;
            for i in 0..=200 {
                let v = diffusion_eigenvalue_map(i as f64 / 100.0, ppr).unwrap();
                assert!(v > prev);
                prev = v;
            }
            assert!(prev < 1.0);
        }
    }

    #[test]
    fn identity_graph_transform() {
        let g = union(5, &[]).unwrap().finalize();
        let u = UndirectedGraph::from_attention(&g, SelfLoops::Keep);
        assert!(verify_eigen_transform(&u, 0.1).unwrap() <= 1e-15);
    }

    #[test]
    fn cycle_and_regular_transform() {
        let c8 = UndirectedGraph::cycle(8).unwrap();
        assert!(verify_eigen_transform(&c8, 0.1).unwrap() <= 1e-8);
        let g = build_regular_random(64, 8, 2).unwrap();
        let u = UndirectedGraph::from_attention(&g, SelfLoops::Drop);
        assert!(verify_eigen_transform(&u, 0.25).unwrap() <= 1e-8);
        assert!(verify_eigen_transform(&c8, 0.0).is_err());
    }

    #[test]
    fn truncated_spectrum_limits() {
        let c8 = UndirectedGraph::cycle(8).unwrap();
        let zero = truncated_diffusion_spectrum(&c8, &DiffusionConfig::new(0.1, 0).unwrap()).unwrap();
        assert!(zero.eigenvalues.iter().all(|v| v.abs() < 1e-15));
        // K large: λ̃ of every Laplacian eigenvalue.
        let far = truncated_diffusion_spectrum(&c8, &DiffusionConfig::new(0.3, 300).unwrap()).unwrap();
        let mut expect: Vec<f64> = (0..8)
            .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos())
            .map(|l| diffusion_eigenvalue_map(l, Kernel::Ppr { alpha: 0.3 }).unwrap())
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in far.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
