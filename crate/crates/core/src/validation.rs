//! Self-check suite that compares Monte Carlo estimates with the closed-form
//! moment identities and the additive quantization noise model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::complex_gaussian;
use crate::metrics::{empirical_moments, Estimate, MomentScenario};
use crate::montecarlo::seed::substream;
use crate::quantizer::{distortion_factor, lloyd_max_design, Bits};

/// Largest resolution checked against the Lloyd-Max design.
pub const MAX_CHECKED_BITS: u32 = 5;

/// Scenario used for the moment identities.
pub const MOMENT_SCENARIO: MomentScenario = MomentScenario {
    n_antennas: 64,
    n_rf: 16,
    n_users: 4,
    paths_per_user: 8,
};

/// An estimate passes when it lies within this many standard errors of its
/// closed form.
pub const Z_LIMIT: f64 = 3.0;

/// One identity of the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub estimate: Estimate,
    pub target: f64,
}

impl Check {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.target)
    }

    pub fn passed(&self) -> bool {
        self.z_score().abs() <= Z_LIMIT
    }
}

/// Runs every identity with `n_samples` draws per estimate.
pub fn run_validation(n_samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = moment_checks(n_samples, seed)?;
    checks.extend(quantizer_checks(n_samples, seed)?);
    Ok(checks)
}

fn moment_checks(n_samples: usize, seed: u64) -> Result<Vec<Check>> {
    let s = MOMENT_SCENARIO;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = empirical_moments(&s, n_samples, &mut rng)?;
    let mut out = vec![
        ("E|h_k|^2", m.norm2, s.norm2()),
        ("E|h_k|^4", m.norm4, s.norm4()),
    ];
    if let Some(c) = m.cross_inner {
        out.push(("E|h_k^H h_i|^2", c, s.cross_inner()));
    }
    out.extend([
        ("E[psi_auto]", m.psi_auto, s.psi_auto()),
        ("E[psi_cross]", m.psi_cross, s.psi_cross()),
        ("E[psi_one_stage]", m.psi_one_stage, s.psi_one_stage()),
    ]);
    Ok(out
        .into_iter()
        .map(|(name, estimate, target)| Check {
            name: name.to_string(),
            estimate,
            target,
        })
        .collect())
}

/// For each resolution, quantizes unit-power complex Gaussians with the
/// Lloyd-Max quantizer and checks the normalized error power against `beta`
/// and the input-output correlation against `alpha = 1 - beta`.
fn quantizer_checks(n_samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = substream(seed, 1);
    let x: Vec<_> = (0..n_samples).map(|_| complex_gaussian(&mut rng)).collect();
    let mut out = Vec::new();
    for b in 1..=MAX_CHECKED_BITS {
        let beta = distortion_factor(Bits::Finite(b))?;
        let design = lloyd_max_design(b, 100_000, 1e-14)?;
        // Unit complex power is 1/2 per real dimension.
        let y = crate::quantizer::scalar_quantize(&x, &design.quantizer, 0.5)?;
        let err: Vec<f64> = x.iter().zip(&y).map(|(a, q)| (a - q).norm_sqr()).collect();
        let corr: Vec<f64> = x.iter().zip(&y).map(|(a, q)| (a.conj() * q).re).collect();
        out.push(Check {
            name: format!("beta_{b}"),
            estimate: Estimate::from_samples(&err),
            target: beta,
        });
        out.push(Check {
            name: format!("alpha_{b}"),
            estimate: Estimate::from_samples(&corr),
            target: 1.0 - beta,
        });
    }
    Ok(out)
}
