use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ExperimentError;
use crate::entry_laws::EntryLaw;
use crate::resolvent_lab::QuadraticFormProbe;

/// One line of `inequality_report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRow {
    pub dim: usize,
    #[serde(skip)]
    pub matrix: usize,
    pub q: u32,
    pub law: String,
    pub mc: f64,
    pub stderr: f64,
    pub exact: Option<f64>,
    pub rhs: f64,
    pub k_hat: Option<f64>,
}

impl InequalityRow {
    /// `|mc - exact| <= 3 stderr`, vacuously true without an exact value.
    pub fn within_three_sigma(&self) -> bool {
        self.exact.is_none_or(|e| (self.mc - e).abs() <= 3.0 * self.stderr)
    }
}

/// For each dimension, `matrices` random coefficient matrices (entries
/// uniform on `[-1, 1]`) are probed at every order in `qs` with `samples`
/// Monte-Carlo draws. Matrix `k` at dimension index `i` uses stream
/// `(i << 32) | k` of a ChaCha8 generator keyed by `seed`, so distinct base
/// seeds never share matrices. Rows are ordered by `(dim, matrix, q)`.
pub fn run_inequality_sweep(
    law: EntryLaw,
    dims: &[usize],
    qs: &[u32],
    matrices: usize,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<InequalityRow>, ExperimentError> {
    let tasks: Vec<(usize, usize)> =
        dims.iter().enumerate().flat_map(|(i, _)| (0..matrices).map(move |k| (i, k))).collect();
    let workers = super::thread_pool(threads)?;
    let nested: Vec<Vec<InequalityRow>> = workers.install(|| {
        tasks
            .par_iter()
            .map(|&(i, k)| {
                let dim = dims[i];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((i as u64) << 32) | k as u64);
                let coeffs = QuadraticFormProbe::random_coefficients(dim, &mut rng);
                qs.iter()
                    .map(|&q| {
                        let mut probe = QuadraticFormProbe::new(dim, coeffs.clone(), law, q)?;
                        probe.run(samples, &mut rng);
                        Ok(InequalityRow {
                            dim,
                            matrix: k,
                            q,
                            law: law.to_string(),
                            mc: probe.mc_estimate.unwrap_or(f64::NAN),
                            stderr: probe.mc_stderr.unwrap_or(f64::NAN),
                            exact: probe.exact_value,
                            rhs: probe.rhs_value,
                            k_hat: probe.k_hat(),
                        })
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })
            .collect::<Result<_, ExperimentError>>()
    })?;
    Ok(nested.into_iter().flatten().collect())
}
