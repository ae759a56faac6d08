use num_complex::Complex64;
use wigner_lab::entry_laws::{EntryLaw, TruncationSpec};
use wigner_lab::experiments::{run_delta_sweep, run_stieltjes_sweep, ExperimentConfig};
use wigner_lab::resolvent_lab::{lambda_probe, rjj_moment_probe_multi};

fn config(threads: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(EntryLaw::pareto(5.0).unwrap());
    cfg.trunc = Some(TruncationSpec::new(1.5, 1.0).unwrap());
    cfg.n_values = vec![16, 32, 64];
    cfg.replicas_per_n = vec![60, 40, 20];
    cfg.base_seed = 0xdead_beef;
    cfg.grid = (5, 3);
    cfg.threads = threads;
    cfg
}

#[test]
fn delta_sweep_is_thread_independent() {
    let a = run_delta_sweep(&config(1)).unwrap();
    let b = run_delta_sweep(&config(4)).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.fit.unwrap(), b.fit.unwrap());
}

#[test]
fn stieltjes_sweep_is_thread_independent() {
    assert_eq!(run_stieltjes_sweep(&config(1)).unwrap(), run_stieltjes_sweep(&config(3)).unwrap());
}

#[test]
fn probes_are_thread_independent() {
    let zs = [Complex64::new(0.0, 2.0), Complex64::new(1.5, 0.1)];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let rjj = rjj_moment_probe_multi(EntryLaw::gaussian(), None, 24, &zs, 4, 12, 3).unwrap();
            let lam = lambda_probe(EntryLaw::rademacher(), None, 24, zs[0], 12, 3).unwrap();
            (rjj, lam)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn different_seeds_differ() {
    let mut other = config(2);
    other.base_seed ^= 1;
    assert_ne!(run_delta_sweep(&config(2)).unwrap().rows, run_delta_sweep(&other).unwrap().rows);
}
