//! Seeded random problems for cross-checking the shooting solver against
//! the discretized operator.

use halfline::hermitian::CMatrix;
use halfline::{
    find_spectrum, Complex64, HermitianMatrix, PotentialSpec, Problem, ScalarProfile, SearchOptions, Spectrum,
    Tolerances,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Problems whose lowest level sits below this are rejected.
pub const MIN_LEVEL: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    /// Index of the draw that produced the problem, rejections included.
    pub draw: usize,
    pub problem: Problem,
    pub spectrum: Spectrum,
}

/// Multiple of 0.05 in [lo, hi].
fn grid_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo / 0.05).round() as i64, (hi / 0.05).round() as i64);
    rng.random_range(a..=b) as f64 * 0.05
}

pub fn random_profile(rng: &mut ChaCha8Rng) -> ScalarProfile {
    match rng.random_range(0..3) {
        0 => {
            let left = grid_point(rng, 0.0, 0.8);
            let right = left + grid_point(rng, 0.2, 1.2);
            ScalarProfile::Box { height: rng.random_range(0.5..5.0), left, right }
        }
        1 => ScalarProfile::Gaussian {
            amplitude: rng.random_range(0.5..4.0),
            center: rng.random_range(0.0..1.2),
            width: rng.random_range(0.2..0.5),
        },
        _ => ScalarProfile::PoschlTeller {
            depth: rng.random_range(0.5..4.0),
            center: rng.random_range(0.3..1.2),
            width: rng.random_range(0.2..0.5),
        },
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64, psd: bool) -> HermitianMatrix {
    let mut a = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
    });
    if psd {
        a = (&a * a.adjoint()).unscale(n as f64);
    }
    HermitianMatrix::symmetrized(a)
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> Problem {
    let terms = rng.random_range(1..=3usize);
    let mut spec = PotentialSpec::zero(n);
    for _ in 0..terms {
        let profile = random_profile(rng);
        let psd = rng.random_bool(0.6);
        let weight = if n == 1 {
            let w: f64 = if psd { rng.random_range(0.3..1.0) } else { rng.random_range(-0.5..1.0) };
            HermitianMatrix::scalar(1, w)
        } else {
            random_hermitian(rng, n, 1.0, psd)
        };
        spec = spec.with_term(profile, weight);
    }
    let boundary = random_hermitian(rng, n, 0.8, false);
    Problem::new(spec, boundary).expect("generated problems are valid")
}

/// `count` accepted problems from the stream seeded by `seed`, cycling
/// through N = 1, 2, 3.
pub fn corpus(seed: u64, count: usize) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SearchOptions::new(Tolerances::default());
    let mut out = Vec::with_capacity(count);
    let mut draw = 0;
    while out.len() < count {
        let n = 1 + out.len() % 3;
        let problem = random_problem(&mut rng, n);
        draw += 1;
        let Ok(spectrum) = find_spectrum(&problem, &opts) else {
            continue;
        };
        let lowest = spectrum.entries.last().map_or(0.0, |l| l.lambda);
        if spectrum.is_empty() || lowest < MIN_LEVEL || !spectrum.warnings.is_empty() {
            continue;
        }
        out.push(CorpusEntry { draw: draw - 1, problem, spectrum });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_corpus() {
        let a = corpus(7, 3);
        let b = corpus(7, 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.problem, y.problem);
            assert_eq!(x.spectrum.flattened(), y.spectrum.flattened());
        }
        assert_eq!(a.iter().map(|e| e.problem.dim()).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn box_edges_on_the_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            if let ScalarProfile::Box { left, right, .. } = random_profile(&mut rng) {
                for e in [left, right] {
                    assert!((e / 0.05 - (e / 0.05).round()).abs() < 1e-9);
                }
            }
        }
    }
}
