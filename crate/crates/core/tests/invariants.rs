use halfline::fdoracle::{oracle_spectrum, round_length};
use halfline::inequalities::{applicable_reports, Verdict};
use halfline::model::real_matrix;
use halfline::spectrum::eigenvalue_count;
use halfline::{find_spectrum, CMatrix, Complex64, HermitianMatrix, PotentialSpec, Problem, ScalarProfile, SearchOptions, Spectrum, Tolerances};
use proptest::prelude::*;

fn boxes(dim: usize) -> impl Strategy<Value = Problem> {
    let term = (0.5..6.0_f64, 0.0..1.0_f64, 0.2..1.5_f64, prop::collection::vec(-1.0..1.0_f64, dim * dim));
    (prop::collection::vec(term, 1..3), prop::collection::vec(-1.0..1.0_f64, dim)).prop_map(move |(terms, sigma)| {
        let mut v = PotentialSpec::zero(dim);
        for (height, left, width, g) in terms {
            // G Gᵀ is positive semidefinite.
            let a = gram(&g, dim);
            let rows: Vec<&[f64]> = a.iter().map(|r| r.as_slice()).collect();
            v = v.with_term(ScalarProfile::Box { height, left, right: left + width }, real_matrix(&rows));
        }
        Problem::new(v, HermitianMatrix::from_real_diagonal(&sigma)).unwrap()
    })
}

fn gram(g: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum()).collect()).collect()
}

fn unitary(seed: &[f64], n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(seed[2 * (i * n + j)], seed[2 * (i * n + j) + 1]));
    (m + CMatrix::identity(n, n)).qr().q()
}

fn same(a: &Spectrum, b: &Spectrum, rel: f64) -> bool {
    let (x, y) = (a.flattened(), b.flattened());
    x.len() == y.len() && x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= rel * p.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn count_is_monotone_and_matches_levels(p in (1..3usize).prop_flat_map(boxes)) {
        let tol = Tolerances::default();
        let s = find_spectrum(&p, &SearchOptions::default()).unwrap();
        let floor = s.resolution_floor;
        let mut prev = usize::MAX;
        for i in 0..12 {
            let l = floor + (p.spectral_bound() - floor) * i as f64 / 11.0;
            let c = eigenvalue_count(&p, l.max(floor), &tol).unwrap();
            prop_assert!(c <= prev);
            prev = c;
        }
        prop_assert_eq!(eigenvalue_count(&p, floor, &tol).unwrap(), s.count());
    }

    #[test]
    fn rescaling_multiplies_eigenvalues(p in boxes(2), s in 0.5..2.0_f64) {
        let a = find_spectrum(&p, &SearchOptions::default()).unwrap();
        let b = find_spectrum(&p.rescaled(s).unwrap(), &SearchOptions::default()).unwrap();
        let scaled: Vec<f64> = a.flattened().iter().map(|l| s * s * l).collect();
        let got = b.flattened();
        prop_assert_eq!(scaled.len(), got.len());
        for (x, y) in scaled.iter().zip(&got) {
            prop_assert!((x - y).abs() <= 1e-8 * x.max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn unitary_conjugation_is_invisible(p in boxes(2), seed in prop::collection::vec(-1.0..1.0_f64, 8)) {
        let u = unitary(&seed, 2);
        let a = find_spectrum(&p, &SearchOptions::default()).unwrap();
        let b = find_spectrum(&p.conjugated(&u), &SearchOptions::default()).unwrap();
        prop_assert!(same(&a, &b, 1e-8), "{:?} vs {:?}", a.flattened(), b.flattened());
    }

    #[test]
    fn no_report_is_violated(p in boxes(2)) {
        let s = find_spectrum(&p, &SearchOptions::default()).unwrap();
        let reports = applicable_reports(&s, &p, &[1.5, 2.0, 3.0], None).unwrap();
        prop_assert!(reports.iter().all(|r| r.verdict != Verdict::Violated), "{:?}", reports);
    }
}

#[test]
fn shooting_and_oracle_agree_on_a_coupled_well() {
    let w = real_matrix(&[&[3.0, 1.0], &[1.0, 2.0]]);
    let p = Problem::new(
        PotentialSpec::zero(2).with_term(ScalarProfile::Box { height: 2.0, left: 0.0, right: 1.5 }, w),
        real_matrix(&[&[-0.5, 0.2], &[0.2, 0.4]]),
    )
    .unwrap();
    let s = find_spectrum(&p, &SearchOptions::default()).unwrap();
    let lmin = s.entries.last().unwrap().lambda;
    let h = 0.005;
    let o = oracle_spectrum(&p, h, round_length(h, p.truncation_radius + 12.0 / lmin.sqrt())).unwrap();
    let a = s.flattened();
    let b: Vec<f64> = o.flattened().into_iter().filter(|&l| l > 0.5 * lmin).collect();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-3, "{x} vs {y}");
    }
}

#[test]
fn spectrum_survives_json() {
    let p = Problem::free(real_matrix(&[&[-1.0, 0.5], &[0.5, -1.0]]));
    let s = find_spectrum(&p, &SearchOptions::default()).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: Spectrum = serde_json::from_str(&text).unwrap();
    assert_eq!(back.dim, s.dim);
    assert!(same(&s, &back, 1e-15));
    let q: Problem = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&q).unwrap(), serde_json::to_value(&p).unwrap());
}
