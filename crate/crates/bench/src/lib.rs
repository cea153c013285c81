//! Fixed problems shared by the benchmarks.

use halfline::model::real_matrix;
use halfline::{HermitianMatrix, PotentialSpec, Problem, ScalarProfile};

/// Scalar Neumann box well of depth 20 on [0, 1].
pub fn box_well() -> Problem {
    Problem::new(
        PotentialSpec::scalar(1, ScalarProfile::Box { height: 20.0, left: 0.0, right: 1.0 }),
        HermitianMatrix::zeros(1),
    )
    .expect("valid problem")
}

/// Three coupled channels with a smooth well and an indefinite boundary.
pub fn coupled_gaussian() -> Problem {
    let w = real_matrix(&[&[2.0, 0.5, 0.0], &[0.5, 1.5, 0.3], &[0.0, 0.3, 1.0]]);
    Problem::new(
        PotentialSpec::zero(3).with_term(ScalarProfile::Gaussian { amplitude: 4.0, center: 1.0, width: 0.6 }, w),
        HermitianMatrix::from_real_diagonal(&[-0.8, 0.0, 0.5]),
    )
    .expect("valid problem")
}
