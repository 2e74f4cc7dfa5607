//! Seeded random matrices. Sample `i` of a batch always draws from its own
//! ChaCha stream, so results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::densecore::{orthonormalize_columns, SquareMatrix};

/// Independent generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniformly distributed rotation: orthonormalized Gaussian matrix with the
/// last column negated when the determinant comes out negative.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    loop {
        let g = gaussian_matrix(n, rng);
        let Ok((mut q, _)) = orthonormalize_columns(&g) else {
            continue;
        };
        if q.determinant() < 0.0 {
            for i in 0..n {
                let v = q.get(i, n - 1);
                q.set(i, n - 1, -v);
            }
        }
        return q;
    }
}

/// Gaussian matrix rescaled to determinant one.
pub fn random_special_linear<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    loop {
        let mut g = gaussian_matrix(n, rng);
        let det = g.determinant();
        if det.abs() < 1e-3 {
            continue;
        }
        if det < 0.0 {
            for j in 0..n {
                let v = g.get(0, j);
                g.set(0, j, -v);
            }
        }
        return g.scale(det.abs().powf(-1.0 / n as f64));
    }
}

/// Gaussian matrix with its trace removed.
pub fn random_trace_free<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SquareMatrix {
    let g = gaussian_matrix(n, rng);
    let shift = g.trace() / n as f64;
    &g - &SquareMatrix::identity(n).scale(shift)
}
