use rand::Rng;

use crate::linalg::{project_unitary, ComplexMatrix};
use crate::random::ginibre;

pub fn random_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(n, rng)
}

pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    project_unitary(&ginibre(n, rng)).expect("Ginibre draws are full rank")
}
