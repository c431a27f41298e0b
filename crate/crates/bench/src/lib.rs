//! Shared inputs for the criterion benches.

use pwrules::chem::{parse_smiles, Molecule};
use pwrules::matrix::Matrix;
use pwrules::synth::{generate, SynthConfig, SynthDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dataset() -> SynthDataset {
    generate(&SynthConfig::default()).expect("synthetic data")
}

pub fn molecules(pairs: &[(String, String)]) -> Vec<(String, Molecule)> {
    pairs
        .iter()
        .map(|(id, s)| (id.clone(), parse_smiles(s).expect("synthetic SMILES")))
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape")
}
