//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sif_core::sif::chain_from_ids;
use sif_core::{create_archive, Archive, FieldElement, FieldParams, SharingPolicy};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// An archive of `size` random elements and the chain `1..=k`.
pub fn fixture(field: FieldParams, n: usize, k: usize, size: usize, seed: u64) -> (Archive, Vec<FieldElement>, Vec<FieldElement>) {
    let policy = SharingPolicy::new(n, k, field).expect("valid policy");
    let mut r = rng(seed);
    let elements: Vec<_> = (0..size).map(|_| field.reduce(r.gen())).collect();
    let archive = create_archive(&policy, &elements, &mut r).expect("archive");
    let ids: Vec<usize> = (1..=k).collect();
    let chain = chain_from_ids(&policy, &ids).expect("chain");
    (archive, chain, elements)
}
