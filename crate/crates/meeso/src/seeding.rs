//! Deterministic seed derivation so every random stream in a run is a pure
//! function of the run seed, independent of thread scheduling.

/// Named streams carved out of a base seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    SpaceGeneration = 1,
    NeighborMutation = 2,
    Evaluation = 3,
    Preprocess = 4,
    TrainInit = 5,
    TrainShuffle = 6,
    TrainDropout = 7,
    Probes = 8,
    McDropout = 9,
    RandomSelection = 10,
    DatasetSplit = 11,
}

/// Mix a base seed with a stream tag and an index (splitmix64 finalizer,
/// applied twice so nearby inputs decorrelate).
pub(crate) fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let mut x = base
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((stream as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(index.wrapping_mul(0x94d0_49bb_1331_11eb));
    for _ in 0..2 {
        x ^= x >> 30;
        x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
    }
    x
}
