//! Deterministic seeding across replicates and worker counts.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by
//! `(master_seed, stream_id, replicate)` through a SplitMix64 expansion, so
//! results depend only on those three integers — never on thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Identifies one logical random stream of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SeedPlan {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// SplitMix64 step: advances the state and returns a mixed output.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
}

fn splitmix64_output(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedPlan {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// A plan for a sub-experiment, decorrelated from this one.
    pub fn child(&self, offset: u64) -> Self {
        let mut state = self.master_seed ^ splitmix64_output(self.stream_id);
        splitmix64(&mut state);
        Self {
            master_seed: self.master_seed,
            stream_id: splitmix64_output(state ^ offset.wrapping_mul(0xA076_1D64_78BD_642F)),
        }
    }

    /// The RNG for one replicate. Depends only on
    /// `(master_seed, stream_id, replicate)`.
    pub fn replicate_rng(&self, replicate: u64) -> ChaCha8Rng {
        let mut state = splitmix64_output(self.master_seed)
            ^ splitmix64_output(self.stream_id.wrapping_mul(0xD605_BBB5_8C8A_BC00 | 1))
            ^ splitmix64_output(replicate.wrapping_mul(0xCA5A_8268_83A1_4E0B | 1));
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            splitmix64(&mut state);
            chunk.copy_from_slice(&splitmix64_output(state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

/// Runs `count` replicates of `job`, each with its own replicate-keyed RNG,
/// and returns results in replicate order.
///
/// `workers` picks the rayon pool size (`None` keeps the global pool). The
/// output is byte-identical for every worker count because replicate `i`
/// always sees the same RNG and lands at index `i`.
pub fn collect_replicates<T, F>(
    plan: &SeedPlan,
    count: u64,
    workers: Option<usize>,
    job: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let run = || {
        (0..count)
            .into_par_iter()
            .map(|replicate| {
                let mut rng = plan.replicate_rng(replicate);
                job(replicate, &mut rng)
            })
            .collect()
    };
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("rayon pool")
            .install(run),
        _ => run(),
    }
}
