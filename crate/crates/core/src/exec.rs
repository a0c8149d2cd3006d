//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every helper runs sequentially. Results are always collected
//! in index order, so output never depends on scheduling.

/// Runs `f` with `jobs` worker threads available to [`par_map`].
///
/// `jobs == 0` uses rayon's default pool size. Without the `parallel`
/// feature the argument is ignored.
#[cfg(feature = "parallel")]
pub fn with_jobs<R, F>(jobs: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        builder = builder.num_threads(jobs);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        // Pool creation only fails when the OS refuses threads; run inline.
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R, F>(_jobs: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

/// Maps `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference for [`par_map`], kept callable with the feature on
/// so the two paths can be compared.
pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Whether this build was compiled with the rayon backend.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Derives an independent seed for `(stream, index)` from a root seed.
///
/// SplitMix64 finalizer applied to a fixed combination of the inputs; the
/// mapping is stable across platforms and releases.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root
        ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)
        ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
