//! Run orchestration: configuration checks, output directories, manifests,
//! and the two-mode demonstration.

mod fig1;
mod run;

pub use fig1::{fig1_model, fig1_reward, reproduce_fig1, Fig1Summary, QuadratureTilt, FIG1_LAMBDA, FIG1_RADIUS};
pub use run::{
    build_prox, estimate_z, prox_point, run, run_kl, run_w2, AlignRunConfig, KlBackend, Method, ProxBackend,
    RunManifest, RunOutcome,
};

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, SimRng};

/// Draws per work unit; each unit has its own generator stream so output is
/// independent of the thread count.
pub const CHUNK: usize = 1024;

/// First stream used for per-chunk generators.
const CHUNK_STREAM_BASE: u64 = 1 << 20;

/// Runs `work(rng, count)` over `ceil(n / CHUNK)` chunks on up to `threads`
/// threads and concatenates the results in chunk order.
pub fn parallel_chunks<T, F>(n: usize, seed: u64, threads: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> Result<Vec<T>> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let threads = threads.clamp(1, chunks.max(1));
    let run_chunk = |c: usize| {
        let count = CHUNK.min(n - c * CHUNK);
        work(&mut derived_rng(seed, CHUNK_STREAM_BASE + c as u64), count)
    };
    let mut parts: Vec<Option<Result<Vec<T>>>> = (0..chunks).map(|_| None).collect();
    if threads == 1 {
        for (c, slot) in parts.iter_mut().enumerate() {
            *slot = Some(run_chunk(c));
        }
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let run_chunk = &run_chunk;
                    s.spawn(move || (t..chunks).step_by(threads).map(|c| (c, run_chunk(c))).collect::<Vec<_>>())
                })
                .collect();
            for h in handles {
                for (c, r) in h.join().expect("worker panicked") {
                    parts[c] = Some(r);
                }
            }
        });
    }
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p.expect("every chunk ran")?);
    }
    Ok(out)
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Exclusive claim on an output directory for the duration of a run.
pub struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn claim(path: &Path) -> Result<Self> {
        fs::create_dir_all(path)?;
        let lock = path.join(".rewardtilt.lock");
        fs::OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Configuration(format!("output directory {} is in use by another run", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        Ok(Self { path: path.to_path_buf(), lock })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
