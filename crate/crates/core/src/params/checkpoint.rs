//! Binary checkpoint format.
//!
//! Layout (little-endian): magic `TLE1`, a config block (shapes, seed,
//! config hash, Adam hyperparameters and step count), the store matrices
//! in declared order, the Adam first- and second-moment matrices in the
//! same order, and a trailing CRC32 over everything before it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{AdamHyper, AdamState, ParameterStore, Shapes, Slot};
use crate::error::Error;
use crate::tensor::Matrix;
use crate::Result;

pub const MAGIC: &[u8; 4] = b"TLE1";

/// A loaded checkpoint: parameters, optimizer state and the metadata
/// needed to detect configuration drift.
#[derive(Debug)]
pub struct Checkpoint {
    pub store: ParameterStore,
    pub adam: AdamState,
    pub seed: u64,
    pub config_hash: u64,
}

impl Checkpoint {
    /// True when the stored config hash differs from `expected`; callers
    /// warn and proceed.
    pub fn hash_mismatch(&self, expected: u64) -> bool {
        self.config_hash != expected
    }
}

struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn write_matrix<W: Write>(w: &mut W, m: &Matrix) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for v in m.iter() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, expect: (usize, usize)) -> Result<Matrix> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let rows = r
        .read_u64::<LittleEndian>()
        .map_err(|e| bad(format!("truncated matrix header: {e}")))? as usize;
    let cols = r
        .read_u64::<LittleEndian>()
        .map_err(|e| bad(format!("truncated matrix header: {e}")))? as usize;
    if (rows, cols) != expect {
        return Err(bad(format!(
            "matrix shape {rows}x{cols} does not match declared {}x{}",
            expect.0, expect.1
        )));
    }
    let mut values = vec![0f64; rows * cols];
    for v in values.iter_mut() {
        *v = r
            .read_f64::<LittleEndian>()
            .map_err(|e| bad(format!("truncated matrix payload: {e}")))?;
    }
    let m = Matrix::zeros(rows, cols);
    m.fill_from(&values);
    Ok(m)
}

/// Writes `store` and `adam` to `path`. Fails if any parameter is
/// non-finite; a checkpoint never captures a corrupted model.
pub fn save_checkpoint(
    store: &ParameterStore,
    adam: &AdamState,
    seed: u64,
    config_hash: u64,
    path: &Path,
) -> Result<()> {
    if !store.all_finite() {
        return Err(Error::Checkpoint(
            "refusing to save: store contains non-finite parameters".to_string(),
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = CrcWriter {
        inner: BufWriter::new(file),
        hasher: crc32fast::Hasher::new(),
    };
    let io_err = |e: std::io::Error| Error::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    let s = store.shapes;
    for v in [
        s.vocab as u64,
        s.tweets as u64,
        s.users as u64,
        s.dim as u64,
        s.cw as u64,
        s.ct as u64,
        seed,
        config_hash,
        adam.step_count(),
    ] {
        w.write_u64::<LittleEndian>(v).map_err(io_err)?;
    }
    for v in [
        adam.hyper.lr,
        adam.hyper.beta1,
        adam.hyper.beta2,
        adam.hyper.epsilon,
    ] {
        w.write_f64::<LittleEndian>(v).map_err(io_err)?;
    }
    for slot in Slot::ALL {
        write_matrix(&mut w, store.matrix(slot)).map_err(io_err)?;
    }
    let (first, second) = (&adam.first, &adam.second);
    for slot in Slot::ALL {
        write_matrix(&mut w, first.matrix(slot)).map_err(io_err)?;
    }
    for slot in Slot::ALL {
        write_matrix(&mut w, second.matrix(slot)).map_err(io_err)?;
    }
    let crc = w.hasher.clone().finalize();
    w.inner.write_u32::<LittleEndian>(crc).map_err(io_err)?;
    w.inner.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a checkpoint back. The CRC is verified over the whole payload, so
/// truncation and corruption both fail before any state is returned.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < MAGIC.len() + 4 {
        return Err(Error::Checkpoint("file too short".to_string()));
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored_crc != computed {
        return Err(Error::Checkpoint(format!(
            "checksum failure: stored {stored_crc:#010x}, computed {computed:#010x}"
        )));
    }

    let mut r = payload;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic bytes {magic:?}, expected {MAGIC:?}"
        )));
    }

    let mut next_u64 = || -> Result<u64> {
        r.read_u64::<LittleEndian>()
            .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))
    };
    let shapes = Shapes {
        vocab: next_u64()? as usize,
        tweets: next_u64()? as usize,
        users: next_u64()? as usize,
        dim: next_u64()? as usize,
        cw: next_u64()? as usize,
        ct: next_u64()? as usize,
    };
    let seed = next_u64()?;
    let config_hash = next_u64()?;
    let step = next_u64()?;
    let mut next_f64 = || -> Result<f64> {
        r.read_f64::<LittleEndian>()
            .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))
    };
    let hyper = AdamHyper {
        lr: next_f64()?,
        beta1: next_f64()?,
        beta2: next_f64()?,
        epsilon: next_f64()?,
    };

    let mut store = ParameterStore::zeros(shapes);
    for slot in Slot::ALL {
        *store_matrix_mut(&mut store, slot) = read_matrix(&mut r, shapes.of(slot))?;
    }
    let mut adam = AdamState::new(shapes, hyper);
    adam.set_step_count(step);
    for slot in Slot::ALL {
        *store_matrix_mut(&mut adam.first, slot) = read_matrix(&mut r, shapes.of(slot))?;
    }
    for slot in Slot::ALL {
        *store_matrix_mut(&mut adam.second, slot) = read_matrix(&mut r, shapes.of(slot))?;
    }
    if !r.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{} unexpected trailing bytes",
            r.len()
        )));
    }

    Ok(Checkpoint {
        store,
        adam,
        seed,
        config_hash,
    })
}

fn store_matrix_mut(store: &mut ParameterStore, slot: Slot) -> &mut Matrix {
    match slot {
        Slot::WordVec => &mut store.word_vectors,
        Slot::TweetVec => &mut store.tweet_vectors,
        Slot::UserVec => &mut store.user_vectors,
        Slot::WordNode => &mut store.word_tree_nodes,
        Slot::TweetNode => &mut store.tweet_tree_nodes,
        Slot::UserNode => &mut store.user_tree_nodes,
        Slot::Attention => &mut store.attention,
    }
}
