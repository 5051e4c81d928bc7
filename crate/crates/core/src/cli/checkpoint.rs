//! Binary checkpoints.
//!
//! Layout (little-endian): magic `TGRC`, `u32` version, `u64`-prefixed TOML
//! config snapshot, `u32` block count, then per block a `u32`-prefixed UTF-8
//! name and a `u64`-prefixed run of `f64` values. Integer state is stored
//! bit-cast into `f64` slots so every value survives unchanged.

use std::path::Path;

use super::config::TrainConfig;
use crate::diffcore::{ParamStore, Tensor2};
use crate::error::{Error, Result};
use crate::learner::{EpisodeBatch, ReplayBuffer, Trainer};
use crate::rng::RngState;

pub const MAGIC: &[u8; 4] = b"TGRC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_toml: String,
    pub blocks: Vec<(String, Vec<f64>)>,
}

fn bits(x: u64) -> f64 {
    f64::from_bits(x)
}

fn unbits(x: f64) -> u64 {
    x.to_bits()
}

fn store_blocks(prefix: &str, store: &ParamStore, out: &mut Vec<(String, Vec<f64>)>) {
    for (name, t) in store.iter() {
        out.push((format!("{prefix}/{name}"), t.data().to_vec()));
    }
}

fn tensor_blocks(prefix: &str, store: &ParamStore, tensors: &[Tensor2], out: &mut Vec<(String, Vec<f64>)>) {
    for ((name, _), t) in store.iter().zip(tensors) {
        out.push((format!("{prefix}/{name}"), t.data().to_vec()));
    }
}

fn encode_buffer(buffer: &ReplayBuffer) -> Vec<f64> {
    let mut out = vec![bits(buffer.len() as u64)];
    for ep in buffer.iter() {
        let (rows, cols) = ep.obs.first().map(Tensor2::shape).unwrap_or((0, 0));
        let state_dim = ep.states.first().map(Vec::len).unwrap_or(0);
        let n_act = ep.actions.first().map(Vec::len).unwrap_or(0);
        out.extend([ep.len(), rows, cols, state_dim, n_act, usize::from(ep.won)].map(|v| bits(v as u64)));
        for t in 0..ep.len() {
            out.extend_from_slice(ep.obs[t].data());
            out.extend_from_slice(&ep.states[t]);
            out.extend(ep.actions[t].iter().map(|&a| bits(a as u64)));
            out.push(ep.rewards[t]);
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [f64],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [f64]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("block {} is truncated", self.what)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn int(&mut self) -> Result<usize> {
        Ok(unbits(self.take(1)?[0]) as usize)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Checkpoint(format!("block {} has trailing values", self.what)));
        }
        Ok(())
    }
}

fn decode_buffer(data: &[f64], capacity: usize) -> Result<ReplayBuffer> {
    let mut c = Cursor { data, pos: 0, what: "buffer" };
    let mut buffer = ReplayBuffer::new(capacity);
    for _ in 0..c.int()? {
        let (len, rows, cols, state_dim, n_act, won) = (c.int()?, c.int()?, c.int()?, c.int()?, c.int()?, c.int()?);
        let mut ep = EpisodeBatch {
            obs: Vec::with_capacity(len),
            states: Vec::with_capacity(len),
            actions: Vec::with_capacity(len),
            rewards: Vec::with_capacity(len),
            won: won != 0,
        };
        for _ in 0..len {
            ep.obs.push(Tensor2::from_vec(rows, cols, c.take(rows * cols)?.to_vec())?);
            ep.states.push(c.take(state_dim)?.to_vec());
            ep.actions.push(c.take(n_act)?.iter().map(|&a| unbits(a) as usize).collect());
            ep.rewards.push(c.take(1)?[0]);
        }
        ep.validate()?;
        buffer.push(ep);
    }
    c.finish()?;
    Ok(buffer)
}

fn encode_rng(state: &RngState) -> Vec<f64> {
    let mut out: Vec<f64> = state
        .seed
        .chunks_exact(8)
        .map(|c| bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    out.push(bits(state.stream));
    out.push(bits(state.word_pos as u64));
    out.push(bits((state.word_pos >> 64) as u64));
    out
}

fn decode_rng(data: &[f64]) -> Result<RngState> {
    if data.len() != 7 {
        return Err(Error::Checkpoint(format!("rng block has {} values, expected 7", data.len())));
    }
    let mut seed = [0u8; 32];
    for (dst, v) in seed.chunks_exact_mut(8).zip(&data[..4]) {
        dst.copy_from_slice(&unbits(*v).to_le_bytes());
    }
    Ok(RngState {
        seed,
        stream: unbits(data[4]),
        word_pos: u128::from(unbits(data[5])) | (u128::from(unbits(data[6])) << 64),
    })
}

impl Checkpoint {
    pub fn capture(config: &TrainConfig, trainer: &Trainer) -> Self {
        let m = &trainer.model;
        let mut blocks = Vec::new();
        blocks.push((
            "meta".to_string(),
            [
                trainer.seed,
                trainer.env_steps,
                trainer.episodes,
                trainer.train_steps,
                m.adam.step,
                trainer.loss_count,
            ]
            .map(bits)
            .into_iter()
            .chain([trainer.loss_sum])
            .collect(),
        ));
        blocks.push(("rng".to_string(), encode_rng(&RngState::capture(&trainer.rng))));
        store_blocks("online", &m.online, &mut blocks);
        store_blocks("target", &m.target, &mut blocks);
        tensor_blocks("adam.m", &m.online, &m.adam.m, &mut blocks);
        tensor_blocks("adam.v", &m.online, &m.adam.v, &mut blocks);
        blocks.push(("buffer".to_string(), encode_buffer(&trainer.buffer)));
        Self {
            config_toml: config.to_toml_string(),
            blocks,
        }
    }

    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_toml_str(&self.config_toml, "checkpoint config")
    }

    fn block(&self, name: &str) -> Result<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(unbits(self.block("meta")?[0]))
    }

    pub fn env_steps(&self) -> Result<u64> {
        Ok(unbits(self.block("meta")?[1]))
    }

    fn fill(&self, prefix: &str, names: &ParamStore, dst: &mut [&mut Tensor2]) -> Result<()> {
        for ((name, _), t) in names.iter().zip(dst.iter_mut()) {
            let key = format!("{prefix}/{name}");
            let src = self.block(&key)?;
            if src.len() != t.len() {
                return Err(Error::Checkpoint(format!(
                    "{key} holds {} values, model expects {}",
                    src.len(),
                    t.len()
                )));
            }
            t.data_mut().copy_from_slice(src);
        }
        Ok(())
    }

    /// Rebuilds the trainer exactly as it was captured.
    pub fn restore(&self) -> Result<(TrainConfig, Trainer)> {
        let config = self.config()?;
        let seed = self.seed()?;
        let mut tr = Trainer::new(config.learner_config(), config.env_spec(), seed)?;
        let meta = self.block("meta")?;
        if meta.len() != 7 {
            return Err(Error::Checkpoint(format!("meta block has {} values, expected 7", meta.len())));
        }
        tr.env_steps = unbits(meta[1]);
        tr.episodes = unbits(meta[2]);
        tr.train_steps = unbits(meta[3]);
        tr.model.adam.step = unbits(meta[4]);
        tr.loss_count = unbits(meta[5]);
        tr.loss_sum = meta[6];
        tr.rng = decode_rng(self.block("rng")?)?.restore();

        let layout = tr.model.online.clone();
        let ids: Vec<_> = layout.ids().collect();
        let mut online: Vec<Tensor2> = ids.iter().map(|&id| layout.get(id).clone()).collect();
        let mut target = online.clone();
        let mut m = tr.model.adam.m.clone();
        let mut v = tr.model.adam.v.clone();
        self.fill("online", &layout, &mut online.iter_mut().collect::<Vec<_>>())?;
        self.fill("target", &layout, &mut target.iter_mut().collect::<Vec<_>>())?;
        self.fill("adam.m", &layout, &mut m.iter_mut().collect::<Vec<_>>())?;
        self.fill("adam.v", &layout, &mut v.iter_mut().collect::<Vec<_>>())?;
        for (k, &id) in ids.iter().enumerate() {
            *tr.model.online.get_mut(id) = online[k].clone();
            *tr.model.target.get_mut(id) = target[k].clone();
        }
        tr.model.adam.m = m;
        tr.model.adam.v = v;
        tr.buffer = decode_buffer(self.block("buffer")?, tr.config.buffer_capacity)?;

        let expected = 2 + 4 * ids.len() + 1;
        if self.blocks.len() != expected {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} blocks, model expects {expected}",
                self.blocks.len()
            )));
        }
        Ok((config, tr))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config_toml.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config_toml.as_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, values) in &self.blocks {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u64()? as usize;
        let config_toml = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config snapshot is not UTF-8".into()))?;
        let n_blocks = r.u32()?;
        let mut blocks = Vec::with_capacity(n_blocks as usize);
        for _ in 0..n_blocks {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?;
            let count = r.u64()? as usize;
            let raw = r.take(count.checked_mul(8).ok_or_else(|| Error::Checkpoint("block too large".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push((name, values));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { config_toml, blocks })
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("file truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
