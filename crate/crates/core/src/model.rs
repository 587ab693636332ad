//! The full trainable model: vocab, encoder and policy parameters, and
//! checkpoint I/O.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{EncoderParams, Vocab};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::checkpoint::{self, Entry};
use crate::numeric::{ParamStore, Tape};
use crate::policy::PolicyParams;

/// Checkpoint entries with this prefix carry vocab tokens (one empty tensor
/// per token, in id order) rather than parameters.
pub const VOCAB_PREFIX: &str = "__vocab__/";

pub const DEFAULT_DIM: usize = 64;

/// Multiplier applied at init to every encoder parameter.
pub const ENCODER_INIT_GAIN: f64 = 4.0;
/// Multiplier applied at init to the two weight matrices of the scoring FFN.
pub const SCORE_INIT_GAIN: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct Model {
    pub vocab: Vocab,
    pub params: ParamStore,
    pub encoder: EncoderParams,
    pub policy: PolicyParams,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab && self.params == other.params
    }
}

impl Model {
    /// Fresh model. Every parameter is drawn uniform in `[-1/√d, 1/√d]`, in
    /// registration order, from a generator seeded with `seed`; encoder
    /// parameters are then multiplied by [`ENCODER_INIT_GAIN`] and the
    /// scoring FFN weights by [`SCORE_INIT_GAIN`]. With a unit gain the
    /// question signal reaching the policy is too weak to learn from.
    pub fn new(graph: &Graph, vocab: Vocab, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoder = EncoderParams::register(&mut params, vocab.len(), dim, bound, &mut rng)?;
        let policy = PolicyParams::register(&mut params, graph, dim, bound, &mut rng)?;
        let gains = [
            (encoder.token_embedding, ENCODER_INIT_GAIN),
            (encoder.pool.w1, ENCODER_INIT_GAIN),
            (encoder.pool.b1, ENCODER_INIT_GAIN),
            (encoder.pool.w2, ENCODER_INIT_GAIN),
            (encoder.pool.b2, ENCODER_INIT_GAIN),
            (encoder.history.weight, ENCODER_INIT_GAIN),
            (encoder.history.bias, ENCODER_INIT_GAIN),
            (policy.score.w1, SCORE_INIT_GAIN),
            (policy.score.w2, SCORE_INIT_GAIN),
        ];
        for (id, gain) in gains {
            params.data_mut(id).iter_mut().for_each(|v| *v *= gain);
        }
        Ok(Model {
            vocab,
            params,
            encoder,
            policy,
        })
    }

    pub fn dim(&self) -> usize {
        self.policy.dim
    }

    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        self.policy.check_graph(&self.params, graph)
    }

    /// `l_q` for the last of `questions`, as plain values.
    pub fn query_embedding(&self, questions: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let q = self.encoder.encode_dialogue(&mut tape, questions)?;
        Ok(tape.value(q).to_vec())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        checkpoint::write_magic(&mut w)?;
        checkpoint::write_params(&mut w, &self.params)?;
        for tok in self.vocab.tokens() {
            checkpoint::write_entry(&mut w, &format!("{VOCAB_PREFIX}{tok}"), &[0], &[])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let entries = checkpoint::read_entries(&mut r)?;
        let (vocab, params): (Vec<&Entry>, Vec<&Entry>) =
            entries.iter().partition(|e| e.name.starts_with(VOCAB_PREFIX));
        let vocab = Vocab::from_id_order(
            vocab
                .iter()
                .map(|e| e.name[VOCAB_PREFIX.len()..].to_string())
                .collect(),
        )?;
        let params = checkpoint::params_from_entries(params)?;
        let encoder = EncoderParams::lookup(&params)?;
        let policy = PolicyParams::lookup(&params)?;
        if params.get(encoder.token_embedding).rows() != vocab.len() {
            return Err(Error::Checkpoint(format!(
                "token embedding has {} rows but vocab has {} tokens",
                params.get(encoder.token_embedding).rows(),
                vocab.len()
            )));
        }
        if encoder.dim != policy.dim {
            return Err(Error::Checkpoint("encoder and policy dimensions differ".into()));
        }
        Ok(Model {
            vocab,
            params,
            encoder,
            policy,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}
