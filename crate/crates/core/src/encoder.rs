//! Question and conversation-history encoding.
//!
//! A question is embedded by mean-pooling trainable token embeddings and
//! passing the result through a small feed-forward network. The history
//! encoder runs an LSTM over the per-turn question embeddings from a zero
//! state; its final hidden state is the query embedding the policy sees.

use std::collections::HashMap;

use rand::Rng;

use crate::dataset::Conversation;
use crate::error::{Error, Result};
use crate::numeric::{FfnParams, LstmParams, ParamId, ParamStore, Tape, Var};

pub const OOV: usize = 0;
pub const OOV_TOKEN: &str = "<oov>";

/// Token table. Id 0 is reserved for out-of-vocabulary words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(std::iter::empty::<&str>())
    }
}

impl Vocab {
    /// Builds a vocab from tokens in first-appearance order, lowercased.
    /// Repeats and the OOV marker itself are skipped.
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut v = Vocab {
            tokens: vec![OOV_TOKEN.to_string()],
            index: HashMap::new(),
        };
        for t in tokens {
            let t = t.as_ref().to_lowercase();
            if t == OOV_TOKEN || v.index.contains_key(&t) {
                continue;
            }
            v.index.insert(t.clone(), v.tokens.len());
            v.tokens.push(t);
        }
        v
    }

    pub fn from_conversations(convs: &[Conversation]) -> Self {
        Self::from_tokens(
            convs
                .iter()
                .flat_map(|c| &c.turns)
                .flat_map(|t| &t.question)
                .map(String::as_str),
        )
    }

    /// Restores a vocab from its id-ordered token list (as stored in a
    /// checkpoint). The first token must be the OOV marker.
    pub fn from_id_order(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(OOV_TOKEN) {
            return Err(Error::Checkpoint("vocab must start with the OOV marker".into()));
        }
        let index = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i))
            .collect::<HashMap<_, _>>();
        if index.len() + 1 != tokens.len() {
            return Err(Error::Checkpoint("vocab has duplicate tokens".into()));
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Lowercases, splits on whitespace, and maps unknown words to [`OOV`].
    pub fn tokenize(&self, text: &str) -> Result<Vec<usize>> {
        let ids: Vec<usize> = text.split_whitespace().map(|w| self.id(&w.to_lowercase())).collect();
        if ids.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        Ok(ids)
    }

    pub fn tokenize_words<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<usize>> {
        let text = words.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        self.tokenize(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderParams {
    pub token_embedding: ParamId,
    pub pool: FfnParams,
    pub history: LstmParams,
    pub dim: usize,
}

impl EncoderParams {
    pub fn register<R: Rng>(store: &mut ParamStore, vocab_size: usize, dim: usize, bound: f64, rng: &mut R) -> Result<Self> {
        Ok(EncoderParams {
            token_embedding: store.add_uniform("encoder.token_embedding", &[vocab_size, dim], bound, rng)?,
            pool: FfnParams::register(store, "encoder.pool", dim, dim, dim, bound, rng)?,
            history: LstmParams::register(store, "encoder.history", dim, dim, bound, rng)?,
            dim,
        })
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        let token_embedding = store
            .id("encoder.token_embedding")
            .ok_or_else(|| Error::Checkpoint("missing encoder.token_embedding".into()))?;
        let dim = store.get(token_embedding).cols();
        let pool = FfnParams::lookup(store, "encoder.pool")?;
        let history = LstmParams::lookup(store, "encoder.history")?;
        if history.input != dim || history.hidden != dim || pool.input_dim(store) != dim || pool.output_dim(store) != dim {
            return Err(Error::Checkpoint(format!("encoder shapes disagree with dim {dim}")));
        }
        Ok(EncoderParams {
            token_embedding,
            pool,
            history,
            dim,
        })
    }

    /// `h_q = FFN(mean_i emb(w_i))`
    pub fn encode_question(&self, tape: &mut Tape<'_>, token_ids: &[usize]) -> Result<Var> {
        if token_ids.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let rows = token_ids
            .iter()
            .map(|&t| tape.gather(self.token_embedding, t))
            .collect::<Result<Vec<_>>>()?;
        let pooled = tape.mean(&rows)?;
        self.pool.forward(tape, pooled)
    }

    /// Hidden state after each turn, in order.
    pub fn encode_history_states(&self, tape: &mut Tape<'_>, turns: &[Var]) -> Result<Vec<Var>> {
        if turns.is_empty() {
            return Err(Error::EmptyHistory);
        }
        let mut h = tape.zeros(self.dim);
        let mut c = tape.zeros(self.dim);
        let mut states = Vec::with_capacity(turns.len());
        for &x in turns {
            (h, c) = self.history.step(tape, x, h, c)?;
            states.push(h);
        }
        Ok(states)
    }

    /// Final hidden state of the history LSTM: the query embedding `l_q`.
    pub fn encode_history(&self, tape: &mut Tape<'_>, turns: &[Var]) -> Result<Var> {
        Ok(*self.encode_history_states(tape, turns)?.last().expect("non-empty"))
    }

    /// Query embedding for the last of `questions` given all earlier ones.
    pub fn encode_dialogue(&self, tape: &mut Tape<'_>, questions: &[Vec<usize>]) -> Result<Var> {
        let hs = questions
            .iter()
            .map(|q| self.encode_question(tape, q))
            .collect::<Result<Vec<_>>>()?;
        self.encode_history(tape, &hs)
    }

    pub fn question_embedding(&self, store: &ParamStore, token_ids: &[usize]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let h = self.encode_question(&mut tape, token_ids)?;
        Ok(tape.value(h).to_vec())
    }

    pub fn history_embedding(&self, store: &ParamStore, turns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(store);
        let xs: Vec<Var> = turns.iter().map(|t| tape.input(t.clone())).collect();
        let l = self.encode_history(&mut tape, &xs)?;
        Ok(tape.value(l).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ffn;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, bound: f64) -> (ParamStore, EncoderParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = EncoderParams::register(&mut store, 6, dim, bound, &mut rng).unwrap();
        (store, enc)
    }

    #[test]
    fn tokenize_lowercases_and_maps_oov() {
        let v = Vocab::from_tokens(["who", "signed"]);
        assert_eq!(v.tokenize("Who Signed it").unwrap(), vec![1, 2, 0]);
        assert!(matches!(v.tokenize(""), Err(Error::EmptyQuestion)));
        assert!(matches!(v.tokenize("  \t "), Err(Error::EmptyQuestion)));
        assert_eq!(v.tokenize("who").unwrap(), v.tokenize(&"who".to_lowercase()).unwrap());
    }

    #[test]
    fn vocab_id_order_round_trip() {
        let v = Vocab::from_tokens(["b", "a", "B"]);
        assert_eq!(v.tokens(), &["<oov>", "b", "a"]);
        assert_eq!(Vocab::from_id_order(v.tokens().to_vec()).unwrap(), v);
    }

    #[test]
    fn single_token_is_ffn_of_its_embedding() {
        let (store, enc) = setup(4, 0.5);
        let emb = store.get(enc.token_embedding).row(3).to_vec();
        let expect = ffn(&store, &enc.pool, &emb).unwrap();
        assert_eq!(enc.question_embedding(&store, &[3]).unwrap(), expect);
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let (mut store, enc) = setup(4, 0.0);
        store.data_mut(enc.pool.b2).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(enc.question_embedding(&store, &[1, 2, 5]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let (store, enc) = setup(4, 0.5);
        assert!(enc.question_embedding(&store, &[]).is_err());
        assert!(matches!(enc.history_embedding(&store, &[]), Err(Error::EmptyHistory)));
    }

    #[test]
    fn question_embedding_ignores_token_order() {
        let (store, enc) = setup(8, 0.5);
        let a = enc.question_embedding(&store, &[1, 2, 3, 3, 5]).unwrap();
        let b = enc.question_embedding(&store, &[3, 5, 1, 3, 2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn history_depends_on_turn_order() {
        let (store, enc) = setup(8, 0.5);
        let q1 = enc.question_embedding(&store, &[1, 2]).unwrap();
        let q2 = enc.question_embedding(&store, &[4]).unwrap();
        let fwd = enc.history_embedding(&store, &[q1.clone(), q2.clone()]).unwrap();
        let rev = enc.history_embedding(&store, &[q2, q1]).unwrap();
        assert!(fwd.iter().zip(&rev).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn history_prefix_matches_intermediate_state() {
        let (store, enc) = setup(8, 0.5);
        let qs: Vec<Vec<f64>> = [vec![1], vec![2, 3], vec![4, 5, 1]]
            .iter()
            .map(|q| enc.question_embedding(&store, q).unwrap())
            .collect();
        let mut tape = Tape::new(&store);
        let xs: Vec<Var> = qs.iter().map(|q| tape.input(q.clone())).collect();
        let states = enc.encode_history_states(&mut tape, &xs).unwrap();
        for k in 1..=3 {
            let prefix = enc.history_embedding(&store, &qs[..k]).unwrap();
            assert_eq!(prefix.as_slice(), tape.value(states[k - 1]));
        }
    }

    #[test]
    fn single_turn_is_one_lstm_step() {
        let (store, enc) = setup(4, 0.5);
        let q = enc.question_embedding(&store, &[2]).unwrap();
        let (h, _) = crate::numeric::lstm_step(&store, &enc.history, &q, &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(enc.history_embedding(&store, &[q]).unwrap(), h);
    }
}
