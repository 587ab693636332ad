//! Dense vectors, a reverse-mode tape, and the small set of layers the
//! walker needs.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tape;

pub use gradcheck::{finite_diff_check, GradCheck};
pub use layers::{ffn, lstm_step, FfnParams, LstmParams};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{log_softmax, softmax, Adjoints, Tape, Var};
