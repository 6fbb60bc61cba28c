//! Plain-text consensus checkpoints.
//!
//! ```text
//! consensus v1
//! kind mv|tmv|rbm
//! models <M>
//! labels <L>
//! adam <lr> <beta1> <beta2> <epsilon>
//! ```
//!
//! followed, for `tmv`, by `logits <M values>` and one optimizer record, and
//! for `rbm`, by one `a`/`b`/`w` triple and one optimizer record per label.
//! An optimizer record is `step <t>` then one `m <values>` and one
//! `v <values>` line per tensor. Values use shortest round-trip decimals.

use crate::nn::checkpoint::{join_floats, Lines};
use crate::nn::{AdamConfig, AdamState};
use crate::{Error, Result};

use super::{ConsensusKind, ConsensusModel, ConsensusParams, RbmBlock, RbmParams, TmvParams};

fn write_optimizer(out: &mut String, state: &AdamState) {
    *out += &format!("step {}\n", state.t);
    for (m, v) in state.m.iter().zip(&state.v) {
        *out += &format!("m {}\n", join_floats(m.iter().copied()));
        *out += &format!("v {}\n", join_floats(v.iter().copied()));
    }
}

fn read_optimizer(lines: &mut Lines<'_>, config: AdamConfig, sizes: &[usize]) -> Result<AdamState> {
    let mut state = AdamState::new(config, sizes);
    state.t = lines.value("step")?;
    for (k, &n) in sizes.iter().enumerate() {
        state.m[k] = lines.floats("m", n)?;
        state.v[k] = lines.floats("v", n)?;
    }
    Ok(state)
}

pub fn write_consensus(model: &ConsensusModel) -> String {
    let adam = model.adam_config();
    let mut out = String::from("consensus v1\n");
    out += &format!("kind {}\n", model.kind());
    out += &format!("models {}\n", model.n_models());
    out += &format!("labels {}\n", model.n_labels());
    out += &format!(
        "adam {}\n",
        join_floats([adam.learning_rate, adam.beta1, adam.beta2, adam.epsilon])
    );
    match &model.params {
        ConsensusParams::MajorityVote => {}
        ConsensusParams::TrainableMajorityVote { params, optimizer } => {
            out += &format!("logits {}\n", join_floats(params.logits.iter().copied()));
            write_optimizer(&mut out, optimizer);
        }
        ConsensusParams::Rbm { params, optimizers } => {
            for (block, opt) in params.blocks.iter().zip(optimizers) {
                out += &format!("a {}\n", block.a);
                out += &format!("b {}\n", join_floats(block.b.iter().copied()));
                out += &format!("w {}\n", join_floats(block.w.iter().copied()));
                write_optimizer(&mut out, opt);
            }
        }
    }
    out
}

pub fn read_consensus(text: &str) -> Result<ConsensusModel> {
    let mut lines = Lines::new(text);
    let (line, version) = lines.expect("consensus")?;
    if version != "v1" {
        return Err(Error::parse(line, format!("unsupported checkpoint version `{version}`")));
    }
    let kind: ConsensusKind = {
        let (line, k) = lines.expect("kind")?;
        k.parse().map_err(|_| Error::parse(line, format!("unknown kind `{k}`")))?
    };
    let m: usize = lines.value("models")?;
    let l: usize = lines.value("labels")?;
    let [learning_rate, beta1, beta2, epsilon] = lines.floats("adam", 4)?[..] else {
        unreachable!("length checked")
    };
    let adam = AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    };
    let params = match kind {
        ConsensusKind::MajorityVote => ConsensusParams::MajorityVote,
        ConsensusKind::TrainableMajorityVote => {
            let logits = lines.floats("logits", m)?;
            let optimizer = read_optimizer(&mut lines, adam, &[m])?;
            ConsensusParams::TrainableMajorityVote {
                params: TmvParams { logits },
                optimizer,
            }
        }
        ConsensusKind::Rbm => {
            let mut blocks = Vec::with_capacity(l);
            let mut optimizers = Vec::with_capacity(l);
            for _ in 0..l {
                let a = lines.value("a")?;
                let b = lines.floats("b", m)?;
                let w = lines.floats("w", m)?;
                blocks.push(RbmBlock { a, b, w });
                optimizers.push(read_optimizer(&mut lines, adam, &[1, m, m])?);
            }
            ConsensusParams::Rbm {
                params: RbmParams { blocks },
                optimizers,
            }
        }
    };
    Ok(ConsensusModel::from_parts(m, l, adam, params))
}
