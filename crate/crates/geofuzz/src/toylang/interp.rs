//! Execution and input-space operations.

use rand::Rng;

use super::{Cfg, InputVec, ToyProgram, Trace, VertexLabel};
use crate::error::{Error, Result};

/// Runs `program` on `input`, returning the executed entry-to-exit path.
pub(super) fn execute(program: &ToyProgram, input: &InputVec) -> Result<Trace> {
    if input.0.len() != program.input_len {
        return Err(Error::Input(format!(
            "input has {} entries, program reads {}",
            input.0.len(),
            program.input_len
        )));
    }
    for (i, &v) in input.0.iter().enumerate() {
        if v < 1 || v > program.alphabet {
            return Err(Error::Input(format!(
                "x[{}] = {v} outside 1..={}",
                i + 1,
                program.alphabet
            )));
        }
    }
    let cfg: &Cfg = &program.cfg;
    let n = cfg.len();
    // every loop runs at most N-1 total iterations, so this cannot trip
    let step_cap = n * (program.alphabet as usize + 2) * (program.input_len + 2) + n + 16;
    let mut counters = vec![1u32; program.b_count];
    let mut at = cfg.entry();
    let mut seq = vec![at];
    while at != cfg.exit() {
        let next = match cfg.label(at) {
            VertexLabel::Entry | VertexLabel::Join => cfg.successors(at)[0],
            VertexLabel::Block { inc_b } => {
                if let Some(b) = inc_b {
                    counters[*b] = counters[*b] % program.alphabet + 1;
                }
                cfg.successors(at)[0]
            }
            VertexLabel::Branch { x_index, constant } => {
                if input.0[x_index - 1] == *constant {
                    cfg.successors(at)[0]
                } else {
                    cfg.successors(at)[1]
                }
            }
            VertexLabel::Loop { x_index, b_var } => {
                if counters[*b_var] != input.0[x_index - 1] {
                    cfg.successors(at)[0]
                } else {
                    cfg.successors(at)[1]
                }
            }
            VertexLabel::Exit => unreachable!("loop exits before reaching the exit vertex"),
        };
        seq.push(next);
        at = next;
        if seq.len() > step_cap {
            return Err(Error::Structural(
                "execution exceeded its step bound".into(),
            ));
        }
    }
    Ok(Trace(seq))
}

/// Uniform random input for a program with `input_len` entries over `{1..N}`.
pub fn random_input(rng: &mut impl Rng, input_len: usize, alphabet: u32) -> InputVec {
    InputVec((0..input_len).map(|_| rng.random_range(1..=alphabet)).collect())
}

/// Hamming distance between two equal-length inputs.
pub fn input_distance(a: &InputVec, b: &InputVec) -> Result<usize> {
    if a.0.len() != b.0.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} vs {}",
            a.0.len(),
            b.0.len()
        )));
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

/// Resamples one uniformly chosen coordinate to a different value, so the
/// result is at Hamming distance exactly one. Degenerate inputs (empty, or
/// alphabet smaller than two) are returned unchanged.
pub fn atomic_mutate(rng: &mut impl Rng, input: &InputVec, alphabet: u32) -> InputVec {
    let mut out = input.clone();
    if out.0.is_empty() || alphabet < 2 {
        return out;
    }
    let idx = rng.random_range(0..out.0.len());
    let cur = out.0[idx];
    let draw = rng.random_range(1..=alphabet - 1);
    out.0[idx] = if draw >= cur { draw + 1 } else { draw };
    out
}
