//! Stochastic program generation.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_chacha::rand_core::SeedableRng;

use super::{Stmt, ToyProgram};
use crate::error::{Error, Result};

/// Probability that a statement block keeps growing after each statement.
const BLOCK_CONTINUE: f64 = 0.5;

/// Knobs for the statement grammar.
///
/// Statement kinds are drawn with the three probabilities (which must sum to
/// one); expansion truncates to assignments once `max_statements` or
/// `max_depth` is reached. The defaults produce control-flow graphs of a few
/// dozen vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Alphabet size `N` for inputs and counters.
    pub alphabet: u32,
    /// Total statement budget across the whole program.
    pub max_statements: usize,
    /// Maximum statement nesting depth.
    pub max_depth: usize,
    pub prob_if: f64,
    pub prob_while: f64,
    pub prob_assign: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            alphabet: 8,
            max_statements: 20,
            max_depth: 4,
            prob_if: 0.4,
            prob_while: 0.2,
            prob_assign: 0.4,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.alphabet < 2 {
            return Err(Error::Parameter(format!(
                "alphabet must be at least 2, got {}",
                self.alphabet
            )));
        }
        if self.max_statements < 1 {
            return Err(Error::Parameter("max_statements must be positive".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Parameter("max_depth must be positive".into()));
        }
        let probs = [self.prob_if, self.prob_while, self.prob_assign];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Parameter(
                "statement probabilities must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "statement probabilities must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Draws a program from the grammar. Equal parameters give equal programs.
///
/// The top-level block drains the whole statement budget, so
/// `max_statements` directly controls program size.
pub fn generate_program(params: &GenParams) -> Result<ToyProgram> {
    params.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut budget = params.max_statements;
    let mut statements = Vec::new();
    while budget > 0 {
        statements.push(gen_stmt(&mut rng, params, &mut budget, 0));
    }
    ToyProgram::from_statements(statements, params.alphabet)
}

fn gen_block(
    rng: &mut ChaCha20Rng,
    params: &GenParams,
    budget: &mut usize,
    depth: usize,
) -> Vec<Stmt> {
    let mut out = Vec::new();
    while *budget > 0 && rng.random::<f64>() < BLOCK_CONTINUE {
        out.push(gen_stmt(rng, params, budget, depth));
    }
    out
}

fn gen_stmt(
    rng: &mut ChaCha20Rng,
    params: &GenParams,
    budget: &mut usize,
    depth: usize,
) -> Stmt {
    *budget -= 1;
    if depth + 1 >= params.max_depth {
        return Stmt::assign();
    }
    let u: f64 = rng.random();
    if u < params.prob_if {
        let constant = rng.random_range(1..=params.alphabet);
        let then_branch = gen_block(rng, params, budget, depth + 1);
        let else_branch = gen_block(rng, params, budget, depth + 1);
        Stmt::if_eq(constant, then_branch, else_branch)
    } else if u < params.prob_if + params.prob_while {
        let body = gen_block(rng, params, budget, depth + 1);
        Stmt::while_neq(body)
    } else {
        Stmt::assign()
    }
}
