//! Toy structured programs used as fuzz targets.
//!
//! A program is a nest of `if`/`while`/assignment statements over a small
//! alphabet `{1..N}`. Every predicate reads its own dedicated input entry, so
//! each branch outcome can be forced independently and every vertex and edge
//! of the control-flow graph is reachable by construction. Loop guards compare
//! a dedicated counter variable against an input entry and the counter is
//! cyclically incremented once per iteration, which bounds every loop at
//! `N - 1` total iterations per execution.

mod cfg;
mod generate;
mod interp;
mod io;

pub use cfg::{Cfg, VertexLabel};
pub use generate::{generate_program, GenParams};
pub use interp::{atomic_mutate, input_distance, random_input};
pub use io::{listing, load_program, program_from_json, program_to_json, save_program};

use crate::error::{Error, Result};

/// Serialization schema version for program and corpus documents.
pub const FORMAT_VERSION: u32 = 1;

/// One statement of the toy language.
///
/// `x_index` is 1-based into the input vector; `b_var` is 0-based into the
/// counter-variable pool. Both are assigned when a raw statement tree is
/// finalized into a [`ToyProgram`], so the constructors leave placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `if (x[i] == c) { .. } else { .. }`
    If {
        x_index: usize,
        constant: u32,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    /// `while (b_k != x[i]) { b_k := inc(b_k); .. }`
    While {
        x_index: usize,
        b_var: usize,
        body: Vec<Stmt>,
    },
    /// `b_k := (b_k mod N) + 1`
    Assign { b_var: usize },
}

impl Stmt {
    /// An assignment statement; its counter variable is allocated at finalize.
    pub fn assign() -> Stmt {
        Stmt::Assign { b_var: usize::MAX }
    }

    /// An `if` statement testing an input entry against `constant`.
    pub fn if_eq(constant: u32, then_branch: Vec<Stmt>, else_branch: Vec<Stmt>) -> Stmt {
        Stmt::If {
            x_index: 0,
            constant,
            then_branch,
            else_branch,
        }
    }

    /// A `while` loop; guard variable and input index are set at finalize.
    pub fn while_neq(body: Vec<Stmt>) -> Stmt {
        Stmt::While {
            x_index: 0,
            b_var: usize::MAX,
            body,
        }
    }
}

/// An input vector with entries in `{1..N}`, one entry per predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct InputVec(pub Vec<u32>);

/// An executed path: the sequence of CFG vertex ids from entry to exit.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Trace(pub Vec<u32>);

impl Trace {
    /// Sorted, deduplicated vertex set of the path.
    pub fn vertex_set(&self) -> Vec<u32> {
        let mut s = self.0.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// A finalized program: statement tree plus its lowered control-flow graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyProgram {
    /// Alphabet size `N`; inputs and counters range over `{1..N}`.
    pub alphabet: u32,
    /// Number of predicates, which equals the input-vector length `L`.
    pub input_len: usize,
    /// Number of counter variables (one per `while` and per assignment).
    pub b_count: usize,
    pub statements: Vec<Stmt>,
    pub cfg: Cfg,
}

impl ToyProgram {
    /// Finalizes a raw statement tree: allocates counter variables, lowers to
    /// a CFG, and numbers the predicates' input indices in depth-first
    /// discovery order of the CFG (true branch first).
    pub fn from_statements(mut statements: Vec<Stmt>, alphabet: u32) -> Result<ToyProgram> {
        if alphabet < 2 {
            return Err(Error::Parameter(format!(
                "alphabet must be at least 2, got {alphabet}"
            )));
        }
        for s in &statements {
            validate_constants(s, alphabet)?;
        }
        let mut b_count = 0usize;
        visit_stmts_mut(&mut statements, &mut |s| {
            if let Stmt::While { b_var, .. } | Stmt::Assign { b_var } = s {
                *b_var = b_count;
                b_count += 1;
            }
        });
        let mut cfg = cfg::lower(&statements);
        let pred_vertices = cfg.pred_vertices_in_creation_order();
        let order = cfg.pred_vertices_in_dfs_order();
        // x index of each predicate vertex, 1-based in DFS discovery order
        let mut x_of_vertex = vec![0usize; cfg.len()];
        for (i, &v) in order.iter().enumerate() {
            x_of_vertex[v as usize] = i + 1;
        }
        let mut k = 0usize;
        visit_stmts_mut(&mut statements, &mut |s| match s {
            Stmt::If { x_index, .. } | Stmt::While { x_index, .. } => {
                *x_index = x_of_vertex[pred_vertices[k] as usize];
                k += 1;
            }
            Stmt::Assign { .. } => {}
        });
        cfg.apply_x_indices(&x_of_vertex);
        let input_len = order.len();
        let program = ToyProgram {
            alphabet,
            input_len,
            b_count,
            statements,
            cfg,
        };
        program.validate()?;
        Ok(program)
    }

    /// Rebuilds a program from already-finalized parts (as read from disk),
    /// checking that indices and structure are consistent.
    pub fn from_parts(statements: Vec<Stmt>, alphabet: u32) -> Result<ToyProgram> {
        if alphabet < 2 {
            return Err(Error::Format(format!(
                "alphabet must be at least 2, got {alphabet}"
            )));
        }
        for s in &statements {
            validate_constants(s, alphabet)?;
        }
        let cfg = cfg::lower(&statements);
        let order = cfg.pred_vertices_in_dfs_order();
        for (i, &v) in order.iter().enumerate() {
            let want = i + 1;
            let got = match cfg.label(v) {
                VertexLabel::Branch { x_index, .. } | VertexLabel::Loop { x_index, .. } => *x_index,
                _ => unreachable!("predicate order lists only branch and loop vertices"),
            };
            if got != want {
                return Err(Error::Format(format!(
                    "input indices must follow control-flow discovery order: \
                     vertex {v} has x[{got}], expected x[{want}]"
                )));
            }
        }
        let mut b_vars = Vec::new();
        let mut stmts = statements;
        visit_stmts_mut(&mut stmts, &mut |s| {
            if let Stmt::While { b_var, .. } | Stmt::Assign { b_var } = s {
                b_vars.push(*b_var);
            }
        });
        let b_count = b_vars.len();
        let mut sorted = b_vars.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &b)| b != i) {
            return Err(Error::Format(
                "counter variables must be exactly 0..count, each owned once".into(),
            ));
        }
        let program = ToyProgram {
            alphabet,
            input_len: order.len(),
            b_count,
            statements: stmts,
            cfg,
        };
        program.validate()?;
        Ok(program)
    }

    /// Runs the program on `input` and returns the executed path.
    pub fn execute(&self, input: &InputVec) -> Result<Trace> {
        interp::execute(self, input)
    }

    /// Predicate table: for each input index `1..=L` (in order), the kind of
    /// test that consumes it and the constant or counter it compares against.
    pub fn predicate_table(&self) -> Vec<PredEntry> {
        let mut table = vec![
            PredEntry {
                x_index: 0,
                test: PredTest::EqConst(0)
            };
            self.input_len
        ];
        for v in 0..self.cfg.len() as u32 {
            match self.cfg.label(v) {
                VertexLabel::Branch { x_index, constant } => {
                    table[x_index - 1] = PredEntry {
                        x_index: *x_index,
                        test: PredTest::EqConst(*constant),
                    };
                }
                VertexLabel::Loop { x_index, b_var } => {
                    table[x_index - 1] = PredEntry {
                        x_index: *x_index,
                        test: PredTest::NeqCounter(*b_var),
                    };
                }
                _ => {}
            }
        }
        table
    }

    fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        let mut seen = vec![false; self.input_len];
        for v in 0..self.cfg.len() as u32 {
            if let VertexLabel::Branch { x_index, .. } | VertexLabel::Loop { x_index, .. } =
                self.cfg.label(v)
            {
                if *x_index < 1 || *x_index > self.input_len || seen[*x_index - 1] {
                    return Err(Error::Structural(format!(
                        "predicate input index x[{x_index}] is out of range or reused"
                    )));
                }
                seen[*x_index - 1] = true;
            }
        }
        Ok(())
    }
}

/// One predicate-table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredEntry {
    pub x_index: usize,
    pub test: PredTest,
}

/// What an input entry is compared against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredTest {
    /// `x[i] == c`
    EqConst(u32),
    /// `b_k != x[i]`
    NeqCounter(usize),
}

fn validate_constants(s: &Stmt, alphabet: u32) -> Result<()> {
    match s {
        Stmt::If {
            constant,
            then_branch,
            else_branch,
            ..
        } => {
            if *constant < 1 || *constant > alphabet {
                return Err(Error::Structural(format!(
                    "branch constant {constant} outside 1..={alphabet}"
                )));
            }
            for t in then_branch.iter().chain(else_branch) {
                validate_constants(t, alphabet)?;
            }
        }
        Stmt::While { body, .. } => {
            for t in body {
                validate_constants(t, alphabet)?;
            }
        }
        Stmt::Assign { .. } => {}
    }
    Ok(())
}

/// Source-preorder mutable walk over a statement tree.
fn visit_stmts_mut(stmts: &mut [Stmt], f: &mut impl FnMut(&mut Stmt)) {
    for s in stmts {
        f(s);
        match s {
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                visit_stmts_mut(then_branch, f);
                visit_stmts_mut(else_branch, f);
            }
            Stmt::While { body, .. } => visit_stmts_mut(body, f),
            Stmt::Assign { .. } => {}
        }
    }
}
