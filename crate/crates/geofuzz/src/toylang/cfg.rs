//! Control-flow graphs lowered from statement trees.
//!
//! Vertex 0 is the entry and the highest id is the exit. A structural edge
//! from exit back to entry makes the graph strongly connected; it is never
//! traversed by an execution and is excluded from coverage accounting.

use super::Stmt;
use crate::error::{Error, Result};

/// Semantic label of one CFG vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexLabel {
    Entry,
    Exit,
    /// Two-way branch on `x[x_index] == constant`; successor 0 is taken on true.
    Branch { x_index: usize, constant: u32 },
    /// Loop header on `b_var != x[x_index]`; successor 0 enters the body.
    Loop { x_index: usize, b_var: usize },
    /// Straight-line vertex, incrementing a counter when `inc_b` is set.
    Block { inc_b: Option<usize> },
    /// Merge point of an `if`.
    Join,
}

impl VertexLabel {
    /// Short lowercase tag used in serialized documents.
    pub fn kind_tag(&self) -> &'static str {
        match self {
            VertexLabel::Entry => "entry",
            VertexLabel::Exit => "exit",
            VertexLabel::Branch { .. } => "branch",
            VertexLabel::Loop { .. } => "loop",
            VertexLabel::Block { .. } => "block",
            VertexLabel::Join => "join",
        }
    }
}

/// A lowered control-flow graph with ordered successor lists.
///
/// Successor order is semantic: for branches and loop headers the first
/// successor is the guard-true side. Depth-first traversals follow this
/// order, which is what fixes the numbering of predicate input indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    labels: Vec<VertexLabel>,
    succs: Vec<Vec<u32>>,
    /// Predicate vertices in lowering (source preorder) order.
    pred_creation_order: Vec<u32>,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entry(&self) -> u32 {
        0
    }

    pub fn exit(&self) -> u32 {
        self.labels.len() as u32 - 1
    }

    pub fn label(&self, v: u32) -> &VertexLabel {
        &self.labels[v as usize]
    }

    pub fn successors(&self, v: u32) -> &[u32] {
        &self.succs[v as usize]
    }

    /// All edges in (source, successor-order) order, including exit to entry.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (u, ss) in self.succs.iter().enumerate() {
            for &v in ss {
                out.push((u as u32, v));
            }
        }
        out
    }

    /// Number of edges, including the structural exit-to-entry edge.
    pub fn edge_count(&self) -> usize {
        self.succs.iter().map(Vec::len).sum()
    }

    /// 0/1 adjacency matrix over vertices.
    pub fn adjacency_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut a = nalgebra::DMatrix::zeros(n, n);
        for (u, v) in self.edges() {
            a[(u as usize, v as usize)] = 1.0;
        }
        a
    }

    /// Vertices in depth-first discovery order from the entry, following
    /// successor order.
    pub fn dfs_order(&self) -> Vec<u32> {
        let n = self.len();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<(u32, usize)> = vec![(self.entry(), 0)];
        visited[self.entry() as usize] = true;
        order.push(self.entry());
        while let Some((v, i)) = stack.last_mut() {
            let ss = &self.succs[*v as usize];
            if *i < ss.len() {
                let w = ss[*i];
                *i += 1;
                if !visited[w as usize] {
                    visited[w as usize] = true;
                    order.push(w);
                    stack.push((w, 0));
                }
            } else {
                stack.pop();
            }
        }
        order
    }

    /// Predicate (branch and loop) vertices in depth-first discovery order.
    pub fn pred_vertices_in_dfs_order(&self) -> Vec<u32> {
        self.dfs_order()
            .into_iter()
            .filter(|&v| {
                matches!(
                    self.labels[v as usize],
                    VertexLabel::Branch { .. } | VertexLabel::Loop { .. }
                )
            })
            .collect()
    }

    pub(super) fn pred_vertices_in_creation_order(&self) -> Vec<u32> {
        self.pred_creation_order.clone()
    }

    pub(super) fn apply_x_indices(&mut self, x_of_vertex: &[usize]) {
        for (v, label) in self.labels.iter_mut().enumerate() {
            match label {
                VertexLabel::Branch { x_index, .. } | VertexLabel::Loop { x_index, .. } => {
                    *x_index = x_of_vertex[v];
                }
                _ => {}
            }
        }
    }

    /// Checks entry/exit placement, successor arities, and strong
    /// connectivity through the exit-to-entry edge.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Err(Error::Structural(
                "graph needs at least entry and exit".into(),
            ));
        }
        if self.labels[0] != VertexLabel::Entry {
            return Err(Error::Structural("vertex 0 must be the entry".into()));
        }
        if self.labels[n - 1] != VertexLabel::Exit {
            return Err(Error::Structural("last vertex must be the exit".into()));
        }
        for v in 0..n {
            let arity = self.succs[v].len();
            let want = match self.labels[v] {
                VertexLabel::Branch { .. } | VertexLabel::Loop { .. } => 2,
                _ => 1,
            };
            if arity != want {
                return Err(Error::Structural(format!(
                    "vertex {v} has {arity} successors, expected {want}"
                )));
            }
            for &w in &self.succs[v] {
                if w as usize >= n {
                    return Err(Error::Structural(format!(
                        "edge ({v}, {w}) points outside the graph"
                    )));
                }
            }
        }
        if self.succs[n - 1] != [0] {
            return Err(Error::Structural(
                "exit must have exactly the structural edge back to entry".into(),
            ));
        }
        if self.dfs_order().len() != n {
            return Err(Error::Structural(
                "not all vertices are reachable from the entry".into(),
            ));
        }
        Ok(())
    }

    /// Checks that `trace` is a path from entry to exit along edges.
    pub fn validate_trace(&self, trace: &super::Trace) -> Result<()> {
        let seq = &trace.0;
        if seq.first() != Some(&self.entry()) || seq.last() != Some(&self.exit()) {
            return Err(Error::Structural(
                "trace must start at the entry and end at the exit".into(),
            ));
        }
        for w in seq.windows(2) {
            if !self.succs[w[0] as usize].contains(&w[1]) {
                return Err(Error::Structural(format!(
                    "trace step ({}, {}) is not a CFG edge",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Lowers a finalized statement tree to its CFG.
pub(super) fn lower(statements: &[Stmt]) -> Cfg {
    let mut b = Builder::default();
    let entry = b.add(VertexLabel::Entry);
    let last = b.lower_seq(entry, statements);
    let exit = b.add(VertexLabel::Exit);
    b.edge(last, exit);
    b.edge(exit, entry); // structural edge, closes the walk
    Cfg {
        labels: b.labels,
        succs: b.succs,
        pred_creation_order: b.pred_creation_order,
    }
}

#[derive(Default)]
struct Builder {
    labels: Vec<VertexLabel>,
    succs: Vec<Vec<u32>>,
    pred_creation_order: Vec<u32>,
}

impl Builder {
    fn add(&mut self, label: VertexLabel) -> u32 {
        let id = self.labels.len() as u32;
        if matches!(
            label,
            VertexLabel::Branch { .. } | VertexLabel::Loop { .. }
        ) {
            self.pred_creation_order.push(id);
        }
        self.labels.push(label);
        self.succs.push(Vec::new());
        id
    }

    fn edge(&mut self, u: u32, v: u32) {
        self.succs[u as usize].push(v);
    }

    fn lower_seq(&mut self, from: u32, stmts: &[Stmt]) -> u32 {
        let mut cur = from;
        for s in stmts {
            cur = self.lower_stmt(cur, s);
        }
        cur
    }

    /// Attaches `stmt` after `from` and returns the vertex the next statement
    /// hangs off. For loops that is the header itself: its second successor is
    /// the loop exit.
    fn lower_stmt(&mut self, from: u32, stmt: &Stmt) -> u32 {
        match stmt {
            Stmt::Assign { b_var } => {
                let v = self.add(VertexLabel::Block {
                    inc_b: Some(*b_var),
                });
                self.edge(from, v);
                v
            }
            Stmt::If {
                x_index,
                constant,
                then_branch,
                else_branch,
            } => {
                let br = self.add(VertexLabel::Branch {
                    x_index: *x_index,
                    constant: *constant,
                });
                self.edge(from, br);
                // true side first so successor order encodes the outcome
                let t_end = self.lower_branch(br, then_branch);
                let f_end = self.lower_branch(br, else_branch);
                let join = self.add(VertexLabel::Join);
                self.edge(t_end, join);
                self.edge(f_end, join);
                join
            }
            Stmt::While {
                x_index,
                b_var,
                body,
            } => {
                let head = self.add(VertexLabel::Loop {
                    x_index: *x_index,
                    b_var: *b_var,
                });
                self.edge(from, head);
                // the guard counter is bumped first in every iteration
                let inc = self.add(VertexLabel::Block {
                    inc_b: Some(*b_var),
                });
                self.edge(head, inc);
                let body_end = self.lower_seq(inc, body);
                self.edge(body_end, head);
                head
            }
        }
    }

    /// Empty branches still get a vertex so both branch edges exist.
    fn lower_branch(&mut self, br: u32, stmts: &[Stmt]) -> u32 {
        if stmts.is_empty() {
            let v = self.add(VertexLabel::Block { inc_b: None });
            self.edge(br, v);
            v
        } else {
            self.lower_seq(br, stmts)
        }
    }
}
