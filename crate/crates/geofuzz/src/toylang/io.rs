//! Program serialization and pretty printing.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cfg, Stmt, ToyProgram, VertexLabel, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct ProgramDoc {
    version: u32,
    #[serde(rename = "N")]
    alphabet: u32,
    #[serde(rename = "L")]
    input_len: usize,
    b_count: usize,
    statements: Vec<StmtDoc>,
    cfg: CfgDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StmtDoc {
    If {
        x: usize,
        #[serde(rename = "const")]
        constant: u32,
        then: Vec<StmtDoc>,
        #[serde(rename = "else")]
        els: Vec<StmtDoc>,
    },
    While {
        x: usize,
        b: usize,
        body: Vec<StmtDoc>,
    },
    Assign {
        b: usize,
    },
}

#[derive(Serialize, Deserialize)]
struct CfgDoc {
    vertices: Vec<VertexDoc>,
    edges: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    id: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    x: Option<usize>,
    #[serde(rename = "const", skip_serializing_if = "Option::is_none", default)]
    constant: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    inc_b: Option<usize>,
}

fn stmt_to_doc(s: &Stmt) -> StmtDoc {
    match s {
        Stmt::If {
            x_index,
            constant,
            then_branch,
            else_branch,
        } => StmtDoc::If {
            x: *x_index,
            constant: *constant,
            then: then_branch.iter().map(stmt_to_doc).collect(),
            els: else_branch.iter().map(stmt_to_doc).collect(),
        },
        Stmt::While {
            x_index,
            b_var,
            body,
        } => StmtDoc::While {
            x: *x_index,
            b: *b_var,
            body: body.iter().map(stmt_to_doc).collect(),
        },
        Stmt::Assign { b_var } => StmtDoc::Assign { b: *b_var },
    }
}

fn stmt_from_doc(d: StmtDoc) -> Stmt {
    match d {
        StmtDoc::If {
            x,
            constant,
            then,
            els,
        } => Stmt::If {
            x_index: x,
            constant,
            then_branch: then.into_iter().map(stmt_from_doc).collect(),
            else_branch: els.into_iter().map(stmt_from_doc).collect(),
        },
        StmtDoc::While { x, b, body } => Stmt::While {
            x_index: x,
            b_var: b,
            body: body.into_iter().map(stmt_from_doc).collect(),
        },
        StmtDoc::Assign { b } => Stmt::Assign { b_var: b },
    }
}

fn cfg_to_doc(cfg: &Cfg) -> CfgDoc {
    let vertices = (0..cfg.len() as u32)
        .map(|v| {
            let mut doc = VertexDoc {
                id: v,
                kind: cfg.label(v).kind_tag().to_string(),
                x: None,
                constant: None,
                b: None,
                inc_b: None,
            };
            match cfg.label(v) {
                VertexLabel::Branch { x_index, constant } => {
                    doc.x = Some(*x_index);
                    doc.constant = Some(*constant);
                }
                VertexLabel::Loop { x_index, b_var } => {
                    doc.x = Some(*x_index);
                    doc.b = Some(*b_var);
                }
                VertexLabel::Block { inc_b } => doc.inc_b = *inc_b,
                _ => {}
            }
            doc
        })
        .collect();
    CfgDoc {
        vertices,
        edges: cfg.edges(),
    }
}

/// Serializes a program to its JSON document.
pub fn program_to_json(program: &ToyProgram) -> Result<String> {
    let doc = ProgramDoc {
        version: FORMAT_VERSION,
        alphabet: program.alphabet,
        input_len: program.input_len,
        b_count: program.b_count,
        statements: program.statements.iter().map(stmt_to_doc).collect(),
        cfg: cfg_to_doc(&program.cfg),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses a program document, revalidating structure and indexing, and
/// requiring the stored graph to match the one lowered from the statements.
pub fn program_from_json(text: &str) -> Result<ToyProgram> {
    let doc: ProgramDoc = serde_json::from_str(text)?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported program format version {}",
            doc.version
        )));
    }
    let statements = doc.statements.into_iter().map(stmt_from_doc).collect();
    let program = ToyProgram::from_parts(statements, doc.alphabet)?;
    if doc.input_len != program.input_len || doc.b_count != program.b_count {
        return Err(Error::Format(format!(
            "declared L={} b_count={} but statements give L={} b_count={}",
            doc.input_len, doc.b_count, program.input_len, program.b_count
        )));
    }
    let rebuilt = cfg_to_doc(&program.cfg);
    if rebuilt.edges != doc.cfg.edges || rebuilt.vertices.len() != doc.cfg.vertices.len() {
        return Err(Error::Format(
            "stored cfg does not match the graph lowered from the statements".into(),
        ));
    }
    for (a, b) in rebuilt.vertices.iter().zip(&doc.cfg.vertices) {
        if a.id != b.id
            || a.kind != b.kind
            || a.x != b.x
            || a.constant != b.constant
            || a.b != b.b
            || a.inc_b != b.inc_b
        {
            return Err(Error::Format(format!(
                "stored cfg vertex {} does not match the lowered graph",
                b.id
            )));
        }
    }
    Ok(program)
}

/// Writes `program` to `path` as JSON.
pub fn save_program(program: &ToyProgram, path: &Path) -> Result<()> {
    let text = program_to_json(program)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a program document from `path`.
pub fn load_program(path: &Path) -> Result<ToyProgram> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    program_from_json(&text)
}

/// Human-readable source listing of a program.
pub fn listing(program: &ToyProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# N={} L={} b_count={} vertices={} edges={}",
        program.alphabet,
        program.input_len,
        program.b_count,
        program.cfg.len(),
        program.cfg.edge_count()
    );
    write_block(&mut out, &program.statements, 0, program.alphabet);
    out
}

fn write_block(out: &mut String, stmts: &[Stmt], indent: usize, alphabet: u32) {
    let pad = "  ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Assign { b_var } => {
                let _ = writeln!(out, "{pad}b{b_var} := (b{b_var} mod {alphabet}) + 1;");
            }
            Stmt::If {
                x_index,
                constant,
                then_branch,
                else_branch,
            } => {
                let _ = writeln!(out, "{pad}if (x[{x_index}] == {constant}) {{");
                write_block(out, then_branch, indent + 1, alphabet);
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, else_branch, indent + 1, alphabet);
                let _ = writeln!(out, "{pad}}}");
            }
            Stmt::While {
                x_index,
                b_var,
                body,
            } => {
                let _ = writeln!(out, "{pad}while (b{b_var} != x[{x_index}]) {{");
                let inner = "  ".repeat(indent + 1);
                let _ = writeln!(out, "{inner}b{b_var} := (b{b_var} mod {alphabet}) + 1;");
                write_block(out, body, indent + 1, alphabet);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}
