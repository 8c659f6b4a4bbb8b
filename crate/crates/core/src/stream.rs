//! Stream elements and the line-oriented text stream format.
//!
//! ```text
//! # comment
//! H <V> [W] [r]
//! I u v [w]        insert edge (optional weight)
//! D u v [w]        delete edge (weighted streams repeat the weight)
//! I u1 u2 ... us   insert hyperedge (when r is given)
//! ```

use std::fmt;
use std::io::BufRead;

use thiserror::Error as ThisError;

/// One graph stream element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeUpdate {
    pub u: u32,
    pub v: u32,
    pub delete: bool,
    pub weight: f64,
}

impl EdgeUpdate {
    pub fn insert(u: u32, v: u32) -> Self {
        Self {
            u,
            v,
            delete: false,
            weight: 1.0,
        }
    }

    pub fn delete(u: u32, v: u32) -> Self {
        Self {
            u,
            v,
            delete: true,
            weight: 1.0,
        }
    }

    pub fn weighted(u: u32, v: u32, weight: f64) -> Self {
        Self {
            u,
            v,
            delete: false,
            weight,
        }
    }

    /// The same element with the opposite sign.
    pub fn inverse(&self) -> Self {
        Self {
            delete: !self.delete,
            ..*self
        }
    }
}

/// One hypergraph stream element. Vertices are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperUpdate {
    pub vertices: Vec<u32>,
    pub delete: bool,
}

impl HyperUpdate {
    pub fn new(mut vertices: Vec<u32>, delete: bool) -> Self {
        vertices.sort_unstable();
        Self { vertices, delete }
    }
}

/// Stream file header `H V [W] [r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub num_vertices: u32,
    pub max_weight: Option<f64>,
    pub rank: Option<usize>,
}

/// Parsed stream body.
#[derive(Debug, Clone, PartialEq)]
pub enum Updates {
    Graph(Vec<EdgeUpdate>),
    Hyper(Vec<HyperUpdate>),
}

impl Updates {
    pub fn len(&self) -> usize {
        match self {
            Updates::Graph(u) => u.len(),
            Updates::Hyper(u) => u.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub header: StreamHeader,
    pub updates: Updates,
}

#[derive(Debug, ThisError)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

fn syntax(line: usize, msg: impl fmt::Display) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, ParseError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("invalid {what} `{tok}`")))
}

/// Parse a whole stream. Vertex ids are range-checked against the header;
/// stream legality (no double insert, no phantom delete) is not checked.
pub fn parse_stream<R: BufRead>(reader: R) -> Result<Stream, ParseError> {
    let mut header: Option<StreamHeader> = None;
    let mut graph = Vec::new();
    let mut hyper = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "H" => {
                if header.is_some() {
                    return Err(syntax(lineno, "duplicate header"));
                }
                if toks.len() < 2 || toks.len() > 4 {
                    return Err(syntax(lineno, "header must be `H V [W] [r]`"));
                }
                let num_vertices = parse_num(toks[1], lineno, "vertex count")?;
                let max_weight = match toks.get(2) {
                    Some(t) => {
                        let w: f64 = parse_num(t, lineno, "max weight")?;
                        if !(w >= 1.0 && w.is_finite()) {
                            return Err(syntax(lineno, "max weight must be at least 1"));
                        }
                        Some(w)
                    }
                    None => None,
                };
                let rank = match toks.get(3) {
                    Some(t) => {
                        let r: usize = parse_num(t, lineno, "rank")?;
                        if r < 2 {
                            return Err(syntax(lineno, "rank must be at least 2"));
                        }
                        Some(r)
                    }
                    None => None,
                };
                header = Some(StreamHeader {
                    num_vertices,
                    max_weight,
                    rank,
                });
            }
            "I" | "D" => {
                let h = header.ok_or(ParseError::MissingHeader)?;
                let delete = toks[0] == "D";
                let mut ids = Vec::with_capacity(toks.len() - 1);
                let args = &toks[1..];
                let (vertex_toks, weight_tok) = match h.rank {
                    Some(_) => (args, None),
                    None if args.len() == 3 => (&args[..2], Some(args[2])),
                    None => (args, None),
                };
                for t in vertex_toks {
                    let v: u32 = parse_num(t, lineno, "vertex id")?;
                    if v >= h.num_vertices {
                        return Err(syntax(
                            lineno,
                            format!("vertex {v} outside [0, {})", h.num_vertices),
                        ));
                    }
                    ids.push(v);
                }
                match h.rank {
                    Some(r) => {
                        if ids.len() < 2 || ids.len() > r {
                            return Err(syntax(
                                lineno,
                                format!("hyperedge of {} vertices, rank is {r}", ids.len()),
                            ));
                        }
                        let up = HyperUpdate::new(ids, delete);
                        if up.vertices.windows(2).any(|w| w[0] == w[1]) {
                            return Err(syntax(lineno, "repeated vertex in hyperedge"));
                        }
                        hyper.push(up);
                    }
                    None => {
                        if ids.len() != 2 {
                            return Err(syntax(lineno, "edge lines take `u v [w]`"));
                        }
                        if ids[0] == ids[1] {
                            return Err(syntax(lineno, "self-loop"));
                        }
                        let weight = match weight_tok {
                            Some(t) => {
                                let w: f64 = parse_num(t, lineno, "weight")?;
                                if !w.is_finite() || w <= 0.0 {
                                    return Err(syntax(lineno, "weight must be positive"));
                                }
                                w
                            }
                            None => 1.0,
                        };
                        graph.push(EdgeUpdate {
                            u: ids[0],
                            v: ids[1],
                            delete,
                            weight,
                        });
                    }
                }
            }
            other => return Err(syntax(lineno, format!("unknown record type `{other}`"))),
        }
    }
    let header = header.ok_or(ParseError::MissingHeader)?;
    let updates = if header.rank.is_some() {
        Updates::Hyper(hyper)
    } else {
        Updates::Graph(graph)
    };
    Ok(Stream { header, updates })
}

/// Render a graph stream in the text format.
pub fn write_graph_stream<W: std::io::Write>(
    mut out: W,
    num_vertices: u32,
    max_weight: Option<f64>,
    updates: &[EdgeUpdate],
) -> std::io::Result<()> {
    match max_weight {
        Some(w) => writeln!(out, "H {num_vertices} {w}")?,
        None => writeln!(out, "H {num_vertices}")?,
    }
    for u in updates {
        let tag = if u.delete { "D" } else { "I" };
        if max_weight.is_some() {
            writeln!(out, "{tag} {} {} {}", u.u, u.v, u.weight)?;
        } else {
            writeln!(out, "{tag} {} {}", u.u, u.v)?;
        }
    }
    Ok(())
}

/// Render a hypergraph stream in the text format.
pub fn write_hyper_stream<W: std::io::Write>(
    mut out: W,
    num_vertices: u32,
    rank: usize,
    updates: &[HyperUpdate],
) -> std::io::Result<()> {
    writeln!(out, "H {num_vertices} 1 {rank}")?;
    for u in updates {
        let tag = if u.delete { "D" } else { "I" };
        let ids: Vec<String> = u.vertices.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{tag} {}", ids.join(" "))?;
    }
    Ok(())
}
