//! Plain-text instance files.
//!
//! Graphs are line-based UTF-8: a header `graph <node_count> <edge_count>`
//! followed by one line per edge, `<tail> <head> <cost>`, with 0-based
//! node indices. Mass vectors use one line per node, `<node> <value>`;
//! nodes left out carry zero mass. Flows mirror the graph shape with a
//! `flow <edge_count>` header and `<edge> <value>` lines.
//!
//! Blank lines and lines starting with `#` are skipped everywhere.
//! Numbers are written in shortest round-trip form, so writing and
//! re-reading a file reproduces every value bit-exactly. Parsing applies
//! the same validation as in-memory construction: graphs must be
//! connected and nonnegatively priced, mass must balance.

use crate::graph::{FlowVector, Graph, GraphError, MassVector};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Content lines with their 1-based positions; blanks and comments drop out.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .zip(1..)
        .map(|(l, i)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_number<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, ParseError> {
    token
        .parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from {token:?}")))
}

fn parse_header(line: usize, text: &str, keyword: &str) -> Result<Vec<usize>, ParseError> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some(keyword) {
        return Err(syntax(line, format!("expected header starting with {keyword:?}")));
    }
    tokens
        .map(|t| parse_number(line, t, "a count"))
        .collect()
}

pub fn parse_graph(text: &str) -> Result<Graph, ParseError> {
    let mut lines = content_lines(text);
    let (header_line, header) = lines.next().ok_or_else(|| syntax(0, "empty graph file"))?;
    let counts = parse_header(header_line, header, "graph")?;
    let [nodes, edge_count] = counts[..] else {
        return Err(syntax(header_line, "graph header needs exactly two counts"));
    };

    let mut edges = Vec::with_capacity(edge_count);
    let mut costs = Vec::with_capacity(edge_count);
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let [tail, head, cost] = tokens[..] else {
            return Err(syntax(line, "edge lines are <tail> <head> <cost>"));
        };
        edges.push((
            parse_number(line, tail, "a node index")?,
            parse_number(line, head, "a node index")?,
        ));
        costs.push(parse_number(line, cost, "a cost")?);
    }
    if edges.len() != edge_count {
        return Err(syntax(
            0,
            format!("header promises {edge_count} edges, file has {}", edges.len()),
        ));
    }
    Ok(Graph::new(nodes, edges, costs)?)
}

/// Parses a mass vector for a graph with `nodes` nodes. Unlisted nodes get
/// zero mass; listing a node twice is an error.
pub fn parse_mass(text: &str, nodes: usize) -> Result<MassVector, ParseError> {
    let mut values = vec![0.0; nodes];
    let mut seen = vec![false; nodes];
    for (line, body) in content_lines(text) {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let [node, value] = tokens[..] else {
            return Err(syntax(line, "mass lines are <node> <value>"));
        };
        let node: usize = parse_number(line, node, "a node index")?;
        if node >= nodes {
            return Err(syntax(line, format!("node {node} out of range for {nodes} nodes")));
        }
        if seen[node] {
            return Err(syntax(line, format!("node {node} listed twice")));
        }
        seen[node] = true;
        values[node] = parse_number(line, value, "a mass value")?;
    }
    Ok(MassVector::new(values)?)
}

/// Parses a flow for a graph with `edges` edges. Unlisted edges carry zero
/// flow.
pub fn parse_flow(text: &str, edges: usize) -> Result<FlowVector, ParseError> {
    let mut lines = content_lines(text);
    let (header_line, header) = lines.next().ok_or_else(|| syntax(0, "empty flow file"))?;
    let counts = parse_header(header_line, header, "flow")?;
    let [edge_count] = counts[..] else {
        return Err(syntax(header_line, "flow header needs exactly one count"));
    };
    if edge_count != edges {
        return Err(syntax(
            header_line,
            format!("flow is for {edge_count} edges, graph has {edges}"),
        ));
    }

    let mut values = vec![0.0; edges];
    let mut seen = vec![false; edges];
    for (line, body) in lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let [edge, value] = tokens[..] else {
            return Err(syntax(line, "flow lines are <edge> <value>"));
        };
        let edge: usize = parse_number(line, edge, "an edge index")?;
        if edge >= edges {
            return Err(syntax(line, format!("edge {edge} out of range for {edges} edges")));
        }
        if seen[edge] {
            return Err(syntax(line, format!("edge {edge} listed twice")));
        }
        seen[edge] = true;
        let v: f64 = parse_number(line, value, "a flow value")?;
        if !v.is_finite() {
            return Err(syntax(line, format!("flow value {v} is not finite")));
        }
        values[edge] = v;
    }
    Ok(FlowVector(values))
}

pub fn format_graph(graph: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph {} {}", graph.node_count(), graph.edge_count());
    for e in 0..graph.edge_count() {
        let _ = writeln!(out, "{} {} {}", graph.tail(e), graph.head(e), graph.cost(e));
    }
    out
}

pub fn format_mass(mass: &MassVector) -> String {
    let mut out = String::new();
    for (node, value) in mass.values().iter().enumerate() {
        let _ = writeln!(out, "{node} {value}");
    }
    out
}

pub fn format_flow(flow: &FlowVector) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "flow {}", flow.len());
    for (edge, value) in flow.values().iter().enumerate() {
        let _ = writeln!(out, "{edge} {value}");
    }
    out
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph, ParseError> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn read_mass(path: impl AsRef<Path>, nodes: usize) -> Result<MassVector, ParseError> {
    parse_mass(&std::fs::read_to_string(path)?, nodes)
}

pub fn read_flow(path: impl AsRef<Path>, edges: usize) -> Result<FlowVector, ParseError> {
    parse_flow(&std::fs::read_to_string(path)?, edges)
}

pub fn write_graph(path: impl AsRef<Path>, graph: &Graph) -> Result<(), ParseError> {
    Ok(std::fs::write(path, format_graph(graph))?)
}

pub fn write_mass(path: impl AsRef<Path>, mass: &MassVector) -> Result<(), ParseError> {
    Ok(std::fs::write(path, format_mass(mass))?)
}

pub fn write_flow(path: impl AsRef<Path>, flow: &FlowVector) -> Result<(), ParseError> {
    Ok(std::fs::write(path, format_flow(flow))?)
}
