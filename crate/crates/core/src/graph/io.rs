//! Graph file formats.
//!
//! Edge list: one `u v [w]` per line, `#` starts a comment, and an optional
//! `p nodes <n>` header fixes the node count (otherwise it is `max id + 1`).
//!
//! METIS: header `n m [fmt [ncon]]` followed by one line per node listing its
//! 1-based neighbors (interleaved with weights when `fmt` ends in `1`).
//! Lines starting with `%` are comments.
//!
//! Featured graph (JSON):
//!
//! ```json
//! {
//!   "nodes": [ { "id": "conv1", "op_type": "Conv2D" }, ... ],
//!   "edges": [ { "u": "conv1", "v": "relu1" }, { "u": 0, "v": 1, "weight": 2.0 } ]
//! }
//! ```
//!
//! Node ids may be strings or integers; nodes are numbered in list order.
//! Edges are undirected and repeated edges collapse to one.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::features::{one_hot_features, UnknownOpPolicy, Vocabulary};
use super::Graph;
use crate::error::{GapError, Result};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GapError::io(path, e))
}

/// Writes `bytes` to a sibling temporary file, syncs it, then renames it over
/// `path`, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| GapError::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| GapError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| GapError::io(&tmp, e))?;
    f.sync_all().map_err(|e| GapError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| GapError::io(path, e))
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> GapError {
    GapError::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    EdgeList,
    Metis,
    Featured,
}

impl GraphFormat {
    /// `.metis`/`.graph` → METIS, `.json` → featured, anything else → edge
    /// list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("metis") | Some("graph") => GraphFormat::Metis,
            Some("json") => GraphFormat::Featured,
            _ => GraphFormat::EdgeList,
        }
    }
}

/// Loads a graph choosing the parser from the file extension. Featured
/// graphs use their own vocabulary.
pub fn load_graph(path: &Path) -> Result<Graph> {
    match GraphFormat::from_path(path) {
        GraphFormat::EdgeList => load_edge_list(path, true),
        GraphFormat::Metis => load_metis(path),
        GraphFormat::Featured => load_featured_graph(path, None, UnknownOpPolicy::Error),
    }
}

pub fn load_edge_list(path: &Path, weighted: bool) -> Result<Graph> {
    parse_edge_list(&read_text(path)?, weighted, &path.display().to_string())
}

pub fn parse_edge_list(text: &str, weighted: bool, source: &str) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "p" {
            if tokens.len() != 3 || tokens[1] != "nodes" {
                return Err(parse_err(source, lineno, "header must read `p nodes <n>`"));
            }
            if declared.is_some() || !edges.is_empty() {
                return Err(parse_err(source, lineno, "header must precede all edges"));
            }
            declared = Some(
                tokens[2]
                    .parse()
                    .map_err(|_| parse_err(source, lineno, "bad node count"))?,
            );
            continue;
        }
        if tokens.len() < 2 || tokens.len() > 3 {
            return Err(parse_err(source, lineno, "expected `u v [w]`"));
        }
        let u: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(source, lineno, format!("bad node id `{}`", tokens[0])))?;
        let v: usize = tokens[1]
            .parse()
            .map_err(|_| parse_err(source, lineno, format!("bad node id `{}`", tokens[1])))?;
        let w = match (weighted, tokens.get(2)) {
            (true, Some(t)) => {
                let w: f64 = t
                    .parse()
                    .map_err(|_| parse_err(source, lineno, format!("bad weight `{t}`")))?;
                if w < 0.0 {
                    return Err(parse_err(source, lineno, format!("negative weight {w}")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(parse_err(source, lineno, format!("weight must be positive, got {w}")));
                }
                w
            }
            _ => 1.0,
        };
        if u == v {
            return Err(parse_err(source, lineno, format!("self-loop on node {u} rejected")));
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(parse_err(
                    source,
                    lineno,
                    format!("node id out of range for {n} declared nodes"),
                ));
            }
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v, w));
    }
    let n = declared.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
    Graph::from_edges_dedup(n, edges)
}

pub fn write_edge_list(g: &Graph, path: &Path) -> Result<()> {
    atomic_write(path, edge_list_string(g).as_bytes())
}

pub(crate) fn edge_list_string(g: &Graph) -> String {
    let weighted = g.is_weighted();
    let mut s = format!("p nodes {}\n", g.num_nodes());
    for e in g.edges() {
        if weighted {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.w);
        } else {
            let _ = writeln!(s, "{} {}", e.u, e.v);
        }
    }
    s
}

pub fn load_metis(path: &Path) -> Result<Graph> {
    parse_metis(&read_text(path)?, &path.display().to_string())
}

pub fn parse_metis(text: &str, source: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('%'));
    let (hline, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_err(source, 1, "missing header"))?;
    let hline = hline + 1;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 2 || h.len() > 4 {
        return Err(parse_err(source, hline, "header must be `n m [fmt [ncon]]`"));
    }
    let n: usize = h[0].parse().map_err(|_| parse_err(source, hline, "bad node count"))?;
    let m: usize = h[1].parse().map_err(|_| parse_err(source, hline, "bad edge count"))?;
    let fmt = h.get(2).copied().unwrap_or("0");
    if fmt.len() > 3 || !fmt.chars().all(|c| c == '0' || c == '1') {
        return Err(parse_err(source, hline, format!("unsupported fmt `{fmt}`")));
    }
    let fmt = format!("{fmt:0>3}");
    let has_vsize = fmt.as_bytes()[0] == b'1';
    let has_vwgt = fmt.as_bytes()[1] == b'1';
    let has_ewgt = fmt.as_bytes()[2] == b'1';
    let ncon: usize = match h.get(3) {
        Some(t) => t.parse().map_err(|_| parse_err(source, hline, "bad ncon"))?,
        None => usize::from(has_vwgt),
    };
    let skip = usize::from(has_vsize) + if has_vwgt { ncon } else { 0 };

    let mut directed: HashMap<(usize, usize), f64> = HashMap::new();
    let mut node = 0usize;
    for (i, raw) in lines {
        let lineno = i + 1;
        if node >= n {
            if raw.trim().is_empty() {
                continue;
            }
            return Err(parse_err(source, lineno, format!("more than {n} adjacency lines")));
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.len() < skip {
            return Err(parse_err(source, lineno, "missing vertex weights"));
        }
        let rest = &tokens[skip..];
        let step = if has_ewgt { 2 } else { 1 };
        if rest.len() % step != 0 {
            return Err(parse_err(source, lineno, "neighbor without edge weight"));
        }
        for chunk in rest.chunks(step) {
            let nb: usize = chunk[0]
                .parse()
                .map_err(|_| parse_err(source, lineno, format!("bad neighbor `{}`", chunk[0])))?;
            if nb == 0 || nb > n {
                return Err(parse_err(source, lineno, format!("neighbor {nb} outside 1..={n}")));
            }
            let w: f64 = if has_ewgt {
                chunk[1]
                    .parse()
                    .map_err(|_| parse_err(source, lineno, format!("bad weight `{}`", chunk[1])))?
            } else {
                1.0
            };
            if nb - 1 == node {
                return Err(parse_err(source, lineno, format!("self-loop on node {nb} rejected")));
            }
            if directed.insert((node, nb - 1), w).is_some() {
                return Err(parse_err(source, lineno, format!("neighbor {nb} listed twice")));
            }
        }
        node += 1;
    }
    if node < n {
        // trailing isolated nodes may be omitted entirely at end of file
        node = n;
    }
    debug_assert_eq!(node, n);

    let mut edges = Vec::with_capacity(directed.len() / 2);
    for (&(a, b), &w) in &directed {
        match directed.get(&(b, a)) {
            None => {
                return Err(parse_err(
                    source,
                    hline,
                    format!("asymmetric adjacency: {} lists {} but not vice versa", a + 1, b + 1),
                ))
            }
            Some(&w2) if w2 != w => {
                return Err(parse_err(
                    source,
                    hline,
                    format!("asymmetric weights on edge ({}, {})", a + 1, b + 1),
                ))
            }
            _ => {}
        }
        if a < b {
            edges.push((a, b, w));
        }
    }
    if edges.len() != m {
        return Err(parse_err(
            source,
            hline,
            format!("header declares {m} edges but {} were listed", edges.len()),
        ));
    }
    Graph::new(n, edges)
}

pub fn write_metis(g: &Graph, path: &Path) -> Result<()> {
    atomic_write(path, metis_string(g).as_bytes())
}

pub(crate) fn metis_string(g: &Graph) -> String {
    let weighted = g.is_weighted();
    let mut s = if weighted {
        format!("{} {} 001\n", g.num_nodes(), g.num_edges())
    } else {
        format!("{} {}\n", g.num_nodes(), g.num_edges())
    };
    for list in g.neighbors() {
        let mut first = true;
        for (j, w) in list {
            if !first {
                s.push(' ');
            }
            first = false;
            if weighted {
                let _ = write!(s, "{} {}", j + 1, w);
            } else {
                let _ = write!(s, "{}", j + 1);
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturedDoc {
    nodes: Vec<FeaturedNode>,
    edges: Vec<FeaturedEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturedNode {
    id: Value,
    op_type: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturedEdge {
    u: Value,
    v: Value,
    #[serde(default)]
    weight: Option<f64>,
}

fn id_key(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) if n.is_u64() || n.is_i64() => Some(n.to_string()),
        _ => None,
    }
}

/// Loads a featured graph. Without a vocabulary the columns are the sorted
/// distinct op types of this file.
pub fn load_featured_graph(
    path: &Path,
    vocab: Option<&Vocabulary>,
    policy: UnknownOpPolicy,
) -> Result<Graph> {
    parse_featured_graph(&read_text(path)?, vocab, policy, &path.display().to_string())
}

pub fn parse_featured_graph(
    text: &str,
    vocab: Option<&Vocabulary>,
    policy: UnknownOpPolicy,
    source: &str,
) -> Result<Graph> {
    let doc: FeaturedDoc = serde_json::from_str(text)
        .map_err(|e| parse_err(source, e.line(), e.to_string()))?;
    let mut index = HashMap::with_capacity(doc.nodes.len());
    let mut ops = Vec::with_capacity(doc.nodes.len());
    for (k, node) in doc.nodes.iter().enumerate() {
        let key = id_key(&node.id)
            .ok_or_else(|| parse_err(source, 0, format!("node {k}: id must be a string or integer")))?;
        if index.insert(key.clone(), k).is_some() {
            return Err(parse_err(source, 0, format!("duplicate node id `{key}`")));
        }
        ops.push(node.op_type.clone());
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (k, e) in doc.edges.iter().enumerate() {
        let lookup = |v: &Value| -> Result<usize> {
            let key = id_key(v)
                .ok_or_else(|| parse_err(source, 0, format!("edge {k}: bad endpoint {v}")))?;
            index.get(&key).copied().ok_or_else(|| {
                parse_err(source, 0, format!("edge {k} references node `{key}` missing from the node list"))
            })
        };
        let (u, v) = (lookup(&e.u)?, lookup(&e.v)?);
        if u == v {
            return Err(parse_err(source, 0, format!("edge {k}: self-loop rejected")));
        }
        edges.push((u, v, e.weight.unwrap_or(1.0)));
    }
    let g = Graph::from_edges_dedup(doc.nodes.len(), edges)?;
    let local;
    let vocab = match vocab {
        Some(v) => v,
        None => {
            local = Vocabulary::from_ops(ops.iter().map(String::as_str));
            &local
        }
    };
    let (x, names) = one_hot_features(&ops, vocab, policy)?;
    g.with_features(x, Some(names))
}

/// Writes a featured graph; each node's op type is the name of its largest
/// feature column.
pub fn write_featured_graph(g: &Graph, path: &Path) -> Result<()> {
    let (Some(x), Some(names)) = (g.node_features(), g.feature_names()) else {
        return Err(GapError::InvalidArgument(
            "featured graph output needs named node features".into(),
        ));
    };
    let nodes: Vec<Value> = (0..g.num_nodes())
        .map(|i| {
            let row = x.row(i);
            let best = (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
            serde_json::json!({ "id": i, "op_type": names[best] })
        })
        .collect();
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .map(|e| {
            if e.w == 1.0 {
                serde_json::json!({ "u": e.u, "v": e.v })
            } else {
                serde_json::json!({ "u": e.u, "v": e.v, "weight": e.w })
            }
        })
        .collect();
    let doc = serde_json::json!({ "nodes": nodes, "edges": edges });
    atomic_write(path, serde_json::to_string_pretty(&doc)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edge_list_examples() {
        let g = parse_edge_list("0 1\n1 2", false, "t").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        let g = parse_edge_list("0 1 2.5", true, "t").unwrap();
        assert_eq!(g.edges()[0].w, 2.5);
        let err = parse_edge_list("0 0", false, "t").unwrap_err();
        assert!(err.to_string().contains("self-loop"));
    }

    #[test]
    fn edge_list_header_comments_and_errors() {
        let g = parse_edge_list("# comment\np nodes 5\n0 1 # trailing\n1 0\n", false, "t").unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (5, 1));
        let err = parse_edge_list("0 1\n1 x\n", false, "f.txt").unwrap_err();
        assert!(matches!(err, GapError::Parse { line: 2, .. }), "{err}");
        assert!(parse_edge_list("0 1 -3", true, "t").unwrap_err().to_string().contains("negative"));
        assert!(parse_edge_list("p nodes 2\n0 5", false, "t").is_err());
    }

    #[test]
    fn metis_examples() {
        let g = parse_metis("4 3\n2\n1 3\n2 4\n3\n", "t").unwrap();
        assert_eq!(g.num_nodes(), 4);
        let e: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(e, vec![(0, 1), (1, 2), (2, 3)]);

        assert!(parse_metis("4 5\n2\n1 3\n2 4\n3\n", "t").is_err());

        let g = parse_metis("3 1\n2\n1\n\n", "t").unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (3, 1));

        let err = parse_metis("3 1\n2\n\n\n", "t").unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
    }

    #[test]
    fn metis_weighted_roundtrip() {
        let g = Graph::new(3, [(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        let s = metis_string(&g);
        assert!(s.starts_with("3 2 001\n"));
        assert_eq!(parse_metis(&s, "t").unwrap(), g);
    }

    #[test]
    fn featured_examples() {
        let vocab = Vocabulary::new(vec!["Add".into(), "Conv2d".into(), "MatMul".into()]).unwrap();
        let doc = r#"{"nodes":[{"id":"a","op_type":"MatMul"},{"id":"b","op_type":"Add"}],
                      "edges":[{"u":"a","v":"b"}]}"#;
        let g = parse_featured_graph(doc, Some(&vocab), UnknownOpPolicy::Error, "t").unwrap();
        assert_eq!(g.node_features().unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);

        let bad = r#"{"nodes":[{"id":0,"op_type":"Foo"}],"edges":[]}"#;
        assert!(parse_featured_graph(bad, Some(&vocab), UnknownOpPolicy::Error, "t").is_err());

        let missing = r#"{"nodes":[{"id":0,"op_type":"Add"}],"edges":[{"u":0,"v":7}]}"#;
        let err = parse_featured_graph(missing, None, UnknownOpPolicy::Error, "t").unwrap_err();
        assert!(err.to_string().contains("missing from the node list"));
    }

    #[test]
    fn shared_vocabulary_gives_same_columns() {
        let vocab = Vocabulary::new(vec!["Add".into(), "MatMul".into()]).unwrap();
        let a = r#"{"nodes":[{"id":0,"op_type":"Add"}],"edges":[]}"#;
        let b = r#"{"nodes":[{"id":0,"op_type":"MatMul"},{"id":1,"op_type":"Add"}],"edges":[]}"#;
        let ga = parse_featured_graph(a, Some(&vocab), UnknownOpPolicy::Error, "a").unwrap();
        let gb = parse_featured_graph(b, Some(&vocab), UnknownOpPolicy::Error, "b").unwrap();
        assert_eq!(ga.feature_names(), gb.feature_names());
        assert_eq!(ga.node_features().unwrap().row(0), gb.node_features().unwrap().row(1));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..15).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 1u8..4), 0..40).prop_map(move |es| {
                let edges = es
                    .into_iter()
                    .filter(|(a, b, _)| a != b)
                    .map(|(a, b, w)| (a, b, w as f64));
                Graph::from_edges_dedup(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn metis_roundtrip(g in arb_graph()) {
            prop_assert_eq!(parse_metis(&metis_string(&g), "t").unwrap(), g);
        }

        #[test]
        fn edge_list_roundtrip(g in arb_graph()) {
            prop_assert_eq!(parse_edge_list(&edge_list_string(&g), true, "t").unwrap(), g);
        }
    }
}
