//! Plain-text graph directory: `meta`, `edges`, `attrs`, optional `labels`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::AttributedGraph;
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, file: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(file, line, format!("not a valid integer: {s:?}")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Reads a graph directory. Edges may be listed in any order and direction.
pub fn load_graph(dir: impl AsRef<Path>) -> Result<AttributedGraph> {
    let dir = dir.as_ref();
    let meta_text = read(&dir.join("meta"))?;
    let mut meta = HashMap::new();
    let mut meta_lines = HashMap::new();
    for (ln, line) in content_lines(&meta_text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err("meta", ln, "expected key=value"))?;
        meta.insert(k.trim().to_string(), v.trim().to_string());
        meta_lines.insert(k.trim().to_string(), ln);
    }
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| parse_err("meta", 0, format!("missing key {k}")))
    };
    let n: usize = parse_num(get("n")?, "meta", meta_lines["n"])?;
    let f: usize = parse_num(get("f")?, "meta", meta_lines["f"])?;
    let card_line = meta_lines.get("cardinalities").copied().unwrap_or(0);
    let cards_text = get("cardinalities")?;
    let cardinalities: Vec<usize> = if cards_text.is_empty() {
        Vec::new()
    } else {
        cards_text
            .split(',')
            .map(|c| parse_num(c, "meta", card_line))
            .collect::<Result<_>>()?
    };
    if cardinalities.len() != f {
        return Err(parse_err(
            "meta",
            card_line,
            format!("{} cardinalities for f={f}", cardinalities.len()),
        ));
    }
    if let Some(c) = cardinalities.iter().find(|&&c| c < 2) {
        return Err(parse_err(
            "meta",
            card_line,
            format!("cardinality {c} below 2"),
        ));
    }
    let num_labels: usize = match meta.get("num_labels") {
        Some(v) => parse_num(v, "meta", meta_lines["num_labels"])?,
        None => 0,
    };
    let name = meta.get("name").cloned().unwrap_or_default();

    let mut edges = Vec::new();
    for (ln, line) in content_lines(&read(&dir.join("edges"))?) {
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err("edges", ln, "expected two node ids"));
        };
        let u: usize = parse_num(a, "edges", ln)?;
        let v: usize = parse_num(b, "edges", ln)?;
        if u == v {
            return Err(parse_err("edges", ln, format!("self-loop on node {u}")));
        }
        if u >= n || v >= n {
            return Err(parse_err(
                "edges",
                ln,
                format!("node id out of range for n={n}"),
            ));
        }
        edges.push((u, v));
    }

    let mut attrs = Vec::with_capacity(n * f);
    let mut rows = 0;
    for (ln, line) in content_lines(&read(&dir.join("attrs"))?) {
        let before = attrs.len();
        for (j, tok) in line.split(',').enumerate() {
            let a: u32 = parse_num(tok, "attrs", ln)?;
            if j >= f {
                return Err(parse_err("attrs", ln, format!("more than {f} values")));
            }
            if a as usize >= cardinalities[j] {
                return Err(parse_err(
                    "attrs",
                    ln,
                    format!(
                        "attribute {j} value {a} exceeds cardinality {}",
                        cardinalities[j]
                    ),
                ));
            }
            attrs.push(a);
        }
        if attrs.len() - before != f {
            return Err(parse_err("attrs", ln, format!("expected {f} values")));
        }
        rows += 1;
    }
    if rows != n && f > 0 {
        return Err(parse_err(
            "attrs",
            rows,
            format!("expected {n} rows, found {rows}"),
        ));
    }

    let labels = if num_labels > 0 {
        let mut y = Vec::with_capacity(n);
        for (ln, line) in content_lines(&read(&dir.join("labels"))?) {
            let l: u32 = parse_num(line, "labels", ln)?;
            if l as usize >= num_labels {
                return Err(parse_err(
                    "labels",
                    ln,
                    format!("label {l} not below {num_labels}"),
                ));
            }
            y.push(l);
        }
        if y.len() != n {
            return Err(parse_err("labels", y.len(), format!("expected {n} labels")));
        }
        Some((num_labels, y))
    } else {
        None
    };
    AttributedGraph::new(name, n, edges, cardinalities, attrs, labels)
}

/// Writes `g` as a graph directory, creating it if needed.
pub fn save_graph(g: &AttributedGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |file: &str, text: String| {
        let p = dir.join(file);
        fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    let cards: Vec<String> = g.cardinalities().iter().map(usize::to_string).collect();
    write(
        "meta",
        format!(
            "n={}\nf={}\ncardinalities={}\nnum_labels={}\nname={}\n",
            g.n(),
            g.num_attrs(),
            cards.join(","),
            g.num_labels(),
            g.name()
        ),
    )?;
    let mut s = String::with_capacity(g.num_edges() * 12);
    for &(u, v) in g.edges() {
        let _ = writeln!(s, "{u}\t{v}");
    }
    write("edges", s)?;
    let mut s = String::with_capacity(g.n() * (2 * g.num_attrs() + 1));
    for v in 0..g.n() {
        for (j, a) in g.attr_row(v).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{a}");
        }
        s.push('\n');
    }
    write("attrs", s)?;
    let labels_path = dir.join("labels");
    match g.labels() {
        Some(y) => {
            let mut s = String::with_capacity(y.len() * 3);
            for l in y {
                let _ = writeln!(s, "{l}");
            }
            write("labels", s)?;
        }
        None if labels_path.exists() => {
            fs::remove_file(&labels_path).map_err(|e| Error::io(labels_path, e))?;
        }
        None => {}
    }
    Ok(())
}
