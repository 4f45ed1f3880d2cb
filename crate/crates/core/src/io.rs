//! CSV readers and writers for graphs, signals, partitions and flows.
//!
//! | file         | header          | rows                                      |
//! |--------------|-----------------|-------------------------------------------|
//! | graph        | `i,j,w`         | one per undirected edge                   |
//! | signal       | `i,x`           | one per node                              |
//! | observations | `i,x`           | one per sampled node                      |
//! | partition    | `i,cluster`     | one per node, integer cluster labels      |
//! | flow / dual  | `head,tail,y`   | one per edge; `tail = star` for star edges |
//!
//! Node ids are 1-based. Writers emit canonical orientation (`head < tail`) in
//! lexicographic order and format floats with the shortest representation that
//! parses back to the same value, so a write followed by a read is lossless
//! (negative zero is written as `0`).

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::StringRecord;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::graph::{EmpiricalGraph, ExtendedGraph};
use crate::signal::{GraphSignal, Observations, Partition};

pub const STAR: &str = "star";

struct Rows {
    path: PathBuf,
    rows: Vec<(u64, StringRecord)>,
}

impl Rows {
    fn read(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let found = reader.headers()?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!(
                    "expected header `{}`, found `{}`",
                    header.join(","),
                    found.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn error(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn field<T: FromStr>(
        &self,
        line: u64,
        rec: &StringRecord,
        idx: usize,
        name: &str,
    ) -> Result<T> {
        let raw = rec.get(idx).unwrap_or_default();
        raw.parse()
            .map_err(|_| self.error(line, format!("cannot parse {name} from `{raw}`")))
    }

    fn node(&self, line: u64, rec: &StringRecord, idx: usize, name: &str) -> Result<usize> {
        let id: usize = self.field(line, rec, idx, name)?;
        if id == 0 {
            return Err(self.error(line, format!("{name} must be a 1-based node id")));
        }
        Ok(id)
    }

    fn value(&self, line: u64, rec: &StringRecord, idx: usize, name: &str) -> Result<f64> {
        let v: f64 = self.field(line, rec, idx, name)?;
        if !v.is_finite() {
            return Err(self.error(line, format!("{name} must be finite, got {v}")));
        }
        Ok(v)
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt(v: f64) -> String {
    // `-0` would survive a round trip but only adds noise to diffs
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// Reads an edge list. The node count is the largest id seen, or `node_count`
/// if given (which must cover every id).
pub fn read_graph(path: &Path, node_count: Option<usize>) -> Result<EmpiricalGraph> {
    let rows = Rows::read(path, &["i", "j", "w"])?;
    let mut seen = HashMap::new();
    let mut edges = Vec::with_capacity(rows.rows.len());
    for (line, rec) in &rows.rows {
        let i = rows.node(*line, rec, 0, "i")?;
        let j = rows.node(*line, rec, 1, "j")?;
        let w: f64 = rows.field(*line, rec, 2, "w")?;
        if i == j {
            return Err(rows.error(*line, format!("self-loop at node {i}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(rows.error(*line, format!("weight must be positive, got {w}")));
        }
        let key = (i.min(j), i.max(j));
        if let Some(first) = seen.insert(key, *line) {
            return Err(rows.error(
                *line,
                format!(
                    "edge {{{}, {}}} already given on line {first}",
                    key.0, key.1
                ),
            ));
        }
        edges.push((i, j, w));
    }
    let max_id = edges.iter().map(|&(i, j, _)| i.max(j)).max().unwrap_or(0);
    let n = match node_count {
        Some(n) if n < max_id => {
            return Err(Error::NodeOutOfRange {
                id: max_id,
                node_count: n,
            })
        }
        Some(n) => n,
        None => max_id,
    };
    EmpiricalGraph::new(n, edges)
}

pub fn write_graph(path: &Path, g: &EmpiricalGraph) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["i", "j", "w"])?;
    for e in g.edges() {
        w.write_record([e.head.to_string(), e.tail.to_string(), fmt(e.weight)])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `(line, node, value)` per row.
type NodeRows = Vec<(u64, usize, f64)>;

fn read_node_values(path: &Path, header: &[&str]) -> Result<(Rows, NodeRows)> {
    let rows = Rows::read(path, header)?;
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(rows.rows.len());
    for (line, rec) in &rows.rows {
        let i = rows.node(*line, rec, 0, header[0])?;
        let v = rows.value(*line, rec, 1, header[1])?;
        if let Some(first) = seen.insert(i, *line) {
            return Err(rows.error(*line, format!("node {i} already given on line {first}")));
        }
        out.push((*line, i, v));
    }
    Ok((rows, out))
}

/// Reads a full signal: every node `1..=n` exactly once, in any order.
pub fn read_signal(path: &Path) -> Result<GraphSignal> {
    let (rows, values) = read_node_values(path, &["i", "x"])?;
    let n = values.len();
    let mut x = vec![0.0; n];
    for (line, i, v) in values {
        if i > n {
            return Err(rows.error(
                line,
                format!("node {i} out of range for a signal of {n} rows"),
            ));
        }
        x[i - 1] = v;
    }
    GraphSignal::new(x)
}

pub fn write_signal(path: &Path, x: &GraphSignal) -> Result<()> {
    write_node_values(
        path,
        &["i", "x"],
        x.values().iter().enumerate().map(|(k, &v)| (k + 1, v)),
    )
}

pub fn read_observations(path: &Path) -> Result<Observations> {
    let (_, values) = read_node_values(path, &["i", "x"])?;
    Observations::new(values.into_iter().map(|(_, i, v)| (i, v)))
}

pub fn write_observations(path: &Path, obs: &Observations) -> Result<()> {
    write_node_values(path, &["i", "x"], obs.iter())
}

fn write_node_values(
    path: &Path,
    header: &[&str],
    values: impl Iterator<Item = (usize, f64)>,
) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for (i, v) in values {
        w.write_record([i.to_string(), fmt(v)])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `i,cluster` rows covering nodes `1..=n`; clusters are ordered by label.
pub fn read_partition(path: &Path) -> Result<Partition> {
    let rows = Rows::read(path, &["i", "cluster"])?;
    let n = rows.rows.len();
    let mut assignment = vec![None; n];
    for (line, rec) in &rows.rows {
        let i = rows.node(*line, rec, 0, "i")?;
        let c: i64 = rows.field(*line, rec, 1, "cluster")?;
        if i > n {
            return Err(rows.error(
                *line,
                format!("node {i} out of range for a partition of {n} rows"),
            ));
        }
        if assignment[i - 1].replace(c).is_some() {
            return Err(rows.error(*line, format!("node {i} assigned twice")));
        }
    }
    let assignment: Vec<i64> = assignment
        .into_iter()
        .map(|c| c.expect("all rows distinct"))
        .collect();
    Partition::from_assignment(&assignment)
}

/// Writes 1-based cluster indices.
pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["i", "cluster"])?;
    for i in 1..=p.node_count() {
        w.write_record([i.to_string(), (p.cluster_of(i) + 1).to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Base-edge and star values from `head,tail,y` rows.
///
/// A row given as `(tail, head)` is the reversed edge and its value is negated.
/// Edges without a row carry zero.
fn read_edge_values(
    path: &Path,
    g: &EmpiricalGraph,
    star_nodes: Option<&[usize]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = Rows::read(path, &["head", "tail", "y"])?;
    let mut base = vec![None; g.edge_count()];
    let mut star = vec![None; star_nodes.map_or(0, <[usize]>::len)];
    for (line, rec) in &rows.rows {
        let (line, rec) = (*line, rec);
        let head = rows.node(line, rec, 0, "head")?;
        let y = rows.value(line, rec, 2, "y")?;
        let slot = if rec.get(1) == Some(STAR) {
            let Some(nodes) = star_nodes else {
                return Err(rows.error(line, "star edges are not allowed here"));
            };
            let Ok(k) = nodes.binary_search(&head) else {
                return Err(rows.error(line, format!("node {head} is not sampled")));
            };
            &mut star[k]
        } else {
            let tail = rows.node(line, rec, 1, "tail")?;
            let Some(e) = g.edge_index(head, tail) else {
                return Err(rows.error(line, format!("no edge {{{head}, {tail}}} in the graph")));
            };
            let y = if head < tail { y } else { -y };
            let slot = &mut base[e];
            if slot.replace(y).is_some() {
                return Err(rows.error(line, format!("edge {{{head}, {tail}}} given twice")));
            }
            continue;
        };
        if slot.replace(y).is_some() {
            return Err(rows.error(line, format!("star edge of node {head} given twice")));
        }
    }
    let fill = |v: Vec<Option<f64>>| v.into_iter().map(|y| y.unwrap_or(0.0)).collect();
    Ok((fill(base), fill(star)))
}

pub fn read_flow(path: &Path, eg: &ExtendedGraph<'_>) -> Result<Flow> {
    let (base, star) = read_edge_values(path, eg.base(), Some(eg.star_nodes()))?;
    Ok(Flow { base, star })
}

/// Base rows in edge order, then star rows in node order.
pub fn write_flow(path: &Path, eg: &ExtendedGraph<'_>, f: &Flow) -> Result<()> {
    crate::error::check_len("base flow", eg.base().edge_count(), f.base.len())?;
    crate::error::check_len("star flow", eg.star_count(), f.star.len())?;
    let mut w = create(path)?;
    w.write_record(["head", "tail", "y"])?;
    for (e, &y) in eg.base().edges().iter().zip(&f.base) {
        w.write_record([e.head.to_string(), e.tail.to_string(), fmt(y)])?;
    }
    for (&i, &y) in eg.star_nodes().iter().zip(&f.star) {
        w.write_record([i.to_string(), STAR.to_string(), fmt(y)])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dual(path: &Path, g: &EmpiricalGraph) -> Result<Vec<f64>> {
    Ok(read_edge_values(path, g, None)?.0)
}

pub fn write_dual(path: &Path, g: &EmpiricalGraph, y: &[f64]) -> Result<()> {
    crate::error::check_len("dual vector", g.edge_count(), y.len())?;
    let mut w = create(path)?;
    w.write_record(["head", "tail", "y"])?;
    for (e, &v) in g.edges().iter().zip(y) {
        w.write_record([e.head.to_string(), e.tail.to_string(), fmt(v)])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{chain, ChainParams};

    fn write_text(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn graph_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = EmpiricalGraph::new(4, [(3, 1, 0.1), (1, 2, 1.0 / 3.0), (4, 2, 2.5)]).unwrap();
        let p = dir.path().join("g.csv");
        write_graph(&p, &g).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("i,j,w\n1,2,0.3333333333333333\n1,3,0.1\n2,4,2.5\n"));
        assert_eq!(read_graph(&p, None).unwrap(), g);
    }

    #[test]
    fn graph_node_count_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(dir.path(), "g.csv", "i,j,w\n1,2,1\n");
        assert_eq!(read_graph(&p, Some(3)).unwrap().node_count(), 3);
        assert!(matches!(
            read_graph(&p, Some(1)),
            Err(Error::NodeOutOfRange { id: 2, .. })
        ));
    }

    #[test]
    fn graph_parse_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("i,j,w\n1,2,1\n2,x,1\n", 3),
            ("i,j,w\n1,2,1\n2,3,1\n3,2,1\n", 4),
            ("i,j,w\n1,1,1\n", 2),
            ("i,j,w\n1,2,-1\n", 2),
            ("i,j,w\n0,2,1\n", 2),
            ("a,b,c\n1,2,1\n", 1),
        ];
        for (text, want) in cases {
            let p = write_text(dir.path(), "g.csv", text);
            match read_graph(&p, None) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn signal_and_observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = GraphSignal::new(vec![0.1, -2.0, 1e-300, 7.0]).unwrap();
        let p = dir.path().join("x.csv");
        write_signal(&p, &x).unwrap();
        assert_eq!(read_signal(&p).unwrap(), x);

        let obs = Observations::new([(7, 0.0), (2, 1.0)]).unwrap();
        write_observations(&p, &obs).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "i,x\n2,1\n7,0\n");
        assert_eq!(read_observations(&p).unwrap(), obs);
    }

    #[test]
    fn signal_rows_any_order_but_complete() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(dir.path(), "x.csv", "i,x\n2,5\n1,4\n");
        assert_eq!(read_signal(&p).unwrap().values(), &[4.0, 5.0]);
        let p = write_text(dir.path(), "x.csv", "i,x\n1,4\n3,5\n");
        assert!(matches!(read_signal(&p), Err(Error::Parse { line: 3, .. })));
        let p = write_text(dir.path(), "x.csv", "i,x\n1,4\n1,5\n");
        assert!(matches!(read_signal(&p), Err(Error::Parse { line: 3, .. })));
        let p = write_text(dir.path(), "x.csv", "i,x\n1,NaN\n");
        assert!(matches!(read_signal(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_observations_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(dir.path(), "o.csv", "i,x\n");
        assert!(matches!(
            read_observations(&p),
            Err(Error::EmptySamplingSet)
        ));
    }

    #[test]
    fn partition_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let part = Partition::new(5, vec![vec![1, 2, 4], vec![3, 5]]).unwrap();
        let p = dir.path().join("p.csv");
        write_partition(&p, &part).unwrap();
        assert_eq!(read_partition(&p).unwrap(), part);

        let p = write_text(dir.path(), "p.csv", "i,cluster\n1,9\n2,-3\n3,9\n");
        let read = read_partition(&p).unwrap();
        assert_eq!(read.clusters(), &[vec![2], vec![1, 3]]);
    }

    #[test]
    fn flow_round_trip_and_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let inst = chain(&ChainParams::default()).unwrap();
        let eg = inst.graph.extend(inst.observations.nodes()).unwrap();
        let mut f = Flow::zeros(&eg);
        f.base[2] = 0.25;
        f.base[8] = -1.0 / 3.0;
        f.star = vec![0.25, -0.25];
        let p = dir.path().join("f.csv");
        write_flow(&p, &eg, &f).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.ends_with("2,star,0.25\n7,star,-0.25\n"));
        assert_eq!(read_flow(&p, &eg).unwrap(), f);

        let p = write_text(dir.path(), "f.csv", "head,tail,y\n4,3,0.5\n7,star,1\n");
        let read = read_flow(&p, &eg).unwrap();
        assert_eq!(read.base[2], -0.5);
        assert_eq!(read.star, vec![0.0, 1.0]);
    }

    #[test]
    fn flow_errors() {
        let dir = tempfile::tempdir().unwrap();
        let inst = chain(&ChainParams::default()).unwrap();
        let eg = inst.graph.extend(inst.observations.nodes()).unwrap();
        for (text, line) in [
            ("head,tail,y\n1,3,0\n", 2),
            ("head,tail,y\n1,2,0\n2,1,0\n", 3),
            ("head,tail,y\n3,star,0\n", 2),
            ("head,tail,y\n2,star,0\n2,star,1\n", 3),
        ] {
            let p = write_text(dir.path(), "f.csv", text);
            match read_flow(&p, &eg) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let p = write_text(dir.path(), "f.csv", "head,tail,y\n2,star,0\n");
        assert!(matches!(
            read_dual(&p, &inst.graph),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn dual_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = chain(&ChainParams::default()).unwrap();
        let y: Vec<f64> = (0..9).map(|k| k as f64 / 7.0 - 0.5).collect();
        let p = dir.path().join("y.csv");
        write_dual(&p, &inst.graph, &y).unwrap();
        assert_eq!(read_dual(&p, &inst.graph).unwrap(), y);
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.csv");
        assert!(matches!(read_signal(&p), Err(Error::Io { .. })));
    }
}
