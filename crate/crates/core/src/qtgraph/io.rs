use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, TypeBlueprint};

#[derive(Debug, Serialize, Deserialize)]
struct TypeSidecar {
    type_of: Vec<usize>,
}

/// Edge list as CSV with header `u,v`, one edge per line, `u < v`.
pub fn edges_to_csv(g: &Graph) -> String {
    let mut out = String::from("u,v\n");
    for (u, v) in g.edges() {
        writeln!(out, "{u},{v}").expect("writing to a String");
    }
    out
}

/// Sidecar JSON `{"type_of": [...]}`.
pub fn types_to_json(g: &Graph) -> String {
    serde_json::to_string(&TypeSidecar {
        type_of: g.types().to_vec(),
    })
    .expect("type map serializes")
}

/// Reads a graph back from its edge CSV, type sidecar and blueprint.
pub fn graph_from_files(edges_csv: &str, types_json: &str, blueprint: TypeBlueprint) -> Result<Graph, GraphError> {
    let sidecar: TypeSidecar = serde_json::from_str(types_json).map_err(|e| GraphError::Parse(e.to_string()))?;
    let mut lines = edges_csv.lines();
    match lines.next().map(str::trim) {
        Some("u,v") => {}
        other => {
            return Err(GraphError::Parse(format!(
                "edge list header must be `u,v`, found {other:?}"
            )))
        }
    }
    let mut edges = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<usize, GraphError> {
            s.and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| GraphError::Parse(format!("bad edge on line {}: `{line}`", i + 2)))
        };
        let mut parts = line.split(',');
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        edges.push((u, v));
    }
    Graph::from_edges(sidecar.type_of, &edges, blueprint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtgraph::{build_family, Family};

    #[test]
    fn files_round_trip() {
        let g = build_family(Family::DecoratedGrid(6, 4)).unwrap();
        let csv = edges_to_csv(&g);
        assert!(csv.starts_with("u,v\n"));
        assert!(!csv.contains('\r'));
        let back = graph_from_files(&csv, &types_to_json(&g), g.blueprint().clone()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn bad_header() {
        let bp = TypeBlueprint::new(vec![vec![2]]).unwrap();
        assert!(graph_from_files("a,b\n0,1\n", r#"{"type_of":[0,0]}"#, bp).is_err());
    }
}
