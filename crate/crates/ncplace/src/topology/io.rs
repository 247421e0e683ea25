//! Line-oriented topology file format.
//!
//! ```text
//! # comment
//! node <id> <SOURCE|CLIENT|SF|NC> <buffer_capacity>
//! edge <from> <to> <bandwidth_pps> <loss>
//! ```

use std::path::Path;

use super::{EdgeRecord, NodeId, NodeRecord, OverlayGraph, Role, TopologyError};

impl OverlayGraph {
    pub fn parse(text: &str, origin: &str) -> Result<Self, TopologyError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TopologyError::File {
                path: origin.to_string(),
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "node" => {
                    if fields.len() != 4 {
                        return Err(err(format!(
                            "expected `node <id> <role> <h>`, got {} fields",
                            fields.len()
                        )));
                    }
                    let id: u32 = fields[1]
                        .parse()
                        .map_err(|e| err(format!("bad node id `{}`: {e}", fields[1])))?;
                    let role = Role::parse(fields[2])
                        .ok_or_else(|| err(format!("unknown role `{}`", fields[2])))?;
                    let h: usize = fields[3]
                        .parse()
                        .map_err(|e| err(format!("bad buffer capacity `{}`: {e}", fields[3])))?;
                    nodes.push(NodeRecord {
                        id: NodeId(id),
                        role,
                        buffer_capacity: h,
                    });
                }
                "edge" => {
                    if fields.len() != 5 {
                        return Err(err(format!(
                            "expected `edge <from> <to> <bandwidth_pps> <loss>`, got {} fields",
                            fields.len()
                        )));
                    }
                    let from: u32 = fields[1]
                        .parse()
                        .map_err(|e| err(format!("bad from id `{}`: {e}", fields[1])))?;
                    let to: u32 = fields[2]
                        .parse()
                        .map_err(|e| err(format!("bad to id `{}`: {e}", fields[2])))?;
                    let bandwidth_pps: f64 = fields[3]
                        .parse()
                        .map_err(|e| err(format!("bad bandwidth `{}`: {e}", fields[3])))?;
                    let loss: f64 = fields[4]
                        .parse()
                        .map_err(|e| err(format!("bad loss `{}`: {e}", fields[4])))?;
                    edges.push(EdgeRecord {
                        from: NodeId(from),
                        to: NodeId(to),
                        bandwidth_pps,
                        loss,
                    });
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        OverlayGraph::build(nodes, edges)
    }

    pub fn load(path: &Path) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in self.nodes() {
            out.push_str(&format!(
                "node {} {} {}\n",
                n.id,
                n.role.as_str(),
                n.buffer_capacity
            ));
        }
        let mut edges: Vec<&EdgeRecord> = self.edges().iter().collect();
        edges.sort_by_key(|e| (e.from, e.to));
        for e in edges {
            out.push_str(&format!(
                "edge {} {} {} {}\n",
                e.from, e.to, e.bandwidth_pps, e.loss
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), TopologyError> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_roundtrip() {
        let g = crate::topology::generate(&Default::default(), 5).unwrap();
        let reparsed = OverlayGraph::parse(&g.to_text(), "<mem>").unwrap();
        assert!(reparsed.structurally_equal(&g));
    }

    #[test]
    fn rejects_cycles_with_origin() {
        let text = "node 0 SF 16\nnode 1 SF 16\nedge 0 1 4 0.0\nedge 1 0 4 0.0\n";
        assert!(matches!(
            OverlayGraph::parse(text, "x"),
            Err(TopologyError::Cycle)
        ));
    }

    #[test]
    fn rejects_full_loss_with_line_number() {
        let text = "node 0 SOURCE 16\nnode 1 CLIENT 16\nedge 0 1 4 1.0\n";
        match OverlayGraph::parse(text, "t") {
            Err(TopologyError::Invalid(msg)) => assert!(msg.contains("loss")),
            other => panic!("unexpected {other:?}"),
        }
        let text = "node 0 SOURCE 16\nnode 1 CLIENT 16\nedge 0 1 four 0.0\n";
        match OverlayGraph::parse(text, "t") {
            Err(TopologyError::File { line: 3, msg, .. }) => {
                assert!(msg.contains("bandwidth"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# overlay\n\nnode 0 SOURCE 16 # the source\nnode 1 CLIENT 16\nedge 0 1 4.5 0.05\n";
        let g = OverlayGraph::parse(text, "t").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges()[0].bandwidth_pps, 4.5);
    }
}
