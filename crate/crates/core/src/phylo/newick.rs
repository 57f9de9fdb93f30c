//! Newick output (integer supports as internal labels, six-decimal branch
//! lengths) and a small parser for trees coming back from external tools.

use std::collections::HashMap;

use super::nj::UnrootedTree;
use super::PhyloError;

/// Writes `tree` rooted for display at the node adjacent to `outgroup`,
/// outgroup first. Children are ordered by their smallest leaf index.
pub fn to_newick(tree: &UnrootedTree, outgroup: usize) -> String {
    let &(root, root_edge) = tree
        .neighbors(outgroup)
        .first()
        .expect("outgroup leaf is attached");
    let min_leaf = min_leaf_below(tree);
    let mut out = String::from("(");
    out.push_str(&format!(
        "{}:{:.6}",
        tree.taxa()[outgroup],
        tree.edges()[root_edge].length
    ));
    let mut children: Vec<(usize, usize)> = tree
        .neighbors(root)
        .iter()
        .copied()
        .filter(|&(v, _)| v != outgroup)
        .collect();
    children.sort_by_key(|&(v, e)| min_leaf(v, e));
    for (v, e) in children {
        out.push(',');
        write_subtree(tree, v, e, &min_leaf, &mut out);
    }
    out.push_str(");");
    out
}

fn min_leaf_below(tree: &UnrootedTree) -> impl Fn(usize, usize) -> usize + '_ {
    // smallest leaf reachable from `node` without crossing `via`
    move |node, via| {
        let mut best = usize::MAX;
        let mut stack = vec![(node, via)];
        while let Some((u, from)) = stack.pop() {
            if tree.is_leaf(u) {
                best = best.min(u);
            }
            for &(v, e) in tree.neighbors(u) {
                if e != from {
                    stack.push((v, e));
                }
            }
        }
        best
    }
}

fn write_subtree(
    tree: &UnrootedTree,
    node: usize,
    via: usize,
    min_leaf: &impl Fn(usize, usize) -> usize,
    out: &mut String,
) {
    let edge = &tree.edges()[via];
    if tree.is_leaf(node) {
        out.push_str(&tree.taxa()[node]);
    } else {
        let mut children: Vec<(usize, usize)> = tree
            .neighbors(node)
            .iter()
            .copied()
            .filter(|&(_, e)| e != via)
            .collect();
        children.sort_by_key(|&(v, e)| min_leaf(v, e));
        out.push('(');
        for (k, (v, e)) in children.into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write_subtree(tree, v, e, min_leaf, out);
        }
        out.push(')');
        if let Some(s) = edge.support {
            out.push_str(&format!("{}", s.round() as i64));
        }
    }
    out.push_str(&format!(":{:.6}", edge.length));
}

struct RawNode {
    label: String,
    length: f64,
    children: Vec<RawNode>,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PhyloError {
        PhyloError::Newick(format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn label(&mut self) -> Result<String, PhyloError> {
        self.skip_ws();
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.text.len() && self.text[self.pos] != b'\'' {
                self.pos += 1;
            }
            if self.pos >= self.text.len() {
                return Err(self.err("unterminated quoted label"));
            }
            let s = String::from_utf8_lossy(&self.text[start..self.pos]).into_owned();
            self.pos += 1;
            return Ok(s);
        }
        let start = self.pos;
        while self.pos < self.text.len() && !b"(),:;".contains(&self.text[self.pos]) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.text[start..self.pos]).trim().to_owned())
    }

    fn node(&mut self) -> Result<RawNode, PhyloError> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                children.push(self.node()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
        }
        let label = self.label()?;
        let mut length = 0.0;
        if self.peek() == Some(b':') {
            self.pos += 1;
            let raw = self.label()?;
            length = raw
                .parse()
                .map_err(|_| self.err(&format!("bad branch length {raw:?}")))?;
        }
        Ok(RawNode {
            label,
            length,
            children,
        })
    }
}

/// Parses a Newick string over exactly the taxa in `taxa`. Internal labels
/// that parse as numbers become edge supports. A bifurcating root is
/// dissolved into a single edge.
pub fn parse_newick(text: &str, taxa: &[String]) -> Result<UnrootedTree, PhyloError> {
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
    };
    let root = p.node()?;
    if p.peek() != Some(b';') {
        return Err(p.err("expected ';'"));
    }
    let index: HashMap<&str, usize> = taxa.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut tree = UnrootedTree::with_leaves(taxa.to_vec());
    let mut seen = vec![false; taxa.len()];

    fn attach(
        tree: &mut UnrootedTree,
        raw: &RawNode,
        index: &HashMap<&str, usize>,
        seen: &mut [bool],
    ) -> Result<usize, PhyloError> {
        if raw.children.is_empty() {
            let &leaf = index
                .get(raw.label.as_str())
                .ok_or_else(|| PhyloError::Newick(format!("unknown taxon {:?}", raw.label)))?;
            if std::mem::replace(&mut seen[leaf], true) {
                return Err(PhyloError::Newick(format!("taxon {:?} appears twice", raw.label)));
            }
            return Ok(leaf);
        }
        let u = tree.add_node();
        for c in &raw.children {
            let v = attach(tree, c, index, seen)?;
            let support = if c.children.is_empty() {
                None
            } else {
                c.label.parse::<f64>().ok()
            };
            tree.add_edge(u, v, c.length, support);
        }
        Ok(u)
    }

    if root.children.len() == 2 {
        // a rooted binary tree: join the two root children by one edge
        let a = attach(&mut tree, &root.children[0], &index, &mut seen)?;
        let b = attach(&mut tree, &root.children[1], &index, &mut seen)?;
        let support = root
            .children
            .iter()
            .filter(|c| !c.children.is_empty())
            .find_map(|c| c.label.parse::<f64>().ok());
        tree.add_edge(a, b, root.children[0].length + root.children[1].length, support);
    } else {
        attach(&mut tree, &root, &index, &mut seen)?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(PhyloError::Newick(format!("taxon {:?} missing", taxa[missing])));
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::{neighbor_joining, DistanceMatrix};

    fn taxa(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn quartet() -> UnrootedTree {
        let d = DistanceMatrix::from_rows(&[
            vec![0.0, 2.0, 3.0, 3.0],
            vec![2.0, 0.0, 3.0, 3.0],
            vec![3.0, 3.0, 0.0, 2.0],
            vec![3.0, 3.0, 2.0, 0.0],
        ]);
        let mut t = neighbor_joining(&d, &taxa(&["A", "B", "C", "D"])).unwrap();
        let e = t.internal_edges().next().unwrap();
        t.set_support(e, 87.0);
        t
    }

    #[test]
    fn writes_exact_format() {
        let t = quartet();
        assert_eq!(
            to_newick(&t, 0),
            "(A:1.000000,B:1.000000,(C:1.000000,D:1.000000)87:1.000000);"
        );
        assert_eq!(
            to_newick(&t, 3),
            "(D:1.000000,(A:1.000000,B:1.000000)87:1.000000,C:1.000000);"
        );
    }

    #[test]
    fn parse_round_trip_keeps_topology_and_support() {
        let t = quartet();
        let back = parse_newick(&to_newick(&t, 0), t.taxa()).unwrap();
        assert_eq!(back.signature(), t.signature());
        assert_eq!(back.supports(), vec![87.0]);
    }

    #[test]
    fn parse_rooted_binary() {
        let names = taxa(&["A", "B", "C", "D", "E"]);
        let t = parse_newick("((A:1,B:1)90:0.5,(C:1,(D:1,E:1)70:0.2)80:0.5);", &names).unwrap();
        assert_eq!(t.internal_edges().count(), 2);
        let mut s = t.supports();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![70.0, 90.0]);
    }

    #[test]
    fn parse_errors() {
        let names = taxa(&["A", "B", "C"]);
        assert!(parse_newick("(A,B,C)", &names).is_err());
        assert!(parse_newick("(A,B,X);", &names).is_err());
        assert!(parse_newick("(A,B);", &names).is_err());
        assert!(parse_newick("(A,B,B);", &names).is_err());
        assert!(parse_newick("(A:x,B,C);", &names).is_err());
    }
}
