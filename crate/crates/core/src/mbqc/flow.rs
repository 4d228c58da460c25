use std::collections::BTreeMap;

use super::{BrickworkGraph, Node};

/// Flow of a brickwork graph: each measured node flows to its row successor,
/// and nodes are measured column by column, rows ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flow {
    successor: BTreeMap<Node, Node>,
    predecessor: BTreeMap<Node, Node>,
    order: Vec<Node>,
    layer: BTreeMap<Node, usize>,
    sx: BTreeMap<Node, Vec<Node>>,
    sz: BTreeMap<Node, Vec<Node>>,
}

pub fn compute_flow(graph: &BrickworkGraph) -> Flow {
    let n = graph.n_wires();
    let successor: BTreeMap<Node, Node> = graph.measured().map(|j| (j, j + n)).collect();
    let predecessor = successor.iter().map(|(&i, &j)| (j, i)).collect();
    let mut sx: BTreeMap<Node, Vec<Node>> = graph.nodes().map(|j| (j, Vec::new())).collect();
    let mut sz = sx.clone();
    for (&i, &fi) in &successor {
        sx.entry(fi).or_default().push(i);
        for k in graph.neighbors(fi) {
            if k != i {
                sz.entry(k).or_default().push(i);
            }
        }
    }
    for v in sz.values_mut() {
        v.sort_unstable();
    }
    Flow {
        successor,
        predecessor,
        order: graph.measured().collect(),
        layer: graph.nodes().map(|j| (j, graph.column(j))).collect(),
        sx,
        sz,
    }
}

impl Flow {
    /// `f(j)`; `None` for outputs.
    pub fn f(&self, j: Node) -> Option<Node> {
        self.successor.get(&j).copied()
    }

    /// `f⁻¹(j)`; `None` for inputs.
    pub fn f_inv(&self, j: Node) -> Option<Node> {
        self.predecessor.get(&j).copied()
    }

    /// Measured nodes in the order they are measured.
    pub fn order(&self) -> &[Node] {
        &self.order
    }

    /// Layer of `j` in the partial order (its column).
    pub fn layer(&self, j: Node) -> usize {
        self.layer.get(&j).copied().unwrap_or(0)
    }

    /// Nodes whose outcomes X-correct `j`.
    pub fn sx(&self, j: Node) -> &[Node] {
        self.sx.get(&j).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Nodes whose outcomes Z-correct `j`.
    pub fn sz(&self, j: Node) -> &[Node] {
        self.sz.get(&j).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_dependencies() {
        let g = BrickworkGraph::build(2, 2).unwrap();
        let flow = compute_flow(&g);
        assert_eq!(flow.f(1), Some(3));
        assert_eq!(flow.f(2), Some(4));
        assert_eq!(flow.f(3), None);
        assert_eq!(flow.sx(3), &[1]);
        assert_eq!(flow.sx(4), &[2]);
        // N(f(2)) = N(4) = {2, 3}, N(f(1)) = N(3) = {1, 4}.
        assert_eq!(flow.sz(3), &[2]);
        assert_eq!(flow.sz(4), &[1]);
        assert!(flow.sx(1).is_empty() && flow.sz(1).is_empty());
        assert_eq!(flow.f_inv(3), Some(1));
        assert_eq!(flow.f_inv(1), None);
    }

    #[test]
    fn two_by_five_dependencies() {
        let g = BrickworkGraph::build(2, 5).unwrap();
        let flow = compute_flow(&g);
        // Node 5 (row 1, column 3): X from 3, Z from 1 and from 4 whose successor 6 is not
        // adjacent to 5, so only the column-1 node contributes.
        assert_eq!(flow.sx(5), &[3]);
        assert_eq!(flow.sz(5), &[1]);
        // Node 7 (row 1, column 4) has a brick edge to 8 = f(6).
        assert_eq!(flow.sz(7), &[3, 6]);
        assert_eq!(flow.order(), &[1, 2, 3, 4, 5, 6, 7, 8]);
    }

    proptest! {
        #[test]
        fn flow_is_well_formed(half in 1usize..4, depth in prop::sample::select(vec![1usize, 2, 5, 9])) {
            let g = BrickworkGraph::build(2 * half, depth).unwrap();
            let flow = compute_flow(&g);
            let mut seen = std::collections::BTreeSet::new();
            for j in g.measured() {
                let fj = flow.f(j).unwrap();
                prop_assert!(seen.insert(fj));
                prop_assert_eq!(flow.f_inv(fj), Some(j));
                prop_assert!(flow.layer(fj) > flow.layer(j));
                for k in g.neighbors(fj) {
                    if k != j {
                        prop_assert!(flow.layer(k) >= flow.layer(j));
                    }
                }
            }
            for j in g.nodes() {
                prop_assert!(flow.sx(j).len() <= 1);
                for &i in flow.sz(j) {
                    prop_assert!(flow.layer(i) <= flow.layer(j));
                    prop_assert!(i < j);
                }
            }
        }
    }
}
