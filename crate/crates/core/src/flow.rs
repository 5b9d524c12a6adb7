//! Edmonds-Karp maximum flow over an arbitrary [`Scalar`].
//!
//! Shortest augmenting paths keep the iteration count polynomial for real and
//! rational capacities alike. Edges are explored in insertion order, so the
//! resulting flow is a deterministic function of the construction order.

use std::collections::VecDeque;

use crate::scalar::Scalar;

pub struct FlowNetwork<S> {
    adjacency: Vec<Vec<usize>>,
    head: Vec<usize>,
    residual: Vec<S>,
    capacity: Vec<S>,
}

impl<S: Scalar> FlowNetwork<S> {
    pub fn new(nodes: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); nodes],
            head: Vec::new(),
            residual: Vec::new(),
            capacity: Vec::new(),
        }
    }

    /// Adds `from -> to` and returns its id; the reverse arc is `id ^ 1`.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: S) -> usize {
        let id = self.head.len();
        self.adjacency[from].push(id);
        self.head.push(to);
        self.residual.push(capacity.clone());
        self.capacity.push(capacity);
        self.adjacency[to].push(id + 1);
        self.head.push(from);
        self.residual.push(S::zero());
        self.capacity.push(S::zero());
        id
    }

    pub fn flow(&self, edge: usize) -> S {
        self.capacity[edge].clone() - self.residual[edge].clone()
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> S {
        let mut total = S::zero();
        let nodes = self.adjacency.len();
        loop {
            let mut via: Vec<Option<usize>> = vec![None; nodes];
            let mut seen = vec![false; nodes];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.adjacency[u] {
                    let v = self.head[e];
                    if !seen[v] && !self.residual[e].is_negligible() && self.residual[e].gt_zero() {
                        seen[v] = true;
                        via[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut bottleneck: Option<S> = None;
            let mut v = sink;
            while let Some(e) = via[v] {
                let r = &self.residual[e];
                bottleneck = Some(match bottleneck {
                    Some(b) if b <= *r => b,
                    _ => r.clone(),
                });
                v = self.head[e ^ 1];
            }
            let push = bottleneck.expect("augmenting path has at least one arc");
            let mut v = sink;
            while let Some(e) = via[v] {
                self.residual[e] = self.residual[e].clone() - push.clone();
                self.residual[e ^ 1] = self.residual[e ^ 1].clone() + push.clone();
                v = self.head[e ^ 1];
            }
            total = total + push;
        }
    }

    /// Nodes reachable from `source` in the residual graph (the source side
    /// of a minimum cut once `max_flow` has run).
    pub fn residual_reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        seen[source] = true;
        let mut stack = vec![source];
        while let Some(u) = stack.pop() {
            for &e in &self.adjacency[u] {
                let v = self.head[e];
                if !seen[v] && !self.residual[e].is_negligible() && self.residual[e].gt_zero() {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn classic_network() {
        // CLRS figure 26.1, max flow 23
        let mut g = FlowNetwork::<f64>::new(6);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23.0);
        let cut = g.residual_reachable(0);
        assert!(cut[0] && !cut[5]);
    }

    #[test]
    fn rational_capacities_are_exact() {
        let mut g = FlowNetwork::<Rational>::new(4);
        let third = Rational::from_ratio(1, 3);
        g.add_edge(0, 1, third.clone());
        g.add_edge(0, 2, third.clone());
        g.add_edge(1, 3, Rational::from_ratio(1, 2));
        g.add_edge(2, 3, Rational::from_ratio(1, 7));
        assert_eq!(g.max_flow(0, 3), Rational::from_ratio(1, 3) + Rational::from_ratio(1, 7));
    }
}
