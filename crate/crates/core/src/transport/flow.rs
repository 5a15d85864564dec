//! Dinic max-flow over real capacities.

use std::collections::VecDeque;

const CAP_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    cap: f64,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    level: Vec<i32>,
    next: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], edges: Vec::new(), level: vec![0; nodes], next: vec![0; nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > CAP_EPS && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.adj[u].len() {
            let e = self.adj[u][self.next[u]];
            let Edge { to, cap } = self.edges[e];
            if cap > CAP_EPS && self.level[to] == self.level[u] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > CAP_EPS {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= CAP_EPS {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}
