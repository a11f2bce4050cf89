//! Fill-reducing ordering by recursive graph bisection with level-structure separators.

const LEAF_SIZE: usize = 64;
const UNSEEN: usize = usize::MAX;

struct Graph<'a> {
    ptr: &'a [usize],
    adj: &'a [usize],
}

impl Graph<'_> {
    fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Dissector<'a> {
    graph: Graph<'a>,
    region: Vec<usize>,
    level: Vec<usize>,
    next_region: usize,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn fresh_region(&mut self, nodes: &[usize]) -> usize {
        let id = self.next_region;
        self.next_region += 1;
        for &v in nodes {
            self.region[v] = id;
        }
        id
    }

    /// Level structure rooted at `root` inside region `id`. Returns the visited nodes
    /// in BFS order and the number of levels; `self.level` holds each node's level.
    fn bfs(&mut self, root: usize, id: usize) -> (Vec<usize>, usize) {
        let mut queue = vec![root];
        self.level[root] = 0;
        let mut head = 0;
        let mut depth = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            let lv = self.level[v];
            depth = depth.max(lv + 1);
            for &w in self.graph.neighbours(v) {
                if self.region[w] == id && self.level[w] == UNSEEN {
                    self.level[w] = lv + 1;
                    queue.push(w);
                }
            }
        }
        (queue, depth)
    }

    fn clear_levels(&mut self, nodes: &[usize]) {
        for &v in nodes {
            self.level[v] = UNSEEN;
        }
    }

    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend(nodes);
            return;
        }
        let id = self.fresh_region(&nodes);

        let (reached, _) = self.bfs(nodes[0], id);
        self.clear_levels(&reached);
        if reached.len() < nodes.len() {
            // Disconnected: split off the component containing nodes[0].
            for &v in &reached {
                self.region[v] = UNSEEN - 1;
            }
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| self.region[v] == id).collect();
            self.dissect(reached);
            self.dissect(rest);
            return;
        }

        // Pseudo-peripheral root.
        let (mut visited, mut depth) = self.bfs(nodes[0], id);
        for _ in 0..8 {
            let far = visited
                .iter()
                .copied()
                .filter(|&v| self.level[v] + 1 == depth)
                .min_by_key(|&v| (self.graph.neighbours(v).len(), v))
                .unwrap();
            self.clear_levels(&visited);
            let (v2, d2) = self.bfs(far, id);
            let improved = d2 > depth;
            visited = v2;
            depth = d2;
            if !improved {
                break;
            }
        }

        if depth < 3 {
            self.clear_levels(&visited);
            self.order.extend(nodes);
            return;
        }

        let mut sizes = vec![0usize; depth];
        for &v in &visited {
            sizes[self.level[v]] += 1;
        }
        let lo = (depth * 3 / 8).max(1);
        let hi = (depth * 5 / 8).min(depth - 2).max(lo);
        let mid = depth / 2;
        let sep_level = (lo..=hi)
            .min_by_key(|&l| (sizes[l], l.abs_diff(mid)))
            .unwrap();

        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut separator = Vec::new();
        for &v in &visited {
            let l = self.level[v];
            if l < sep_level {
                first.push(v);
            } else if l > sep_level {
                second.push(v);
            } else {
                let touches_second = self
                    .graph
                    .neighbours(v)
                    .iter()
                    .any(|&w| self.region[w] == id && self.level[w] == sep_level + 1);
                if touches_second {
                    separator.push(v);
                } else {
                    first.push(v);
                }
            }
        }
        self.clear_levels(&visited);
        self.dissect(first);
        self.dissect(second);
        self.order.extend(separator);
    }
}

/// Nested-dissection permutation of a symmetric sparsity graph.
///
/// `ptr`/`adj` is an adjacency structure in CSR form; self loops are ignored. The
/// result maps new positions to original indices (`perm[new] = old`).
pub fn nested_dissection(n: usize, ptr: &[usize], adj: &[usize]) -> Vec<usize> {
    assert_eq!(ptr.len(), n + 1);
    let mut d = Dissector {
        graph: Graph { ptr, adj },
        region: vec![UNSEEN; n],
        level: vec![UNSEEN; n],
        next_region: 0,
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect());
    debug_assert_eq!(d.order.len(), n);
    d.order
}
