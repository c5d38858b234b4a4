/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        assert!(len <= u32::MAX as usize, "union-find limited to u32 indices");
        UnionFind {
            parent: (0..len as u32).collect(),
            size: vec![1; len],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Merge the sets of `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }

    /// Dense labels `0..k` numbered by first appearance in index order,
    /// restricted to elements accepted by `keep`. Rejected elements get `None`.
    pub fn dense_labels(&mut self, keep: impl Fn(usize) -> bool) -> (Vec<Option<u32>>, Vec<usize>) {
        let n = self.len();
        let mut root_label = vec![u32::MAX; n];
        let mut labels = vec![None; n];
        let mut sizes = Vec::new();
        for (i, slot) in labels.iter_mut().enumerate() {
            if !keep(i) {
                continue;
            }
            let r = self.find(i);
            if root_label[r] == u32::MAX {
                root_label[r] = sizes.len() as u32;
                sizes.push(0);
            }
            let l = root_label[r];
            *slot = Some(l);
            sizes[l as usize] += 1;
        }
        (labels, sizes)
    }
}
