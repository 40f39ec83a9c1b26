use super::AnalyticsError;

/// One agglomeration step. Leaves are clusters `0..n`; the cluster formed
/// at step `s` gets id `n + s`. `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub step: usize,
    pub a: usize,
    pub b: usize,
    /// Increase in total within-cluster sum of squares.
    pub cost: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels after the first `n - k` merges, numbered densely in order of
    /// each cluster's smallest leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, AnalyticsError> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(AnalyticsError::BadK { k, n });
        }
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for m in &self.merges[..n - k] {
            let id = n + m.step;
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = id;
            parent[rb] = id;
        }
        let mut dense = vec![usize::MAX; 2 * n];
        let mut next = 0;
        let mut labels = Vec::with_capacity(n);
        for leaf in 0..n {
            let r = find(&mut parent, leaf);
            if dense[r] == usize::MAX {
                dense[r] = next;
                next += 1;
            }
            labels.push(dense[r]);
        }
        Ok(labels)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,a,b,cost,size\n");
        for m in &self.merges {
            s.push_str(&format!("{},{},{},{},{}\n", m.step, m.a, m.b, m.cost, m.size));
        }
        s
    }
}

/// Ward merge cost between clusters of sizes `na`, `nb` with centroids
/// `ca`, `cb`.
pub(crate) fn ward_cost(na: usize, ca: &[f64], nb: usize, cb: &[f64]) -> f64 {
    let d2: f64 = ca.iter().zip(cb).map(|(x, y)| (x - y) * (x - y)).sum();
    (na * nb) as f64 / (na + nb) as f64 * d2
}

/// `(cost, lo, hi)` ordering: smaller cost first, then the smaller id pair.
fn better(c: f64, p: (usize, usize), best_c: f64, best_p: (usize, usize)) -> bool {
    c < best_c || (c == best_c && p < best_p)
}

fn pair(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

/// Full Ward dendrogram of the rows of `x` (Euclidean). Each active
/// cluster caches its nearest neighbour; only clusters whose neighbour was
/// merged away are rescanned.
pub fn ward_linkage(x: &[Vec<f64>]) -> Result<Dendrogram, AnalyticsError> {
    let n = x.len();
    if n == 0 {
        return Err(AnalyticsError::EmptyInput);
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(AnalyticsError::DimensionMismatch);
    }
    let total = 2 * n - 1;
    let mut centroid: Vec<Vec<f64>> = Vec::with_capacity(total);
    centroid.extend(x.iter().cloned());
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_cost = vec![f64::INFINITY; n];

    let scan = |i: usize, active: &[usize], centroid: &[Vec<f64>], size: &[usize]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for &j in active {
            if j == i {
                continue;
            }
            let c = ward_cost(size[i], &centroid[i], size[j], &centroid[j]);
            if best.1 == usize::MAX || better(c, pair(i, j), best.0, pair(i, best.1)) {
                best = (c, j);
            }
        }
        best
    };

    for i in 0..n {
        let (c, j) = scan(i, &active, &centroid, &size);
        nn_cost[i] = c;
        nn[i] = j;
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize))> = None;
        for &i in &active {
            let p = pair(i, nn[i]);
            if best.is_none_or(|(c, bp)| better(nn_cost[i], p, c, bp)) {
                best = Some((nn_cost[i], p));
            }
        }
        let (cost, (a, b)) = best.expect("at least two active clusters");
        let id = n + step;
        let (na, nb) = (size[a], size[b]);
        let c: Vec<f64> = centroid[a]
            .iter()
            .zip(&centroid[b])
            .map(|(u, v)| (na as f64 * u + nb as f64 * v) / (na + nb) as f64)
            .collect();
        centroid.push(c);
        size.push(na + nb);
        nn.push(usize::MAX);
        nn_cost.push(f64::INFINITY);
        active.retain(|&i| i != a && i != b);
        merges.push(Merge {
            step,
            a,
            b,
            cost,
            size: na + nb,
        });
        if active.is_empty() {
            break;
        }

        let mut best_new = (f64::INFINITY, usize::MAX);
        let mut stale = Vec::new();
        for &k in &active {
            let ck = ward_cost(size[k], &centroid[k], size[id], &centroid[id]);
            if best_new.1 == usize::MAX || better(ck, pair(id, k), best_new.0, pair(id, best_new.1)) {
                best_new = (ck, k);
            }
            if nn[k] == a || nn[k] == b {
                stale.push(k);
            } else if better(ck, pair(k, id), nn_cost[k], pair(k, nn[k])) {
                nn[k] = id;
                nn_cost[k] = ck;
            }
        }
        nn[id] = best_new.1;
        nn_cost[id] = best_new.0;
        active.push(id);
        for k in stale {
            let (c, j) = scan(k, &active, &centroid, &size);
            nn[k] = j;
            nn_cost[k] = c;
        }
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

/// Exhaustive reference: every step evaluates all active pairs with
/// centroids recomputed from member points.
pub fn ward_linkage_reference(x: &[Vec<f64>]) -> Result<Dendrogram, AnalyticsError> {
    let n = x.len();
    if n == 0 {
        return Err(AnalyticsError::EmptyInput);
    }
    let dim = x[0].len();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mean = |m: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for &i in m {
            for (s, v) in c.iter_mut().zip(&x[i]) {
                *s += v;
            }
        }
        c.iter().map(|s| s / m.len() as f64).collect()
    };
    let mut merges = Vec::new();
    for step in 0..n - 1 {
        let live: Vec<usize> = (0..members.len()).filter(|&i| members[i].is_some()).collect();
        let cents: Vec<Vec<f64>> = live.iter().map(|&i| mean(members[i].as_ref().unwrap())).collect();
        let mut best: Option<(f64, (usize, usize))> = None;
        for (p, &i) in live.iter().enumerate() {
            for (q, &j) in live.iter().enumerate().skip(p + 1) {
                let (ni, nj) = (members[i].as_ref().unwrap().len(), members[j].as_ref().unwrap().len());
                let c = ward_cost(ni, &cents[p], nj, &cents[q]);
                if best.is_none_or(|(bc, bp)| better(c, (i, j), bc, bp)) {
                    best = Some((c, (i, j)));
                }
            }
        }
        let (cost, (a, b)) = best.unwrap();
        let mut m = members[a].take().unwrap();
        m.extend(members[b].take().unwrap());
        merges.push(Merge {
            step,
            a,
            b,
            cost,
            size: m.len(),
        });
        members.push(Some(m));
    }
    Ok(Dendrogram { n_leaves: n, merges })
}
