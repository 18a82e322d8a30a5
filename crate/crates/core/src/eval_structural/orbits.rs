//! Per-node counts of the 15 automorphism orbits of connected graphlets on
//! two to four nodes, in the usual numbering:
//!
//! | orbit | graphlet | position |
//! |---|---|---|
//! | 0 | edge | either end |
//! | 1, 2 | path on 3 | end, middle |
//! | 3 | triangle | any |
//! | 4, 5 | path on 4 | end, inner |
//! | 6, 7 | star on 4 | leaf, center |
//! | 8 | 4-cycle | any |
//! | 9, 10, 11 | triangle with a pendant | pendant, far triangle vertex, attachment vertex |
//! | 12, 13 | 4-clique minus an edge | degree 2, degree 3 |
//! | 14 | 4-clique | any |
//!
//! Counts refer to induced subgraphs. Each node first gets the number of
//! (not necessarily induced) copies of every 4-node graphlet through it,
//! built from degrees and common-neighbor counts, and the induced counts
//! follow by peeling off denser graphlets that contain each pattern.

use rayon::prelude::*;

use crate::graphdata::AttributedGraph;

pub const NUM_ORBITS: usize = 15;

/// Size of the intersection of two sorted lists.
pub(crate) fn intersect_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Common-neighbor count of every edge, aligned with each neighbor list.
pub(crate) fn edge_common_neighbors(g: &AttributedGraph) -> Vec<Vec<u64>> {
    (0..g.n())
        .into_par_iter()
        .map(|v| {
            let nv = g.neighbors(v);
            nv.iter()
                .map(|&u| intersect_count(nv, g.neighbors(u)) as u64)
                .collect()
        })
        .collect()
}

/// Triangles through each node.
pub fn node_triangles(g: &AttributedGraph) -> Vec<u64> {
    edge_common_neighbors(g)
        .iter()
        .map(|cn| cn.iter().sum::<u64>() / 2)
        .collect()
}

fn choose2(x: i64) -> i64 {
    x * (x - 1) / 2
}

fn choose3(x: i64) -> i64 {
    x * (x - 1) * (x - 2) / 6
}

struct Scratch {
    common: Vec<u32>,
    touched: Vec<usize>,
    mark: Vec<bool>,
}

pub fn orbit_counts(g: &AttributedGraph) -> Vec<[u64; NUM_ORBITS]> {
    let n = g.n();
    let deg: Vec<i64> = (0..n).map(|v| g.degree(v) as i64).collect();
    let cn = edge_common_neighbors(g);
    let tri: Vec<i64> = cn
        .iter()
        .map(|c| (c.iter().sum::<u64>() / 2) as i64)
        .collect();
    // walks v-a-b with b != v, per v
    let s: Vec<i64> = (0..n)
        .map(|v| g.neighbors(v).iter().map(|&a| deg[a] - 1).sum())
        .collect();
    (0..n)
        .into_par_iter()
        .map_init(
            || Scratch {
                common: vec![0; n],
                touched: Vec::new(),
                mark: vec![false; n],
            },
            |sc, v| {
                let nv = g.neighbors(v);
                let (d, t) = (deg[v], tri[v]);

                for &a in nv {
                    for &b in g.neighbors(a) {
                        if b != v {
                            if sc.common[b] == 0 {
                                sc.touched.push(b);
                            }
                            sc.common[b] += 1;
                        }
                    }
                }
                let mut n8 = 0;
                for &b in &sc.touched {
                    n8 += choose2(sc.common[b] as i64);
                    sc.common[b] = 0;
                }
                sc.touched.clear();

                nv.iter().for_each(|&x| sc.mark[x] = true);
                let (mut n4, mut n6, mut n9, mut n10, mut n12, mut n13, mut n14) =
                    (0, 0, 0, 0, 0, 0, 0);
                for (i, &x) in nv.iter().enumerate() {
                    let c = cn[v][i] as i64;
                    n4 += s[x] - (d - 1);
                    n6 += choose2(deg[x] - 1);
                    n9 += tri[x] - c;
                    n10 += c * (deg[x] - 2);
                    n13 += choose2(c);
                    let nx = g.neighbors(x);
                    for (j, &w) in nx.iter().enumerate() {
                        if w <= x || !sc.mark[w] {
                            continue;
                        }
                        n12 += cn[x][j] as i64 - 1;
                        let nw = g.neighbors(w);
                        let (mut p, mut q) = (0, 0);
                        while p < nx.len() && q < nw.len() {
                            match nx[p].cmp(&nw[q]) {
                                std::cmp::Ordering::Less => p += 1,
                                std::cmp::Ordering::Greater => q += 1,
                                std::cmp::Ordering::Equal => {
                                    let z = nx[p];
                                    if z > w && sc.mark[z] {
                                        n14 += 1;
                                    }
                                    p += 1;
                                    q += 1;
                                }
                            }
                        }
                    }
                }
                nv.iter().for_each(|&x| sc.mark[x] = false);
                n4 -= 2 * t;
                let n5 = (d - 1) * s[v] - 2 * t;
                let n7 = choose3(d);
                let n11 = t * (d - 2);

                let o14 = n14;
                let o13 = n13 - 3 * o14;
                let o12 = n12 - 3 * o14;
                let o11 = n11 - 2 * o13 - 3 * o14;
                let o10 = n10 - 2 * o12 - 2 * o13 - 6 * o14;
                let o9 = n9 - 2 * o12 - 3 * o14;
                let o8 = n8 - o12 - o13 - 3 * o14;
                let o7 = n7 - o11 - o13 - o14;
                let o6 = n6 - o9 - o10 - 2 * o12 - o13 - 3 * o14;
                let o5 = n5 - 2 * o8 - o10 - 2 * o11 - 2 * o12 - 4 * o13 - 6 * o14;
                let o4 = n4 - 2 * o8 - 2 * o9 - o10 - 4 * o12 - 2 * o13 - 6 * o14;
                let o = [
                    d,
                    s[v] - 2 * t,
                    choose2(d) - t,
                    t,
                    o4,
                    o5,
                    o6,
                    o7,
                    o8,
                    o9,
                    o10,
                    o11,
                    o12,
                    o13,
                    o14,
                ];
                debug_assert!(
                    o.iter().all(|&x| x >= 0),
                    "negative orbit count at node {v}: {o:?}"
                );
                o.map(|x| x as u64)
            },
        )
        .collect()
}
