//! Floating-point arrangement overlay.
//!
//! Input rings are noded against each other (shared vertices snapped within a
//! small tolerance, crossings and T-junctions split), coincident pieces merged
//! into unique segments, and every segment labelled with the winding-based
//! inside/outside state of each operand on its two sides. Boolean results are
//! then read off by selecting the segments whose two sides disagree.

use std::collections::HashMap;

use super::{cross, BBox, Point, Polygon, Region, Ring};

const MAX_OPERANDS: usize = 2;

pub(crate) enum Operand<'a> {
    Rings(&'a [Ring]),
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: u32,
    b: u32,
    op: u8,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Seg {
    pub lo: u32,
    pub hi: u32,
    /// Bit k set when operand k covers the left side of `lo -> hi`.
    pub left: u8,
    pub right: u8,
}

pub(crate) struct Arrangement {
    pub verts: Vec<Point>,
    pub segs: Vec<Seg>,
    tol: f64,
    origin: Point,
}

struct VertexPool {
    pts: Vec<Point>,
    grid: HashMap<(i64, i64), Vec<u32>>,
    cell: f64,
    tol: f64,
}

impl VertexPool {
    fn new(tol: f64) -> Self {
        Self {
            pts: Vec::new(),
            grid: HashMap::new(),
            cell: tol,
            tol,
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point) -> u32 {
        let (kx, ky) = self.key(p);
        let tol2 = self.tol * self.tol;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        let q = self.pts[id as usize];
                        let (ex, ey) = (q.x - p.x, q.y - p.y);
                        if ex * ex + ey * ey <= tol2 {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.pts.len() as u32;
        self.pts.push(p);
        self.grid.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn on_segment(v: Point, p: Point, q: Point, tol: f64) -> bool {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let l2 = dx * dx + dy * dy;
    if l2 == 0.0 {
        return false;
    }
    let t = ((v.x - p.x) * dx + (v.y - p.y) * dy) / l2;
    if t <= 0.0 || t >= 1.0 {
        return false;
    }
    cross(p, q, v).abs() <= tol * l2.sqrt()
}

fn param(v: Point, p: Point, q: Point) -> f64 {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    ((v.x - p.x) * dx + (v.y - p.y) * dy) / (dx * dx + dy * dy)
}

fn node_edges(mut edges: Vec<Edge>, pool: &mut VertexPool) -> Vec<Edge> {
    let tol = pool.tol;
    for _ in 0..24 {
        let n = edges.len();
        let boxes: Vec<BBox> = edges
            .iter()
            .map(|e| {
                let mut b = BBox::empty();
                b.add(pool.pts[e.a as usize]);
                b.add(pool.pts[e.b as usize]);
                b.expand(tol)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| boxes[i].min_x.total_cmp(&boxes[j].min_x));
        let mut splits: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut active: Vec<usize> = Vec::new();
        let mut changed = false;
        for &i in &order {
            let bi = boxes[i];
            active.retain(|&j| boxes[j].max_x >= bi.min_x);
            for &j in &active {
                let bj = boxes[j];
                if bj.max_y < bi.min_y || bi.max_y < bj.min_y {
                    continue;
                }
                changed |= interact(&edges, i, j, pool, &mut splits);
            }
            active.push(i);
        }
        if !changed {
            break;
        }
        let mut next = Vec::with_capacity(n + n / 2);
        for (i, e) in edges.iter().enumerate() {
            if splits[i].is_empty() {
                next.push(*e);
                continue;
            }
            let (p, q) = (pool.pts[e.a as usize], pool.pts[e.b as usize]);
            let mut s = std::mem::take(&mut splits[i]);
            s.sort_by(|&u, &v| {
                param(pool.pts[u as usize], p, q).total_cmp(&param(pool.pts[v as usize], p, q))
            });
            s.dedup();
            let mut prev = e.a;
            for v in s.into_iter().chain(std::iter::once(e.b)) {
                if v != prev {
                    next.push(Edge { a: prev, b: v, op: e.op });
                    prev = v;
                }
            }
        }
        edges = next;
    }
    edges
}

fn interact(edges: &[Edge], i: usize, j: usize, pool: &mut VertexPool, splits: &mut [Vec<u32>]) -> bool {
    let tol = pool.tol;
    let (ei, ej) = (edges[i], edges[j]);
    let (a, b, c, d) = (ei.a, ei.b, ej.a, ej.b);
    if (a == c && b == d) || (a == d && b == c) {
        return false;
    }
    let (pa, pb) = (pool.pts[a as usize], pool.pts[b as usize]);
    let (pc, pd) = (pool.pts[c as usize], pool.pts[d as usize]);
    let mut touched = false;
    for v in [c, d] {
        if v != a && v != b && on_segment(pool.pts[v as usize], pa, pb, tol) {
            splits[i].push(v);
            touched = true;
        }
    }
    for v in [a, b] {
        if v != c && v != d && on_segment(pool.pts[v as usize], pc, pd, tol) {
            splits[j].push(v);
            touched = true;
        }
    }
    if touched || a == c || a == d || b == c || b == d {
        return touched;
    }
    let o1 = cross(pa, pb, pc);
    let o2 = cross(pa, pb, pd);
    let o3 = cross(pc, pd, pa);
    let o4 = cross(pc, pd, pb);
    if o1 == 0.0 || o2 == 0.0 || o3 == 0.0 || o4 == 0.0 {
        return false;
    }
    if (o1 > 0.0) == (o2 > 0.0) || (o3 > 0.0) == (o4 > 0.0) {
        return false;
    }
    let t = o1 / (o1 - o2);
    let u = o3 / (o3 - o4);
    let p1 = Point::new(pc.x + t * (pd.x - pc.x), pc.y + t * (pd.y - pc.y));
    let p2 = Point::new(pa.x + u * (pb.x - pa.x), pa.y + u * (pb.y - pa.y));
    let p = Point::new(0.5 * (p1.x + p2.x), 0.5 * (p1.y + p2.y));
    let id = pool.insert(p);
    let mut any = false;
    if id != a && id != b {
        splits[i].push(id);
        any = true;
    }
    if id != c && id != d {
        splits[j].push(id);
        any = true;
    }
    any
}

/// Segments bucketed along one axis for ray-crossing queries.
struct Buckets {
    lo: f64,
    inv: f64,
    lists: Vec<Vec<u32>>,
}

impl Buckets {
    fn build(ranges: &[(f64, f64)]) -> Self {
        let n = ranges.len();
        let lo = ranges.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let hi = ranges.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let count = ((n as f64).sqrt().ceil() as usize * 2).clamp(1, 4096);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let inv = count as f64 / span;
        let mut lists = vec![Vec::new(); count];
        for (k, r) in ranges.iter().enumerate() {
            let b0 = (((r.0 - lo) * inv) as usize).min(count - 1);
            let b1 = (((r.1 - lo) * inv) as usize).min(count - 1);
            for l in &mut lists[b0..=b1] {
                l.push(k as u32);
            }
        }
        Self { lo, inv, lists }
    }

    fn get(&self, v: f64) -> &[u32] {
        let k = (((v - self.lo) * self.inv).max(0.0) as usize).min(self.lists.len() - 1);
        &self.lists[k]
    }
}

#[inline]
fn frame(p: Point, rot: bool) -> (f64, f64) {
    if rot {
        (p.y, -p.x)
    } else {
        (p.x, p.y)
    }
}

impl Arrangement {
    pub fn build(operands: &[Operand<'_>]) -> Self {
        assert!(operands.len() <= MAX_OPERANDS);
        let mut bb = BBox::empty();
        for Operand::Rings(rs) in operands {
            for r in rs.iter() {
                for p in r.points() {
                    bb.add(*p);
                }
            }
        }
        let tol = (1e-12 * bb.diagonal() + 64.0 * f64::EPSILON * bb.max_abs()).max(f64::MIN_POSITIVE);
        let mut pool = VertexPool::new(tol);
        let mut edges = Vec::new();
        for (k, Operand::Rings(rs)) in operands.iter().enumerate() {
            for r in rs.iter() {
                let ids: Vec<u32> = r.points().iter().map(|p| pool.insert(*p)).collect();
                let n = ids.len();
                for i in 0..n {
                    let (a, b) = (ids[i], ids[(i + 1) % n]);
                    if a != b {
                        edges.push(Edge { a, b, op: k as u8 });
                    }
                }
            }
        }
        let edges = node_edges(edges, &mut pool);

        let mut net: HashMap<(u32, u32), [i32; MAX_OPERANDS]> = HashMap::new();
        for e in &edges {
            let (key, s) = if e.a < e.b { ((e.a, e.b), 1) } else { ((e.b, e.a), -1) };
            net.entry(key).or_insert([0; MAX_OPERANDS])[e.op as usize] += s;
        }
        let mut uniq: Vec<((u32, u32), [i32; MAX_OPERANDS])> =
            net.into_iter().filter(|(_, c)| c.iter().any(|&v| v != 0)).collect();
        uniq.sort_unstable_by_key(|(k, _)| *k);

        let verts = pool.pts;
        let origin = if bb.is_empty() { Point::new(0.0, 0.0) } else { Point::new(bb.min_x, bb.min_y) };
        let segs = label(&verts, &uniq, operands.len());
        Self { verts, segs, tol, origin }
    }

    /// Area of the region selected by `f` over the per-side operand masks.
    pub fn area(&self, f: impl Fn(u8) -> bool) -> f64 {
        let o = self.origin;
        let mut s = 0.0;
        for g in &self.segs {
            let (l, r) = (f(g.left), f(g.right));
            if l == r {
                continue;
            }
            let c = cross(o, self.verts[g.lo as usize], self.verts[g.hi as usize]);
            s += if l { c } else { -c };
        }
        0.5 * s
    }

    /// True when some vertex or segment lies on the boundary of both operands.
    pub fn boundaries_meet(&self) -> bool {
        let mut marks: HashMap<u32, u8> = HashMap::new();
        for g in &self.segs {
            let b = g.left ^ g.right;
            if b == 0 {
                continue;
            }
            if b & 3 == 3 {
                return true;
            }
            for v in [g.lo, g.hi] {
                let m = marks.entry(v).or_insert(0);
                *m |= b;
                if *m & 3 == 3 {
                    return true;
                }
            }
        }
        false
    }

    /// Builds the normalized region selected by `f`.
    pub fn extract(&self, f: impl Fn(u8) -> bool, area_epsilon: f64) -> Region {
        // Directed boundary edges with the selected side on the left.
        let mut dir: Vec<(u32, u32)> = Vec::new();
        for g in &self.segs {
            let (l, r) = (f(g.left), f(g.right));
            if l == r {
                continue;
            }
            dir.push(if l { (g.lo, g.hi) } else { (g.hi, g.lo) });
        }
        if dir.is_empty() {
            return Region::empty();
        }
        let mut out: HashMap<u32, Vec<usize>> = HashMap::new();
        for (k, e) in dir.iter().enumerate() {
            out.entry(e.0).or_default().push(k);
        }
        let succ = |e: usize| -> Option<usize> {
            let (u, v) = dir[e];
            let pv = self.verts[v as usize];
            let pu = self.verts[u as usize];
            let back = (pu.x - pv.x, pu.y - pv.y);
            let cands = out.get(&v)?;
            let mut best: Option<(f64, usize)> = None;
            for &o in cands {
                let pw = self.verts[dir[o].1 as usize];
                let d = (pw.x - pv.x, pw.y - pv.y);
                let ccw = (back.0 * d.1 - back.1 * d.0).atan2(back.0 * d.0 + back.1 * d.1);
                let mut cw = -ccw;
                if cw <= 0.0 {
                    cw += std::f64::consts::TAU;
                }
                if best.is_none_or(|(b, _)| cw < b) {
                    best = Some((cw, o));
                }
            }
            best.map(|b| b.1)
        };
        let mut used = vec![false; dir.len()];
        let mut cycles: Vec<Vec<u32>> = Vec::new();
        for start in 0..dir.len() {
            if used[start] {
                continue;
            }
            let mut seq = Vec::new();
            let mut e = start;
            let mut ok = false;
            for _ in 0..=dir.len() {
                if used[e] {
                    ok = e == start;
                    break;
                }
                used[e] = true;
                seq.push(dir[e].0);
                match succ(e) {
                    Some(n) => e = n,
                    None => break,
                }
            }
            if ok {
                cycles.extend(split_pinches(seq));
            }
        }

        let mut outers: Vec<(Ring, f64)> = Vec::new();
        let mut holes: Vec<Ring> = Vec::new();
        for c in cycles {
            let pts = simplify(c.iter().map(|&v| self.verts[v as usize]).collect(), self.tol);
            if pts.len() < 3 {
                continue;
            }
            let ring = Ring::new(pts);
            let a = ring.signed_area();
            if a.abs() <= area_epsilon {
                continue;
            }
            if a > 0.0 {
                outers.push((ring, a));
            } else {
                holes.push(ring);
            }
        }
        let mut polys: Vec<Polygon> = outers
            .iter()
            .map(|(r, _)| Polygon { exterior: r.clone(), holes: Vec::new() })
            .collect();
        for h in holes {
            let p = h.points();
            let probe = Point::new(0.5 * (p[0].x + p[1].x), 0.5 * (p[0].y + p[1].y));
            let mut best: Option<(f64, usize)> = None;
            for (k, (r, a)) in outers.iter().enumerate() {
                if best.is_none_or(|(b, _)| *a < b) && r.contains_point(probe) {
                    best = Some((*a, k));
                }
            }
            if let Some((_, k)) = best {
                polys[k].holes.push(h);
            }
        }
        Region::canonicalize(polys)
    }
}

fn label(verts: &[Point], uniq: &[((u32, u32), [i32; MAX_OPERANDS])], nops: usize) -> Vec<Seg> {
    let n = uniq.len();
    let brute = n <= 48;
    let mut xr = Vec::with_capacity(n);
    let mut yr = Vec::with_capacity(n);
    for ((lo, hi), _) in uniq {
        let (p, q) = (verts[*lo as usize], verts[*hi as usize]);
        yr.push((p.y.min(q.y), p.y.max(q.y)));
        // Rotated frame uses y' = -x.
        xr.push((-(p.x.max(q.x)), -(p.x.min(q.x))));
    }
    let (by, bx) = if brute {
        (None, None)
    } else {
        (Some(Buckets::build(&yr)), Some(Buckets::build(&xr)))
    };
    let all: Vec<u32> = (0..n as u32).collect();
    let mut segs = Vec::with_capacity(n);
    for (s, ((lo, hi), cnt)) in uniq.iter().enumerate() {
        let (p, q) = (verts[*lo as usize], verts[*hi as usize]);
        let rot = (q.x - p.x).abs() > (q.y - p.y).abs();
        let (px, py) = frame(p, rot);
        let (qx, qy) = frame(q, rot);
        let (mx, my) = (0.5 * (px + qx), 0.5 * (py + qy));
        let cands: &[u32] = match (rot, &by, &bx) {
            (false, Some(b), _) => b.get(my),
            (true, _, Some(b)) => b.get(my),
            _ => &all,
        };
        let mut w = [0i32; MAX_OPERANDS];
        for &t in cands {
            let t = t as usize;
            if t == s {
                continue;
            }
            let ((tl, th), tc) = &uniq[t];
            let (ax, ay) = frame(verts[*tl as usize], rot);
            let (bx_, by_) = frame(verts[*th as usize], rot);
            if (ay > my) == (by_ > my) {
                continue;
            }
            let xc = ax + (my - ay) * (bx_ - ax) / (by_ - ay);
            if xc > mx {
                let sign = if by_ > ay { 1 } else { -1 };
                for k in 0..nops {
                    w[k] += sign * tc[k];
                }
            }
        }
        let (mut left, mut right) = (0u8, 0u8);
        for k in 0..nops {
            let (wl, wr) = if qy > py { (w[k] + cnt[k], w[k]) } else { (w[k], w[k] - cnt[k]) };
            if wl != 0 {
                left |= 1 << k;
            }
            if wr != 0 {
                right |= 1 << k;
            }
        }
        segs.push(Seg { lo: *lo, hi: *hi, left, right });
    }
    segs
}

fn split_pinches(seq: Vec<u32>) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut stack: Vec<u32> = Vec::with_capacity(seq.len());
    let mut pos: HashMap<u32, usize> = HashMap::new();
    for v in seq {
        if let Some(&i) = pos.get(&v) {
            let ring: Vec<u32> = stack.drain(i..).collect();
            for u in &ring {
                pos.remove(u);
            }
            out.push(ring);
        }
        pos.insert(v, stack.len());
        stack.push(v);
    }
    if !stack.is_empty() {
        out.push(stack);
    }
    out
}

/// Drops vertices that are collinear with their neighbours within `tol`.
fn simplify(mut pts: Vec<Point>, tol: f64) -> Vec<Point> {
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut keep = vec![true; n];
        let mut removed = false;
        let mut i = 0;
        while i < n {
            let prev = (0..n).rev().map(|k| (i + k) % n).find(|&k| k != i && keep[k]);
            let next = (1..n).map(|k| (i + k) % n).find(|&k| keep[k]);
            if let (Some(a), Some(b)) = (prev, next) {
                let (pa, pb) = (pts[a], pts[b]);
                let len = ((pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2)).sqrt();
                if a != b && cross(pa, pts[i], pb).abs() <= tol * len.max(tol) {
                    keep[i] = false;
                    removed = true;
                }
            }
            i += 1;
        }
        if !removed {
            return pts;
        }
        pts = pts.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
    }
}
