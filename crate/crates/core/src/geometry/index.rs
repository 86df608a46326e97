//! Uniform grid over bounding boxes, used as a filter before exact tests.

use super::BBox;

/// Boxes bucketed into a dense grid stored as offsets into one index array.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell: f64,
    origin: (f64, f64),
    nx: i64,
    ny: i64,
    starts: Vec<u32>,
    items: Vec<u32>,
    boxes: Vec<BBox>,
}

impl GridIndex {
    /// Indexes the boxes; empty boxes are skipped. The cell side is the mean
    /// box extent, enlarged so the grid has at most about four cells per box.
    pub fn new(boxes: Vec<BBox>) -> Self {
        let mut all = BBox::empty();
        let mut ext = 0.0;
        let mut live = 0usize;
        for b in boxes.iter().filter(|b| !b.is_empty()) {
            all = all.merge(b);
            ext += b.width().max(b.height());
            live += 1;
        }
        let (w, h) = if live == 0 { (0.0, 0.0) } else { (all.width(), all.height()) };
        let mean = if live == 0 { 1.0 } else { ext / live as f64 };
        let mut cell = if mean > 0.0 { mean } else { w.max(h).max(1.0) };
        let budget = (4 * live).max(64) as f64;
        if (w / cell + 1.0) * (h / cell + 1.0) > budget {
            // Solve (w/c + 1)(h/c + 1) = budget for c.
            let (a, b, c) = (budget - 1.0, -(w + h), -(w * h));
            cell = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        }
        let origin = if live == 0 { (0.0, 0.0) } else { (all.min_x, all.min_y) };
        let nx = (w / cell).floor() as i64 + 1;
        let ny = (h / cell).floor() as i64 + 1;
        let mut idx = Self { cell, origin, nx, ny, starts: Vec::new(), items: Vec::new(), boxes: Vec::new() };
        let n_cells = (nx * ny) as usize;
        let mut counts = vec![0u32; n_cells + 1];
        let spans: Vec<Option<(i64, i64, i64, i64)>> =
            boxes.iter().map(|b| (!b.is_empty()).then(|| idx.span(b))).collect();
        for &(x0, y0, x1, y1) in spans.iter().flatten() {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    counts[(y * nx + x) as usize + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[n_cells] as usize];
        for (k, sp) in spans.iter().enumerate() {
            if let Some((x0, y0, x1, y1)) = *sp {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let c = (y * nx + x) as usize;
                        items[fill[c] as usize] = k as u32;
                        fill[c] += 1;
                    }
                }
            }
        }
        idx.starts = counts;
        idx.items = items;
        idx.boxes = boxes;
        idx
    }

    /// Cell range of a box, clamped to the grid.
    fn span(&self, b: &BBox) -> (i64, i64, i64, i64) {
        let f = |v: f64, o: f64, n: i64| (((v - o) / self.cell).floor() as i64).clamp(0, n - 1);
        (
            f(b.min_x, self.origin.0, self.nx),
            f(b.min_y, self.origin.1, self.ny),
            f(b.max_x, self.origin.0, self.nx),
            f(b.max_y, self.origin.1, self.ny),
        )
    }

    /// Indices of boxes intersecting `q` (closed), ascending.
    pub fn query(&self, q: &BBox) -> Vec<usize> {
        if q.is_empty() || self.items.is_empty() {
            return Vec::new();
        }
        let (x0, y0, x1, y1) = self.span(q);
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = (y * self.nx + x) as usize;
                let cell = &self.items[self.starts[c] as usize..self.starts[c + 1] as usize];
                out.extend(cell.iter().map(|&k| k as usize).filter(|&k| self.boxes[k].intersects(q)));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}
