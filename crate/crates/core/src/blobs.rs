//! Connected components of motion masks and target selection.

use crate::temporal::BitGrid;

pub const DEFAULT_MIN_AREA: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i64, i64); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && py >= self.y as f64
            && px <= (self.x + self.w - 1) as f64
            && py <= (self.y + self.h - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub area: usize,
    pub bbox: BoundingBox,
    /// Mean pixel coordinate `(cx, cy)`.
    pub centroid: (f64, f64),
}

/// Component label per pixel (0 = background, labels start at 1) together
/// with one blob per label. Labels follow row-major discovery order; blobs
/// are sorted by descending area, then leftmost, then topmost.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub blobs: Vec<Blob>,
}

struct Accum {
    area: usize,
    sum_x: u64,
    sum_y: u64,
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

pub fn label_map(mask: &BitGrid, connectivity: Connectivity) -> Labeling {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut accums: Vec<Accum> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if bits[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = accums.len() as u32 + 1;
        let mut acc = Accum {
            area: 0,
            sum_x: 0,
            sum_y: 0,
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            acc.area += 1;
            acc.sum_x += x as u64;
            acc.sum_y += y as u64;
            acc.x0 = acc.x0.min(x);
            acc.y0 = acc.y0.min(y);
            acc.x1 = acc.x1.max(x);
            acc.y1 = acc.y1.max(y);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bits[j] != 0 && labels[j] == 0 {
                    labels[j] = label;
                    stack.push(j);
                }
            }
        }
        accums.push(acc);
    }
    let mut blobs: Vec<Blob> = accums
        .into_iter()
        .map(|a| Blob {
            area: a.area,
            bbox: BoundingBox {
                x: a.x0,
                y: a.y0,
                w: a.x1 - a.x0 + 1,
                h: a.y1 - a.y0 + 1,
            },
            centroid: (
                a.sum_x as f64 / a.area as f64,
                a.sum_y as f64 / a.area as f64,
            ),
        })
        .collect();
    blobs.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.bbox.x.cmp(&b.bbox.x))
            .then(a.bbox.y.cmp(&b.bbox.y))
    });
    Labeling { labels, blobs }
}

pub fn label_components(mask: &BitGrid, connectivity: Connectivity) -> Vec<Blob> {
    label_map(mask, connectivity).blobs
}

pub fn suppress_small(blobs: Vec<Blob>, min_area: usize) -> Vec<Blob> {
    blobs.into_iter().filter(|b| b.area >= min_area).collect()
}

/// The largest blob; on equal area the one whose box starts further left.
pub fn primary_target(blobs: &[Blob]) -> Option<&Blob> {
    blobs.iter().reduce(|best, b| {
        if b.area > best.area || (b.area == best.area && b.bbox.x < best.bbox.x) {
            b
        } else {
            best
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blob(area: usize, x: usize) -> Blob {
        Blob {
            area,
            bbox: BoundingBox { x, y: 0, w: 1, h: 1 },
            centroid: (x as f64, 0.0),
        }
    }

    #[test]
    fn empty_mask() {
        assert!(label_components(&BitGrid::zeros(5, 5), Connectivity::Eight).is_empty());
    }

    #[test]
    fn solid_square() {
        let mut bits = vec![0u8; 64];
        for y in 2..5 {
            for x in 2..5 {
                bits[y * 8 + x] = 1;
            }
        }
        let blobs = label_components(&BitGrid::new(8, 8, bits).unwrap(), Connectivity::Four);
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 9);
        assert_eq!(blobs[0].centroid, (3.0, 3.0));
        assert_eq!(blobs[0].bbox, BoundingBox { x: 2, y: 2, w: 3, h: 3 });
    }

    #[test]
    fn diagonal_depends_on_connectivity() {
        let g = BitGrid::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(label_components(&g, Connectivity::Four).len(), 2);
        assert_eq!(label_components(&g, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn suppression_and_target() {
        let blobs = vec![blob(100, 0), blob(5, 1), blob(3, 2)];
        assert_eq!(suppress_small(blobs.clone(), 0), blobs);
        assert_eq!(suppress_small(blobs.clone(), 10), vec![blob(100, 0)]);
        assert_eq!(primary_target(&[]), None);
        let mixed = [blob(40, 0), blob(90, 1), blob(12, 2)];
        assert_eq!(primary_target(&mixed).unwrap().area, 90);
        let tie = [blob(20, 10), blob(20, 3)];
        assert_eq!(primary_target(&tie).unwrap().bbox.x, 3);
    }

    fn grid() -> impl Strategy<Value = BitGrid> {
        (1usize..14, 1usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..2, w * h).prop_map(move |b| BitGrid::new(w, h, b).unwrap())
        })
    }

    fn flipped(g: &BitGrid) -> BitGrid {
        let (w, h) = g.dims();
        let bits = (0..w * h).map(|i| g.bits()[w * h - 1 - i]).collect();
        BitGrid::new(w, h, bits).unwrap()
    }

    proptest! {
        #[test]
        fn labels_partition_the_mask(g in grid(), eight in any::<bool>()) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let l = label_map(&g, conn);
            for (bit, label) in g.bits().iter().zip(&l.labels) {
                prop_assert_eq!(*bit != 0, *label != 0);
            }
            let total: usize = l.blobs.iter().map(|b| b.area).sum();
            prop_assert_eq!(total, g.count_ones());
            for b in &l.blobs {
                prop_assert!(b.area >= 1);
                prop_assert!(b.bbox.contains(b.centroid.0, b.centroid.1));
                prop_assert!(b.bbox.x + b.bbox.w <= g.width() && b.bbox.y + b.bbox.h <= g.height());
            }
        }

        #[test]
        fn labeling_ignores_scan_direction(g in grid()) {
            // rotating the grid 180 degrees reverses the scan order
            let (w, h) = g.dims();
            let mut a: Vec<(usize, usize, usize)> = label_components(&g, Connectivity::Eight)
                .iter().map(|b| (b.area, b.bbox.x, b.bbox.y)).collect();
            let mut b: Vec<(usize, usize, usize)> = label_components(&flipped(&g), Connectivity::Eight)
                .iter().map(|b| (b.area, w - b.bbox.x - b.bbox.w, h - b.bbox.y - b.bbox.h)).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn suppression_composes(areas in proptest::collection::vec(1usize..50, 0..20), a in 0usize..40, b in 0usize..40) {
            let blobs: Vec<Blob> = areas.iter().enumerate().map(|(i, &n)| blob(n, i)).collect();
            let twice = suppress_small(suppress_small(blobs.clone(), a), b);
            prop_assert_eq!(&twice, &suppress_small(blobs.clone(), a.max(b)));
            // subsequence of the input, order kept
            let mut it = blobs.iter();
            prop_assert!(twice.iter().all(|x| it.any(|y| y == x)));
        }
    }
}
