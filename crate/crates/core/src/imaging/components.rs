use serde::{Deserialize, Serialize};

use super::{require_gray, BBox, Frame};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionStats {
    pub label: u32,
    pub area: u64,
    pub bbox: BBox,
}

/// Per-pixel region labels, `0` for background, `1..=K` for regions in the
/// order their first pixel appears in a raster scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub regions: Vec<RegionStats>,
}

impl LabelMap {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // Keep the smaller provisional label as root so roots follow raster order.
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// 8-connected labelling of the non-zero pixels of a binary frame.
pub fn connected_components(bin: &Frame) -> Result<LabelMap> {
    require_gray(bin, "connected_components")?;
    let (w, h) = (bin.width() as usize, bin.height() as usize);
    let src = bin.data();
    let mut labels = vec![0u32; w * h];
    // parent[0] is the background sentinel.
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if src[idx] == 0 {
                continue;
            }
            let mut current = 0u32;
            let mut visit = |n: u32, parent: &mut Vec<u32>| {
                if n == 0 {
                    return;
                }
                current = if current == 0 { n } else { union(parent, current, n) };
            };
            if x > 0 {
                visit(labels[idx - 1], &mut parent);
            }
            if y > 0 {
                let up = idx - w;
                if x > 0 {
                    visit(labels[up - 1], &mut parent);
                }
                visit(labels[up], &mut parent);
                if x + 1 < w {
                    visit(labels[up + 1], &mut parent);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[idx] = current;
        }
    }

    // Resolve roots and renumber densely in raster order of first pixel.
    let mut dense = vec![0u32; parent.len()];
    let mut regions: Vec<RegionStats> = Vec::new();
    let mut extents: Vec<(u32, u32, u32, u32)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if labels[idx] == 0 {
                continue;
            }
            let root = find(&mut parent, labels[idx]) as usize;
            if dense[root] == 0 {
                regions.push(RegionStats {
                    label: regions.len() as u32 + 1,
                    area: 0,
                    bbox: BBox::new(0, 0, 0, 0),
                });
                extents.push((x as u32, y as u32, x as u32, y as u32));
                dense[root] = regions.len() as u32;
            }
            let l = dense[root];
            labels[idx] = l;
            let r = &mut regions[l as usize - 1];
            r.area += 1;
            let e = &mut extents[l as usize - 1];
            e.0 = e.0.min(x as u32);
            e.1 = e.1.min(y as u32);
            e.2 = e.2.max(x as u32);
            e.3 = e.3.max(y as u32);
        }
    }
    for (r, (x0, y0, x1, y1)) in regions.iter_mut().zip(extents) {
        r.bbox = BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
    }

    Ok(LabelMap {
        width: bin.width(),
        height: bin.height(),
        labels,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(rows: &[&str]) -> Frame {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let data = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| if b == b'#' { 255 } else { 0 }))
            .collect();
        Frame::gray(w, h, data).unwrap()
    }

    #[test]
    fn empty_frame_has_no_regions() {
        let m = connected_components(&Frame::filled(7, 3, 1, 0).unwrap()).unwrap();
        assert_eq!(m.region_count(), 0);
        assert!(m.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn two_disjoint_blocks() {
        let m = connected_components(&frame(&[
            "##....", //
            "##..##",
            "....##",
            "....##",
        ]))
        .unwrap();
        assert_eq!(m.region_count(), 2);
        assert_eq!(m.regions[0].area, 4);
        assert_eq!(m.regions[0].bbox, BBox::new(0, 0, 2, 2));
        assert_eq!(m.regions[1].area, 6);
        assert_eq!(m.regions[1].bbox, BBox::new(4, 1, 2, 3));
    }

    #[test]
    fn diagonal_neighbours_join() {
        let m = connected_components(&frame(&[
            "#...", //
            ".#..",
            "..#.",
            "...#",
        ]))
        .unwrap();
        assert_eq!(m.region_count(), 1);
        assert_eq!(m.regions[0].area, 4);
    }

    #[test]
    fn u_shape_merges_into_one_label() {
        let m = connected_components(&frame(&[
            "#...#", //
            "#...#",
            "#####",
        ]))
        .unwrap();
        assert_eq!(m.region_count(), 1);
        assert_eq!(m.regions[0].area, 9);
        assert!(m.labels.iter().all(|&l| l <= 1));
    }

    #[test]
    fn labels_follow_raster_order() {
        let m = connected_components(&frame(&[
            "...#", //
            "#...",
            "..#.",
        ]))
        .unwrap();
        assert_eq!(m.label_at(3, 0), 1);
        assert_eq!(m.label_at(0, 1), 2);
        assert_eq!(m.label_at(2, 2), 3);
    }
}
