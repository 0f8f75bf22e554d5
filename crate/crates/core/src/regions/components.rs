//! Connected-component labelling of 3D binary masks.

use std::collections::VecDeque;

/// Labels 6-connected foreground components. Returns per-voxel labels
/// (0 = background, components numbered from 1 in scan order) and the count.
pub fn label_components(mask: &[bool], dims: [usize; 3]) -> (Vec<u32>, usize) {
    let [nx, ny, nz] = dims;
    assert_eq!(mask.len(), nx * ny * nz);
    let mut labels = vec![0u32; mask.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let x = v % nx;
            let y = (v / nx) % ny;
            let z = v / (nx * ny);
            let mut visit = |u: usize| {
                if mask[u] && labels[u] == 0 {
                    labels[u] = count;
                    queue.push_back(u);
                }
            };
            if x > 0 {
                visit(v - 1);
            }
            if x + 1 < nx {
                visit(v + 1);
            }
            if y > 0 {
                visit(v - nx);
            }
            if y + 1 < ny {
                visit(v + nx);
            }
            if z > 0 {
                visit(v - nx * ny);
            }
            if z + 1 < nz {
                visit(v + nx * ny);
            }
        }
    }
    (labels, count as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(points: &[[usize; 3]], dims: [usize; 3]) -> Vec<bool> {
        let mut m = vec![false; dims.iter().product()];
        for p in points {
            m[p[0] + dims[0] * (p[1] + dims[1] * p[2])] = true;
        }
        m
    }

    #[test]
    fn diagonal_neighbours_are_separate() {
        let dims = [3, 3, 3];
        let m = mask_from(&[[0, 0, 0], [1, 1, 0], [2, 2, 2]], dims);
        assert_eq!(label_components(&m, dims).1, 3);
    }

    #[test]
    fn face_neighbours_join() {
        let dims = [4, 3, 3];
        let m = mask_from(&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [3, 2, 2]], dims);
        let (labels, n) = label_components(&m, dims);
        assert_eq!(n, 2);
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[0], labels[labels.len() - 1]);
    }

    #[test]
    fn empty_and_full() {
        let dims = [2, 2, 2];
        assert_eq!(label_components(&[false; 8], dims).1, 0);
        assert_eq!(label_components(&[true; 8], dims).1, 1);
    }
}
