use crate::cube::MapF64;
use crate::error::{Error, Result};

/// Neighbour offsets clockwise from the top-left corner.
const RING: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// 8-bit local binary pattern at an interior pixel; bit `k` is set when
/// neighbour `k` is ≥ the centre.
pub fn lbp_code(map: &MapF64, row: usize, col: usize) -> u8 {
    let center = map.get(row, col);
    RING.iter().enumerate().fold(0u8, |code, (k, &(dr, dc))| {
        let v = map.get((row as i64 + dr) as usize, (col as i64 + dc) as usize);
        if v >= center {
            code | (1 << k)
        } else {
            code
        }
    })
}

/// Number of 0↔1 changes around the circular 8-bit pattern.
pub fn circular_transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Uniformity texture feature: LBP transition count divided by 8. Border
/// pixels copy the nearest interior value.
pub fn lbp_feature(base: &MapF64) -> Result<MapF64> {
    let (rows, cols) = (base.rows(), base.cols());
    if rows < 3 || cols < 3 {
        return Err(Error::invalid(format!(
            "LBP needs at least 3×3 pixels (got {rows}×{cols})"
        )));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let rr = r.clamp(1, rows - 2);
            let cc = c.clamp(1, cols - 2);
            values.push(f64::from(circular_transitions(lbp_code(base, rr, cc))) / 8.0);
        }
    }
    MapF64::new(rows, cols, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(center: f64, ring: [f64; 8]) -> MapF64 {
        // Place the ring values at RING positions around (1, 1).
        let mut v = vec![0.0; 9];
        v[4] = center;
        for (k, &(dr, dc)) in RING.iter().enumerate() {
            v[((1 + dr) * 3 + 1 + dc) as usize] = ring[k];
        }
        MapF64::new(3, 3, v).unwrap()
    }

    #[test]
    fn constant_image_has_no_transitions() {
        let map = MapF64::filled(4, 5, 0.2);
        assert_eq!(lbp_code(&map, 1, 1), 0xFF);
        assert!(lbp_feature(&map)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn bright_center_gives_all_zero_pattern() {
        let map = patch(1.0, [0.5; 8]);
        assert_eq!(lbp_code(&map, 1, 1), 0);
        assert_eq!(lbp_feature(&map).unwrap().values(), &[0.0; 9]);
    }

    #[test]
    fn alternating_ring_saturates() {
        let map = patch(0.5, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(lbp_code(&map, 1, 1), 0b0101_0101);
        assert_eq!(lbp_feature(&map).unwrap().values(), &[1.0; 9]);
    }

    #[test]
    fn transition_counts() {
        assert_eq!(circular_transitions(0), 0);
        assert_eq!(circular_transitions(0xFF), 0);
        assert_eq!(circular_transitions(0b0000_0001), 2);
        assert_eq!(circular_transitions(0b0000_1111), 2);
        assert_eq!(circular_transitions(0b1010_1010), 8);
        assert_eq!(circular_transitions(0b1000_0001), 2);
    }

    #[test]
    fn borders_replicate_interior() {
        let v: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let map = MapF64::new(4, 5, v).unwrap();
        let f = lbp_feature(&map).unwrap();
        assert_eq!(f.get(0, 0), f.get(1, 1));
        assert_eq!(f.get(3, 4), f.get(2, 3));
        assert_eq!(f.get(0, 2), f.get(1, 2));
    }

    #[test]
    fn too_small() {
        assert!(lbp_feature(&MapF64::filled(2, 5, 0.0)).is_err());
    }
}
