use crate::error::{Error, Result};
use crate::linalg::C64;

/// Unit-average-power constellation with a Gray bit labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<C64>,
    labels: Vec<u32>,
    bits_per_symbol: usize,
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Builds the constellation for modulation order `order`.
///
/// Orders 2 (BPSK), 4 (QPSK), 8 (8-PSK) and 16 (square 16-QAM) are
/// supported. QPSK is ordered counter-clockwise from the first quadrant.
pub fn make_constellation(order: usize) -> Result<Constellation> {
    let (points, labels): (Vec<C64>, Vec<u32>) = match order {
        2 => (vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], vec![0, 1]),
        4 => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            (
                vec![C64::new(a, a), C64::new(-a, a), C64::new(-a, -a), C64::new(a, -a)],
                vec![0b00, 0b01, 0b11, 0b10],
            )
        }
        8 => (0..8u32)
            .map(|l| (C64::from_polar(1.0, std::f64::consts::TAU * l as f64 / 8.0), gray(l)))
            .unzip(),
        16 => {
            let norm = 1.0 / 10f64.sqrt();
            let mut pts = Vec::with_capacity(16);
            let mut lab = Vec::with_capacity(16);
            for i in 0..4u32 {
                for q in 0..4u32 {
                    pts.push(C64::new((2.0 * i as f64 - 3.0) * norm, (2.0 * q as f64 - 3.0) * norm));
                    lab.push((gray(i) << 2) | gray(q));
                }
            }
            (pts, lab)
        }
        _ => return Err(Error::UnsupportedOrder(order)),
    };
    Ok(Constellation {
        points,
        labels,
        bits_per_symbol: order.trailing_zeros() as usize,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Gray label of symbol `index`, most significant bit first when
    /// expanded by [`Constellation::bits`].
    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Bits carried by symbol `index`, MSB first.
    pub fn bits(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        let label = self.labels[index];
        (0..self.bits_per_symbol)
            .rev()
            .map(move |b| ((label >> b) & 1) as u8)
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Index of a point equal to `z` (within 1e-9), if any.
    pub fn index_of(&self, z: C64) -> Option<usize> {
        self.points.iter().position(|p| (p - z).norm() < 1e-9)
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn qpsk_points() {
        let c = make_constellation(4).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let want = [C64::new(a, a), C64::new(-a, a), C64::new(-a, -a), C64::new(a, -a)];
        for (p, w) in c.points().iter().zip(want) {
            assert!((p - w).norm() < 1e-15);
        }
        assert_eq!(c.bits_per_symbol(), 2);
    }

    #[test]
    fn bpsk_points() {
        let c = make_constellation(2).unwrap();
        assert_eq!(c.points(), &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
    }

    #[test]
    fn unit_power_and_bijective_labels() {
        for order in [2, 4, 8, 16] {
            let c = make_constellation(order).unwrap();
            assert!((c.mean_power() - 1.0).abs() < 1e-12, "order {order}");
            let labels: HashSet<u32> = (0..order).map(|i| c.label(i)).collect();
            assert_eq!(labels.len(), order);
            assert!(labels.iter().all(|&l| (l as usize) < order));
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let c = make_constellation(4).unwrap();
        for i in 0..4 {
            let j = (i + 1) % 4;
            assert_eq!((c.label(i) ^ c.label(j)).count_ones(), 1);
        }
    }

    #[test]
    fn unsupported_order() {
        assert_eq!(make_constellation(3), Err(Error::UnsupportedOrder(3)));
        assert_eq!(make_constellation(32), Err(Error::UnsupportedOrder(32)));
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let c = make_constellation(4).unwrap();
        assert_eq!(c.nearest(C64::new(0.0, 0.0)), 0);
        assert_eq!(c.nearest(C64::new(0.9, 0.8)), 0);
        assert_eq!(c.nearest(c.point(2)), 2);
    }
}
