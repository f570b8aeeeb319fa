//! Gray-mapped square QAM (and BPSK) with unit average energy.
//!
//! Square constellations are the product of two Gray-coded PAM axes; the
//! first half of each symbol's bits drives the in-phase axis, the second half
//! the quadrature axis, most significant bit first.

use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

/// Constellation descriptor for `m ∈ {2, 4, 16, 64}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qam {
    m: u32,
    /// Levels per axis (1 for the unused BPSK quadrature axis).
    levels: u32,
    bits_per_axis: u32,
    scale: f64,
}

impl Qam {
    pub fn new(m: u32) -> Result<Self> {
        let (levels, bits_per_axis) = match m {
            2 => (2, 1),
            4 => (2, 1),
            16 => (4, 2),
            64 => (8, 3),
            _ => return Err(Error::Domain(format!("unsupported constellation size {m}"))),
        };
        // Average energy of one axis with odd levels ±1, ±3, … is (L² − 1)/3.
        let axis_energy = (levels * levels - 1) as f64 / 3.0;
        let axes = if m == 2 { 1.0 } else { 2.0 };
        Ok(Self { m, levels, bits_per_axis, scale: 1.0 / (axes * axis_energy).sqrt() })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn bits_per_symbol(&self) -> usize {
        if self.m == 2 {
            1
        } else {
            2 * self.bits_per_axis as usize
        }
    }

    fn is_bpsk(&self) -> bool {
        self.m == 2
    }

    /// Amplitude of axis level index `i` (0 is the most negative level).
    #[inline]
    fn amplitude(&self, i: u32) -> f64 {
        (2 * i as i64 - (self.levels as i64 - 1)) as f64 * self.scale
    }

    /// Nearest level index; halfway points go to the lower level.
    #[inline]
    fn axis_index(&self, y: f64) -> u32 {
        let t = (y / self.scale + (self.levels - 1) as f64) / 2.0;
        let i = (t - 0.5).ceil();
        i.clamp(0.0, (self.levels - 1) as f64) as u32
    }

    /// Symbol from per-axis level indices.
    #[inline]
    pub(crate) fn point<T: Real>(&self, ii: u32, qi: u32) -> Cx<T> {
        if self.is_bpsk() {
            Cx::new(T::lit(self.amplitude(ii)), T::zero())
        } else {
            Cx::new(T::lit(self.amplitude(ii)), T::lit(self.amplitude(qi)))
        }
    }

    /// Per-axis level indices of the nearest constellation point.
    #[inline]
    pub(crate) fn slice_indices<T: Real>(&self, y: Cx<T>) -> (u32, u32) {
        let ii = self.axis_index(y.re.as_f64());
        let qi = if self.is_bpsk() { 0 } else { self.axis_index(y.im.as_f64()) };
        (ii, qi)
    }

    /// Symbol label (Gray bits packed MSB-first, I bits then Q bits) of a level pair.
    #[inline]
    pub(crate) fn label(&self, ii: u32, qi: u32) -> u32 {
        if self.is_bpsk() {
            gray(ii)
        } else {
            (gray(ii) << self.bits_per_axis) | gray(qi)
        }
    }

    /// Level pair of a symbol label.
    #[inline]
    pub(crate) fn levels_of(&self, label: u32) -> (u32, u32) {
        if self.is_bpsk() {
            (gray_inverse(label), 0)
        } else {
            let mask = (1 << self.bits_per_axis) - 1;
            (gray_inverse(label >> self.bits_per_axis), gray_inverse(label & mask))
        }
    }

    fn label_bits(&self, label: u32) -> Vec<u8> {
        let n = self.bits_per_symbol();
        (0..n).map(|b| ((label >> (n - 1 - b)) & 1) as u8).collect()
    }

    /// Every constellation point in label order.
    pub fn points<T: Real>(&self) -> Vec<Cx<T>> {
        (0..self.m)
            .map(|l| {
                let (i, q) = self.levels_of(l);
                self.point(i, q)
            })
            .collect()
    }
}

#[inline]
fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

#[inline]
fn gray_inverse(mut g: u32) -> u32 {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Maps a bit vector (entries 0/1) onto Gray-coded QAM symbols.
pub fn qam_modulate<T: Real>(bits: &[u8], m: u32) -> Result<Vec<Cx<T>>> {
    let q = Qam::new(m)?;
    let b = q.bits_per_symbol();
    if !bits.len().is_multiple_of(b) {
        return Err(Error::Domain(format!("{} bits do not split into {b}-bit symbols", bits.len())));
    }
    bits.chunks(b)
        .map(|chunk| {
            let mut label = 0u32;
            for &bit in chunk {
                if bit > 1 {
                    return Err(Error::Domain(format!("bit value {bit} is not 0 or 1")));
                }
                label = (label << 1) | bit as u32;
            }
            let (i, qi) = q.levels_of(label);
            Ok(q.point(i, qi))
        })
        .collect()
}

/// Nearest constellation point to `y` and its Gray bits.
pub fn qam_slice<T: Real>(y: Cx<T>, m: u32) -> Result<(Cx<T>, Vec<u8>)> {
    let q = Qam::new(m)?;
    let (i, qi) = q.slice_indices(y);
    Ok((q.point(i, qi), q.label_bits(q.label(i, qi))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn stated_mapping() {
        let s: Vec<Cx<f64>> = qam_modulate(&[1, 1, 0, 0], 16).unwrap();
        let r = 10f64.sqrt();
        assert!((s[0] - Cx::new(1.0 / r, -3.0 / r)).norm() < 1e-15);
        let axis = |b: [u8; 2]| qam_modulate::<f64>(&[b[0], b[1], 0, 0], 16).unwrap()[0].re * r;
        assert!((axis([0, 0]) + 3.0).abs() < 1e-12);
        assert!((axis([0, 1]) + 1.0).abs() < 1e-12);
        assert!((axis([1, 1]) - 1.0).abs() < 1e-12);
        assert!((axis([1, 0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_average_energy() {
        for m in [2, 4, 16, 64] {
            let pts = Qam::new(m).unwrap().points::<f64>();
            let e: f64 = pts.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
            assert!((e - 1.0).abs() < 1e-15, "m={m}: {e}");
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(qam_modulate::<f64>(&[1, 0, 1], 16).is_err());
        assert!(qam_modulate::<f64>(&[1, 0, 1, 2], 16).is_err());
        assert!(qam_modulate::<f64>(&[1, 0, 1], 8).is_err());
        assert!(qam_slice(Cx::new(0.0f64, 0.0), 32).is_err());
    }

    #[test]
    fn origin_ties_go_down() {
        let (s, bits) = qam_slice(Cx::new(0.0f64, 0.0), 16).unwrap();
        let r = 10f64.sqrt();
        assert!((s - Cx::new(-1.0 / r, -1.0 / r)).norm() < 1e-15);
        assert_eq!(bits, vec![0, 1, 0, 1]);
        let (s, bits) = qam_slice(Cx::new(0.0f64, 0.0), 2).unwrap();
        assert_eq!((s, bits), (Cx::new(-1.0, 0.0), vec![0]));
    }

    #[test]
    fn adjacent_labels_differ_in_one_bit() {
        for m in [4, 16, 64] {
            let q = Qam::new(m).unwrap();
            let pts = q.points::<f64>();
            let dmin = 2.0 * q.scale;
            for a in 0..m {
                for b in 0..m {
                    if ((pts[a as usize] - pts[b as usize]).norm() - dmin).abs() < 1e-12 {
                        assert_eq!((a ^ b).count_ones(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_without_noise() {
        let mut r = crate::rng::stream(1, &[]);
        for m in [2u32, 4, 16, 64] {
            let b = Qam::new(m).unwrap().bits_per_symbol();
            for _ in 0..10_000 / 4 {
                let bits: Vec<u8> = (0..4 * b).map(|_| r.random_range(0..2u8)).collect();
                let syms: Vec<Cx<f64>> = qam_modulate(&bits, m).unwrap();
                let back: Vec<u8> = syms.iter().flat_map(|s| qam_slice(*s, m).unwrap().1).collect();
                assert_eq!(back, bits);
            }
        }
    }

    proptest! {
        #[test]
        fn perturbations_inside_half_distance_are_corrected(
            label in 0u32..16, rad in 0.0f64..0.999, ang in 0.0f64..std::f64::consts::TAU
        ) {
            let q = Qam::new(16).unwrap();
            let (i, qi) = q.levels_of(label);
            let s: Cx<f64> = q.point(i, qi);
            let y = s + Cx::from_polar(rad * q.scale, ang);
            let (sh, _) = qam_slice(y, 16).unwrap();
            prop_assert!((sh - s).norm() < 1e-12);
        }

        #[test]
        fn gray_inverse_inverts(i in 0u32..1024) {
            prop_assert_eq!(gray_inverse(gray(i)), i);
        }
    }
}
