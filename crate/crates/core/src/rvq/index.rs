//! Exact nearest-codeword search for large codebooks.
//!
//! A unit vector `w` in C^2 maps to a point `n(w)` on the unit sphere in R^3
//! (its Bloch vector) with `|a^H b|^2 = (1 + n(a) . n(b)) / 2`. Maximizing the
//! quantization gain is therefore a nearest-neighbour query on the sphere. The
//! index buckets codewords into an equal-area (z, phi) grid and only scores
//! codewords in cells that can hold something better than the running best.
//! Scores are always computed with the exact complex formula, so the result
//! equals the exhaustive scan including its lowest-index tie-break.

use std::f64::consts::PI;

use crate::channel::CVec2;

use super::gain;

/// Angular slack added to every pruning radius. Covers the disagreement
/// between Bloch-vector geometry and the exact complex score.
const ANGLE_PAD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct SphereIndex {
    bands: usize,
    sectors: usize,
    offsets: Vec<u32>,
    order: Vec<u32>,
}

pub(crate) fn bloch(w: &CVec2) -> [f64; 3] {
    let cross = w.e1().conj() * w.e2();
    [w.e1().norm_sqr() - w.e2().norm_sqr(), 2.0 * cross.re, 2.0 * cross.im]
}

impl SphereIndex {
    pub(crate) fn build(words: &[CVec2]) -> Self {
        let target_cells = (words.len() / 4).max(1) as f64;
        let bands = ((target_cells / PI).sqrt().round() as usize).max(1);
        let sectors = ((target_cells / bands as f64).round() as usize).max(1);
        let n_cells = bands * sectors;

        let mut index = SphereIndex { bands, sectors, offsets: vec![0; n_cells + 1], order: Vec::new() };
        let cells: Vec<u32> = words.iter().map(|w| index.cell_of(&bloch(w)) as u32).collect();
        for &c in &cells {
            index.offsets[c as usize + 1] += 1;
        }
        for i in 0..n_cells {
            index.offsets[i + 1] += index.offsets[i];
        }
        let mut cursor = index.offsets.clone();
        let mut order = vec![0u32; words.len()];
        for (i, &c) in cells.iter().enumerate() {
            let slot = &mut cursor[c as usize];
            order[*slot as usize] = i as u32;
            *slot += 1;
        }
        index.order = order;
        index
    }

    fn band_of(&self, z: f64) -> usize {
        let b = ((z + 1.0) * 0.5 * self.bands as f64).floor();
        (b.max(0.0) as usize).min(self.bands - 1)
    }

    fn sector_of(&self, phi: f64) -> usize {
        let s = ((phi + PI) / (2.0 * PI) * self.sectors as f64).floor();
        (s.max(0.0) as usize).min(self.sectors - 1)
    }

    fn cell_of(&self, n: &[f64; 3]) -> usize {
        self.band_of(n[0].clamp(-1.0, 1.0)) * self.sectors + self.sector_of(n[2].atan2(n[1]))
    }

    /// Best codeword for the unit vector `h` as `(index, gain)`.
    pub(crate) fn best_match(&self, words: &[CVec2], h: &CVec2) -> (usize, f64) {
        let n = bloch(h);
        let z = n[0].clamp(-1.0, 1.0);
        let polar = z.acos();
        let azimuth = n[2].atan2(n[1]);

        let mut radius = 2.0 * (4.0 * PI / words.len() as f64).sqrt();
        loop {
            if radius >= PI {
                return super::exhaustive_best(words, h);
            }
            let mut best: Option<(usize, f64)> = None;
            self.visit_cap(polar, azimuth, radius + ANGLE_PAD, |i| {
                let g = gain(h, &words[i]);
                best = match best {
                    Some((bi, bg)) if bg > g || (bg == g && bi < i) => Some((bi, bg)),
                    _ => Some((i, g)),
                };
            });
            match best {
                Some((i, g)) => {
                    // Angle between Bloch vectors: cos(psi) = 2g - 1.
                    let psi = 2.0 * g.clamp(0.0, 1.0).sqrt().acos();
                    if psi + ANGLE_PAD <= radius {
                        return (i, g);
                    }
                    radius = radius.max(psi + 2.0 * ANGLE_PAD).max(radius * 1.5);
                }
                None => radius *= 2.0,
            }
        }
    }

    /// Calls `f` for every codeword in a cell that may intersect the spherical
    /// cap of angular radius `radius` centred at (`polar`, `azimuth`).
    fn visit_cap(&self, polar: f64, azimuth: f64, radius: f64, mut f: impl FnMut(usize)) {
        let z_lo = (polar + radius).min(PI).cos();
        let z_hi = (polar - radius).max(0.0).cos();
        let (b_lo, b_hi) = (self.band_of(z_lo), self.band_of(z_hi));

        let touches_pole = polar - radius <= 0.0 || polar + radius >= PI;
        let ratio = if touches_pole { 2.0 } else { radius.sin() / polar.sin() };
        let (s_lo, count) = if ratio >= 1.0 {
            (0i64, self.sectors)
        } else {
            let half = ratio.asin() + ANGLE_PAD;
            let scale = self.sectors as f64 / (2.0 * PI);
            let lo = ((azimuth - half + PI) * scale).floor() as i64;
            let hi = ((azimuth + half + PI) * scale).floor() as i64;
            (lo, ((hi - lo + 1) as usize).min(self.sectors))
        };

        for band in b_lo..=b_hi {
            for k in 0..count {
                let sector = (s_lo + k as i64).rem_euclid(self.sectors as i64) as usize;
                let cell = band * self.sectors + sector;
                let (a, b) = (self.offsets[cell] as usize, self.offsets[cell + 1] as usize);
                for &w in &self.order[a..b] {
                    f(w as usize);
                }
            }
        }
    }
}
