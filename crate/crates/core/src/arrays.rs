//! Planar antenna arrays, steering vectors and azimuth-scan codebooks.
//!
//! Arrays lie in the y-z plane with broadside along +x. Element `(r, c)` sits
//! at `(0, c·d, r·d)` in wavelengths, and a plane wave from azimuth `az`,
//! elevation `el` has direction `(cos el cos az, cos el sin az, sin el)`.
//! Elements are isotropic.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in carrier wavelengths.
    #[serde(default = "default_spacing")]
    pub element_spacing: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, element_spacing: f64) -> Result<Self> {
        let geom = ArrayGeometry {
            rows,
            cols,
            element_spacing,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// 8×8 half-wavelength base-station panel (64 elements).
    pub fn default_bs() -> Self {
        ArrayGeometry {
            rows: 8,
            cols: 8,
            element_spacing: 0.5,
        }
    }

    /// 4×4 half-wavelength handset panel.
    pub fn default_ue() -> Self {
        ArrayGeometry {
            rows: 4,
            cols: 4,
            element_spacing: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::invalid("rows", "must be at least 1"));
        }
        if self.cols == 0 {
            return Err(Error::invalid("cols", "must be at least 1"));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(Error::invalid("element_spacing", "must be positive"));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }
}

/// Unit-norm complex weight vector, used both for spatial signatures and for
/// beamforming weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    /// Normalizes `weights` to unit norm. Fails on an empty or all-zero input.
    pub fn from_weights(mut weights: Vec<Complex64>) -> Result<Self> {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if weights.is_empty() || !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("weights", "need a nonzero finite vector"));
        }
        weights.iter_mut().for_each(|w| *w /= norm);
        Ok(SteeringVector(weights))
    }

    /// Weight vector exciting only element `index` (an isotropic radiator).
    pub fn single_element(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::invalid("index", format!("{index} >= {len}")));
        }
        let mut w = vec![Complex64::new(0.0, 0.0); len];
        w[index] = Complex64::new(1.0, 0.0);
        Ok(SteeringVector(w))
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hermitian inner product `selfᴴ · other`.
    pub fn inner(&self, other: &SteeringVector) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

pub fn steering_vector(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> SteeringVector {
    let d = geom.element_spacing;
    let ky = elevation.cos() * azimuth.sin();
    let kz = elevation.sin();
    let scale = 1.0 / (geom.num_elements() as f64).sqrt();
    let weights = (0..geom.rows)
        .flat_map(|r| (0..geom.cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let phase = 2.0 * PI * d * (c as f64 * ky + r as f64 * kz);
            Complex64::from_polar(scale, phase)
        })
        .collect();
    SteeringVector(weights)
}

#[derive(Debug, Clone)]
pub struct BeamCodebook {
    beams: Vec<SteeringVector>,
    azimuths: Vec<f64>,
}

impl BeamCodebook {
    pub fn beams(&self) -> &[SteeringVector] {
        &self.beams
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, index: usize) -> Option<&SteeringVector> {
        self.beams.get(index)
    }
}

/// `n_dir` beams at azimuths `-π + 2πk/n_dir`, elevation 0.
pub fn uniform_codebook(geom: &ArrayGeometry, n_dir: usize) -> Result<BeamCodebook> {
    if n_dir == 0 {
        return Err(Error::invalid("n_dir", "must be at least 1"));
    }
    let azimuths: Vec<f64> = (0..n_dir)
        .map(|k| -PI + 2.0 * PI * k as f64 / n_dir as f64)
        .collect();
    let beams = azimuths
        .iter()
        .map(|&az| steering_vector(geom, az, 0.0))
        .collect();
    Ok(BeamCodebook { beams, azimuths })
}

/// `|w_rxᴴ u_rx|² · |u_txᴴ w_tx|²`.
pub fn beamforming_gain(
    w_rx: &SteeringVector,
    u_rx: &SteeringVector,
    w_tx: &SteeringVector,
    u_tx: &SteeringVector,
) -> Result<f64> {
    Ok(w_rx.inner(u_rx)?.norm_sqr() * u_tx.inner(w_tx)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn broadside_two_element() {
        let g = ArrayGeometry::new(1, 2, 0.5).unwrap();
        let v = steering_vector(&g, 0.0, 0.0);
        let e = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(v.weights()[0], e) && close(v.weights()[1], e));
    }

    #[test]
    fn single_element_is_one() {
        let g = ArrayGeometry::new(1, 1, 0.5).unwrap();
        for (az, el) in [(0.3, -0.2), (-3.0, 1.0), (2.0, 0.0)] {
            let v = steering_vector(&g, az, el);
            assert_eq!(v.len(), 1);
            assert!(close(v.weights()[0], Complex64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn endfire_half_wavelength_flips_sign() {
        // phase difference 2π · 0.5 · sin(90°) = π
        let g = ArrayGeometry::new(1, 2, 0.5).unwrap();
        let v = steering_vector(&g, PI / 2.0, 0.0);
        assert!(close(v.weights()[0], Complex64::new(FRAC_1_SQRT_2, 0.0)));
        assert!(close(v.weights()[1], Complex64::new(-FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn invalid_geometry() {
        assert!(ArrayGeometry::new(0, 2, 0.5).is_err());
        assert!(ArrayGeometry::new(2, 0, 0.5).is_err());
        assert!(ArrayGeometry::new(2, 2, 0.0).is_err());
    }

    #[test]
    fn codebook_layout() {
        let g = ArrayGeometry::default_ue();
        let one = uniform_codebook(&g, 1).unwrap();
        assert_eq!(one.azimuths(), &[-PI]);

        let cb = uniform_codebook(&g, 16).unwrap();
        assert_eq!(cb.len(), 16);
        for w in cb.azimuths().windows(2) {
            assert!((w[1] - w[0] - 2.0 * PI / 16.0).abs() < 1e-12);
            assert!(w[1] > w[0]);
        }
        assert!(cb.azimuths().iter().all(|&a| (-PI..PI).contains(&a)));

        let iso = uniform_codebook(&ArrayGeometry::new(1, 1, 0.5).unwrap(), 4).unwrap();
        assert!(iso.beams().iter().all(|b| b == &iso.beams()[0]));

        assert!(uniform_codebook(&g, 0).is_err());
    }

    #[test]
    fn gain_aligned_and_null() {
        let g = ArrayGeometry::default_bs();
        let u = steering_vector(&g, 0.4, 0.1);
        assert!((beamforming_gain(&u, &u, &u, &u).unwrap() - 1.0).abs() < 1e-12);

        // broadside weights against a π-phase signature: [1,1]·[1,-1] = 0
        let pair = ArrayGeometry::new(1, 2, 0.5).unwrap();
        let w = steering_vector(&pair, 0.0, 0.0);
        let u = steering_vector(&pair, PI / 2.0, 0.0);
        let one = SteeringVector::single_element(1, 0).unwrap();
        assert!(beamforming_gain(&w, &u, &one, &one).unwrap() < 1e-24);
    }

    #[test]
    fn gain_dimension_mismatch() {
        let a = steering_vector(&ArrayGeometry::default_bs(), 0.0, 0.0);
        let b = steering_vector(&ArrayGeometry::default_ue(), 0.0, 0.0);
        assert!(matches!(
            beamforming_gain(&a, &b, &a, &a),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn random_unit(len: usize) -> impl Strategy<Value = SteeringVector> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_filter_map(
            "nonzero",
            |v| {
                SteeringVector::from_weights(
                    v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect(),
                )
                .ok()
            },
        )
    }

    proptest! {
        #[test]
        fn steering_vectors_are_unit_norm(
            rows in 1usize..9, cols in 1usize..9, d in 0.1f64..2.0,
            az in -10.0f64..10.0, el in -2.0f64..2.0,
        ) {
            let g = ArrayGeometry::new(rows, cols, d).unwrap();
            let v = steering_vector(&g, az, el);
            let n: f64 = v.weights().iter().map(|w| w.norm_sqr()).sum();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gain_bounded_and_phase_invariant(
            a in random_unit(6), b in random_unit(6),
            c in random_unit(4), d in random_unit(4),
            phi in -PI..PI,
        ) {
            let g = beamforming_gain(&a, &b, &c, &d).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
            let rot = Complex64::from_polar(1.0, phi);
            let a_rot = SteeringVector(a.weights().iter().map(|w| w * rot).collect());
            let d_rot = SteeringVector(d.weights().iter().map(|w| w * rot).collect());
            let g2 = beamforming_gain(&a_rot, &b, &c, &d_rot).unwrap();
            prop_assert!((g - g2).abs() < 1e-12);
        }
    }
}
