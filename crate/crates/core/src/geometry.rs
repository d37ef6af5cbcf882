//! Balls, axis-aligned boxes and the box measures used by the loss models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Box given by center and per-coordinate half-widths. Offsets of a stored
/// concept box are non-negative; an intersection may carry negative offsets,
/// which mark it as empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AABox {
    pub center: Vec<f64>,
    pub offset: Vec<f64>,
}

fn same_dim(a: usize, b: usize) -> Result<(), GeometryError> {
    if a == b {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch(a, b))
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl AABox {
    pub fn new(center: Vec<f64>, offset: Vec<f64>) -> Result<Self, GeometryError> {
        same_dim(center.len(), offset.len())?;
        Ok(AABox { center, offset })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.offset).map(|(c, o)| c - o).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.offset).map(|(c, o)| c + o).collect()
    }

    /// True when some offset is negative.
    pub fn is_empty(&self) -> bool {
        self.offset.iter().any(|&o| o < 0.0)
    }

    /// Box with the center moved by `sign * v`; offsets unchanged.
    pub fn translated(&self, v: &[f64], sign: f64) -> Result<AABox, GeometryError> {
        same_dim(self.dim(), v.len())?;
        Ok(AABox {
            center: self.center.iter().zip(v).map(|(c, x)| c + sign * x).collect(),
            offset: self.offset.clone(),
        })
    }
}

/// Lower corner is the max of lowers, upper corner the min of uppers.
pub fn box_intersection(a: &AABox, b: &AABox) -> Result<AABox, GeometryError> {
    same_dim(a.dim(), b.dim())?;
    let n = a.dim();
    let mut center = Vec::with_capacity(n);
    let mut offset = Vec::with_capacity(n);
    for i in 0..n {
        let lo = (a.center[i] - a.offset[i]).max(b.center[i] - b.offset[i]);
        let hi = (a.center[i] + a.offset[i]).min(b.center[i] + b.offset[i]);
        center.push((lo + hi) / 2.0);
        offset.push((hi - lo) / 2.0);
    }
    Ok(AABox { center, offset })
}

/// Element-wise `|c_a − c_b| − (o_a + o_b)`; negative where the boxes overlap.
pub fn box_distance(a: &AABox, b: &AABox) -> Result<Vec<f64>, GeometryError> {
    same_dim(a.dim(), b.dim())?;
    Ok((0..a.dim())
        .map(|i| (a.center[i] - b.center[i]).abs() - (a.offset[i] + b.offset[i]))
        .collect())
}

/// `‖max(0, |c_in − c_out| + o_in − o_out)‖`, zero iff `inner ⊆ outer`.
pub fn containment_measure_mu(inner: &AABox, outer: &AABox) -> Result<f64, GeometryError> {
    containment_measure_margin(inner, outer, 0.0)
}

/// μ with each coordinate shifted by `−margin`.
pub fn containment_measure_margin(inner: &AABox, outer: &AABox, margin: f64) -> Result<f64, GeometryError> {
    same_dim(inner.dim(), outer.dim())?;
    let v: Vec<f64> = (0..inner.dim())
        .map(|i| {
            ((inner.center[i] - outer.center[i]).abs() + inner.offset[i] - outer.offset[i] - margin).max(0.0)
        })
        .collect();
    Ok(norm(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(c: &[f64], o: &[f64]) -> AABox {
        AABox::new(c.to_vec(), o.to_vec()).unwrap()
    }

    #[test]
    fn intersection_examples() {
        let i = box_intersection(&bx(&[0.0, 0.0], &[1.0, 1.0]), &bx(&[1.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(i, bx(&[0.5, 0.0], &[0.5, 1.0]));
        let e = box_intersection(&bx(&[0.0], &[1.0]), &bx(&[3.0], &[1.0])).unwrap();
        assert_eq!(e.offset, vec![-0.5]);
        assert!(e.is_empty());
        let a = bx(&[0.25, -0.5], &[0.5, 0.125]);
        assert_eq!(box_intersection(&a, &a).unwrap(), a);
    }

    #[test]
    fn distance_examples() {
        let d = box_distance(&bx(&[0.0, 1.0], &[0.1, 0.1]), &bx(&[0.0, 1.0], &[0.1, 0.1])).unwrap();
        assert!(d.iter().all(|x| (x + 0.2).abs() < 1e-12));
        assert_eq!(box_distance(&bx(&[0.0], &[1.0]), &bx(&[2.0], &[1.0])).unwrap(), vec![0.0]);
        assert_eq!(box_distance(&bx(&[0.0], &[1.0]), &bx(&[5.0], &[1.0])).unwrap(), vec![3.0]);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(containment_measure_mu(&bx(&[1.0], &[1.0]), &bx(&[0.0], &[1.0])).unwrap(), 1.0);
        let a = bx(&[0.0, 0.0], &[0.5, 0.5]);
        assert_eq!(containment_measure_mu(&a, &a).unwrap(), 0.0);
        assert_eq!(containment_measure_mu(&bx(&[0.1, 0.0], &[0.2, 0.2]), &a).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = bx(&[0.0], &[1.0]);
        let b = bx(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(box_intersection(&a, &b), Err(GeometryError::DimensionMismatch(1, 2)));
        assert!(box_distance(&a, &b).is_err());
        assert!(containment_measure_mu(&a, &b).is_err());
        assert!(AABox::new(vec![0.0], vec![]).is_err());
    }

    fn arb_box(n: usize) -> impl Strategy<Value = AABox> {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(0.01f64..1.5, n),
        )
            .prop_map(|(c, o)| AABox { center: c, offset: o })
    }

    proptest! {
        #[test]
        fn intersection_commutes(a in arb_box(3), b in arb_box(3)) {
            let x = box_intersection(&a, &b).unwrap();
            let y = box_intersection(&b, &a).unwrap();
            for i in 0..3 {
                prop_assert!((x.center[i] - y.center[i]).abs() < 1e-12);
                prop_assert!((x.offset[i] - y.offset[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn intersection_associates(a in arb_box(2), b in arb_box(2), c in arb_box(2)) {
            let x = box_intersection(&box_intersection(&a, &b).unwrap(), &c).unwrap();
            let y = box_intersection(&a, &box_intersection(&b, &c).unwrap()).unwrap();
            prop_assume!(!x.is_empty());
            for i in 0..2 {
                prop_assert!((x.center[i] - y.center[i]).abs() < 1e-9);
                prop_assert!((x.offset[i] - y.offset[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn distance_symmetric(a in arb_box(4), b in arb_box(4)) {
            prop_assert_eq!(box_distance(&a, &b).unwrap(), box_distance(&b, &a).unwrap());
        }

        #[test]
        fn mu_zero_iff_contained(a in arb_box(3), b in arb_box(3)) {
            let mu = containment_measure_mu(&a, &b).unwrap();
            let inside = (0..3).all(|i| (a.center[i] - b.center[i]).abs() + a.offset[i] <= b.offset[i]);
            prop_assert_eq!(mu == 0.0, inside);
            prop_assert!(mu >= 0.0);
        }
    }
}
