//! Coefficient fields (γ̃, Ã, ñ) and the smallness check on them.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dist, unit_ball_volume, Domain, ObstacleShape, Point};

/// Scalar jump profile inside D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: C64 },
    /// Linear in |x − center| / radius, clamped at the ends.
    Radial {
        center: Point,
        radius: f64,
        at_center: C64,
        at_radius: C64,
    },
}

impl Profile {
    pub fn constant(v: impl Into<C64>) -> Self {
        Profile::Constant { value: v.into() }
    }

    pub fn eval(&self, x: &Point) -> C64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Radial { center, radius, at_center, at_radius } => {
                let s = (dist(x, center) / radius).min(1.0);
                at_center + (at_radius - at_center) * s
            }
        }
    }

    fn extremes(&self) -> Vec<C64> {
        match self {
            Profile::Constant { value } => vec![*value],
            Profile::Radial { at_center, at_radius, .. } => vec![*at_center, *at_radius],
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.extremes().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.extremes().iter().all(|v| *v == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub gamma_d: Profile,
    pub q_d: Profile,
    pub a_d: [C64; 3],
    pub kappa: f64,
    /// `None` is the background medium.
    pub shape: Option<ObstacleShape>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub gamma: C64,
    pub a: [C64; 3],
    pub n: C64,
}

impl Coefficients {
    pub const BACKGROUND: Coefficients = Coefficients {
        gamma: C64::new(1.0, 0.0),
        a: [C64::new(0.0, 0.0); 3],
        n: C64::new(1.0, 0.0),
    };

    pub fn is_background(&self) -> bool {
        *self == Self::BACKGROUND
    }
}

impl MediumSpec {
    pub fn background(kappa: f64) -> Self {
        MediumSpec {
            gamma_d: Profile::constant(0.0),
            q_d: Profile::constant(0.0),
            a_d: [C64::new(0.0, 0.0); 3],
            kappa,
            shape: None,
        }
    }

    pub fn with_inclusion(shape: ObstacleShape, gamma_d: f64, q_d: f64, kappa: f64) -> Self {
        MediumSpec {
            gamma_d: Profile::constant(gamma_d),
            q_d: Profile::constant(q_d),
            a_d: [C64::new(0.0, 0.0); 3],
            kappa,
            shape: Some(shape),
        }
    }

    /// The same κ with the obstacle removed.
    pub fn background_of(&self) -> Self {
        Self::background(self.kappa)
    }

    pub fn has_first_order(&self) -> bool {
        self.shape.is_some() && self.a_d.iter().any(|a| a.norm() > 0.0)
    }

    pub fn evaluate_coefficients(&self, x: &Point) -> Coefficients {
        match &self.shape {
            Some(s) if s.contains(x) => Coefficients {
                gamma: 1.0 + self.gamma_d.eval(x),
                a: self.a_d,
                n: 1.0 + self.q_d.eval(x),
            },
            _ => Coefficients::BACKGROUND,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return invalid("kappa must be a finite non-negative number");
        }
        if let Some(s) = &self.shape {
            s.check_inside(domain)?;
        }
        for g in self.gamma_d.extremes() {
            if (1.0 + g).re <= 1e-8 {
                return invalid("Re(1 + gamma_D) must stay positive");
            }
        }
        for q in self.q_d.extremes() {
            if (1.0 + q).re <= 1e-8 {
                return invalid("Re(1 + q_D) must stay positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub lhs_small1: f64,
    pub lhs_small2: f64,
    pub omega_n: f64,
    pub domain_volume: f64,
    pub pass: bool,
    pub c0: f64,
    pub c0_tilde: f64,
}

/// Smallness conditions for the split system with coefficients
/// a = γ̃, b = −Ã, c = κ²ñ − D·Ã; the inputs are ‖1/a‖∞, ‖b‖∞, ‖c‖∞.
pub fn check_admissibility(
    a_inv_norm: f64,
    b_norm: f64,
    c_norm: f64,
    kappa: f64,
    domain_volume: f64,
    dim: usize,
) -> Result<AdmissibilityReport> {
    for (name, v) in [
        ("a_inv_norm", a_inv_norm),
        ("b_norm", b_norm),
        ("c_norm", c_norm),
        ("kappa", kappa),
        ("domain_volume", domain_volume),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return invalid(format!("{name} must be finite and non-negative"));
        }
    }
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let omega_n = unit_ball_volume(dim);
    let p = (domain_volume / omega_n).powf(2.0 / dim as f64);
    let k2c2 = kappa * kappa * c_norm * c_norm;
    let lhs_small1 = 0.5 * (1.0 - p * (k2c2 + a_inv_norm));
    let lhs_small2 = 1.0 - 0.5 * p * (b_norm * b_norm + k2c2 + a_inv_norm);
    Ok(AdmissibilityReport {
        lhs_small1,
        lhs_small2,
        omega_n,
        domain_volume,
        pass: lhs_small1 > 0.0 && lhs_small2 > 0.0,
        c0: lhs_small1,
        c0_tilde: lhs_small2,
    })
}

/// Volume giving (|Ω|/ω_n)^{2/n} = p.
pub fn volume_for_poincare_factor(p: f64, dim: usize) -> f64 {
    unit_ball_volume(dim) * p.powf(dim as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coefficient_examples() {
        let m = MediumSpec::with_inclusion(ObstacleShape::ball([0.0; 3], 0.3), 0.5, 1.0, 2.0);
        let inside = m.evaluate_coefficients(&[0.1, 0.0, 0.0]);
        assert_eq!(inside.gamma, C64::new(1.5, 0.0));
        assert_eq!(inside.n, C64::new(2.0, 0.0));
        assert!(inside.a.iter().all(|a| *a == C64::new(0.0, 0.0)));
        assert!(m.evaluate_coefficients(&[0.5, 0.0, 0.0]).is_background());
        let mut m2 = m.clone();
        m2.kappa = 7.0;
        assert_eq!(m2.evaluate_coefficients(&[0.1, 0.0, 0.0]), inside);
    }

    #[test]
    fn admissibility_examples() {
        let v = volume_for_poincare_factor(0.25, 3);
        let r = check_admissibility(1.0, 0.0, 0.0, 1.0, v, 3).unwrap();
        assert!((r.lhs_small1 - 3.0 / 8.0).abs() < 1e-15);
        assert!((r.lhs_small2 - 7.0 / 8.0).abs() < 1e-15);
        assert!(r.pass);
        let r = check_admissibility(0.0, 0.0, 0.0, 1.0, v, 3).unwrap();
        assert_eq!((r.lhs_small1, r.lhs_small2), (0.5, 1.0));
        let v = volume_for_poincare_factor(4.0, 2);
        let r = check_admissibility(1.0, 0.0, 0.0, 1.0, v, 2).unwrap();
        assert!((r.lhs_small1 + 1.5).abs() < 1e-14);
        assert!(!r.pass);
    }

    #[test]
    fn rejects_negative() {
        assert!(check_admissibility(-1.0, 0.0, 0.0, 1.0, 1.0, 3).is_err());
    }

    proptest! {
        #[test]
        fn admissibility_monotone(
            a in 0.0..2.0f64, b in 0.0..2.0f64, c in 0.0..2.0f64,
            k in 0.0..3.0f64, vol in 0.01..10.0f64, which in 0usize..3, bump in 0.0..1.0f64,
        ) {
            let r0 = check_admissibility(a, b, c, k, vol, 3).unwrap();
            let mut n = [a, b, c];
            n[which] += bump;
            let r1 = check_admissibility(n[0], n[1], n[2], k, vol, 3).unwrap();
            prop_assert!(r1.lhs_small1 <= r0.lhs_small1);
            prop_assert!(r1.lhs_small2 <= r0.lhs_small2);
        }

        #[test]
        fn background_outside(x in -1.0..1.0f64, y in -1.0..1.0f64) {
            let m = MediumSpec::with_inclusion(ObstacleShape::ball([0.0; 3], 0.2), 0.5, 1.0, 1.0);
            let p = [x, y, 0.0];
            if (x * x + y * y).sqrt() > 0.2 + 1e-9 {
                prop_assert!(m.evaluate_coefficients(&p).is_background());
            }
        }
    }
}
