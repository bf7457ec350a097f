//! Feasible phase sets and minimum-angular-distance projection.

use std::f64::consts::PI;

/// Feasible set for the reflection phases. Angles are radians; intervals
/// and discrete values are interpreted on the circle, canonically in
/// (−π, π].
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// Any phase; the projection is the identity.
    FullCircle,
    /// Closed interval `[lo, hi]` with `lo < hi`, both in (−π, π].
    Interval { lo: f64, hi: f64 },
    /// A finite, non-empty set of phases.
    Discrete(Vec<f64>),
}

impl FeasibleSet {
    pub fn interval_deg(lo_deg: f64, hi_deg: f64) -> Self {
        FeasibleSet::Interval {
            lo: lo_deg.to_radians(),
            hi: hi_deg.to_radians(),
        }
    }

    pub fn discrete_deg(values_deg: &[f64]) -> Self {
        FeasibleSet::Discrete(values_deg.iter().map(|v| v.to_radians()).collect())
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            FeasibleSet::FullCircle => Ok(()),
            FeasibleSet::Interval { lo, hi } => {
                if lo >= hi {
                    Err(format!("interval requires lo < hi, got [{lo}, {hi}]"))
                } else if *lo <= -PI || *hi > PI {
                    Err(format!(
                        "interval endpoints must lie in (-π, π], got [{lo}, {hi}]"
                    ))
                } else {
                    Ok(())
                }
            }
            FeasibleSet::Discrete(values) => {
                if values.is_empty() {
                    Err("discrete feasible set must be non-empty".to_string())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn contains(&self, phi: f64) -> bool {
        match self {
            FeasibleSet::FullCircle => true,
            FeasibleSet::Interval { lo, hi } => {
                let w = wrap_angle(phi);
                w >= *lo - 1e-12 && w <= *hi + 1e-12
            }
            FeasibleSet::Discrete(values) => {
                values.iter().any(|&v| angular_distance(phi, v) < 1e-12)
            }
        }
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Distance on the circle, in [0, π].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Minimum-angular-distance projection onto the feasible set. The full
/// circle is the identity; intervals clamp to the nearer endpoint; discrete
/// sets pick the nearest element (first wins on ties).
pub fn project_feasible(phi: f64, set: &FeasibleSet) -> f64 {
    match set {
        FeasibleSet::FullCircle => phi,
        FeasibleSet::Interval { lo, hi } => {
            let w = wrap_angle(phi);
            if w >= *lo && w <= *hi {
                w
            } else if angular_distance(w, *hi) <= angular_distance(w, *lo) {
                *hi
            } else {
                *lo
            }
        }
        FeasibleSet::Discrete(values) => {
            let mut best = values[0];
            let mut best_d = angular_distance(phi, best);
            for &v in &values[1..] {
                let d = angular_distance(phi, v);
                if d < best_d {
                    best = v;
                    best_d = d;
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interior_points_are_untouched() {
        let set = FeasibleSet::interval_deg(-36.0, 36.0);
        assert_relative_eq!(
            project_feasible(20.0_f64.to_radians(), &set).to_degrees(),
            20.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exterior_points_clamp_to_the_nearer_endpoint() {
        let set = FeasibleSet::interval_deg(-36.0, 36.0);
        assert_relative_eq!(
            project_feasible(50.0_f64.to_radians(), &set).to_degrees(),
            36.0,
            epsilon = 1e-12
        );
        // Wraparound: −170° is closer to −36° going clockwise.
        assert_relative_eq!(
            project_feasible(-170.0_f64.to_radians(), &set).to_degrees(),
            -36.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn discrete_projection_picks_the_nearest_element() {
        let set = FeasibleSet::discrete_deg(&[0.0, 180.0]);
        assert_relative_eq!(
            project_feasible(100.0_f64.to_radians(), &set).to_degrees(),
            180.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            project_feasible(-80.0_f64.to_radians(), &set).to_degrees(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn full_circle_is_identity() {
        assert_eq!(project_feasible(7.5, &FeasibleSet::FullCircle), 7.5);
    }

    #[test]
    fn degenerate_sets_fail_validation() {
        assert!(FeasibleSet::interval_deg(40.0, -40.0).validate().is_err());
        assert!(FeasibleSet::Discrete(vec![]).validate().is_err());
    }

    proptest::proptest! {
        /// The projection lands in the set and no set sample is closer.
        #[test]
        fn interval_projection_is_feasible_and_minimal(
            phi in -10.0f64..10.0,
            lo in -3.0f64..0.0,
            width in 0.01f64..3.0,
        ) {
            let hi = (lo + width).min(PI);
            let set = FeasibleSet::Interval { lo, hi };
            set.validate().unwrap();
            let p = project_feasible(phi, &set);
            proptest::prop_assert!(set.contains(p));
            let d = angular_distance(phi, p);
            for i in 0..=20 {
                let sample = lo + (hi - lo) * i as f64 / 20.0;
                proptest::prop_assert!(d <= angular_distance(phi, sample) + 1e-12);
            }
        }

        #[test]
        fn discrete_projection_is_feasible_and_minimal(
            phi in -10.0f64..10.0,
            values in proptest::collection::vec(-3.1f64..3.1, 1..6),
        ) {
            let set = FeasibleSet::Discrete(values.clone());
            let p = project_feasible(phi, &set);
            proptest::prop_assert!(values.contains(&p));
            let d = angular_distance(phi, p);
            for v in &values {
                proptest::prop_assert!(d <= angular_distance(phi, *v) + 1e-12);
            }
        }
    }
}
