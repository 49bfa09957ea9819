use std::f64::consts::PI;

use super::PipelineError;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    x - two_pi * ((x - PI) / two_pi).ceil()
}

/// Consecutive-sample phase differences, wrapped into `(-pi, pi]`.
pub fn phase_difference(phases: &[f64]) -> Result<Vec<f64>, PipelineError> {
    if phases.len() < 2 {
        return Err(PipelineError::SeriesTooShort {
            len: phases.len(),
            needed: 1,
        });
    }
    Ok(phases.windows(2).map(|w| wrap_phase(w[1] - w[0])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_differences() {
        let d = phase_difference(&[0.5, 0.7, 0.4]).unwrap();
        assert!((d[0] - 0.2).abs() < 1e-12 && (d[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn wraps_across_pi() {
        let d = phase_difference(&[3.1, -3.1]).unwrap();
        // -6.2 + 2 pi
        assert!((d[0] - 0.083_185_307_179_586_2).abs() < 1e-12, "{}", d[0]);
    }

    #[test]
    fn wrap_interval_is_half_open() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn too_short() {
        assert!(phase_difference(&[1.0]).is_err());
        assert!(phase_difference(&[]).is_err());
    }

    proptest! {
        #[test]
        fn constant_offset_cancels(
            truth in prop::collection::vec(-1.0f64..1.0, 2..64),
            offset in -2.0f64..2.0,
        ) {
            let shifted: Vec<f64> = truth.iter().map(|t| t + offset).collect();
            let a = phase_difference(&truth).unwrap();
            let b = phase_difference(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn ramp_becomes_constant(start in -3.0f64..3.0, slope in -3.0f64..3.0, n in 2usize..200) {
            let ramp: Vec<f64> = (0..n).map(|i| wrap_phase(start + slope * i as f64)).collect();
            let d = phase_difference(&ramp).unwrap();
            prop_assert_eq!(d.len(), n - 1);
            for v in d {
                prop_assert!((wrap_phase(v - slope)).abs() <= 1e-9);
            }
        }

        #[test]
        fn wrapped_range(x in -100.0f64..100.0) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((x - w) / (2.0 * PI) - ((x - w) / (2.0 * PI)).round()).abs() < 1e-9);
        }
    }
}
