use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Ramped sine g(t) = (f²/4)t²𝔄 sin(ωt) for t < 2/f, then 𝔄 sin(ωt),
/// returned with ġ and g̈.
pub fn excitation_signal(t: f64, amplitude: f64, frequency: f64) -> (f64, f64, f64) {
    let w = 2.0 * PI * frequency;
    let (s, c) = (w * t).sin_cos();
    if t < 2.0 / frequency {
        let r = 0.25 * frequency * frequency;
        let (q, qd, qdd) = (r * t * t, 2.0 * r * t, 2.0 * r);
        let g = q * s;
        let gd = qd * s + q * w * c;
        let gdd = qdd * s + 2.0 * qd * w * c - q * w * w * s;
        (amplitude * g, amplitude * gd, amplitude * gdd)
    } else {
        (amplitude * s, amplitude * w * c, -amplitude * w * w * s)
    }
}

/// Sum of weighted Gaussian blobs modulated by 𝔄 sin(ωt).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSourceSpec {
    pub amplitude: f64,
    pub frequency: f64,
    /// Blob centers (x, y).
    pub centers: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    #[serde(default = "default_width")]
    pub sigma_x: f64,
    #[serde(default = "default_width")]
    pub sigma_y: f64,
}

fn default_width() -> f64 {
    5e-4
}

impl GaussianSourceSpec {
    /// Two blobs with weights 1 and −2/3.
    pub fn two_blob(amplitude: f64, frequency: f64, c1: [f64; 2], c2: [f64; 2]) -> Self {
        GaussianSourceSpec {
            amplitude,
            frequency,
            centers: vec![c1, c2],
            weights: vec![1.0, -2.0 / 3.0],
            sigma_x: default_width(),
            sigma_y: default_width(),
        }
    }
}

pub fn gaussian_source(x: f64, y: f64, t: f64, spec: &GaussianSourceSpec) -> f64 {
    let envelope: f64 = spec
        .centers
        .iter()
        .zip(&spec.weights)
        .map(|(c, w)| {
            let dx = (x - c[0]) / spec.sigma_x;
            let dy = (y - c[1]) / spec.sigma_y;
            w * (-(dx * dx) - dy * dy).exp()
        })
        .sum();
    spec.amplitude * (2.0 * PI * spec.frequency * t).sin() * envelope
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const F: f64 = 210e3;

    #[test]
    fn starts_at_rest() {
        assert_eq!(excitation_signal(0.0, 0.01, F), (0.0, 0.0, 0.0));
    }

    #[test]
    fn continuous_at_ramp_end() {
        let t = 2.0 / F;
        let before = excitation_signal(t * (1.0 - f64::EPSILON), 0.01, F);
        let after = excitation_signal(t, 0.01, F);
        // one ulp of the phase ωt is the floor for any difference
        let w = 2.0 * PI * F;
        assert!((before.0 - after.0).abs() <= 4.0 * f64::EPSILON * 0.01 * w * t);
        assert!((before.1 - after.1).abs() <= 4.0 * f64::EPSILON * 0.01 * w * (1.0 + w * t));
        // ramp factor is exactly 1 at the switch
        assert_eq!(after.0, 0.01 * (w * t).sin());
    }

    #[test]
    fn steady_branch() {
        let t = 5.3 / F;
        let (g, gd, gdd) = excitation_signal(t, 0.01, F);
        let w = 2.0 * PI * F;
        assert_eq!(g, 0.01 * (w * t).sin());
        assert_relative_eq!(gd, 0.01 * w * (w * t).cos(), max_relative = 1e-14);
        assert_relative_eq!(gdd, -w * w * g, max_relative = 1e-14);
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-12;
        for &t in &[0.3 / F, 1.1 / F, 1.9 / F, 3.2 / F] {
            let (_, gd, gdd) = excitation_signal(t, 1.0, F);
            let fd1 = (excitation_signal(t + h, 1.0, F).0 - excitation_signal(t - h, 1.0, F).0) / (2.0 * h);
            let fd2 = (excitation_signal(t + h, 1.0, F).1 - excitation_signal(t - h, 1.0, F).1) / (2.0 * h);
            assert_relative_eq!(gd, fd1, max_relative = 1e-5, epsilon = 1e-3);
            assert_relative_eq!(gdd, fd2, max_relative = 1e-5, epsilon = 1e3);
        }
    }

    #[test]
    fn gaussian_examples() {
        let spec = GaussianSourceSpec::two_blob(1e11, F, [0.02, 0.015], [0.01, 0.015]);
        let t0 = 1.0 / F;
        assert!(gaussian_source(0.02, 0.015, t0, &spec).abs() < 1e11 * 1e-9);
        let t = 0.25 / F;
        assert_relative_eq!(gaussian_source(0.02, 0.015, t, &spec), 1e11, max_relative = 1e-12);
        assert_relative_eq!(gaussian_source(0.01, 0.015, t, &spec), -2.0 / 3.0 * 1e11, max_relative = 1e-12);
    }
}
