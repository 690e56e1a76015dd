//! Viscous-plastic constitutive law.
//!
//! Strain rates split into deviatoric and trace parts, the regularized
//! deformation magnitude Delta, viscosity `zeta = P / (2 Delta)`, ice strength
//! `P = h P* exp(-C (1 - a))`, and the stress tangent needed by the Newton
//! linearization of the momentum equation.

use serde::{Deserialize, Serialize};

pub type Tensor2 = [[f64; 2]; 2];

/// Symmetric strain-rate tensor with its deviatoric/trace split (1/s).
#[derive(Clone, Copy, Debug)]
pub struct StrainRate {
    pub tensor: Tensor2,
    pub deviatoric: Tensor2,
    pub trace: f64,
}

/// Sign of the exponent in the ice-strength law `exp(sign * C (1 - a))`.
///
/// `Negative` is the standard strength law (weaker ice at lower
/// concentration); `Positive` is available for comparison runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthSign {
    Negative,
    Positive,
}

/// Rheology parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RheologyParams {
    /// Ice strength parameter P* (N/m^2).
    pub p_star: f64,
    /// Ice concentration parameter C (dimensionless).
    pub c: f64,
    /// Viscous closure Delta_min (1/s).
    pub delta_min: f64,
    /// Exponent sign in the strength law.
    pub strength_sign: StrengthSign,
}

impl Default for RheologyParams {
    fn default() -> Self {
        RheologyParams {
            p_star: 27.5e3,
            c: 20.0,
            delta_min: 2e-9,
            strength_sign: StrengthSign::Negative,
        }
    }
}

impl RheologyParams {
    pub fn validate(&self) -> Result<(), crate::error::SimError> {
        for (name, v) in [("p_star", self.p_star), ("c", self.c), ("delta_min", self.delta_min)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::error::SimError::config(format!(
                    "rheology parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetrize a velocity gradient into a strain rate.
pub fn strain_rate(grad_v: Tensor2) -> StrainRate {
    let e00 = grad_v[0][0];
    let e11 = grad_v[1][1];
    let e01 = 0.5 * (grad_v[0][1] + grad_v[1][0]);
    let trace = e00 + e11;
    let half_tr = 0.5 * trace;
    StrainRate {
        tensor: [[e00, e01], [e01, e11]],
        deviatoric: [[e00 - half_tr, e01], [e01, e11 - half_tr]],
        trace,
    }
}

fn frobenius(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Regularized deformation magnitude
/// `Delta = sqrt(1/2 e':e' + tr(e)^2 + delta_min^2)`.
///
/// Bounded below by `delta_min` and smooth in the strain rate, so the
/// viscosity and its derivative stay finite through the viscous closure.
pub fn delta(eps: &StrainRate, delta_min: f64) -> f64 {
    let dp_sq = 0.5 * frobenius(&eps.deviatoric, &eps.deviatoric) + eps.trace * eps.trace;
    (dp_sq + delta_min * delta_min).sqrt()
}

/// Ice strength `P = h P* exp(sign * C (1 - a))` (N/m).
pub fn ice_strength(h: f64, a: f64, params: &RheologyParams) -> f64 {
    let sign = match params.strength_sign {
        StrengthSign::Negative => -1.0,
        StrengthSign::Positive => 1.0,
    };
    h * params.p_star * (sign * params.c * (1.0 - a)).exp()
}

/// Viscosity `zeta = P / (2 Delta)` (N s/m).
pub fn viscosity(p: f64, delta: f64) -> f64 {
    p / (2.0 * delta)
}

/// Stress `sigma = 1/2 zeta e' + zeta tr(e) I - P/2 I` (N/m).
pub fn stress(eps: &StrainRate, zeta: f64, p: f64) -> Tensor2 {
    let iso = zeta * eps.trace - 0.5 * p;
    [
        [0.5 * zeta * eps.deviatoric[0][0] + iso, 0.5 * zeta * eps.deviatoric[0][1]],
        [0.5 * zeta * eps.deviatoric[1][0], 0.5 * zeta * eps.deviatoric[1][1] + iso],
    ]
}

/// Directional derivative of the stress with respect to the velocity
/// gradient, evaluated at `eps` and applied to the perturbation `d_grad`.
///
/// Includes the viscosity derivative through Delta; with `freeze_zeta`
/// (Picard linearization) only the frozen-coefficient part remains.
pub fn stress_tangent(
    eps: &StrainRate,
    zeta: f64,
    delta_val: f64,
    d_grad: Tensor2,
    freeze_zeta: bool,
) -> Tensor2 {
    let d_eps = strain_rate(d_grad);
    let iso = zeta * d_eps.trace;
    let mut out = [
        [0.5 * zeta * d_eps.deviatoric[0][0] + iso, 0.5 * zeta * d_eps.deviatoric[0][1]],
        [0.5 * zeta * d_eps.deviatoric[1][0], 0.5 * zeta * d_eps.deviatoric[1][1] + iso],
    ];
    if !freeze_zeta {
        // d(Delta) = (e' : d_e + 2 tr(e) tr(d_e)) / (2 Delta);
        // d(zeta) = -zeta / Delta * d(Delta).
        let d_delta = (frobenius(&eps.deviatoric, &d_eps.tensor)
            + 2.0 * eps.trace * d_eps.trace)
            / (2.0 * delta_val);
        let d_zeta = -zeta / delta_val * d_delta;
        for r in 0..2 {
            for c in 0..2 {
                let mut coeff = 0.5 * eps.deviatoric[r][c];
                if r == c {
                    coeff += eps.trace;
                }
                out[r][c] += d_zeta * coeff;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> RheologyParams {
        RheologyParams::default()
    }

    #[test]
    fn pure_divergence_has_no_deviator() {
        let d = 1e-6;
        let eps = strain_rate([[d, 0.0], [0.0, d]]);
        assert_eq!(eps.trace, 2.0 * d);
        for r in 0..2 {
            for c in 0..2 {
                assert!(eps.deviatoric[r][c].abs() < 1e-20);
            }
        }
    }

    #[test]
    fn pure_shear_symmetrizes() {
        let s = 2e-7;
        let eps = strain_rate([[0.0, s], [0.0, 0.0]]);
        assert_eq!(eps.tensor[0][1], 0.5 * s);
        assert_eq!(eps.tensor[1][0], 0.5 * s);
        assert_eq!(eps.trace, 0.0);
    }

    #[test]
    fn rigid_rotation_gives_zero_strain() {
        let w = 3e-6;
        let eps = strain_rate([[0.0, w], [-w, 0.0]]);
        for r in 0..2 {
            for c in 0..2 {
                assert!(eps.tensor[r][c].abs() < 1e-20);
            }
        }
    }

    #[test]
    fn deviatoric_split_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let g = [[rng.gen::<f64>(), rng.gen::<f64>()], [rng.gen::<f64>(), rng.gen::<f64>()]];
            let eps = strain_rate(g);
            let tr_dev = eps.deviatoric[0][0] + eps.deviatoric[1][1];
            assert!(tr_dev.abs() <= 1e-14 * eps.trace.abs().max(1.0));
            for r in 0..2 {
                for c in 0..2 {
                    let full = eps.deviatoric[r][c] + if r == c { 0.5 * eps.trace } else { 0.0 };
                    assert_relative_eq!(full, eps.tensor[r][c], max_relative = 1e-14, epsilon = 1e-16);
                }
            }
        }
    }

    #[test]
    fn delta_floors_at_viscous_closure() {
        let eps = strain_rate([[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(delta(&eps, 2e-9), 2e-9);
    }

    #[test]
    fn delta_matches_hand_computed_divergence_case() {
        let d = 1e-6;
        let dm = 2e-9;
        let eps = strain_rate([[d, 0.0], [0.0, d]]);
        // Delta_P = sqrt(0 + (2e-6)^2) = 2e-6.
        assert_relative_eq!(delta(&eps, dm), (4e-12 + dm * dm).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn delta_matches_pure_shear_case() {
        // e' with e':e' = 2 s^2 gives Delta_P = s.
        let s = 5e-7;
        let eps = strain_rate([[0.0, s], [s, 0.0]]);
        let dm = 1e-12;
        assert_relative_eq!(delta(&eps, dm), (s * s + dm * dm).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn delta_approaches_plastic_magnitude_for_large_strain() {
        let dm = 2e-9;
        for scale in [1e-6, 1e-4, 1e-2] {
            let eps = strain_rate([[scale, 0.3 * scale], [0.3 * scale, -0.4 * scale]]);
            let with_floor = delta(&eps, dm);
            let pure = delta(&eps, 0.0);
            assert_relative_eq!(with_floor / pure, 1.0, max_relative = 1e-4);
        }
    }

    #[test]
    fn strength_at_full_concentration() {
        assert_relative_eq!(ice_strength(1.0, 1.0, &params()), 27.5e3, max_relative = 1e-14);
        // Both sign conventions agree at a = 1.
        let mut printed = params();
        printed.strength_sign = StrengthSign::Positive;
        assert_relative_eq!(ice_strength(1.0, 1.0, &printed), 27.5e3, max_relative = 1e-14);
    }

    #[test]
    fn strength_vanishes_without_ice() {
        assert_eq!(ice_strength(0.0, 0.7, &params()), 0.0);
    }

    #[test]
    fn strength_at_half_concentration() {
        let p = ice_strength(1.0, 0.5, &params());
        assert_relative_eq!(p, 27.5e3 * (-10.0f64).exp(), max_relative = 1e-12);
        assert!((p - 1.2486).abs() < 1e-3);
    }

    #[test]
    fn strength_increases_in_h_and_a() {
        let p = params();
        assert!(ice_strength(2.0, 0.5, &p) > ice_strength(1.0, 0.5, &p));
        assert!(ice_strength(1.0, 0.9, &p) > ice_strength(1.0, 0.5, &p));
    }

    #[test]
    fn viscosity_examples() {
        assert_relative_eq!(viscosity(27.5e3, 2e-9), 6.875e12, max_relative = 1e-12);
        assert_eq!(viscosity(0.0, 2e-9), 0.0);
        let z1 = viscosity(1.0e3, 1e-8);
        let z2 = viscosity(1.0e3, 2e-8);
        assert_relative_eq!(z1, 2.0 * z2, max_relative = 1e-14);
    }

    #[test]
    fn stress_at_rest_is_compressive() {
        let eps = strain_rate([[0.0, 0.0], [0.0, 0.0]]);
        let p = 100.0;
        let s = stress(&eps, 1e8, p);
        assert_eq!(s[0][0], -50.0);
        assert_eq!(s[1][1], -50.0);
        assert_eq!(s[0][1], 0.0);
    }

    #[test]
    fn stress_pure_shear_keeps_isotropic_part() {
        let sh = 1e-6;
        let eps = strain_rate([[0.0, sh], [sh, 0.0]]);
        let zeta = 2e8;
        let p = 40.0;
        let s = stress(&eps, zeta, p);
        assert_relative_eq!(s[0][1], 0.5 * zeta * sh, max_relative = 1e-14);
        assert_relative_eq!(s[0][0], -0.5 * p, max_relative = 1e-14);
    }

    #[test]
    fn stress_pure_divergence() {
        let d = 1e-6;
        let eps = strain_rate([[d, 0.0], [0.0, d]]);
        let zeta = 3e8;
        let p = 70.0;
        let s = stress(&eps, zeta, p);
        // sigma = (2 zeta d - P/2) I for pure divergence.
        assert_relative_eq!(s[0][0], 2.0 * zeta * d - 0.5 * p, max_relative = 1e-14);
        assert_relative_eq!(s[1][1], s[0][0], max_relative = 1e-14);
        assert!(s[0][1].abs() < 1e-20);
    }

    #[test]
    fn stress_is_symmetric_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prm = params();
        for _ in 0..100 {
            let g = [
                [rng.gen::<f64>() * 1e-5, rng.gen::<f64>() * 1e-5],
                [rng.gen::<f64>() * 1e-5, rng.gen::<f64>() * 1e-5],
            ];
            let eps = strain_rate(g);
            let dl = delta(&eps, prm.delta_min);
            let p = ice_strength(1.0, 0.8, &prm);
            let s = stress(&eps, viscosity(p, dl), p);
            assert_eq!(s[0][1], s[1][0]);
        }
    }

    #[test]
    fn stress_is_frame_indifferent() {
        let prm = params();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let g = [
                [rng.gen::<f64>() * 1e-5 - 5e-6, rng.gen::<f64>() * 1e-5 - 5e-6],
                [rng.gen::<f64>() * 1e-5 - 5e-6, rng.gen::<f64>() * 1e-5 - 5e-6],
            ];
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let (sn, cs) = theta.sin_cos();
            let q = [[cs, -sn], [sn, cs]];
            // g' = Q g Q^T
            let mut qg = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    for k in 0..2 {
                        qg[r][c] += q[r][k] * g[k][c];
                    }
                }
            }
            let mut g_rot = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    for k in 0..2 {
                        g_rot[r][c] += qg[r][k] * q[c][k];
                    }
                }
            }
            let p = ice_strength(1.2, 0.7, &prm);
            let s = |grad: Tensor2| {
                let eps = strain_rate(grad);
                let dl = delta(&eps, prm.delta_min);
                stress(&eps, viscosity(p, dl), p)
            };
            let s0 = s(g);
            let s1 = s(g_rot);
            // Q s0 Q^T
            let mut qs = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    for k in 0..2 {
                        qs[r][c] += q[r][k] * s0[k][c];
                    }
                }
            }
            let mut s0_rot = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    for k in 0..2 {
                        s0_rot[r][c] += qs[r][k] * q[c][k];
                    }
                }
            }
            let scale = s0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            for r in 0..2 {
                for c in 0..2 {
                    assert!(
                        (s1[r][c] - s0_rot[r][c]).abs() <= 1e-12 * scale,
                        "frame indifference violated"
                    );
                }
            }
        }
    }

    #[test]
    fn tangent_matches_central_differences() {
        let prm = params();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let g = [
                [rng.gen::<f64>() * 2e-5 - 1e-5, rng.gen::<f64>() * 2e-5 - 1e-5],
                [rng.gen::<f64>() * 2e-5 - 1e-5, rng.gen::<f64>() * 2e-5 - 1e-5],
            ];
            let dir = [
                [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0],
                [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0],
            ];
            let p = ice_strength(1.0, 0.8, &prm);
            let eps = strain_rate(g);
            let dl = delta(&eps, prm.delta_min);
            let zeta = viscosity(p, dl);
            let analytic = stress_tangent(&eps, zeta, dl, dir, false);

            let eval = |grad: Tensor2| {
                let e = strain_rate(grad);
                let d = delta(&e, prm.delta_min);
                stress(&e, viscosity(p, d), p)
            };
            let step = 1e-7 * 1e-5; // strain-rate scale
            let mut gp = g;
            let mut gm = g;
            for r in 0..2 {
                for c in 0..2 {
                    gp[r][c] += step * dir[r][c];
                    gm[r][c] -= step * dir[r][c];
                }
            }
            let sp = eval(gp);
            let sm = eval(gm);
            let mut max_rel = 0.0f64;
            let scale = analytic.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            for r in 0..2 {
                for c in 0..2 {
                    let fd = (sp[r][c] - sm[r][c]) / (2.0 * step);
                    max_rel = max_rel.max((fd - analytic[r][c]).abs() / scale.max(1e-300));
                }
            }
            assert!(max_rel < 1e-6, "tangent mismatch: {max_rel:.3e}");
        }
    }
}
