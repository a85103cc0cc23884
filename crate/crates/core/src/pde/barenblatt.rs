//! Source-type (Barenblatt) solution of `u_t = div(|Du|^{p-2} Du)`.
//!
//! ```text
//! B(x, t) = t^{-N/λ} [1 - γ_p (|x| t^{-1/λ})^{p/(p-1)}]_+^{(p-1)/(p-2)}
//! λ = N(p-2) + p,   γ_p = λ^{-1/(p-1)} (p-2)/p
//! ```

pub fn barenblatt(x: &[f64], t: f64, p: f64) -> f64 {
    let n = x.len() as f64;
    let lambda = n * (p - 2.0) + p;
    let gamma_p = lambda.powf(-1.0 / (p - 1.0)) * (p - 2.0) / p;
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xi = r * t.powf(-1.0 / lambda);
    let core = 1.0 - gamma_p * xi.powf(p / (p - 1.0));
    if core <= 0.0 {
        return 0.0;
    }
    t.powf(-n / lambda) * core.powf((p - 1.0) / (p - 2.0))
}

/// Radius of the support of `B(·, t)`.
pub fn support_radius(dim: usize, t: f64, p: f64) -> f64 {
    let lambda = dim as f64 * (p - 2.0) + p;
    let gamma_p = lambda.powf(-1.0 / (p - 1.0)) * (p - 2.0) / p;
    gamma_p.powf(-(p - 1.0) / p) * t.powf(1.0 / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_for_p3_in_1d() {
        for &(x, t) in &[(0.3f64, 1.0f64), (1.2, 1.5), (-2.0, 2.0)] {
            let s = t.powf(-0.25);
            let z = (1.0 - x.abs().powf(1.5) * s.powf(1.5) / 6.0).max(0.0);
            assert!((barenblatt(&[x], t, 3.0) - s * z * z).abs() < 1e-15);
        }
        assert!((support_radius(1, 1.0, 3.0) - 6f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn satisfies_the_equation_pointwise() {
        // centred differences of the flux against the time derivative
        for &p in &[2.5, 3.0, 4.0] {
            for &dim in &[1usize, 2] {
                let t = 1.3;
                let rs = support_radius(dim, t, p);
                for &frac in &[0.2, 0.5, 0.8] {
                    let x0 = frac * rs;
                    let pt = |x: f64| if dim == 1 { vec![x] } else { vec![x, 0.0] };
                    let e = 1e-4;
                    let ut = (barenblatt(&pt(x0), t + e, p) - barenblatt(&pt(x0), t - e, p)) / (2.0 * e);
                    let flux = |r: f64| {
                        let g = (barenblatt(&pt(r + e), t, p) - barenblatt(&pt(r - e), t, p)) / (2.0 * e);
                        r.powi(dim as i32 - 1) * g.abs().powf(p - 2.0) * g
                    };
                    let div = (flux(x0 + e) - flux(x0 - e)) / (2.0 * e) / x0.powi(dim as i32 - 1);
                    assert!((ut - div).abs() < 1e-4 * ut.abs().max(1.0), "p={p} N={dim} x={x0}: {ut} vs {div}");
                }
            }
        }
    }
}
