//! Browser bindings: region maps, the Jacobian identity at a chosen triple
//! and the small-ball measure. Each export returns a JSON string.

use polycurve::decomposition::{classify_with, DecompositionConfig};
use polycurve::jacobian::{jacobian_direct, JacobianEngine, QuadratureSpec, Triple};
use polycurve::operator::{ball_measure_check, BallSpec};
use polycurve::svg::region_map;
use polycurve::{ComplexPolynomial, CurveGamma, C64};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse_curve(text: &str) -> Result<CurveGamma, String> {
    serde_json::from_str(text).map_err(|e| format!("curve: {e}"))
}

/// `48z + 72z^2` style, skipping zero coefficients.
pub fn format_poly(p: &ComplexPolynomial) -> String {
    let terms: Vec<String> = p
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| {
            let coef = if c.im == 0.0 {
                format!("{}", c.re)
            } else if c.re == 0.0 {
                format!("{}i", c.im)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            let coef = match (k, coef.as_str()) {
                (0, _) => return coef,
                (_, "1") => String::new(),
                (_, "-1") => "-".into(),
                _ => coef,
            };
            if k == 1 {
                format!("{coef}z")
            } else {
                format!("{coef}z^{k}")
            }
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ").replace("+ -", "- ")
    }
}

/// `eps <= 0` picks the default aperture.
pub fn decompose_json(curve: &str, eps: f64, width: u32) -> Result<String, String> {
    let curve = parse_curve(curve)?;
    let tt = curve.torsion_triple();
    let cfg = DecompositionConfig {
        eps: (eps > 0.0).then_some(eps),
        ..Default::default()
    };
    let report = classify_with(&tt, &cfg).map_err(|e| e.to_string())?;
    let mut counts = std::collections::BTreeMap::new();
    for r in &report.regions {
        *counts
            .entry(format!("{:?} {:?}", r.sigma.region_type, r.sigma.sigma))
            .or_insert(0usize) += 1;
    }
    Ok(json!({
        "torsion": [format_poly(&tt.l1), format_poly(&tt.l2), format_poly(&tt.l3)],
        "epsilon": report.epsilon_used,
        "working_radius": report.working_radius,
        "regions": report.regions.len(),
        "inadmissible": report.inadmissible_count(),
        "flagged": report.flagged_regions.len(),
        "types": counts,
        "svg": region_map(&report, width),
    })
    .to_string())
}

/// `points` holds re, im of z1, z2, z3.
pub fn jacobian_json(curve: &str, points: &[f64], nodes: usize) -> Result<String, String> {
    let curve = parse_curve(curve)?;
    if points.len() != 6 || points.iter().any(|v| !v.is_finite()) {
        return Err("expected six finite numbers".into());
    }
    let z = |i: usize| C64::new(points[2 * i], points[2 * i + 1]);
    let t = Triple::new(z(0), z(1), z(2));
    let q = QuadratureSpec::new(nodes).map_err(|e| e.to_string())?;
    let engine = JacobianEngine::new(&curve).map_err(|e| e.to_string())?;
    let direct = jacobian_direct(&curve, &t);
    let integral = engine.integral(&t, &q).map_err(|e| e.to_string())?;
    Ok(json!({
        "direct": [direct.re, direct.im],
        "integral": [integral.re, integral.im],
        "rel_deviation": (integral - direct).norm() / direct.norm().max(1.0),
    })
    .to_string())
}

pub fn ball_json(x: f64, k_prime: u32) -> Result<String, String> {
    let spec = BallSpec::new(x, k_prime).map_err(|e| e.to_string())?;
    let (sigma, target) = ball_measure_check(&spec);
    Ok(json!({
        "radius": spec.radius,
        "sigma": sigma,
        "target": target,
        "rel_error": (sigma - target).abs() / target,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn decompose(curve: &str, eps: f64, width: u32) -> Result<String, JsError> {
    decompose_json(curve, eps, width).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn jacobian_compare(curve: &str, points: &[f64], nodes: usize) -> Result<String, JsError> {
    jacobian_json(curve, points, nodes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ball_measure(x: f64, k_prime: u32) -> Result<String, JsError> {
    ball_json(x, k_prime).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const MOMENT: &str = r#"{"N": 3, "components": [[[0,0],[1,0]], [[0,0],[0,0],[1,0]], [[0,0],[0,0],[0,0],[1,0]]]}"#;

    #[test]
    fn moment_map_is_one_region() {
        let v: Value = serde_json::from_str(&decompose_json(MOMENT, 0.0, 400).unwrap()).unwrap();
        assert_eq!(v["regions"], 1);
        assert_eq!(v["torsion"], json!(["1", "2", "12"]));
        assert_eq!(v["svg"].as_str().unwrap().matches("<path").count(), 1);
    }

    #[test]
    fn jacobian_matches_on_moment_curve() {
        let v: Value = serde_json::from_str(
            &jacobian_json(MOMENT, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0], 16).unwrap(),
        )
        .unwrap();
        // 6 (z2 - z1)(z3 - z1)(z3 - z2) = 12
        assert!((v["direct"][0].as_f64().unwrap() - 12.0).abs() < 1e-12);
        assert!(v["rel_deviation"].as_f64().unwrap() < 1e-9);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(jacobian_json(MOMENT, &[0.0; 5], 16).is_err());
        assert!(decompose_json("{}", 0.0, 400).is_err());
        assert!(ball_json(-1.0, 0).is_err());
    }

    #[test]
    fn ball_is_one_eighth() {
        let v: Value = serde_json::from_str(&ball_json(1.0, 2).unwrap()).unwrap();
        assert!(v["rel_error"].as_f64().unwrap() < 1e-12);
    }

    #[test]
    fn polynomials_print_compactly() {
        let p = ComplexPolynomial::from_real(&[0.0, 48.0, 72.0]);
        assert_eq!(format_poly(&p), "48z + 72z^2");
        assert_eq!(
            format_poly(&ComplexPolynomial::from_real(&[1.0, -1.0])),
            "1 - z"
        );
    }
}
