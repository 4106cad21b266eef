//! Vector fields on the bundle given as closures of natural coordinates,
//! with finite-difference frame derivatives and Lie brackets.
//!
//! A field returns its adapted-frame components (flat, horizontal block
//! first) at natural coordinates `y = (x, t)`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::sasaki::SasakiBundle;

/// Adapted components as a function of natural coordinates.
pub type FieldFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Scalar function of natural coordinates.
pub type ScalarFn<'a> = &'a dyn Fn(&[f64]) -> Result<f64>;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Horizontal lift of the base field `x ↦ X(x)`.
pub fn horizontal_field<F>(n: usize, fiber_dim: usize, base: F) -> FieldFn
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(move |y: &[f64]| {
        let mut out = base(&y[..n]);
        out.resize(n + fiber_dim, 0.0);
        Ok(out)
    })
}

/// Vertical lift of the tensor field `x ↦ A(x)` (flattened components).
pub fn vertical_field<F>(n: usize, base: F) -> FieldFn
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(move |y: &[f64]| {
        let mut out = vec![0.0; n];
        out.extend(base(&y[..n]));
        Ok(out)
    })
}

/// Field whose adapted components are quadratic polynomials in `y - y0`
/// with seeded random coefficients in `[-1, 1]`. `blocks` masks which
/// blocks are nonzero as `(horizontal, vertical)`.
pub fn random_polynomial_field(rng: &mut ChaCha8Rng, n: usize, dim: usize, y0: &[f64], blocks: (bool, bool)) -> FieldFn {
    let mut c0 = vec![0.0; dim];
    let mut c1 = vec![0.0; dim * dim];
    let mut c2 = vec![0.0; dim * dim];
    for a in 0..dim {
        let on = if a < n { blocks.0 } else { blocks.1 };
        if !on {
            continue;
        }
        c0[a] = rng.random_range(-1.0..1.0);
        for m in 0..dim {
            c1[a * dim + m] = rng.random_range(-1.0..1.0);
            c2[a * dim + m] = 0.5 * rng.random_range(-1.0..1.0);
        }
    }
    let y0 = y0.to_vec();
    Arc::new(move |y: &[f64]| {
        Ok((0..dim)
            .map(|a| {
                let mut v = c0[a];
                for m in 0..dim {
                    let d = y[m] - y0[m];
                    v += c1[a * dim + m] * d + c2[a * dim + m] * d * d;
                }
                v
            })
            .collect())
    })
}

/// Field with the same adapted components everywhere.
pub fn constant_field(w: Vec<f64>) -> FieldFn {
    Arc::new(move |_: &[f64]| Ok(w.clone()))
}

/// Natural-coordinate components of `field` at `y`.
pub fn natural_components(bundle: &SasakiBundle, field: &FieldFn, y: &[f64]) -> Result<Vec<f64>> {
    let b = bundle.at_order(y, 1)?;
    Ok(b.natural(&field(y)?))
}

fn shifted(y: &[f64], dir: &[f64], s: f64) -> Vec<f64> {
    y.iter().zip(dir).map(|(a, d)| a + s * d).collect()
}

/// `X(φ)` at `y`.
pub fn directional_derivative(bundle: &SasakiBundle, x: &FieldFn, phi: ScalarFn, y: &[f64], h: f64) -> Result<f64> {
    let dir = natural_components(bundle, x, y)?;
    Ok((phi(&shifted(y, &dir, h))? - phi(&shifted(y, &dir, -h))?) / (2.0 * h))
}

/// Adapted components of `[X, Y]` at `y`.
pub fn lie_bracket(bundle: &SasakiBundle, x: &FieldFn, y_field: &FieldFn, y: &[f64], h: f64) -> Result<Vec<f64>> {
    let xn = natural_components(bundle, x, y)?;
    let yn = natural_components(bundle, y_field, y)?;
    let yp = natural_components(bundle, y_field, &shifted(y, &xn, h))?;
    let ym = natural_components(bundle, y_field, &shifted(y, &xn, -h))?;
    let xp = natural_components(bundle, x, &shifted(y, &yn, h))?;
    let xm = natural_components(bundle, x, &shifted(y, &yn, -h))?;
    let nat: Vec<f64> = (0..xn.len())
        .map(|k| ((yp[k] - ym[k]) - (xp[k] - xm[k])) / (2.0 * h))
        .collect();
    Ok(bundle.at_order(y, 1)?.adapted(&nat))
}

/// `g(X, Y)` at `y` for the bundle metric.
pub fn metric_of(bundle: &SasakiBundle, x: &FieldFn, y_field: &FieldFn, y: &[f64]) -> Result<f64> {
    let b = bundle.at_order(y, 1)?;
    Ok(b.metric.inner_flat(&x(y)?, &y_field(y)?))
}

/// Field obtained by applying a pointwise linear map to the adapted
/// components of `field`.
pub fn map_field<F>(field: FieldFn, map: F) -> FieldFn
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    Arc::new(move |y: &[f64]| Ok(map(&field(y)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{ManifoldChart, Preset};
    use crate::frames::adapted_brackets;
    use crate::sasaki::RescaleFunction;

    fn sphere() -> SasakiBundle {
        let chart = ManifoldChart::preset(&Preset::Sphere(1.0)).unwrap();
        SasakiBundle::new(chart, RescaleFunction::constant(1.0), 1, 1).unwrap()
    }

    #[test]
    fn frame_field_brackets_match_structure_constants() {
        let sb = sphere();
        let y = [1.0, 0.4, 0.3, -0.5, 0.8, 0.1];
        let b = sb.at(&y).unwrap();
        let c = adapted_brackets(&b.p, &b.geom);
        for a in 0..6 {
            for bb in 0..6 {
                let mut ea = vec![0.0; 6];
                ea[a] = 1.0;
                let mut eb = vec![0.0; 6];
                eb[bb] = 1.0;
                let br = lie_bracket(&sb, &constant_field(ea), &constant_field(eb), &y, FD_STEP).unwrap();
                for (d, v) in br.iter().enumerate() {
                    assert!((v - c.get(d, a, bb)).abs() < 1e-8, "{a} {bb} {d}: {v} vs {}", c.get(d, a, bb));
                }
            }
        }
    }

    #[test]
    fn lifted_fields_have_expected_blocks() {
        let hf = horizontal_field(2, 4, |x: &[f64]| vec![x[0], 1.0]);
        let v = hf(&[0.5, 0.1, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, vec![0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let vf = vertical_field(2, |x: &[f64]| vec![x[1], 0.0, 0.0, 1.0]);
        let v = vf(&[0.5, 0.1, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.1, 0.0, 0.0, 1.0]);
    }
}
