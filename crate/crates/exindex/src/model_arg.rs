//! Compact model and innovation specifications for the command line.
//!
//! ```text
//! ar1:PHI                     AR(1) with Cauchy innovations
//! wn:PSI[:INNOV]              random repetition (default innovation uniform)
//! iid[:INNOV]
//! mm:C0,C1,..:B1:B2:C1:C2     moving maxima, second-order Pareto innovations
//! INNOV = uniform | cauchy | pareto:ALPHA | sop:B1:B2:C1:C2
//! ```
//!
//! A value starting with `{` is read as the JSON form of [`ModelSpec`].

use exindex_core::dist::{MarginalDist, SecondOrderPareto};
use exindex_core::sim::{ModelSpec, MovingMaxima};

use crate::error::{AppError, AppResult};

fn bad(spec: &str, why: &str) -> AppError {
    AppError::Config(format!("model `{spec}`: {why}"))
}

fn number(spec: &str, s: &str) -> AppResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| bad(spec, &format!("not a number: {s:?}")))
}

fn innovation(spec: &str, parts: &[&str]) -> AppResult<MarginalDist> {
    let dist = match parts {
        [] | ["uniform"] => MarginalDist::Uniform01,
        ["cauchy"] => MarginalDist::StandardCauchy,
        ["pareto", alpha] => MarginalDist::UnitPareto {
            alpha: number(spec, alpha)?,
        },
        ["sop", b1, b2, c1, c2] => MarginalDist::SecondOrderPareto(SecondOrderPareto::new(
            number(spec, b1)?,
            number(spec, b2)?,
            number(spec, c1)?,
            number(spec, c2)?,
        )?),
        _ => return Err(bad(spec, "unknown innovation")),
    };
    dist.validate()?;
    Ok(dist)
}

pub fn parse_model(spec: &str) -> AppResult<ModelSpec> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        let model: ModelSpec = serde_json::from_str(spec).map_err(|e| bad(spec, &e.to_string()))?;
        model.validate()?;
        return Ok(model);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["ar1", phi] => Ok(ModelSpec::ar1_cauchy(number(spec, phi)?)?),
        ["wn", psi, rest @ ..] => Ok(ModelSpec::random_repetition(
            number(spec, psi)?,
            innovation(spec, rest)?,
        )?),
        ["iid", rest @ ..] => Ok(ModelSpec::iid(innovation(spec, rest)?)?),
        ["mm", coeffs, b1, b2, c1, c2] => {
            let coeffs = coeffs
                .split(',')
                .map(|c| number(spec, c))
                .collect::<AppResult<Vec<_>>>()?;
            let mm = MovingMaxima::new(
                coeffs,
                number(spec, b1)?,
                number(spec, b2)?,
                number(spec, c1)?,
                number(spec, c2)?,
            )?;
            Ok(ModelSpec::MovingMaxima(mm))
        }
        _ => Err(bad(
            spec,
            "expected ar1:PHI, wn:PSI[:INNOV], iid[:INNOV] or mm:COEFFS:B1:B2:C1:C2",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_forms() {
        assert_eq!(
            parse_model("ar1:0.6").unwrap(),
            ModelSpec::ar1_cauchy(0.6).unwrap()
        );
        assert_eq!(
            parse_model("wn:0.6").unwrap(),
            ModelSpec::random_repetition(0.6, MarginalDist::Uniform01).unwrap()
        );
        assert_eq!(
            parse_model("iid:pareto:2").unwrap(),
            ModelSpec::iid(MarginalDist::UnitPareto { alpha: 2.0 }).unwrap()
        );
        let mm = parse_model("mm:1,0.5:2:1:1:0.5").unwrap();
        assert!(matches!(mm, ModelSpec::MovingMaxima(ref m) if m.coeffs() == [1.0, 0.5]));
        assert!(parse_model("ar1:1.5").is_err());
        assert!(parse_model("garch:1").is_err());
    }

    #[test]
    fn json_form_matches_short_form() {
        for short in ["ar1:0.6", "wn:0.3:cauchy", "iid", "mm:1,0.5:2:1:1:0.5"] {
            let model = parse_model(short).unwrap();
            let json = serde_json::to_string(&model).unwrap();
            assert_eq!(parse_model(&json).unwrap(), model, "{json}");
        }
    }
}
