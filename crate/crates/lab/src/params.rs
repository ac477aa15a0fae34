//! Text form of tuning parameters, as accepted on the command line.
//!
//! Accepted forms: `fixed`, `k=5`, `s=3`, `lambda=0.01` and
//! `R*=1.5,2,3;v=1,2,3`. The display form `R*=(1.5,2,3) v=(1,2,3)` written in
//! benchmark output parses as well.

use qbplab_core::{Method, Params};

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

fn single<T: std::str::FromStr>(text: &str, key: &str) -> Result<T, String> {
    let value = text
        .trim()
        .strip_prefix(key)
        .and_then(|rest| rest.trim_start().strip_prefix('='))
        .ok_or_else(|| format!("expected {key}=<value>, got '{text}'"))?;
    value.trim().parse().map_err(|_| format!("invalid value in '{text}'"))
}

pub fn parse_params(method: Method, text: &str) -> Result<Params, String> {
    let text = text.trim();
    match method {
        Method::Lr | Method::Lda => match text {
            "fixed" | "" => Ok(Params::Fixed),
            _ => Err(format!("{method} has no tuning parameters; got '{text}'")),
        },
        Method::PlrLasso | Method::PlrEn | Method::PlrRidge => {
            Ok(Params::Lambda { lambda: single(text, "lambda")? })
        }
        Method::Pclr | Method::PlsLda => Ok(Params::Components { count: single(text, "s")? }),
        Method::Knn => Ok(Params::Neighbors { k: single(text, "k")? }),
        Method::Qbp => {
            let bounds_at = text.find("R*=").ok_or("expected R*=<bounds>;v=<scores>")?;
            let scores_at = text.find("v=").ok_or("expected R*=<bounds>;v=<scores>")?;
            if scores_at < bounds_at {
                return Err("give R* before v".into());
            }
            let bounds = text[bounds_at + 3..scores_at].trim().trim_end_matches(';').trim();
            Ok(Params::Qbp {
                ratio_bounds: numbers(bounds)?,
                max_scores: numbers(text[scores_at + 2..].trim())?,
            })
        }
    }
}
