//! Parsers for the compact range and grid arguments.

use crate::error::{CliError, CliResult};

fn invalid(msg: String) -> CliError {
    CliError::Validation(msg)
}

fn number(s: &str) -> CliResult<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| invalid(format!("`{t}` is not a number"))),
    }
}

fn finite(s: &str) -> CliResult<f64> {
    let v = number(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("`{s}` must be finite")))
    }
}

/// `a..b` (inclusive) or a comma list of layer indices.
pub fn layers(spec: &str) -> CliResult<Vec<usize>> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("`{t}` is not a layer index")))
    };
    let out: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
        (a..=b).collect()
    } else {
        spec.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(parse)
            .collect::<CliResult<_>>()?
    };
    if out.is_empty() {
        return Err(invalid(format!("layer range `{spec}` is empty")));
    }
    if out.contains(&0) {
        return Err(invalid("layer indices start at 1".into()));
    }
    Ok(out)
}

/// `start:stop:count` (uniform, endpoints included) or a comma list.
pub fn grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let out = match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (finite(start)?, finite(stop)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| invalid(format!("`{count}` is not a point count")))?;
            if n == 0 || (n == 1 && a != b) || a > b {
                return Err(invalid(format!(
                    "grid `{spec}` needs start <= stop and a usable count"
                )));
            }
            if n == 1 {
                vec![a]
            } else {
                let step = (b - a) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                    .collect()
            }
        }
        [_] => spec
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(finite)
            .collect::<CliResult<Vec<f64>>>()?,
        _ => {
            return Err(invalid(format!(
                "grid `{spec}` is neither start:stop:count nor a list"
            )))
        }
    };
    if out.is_empty() {
        return Err(invalid(format!("grid `{spec}` is empty")));
    }
    Ok(out)
}

/// `A:B`; either end may be `inf`/`-inf`.
pub fn interval(spec: &str) -> CliResult<(f64, f64)> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| invalid(format!("interval `{spec}` must look like A:B")))?;
    let (a, b) = (number(a)?, number(b)?);
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(invalid(format!("interval `{spec}` needs A < B")));
    }
    Ok((a, b))
}

/// `A:B` with finite ends.
pub fn domain(spec: &str) -> CliResult<(f64, f64)> {
    let (a, b) = interval(spec)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid(format!(
            "domain `{spec}` must be a compact interval"
        )));
    }
    Ok((a, b))
}

/// Comma list of hidden widths.
pub fn topology(spec: &str) -> CliResult<relu_regions::network::Topology> {
    let widths = spec
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("`{t}` is not a layer width")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(relu_regions::network::Topology::new(widths)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_ranges() {
        assert_eq!(layers("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(layers("2,5").unwrap(), vec![2, 5]);
        assert!(layers("3..1").is_err());
        assert!(layers("").is_err());
        assert!(layers("0..2").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(grid("0").unwrap(), vec![0.0]);
        assert_eq!(grid("-1:1:5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(grid("0.5,-2").unwrap(), vec![0.5, -2.0]);
        assert!(grid("1:0:3").is_err());
        assert!(grid("0:1:0").is_err());
        assert!(grid("inf").is_err());
        assert!(grid("a").is_err());
    }

    #[test]
    fn intervals() {
        assert_eq!(
            interval("-inf:inf").unwrap(),
            (f64::NEG_INFINITY, f64::INFINITY)
        );
        assert_eq!(interval("-3:3").unwrap(), (-3.0, 3.0));
        assert!(interval("1:1").is_err());
        assert!(domain("0:inf").is_err());
    }

    #[test]
    fn topologies() {
        assert_eq!(topology("10,20").unwrap().hidden_widths(), &[10, 20]);
        assert_eq!(topology("[5]").unwrap().hidden_widths(), &[5]);
        assert!(topology("0").is_err());
        assert!(topology("x").is_err());
    }
}
