//! Grid lists for sweep flags: comma-separated numbers and inclusive
//! ranges `start:step:stop`, e.g. `0.1,0.2,0.5:0.5:2`.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("grid list is empty")]
    Empty,
    #[error("`{0}` is not a finite number")]
    Number(String),
    #[error("range `{0}` must have the form start:step:stop with step > 0 and start <= stop")]
    Range(String),
    #[error("grid has more than {MAX_POINTS} points")]
    TooLong,
}

pub const MAX_POINTS: usize = 10_000;

fn number(raw: &str) -> Result<f64, GridError> {
    let t = raw.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(GridError::Number(t.to_string())),
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, GridError> {
    let mut out = Vec::new();
    for item in text.split(',') {
        if item.trim().is_empty() {
            return Err(GridError::Empty);
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(number(v)?),
            [start, step, stop] => {
                let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
                if !(step > 0.0) || start > stop {
                    return Err(GridError::Range(item.trim().to_string()));
                }
                let span = (stop - start) / step;
                if span > MAX_POINTS as f64 {
                    return Err(GridError::TooLong);
                }
                let n = (span + 1e-9).floor() as usize;
                out.extend((0..=n).map(|i| start + i as f64 * step));
            }
            _ => return Err(GridError::Range(item.trim().to_string())),
        }
        if out.len() > MAX_POINTS {
            return Err(GridError::TooLong);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_grid("0.1, 0.2,1").unwrap(), vec![0.1, 0.2, 1.0]);
        assert_eq!(parse_grid("6:2:10").unwrap(), vec![6.0, 8.0, 10.0]);
        let g = parse_grid("0:0.1:0.3").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.3).abs() < 1e-15);
        assert_eq!(parse_grid("1,2:1:3").unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_grid(""), Err(GridError::Empty));
        assert_eq!(parse_grid("1,,2"), Err(GridError::Empty));
        assert!(matches!(parse_grid("x"), Err(GridError::Number(_))));
        assert!(matches!(parse_grid("inf"), Err(GridError::Number(_))));
        assert!(matches!(parse_grid("1:0:2"), Err(GridError::Range(_))));
        assert!(matches!(parse_grid("3:1:2"), Err(GridError::Range(_))));
        assert!(matches!(parse_grid("1:2"), Err(GridError::Range(_))));
        assert_eq!(parse_grid("0:1e-9:1"), Err(GridError::TooLong));
    }
}
