//! Number formatting and grid parsing.

/// Formats `x` with 12 significant digits, switching to exponent notation
/// outside `[1e-5, 1e12)`.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

/// Parses either a comma-separated list or `start:stop:count`, the latter
/// giving `count` evenly spaced values including both ends.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty grid".into());
    }
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number {:?} in grid", s.trim()))
            .and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(format!("non-finite value {v} in grid"))
                }
            })
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [single] => single
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(number)
            .collect::<Result<Vec<_>, _>>()?,
        [start, stop, count] => {
            let (a, b) = (number(start)?, number(stop)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| format!("invalid point count {:?}", count.trim()))?;
            match n {
                0 => vec![],
                1 => vec![a],
                _ => (0..n)
                    .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                    .collect(),
            }
        }
        _ => return Err(format!("grid {text:?} is neither a list nor start:stop:count")),
    };
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    Ok(grid)
}
