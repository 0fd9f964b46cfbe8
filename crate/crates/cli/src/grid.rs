use std::str::FromStr;

/// Inclusive arithmetic grid written as `start:stop:step`; a single number is
/// a one-point grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("bad grid value {p:?}: {e}"));
        let g = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Grid { start: v, stop: v, step: 1.0 }
            }
            [a, b, c] => Grid { start: num(a)?, stop: num(b)?, step: num(c)? },
            _ => return Err(format!("grid must be start:stop:step, got {s:?}")),
        };
        if !(g.start.is_finite() && g.stop.is_finite() && g.step.is_finite()) {
            return Err("grid values must be finite".into());
        }
        if g.step <= 0.0 {
            return Err("grid step must be positive".into());
        }
        if g.stop < g.start {
            return Err("grid is empty (stop < start)".into());
        }
        Ok(g)
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inclusive_grid() {
        let g: Grid = "0:1:0.25".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g: Grid = "0.1:0.9:0.1".parse().unwrap();
        assert_eq!(g.points().len(), 9);
        assert_eq!("2".parse::<Grid>().unwrap().points(), vec![2.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        for s in ["", "1:0:0.1", "0:1:0", "0:1", "a:b:c", "0:1:-1"] {
            assert!(s.parse::<Grid>().is_err(), "{s}");
        }
    }
}
