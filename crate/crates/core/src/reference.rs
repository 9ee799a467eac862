//! Published barrier values for the reference parameters
//! `c1 = 4, c2 = 3, lambda = 1, alpha = 2, q = 0.1`, used as fixtures for
//! the `table` command and the acceptance suite.

use crate::error::Result;
use crate::model::ModelParams;

pub const C1: f64 = 4.0;
pub const C2: f64 = 3.0;
pub const LAMBDA: f64 = 1.0;
pub const ALPHA: f64 = 2.0;
pub const Q: f64 = 0.1;

pub fn reference_params() -> Result<ModelParams> {
    ModelParams::exponential(C1, C2, LAMBDA, ALPHA, Q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub a: f64,
    pub b: f64,
    pub u1: f64,
    pub u2: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub number: u8,
    pub caption: &'static str,
    /// Cells in row-major order of the printed table.
    pub cells: Vec<ReferenceCell>,
    /// Best `(a, b)` as reported alongside the table.
    pub reported_argmax: Option<(f64, f64)>,
}

impl ReferenceTable {
    /// Distinct `a` and `b` values in table order, for sweep tables.
    pub fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let mut a: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !a.contains(&c.a) {
                a.push(c.a);
            }
            if !b.contains(&c.b) {
                b.push(c.b);
            }
        }
        (a, b)
    }
}

const SWEEP_A: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
const SWEEP_B: [f64; 6] = [6.0, 8.0, 14.0, 15.0, 20.0, 28.0];

const TABLE1: [[f64; 6]; 4] = [
    [19.85, 27.20, 34.95, 34.93, 32.48, 25.89],
    [16.33, 24.31, 33.82, 34.19, 33.32, 28.03],
    [11.76, 17.74, 28.98, 30.01, 32.54, 31.21],
    [7.22, 11.40, 21.35, 22.59, 27.17, 30.07],
];

const TABLE2: [[f64; 6]; 4] = [
    [19.07, 27.42, 36.51, 36.58, 34.21, 27.34],
    [17.17, 24.34, 35.22, 35.69, 35.01, 29.55],
    [10.94, 17.50, 29.93, 31.07, 33.99, 32.78],
    [6.59, 11.07, 21.86, 23.21, 28.19, 31.43],
];

const POINT_A: f64 = 0.9;
const POINT_B: f64 = 1.8;
const POINT_U1: [f64; 6] = [0.0, 0.1, 0.2, 0.4, 0.7, 0.8];
const POINT_U2: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 0.9, 1.2];

const TABLE3: [[Option<f64>; 6]; 6] = [
    [Some(2.09), Some(1.58), Some(1.11), Some(0.69), Some(0.49), Some(0.03)],
    [Some(2.35), Some(1.81), Some(1.31), Some(0.86), Some(0.65), Some(0.13)],
    [None, Some(2.06), Some(1.53), Some(1.09), Some(0.82), Some(0.25)],
    [None, None, Some(1.98), Some(1.45), Some(1.20), Some(0.53)],
    [None, None, None, Some(2.11), Some(1.83), None],
    [None, None, None, None, Some(2.07), None],
];

fn sweep_table(number: u8, caption: &'static str, u: (f64, f64), values: &[[f64; 6]; 4], best: (f64, f64)) -> ReferenceTable {
    let mut cells = Vec::with_capacity(24);
    for (i, &a) in SWEEP_A.iter().enumerate() {
        for (j, &b) in SWEEP_B.iter().enumerate() {
            cells.push(ReferenceCell {
                a,
                b,
                u1: u.0,
                u2: u.1,
                value: values[i][j],
            });
        }
    }
    ReferenceTable {
        number,
        caption,
        cells,
        reported_argmax: Some(best),
    }
}

/// Reference table 1, 2 or 3.
pub fn table(number: u8) -> Option<ReferenceTable> {
    match number {
        1 => Some(sweep_table(1, "V1 over (a, b) at u = (1, 2)", (1.0, 2.0), &TABLE1, (0.1, 14.0))),
        2 => Some(sweep_table(2, "V1 over (a, b) at u = (2, 3)", (2.0, 3.0), &TABLE2, (0.1, 15.0))),
        3 => {
            let mut cells = Vec::new();
            for (i, &u1) in POINT_U1.iter().enumerate() {
                for (j, &u2) in POINT_U2.iter().enumerate() {
                    if let Some(value) = TABLE3[i][j] {
                        cells.push(ReferenceCell {
                            a: POINT_A,
                            b: POINT_B,
                            u1,
                            u2,
                            value,
                        });
                    }
                }
            }
            Some(ReferenceTable {
                number: 3,
                caption: "V1 over (u1, u2) at a = 0.9, b = 1.8",
                cells,
                reported_argmax: None,
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_counts() {
        assert_eq!(table(1).unwrap().cells.len(), 24);
        assert_eq!(table(2).unwrap().cells.len(), 24);
        assert_eq!(table(3).unwrap().cells.len(), 24);
        assert!(table(4).is_none());
    }

    #[test]
    fn reported_argmax_is_table_max() {
        for n in [1, 2] {
            let t = table(n).unwrap();
            let best = t.cells.iter().fold(t.cells[0], |m, c| if c.value > m.value { *c } else { m });
            assert_eq!(Some((best.a, best.b)), t.reported_argmax);
        }
    }

    #[test]
    fn point_table_lies_below_barrier() {
        for c in table(3).unwrap().cells {
            assert!(c.u1 < c.u2 && c.u2 <= c.b - c.a * c.u1 + 1e-12, "{c:?}");
        }
    }

    #[test]
    fn grid_recovers_axes() {
        let (a, b) = table(1).unwrap().grid();
        assert_eq!(a, SWEEP_A);
        assert_eq!(b, SWEEP_B);
    }
}
