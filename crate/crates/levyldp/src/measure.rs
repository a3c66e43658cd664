//! Mark-space measure, time grid, and piecewise-constant controls.
//!
//! The driving noise lives on `[0, T] x marks`, where the mark space is a
//! finite set of atoms with nonnegative masses. A control is a nonnegative
//! intensity multiplier `g`, piecewise constant on the product of the time
//! grid and the mark atoms. Its cost is the relative-entropy functional
//!
//! ```text
//! L_T(g) = sum_{i,j} l(g[i][j]) * mass_j * dt_i,    l(r) = r ln r - r + 1,
//! ```
//!
//! the integral of `l(g)` against `dt x mass`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One atom of the mark space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkCell {
    pub label: String,
    pub mass: f64,
}

/// Finite atomic measure on the mark space.
///
/// Masses are validated nonnegative and finite at construction; the cell
/// list is never empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MarkMeasure {
    cells: Vec<MarkCell>,
}

impl MarkMeasure {
    pub fn new(cells: Vec<MarkCell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyMarkMeasure);
        }
        for c in &cells {
            if !c.mass.is_finite() || c.mass < 0.0 {
                return Err(Error::InvalidMass {
                    label: c.label.clone(),
                    mass: c.mass,
                });
            }
        }
        Ok(Self { cells })
    }

    /// Convenience constructor from masses alone; labels are "c0", "c1", ...
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        Self::new(
            masses
                .iter()
                .enumerate()
                .map(|(j, &mass)| MarkCell {
                    label: format!("c{j}"),
                    mass,
                })
                .collect(),
        )
    }

    pub fn cells(&self) -> &[MarkCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.cells[j].mass
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }
}

impl<'de> Deserialize<'de> for MarkMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cells = Vec::<MarkCell>::deserialize(d)?;
        MarkMeasure::new(cells).map_err(serde::de::Error::custom)
    }
}

/// Uniform partition of `[0, T]` into `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    #[serde(rename = "T")]
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::BadHorizon(horizon));
        }
        if n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Left endpoint of step `i`.
    pub fn t(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.n_steps as f64
    }

    /// Index of the step containing time `t`, clamped to the last step at `t = T`.
    pub fn step_of(&self, t: f64) -> usize {
        let i = (t / self.dt()).floor() as usize;
        i.min(self.n_steps - 1)
    }
}

impl<'de> Deserialize<'de> for TimeGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(rename = "T")]
            horizon: f64,
            n_steps: usize,
        }
        let raw = Raw::deserialize(d)?;
        TimeGrid::new(raw.horizon, raw.n_steps).map_err(serde::de::Error::custom)
    }
}

/// Nonnegative control, piecewise constant on time-grid steps and mark cells.
///
/// Values are stored row-major: `values[i * n_cells + j]` is the multiplier
/// on step `i`, cell `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFunction {
    grid: TimeGrid,
    marks: MarkMeasure,
    values: Vec<f64>,
}

impl ControlFunction {
    pub fn new(grid: TimeGrid, marks: MarkMeasure, values: Vec<f64>) -> Result<Self> {
        let (n, m) = (grid.n_steps(), marks.n_cells());
        if values.len() != n * m {
            return Err(Error::ControlShape {
                rows: values.len() / m.max(1),
                cols: m,
                n_steps: n,
                n_cells: m,
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadControlValue {
                    step: k / m,
                    cell: k % m,
                    value: v,
                });
            }
        }
        Ok(Self { grid, marks, values })
    }

    /// The constant control `g = theta` on every step and cell.
    pub fn constant(grid: TimeGrid, marks: MarkMeasure, theta: f64) -> Result<Self> {
        let len = grid.n_steps() * marks.n_cells();
        Self::new(grid, marks, vec![theta; len])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn marks(&self) -> &MarkMeasure {
        &self.marks
    }

    pub fn value(&self, step: usize, cell: usize) -> f64 {
        self.values[step * self.marks.n_cells() + cell]
    }

    /// Value on the step containing time `t`.
    pub fn value_at(&self, t: f64, cell: usize) -> f64 {
        self.value(self.grid.step_of(t), cell)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_value(&mut self, step: usize, cell: usize, v: f64) -> Result<()> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::BadControlValue { step, cell, value: v });
        }
        let m = self.marks.n_cells();
        self.values[step * m + cell] = v;
        Ok(())
    }

    /// CSV rendering, one row per step and cell with the step's left
    /// endpoint.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t_left,cell,value\n");
        for i in 0..self.grid.n_steps() {
            for j in 0..self.marks.n_cells() {
                out.push_str(&format!(
                    "{i},{:.16e},{j},{:.16e}\n",
                    self.grid.t(i),
                    self.value(i, j)
                ));
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlJson {
    #[serde(rename = "T")]
    horizon: f64,
    n_steps: usize,
    cells: Vec<MarkCell>,
    /// Row-major: `values[i][j]` is step `i`, cell `j`.
    values: Vec<Vec<f64>>,
}

impl Serialize for ControlFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.marks.n_cells();
        ControlJson {
            horizon: self.grid.horizon(),
            n_steps: self.grid.n_steps(),
            cells: self.marks.cells().to_vec(),
            values: self.values.chunks(m).map(|row| row.to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ControlFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ControlJson::deserialize(d)?;
        let grid = TimeGrid::new(raw.horizon, raw.n_steps).map_err(serde::de::Error::custom)?;
        let marks = MarkMeasure::new(raw.cells).map_err(serde::de::Error::custom)?;
        let m = marks.n_cells();
        if raw.values.len() != raw.n_steps || raw.values.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom(format!(
                "control values must be a {} x {} row-major array",
                raw.n_steps, m
            )));
        }
        ControlFunction::new(grid, marks, raw.values.into_iter().flatten().collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Per-jump relative entropy `l(r) = r ln r - r + 1`, with `l(0) = 1` by
/// continuity. Nonnegative, strictly convex, zero exactly at `r = 1`.
pub fn entropy_l(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::NegativeRate(r));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    // Mathematically >= 0; the clamp only removes rounding at r near 1.
    Ok((r * r.ln() - r + 1.0).max(0.0))
}

/// Control cost: integral of `l(g)` against `dt x mass`.
pub fn cost_lt(g: &ControlFunction) -> f64 {
    let dt = g.grid().dt();
    let m = g.marks().n_cells();
    let mut total = 0.0;
    for i in 0..g.grid().n_steps() {
        for j in 0..m {
            // Entries are validated nonnegative at construction.
            total += entropy_l(g.value(i, j)).unwrap() * g.marks().mass(j) * dt;
        }
    }
    total
}

/// Whether `g` lies in the cost sublevel set `{ L_T(g) <= bound }`.
pub fn sublevel_check(g: &ControlFunction, bound: f64) -> bool {
    cost_lt(g) <= bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Frozen reference values, computed independently.
    const L2: f64 = 0.386_294_361_119_890_62; // 2 ln 2 - 1
    const COST_G2_MASS5: f64 = 1.931_471_805_599_453_1; // 5 * l(2)
    const COST_G3_PATCH: f64 = 0.129_583_686_600_432_91; // 0.1 * l(3)

    fn grid(t: f64, n: usize) -> TimeGrid {
        TimeGrid::new(t, n).unwrap()
    }

    #[test]
    fn entropy_at_reference_points() {
        assert_eq!(entropy_l(1.0).unwrap(), 0.0);
        assert_eq!(entropy_l(0.0).unwrap(), 1.0);
        assert!((entropy_l(2.0).unwrap() - L2).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_negative() {
        assert!(entropy_l(-0.1).is_err());
        assert!(entropy_l(f64::NAN).is_err());
    }

    #[test]
    fn cost_of_unit_control_is_zero() {
        let marks = MarkMeasure::from_masses(&[2.0, 3.0]).unwrap();
        let g = ControlFunction::constant(grid(1.0, 8), marks, 1.0).unwrap();
        assert_eq!(cost_lt(&g), 0.0);
    }

    #[test]
    fn cost_of_constant_two_on_mass_five() {
        let marks = MarkMeasure::from_masses(&[5.0]).unwrap();
        let g = ControlFunction::constant(grid(1.0, 16), marks, 2.0).unwrap();
        assert!((cost_lt(&g) - COST_G2_MASS5).abs() < 1e-12);
    }

    #[test]
    fn cost_of_localized_bump() {
        // g = 3 on [0, 0.2] x {cell of mass 0.5}, 1 elsewhere.
        let marks = MarkMeasure::from_masses(&[0.5, 1.5]).unwrap();
        let mut g = ControlFunction::constant(grid(1.0, 5), marks, 1.0).unwrap();
        g.set_value(0, 0, 3.0).unwrap();
        assert!((cost_lt(&g) - COST_G3_PATCH).abs() < 1e-12);
    }

    #[test]
    fn sublevel_membership() {
        let marks = MarkMeasure::from_masses(&[5.0]).unwrap();
        let g = ControlFunction::constant(grid(1.0, 4), marks, 2.0).unwrap();
        assert!(sublevel_check(&g, COST_G2_MASS5 + 1e-9));
        assert!(!sublevel_check(&g, COST_G2_MASS5 - 1e-9));
    }

    #[test]
    fn cost_additive_over_time_and_cells() {
        // Disjoint supports: cost of the combined control equals the sum of
        // the costs of the pieces.
        let marks = MarkMeasure::from_masses(&[1.0, 2.0]).unwrap();
        let mut a = ControlFunction::constant(grid(1.0, 4), marks.clone(), 1.0).unwrap();
        let mut b = a.clone();
        let mut both = a.clone();
        a.set_value(0, 0, 2.5).unwrap();
        b.set_value(3, 1, 0.3).unwrap();
        both.set_value(0, 0, 2.5).unwrap();
        both.set_value(3, 1, 0.3).unwrap();
        assert!((cost_lt(&a) + cost_lt(&b) - cost_lt(&both)).abs() < 1e-14);
    }

    #[test]
    fn zero_cost_forces_unit_control_on_positive_mass() {
        let marks = MarkMeasure::from_masses(&[1.0, 0.0]).unwrap();
        let mut g = ControlFunction::constant(grid(1.0, 3), marks, 1.0).unwrap();
        // Off-unit values on a zero-mass cell are free.
        g.set_value(1, 1, 7.0).unwrap();
        assert_eq!(cost_lt(&g), 0.0);
        // On a positive-mass cell they are not.
        g.set_value(1, 0, 1.5).unwrap();
        assert!(cost_lt(&g) > 0.0);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(MarkMeasure::from_masses(&[]).is_err());
        assert!(MarkMeasure::from_masses(&[-1.0]).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        let marks = MarkMeasure::from_masses(&[1.0]).unwrap();
        assert!(ControlFunction::new(grid(1.0, 2), marks.clone(), vec![1.0; 3]).is_err());
        assert!(ControlFunction::new(grid(1.0, 2), marks, vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn control_json_round_trip() {
        let marks = MarkMeasure::from_masses(&[1.0, 0.5]).unwrap();
        let mut g = ControlFunction::constant(grid(2.0, 3), marks, 1.0).unwrap();
        g.set_value(2, 1, 4.0).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: ControlFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn control_json_rejects_negative_and_ragged() {
        let bad = r#"{"T":1.0,"n_steps":1,"cells":[{"label":"a","mass":1.0}],"values":[[-1.0]]}"#;
        assert!(serde_json::from_str::<ControlFunction>(bad).is_err());
        let ragged =
            r#"{"T":1.0,"n_steps":2,"cells":[{"label":"a","mass":1.0}],"values":[[1.0]]}"#;
        assert!(serde_json::from_str::<ControlFunction>(ragged).is_err());
    }

    #[test]
    fn control_csv_walks_steps_then_cells() {
        let marks = MarkMeasure::from_masses(&[1.0, 0.5]).unwrap();
        let mut g = ControlFunction::constant(grid(1.0, 2), marks, 1.0).unwrap();
        g.set_value(1, 0, 2.0).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "step,t_left,cell,value");
        assert_eq!(lines[1], "0,0.0000000000000000e0,0,1.0000000000000000e0");
        assert_eq!(lines[3], "1,5.0000000000000000e-1,0,2.0000000000000000e0");
    }

    proptest! {
        #[test]
        fn entropy_nonnegative_zero_only_at_one(r in 0.0f64..64.0) {
            let v = entropy_l(r).unwrap();
            prop_assert!(v >= 0.0);
            if (r - 1.0).abs() > 1e-6 {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn entropy_midpoint_convexity(a in 0.0f64..32.0, b in 0.0f64..32.0) {
            let mid = entropy_l(0.5 * (a + b)).unwrap();
            let chord = 0.5 * (entropy_l(a).unwrap() + entropy_l(b).unwrap());
            prop_assert!(mid <= chord + 1e-12);
        }

        #[test]
        fn cost_scales_with_mass(mass in 0.01f64..10.0, theta in 0.0f64..8.0) {
            let marks = MarkMeasure::from_masses(&[mass]).unwrap();
            let g = ControlFunction::constant(TimeGrid::new(1.0, 4).unwrap(), marks, theta).unwrap();
            let expect = entropy_l(theta).unwrap() * mass;
            prop_assert!((cost_lt(&g) - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }
}
