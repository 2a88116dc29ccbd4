//! Time grids and per-step nodal data.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_k = k * dt`, `k = 0..=steps`, on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidInput("time grid needs at least one step".into()));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidInput(format!("final time must be positive, got {t_final}")));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }
}

/// Dense `(steps + 1) x width` array, one row per time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frames {
    rows: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frames {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self {
            rows,
            width,
            data: vec![0.0; rows * width],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let n = rows.len();
        Ok(Self {
            rows: n,
            width,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Same row repeated at every time level.
    pub fn constant(rows: usize, row: &[f64]) -> Self {
        let mut data = Vec::with_capacity(rows * row.len());
        for _ in 0..rows {
            data.extend_from_slice(row);
        }
        Self {
            rows,
            width: row.len(),
            data,
        }
    }

    pub fn from_fn(rows: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * width);
        for k in 0..rows {
            for i in 0..width {
                data.push(f(k, i));
            }
        }
        Self { rows, width, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Frames) -> bool {
        self.rows == other.rows && self.width == other.width
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Frames) {
        assert!(self.same_shape(other), "frame shapes differ");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &Frames, b: f64) -> Self {
        let mut out = self.scaled(a);
        out.axpy(b, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// CSV with header `step,time,<prefix>0,<prefix>1,...`.
    pub fn to_csv(&self, grid: &TimeGrid, prefix: &str) -> String {
        use std::fmt::Write;
        let mut s = String::from("step,time");
        for i in 0..self.width {
            write!(s, ",{prefix}{i}").unwrap();
        }
        s.push('\n');
        for k in 0..self.rows {
            write!(s, "{},{:.17e}", k, grid.time(k)).unwrap();
            for v in self.row(k) {
                write!(s, ",{v:.17e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parses the format written by [`Frames::to_csv`]; the time column is ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "step" || cols[1] != "time" {
            return Err(Error::InvalidInput(format!("unexpected CSV header '{header}'")));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::InvalidInput(format!(
                    "CSV line {}: expected {} fields, found {}",
                    n + 2,
                    cols.len(),
                    fields.len()
                )));
            }
            let step: usize = fields[0]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("CSV line {}: bad step", n + 2)))?;
            if step != n {
                return Err(Error::InvalidInput(format!("CSV line {}: steps must be 0,1,2,...", n + 2)));
            }
            let row = fields[2..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("CSV line {}: bad number '{f}'", n + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Frames::from_rows(rows)
    }
}

macro_rules! frames_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name(pub Frames);

        impl $name {
            pub fn zeros(grid: &TimeGrid, width: usize) -> Self {
                Self(Frames::zeros(grid.steps() + 1, width))
            }

            pub fn constant(grid: &TimeGrid, row: &[f64]) -> Self {
                Self(Frames::constant(grid.steps() + 1, row))
            }

            pub fn from_fn(
                grid: &TimeGrid,
                width: usize,
                mut f: impl FnMut(f64, usize) -> f64,
            ) -> Self {
                Self(Frames::from_fn(grid.steps() + 1, width, |k, i| f(grid.time(k), i)))
            }

            pub fn scaled(&self, a: f64) -> Self {
                Self(self.0.scaled(a))
            }

            pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
                Self(self.0.combine(a, &other.0, b))
            }

            pub fn matches(&self, grid: &TimeGrid, width: usize) -> bool {
                self.rows() == grid.steps() + 1 && self.width() == width
            }
        }

        impl Deref for $name {
            type Target = Frames;
            fn deref(&self) -> &Frames {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Frames {
                &mut self.0
            }
        }
    };
}

frames_newtype!(
    /// Nodal coefficients over the whole mesh at each time level.
    TimeField
);

frames_newtype!(
    /// Flux values on the `Gamma2` nodes at each time level, ordered as
    /// [`DiscreteOperators::gamma2_nodes`](crate::fem::DiscreteOperators).
    BoundaryControl
);
