//! Named data profiles: `constant(c)`, `sine-bump(a)`,
//! `exp-decay(amp, rate[, base])`, `ramp(slope[, intercept])`, `csv:<path>`
//! and, for the initial state only, `steady`. Terms combine with `+`.

use std::path::{Path, PathBuf};

use parctrl_core::fem::Frames;

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Constant(f64),
    /// `a · Π sin(π x_d)`; zero on the boundary of the unit box.
    SineBump(f64),
    /// `base + amp · e^{-rate t}`, uniform in space.
    ExpDecay { amp: f64, rate: f64, base: f64 },
    /// `intercept + slope · x`, with `x` the first coordinate.
    Ramp { slope: f64, intercept: f64 },
    Csv(PathBuf),
    Steady,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub text: String,
    pub terms: Vec<Term>,
}

pub const REGISTRY: &str = "constant, sine-bump, exp-decay, ramp, csv:<path>";

fn args(name: &str, inner: &str, min: usize, max: usize) -> Result<Vec<f64>, String> {
    let vals = inner
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| format!("{name}: '{}' is not a number", a.trim()))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    if vals.len() < min || vals.len() > max {
        let want = if min == max { format!("{min}") } else { format!("{min} to {max}") };
        return Err(format!("{name} takes {want} arguments, got {}", vals.len()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(format!("{name}: arguments must be finite"));
    }
    Ok(vals)
}

fn split_terms(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' if depth == 0 => {
                out.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(text[start..].trim());
    out
}

fn parse_term(t: &str, base_dir: &Path) -> Result<Term, String> {
    if t == "steady" {
        return Ok(Term::Steady);
    }
    if let Some(path) = t.strip_prefix("csv:") {
        let p = Path::new(path.trim());
        return Ok(Term::Csv(if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) }));
    }
    let open = t.find('(').ok_or_else(|| format!("unknown profile '{t}' (expected one of {REGISTRY})"))?;
    if !t.ends_with(')') {
        return Err(format!("profile '{t}' is missing ')'"));
    }
    let name = t[..open].trim();
    let inner = &t[open + 1..t.len() - 1];
    match name {
        "constant" => Ok(Term::Constant(args(name, inner, 1, 1)?[0])),
        "sine-bump" => Ok(Term::SineBump(args(name, inner, 1, 1)?[0])),
        "exp-decay" => {
            let a = args(name, inner, 2, 3)?;
            Ok(Term::ExpDecay {
                amp: a[0],
                rate: a[1],
                base: a.get(2).copied().unwrap_or(0.0),
            })
        }
        "ramp" => {
            let a = args(name, inner, 1, 2)?;
            Ok(Term::Ramp {
                slope: a[0],
                intercept: a.get(1).copied().unwrap_or(0.0),
            })
        }
        other => Err(format!("unknown profile '{other}' (expected one of {REGISTRY})")),
    }
}

impl Profile {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, String> {
        let terms = split_terms(text)
            .into_iter()
            .map(|t| {
                if t.is_empty() {
                    Err(format!("empty term in profile '{text}'"))
                } else {
                    parse_term(t, base_dir)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            text: text.trim().to_string(),
            terms,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            text: format!("constant({c})"),
            terms: vec![Term::Constant(c)],
        }
    }

    pub fn has_steady(&self) -> bool {
        self.terms.contains(&Term::Steady)
    }

    /// Values at `points` for each of `times`; `steady` contributes `steady`
    /// (or an error when `None`).
    pub fn sample(&self, points: &[Vec<f64>], times: &[f64], steady: Option<&[f64]>) -> Result<Frames, String> {
        let mut out = Frames::zeros(times.len(), points.len());
        for term in &self.terms {
            match term {
                Term::Csv(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                    let f = Frames::from_csv(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                    if f.width() != points.len() {
                        return Err(format!(
                            "{}: expected {} value columns, found {}",
                            path.display(),
                            points.len(),
                            f.width()
                        ));
                    }
                    let rows = if f.rows() == times.len() {
                        f
                    } else if times.len() == 1 {
                        Frames::from_rows(vec![f.row(0).to_vec()]).expect("one row")
                    } else {
                        return Err(format!(
                            "{}: expected {} time rows, found {}",
                            path.display(),
                            times.len(),
                            f.rows()
                        ));
                    };
                    out.axpy(1.0, &rows);
                }
                Term::Steady => {
                    let s = steady.ok_or("'steady' is only allowed for v_b")?;
                    for k in 0..times.len() {
                        for (o, v) in out.row_mut(k).iter_mut().zip(s) {
                            *o += v;
                        }
                    }
                }
                analytic => {
                    for (k, &t) in times.iter().enumerate() {
                        for (o, x) in out.row_mut(k).iter_mut().zip(points) {
                            *o += eval(analytic, x, t);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Time-independent values (the `t = 0` sample).
    pub fn vector(&self, points: &[Vec<f64>], steady: Option<&[f64]>) -> Result<Vec<f64>, String> {
        Ok(self.sample(points, &[0.0], steady)?.row(0).to_vec())
    }
}

fn sin_pi(x: f64) -> f64 {
    // Exact zeros on the box boundary keep Dirichlet data consistent.
    if x == 0.0 || x == 1.0 {
        0.0
    } else {
        (std::f64::consts::PI * x).sin()
    }
}

fn eval(term: &Term, x: &[f64], t: f64) -> f64 {
    match *term {
        Term::Constant(c) => c,
        Term::SineBump(a) => a * x.iter().map(|&xi| sin_pi(xi)).product::<f64>(),
        Term::ExpDecay { amp, rate, base } => base + amp * (-rate * t).exp(),
        Term::Ramp { slope, intercept } => intercept + slope * x[0],
        Term::Csv(_) | Term::Steady => unreachable!("handled by sample"),
    }
}
