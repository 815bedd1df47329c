//! Scaling-law fits over rows of a sweep CSV.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use msinject::analysis::{convert_axis, fit_linear, fit_quadratic, AnalysisError, FitPoint, FitResult};
use msinject::noise::ModelKind;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: csv::Error },
    #[error("malformed CSV: {0}")]
    Malformed(#[from] csv::Error),
    #[error("selection: {0}")]
    Selection(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitKind {
    Quadratic,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Total,
    Xl,
    Zl,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Total => "total",
            Component::Xl => "xl",
            Component::Zl => "zl",
        })
    }
}

/// The columns a fit needs; other columns are ignored.
#[derive(Clone, Debug, Deserialize)]
pub struct CsvRow {
    pub scheme: String,
    pub model: String,
    pub p: f64,
    pub dx2: usize,
    pub dz2: usize,
    pub eps_total: Option<f64>,
    pub eps_total_sem: Option<f64>,
    pub eps_xl: Option<f64>,
    pub eps_xl_sem: Option<f64>,
    pub eps_zl: Option<f64>,
    pub eps_zl_sem: Option<f64>,
}

impl CsvRow {
    fn value(&self, c: Component) -> Option<(f64, f64)> {
        match c {
            Component::Total => self.eps_total.zip(self.eps_total_sem),
            Component::Xl => self.eps_xl.zip(self.eps_xl_sem),
            Component::Zl => self.eps_zl.zip(self.eps_zl_sem),
        }
    }

    fn size(&self) -> (usize, usize) {
        (self.dx2, self.dz2)
    }
}

/// Which rows enter the fit. Empty fields take the defaults: the two largest
/// sizes and the lower half of each size's `p` values.
#[derive(Clone, Debug, Default)]
pub struct Selection {
    pub scheme: Option<String>,
    pub sizes: Vec<(usize, usize)>,
    pub p_max: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub kind: FitKind,
    pub component: Component,
    pub scheme: String,
    pub model: ModelKind,
    pub sizes: Vec<(usize, usize)>,
    pub fit: FitResult,
    /// Coefficient and error re-expressed on the `p_CX` axis.
    pub cx_coefficient: f64,
    pub cx_stderr: f64,
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.sizes.iter().map(|(x, z)| format!("{x}x{z}")).collect();
        let law = match self.kind {
            FitKind::Quadratic => "^2",
            FitKind::Linear => "",
        };
        writeln!(
            f,
            "fit eps_{} = c * p{law}  scheme {}  model {}  sizes {}",
            self.component,
            self.scheme,
            self.model,
            sizes.join(",")
        )?;
        writeln!(f, "points {}", self.fit.points)?;
        writeln!(f, "c (p axis)    = {:.6e} +/- {:.6e}", self.fit.coefficient, self.fit.stderr)?;
        writeln!(f, "c (p_cx axis) = {:.6e} +/- {:.6e}", self.cx_coefficient, self.cx_stderr)?;
        writeln!(f, "reduced_chi2  = {:.4}", self.fit.reduced_chi2)
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<CsvRow>, FitError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| FitError::Read { path: path.display().to_string(), source })?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn parse_size(s: &str) -> Option<(usize, usize)> {
    let (x, z) = s.split_once('x')?;
    Some((x.trim().parse().ok()?, z.trim().parse().ok()?))
}

fn model_kind(s: &str) -> Result<ModelKind, FitError> {
    match s {
        "A" => Ok(ModelKind::A),
        "B" => Ok(ModelKind::B),
        _ => Err(FitError::Selection(format!("unknown model {s:?}"))),
    }
}

fn single<'a>(what: &str, values: impl Iterator<Item = &'a str>) -> Result<String, FitError> {
    let set: BTreeSet<&str> = values.collect();
    match set.len() {
        1 => Ok(set.into_iter().next().expect("one").to_string()),
        0 => Err(FitError::Selection("no rows selected".into())),
        _ => Err(FitError::Selection(format!("rows mix several {what}s: {set:?}"))),
    }
}

pub fn fit_rows(rows: &[CsvRow], kind: FitKind, component: Component, sel: &Selection) -> Result<FitReport, FitError> {
    let rows: Vec<&CsvRow> = rows.iter().filter(|r| sel.scheme.as_deref().is_none_or(|s| r.scheme == s)).collect();
    let scheme = single("scheme", rows.iter().map(|r| r.scheme.as_str()))?;
    let model = model_kind(&single("model", rows.iter().map(|r| r.model.as_str()))?)?;
    let sizes: Vec<(usize, usize)> = if sel.sizes.is_empty() {
        let mut all: Vec<(usize, usize)> = rows.iter().map(|r| r.size()).collect::<BTreeSet<_>>().into_iter().collect();
        all.sort_by_key(|&(x, z)| (x * z, x));
        all.into_iter().rev().take(2).collect()
    } else {
        sel.sizes.clone()
    };
    let mut points = Vec::new();
    for &size in &sizes {
        let mut ps: Vec<&CsvRow> = rows.iter().copied().filter(|r| r.size() == size).collect();
        ps.sort_by(|a, b| a.p.total_cmp(&b.p));
        let keep = match sel.p_max {
            Some(m) => ps.iter().filter(|r| r.p <= m).count(),
            None => ps.len().div_ceil(2),
        };
        points.extend(ps[..keep].iter().filter_map(|r| r.value(component).map(|(y, sem)| FitPoint { p: r.p, y, sem })));
    }
    let fit = match kind {
        FitKind::Quadratic => fit_quadratic(&points)?,
        FitKind::Linear => fit_linear(&points)?,
    };
    Ok(FitReport {
        kind,
        component,
        scheme,
        model,
        sizes,
        cx_coefficient: convert_axis(fit.coefficient, fit.exponent, model),
        cx_stderr: convert_axis(fit.stderr, fit.exponent, model),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, size: (usize, usize), p: f64, zl: f64) -> CsvRow {
        CsvRow {
            scheme: scheme.into(),
            model: "A".into(),
            p,
            dx2: size.0,
            dz2: size.1,
            eps_total: Some(zl),
            eps_total_sem: Some(1e-6),
            eps_xl: Some(0.0),
            eps_xl_sem: Some(0.0),
            eps_zl: Some(zl),
            eps_zl_sem: Some(1e-6),
        }
    }

    fn grid(scheme: &str, f: impl Fn(f64) -> f64) -> Vec<CsvRow> {
        let mut v = Vec::new();
        for size in [(3, 5), (3, 15), (5, 25)] {
            for p in [1e-4, 2e-4, 3e-4, 4e-4] {
                v.push(row(scheme, size, p, f(p)));
            }
        }
        v
    }

    #[test]
    fn default_selection_uses_two_largest_sizes_and_low_p() {
        // Values off the law above p = 2e-4 and at 3x5 must be ignored.
        let mut rows = grid("zz", |p| if p <= 2e-4 { 4480.0 * p * p } else { 1.0 });
        for r in rows.iter_mut().filter(|r| r.dz2 == 5) {
            r.eps_zl = Some(0.5);
        }
        let rep = fit_rows(&rows, FitKind::Quadratic, Component::Zl, &Selection::default()).unwrap();
        assert_eq!(rep.sizes, [(5, 25), (3, 15)]);
        assert_eq!(rep.fit.points, 4);
        assert!((rep.fit.coefficient - 4480.0).abs() < 1e-6);
        assert!((rep.cx_coefficient - 11.2).abs() < 1e-9);
    }

    #[test]
    fn explicit_selection() {
        let rows = grid("standard", |p| 11.6 * p);
        let sel = Selection { scheme: None, sizes: vec![(3, 15)], p_max: Some(1.0) };
        let rep = fit_rows(&rows, FitKind::Linear, Component::Zl, &sel).unwrap();
        assert_eq!(rep.fit.points, 4);
        assert!((rep.fit.coefficient - 11.6).abs() < 1e-9);
        assert!((rep.cx_coefficient - 0.58).abs() < 1e-12);
        assert!(rep.to_string().contains("c (p_cx axis) = 5.800000e-1"));
    }

    #[test]
    fn mixed_or_empty_selections_are_errors() {
        let mut rows = grid("zz", |p| p);
        rows.extend(grid("standard", |p| p));
        let e = fit_rows(&rows, FitKind::Linear, Component::Zl, &Selection::default()).unwrap_err();
        assert!(matches!(e, FitError::Selection(_)));
        let sel = Selection { scheme: Some("zzz".into()), ..Selection::default() };
        assert!(matches!(fit_rows(&rows, FitKind::Linear, Component::Zl, &sel), Err(FitError::Selection(_))));
        let sel = Selection { scheme: Some("zz".into()), sizes: vec![(7, 7)], p_max: None };
        assert!(matches!(fit_rows(&rows, FitKind::Linear, Component::Zl, &sel), Err(FitError::Analysis(_))));
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_size("3x15"), Some((3, 15)));
        assert_eq!(parse_size("3*15"), None);
    }
}
