use std::collections::BTreeSet;
use std::fs;

use anyhow::Context;
use rayon::prelude::*;
use unrect::construction::Construction;
use unrect::curves::{
    build_filtration, component_count_check, convex_slope_integral_check, crossing_bound_check, dp_diagnostic,
    strip_slope_integral_check, visited_cells, AtomMode, CellPattern, CrossingConfig, Curve, CurveError, Filtration,
    Region, PRECONDITION_GRID,
};
use unrect::martingale::{
    alternating_sum_check, beta_ratio_process, doob_tail_check, martingale_residual, residual_row, write_check_csv,
    write_process_csv, Direction, Measure,
};
use unrect::real::{real, to_f64};
use unrect::report::{fmt_f64, write_table, CheckRow};
use unrect::Cone;

use crate::cli::{Atoms, CurveArgs};
use crate::config::{failed, load_curves, usage, RunConfig};
use crate::suite::default_suite;

/// Doob tail levels.
pub const LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skipped,
    NotApplicable,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
            Status::NotApplicable => "N/A",
        }
    }
}

struct Entry {
    curve: String,
    id: String,
    row: Option<CheckRow>,
    status: Status,
    note: String,
}

struct Sheet {
    curve: String,
    entries: Vec<Entry>,
}

impl Sheet {
    fn new(curve: &str) -> Self {
        Sheet {
            curve: curve.to_string(),
            entries: Vec::new(),
        }
    }

    fn row(&mut self, row: CheckRow) {
        let status = if row.pass { Status::Pass } else { Status::Fail };
        self.entries.push(Entry {
            curve: self.curve.clone(),
            id: row.id.clone(),
            row: Some(row),
            status,
            note: String::new(),
        });
    }

    fn rows(&mut self, rows: impl IntoIterator<Item = CheckRow>) {
        for r in rows {
            self.row(r);
        }
    }

    /// A check that could not be evaluated: missing hypothesis (N/A) or an
    /// aborted computation (SKIPPED).
    fn blank(&mut self, id: impl Into<String>, err: &CurveError) {
        let status = match err {
            CurveError::Precondition { .. } => Status::NotApplicable,
            _ => Status::Skipped,
        };
        self.entries.push(Entry {
            curve: self.curve.clone(),
            id: id.into(),
            row: None,
            status,
            note: err.to_string(),
        });
    }

    fn na(&mut self, id: impl Into<String>, note: &str) {
        self.entries.push(Entry {
            curve: self.curve.clone(),
            id: id.into(),
            row: None,
            status: Status::NotApplicable,
            note: note.to_string(),
        });
    }
}

fn cell_label(cell: &CellPattern) -> String {
    let s: String = cell
        .sides
        .iter()
        .map(|s| match s {
            0 => '0',
            1 => '+',
            _ => '-',
        })
        .collect();
    if s.is_empty() {
        "root".into()
    } else {
        s
    }
}

fn mode_of(a: Atoms) -> AtomMode {
    match a {
        Atoms::LevelSet => AtomMode::LevelSet,
        Atoms::Interval => AtomMode::Interval,
    }
}

/// Cone width used for every curve hypothesis.
fn delta_of(c: &Construction) -> f64 {
    2.0 * to_f64(c.eta())
}

fn curve_sheet(c: &Construction, depth: usize, curve: &Curve, mode: AtomMode) -> Sheet {
    let cfg = CrossingConfig::default();
    let mut sh = Sheet::new(curve.name());
    let w = c.w();
    let delta = delta_of(c);
    let in_cone = curve
        .cone_violation(&Cone::new(w, real(delta), false), PRECONDITION_GRID)
        .is_none();

    for k in 1..=depth {
        let id = format!("crossing[k={k}]");
        match crossing_bound_check(curve, &Region::strip(&c.stage(k).strip), w, delta, &cfg) {
            Ok(rep) => sh.row(CheckRow { id, ..rep.row }),
            Err(e) => sh.blank(id, &e),
        }
    }

    let filt = match build_filtration(c, curve, depth, mode, &cfg) {
        Ok(f) => f,
        Err(e) => {
            sh.blank("filtration", &e);
            return sh;
        }
    };
    if !filt.is_nested() {
        sh.row(CheckRow::le("filtration.nested", 1.0, 0.0, 0.0));
    }

    for k in 1..=depth {
        for cell in visited_cells(&filt, k) {
            let label = cell_label(&cell);
            let id = format!("convex-slope[k={k},cell={label}]");
            let e = c.stage(k).strip.dir;
            match convex_slope_integral_check(curve, &cell.region(c), e, &cfg) {
                Ok(rep) => sh.row(CheckRow { id, ..rep.row }),
                Err(err) => sh.blank(id, &err),
            }
            match strip_slope_integral_check(c, curve, &filt, &cell, cell.p(), delta) {
                Ok(rep) => sh.rows(rep.rows.into_iter().map(|r| CheckRow {
                    id: format!("{}[cell={label}]", r.id),
                    ..r
                })),
                Err(err) => sh.blank(format!("strip-slope[k={k},cell={label}]"), &err),
            }
        }
    }

    for p in 1..=depth {
        let id = format!("dp[p={p}]");
        if !in_cone {
            sh.na(id, "tangent outside the cone around w");
            continue;
        }
        match dp_diagnostic(c, &filt, p, delta) {
            Ok(rep) => sh.rows(rep.rows),
            Err(err) => sh.blank(id, &err),
        }
    }

    martingale_rows(&mut sh, curve, &filt, w);
    sh
}

fn martingale_rows(sh: &mut Sheet, curve: &Curve, filt: &Filtration, v: unrect::UnitVector) {
    let d = match Direction::new(curve, v) {
        Ok(d) => d,
        Err(e) => {
            for id in ["martingale", "alt", "doob"] {
                sh.na(id, &e.to_string());
            }
            return;
        }
    };
    let m = Measure::Directional(d);
    let x = beta_ratio_process(filt, v);
    sh.row(residual_row(
        "martingale.beta-ratio",
        &martingale_residual(&x, filt, &m),
        filt,
    ));
    sh.rows(alternating_sum_check(&x, filt, &m).rows);
    for lam in LAMBDAS {
        let rep = doob_tail_check(filt, &d, lam);
        sh.rows(rep.rows.into_iter().map(|r| CheckRow {
            id: format!("{}[lambda={lam}]", r.id),
            ..r
        }));
    }
}

fn curves_for(c: &Construction, args: &CurveArgs) -> anyhow::Result<Vec<Curve>> {
    let curves = if args.curves.is_empty() {
        default_suite(c)
    } else {
        load_curves(&args.curves)?
    };
    let mut seen = BTreeSet::new();
    for cv in &curves {
        if !seen.insert(cv.name().to_string()) {
            return Err(usage(format!("duplicate curve name {}", cv.name())));
        }
    }
    Ok(curves)
}

pub fn curve_report(cfg: &mut RunConfig, args: &CurveArgs) -> anyhow::Result<()> {
    let c = cfg.construction()?;
    let depth = cfg.depth_of(&c);
    let curves = curves_for(&c, args)?;
    let mode = mode_of(args.atoms);
    let mut sheets: Vec<Sheet> = curves.par_iter().map(|cv| curve_sheet(&c, depth, cv, mode)).collect();
    let mut shared = Sheet::new("*");
    shared.rows((1..=depth).map(|k| component_count_check(&c, k)));
    sheets.push(shared);

    let mut rows = Vec::new();
    let mut fails = 0;
    for e in sheets.iter().flat_map(|s| &s.entries) {
        if e.status == Status::Fail {
            fails += 1;
        }
        let (lhs, rhs, pass, bar) = match &e.row {
            Some(r) => (fmt_f64(r.lhs), fmt_f64(r.rhs), r.pass.to_string(), fmt_f64(r.error_bar)),
            None => Default::default(),
        };
        rows.push(vec![
            e.curve.clone(),
            e.id.clone(),
            lhs,
            rhs,
            pass,
            bar,
            e.status.as_str().to_string(),
            e.note.clone(),
        ]);
    }
    let mut buf = Vec::new();
    write_table(
        &mut buf,
        &["curve", "lemma_id", "lhs", "rhs", "pass", "error_bar", "status", "note"],
        &rows,
    )?;
    cfg.emit(&buf)?;
    if fails > 0 {
        return Err(failed(format!("{fails} of {} checks failed", rows.len())));
    }
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' {
                ch
            } else {
                '_'
            }
        })
        .collect()
}

pub fn martingale_report(cfg: &mut RunConfig, args: &CurveArgs) -> anyhow::Result<()> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| usage("martingale-report needs --out DIR"))?;
    let c = cfg.construction()?;
    let depth = cfg.depth_of(&c);
    let curves = curves_for(&c, args)?;
    let mode = mode_of(args.atoms);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let w = c.w();
    let mut fails = Vec::new();
    for cv in &curves {
        let d = match Direction::new(cv, w) {
            Ok(d) => d,
            Err(e) => {
                eprintln!("{}: skipped: {e}", cv.name());
                continue;
            }
        };
        let filt = match build_filtration(&c, cv, depth, mode, &CrossingConfig::default()) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("{}: skipped: {e}", cv.name());
                continue;
            }
        };
        let m = Measure::Directional(d);
        let x = beta_ratio_process(&filt, w);
        let res = martingale_residual(&x, &filt, &m);
        let mut checks = vec![residual_row("martingale.beta-ratio", &res, &filt)];
        checks.extend(alternating_sum_check(&x, &filt, &m).rows);
        for lam in LAMBDAS {
            checks.extend(doob_tail_check(&filt, &d, lam).rows.into_iter().map(|r| CheckRow {
                id: format!("{}[lambda={lam}]", r.id),
                ..r
            }));
        }
        let stem = file_stem(cv.name());
        let mut buf = Vec::new();
        write_process_csv(&mut buf, &x, &res)?;
        fs::write(dir.join(format!("{stem}.process.csv")), &buf)?;
        buf.clear();
        write_check_csv(&mut buf, &checks)?;
        fs::write(dir.join(format!("{stem}.checks.csv")), &buf)?;
        fails.extend(
            checks
                .into_iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{}: {}", cv.name(), r.id)),
        );
    }
    if !fails.is_empty() {
        for f in &fails {
            eprintln!("failed: {f}");
        }
        return Err(failed(format!("{} check(s) failed", fails.len())));
    }
    Ok(())
}
