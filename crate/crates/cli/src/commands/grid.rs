use rayon::prelude::*;
use unrect::detectors::{construction_directions, direction_set, upsilon, WitnessRow};
use unrect::real::{pow2, real, to_f64};
use unrect::report::{fmt_f64, write_table};
use unrect::Vec2;

use crate::config::{usage, write_file, RunConfig};

/// Cell centres of a `n x n` grid over the window, row-major in `j`.
fn grid_points(cfg: &RunConfig) -> Vec<(usize, usize, Vec2)> {
    let n = cfg.grid;
    let w = &cfg.window;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let fx = (i as f64 + 0.5) / n as f64;
            let fy = (j as f64 + 0.5) / n as f64;
            let x = w.min[0] + fx * (w.max[0] - w.min[0]);
            let y = w.min[1] + fy * (w.max[1] - w.min[1]);
            out.push((i, j, Vec2::from_f64(x, y)));
        }
    }
    out
}

fn join(ks: &[usize]) -> String {
    ks.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows)?;
    Ok(buf)
}

pub fn eval_grid(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let c = cfg.construction()?;
    let depth = cfg.depth_of(&c);
    let rows: Vec<Vec<String>> = grid_points(cfg)
        .into_par_iter()
        .map(|(i, j, z)| {
            let tr = c.trace(z, depth);
            let dh = tr.dh();
            let sigma = tr.stages.last().map_or(1, |s| s.sigma);
            let guarded = tr.stages.iter().any(|s| s.guarded);
            vec![
                i.to_string(),
                j.to_string(),
                fmt_f64(to_f64(z.x)),
                fmt_f64(to_f64(z.y)),
                fmt_f64(to_f64(tr.h())),
                fmt_f64(to_f64(dh.x)),
                fmt_f64(to_f64(dh.y)),
                tr.m().to_string(),
                sigma.to_string(),
                join(&tr.strips()),
                guarded.to_string(),
            ]
        })
        .collect();
    let header = [
        "i", "j", "x", "y", "h", "dh_x", "dh_y", "m", "sigma", "strips", "guarded",
    ];
    cfg.emit(&csv_bytes(&header, &rows)?)
}

pub fn nondiff_map(cfg: &mut RunConfig, min_level: u32, witnesses: Option<&std::path::Path>) -> anyhow::Result<()> {
    let c = cfg.construction()?;
    let depth = cfg.depth_of(&c);
    let dirs = direction_set(cfg.dirs, &construction_directions(&c)).map_err(|e| usage(e.to_string()))?;
    let eps = real(cfg.eps_floor);
    let sq = c.eta().sqrt();
    let view = c.h_view(depth);
    let points = grid_points(cfg);
    let results: Vec<(Vec<String>, WitnessRow)> = points
        .par_iter()
        .map(|&(i, j, z)| {
            let cls = c.classify(z, depth, min_level);
            let up = upsilon(&view, z, eps, &dirs);
            let bound = pow2(-(cls.m as i32)) * sq / 4.0;
            let id = format!("g{i}-{j}");
            let row = vec![
                i.to_string(),
                j.to_string(),
                fmt_f64(to_f64(z.x)),
                fmt_f64(to_f64(z.y)),
                cls.m.to_string(),
                cls.in_tail.to_string(),
                cls.guarded.to_string(),
                cls.h_candidate.to_string(),
                join(&cls.tail_strips),
                fmt_f64(cfg.eps_floor),
                fmt_f64(to_f64(up.value)),
                fmt_f64(to_f64(bound)),
                (up.value >= bound).to_string(),
                id,
            ];
            (row, up.witness.row("h", depth))
        })
        .collect();
    let header = [
        "i",
        "j",
        "x",
        "y",
        "m",
        "in_tail",
        "guarded",
        "h_candidate",
        "tail_strips",
        "eps",
        "zeta",
        "bound",
        "meets_bound",
        "witness_id",
    ];
    let (rows, wits): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    if let Some(p) = witnesses {
        let keyed: Vec<_> = rows
            .iter()
            .zip(&wits)
            .map(|(r, w)| serde_json::json!({ "id": r[13], "witness": w }))
            .collect();
        let mut text = serde_json::to_string_pretty(&keyed)?;
        text.push('\n');
        write_file(p, text.as_bytes())?;
    }
    cfg.emit(&csv_bytes(&header, &rows)?)
}
