use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textfmt::{cell, key_values};

use super::evaluate::{Comparison, EvalReport, Summary, NET_NAMES};
use super::metrics::ErrorMap;
use super::receptive::ReceptiveFieldReport;

/// Raster subsampling for the per-sensor threshold-force maps (0.5 mm × 5).
const FIELD_MAP_STEP: usize = 5;

/// Row order of the localization tables (indices into [`NET_NAMES`]).
const TABLE_ORDER: [usize; 5] = [0, 3, 2, 1, 4];

fn put(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn f6(v: f64) -> String {
    cell(v, 6)
}

fn p_value(p: f64) -> String {
    format!("{p:.6e}")
}

fn summary_cells(s: &Summary) -> String {
    format!("{},{}", f6(s.median), f6(s.iqr))
}

fn map_csv(m: &ErrorMap, unit: &str) -> String {
    let mut out = format!("x_center_mm,y_center_mm,count,median_error_{unit}\n");
    for r in 0..m.rows {
        for c in 0..m.cols {
            let i = r * m.cols + c;
            let _ = writeln!(
                out,
                "{},{},{},{}",
                f6(m.x0 + (c as f64 + 0.5) * m.pitch),
                f6(m.y0 + (r as f64 + 0.5) * m.pitch),
                m.counts[i],
                f6(m.medians[i])
            );
        }
    }
    out
}

fn comparison_row(name: &str, c: &Comparison) -> String {
    format!(
        "{name},{},{},{},{},{}\n",
        f6(c.wilcoxon.w_plus),
        f6(c.wilcoxon.w_minus),
        c.wilcoxon.n,
        p_value(c.wilcoxon.p),
        f6(c.cohens_d)
    )
}

/// Writes `report.txt`, `tables/*.csv` and `maps/*.csv` under `dir`.
/// Output is a pure function of the report: no timestamps or paths.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    let t = &report.test;
    let cv = &report.cv;

    let mut ff = String::from("fold,train_median_n,train_iqr_n,val_median_n,val_iqr_n\n");
    for f in &cv.folds {
        let _ = writeln!(ff, "{},{},{}", f.fold, summary_cells(&f.force_train), summary_cells(&f.force_val));
    }
    put(dir, "tables/force_folds.csv", &ff)?;

    let mut lf = String::from("fold,net,train_median_mm,train_iqr_mm,val_median_mm,val_iqr_mm\n");
    for f in &cv.folds {
        for i in TABLE_ORDER {
            let name = NET_NAMES[i];
            let _ =
                writeln!(lf, "{},{name},{},{}", f.fold, summary_cells(&f.loc_train[i]), summary_cells(&f.loc_val[i]));
        }
    }
    put(dir, "tables/loc_folds.csv", &lf)?;

    let mut cs =
        String::from("quantity,median_of_fold_medians,iqr_of_fold_medians,pooled_median,pooled_iqr,pooled_n\n");
    let cv_row = |name: &str, s: &super::evaluate::CvSummary| {
        format!(
            "{name},{},{},{},{},{}\n",
            f6(s.median_of_medians),
            f6(s.iqr_of_medians),
            f6(s.pooled.median),
            f6(s.pooled.iqr),
            s.pooled.n
        )
    };
    cs.push_str(&cv_row("force_n", &cv.force));
    for i in TABLE_ORDER {
        let (name, s) = (NET_NAMES[i], &cv.loc[i]);
        cs.push_str(&cv_row(&format!("{name}_mm"), s));
    }
    put(dir, "tables/cv_summary.csv", &cs)?;

    let mut tm = String::from("quantity,median,iqr,n\n");
    let _ = writeln!(tm, "force_cnn_n,{},{}", summary_cells(&t.force), t.force.n);
    let _ = writeln!(tm, "force_rg_n,{},{}", summary_cells(&t.rg_force_error), t.rg_force_error.n);
    for i in TABLE_ORDER {
        let (name, s) = (NET_NAMES[i], &t.loc[i]);
        let _ = writeln!(tm, "{name}_mm,{},{}", summary_cells(s), s.n);
    }
    let _ = writeln!(tm, "loc_rg_mm,{},{}", summary_cells(&t.rg_loc_error), t.rg_loc_error.n);
    put(dir, "tables/test_metrics.csv", &tm)?;

    put(
        dir,
        "tables/baselines.csv",
        &format!("rg_force_n,rg_loc_x_mm,rg_loc_y_mm\n{},{},{}\n", f6(t.rg_force), f6(t.rg_loc.x), f6(t.rg_loc.y)),
    )?;

    let mut st = String::from("comparison,w_plus,w_minus,n,p,cohens_d\n");
    st.push_str(&comparison_row("force_rg_vs_cnn", &t.force_vs_rg));
    st.push_str(&comparison_row("loc_rg_vs_union", &t.loc_vs_rg));
    put(dir, "tables/stats.csv", &st)?;

    let mut pr = String::from("bin_lo_n,bin_hi_n,count,median_error_n\n");
    for b in &t.profile.bins {
        let _ = writeln!(pr, "{},{},{},{}", f6(b.lo), f6(b.hi), b.count, f6(b.median));
    }
    put(dir, "tables/error_vs_force.csv", &pr)?;

    let rf = &report.receptive;
    write_receptive(rf, dir)?;

    put(dir, "maps/force_error_5mm.csv", &map_csv(&t.force_map, "n"))?;
    put(dir, "maps/loc_error_5mm.csv", &map_csv(&t.loc_map, "mm"))?;
    let mut pairs: Vec<(String, String)> = vec![
        ("test.force.median_n".into(), f6(t.force.median)),
        ("test.force.iqr_n".into(), f6(t.force.iqr)),
        ("test.force.samples".into(), t.force.n.to_string()),
        ("test.rg_force.constant_n".into(), f6(t.rg_force)),
        ("test.rg_force.median_n".into(), f6(t.rg_force_error.median)),
        ("test.rg_force.iqr_n".into(), f6(t.rg_force_error.iqr)),
    ];
    for (name, s) in NET_NAMES.iter().zip(&t.loc) {
        pairs.push((format!("test.loc.{name}.median_mm"), f6(s.median)));
        pairs.push((format!("test.loc.{name}.iqr_mm"), f6(s.iqr)));
    }
    pairs.extend([
        ("test.loc.samples".into(), t.loc[0].n.to_string()),
        ("test.rg_loc.point_mm".into(), format!("{},{}", f6(t.rg_loc.x), f6(t.rg_loc.y))),
        ("test.rg_loc.median_mm".into(), f6(t.rg_loc_error.median)),
        ("test.rg_loc.iqr_mm".into(), f6(t.rg_loc_error.iqr)),
        ("stats.force.p".into(), p_value(t.force_vs_rg.wilcoxon.p)),
        ("stats.force.cohens_d".into(), f6(t.force_vs_rg.cohens_d)),
        ("stats.loc.p".into(), p_value(t.loc_vs_rg.wilcoxon.p)),
        ("stats.loc.cohens_d".into(), f6(t.loc_vs_rg.cohens_d)),
        ("profile.slope_mn_per_n".into(), f6(t.profile.fit.slope * 1000.0)),
        ("profile.intercept_mn".into(), f6(t.profile.fit.intercept * 1000.0)),
        ("profile.r2".into(), f6(t.profile.fit.r2)),
        ("cv.folds".into(), cv.folds.len().to_string()),
        ("cv.force.median_of_fold_medians_n".into(), f6(cv.force.median_of_medians)),
        ("cv.force.iqr_of_fold_medians_n".into(), f6(cv.force.iqr_of_medians)),
        ("cv.force.pooled_median_n".into(), f6(cv.force.pooled.median)),
        ("cv.force.pooled_iqr_n".into(), f6(cv.force.pooled.iqr)),
    ]);
    for (name, s) in NET_NAMES.iter().zip(&cv.loc) {
        pairs.push((format!("cv.loc.{name}.median_of_fold_medians_mm"), f6(s.median_of_medians)));
        pairs.push((format!("cv.loc.{name}.pooled_median_mm"), f6(s.pooled.median)));
    }
    pairs.extend([
        ("receptive.median_hotspot_area_mm2".into(), f6(rf.median_area)),
        ("receptive.lobes".into(), rf.lobe_counts.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
    ]);
    put(dir, "report.txt", &key_values(pairs.iter().map(|(k, v)| (k.as_str(), v.clone()))))
}

/// Writes the receptive-field table and per-sensor threshold-force maps.
pub fn write_receptive(rf: &ReceptiveFieldReport, dir: &Path) -> Result<()> {
    let mut rt = String::from("sensor,hotspot_area_mm2,lobes\n");
    for (i, (a, l)) in rf.hotspot_areas.iter().zip(&rf.lobe_counts).enumerate() {
        let _ = writeln!(rt, "{},{},{l}", i + 1, f6(*a));
    }
    put(dir, "tables/receptive_fields.csv", &rt)?;
    for (s, field) in rf.threshold_force.iter().enumerate() {
        let mut m = String::from("x_mm,y_mm,threshold_force_n\n");
        for r in (0..rf.raster.rows).step_by(FIELD_MAP_STEP) {
            for c in (0..rf.raster.cols).step_by(FIELD_MAP_STEP) {
                let p = rf.raster.point(c, r);
                let v = field[r * rf.raster.cols + c];
                let v = if v.is_finite() { f6(v) } else { String::new() };
                let _ = writeln!(m, "{},{},{v}", f6(p.x), f6(p.y));
            }
        }
        put(dir, &format!("maps/threshold_force_s{:02}.csv", s + 1), &m)?;
    }
    Ok(())
}
