use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cordscan::classify::{combo_label, run_combinations, SplitConfig, TABLE2_COMBOS};
use cordscan::io::{read_scheme, read_volume, write_scheme, write_volume};
use cordscan::models::{fit_volume, FitConfig, ModelChoice};
use cordscan::phantom::{generate, PhantomSpec};
use cordscan::regions::{
    build_cohort, lesion_stats, select_ms_rows, summarize_subject, CohortRow, CohortTable, Group, RowClass,
    Weighting,
};
use cordscan::stats::{correlation_matrix, level_pooling, pooling_report, welch as welch_test};
use cordscan::{LabelMap, Metric, Volume};
use serde_json::json;

use crate::error::{require_files, CliError};
use crate::util::{create_dir, parse_combos, parse_levels, parse_thresholds, sidecar_path, write_sidecar};
use crate::{AggregateArgs, ClassifyArgs, CorrArgs, FitArgs, LevelsArgs, PhantomArgs, WelchArgs};

fn save(v: &Volume, dir: &Path, name: &str) -> Result<(), CliError> {
    Ok(write_volume(v, dir.join(format!("{name}.nii.gz")))?)
}

pub fn phantom(a: &PhantomArgs) -> Result<(), CliError> {
    let mut spec = match &a.spec {
        Some(p) => {
            require_files([p])?;
            let text = std::fs::read_to_string(p).map_err(|e| CliError::write(p, e))?;
            serde_json::from_str::<PhantomSpec>(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
        }
        None => PhantomSpec::default(),
    };
    spec.seed = a.seed;
    println!("seed: {}", a.seed);
    let start = Instant::now();
    let out = generate(&spec)?;
    create_dir(&a.out)?;
    save(&out.dwi, &a.out, "dwi")?;
    write_scheme(&out.scheme, a.out.join("bval"), a.out.join("bvec"))?;
    save(&out.labels.levels, &a.out, "levels")?;
    save(&out.labels.wm_weight, &a.out, "wm")?;
    let lesion = match &out.labels.lesion {
        Some(l) => l.clone(),
        None => out.labels.levels.zeros_like(None),
    };
    save(&lesion, &a.out, "lesion")?;
    save(&out.cord_mask(), &a.out, "mask")?;
    for (name, v) in &out.truth {
        save(v, &a.out, &format!("truth_{name}"))?;
    }
    let params = json!({
        "spec": spec,
        "lesion_voxels": out.lesion_voxels,
        "level_voxels": out.level_voxels,
    });
    write_sidecar(&a.out.join("phantom.json"), "phantom", Some(a.seed), params)?;
    let cord: usize = out.level_voxels.values().sum();
    println!(
        "phantom: {:?} x {} volumes, {cord} cord voxels, {} lesion voxels in {:.2}s",
        spec.dims,
        out.scheme.len(),
        out.lesion_voxels.values().sum::<usize>(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn fit(a: &FitArgs, threads: Option<usize>) -> Result<(), CliError> {
    require_files([&a.dwi, &a.bval, &a.bvec, &a.mask])?;
    let model: ModelChoice = a.model.parse().map_err(CliError::Input)?;
    if !(a.lambda_perp >= 0.0) || !(a.d0 > 0.0) {
        return Err(CliError::input("--lambda-perp must be >= 0 and --d0 > 0"));
    }
    let scheme = read_scheme(&a.bval, &a.bvec)?;
    let dwi = read_volume(&a.dwi)?;
    let mask = read_volume(&a.mask)?;
    let cfg = FitConfig {
        d0: a.d0,
        lambda_perp: a.lambda_perp,
        ..FitConfig::default()
    };
    let n_mask = mask.data().iter().filter(|&&m| m != 0.0).count();
    if n_mask == 0 {
        return Err(CliError::input(format!("{}: mask is empty", a.mask.display())));
    }
    let start = Instant::now();
    let out = fit_volume(&dwi, &scheme, &mask, model, &cfg, threads)?;
    let secs = start.elapsed().as_secs_f64();
    create_dir(&a.out)?;
    for (name, v) in &out.maps {
        save(v, &a.out, name)?;
    }
    let params = json!({
        "dwi": a.dwi, "bval": a.bval, "bvec": a.bvec, "mask": a.mask,
        "model": a.model, "lambda_perp": a.lambda_perp, "d0": a.d0,
        "fitted": out.fitted, "failed": out.failed, "degenerate": out.degenerate,
    });
    write_sidecar(&a.out.join("fit.json"), "fit", None, params)?;
    println!(
        "fit: {} voxels ({} failed, {} degenerate) in {secs:.2}s",
        out.fitted, out.failed, out.degenerate
    );
    if out.failed == n_mask {
        return Err(CliError::Degenerate("no voxel inside the mask could be fitted".into()));
    }
    Ok(())
}

fn find_map(dir: &Path, m: Metric) -> Result<PathBuf, CliError> {
    ["nii.gz", "nii"]
        .iter()
        .map(|ext| dir.join(format!("{}.{ext}", m.column())))
        .find(|p| p.is_file())
        .ok_or_else(|| CliError::input(format!("{}: no {}.nii(.gz) map", dir.display(), m.column())))
}

pub fn aggregate(a: &AggregateArgs) -> Result<(), CliError> {
    let group: Group = a.group.parse().map_err(|_| CliError::input(format!("unknown group `{}`", a.group)))?;
    let levels = parse_levels(&a.levels)?;
    require_files([&a.labels, &a.wm])?;
    require_files(a.lesion.iter())?;
    let weighting = match a.binary_wm {
        Some(t) if (0.0..=1.0).contains(&t) => Weighting::Binary { threshold: t },
        Some(t) => return Err(CliError::input(format!("--binary-wm {t} outside [0, 1]"))),
        None => Weighting::Partial,
    };
    let paths = Metric::ALL
        .iter()
        .map(|&m| find_map(&a.maps, m).map(|p| (m, p)))
        .collect::<Result<Vec<_>, _>>()?;

    let lesion = a.lesion.as_ref().map(read_volume).transpose()?;
    let labels = LabelMap::new(read_volume(&a.labels)?, read_volume(&a.wm)?, lesion)?;
    let mut maps = BTreeMap::new();
    for (m, p) in paths {
        let v = read_volume(&p)?;
        if !v.same_grid(&labels.levels) {
            return Err(CliError::input(format!(
                "{}: geometry {:?} does not match labels {:?}",
                p.display(),
                v.dims(),
                labels.levels.dims()
            )));
        }
        maps.insert(m, v);
    }

    let summaries = summarize_subject(&a.subject, &maps, &labels, &levels, weighting)?;
    if summaries.is_empty() {
        return Err(CliError::Degenerate(format!(
            "subject {}: no requested level has white matter",
            a.subject
        )));
    }
    let mut lesions = BTreeMap::new();
    if group == Group::Patient {
        for s in &summaries {
            lesions.insert((a.subject.clone(), s.level), lesion_stats(&labels, s.level)?);
        }
    }
    let groups = BTreeMap::from([(a.subject.clone(), group)]);
    let rows = build_cohort(&summaries, &lesions, &groups, &levels)?;
    let mut table = if a.append && a.out.is_file() {
        CohortTable::load(&a.out)?
    } else {
        CohortTable::default()
    };
    let added = rows.len();
    table.extend(rows)?;
    table.save(&a.out)?;
    let params = json!({
        "maps": a.maps, "labels": a.labels, "wm": a.wm, "lesion": a.lesion,
        "levels": levels, "binary_wm": a.binary_wm, "rows": table.len(),
    });
    write_sidecar(&sidecar_path(&a.out), "aggregate", None, params)?;
    println!("aggregate: {} rows for {} written to {}", added, a.subject, a.out.display());
    Ok(())
}

fn load_table(path: &Path) -> Result<CohortTable, CliError> {
    require_files([&path.to_path_buf()])?;
    Ok(CohortTable::load(path)?)
}

/// CSV writer on a file or stdout.
fn csv_writer(out: Option<&PathBuf>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::write(p, e))?),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink))
}

fn csv_err(out: Option<&PathBuf>) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| match out {
        Some(p) => CliError::write(p, e),
        None => CliError::input(e.to_string()),
    }
}

fn pct(thr: f64) -> String {
    format!("{}%", (thr * 1e6).round() / 1e4)
}

pub fn welch(a: &WelchArgs) -> Result<(), CliError> {
    let thr = parse_thresholds(&a.thr)?;
    let table = load_table(&a.table)?;
    let v: Vec<&CohortRow> = table.of_class(RowClass::V).collect();
    let mut groups: Vec<(String, Vec<&CohortRow>)> = vec![("NAWM".into(), table.of_class(RowClass::Nawm).collect())];
    for &t in &thr {
        groups.push((format!("MS({})", pct(t)), select_ms_rows(&table, t)?));
    }

    let mut header = vec!["metric".to_string(), format!("V(n={})_mean", v.len()), format!("V(n={})_std", v.len())];
    for (name, rows) in &groups {
        for col in ["mean", "std", "t", "df", "p"] {
            header.push(format!("{name}(n={})_{col}", rows.len()));
        }
    }
    let err = csv_err(a.out.as_ref());
    let mut w = csv_writer(a.out.as_ref())?;
    w.write_record(&header).map_err(&err)?;
    for m in Metric::ALL {
        let base: Vec<f64> = v.iter().map(|r| r.metric(m)).collect();
        let mut rec = vec![m.label().to_string()];
        let mut base_stats: Option<(f64, f64)> = None;
        for (name, rows) in &groups {
            let x: Vec<f64> = rows.iter().map(|r| r.metric(m)).collect();
            match welch_test(&base, &x) {
                Ok(res) => {
                    base_stats.get_or_insert((res.mean_a, res.sd_a));
                    rec.extend([res.mean_b, res.sd_b, res.t, res.df, res.p].map(|x| format!("{x}")));
                }
                Err(e) => {
                    log::warn!("{m} {name}: {e}");
                    rec.extend(std::iter::repeat_n(String::new(), 5));
                }
            }
        }
        let (mean, sd) = base_stats.ok_or_else(|| {
            CliError::Degenerate(format!("{m}: no comparison could be computed (healthy n = {})", base.len()))
        })?;
        rec.splice(1..1, [format!("{mean}"), format!("{sd}")]);
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::input(e.to_string()))?;
    if let Some(out) = &a.out {
        write_sidecar(&sidecar_path(out), "stats welch", None, json!({ "table": a.table, "thr": thr }))?;
    }
    Ok(())
}

pub fn corr(a: &CorrArgs) -> Result<(), CliError> {
    let table = load_table(&a.table)?;
    let rows: Vec<&CohortRow> = match a.rows.to_ascii_lowercase().as_str() {
        "all" => table.rows().iter().collect(),
        "healthy" | "v" => table.of_class(RowClass::V).collect(),
        "nawm" => table.of_class(RowClass::Nawm).collect(),
        "ms" => table.of_class(RowClass::Ms).collect(),
        "patients" | "patient" => table.rows().iter().filter(|r| r.group == Group::Patient).collect(),
        other => return Err(CliError::input(format!("unknown row selection `{other}`"))),
    };
    let c = correlation_matrix(&rows)?;
    let err = csv_err(a.out.as_ref());
    let mut w = csv_writer(a.out.as_ref())?;
    let mut header = vec!["metric"];
    header.extend(Metric::ALL.map(|m| m.label()));
    w.write_record(&header).map_err(&err)?;
    for m in Metric::ALL {
        let mut rec = vec![m.label().to_string()];
        rec.extend(Metric::ALL.map(|n| format!("{}", c.get(m, n))));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::input(e.to_string()))?;
    if let Some(out) = &a.out {
        let params = json!({ "table": a.table, "rows": a.rows, "n_rows": c.n_rows });
        write_sidecar(&sidecar_path(out), "stats corr", None, params)?;
    }
    Ok(())
}

pub fn levels(a: &LevelsArgs) -> Result<(), CliError> {
    let table = load_table(&a.table)?;
    let rows: Vec<CohortRow> = match a.group.to_ascii_lowercase().as_str() {
        "all" => table.rows().to_vec(),
        g => {
            let g: Group = g.parse().map_err(|_| CliError::input(format!("unknown group `{g}`")))?;
            table.rows().iter().filter(|r| r.group == g).cloned().collect()
        }
    };
    let comparisons = Metric::ALL
        .iter()
        .map(|&m| level_pooling(&rows, m))
        .collect::<Result<Vec<_>, _>>()?;
    let report = pooling_report(&comparisons);

    let err = csv_err(a.out.as_ref());
    let mut w = csv_writer(a.out.as_ref())?;
    w.write_record(["metric", "level_a", "level_b", "emm_a", "emm_b", "diff", "se", "q", "p_adj", "significant"])
        .map_err(&err)?;
    for c in &comparisons {
        for p in &c.pairs {
            let emm = |l| c.emm_of(l).map_or(String::new(), |x| format!("{x}"));
            w.write_record([
                c.metric.label().to_string(),
                format!("C{}", p.a),
                format!("C{}", p.b),
                emm(p.a),
                emm(p.b),
                format!("{}", p.diff),
                format!("{}", p.se),
                format!("{}", p.q),
                format!("{}", p.p_adj),
                p.significant.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| CliError::input(e.to_string()))?;

    let fmt_runs = |runs: &[cordscan::stats::LevelRun]| runs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ");
    for (m, runs) in &report.per_metric {
        log::info!("{m}: {}", fmt_runs(runs));
    }
    eprintln!("intersection: {}", fmt_runs(&report.intersection));
    eprintln!("pooled: {}", fmt_runs(&report.pooled()));
    if let Some(path) = &a.runs {
        let mut w = csv_writer(Some(path))?;
        let err = csv_err(Some(path));
        w.write_record(["metric", "runs"]).map_err(&err)?;
        for (m, runs) in &report.per_metric {
            w.write_record([m.label(), &fmt_runs(runs)]).map_err(&err)?;
        }
        w.write_record(["intersection", &fmt_runs(&report.intersection)]).map_err(&err)?;
        w.write_record(["pooled", &fmt_runs(&report.pooled())]).map_err(&err)?;
        w.flush().map_err(|e| CliError::write(path, e))?;
    }
    if let Some(out) = &a.out {
        let params = json!({ "table": a.table, "group": a.group, "n_rows": rows.len() });
        write_sidecar(&sidecar_path(out), "stats levels", None, params)?;
    }
    Ok(())
}

pub fn classify(a: &ClassifyArgs) -> Result<(), CliError> {
    let combos = match &a.combos {
        Some(s) => parse_combos(s)?,
        None => TABLE2_COMBOS.iter().map(|c| c.to_vec()).collect(),
    };
    let thr = parse_thresholds(&a.thr)?;
    if a.splits == 0 {
        return Err(CliError::input("--splits must be at least 1"));
    }
    if !(a.train_frac > 0.0 && a.train_frac < 1.0) || !(a.ridge >= 0.0) {
        return Err(CliError::input("--train-frac must lie in (0, 1) and --ridge be >= 0"));
    }
    let table = load_table(&a.table)?;
    println!("seed: {}", a.seed);
    let cfg = SplitConfig {
        n_splits: a.splits,
        train_frac: a.train_frac,
        ridge: a.ridge,
        seed: a.seed,
        no_leak: a.no_leak,
    };
    let start = Instant::now();
    let cells = run_combinations(&table, &combos, &thr, &cfg)?;

    let err = csv_err(Some(&a.out));
    let mut w = csv_writer(Some(&a.out))?;
    w.write_record(["combo", "thr", "auc_mean", "auc_std", "n_pos", "n_neg"]).map_err(&err)?;
    let mut ok = 0;
    for c in &cells {
        let label = combo_label(&c.combo);
        let rec = match &c.result {
            Ok(r) => {
                ok += 1;
                [label, format!("{}", c.thr), format!("{}", r.auc_mean), format!("{}", r.auc_std), r.n_pos.to_string(), r.n_neg.to_string()]
            }
            Err(_) => [label, format!("{}", c.thr), String::new(), String::new(), String::new(), String::new()],
        };
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::write(&a.out, e))?;
    let params = json!({
        "table": a.table,
        "combos": combos.iter().map(|c| combo_label(c)).collect::<Vec<_>>(),
        "thr": thr, "splits": a.splits, "train_frac": a.train_frac, "ridge": a.ridge, "no_leak": a.no_leak,
    });
    write_sidecar(&sidecar_path(&a.out), "classify", Some(a.seed), params)?;
    if let Some(svg) = &a.svg {
        std::fs::write(svg, crate::svg::auc_plot(&cells)).map_err(|e| CliError::write(svg, e))?;
    }
    println!(
        "classify: {ok}/{} cells evaluated with {} splits in {:.2}s",
        cells.len(),
        a.splits,
        start.elapsed().as_secs_f64()
    );
    if ok == 0 {
        let first = cells.iter().find_map(|c| c.result.as_ref().err()).cloned();
        return Err(first.map_or_else(|| CliError::Degenerate("no cell evaluated".into()), CliError::from));
    }
    Ok(())
}
