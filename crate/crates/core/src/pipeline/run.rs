use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{csv_bytes, header, read_bytes, sha256_hex, DelimitedFile, OutputDir};
use super::manifest::{FileDigest, Manifest};
use super::plot::{line_chart, Series};
use super::{PipelineConfig, PipelineError, EXIT_OK, EXIT_VERDICT_FAIL};
use crate::attention::{optimal_attention, verify_single_trough, Thresholds, TroughReport};
use crate::econometrics::{
    margins, quadratic_fit, stars, u_shape_test, FitResult, RegressionSpec, Table, UShapeVerdict,
};
use crate::folklore::{score_catalog, score_counts, MotifCatalog, MotifEntry, TermDictionary};
use crate::transmission::{build_dataset, GroupSpec, SyntheticDataset};
use crate::variability::{attach_to_groups, average_variability, AncestralVariability, TemperatureSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

struct Run {
    out: OutputDir,
    manifest: Manifest,
    stage: Option<String>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn stage(&mut self, name: &str) {
        if let Some(prev) = self.stage.replace(name.to_string()) {
            self.manifest.stage_ok(&prev);
        }
    }

    fn input(&mut self, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let bytes = read_bytes(path)?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let p = self.out.write(name, bytes)?;
        self.outputs.push(p);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let p = self.out.write_json(name, value)?;
        self.outputs.push(p);
        Ok(())
    }

    fn plot(
        &mut self,
        emit_svg: bool,
        stem: &str,
        title: &str,
        labels: (&str, &str),
        series: &[Series],
    ) -> Result<(), PipelineError> {
        for s in series {
            let name = if series.len() == 1 {
                format!("plot_{stem}.csv")
            } else {
                format!("plot_{stem}_{}.csv", s.name)
            };
            self.write(&name, &s.to_csv())?;
        }
        if emit_svg {
            self.write(&format!("{stem}.svg"), line_chart(title, labels.0, labels.1, series).as_bytes())?;
        }
        Ok(())
    }
}

/// Runs `body` with a manifest that is written whether or not it succeeds.
fn execute(
    command: &str,
    cfg: &PipelineConfig,
    out_dir: &Path,
    body: impl FnOnce(&mut Run) -> Result<(i32, String), PipelineError>,
) -> Result<RunOutcome, PipelineError> {
    let mut run = Run {
        out: OutputDir::create(out_dir)?,
        manifest: Manifest::new(command, cfg),
        stage: None,
        outputs: Vec::new(),
    };
    let result = cfg.validate().and_then(|()| body(&mut run));
    let manifest_name = format!("manifest_{}.json", command.replace(' ', "_"));
    match result {
        Ok((exit_code, summary)) => {
            if let Some(s) = run.stage.take() {
                run.manifest.stage_ok(&s);
            }
            run.manifest.exit_code = exit_code;
            run.manifest.outputs = run.out.written().to_vec();
            let manifest = run.manifest.clone();
            run.write_json(&manifest_name, &manifest)?;
            Ok(RunOutcome {
                exit_code,
                outputs: run.outputs,
                summary,
            })
        }
        Err(e) => {
            let stage = run.stage.take().unwrap_or_else(|| "config".into());
            run.manifest.stage_failed(&stage, &e.to_string());
            run.manifest.exit_code = e.exit_code();
            run.manifest.outputs = run.out.written().to_vec();
            let manifest = run.manifest.clone();
            let _ = run.out.write_json(&manifest_name, &manifest);
            Err(e)
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path, PipelineError> {
    path.as_deref()
        .ok_or_else(|| PipelineError::Input(format!("{what} is required (--{flag} or [inputs].{flag})")))
}

fn num(v: f64) -> String {
    v.to_string()
}

// ---- index ----

fn read_anomalies(path: &Path, bytes: &[u8]) -> Result<Vec<TemperatureSeries>, PipelineError> {
    let f = DelimitedFile::parse(path, bytes)?;
    let (cu, cy, ca) = (f.column("unit_id")?, f.column("year")?, f.column("anomaly")?);
    if f.len() == 0 {
        return Err(PipelineError::Input(format!("{}: no observations", path.display())));
    }
    let mut units: BTreeMap<String, BTreeMap<i32, f64>> = BTreeMap::new();
    for row in f.rows() {
        let unit = row.key(cu)?;
        let year: i32 = row.parse(cy)?;
        let value = row.real(ca)?;
        if units.entry(unit.clone()).or_default().insert(year, value).is_some() {
            return Err(row.error(&format!("duplicate year {year} for unit {unit:?}")));
        }
    }
    units
        .into_iter()
        .map(|(unit, obs)| Ok(TemperatureSeries::new(&unit, obs.into_iter().collect())?))
        .collect()
}

fn read_links(path: &Path, bytes: &[u8]) -> Result<BTreeMap<String, String>, PipelineError> {
    let f = DelimitedFile::parse(path, bytes)?;
    let (cg, cu) = (f.column("group_id")?, f.column("unit_id")?);
    let mut links = BTreeMap::new();
    for row in f.rows() {
        let g = row.key(cg)?;
        if links.insert(g.clone(), row.key(cu)?).is_some() {
            return Err(row.error(&format!("duplicate group_id {g:?}")));
        }
    }
    Ok(links)
}

/// Reads `[inputs].anomalies`, writes `index.csv` and, when a link table is
/// given, `group_index.csv`.
pub fn run_index(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("index", cfg, out_dir, |run| {
        run.stage("read");
        let path = required(&cfg.inputs.anomalies, "anomaly file", "anomalies")?;
        let bytes = run.input(path)?;
        let series = read_anomalies(path, &bytes)?;

        run.stage("index");
        let index = series
            .par_iter()
            .map(|s| average_variability(s, &cfg.variability))
            .collect::<Result<Vec<_>, _>>()?;
        let g = cfg.variability.generations();
        let mut cols = vec!["unit_id".to_string(), "avg_variability".to_string()];
        cols.extend((1..=g).map(|i| format!("g{i}_eta")));
        let rows = index.iter().map(|a| {
            let mut r = vec![a.unit_id.clone(), num(a.avg_variability)];
            r.extend(a.per_generation.iter().map(|p| num(p.eta_hat)));
            r
        });
        run.write("index.csv", &csv_bytes(&cols, rows))?;

        if let Some(links_path) = &cfg.inputs.links {
            run.stage("link");
            let bytes = run.input(links_path)?;
            let links = read_links(links_path, &bytes)?;
            let by_unit: BTreeMap<String, AncestralVariability> =
                index.iter().map(|a| (a.unit_id.clone(), a.clone())).collect();
            let attached = attach_to_groups(&by_unit, &links)?;
            let rows = attached
                .iter()
                .map(|(grp, a)| vec![grp.clone(), a.unit_id.clone(), num(a.avg_variability)]);
            run.write(
                "group_index.csv",
                &csv_bytes(&header(&["group_id", "unit_id", "avg_variability"]), rows),
            )?;
        }
        Ok((EXIT_OK, format!("{} units, {g} generations", index.len())))
    })
}

// ---- model ----

fn thresholds_and_midpoint(cfg: &PipelineConfig) -> Result<(Thresholds, f64), PipelineError> {
    let t = cfg.model.thresholds()?;
    let mid = if t.level_set_empty {
        t.theta_tilde
    } else {
        0.5 * (t.theta_low + t.theta_high)
    };
    Ok((t, mid))
}

#[derive(Serialize)]
struct ThresholdsRecord {
    #[serde(flatten)]
    thresholds: Thresholds,
    trough_midpoint: f64,
    kappa_half: f64,
}

/// `solutions.csv` at the configured thetas plus `thresholds.json`.
pub fn run_model_solve(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("model solve", cfg, out_dir, |run| {
        run.stage("solve");
        let mut rows = Vec::new();
        for &theta in &cfg.solve_thetas {
            let s = cfg.model.stakes_at(theta)?;
            let xi = optimal_attention(s.total(), &cfg.model.cost);
            rows.push(vec![
                num(theta),
                num(xi),
                num(s.w_bar),
                num(s.l_bar),
                num(cfg.model.stakes.sigma_sq * (1.0 - xi)),
            ]);
        }
        run.write(
            "solutions.csv",
            &csv_bytes(
                &header(&["theta", "xi_star", "W_bar", "L_bar", "posterior_variance"]),
                rows,
            ),
        )?;
        run.stage("thresholds");
        let (t, mid) = thresholds_and_midpoint(cfg)?;
        run.write_json(
            "thresholds.json",
            &ThresholdsRecord {
                thresholds: t,
                trough_midpoint: mid,
                kappa_half: cfg.model.cost.threshold(),
            },
        )?;
        Ok((
            EXIT_OK,
            format!(
                "theta_low={} theta_tilde={} theta_high={}",
                t.theta_low, t.theta_tilde, t.theta_high
            ),
        ))
    })
}

fn emit_sweep(run: &mut Run, cfg: &PipelineConfig) -> Result<(Thresholds, f64, TroughReport), PipelineError> {
    let grid = cfg.sweep.grid()?;
    let curve = cfg.model.curve(&grid)?;
    let rows = curve
        .iter()
        .map(|p| vec![num(p.theta), num(p.xi_star), num(p.w_bar), num(p.l_bar)]);
    run.write(
        "curve.csv",
        &csv_bytes(&header(&["theta", "xi_star", "W_bar", "L_bar"]), rows),
    )?;
    let (t, mid) = thresholds_and_midpoint(cfg)?;
    run.write_json(
        "thresholds.json",
        &ThresholdsRecord {
            thresholds: t,
            trough_midpoint: mid,
            kappa_half: cfg.model.cost.threshold(),
        },
    )?;
    let points: Vec<(f64, f64)> = curve.iter().map(|p| (p.theta, p.xi_star)).collect();
    let report = verify_single_trough(&points);
    run.write_json("trough.json", &report)?;
    run.plot(
        cfg.emit_svg,
        "attention",
        "Optimal attention by prior scale",
        ("theta", "xi*"),
        &[Series::new("xi_star", points)],
    )?;
    Ok((t, mid, report))
}

/// `curve.csv` over the sweep grid, `thresholds.json` and the single-trough
/// verdict in `trough.json`. Exit 1 when the verdict fails.
pub fn run_model_sweep(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("model sweep", cfg, out_dir, |run| {
        run.stage("sweep");
        let (_, mid, report) = emit_sweep(run, cfg)?;
        let code = if report.passes { EXIT_OK } else { EXIT_VERDICT_FAIL };
        let verdict = if report.passes { "pass" } else { "fail" };
        Ok((code, format!("single trough: {verdict}; trough midpoint {mid}")))
    })
}

// ---- simulate ----

fn read_groups(path: &Path, bytes: &[u8]) -> Result<Vec<GroupSpec>, PipelineError> {
    let f = DelimitedFile::parse(path, bytes)?;
    let cols = (
        f.column("group_id")?,
        f.column("true_scale")?,
        f.column("cell")?,
        f.column("n_respondents")?,
    );
    f.rows()
        .map(|row| {
            Ok(GroupSpec {
                group_id: row.key(cols.0)?,
                true_scale: row.real(cols.1)?,
                cell: row.key(cols.2)?,
                n_respondents: row.parse(cols.3)?,
            })
        })
        .collect()
}

fn groups_for(run: &mut Run, cfg: &PipelineConfig) -> Result<Vec<GroupSpec>, PipelineError> {
    match &cfg.inputs.groups {
        Some(p) => {
            let bytes = run.input(p)?;
            read_groups(p, &bytes)
        }
        None => Ok(cfg.layout.generate(cfg.seed)),
    }
}

fn write_dataset(run: &mut Run, data: &SyntheticDataset) -> Result<(), PipelineError> {
    let mut cols = header(&["group_id", "cell", "avg_variability", "attention"]);
    cols.extend((1..=data.n_controls).map(|k| format!("ctrl_{k}")));
    let rows = data.respondents.iter().map(|r| {
        let mut row = vec![r.group_id.clone(), r.cell.clone(), num(r.avg_variability), num(r.attention)];
        row.extend(r.controls.iter().map(|c| num(*c)));
        row
    });
    run.write("respondents.csv", &csv_bytes(&cols, rows))?;
    let rows = data
        .folklore
        .iter()
        .map(|f| vec![f.group_id.clone(), f.env_motifs.to_string(), f.total_motifs.to_string()]);
    run.write(
        "folklore.csv",
        &csv_bytes(&header(&["group_id", "env_motifs", "total_motifs"]), rows),
    )?;
    let rows = data.groups.iter().map(|g| {
        vec![g.group_id.clone(), num(g.true_scale), num(g.avg_variability), num(g.theta), num(g.xi_star)]
    });
    run.write(
        "groups.csv",
        &csv_bytes(
            &header(&["group_id", "true_scale", "avg_variability", "theta", "xi_star"]),
            rows,
        ),
    )
}

/// Respondent-level regression table: keys `group_id`, `cell`; numeric
/// `avg_variability`, `attention`, `ctrl_1..k`.
pub fn respondent_table(data: &SyntheticDataset) -> Table {
    let n = data.respondents.len();
    let r = &data.respondents;
    let mut t = Table::new(n);
    t.insert_key("group_id", r.iter().map(|x| x.group_id.clone()).collect()).expect("row count");
    t.insert_key("cell", r.iter().map(|x| x.cell.clone()).collect()).expect("row count");
    t.insert_numeric("avg_variability", r.iter().map(|x| x.avg_variability).collect())
        .expect("finite");
    t.insert_numeric("attention", r.iter().map(|x| x.attention).collect()).expect("finite");
    for k in 0..data.n_controls {
        t.insert_numeric(&format!("ctrl_{}", k + 1), r.iter().map(|x| x.controls[k]).collect())
            .expect("finite");
    }
    t
}

/// Writes `respondents.csv`, `folklore.csv` and the group-level truth in
/// `groups.csv`.
pub fn run_simulate(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("simulate", cfg, out_dir, |run| {
        run.stage("groups");
        let groups = groups_for(run, cfg)?;
        run.stage("simulate");
        let data = build_dataset(&groups, &cfg.cohort_config(), &cfg.model)?;
        write_dataset(run, &data)?;
        Ok((
            EXIT_OK,
            format!("{} groups, {} respondents", data.groups.len(), data.respondents.len()),
        ))
    })
}

// ---- regress ----

fn regression_table(path: &Path, bytes: &[u8], spec: &RegressionSpec) -> Result<Table, PipelineError> {
    let f = DelimitedFile::parse(path, bytes)?;
    let mut numeric = vec![spec.outcome.as_str(), spec.variable.as_str()];
    numeric.extend(spec.controls.iter().map(String::as_str));
    let mut keys = vec![spec.cluster.as_str()];
    if let Some(fe) = &spec.fixed_effect {
        keys.push(fe.as_str());
    }
    let mut t = Table::new(f.len());
    for name in numeric {
        let c = f.column(name)?;
        let v = f.rows().map(|r| r.real(c)).collect::<Result<Vec<_>, _>>()?;
        t.insert_numeric(name, v)?;
    }
    for name in keys {
        let c = f.column(name)?;
        let v = f.rows().map(|r| r.key(c)).collect::<Result<Vec<_>, _>>()?;
        t.insert_key(name, v)?;
    }
    Ok(t)
}

fn report_fit(run: &mut Run, cfg: &PipelineConfig, fit: &FitResult) -> Result<UShapeVerdict, PipelineError> {
    run.write_json("fit.json", fit)?;
    let rows: Vec<Vec<String>> = fit
        .names
        .iter()
        .map(|name| {
            let c = fit.coef(name).unwrap_or(f64::NAN);
            let se = fit.std_err(name).unwrap_or(f64::NAN);
            let p = fit.p_value(name).unwrap_or(f64::NAN);
            vec![name.clone(), num(c), num(se), num(c / se), num(p), stars(p).to_string()]
        })
        .collect();
    run.write(
        "coefficients.csv",
        &csv_bytes(&header(&["name", "coef", "std_err", "t", "p", "stars"]), rows),
    )?;

    run.stage("margins");
    let (lo, hi) = fit.support;
    let m = cfg.margins_points;
    let grid: Vec<f64> = (0..m)
        .map(|i| if i + 1 == m { hi } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 })
        .collect();
    let curve = margins(fit, &grid, &BTreeMap::new())?;
    let rows = curve
        .grid
        .iter()
        .zip(&curve.predicted)
        .map(|(x, y)| vec![num(*x), num(*y)]);
    run.write(
        "margins.csv",
        &csv_bytes(&[fit.spec.variable.clone(), "predicted".to_string()], rows),
    )?;
    let points = curve.grid.iter().copied().zip(curve.predicted.iter().copied()).collect();
    run.plot(
        cfg.emit_svg,
        "margins",
        "Predicted outcome by average variability",
        (&fit.spec.variable, &fit.spec.outcome),
        &[Series::new("predicted", points)],
    )?;

    run.stage("u_shape");
    let verdict = u_shape_test(fit, fit.support, cfg.u_shape_level);
    run.write_json("verdict.json", &verdict)?;
    Ok(verdict)
}

fn verdict_summary(v: &UShapeVerdict) -> String {
    format!(
        "b1={:.4} (p={:.2e}) b2={:.4} (p={:.2e}) turning point {} -> {}",
        v.beta1,
        v.p_values[0],
        v.beta2,
        v.p_values[1],
        v.turning_point.map_or("none".into(), |t| format!("{t:.5}")),
        if v.is_u { "U-shape" } else { "no U-shape" }
    )
}

/// Fits `[regression]` on `[inputs].data`. Exit 1 when the U-shape test
/// fails.
pub fn run_regress(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("regress", cfg, out_dir, |run| {
        run.stage("read");
        let path = required(&cfg.inputs.data, "respondent table", "data")?;
        let bytes = run.input(path)?;
        let table = regression_table(path, &bytes, &cfg.regression)?;
        run.stage("fit");
        let fit = quadratic_fit(&table, &cfg.regression)?;
        let v = report_fit(run, cfg, &fit)?;
        Ok((if v.is_u { EXIT_OK } else { EXIT_VERDICT_FAIL }, verdict_summary(&v)))
    })
}

// ---- folklore ----

fn read_catalog(path: &Path, bytes: &[u8]) -> Result<MotifCatalog, PipelineError> {
    let f = DelimitedFile::parse(path, bytes)?;
    let (cg, cm, cd) = (f.column("group_id")?, f.column("motif_id")?, f.column("description")?);
    let entries = f
        .rows()
        .map(|r| {
            Ok(MotifEntry {
                group_id: r.key(cg)?,
                motif_id: r.key(cm)?,
                description: r.text(cd).to_string(),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(MotifCatalog::new(entries)?)
}

/// Scores `[inputs].catalog` with `[inputs].dictionary` (default: the seed
/// vocabulary) into `folklore_scores.csv`.
pub fn run_folklore(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("folklore score", cfg, out_dir, |run| {
        run.stage("read");
        let path = required(&cfg.inputs.catalog, "motif catalog", "catalog")?;
        let bytes = run.input(path)?;
        let catalog = read_catalog(path, &bytes)?;
        let dict = match &cfg.inputs.dictionary {
            Some(p) => {
                let bytes = run.input(p)?;
                let text = String::from_utf8(bytes)
                    .map_err(|_| PipelineError::Input(format!("{}: not UTF-8", p.display())))?;
                TermDictionary::parse(&text)?
            }
            None => TermDictionary::seed(),
        };
        run.stage("score");
        let scores = score_catalog(&catalog, &dict)?;
        let rows = scores.iter().map(|s| {
            vec![s.group_id.clone(), s.env_motifs.to_string(), s.total_motifs.to_string(), num(s.score)]
        });
        run.write(
            "folklore_scores.csv",
            &csv_bytes(&header(&["group_id", "env_motifs", "total_motifs", "score"]), rows),
        )?;
        Ok((EXIT_OK, format!("{} groups scored with {} terms", scores.len(), dict.len())))
    })
}

// ---- reproduce ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub seed: u64,
    pub n_groups: usize,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub std_err: [f64; 2],
    pub t_values: [f64; 2],
    pub p_values: [f64; 2],
    pub r_squared: f64,
    pub turning_point: Option<f64>,
    pub model_trough_midpoint: f64,
    pub model_thresholds: Thresholds,
    /// `(turning_point - midpoint) / midpoint`.
    pub relative_gap: Option<f64>,
    pub model_single_trough: bool,
    pub is_u: bool,
}

/// Simulate, fit, compute margins and test the U-shape against the model
/// trough in one pass. Exit 0 iff the U-shape test passes.
pub fn run_reproduce(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunOutcome, PipelineError> {
    execute("reproduce", cfg, out_dir, |run| {
        run.stage("groups");
        let groups = groups_for(run, cfg)?;

        run.stage("simulate");
        let data = build_dataset(&groups, &cfg.cohort_config(), &cfg.model)?;
        write_dataset(run, &data)?;

        run.stage("folklore");
        let rows = data
            .folklore
            .iter()
            .map(|f| {
                Ok(vec![
                    f.group_id.clone(),
                    f.env_motifs.to_string(),
                    f.total_motifs.to_string(),
                    num(score_counts(f.env_motifs, f.total_motifs)?),
                ])
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        run.write(
            "folklore_scores.csv",
            &csv_bytes(&header(&["group_id", "env_motifs", "total_motifs", "score"]), rows),
        )?;

        run.stage("model");
        let (thresholds, mid, trough) = emit_sweep(run, cfg)?;

        run.stage("fit");
        let fit = quadratic_fit(&respondent_table(&data), &cfg.regression)?;
        let v = report_fit(run, cfg, &fit)?;

        run.stage("report");
        let name1 = fit.spec.power_name(1);
        let name2 = fit.spec.power_name(2);
        let report = ReproduceReport {
            seed: cfg.seed,
            n_groups: data.groups.len(),
            n_obs: fit.n_obs,
            n_clusters: fit.n_clusters,
            beta1: v.beta1,
            beta2: v.beta2,
            std_err: [
                fit.std_err(&name1).unwrap_or(f64::NAN),
                fit.std_err(&name2).unwrap_or(f64::NAN),
            ],
            t_values: v.t_values,
            p_values: v.p_values,
            r_squared: fit.r_squared,
            turning_point: v.turning_point,
            model_trough_midpoint: mid,
            model_thresholds: thresholds,
            relative_gap: v.turning_point.map(|t| (t - mid) / mid),
            model_single_trough: trough.passes,
            is_u: v.is_u,
        };
        run.write_json("report.json", &report)?;
        Ok((if v.is_u { EXIT_OK } else { EXIT_VERDICT_FAIL }, verdict_summary(&v)))
    })
}
