use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use powerstate_core::classify::{evaluate_day, train_forest, EvaluationReport, ForestModel};
use powerstate_core::cluster::{
    assign_nearest, fit_state_model, sweep_k, KSelection, KSweepReport, StateAssignment, StateModel,
};
use powerstate_core::features::{odd_current_channels, resample_mean, select_odd_current_harmonics, standardize};
use powerstate_core::frame::TimestampedFrame;
use powerstate_core::impute::{impute_same_timestamp, Grid};
use powerstate_core::ingest::{detect_gaps, parse_csv, write_frame, GapReport};
use powerstate_core::reduce::pca_fit;
use powerstate_core::schema::Schema;
use powerstate_core::synth::{generate_days, preset, SyntheticProfile};
use powerstate_core::time::{date_of, day_start, iso_millis};
use powerstate_core::{FeatureMatrix, DAY_MS};

use crate::config::PipelineConfig;
use crate::output::{comment_block, write_atomic, write_text, Provenance};
use crate::CliError;

pub const DAILY_FORMAT: &str = "powerstate.daily-states v1";

fn key(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn window(start: Option<NaiveDate>, end: Option<NaiveDate>) -> (i64, i64) {
    (
        start.map_or(i64::MIN, day_start),
        end.map_or(i64::MAX, |d| day_start(d) + DAY_MS),
    )
}

fn day_window(date: NaiveDate) -> (i64, i64) {
    (day_start(date), day_start(date) + DAY_MS)
}

pub struct Paths;

impl Paths {
    pub fn features(c: &PipelineConfig) -> PathBuf {
        c.output_dir.join("features").join(format!("{}.csv", c.location))
    }
    pub fn results(c: &PipelineConfig) -> PathBuf {
        c.output_dir.join("results").join(&c.location)
    }
    pub fn sweep(c: &PipelineConfig) -> PathBuf {
        Self::results(c).join("k_sweep.csv")
    }
    pub fn state_model(c: &PipelineConfig) -> PathBuf {
        c.output_dir.join("models").join(format!("{}_state_model.json", c.location))
    }
    pub fn forest(c: &PipelineConfig) -> PathBuf {
        c.output_dir.join("models").join(format!("{}_forest.json", c.location))
    }
    pub fn leaderboard(c: &PipelineConfig) -> PathBuf {
        c.output_dir.join("leaderboard").join(format!("{}.csv", c.location))
    }
    pub fn daily(c: &PipelineConfig, date: NaiveDate, suffix: &str) -> PathBuf {
        Self::results(c).join(format!("{}{suffix}.csv", date.format("%Y-%m-%d")))
    }
}

/// Writes the effective config next to the outputs.
pub fn echo_config(cfg: &PipelineConfig) -> Result<(), CliError> {
    let prov = Provenance::of(cfg);
    let text = comment_block(&prov.lines()) + &cfg.to_toml();
    write_text(&cfg.output_dir.join("effective_config.toml"), &text)
}

/// Data files of one schema for the location, sorted by name.
fn data_files(cfg: &PipelineConfig, schema: Schema) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.location_dir();
    let prefix = match schema {
        Schema::Ecd => "ecd",
        Schema::Harmonics => "harmonics",
    };
    let entries = std::fs::read_dir(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"))
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.to_ascii_lowercase().starts_with(prefix))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load(cfg: &PipelineConfig, schema: Schema, channels: Option<&[String]>) -> Result<Option<TimestampedFrame>, CliError> {
    let format = cfg.timestamp()?;
    let files = data_files(cfg, schema)?;
    if files.is_empty() {
        return Ok(None);
    }
    let frames = files
        .iter()
        .map(|p| parse_csv(p, schema, &format, channels))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = TimestampedFrame::merge(frames)?;
    if merged.meta().ambiguous_day_month {
        log::warn!("{schema:?} timestamps are ambiguous between day-first and month-first readings");
    }
    Ok(Some(merged))
}

/// Grid coverage of every data file.
pub fn ingest(cfg: &PipelineConfig) -> Result<Vec<(PathBuf, GapReport)>, CliError> {
    let format = cfg.timestamp()?;
    let mut out = Vec::new();
    for schema in [Schema::Ecd, Schema::Harmonics] {
        for path in data_files(cfg, schema)? {
            let frame = parse_csv(&path, schema, &format, None)?;
            let (Some(&a), Some(&b)) = (frame.timestamps().first(), frame.timestamps().last()) else {
                log::warn!("{} has no rows", path.display());
                continue;
            };
            let mut report = detect_gaps(&frame, schema.nominal_period_ms(), (a, b))?;
            report.duplicate_timestamps = frame.meta().duplicates_dropped;
            if frame.meta().invalid_cells > 0 {
                log::warn!("{}: {} invalid cells set missing", path.display(), frame.meta().invalid_cells);
            }
            out.push((path, report));
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("no data files in {}", cfg.location_dir().display())));
    }
    let prov = Provenance::of(cfg);
    let doc = serde_json::json!({
        "metadata": prov.metadata(),
        "files": out.iter().map(|(p, r)| serde_json::json!({
            "file": p.file_name().map(|n| n.to_string_lossy().into_owned()),
            "report": r,
        })).collect::<Vec<_>>(),
    });
    let path = Paths::results(cfg).join("ingest.json");
    write_text(&path, &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"))?;
    Ok(out)
}

pub fn render_ingest(reports: &[(PathBuf, GapReport)]) -> String {
    let mut s = String::new();
    for (p, r) in reports {
        s += &format!(
            "{}: {} of {} grid points present ({:.2}% missing, {} gaps, {} duplicates)\n",
            p.display(),
            r.present_count,
            r.expected_count,
            100.0 * r.missing_fraction,
            r.gap_spans.len(),
            r.duplicate_timestamps
        );
    }
    s
}

pub struct CleanSummary {
    pub rows: usize,
    pub imputed_cells: usize,
    pub missing_fraction: f64,
    pub path: PathBuf,
}

impl fmt::Display for CleanSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} feature rows written to {} ({} cells imputed, {:.2}% of grid missing before imputation)",
            self.rows,
            self.path.display(),
            self.imputed_cells,
            100.0 * self.missing_fraction
        )
    }
}

fn features_key(cfg: &PipelineConfig) -> Result<String, CliError> {
    let mut parts = vec![
        cfg.location.clone(),
        cfg.data_dir.display().to_string(),
        cfg.timestamp_format.clone(),
        cfg.grid_period_ms.to_string(),
        cfg.resample_period_ms.to_string(),
        toml::to_string(&cfg.imputation).expect("serializes"),
        format!("{:?}", cfg.phase_mode),
    ];
    for p in data_files(cfg, Schema::Harmonics)? {
        let len = std::fs::metadata(&p).map_err(|e| CliError::io(&p, e))?.len();
        parts.push(format!("{}:{len}", p.display()));
    }
    Ok(key(&parts))
}

fn round_to(t: i64, p: i64) -> i64 {
    (t + p / 2).div_euclid(p) * p
}

/// Harmonics to phase-mode features, imputation on the raw grid, then
/// one-minute means. Writes the feature cache.
pub fn clean(cfg: &PipelineConfig) -> Result<CleanSummary, CliError> {
    let odd = odd_current_channels();
    let raw = load(cfg, Schema::Harmonics, Some(&odd))?
        .ok_or_else(|| CliError::Data(format!("no harmonics files in {}", cfg.location_dir().display())))?;
    let (Some(&first), Some(&last)) = (raw.timestamps().first(), raw.timestamps().last()) else {
        return Err(CliError::Data("harmonics files hold no rows".into()));
    };
    let selected = select_odd_current_harmonics(&raw, cfg.phase_mode)?;
    drop(raw);
    let p = cfg.grid_period_ms;
    let range = (round_to(first, p), round_to(last, p));
    let gaps = detect_gaps(&selected, p, range)?;
    let (frame, imputed_cells) = if cfg.imputation.enabled {
        let imputed = impute_same_timestamp(&selected, Grid::new(range.0, range.1, p), &cfg.imputation.policy)?;
        let n = imputed.imputed_cells();
        (imputed.frame, n)
    } else {
        (selected, 0)
    };
    let resampled = resample_mean(&frame, cfg.resample_period_ms)?;
    if !resampled.incomplete_windows.is_empty() || !resampled.empty_windows.is_empty() {
        log::info!(
            "{} empty and {} incomplete resampling windows dropped",
            resampled.empty_windows.len(),
            resampled.incomplete_windows.len()
        );
    }
    let m = resampled.matrix;
    let path = Paths::features(cfg);
    let mut comments = Provenance::of(cfg).lines();
    comments.push(format!("features_key: {}", features_key(cfg)?));
    write_atomic(&path, |w| Ok(m.write_csv(w, &comments)?))?;
    Ok(CleanSummary {
        rows: m.n_rows(),
        imputed_cells,
        missing_fraction: gaps.missing_fraction,
        path,
    })
}

/// Value of a `# name: value` comment line at the top of a file.
fn header_value(path: &Path, name: &str) -> Option<String> {
    let file = std::fs::File::open(path).ok()?;
    let prefix = format!("# {name}: ");
    BufReader::new(file)
        .lines()
        .map_while(Result::ok)
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

/// The cached feature matrix when it matches the config and data, otherwise
/// a fresh `clean`.
pub fn features(cfg: &PipelineConfig) -> Result<FeatureMatrix, CliError> {
    let path = Paths::features(cfg);
    if header_value(&path, "features_key").as_deref() != Some(features_key(cfg)?.as_str()) {
        clean(cfg)?;
    }
    let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FeatureMatrix::read_csv(BufReader::new(file))?)
}

pub struct Discovery {
    pub sweep: Option<KSweepReport>,
    pub model: StateModel,
}

impl fmt::Display for Discovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.sweep {
            writeln!(
                f,
                "elbow band {}..={}{}, chosen k = {} ({})",
                s.elbow_band.0,
                s.elbow_band.1,
                if s.distinct_elbow { "" } else { " (no distinct elbow)" },
                s.chosen_k,
                s.selection_rule
            )?;
        }
        writeln!(f, "state model: k = {}, populations {:?}", self.model.k(), self.model.populations)
    }
}

fn model_key(cfg: &PipelineConfig) -> Result<String, CliError> {
    Ok(key(&[
        features_key(cfg)?,
        cfg.standardize.to_string(),
        format!("{:?} {} {}", cfg.k, cfg.k_min, cfg.k_max),
        format!("{:?} {:?}", cfg.train_start, cfg.train_end),
        format!("{:?}", cfg.kmeans),
        cfg.seed.to_string(),
    ]))
}

fn training_matrix(cfg: &PipelineConfig, all: &FeatureMatrix) -> Result<FeatureMatrix, CliError> {
    let (a, b) = window(cfg.train_start, cfg.train_end);
    let m = all.restrict(a, b);
    if m.is_empty() {
        return Err(CliError::Data("no feature rows inside the training window".into()));
    }
    Ok(if cfg.standardize { standardize(&m)? } else { m })
}

pub fn discover(cfg: &PipelineConfig) -> Result<Discovery, CliError> {
    let all = features(cfg)?;
    let m = training_matrix(cfg, &all)?;
    let prov = Provenance::of(cfg);
    let (sweep, model) = match cfg.k {
        Some(k) => (None, fit_state_model(&m, KSelection::Explicit(k), cfg.seed, &cfg.kmeans)?),
        None => {
            let report = sweep_k(&m, cfg.k_min, cfg.k_max, cfg.seed, &cfg.kmeans)?;
            let model = fit_state_model(&m, KSelection::Sweep(&report), cfg.seed, &cfg.kmeans)?;
            write_sweep(cfg, &prov, &report)?;
            (Some(report), model)
        }
    };
    let mut meta = prov.metadata();
    meta.insert("location".into(), cfg.location.clone());
    meta.insert("model_key".into(), model_key(cfg)?);
    write_text(&Paths::state_model(cfg), &(model.to_json(&meta) + "\n"))?;
    Ok(Discovery { sweep, model })
}

fn write_sweep(cfg: &PipelineConfig, prov: &Provenance, r: &KSweepReport) -> Result<(), CliError> {
    let mut s = comment_block(&prov.lines());
    s += &comment_block(&[
        format!("location: {}", cfg.location),
        format!("elbow_band: {}..={}", r.elbow_band.0, r.elbow_band.1),
        format!("distinct_elbow: {}", r.distinct_elbow),
        format!("chosen_k: {}", r.chosen_k),
        format!("selection_rule: {}", r.selection_rule),
        format!("degenerate: {}", r.degenerate),
    ]);
    s += "k,inertia,silhouette,in_elbow_band,chosen\n";
    for (i, &k) in r.k_values.iter().enumerate() {
        let sil = r.silhouettes[i].map(|v| v.to_string()).unwrap_or_default();
        let band = (r.elbow_band.0..=r.elbow_band.1).contains(&k);
        s += &format!("{k},{},{sil},{band},{}\n", r.inertias[i], k == r.chosen_k);
    }
    write_text(&Paths::sweep(cfg), &s)
}

/// The saved state model when it was built from the same inputs, otherwise a
/// fresh `discover`.
pub fn state_model(cfg: &PipelineConfig) -> Result<StateModel, CliError> {
    let path = Paths::state_model(cfg);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok((model, meta)) = StateModel::from_json(&text) {
            if meta.get("model_key") == Some(&model_key(cfg)?) {
                return Ok(model);
            }
        }
    }
    Ok(discover(cfg)?.model)
}

pub struct DaySummary {
    pub date: NaiveDate,
    pub rows: usize,
    pub distinct_states: usize,
    pub path: PathBuf,
}

impl fmt::Display for DaySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} rows, {} distinct states -> {}",
            self.date,
            self.rows,
            self.distinct_states,
            self.path.display()
        )
    }
}

/// Model-space centroid mapped back to raw feature units.
fn raw_centroid(model: &StateModel, label: usize) -> Vec<f64> {
    let c = model.centroid_of(label);
    match &model.scaling {
        Some(s) => c.iter().enumerate().map(|(f, v)| v * s.scale[f] + s.center[f]).collect(),
        None => c.to_vec(),
    }
}

pub fn assign(cfg: &PipelineConfig) -> Result<Vec<DaySummary>, CliError> {
    let all = features(cfg)?;
    let model = state_model(cfg)?;
    let active = load(cfg, Schema::Ecd, Some(&["ActivePT".to_string()]))?;
    let prov = Provenance::of(cfg);
    let mut out = Vec::new();
    for &date in &cfg.eval_dates {
        let (a, b) = day_window(date);
        let day = all.restrict(a, b);
        if day.is_empty() {
            log::warn!("{date}: no feature rows, skipped");
            continue;
        }
        let labels = assign_nearest(&model, &day)?;
        let path = Paths::daily(cfg, date, "");
        write_daily(&path, cfg, &prov, date, &model, &labels)?;
        write_pca(cfg, &prov, date, &model, &day, &labels)?;
        if let Some(ecd) = &active {
            write_active_power(cfg, &prov, date, ecd, &labels)?;
        }
        out.push(DaySummary {
            date,
            rows: labels.len(),
            distinct_states: labels.distinct_states(),
            path,
        });
    }
    Ok(out)
}

fn write_daily(
    path: &Path,
    cfg: &PipelineConfig,
    prov: &Provenance,
    date: NaiveDate,
    model: &StateModel,
    labels: &StateAssignment,
) -> Result<(), CliError> {
    let pops = labels.populations(model.k());
    let mut s = comment_block(&prov.lines());
    s += &comment_block(&[
        format!("format: {DAILY_FORMAT}"),
        format!("location: {}", cfg.location),
        format!("date: {}", date.format("%Y-%m-%d")),
        format!("states: {}", labels.distinct_states()),
        "centroids are in raw feature units".to_string(),
    ]);
    let mut header = vec!["state_label".to_string(), "population".to_string()];
    header.extend(model.feature_names.iter().cloned());
    s += &format!("# {}\n", header.join(","));
    for (label, &n) in pops.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let centroid: Vec<String> = raw_centroid(model, label).iter().map(f64::to_string).collect();
        s += &format!("# {label},{n},{}\n", centroid.join(","));
    }
    s += "timestamp,state_label\n";
    for (t, l) in labels.timestamps.iter().zip(&labels.labels) {
        s += &format!("{},{l}\n", iso_millis(*t));
    }
    write_text(path, &s)
}

fn write_pca(
    cfg: &PipelineConfig,
    prov: &Provenance,
    date: NaiveDate,
    model: &StateModel,
    day: &FeatureMatrix,
    labels: &StateAssignment,
) -> Result<(), CliError> {
    let prepared = model.prepare(day)?;
    if prepared.n_rows() <= 2 || prepared.n_features() < 2 {
        log::warn!("{date}: too few rows for a two-component projection");
        return Ok(());
    }
    let pca = pca_fit(&prepared, 2)?;
    if pca.rank_deficient {
        log::warn!("{date}: features span fewer than two dimensions");
    }
    let z = pca.project(&prepared)?;
    let mut s = comment_block(&prov.lines());
    s += &comment_block(&[format!(
        "explained_variance: {},{}",
        pca.explained_variance[0], pca.explained_variance[1]
    )]);
    s += "timestamp,component_1,component_2,state_label\n";
    for ((t, l), p) in labels.timestamps.iter().zip(&labels.labels).zip(&z) {
        s += &format!("{},{},{},{l}\n", iso_millis(*t), p[0], p[1]);
    }
    write_text(&Paths::daily(cfg, date, "_pca"), &s)
}

/// Per-window mean ActivePT next to that window's state label.
fn write_active_power(
    cfg: &PipelineConfig,
    prov: &Provenance,
    date: NaiveDate,
    ecd: &TimestampedFrame,
    labels: &StateAssignment,
) -> Result<(), CliError> {
    let (a, b) = day_window(date);
    let day = ecd.restrict(a, b);
    let Ok(resampled) = resample_mean(&day, cfg.resample_period_ms) else {
        log::warn!("{date}: no active power rows");
        return Ok(());
    };
    let m = resampled.matrix;
    let by_time: BTreeMap<i64, usize> = labels.timestamps.iter().copied().zip(labels.labels.iter().copied()).collect();
    let mut s = comment_block(&prov.lines());
    s += "timestamp,ActivePT,state_label\n";
    for (i, t) in m.timestamps().iter().enumerate() {
        if let Some(l) = by_time.get(t) {
            s += &format!("{},{},{l}\n", iso_millis(*t), m.row(i)[0]);
        }
    }
    write_text(&Paths::daily(cfg, date, "_active_power"), &s)
}

pub const LEADERBOARD_HEADER: &str = "date,f1_macro,f1_micro,f1_weighted,n_states_pred,n_states_truth,model_hash,seed";

pub struct LeaderboardRow {
    pub report: EvaluationReport,
    pub model_hash: String,
    pub seed: u64,
}

impl LeaderboardRow {
    fn csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{:.6},{:.6},{:.6},{},{},{},{}",
            r.date.as_deref().unwrap_or(""),
            r.f1_macro,
            r.f1_micro,
            r.f1_weighted,
            r.n_states_pred,
            r.n_states_truth,
            self.model_hash,
            self.seed
        )
    }
}

pub fn render_leaderboard(rows: &[LeaderboardRow]) -> String {
    let mut s = format!("{LEADERBOARD_HEADER}\n");
    for r in rows {
        s += &r.csv();
        s.push('\n');
    }
    s
}

/// Trains the forest on the classifier window's state labels and scores each
/// evaluation day against the state model.
pub fn eval(cfg: &PipelineConfig) -> Result<Vec<LeaderboardRow>, CliError> {
    let all = features(cfg)?;
    let model = state_model(cfg)?;
    let (fs, fe) = cfg.forest_window();
    let (a, b) = window(fs, fe);
    let raw = all.restrict(a, b);
    if raw.is_empty() {
        return Err(CliError::Data("no feature rows inside the classifier training window".into()));
    }
    let train = model.prepare(&raw)?;
    let labels = assign_nearest(&model, &train)?;
    let forest = train_forest(&train, &labels, &cfg.forest, cfg.seed)?;
    let prov = Provenance::of(cfg);
    let model_hash = hex::encode(Sha256::digest(forest.to_json(&BTreeMap::new()).as_bytes()))[..16].to_string();
    let mut meta = prov.metadata();
    meta.insert("location".into(), cfg.location.clone());
    meta.insert("model_hash".into(), model_hash.clone());
    write_text(&Paths::forest(cfg), &(forest.to_json(&meta) + "\n"))?;

    let mut rows = Vec::new();
    for &date in &cfg.eval_dates {
        let (a, b) = day_window(date);
        let day = all.restrict(a, b);
        if day.is_empty() {
            log::warn!("{date}: no feature rows, skipped");
            continue;
        }
        let mut report = evaluate_day(&forest, &model, &day, cfg.averaging)?;
        report.date = Some(date.format("%Y-%m-%d").to_string());
        if report.single_class {
            log::warn!("{date}: reference labels hold a single state");
        }
        rows.push(LeaderboardRow {
            report,
            model_hash: model_hash.clone(),
            seed: cfg.seed,
        });
    }
    let text = comment_block(&prov.lines())
        + &comment_block(&[format!("location: {}", cfg.location), format!("averaging: {:?}", cfg.averaging)])
        + &render_leaderboard(&rows);
    write_text(&Paths::leaderboard(cfg), &text)?;
    Ok(rows)
}

/// Loads the forest saved by the last `eval`.
pub fn saved_forest(cfg: &PipelineConfig) -> Result<ForestModel, CliError> {
    let path = Paths::forest(cfg);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(ForestModel::from_json(&text)?.0)
}

fn resolve_profile(name_or_path: &str) -> Result<SyntheticProfile, CliError> {
    match preset(name_or_path) {
        Ok(p) => Ok(p),
        Err(_) if Path::new(name_or_path).is_file() => {
            let text = std::fs::read_to_string(name_or_path).map_err(|e| CliError::io(Path::new(name_or_path), e))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{name_or_path}: {e}")))
        }
        Err(e) => Err(e.into()),
    }
}

/// Writes `harmonics.csv`, `ecd.csv`, `truth.csv` and `profile.toml` into the
/// location's data directory.
pub fn synth(cfg: &PipelineConfig, profile: &str, days: usize, start: Option<NaiveDate>) -> Result<PathBuf, CliError> {
    let mut p = resolve_profile(profile)?;
    if let Some(d) = start {
        p.start_date = d;
    }
    let data = generate_days(&p, days)?;
    let format = cfg.timestamp()?;
    let dir = cfg.location_dir();
    let prov = Provenance::of(cfg);
    let mut comments = prov.lines();
    comments.push(format!("synthetic profile: {}", p.name));
    for (name, frame) in [("harmonics.csv", &data.harmonics), ("ecd.csv", &data.ecd)] {
        write_atomic(&dir.join(name), |w| Ok(write_frame(w, frame, &format, &comments)?))?;
    }
    let mut truth = comment_block(&comments) + "timestamp,state\n";
    for (t, l) in data.truth.timestamps.iter().zip(&data.truth.labels) {
        truth += &format!("{},{l}\n", iso_millis(*t));
    }
    write_text(&dir.join("truth.csv"), &truth)?;
    let profile_text = toml::to_string(&p).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&dir.join("profile.toml"), &(comment_block(&comments) + &profile_text))?;
    Ok(dir)
}

/// Reads the per-minute ground truth written by `synth`.
pub fn read_truth(path: &Path) -> Result<StateAssignment, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut ts = Vec::new();
    let mut labels = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (t, l) = line
            .split_once(',')
            .ok_or_else(|| CliError::Data(format!("bad truth line '{line}'")))?;
        ts.push(powerstate_core::time::parse_iso(t).ok_or_else(|| CliError::Data(format!("bad timestamp '{t}'")))?);
        labels.push(l.trim().parse().map_err(|_| CliError::Data(format!("bad label '{l}'")))?);
    }
    Ok(StateAssignment::new(ts, labels))
}

pub fn report(cfg: &PipelineConfig) -> Result<String, CliError> {
    let mut s = format!("location {}\n", cfg.location);
    let mut found = false;
    if let Ok(text) = std::fs::read_to_string(Paths::state_model(cfg)) {
        let (model, meta) = StateModel::from_json(&text)?;
        found = true;
        s += &format!(
            "state model: k = {}, populations {:?}, silhouette {}\n",
            model.k(),
            model.populations,
            model.silhouette.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        if let Some(h) = meta.get("config_hash") {
            s += &format!("  config_hash {h}\n");
        }
        let (a, b) = model.training_window;
        if a < b {
            s += &format!("  trained on {} .. {}\n", date_of(a), date_of(b - 1));
        }
    }
    if let Some(k) = header_value(&Paths::sweep(cfg), "chosen_k") {
        found = true;
        let band = header_value(&Paths::sweep(cfg), "elbow_band").unwrap_or_default();
        s += &format!("sweep: chosen k = {k}, elbow band {band}\n");
    }
    if let Ok(text) = std::fs::read_to_string(Paths::leaderboard(cfg)) {
        found = true;
        s += "leaderboard:\n";
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            s += &format!("  {line}\n");
        }
    }
    if !found {
        return Err(CliError::Data(format!(
            "no outputs for {} under {}",
            cfg.location,
            cfg.output_dir.display()
        )));
    }
    Ok(s)
}
