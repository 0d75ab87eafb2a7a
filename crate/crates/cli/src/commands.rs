//! Subcommand implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use errstat_core::correlation::{correlation_matrix, CorrMatrix, CorrMethod};
use errstat_core::dataset::{errors_from_table, load_table, screen_uncertainty, BenchmarkTable, ErrorMatrix, TableFormat};
use errstat_core::estimators::{cochran_rescale, QuantileMethod, StatKind, WeightedMeanResult, COCHRAN_MAX_ITER, COCHRAN_TOL};
use errstat_core::inference::{
    compare_pair, percentile_interval, rank_probability_matrix, replicate_statistics, sample_size_warning,
    BootstrapPlan, Orientation, PairComparison, RankCriterion, RankMatrix,
};
use errstat_core::simulation::{
    corr_transfer_study, hd_convergence_study, pvalue_study, standard_scenarios, type1_study, GhMargin, GhParams,
    RhoScale, StudyConfig, SUMMARY_LEVELS,
};
use errstat_core::sip::{delta_ecdf, mue_decomposition, sip_matrix, DeltaEcdfReport, MueDecomposition, SipReport};
use errstat_core::rng::substream;

use crate::error::{usage, CliError, Result};
use crate::render::{render_abs_ecdf, render_delta_ecdf, render_matrix, RenderKind, RenderSpec};
use crate::report::{num, opt_num, raw, write_output, Report, Table};
use crate::{Cli, Command, CorrOn, GlobalOpts, OrientationArg, QuantileMethodArg, RhoScaleArg, Study};

/// Coverage of the percentile intervals reported by `stats`.
const STATS_CI_LEVEL: f64 = 0.95;

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if g.svg_size < crate::render::MIN_SIZE_PX {
        return Err(usage(format!("--svg-size must be at least {} px", crate::render::MIN_SIZE_PX)));
    }
    match &cli.command {
        Command::Stats { data, stat } => stats(g, data, stat),
        Command::Compare { data, pair, stat, kappa, nprime } => compare(g, data, pair, stat, *kappa, *nprime),
        Command::Sip { data, pair, ecdf, u_bar } => sip(g, data, pair.as_deref(), ecdf.as_deref(), *u_bar),
        Command::Corr { data, pearson, on } => corr(g, data, *pearson, *on),
        Command::Rank { data, stat, nprime, orientation } => rank(g, data, stat, *nprime, *orientation),
        Command::Simulate(study) => simulate(g, study),
    }
}

/// Everything a command produces besides its JSON result.
struct Emit<'a> {
    global: &'a GlobalOpts,
    warnings: Vec<String>,
}

impl<'a> Emit<'a> {
    fn new(global: &'a GlobalOpts) -> Self {
        Emit { global, warnings: Vec::new() }
    }

    fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    fn json_to_stdout(&self) -> bool {
        self.global.json.as_deref() == Some(Path::new("-"))
    }

    fn finish<C: Serialize, R: Serialize>(self, command: &str, config: C, result: R, table: &Table) -> Result<()> {
        if !self.json_to_stdout() {
            print!("{}", table.to_text());
        }
        if let Some(path) = &self.global.csv {
            write_output(path, &table.to_csv()?)?;
        }
        if let Some(path) = &self.global.json {
            let report = Report::new(command, config, result, self.warnings);
            write_output(path, &report.to_json()?)?;
        }
        Ok(())
    }

    fn svg(&self, kind: RenderKind, path: Option<&Path>, build: impl FnOnce(&RenderSpec) -> Result<String>) -> Result<()> {
        let Some(path) = path else { return Ok(()) };
        let spec = RenderSpec::new(kind, self.global.svg_size)?.with_output(path);
        let svg = build(&spec)?;
        spec.write(&svg)
    }
}

fn quantile_method(g: &GlobalOpts) -> QuantileMethod {
    match g.quantile_method {
        QuantileMethodArg::Hd => QuantileMethod::Hd,
        QuantileMethodArg::Type7 => QuantileMethod::Type7,
    }
}

/// Parses a statistic name; `q` takes its level from `--q`.
pub fn parse_stat(name: &str, g: &GlobalOpts) -> Result<StatKind> {
    let method = quantile_method(g);
    Ok(match name.trim().to_ascii_lowercase().as_str() {
        "mse" => StatKind::Mse,
        "mue" => StatKind::Mue,
        "rmsd" => StatKind::Rmsd,
        "q95" => StatKind::quantile(StatKind::DEFAULT_Q, method)?,
        "q" | "quantile" => StatKind::quantile(g.q, method)?,
        other => return Err(usage(format!("unknown statistic `{other}` (expected mse, mue, rmsd, q95 or q)"))),
    })
}

fn plan(g: &GlobalOpts, nprime: Option<usize>) -> BootstrapPlan {
    let p = BootstrapPlan::new(g.boot, g.seed);
    match nprime {
        Some(m) => p.with_n_prime(m),
        None => p,
    }
}

fn load(path: &Path, emit: &mut Emit) -> Result<(BenchmarkTable, ErrorMatrix)> {
    let file = File::open(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    let table = load_table(BufReader::new(file), &TableFormat::default())?;
    for r in &table.rejected_rows {
        emit.warn(format!("line {} dropped: missing value in column `{}`", r.line, r.column));
    }
    let matrix = errors_from_table(&table);
    if let Some(w) = screen_uncertainty(&matrix) {
        emit.warn(w);
    }
    Ok((table, matrix))
}

fn parse_pair(pair: &str, m: &ErrorMatrix) -> Result<(usize, usize)> {
    let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(usage(format!("--pair expects two method names `A,B`, got `{pair}`")));
    };
    Ok((m.method_index(a)?, m.method_index(b)?))
}

fn data_name(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Serialize)]
struct StatRow {
    method: String,
    stat: StatKind,
    label: String,
    value: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
}

#[derive(Serialize)]
struct WeightedRow {
    method: String,
    #[serde(flatten)]
    result: WeightedMeanResult,
}

#[derive(Serialize)]
struct StatsResult {
    n_systems: usize,
    methods: Vec<String>,
    rows: Vec<StatRow>,
    weighted: Vec<WeightedRow>,
}

fn stats(g: &GlobalOpts, data: &Path, names: &[String]) -> Result<()> {
    let mut emit = Emit::new(g);
    let (_, m) = load(data, &mut emit)?;
    let kinds = names.iter().map(|s| parse_stat(s, g)).collect::<Result<Vec<_>>>()?;
    let plan = plan(g, None);
    let columns: Vec<&[f64]> = m.columns().iter().map(|c| c.as_slice()).collect();

    let mut rows = Vec::new();
    let mut table = Table::new(["method", "stat", "value", "se", "ci_lo", "ci_hi"]);
    for &kind in &kinds {
        if let Some(w) = sample_size_warning(kind, m.n_systems()) {
            emit.warn(w);
        }
        let prepared = kind.prepare(m.n_systems())?;
        let reps = replicate_statistics(&columns, kind, &plan)?;
        for (j, name) in m.method_names().iter().enumerate() {
            let values: Vec<f64> = reps.iter().map(|r| r[j]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt();
            let (lo, hi) = percentile_interval(&values, STATS_CI_LEVEL);
            let value = prepared.eval(m.column(j), &mut Vec::new());
            table.push([name.clone(), kind.to_string(), num(value), num(se), num(lo), num(hi)]);
            rows.push(StatRow {
                method: name.clone(),
                stat: kind,
                label: kind.to_string(),
                value,
                se,
                ci_lo: lo,
                ci_hi: hi,
            });
        }
    }

    let mut weighted = Vec::new();
    if let Some(u) = m.uncertainty() {
        for (j, name) in m.method_names().iter().enumerate() {
            match cochran_rescale(m.column(j), &u[j], COCHRAN_MAX_ITER, COCHRAN_TOL) {
                Ok(r) => {
                    if !r.converged {
                        emit.warn(format!("{name}: model-variance iteration did not converge"));
                    }
                    weighted.push(WeightedRow { method: name.clone(), result: r });
                }
                Err(e) => emit.warn(format!("{name}: weighted mean unavailable: {e}")),
            }
        }
    }

    emit.svg(RenderKind::AbsEcdf, g.svg.as_deref(), |spec| render_abs_ecdf(m.columns(), m.method_names(), spec))?;
    let config = json!({
        "data": data_name(data),
        "stats": kinds,
        "boot": g.boot,
        "seed": g.seed,
        "ci_level": STATS_CI_LEVEL,
    });
    let result = StatsResult {
        n_systems: m.n_systems(),
        methods: m.method_names().to_vec(),
        rows,
        weighted,
    };
    emit.finish("stats", config, result, &table)
}

#[derive(Serialize)]
struct CompareResult {
    #[serde(flatten)]
    comparison: PairComparison,
    kappa: f64,
    exceeds_kappa: Option<bool>,
}

fn compare(g: &GlobalOpts, data: &Path, pair: &str, stat: &str, kappa: f64, nprime: Option<usize>) -> Result<()> {
    let mut emit = Emit::new(g);
    let (_, m) = load(data, &mut emit)?;
    let (i, j) = parse_pair(pair, &m)?;
    let kind = parse_stat(stat, g)?;
    if !(kappa > 0.0) {
        return Err(usage("--kappa must be positive"));
    }
    let c = compare_pair(&m, i, j, kind, &plan(g, nprime))?;
    for w in &c.warnings {
        emit.warn(w.clone());
    }
    let mut table = Table::new(["quantity", "value"]);
    table.push(["stat".to_string(), kind.to_string()]);
    table.push([format!("s({})", c.methods.0), num(c.s1)]);
    table.push([format!("s({})", c.methods.1), num(c.s2)]);
    table.push([format!("u({})", c.methods.0), num(c.u1)]);
    table.push([format!("u({})", c.methods.1), num(c.u2)]);
    table.push(["u(diff)".to_string(), num(c.u_diff)]);
    table.push(["xi".to_string(), opt_num(c.xi)]);
    table.push(["p_t".to_string(), opt_num(c.p_t)]);
    table.push(["p_unc".to_string(), opt_num(c.p_unc)]);
    table.push(["p_g".to_string(), num(c.p_g)]);
    table.push(["P_inv".to_string(), num(c.p_inv)]);
    let exceeds = c.exceeds(kappa);
    table.push([format!("|diff| > {kappa} u"), exceeds.map_or("NA".into(), |b| b.to_string())]);
    let config = json!({
        "data": data_name(data),
        "pair": [c.methods.0.clone(), c.methods.1.clone()],
        "stat": kind,
        "boot": g.boot,
        "seed": g.seed,
        "nprime": nprime,
        "kappa": kappa,
    });
    let result = CompareResult { comparison: c, kappa, exceeds_kappa: exceeds };
    emit.finish("compare", config, result, &table)
}

#[derive(Serialize)]
struct PairDetail {
    methods: (String, String),
    decomposition: MueDecomposition,
    ecdf: DeltaEcdfReport,
}

#[derive(Serialize)]
struct SipResult {
    #[serde(flatten)]
    report: SipReport,
    pair: Option<PairDetail>,
}

fn sip(g: &GlobalOpts, data: &Path, pair: Option<&str>, ecdf_path: Option<&Path>, u_bar: Option<f64>) -> Result<()> {
    let mut emit = Emit::new(g);
    let (_, m) = load(data, &mut emit)?;
    if pair.is_none() && (ecdf_path.is_some() || u_bar.is_some()) {
        return Err(usage("--ecdf and --u-bar require --pair"));
    }
    if let Some(u) = u_bar {
        if !(u >= 0.0) {
            return Err(usage("--u-bar must be >= 0"));
        }
    }
    let report = sip_matrix(&m)?;
    let labels = m.method_names();

    let mut header = vec!["method".to_string(), "msip".to_string()];
    header.extend(labels.iter().map(|l| format!("sip_vs_{l}")));
    let mut table = Table::new(header);
    for &i in &report.order {
        let mut row = vec![labels[i].clone(), num(report.msip[i])];
        row.extend(report.sip[i].iter().map(|&v| num(v)));
        table.push(row);
    }

    let detail = match pair {
        Some(p) => {
            let (i, j) = parse_pair(p, &m)?;
            let mut e = delta_ecdf(m.column(i), m.column(j), &plan(g, None))?;
            if let Some(u) = u_bar {
                e = e.with_uncertainty_bar(u);
            }
            let (a, b) = (labels[i].clone(), labels[j].clone());
            emit.svg(RenderKind::DeltaEcdf, ecdf_path, |spec| render_delta_ecdf(&e, (&a, &b), spec))?;
            Some(PairDetail {
                methods: (a, b),
                decomposition: mue_decomposition(m.column(i), m.column(j))?,
                ecdf: e,
            })
        }
        None => None,
    };

    emit.svg(RenderKind::SipDisk, g.svg.as_deref(), |spec| render_matrix(&report.sip, labels, spec))?;
    let config = json!({
        "data": data_name(data),
        "pair": pair,
        "boot": g.boot,
        "seed": g.seed,
        "u_bar": u_bar,
    });
    emit.finish("sip", config, SipResult { report, pair: detail }, &table)
}

fn corr(g: &GlobalOpts, data: &Path, pearson: bool, on: CorrOn) -> Result<()> {
    let mut emit = Emit::new(g);
    let (t, m) = load(data, &mut emit)?;
    let method = if pearson { CorrMethod::Pearson } else { CorrMethod::Spearman };
    let labels = m.method_names().to_vec();
    let columns: Vec<Vec<f64>> = match on {
        CorrOn::Errors => m.columns().to_vec(),
        CorrOn::Values => t.methods.iter().map(|c| c.predictions.clone()).collect(),
    };
    let cm: CorrMatrix = correlation_matrix(&columns, &labels, method)?;
    let mut header = vec!["method".to_string()];
    header.extend(labels.iter().cloned());
    let mut table = Table::new(header);
    for (i, row) in cm.values.iter().enumerate() {
        let mut r = vec![labels[i].clone()];
        r.extend(row.iter().map(|&v| num(v)));
        table.push(r);
    }
    emit.svg(RenderKind::CorrEllipse, g.svg.as_deref(), |spec| render_matrix(&cm.values, &labels, spec))?;
    let config = json!({
        "data": data_name(data),
        "method": method,
        "on": match on { CorrOn::Errors => "errors", CorrOn::Values => "values" },
    });
    emit.finish("corr", config, cm, &table)
}

fn rank(g: &GlobalOpts, data: &Path, stat: &str, nprime: Option<usize>, orientation: Option<OrientationArg>) -> Result<()> {
    let mut emit = Emit::new(g);
    let (_, m) = load(data, &mut emit)?;
    let criterion = if stat.trim().eq_ignore_ascii_case("msip") {
        RankCriterion::Msip
    } else {
        let kind = parse_stat(stat, g)?;
        if let Some(w) = sample_size_warning(kind, nprime.unwrap_or(m.n_systems())) {
            emit.warn(w);
        }
        RankCriterion::Statistic(kind)
    };
    let orientation = match orientation {
        Some(OrientationArg::Lower) => Orientation::LowerIsRank1,
        Some(OrientationArg::Higher) => Orientation::HigherIsRank1,
        None => criterion.default_orientation(),
    };
    let rm: RankMatrix = rank_probability_matrix(&m, criterion, &plan(g, nprime), orientation)?;
    let k = rm.labels.len();
    let mut header = vec!["method".to_string()];
    header.extend((1..=k).map(|r| format!("p_rank{r}")));
    header.extend(["mode", "p_mode", "rank_lo", "rank_hi"].map(String::from));
    let mut table = Table::new(header);
    for (j, label) in rm.labels.iter().enumerate() {
        let s = &rm.summary[j];
        let mut r = vec![label.clone()];
        r.extend(rm.p[j].iter().map(|&v| num(v)));
        r.extend([s.mode.to_string(), num(s.probability), s.interval.0.to_string(), s.interval.1.to_string()]);
        table.push(r);
    }
    emit.svg(RenderKind::RankHeatmap, g.svg.as_deref(), |spec| render_matrix(&rm.p, &rm.labels, spec))?;
    let config = json!({
        "data": data_name(data),
        "criterion": criterion,
        "orientation": orientation,
        "boot": g.boot,
        "seed": g.seed,
        "nprime": nprime,
    });
    emit.finish("rank", config, rm, &table)
}

fn parse_scenarios(list: &Option<Vec<String>>) -> Result<Vec<GhParams>> {
    let Some(list) = list else { return Ok(standard_scenarios()) };
    list.iter()
        .map(|s| {
            let parts: Vec<&str> = s.split(':').collect();
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| usage(format!("bad scenario `{s}` (expected g:h)")));
            match parts.as_slice() {
                [g, h] => Ok(GhParams::new(parse(g)?, parse(h)?, 0.0, 1.0)?),
                _ => Err(usage(format!("bad scenario `{s}` (expected g:h)"))),
            }
        })
        .collect()
}

fn or<T: Clone>(v: &Option<T>, default: T) -> T {
    v.clone().unwrap_or(default)
}

fn simulate(g: &GlobalOpts, study: &Study) -> Result<()> {
    match study {
        Study::Gh { g: gg, h, mu, sigma, n } => simulate_gh(g, GhParams::new(*gg, *h, *mu, *sigma)?, *n),
        Study::Corrtransfer { n, rho, reps, scenario, rho_scale } => {
            let d = StudyConfig::corr_transfer_default();
            let config = StudyConfig {
                n_values: or(n, d.n_values),
                rho_values: or(rho, d.rho_values),
                reps: or(reps, d.reps),
                replicates: 0,
                scenarios: parse_scenarios(scenario)?,
                seed: g.seed,
            };
            let scale = match rho_scale {
                RhoScaleArg::Gaussian => RhoScale::Gaussian,
                RhoScaleArg::Pearson => RhoScale::Pearson,
            };
            let rows = corr_transfer_study(&config, scale)?;
            let mut table = Table::new([
                "g", "h", "n", "rho", "latent_rho", "cor_mse", "lo_mse", "hi_mse", "cor_mue", "lo_mue", "hi_mue", "cor_q95",
                "lo_q95", "hi_q95",
            ]);
            for r in &rows {
                table.push([
                    raw(r.scenario.g),
                    raw(r.scenario.h),
                    r.n.to_string(),
                    raw(r.rho),
                    num(r.latent_rho),
                    num(r.mse.cor),
                    num(r.mse.lo),
                    num(r.mse.hi),
                    num(r.mue.cor),
                    num(r.mue.lo),
                    num(r.mue.hi),
                    num(r.q95.cor),
                    num(r.q95.lo),
                    num(r.q95.hi),
                ]);
            }
            let cfg = json!({ "study": config, "rho_scale": scale });
            Emit::new(g).finish("simulate corrtransfer", cfg, rows, &table)
        }
        Study::Type1 { stat, n, rho, reps, scenario } => {
            let d = StudyConfig::type1_default();
            let config = StudyConfig {
                n_values: or(n, d.n_values),
                rho_values: or(rho, d.rho_values),
                reps: or(reps, d.reps),
                replicates: g.boot,
                scenarios: parse_scenarios(scenario)?,
                seed: g.seed,
            };
            let kinds = stat.iter().map(|s| parse_stat(s, g)).collect::<Result<Vec<_>>>()?;
            let rows = type1_study(&config, &kinds)?;
            let mut table = Table::new(["g", "h", "n", "rho", "stat", "reps", "rejections", "alpha", "se"]);
            for r in &rows {
                table.push([
                    raw(r.scenario.g),
                    raw(r.scenario.h),
                    r.n.to_string(),
                    raw(r.rho),
                    r.stat.to_string(),
                    r.reps.to_string(),
                    r.rejections.to_string(),
                    num(r.alpha),
                    num(r.se),
                ]);
            }
            Emit::new(g).finish("simulate type1", json!({ "study": config, "stats": kinds }), rows, &table)
        }
        Study::Hdstudy { n, reps, mu, sigma } => {
            let d = StudyConfig::hd_default();
            let config = StudyConfig {
                n_values: or(n, d.n_values),
                rho_values: Vec::new(),
                reps: or(reps, d.reps),
                replicates: 0,
                scenarios: vec![GhParams::new(0.0, 0.0, *mu, *sigma)?],
                seed: g.seed,
            };
            let rows = hd_convergence_study(&config)?;
            let mut header = vec!["mode".to_string(), "n".to_string(), "method".to_string()];
            header.extend(SUMMARY_LEVELS.iter().map(|q| format!("q{q}")));
            header.extend(["reference", "median_bias", "distinct"].map(String::from));
            let mut table = Table::new(header);
            for r in &rows {
                let mut row = vec![
                    format!("{:?}", r.mode),
                    r.n.to_string(),
                    match r.method {
                        QuantileMethod::Hd => "hd".into(),
                        QuantileMethod::Type7 => "type7".into(),
                    },
                ];
                row.extend(r.summary.iter().map(|&v| num(v)));
                row.extend([num(r.reference), num(r.median_bias), r.distinct.to_string()]);
                table.push(row);
            }
            Emit::new(g).finish("simulate hdstudy", json!({ "study": config }), rows, &table)
        }
        Study::Pvalue { n, rho, reps, stat } => {
            let d = StudyConfig::pvalue_default();
            let config = StudyConfig {
                n_values: or(n, d.n_values),
                rho_values: or(rho, d.rho_values),
                reps: or(reps, d.reps),
                replicates: g.boot,
                scenarios: d.scenarios,
                seed: g.seed,
            };
            let kind = parse_stat(stat, g)?;
            let rows = pvalue_study(&config, kind)?;
            let mut table = Table::new(["n", "rho", "stat", "mean_p_g", "mean_p_t", "mean_abs_diff", "max_abs_diff"]);
            for r in &rows {
                table.push([
                    r.n.to_string(),
                    raw(r.rho),
                    r.stat.to_string(),
                    num(r.mean_p_g),
                    opt_num(r.mean_p_t),
                    opt_num(r.mean_abs_diff),
                    opt_num(r.max_abs_diff),
                ]);
            }
            Emit::new(g).finish("simulate pvalue", json!({ "study": config, "stat": kind }), rows, &table)
        }
    }
}

#[derive(Serialize)]
struct GhSummary {
    params: GhParams,
    n: usize,
    mean: f64,
    sd: f64,
    mue: f64,
    q95: f64,
}

fn simulate_gh(g: &GlobalOpts, params: GhParams, n: usize) -> Result<()> {
    if n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let margin = GhMargin::new(params)?;
    let x = margin.sample(n, &mut substream(g.seed, 0));
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let summary = GhSummary {
        params,
        n,
        mean,
        sd,
        mue: StatKind::Mue.prepare(n)?.eval(&x, &mut Vec::new()),
        q95: StatKind::q95().prepare(n)?.eval(&x, &mut Vec::new()),
    };
    let mut values = Table::new(["i", "value"]);
    for (i, v) in x.iter().enumerate() {
        values.push([i.to_string(), raw(*v)]);
    }
    let emit = Emit::new(g);
    if !emit.json_to_stdout() {
        let mut t = Table::new(["quantity", "value"]);
        for (k, v) in [("mean", mean), ("sd", sd), ("MUE", summary.mue), ("Q95", summary.q95)] {
            t.push([k.to_string(), num(v)]);
        }
        print!("{}", t.to_text());
    }
    if let Some(path) = &g.csv {
        write_output(path, &values.to_csv()?)?;
    }
    if let Some(path) = &g.json {
        let report = Report::new("simulate gh", json!({ "params": params, "n": n, "seed": g.seed }), summary, emit.warnings);
        write_output(path, &report.to_json()?)?;
    }
    Ok(())
}

