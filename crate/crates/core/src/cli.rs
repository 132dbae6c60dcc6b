//! Experiment pipelines behind the `fluctlab` binary.
//!
//! Every pipeline writes CSV files and a `manifest.json` into the output
//! directory. Replicas run in parallel but results are gathered in replica
//! order, so identical configs give byte-identical files (unless `timing`
//! is switched on).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::acceptance;
use crate::config::ExperimentConfig;
use crate::dynamics::{sample_bernoulli, simulate, write_event_log, ExclusionModel, Observer, RateFamily};
use crate::env::{sample_field, EnvironmentKind};
use crate::fluctuations::{
    bg_statistic, boltzmann_gibbs_replacement_gap, qv_expectation, FieldSeries, MartingaleObserver,
};
use crate::operators::{
    assemble, default_rhs_family, eigendecompose, energy_convergence, homogenize, HomogenizedMatrix, LatticeOperator,
};
use crate::oulimit::{compare, ou_ensemble, OUParams};
use crate::rng::{derive_seed, stream};
use crate::stats::{z_score, Moments};
use crate::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FLUCTLAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Spectrum,
    Homogenize,
    Energy,
    Fluct,
    QvCheck,
    BgCheck,
    OuSimulate,
    OuCompare,
    Accept,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Homogenize => "homogenize",
            Command::Energy => "energy",
            Command::Fluct => "fluct",
            Command::QvCheck => "qv-check",
            Command::BgCheck => "bg-check",
            Command::OuSimulate => "ou-simulate",
            Command::OuCompare => "ou-compare",
            Command::Accept => "accept",
        }
    }
}

/// Files written by a pipeline and whether its checks passed.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: String,
}

/// Worker count: the config value (or all cores) capped by `FLUCTLAB_THREADS`.
pub fn thread_count(config: &ExperimentConfig) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let wanted = config.threads.unwrap_or(available);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap > 0 => wanted.min(cap),
        _ => wanted,
    }
}

/// Runs a pipeline and writes its artifacts into `out_dir`.
pub fn run(config: &ExperimentConfig, command: Command, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(config))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let (passed, summary) = pool.install(|| match command {
        Command::Simulate => run_simulate(config, &mut out),
        Command::Spectrum => run_spectrum(config, &mut out),
        Command::Homogenize => run_homogenize(config, &mut out),
        Command::Energy => run_energy(config, &mut out),
        Command::Fluct => run_fluct(config, &mut out),
        Command::QvCheck => run_qv_check(config, &mut out),
        Command::BgCheck => run_bg_check(config, &mut out),
        Command::OuSimulate => run_ou_simulate(config, &mut out),
        Command::OuCompare => run_ou_compare(config, &mut out),
        Command::Accept => run_accept(&mut out),
    })?;
    out.manifest(config, command)?;
    Ok(RunOutcome {
        files: out.files,
        passed,
        summary,
    })
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    fn manifest(&mut self, config: &ExperimentConfig, command: Command) -> Result<()> {
        let mut files = serde_json::Map::new();
        for f in &self.files {
            let name = f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            files.insert(name, hex_sha256(&fs::read(f)?).into());
        }
        let manifest = serde_json::json!({
            "command": command.name(),
            "config_sha256": hex_sha256(config.canonical_text().as_bytes()),
            "config": config.canonical_text(),
            "seed": config.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "files": files,
        });
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Runs `f` for every replica in parallel and returns results in replica order.
fn replicas<T: Send>(count: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

fn operator_at(config: &ExperimentConfig, n: usize) -> Result<LatticeOperator> {
    let field = sample_field(&config.env, config.d, n)?;
    assemble(&config.wfunction(), &field)
}

fn model_at(config: &ExperimentConfig, n: usize) -> Result<(LatticeOperator, Arc<ExclusionModel>)> {
    let op = operator_at(config, n)?;
    let model = Arc::new(ExclusionModel::new(&op, config.family));
    Ok((op, model))
}

/// The effective matrix: exact for constant environments, fitted otherwise.
fn effective_matrix(config: &ExperimentConfig) -> Result<HomogenizedMatrix> {
    if let EnvironmentKind::Constant { value } = config.env.kind {
        return Ok(HomogenizedMatrix::scalar(config.d, value));
    }
    let rhs = default_rhs_family(config.d);
    Ok(homogenize(&config.wfunction(), &config.env, config.lambda, &rhs, &config.n_list)?.matrix)
}

fn replica_seed(config: &ExperimentConfig, r: u64) -> u64 {
    derive_seed(config.seed, stream::DYNAMICS, r)
}

fn run_simulate(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let (_, model) = model_at(config, config.n)?;
    let lattice = model.lattice();
    let results = replicas(config.replicas, |r| {
        let start = Instant::now();
        let seed = replica_seed(config, r);
        let cfg0 = sample_bernoulli(config.rho, lattice, seed)?;
        let traj = simulate(model.clone(), cfg0, config.t_end, seed, &[], &mut [])?;
        let wall = if config.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let mut log = Vec::new();
        if config.events {
            write_event_log(traj.events(), &mut log)?;
        }
        Ok((traj.events().len(), traj.final_configuration().density(), wall, log))
    })?;
    let mut rows = Vec::with_capacity(results.len());
    for (r, (events, density, wall, log)) in results.iter().enumerate() {
        rows.push(format!("{r},{events},{density},{wall}"));
        if config.events {
            out.write(&format!("events_{r}.bin"), log)?;
        }
    }
    out.csv("simulate.csv", "replica,events,final_density,wall_time", &rows)?;
    Ok((true, format!("{} replicas simulated", results.len())))
}

fn run_spectrum(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let op = operator_at(config, config.n)?;
    let basis = eigendecompose(&op, config.modes.min(op.lattice().num_sites()))?;
    let rows: Vec<String> = basis
        .alphas()
        .iter()
        .enumerate()
        .map(|(k, a)| format!("{},{},{a}", config.n, k + 1))
        .collect();
    out.csv("spectrum.csv", "N,k,alpha_k", &rows)?;
    Ok((true, format!("{} eigenvalues", rows.len())))
}

fn a_columns(d: usize) -> String {
    (1..=d).map(|j| format!("a_eff_{j}")).collect::<Vec<_>>().join(",")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn run_homogenize(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let rhs = default_rhs_family(config.d);
    let rep = homogenize(&config.wfunction(), &config.env, config.lambda, &rhs, &config.n_list)?;
    let rows: Vec<String> = rep
        .fits
        .iter()
        .map(|f| {
            format!(
                "{},{},{},{}",
                f.n,
                join(f.matrix.diag()),
                f.relative_residual,
                f.condition
            )
        })
        .collect();
    out.csv(
        "homogenize.csv",
        &format!("N,{},relative_residual,condition", a_columns(config.d)),
        &rows,
    )?;
    Ok((true, format!("A = {:?}", rep.matrix.diag())))
}

fn run_energy(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let rep = energy_convergence(
        &config.wfunction(),
        &config.env,
        config.lambda,
        &config.rhs_function(),
        &config.n_list,
    )?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                r.n,
                join(rep.matrix.diag()),
                r.l2_n,
                r.l2_0,
                r.energy_n,
                r.energy_0,
                r.l2_gap,
                r.energy_gap
            )
        })
        .collect();
    out.csv(
        "energy.csv",
        &format!(
            "N,{},l2_n,l2_0,energy_n,energy_0,l2_gap,energy_gap",
            a_columns(config.d)
        ),
        &rows,
    )?;
    Ok((true, format!("{} lattice sizes", rows.len())))
}

/// Per-replica field, martingale and QV paths for every test function.
fn run_fluct(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let (_, model) = model_at(config, config.n)?;
    let lattice = model.lattice();
    let gs = config.test_functions();
    let restricted: Vec<_> = gs.iter().map(|g| g.restrict(lattice)).collect();
    let results = replicas(config.replicas, |r| {
        let seed = replica_seed(config, r);
        let cfg0 = sample_bernoulli(config.rho, lattice, seed)?;
        let mut obs: Vec<MartingaleObserver> = restricted
            .iter()
            .map(|g| MartingaleObserver::new(g, config.rho))
            .collect();
        {
            let mut refs: Vec<&mut dyn Observer> = obs.iter_mut().map(|o| o as &mut dyn Observer).collect();
            simulate(model.clone(), cfg0, config.t_end, seed, &config.times, &mut refs)?;
        }
        Ok(obs.into_iter().map(MartingaleObserver::into_path).collect::<Vec<_>>())
    })?;
    let mut rows = Vec::new();
    for (r, paths) in results.iter().enumerate() {
        for (g, path) in gs.iter().zip(paths) {
            for i in 0..path.times.len() {
                rows.push(format!(
                    "{r},{},{},{},{},{}",
                    path.times[i],
                    g.label(),
                    path.y[i],
                    path.m[i],
                    path.qv[i]
                ));
            }
        }
    }
    out.csv("fluct.csv", "replica,t,G_label,Y,M,QV", &rows)?;
    Ok((true, format!("{} replicas", results.len())))
}

fn stat_row(n: usize, label: &str, stat: &str, m: &Moments, expected: f64) -> (String, f64) {
    let z = z_score(m.mean - expected, m.stderr());
    (
        format!("{n},{label},{stat},{},{},{expected},{z}", m.mean, m.stderr()),
        z,
    )
}

/// Martingale mean, compensator identity and `E⟨M⟩_T / T` against the formula.
fn run_qv_check(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let (op, model) = model_at(config, config.n)?;
    let lattice = model.lattice();
    let t = config.t_end;
    if t <= 0.0 {
        return Err(Error::Config(vec!["T: qv-check needs T > 0".into()]));
    }
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for g in config.test_functions() {
        let gl = g.restrict(lattice);
        let ends = replicas(config.replicas, |r| {
            let seed = replica_seed(config, r);
            let cfg0 = sample_bernoulli(config.rho, lattice, seed)?;
            let mut obs = MartingaleObserver::new(&gl, config.rho);
            simulate(model.clone(), cfg0, t, seed, &[], &mut [&mut obs])?;
            Ok((obs.m(), obs.qv()))
        })?;
        let ms: Vec<f64> = ends.iter().map(|e| e.0).collect();
        let comp: Vec<f64> = ends.iter().map(|e| e.0 * e.0 - e.1).collect();
        let rate: Vec<f64> = ends.iter().map(|e| e.1 / t).collect();
        let expected = qv_expectation(&gl, &op, config.rho, config.family, 1.0)?;
        for (stat, xs, exp) in [
            ("mean_M", &ms, 0.0),
            ("M2_minus_QV", &comp, 0.0),
            ("QV_over_T", &rate, expected),
        ] {
            let (row, z) = stat_row(config.n, g.label(), stat, &Moments::of(xs), exp);
            worst = worst.max(z.abs());
            rows.push(row);
        }
    }
    out.csv("qv_check.csv", "N,G_label,statistic,value,stderr,expected,z", &rows)?;
    Ok((worst <= 3.0, format!("max |z| = {worst:.3}")))
}

/// `E[Z²]` of the Boltzmann-Gibbs statistic over the lattice sizes in `N-list`.
fn run_bg_check(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let g = config
        .test_functions()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config(vec!["G-set: empty".into()]))?;
    let f = config.cylinder_function();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for &n in &config.n_list {
        let (_, model) = model_at(config, n)?;
        let lattice = model.lattice();
        let gl = g.restrict(lattice);
        let zs = replicas(config.replicas, |r| {
            let seed = replica_seed(config, r);
            let cfg0 = sample_bernoulli(config.rho, lattice, seed)?;
            let traj = simulate(model.clone(), cfg0, config.t_end, seed, &[], &mut [])?;
            let z = bg_statistic(&traj, &gl, &f, config.rho)?;
            let gap = match config.family {
                RateFamily::Standard { .. } => boltzmann_gibbs_replacement_gap(&traj, &gl, config.rho)?,
                RateFamily::Extended { .. } => f64::NAN,
            };
            Ok((z * z, gap * gap))
        })?;
        let z2 = Moments::of(&zs.iter().map(|z| z.0).collect::<Vec<_>>());
        rows.push(format!("{n},E[Z^2],{},{}", z2.mean, z2.stderr()));
        let gap = Moments::of(&zs.iter().map(|z| z.1).collect::<Vec<_>>());
        if gap.mean.is_finite() {
            rows.push(format!("{n},replacement_gap,{},{}", gap.mean, gap.stderr()));
        }
        values.push(z2.mean);
    }
    out.csv("bg_check.csv", "N,statistic,value,stderr", &rows)?;
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    Ok((decreasing, format!("E[Z^2] = {values:?}")))
}

fn ou_params(config: &ExperimentConfig) -> Result<OUParams> {
    OUParams::covering(
        config.rho,
        config.family,
        &config.wfunction(),
        effective_matrix(config)?,
        config.n_ref,
        config.modes,
        &config.test_functions(),
    )
}

fn run_ou_simulate(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let params = ou_params(config)?;
    let gs = config.test_functions();
    let runs = ou_ensemble(&params, &gs, &config.times, config.replicas, config.seed)?;
    let mut rows = Vec::new();
    for s in &runs {
        for (label, vals) in s.labels.iter().zip(&s.values) {
            for (t, y) in s.times.iter().zip(vals) {
                rows.push(format!("{},{t},{label},{y}", s.replica));
            }
        }
    }
    out.csv("ou.csv", "replica,t,G_label,Y", &rows)?;
    Ok((true, format!("{} OU replicas", runs.len())))
}

/// Reads `replica,t,G_label,Y,…` rows (the `fluct` and `ou-simulate` outputs).
pub fn read_field_csv(text: &str, rho: f64) -> Result<Vec<FieldSeries>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))
    };
    let (cr, ct, cg, cy) = (col("replica")?, col("t")?, col("G_label")?, col("Y")?);
    let mut series: Vec<FieldSeries> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("line {}: malformed row '{line}'", i + 2));
        let get = |c: usize| cells.get(c).map(|s| s.trim()).ok_or_else(bad);
        let replica: u64 = get(cr)?.parse().map_err(|_| bad())?;
        let t: f64 = get(ct)?.parse().map_err(|_| bad())?;
        let label = get(cg)?.to_string();
        let y: f64 = get(cy)?.parse().map_err(|_| bad())?;
        if series.last().is_none_or(|s| s.replica != replica) {
            series.push(FieldSeries::new(replica, rho, Vec::new(), Vec::new()));
        }
        let s = series.last_mut().expect("just pushed");
        let g = match s.labels.iter().position(|l| *l == label) {
            Some(g) => g,
            None => {
                s.labels.push(label);
                s.values.push(Vec::new());
                s.labels.len() - 1
            }
        };
        if g == 0 {
            s.times.push(t);
        }
        s.values[g].push(y);
    }
    Ok(series)
}

fn run_ou_compare(config: &ExperimentConfig, out: &mut Output) -> Result<(bool, String)> {
    let path = config
        .empirical
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["empirical: path to a fluct.csv is required".into()]))?;
    let empirical = read_field_csv(&fs::read_to_string(path)?, config.rho)?;
    let params = ou_params(config)?;
    let report = compare(&empirical, &params, &config.test_functions())?;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.label, r.t, r.lag, r.stat, r.value, r.expected, r.z
            )
        })
        .collect();
    out.csv("ou_compare.csv", "G_label,t,lag,stat,value,expected,z", &rows)?;
    let flagged = report.flagged().count();
    Ok((
        flagged == 0,
        format!("{flagged} of {} statistics with |z| > 3", rows.len()),
    ))
}

fn run_accept(out: &mut Output) -> Result<(bool, String)> {
    let outcomes = acceptance::run_all(|o| println!("{o}"));
    let rows: Vec<String> = outcomes
        .iter()
        .map(|o| {
            format!(
                "{},{},{},\"{}\"",
                o.id,
                o.name,
                if o.pass { "pass" } else { "fail" },
                o.detail.replace('"', "'")
            )
        })
        .collect();
    out.csv("accept.csv", "criterion,name,result,detail", &rows)?;
    let passed = outcomes.iter().filter(|o| o.pass).count();
    Ok((
        passed == outcomes.len(),
        format!("{passed}/{} criteria passed", outcomes.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text, &[]).unwrap()
    }

    #[test]
    fn zero_replicas_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&config("replicas = 0"), Command::Simulate, dir.path()).unwrap();
        assert!(out.passed);
        let text = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
        assert_eq!(text, "replica,events,final_density,wall_time\n");
    }

    #[test]
    fn identical_configs_give_identical_outputs() {
        let cfg = config("N = 16\nreplicas = 3\nT = 0.02\nevents = true\nb = 0.5");
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(&cfg, Command::Simulate, a.path()).unwrap();
        run(&cfg, Command::Simulate, b.path()).unwrap();
        for name in ["manifest.json", "simulate.csv", "events_2.bin"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn fluct_output_round_trips_into_compare() {
        let cfg = config("N = 32\nreplicas = 4\nT = 0.02\ntimes = [0.0, 0.01]\nN_ref = 64");
        let dir = tempfile::tempdir().unwrap();
        run(&cfg, Command::Fluct, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("fluct.csv")).unwrap();
        let series = read_field_csv(&text, 0.5).unwrap();
        assert_eq!(series.len(), 4);
        assert_eq!(series[0].times, vec![0.0, 0.01, 0.02]);
        assert_eq!(series[0].labels, vec!["c1", "s1"]);
        let path = dir.path().join("fluct.csv");
        let cmp = ExperimentConfig::from_toml_str(
            "N_ref = 64\nreplicas = 4\nT = 0.02\ntimes = [0.0, 0.01]",
            &[("empirical".into(), format!("\"{}\"", path.display()))],
        )
        .unwrap();
        let out = run(&cmp, Command::OuCompare, dir.path()).unwrap();
        assert!(out.files.iter().any(|f| f.ends_with("ou_compare.csv")));
    }

    #[test]
    fn spectrum_rows() {
        let dir = tempfile::tempdir().unwrap();
        run(&config("N = 16\nK = 5"), Command::Spectrum, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().nth(1).unwrap().starts_with("16,1,"));
    }
}
