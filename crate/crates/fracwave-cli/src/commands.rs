//! The five subcommands: simulate, transform, reconstruct, poles, verify.

use crate::config::{LoadedConfig, MethodKind};
use crate::io;
use fracwave::laplace::find_poles;
use fracwave::model::hhat_analytic;
use fracwave::recon::{
    fulltime_newton, largetime_newton, sequential_peel, smalltime_newton, smalltime_preprocess,
    FulltimeOptions, FulltimeParams, LargetimeInitial, LargetimeOptions, PeelOptions,
    ReconstructionReport, SmalltimeInitial, SmalltimeOptions,
};
use fracwave::{solve_trace, LaplaceSamples, TimeTrace};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Failure classes, mapped one-to-one onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparsable, or semantically invalid configuration (exit 2).
    Config(String),
    /// A numerical method failed on valid inputs (exit 3).
    Method(String),
    /// Artifact input/output failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Method(_) => 3,
            CliError::Io(_) => 4,
        }
    }
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Method(m) | CliError::Io(m) => m,
        }
    }
}

pub struct RunContext {
    pub loaded: LoadedConfig,
    pub out_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub analytic_data: bool,
}

impl RunContext {
    pub fn load(
        config: &Path,
        out_dir: Option<PathBuf>,
        seed_override: Option<u64>,
        analytic_data: bool,
    ) -> Result<Self, CliError> {
        let loaded = LoadedConfig::from_path(config).map_err(CliError::Config)?;
        Ok(RunContext { loaded, out_dir, seed_override, analytic_data })
    }

    fn path(&self, name: &str) -> PathBuf {
        match &self.out_dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        }
    }

    fn seed(&self) -> u64 {
        self.seed_override.unwrap_or(self.loaded.cfg.noise.seed)
    }

    /// Noiseless forward solve on the configured grid.
    fn clean_trace(&self) -> Result<TimeTrace, CliError> {
        let cfg = &self.loaded.cfg;
        let model = cfg.build_model().map_err(CliError::Config)?;
        let exc = cfg.build_excitation().map_err(CliError::Config)?;
        solve_trace(&model, &exc, &cfg.time_grid())
            .map_err(|e| CliError::Method(format!("forward solve: {e}")))
    }

    fn input_trace(&self) -> Result<TimeTrace, CliError> {
        if self.analytic_data {
            self.clean_trace()
        } else {
            io::read_trace_csv(&self.path(&self.loaded.cfg.outputs.trace)).map_err(CliError::Io)
        }
    }
}

/// Multiplies every sample by `1 + level * xi` with `xi` standard normal
/// from a seeded generator; level 0 leaves the trace bit-identical.
pub fn add_noise(trace: &mut TimeTrace, level: f64, seed: u64) {
    if level == 0.0 {
        return;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for h in &mut trace.h {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *h *= 1.0 + level * xi;
    }
}

pub fn simulate(ctx: &RunContext) -> Result<(), CliError> {
    let cfg = &ctx.loaded.cfg;
    let mut trace = ctx.clean_trace()?;
    add_noise(&mut trace, cfg.noise.level, ctx.seed());
    let path = ctx.path(&cfg.outputs.trace);
    io::write_trace_csv(&path, &trace).map_err(CliError::Io)?;
    log::info!("wrote {} samples to {}", trace.t.len(), path.display());
    if let Some(plot) = &cfg.outputs.plot {
        let body = plot_columns(&["t", "h"], &[trace.t.clone(), trace.h.clone()]);
        io::atomic_write(&ctx.path(plot), body.as_bytes()).map_err(CliError::Io)?;
    }
    Ok(())
}

pub fn transform(ctx: &RunContext) -> Result<(), CliError> {
    let cfg = &ctx.loaded.cfg;
    let trace = ctx.input_trace()?;
    let m = &cfg.method;
    let samples = LaplaceSamples::from_trace(
        &trace,
        m.s_min,
        m.s_max,
        m.s_count,
        Some(cfg.model.big_lambda),
    )
    .map_err(|e| CliError::Method(format!("transform: {e}")))?;
    let path = ctx.path(&cfg.outputs.transform);
    io::write_samples_csv(&path, &samples.abscissae, &samples.values).map_err(CliError::Io)?;
    log::info!("wrote {} transform samples to {}", samples.abscissae.len(), path.display());
    Ok(())
}

pub fn reconstruct(ctx: &RunContext) -> Result<(), CliError> {
    let cfg = &ctx.loaded.cfg;
    let lam = cfg.model.big_lambda;
    let m = &cfg.method;
    let method_name;
    let report: ReconstructionReport;
    // per-method view of an iteration-record parameter vector as
    // (alphas, bs, lambda) for the printed table
    let split: Box<dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>, f64)>;
    let mut transform_grid: Option<LaplaceSamples> = None;

    match m.kind {
        MethodKind::Fulltime => {
            method_name = "fulltime";
            let exc = cfg.build_excitation().map_err(CliError::Config)?;
            let samples = if ctx.analytic_data {
                let model = cfg.build_model().map_err(CliError::Config)?;
                analytic_samples(&model, &exc, m.s_min, m.s_max, m.s_count)
                    .map_err(CliError::Method)?
            } else {
                let trace = ctx.input_trace()?;
                LaplaceSamples::from_trace(&trace, m.s_min, m.s_max, m.s_count, Some(lam))
                    .map_err(|e| CliError::Method(format!("transform: {e}")))?
            };
            let initial = FulltimeParams::new(
                m.initial_b.clone(),
                m.initial_alpha.clone(),
                m.initial_lambda.unwrap_or(lam),
            )
            .map_err(|e| CliError::Config(format!("method initial guess: {e}")))?;
            let opts = FulltimeOptions {
                tol: m.tol,
                max_iter: m.max_iter,
                fix_lambda: m.fix_lambda,
                ..Default::default()
            };
            report = fulltime_newton(&initial, &samples, exc.kind, &opts)
                .map_err(|e| CliError::Method(format!("fulltime: {e}")))?;
            // the term count can shrink mid-run when near-coincident orders
            // are merged, so it is re-derived per record
            split = Box::new(move |v| {
                let n = (v.len() - 1) / 2;
                (v[n..2 * n].to_vec(), v[..n].to_vec(), v[2 * n])
            });
            transform_grid = Some(samples);
        }
        MethodKind::Largetime => {
            method_name = "largetime";
            let trace = ctx.input_trace()?;
            let initial = LargetimeInitial {
                alpha: m.initial_alpha.clone(),
                b: m.initial_b.clone(),
            };
            let mut opts = LargetimeOptions::new(lam);
            opts.tol = m.tol;
            opts.max_iter = m.max_iter;
            report = largetime_newton(&initial, &trace, &opts)
                .map_err(|e| CliError::Method(format!("largetime: {e}")))?;
            split = Box::new(move |v| {
                let n = v.len() / 2;
                (v[..n].to_vec(), v[n..2 * n].to_vec(), lam)
            });
        }
        MethodKind::Smalltime => {
            method_name = "smalltime";
            if m.initial_alpha.len() != 2 {
                return Err(CliError::Config(
                    "the small-time method fits exactly two terms".into(),
                ));
            }
            let trace = ctx.input_trace()?;
            let g = smalltime_preprocess(&trace, lam)
                .map_err(|e| CliError::Method(format!("smalltime preprocess: {e}")))?;
            let initial = SmalltimeInitial {
                alpha: [m.initial_alpha[0], m.initial_alpha[1]],
                b: [m.initial_b[0], m.initial_b[1]],
            };
            let mut opts = SmalltimeOptions::default();
            opts.tol = m.tol;
            opts.max_iter = m.max_iter;
            report = smalltime_newton(&initial, &g, lam, &opts)
                .map_err(|e| CliError::Method(format!("smalltime: {e}")))?;
            split = Box::new(move |v| (v[..2].to_vec(), v[2..4].to_vec(), lam));
        }
        MethodKind::Peel => {
            method_name = "peel";
            let trace = ctx.input_trace()?;
            report = sequential_peel(&trace, &PeelOptions::new(lam))
                .map_err(|e| CliError::Method(format!("peel: {e}")))?;
            split = Box::new(move |v| {
                let n = v.len() / 2;
                (v[..n].to_vec(), v[n..].to_vec(), lam)
            });
        }
    }

    let text = render_report(&report, method_name, &ctx.loaded.digest, &split);
    let path = ctx.path(&cfg.outputs.report);
    io::atomic_write(&path, text.as_bytes()).map_err(CliError::Io)?;
    log::info!("wrote report to {} (status {:?})", path.display(), report.status);

    if let Some(plot) = &cfg.outputs.plot {
        let body = reconstruction_plot(cfg, &report, &split, transform_grid.as_ref())
            .map_err(CliError::Method)?;
        io::atomic_write(&ctx.path(plot), body.as_bytes()).map_err(CliError::Io)?;
    }
    Ok(())
}

pub fn poles(ctx: &RunContext) -> Result<(), CliError> {
    let cfg = &ctx.loaded.cfg;
    let model = cfg.build_model().map_err(CliError::Config)?;
    let exc = cfg.build_excitation().map_err(CliError::Config)?;
    let (p, q) = find_poles(&model, &exc, 200)
        .map_err(|e| CliError::Method(format!("pole search: {e}")))?;
    for (label, d) in [("pole", p), ("conjugate", q)] {
        println!(
            "{label}: s = {:+.12e} {:+.12e}i  residue = {:+.12e} {:+.12e}i  symbol_residual = {:.3e}",
            d.pole.re, d.pole.im, d.residue.re, d.residue.im, d.omega_residual
        );
    }
    Ok(())
}

/// Sanity suite over the configured model: pole placement, transform
/// consistency, dissipative boundedness, and noise determinism. One line
/// per check; any failure exits with the method-failure code.
pub fn verify(ctx: &RunContext) -> Result<(), CliError> {
    let cfg = &ctx.loaded.cfg;
    let model = cfg.build_model().map_err(CliError::Config)?;
    let exc = cfg.build_excitation().map_err(CliError::Config)?;
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{name}: {}", if pass { "pass" } else { "FAIL" });
        ok &= pass;
    };

    match find_poles(&model, &exc, 200) {
        Ok((p, q)) => {
            check("poles-left-half-plane", p.pole.re < 0.0 || model.damping_terms.is_empty());
            check("poles-conjugate-pair", (p.pole - q.pole.conj()).norm() < 1e-9);
            check(
                "poles-symbol-residual",
                p.omega_residual < 1e-10 * (p.pole.norm_sqr() + model.big_lambda),
            );
        }
        Err(e) => {
            log::error!("pole search failed: {e}");
            check("poles-found", false);
        }
    }

    // transform consistency: numeric transform of a generous trace against
    // the closed form, away from the truncation-dominated region
    let t_end = 60.0 / model.big_lambda.sqrt().max(0.5);
    let grid: Vec<f64> = (0..2000).map(|i| t_end * i as f64 / 1999.0).collect();
    match solve_trace(&model, &exc, &grid) {
        Ok(trace) => {
            let s = 2.0;
            let numeric = fracwave::laplace_numeric(&trace, s, Some(model.big_lambda)).unwrap();
            let exact = hhat_analytic(&model, &exc, Complex64::new(s, 0.0)).unwrap().re;
            check(
                "transform-matches-closed-form",
                (numeric - exact).abs() <= 1e-3 * exact.abs().max(1e-3),
            );
            let sup = trace.h.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let tail_grid: Vec<f64> = (0..200).map(|i| t_end * (1.0 + i as f64 / 199.0)).collect();
            let tail = solve_trace(&model, &exc, &tail_grid).unwrap();
            let sup_tail = tail.h.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            check("trace-stays-bounded", sup_tail <= sup * (1.0 + 1e-6));
        }
        Err(e) => {
            log::error!("forward solve failed: {e}");
            check("forward-solve", false);
        }
    }

    let mut a = TimeTrace::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.25, 0.125]);
    let mut b = a.clone();
    add_noise(&mut a, 1e-3, ctx.seed());
    add_noise(&mut b, 1e-3, ctx.seed());
    check("noise-deterministic", a.h == b.h);

    if ok {
        Ok(())
    } else {
        Err(CliError::Method("verification suite failed".into()))
    }
}

fn analytic_samples(
    model: &fracwave::DampingModel,
    exc: &fracwave::Excitation,
    s_min: f64,
    s_max: f64,
    count: usize,
) -> Result<LaplaceSamples, String> {
    let ratio = (s_max / s_min).powf(1.0 / (count - 1) as f64);
    let abscissae: Vec<f64> = (0..count).map(|k| s_min * ratio.powi(k as i32)).collect();
    let values = abscissae
        .iter()
        .map(|&s| hhat_analytic(model, exc, Complex64::new(s, 0.0)).map(|v| v.re))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| format!("analytic transform: {e}"))?;
    LaplaceSamples::new(abscissae, values, f64::INFINITY).map_err(|e| format!("{e}"))
}

fn render_report(
    report: &ReconstructionReport,
    method: &str,
    digest: &str,
    split: &dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>, f64),
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {method}");
    let _ = writeln!(out, "config_digest = {digest}");
    let _ = writeln!(out, "status = {:?}", report.status);
    let _ = writeln!(out, "iterations = {}", report.iterations());
    match report.final_residual() {
        Some(r) => {
            let _ = writeln!(out, "final_residual = {r:.6e}");
        }
        None => {
            let _ = writeln!(out, "final_residual = none");
        }
    }
    let _ = writeln!(out, "recovered_lambda = {:.12e}", report.recovered.big_lambda);
    let alphas: Vec<String> =
        report.recovered.damping_terms.iter().map(|t| format!("{:.12e}", t.alpha)).collect();
    let bs: Vec<String> =
        report.recovered.damping_terms.iter().map(|t| format!("{:.12e}", t.coeff)).collect();
    let _ = writeln!(out, "recovered_alpha = {}", alphas.join(", "));
    let _ = writeln!(out, "recovered_b = {}", bs.join(", "));
    for p in &report.pruning_log {
        let _ = writeln!(out, "pruned = iteration {}: {} ({})", p.iteration, p.term, p.reason);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "# iter | alpha | b | lambda | residual");
    for rec in &report.history {
        if rec.params.is_empty() {
            let _ = writeln!(out, "{} | - | - | - |", rec.iteration);
            continue;
        }
        let (a, b, lam) = split(&rec.params);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
        let res = rec.residual.map_or(String::new(), |r| format!("{r:.6e}"));
        let _ = writeln!(out, "{} | {} | {} | {:.6} | {}", rec.iteration, fmt(&a), fmt(&b), lam, res);
    }
    out
}

fn plot_columns(names: &[&str], cols: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| format!("{:.16e}", c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Plot data for a reconstruction: on the full-time s grid, the observed
/// transform next to the per-iteration model transforms; for the time-domain
/// methods, the data window next to the final fitted tail model.
fn reconstruction_plot(
    cfg: &crate::config::ExperimentConfig,
    report: &ReconstructionReport,
    split: &dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>, f64),
    grid: Option<&LaplaceSamples>,
) -> Result<String, String> {
    if let Some(samples) = grid {
        let exc = cfg.build_excitation()?;
        let mut names = vec!["s".to_string(), "actual".to_string()];
        let mut cols = vec![samples.abscissae.clone(), samples.values.clone()];
        for rec in &report.history {
            let (a, b, lam) = split(&rec.params);
            let model = fracwave::DampingModel::with_unit_beta(lam, &a, &b)
                .map_err(|e| format!("iterate {}: {e}", rec.iteration))?;
            let col = samples
                .abscissae
                .iter()
                .map(|&s| hhat_analytic(&model, &exc, Complex64::new(s, 0.0)).map(|v| v.re))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| format!("{e}"))?;
            names.push(format!("iter_{}", rec.iteration));
            cols.push(col);
        }
        let names_ref: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(plot_columns(&names_ref, &cols))
    } else {
        let t = cfg.time_grid();
        let last = report.history.last().ok_or("empty history")?;
        let (a, b, lam) = split(&last.params);
        let model = fracwave::DampingModel::with_unit_beta(lam, &a, &b)
            .map_err(|e| format!("final iterate: {e}"))?;
        let exc = cfg.build_excitation()?;
        let fitted = solve_trace(&model, &exc, &t).map_err(|e| format!("{e}"))?;
        Ok(plot_columns(&["t", "fitted"], &[t, fitted.h]))
    }
}
