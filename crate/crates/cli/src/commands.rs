use std::fmt;
use std::io;

use dnls_core::evolver::{evolve, virial_moment, variance, EvolveConfig, Flow};
use dnls_core::experiment::{build_unstable_data, run_instability, run_sweep, InstabilityConfig, InstabilityReport, Setup};
use dnls_core::field::random_smooth;
use dnls_core::gkdv::{identity_suite, GkdvProfile};
use dnls_core::linop::{
    assemble_ltilde, build_chi_star, coercivity_probe, kernel_angle, quadratic_form_identity, spectral_decompose,
    SpectralConfig,
};
use dnls_core::modulation::{scaling_laws_check, Modulator, Tracker, TRACK_COLUMNS};
use dnls_core::soliton::{conserved, stationary_residual, tail_mass, Regime, Soliton};
use dnls_core::{ComplexField, Exec, LabError};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{EvolveCfg, GkdvCfg, InitialData, InstabilityCfg, RunConfig, SolitonCfg, SpectrumCfg};
use crate::output::RunWriter;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    /// Bad input maps to 2 whatever the command; everything else to `code`.
    pub fn lab(code: i32) -> impl Fn(LabError) -> CliError {
        move |e| {
            let code = match e {
                LabError::InvalidParams { .. } | LabError::InvalidConfig(_) | LabError::InvalidGrid(_) => 2,
                _ => code,
            };
            CliError::new(code, e.to_string())
        }
    }

    pub fn io(code: i32) -> impl Fn(io::Error) -> CliError {
        move |e| CliError::new(code, format!("i/o: {e}"))
    }
}

type Out = Result<Vec<String>, CliError>;

pub fn run(cfg: &RunConfig, w: &RunWriter, exec: Exec) -> Out {
    match cfg {
        RunConfig::Soliton(c) => soliton(c, w),
        RunConfig::Spectrum(c) => spectrum(c, w, exec),
        RunConfig::Evolve(c) => evolve_cmd(c, w, exec),
        RunConfig::Instability(c) => instability(c, w, exec),
        RunConfig::Gkdv(c) => gkdv(c, w),
    }
}

fn soliton(cfg: &SolitonCfg, w: &RunWriter) -> Out {
    let lab = CliError::lab(2);
    let io = CliError::io(2);
    let grid = cfg.grid.build().map_err(&lab)?;
    let p = cfg.params.resolve(&grid).map_err(&lab)?;
    let sol = Soliton::new(p, &grid).map_err(&lab)?;
    let (res_c, res_r) = stationary_residual(&p, &grid).map_err(&lab)?;
    let q = conserved(&sol.phi, p.b);
    let tail = tail_mass(&p, grid.half_width());
    w.csv(
        "profile.csv",
        &["x", "Phi", "eta", "re_phi", "im_phi"],
        (0..grid.n()).map(|j| {
            let z = sol.phi.values()[j];
            vec![grid.nodes()[j], sol.profile[j], sol.eta[j], z.re, z.im]
        }),
    )
    .map_err(&io)?;
    w.json(
        "soliton.json",
        &json!({
            "params": p,
            "kappa0": cfg.params.kappa0.then(|| p.c / (2.0 * p.omega.sqrt())),
            "conserved": q,
            "mass": q.mass,
            "tail_mass": tail,
            "mass_with_tail": q.mass + tail,
            "stationary_residual": { "complex": res_c, "real": res_r },
            // algebraic tails do not vanish at the box edge, so spectral
            // derivatives of the periodized profile are polluted there
            "residual_reliable": p.regime == Regime::Interior,
        }),
    )
    .map_err(&io)?;
    Ok(vec![
        format!("regime={:?} b={} omega={} c={}", p.regime, p.b, p.omega, p.c),
        format!("E={:e} M={:e} P={:e} (M+tail={:e})", q.energy, q.mass, q.momentum, q.mass + tail),
        format!("stationary residual: complex={res_c:e} real={res_r:e}"),
    ])
}

fn spectrum(cfg: &SpectrumCfg, w: &RunWriter, exec: Exec) -> Out {
    let lab = CliError::lab(3);
    let io = CliError::io(3);
    let grid = cfg.grid.build().map_err(&lab)?;
    let p = cfg.params.resolve(&grid).map_err(&lab)?;
    let sol = Soliton::new(p, &grid).map_err(&lab)?;
    let op = assemble_ltilde(&sol, exec);
    let interior = p.regime == Regime::Interior;
    let mut scfg = SpectralConfig::for_omega(p.omega);
    scfg.classify = interior;
    let sd = spectral_decompose(&op, scfg).map_err(&lab)?;
    w.csv(
        "eigenvalues.csv",
        &["index", "eigenvalue"],
        sd.eigenvalues.iter().enumerate().map(|(j, &e)| vec![j as f64, e]),
    )
    .map_err(&io)?;
    if let Some(chi) = &sd.chi {
        w.csv(
            "chi.csv",
            &["x", "re_chi", "im_chi"],
            grid.nodes().iter().zip(chi.values()).map(|(&x, z)| vec![x, z.re, z.im]),
        )
        .map_err(&io)?;
    }
    let angle = interior.then(|| kernel_angle(&sd, &sol));

    let form = match cfg.form_trials {
        Some(trials) => {
            let mut max_rel = 0.0_f64;
            for t in 0..trials {
                let f = random_smooth(&grid, cfg.seed.wrapping_add(t as u64));
                let (a, b) = quadratic_form_identity(&op, &f).map_err(&lab)?;
                max_rel = max_rel.max((a - b).abs() / a.abs().max(b.abs()));
            }
            let i_phi = ComplexField::from_parts(&grid, &vec![0.0; grid.n()], &sol.profile);
            let (chi_star, lambda11) = build_chi_star(&op);
            let (direct, factorized) = quadratic_form_identity(&op, &chi_star).map_err(&lab)?;
            Some(json!({
                "trials": trials,
                "max_relative_error": max_rel,
                "i_phi_form": op.quadratic_form(&i_phi),
                "chi_star": { "lambda11": lambda11, "direct": direct, "factorized": factorized },
            }))
        }
        None => None,
    };
    let coercivity = if interior && cfg.coercivity_trials > 0 {
        Some(coercivity_probe(&sd, &sol, cfg.coercivity_trials, cfg.seed, exec).map_err(&lab)?)
    } else {
        None
    };
    w.json(
        "spectrum.json",
        &json!({
            "params": p,
            "diagnostic_only": !interior,
            "signature": sd.signature,
            "lambda_neg": sd.lambda_neg,
            "lowest_positive": sd.lowest_positive,
            "kernel_angle": angle,
            "config": sd.config,
            "quadratic_form": form,
            "coercivity_min_ratio": coercivity,
        }),
    )
    .map_err(&io)?;
    let s = sd.signature;
    let mut lines = vec![format!(
        "signature: negative={} kernel={} unresolved={} positive={}{}",
        s.negative,
        s.kernel,
        s.unresolved,
        s.positive,
        if interior { "" } else { " (diagnostic-only)" }
    )];
    if let Some(a) = angle {
        lines.push(format!("kernel principal angle: {a:e}"));
    }
    if let Some(f) = form {
        lines.push(format!("quadratic form max relative error: {:e}", f["max_relative_error"].as_f64().unwrap_or(f64::NAN)));
    }
    Ok(lines)
}

fn evolve_cmd(cfg: &EvolveCfg, w: &RunWriter, exec: Exec) -> Out {
    let lab = CliError::lab(4);
    let io = CliError::io(4);
    let grid = cfg.grid.build().map_err(&lab)?;
    let p = cfg.params.resolve(&grid).map_err(&lab)?;
    let mut ecfg = EvolveConfig::new(cfg.dt, cfg.t_end);
    ecfg.record_every = cfg.record_every;
    ecfg.dealias = cfg.dealias;
    ecfg.keep_snapshots = false;
    ecfg.validate().map_err(&lab)?;
    let wf = ecfg.window_fraction;

    let sol = Soliton::new(p, &grid).map_err(&lab)?;
    let setup = match cfg.data {
        InitialData::Perturbed { chi_n, .. } => Some(Setup::with_chi_grid(p, &grid, chi_n, exec).map_err(&lab)?),
        _ => None,
    };
    let u0 = match cfg.data {
        InitialData::Soliton => sol.phi.clone(),
        InitialData::Perturbed { delta_frac, .. } => {
            let st = setup.as_ref().expect("setup built above");
            let delta = delta_frac * st.sol.phi.norm_h1();
            build_unstable_data(&st.sol, &st.chi, delta, None).map_err(&lab)?.u0
        }
        InitialData::Gaussian { amplitude, width } => ComplexField::from_fn(&grid, |x| {
            Complex64::new(amplitude * (-x * x / (2.0 * width * width)).exp(), 0.0)
        }),
    };
    let modulator = match &setup {
        Some(st) => Some(Modulator::new(&st.sol, &st.chi).map_err(&lab)?),
        None => None,
    };
    let mut tracker = modulator.as_ref().map(Tracker::new);
    let exact = matches!(cfg.data, InitialData::Soliton);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let traj = evolve(&u0, &ecfg, p.b, |t, u, q| {
        let err = if exact {
            let reference = &sol.phi.translate(p.c * t) * Complex64::from_polar(1.0, p.omega * t);
            (u - &reference).norm_l2()
        } else {
            f64::NAN
        };
        rows.push(vec![t, q.energy, q.mass, q.momentum, virial_moment(u, wf), variance(u, wf), err]);
        match tracker.as_mut() {
            Some(tr) => {
                tr.push(t, u, q);
                Flow::Continue
            }
            None => Flow::Continue,
        }
    })
    .map_err(&lab)?;
    let drift = traj.max_relative_drift();
    let max_err = rows.iter().map(|r| r[6]).fold(f64::NAN, f64::max);
    w.csv(
        "trajectory.csv",
        &["t", "energy", "mass", "momentum", "virial", "variance", "tracking_error"],
        rows,
    )
    .map_err(&io)?;
    let mut scaling = None;
    if let Some(tr) = tracker {
        let trk = tr.track;
        w.csv("track.csv", &TRACK_COLUMNS, trk.rows.iter().map(|r| r.values().to_vec()))
            .map_err(&io)?;
        scaling = Some((scaling_laws_check(&trk), trk.exit_reason.clone()));
    }
    let t_final = traj.final_time();
    let per_unit = |d: f64| if t_final > 0.0 { d / t_final } else { d };
    w.json(
        "evolve.json",
        &json!({
            "params": p,
            "data": cfg.data,
            "final_time": t_final,
            "stopped_early": traj.stopped,
            "max_relative_drift": { "energy": drift[0], "mass": drift[1], "momentum": drift[2] },
            "drift_per_unit_time": { "energy": per_unit(drift[0]), "mass": per_unit(drift[1]), "momentum": per_unit(drift[2]) },
            "max_tracking_error": if exact { Some(max_err) } else { None },
            "scaling_laws": scaling.as_ref().map(|s| s.0),
            "decomposition_exit": scaling.and_then(|s| s.1),
        }),
    )
    .map_err(&io)?;
    let mut lines = vec![
        format!("t_final={t_final} stopped_early={}", traj.stopped),
        format!(
            "conserved drift per unit time: E={:e} M={:e} P={:e}",
            per_unit(drift[0]),
            per_unit(drift[1]),
            per_unit(drift[2])
        ),
    ];
    if exact {
        lines.push(format!("max soliton tracking error: {max_err:e}"));
    }
    Ok(lines)
}

fn lyapunov_rows(r: &InstabilityReport) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..r.times.len()).map(|k| {
        vec![
            r.times[k],
            r.s[k],
            r.lyapunov_series[k],
            r.tube_distance_series[k],
            r.eps_l2_series[k],
        ]
    })
}

const LYAPUNOV_COLUMNS: [&str; 5] = ["t", "s", "lyapunov", "tube_distance", "eps_l2"];

fn summary_line(r: &InstabilityReport) -> String {
    format!(
        "delta={:e} exit_time={} monotone={} slope_ratio={:.3} ceiling_ok={}",
        r.delta,
        r.exit_time.map_or("none".into(), |t| format!("{t:.6}")),
        r.monotone,
        r.slope_ratio(),
        r.ceiling_ok
    )
}

fn instability(cfg: &InstabilityCfg, w: &RunWriter, exec: Exec) -> Out {
    let lab = CliError::lab(5);
    let io = CliError::io(5);
    if cfg.deltas.is_empty() {
        return Err(CliError::new(2, "no delta given"));
    }
    let grid = cfg.grid.build().map_err(&lab)?;
    let p = cfg.params.resolve(&grid).map_err(&lab)?;
    let setup = Setup::with_chi_grid(p, &grid, cfg.chi_n, exec).map_err(&lab)?;
    let h1 = setup.sol.phi.norm_h1();
    let mut ecfg = EvolveConfig::new(cfg.dt, cfg.t_end);
    ecfg.record_every = cfg.record_every;
    ecfg.validate().map_err(&lab)?;
    let runs: Vec<InstabilityConfig> = cfg
        .deltas
        .iter()
        .map(|&d| InstabilityConfig {
            delta: d * h1,
            alpha: cfg.alpha_frac * h1,
            sign: cfg.sign,
            evolve: ecfg,
            slope_tol: cfg.slope_tol,
        })
        .collect();

    if runs.len() == 1 {
        let r = run_instability(&setup, &runs[0]).map_err(&lab)?;
        w.json("report.json", &r).map_err(&io)?;
        w.csv("lyapunov.csv", &LYAPUNOV_COLUMNS, lyapunov_rows(&r)).map_err(&io)?;
        return Ok(vec![summary_line(&r)]);
    }

    let results = run_sweep(&setup, &runs, exec);
    let mut lines = Vec::new();
    let mut summary = Vec::new();
    let mut failed = 0;
    for (k, (res, frac)) in results.iter().zip(&cfg.deltas).enumerate() {
        let child = w.child(&format!("run-{k:03}")).map_err(&io)?;
        match res {
            Ok(r) => {
                child.json("report.json", r).map_err(&io)?;
                child.csv("lyapunov.csv", &LYAPUNOV_COLUMNS, lyapunov_rows(r)).map_err(&io)?;
                lines.push(summary_line(r));
                summary.push(json!({
                    "dir": format!("run-{k:03}"), "delta_frac": frac, "exit_time": r.exit_time,
                    "monotone": r.monotone, "slope_ratio": r.slope_ratio(), "ceiling_ok": r.ceiling_ok,
                }));
            }
            Err(e) => {
                failed += 1;
                lines.push(format!("delta_frac={frac:e} failed: {e}"));
                summary.push(json!({ "dir": format!("run-{k:03}"), "delta_frac": frac, "error": e.to_string() }));
            }
        }
    }
    w.json("sweep.json", &summary).map_err(&io)?;
    if failed > 0 {
        return Err(CliError::new(5, format!("{failed} of {} sweep runs failed\n{}", runs.len(), lines.join("\n"))));
    }
    Ok(lines)
}

fn gkdv(cfg: &GkdvCfg, w: &RunWriter) -> Out {
    let lab = CliError::lab(6);
    let io = CliError::io(6);
    let grid = cfg.grid.build().map_err(&lab)?;
    let prof = GkdvProfile::new(&grid);
    let s = identity_suite(&prof, cfg.trials, cfg.seed, cfg.kernel_tol).map_err(&lab)?;
    w.csv(
        "identities.csv",
        &["lq3", "llq", "kernel", "energy_q", "gn_equality_gap", "gn_min_margin", "negative_count", "kernel_count"],
        [vec![
            s.lq3,
            s.llq,
            s.kernel,
            s.energy_q,
            s.gn_equality_gap,
            s.gn_min_margin,
            s.negative_count as f64,
            s.kernel_count as f64,
        ]],
    )
    .map_err(&io)?;
    w.json("identities.json", &s).map_err(&io)?;
    Ok(vec![
        format!("||L Q^3 + 8 Q^3|| / ||Q^3||       = {:e}", s.lq3),
        format!("||L Lambda Q + 2 Q|| / ||Q||      = {:e}", s.llq),
        format!("||L Q'|| / ||Q'||                 = {:e}", s.kernel),
        format!("E(Q)                              = {:e}", s.energy_q),
        format!("GN gap at Q                       = {:e}", s.gn_equality_gap),
        format!("GN min margin ({} random fields)  = {:e}", s.gn_trials, s.gn_min_margin),
        format!("eigen counts: negative={} kernel={}", s.negative_count, s.kernel_count),
    ])
}
