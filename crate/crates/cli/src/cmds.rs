//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use atomsense::analysis::{allan_deviation, systematic_budget, AdevCurve};
use atomsense::fusion::{hybrid_output, hybrid_update, pick_gain, write_hybrid_csv, HybridState};
use atomsense::noise::{sample_classical, SensorTrace};
use atomsense::rng::stream_rng;
use atomsense::sequencer::{
    demodulate_dynamic, project_classical_rotation, run_fringe_scan, run_static_campaign,
    write_campaign_csv, DynamicAlphas, MeasurementRecord,
};
use atomsense::velocimetry::{
    fit_velocity, sample_velocity_drift, simulate_spectrum, TplsParams,
};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{
    self, BudgetConfig, DynamicConfig, HybridizeConfig, StaticConfig, VelocimetryConfig,
};
use crate::report::{csv_writer, svg_plot, tau_grid, PlotSpec, Series};
use crate::{AppError, Ctx};

fn write_adev_csv(
    path: &Path,
    ctx: &Ctx,
    curve: &AdevCurve,
) -> Result<(), AppError> {
    let mut w = csv_writer(path, &ctx.config_sha, ctx.seed)?;
    writeln!(w, "tau_s,sigma,ci_low,ci_high")?;
    for i in 0..curve.taus.len() {
        writeln!(
            w,
            "{:.3},{:.9e},{:.9e},{:.9e}",
            curve.taus[i], curve.sigmas[i], curve.ci_low[i], curve.ci_high[i]
        )?;
    }
    Ok(())
}

fn adev_series(curve: &AdevCurve) -> Vec<(f64, f64)> {
    curve.taus.iter().cloned().zip(curve.sigmas.iter().cloned()).collect()
}

pub fn static_run(
    ctx: &Ctx,
    cfg: &StaticConfig,
    duration_override: Option<f64>,
) -> Result<(), AppError> {
    let (base_scene, cycle) = cfg.scene().map_err(AppError::Config)?;
    let duration = duration_override.unwrap_or(cfg.run.duration_s);
    let block_period = 8.0 * cycle.cycle_period;

    let mut runs: Vec<(&str, bool, Vec<MeasurementRecord>)> = Vec::new();
    for (label, correct) in [("corrected", true), ("uncorrected", false)] {
        let mut scene = base_scene.clone();
        scene.correct_vibration = correct;
        ctx.log(&format!("running {label} campaign ({duration} s)"));
        let records = run_static_campaign(duration, &scene, &cycle, ctx.seed)?;
        let mut w = csv_writer(
            &ctx.out_dir.join(format!("campaign_{label}.csv")),
            &ctx.config_sha,
            ctx.seed,
        )?;
        write_campaign_csv(&mut w, &records)?;
        runs.push((label, correct, records));
    }

    let taus = tau_grid(block_period, duration);
    let mut curves: Vec<(String, AdevCurve)> = Vec::new();
    for (label, _, records) in &runs {
        let omegas: Vec<f64> = records.iter().map(|r| r.omega).collect();
        let accels: Vec<f64> = records.iter().map(|r| r.a).collect();
        let c_rot = allan_deviation(&omegas, block_period, &taus)?;
        let c_acc = allan_deviation(&accels, block_period, &taus)?;
        write_adev_csv(
            &ctx.out_dir.join(format!("adev_rotation_{label}.csv")),
            ctx,
            &c_rot,
        )?;
        write_adev_csv(
            &ctx.out_dir.join(format!("adev_acceleration_{label}.csv")),
            ctx,
            &c_acc,
        )?;
        curves.push((format!("rotation {label}"), c_rot));
        curves.push((format!("acceleration {label}"), c_acc));
    }

    // Acceleration hybrid: the classical sensor tracks a_true + vibration,
    // the atomic record re-zeroes its bias each block.
    if let Some(h) = &cfg.hybrid {
        let records = &runs[0].2;
        let classical: Vec<f64> = records
            .iter()
            .map(|r| cfg.truth.accel_mps2 + r.a_conv.iter().sum::<f64>() / 8.0)
            .collect();
        let atomic: Vec<f64> = records.iter().map(|r| r.a).collect();
        let c_cl = allan_deviation(&classical, block_period, &taus)?;
        let c_at = allan_deviation(&atomic, block_period, &taus)?;
        let choice = pick_gain(&c_at, &c_cl, h.update_period_s, h.fallback_gain);
        let mut state = HybridState::new(choice.gain);
        let mut rows = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let hybrid = hybrid_output(&state, classical[i]);
            state = hybrid_update(&state, atomic[i], classical[i], r.t);
            rows.push((r.t, hybrid, classical[i], state.bias_estimate, Some(atomic[i])));
        }
        let mut w = csv_writer(&ctx.out_dir.join("hybrid.csv"), &ctx.config_sha, ctx.seed)?;
        writeln!(
            w,
            "# gain = {:.6e}, tau_cross_s = {}",
            choice.gain,
            choice
                .tau_cross
                .map_or("none".to_string(), |t| format!("{t:.3}"))
        )?;
        write_hybrid_csv(&mut w, &rows)?;
    }

    if ctx.plot {
        let rot: Vec<Series> = curves
            .iter()
            .filter(|(l, _)| l.starts_with("rotation"))
            .map(|(l, c)| Series {
                label: l.as_str(),
                points: adev_series(c),
            })
            .collect();
        svg_plot(
            &ctx.out_dir.join("adev_rotation.svg"),
            &PlotSpec {
                title: "Rotation-rate Allan deviation",
                x_label: "tau (s)",
                y_label: "sigma_Omega (rad/s)",
                log_x: true,
                log_y: true,
            },
            &rot,
        )?;
        let acc: Vec<Series> = curves
            .iter()
            .filter(|(l, _)| l.starts_with("acceleration"))
            .map(|(l, c)| Series {
                label: l.as_str(),
                points: adev_series(c),
            })
            .collect();
        svg_plot(
            &ctx.out_dir.join("adev_acceleration.svg"),
            &PlotSpec {
                title: "Acceleration Allan deviation",
                x_label: "tau (s)",
                y_label: "sigma_a (m/s^2)",
                log_x: true,
                log_y: true,
            },
            &acc,
        )?;
    }
    Ok(())
}

pub fn dynamic_run(ctx: &Ctx, cfg: &DynamicConfig) -> Result<(), AppError> {
    let scene = cfg.scene().map_err(AppError::Config)?;
    let k_eff = scene.species.k_eff();
    let w_drive = std::f64::consts::TAU / scene.cycle_period;
    let sinc = (w_drive * scene.t_sep).sin() / (w_drive * scene.t_sep);

    // Shared zero-drive scans (scan ids 0 and 1).
    let zero = cfg.drive_for(0.0);
    let zero_pk = run_fringe_scan(&scene, &zero, 1, 0.0, ctx.seed, 0)?;
    let zero_mk = run_fringe_scan(&scene, &zero, -1, 0.0, ctx.seed, 1)?;
    write_fringe_csv(ctx, "fringe_zero_pk.csv", &zero_pk.scan_alphas, &zero_pk.scan_p2s)?;
    write_fringe_csv(ctx, "fringe_zero_mk.csv", &zero_mk.scan_alphas, &zero_mk.scan_p2s)?;

    let mut table = csv_writer(&ctx.out_dir.join("omega_table.csv"), &ctx.config_sha, ctx.seed)?;
    writeln!(
        table,
        "omega_d_mrads,omega_eff_rads,omega_recovered_rads,contrast_pk,contrast_mk,\
         alpha_err_pk,alpha_err_mk,classical_plus_rads,classical_minus_rads,status"
    )?;
    let mut recovered_pts = Vec::new();
    let mut contrast_pts = Vec::new();
    for (i, &om_mrads) in cfg.drive.omega_d_mrads.iter().enumerate() {
        let drive = cfg.drive_for(om_mrads);
        let omega_eff = drive.omega_d * drive.axis[0] * sinc * drive.phi0.cos();
        let id = 2 + 2 * i as u64;
        ctx.log(&format!("dynamic scan at {om_mrads} mrad/s"));
        let pk = run_fringe_scan(&scene, &drive, 1, omega_eff, ctx.seed, id);
        let mk = run_fringe_scan(&scene, &drive, -1, omega_eff, ctx.seed, id + 1);
        match (pk, mk) {
            (Ok(pk), Ok(mk)) => {
                write_fringe_csv(
                    ctx,
                    &format!("fringe_{i}_pk.csv"),
                    &pk.scan_alphas,
                    &pk.scan_p2s,
                )?;
                write_fringe_csv(
                    ctx,
                    &format!("fringe_{i}_mk.csv"),
                    &mk.scan_alphas,
                    &mk.scan_p2s,
                )?;
                let rec = demodulate_dynamic(
                    &DynamicAlphas {
                        pk_drive: pk.alpha_star,
                        mk_drive: mk.alpha_star,
                        pk_zero: zero_pk.alpha_star,
                        mk_zero: zero_mk.alpha_star,
                    },
                    scene.v_l,
                    k_eff,
                );
                let cl_p = project_classical_rotation(omega_eff, 0.0, drive.beta_plus);
                let cl_m = project_classical_rotation(omega_eff, 0.0, drive.beta_minus);
                writeln!(
                    table,
                    "{:.3},{:.9e},{:.9e},{:.4},{:.4},{:.3e},{:.3e},{:.9e},{:.9e},ok",
                    om_mrads,
                    omega_eff,
                    rec,
                    pk.contrast,
                    mk.contrast,
                    pk.alpha_err,
                    mk.alpha_err,
                    cl_p,
                    cl_m
                )?;
                recovered_pts.push((omega_eff * 1e3, rec * 1e3));
                contrast_pts.push((om_mrads, 0.5 * (pk.contrast + mk.contrast)));
            }
            (pk, mk) => {
                let err = pk.err().or(mk.err()).unwrap();
                eprintln!("warning: fit failed at {om_mrads} mrad/s: {err}");
                writeln!(table, "{om_mrads:.3},,,,,,,,,fit_failed")?;
            }
        }
    }
    drop(table);

    if ctx.plot {
        svg_plot(
            &ctx.out_dir.join("recovered_vs_drive.svg"),
            &PlotSpec {
                title: "Recovered rotation vs effective drive",
                x_label: "effective drive (mrad/s)",
                y_label: "recovered (mrad/s)",
                log_x: false,
                log_y: false,
            },
            &[
                Series {
                    label: "recovered",
                    points: recovered_pts.clone(),
                },
                Series {
                    label: "identity",
                    points: recovered_pts.iter().map(|&(x, _)| (x, x)).collect(),
                },
            ],
        )?;
        svg_plot(
            &ctx.out_dir.join("contrast_vs_drive.svg"),
            &PlotSpec {
                title: "Fringe contrast vs drive amplitude",
                x_label: "drive (mrad/s)",
                y_label: "contrast",
                log_x: false,
                log_y: false,
            },
            &[Series {
                label: "contrast",
                points: contrast_pts,
            }],
        )?;
        svg_plot(
            &ctx.out_dir.join("fringe_example.svg"),
            &PlotSpec {
                title: "Zero-drive fringe scan (+k)",
                x_label: "chirp rate (rad/s^2)",
                y_label: "P2",
                log_x: false,
                log_y: false,
            },
            &[Series {
                label: "P2",
                points: zero_pk
                    .scan_alphas
                    .iter()
                    .cloned()
                    .zip(zero_pk.scan_p2s.iter().cloned())
                    .collect(),
            }],
        )?;
    }
    Ok(())
}

fn write_fringe_csv(ctx: &Ctx, name: &str, alphas: &[f64], p2s: &[f64]) -> Result<(), AppError> {
    let mut w = csv_writer(&ctx.out_dir.join(name), &ctx.config_sha, ctx.seed)?;
    writeln!(w, "alpha_rads2,p2")?;
    for (a, p) in alphas.iter().zip(p2s) {
        writeln!(w, "{:.6e},{:.9e}", a, p)?;
    }
    Ok(())
}

pub fn velocimetry(ctx: &Ctx, cfg: &VelocimetryConfig) -> Result<(), AppError> {
    let species = cfg.species().map_err(AppError::Config)?;
    let k_eff = species.k_eff();
    let v0 = cfg.launch.v_l_mps;
    let n = cfg.run.n_spectra;
    if n < 2 {
        return Err(AppError::Config("run.n_spectra must be >= 2".into()));
    }
    let dt = cfg.run.duration_s / n as f64;
    let span = cfg.spectroscopy.grid_span_khz * 1e3;
    let step = cfg.spectroscopy.grid_step_hz;
    let n_pts = (2.0 * span / step).round() as usize;
    let grid: Vec<f64> = (0..=n_pts).map(|i| -span + i as f64 * step).collect();
    let pulse = cfg.spectroscopy.pulse_us * 1e-6;
    let rabi = std::f64::consts::PI / pulse;
    let tpls = |v: f64| TplsParams {
        rabi,
        doppler: k_eff * v,
        recoil: species.recoil_frequency(),
    };

    let drift = match cfg.drift_model() {
        Some(m) => sample_velocity_drift(&m, n, dt, &mut stream_rng(ctx.seed, 0)),
        None => vec![0.0; n],
    };

    let mut log = csv_writer(&ctx.out_dir.join("velocity_log.csv"), &ctx.config_sha, ctx.seed)?;
    writeln!(log, "t_s,v_true_mps,v_corrected_mps,v_uncorrected_mps,stat_err_mps")?;
    let mut corrected = Vec::with_capacity(n);
    for i in 0..n {
        let v_true = v0 + drift[i];
        let spec = simulate_spectrum(
            &species,
            v_true,
            pulse,
            rabi,
            &grid,
            cfg.spectroscopy.noise_rms,
            &mut stream_rng(ctx.seed, 1 + i as u64),
        )?;
        if i == 0 {
            let mut w =
                csv_writer(&ctx.out_dir.join("spectrum_example.csv"), &ctx.config_sha, ctx.seed)?;
            spec.write_csv(&mut w)?;
        }
        let fit_c = fit_velocity(&spec, k_eff, true, &tpls(v0))?;
        let fit_u = fit_velocity(&spec, k_eff, false, &tpls(v0))?;
        writeln!(
            log,
            "{:.3},{:.9e},{:.9e},{:.9e},{:.3e}",
            (i + 1) as f64 * dt,
            v_true,
            fit_c.velocity,
            fit_u.velocity,
            fit_c.stat_err
        )?;
        corrected.push(fit_c.velocity);
    }
    drop(log);

    let taus = tau_grid(dt, cfg.run.duration_s);
    let curve = allan_deviation(&corrected, dt, &taus)?;
    write_adev_csv(&ctx.out_dir.join("adev_velocity.csv"), ctx, &curve)?;

    // Pulse-duration sweep on noiseless spectra: shows the light-shift
    // bias converging with longer pulses and its correction staying flat.
    let mut sweep = csv_writer(&ctx.out_dir.join("tpls_comparison.csv"), &ctx.config_sha, ctx.seed)?;
    writeln!(
        sweep,
        "pulse_us,v_uncorrected_mps,v_corrected_mps,tpls_correction_hz"
    )?;
    let mut pts_u = Vec::new();
    let mut pts_c = Vec::new();
    for &us in &cfg.tpls_sweep.pulse_durations_us {
        let tau_p = us * 1e-6;
        let r = std::f64::consts::PI / tau_p;
        let p = TplsParams {
            rabi: r,
            doppler: k_eff * v0,
            recoil: species.recoil_frequency(),
        };
        let spec = simulate_spectrum(&species, v0, tau_p, r, &grid, 0.0, &mut stream_rng(ctx.seed, 0))?;
        let fc = fit_velocity(&spec, k_eff, true, &p)?;
        let fu = fit_velocity(&spec, k_eff, false, &p)?;
        writeln!(
            sweep,
            "{:.3},{:.9e},{:.9e},{:.3e}",
            us, fu.velocity, fc.velocity, fc.tpls_correction_hz
        )?;
        pts_u.push((us, fu.velocity));
        pts_c.push((us, fc.velocity));
    }
    drop(sweep);

    if ctx.plot {
        svg_plot(
            &ctx.out_dir.join("adev_velocity.svg"),
            &PlotSpec {
                title: "Launch-velocity Allan deviation",
                x_label: "tau (s)",
                y_label: "sigma_v (m/s)",
                log_x: true,
                log_y: true,
            },
            &[Series {
                label: "corrected velocity",
                points: adev_series(&curve),
            }],
        )?;
        svg_plot(
            &ctx.out_dir.join("tpls_comparison.svg"),
            &PlotSpec {
                title: "Fitted velocity vs Raman pulse duration",
                x_label: "pulse duration (us)",
                y_label: "velocity (m/s)",
                log_x: false,
                log_y: false,
            },
            &[
                Series {
                    label: "uncorrected",
                    points: pts_u,
                },
                Series {
                    label: "TPLS-corrected",
                    points: pts_c,
                },
            ],
        )?;
    }
    Ok(())
}

/// Parse one of our own CSVs: `#` metadata lines, then a header row.
fn read_csv_column(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>), AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut header: Option<Vec<String>> = None;
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut col_idx = usize::MAX;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.is_none() {
            let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            col_idx = cols.iter().position(|c| c == column).ok_or_else(|| {
                AppError::Config(format!(
                    "line {}: column '{column}' not found in {}",
                    lineno + 1,
                    path.display()
                ))
            })?;
            header = Some(cols);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= col_idx {
            return Err(AppError::Config(format!(
                "line {}: expected at least {} fields, got {}",
                lineno + 1,
                col_idx + 1,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, AppError> {
            s.trim().parse::<f64>().map_err(|_| {
                AppError::Config(format!("line {}: malformed {what} value '{s}'", lineno + 1))
            })
        };
        t.push(parse(fields[0], "time")?);
        y.push(parse(fields[col_idx], column)?);
    }
    if t.len() < 3 {
        return Err(AppError::Config(format!(
            "{}: fewer than 3 data rows",
            path.display()
        )));
    }
    Ok((t, y))
}

pub fn allan_cmd(ctx: &Ctx, input: &Path, column: &str, out: &Path) -> Result<(), AppError> {
    let (t, y) = read_csv_column(input, column)?;
    let dt = t[1] - t[0];
    if dt <= 0.0 {
        return Err(AppError::Config(
            "time column must be strictly increasing".into(),
        ));
    }
    let taus = tau_grid(dt, t.len() as f64 * dt);
    let curve = allan_deviation(&y, dt, &taus)?;
    write_adev_csv(out, ctx, &curve)?;
    if ctx.plot {
        svg_plot(
            &out.with_extension("svg"),
            &PlotSpec {
                title: "Allan deviation",
                x_label: "tau (s)",
                y_label: "sigma",
                log_x: true,
                log_y: true,
            },
            &[Series {
                label: column,
                points: adev_series(&curve),
            }],
        )?;
    }
    Ok(())
}

pub fn hybridize(ctx: &Ctx, cfg: &HybridizeConfig) -> Result<(), AppError> {
    let dt = cfg.run.dt_s;
    let n = (cfg.run.duration_s / dt).round() as usize;
    let per = (cfg.run.update_period_s / dt).round().max(1.0) as usize;
    let model = cfg.classical_model();
    let truth = SensorTrace::zeros(1.0 / dt, 0.0, n);
    let classical = sample_classical(&model, &truth, &mut stream_rng(ctx.seed, 0));
    let mut atomic_rng = stream_rng(ctx.seed, 1);

    let taus = tau_grid(dt, cfg.run.duration_s);
    let c_cl = allan_deviation(&classical.samples, dt, &taus)?;
    // Atomic reference: white, sigma_per_update at tau = update_period.
    let sig_at = cfg.atomic.sigma_per_update;
    let c_at = AdevCurve {
        taus: taus.clone(),
        sigmas: taus
            .iter()
            .map(|&t| sig_at * (cfg.run.update_period_s / t.max(cfg.run.update_period_s)).sqrt())
            .collect(),
        ci_low: vec![0.0; taus.len()],
        ci_high: vec![0.0; taus.len()],
    };
    let choice = pick_gain(&c_at, &c_cl, cfg.run.update_period_s, cfg.run.fallback_gain);

    let mut state = HybridState::new(choice.gain);
    let mut hybrid = Vec::with_capacity(n);
    let mut rows = Vec::new();
    let mut i = 0;
    while i < n {
        let hi = (i + per).min(n);
        let block = &classical.samples[i..hi];
        for (j, &c) in block.iter().enumerate() {
            let h = hybrid_output(&state, c);
            hybrid.push(h);
            rows.push(((i + j) as f64 * dt, h, c, state.bias_estimate, None));
        }
        let avg = block.iter().sum::<f64>() / block.len() as f64;
        let atomic = sig_at * atomic_rng.sample::<f64, _>(StandardNormal);
        state = hybrid_update(&state, atomic, avg, hi as f64 * dt);
        if let Some(last) = rows.last_mut() {
            last.4 = Some(atomic);
        }
        i = hi;
    }
    let c_hy = allan_deviation(&hybrid, dt, &taus)?;

    let mut w = csv_writer(&ctx.out_dir.join("hybrid.csv"), &ctx.config_sha, ctx.seed)?;
    writeln!(
        w,
        "# gain = {:.6e}, tau_cross_s = {}, units = {}",
        choice.gain,
        choice
            .tau_cross
            .map_or("none".to_string(), |t| format!("{t:.3}")),
        cfg.classical.units
    )?;
    write_hybrid_csv(&mut w, &rows)?;
    write_adev_csv(&ctx.out_dir.join("adev_classical.csv"), ctx, &c_cl)?;
    write_adev_csv(&ctx.out_dir.join("adev_hybrid.csv"), ctx, &c_hy)?;
    write_adev_csv(&ctx.out_dir.join("adev_atomic.csv"), ctx, &c_at)?;

    if ctx.plot {
        svg_plot(
            &ctx.out_dir.join("adev_hybrid.svg"),
            &PlotSpec {
                title: "Hybridization Allan deviations",
                x_label: "tau (s)",
                y_label: format!("sigma ({})", cfg.classical.units).leak(),
                log_x: true,
                log_y: true,
            },
            &[
                Series {
                    label: "classical",
                    points: adev_series(&c_cl),
                },
                Series {
                    label: "hybrid",
                    points: adev_series(&c_hy),
                },
                Series {
                    label: "atomic reference",
                    points: adev_series(&c_at),
                },
            ],
        )?;
    }
    Ok(())
}

pub fn budget(ctx: &Ctx, cfg: &BudgetConfig) -> Result<(), AppError> {
    let scene = cfg.scene();
    let terms = systematic_budget(&scene);
    let mut w = csv_writer(&ctx.out_dir.join("budget.csv"), &ctx.config_sha, ctx.seed)?;
    writeln!(w, "term,axis,value,units,inputs_hash")?;
    for t in &terms {
        writeln!(
            w,
            "{},{},{:.9e},{},{}",
            t.term, t.axis, t.value, t.units, ctx.config_sha
        )?;
    }
    drop(w);
    if ctx.plot {
        // Budget table as a simple SVG listing.
        let mut out = String::from(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"220\" \
             font-family=\"monospace\" font-size=\"14\">\n\
             <rect width=\"640\" height=\"220\" fill=\"white\"/>\n\
             <text x=\"20\" y=\"28\" font-size=\"16\">Systematic-error budget</text>\n",
        );
        for (i, t) in terms.iter().enumerate() {
            out.push_str(&format!(
                "<text x=\"20\" y=\"{}\">{:<28} {:>14.4e}  {} [{}]</text>\n",
                56 + 24 * i,
                t.term,
                t.value,
                t.units,
                t.axis
            ));
        }
        out.push_str("</svg>\n");
        std::fs::write(ctx.out_dir.join("budget.svg"), out)?;
    }
    Ok(())
}

/// Resolve out_dir, creating it if needed.
pub fn prepare_out_dir(dir: &Option<PathBuf>) -> Result<PathBuf, AppError> {
    let dir = dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| AppError::Config(format!("cannot create out dir {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn load_config<T: serde::de::DeserializeOwned>(
    path: &Option<PathBuf>,
) -> Result<config::Loaded<T>, AppError> {
    let path = path
        .as_ref()
        .ok_or_else(|| AppError::Config("--config is required for this subcommand".into()))?;
    config::load(path).map_err(AppError::Config)
}
