//! Subcommand implementations.

use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde_json::json;

use spinphonon::bath::{DensityOptions, EffectiveMethod, GridSpec};
use spinphonon::dynamics::{
    self, exact_oracle, field_direction, propagate_envelope, redfield_tensor, relax_scan,
    suggested_levels, ModeSource, RedfieldModel, RedfieldOptions, ReducedHamiltonian,
    ScanOptions,
};
use spinphonon::embed::embed_dataset;
use spinphonon::ingest::{
    participation_norms, write_dataset, Dataset, GradientNorm, Metadata, ParseOptions,
    SchemaKind,
};
use spinphonon::spin::{spin_hamiltonian, spin_operators, SpinSystem};
use spinphonon::synth::{generate, SynthSpec};

use crate::config::RunConfig;
use crate::output::{fmt_full, fmt_human, write_text, FileMeta};

/// Raised by `compare` when the deviation exceeds the declared tolerance;
/// mapped to exit code 2.
#[derive(Debug)]
pub struct ToleranceFailure {
    pub max_rel_dev: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for ToleranceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "max relative deviation {:.3e} exceeds tolerance {:.3e}",
            self.max_rel_dev, self.tolerance
        )
    }
}

impl std::error::Error for ToleranceFailure {}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| anyhow!("--dataset is required for this command"))?;
    let dataset = spinphonon::ingest::parse_dataset(path, SchemaKind::Auto, &ParseOptions::default())?;
    Ok(dataset)
}

fn scan_options(config: &RunConfig) -> ScanOptions {
    ScanOptions {
        spin: config.spin,
        flavor: config.flavor,
        source: config.method,
        cutoff_frac: config.cutoff_frac,
        broadening_cm1: config.broadening_cm1,
        sv_threshold: config.sv_threshold,
        grid: GridSpec {
            omega_max_cm1: None,
            n_points: config.grid_points,
        },
        redfield: RedfieldOptions {
            secular: config.secular,
            secular_cutoff_rad_s: None,
            cross_correlations: config.cross_correlations,
        },
        min_splitting_cm1: 1e-6,
    }
}

pub fn cmd_synth(config: &RunConfig) -> Result<()> {
    let spec = SynthSpec {
        n_modes: config.synth_modes,
        freq_min_cm1: config.synth_freq_min_cm1,
        freq_max_cm1: config.synth_freq_max_cm1,
        grad_sigma: config.synth_grad_sigma,
        b_field_tesla: Vector3::from_row_slice(&config.synth_field_t),
        seed: config.seed,
    };
    let mut dataset = generate(&spec);
    let hash = config.reproducibility_hash("synth")?;
    stamp_meta(&mut dataset.meta, &hash, config.seed);
    let path = config.out.join("dataset.json");
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).ok();
    }
    write_dataset(&dataset, &path)?;
    println!(
        "synth: wrote {} ({} modes, band [{}, {}] cm^-1, seed {})",
        path.display(),
        spec.n_modes,
        spec.freq_min_cm1,
        spec.freq_max_cm1,
        spec.seed
    );
    Ok(())
}

fn stamp_meta(meta: &mut Metadata, config_hash: &str, seed: u64) {
    meta.extra
        .insert("tool_version".into(), json!(crate::output::TOOL_VERSION));
    meta.extra.insert("config_hash".into(), json!(config_hash));
    meta.extra.insert("seed".into(), json!(seed));
}

pub fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let hash = config.reproducibility_hash("ingest")?;
    let meta = FileMeta {
        schema: "spd-participation-1",
        config_hash: &hash,
        seed: config.seed,
        command: "ingest",
    };

    let abs_sum = participation_norms(&dataset.gradients, GradientNorm::AbsSum);
    let frobenius = participation_norms(&dataset.gradients, GradientNorm::Frobenius);
    let mut csv = meta.csv_header();
    csv.push_str("freq_cm1,norm_abs_sum,norm_frobenius\n");
    for k in 0..dataset.n_modes() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_full(dataset.modes.freqs_cm1[k]),
            fmt_full(abs_sum[k]),
            fmt_full(frobenius[k])
        );
    }
    write_text(&config.out.join("participation.csv"), &csv)?;

    let gc = dataset.coupling_matrix();
    let (principal, _) = dataset.g_tensor.principal_frame();
    let summary = json!({
        "schema": "spd-summary-1",
        "meta": FileMeta { schema: "spd-summary-1", ..meta }.json_meta(),
        "n_modes": dataset.n_modes(),
        "freq_min_cm1": dataset.modes.freqs_cm1.min(),
        "freq_max_cm1": dataset.modes.freqs_cm1.max(),
        "b_field_tesla": [dataset.b_field_tesla[0], dataset.b_field_tesla[1], dataset.b_field_tesla[2]],
        "g_principal_values": [principal[0], principal[1], principal[2]],
        "max_mode_coupling_cm1": gc.max_mode_strength(),
        "mean_abs_sum_norm": abs_sum.sum() / abs_sum.len().max(1) as f64,
    });
    write_text(
        &config.out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;

    println!(
        "ingest: {} modes in [{}, {}] cm^-1; max mode coupling {} cm^-1",
        dataset.n_modes(),
        fmt_human(dataset.modes.freqs_cm1.min()),
        fmt_human(dataset.modes.freqs_cm1.max()),
        fmt_human(gc.max_mode_strength()),
    );
    Ok(())
}

pub fn cmd_embed(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let gc = dataset.coupling_matrix();
    let emb = embed_dataset(&gc, &dataset.modes, config.sv_threshold)?;
    let report = spinphonon::embed::roundtrip_check(&emb, &dataset.modes);
    let entropies = emb.primary_mode_entropies();
    let hash = config.reproducibility_hash("embed")?;
    let meta = FileMeta {
        schema: "spd-emb-1",
        config_hash: &hash,
        seed: config.seed,
        command: "embed",
    };

    let g_tilde: Vec<Vec<f64>> = (0..emb.primary_couplings.nrows())
        .map(|a| emb.primary_couplings.row(a).iter().cloned().collect())
        .collect();
    let gamma: Vec<Vec<f64>> = (0..emb.bridge_couplings.nrows())
        .map(|r| emb.bridge_couplings.row(r).iter().cloned().collect())
        .collect();
    let doc = json!({
        "schema": "spd-emb-1",
        "meta": meta.json_meta(),
        "rank": emb.rank(),
        "omega_r_cm1": emb.primary_freqs_cm1.as_slice(),
        "omega_j_cm1": emb.residual_freqs_cm1.as_slice(),
        "g_tilde_cm1": g_tilde,
        "gamma_cm2": gamma,
        "singular_values": emb.singular_values.as_slice(),
        "entropies": entropies,
        "roundtrip": report,
    });
    write_text(
        &config.out.join("embedding.json"),
        &serde_json::to_string_pretty(&doc)?,
    )?;

    println!("embed: rank {} projection", emb.rank());
    for (r, entropy) in entropies.iter().enumerate() {
        println!(
            "  primary mode {}: {} cm^-1, entropy {}",
            r + 1,
            fmt_human(emb.primary_freqs_cm1[r]),
            fmt_human(*entropy),
        );
    }
    println!(
        "  round trip: max relative frequency error {:.3e}, orthogonality defect {:.3e}",
        report.max_rel_freq_error, report.orthogonality_defect
    );
    Ok(())
}

pub fn cmd_spectrum(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let hash = config.reproducibility_hash("spectrum")?;
    let field = field_direction(&dataset) * config.fields_t[0];
    let options = scan_options(config);

    for &t in &config.temps_k {
        let density = match config.method {
            ModeSource::Projected => {
                let gc = dataset.coupling_matrix_at(field);
                let emb = embed_dataset(&gc, &dataset.modes, config.sv_threshold)?;
                spinphonon::bath::spectral_density_effective(
                    &emb,
                    t,
                    config.broadening_cm1,
                    config.flavor,
                    config.effective_method,
                    &DensityOptions {
                        grid: GridSpec {
                            omega_max_cm1: Some(1.25 * dataset.modes.max_freq()),
                            n_points: config.grid_points,
                        },
                        with_cross: false,
                    },
                )?
            }
            _ => dynamics::scan_density(&dataset, field, t, &options)?,
        };
        let method_tag = match (config.method, config.effective_method) {
            (ModeSource::Projected, EffectiveMethod::Lorentzian) => "projected-lorentzian".into(),
            (m, _) => m.to_string(),
        };
        let meta = FileMeta {
            schema: "spd-spectrum-1",
            config_hash: &hash,
            seed: config.seed,
            command: "spectrum",
        };
        let mut csv = meta.csv_header();
        let _ = writeln!(csv, "# temperature_k: {t}");
        let _ = writeln!(csv, "# flavor: {}", config.flavor);
        let _ = writeln!(csv, "# method: {method_tag}");
        csv.push_str("omega_cm1,S_x,S_y,S_z\n");
        for i in 0..density.n_points() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_full(density.omega_at(i)),
                fmt_full(density.sample(0, i)),
                fmt_full(density.sample(1, i)),
                fmt_full(density.sample(2, i))
            );
        }
        let name = format!("spectrum_T{t}K_{}_{method_tag}.csv", config.flavor);
        write_text(&config.out.join(name), &csv)?;
    }
    println!(
        "spectrum: wrote {} file(s) to {}",
        config.temps_k.len(),
        config.out.display()
    );
    Ok(())
}

pub fn cmd_relax(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let hash = config.reproducibility_hash("relax")?;
    let options = scan_options(config);
    let rows = relax_scan(&dataset, &config.temps_k, &config.fields_t, &options)?;

    let meta = FileMeta {
        schema: "spd-relax-1",
        config_hash: &hash,
        seed: config.seed,
        command: "relax",
    };
    let mut csv = meta.csv_header();
    csv.push_str("T_K,B_T,T1_s,T2_s,source,flavor\n");
    for row in &rows {
        for warning in &row.warnings {
            log::warn!(
                "T = {} K, B = {} T: {warning:?}",
                row.temperature_k,
                row.field_t
            );
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_full(row.temperature_k),
            fmt_full(row.field_t),
            fmt_full(row.t1_s),
            fmt_full(row.t2_s),
            row.source,
            row.flavor
        );
    }
    write_text(&config.out.join("relax.csv"), &csv)?;

    if config.trajectory {
        for row in &rows {
            dump_trajectory(config, &dataset, row.temperature_k, row.field_t, row.t1_s, &hash)?;
        }
    }

    println!(
        "relax: {} point(s) ({} source, {} flavor) -> {}",
        rows.len(),
        options.source,
        options.flavor,
        config.out.join("relax.csv").display()
    );
    Ok(())
}

/// Interaction-picture envelope trajectory from the excited eigenstate.
fn dump_trajectory(
    config: &RunConfig,
    dataset: &Dataset,
    temperature_k: f64,
    field_t: f64,
    t1_s: f64,
    hash: &str,
) -> Result<()> {
    let options = scan_options(config);
    let field = field_direction(dataset) * field_t;
    let density = dynamics::scan_density(dataset, field, temperature_k, &options)?;
    let sys = SpinSystem::new(config.spin, dataset.g_tensor.clone(), field)?;
    let model = RedfieldModel::for_spin_system(&sys, density, options.redfield)?;
    let tensor = redfield_tensor(&model)?;

    let d = tensor.dim;
    let mut rho_exc = DMatrix::zeros(d, d);
    rho_exc[(d - 1, d - 1)] = Complex64::new(1.0, 0.0);
    let rho0 = tensor.from_eigenbasis(&rho_exc);

    let span_ps = config.traj_span_t1 * t1_s * 1e12;
    let n = config.traj_points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|i| span_ps * i as f64 / (n - 1) as f64)
        .collect();
    let traj = propagate_envelope(&tensor, &rho0, &grid)?;

    let ops = spin_operators(config.spin)?;
    let sx = traj.expectation(&ops[0]);
    let sy = traj.expectation(&ops[1]);
    let sz = traj.expectation(&ops[2]);

    let meta = FileMeta {
        schema: "spd-trajectory-1",
        config_hash: hash,
        seed: config.seed,
        command: "relax",
    };
    let mut csv = meta.csv_header();
    let _ = writeln!(csv, "# temperature_k: {temperature_k}");
    let _ = writeln!(csv, "# field_t: {field_t}");
    let _ = writeln!(csv, "# picture: interaction (envelope)");
    csv.push_str("t_ps,Sx,Sy,Sz,trace_err\n");
    for (i, state) in traj.states.iter().enumerate() {
        let trace_err = (state.trace() - Complex64::new(1.0, 0.0)).norm();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_full(traj.times_ps[i]),
            fmt_full(sx[i]),
            fmt_full(sy[i]),
            fmt_full(sz[i]),
            fmt_full(trace_err)
        );
    }
    let name = format!("trajectory_T{temperature_k}K_B{field_t}T.csv");
    write_text(&config.out.join(name), &csv)?;
    Ok(())
}

pub fn cmd_compare(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let hash = config.reproducibility_hash("compare")?;
    let field = config.fields_t[0];

    let full_options = ScanOptions {
        source: ModeSource::Full,
        ..scan_options(config)
    };
    let other_source = match config.method {
        ModeSource::NaiveCutoff => ModeSource::NaiveCutoff,
        _ => ModeSource::Projected,
    };
    let other_options = ScanOptions {
        source: other_source,
        ..scan_options(config)
    };

    let full = relax_scan(&dataset, &config.temps_k, &[field], &full_options)?;
    let other = relax_scan(&dataset, &config.temps_k, &[field], &other_options)?;

    let meta = FileMeta {
        schema: "spd-compare-1",
        config_hash: &hash,
        seed: config.seed,
        command: "compare",
    };
    let mut csv = meta.csv_header();
    let _ = writeln!(csv, "# comparison: full vs {other_source}");
    let _ = writeln!(csv, "# flavor: {}", config.flavor);
    let _ = writeln!(csv, "# field_t: {field}");
    csv.push_str("T_K,T1_full_s,T1_proj_s,rel_dev\n");
    let mut max_rel_dev = 0.0f64;
    for (a, b) in full.iter().zip(&other) {
        let rel_dev = (a.t1_s - b.t1_s).abs() / a.t1_s;
        max_rel_dev = max_rel_dev.max(rel_dev);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_full(a.temperature_k),
            fmt_full(a.t1_s),
            fmt_full(b.t1_s),
            fmt_full(rel_dev)
        );
    }
    write_text(&config.out.join("compare.csv"), &csv)?;
    println!(
        "compare: full vs {other_source}, max relative T1 deviation {max_rel_dev:.3e} (tolerance {:.1e})",
        config.compare_tolerance
    );
    if max_rel_dev > config.compare_tolerance {
        return Err(ToleranceFailure {
            max_rel_dev,
            tolerance: config.compare_tolerance,
        }
        .into());
    }
    Ok(())
}

pub fn cmd_oracle(config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(config)?;
    let hash = config.reproducibility_hash("oracle")?;
    let temperature = config.temps_k[0];
    let field = field_direction(&dataset) * config.fields_t[0];
    let gc = dataset.coupling_matrix_at(field);
    let emb = embed_dataset(&gc, &dataset.modes, config.sv_threshold)?;

    let levels = if config.oracle_levels >= 2 {
        config.oracle_levels
    } else {
        emb.primary_freqs_cm1
            .iter()
            .map(|&f| suggested_levels(f, temperature))
            .max()
            .unwrap_or(2)
    };
    let h_field = spinphonon::spin::field_vector(&dataset.g_tensor, field).0;
    let red = ReducedHamiltonian::from_embedding(&emb, h_field, config.spin, levels)?;

    // Spin starts in the excited Zeeman eigenstate.
    let sys = SpinSystem::new(config.spin, dataset.g_tensor.clone(), field)?;
    let hs = spin_hamiltonian(&sys)?;
    let eig = hs.symmetric_eigen();
    let mut top = 0;
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[top] {
            top = i;
        }
    }
    let exc = eig.eigenvectors.column(top);
    let rho_spin = exc * exc.adjoint();

    let n = config.traj_points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|i| config.oracle_span_ps * i as f64 / (n - 1) as f64)
        .collect();
    let out = exact_oracle(&red, temperature, &grid, &rho_spin)?;

    let meta = FileMeta {
        schema: "spd-oracle-1",
        config_hash: &hash,
        seed: config.seed,
        command: "oracle",
    };
    let mut csv = meta.csv_header();
    let _ = writeln!(csv, "# temperature_k: {temperature}");
    let _ = writeln!(csv, "# levels_per_mode: {levels}");
    let _ = writeln!(csv, "# primary_modes: {}", red.primary_freqs_cm1.len());
    csv.push_str("t_ps,Sx,Sy,Sz\n");
    for i in 0..out.times_ps.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_full(out.times_ps[i]),
            fmt_full(out.sx[i]),
            fmt_full(out.sy[i]),
            fmt_full(out.sz[i])
        );
    }
    write_text(&config.out.join("oracle.csv"), &csv)?;
    println!(
        "oracle: {} primary mode(s), {} levels each, T = {temperature} K -> {}",
        red.primary_freqs_cm1.len(),
        levels,
        config.out.join("oracle.csv").display()
    );
    Ok(())
}
