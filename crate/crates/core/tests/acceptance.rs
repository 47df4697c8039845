//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mlsb::classical::classical_coherence;
use mlsb::config::RunConfig;
use mlsb::hbar::{hbar3_dimer, hbar3_general};
use mlsb::oracle::{convergence_sweep, discretize_bath, solve, OracleConfig};
use mlsb::perturbative::{kernel, quantum_coherence_2nd, quantum_coherence_2nd_discretized, uncertainty_lower_bound};
use mlsb::phase_space::{render_figure2, rho10_quantum, rho10_via_moyal, GridSpec};
use mlsb::semiclassical::{semiclassical_exact, semiclassical_second_order};
use mlsb::{diagonalize_excited, reorganization_matrix, BathShape, BathSpec, CoherenceResult, Method, SiteSystem, Thermo};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const OHMIC: BathShape = BathShape::Ohmic { cutoff: 50.0 };

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fig_dimer() -> SiteSystem {
    SiteSystem::dimer(16000.0, 200.0, 200.0).unwrap()
}

fn site1_bath(e: f64) -> BathSpec {
    BathSpec::uncorrelated(OHMIC, vec![e, 0.0]).unwrap()
}

fn th(t: f64) -> Thermo {
    Thermo::new(t).unwrap()
}

fn random_dimer(rng: &mut ChaCha8Rng) -> SiteSystem {
    SiteSystem::dimer(16000.0, rng.gen_range(-400.0..400.0), rng.gen_range(-400.0..400.0)).unwrap()
}

fn recipes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes")
}

fn recipes() -> Vec<(PathBuf, RunConfig)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(recipes_dir())
        .expect("recipes directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ini"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let cfg = std::fs::read_to_string(&p).unwrap().parse().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p, cfg)
        })
        .collect()
}

fn classical_nullity() -> Outcome {
    let mut checked = 0;
    for (path, cfg) in recipes() {
        let (Some(sys), Some(bath)) = (&cfg.system, &cfg.bath) else { continue };
        for t in cfg.sweep.map(|s| s.temperatures()).unwrap_or_else(|| vec![300.0]) {
            let c = classical_coherence(sys, bath, &th(t)).c12();
            ensure(c == 0.0, || format!("{} at {t} K: C12 = {c:e}", path.display()))?;
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let sys = random_dimer(&mut rng);
        let bath = BathSpec::uniform_correlation(
            OHMIC,
            vec![rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0)],
            rng.gen_range(-1.0..1.0),
        )
        .unwrap();
        let t = rng.gen_range(50.0..1000.0);
        let c = classical_coherence(&sys, &bath, &th(t)).c12();
        ensure(c == 0.0, || format!("random dimer {sys:?} at {t} K: C12 = {c:e}"))?;
        checked += 1;
    }
    Ok(format!("{checked} evaluations, all exactly zero"))
}

fn semiclassical_symmetric_nullity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let sys = random_dimer(&mut rng);
        let e = rng.gen_range(1.0..300.0);
        let bath = BathSpec::uniform_correlation(OHMIC, vec![e, e], rng.gen_range(-1.0..1.0)).unwrap();
        for t in [77.0, 300.0, 800.0] {
            let c = semiclassical_exact(&sys, &bath, &th(t)).map_err(|e| e.to_string())?.c12();
            worst = worst.max(c.abs());
        }
    }
    ensure(worst < 1e-12, || format!("max |C12| = {worst:e}"))?;
    Ok(format!("max |C12| = {worst:.2e} over 90 evaluations"))
}

fn correlated_nullity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let sys = random_dimer(&mut rng);
        let e = rng.gen_range(1.0..300.0);
        let bath = BathSpec::uniform_correlation(OHMIC, vec![e, e], 1.0).unwrap();
        let t = rng.gen_range(77.0..800.0);
        let c = quantum_coherence_2nd(&sys, &bath, &th(t)).map_err(|e| e.to_string())?.c12();
        worst = worst.max(c.abs());
    }
    ensure(worst < 1e-8, || format!("max |C12| = {worst:e}"))?;
    Ok(format!("max |C12| = {worst:.2e} over 10 configurations"))
}

fn common_high_t_limit() -> Outcome {
    let (sys, bath, th) = (fig_dimer(), site1_bath(100.0), th(4000.0));
    let vals = [
        ("sc-2", semiclassical_second_order(&sys, &bath, &th).map_err(|e| e.to_string())?.c12()),
        ("q-2", quantum_coherence_2nd(&sys, &bath, &th).map_err(|e| e.to_string())?.c12()),
        ("hbar3", hbar3_general(&sys, &bath, &th).map_err(|e| e.to_string())?.c12()),
    ];
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in i + 1..3 {
            let rel = (vals[i].1 - vals[j].1).abs() / vals[i].1.abs().max(vals[j].1.abs());
            worst = worst.max(rel);
        }
    }
    let listing = vals.iter().map(|(n, v)| format!("{n}={v:.6e}")).collect::<Vec<_>>().join(" ");
    ensure(worst < 0.03, || format!("{listing}, max pairwise rel {worst:.3e}"))?;
    Ok(format!("{listing}, max pairwise rel {worst:.2e}"))
}

fn oracle_perturbation_consistency() -> Outcome {
    let (sys, th) = (fig_dimer(), th(300.0));
    let energies = [1.0, 2.0, 4.0];
    let grid = [(1, 60), (1, 80), (1, 100)];
    let base = OracleConfig::new(1, 100);
    let mut residuals = Vec::new();
    let mut notes = Vec::new();
    for &e in &energies {
        let bath = site1_bath(e);
        let table = convergence_sweep(&sys, &bath, &th, &grid, &base).map_err(|e| e.to_string())?;
        let dbath = discretize_bath(&bath, &base).map_err(|e| e.to_string())?;
        let q2 = quantum_coherence_2nd_discretized(&sys, &dbath, &th).map_err(|e| e.to_string())?.c12();
        let residual = (table.extrapolated - q2).abs();
        ensure(table.uncertainty < 0.01 * residual.max(0.01 * q2.abs()), || {
            format!("E^r={e}: oracle not converged in M (uncertainty {:.2e}, residual {residual:.2e})", table.uncertainty)
        })?;
        notes.push(format!("E^r={e}: oracle={:.6e} q-2={q2:.6e}", table.extrapolated));
        residuals.push((residual, q2));
    }
    let xs: Vec<f64> = energies.iter().map(|e: &f64| e.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|(r, _)| r.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let rel = residuals[0].0 / residuals[0].1.abs();
    let summary = format!("{}; exponent {slope:.3}, relative residual at 1 cm^-1 {rel:.2e}", notes.join(", "));
    ensure((slope - 2.0).abs() <= 0.3 && rel < 0.01, || summary.clone())?;
    Ok(summary)
}

fn hbar3_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let sys = random_dimer(&mut rng);
        let bath = BathSpec::uniform_correlation(
            OHMIC,
            vec![rng.gen_range(0.0..300.0), rng.gen_range(0.0..300.0)],
            rng.gen_range(-1.0..1.0),
        )
        .unwrap();
        let th = th(rng.gen_range(50.0..2000.0));
        let general = hbar3_general(&sys, &bath, &th).map_err(|e| e.to_string())?.c12();
        let basis = diagonalize_excited(&sys).map_err(|e| e.to_string())?;
        let e_r = reorganization_matrix(&bath).map_err(|e| e.to_string())?;
        let dimer = hbar3_dimer(&basis, &e_r, &th).map_err(|e| e.to_string())?.c12();
        worst = worst.max((general - dimer).abs() / general.abs().max(1.0));
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e} over 100 dimers"))
}

fn hbar3_sign_at_ambient() -> Outcome {
    let sys = fig_dimer();
    let bath = BathSpec::uncorrelated(OHMIC, vec![1.0, 1.0]).unwrap();
    let cfg = OracleConfig::new(1, 30);
    let dbath = discretize_bath(&bath, &cfg).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for t in [300.0, 550.0, 800.0] {
        let th = th(t);
        let h3 = hbar3_general(&sys, &bath, &th).map_err(|e| e.to_string())?.c12();
        let exact = solve(&sys, &dbath, &cfg, &th).map_err(|e| e.to_string())?.result.c12();
        notes.push(format!("{t} K: hbar3={h3:.3e} oracle={exact:.3e}"));
        ensure(h3 != 0.0 && h3.signum() == exact.signum(), || notes.join(", "))?;
    }
    Ok(notes.join(", "))
}

fn kernel_regularity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut poles = 0;
    for draw in 0..100 {
        let sys = random_dimer(&mut rng);
        let basis = diagonalize_excited(&sys).map_err(|e| e.to_string())?;
        let th = th(rng.gen_range(20.0..2000.0));
        let (mu, nu, kappa) = (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2));
        let w = &basis.delta_omega_mu;
        for pole in [-(w[mu] - w[kappa]), -(w[nu] - w[kappa])] {
            let at = kernel(pole, kappa, mu, nu, &basis, &th);
            ensure(at.value.is_finite(), || format!("draw {draw}: non-finite value at pole {pole}"))?;
            for sign in [1.0, -1.0] {
                let dev: Vec<f64> = [1e-2, 1e-4, 1e-6]
                    .iter()
                    .map(|off| (kernel(pole + sign * off, kappa, mu, nu, &basis, &th).value - at.value).abs())
                    .collect();
                let floor = 1e-9 * at.value.abs().max(f64::MIN_POSITIVE);
                for k in 1..dev.len() {
                    if dev[k] <= floor && dev[k - 1] <= floor * 1e2 {
                        continue;
                    }
                    let ratio = dev[k] / dev[k - 1] / 1e-2;
                    ensure((ratio - 1.0).abs() <= 0.1, || {
                        format!(
                            "draw {draw} (mu={mu}, nu={nu}, kappa={kappa}, T={} K) pole {pole}: deviations {dev:?}",
                            th.temperature_k
                        )
                    })?;
                }
            }
            poles += 1;
        }
        for _ in 0..50 {
            let om = rng.gen_range(-2000.0..2000.0);
            let v = kernel(om, kappa, mu, nu, &basis, &th).value;
            ensure(v.is_finite(), || format!("draw {draw}: non-finite kernel at {om}"))?;
        }
    }
    Ok(format!("{poles} poles approached from both sides, deviations shrink linearly with the offset"))
}

fn reality_symmetry() -> Outcome {
    let three = SiteSystem::new(
        vec![16000.0, 16150.0, 16320.0],
        DMatrix::from_row_slice(3, 3, &[0.0, 90.0, -30.0, 90.0, 0.0, 60.0, -30.0, 60.0, 0.0]),
    )
    .unwrap();
    let three_bath = BathSpec::uniform_correlation(OHMIC, vec![80.0, 40.0, 120.0], 0.2).unwrap();
    let cases = [
        (fig_dimer(), BathSpec::uncorrelated(OHMIC, vec![100.0, 100.0]).unwrap()),
        (fig_dimer(), site1_bath(100.0)),
        (three, three_bath),
    ];
    let mut worst = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut count = 0;
    for (sys, bath) in &cases {
        for t in [77.0, 300.0, 800.0] {
            let th = th(t);
            let mut results: Vec<CoherenceResult> = vec![
                classical_coherence(sys, bath, &th),
                quantum_coherence_2nd(sys, bath, &th).map_err(|e| e.to_string())?,
                hbar3_general(sys, bath, &th).map_err(|e| e.to_string())?,
            ];
            if sys.n_sites() == 2 {
                results.push(semiclassical_exact(sys, bath, &th).map_err(|e| e.to_string())?);
                results.push(semiclassical_second_order(sys, bath, &th).map_err(|e| e.to_string())?);
            }
            // one bin per Cholesky column: three modes for the three-site bath
            let cfg = OracleConfig::new(1, if sys.n_sites() == 2 { 12 } else { 6 });
            let oracle = solve(sys, &discretize_bath(bath, &cfg).map_err(|e| e.to_string())?, &cfg, &th)
                .map_err(|e| e.to_string())?
                .result;
            worst_trace = worst_trace.max((oracle.c_matrix.trace() - 1.0).abs());
            results.push(oracle);
            for r in &results {
                ensure(r.is_finite(), || format!("{} produced non-finite entries", r.method))?;
                worst = worst.max(r.asymmetry());
                count += 1;
            }
        }
    }
    ensure(worst < 1e-12 && worst_trace < 1e-10, || {
        format!("max asymmetry {worst:e}, oracle population sum off by {worst_trace:e}")
    })?;
    Ok(format!("{count} matrices, max asymmetry {worst:.2e}, oracle population sum off by {worst_trace:.2e}"))
}

fn phase_space() -> Outcome {
    let omega = 16000.0;
    let th = th(300.0);
    let spec = GridSpec::default();
    let fig = render_figure2(omega, &th, &spec).map_err(|e| e.to_string())?;
    let root = omega.sqrt();
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for x in &fig.quantum.q_values {
        for y in &fig.quantum.p_values {
            let (q, p) = (x / root, y * root);
            let a = rho10_quantum(q, p, omega);
            worst = worst.max((a - rho10_via_moyal(q, p, omega)).norm());
            peak = peak.max(a.norm());
        }
    }
    let moyal_rel = worst / peak;
    let width = fig.measured_width_ratio / fig.expected_width_ratio - 1.0;
    let extent = fig.radial_extent_semiclassical / fig.radial_extent_quantum - 1.0;
    let summary = format!(
        "Moyal deviation {moyal_rel:.2e}, width ratio {:.4} vs {:.4}, radial extents {:.4} vs {:.4}",
        fig.measured_width_ratio, fig.expected_width_ratio, fig.radial_extent_semiclassical, fig.radial_extent_quantum
    );
    ensure(moyal_rel <= 1e-12 && width.abs() <= 0.02 && extent.abs() <= 0.2, || summary.clone())?;
    Ok(summary)
}

fn uncertainty_bound() -> Outcome {
    let sys = fig_dimer();
    let th = th(300.0);
    let cfg = OracleConfig::new(4, 2);
    let uncorrelated = BathSpec::uncorrelated(OHMIC, vec![100.0, 100.0]).unwrap();
    let correlated = BathSpec::uniform_correlation(OHMIC, vec![100.0, 100.0], 1.0).unwrap();

    let diag = CoherenceResult::new(Method::Quantum2, DMatrix::from_diagonal_element(2, 2, 0.5), true, 0.0);
    let d_unc = discretize_bath(&uncorrelated, &cfg).map_err(|e| e.to_string())?;
    let b_diag = uncertainty_lower_bound(&sys, &d_unc, &diag).map_err(|e| e.to_string())?;
    ensure(b_diag.value == 0.0, || format!("diagonal C gives bound {:e}", b_diag.value))?;

    let d_cor = discretize_bath(&correlated, &cfg).map_err(|e| e.to_string())?;
    let c_cor = quantum_coherence_2nd(&sys, &correlated, &th).map_err(|e| e.to_string())?;
    let b_cor = uncertainty_lower_bound(&sys, &d_cor, &c_cor).map_err(|e| e.to_string())?;
    ensure(b_cor.value <= 1e-12 * b_cor.scale.max(1.0), || format!("correlated bath gives bound {:e}", b_cor.value))?;

    let c_q = quantum_coherence_2nd(&sys, &uncorrelated, &th).map_err(|e| e.to_string())?;
    let b_q = uncertainty_lower_bound(&sys, &d_unc, &c_q).map_err(|e| e.to_string())?;
    let summary = format!(
        "diagonal {:.1e}, correlated {:.1e}, fig1a quantum {:.3e} (roundoff scale {:.3e}, C12 = {:.4e})",
        b_diag.value,
        b_cor.value,
        b_q.value,
        1e-12 * b_q.scale,
        c_q.c12()
    );
    ensure(b_q.value > 1e-12 * b_q.scale, || format!("fig1a bound not positive: {summary}"))?;
    Ok(summary)
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mlsb");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (path, cfg) in recipes() {
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let (sub, files): (&str, Vec<String>) = if cfg.figure2.is_some() {
            ("figure2", ["classical", "semiclassical", "quantum"].iter().map(|n| format!("fig2_{n}.csv")).collect())
        } else {
            ("sweep", vec![String::new()])
        };
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{stem}-{run}"));
            if sub == "figure2" {
                std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            }
            let status = Command::new(bin)
                .args([sub, "--config"])
                .arg(&path)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!("{stem}: exit {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr))
            })?;
            outputs.push(
                files
                    .iter()
                    .map(|f| std::fs::read(if f.is_empty() { out.clone() } else { out.join(f) }).unwrap())
                    .collect(),
            );
        }
        ensure(outputs[0] == outputs[1], || format!("{stem}: outputs differ between runs"))?;
        compared += files.len();
    }
    Ok(format!("{compared} CSV files byte-identical across two runs"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("classical nullity", classical_nullity),
        ("semiclassical symmetric-coupling nullity", semiclassical_symmetric_nullity),
        ("correlated-bath nullity", correlated_nullity),
        ("common high-temperature limit", common_high_t_limit),
        ("oracle/perturbation consistency", oracle_perturbation_consistency),
        ("hbar^3 internal consistency", hbar3_consistency),
        ("hbar^3 sign at ambient temperature", hbar3_sign_at_ambient),
        ("kernel regularity", kernel_regularity),
        ("reality and symmetry", reality_symmetry),
        ("phase-space portraits", phase_space),
        ("uncertainty bound", uncertainty_bound),
        ("determinism", determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {id:>2} {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
