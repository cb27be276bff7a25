use std::path::{Path, PathBuf};

use serde::Serialize;
use tailprofile::constructions::{check_exp_max_moment, MomentCheck};
use tailprofile::dpot::{fit_hr_with, StabilityRow};
use tailprofile::io;
use tailprofile::max_link::{
    DEFAULT_GRID_STEP, DEFAULT_TAIL_MASS_TOL, DEFAULT_TOL_IDENTITY, DEFAULT_TOL_NORM,
};
use tailprofile::pca::{project_samples, truncate_law, EigenSource, TruncatedLaw};
use tailprofile::rng::{derive_seed, exponentials};
use tailprofile::{
    check_moment_identity, density_transform, extract_exceedances, max_t_cdf_from_max_u, max_u_cdf_from_max_t,
    profile_pca, profile_pca_samples, reconstruction_error, sample_t_from_u, sample_u_from_t, sample_x_from_u,
    sample_z, sample_zstar_from_u, spectral_from_profile, standardize_margins, threshold_stability, truncate_to_rank,
    HyperplaneCovariance, LawRole, LinkDirection, ProfileVector, SamplerHandle, TabulatedCdf, TailKind, TailSample,
};

use crate::config::{Command, LinkSource, RunConfig, SimKind};
use crate::output::Outputs;
use crate::CliError;

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn require<T: Clone>(v: &Option<T>, what: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("missing `{what}`")))
}

/// Runs a fully resolved config and returns the files it wrote.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate_files()?;
    match cfg.command {
        Some(Command::Simulate) => run_simulate(cfg),
        Some(Command::Fit) => run_fit(cfg),
        Some(Command::Pca) => run_pca(cfg),
        Some(Command::Link) => run_link(cfg),
        None => Err(CliError::Config("no command given".into())),
    }
}

#[derive(Debug, Default, Serialize)]
struct SimulateReport {
    kind: Option<SimKind>,
    n: usize,
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance_rate_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attempts: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    proposals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_mean_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_sample_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exp_max_moment: Option<MomentCheck>,
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let seed = require(&cfg.seed, "seed")?;
    let n = require(&cfg.n, "n")?;
    let model = require(&cfg.model, "model")?;
    let kind = cfg.kind.unwrap_or(SimKind::X);
    let tol = cfg.tolerances.unwrap_or_default();
    let handle = model.build(None)?.with_tol_center(tol.center);
    let role = handle.role();
    let mut report = SimulateReport {
        kind: Some(kind),
        n,
        d: handle.dim(),
        ..SimulateReport::default()
    };

    let wrong = |what: &str| CliError::Config(format!("kind {kind:?} needs a {what} law, got {role:?}"));
    let rows: Vec<Vec<f64>> = match kind {
        SimKind::X | SimKind::Zstar => {
            let draws = if kind == SimKind::X {
                sample_x_from_u(&handle, n, seed)?
            } else {
                sample_zstar_from_u(&handle, n, seed)?
            };
            report.exp_max_moment = Some(profile_moment(&handle, n, seed)?);
            draws.into_iter().map(|s: TailSample| s.values).collect()
        }
        SimKind::U => match role {
            LawRole::Profile => handle.draw_n(n, seed)?,
            LawRole::Generator => {
                let out = sample_u_from_t(&handle, n, seed, &cfg.rejection.unwrap_or_default())?;
                report.acceptance_rate = Some(out.acceptance_rate);
                report.acceptance_rate_se = Some(out.standard_error);
                report.attempts = Some(out.attempts);
                out.profiles.into_iter().map(ProfileVector::into_vec).collect()
            }
            LawRole::Spectral => return Err(wrong("profile or generator")),
        },
        SimKind::T | SimKind::S => {
            let t = match role {
                LawRole::Generator => handle.draw_profiles(n, seed)?,
                LawRole::Profile => tilt(&handle, n, seed, cfg, &mut report)?,
                LawRole::Spectral if kind == SimKind::S => {
                    handle.draw_n(n, seed)?.into_iter().map(|s| tailprofile::center(&s)).collect::<Result<_, _>>()?
                }
                LawRole::Spectral => return Err(wrong("profile or generator")),
            };
            if kind == SimKind::T {
                t.into_iter().map(ProfileVector::into_vec).collect()
            } else {
                t.iter().map(|p| spectral_from_profile(p).into_vec()).collect()
            }
        }
        SimKind::Z => match role {
            LawRole::Spectral => sample_z(&handle, n, seed)?.into_iter().map(|s| s.values).collect(),
            LawRole::Generator => {
                let t = handle.draw_profiles(n, derive_seed(seed, 0))?;
                let e = exponentials(n, derive_seed(seed, 1));
                t.iter()
                    .zip(e)
                    .map(|(p, e)| {
                        let z: Vec<f64> = spectral_from_profile(p).as_slice().iter().map(|s| e + s).collect();
                        TailSample::new(z, TailKind::Z).map(|s| s.values)
                    })
                    .collect::<Result<_, _>>()?
            }
            LawRole::Profile => return Err(wrong("spectral or generator")),
        },
    };

    let mut out = Outputs::new(&out_dir(cfg))?;
    let p = out.path("samples.csv");
    io::write_vectors_csv(&p, &rows)?;
    out.json("report.json", &report)?;
    out.commit(cfg)
}

/// Stability of `E[exp(max U)]` on the profile draws behind an X or Z* run.
fn profile_moment(handle: &SamplerHandle, n: usize, seed: u64) -> Result<MomentCheck, CliError> {
    let u = handle.draw_profiles(n, derive_seed(seed, 0))?;
    Ok(check_exp_max_moment(u.iter().map(ProfileVector::max)))
}

fn tilt(
    handle: &SamplerHandle,
    n: usize,
    seed: u64,
    cfg: &RunConfig,
    report: &mut SimulateReport,
) -> Result<Vec<ProfileVector>, CliError> {
    let m = cfg.proposals.unwrap_or(10 * n);
    let u = handle.draw_profiles(m, derive_seed(seed, 0))?;
    let sir = sample_t_from_u(&u, n, derive_seed(seed, 1))?;
    report.proposals = Some(m);
    report.weight_mean = Some(sir.weight_mean);
    report.weight_mean_se = Some(sir.weight_mean_se);
    report.effective_sample_size = Some(sir.effective_sample_size);
    Ok(sir.profiles)
}

fn data_error(e: tailprofile::Error) -> CliError {
    match e {
        tailprofile::Error::InvalidInput(m) => CliError::Data(m),
        other => other.into(),
    }
}

pub fn run_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let input = require(&cfg.input, "input")?;
    let q = cfg.quantile.unwrap_or(tailprofile::dpot::DEFAULT_QUANTILE);
    let tol = cfg.tolerances.unwrap_or_default();
    let data = io::read_data_csv(&input).map_err(data_error)?;
    let x = if cfg.standardize.unwrap_or(true) {
        standardize_margins(&data)?
    } else {
        data
    };
    let stability: Option<Vec<StabilityRow>> = cfg.quantiles.as_ref().map(|qs| threshold_stability(&x, qs));
    let exc = extract_exceedances(&x, q)?;
    let fit = fit_hr_with(&exc, cfg.extended.unwrap_or(false), &tol)?;

    let mut out = Outputs::new(&out_dir(cfg))?;
    out.json("fit.json", &fit)?;
    let p = out.path("gamma_hat.csv");
    io::write_matrix_csv(&p, &fit.gamma_hat.to_rows(), None)?;
    let p = out.path("sigma_hat.csv");
    io::write_matrix_csv(&p, &fit.sigma_hat.to_rows(), None)?;
    let p = out.path("mu_hat.csv");
    io::write_matrix_csv(&p, &[fit.mu_hat.as_slice().to_vec()], None)?;
    let p = out.path("exceedances.csv");
    let profiles: Vec<Vec<f64>> = exc.profiles.iter().map(|u| u.as_slice().to_vec()).collect();
    io::write_vectors_csv(&p, &profiles)?;
    if let Some(rows) = stability {
        let p = out.path("stability.csv");
        write_stability(&p, &rows, x.ncols())?;
    }
    out.commit(cfg)
}

fn write_stability(path: &Path, rows: &[StabilityRow], d: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(tailprofile::Error::from)?;
    let mut header = vec!["q".to_string(), "r".into(), "k".into()];
    for i in 0..d {
        for j in i + 1..d {
            header.push(format!("gamma_{}_{}", i + 1, j + 1));
        }
    }
    header.push("error".into());
    w.write_record(&header).map_err(tailprofile::Error::from)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for row in rows {
        let mut rec = vec![row.q.to_string(), opt(row.r.map(|r| r.to_string())), opt(row.k.map(|k| k.to_string()))];
        for i in 0..d {
            for j in i + 1..d {
                rec.push(opt(row.gamma_hat.as_ref().map(|g| g.matrix()[(i, j)].to_string())));
            }
        }
        rec.push(row.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(tailprofile::Error::from)?;
    }
    w.flush().map_err(tailprofile::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PcaReport {
    eigenvalues: Vec<f64>,
    trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reconstruction_error: Option<f64>,
    /// Sum of discarded eigenvalues, also given for sample input.
    #[serde(skip_serializing_if = "Option::is_none")]
    discarded_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated: Option<TruncatedLaw>,
}

pub fn run_pca(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let tol = cfg.tolerances.unwrap_or_default();
    let (eig, mu) = match (&cfg.model, &cfg.input) {
        (Some(model), None) => {
            let law = model
                .gaussian()?
                .ok_or_else(|| CliError::Config("pca needs a gaussian_profile model or sample input".into()))?;
            (profile_pca(law.sigma()), Some(law.mu().clone()))
        }
        (None, Some(input)) => {
            let rows = io::read_matrix_csv(input).map_err(data_error)?;
            let samples = rows
                .into_iter()
                .map(|r| ProfileVector::with_tolerance(r, tol.center))
                .collect::<Result<Vec<_>, _>>()
                .map_err(data_error)?;
            let eig = profile_pca_samples(&samples).map_err(data_error)?;
            let mean = eig.mean.clone().map(ProfileVector::new).transpose()?;
            (eig, mean)
        }
        _ => return Err(CliError::Config("pca needs exactly one of `model` or `input`".into())),
    };
    let trace = eig.eigenvalues.iter().sum();
    let mut report = PcaReport {
        eigenvalues: eig.eigenvalues.clone(),
        trace,
        rank: cfg.rank,
        reconstruction_error: None,
        discarded_variance: None,
        truncated: None,
    };

    let mut out = Outputs::new(&out_dir(cfg))?;
    out.json("eigensystem.json", &eig)?;
    let p = out.path("eigenvalues.csv");
    let mut cum = 0.0;
    let rows: Vec<Vec<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, l)| {
            cum += l;
            let share = if trace > 0.0 { l / trace } else { 0.0 };
            let cum_share = if trace > 0.0 { cum / trace } else { 0.0 };
            vec![(k + 1) as f64, *l, share, cum_share]
        })
        .collect();
    let header: Vec<String> = ["k", "eigenvalue", "share", "cumulative_share"].map(String::from).to_vec();
    io::write_matrix_csv(&p, &rows, Some(&header))?;

    if let Some(rank) = cfg.rank {
        let sigma_p: HyperplaneCovariance = truncate_to_rank(&eig, rank)?;
        let truncated = truncate_law(&eig, rank, mu.as_ref())?;
        report.reconstruction_error = Some(reconstruction_error(&eig, rank)?);
        report.discarded_variance = Some(eig.eigenvalues[rank..].iter().sum());
        let p = out.path("sigma_truncated.csv");
        io::write_matrix_csv(&p, &sigma_p.to_rows(), None)?;
        let p = out.path("gamma_truncated.csv");
        io::write_matrix_csv(&p, &truncated.gamma.to_rows(), None)?;
        if eig.source == EigenSource::Sample {
            let projected: Vec<Vec<f64>> = project_samples(&eig, rank)?.into_iter().map(ProfileVector::into_vec).collect();
            let p = out.path("projected.csv");
            io::write_vectors_csv(&p, &projected)?;
        }
        report.truncated = Some(truncated);
    }
    out.json("report.json", &report)?;
    out.commit(cfg)
}

#[derive(Debug, Serialize)]
struct LinkReport {
    direction: LinkDirection,
    source: LinkSource,
    normalizer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cleanup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_remainder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    moment_identity: Option<tailprofile::max_link::MomentIdentityReport>,
    warnings: Vec<String>,
}

pub fn run_link(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let input = require(&cfg.input, "input")?;
    let direction = cfg.direction.unwrap_or(LinkDirection::TToU);
    let source = cfg.source.unwrap_or_default();
    let tail_tol = cfg.tail_mass_tol.unwrap_or(DEFAULT_TAIL_MASS_TOL);
    let tol_norm = cfg.tol_norm.unwrap_or(DEFAULT_TOL_NORM);
    let tol_identity = cfg.tol_identity.unwrap_or(DEFAULT_TOL_IDENTITY);
    let mut out = Outputs::new(&out_dir(cfg))?;

    if source == LinkSource::Density {
        let f = io::read_tabulated_density(&input, tol_norm).map_err(data_error)?;
        let link = density_transform(&f, direction, tol_norm)?;
        let p = out.path("density.csv");
        io::write_tabulated_csv(&p, link.density.grid(), link.density.values(), None)?;
        let report = LinkReport {
            direction,
            source,
            normalizer: link.normalizer,
            cleanup: None,
            tail_remainder: None,
            moment_identity: None,
            warnings: Vec::new(),
        };
        out.json("report.json", &report)?;
        return out.commit(cfg);
    }

    let f_in = match source {
        LinkSource::Samples => {
            let rows = io::read_matrix_csv(&input).map_err(data_error)?;
            let maxima: Vec<f64> = rows.iter().map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            let f = TabulatedCdf::empirical(&maxima, cfg.grid_step.unwrap_or(DEFAULT_GRID_STEP)).map_err(data_error)?;
            let p = out.path("input_cdf.csv");
            io::write_tabulated_cdf(&p, &f)?;
            out.path("input_cdf.json");
            f
        }
        _ => {
            let f = io::read_tabulated_cdf(&input, tail_tol).map_err(data_error)?;
            match cfg.grid_step {
                Some(h) => {
                    let s_max = *f.grid().last().expect("nonempty grid");
                    TabulatedCdf::from_fn(h, s_max, f.tail_mass_tol(), |s| f.eval(s))?
                }
                None => f,
            }
        }
    };
    let link = match direction {
        LinkDirection::TToU => max_u_cdf_from_max_t(&f_in)?,
        LinkDirection::UToT => max_t_cdf_from_max_u(&f_in)?,
    };
    let identity = match direction {
        LinkDirection::TToU => check_moment_identity(&f_in, &link.cdf, tol_identity),
        LinkDirection::UToT => check_moment_identity(&link.cdf, &f_in, tol_identity),
    };
    let p = out.path("cdf.csv");
    io::write_tabulated_cdf(&p, &link.cdf)?;
    out.path("cdf.json");
    let report = LinkReport {
        direction,
        source,
        normalizer: link.normalizer,
        cleanup: Some(link.cleanup),
        tail_remainder: Some(link.tail_remainder),
        moment_identity: Some(identity),
        warnings: link.warnings,
    };
    out.json("report.json", &report)?;
    out.commit(cfg)
}
