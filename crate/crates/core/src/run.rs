//! Orchestration of every verification pass and report emission.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::config::{BaseType, ConnectionMode, RunConfig};
use crate::connection::{
    connection_residual, flat_connection, poincare_connection, ConnectionTriple,
};
use crate::curvature::{einstein_residual, fiber_curvature_check, CurvatureMode};
use crate::diffgeo::{DiffMode, Sampler};
use crate::error::{Error, Result};
use crate::hk_bases::{
    make_flat_torus_base_with, make_gibbons_hawking_base_with, product_base, verify_triple,
    HyperKahlerBase, TripleConvention,
};
use crate::obstructions::{k3_gram_check, nonsymmetry_rank_check, GramVerdict, RankVerdict};
use crate::qk::{
    assemble_qk_model_with, hermitian_compatibility, ideal_residual, QkModel, QkOptions,
};
use crate::report::{CheckOutcome, VerificationReport};
use crate::volume::{density_law_check, volume_checks, volume_study, VolumeReport};

/// Report sections, in run order.
pub const SECTIONS: &[&str] = &[
    "hyperkahler_triple",
    "connection",
    "hermitian",
    "ideal",
    "einstein",
    "fiber_curvature",
    "volume_density",
    "volume",
    "obstructions",
];

/// Check names per section. `sigma_wedge` appears only for 4-dimensional
/// bases and `exact_vs_fd_scalar` only in `both` curvature mode.
pub const CHECKS: &[(&str, &[&str])] = &[
    (
        "hyperkahler_triple",
        &[
            "sigma_closed",
            "sigma_wedge",
            "j_squared",
            "j_metric",
            "quaternion_relation",
        ],
    ),
    (
        "connection",
        &[
            "curvature_match_1",
            "curvature_match_2",
            "curvature_match_3",
            "fiber_pairing",
        ],
    ),
    (
        "hermitian",
        &[
            "metric_positive",
            "j_squared",
            "j_metric",
            "omega_from_j",
            "quaternion_relation",
        ],
    ),
    (
        "ideal",
        &[
            "ideal_residual",
            "d_squared_omega",
            "fundamental_form_nondegenerate",
        ],
    ),
    (
        "einstein",
        &[
            "einstein_defect",
            "einstein_spread",
            "einstein_negative",
            "einstein_constant",
            "riemann_symmetry",
            "first_bianchi",
            "scalar_contraction",
            "exact_vs_fd_scalar",
        ],
    ),
    ("fiber_curvature", &["fiber_sectional"]),
    (
        "volume_density",
        &["density_factorization", "density_reference"],
    ),
    (
        "volume",
        &[
            "volume_positive",
            "slab_closed_form",
            "reference_constant",
            "slab_additivity",
            "finite_end_monotone",
            "finite_end_limit",
            "finite_end_increments",
            "infinite_end",
        ],
    ),
    ("obstructions", &["k3_gram", "nonsymmetry_rank"]),
];

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Pass,
    Fail,
    ConfigError,
    EngineError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Fail => 1,
            ExitStatus::ConfigError => 2,
            ExitStatus::EngineError => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conventions {
    pub sigma2_flipped: bool,
    /// `ωᵢ(X, Y) = g(JᵢX, Y)`.
    pub complex_structure: &'static str,
    /// Sign `s` in `J₁J₂ = s·J₃` found on the base.
    pub quaternion_sign: Option<f64>,
    pub rho_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Obstructions {
    pub k3_gram: GramVerdict,
    pub nonsymmetry: RankVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub passed: bool,
    pub status: ExitStatus,
    pub conventions: Conventions,
    pub diff_mode: DiffMode,
    pub curvature_mode: CurvatureMode,
    pub config: RunConfig,
    pub sections: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstructions: Option<Obstructions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

impl RunReport {
    pub fn section(&self, name: &str) -> Option<&VerificationReport> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn slab_csv(&self) -> Option<Result<String>> {
        self.volume.as_ref().map(VolumeReport::slab_csv)
    }
}

fn convention(cfg: &RunConfig) -> TripleConvention {
    TripleConvention {
        sigma2_flipped: cfg.sigma2_flipped,
    }
}

pub fn build_base(cfg: &RunConfig) -> Result<HyperKahlerBase> {
    let conv = convention(cfg);
    let mut out: Option<HyperKahlerBase> = None;
    for f in cfg.base_factors() {
        let b = match f {
            BaseType::Flat => make_flat_torus_base_with(conv),
            BaseType::GibbonsHawking => make_gibbons_hawking_base_with(&cfg.gibbons_hawking, conv)?,
            BaseType::Product => return Err(Error::Config("nested product base".into())),
        };
        out = Some(match out {
            None => b,
            Some(acc) => product_base(&acc, &b)?,
        });
    }
    out.ok_or_else(|| Error::Config("base has no factors".into()))
}

pub fn build_connection(cfg: &RunConfig, base: &HyperKahlerBase) -> Result<ConnectionTriple> {
    let c = match cfg.connection_mode {
        ConnectionMode::Explicit => flat_connection(base)?,
        ConnectionMode::Poincare => poincare_connection(base, cfg.quadrature_nodes)?,
    };
    c.with_t_range(cfg.t_range)
}

pub fn build_model(cfg: &RunConfig) -> Result<(HyperKahlerBase, ConnectionTriple, QkModel)> {
    let base = build_base(cfg)?;
    let conn = build_connection(cfg, &base)?;
    let model = assemble_qk_model_with(
        &base,
        &conn,
        QkOptions {
            rho_rate: cfg.rho_rate,
        },
    )?;
    Ok((base, conn, model))
}

/// Runs every pass in order. Engine failures stop the run; the report keeps
/// what was computed up to that point.
pub fn run_verification(cfg: &RunConfig) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        passed: false,
        status: ExitStatus::EngineError,
        conventions: Conventions {
            sigma2_flipped: cfg.sigma2_flipped,
            complex_structure: "omega(X,Y) = g(JX,Y)",
            quaternion_sign: None,
            rho_rate: cfg.rho_rate,
        },
        diff_mode: cfg.engine_mode,
        curvature_mode: cfg.curvature_mode,
        config: cfg.clone(),
        sections: Vec::new(),
        volume: None,
        obstructions: None,
        error: None,
        elapsed_ms: 0.0,
    };
    if let Err(e) = cfg.validate() {
        report.status = ExitStatus::ConfigError;
        report.error = Some(e.to_string());
        return report;
    }
    match run_passes(cfg, &mut report) {
        Ok(()) => {
            report.passed = report.sections.iter().all(|s| s.passed);
            report.status = if report.passed {
                ExitStatus::Pass
            } else {
                ExitStatus::Fail
            };
        }
        Err(e) => {
            report.passed = false;
            report.status = if matches!(e, Error::Config(_)) {
                ExitStatus::ConfigError
            } else {
                ExitStatus::EngineError
            };
            report.error = Some(e.to_string());
        }
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

fn run_passes(cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let tol = &cfg.tolerances;
    let samples = cfg.samples;
    let base = build_base(cfg)?;
    let triple = verify_triple(&base, samples, tol.triple);
    report.conventions.quaternion_sign = triple
        .check("quaternion_relation")
        .and_then(|c| c.detail("sign"))
        .and_then(|v| v.as_f64());
    report.sections.push(triple);

    let conn = build_connection(cfg, &base)?;
    report
        .sections
        .push(connection_residual(&conn, &base, samples, tol.connection));
    let model = assemble_qk_model_with(
        &base,
        &conn,
        QkOptions {
            rho_rate: cfg.rho_rate,
        },
    )?;

    report
        .sections
        .push(hermitian_compatibility(&model, samples, tol.hermitian));
    report
        .sections
        .push(ideal_residual(&model, samples, tol.ideal, cfg.engine_mode));
    let curvature = Sampler::new(samples.seed, cfg.curvature_samples);
    report.sections.push(einstein_residual(
        &model,
        curvature,
        tol.einstein,
        cfg.curvature_mode,
    ));
    report
        .sections
        .push(fiber_curvature_check(&model, curvature, tol.fiber));

    report
        .sections
        .push(density_law_check(&model, samples, tol.density)?);
    let mut slabs = vec![(cfg.volume_t_range[0], cfg.volume_t_range[1])];
    slabs.extend(cfg.volume_slabs.iter().map(|s| (s[0], s[1])));
    let volume = volume_study(&model, &slabs, &cfg.t_sequence, &cfg.volume_grid)?;
    report.sections.push(volume_checks(
        &volume,
        &model,
        &cfg.volume_grid,
        tol.volume,
    )?);
    report.volume = Some(volume);

    let k3 = k3_gram_check(&cfg.lattice)?;
    let rank = nonsymmetry_rank_check(cfg.m)?;
    let mut obs = VerificationReport::new("obstructions", None);
    obs.push(CheckOutcome::condition("k3_gram", k3.passed).with("gram", k3.gram));
    obs.push(CheckOutcome::condition("nonsymmetry_rank", rank.passed).with("rank", rank.rank));
    report.sections.push(obs);
    report.obstructions = Some(Obstructions {
        k3_gram: k3,
        nonsymmetry: rank,
    });
    Ok(())
}

/// Writes the JSON report and the slab CSV to the configured paths.
pub fn write_outputs(
    report: &RunReport,
    json_path: Option<&Path>,
    csv_path: Option<&Path>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    if let Some(p) = json_path {
        fs::write(p, report.to_json() + "\n").map_err(io)?;
    }
    if let (Some(p), Some(csv)) = (csv_path, report.slab_csv()) {
        fs::write(p, csv?).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::strip_timing;

    fn quick() -> RunConfig {
        RunConfig::parse("samples.count = 6\ncurvature.samples = 3\nvolume.T_sequence = 1, 2")
            .unwrap()
    }

    #[test]
    fn default_flat_run_passes() {
        let r = run_verification(&quick());
        assert_eq!(r.status, ExitStatus::Pass, "{}", r.to_json());
        let names: Vec<&str> = r.sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, SECTIONS);
        for (section, (name, checks)) in r.sections.iter().zip(CHECKS) {
            assert_eq!(&section.name, name);
            let got: Vec<&str> = section.checks.iter().map(|c| c.name.as_str()).collect();
            assert_eq!(&got, checks);
        }
    }

    #[test]
    fn impossible_tolerance_fails() {
        let mut cfg = quick();
        cfg.tolerances.ideal = 1e-30;
        let r = run_verification(&cfg);
        assert_eq!(r.status, ExitStatus::Fail);
        assert!(!r.section("ideal").unwrap().passed);
    }

    #[test]
    fn engine_errors_keep_partial_report() {
        let mut cfg = RunConfig::parse("base.type = gibbons-hawking\nsamples.count = 3").unwrap();
        cfg.gibbons_hawking.spatial_box = [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]];
        let r = run_verification(&cfg);
        assert_eq!(r.status, ExitStatus::EngineError);
        assert!(r.error.as_deref().unwrap().contains("charge"));
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = quick();
        let mut a = serde_json::to_value(run_verification(&cfg)).unwrap();
        let mut b = serde_json::to_value(run_verification(&cfg)).unwrap();
        strip_timing(&mut a);
        strip_timing(&mut b);
        assert_eq!(a.to_string(), b.to_string());
    }
}
