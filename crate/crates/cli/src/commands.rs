use polycurve::decomposition::{affine_retry, classify_with, DecompositionConfig};
use polycurve::jacobian::{jacobian_direct, JacobianEngine, QuadratureSpec, Triple};
use polycurve::svg::region_map;
use polycurve::verify::{geometric_ratio, verify_report, VerificationReport};
use polycurve::{AffineMap3, Error, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::{AnalyzeArgs, JacobianArgs, ReplayArgs};
use crate::failure::Failure;
use crate::io::{json, load_curve, load_json, Outputs};

pub const SCHEMA_VERSION: u32 = 1;

/// Identity tolerance for the Jacobian check, relative to `max(1, |direct|)`.
pub const JACOBIAN_TOL: f64 = 1e-6;

/// Result of a command that ran to completion. `failed` carries the reason
/// when a checked property did not hold; outputs are written either way.
pub struct Completed {
    pub outputs: Outputs,
    pub summary: Vec<String>,
    pub failed: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerificationFile {
    pub schema_version: u32,
    pub seed: u64,
    pub samples_per_region: usize,
    /// Affine map applied to the input curve before decomposing.
    pub affine_map: AffineMap3,
    pub admissible_regions: usize,
    pub exploratory_regions: usize,
    pub min_admissible_ratio: Option<f64>,
    pub flagged_regions: Vec<usize>,
    pub reports: Vec<VerificationReport>,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<Completed, Failure> {
    let curve = load_curve(&a.curve.curve)?;
    if curve.is_degenerate() {
        return Err(Error::DegenerateTorsion.into());
    }
    let cfg = DecompositionConfig {
        eps: a.eps,
        working_radius: a.working_radius,
        ..Default::default()
    };
    let first = classify_with(&curve.torsion_triple(), &cfg)?;
    let (curve, map, report) = match affine_retry(&curve, &first) {
        Ok(found) => found,
        Err(Error::RetriesExhausted { .. }) => (curve, AffineMap3::identity(), first),
        Err(e) => return Err(e.into()),
    };
    let reports = verify_report(&curve, &report.regions, a.samples, a.seed)?;

    let admissible: Vec<&VerificationReport> = reports.iter().filter(|r| !r.exploratory).collect();
    let min_ratio = admissible.iter().map(|r| r.min_ratio).reduce(f64::min);
    let file = VerificationFile {
        schema_version: SCHEMA_VERSION,
        seed: a.seed,
        samples_per_region: a.samples,
        affine_map: map,
        admissible_regions: admissible.len(),
        exploratory_regions: reports.len() - admissible.len(),
        min_admissible_ratio: min_ratio,
        flagged_regions: report.flagged_regions.clone(),
        reports: reports.clone(),
    };

    let mut failed = Vec::new();
    if !report.flagged_regions.is_empty() {
        failed.push(format!(
            "{} region(s) failed the sector check: {:?}",
            report.flagged_regions.len(),
            report.flagged_regions
        ));
    }
    let nonpositive: Vec<usize> = admissible
        .iter()
        .filter(|r| !(r.min_ratio > 0.0))
        .map(|r| r.region_id)
        .collect();
    if !nonpositive.is_empty() {
        failed.push(format!(
            "nonpositive ratio on admissible regions {nonpositive:?}"
        ));
    }

    let summary = vec![
        format!(
            "regions: {} (admissible {}, inadmissible {}, flagged {})",
            report.regions.len(),
            file.admissible_regions,
            file.exploratory_regions,
            report.flagged_regions.len()
        ),
        format!(
            "min ratio over admissible regions: {}",
            min_ratio.map_or("n/a".to_string(), |v| format!("{v:.6e}"))
        ),
    ];
    let mut outputs = Outputs::default();
    outputs.add("decomposition.json", json(&report));
    outputs.add("verification.json", json(&file));
    outputs.add("regions.svg", region_map(&report, a.svg_width));
    Ok(Completed {
        outputs,
        summary,
        failed: (!failed.is_empty()).then(|| failed.join("; ")),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JacobianCheckReport {
    pub schema_version: u32,
    pub seed: u64,
    pub nodes_per_segment: usize,
    pub box_half_width: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub evaluated: usize,
    pub passes: usize,
    pub failures: usize,
    /// Triples skipped by the singularity pre-check, coincident points or a
    /// non-converged quadrature.
    pub excluded_count: usize,
    pub excluded_singular: usize,
    pub excluded_quadrature: usize,
    pub worst_rel_deviation: f64,
    pub worst_triple: Option<Triple>,
}

pub fn jacobian_check(a: &JacobianArgs) -> Result<Completed, Failure> {
    if a.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let curve = load_curve(&a.curve.curve)?;
    let q = QuadratureSpec::new(a.nodes)?;
    let engine = JacobianEngine::new(&curve)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let h = a.box_half_width;
    let mut point = || C64::new(rng.gen_range(-h..h), rng.gen_range(-h..h));

    let mut out = JacobianCheckReport {
        schema_version: SCHEMA_VERSION,
        seed: a.seed,
        nodes_per_segment: a.nodes,
        box_half_width: h,
        tolerance: JACOBIAN_TOL,
        trials: a.trials,
        evaluated: 0,
        passes: 0,
        failures: 0,
        excluded_count: 0,
        excluded_singular: 0,
        excluded_quadrature: 0,
        worst_rel_deviation: 0.0,
        worst_triple: None,
    };
    for _ in 0..a.trials {
        let t = Triple::new(point(), point(), point());
        if t.min_separation() == 0.0 || engine.precheck(&t).is_err() {
            out.excluded_singular += 1;
            continue;
        }
        let integral = match engine.integral(&t, &q) {
            Ok(v) => v,
            Err(Error::QuadratureNonConvergence { .. }) => {
                out.excluded_quadrature += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let direct = jacobian_direct(&curve, &t);
        let dev = (integral - direct).norm() / direct.norm().max(1.0);
        out.evaluated += 1;
        if dev <= JACOBIAN_TOL {
            out.passes += 1;
        } else {
            out.failures += 1;
        }
        if dev > out.worst_rel_deviation || out.worst_triple.is_none() {
            out.worst_rel_deviation = dev;
            out.worst_triple = Some(t);
        }
    }
    out.excluded_count = out.excluded_singular + out.excluded_quadrature;

    let summary = vec![format!(
        "trials {}: {} passed, {} failed, {} excluded; worst relative deviation {:.3e}",
        out.trials, out.passes, out.failures, out.excluded_count, out.worst_rel_deviation
    )];
    let failed =
        (out.failures > 0).then(|| format!("{} triple(s) broke the identity", out.failures));
    let mut outputs = Outputs::default();
    outputs.add("jacobian_check.json", json(&out));
    Ok(Completed {
        outputs,
        summary,
        failed,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReplayRow {
    pub region_id: usize,
    pub triple: Triple,
    pub recorded_ratio: f64,
    pub replayed_ratio: f64,
    pub matches: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReplayReport {
    pub schema_version: u32,
    pub witnesses: usize,
    pub mismatches: usize,
    pub rows: Vec<ReplayRow>,
}

pub fn replay(a: &ReplayArgs) -> Result<Completed, Failure> {
    let curve = load_curve(&a.curve.curve)?;
    let file: VerificationFile = load_json(&a.report)?;
    let curve = curve.affine_apply(&file.affine_map);
    let mut rows = Vec::with_capacity(file.reports.len());
    for r in &file.reports {
        let w = &r.worst_witness;
        let again = geometric_ratio(&curve, &w.triple)?.ratio;
        rows.push(ReplayRow {
            region_id: r.region_id,
            triple: w.triple,
            recorded_ratio: w.ratio,
            replayed_ratio: again,
            matches: again == w.ratio,
        });
    }
    let mismatches = rows.iter().filter(|r| !r.matches).count();
    let report = ReplayReport {
        schema_version: SCHEMA_VERSION,
        witnesses: rows.len(),
        mismatches,
        rows,
    };
    let summary = vec![format!(
        "replayed {} witness(es), {} mismatch(es)",
        report.witnesses, mismatches
    )];
    let mut outputs = Outputs::default();
    outputs.add("replay.json", json(&report));
    Ok(Completed {
        outputs,
        summary,
        failed: (mismatches > 0).then(|| format!("{mismatches} witness(es) did not reproduce")),
    })
}
