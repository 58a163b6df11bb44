use polycurve::curve::Vec3;
use polycurve::operator::{
    ball_measure_check, converged_rule, norm_ratio_scan, pairing, BallSpec, GridSpec,
    MeasurableSet, PQPair, Profile, ScanTable, SetKind, TestFunction, WeakTypeReport,
};
use polycurve::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::{BallArgs, ExtensionArgs, Kind, PairingArgs, ScanArgs};
use crate::commands::{Completed, SCHEMA_VERSION};
use crate::failure::Failure;
use crate::io::{csv_rows, json, load_curve, Outputs};

/// Relative tolerance for the small-ball identity.
pub const BALL_TOL: f64 = 1e-12;

/// Slack on the endpoint bound for rounding in the quadrature sums.
pub const ENDPOINT_SLACK: f64 = 1e-12;

/// Frequency of the modulated test function.
pub const MODULATION: f64 = 3.0;

fn set(kind: Kind, c: [f64; 6], size: f64) -> MeasurableSet {
    let center: Vec3 = [
        C64::new(c[0], c[1]),
        C64::new(c[2], c[3]),
        C64::new(c[4], c[5]),
    ];
    let kind = match kind {
        Kind::Ball => SetKind::Ball,
        Kind::Box => SetKind::Box,
    };
    MeasurableSet::new(kind, center, size)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairingFile {
    pub schema_version: u32,
    pub seed: u64,
    pub disk_radius: f64,
    pub e: MeasurableSet,
    pub f: MeasurableSet,
    pub report: WeakTypeReport,
}

pub fn pairing_cmd(a: &PairingArgs) -> Result<Completed, Failure> {
    let curve = load_curve(&a.curve.curve)?;
    let e = set(a.e_kind, a.e_center, a.e_size);
    let f = set(a.f_kind, a.f_center, a.f_size);
    let report = pairing(&curve, &e, &f, a.disk_radius, a.samples, a.seed)?;
    let summary = vec![format!(
        "pairing {:.6e} +- {:.2e}; alpha {:.6e}, beta {:.6e}, rwt ratio {:.6e}",
        report.pairing, report.mc_stderr, report.alpha, report.beta, report.rwt_ratio
    )];
    let mut outputs = Outputs::default();
    outputs.add("pairing.csv", csv_rows(std::slice::from_ref(&report))?);
    outputs.add(
        "pairing.json",
        json(&PairingFile {
            schema_version: SCHEMA_VERSION,
            seed: a.seed,
            disk_radius: a.disk_radius,
            e,
            f,
            report,
        }),
    );
    Ok(Completed {
        outputs,
        summary,
        failed: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BallMeasureFile {
    pub schema_version: u32,
    pub spec: BallSpec,
    pub sigma_measure: f64,
    pub target: f64,
    pub rel_error: f64,
    pub passes: bool,
}

pub fn ball_measure_cmd(a: &BallArgs) -> Result<Completed, Failure> {
    let spec = BallSpec::new(a.x, a.k_prime)?;
    let (sigma, target) = ball_measure_check(&spec);
    let rel_error = (sigma - target).abs() / target;
    let passes = rel_error <= BALL_TOL;
    let summary = vec![format!("sigma = {sigma} target = {target}")];
    let mut outputs = Outputs::default();
    outputs.add(
        "ball_measure.json",
        json(&BallMeasureFile {
            schema_version: SCHEMA_VERSION,
            spec,
            sigma_measure: sigma,
            target,
            rel_error,
            passes,
        }),
    );
    Ok(Completed {
        outputs,
        summary,
        failed: (!passes).then(|| format!("relative error {rel_error:e} exceeds {BALL_TOL:e}")),
    })
}

fn profile(name: &str) -> Result<Profile, Failure> {
    match name.trim() {
        "indicator" => Ok(Profile::Indicator),
        "bump" => Ok(Profile::Bump),
        "modulated" => Ok(Profile::Modulated {
            frequency: MODULATION,
        }),
        other => Err(Failure::Usage(format!(
            "unknown test function {other:?}; expected indicator, bump or modulated"
        ))),
    }
}

/// Flat row for scan.csv; `theta` is empty for pairs not built from it.
#[derive(Debug, Serialize)]
struct ScanCsvRow {
    theta: Option<f64>,
    p: f64,
    q: String,
    function: String,
    dilation: f64,
    extension_norm: f64,
    input_norm: f64,
    ratio: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScanFile {
    pub schema_version: u32,
    pub nodes: usize,
    pub table: ScanTable,
}

pub fn scan_cmd(a: &ScanArgs) -> Result<Completed, Failure> {
    let curve = load_curve(&a.curve.curve)?;
    let mut pqs = Vec::new();
    for &t in &a.theta {
        pqs.push(PQPair::from_theta(t)?);
    }
    for &q in &a.q {
        pqs.push(PQPair::extension_dual(q)?);
    }
    if a.endpoint {
        pqs.push(PQPair::endpoint());
    }
    if pqs.is_empty() {
        return Err(Failure::Usage(
            "give at least one of --theta, --q or --endpoint".into(),
        ));
    }
    let mut family = Vec::new();
    for name in &a.functions {
        let p = profile(name)?;
        for &s in &a.dilations {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Failure::Usage(format!(
                    "dilation must be positive, got {s}"
                )));
            }
            family.push(TestFunction::new(p.clone(), s));
        }
    }
    let grid = GridSpec {
        half_width: a.grid_half_width,
        points_per_axis: a.grid_points,
    };
    let table = norm_ratio_scan(&curve, &pqs, &family, &grid, a.nodes)?;
    let rows: Vec<ScanCsvRow> = table
        .rows
        .iter()
        .map(|r| ScanCsvRow {
            theta: r.pq.theta,
            p: r.pq.p,
            q: if r.pq.q.is_infinite() {
                "inf".into()
            } else {
                r.pq.q.to_string()
            },
            function: r.function.clone(),
            dilation: r.dilation,
            extension_norm: r.extension_norm,
            input_norm: r.input_norm,
            ratio: r.ratio,
        })
        .collect();
    let mut summary = vec![format!("{} rows", rows.len())];
    for t in &table.trends {
        summary.push(format!(
            "p {:.4} q {} {}: ratio in [{:.4e}, {:.4e}], flatness {:.3}",
            t.pq.p, t.pq.q, t.function, t.min_ratio, t.max_ratio, t.flatness
        ));
    }
    let mut outputs = Outputs::default();
    outputs.add("scan.csv", csv_rows(&rows)?);
    outputs.add(
        "scan.json",
        json(&ScanFile {
            schema_version: SCHEMA_VERSION,
            nodes: a.nodes,
            table,
        }),
    );
    Ok(Completed {
        outputs,
        summary,
        failed: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EndpointRow {
    pub function: String,
    pub l1_norm: f64,
    pub n_radial: usize,
    pub max_ratio: f64,
    pub violations: usize,
    /// `|E f(z)| / ||f||_{L^1(lambda)}` at each point, in draw order.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtensionCheckFile {
    pub schema_version: u32,
    pub seed: u64,
    pub points: Vec<Vec3>,
    pub rows: Vec<EndpointRow>,
}

pub fn extension_cmd(a: &ExtensionArgs) -> Result<Completed, Failure> {
    let curve = load_curve(&a.curve.curve)?;
    let cube = MeasurableSet::cube([C64::new(0.0, 0.0); 3], a.half_width);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let points: Vec<Vec3> = (0..a.points).map(|_| cube.sample(&mut rng)).collect();
    let family = [
        TestFunction::new(Profile::Indicator, 1.0),
        TestFunction::new(Profile::Bump, 1.0),
        TestFunction::new(
            Profile::Modulated {
                frequency: MODULATION,
            },
            1.0,
        ),
    ];
    let mut rows = Vec::new();
    for tf in &family {
        let rule = converged_rule(
            &curve,
            |w| tf.eval(w),
            tf.support_radius(),
            &points,
            a.nodes,
        )?;
        let l1 = rule.l1_norm();
        let ratios: Vec<f64> = points.iter().map(|z| rule.eval(z).norm() / l1).collect();
        rows.push(EndpointRow {
            function: tf.label(),
            l1_norm: l1,
            n_radial: rule.n_radial,
            max_ratio: ratios.iter().copied().fold(0.0, f64::max),
            violations: ratios.iter().filter(|&&r| r > 1.0 + ENDPOINT_SLACK).count(),
            ratios,
        });
    }
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{}: max |Ef| / ||f||_1 = {:.6}, {} violation(s)",
                r.function, r.max_ratio, r.violations
            )
        })
        .collect();
    let mut outputs = Outputs::default();
    outputs.add(
        "extension_check.json",
        json(&ExtensionCheckFile {
            schema_version: SCHEMA_VERSION,
            seed: a.seed,
            points,
            rows,
        }),
    );
    Ok(Completed {
        outputs,
        summary,
        failed: (violations > 0).then(|| format!("{violations} point(s) exceed the L1 bound")),
    })
}
