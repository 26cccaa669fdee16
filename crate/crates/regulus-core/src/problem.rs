//! Declarative problem definitions and the batch runner behind the CLI.
//!
//! A problem file is TOML with named sections. Function families are a
//! closed enum defined by rational parameters: arbitrary user expressions
//! cannot carry trustworthy moduli, so the runner only accepts shapes whose
//! continuity data it can state itself. Moduli of regularity come from the
//! file (affine or table) or from a grid brute-force, never from guessing.
//!
//! Output is deterministic: identical problem files and flags produce
//! byte-identical tables and certificates. Anything nondeterministic
//! (timings) is the caller's business to keep out of the artifact files.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fejer::{
    brute_regularity_modulus, cauchy_rate, check_rate, find_modulus_divergence,
    geometric_brute_modulus, iteration_rep, ApproxSolutionRate, MonotoneFamily,
    MonotoneSequenceFixture, ZeroSetDesc,
};
use crate::minnorm::{
    find_min_norm_zero, hilbert_uniqueness_modulus, verify_min_norm, MinNormStage, MinNormStrategy,
    StructuredForm,
};
use crate::rational::Rational;
use crate::real::RealName;
use crate::spaces::{
    interval_space, interval_value_of_index, lipschitz_function, product_space, unpair,
    CompactSpaceRep, IntervalEvaluator, Modulus, NormedCompactRep, UcFunctionRep,
};
use crate::trees::{
    brute_tree_modulus, embed_tree, leftmost_member_at_depth, leftmost_path_prefix,
    metric_modulus_from_tree, BinaryTree, TailRule,
};
use crate::zerofind::{find_zero, verify_certificates, VerifyReport};
use crate::{RegulusError, SearchCap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Zero,
    Minnorm,
    Leftmost,
    Fejer,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Default table depth when the caller passes none.
    pub depth: Option<u32>,
    pub space: Option<SpaceConfig>,
    pub function: Option<FunctionConfig>,
    #[serde(default)]
    pub modulus: ModuliConfig,
    pub tree: Option<TreeConfig>,
    pub fejer: Option<FejerConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Interval,
    Product,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    /// Grid depth; for products, the depth of each component.
    pub depth: u32,
}

impl SpaceConfig {
    /// Net-size bounds stay inside u64: the interval enumeration needs
    /// `2^(depth)` indices, the paired product squares that.
    fn validate(&self) -> Result<(), RegulusError> {
        let cap = match self.kind {
            SpaceKind::Interval => 60,
            SpaceKind::Product => 30,
        };
        if self.depth > cap {
            return Err(RegulusError::InvalidProblem(format!(
                "space depth {} exceeds the supported cap {cap}",
                self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionFamily {
    AbsDistanceToPoint,
    SquaredDistance,
    DistanceToInterval,
    #[serde(rename = "distance-to-line-segment-2d")]
    DistanceToLineSegment2d,
    TreeEmbedding,
    MonotoneFixture,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FunctionConfig {
    pub family: FunctionFamily,
    pub point: Option<String>,
    pub center: Option<String>,
    pub lo: Option<String>,
    pub hi: Option<String>,
    /// Force the literal scan for minnorm instead of the structured solver.
    #[serde(default)]
    pub scan: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModuliConfig {
    pub rho: Option<ModulusConfig>,
    pub phi: Option<ModulusConfig>,
    pub eta: Option<ModulusConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "kebab-case")]
pub enum ModulusConfig {
    #[serde(rename_all = "kebab-case")]
    Affine { u: u32, v: i64 },
    #[serde(rename_all = "kebab-case")]
    Table {
        values: Vec<u32>,
        tail_u: Option<u32>,
        tail_v: Option<i64>,
    },
    /// Parallelogram-law uniqueness modulus for a Hilbert norm over a
    /// convex zero set of diameter at most `d`.
    #[serde(rename_all = "kebab-case")]
    Hilbert { d: u64 },
    /// Brute-force the modulus from a `2^-depth` grid.
    #[serde(rename_all = "kebab-case")]
    Brute { depth: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeKindConfig {
    Full,
    AllOnes,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailConfig {
    All,
    Zeros,
    None,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TreeConfig {
    pub kind: TreeKindConfig,
    /// Cutoff depth of an explicit description.
    pub depth: Option<u32>,
    /// Membership of every string of length <= depth, `0`/`1` characters in
    /// `(length, lexicographic)` order; whitespace ignored.
    pub bitmap: Option<String>,
    pub tail: Option<TailConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FejerSequence {
    Geometric,
    Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FejerConfig {
    pub sequence: FejerSequence,
    pub a: Option<Vec<String>>,
    pub a_tail: Option<String>,
    /// Rows `n = 0..=iterates`; defaults to the table depth.
    pub iterates: Option<u64>,
    /// Cauchy-rate table size `k = 0..=psi-depth`; needs `[modulus.rho]`.
    pub psi_depth: Option<u32>,
    /// Search cap for the brute-forced approximate-solution rate.
    pub rate_max_n: Option<u64>,
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RegulusError> {
        toml::from_str(text).map_err(|e| RegulusError::InvalidProblem(format!("problem file: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Everything a run produces, ready to be written out.
pub struct RunOutput {
    /// The convergence table in the requested format.
    pub table_text: String,
    /// Machine-readable certificate file (always JSON).
    pub cert_json: String,
    /// Cauchy-rate table, produced by fejer runs that configure one.
    pub psi_csv: Option<String>,
    /// Present when verification was requested.
    pub verify: Option<VerifyReport>,
}

fn parse_rat(s: &str, what: &str) -> Result<Rational, RegulusError> {
    s.parse()
        .map_err(|e| RegulusError::InvalidProblem(format!("{what}: {e}")))
}

fn require<'a, T>(opt: &'a Option<T>, what: &str) -> Result<&'a T, RegulusError> {
    opt.as_ref()
        .ok_or_else(|| RegulusError::InvalidProblem(format!("missing {what}")))
}

fn build_plain_modulus(cfg: &ModulusConfig, what: &str) -> Result<Modulus, RegulusError> {
    match cfg {
        ModulusConfig::Affine { u, v } => Ok(Modulus::affine(*u, *v)),
        ModulusConfig::Table {
            values,
            tail_u,
            tail_v,
        } => Ok(Modulus::from_table(
            values.clone(),
            tail_u.unwrap_or(1),
            tail_v.unwrap_or(0),
        )),
        ModulusConfig::Hilbert { .. } => Err(RegulusError::InvalidProblem(format!(
            "{what}: the hilbert form only applies to the uniqueness modulus phi"
        ))),
        ModulusConfig::Brute { .. } => Err(RegulusError::InvalidProblem(format!(
            "{what}: brute-forcing is not available for this modulus"
        ))),
    }
}

/// Exact evaluation and zero set of an interval family, the data the brute
/// modulus and the divergence scan share.
struct IntervalShape {
    eval: Box<dyn Fn(&Rational) -> Rational>,
    zero_set: ZeroSetDesc,
    lipschitz_log2: i32,
}

fn interval_shape(fun: &FunctionConfig) -> Result<IntervalShape, RegulusError> {
    match fun.family {
        FunctionFamily::AbsDistanceToPoint => {
            let p = parse_rat(require(&fun.point, "[function] point")?, "point")?;
            let z = p.clone();
            Ok(IntervalShape {
                eval: Box::new(move |x| (x - &p).abs()),
                zero_set: ZeroSetDesc::Point(z),
                lipschitz_log2: 0,
            })
        }
        FunctionFamily::SquaredDistance => {
            let c = parse_rat(require(&fun.center, "[function] center")?, "center")?;
            let z = c.clone();
            Ok(IntervalShape {
                eval: Box::new(move |x| {
                    let d = x - &c;
                    &d * &d
                }),
                zero_set: ZeroSetDesc::Point(z),
                lipschitz_log2: 1,
            })
        }
        FunctionFamily::DistanceToInterval => {
            let lo = parse_rat(require(&fun.lo, "[function] lo")?, "lo")?;
            let hi = parse_rat(require(&fun.hi, "[function] hi")?, "hi")?;
            if lo > hi {
                return Err(RegulusError::InvalidProblem(
                    "[function] needs lo <= hi".into(),
                ));
            }
            let (zlo, zhi) = (lo.clone(), hi.clone());
            Ok(IntervalShape {
                eval: Box::new(move |x| (&lo - x).max(x - &hi).max(Rational::zero())),
                zero_set: ZeroSetDesc::Interval(zlo, zhi),
                lipschitz_log2: 0,
            })
        }
        _ => Err(RegulusError::InvalidProblem(
            "function family is not an interval family".into(),
        )),
    }
}

/// Represented function for an interval family. The distance-to-interval
/// family goes through the interval-evaluator wrapper (exercising its
/// contract checks); the others are exact constant names directly.
fn interval_function(fun: &FunctionConfig) -> Result<UcFunctionRep, RegulusError> {
    match fun.family {
        FunctionFamily::AbsDistanceToPoint => {
            let p = parse_rat(require(&fun.point, "[function] point")?, "point")?;
            let label = format!("|x - {p}|");
            Ok(UcFunctionRep::from_parts(
                label,
                Modulus::identity(),
                move |i| RealName::constant((interval_value_of_index(i) - &p).abs()),
            ))
        }
        FunctionFamily::SquaredDistance => {
            let c = parse_rat(require(&fun.center, "[function] center")?, "center")?;
            let label = format!("(x - {c})^2");
            Ok(UcFunctionRep::from_parts(
                label,
                Modulus::affine(1, 1),
                move |i| {
                    let d = interval_value_of_index(i) - &c;
                    RealName::constant(&d * &d)
                },
            ))
        }
        FunctionFamily::DistanceToInterval => {
            let lo = parse_rat(require(&fun.lo, "[function] lo")?, "lo")?;
            let hi = parse_rat(require(&fun.hi, "[function] hi")?, "hi")?;
            if lo > hi {
                return Err(RegulusError::InvalidProblem(
                    "[function] needs lo <= hi".into(),
                ));
            }
            let label = format!("dist(x, [{lo},{hi}])");
            let evaluator: IntervalEvaluator = Box::new(move |i, _p| {
                let v = interval_value_of_index(i);
                let d = (&lo - &v).max(&v - &hi).max(Rational::zero());
                (d.clone(), d)
            });
            lipschitz_function(label, evaluator, 0)
        }
        _ => Err(RegulusError::InvalidProblem(
            "function family is not an interval family".into(),
        )),
    }
}

/// `dist((x,y), {x + y = 1})` on the paired product grid, as an exact
/// square-root name.
fn segment_function() -> UcFunctionRep {
    UcFunctionRep::from_parts("dist((x,y), {x+y=1})", Modulus::identity(), |n| {
        let (i, j) = unpair(n);
        let d = interval_value_of_index(i) + interval_value_of_index(j) - Rational::one();
        RealName::sqrt_of_rational(&d * &d / Rational::from_int(2))
    })
}

fn build_tree(cfg: &TreeConfig) -> Result<Arc<BinaryTree>, RegulusError> {
    let tree = match cfg.kind {
        TreeKindConfig::Full => BinaryTree::full(),
        TreeKindConfig::AllOnes => BinaryTree::all_ones(),
        TreeKindConfig::Explicit => {
            let depth = *require(&cfg.depth, "[tree] depth")?;
            let bitmap = require(&cfg.bitmap, "[tree] bitmap")?;
            let tail = match cfg.tail.unwrap_or(TailConfig::All) {
                TailConfig::All => TailRule::AllExtensions,
                TailConfig::Zeros => TailRule::ZeroExtensionsOnly,
                TailConfig::None => TailRule::None,
            };
            BinaryTree::from_bitmap(depth, bitmap, tail)?
        }
    };
    Ok(Arc::new(tree))
}

fn build_fejer_fixture(cfg: &FejerConfig) -> Result<MonotoneSequenceFixture, RegulusError> {
    let family = match cfg.sequence {
        FejerSequence::Geometric => MonotoneFamily::GeometricApproachOne,
        FejerSequence::Table => {
            let entries = require(&cfg.a, "[fejer] a")?;
            let mut a = Vec::with_capacity(entries.len());
            for s in entries {
                a.push(parse_rat(s, "[fejer] a entry")?);
            }
            let tail = parse_rat(require(&cfg.a_tail, "[fejer] a-tail")?, "a-tail")?;
            MonotoneFamily::Table { a, tail }
        }
    };
    MonotoneSequenceFixture::new(family)
}

/// Modulus of regularity for the fejer residual, honoring a brute request
/// with the right grid scan for the family.
fn fejer_rho(
    cfg: &ModulusConfig,
    fix: &MonotoneSequenceFixture,
    n_max: u32,
) -> Result<Modulus, RegulusError> {
    match cfg {
        ModulusConfig::Brute { depth } => match fix.family() {
            MonotoneFamily::GeometricApproachOne => geometric_brute_modulus(*depth, n_max),
            MonotoneFamily::Table { .. } => {
                brute_regularity_modulus(&|x| fix.residual_of(x), &fix.zero_set(), 0, *depth, n_max)
            }
        },
        other => build_plain_modulus(other, "[modulus.rho]"),
    }
}

// ---- table rows -----------------------------------------------------------

#[derive(Debug, Serialize)]
struct ZeroRow {
    k: u32,
    index: u64,
    point: String,
    bound: u64,
    f_approx: String,
    d_approx: Option<String>,
}

#[derive(Debug, Serialize)]
struct MinnormRow {
    k: u32,
    big_k: u32,
    l_bound: u64,
    s_count: u64,
    index: u64,
    point: String,
    norm_approx: String,
}

#[derive(Debug, Serialize)]
struct LeftmostRow {
    k: u32,
    sigma_len: u32,
    bit: u8,
}

#[derive(Debug, Serialize)]
struct FejerRow {
    n: u64,
    x_n: String,
    residual: String,
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn render_json<T: Serialize>(rows: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
    s.push('\n');
    s
}

// ---- the runner -----------------------------------------------------------

/// Runs a parsed problem at table depth `depth` (falling back to the file's
/// own `depth`, then 8) and renders the artifacts.
pub fn run_problem(
    cfg: &ProblemConfig,
    depth: Option<u32>,
    format: OutputFormat,
    verify: bool,
    cap: SearchCap,
) -> Result<RunOutput, RegulusError> {
    let depth = depth.or(cfg.depth).unwrap_or(8);
    match cfg.kind {
        ProblemKind::Zero => run_zero(cfg, depth, format, verify, cap),
        ProblemKind::Minnorm => run_minnorm(cfg, depth, format, verify, cap),
        ProblemKind::Leftmost => run_leftmost(cfg, depth, format, verify),
        ProblemKind::Fejer => run_fejer(cfg, depth, format, verify),
    }
}

fn run_zero(
    cfg: &ProblemConfig,
    depth: u32,
    format: OutputFormat,
    verify: bool,
    cap: SearchCap,
) -> Result<RunOutput, RegulusError> {
    let fun = require(&cfg.function, "[function]")?;
    let rho_cfg = require(&cfg.modulus.rho, "[modulus.rho]")?;

    let (space, f, rho, shape): (
        CompactSpaceRep,
        UcFunctionRep,
        Modulus,
        Option<IntervalShape>,
    ) = if fun.family == FunctionFamily::TreeEmbedding {
        let tree = build_tree(require(&cfg.tree, "[tree]")?)?;
        let (space, f) = embed_tree(Arc::clone(&tree));
        // the configured modulus speaks about the tree; convert it
        let tree_rho = match rho_cfg {
            ModulusConfig::Brute { .. } => brute_tree_modulus(&tree)?,
            other => build_plain_modulus(other, "[modulus.rho]")?,
        };
        (space, f, metric_modulus_from_tree(Arc::new(tree_rho)), None)
    } else {
        let sp = require(&cfg.space, "[space]")?;
        sp.validate()?;
        if sp.kind != SpaceKind::Interval {
            return Err(RegulusError::InvalidProblem(
                "zero finding here runs on the interval space".into(),
            ));
        }
        let space = interval_space(sp.depth);
        let f = interval_function(fun)?;
        let shape = interval_shape(fun)?;
        let rho = match rho_cfg {
            ModulusConfig::Brute { depth: grid } => brute_regularity_modulus(
                shape.eval.as_ref(),
                &shape.zero_set,
                shape.lipschitz_log2,
                *grid,
                depth + 3,
            )?,
            other => build_plain_modulus(other, "[modulus.rho]")?,
        };
        (space, f, rho, Some(shape))
    };

    let seq = find_zero(&space, &f, &rho, cap);
    let mut rows = Vec::new();
    for k in 0..=depth {
        let st = seq.stage(k)?;
        rows.push(ZeroRow {
            k,
            index: st.index,
            point: space.point_label(st.index),
            bound: st.search_bound,
            f_approx: st.f_approx.to_string(),
            d_approx: st.d_approx.as_ref().map(|d| d.to_string()),
        });
    }
    let certs = seq.certificates();

    let verify_report = if verify {
        let mut report = verify_certificates(&space, &f, &rho, &certs);
        if let Some(shape) = &shape {
            let scan_depth = 14;
            let n_max = (depth + 2).min(12);
            match find_modulus_divergence(
                shape.eval.as_ref(),
                &shape.zero_set,
                &rho,
                scan_depth,
                n_max,
            ) {
                None => report.push(
                    0,
                    true,
                    format!("no divergence witness on the 2^-{scan_depth} grid up to n={n_max}"),
                ),
                Some(w) => report.push(
                    w.n,
                    false,
                    format!(
                        "modulus divergence at x={} (|F|={}, dist={}, n={})",
                        w.x, w.f_value, w.dist, w.n
                    ),
                ),
            }
        }
        Some(report)
    } else {
        None
    };

    let table_text = match format {
        OutputFormat::Csv => render_csv(
            "k,index,point,bound,f_approx,d_approx",
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.index.to_string(),
                        r.point.clone(),
                        r.bound.to_string(),
                        r.f_approx.clone(),
                        r.d_approx.clone().unwrap_or_default(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        OutputFormat::Json => render_json(&rows),
    };
    let cert_json = {
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "kind": "zero",
            "function": f.label,
            "depth": depth,
            "stages": certs,
        }))
        .expect("certificates serialize");
        s.push('\n');
        s
    };
    Ok(RunOutput {
        table_text,
        cert_json,
        psi_csv: None,
        verify: verify_report,
    })
}

fn run_minnorm(
    cfg: &ProblemConfig,
    depth: u32,
    format: OutputFormat,
    verify: bool,
    cap: SearchCap,
) -> Result<RunOutput, RegulusError> {
    let fun = require(&cfg.function, "[function]")?;
    let sp = require(&cfg.space, "[space]")?;
    sp.validate()?;
    let rho = match require(&cfg.modulus.rho, "[modulus.rho]")? {
        ModulusConfig::Brute { depth: grid } => {
            let shape = interval_shape(fun)?;
            brute_regularity_modulus(
                shape.eval.as_ref(),
                &shape.zero_set,
                shape.lipschitz_log2,
                *grid,
                depth + 3,
            )?
        }
        other => build_plain_modulus(other, "[modulus.rho]")?,
    };
    let phi = match require(&cfg.modulus.phi, "[modulus.phi]")? {
        ModulusConfig::Hilbert { d } => hilbert_uniqueness_modulus(*d),
        other => build_plain_modulus(other, "[modulus.phi]")?,
    };
    let eta = match &cfg.modulus.eta {
        Some(cfg) => build_plain_modulus(cfg, "[modulus.eta]")?,
        None => Modulus::identity(),
    };

    let (rep, f, structured): (NormedCompactRep, UcFunctionRep, StructuredForm) =
        match (fun.family, sp.kind) {
            (FunctionFamily::DistanceToInterval, SpaceKind::Interval) => {
                let lo = parse_rat(require(&fun.lo, "[function] lo")?, "lo")?;
                let hi = parse_rat(require(&fun.hi, "[function] hi")?, "hi")?;
                let rep =
                    NormedCompactRep::with_norm_to_origin(interval_space(sp.depth), eta, 1, 0);
                (
                    rep,
                    interval_function(fun)?,
                    StructuredForm::IntervalDistance { lo, hi },
                )
            }
            (FunctionFamily::SquaredDistance, SpaceKind::Interval) => {
                let center = parse_rat(require(&fun.center, "[function] center")?, "center")?;
                let rep =
                    NormedCompactRep::with_norm_to_origin(interval_space(sp.depth), eta, 1, 0);
                (
                    rep,
                    interval_function(fun)?,
                    StructuredForm::IntervalSquaredDistance { center },
                )
            }
            (FunctionFamily::DistanceToLineSegment2d, SpaceKind::Product) => {
                let space = product_space(interval_space(sp.depth), interval_space(sp.depth));
                let rep = NormedCompactRep::with_norm_to_origin(space, eta, 2, 0);
                (rep, segment_function(), StructuredForm::AntidiagonalSegment)
            }
            _ => {
                return Err(RegulusError::InvalidProblem(
                    "unsupported function/space combination for minnorm".into(),
                ))
            }
        };
    let strategy = if fun.scan {
        MinNormStrategy::Scan
    } else {
        MinNormStrategy::Structured(structured)
    };

    let mut stages: Vec<MinNormStage> = Vec::new();
    for k in 0..=depth {
        stages.push(find_min_norm_zero(&rep, &f, &rho, &phi, k, &strategy, cap)?);
    }

    let verify_report = if verify {
        Some(verify_min_norm(
            &rep, &f, &rho, &phi, &stages, &strategy, cap,
        ))
    } else {
        None
    };

    let rows: Vec<MinnormRow> = stages
        .iter()
        .map(|st| MinnormRow {
            k: st.k,
            big_k: st.big_k,
            l_bound: st.l_bound,
            s_count: st.admissible_count.min(u64::MAX as u128) as u64,
            index: st.index,
            point: rep.base.point_label(st.index),
            norm_approx: st.norm_approx.to_string(),
        })
        .collect();
    let table_text = match format {
        OutputFormat::Csv => render_csv(
            "k,big_k,l_bound,s_count,index,point,norm_approx",
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.big_k.to_string(),
                        r.l_bound.to_string(),
                        r.s_count.to_string(),
                        r.index.to_string(),
                        r.point.clone(),
                        r.norm_approx.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
        OutputFormat::Json => render_json(&rows),
    };
    let cert_json = {
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "kind": "minnorm",
            "function": f.label,
            "depth": depth,
            "stages": stages,
        }))
        .expect("stages serialize");
        s.push('\n');
        s
    };
    Ok(RunOutput {
        table_text,
        cert_json,
        psi_csv: None,
        verify: verify_report,
    })
}

#[derive(Debug, Serialize)]
struct LeftmostCert {
    k: u32,
    sigma_len: u32,
    bit: u8,
    sigma: String,
}

fn run_leftmost(
    cfg: &ProblemConfig,
    depth: u32,
    format: OutputFormat,
    verify: bool,
) -> Result<RunOutput, RegulusError> {
    let tree = build_tree(require(&cfg.tree, "[tree]")?)?;
    let rho = match require(&cfg.modulus.rho, "[modulus.rho]")? {
        ModulusConfig::Brute { .. } => brute_tree_modulus(&tree)?,
        other => build_plain_modulus(other, "[modulus.rho]")?,
    };

    let mut rows = Vec::new();
    let mut certs = Vec::new();
    for k in 0..=depth {
        let d = rho.eval(k + 1);
        let sigma =
            leftmost_member_at_depth(&tree, d).ok_or(RegulusError::NoBranchAtDepth { depth: d })?;
        let bit = sigma.bits()[k as usize];
        rows.push(LeftmostRow {
            k,
            sigma_len: d,
            bit,
        });
        certs.push(LeftmostCert {
            k,
            sigma_len: d,
            bit,
            sigma: sigma.to_string(),
        });
    }

    let verify_report = if verify {
        let mut report = VerifyReport { rows: Vec::new() };
        match leftmost_path_prefix(&tree, depth + 1) {
            None => report.push(0, false, "tree has no infinite path"),
            Some(truth) => {
                for row in &rows {
                    let want = truth.bits()[row.k as usize];
                    if row.bit == want {
                        report.push(row.k, true, format!("bit {} agrees", row.bit));
                    } else {
                        report.push(
                            row.k,
                            false,
                            format!(
                                "bit {} diverges from the true leftmost path bit {}",
                                row.bit, want
                            ),
                        );
                    }
                }
            }
        }
        Some(report)
    } else {
        None
    };

    let table_text = match format {
        OutputFormat::Csv => render_csv(
            "k,sigma_len,bit",
            &rows
                .iter()
                .map(|r| vec![r.k.to_string(), r.sigma_len.to_string(), r.bit.to_string()])
                .collect::<Vec<_>>(),
        ),
        OutputFormat::Json => render_json(&rows),
    };
    let cert_json = {
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "kind": "leftmost",
            "depth": depth,
            "rows": certs,
        }))
        .expect("rows serialize");
        s.push('\n');
        s
    };
    Ok(RunOutput {
        table_text,
        cert_json,
        psi_csv: None,
        verify: verify_report,
    })
}

fn run_fejer(
    cfg: &ProblemConfig,
    depth: u32,
    format: OutputFormat,
    verify: bool,
) -> Result<RunOutput, RegulusError> {
    let fcfg = require(&cfg.fejer, "[fejer]")?;
    let fix = Arc::new(build_fejer_fixture(fcfg)?);
    let iterates = fcfg.iterates.unwrap_or(depth as u64);

    let mut rows = Vec::new();
    for n in 0..=iterates {
        rows.push(FejerRow {
            n,
            x_n: fix.iterate(n).to_string(),
            residual: fix.residual(n).to_string(),
        });
    }

    // Cauchy rate: psi(k) = r(rho(k+1)) with r brute-forced from the exact
    // iteration. Only built when the file supplies a regularity modulus;
    // without one there is no certified rate to print.
    let mut psi_csv = None;
    let mut psi_rows: Vec<(u32, u64)> = Vec::new();
    let mut rate: Option<ApproxSolutionRate> = None;
    let mut rho: Option<Modulus> = None;
    if let Some(rho_cfg) = &cfg.modulus.rho {
        let kmax = fcfg.psi_depth.unwrap_or(depth.min(8));
        let built = fejer_rho(rho_cfg, &fix, kmax + 1)?;
        let needed = built.eval(kmax + 1);
        let r = ApproxSolutionRate::brute_force(&fix, needed, fcfg.rate_max_n.unwrap_or(1 << 20))?;
        let psi = cauchy_rate(&built, &r, kmax)?;
        psi_rows = (0..=kmax).zip(psi.iter().copied()).collect();
        let mut text = String::from("k,psi_k\n");
        for (k, v) in &psi_rows {
            text.push_str(&format!("{k},{v}\n"));
        }
        psi_csv = Some(text);
        rate = Some(r);
        rho = Some(built);
    }

    let verify_report = if verify {
        let mut report = VerifyReport { rows: Vec::new() };
        match (&rate, &rho) {
            (Some(rate), Some(rho)) => {
                let rep = iteration_rep(Arc::clone(&fix));
                match check_rate(&rep, rate, rate.kmax()) {
                    Ok(()) => report.push(0, true, "approximate-solution rate re-checks"),
                    Err((k, v)) => report.push(
                        k,
                        false,
                        format!("rate fails at k={k}: residual approximant {v}"),
                    ),
                }
                let n_max = psi_rows.last().map(|(k, _)| *k + 1).unwrap_or(8).min(10);
                match find_modulus_divergence(
                    &|x| fix.residual_of(x),
                    &fix.zero_set(),
                    rho,
                    12,
                    n_max,
                ) {
                    None => report.push(
                        0,
                        true,
                        format!("no divergence witness on the 2^-12 grid up to n={n_max}"),
                    ),
                    Some(w) => report.push(
                        w.n,
                        false,
                        format!(
                            "modulus divergence at x={} (|F|={}, dist={}, n={})",
                            w.x, w.f_value, w.dist, w.n
                        ),
                    ),
                }
            }
            _ => report.push(
                0,
                false,
                "verification needs [modulus.rho] to rebuild the rate",
            ),
        }
        Some(report)
    } else {
        None
    };

    let table_text = match format {
        OutputFormat::Csv => render_csv(
            "n,x_n,residual",
            &rows
                .iter()
                .map(|r| vec![r.n.to_string(), r.x_n.clone(), r.residual.clone()])
                .collect::<Vec<_>>(),
        ),
        OutputFormat::Json => render_json(&rows),
    };
    let cert_json = {
        let psi_json: Vec<serde_json::Value> = psi_rows
            .iter()
            .map(|(k, v)| serde_json::json!({"k": k, "psi": v}))
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "kind": "fejer",
            "depth": depth,
            "iterates": iterates,
            "psi": psi_json,
            "rate_values": rate.as_ref().map(|r| (0..=r.kmax()).map(|k| r.r(k)).collect::<Vec<_>>()),
        }))
        .expect("fejer certificate serializes");
        s.push('\n');
        s
    };
    Ok(RunOutput {
        table_text,
        cert_json,
        psi_csv,
        verify: verify_report,
    })
}

/// Stable exit code for an error, shared by the CLI and its tests. Parse
/// failures are the caller's phase and map to 2 there; 6 is verification
/// divergence, also decided by the caller.
pub fn exit_code_for(err: &RegulusError) -> i32 {
    match err {
        RegulusError::InvalidProblem(_) => 2,
        RegulusError::SearchExhausted { .. } | RegulusError::SearchCapExceeded { .. } => 3,
        RegulusError::EmptyAdmissibleSet { .. } => 4,
        RegulusError::NoBranchAtDepth { .. } => 5,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZERO_HALF: &str = r#"
kind = "zero"
depth = 4

[space]
kind = "interval"
depth = 24

[function]
family = "abs-distance-to-point"
point = "1/2"

[modulus.rho]
kind = "affine"
u = 1
v = 0
"#;

    #[test]
    fn zero_problem_runs_and_is_deterministic() {
        let cfg = ProblemConfig::from_toml_str(ZERO_HALF).unwrap();
        let a = run_problem(&cfg, None, OutputFormat::Csv, false, SearchCap::UNLIMITED).unwrap();
        let b = run_problem(&cfg, None, OutputFormat::Csv, false, SearchCap::UNLIMITED).unwrap();
        assert_eq!(a.table_text, b.table_text);
        assert_eq!(a.cert_json, b.cert_json);
        let lines: Vec<&str> = a.table_text.lines().collect();
        assert_eq!(lines.len(), 6); // header + k = 0..=4
        assert_eq!(lines[0], "k,index,point,bound,f_approx,d_approx");
        assert!(lines[1].starts_with("0,2,1/2,"));
        assert!(a.cert_json.contains("\"kind\": \"zero\""));
    }

    #[test]
    fn zero_problem_depth_override_and_json() {
        let cfg = ProblemConfig::from_toml_str(ZERO_HALF).unwrap();
        let out = run_problem(
            &cfg,
            Some(2),
            OutputFormat::Json,
            false,
            SearchCap::UNLIMITED,
        )
        .unwrap();
        let rows: serde_json::Value = serde_json::from_str(&out.table_text).unwrap();
        assert_eq!(rows.as_array().unwrap().len(), 3);
        assert_eq!(rows[0]["point"], "1/2");
    }

    #[test]
    fn zero_verify_flags_an_invalid_modulus() {
        let text = r#"
kind = "zero"
depth = 6

[space]
kind = "interval"
depth = 24

[function]
family = "squared-distance"
center = "1/2"

[modulus.rho]
kind = "affine"
u = 1
v = 0
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        let report = out.verify.unwrap();
        assert!(!report.all_ok());
        let detail: String = report
            .rows
            .iter()
            .filter(|r| !r.ok)
            .map(|r| r.detail.clone())
            .collect();
        assert!(detail.contains("divergence"), "{detail}");
    }

    #[test]
    fn zero_verify_passes_a_valid_modulus() {
        let text = r#"
kind = "zero"
depth = 4

[space]
kind = "interval"
depth = 24

[function]
family = "squared-distance"
center = "1/2"

[modulus.rho]
kind = "affine"
u = 2
v = 1
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        assert!(out.verify.unwrap().all_ok());
    }

    #[test]
    fn minnorm_problem_band() {
        let text = r#"
kind = "minnorm"
depth = 2

[space]
kind = "interval"
depth = 20

[function]
family = "distance-to-interval"
lo = "1/4"
hi = "3/4"

[modulus.rho]
kind = "affine"
u = 1
v = 0

[modulus.phi]
kind = "hilbert"
d = 1
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        assert!(out.verify.unwrap().all_ok());
        let lines: Vec<&str> = out.table_text.lines().collect();
        assert_eq!(lines[0], "k,big_k,l_bound,s_count,index,point,norm_approx");
        assert_eq!(lines.len(), 4);
        // every winner sits within tau of the band's lower edge
        for line in &lines[1..] {
            let norm = line.rsplit(',').next().unwrap();
            let v: Rational = norm.parse().unwrap();
            assert!((v - Rational::new(1, 4)).abs() <= Rational::pow2(-8));
        }
    }

    #[test]
    fn leftmost_full_tree_is_all_zeros() {
        let text = r#"
kind = "leftmost"
depth = 6

[tree]
kind = "full"

[modulus.rho]
kind = "affine"
u = 1
v = 0
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        assert!(out.verify.unwrap().all_ok());
        for line in out.table_text.lines().skip(1) {
            assert!(line.ends_with(",0"));
        }
    }

    #[test]
    fn leftmost_invalid_modulus_is_flagged_by_verify() {
        // members e, 0, 1, 01, 11, 111: the left side dies at depth 3, so
        // the true leftmost path starts with 1, but a depth-1 probe sees "0"
        let text = r#"
kind = "leftmost"
depth = 2

[tree]
kind = "explicit"
depth = 3
bitmap = "1 11 0101 00000001"
tail = "all"

[modulus.rho]
kind = "affine"
u = 1
v = 0
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        let report = out.verify.unwrap();
        assert!(!report.all_ok(), "{:?}", report.rows);
    }

    #[test]
    fn fejer_problem_with_psi() {
        let text = r#"
kind = "fejer"
depth = 6

[fejer]
sequence = "geometric"
iterates = 6
psi-depth = 3

# the residual sits between u^2/6 and 2u^2/3 at gap u, so 2n+2 is valid
[modulus.rho]
kind = "affine"
u = 2
v = 2
"#;
        let cfg = ProblemConfig::from_toml_str(text).unwrap();
        let out = run_problem(&cfg, None, OutputFormat::Csv, true, SearchCap::UNLIMITED).unwrap();
        let report = out.verify.unwrap();
        assert!(report.all_ok(), "{:?}", report.rows);
        let lines: Vec<&str> = out.table_text.lines().collect();
        assert_eq!(lines[0], "n,x_n,residual");
        assert_eq!(lines[1], "0,0,1/3");
        assert_eq!(lines[2], "1,1/3,1/6");
        let psi = out.psi_csv.unwrap();
        assert!(psi.starts_with("k,psi_k\n"));
        assert_eq!(psi.lines().count(), 5);
    }

    #[test]
    fn parse_errors_are_invalid_problem() {
        assert!(matches!(
            ProblemConfig::from_toml_str(""),
            Err(RegulusError::InvalidProblem(_))
        ));
        assert!(matches!(
            ProblemConfig::from_toml_str("kind = \"zero\"\nnonsense = 1\n"),
            Err(RegulusError::InvalidProblem(_))
        ));
    }

    #[test]
    fn csv_quoting_protects_product_points() {
        assert_eq!(csv_field("(1/2,1/2)"), "\"(1/2,1/2)\"");
        assert_eq!(csv_field("1/2"), "1/2");
    }
}
