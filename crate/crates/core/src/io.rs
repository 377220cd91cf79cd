//! Problem files, analysis dispatch and report emission.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::deformation::{self, DeformationBasis};
use crate::error::{Error, Result};
use crate::hodge::{self, EndFrobenius, HodgeSplitting, StableMode};
use crate::isocrystal::{end_decompose, slope_split, EndDecomposition, FIsocrystal, Projector, SlopeData, Q};
use crate::lattice::{Lattice, SemilinearMap};
use crate::matrix::Mat;
use crate::series::TruncatedSeries;
use crate::sign_groups::{self, SlopePairSet};
use crate::strata::{self, GroupData};
use crate::witt::{WittContext, Zq};

pub const ANALYSES: [&str; 12] = [
    "axioms",
    "connection",
    "correction",
    "decompose",
    "dual",
    "ominus",
    "polarized",
    "slices",
    "slopes",
    "strata",
    "traverso",
    "trivialize",
];

/// Witt scalar: an integer or the coefficient array `[a_0, ..., a_{n-1}]`
/// in the powers of the residue-field generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Coeffs(Vec<i64>),
}

/// Dense rows, or `{"sparse": [[row, col, value], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense(Vec<Vec<Scalar>>),
    Sparse { sparse: Vec<(usize, usize, Scalar)> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HodgeColumns {
    pub f1: MatrixSpec,
    pub f0: MatrixSpec,
}

/// Splitting given by standard basis indices for `F¹` (rest span `F⁰`), or
/// by explicit column matrices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HodgeSpec {
    Indices(Vec<usize>),
    Columns(HodgeColumns),
}

/// `t = p^{-denom} matrix`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LieElementSpec {
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub denom: u32,
}

fn is_zero_i32(x: &i32) -> bool {
    *x == 0
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub p: u64,
    pub n: usize,
    pub precision: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    pub rank: usize,
    pub phi: MatrixSpec,
    /// Frobenius is `p^{-phi_denom} phi`.
    #[serde(default, skip_serializing_if = "is_zero_i32")]
    pub phi_denom: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hodge_f1: Option<HodgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symplectic_gram: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lie_g: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_basis: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lie_element: Option<LieElementSpec>,
    /// Pairs `(i, j)`, `i < j`, of indices into the increasing list of distinct slopes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation_basis: Option<Vec<MatrixSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<Scalar>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_points: Option<Vec<Vec<Scalar>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyses: Option<Vec<String>>,
}

fn parse_err(field: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::Parse { field: field.into(), detail: detail.into() }
}

pub fn parse_str(text: &str) -> Result<ProblemSpec> {
    let spec: ProblemSpec = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| format!("line {} column {}", e.line(), e.column()));
        parse_err(field, msg)
    })?;
    validate_shapes(&spec)?;
    Ok(spec)
}

pub fn parse(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(path.display().to_string(), e.to_string()))?;
    parse_str(&text)
}

/// Structured form of a spec; `parse_str` inverts it.
pub fn emit_spec(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(spec).expect("serializable") + "\n"
}

fn dims(m: &MatrixSpec) -> Option<(usize, usize)> {
    match m {
        MatrixSpec::Dense(rows) => {
            let c = rows.first().map_or(0, |r| r.len());
            rows.iter().all(|r| r.len() == c).then_some((rows.len(), c))
        }
        MatrixSpec::Sparse { .. } => None,
    }
}

fn check_square(field: &str, m: &MatrixSpec, r: usize) -> Result<()> {
    match m {
        MatrixSpec::Dense(rows) => {
            if rows.len() != r || rows.iter().any(|row| row.len() != r) {
                let shape = dims(m).map_or("ragged".to_string(), |(a, b)| format!("{a}×{b}"));
                return Err(parse_err(field, format!("expected a {r}×{r} matrix, got {shape}")));
            }
        }
        MatrixSpec::Sparse { sparse } => {
            if let Some(&(i, j, _)) = sparse.iter().find(|(i, j, _)| *i >= r || *j >= r) {
                return Err(parse_err(field, format!("entry ({i}, {j}) outside a {r}×{r} matrix")));
            }
        }
    }
    Ok(())
}

fn validate_shapes(spec: &ProblemSpec) -> Result<()> {
    let r = spec.rank;
    if r == 0 {
        return Err(parse_err("rank", "must be positive"));
    }
    check_square("phi", &spec.phi, r)?;
    if let Some(g) = &spec.symplectic_gram {
        check_square("symplectic_gram", g, r)?;
    }
    for (name, list) in [("lie_g", &spec.lie_g), ("e_basis", &spec.e_basis), ("deformation_basis", &spec.deformation_basis)] {
        for (i, m) in list.iter().flatten().enumerate() {
            check_square(&format!("{name}[{i}]"), m, r)?;
        }
    }
    if let Some(t) = &spec.lie_element {
        check_square("lie_element.matrix", &t.matrix, r)?;
    }
    match &spec.hodge_f1 {
        Some(HodgeSpec::Indices(ix)) => {
            if let Some(&i) = ix.iter().find(|&&i| i >= r) {
                return Err(parse_err("hodge_f1", format!("index {i} out of range for rank {r}")));
            }
        }
        Some(HodgeSpec::Columns(c)) => {
            let (a, b) = (dims(&c.f1), dims(&c.f0));
            match (a, b) {
                (Some((ra, ca)), Some((rb, cb))) if ra == r && rb == r && ca + cb == r => {}
                _ => return Err(parse_err("hodge_f1", format!("F¹ and F⁰ columns must form {r} columns of length {r}"))),
            }
        }
        None => {}
    }
    for (name, pts) in [("points", &spec.points), ("correction_points", &spec.correction_points)] {
        let lens: Vec<usize> = pts.iter().flatten().map(|p| p.len()).collect();
        if lens.windows(2).any(|w| w[0] != w[1]) {
            return Err(parse_err(name, "points must all have the same number of coordinates"));
        }
    }
    if let Some(list) = &spec.analyses {
        if let Some(a) = list.iter().find(|a| !ANALYSES.contains(&a.as_str())) {
            return Err(parse_err("analyses", format!("unknown analysis {a:?}")));
        }
    }
    Ok(())
}

fn scalar(ctx: &WittContext, field: &str, s: &Scalar) -> Result<Zq> {
    match s {
        Scalar::Int(v) => Ok(ctx.from_i64(*v)),
        Scalar::Coeffs(c) => ctx.from_coeffs(c).map_err(|e| parse_err(field, e.to_string())),
    }
}

fn matrix_of(ctx: &WittContext, field: &str, m: &MatrixSpec, rows: usize, cols: usize) -> Result<Mat> {
    let mut out = Mat::zeros(rows, cols);
    match m {
        MatrixSpec::Dense(rs) => {
            for (i, row) in rs.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out[(i, j)] = scalar(ctx, &format!("{field}[{i}][{j}]"), v)?;
                }
            }
        }
        MatrixSpec::Sparse { sparse } => {
            for (i, j, v) in sparse {
                out[(*i, *j)] = scalar(ctx, &format!("{field}[{i}][{j}]"), v)?;
            }
        }
    }
    Ok(out)
}

fn scalar_json(ctx: &WittContext, a: Zq) -> Value {
    let c = ctx.signed_coeffs(a);
    if c.iter().skip(1).all(|&x| x == 0) {
        json!(c.first().copied().unwrap_or(0))
    } else {
        json!(c)
    }
}

fn matrix_json(ctx: &WittContext, m: &Mat) -> Value {
    Value::Array((0..m.rows).map(|i| Value::Array(m.row(i).iter().map(|&a| scalar_json(ctx, a)).collect())).collect())
}

fn series_json(ctx: &WittContext, s: &TruncatedSeries) -> Value {
    Value::Array(s.terms().map(|(e, &c)| json!({"exp": e, "coeff": scalar_json(ctx, c)})).collect())
}

fn q_str(q: Q) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// FNV-1a of the canonical spec serialization.
pub fn fingerprint(spec: &ProblemSpec) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in serde_json::to_string(spec).expect("serializable").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub precision: Option<u32>,
    pub degree: Option<u32>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    Mismatch = 1,
    InputError = 2,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        self as i32
    }

    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Mismatch => "mismatch",
            Status::InputError => "input-error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub name: String,
    pub fingerprint: String,
    pub context: Value,
    pub analyses: BTreeMap<String, Value>,
    pub status: Status,
}

impl Report {
    pub fn to_value(&self) -> Value {
        json!({
            "name": self.name,
            "fingerprint": self.fingerprint,
            "context": self.context,
            "analyses": self.analyses,
            "status": self.status.label(),
        })
    }
}

/// Everything derived once per problem.
pub struct Problem {
    pub ctx: WittContext,
    pub x: FIsocrystal,
    pub fr: EndFrobenius,
    pub slopes: SlopeData,
    pub decomp: EndDecomposition,
    pub split: HodgeSplitting,
    pub o_minus: Lattice,
    pub e: Option<Lattice>,
    /// Square-zero lattice used by the deformation analyses.
    pub target: Lattice,
    pub target_source: &'static str,
    pub psi: Option<Mat>,
    pub lie_g: Option<Lattice>,
    pub t: Option<Projector>,
    pub y: Option<SlopePairSet>,
    pub defo: Option<Vec<Mat>>,
    pub points: Option<Vec<Vec<Zq>>>,
    pub correction_points: Option<Vec<Vec<Zq>>>,
    pub degree: u32,
    pub seed: u64,
}

fn endo_list(ctx: &WittContext, field: &str, ms: &[MatrixSpec], r: usize) -> Result<Vec<Mat>> {
    ms.iter().enumerate().map(|(i, m)| matrix_of(ctx, &format!("{field}[{i}]"), m, r, r)).collect()
}

fn endo_lattice(ctx: &WittContext, xs: &[Mat], r: usize) -> Result<Lattice> {
    let cols: Vec<Vec<Zq>> = xs.iter().map(|x| x.vec_cols()).collect();
    Lattice::from_basis(ctx, Mat::from_cols(r * r, &cols))
}

fn point_list(ctx: &WittContext, field: &str, pts: &[Vec<Scalar>]) -> Result<Vec<Vec<Zq>>> {
    pts.iter()
        .enumerate()
        .map(|(i, p)| p.iter().enumerate().map(|(j, s)| scalar(ctx, &format!("{field}[{i}][{j}]"), s)).collect())
        .collect()
}

impl Problem {
    pub fn new(spec: &ProblemSpec, opts: &Options) -> Result<Problem> {
        validate_shapes(spec)?;
        let prec = opts.precision.unwrap_or(spec.precision);
        let ctx = WittContext::new(spec.p, spec.n, prec)?;
        let r = spec.rank;
        let a = matrix_of(&ctx, "phi", &spec.phi, r, r)?;
        let x = FIsocrystal::from_map(&ctx, SemilinearMap::new(&ctx, a, 1, spec.phi_denom))?;
        if !x.is_dieudonne(&ctx)? {
            return Err(parse_err("phi", "pM ⊆ φ(M) ⊆ M fails"));
        }
        let fr = EndFrobenius::new(&ctx, &x)?;
        let slopes = slope_split(&ctx, &x)?;
        let decomp = end_decompose(&ctx, &x, &slopes)?;
        let split = match &spec.hodge_f1 {
            None => HodgeSplitting::default_for(&ctx, &x)?,
            Some(HodgeSpec::Indices(ix)) => {
                let id = Mat::identity(&ctx, r);
                let rest: Vec<usize> = (0..r).filter(|i| !ix.contains(i)).collect();
                HodgeSplitting::from_columns(&ctx, &x, &id.select_cols(ix), &id.select_cols(&rest))?
            }
            Some(HodgeSpec::Columns(c)) => {
                let (_, c1) = dims(&c.f1).unwrap();
                let f1 = matrix_of(&ctx, "hodge_f1.f1", &c.f1, r, c1)?;
                let f0 = matrix_of(&ctx, "hodge_f1.f0", &c.f0, r, r - c1)?;
                HodgeSplitting::from_columns(&ctx, &x, &f1, &f0)?
            }
        };
        let o_minus = hodge::largest_sub_dieudonne(&ctx, &fr, &decomp.v_minus, StableMode::Minus)?;
        let e = match &spec.e_basis {
            Some(ms) => Some(endo_lattice(&ctx, &endo_list(&ctx, "e_basis", ms, r)?, r)?),
            None => None,
        };
        let psi = match &spec.symplectic_gram {
            Some(m) => Some(matrix_of(&ctx, "symplectic_gram", m, r, r)?),
            None => None,
        };
        let lie_g = match &spec.lie_g {
            Some(ms) => Some(endo_lattice(&ctx, &endo_list(&ctx, "lie_g", ms, r)?, r)?),
            None => None,
        };
        let t = match &spec.lie_element {
            Some(t) => Some(Projector { mat: matrix_of(&ctx, "lie_element.matrix", &t.matrix, r, r)?, denom: t.denom }),
            None => None,
        };
        let m = slopes.slopes.len();
        let y = match &spec.slope_pairs {
            Some(ps) => Some(SlopePairSet::new(m, ps).map_err(|e| parse_err("slope_pairs", e.to_string()))?),
            None => None,
        };
        let defo = match &spec.deformation_basis {
            Some(ms) => Some(endo_list(&ctx, "deformation_basis", ms, r)?),
            None => None,
        };
        let points = spec.points.as_ref().map(|p| point_list(&ctx, "points", p)).transpose()?;
        let correction_points =
            spec.correction_points.as_ref().map(|p| point_list(&ctx, "correction_points", p)).transpose()?;
        let (target, target_source) = match &e {
            Some(e) => (e.clone(), "e_basis"),
            None if hodge::square_zero_witness(&ctx, &o_minus, r)?.is_none() => (o_minus.clone(), "o_minus"),
            None => {
                let yz = match &y {
                    Some(y) if y.is_square_zero() => y.clone(),
                    _ => SlopePairSet::slice_chain_member(m, m / 2),
                };
                (sign_groups::o_minus(&ctx, &fr, &decomp, &yz)?, "slice")
            }
        };
        let degree = opts.degree.or(spec.degree).unwrap_or_else(|| deformation::default_degree(&ctx));
        Ok(Problem {
            ctx,
            x,
            fr,
            slopes,
            decomp,
            split,
            o_minus,
            e,
            target,
            target_source,
            psi,
            lie_g,
            t,
            y,
            defo,
            points,
            correction_points,
            degree,
            seed: opts.seed,
        })
    }

    fn slope_pairs(&self) -> Vec<(Q, usize)> {
        self.slopes.slopes.iter().copied().zip(self.slopes.mults.iter().copied()).collect()
    }

    fn target(&self) -> &Lattice {
        &self.target
    }

    fn deformation_basis(&self) -> Result<DeformationBasis> {
        match &self.defo {
            Some(v) => DeformationBasis::new(&self.ctx, &self.split, v.clone()),
            None => DeformationBasis::from_lattice(&self.ctx, &self.split, self.target()),
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15))
    }

    fn lie_for(&self, e: &Lattice) -> Result<Option<(Projector, &'static str)>> {
        match hodge::lie_element(&self.ctx, &self.fr, e, &self.slopes, self.t.as_ref()) {
            Ok(t) => Ok(Some((t, if self.t.is_some() { "supplied" } else { "constructed" }))),
            Err(Error::NoAutoConstruction(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn run_analysis(&self, name: &str) -> Result<(Value, bool)> {
        match name {
            "slopes" => self.an_slopes(),
            "decompose" => self.an_decompose(),
            "ominus" => self.an_ominus(),
            "axioms" => self.an_axioms(),
            "dual" => self.an_dual(),
            "slices" => self.an_slices(),
            "connection" => self.an_connection(),
            "trivialize" => self.an_trivialize(),
            "correction" => self.an_correction(),
            "strata" => self.an_strata(),
            "traverso" => self.an_traverso(),
            "polarized" => self.an_polarized(),
            _ => Err(parse_err("analyses", format!("unknown analysis {name:?}"))),
        }
    }

    fn an_slopes(&self) -> Result<(Value, bool)> {
        let (d, c) = self.x.dim_codim(&self.ctx)?;
        let list: Vec<Value> =
            self.slope_pairs().iter().map(|&(s, m)| json!({"slope": q_str(s), "multiplicity": m})).collect();
        Ok((json!({"slopes": list, "dimension": d, "codimension": c, "split": self.slopes.split}), true))
    }

    fn an_decompose(&self) -> Result<(Value, bool)> {
        let d = &self.decomp;
        let blocks: Vec<Value> =
            d.blocks.iter().map(|(i, j, l)| json!({"from": i, "to": j, "rank": l.rank()})).collect();
        let total = d.v_plus.rank() + d.v_zero.rank() + d.v_minus.rank();
        let r = self.x.rank();
        Ok((
            json!({"v_plus": d.v_plus.rank(), "v_zero": d.v_zero.rank(), "v_minus": d.v_minus.rank(), "blocks": blocks}),
            total == r * r,
        ))
    }

    fn lattice_summary(&self, l: &Lattice) -> Result<(Value, bool)> {
        let (nu, c) = hodge::tangent_vs_codim(&self.ctx, &self.fr, &self.split, l)?;
        Ok((json!({"rank": l.rank(), "loss": l.loss(&self.ctx), "nu_dim": nu, "codim": c}), nu == c))
    }

    fn an_ominus(&self) -> Result<(Value, bool)> {
        let (o, ok) = self.lattice_summary(&self.o_minus)?;
        let mut out = json!({"o_minus": o});
        let mut pass = ok;
        if let Some(e) = &self.e {
            let (v, ok) = self.lattice_summary(e)?;
            let (g0, _, _) = self.split.graded_pieces(&self.ctx)?;
            out["e"] = v;
            out["e"]["f0_rank"] = json!(e.intersect(&self.ctx, &g0)?.rank());
            pass &= ok;
        }
        Ok((out, pass))
    }

    fn axioms_json(&self, e: &Lattice) -> Result<(Value, bool)> {
        let rep = hodge::check_axioms(&self.ctx, &self.fr, e, Some(&self.split), &self.decomp)?;
        let one = |a: &hodge::AxiomResult| json!({"pass": a.pass, "witness": a.witness});
        let mut v = json!({
            "i": one(&rep.axiom_i),
            "ii": one(&rep.axiom_ii),
            "iii": rep.axiom_iii.as_ref().map(one),
            "iv": rep.axiom_iv.as_ref().map(one),
            "rank_f0": rep.rank_f0,
            "rank_fm1": rep.rank_fm1,
            "all_pass": rep.all_pass(),
        });
        let mut lie_ok = true;
        v["lie_element"] = match self.lie_for(e) {
            Ok(Some((_, how))) => json!(how),
            Ok(None) => json!("unavailable"),
            Err(err) => {
                lie_ok = false;
                json!(format!("invalid: {err}"))
            }
        };
        Ok((v, rep.all_pass() && lie_ok))
    }

    fn an_axioms(&self) -> Result<(Value, bool)> {
        // O_- need not be square-zero; only maximality is a certificate for it
        let (o, _) = self.axioms_json(&self.o_minus)?;
        let mut pass = o["i"]["pass"] == json!(true);
        let mut out = json!({"o_minus": o});
        let (v, ok) = self.axioms_json(&self.target)?;
        out["target"] = v;
        out["target_source"] = json!(self.target_source);
        out["target_rank"] = json!(self.target.rank());
        pass &= ok;
        let mut rng = self.rng(1);
        let r = self.x.rank();
        let failures = (0..50)
            .filter(|_| {
                let x = Mat::random(&self.ctx, r, r, &mut rng);
                !hodge::star_property_check(&self.ctx, &self.fr, &self.split, &x)
            })
            .count();
        out["star_property_failures"] = json!(failures);
        Ok((out, pass && failures == 0))
    }

    fn dual_sets(&self) -> Vec<SlopePairSet> {
        let m = self.slopes.slopes.len();
        let mut sets = vec![self.y.clone().unwrap_or_else(|| SlopePairSet::all(m))];
        for i in 0..m {
            for j in i + 1..m {
                let s = SlopePairSet::singleton(i, j);
                if !sets.contains(&s) {
                    sets.push(s);
                }
            }
        }
        sets
    }

    fn an_dual(&self) -> Result<(Value, bool)> {
        let mut pass = true;
        let mut items = Vec::new();
        for y in self.dual_sets() {
            let set = sign_groups::sign_modules(&self.ctx, &self.fr, &self.decomp, &y)?;
            let ok = set.inclusions && set.pairing_perfect && set.max_loss <= 4;
            pass &= ok;
            items.push(json!({
                "pairs": y.pairs,
                "o_plus": set.o_plus.rank(),
                "o_minus": set.o_minus.rank(),
                "o_plus_minus": set.o_plus_minus.rank(),
                "o_minus_plus": set.o_minus_plus.rank(),
                "inclusions": set.inclusions,
                "pairing_perfect": set.pairing_perfect,
                "loss": set.max_loss,
            }));
        }
        let mut rng = self.rng(2);
        let inv = sign_groups::frobenius_invariance_check(&self.ctx, &self.fr, 10, &mut rng);
        Ok((json!({"sets": items, "trace_invariance": inv}), pass && inv))
    }

    fn an_slices(&self) -> Result<(Value, bool)> {
        let m = self.slopes.slopes.len();
        let y = self.y.clone().unwrap_or_else(|| SlopePairSet::all(m));
        let sp = Some(&self.split);
        let rep = sign_groups::slice_report(&self.ctx, &self.fr, &self.decomp, &self.slopes, sp, &y)?;
        let table = sign_groups::quasi_factor_codims(&self.ctx, &self.fr, &self.decomp, &self.slopes, sp, true)?;
        let subs_ok = rep.subslices.iter().all(|s| s.restriction_holds);
        let entries: Vec<Value> = table
            .entries
            .iter()
            .map(|e| json!({"pair": e.pair, "closed_form": e.closed_form, "lattice": e.lattice}))
            .collect();
        let codim_ok = rep.codim as i64 == rep.closed_form && rep.nu_dim.map_or(true, |d| d == rep.codim);
        let pass = (!rep.square_zero || rep.products_vanish) && subs_ok && codim_ok;
        Ok((
            json!({
                "pairs": rep.pairs.pairs,
                "square_zero": rep.square_zero,
                "o_minus_rank": rep.o_minus.rank(),
                "products_vanish": rep.products_vanish,
                "nu_dim": rep.nu_dim,
                "codim": rep.codim,
                "closed_form": rep.closed_form,
                "subslices_checked": rep.subslices.len(),
                "subslice_restrictions_hold": subs_ok,
                "quasi_factors": entries,
                "quasi_factor_total": table.total_closed_form,
            }),
            pass,
        ))
    }

    fn an_connection(&self) -> Result<(Value, bool)> {
        let ctx = &self.ctx;
        let e = self.target();
        let b = self.deformation_basis()?;
        let form = deformation::solve_connection(ctx, &self.fr, e, &b, self.degree)?;
        let hz = deformation::verify_horizontality(ctx, &self.x, &form, &b, &self.split)?;
        let ks = deformation::kodaira_spencer_image(ctx, &form, &b, &self.split);
        let w: Vec<Value> = form.w.iter().map(|row| Value::Array(row.iter().map(|s| series_json(ctx, s)).collect())).collect();
        let mut out = json!({
            "variables": form.vars,
            "degree": form.dmax,
            "e_rank": form.e_basis.len(),
            "w": w,
            "horizontality": {"vanishes": hz.vanishes, "verified_degree": hz.verified_degree, "residual_valuations": hz.residual_valuations},
            "kodaira_spencer": {"dim": ks.dim, "nu_dim": ks.nu_dim, "matches": ks.matches},
        });
        let mut pass = hz.vanishes && ks.matches;
        if let Some((t, _)) = self.lie_for(e)? {
            let tl = deformation::induced_connection_tilde(ctx, &form, &t)?;
            out["tilde"] = json!({"e_part_zero": tl.e_part_zero, "t_part_in_e": tl.t_part_in_e});
            pass &= tl.e_part_zero && tl.t_part_in_e;
        }
        Ok((out, pass))
    }

    fn an_trivialize(&self) -> Result<(Value, bool)> {
        let ctx = &self.ctx;
        let b = self.deformation_basis()?;
        let pts = match &self.points {
            Some(p) => p.clone(),
            None => {
                let mut rng = self.rng(3);
                (0..20).map(|_| (0..b.len()).map(|_| ctx.random_residue(&mut rng)).collect()).collect()
            }
        };
        let mut items = Vec::new();
        let mut pass = true;
        let mut max_loss = 0;
        for pt in &pts {
            let tr = deformation::trivialize_at_point(ctx, &self.x, &self.fr, self.target(), &b, pt)?;
            pass &= tr.certified;
            max_loss = max_loss.max(tr.loss);
            items.push(json!({
                "point": pt.iter().map(|&z| scalar_json(ctx, z)).collect::<Vec<_>>(),
                "steps": tr.steps,
                "loss": tr.loss,
                "certified": tr.certified,
            }));
        }
        Ok((json!({"points": items, "max_loss": max_loss, "all_certified": pass}), pass))
    }

    fn an_correction(&self) -> Result<(Value, bool)> {
        let ctx = &self.ctx;
        let b = self.deformation_basis()?;
        let form = deformation::solve_connection(ctx, &self.fr, self.target(), &b, self.degree)?;
        let pts = self.correction_points.clone().unwrap_or_else(|| vec![vec![ctx.from_u64(ctx.p()); b.len()]]);
        let mut items = Vec::new();
        let mut pass = true;
        for z in &pts {
            let g = deformation::correction_factor(ctx, &form, z)?;
            pass &= g.unit_mod_p && g.in_pe;
            items.push(json!({
                "point": z.iter().map(|&v| scalar_json(ctx, v)).collect::<Vec<_>>(),
                "precision": g.prec,
                "terms": g.terms,
                "unit_mod_p": g.unit_mod_p,
                "in_pe": g.in_pe,
                "g": matrix_json(ctx, &g.g),
            }));
        }
        Ok((json!({"points": items}), pass))
    }

    fn strata_json(&self, gd: &GroupData) -> Result<(Value, strata::StrataReport)> {
        let rep = strata::strata_dims(&self.ctx, gd, &self.fr, &self.decomp, &self.split)?;
        Ok((
            json!({
                "lie_rank": gd.dim(),
                "n_g": rep.n_g,
                "c_minus": rep.c_minus,
                "c_minus_g": rep.c_minus_g,
                "tangent_dim": rep.tangent_dim,
                "v_minus_g_rank": rep.v_minus_g_rank,
                "o_minus_g_rank": rep.o_minus_g_rank,
                "fact_a": rep.fact_a,
                "fact_b": rep.fact_b,
                "tangent_bound_holds": rep.tangent_bound_holds,
            }),
            rep,
        ))
    }

    fn an_strata(&self) -> Result<(Value, bool)> {
        let r = self.x.rank();
        let (full, rep) = self.strata_json(&GroupData::full_gl(&self.ctx, r))?;
        let mut pass = rep.tangent_bound_holds && rep.c_minus_g == rep.c_minus && rep.tangent_dim == rep.c_minus;
        let mut out = json!({"full_gl": full});
        if let Some(psi) = &self.psi {
            let (v, rep) = self.strata_json(&GroupData::symplectic(&self.ctx, psi.clone())?)?;
            out["symplectic"] = v;
            pass &= rep.tangent_bound_holds;
        }
        if let Some(l) = &self.lie_g {
            let (v, rep) = self.strata_json(&GroupData::custom(&self.ctx, r, l.clone())?)?;
            out["custom"] = v;
            pass &= rep.tangent_bound_holds;
        }
        Ok((out, pass))
    }

    fn an_traverso(&self) -> Result<(Value, bool)> {
        let rep = strata::traverso(&self.ctx, &self.fr, &self.decomp, &self.slopes, &self.split)?;
        let sl = self.slope_pairs();
        let ident = strata::traverso_closed_form(&sl) == strata::codimension_form(&sl);
        Ok((
            json!({"lattice_side": rep.lattice_side, "closed_form": rep.closed_form, "codimension_identity": ident}),
            ident,
        ))
    }

    fn an_polarized(&self) -> Result<(Value, bool)> {
        let Some(psi) = &self.psi else {
            return Ok((json!({"skipped": "no symplectic form"}), true));
        };
        let rep = strata::polarized_dim(&self.ctx, &self.x, &self.fr, &self.decomp, &self.slopes, &self.split, psi)?;
        Ok((
            json!({
                "lattice_side": rep.lattice_side,
                "closed_form": rep.closed_form,
                "c_minus": rep.c_minus,
                "manin_symmetric": true,
                "tangent_dim": rep.strata.tangent_dim,
            }),
            true,
        ))
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidContext(_) => "InvalidContext",
        Error::PrecisionExhausted { .. } => "PrecisionExhausted",
        Error::SingularMap(_) => "SingularMap",
        Error::InclusionViolated(_) => "InclusionViolated",
        Error::Shape(_) => "Shape",
        Error::NonConvergence { .. } => "NonConvergence",
        Error::FieldTooSmall(_) => "FieldTooSmall",
        Error::HypothesisViolated(_) => "HypothesisViolated",
        Error::SplittingInvalid(_) => "SplittingInvalid",
        Error::NoAutoConstruction(_) => "NoAutoConstruction",
        Error::ValidationFailed(_) => "ValidationFailed",
        Error::DualityMismatch(_) => "DualityMismatch",
        Error::VerificationMismatch(_) => "VerificationMismatch",
        Error::CertificateInvalid(_) => "CertificateInvalid",
        Error::SlopeSymmetryViolated(_) => "SlopeSymmetryViolated",
        Error::WrongCharacteristic => "WrongCharacteristic",
        Error::NonTermination(_) => "NonTermination",
        Error::Parse { .. } => "ParseError",
    }
}

fn error_json(op: &str, fp: &str, e: &Error) -> Value {
    json!({"error": {"op": op, "kind": error_kind(e), "message": e.to_string(), "input": fp}})
}

fn status_of(e: &Error) -> Status {
    if e.is_input_error() {
        Status::InputError
    } else {
        Status::Mismatch
    }
}

/// Runs the named analyses (all of them when `analyses` is empty).
pub fn run(spec: &ProblemSpec, analyses: &[String], opts: &Options) -> Report {
    let fp = fingerprint(spec);
    let prec = opts.precision.unwrap_or(spec.precision);
    let mut context = json!({"p": spec.p, "n": spec.n, "precision": prec, "rank": spec.rank});
    let mut list: Vec<String> = if analyses.is_empty() {
        spec.analyses.clone().unwrap_or_else(|| ANALYSES.iter().map(|s| s.to_string()).collect())
    } else {
        analyses.to_vec()
    };
    list.sort();
    list.dedup();
    let mut out = BTreeMap::new();
    let mut status = Status::Pass;
    match Problem::new(spec, opts) {
        Err(e) => {
            status = status_of(&e);
            out.insert("setup".to_string(), error_json("setup", &fp, &e));
        }
        Ok(pb) => {
            context["degree"] = json!(pb.degree);
            for a in &list {
                let v = match pb.run_analysis(a) {
                    Ok((mut v, pass)) => {
                        v["pass"] = json!(pass);
                        if !pass {
                            status = status.max(Status::Mismatch);
                        }
                        v
                    }
                    Err(e) => {
                        status = status.max(status_of(&e));
                        error_json(a, &fp, &e)
                    }
                };
                out.insert(a.clone(), v);
            }
        }
    }
    Report { name: spec.name.clone(), fingerprint: fp, context, analyses: out, status }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Structured,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(xs) if xs.iter().any(|x| x.is_object()) => {
            for (i, x) in xs.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        _ => out.push(format!("{prefix} = {v}")),
    }
}

pub fn emit(reports: &[Report], format: Format) -> String {
    match format {
        Format::Structured => {
            let v = if reports.len() == 1 {
                reports[0].to_value()
            } else {
                json!({"reports": reports.iter().map(Report::to_value).collect::<Vec<_>>()})
            };
            serde_json::to_string_pretty(&v).expect("serializable") + "\n"
        }
        Format::Text => {
            let mut lines = Vec::new();
            for r in reports {
                lines.push(format!("# {} [{}] {}", r.name, r.fingerprint, r.status.label()));
                flatten("", &json!({"context": r.context, "analyses": r.analyses}), &mut lines);
            }
            lines.join("\n") + "\n"
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDINARY: &str = r#"{"name": "t", "p": 2, "n": 1, "precision": 20, "rank": 2, "phi": [[1, 0], [0, 2]]}"#;

    #[test]
    fn round_trip() {
        let s = parse_str(ORDINARY).unwrap();
        assert_eq!(parse_str(&emit_spec(&s)).unwrap(), s);
    }

    #[test]
    fn non_square_phi_names_field() {
        let bad = ORDINARY.replace("[[1, 0], [0, 2]]", "[[1, 0, 0], [0, 2]]");
        match parse_str(&bad) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "phi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ordinary_report() {
        let s = parse_str(ORDINARY).unwrap();
        let rep = run(&s, &["slopes".into(), "traverso".into()], &Options::default());
        assert_eq!(rep.status, Status::Pass);
        assert_eq!(rep.analyses["traverso"]["closed_form"], json!(1));
        let again = run(&s, &["slopes".into(), "traverso".into()], &Options::default());
        assert_eq!(emit(&[rep], Format::Structured), emit(&[again], Format::Structured));
    }
}
