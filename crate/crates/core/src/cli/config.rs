//! Flat `key = value` experiment files.
//!
//! `#` starts a comment, lists are comma separated, and relative paths are
//! taken from the directory of the config file.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::deflation::ApChoice;
use crate::error::{Error, Result};
use crate::krylov::RitzTrace;
use crate::physics::DEFAULT_JUMP_THRESHOLD;
use crate::testbed::BoundarySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Gmres,
    Rdgmres,
    Pdgmres,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gmres => "gmres",
            Method::Rdgmres => "rdgmres",
            Method::Pdgmres => "pdgmres",
        }
    }

    pub const ALL: [Method; 3] = [Method::Gmres, Method::Rdgmres, Method::Pdgmres];
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected gmres, rdgmres or pdgmres)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Sandwich { sigma: f64 },
    Alternating { layers: usize, eps: f64 },
    Bo { top: f64, bottom: f64 },
    Sagd,
    Homogeneous { k: f64 },
    /// `(z range, value)` per layer.
    Layered { layers: Vec<(Range<usize>, f64)> },
    FieldFile { path: PathBuf },
    /// Pre-assembled system.
    Files { matrix: PathBuf, rhs: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Corner,
    Bo,
    Sagd,
    Wells(Vec<(usize, usize, usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub grid: Option<[usize; 3]>,
    pub spacing: Option<[f64; 3]>,
    pub bc: Option<BoundarySpec>,
    pub scaling: Option<bool>,
    pub sources: Option<SourceSpec>,
    /// Permeabilities for partitioning a pre-assembled system.
    pub field_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSpec {
    Subdomain { boxes: [usize; 3] },
    Levelset { threshold: f64 },
    SubdomainLevelset { boxes: [usize; 3], threshold: f64 },
    Manual { z_ranges: Vec<Range<usize>> },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeflationSpec {
    pub partition: PartitionSpec,
    /// Keep the remainder label of manual layers as a deflation vector.
    pub include_remainder: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    Identity,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// Uniform in `[-1, 1)` from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    pub m: usize,
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub method: Method,
    pub tol: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    pub precond: PrecondKind,
    pub ap: ApChoice,
    pub x0: InitialGuess,
    pub ritz_trace: RitzTrace,
    params: BTreeMap<Method, MethodParams>,
}

impl SolverSpec {
    pub fn params(&self, method: Method) -> &MethodParams {
        &self.params[&method]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub convergence_csv: Option<PathBuf>,
    pub spectrum_csv: Option<PathBuf>,
    pub ritz_csv: Option<PathBuf>,
    pub partition_file: Option<PathBuf>,
    pub bench_csv: Option<PathBuf>,
    /// `compare` writes `<stem>.<method>.csv`.
    pub output_stem: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub deflation: Option<DeflationSpec>,
    pub methods: Vec<Method>,
    pub output: OutputSpec,
    pub spectrum_cutoff: f64,
    pub bench_repeats: usize,
    pub seed: u64,
}

pub const DEFAULT_RESTART: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_SPECTRUM_CUTOFF: f64 = 1e-3;

struct Entry {
    value: String,
    line: usize,
}

/// Parsed lines not yet consumed by the typed reader.
struct Raw {
    entries: BTreeMap<String, Entry>,
    base: PathBuf,
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

impl Raw {
    fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = no + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(cfg_err(line, format!("expected `key = value`, got {content:?}")));
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(cfg_err(line, "empty key"));
            }
            if v.is_empty() {
                return Err(cfg_err(line, format!("empty value for {k}")));
            }
            if let Some(prev) = entries.get(&k) {
                let prev: &Entry = prev;
                return Err(cfg_err(line, format!("{k} already set on line {}", prev.line)));
            }
            entries.insert(k, Entry { value: v, line });
        }
        Ok(Raw {
            entries,
            base: base.to_path_buf(),
        })
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn parsed<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<(T, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(|v| Some((v, e.line)))
                .map_err(|_| cfg_err(e.line, format!("{key}: expected {what}, got {:?}", e.value))),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        let v = self.parsed::<f64>(key, "a number")?;
        if let Some((x, line)) = v {
            if !x.is_finite() {
                return Err(cfg_err(line, format!("{key} must be finite")));
            }
        }
        Ok(v.map(|(x, _)| x))
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>> {
        let line = self.line_of(key);
        let v = self.f64(key)?;
        if let Some(x) = v {
            if x <= 0.0 {
                return Err(cfg_err(line, format!("{key} must be positive, got {x}")));
            }
        }
        Ok(v)
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.parsed::<usize>(key, "a non-negative integer")?.map(|(v, _)| v))
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        Ok(self.parsed::<bool>(key, "true or false")?.map(|(v, _)| v))
    }

    fn string(&mut self, key: &str) -> Option<(String, usize)> {
        self.take(key).map(|e| (e.value, e.line))
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.take(key).map(|e| self.base.join(e.value))
    }

    fn triple<T: FromStr + Copy>(&mut self, key: &str, what: &str) -> Result<Option<[T; 3]>> {
        let Some(e) = self.take(key) else { return Ok(None) };
        let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
        let err = || cfg_err(e.line, format!("{key}: expected three {what} separated by commas, got {:?}", e.value));
        if parts.len() != 3 {
            return Err(err());
        }
        let mut out = Vec::with_capacity(3);
        for p in parts {
            out.push(p.parse::<T>().map_err(|_| err())?);
        }
        Ok(Some([out[0], out[1], out[2]]))
    }

    fn finish(self) -> Result<()> {
        match self.entries.iter().min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(cfg_err(e.line, format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_range(s: &str) -> Option<Range<usize>> {
    let (a, b) = s.split_once(':')?;
    Some(a.trim().parse().ok()?..b.trim().parse().ok()?)
}

fn parse_problem(raw: &mut Raw) -> Result<ProblemSpec> {
    let Some((name, line)) = raw.string("problem") else {
        return Err(cfg_err(0, "missing required key `problem`"));
    };
    let grid_line = raw.line_of("grid");
    let grid = raw.triple::<usize>("grid", "integers")?;
    let spacing = raw.triple::<f64>("spacing", "numbers")?;
    let field_file = raw.path("field_file");
    let kind = match name.as_str() {
        "sandwich" => ProblemKind::Sandwich {
            sigma: raw.positive("sigma")?.unwrap_or(1e6),
        },
        "alternating" => {
            let layers = raw.usize("layers")?.unwrap_or(1);
            if layers == 0 {
                return Err(cfg_err(line, "alternating problem needs layers >= 1"));
            }
            ProblemKind::Alternating {
                layers,
                eps: raw.positive("eps")?.unwrap_or(1e-6),
            }
        }
        "bo" => ProblemKind::Bo {
            top: raw.positive("bo.top")?.unwrap_or(100.0),
            bottom: raw.positive("bo.bottom")?.unwrap_or(1.0),
        },
        "sagd" => ProblemKind::Sagd,
        "homogeneous" => ProblemKind::Homogeneous {
            k: raw.positive("k")?.unwrap_or(1.0),
        },
        "layered" => {
            let Some((spec, l)) = raw.string("layers") else {
                return Err(cfg_err(line, "layered problem needs `layers = z0:z1:value, ...`"));
            };
            let mut layers = vec![];
            for item in spec.split(',') {
                let item = item.trim();
                let parsed = item.rsplit_once(':').and_then(|(r, v)| Some((parse_range(r)?, v.trim().parse::<f64>().ok()?)));
                match parsed {
                    Some(x) => layers.push(x),
                    None => return Err(cfg_err(l, format!("layers: expected z0:z1:value, got {item:?}"))),
                }
            }
            ProblemKind::Layered { layers }
        }
        "field" => match field_file.clone() {
            Some(path) => ProblemKind::FieldFile { path },
            None => return Err(cfg_err(line, "problem = field needs `field_file`")),
        },
        "files" => {
            let (Some(matrix), Some(rhs)) = (raw.path("matrix_file"), raw.path("rhs_file")) else {
                return Err(cfg_err(line, "problem = files needs `matrix_file` and `rhs_file`"));
            };
            ProblemKind::Files { matrix, rhs }
        }
        other => {
            return Err(cfg_err(
                line,
                format!("unknown problem {other:?} (expected sandwich, alternating, bo, sagd, homogeneous, layered, field or files)"),
            ))
        }
    };
    let preset = matches!(
        kind,
        ProblemKind::Sandwich { .. } | ProblemKind::Alternating { .. } | ProblemKind::Bo { .. } | ProblemKind::Sagd
    );
    let needs_grid = matches!(kind, ProblemKind::Homogeneous { .. } | ProblemKind::Layered { .. } | ProblemKind::FieldFile { .. });
    if preset && grid.is_some() {
        return Err(cfg_err(grid_line, format!("problem {name} has a fixed grid")));
    }
    if needs_grid && grid.is_none() {
        return Err(cfg_err(line, format!("problem {name} needs `grid = nx, ny, nz`")));
    }
    if let Some(g) = grid {
        if g.contains(&0) {
            return Err(cfg_err(grid_line, "grid dimensions must be positive"));
        }
    }

    let bc = match raw.string("bc") {
        None => None,
        Some((v, l)) => Some(match v.as_str() {
            "top_dirichlet" => BoundarySpec::TopDirichlet,
            "neumann" => BoundarySpec::NeumannAll,
            _ => return Err(cfg_err(l, format!("bc: expected top_dirichlet or neumann, got {v:?}"))),
        }),
    };
    let scaling_line = raw.line_of("scaling");
    let scaling = raw.bool("scaling")?;
    let sources = match raw.string("sources") {
        None => None,
        Some((v, l)) => Some(parse_sources(&v, l)?),
    };
    if matches!(kind, ProblemKind::Files { .. }) {
        let line = [scaling_line, raw.line_of("bc")].into_iter().max().unwrap_or(line);
        if bc.is_some() || scaling.is_some() || sources.is_some() {
            return Err(cfg_err(line, "bc, scaling and sources do not apply to problem = files"));
        }
    }
    Ok(ProblemSpec {
        kind,
        grid,
        spacing,
        bc,
        scaling,
        sources,
        field_file,
    })
}

fn parse_sources(v: &str, line: usize) -> Result<SourceSpec> {
    match v {
        "corner" => return Ok(SourceSpec::Corner),
        "bo" => return Ok(SourceSpec::Bo),
        "sagd" => return Ok(SourceSpec::Sagd),
        _ => {}
    }
    let mut wells = vec![];
    for item in v.split(',') {
        let tok: Vec<&str> = item.split_whitespace().collect();
        let bad = || cfg_err(line, format!("sources: expected `ix iy iz rate` entries, got {:?}", item.trim()));
        if tok.len() != 4 {
            return Err(bad());
        }
        wells.push((
            tok[0].parse().map_err(|_| bad())?,
            tok[1].parse().map_err(|_| bad())?,
            tok[2].parse().map_err(|_| bad())?,
            tok[3].parse().map_err(|_| bad())?,
        ));
    }
    Ok(SourceSpec::Wells(wells))
}

fn parse_deflation(raw: &mut Raw) -> Result<Option<DeflationSpec>> {
    let Some((kind, line)) = raw.string("partition") else {
        for k in ["boxes", "jump_threshold", "z_ranges", "partition_in", "include_remainder"] {
            if raw.entries.contains_key(k) {
                return Err(cfg_err(raw.line_of(k), format!("{k} needs a `partition` kind")));
            }
        }
        return Ok(None);
    };
    let boxes_line = raw.line_of("boxes");
    let boxes = raw.triple::<usize>("boxes", "integers")?;
    let thr_line = raw.line_of("jump_threshold");
    let threshold = raw.positive("jump_threshold")?;
    let need_boxes = || {
        boxes.ok_or_else(|| cfg_err(line, format!("partition = {kind} needs `boxes = px, py, pz`")))
    };
    let partition = match kind.as_str() {
        "subdomain" => PartitionSpec::Subdomain { boxes: need_boxes()? },
        "levelset" => PartitionSpec::Levelset {
            threshold: threshold.unwrap_or(DEFAULT_JUMP_THRESHOLD),
        },
        "subdomain_levelset" => PartitionSpec::SubdomainLevelset {
            boxes: need_boxes()?,
            threshold: threshold.unwrap_or(DEFAULT_JUMP_THRESHOLD),
        },
        "manual" => {
            let Some((v, l)) = raw.string("z_ranges") else {
                return Err(cfg_err(line, "partition = manual needs `z_ranges = z0:z1, ...`"));
            };
            let z_ranges = v
                .split(',')
                .map(|s| parse_range(s.trim()).ok_or_else(|| cfg_err(l, format!("z_ranges: expected z0:z1, got {:?}", s.trim()))))
                .collect::<Result<Vec<_>>>()?;
            PartitionSpec::Manual { z_ranges }
        }
        "file" => match raw.path("partition_in") {
            Some(path) => PartitionSpec::File { path },
            None => return Err(cfg_err(line, "partition = file needs `partition_in`")),
        },
        other => {
            return Err(cfg_err(
                line,
                format!("unknown partition {other:?} (expected subdomain, levelset, subdomain_levelset, manual or file)"),
            ))
        }
    };
    if boxes.is_some() && !matches!(partition, PartitionSpec::Subdomain { .. } | PartitionSpec::SubdomainLevelset { .. }) {
        return Err(cfg_err(boxes_line, format!("boxes does not apply to partition = {kind}")));
    }
    if threshold.is_some() && !matches!(partition, PartitionSpec::Levelset { .. } | PartitionSpec::SubdomainLevelset { .. }) {
        return Err(cfg_err(thr_line, format!("jump_threshold does not apply to partition = {kind}")));
    }
    Ok(Some(DeflationSpec {
        partition,
        include_remainder: raw.bool("include_remainder")?.unwrap_or(false),
    }))
}

fn parse_solver(raw: &mut Raw) -> Result<(SolverSpec, Vec<Method>)> {
    let method = match raw.string("method") {
        None => Method::Gmres,
        Some((v, l)) => v.parse().map_err(|e| cfg_err(l, e))?,
    };
    let methods = match raw.string("methods") {
        None => vec![method],
        Some((v, l)) => {
            let ms = v
                .split(',')
                .map(|s| s.trim().parse::<Method>().map_err(|e| cfg_err(l, e)))
                .collect::<Result<Vec<_>>>()?;
            if ms.is_empty() {
                return Err(cfg_err(l, "methods list is empty"));
            }
            ms
        }
    };
    let m = raw.usize("m")?;
    let d = raw.usize("d")?;
    let mut params = BTreeMap::new();
    for meth in Method::ALL {
        let key_m = format!("{}.m", meth.name());
        let key_d = format!("{}.d", meth.name());
        let pm = raw.usize(&key_m)?.or(m).unwrap_or(DEFAULT_RESTART);
        let pd_line = raw.line_of(&key_d);
        let pd = raw.usize(&key_d)?;
        if pd.is_some() && meth != Method::Rdgmres {
            return Err(cfg_err(pd_line, format!("{key_d}: d of {} comes from the partition", meth.name())));
        }
        params.insert(meth, MethodParams { m: pm, d: pd.or(d) });
    }
    let tol_line = raw.line_of("tol");
    let tol = raw.positive("tol")?.unwrap_or(DEFAULT_TOL);
    if tol >= 1.0 {
        return Err(cfg_err(tol_line, format!("tol must be below 1, got {tol}")));
    }
    let max_iters = raw.usize("max_iters")?.unwrap_or(DEFAULT_MAX_ITERS);
    let min_iters = raw.usize("min_iters")?.unwrap_or(0);
    let precond = match raw.string("precond") {
        None => PrecondKind::Jacobi,
        Some((v, l)) => match v.as_str() {
            "jacobi" => PrecondKind::Jacobi,
            "identity" | "none" => PrecondKind::Identity,
            _ => return Err(cfg_err(l, format!("precond: expected jacobi or identity, got {v:?}"))),
        },
    };
    let ap = match raw.string("ap") {
        None => ApChoice::A,
        Some((v, l)) => match v.as_str() {
            "a" | "A" => ApChoice::A,
            "aminv" | "AMinv" => ApChoice::AMinv,
            _ => return Err(cfg_err(l, format!("ap: expected a or aminv, got {v:?}"))),
        },
    };
    let x0 = match raw.string("x0") {
        None => InitialGuess::Zero,
        Some((v, l)) => match v.as_str() {
            "zero" => InitialGuess::Zero,
            "random" => InitialGuess::Random,
            _ => return Err(cfg_err(l, format!("x0: expected zero or random, got {v:?}"))),
        },
    };
    let ritz_trace = match raw.string("ritz_trace") {
        None => RitzTrace::Off,
        Some((v, l)) => match v.as_str() {
            "off" => RitzTrace::Off,
            "cycle" => RitzTrace::CycleEnd,
            "iteration" => RitzTrace::EveryIteration,
            _ => return Err(cfg_err(l, format!("ritz_trace: expected off, cycle or iteration, got {v:?}"))),
        },
    };
    Ok((
        SolverSpec {
            method,
            tol,
            max_iters,
            min_iters,
            precond,
            ap,
            x0,
            ritz_trace,
            params,
        },
        methods,
    ))
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut raw = Raw::parse(text, base)?;
        let method_line = raw.line_of("method").max(raw.line_of("methods"));
        let problem = parse_problem(&mut raw)?;
        let (solver, methods) = parse_solver(&mut raw)?;
        let deflation = parse_deflation(&mut raw)?;
        let output = OutputSpec {
            convergence_csv: raw.path("convergence_csv"),
            spectrum_csv: raw.path("spectrum_csv"),
            ritz_csv: raw.path("ritz_csv"),
            partition_file: raw.path("partition_file"),
            bench_csv: raw.path("bench_csv"),
            output_stem: raw.path("output_stem"),
        };
        let cutoff_line = raw.line_of("spectrum_cutoff");
        let spectrum_cutoff = raw.f64("spectrum_cutoff")?.unwrap_or(DEFAULT_SPECTRUM_CUTOFF);
        if spectrum_cutoff < 0.0 {
            return Err(cfg_err(cutoff_line, "spectrum_cutoff must be non-negative"));
        }
        let repeats_line = raw.line_of("bench_repeats");
        let bench_repeats = raw.usize("bench_repeats")?.unwrap_or(5);
        if bench_repeats < 3 {
            return Err(cfg_err(repeats_line, "bench_repeats must be at least 3"));
        }
        let seed = raw.parsed::<u64>("seed", "a non-negative integer")?.map_or(0, |(v, _)| v);
        raw.finish()?;

        let cfg = ExperimentConfig {
            problem,
            solver,
            deflation,
            methods,
            output,
            spectrum_cutoff,
            bench_repeats,
            seed,
        };
        cfg.validate(method_line)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn validate(&self, line: usize) -> Result<()> {
        for &meth in &self.methods {
            let p = self.solver.params(meth);
            if p.m == 0 {
                return Err(cfg_err(line, format!("{}: m must be at least 1", meth.name())));
            }
            match meth {
                Method::Rdgmres => match p.d {
                    None | Some(0) => return Err(cfg_err(line, "rdgmres needs d >= 1")),
                    Some(d) if d > p.m => {
                        return Err(cfg_err(line, format!("rdgmres needs m >= d, got m = {} and d = {d}", p.m)))
                    }
                    _ => {}
                },
                Method::Pdgmres if self.deflation.is_none() => {
                    return Err(cfg_err(line, "pdgmres needs a deflation spec (`partition = ...`)"))
                }
                _ => {}
            }
        }
        if self.solver.min_iters > self.solver.max_iters {
            return Err(cfg_err(0, "min_iters exceeds max_iters"));
        }
        Ok(())
    }
}
