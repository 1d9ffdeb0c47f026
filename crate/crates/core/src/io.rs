//! Record files, the best-known record store, plain-text interchange and SVG output.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{border_clearance, polygon_vertices, scale_from_unit_inner, Convention, ParamPoint, Point2, PolygonSpec};
use crate::metrics::{compute_metrics, packing_fraction, PackingMetrics, DEFAULT_CONTACT_TOL};
use crate::topology::{charge_ledger, clipped_voronoi, contact_census, outer_polygon};

/// Tolerance on the stored ρ against its recomputation from (σ, n, r).
pub const RHO_CHECK_TOL: f64 = 1e-14;
/// Relative overlap/containment tolerance applied by [`verify`].
pub const VERIFY_TOL: f64 = 1e-9;
/// A stored record is only replaced by one denser by more than this.
pub const REPLACE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub q_interior_sum: i64,
    pub q_border_sum: i64,
    pub q_vertex_sum: i64,
    pub total_q: i64,
    pub border_count: usize,
    pub euler_characteristic: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverProvenance {
    pub seed: Option<u64>,
    pub params_hash: String,
    pub timestamp: String,
    #[serde(default)]
    pub history: Vec<String>,
}

/// On-disk form of a configuration. `r`, `centers` and
/// `container_circumradius` are lengths in `convention`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingRecord {
    pub sigma: u32,
    pub n: usize,
    pub convention: Convention,
    pub r: f64,
    pub container_circumradius: f64,
    pub centers: Vec<[f64; 2]>,
    pub rho: f64,
    pub metrics: Option<PackingMetrics>,
    pub ledger_summary: Option<LedgerSummary>,
    pub solver_provenance: SolverProvenance,
}

/// SHA-256 of the JSON form of any parameter set.
pub fn params_hash<T: Serialize>(params: &T) -> String {
    let json = serde_json::to_vec(params).unwrap_or_default();
    let digest = Sha256::digest(&json);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl PackingRecord {
    pub fn from_configuration(cfg: &Configuration, seed: Option<u64>, params_hash: String) -> Self {
        let k = scale_from_unit_inner(cfg.sigma, cfg.r, cfg.convention);
        let sec = 1.0 / (PI / cfg.sigma as f64).cos();
        let metrics = compute_metrics(cfg, DEFAULT_CONTACT_TOL).ok();
        let ledger_summary = if cfg.n >= 2 {
            clipped_voronoi(cfg)
                .ok()
                .and_then(|d| charge_ledger(&d).ok())
                .map(|l| LedgerSummary {
                    q_interior_sum: l.q_interior_sum,
                    q_border_sum: l.q_border_sum,
                    q_vertex_sum: l.q_vertex_sum,
                    total_q: l.total_q,
                    border_count: l.border_count,
                    euler_characteristic: l.euler_counts.characteristic(),
                })
        } else {
            None
        };
        Self {
            sigma: cfg.sigma,
            n: cfg.n,
            convention: cfg.convention,
            r: cfg.r * k,
            container_circumradius: (1.0 + cfg.r * sec) * k,
            centers: cfg.unit_centers().iter().map(|c| [c.x * k, c.y * k]).collect(),
            rho: cfg.rho(),
            metrics,
            ledger_summary,
            solver_provenance: SolverProvenance {
                seed,
                params_hash,
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                history: cfg.provenance.clone(),
            },
        }
    }

    /// Convention-I radius and the factor mapping record lengths to convention I.
    fn unit_frame(&self) -> Result<(f64, f64)> {
        let sec = 1.0 / (PI / self.sigma as f64).cos();
        let inner = self.container_circumradius - self.r * sec;
        if !(inner > 0.0) || !(self.r > 0.0) {
            return Err(Error::Audit("container smaller than one disk".into()));
        }
        Ok((self.r / inner, 1.0 / inner))
    }

    pub fn to_configuration(&self) -> Result<Configuration> {
        let spec = PolygonSpec::new(self.sigma, self.convention)?;
        if self.centers.len() != self.n {
            return Err(Error::Audit(format!("n = {} but {} centers", self.n, self.centers.len())));
        }
        let (r, k) = self.unit_frame()?;
        let params = self
            .centers
            .iter()
            .map(|c| ParamPoint::from_point(Point2::new(c[0] * k, c[1] * k), self.sigma))
            .collect();
        let mut cfg = Configuration::with_radius(spec, params, r);
        cfg.provenance = self.solver_provenance.history.clone();
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn write_record(path: &Path, record: &PackingRecord) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, record.to_json()?)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<PackingRecord> {
    PackingRecord::from_json(&fs::read_to_string(path)?)
}

/// Audits a record: cardinality, stored ρ, overlap and containment.
pub fn verify(record: &PackingRecord) -> Result<()> {
    if record.centers.len() != record.n {
        return Err(Error::Audit(format!(
            "n = {} but {} centers",
            record.n,
            record.centers.len()
        )));
    }
    let (r, k) = record.unit_frame()?;
    let rho = packing_fraction(record.n, r, record.sigma);
    if (rho - record.rho).abs() > RHO_CHECK_TOL {
        return Err(Error::Audit(format!("stored rho {} but (sigma, n, r) give {rho}", record.rho)));
    }
    let centers: Vec<Point2> = record
        .centers
        .iter()
        .map(|c| Point2::new(c[0] * k, c[1] * k))
        .collect();
    for (i, c) in centers.iter().enumerate() {
        if !c.is_finite() || border_clearance(*c, record.sigma, 1.0) < -VERIFY_TOL * r {
            return Err(Error::Audit(format!("center {i} lies outside the container")));
        }
    }
    let limit = 2.0 * r * (1.0 - VERIFY_TOL);
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            if centers[i].dist(centers[j]) < limit {
                return Err(Error::Audit(format!("disks {i} and {j} overlap")));
            }
        }
    }
    Ok(())
}

/// What [`RecordStore::submit`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoreOutcome {
    Inserted,
    Replaced { previous: f64 },
    Kept { stored: f64 },
}

/// Best record per (σ, n) under `root/records/sigma_<σ>/N_<n>.json`.
#[derive(Debug, Clone)]
pub struct RecordStore {
    root: PathBuf,
    lock_timeout: Duration,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

impl RecordStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("records"))?;
        Ok(Self {
            root,
            lock_timeout: Duration::from_secs(30),
        })
    }

    pub fn with_lock_timeout(mut self, timeout: Duration) -> Self {
        self.lock_timeout = timeout;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, sigma: u32, n: usize) -> PathBuf {
        self.root
            .join("records")
            .join(format!("sigma_{sigma}"))
            .join(format!("N_{n}.json"))
    }

    pub fn load(&self, sigma: u32, n: usize) -> Result<Option<PackingRecord>> {
        let path = self.path_for(sigma, n);
        if !path.exists() {
            return Ok(None);
        }
        read_record(&path).map(Some)
    }

    fn lock(&self, path: &Path) -> Result<LockGuard> {
        let lock = path.with_extension("json.lock");
        let start = Instant::now();
        loop {
            match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(LockGuard(lock));
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > self.lock_timeout {
                        return Err(Error::StoreConflict(format!("lock {} is held", lock.display())));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Stores `record` if no record exists for its (σ, n) or it beats the
    /// stored ρ by more than [`REPLACE_MARGIN`]. Records failing
    /// [`verify`] are refused.
    pub fn submit(&self, record: &PackingRecord) -> Result<StoreOutcome> {
        verify(record)?;
        let path = self.path_for(record.sigma, record.n);
        fs::create_dir_all(path.parent().expect("record path has a parent"))?;
        let _guard = self.lock(&path)?;
        let outcome = match self.load(record.sigma, record.n)? {
            Some(old) if record.rho <= old.rho + REPLACE_MARGIN => return Ok(StoreOutcome::Kept { stored: old.rho }),
            Some(old) => StoreOutcome::Replaced { previous: old.rho },
            None => StoreOutcome::Inserted,
        };
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, record.to_json()?)?;
        fs::rename(&tmp, &path)?;
        Ok(outcome)
    }

    /// Best ρ per (σ, n) currently stored.
    pub fn index(&self) -> Result<BTreeMap<(u32, usize), f64>> {
        let mut out = BTreeMap::new();
        for rec in self.records()? {
            out.insert((rec.sigma, rec.n), rec.rho);
        }
        Ok(out)
    }

    pub fn records(&self) -> Result<Vec<PackingRecord>> {
        let mut out = Vec::new();
        for dir in fs::read_dir(self.root.join("records"))? {
            let dir = dir?.path();
            if !dir.is_dir() {
                continue;
            }
            for file in fs::read_dir(&dir)? {
                let file = file?.path();
                if file.extension().is_some_and(|e| e == "json") {
                    out.push(read_record(&file)?);
                }
            }
        }
        out.sort_by_key(|r| (r.sigma, r.n));
        Ok(out)
    }
}

/// One `index x y` line per disk, centers in the configuration's convention.
pub fn to_plain_text(cfg: &Configuration) -> String {
    let mut s = String::new();
    for (i, c) in cfg.centers().iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e}", i + 1, c.x, c.y);
    }
    s
}

/// Reads `index x y` lines given in convention I; the radius becomes half
/// the minimal distance.
pub fn from_plain_text(text: &str, sigma: u32) -> Result<Configuration> {
    let spec = PolygonSpec::new(sigma, Convention::I)?;
    let mut centers = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected `index x y`", line_no + 1)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
        };
        centers.push(Point2::new(num(fields[1])?, num(fields[2])?));
    }
    Configuration::from_unit_centers(spec, &centers)
}

/// Colors indexed by contact or side count; index 9 stands for 9 and more.
pub const PALETTE: [&str; 10] = [
    "#ffffff", "#1f77b4", "#aec7e8", "#2ca02c", "#ffbb78", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn palette_color(count: usize) -> &'static str {
    PALETTE[count.min(PALETTE.len() - 1)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub size: f64,
    pub voronoi: bool,
    /// Relative contact tolerance for the disk coloring.
    pub contact_tol: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            size: 600.0,
            voronoi: false,
            contact_tol: 1e-6,
        }
    }
}

fn points_attr(points: &[Point2], map: &dyn Fn(Point2) -> (f64, f64)) -> String {
    points
        .iter()
        .map(|p| {
            let (x, y) = map(*p);
            format!("{x:.4},{y:.4}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Container, disks colored by contact count and, optionally, the clipped
/// Voronoi cells colored by side count.
pub fn render_svg(cfg: &Configuration, opts: &RenderOptions) -> String {
    let container = outer_polygon(cfg.sigma, cfg.r);
    let extent = container.iter().map(|p| p.norm()).fold(0.0, f64::max) * 1.02;
    let half = 0.5 * opts.size;
    let k = half / extent;
    let map = move |p: Point2| (half + p.x * k, half - p.y * k);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        opts.size
    );
    let _ = writeln!(
        svg,
        r#"  <polygon points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        points_attr(&container, &map)
    );
    let _ = writeln!(
        svg,
        r#"  <polygon points="{}" fill="none" stroke="gray" stroke-width="0.5" stroke-dasharray="3,3"/>"#,
        points_attr(&polygon_vertices(cfg.sigma, 1.0), &map)
    );
    if opts.voronoi && cfg.n >= 2 {
        if let Ok(diagram) = clipped_voronoi(cfg) {
            let _ = writeln!(svg, r#"  <g class="voronoi" stroke="black" stroke-width="0.5" fill-opacity="0.6">"#);
            for cell in &diagram.cells {
                let _ = writeln!(
                    svg,
                    r#"    <polygon points="{}" fill="{}" data-sides="{}"/>"#,
                    points_attr(&cell.polygon, &map),
                    palette_color(cell.side_count),
                    cell.side_count
                );
            }
            let _ = writeln!(svg, "  </g>");
        }
    }
    let census = contact_census(cfg, opts.contact_tol);
    let _ = writeln!(svg, r#"  <g class="disks" stroke="black" stroke-width="0.8">"#);
    for (c, count) in cfg.unit_centers().iter().zip(&census) {
        let (x, y) = map(*c);
        let total = count.total();
        let _ = writeln!(
            svg,
            r#"    <circle cx="{x:.4}" cy="{y:.4}" r="{:.4}" fill="{}" data-contacts="{total}"/>"#,
            cfg.r * k,
            palette_color(total)
        );
    }
    let _ = writeln!(svg, "  </g>");
    svg.push_str("</svg>\n");
    svg
}
