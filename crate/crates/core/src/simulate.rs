//! Exact simulation of the sign-biased family `N_θ` on a finite window, and
//! event-file ingestion.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::rng::Streams;

/// Immigrant rate `ν`, branching ratio `m`, sign bias `θ`, and offspring kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub m: f64,
    pub theta: f64,
    pub kernel: Kernel,
}

impl ModelParams {
    pub fn new(nu: f64, m: f64, theta: f64, kernel: Kernel) -> Result<Self> {
        let p = Self {
            nu,
            m,
            theta,
            kernel,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "immigrant rate nu must be positive, got {}",
                self.nu
            )));
        }
        if !(self.m > 0.0 && self.m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "branching ratio m must lie in (0, 1), got {}",
                self.m
            )));
        }
        if !(self.theta.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sign bias theta must lie in [-1, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// Total intensity `λ = ν/(1−m)`.
    pub fn lambda(&self) -> f64 {
        self.nu / (1.0 - self.m)
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    pub fn with_kernel(&self, kernel: Kernel) -> Self {
        Self {
            kernel,
            ..self.clone()
        }
    }
}

/// A rooted cluster. `times[0] = 0` is the root; `parent[i]` indexes the
/// parent of point `i` (`None` for the root). `sign` records the reflection
/// already applied to `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub times: Vec<f64>,
    pub parent: Vec<Option<usize>>,
    pub sign: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.times.len()
    }
}

/// Runtime guards for cluster generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterCaps {
    pub size: usize,
    pub generations: usize,
}

impl Default for ClusterCaps {
    fn default() -> Self {
        Self {
            size: 10_000_000,
            generations: 10_000,
        }
    }
}

/// Breadth-first Galton–Watson cluster with Poisson(`m`) offspring and
/// kernel displacements.
pub fn sample_cluster<R: Rng + ?Sized>(
    m: f64,
    kernel: &Kernel,
    rng: &mut R,
    caps: ClusterCaps,
) -> Result<Cluster> {
    let offspring = Poisson::new(m)
        .map_err(|e| Error::InvalidParameter(format!("offspring mean {m}: {e}")))?;
    let mut times = vec![0.0];
    let mut parent = vec![None];
    let mut generation = vec![0usize];
    let mut i = 0;
    while i < times.len() {
        let n = offspring.sample(rng) as usize;
        if n > 0 {
            if generation[i] + 1 > caps.generations {
                return Err(Error::GenerationCapExceeded {
                    cap: caps.generations,
                });
            }
            if times.len() + n > caps.size {
                return Err(Error::ClusterSizeCapExceeded { cap: caps.size });
            }
            for _ in 0..n {
                let t = times[i] + kernel.sample(rng)?;
                times.push(t);
                parent.push(Some(i));
                generation.push(generation[i] + 1);
            }
        }
        i += 1;
    }
    Ok(Cluster {
        times,
        parent,
        sign: 1.0,
    })
}

/// Reflects every time by `s ∈ {−1, +1}`; the tree is unchanged.
pub fn flip_cluster(c: &Cluster, s: f64) -> Cluster {
    assert!(s == 1.0 || s == -1.0, "sign must be ±1, got {s}");
    Cluster {
        times: c.times.iter().map(|t| s * t).collect(),
        parent: c.parent.clone(),
        sign: c.sign * s,
    }
}

/// Draws `S = +1` with probability `(1+θ)/2`.
pub fn sample_sign<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < 0.5 * (1.0 + theta) {
        1.0
    } else {
        -1.0
    }
}

/// Options for [`simulate_window`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Per-point leakage tolerance used to size the padding.
    pub pad_tol: f64,
    pub caps: ClusterCaps,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            pad_tol: 1e-6,
            caps: ClusterCaps::default(),
        }
    }
}

/// Padding `P` around `[0, T]`: displacement quantile times `⌈3/(1−m)⌉`.
pub fn padding(p: &ModelParams, pad_tol: f64) -> f64 {
    let generations = (3.0 / (1.0 - p.m)).ceil();
    p.kernel.abs_quantile(pad_tol) * generations
}

/// A cluster placed at its immigrant time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedCluster {
    pub immigrant: f64,
    pub cluster: Cluster,
}

/// Immigrants on the padded window with their signed clusters. Stream 0 of
/// `streams` draws the immigrants; cluster `j` uses stream `j + 1`, which
/// first draws the sign and then the tree. For a fixed seed the trees are
/// therefore identical across `θ`, and only the signs change.
pub fn simulate_clusters(
    p: &ModelParams,
    t_end: f64,
    streams: &Streams,
    opts: &SimOptions,
) -> Result<Vec<PlacedCluster>> {
    p.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "window length must be positive, got {t_end}"
        )));
    }
    let pad = padding(p, opts.pad_tol);
    let span = t_end + 2.0 * pad;
    let mut rng = streams.rng(0);
    let count = Poisson::new(p.nu * span)
        .map_err(|e| Error::InvalidParameter(format!("immigrant count: {e}")))?
        .sample(&mut rng) as usize;
    let mut immigrants: Vec<f64> = (0..count)
        .map(|_| -pad + span * rng.random::<f64>())
        .collect();
    immigrants.sort_by(f64::total_cmp);
    immigrants
        .into_par_iter()
        .enumerate()
        .map(|(j, x)| {
            let mut r = streams.rng(j as u64 + 1);
            let s = sample_sign(p.theta, &mut r);
            let c = sample_cluster(p.m, &p.kernel, &mut r, opts.caps)?;
            Ok(PlacedCluster {
                immigrant: x,
                cluster: if s < 0.0 { flip_cluster(&c, s) } else { c },
            })
        })
        .collect()
}

/// Where an [`EventSeries`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Simulated { seed: u64, params: ModelParams },
    Ingested { path: String },
    Derived { note: String },
}

/// Sorted event times on `[0, window_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub window_end: f64,
    pub provenance: Provenance,
}

impl EventSeries {
    /// Sorts `times`; every time must lie in `[0, window_end]`.
    pub fn new(mut times: Vec<f64>, window_end: f64, provenance: Provenance) -> Result<Self> {
        times.sort_by(f64::total_cmp);
        if let (Some(&lo), Some(&hi)) = (times.first(), times.last()) {
            if lo < 0.0 || hi > window_end {
                return Err(Error::InvalidParameter(format!(
                    "event times must lie in [0, {window_end}], found range [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            times,
            window_end,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The reflected series `x ↦ T − x`.
    pub fn reflect(&self) -> EventSeries {
        let mut times: Vec<f64> = self.times.iter().rev().map(|x| self.window_end - x).collect();
        times.sort_by(f64::total_cmp);
        EventSeries {
            times,
            window_end: self.window_end,
            provenance: Provenance::Derived {
                note: "reflected about the window".into(),
            },
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t\n");
        for t in &self.times {
            writeln!(s, "{t}").expect("write to string");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv().as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

/// Simulates `N_θ` on `[0, T]`. Deterministic in `(seed, params, T)`.
pub fn simulate_window(
    p: &ModelParams,
    t_end: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<EventSeries> {
    let streams = Streams::new(seed);
    let clusters = simulate_clusters(p, t_end, &streams, opts)?;
    let mut times: Vec<f64> = clusters
        .iter()
        .flat_map(|pc| pc.cluster.times.iter().map(move |t| pc.immigrant + t))
        .filter(|t| (0.0..=t_end).contains(t))
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(EventSeries {
        times,
        window_end: t_end,
        provenance: Provenance::Simulated {
            seed,
            params: p.clone(),
        },
    })
}

/// Parses an event file: one timestamp per line with an optional `t` header.
/// Blank lines are skipped. `window_end` defaults to the largest time.
pub fn parse_events(text: &str, window_end: Option<f64>, source: &str) -> Result<EventSeries> {
    let mut times = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_data && line.eq_ignore_ascii_case("t") {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let v: f64 = line.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
            line: i + 1,
            message: format!("`{line}`: {e}"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFiniteTime { line: i + 1 });
        }
        times.push(v);
    }
    if times.is_empty() {
        log::warn!("{source}: no events found; returning an empty series");
    }
    let hi = times.iter().copied().fold(0.0, f64::max);
    let t_end = window_end.unwrap_or(hi);
    EventSeries::new(
        times,
        t_end,
        Provenance::Ingested {
            path: source.to_string(),
        },
    )
}

pub fn ingest_events(path: &Path, window_end: Option<f64>) -> Result<EventSeries> {
    let text = std::fs::read_to_string(path)?;
    parse_events(&text, window_end, &path.display().to_string())
}
