//! Seeded synthetic benchmarks.
//!
//! The 2-D shapes follow the usual scikit-learn style generators plus two
//! figure scenarios (three line segments; two concentric arcs with holes).
//! `fig6` is a 4-D set whose features 0/2 and 1/3 are strongly correlated
//! pairs, with a matching planted-anomaly generator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::data::{split_half_indices, FeatureMatrix, LabeledSet};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

/// Within-pair correlation of the `fig6` features.
pub const FIG6_CORRELATION: f64 = 0.95;

/// Fraction of the pool's extent added on every side of the negative
/// sampling box.
pub const BENCHMARK_MARGIN: f64 = 0.2;

/// Angular span of each `twoarcs` arc, in degrees.
pub const TWO_ARCS_SPAN: (f64, f64) = (30.0, 150.0);
/// Arc radii of `twoarcs` (inner, outer).
pub const TWO_ARCS_RADII: (f64, f64) = (1.0, 1.5);
/// Hole of each `twoarcs` arc as (start, end) in degrees.
pub const TWO_ARCS_HOLES: [(f64, f64); 2] = [(64.0, 76.0), (104.0, 116.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Moons,
    Circles,
    SwissRoll,
    ThreeLines,
    TwoArcs,
    Fig6,
}

impl Shape {
    pub const ALL: [Shape; 6] =
        [Shape::Moons, Shape::Circles, Shape::SwissRoll, Shape::ThreeLines, Shape::TwoArcs, Shape::Fig6];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Moons => "moons",
            Shape::Circles => "circles",
            Shape::SwissRoll => "swissroll",
            Shape::ThreeLines => "threelines",
            Shape::TwoArcs => "twoarcs",
            Shape::Fig6 => "fig6",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Shape::Fig6 => 4,
            _ => 2,
        }
    }

    /// Per-coordinate Gaussian noise used when none is given.
    pub fn default_noise(self) -> f64 {
        match self {
            Shape::Moons | Shape::Circles => 0.05,
            Shape::SwissRoll => 0.01,
            Shape::ThreeLines => 0.002,
            Shape::TwoArcs => 0.02,
            Shape::Fig6 => 0.0,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Shape::ALL
            .into_iter()
            .find(|shape| shape.as_str() == key)
            .ok_or_else(|| Error::BadSpec(format!("unknown shape {s:?}")))
    }
}

/// Axis-aligned 2-D box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        let ok = (0..2).all(|a| min[a].is_finite() && max[a].is_finite() && max[a] > min[a]);
        if !ok {
            return Err(Error::BadSpec(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Tightest box around the rows of a 2-D matrix.
    pub fn enclosing(points: &FeatureMatrix) -> Result<Self> {
        if points.dim() != 2 || points.is_empty() {
            return Err(Error::BadSpec("bounding box needs non-empty 2-D points".into()));
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for row in points.iter_rows() {
            for a in 0..2 {
                min[a] = min[a].min(row[a]);
                max[a] = max[a].max(row[a]);
            }
        }
        Self::new(min, max)
    }

    /// Grows every side by `fraction` of the extent along that axis.
    pub fn expanded(&self, fraction: f64) -> Self {
        let mut out = *self;
        for a in 0..2 {
            let pad = fraction * (self.max[a] - self.min[a]);
            out.min[a] -= pad;
            out.max[a] += pad;
        }
        out
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..2).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

impl FromStr for BBox {
    type Err = Error;

    /// `xmin,ymin,xmax,ymax`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::BadSpec(format!("bad box {s:?}, expected xmin,ymin,xmax,ymax")))?;
        match parts[..] {
            [x0, y0, x1, y1] => BBox::new([x0, y0], [x1, y1]),
            _ => Err(Error::BadSpec(format!("bad box {s:?}, expected xmin,ymin,xmax,ymax"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub shape: Shape,
    pub n_points: usize,
    pub noise: f64,
    pub seed: u64,
    /// Box for negatives; `None` derives one from the generated pool.
    pub bbox: Option<BBox>,
}

impl SynthSpec {
    pub fn new(shape: Shape, n_points: usize, seed: u64) -> Self {
        Self { shape, n_points, noise: shape.default_noise(), seed, bbox: None }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_points < 1 {
            return Err(Error::BadSpec("n_points must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::BadSpec(format!("noise must be a finite non-negative value, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Samples `spec.n_points` points of the requested shape.
pub fn generate(spec: &SynthSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let n = spec.n_points;
    if spec.shape == Shape::Fig6 {
        let mut values = Vec::with_capacity(n * 4);
        for _ in 0..n {
            values.extend_from_slice(&fig6_row(&mut rng, FIG6_CORRELATION));
        }
        return FeatureMatrix::new(4, values);
    }

    let mut values = Vec::with_capacity(n * 2);
    for i in 0..n {
        let [x, y] = match spec.shape {
            Shape::Moons => {
                let t = rng.uniform_range(0.0, PI);
                if i % 2 == 0 {
                    [t.cos(), t.sin()]
                } else {
                    [1.0 - t.cos(), 0.5 - t.sin()]
                }
            }
            Shape::Circles => {
                let t = rng.uniform_range(0.0, 2.0 * PI);
                let r = if i % 2 == 0 { 1.0 } else { 0.5 };
                [r * t.cos(), r * t.sin()]
            }
            Shape::SwissRoll => {
                let t = rng.uniform_range(1.5 * PI, 4.5 * PI);
                [t * t.cos() / 3.0, t * t.sin() / 3.0]
            }
            Shape::ThreeLines => {
                let u = rng.uniform();
                match i % 3 {
                    0 => [u, 0.0],
                    1 => [u, 1.0],
                    _ => [1.5, u],
                }
            }
            Shape::TwoArcs => {
                let arc = i % 2;
                let radius = if arc == 0 { TWO_ARCS_RADII.0 } else { TWO_ARCS_RADII.1 };
                let (hole_start, hole_end) = TWO_ARCS_HOLES[arc];
                let open = (TWO_ARCS_SPAN.1 - TWO_ARCS_SPAN.0) - (hole_end - hole_start);
                let mut deg = TWO_ARCS_SPAN.0 + rng.uniform() * open;
                if deg >= hole_start {
                    deg += hole_end - hole_start;
                }
                let t = deg.to_radians();
                [radius * t.cos(), radius * t.sin()]
            }
            Shape::Fig6 => unreachable!(),
        };
        let (nx, ny) = if spec.noise > 0.0 {
            (spec.noise * rng.gaussian(), spec.noise * rng.gaussian())
        } else {
            (0.0, 0.0)
        };
        values.push(x + nx);
        values.push(y + ny);
    }
    FeatureMatrix::new(2, values)
}

fn fig6_row(rng: &mut Rng, rho: f64) -> [f64; 4] {
    let spread = (1.0 - rho * rho).sqrt();
    let a = rng.gaussian();
    let b = rng.gaussian();
    let a2 = rho * a + spread * rng.gaussian();
    let b2 = rho * b + spread * rng.gaussian();
    [a, b, a2, b2]
}

/// Planted anomalies for `fig6`: every feature keeps its standard normal
/// marginal, but the two members of each correlated pair are drawn
/// independently.
pub fn fig6_anomalies(n: usize, seed: u64) -> Result<FeatureMatrix> {
    if n < 1 {
        return Err(Error::BadSpec("n must be at least 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut values = Vec::with_capacity(n * 4);
    for _ in 0..n {
        values.extend_from_slice(&fig6_row(&mut rng, 0.0));
    }
    FeatureMatrix::new(4, values)
}

/// `n` points uniform over `bbox`.
pub fn sample_negatives(bbox: &BBox, n: usize, seed: u64) -> Result<FeatureMatrix> {
    let bbox = BBox::new(bbox.min, bbox.max)?;
    if n < 1 {
        return Err(Error::BadSpec("n must be at least 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut values = Vec::with_capacity(n * 2);
    for _ in 0..n {
        values.push(rng.uniform_range(bbox.min[0], bbox.max[0]));
        values.push(rng.uniform_range(bbox.min[1], bbox.max[1]));
    }
    FeatureMatrix::new(2, values)
}

/// A train set plus a labeled test set following the evaluation protocol:
/// `2·n_train` points are generated, half train and half become normal test
/// rows (label `false`); `n_test` anomalies (label `true`) are sampled
/// uniformly from the pool's box grown by [`BENCHMARK_MARGIN`] (planted
/// anomalies for `fig6`). Test rows are shuffled.
pub fn make_benchmark(spec: &SynthSpec, n_train: usize, n_test: usize) -> Result<(FeatureMatrix, LabeledSet)> {
    if n_train < 2 {
        return Err(Error::BadSpec(format!("n_train must be at least 2, got {n_train}")));
    }
    let pool_spec = SynthSpec { n_points: 2 * n_train, ..spec.clone() };
    let pool = generate(&pool_spec)?;
    let (train_idx, held_idx) = split_half_indices(pool.rows(), derive_seed(spec.seed, 1))?;
    let train = pool.select(&train_idx);
    let normals = pool.select(&held_idx);

    let anomalies = if spec.shape == Shape::Fig6 {
        fig6_anomalies(n_test, derive_seed(spec.seed, 2))?
    } else {
        let bbox = match spec.bbox {
            Some(b) => b,
            None => BBox::enclosing(&pool)?.expanded(BENCHMARK_MARGIN),
        };
        sample_negatives(&bbox, n_test, derive_seed(spec.seed, 2))?
    };

    let mut rows: Vec<(usize, bool)> = (0..normals.rows())
        .map(|i| (i, false))
        .chain((0..anomalies.rows()).map(|i| (i, true)))
        .collect();
    Rng::new(derive_seed(spec.seed, 3)).shuffle(&mut rows);

    let dim = pool.dim();
    let mut values = Vec::with_capacity(rows.len() * dim);
    let mut labels = Vec::with_capacity(rows.len());
    for &(i, anomalous) in &rows {
        let src = if anomalous { anomalies.row(i) } else { normals.row(i) };
        values.extend_from_slice(src);
        labels.push(anomalous);
    }
    let test = LabeledSet::new(FeatureMatrix::new(dim, values)?, labels)?;
    Ok((train, test))
}

/// Distance from a point to the nearest of the three `threelines` segments.
pub fn three_lines_distance(p: &[f64]) -> f64 {
    let seg = |a: [f64; 2], b: [f64; 2]| -> f64 {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
        ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
    };
    seg([0.0, 0.0], [1.0, 0.0])
        .min(seg([0.0, 1.0], [1.0, 1.0]))
        .min(seg([1.5, 0.0], [1.5, 1.0]))
}
