//! Procedural stand-ins for scanned indoor fragments.
//!
//! Scenes are surfaces below a sensor at the origin, roughly 1.5 m away,
//! sampled with exact positions and analytic normals facing the sensor.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};

use crate::geometry::{Point, PointCloud, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Plane,
    PlaneSpheres,
    Heightfield,
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Plane => "plane",
            SceneKind::PlaneSpheres => "plane-spheres",
            SceneKind::Heightfield => "heightfield",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plane" => Some(SceneKind::Plane),
            "plane-spheres" | "spheres" => Some(SceneKind::PlaneSpheres),
            "heightfield" => Some(SceneKind::Heightfield),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    /// The scene covers `[-half_extent, half_extent]²` in x and y.
    pub half_extent: f64,
    /// Surface samples per square meter of footprint.
    pub density: f64,
    /// Depth of the ground below the sensor.
    pub depth: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            half_extent: 1.5,
            density: 2500.0,
            depth: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    pub sigma: f64,
}

/// Ground-truth geometry of a scene.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Plane { z: f64 },
    PlaneSpheres { z: f64, spheres: Vec<Sphere> },
    Heightfield { z: f64, bumps: Vec<Bump> },
}

impl Surface {
    /// Height of the heightfield at `(x, y)`; for the other kinds, the ground.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Surface::Plane { z } | Surface::PlaneSpheres { z, .. } => *z,
            Surface::Heightfield { z, bumps } => {
                z + bumps
                    .iter()
                    .map(|b| {
                        let r2 = (x - b.x).powi(2) + (y - b.y).powi(2);
                        b.amplitude * (-r2 / (2.0 * b.sigma * b.sigma)).exp()
                    })
                    .sum::<f64>()
            }
        }
    }

    fn height_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Surface::Heightfield { bumps, .. } => bumps.iter().fold((0.0, 0.0), |(gx, gy), b| {
                let s2 = b.sigma * b.sigma;
                let r2 = (x - b.x).powi(2) + (y - b.y).powi(2);
                let e = b.amplitude * (-r2 / (2.0 * s2)).exp();
                (gx - e * (x - b.x) / s2, gy - e * (y - b.y) / s2)
            }),
            _ => (0.0, 0.0),
        }
    }

    fn ground_normal(&self, x: f64, y: f64) -> Vector {
        let (gx, gy) = self.height_gradient(x, y);
        Vector::new(-gx, -gy, 1.0).normalize()
    }

    /// Samples the surface over an axis-aligned footprint, keeping points
    /// whose normal faces `viewpoint`. Normals are returned facing it.
    pub fn sample(
        &self,
        footprint: ([f64; 2], [f64; 2]),
        density: f64,
        viewpoint: &Point,
        rng: &mut impl Rng,
    ) -> (Vec<Point>, Vec<Vector>) {
        let ([x0, y0], [x1, y1]) = footprint;
        let area = (x1 - x0) * (y1 - y0);
        let count = (area * density).round() as usize;
        let ux = Uniform::new(x0, x1);
        let uy = Uniform::new(y0, y1);
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::with_capacity(count);
        let spheres: &[Sphere] = match self {
            Surface::PlaneSpheres { spheres, .. } => spheres,
            _ => &[],
        };
        for _ in 0..count {
            let (x, y) = (ux.sample(rng), uy.sample(rng));
            let p = Point::new(x, y, self.height(x, y));
            if spheres.iter().any(|s| (p - s.center).norm() < s.radius) {
                continue;
            }
            let n = self.ground_normal(x, y);
            if n.dot(&(viewpoint - p)) > 0.0 {
                points.push(p);
                normals.push(n);
            }
        }
        let ground = match self {
            Surface::Plane { z } | Surface::PlaneSpheres { z, .. } | Surface::Heightfield { z, .. } => *z,
        };
        for s in spheres {
            let n_sphere = (4.0 * std::f64::consts::PI * s.radius * s.radius * density).round() as usize;
            for _ in 0..n_sphere {
                let d: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                let d = Vector::new(d[0], d[1], d[2]);
                let norm = d.norm();
                if norm < 1e-9 {
                    continue;
                }
                let u = d / norm;
                let p = s.center + u * s.radius;
                let inside = p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
                if inside && p.z > ground && u.dot(&(viewpoint - p)) > 0.0 {
                    points.push(p);
                    normals.push(u);
                }
            }
        }
        (points, normals)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub kind: SceneKind,
    pub seed: u64,
    pub surface: Surface,
    pub params: SceneParams,
    /// Samples with analytic normals.
    pub cloud: PointCloud,
}

pub fn generate_synthetic_scene(seed: u64, kind: SceneKind) -> SyntheticScene {
    generate_scene_with(seed, kind, &SceneParams::default())
}

pub fn generate_scene_with(seed: u64, kind: SceneKind, params: &SceneParams) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = -params.depth;
    let e = params.half_extent;
    let surface = match kind {
        SceneKind::Plane => Surface::Plane { z },
        SceneKind::PlaneSpheres => {
            let count = rng.gen_range(5..=9);
            let spheres = (0..count)
                .map(|_| {
                    let radius = rng.gen_range(0.12..0.4);
                    let sink = rng.gen_range(-0.5..0.5) * radius;
                    Sphere {
                        center: Point::new(rng.gen_range(-e..e), rng.gen_range(-e..e), z + sink),
                        radius,
                    }
                })
                .collect();
            Surface::PlaneSpheres { z, spheres }
        }
        SceneKind::Heightfield => {
            let count = rng.gen_range(18..=28);
            let amp = Normal::new(0.0, 0.12).expect("valid");
            let bumps = (0..count)
                .map(|_| Bump {
                    x: rng.gen_range(-e * 1.1..e * 1.1),
                    y: rng.gen_range(-e * 1.1..e * 1.1),
                    amplitude: amp.sample(&mut rng),
                    sigma: rng.gen_range(0.12..0.4),
                })
                .collect();
            Surface::Heightfield { z, bumps }
        }
    };
    let (points, normals) = surface.sample(([-e, -e], [e, e]), params.density, &Point::origin(), &mut rng);
    let cloud = PointCloud::with_normals(points, normals).expect("analytic samples are valid");
    SyntheticScene {
        kind,
        seed,
        surface,
        params: *params,
        cloud,
    }
}
