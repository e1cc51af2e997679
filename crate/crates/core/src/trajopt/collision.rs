//! Box obstacles and the tool's collision proxy.

use crate::frames::FunctionFrame;
use crate::geometry::Vec3;
use crate::keypoints::FunctionalKeypoints;

/// Axis-aligned box in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl Obstacle {
    pub fn new(center: Vec3, half_extents: Vec3) -> Option<Self> {
        (half_extents.iter().all(|h| *h > 0.0 && h.is_finite())).then_some(Obstacle {
            center,
            half_extents,
        })
    }

    pub fn from_bounds(lo: &Vec3, hi: &Vec3) -> Option<Self> {
        Obstacle::new((lo + hi) * 0.5, (hi - lo) * 0.5)
    }
}

/// Signed distance from `p` to the box surface; negative inside.
pub fn point_box_distance(p: &Vec3, b: &Obstacle) -> f64 {
    signed_distance_with_gradient(p, b).0
}

/// Signed distance and its gradient with respect to `p`.
pub fn signed_distance_with_gradient(p: &Vec3, b: &Obstacle) -> (f64, Vec3) {
    let d = p - b.center;
    let q = d.abs() - b.half_extents;
    let outside = q.sup(&Vec3::zeros());
    let out_norm = outside.norm();
    if out_norm > 0.0 {
        let grad = outside.component_mul(&d.map(sign)) / out_norm;
        return (out_norm, grad);
    }
    let mut idx = 0;
    for i in 1..3 {
        if q[i] > q[idx] {
            idx = i;
        }
    }
    let mut grad = Vec3::zeros();
    grad[idx] = sign(d[idx]);
    (q[idx], grad)
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Greedy farthest-point subsample, starting from the point farthest from the
/// centroid. Deterministic; ties keep the lowest index.
pub fn farthest_point_sample(cloud: &[Vec3], k: usize) -> Vec<Vec3> {
    if cloud.is_empty() || k == 0 {
        return Vec::new();
    }
    if cloud.len() <= k {
        return cloud.to_vec();
    }
    let centroid = cloud.iter().sum::<Vec3>() / cloud.len() as f64;
    let argmax = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
            .0
    };
    let from_centroid: Vec<f64> = cloud
        .iter()
        .map(|p| (p - centroid).norm_squared())
        .collect();
    let first = argmax(&from_centroid);
    let mut picked = vec![cloud[first]];
    let mut dist: Vec<f64> = cloud
        .iter()
        .map(|p| (p - cloud[first]).norm_squared())
        .collect();
    while picked.len() < k {
        let next = argmax(&dist);
        picked.push(cloud[next]);
        for (d, p) in dist.iter_mut().zip(cloud) {
            *d = d.min((p - cloud[next]).norm_squared());
        }
    }
    picked
}

/// Maximum number of cloud samples in a collision proxy.
pub const PROXY_CLOUD_SAMPLES: usize = 64;

/// Keypoints plus up to 64 farthest-point samples of the tool cloud,
/// expressed in the tool's initial function frame.
pub fn tool_proxy_points(
    keypoints: &FunctionalKeypoints,
    cloud: &[Vec3],
    frame0: &FunctionFrame,
) -> Vec<Vec3> {
    let to_local = frame0.pose().inverse();
    keypoints
        .as_array()
        .iter()
        .chain(farthest_point_sample(cloud, PROXY_CLOUD_SAMPLES).iter())
        .map(|p| to_local.transform_point(p))
        .collect()
}
