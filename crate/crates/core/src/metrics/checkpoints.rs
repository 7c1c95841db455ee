//! Checkpoints placed along the target path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub position: [f64; 2],
    pub radius: f64,
}

impl Checkpoint {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.position[0]).hypot(p[1] - self.position[1]) <= self.radius
    }
}

/// `count` indices equally spaced over `0..len`, first and last included.
pub fn spaced_indices(len: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return vec![0];
    }
    (0..count).map(|i| ((i * (len - 1)) as f64 / (count - 1) as f64).round() as usize).collect()
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("checkpoint radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Checkpoints at `count` equally spaced time indices of `path`.
pub fn place_checkpoints_dense(path: &[[f64; 2]], count: usize, radius: f64) -> Result<Vec<Checkpoint>> {
    check_radius(radius)?;
    if count < 2 {
        return Err(Error::Domain(format!("dense checkpoint count must be >= 2, got {count}")));
    }
    if path.len() < count {
        return Err(Error::Domain(format!("path of {} points is shorter than {count} checkpoints", path.len())));
    }
    Ok(spaced_indices(path.len(), count).into_iter().map(|i| Checkpoint { position: path[i], radius }).collect())
}

/// Endpoints plus the points where the path changes heading.
///
/// With more corners than fit in `max_count`, the sharpest turns are kept
/// (earlier corners win ties). Repeated points are ignored when computing
/// headings.
pub fn place_checkpoints_sparse(path: &[[f64; 2]], max_count: usize, radius: f64) -> Result<Vec<Checkpoint>> {
    check_radius(radius)?;
    if max_count < 2 {
        return Err(Error::Domain(format!("sparse checkpoint count must be >= 2, got {max_count}")));
    }
    let Some((&first, &last)) = path.first().zip(path.last()) else {
        return Err(Error::Domain("empty path".into()));
    };

    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(path.len());
    for &p in path {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    // (turn angle, position in pts)
    let mut corners: Vec<(f64, usize)> = Vec::new();
    for i in 1..pts.len().saturating_sub(1) {
        let a = [pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]];
        let b = [pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]];
        let cross = a[0] * b[1] - a[1] * b[0];
        let dot = a[0] * b[0] + a[1] * b[1];
        let angle = cross.atan2(dot).abs();
        if angle > 1e-12 {
            corners.push((angle, i));
        }
    }
    let keep = max_count - 2;
    if corners.len() > keep {
        corners.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        corners.truncate(keep);
        corners.sort_by_key(|c| c.1);
    }

    let mut out = vec![Checkpoint { position: first, radius }];
    out.extend(corners.iter().map(|&(_, i)| Checkpoint { position: pts[i], radius }));
    out.push(Checkpoint { position: last, radius });
    Ok(out)
}
