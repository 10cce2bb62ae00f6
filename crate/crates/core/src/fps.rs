use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Greedy farthest point sampling.
///
/// Starts at `start`; each further pick is the unselected point whose squared
/// distance to the nearest selected point is largest, ties going to the lowest
/// index.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, start: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::invalid("cannot sample from an empty cloud"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} out of range for {n} points")));
    }

    let points = cloud.points();
    let mut selected = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut order = Vec::with_capacity(k);
    let mut current = start;

    loop {
        selected[current] = true;
        order.push(current);
        if order.len() == k {
            break;
        }
        let anchor = points[current];
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if selected[i] {
                continue;
            }
            let d = (p - anchor).norm_squared();
            if d < nearest[i] {
                nearest[i] = d;
            }
            if best.is_none_or(|(_, bd)| nearest[i] > bd) {
                best = Some((i, nearest[i]));
            }
        }
        // k <= n guarantees an unselected point remains
        current = best.map(|(i, _)| i).unwrap();
    }
    Ok(order)
}
