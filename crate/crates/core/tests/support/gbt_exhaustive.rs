//! Brute-force optimum of the regularized structure score over every tree of
//! bounded depth whose splits sit at midpoints of consecutive distinct values.

fn soft(g: f64, alpha: f64) -> f64 {
    g.signum() * (g.abs() - alpha).max(0.0)
}

pub struct Reg {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
}

fn leaf_score(rows: &[usize], g: &[f64], h: &[f64], reg: &Reg) -> f64 {
    let gs: f64 = rows.iter().map(|&i| g[i]).sum();
    let hs: f64 = rows.iter().map(|&i| h[i]).sum();
    let t = soft(gs, reg.alpha);
    -0.5 * t * t / (hs + reg.lambda) + reg.gamma
}

fn thresholds(x: &[Vec<f64>], rows: &[usize], f: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Minimum score of any tree with at most `depth` levels of splits.
pub fn best_score(x: &[Vec<f64>], g: &[f64], h: &[f64], rows: &[usize], depth: usize, reg: &Reg) -> f64 {
    let mut best = leaf_score(rows, g, h, reg);
    if depth == 0 || rows.len() < 2 {
        return best;
    }
    for f in 0..x[0].len() {
        for t in thresholds(x, rows, f) {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] < t);
            let s = best_score(x, g, h, &l, depth - 1, reg) + best_score(x, g, h, &r, depth - 1, reg);
            if s < best {
                best = s;
            }
        }
    }
    best
}
