//! Re-simulates a reduced-replication version of the bundled unit-root
//! quantile table and checks agreement within Monte Carlo error. Run with
//! `cargo test -p mcvar --test adf_table_provenance -- --ignored` (takes a
//! couple of minutes).

use mcvar::rng::Rng;

const PROBS: [f64; 15] = [
    0.001, 0.01, 0.025, 0.05, 0.10, 0.20, 0.30, 0.50, 0.70, 0.80, 0.90, 0.95, 0.975, 0.99, 0.999,
];
const REPS: usize = 20_000;

fn df_stat(y: &[f64]) -> f64 {
    let m = y.len() - 1;
    let (mut sx, mut sxx, mut sy, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for t in 1..=m {
        let x = y[t - 1];
        let dy = y[t] - y[t - 1];
        sx += x;
        sxx += x * x;
        sy += dy;
        sxy += x * dy;
        syy += dy * dy;
    }
    let mf = m as f64;
    let det = mf * sxx - sx * sx;
    let gamma = (mf * sxy - sx * sy) / det;
    let alpha = (sy - gamma * sx) / mf;
    let rss = syy - alpha * sy - gamma * sxy;
    let sigma2 = rss / (mf - 2.0);
    gamma / (sigma2 * mf / det).sqrt()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[test]
#[ignore = "slow provenance check; regenerates the bundled table at reduced replications"]
fn bundled_quantiles_match_fresh_simulation() {
    let table = include_str!("../data/adf_quantiles.csv");
    let mut lines = table
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty());
    let _header = lines.next().unwrap();
    let mut rng = Rng::new(987_654_321);
    for line in lines {
        let mut fields = line.split(',');
        let n: usize = fields.next().unwrap().parse().unwrap();
        let bundled: Vec<f64> = fields.map(|s| s.parse().unwrap()).collect();

        let mut stats = Vec::with_capacity(REPS);
        let mut y = vec![0.0f64; n + 1];
        for _ in 0..REPS {
            y[0] = 0.0;
            for t in 1..=n {
                y[t] = y[t - 1] + rng.standard_normal();
            }
            stats.push(df_stat(&y));
        }
        stats.sort_by(|a, b| a.total_cmp(b));
        for (idx, &p) in PROBS.iter().enumerate() {
            // skip the extreme tails, whose MC error at 20k reps is large
            if !(0.005..=0.995).contains(&p) {
                continue;
            }
            // quantile standard error grows toward the tails
            let tol = if (0.10..=0.90).contains(&p) {
                0.05
            } else {
                0.10
            };
            let fresh = quantile(&stats, p);
            assert!(
                (fresh - bundled[idx]).abs() < tol,
                "n={n} p={p}: fresh {fresh:.4} vs bundled {:.4}",
                bundled[idx]
            );
        }
        println!("n={n}: ok");
    }
}
