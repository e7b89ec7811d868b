use persona_signal::stats::{
    anova_oneway, chi_square_independence, pearson_corr, welch_t_test, ChiSquared, Distribution, FDist, StudentT,
};
use statrs::distribution::{ChiSquared as SChi, ContinuousCDF, FisherSnedecor, StudentsT};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

const A: [f64; 9] = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.9, 3.0];
const B: [f64; 6] = [5.2, 6.8, 4.9, 7.7, 6.1, 5.5];

fn raw_moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let s: f64 = x.iter().sum();
    let ss: f64 = x.iter().map(|v| v * v).sum();
    (n, s / n, (ss - s * s / n) / (n - 1.0))
}

#[test]
fn welch_matches_textbook() {
    let (na, ma, va) = raw_moments(&A);
    let (nb, mb, vb) = raw_moments(&B);
    let se = (va / na + vb / nb).sqrt();
    let t = (ma - mb) / se;
    let df = (va / na + vb / nb).powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    let p = 2.0 * dist.cdf(-t.abs());
    let q = dist.inverse_cdf(0.975);

    let r = welch_t_test(&A, &B).unwrap();
    assert!(close(r.statistic, t, 1e-10));
    assert!(close(r.df, df, 1e-10));
    assert!(close(r.p_value, p, 1e-8));
    let (lo, hi) = r.ci95.unwrap();
    assert!(close(lo, ma - mb - q * se, 1e-6));
    assert!(close(hi, ma - mb + q * se, 1e-6));
}

#[test]
fn chi_square_matches_textbook() {
    let table = vec![vec![12.0, 5.0, 9.0], vec![7.0, 14.0, 3.0]];
    let n: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..3).map(|j| table[0][j] + table[1][j]).collect();
    let mut stat = -n;
    for i in 0..2 {
        for j in 0..3 {
            stat += table[i][j] * table[i][j] / (rows[i] * cols[j] / n);
        }
    }
    let p = 1.0 - SChi::new(2.0).unwrap().cdf(stat);
    let r = chi_square_independence(&table).unwrap();
    assert!(close(r.statistic, stat, 1e-10));
    assert_eq!(r.df, 2.0);
    assert!(close(r.p_value, p, 1e-8));
}

#[test]
fn anova_matches_textbook() {
    let groups = vec![A.to_vec(), B.to_vec(), vec![3.9, 4.1, 4.4, 3.7, 5.0]];
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let (n, grand, var_all) = raw_moments(&all);
    let sst = var_all * (n - 1.0);
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let (k, _, v) = raw_moments(g);
            v * (k - 1.0)
        })
        .sum();
    let ssb = sst - ssw;
    let (df1, df2) = (2.0, n - 3.0);
    let f = (ssb / df1) / (ssw / df2);
    let p = 1.0 - FisherSnedecor::new(df1, df2).unwrap().cdf(f);
    let r = anova_oneway(&groups).unwrap();
    assert!(grand.is_finite());
    assert!(close(r.statistic, f, 1e-10));
    assert_eq!((r.df, r.df2), (df1, Some(df2)));
    assert!(close(r.p_value, p, 1e-8));
}

#[test]
fn pearson_matches_textbook() {
    let x = A.to_vec();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 0.7 * v + (i as f64 * 1.3).sin()).collect();
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
    let t = r * ((n - 2.0) / (1.0 - r * r)).sqrt();
    let p = 2.0 * StudentsT::new(0.0, 1.0, n - 2.0).unwrap().cdf(-t.abs());
    let out = pearson_corr(&x, &y).unwrap();
    assert!(close(out.statistic, r, 1e-10));
    assert!(close(out.extras["t"][0][0], t, 1e-9));
    assert!(close(out.p_value, p, 1e-8));
}

#[test]
fn cdfs_match_statrs_on_grids() {
    for df in [1.0, 2.5, 7.0, 30.0, 1056.0] {
        let s = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in -40..=40 {
            let t = f64::from(i) * 0.25;
            assert!((StudentT { df }.cdf(t) - s.cdf(t)).abs() < 1e-10, "t df={df} at {t}");
        }
        let c = SChi::new(df).unwrap();
        for i in 0..=60 {
            let x = f64::from(i) * df.max(1.0) / 20.0;
            assert!((ChiSquared { df }.cdf(x) - c.cdf(x)).abs() < 1e-10, "chi2 df={df} at {x}");
        }
    }
    for (d1, d2) in [(1.0, 1.0), (4.0, 1056.0), (3.0, 12.0), (10.0, 4.5)] {
        let f = FisherSnedecor::new(d1, d2).unwrap();
        for i in 0..=60 {
            let x = f64::from(i) * 0.1;
            assert!((FDist { df1: d1, df2: d2 }.cdf(x) - f.cdf(x)).abs() < 1e-10, "F({d1},{d2}) at {x}");
        }
    }
}

#[test]
fn quantiles_match_statrs() {
    for p in [0.9, 0.95, 0.975, 0.99] {
        for df in [1.0, 4.0, 20.0] {
            let ours = ChiSquared { df }.quantile(p);
            assert!(close(ours, SChi::new(df).unwrap().inverse_cdf(p), 1e-7));
            let ours = StudentT { df }.quantile(p);
            assert!(close(ours, StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p), 1e-7));
        }
    }
}
