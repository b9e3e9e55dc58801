//! KDE and metric implementations against brute-force oracles.

use roundtrip::kde::{fit_kde, sample_sd, BandwidthRule};
use roundtrip::metrics::{precision_at_k, spearman};
use roundtrip::{ExecMode, Matrix, Rng, Stream};

/// `log[(1/N) Σ_i Π_j N(x_j; t_ij, h_j²)]` summed directly, no log-sum-exp.
fn naive_kde(train: &Matrix, h: &[f64], x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for t in train.iter_rows() {
        let mut k = 1.0;
        for j in 0..x.len() {
            let u = (x[j] - t[j]) / h[j];
            k *= (-0.5 * u * u).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h[j]);
        }
        sum += k;
    }
    (sum / train.rows() as f64).ln()
}

#[test]
fn kde_matches_naive_sum() {
    for (seed, n, d) in [(1, 1000, 1), (2, 500, 2), (3, 1000, 3), (4, 50, 4)] {
        let mut rng = Rng::new(seed, Stream::Custom(500));
        let train = rng.gaussian(n, d);
        for rule in [BandwidthRule::Scott, BandwidthRule::Silverman] {
            let kde = fit_kde(&train, rule).unwrap();
            let q = rng.gaussian(50, d);
            let got = kde.log_density_batch(&q, ExecMode::Parallel).unwrap();
            for (x, v) in q.iter_rows().zip(&got) {
                let want = naive_kde(&train, kde.bandwidths(), x);
                assert!((v - want).abs() < 1e-10, "{v} vs {want}");
            }
        }
    }
}

#[test]
fn bandwidths_match_hand_formulas() {
    let mut rng = Rng::new(6, Stream::Custom(500));
    for (n, d) in [(100, 1), (250, 2), (1000, 5)] {
        let pts = rng.gaussian(n, d);
        // sample sd computed separately with the two-pass formula
        let sd: Vec<f64> = (0..d)
            .map(|j| {
                let col = pts.column(j);
                let mean = col.iter().sum::<f64>() / n as f64;
                (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            })
            .collect();
        assert_eq!(sd, sample_sd(&pts));
        let nf = n as f64;
        let df = d as f64;
        let scott = fit_kde(&pts, BandwidthRule::Scott).unwrap();
        let silverman = fit_kde(&pts, BandwidthRule::Silverman).unwrap();
        for j in 0..d {
            let hs = nf.powf(-1.0 / (df + 4.0)) * sd[j];
            let hv = (nf * (df + 2.0) / 4.0).powf(-1.0 / (df + 4.0)) * sd[j];
            assert!((scott.bandwidths()[j] - hs).abs() < 1e-12);
            assert!((silverman.bandwidths()[j] - hv).abs() < 1e-12);
        }
    }
}

/// Ranks by counting: rank(i) = #{j: v_j < v_i} + (#{j: v_j = v_i} + 1) / 2.
fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (brute_ranks(a), brute_ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn random_vector(rng: &mut Rng, n: usize, tied: bool) -> Vec<f64> {
    (0..n)
        .map(|_| if tied { rng.index(5) as f64 } else { rng.normal() })
        .collect()
}

#[test]
fn spearman_matches_brute_force() {
    let mut rng = Rng::new(7, Stream::Custom(500));
    let mut checked = 0;
    while checked < 1000 {
        let n = 2 + rng.index(40);
        let tied = checked % 2 == 0;
        let a = random_vector(&mut rng, n, tied);
        let b_tied = !tied || rng.index(2) == 0;
        let b = random_vector(&mut rng, n, b_tied);
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if constant(&a) || constant(&b) {
            assert!(spearman(&a, &b).is_err());
            continue;
        }
        let want = brute_spearman(&a, &b);
        let got = spearman(&a, &b).unwrap();
        // identical ranks and summation order, so the values agree exactly
        assert_eq!(got, want.clamp(-1.0, 1.0));
        checked += 1;
    }
}

#[test]
fn precision_matches_exhaustive_counting() {
    let mut rng = Rng::new(8, Stream::Custom(500));
    for _ in 0..500 {
        let n = 1 + rng.index(30);
        let scores: Vec<f64> = (0..n).map(|_| rng.index(6) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.index(3) == 0).collect();
        let k = 1 + rng.index(n);
        // a point is in the top k when fewer than k points beat it, counting
        // earlier equal scores as ahead of it
        let mut hits = 0;
        for i in 0..n {
            let ahead = (0..n)
                .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
                .count();
            if ahead < k && labels[i] {
                hits += 1;
            }
        }
        assert_eq!(precision_at_k(&scores, &labels, k).unwrap(), hits as f64 / k as f64);
    }
}
