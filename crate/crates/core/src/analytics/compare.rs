use std::collections::BTreeMap;

use super::{AnalyticsError, ClusterAssignment};

/// Agreement between two clusterings of the same keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub n: usize,
    /// Adjusted Rand index.
    pub ari: f64,
    /// Normalized mutual information, arithmetic-mean normalization.
    pub nmi: f64,
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// ARI and NMI of two label vectors of equal length.
pub fn agreement(a: &[usize], b: &[usize]) -> Agreement {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ra: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }

    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sa: f64 = ra.values().map(|&c| comb2(c)).sum();
    let sb: f64 = rb.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    let ari = if max - expected == 0.0 { 1.0 } else { (index - expected) / (max - expected) };

    let nf = n as f64;
    let entropy = |m: &BTreeMap<usize, usize>| -> f64 {
        m.values()
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&ra), entropy(&rb));
    let mi: f64 = table
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / nf;
            pxy * (pxy * nf * nf / (ra[&x] as f64 * rb[&y] as f64)).ln()
        })
        .sum();
    let nmi = if ha + hb == 0.0 { 1.0 } else { (2.0 * mi / (ha + hb)).clamp(0.0, 1.0) };
    Agreement { n, ari, nmi }
}

/// Agreement of two assignments over the same `(player, game)` keys.
pub fn compare_clusterings(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<Agreement, AnalyticsError> {
    let ma: BTreeMap<(u32, u64), usize> = a.rows.iter().map(|r| ((r.player_id, r.game_pk), r.cluster)).collect();
    let mb: BTreeMap<(u32, u64), usize> = b.rows.iter().map(|r| ((r.player_id, r.game_pk), r.cluster)).collect();
    if ma.len() != a.rows.len() || mb.len() != b.rows.len() || !ma.keys().eq(mb.keys()) {
        return Err(AnalyticsError::KeyMismatch);
    }
    let la: Vec<usize> = ma.values().copied().collect();
    let lb: Vec<usize> = mb.values().copied().collect();
    Ok(agreement(&la, &lb))
}
