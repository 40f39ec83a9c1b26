use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{AnalyticsError, ClusterAssignment};

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Paths written by [`timeline_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Chronological `(player, game) -> cluster` rows of `players` (all
/// players when empty), sorted by player then game.
pub fn timeline_rows(
    assignment: &ClusterAssignment,
    players: &[u32],
) -> Result<BTreeMap<u32, Vec<(u64, usize)>>, AnalyticsError> {
    let mut by_player: BTreeMap<u32, Vec<(u64, usize)>> = BTreeMap::new();
    for r in &assignment.rows {
        by_player.entry(r.player_id).or_default().push((r.game_pk, r.cluster));
    }
    for rows in by_player.values_mut() {
        rows.sort_unstable();
    }
    if players.is_empty() {
        return Ok(by_player);
    }
    let wanted: BTreeSet<u32> = players.iter().copied().collect();
    let mut out = BTreeMap::new();
    for p in wanted {
        let rows = by_player.remove(&p).ok_or(AnalyticsError::UnknownPlayer(p))?;
        out.insert(p, rows);
    }
    Ok(out)
}

/// Fraction of consecutive games in which a player's cluster changes.
pub fn switch_rates(assignment: &ClusterAssignment) -> BTreeMap<u32, f64> {
    let rows = timeline_rows(assignment, &[]).expect("no player filter");
    rows.into_iter()
        .filter(|(_, r)| r.len() > 1)
        .map(|(p, r)| {
            let switches = r.windows(2).filter(|w| w[0].1 != w[1].1).count();
            (p, switches as f64 / (r.len() - 1) as f64)
        })
        .collect()
}

fn colour(cluster: usize, k: usize) -> String {
    let hue = (cluster * 360) / k.max(1);
    let light = if cluster.is_multiple_of(2) { 45 } else { 65 };
    format!("hsl({hue},65%,{light}%)")
}

fn svg(assignment: &ClusterAssignment, rows: &BTreeMap<u32, Vec<(u64, usize)>>) -> String {
    let games: BTreeSet<u64> = rows.values().flatten().map(|(g, _)| *g).collect();
    let col: BTreeMap<u64, usize> = games.iter().enumerate().map(|(i, g)| (*g, i)).collect();
    let (cell_w, cell_h, left, top) = (6usize, 14usize, 70usize, 24usize);
    let width = left + cell_w * games.len().max(1) + 10;
    let height = top + cell_h * rows.len() + 10;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"monospace\" font-size=\"10\">\n"
    );
    s.push_str(&format!(
        "<text x=\"4\" y=\"14\">{} clusters at game start, k={}</text>\n",
        assignment.method.as_str(),
        assignment.k
    ));
    for (row, (player, cells)) in rows.iter().enumerate() {
        let y = top + row * cell_h;
        s.push_str(&format!("<text x=\"4\" y=\"{}\">{player}</text>\n", y + cell_h - 4));
        for (game, cluster) in cells {
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{y}\" width=\"{cell_w}\" height=\"{}\" fill=\"{}\"><title>{game}: {cluster}</title></rect>\n",
                left + col[game] * cell_w,
                cell_h - 2,
                colour(*cluster, assignment.k)
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Write `<stem>.csv` (player_id, game_pk, cluster) and `<stem>.svg`, a
/// strip chart with one row per player and one cell per game.
pub fn timeline_report(
    assignment: &ClusterAssignment,
    players: &[u32],
    out_dir: &Path,
    stem: &str,
) -> Result<ReportFiles, AnalyticsError> {
    if assignment.rows.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let rows = timeline_rows(assignment, players)?;
    let mut csv = String::from("player_id,game_pk,cluster\n");
    for (p, cells) in &rows {
        for (g, c) in cells {
            csv.push_str(&format!("{p},{g},{c}\n"));
        }
    }
    let files = ReportFiles {
        csv: out_dir.join(format!("{stem}.csv")),
        svg: out_dir.join(format!("{stem}.svg")),
    };
    write_atomic(&files.csv, csv.as_bytes())?;
    write_atomic(&files.svg, svg(assignment, &rows).as_bytes())?;
    Ok(files)
}
