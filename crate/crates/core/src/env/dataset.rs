//! Line-delimited JSON episode datasets for exact replay.

use std::io::{BufRead, Write};

use super::episode::EpisodeConfig;
use super::grid::Grid;
use super::EnvError;

pub fn write_episodes<W: Write>(mut out: W, episodes: &[EpisodeConfig]) -> Result<(), EnvError> {
    for e in episodes {
        serde_json::to_writer(&mut out, e).map_err(|e| EnvError::Parse(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one record per non-empty line and validates each against `grid`.
pub fn read_episodes<R: BufRead>(input: R, grid: &Grid) -> Result<Vec<EpisodeConfig>, EnvError> {
    let mut episodes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EpisodeConfig =
            serde_json::from_str(&line).map_err(|err| EnvError::Parse(format!("line {}: {err}", i + 1)))?;
        e.validate(grid)?;
        episodes.push(e);
    }
    Ok(episodes)
}
