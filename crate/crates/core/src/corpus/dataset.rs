//! Dataset files: UTF-8 TSV, one sample per line,
//! `target_label<TAB>pos_label_or_-<TAB>space-joined window tokens`.

use std::io::Write;
use std::path::Path;

use super::{CorpusError, DieDat, MaskedSample, PosClass, PREDICT};

pub fn write_dataset<W: Write>(samples: &[MaskedSample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        let pos = s.pos_label.map_or("-".to_string(), |p| p.index().to_string());
        writeln!(out, "{}\t{}\t{}", s.target_label.index(), pos, s.window_tokens.join(" "))?;
    }
    out.flush()
}

pub fn read_dataset(path: &Path) -> Result<Vec<MaskedSample>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

pub fn parse_dataset(text: &str, source: &str) -> Result<Vec<MaskedSample>, CorpusError> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| CorpusError::Parse {
            path: source.to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let mut fields = line.splitn(3, '\t');
        let (Some(target), Some(pos), Some(tokens)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(err("expected three tab-separated fields"));
        };
        let target = target
            .parse::<usize>()
            .ok()
            .and_then(DieDat::from_index)
            .ok_or_else(|| err("target label must be 0 (dat) or 1 (die)"))?;
        let pos_label = match pos {
            "-" => None,
            p => Some(
                p.parse::<usize>()
                    .ok()
                    .and_then(PosClass::from_index)
                    .ok_or_else(|| err("pos label must be 0, 1, 2 or -"))?,
            ),
        };
        let window_tokens: Vec<String> = tokens.split(' ').map(str::to_string).collect();
        if window_tokens.iter().filter(|t| *t == PREDICT).count() != 1 {
            return Err(err("window must contain exactly one PREDICT token"));
        }
        samples.push(MaskedSample { window_tokens, target_label: target, pos_label, provenance: None });
    }
    Ok(samples)
}
