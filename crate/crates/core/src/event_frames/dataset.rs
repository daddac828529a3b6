//! Labeled event datasets on disk and their text manifests.
//!
//! A manifest is a UTF-8 text file with one `path<TAB>label<TAB>threshold`
//! record per line, LF endings, sorted by path. Paths are relative to the
//! manifest's directory. The split is carried by the file name
//! (`train.tsv` / `test.tsv`).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{decode_evf, encode_evf, load_pgm, sequence_events, EventFrame, EventMode, GrayFrame, Threshold};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(Error::Data(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn manifest_name(self) -> String {
        format!("{}.tsv", self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    split: Split,
    threshold: Threshold,
}

impl DatasetManifest {
    /// Sorts entries by path and rejects duplicates.
    pub fn new(mut entries: Vec<ManifestEntry>, split: Split, threshold: Threshold) -> Result<Self> {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(w) = entries.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(Error::Data(format!("duplicate manifest path `{}`", w[0].path)));
        }
        for e in &entries {
            if e.path.is_empty() || e.path.contains(['\t', '\n']) {
                return Err(Error::Data(format!("unrepresentable manifest path {:?}", e.path)));
            }
        }
        Ok(DatasetManifest {
            entries,
            split,
            threshold,
        })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(positives, negatives)`.
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label.is_positive()).count();
        (pos, self.entries.len() - pos)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.path, e.label.as_str(), self.threshold));
        }
        out
    }

    pub fn parse(text: &str, split: Split) -> Result<Self> {
        let mut entries = Vec::new();
        let mut threshold: Option<Threshold> = None;
        for (lineno, line) in text.lines().enumerate() {
            let ctx = |msg: String| Error::Data(format!("manifest line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, label, th] = fields[..] else {
                return Err(ctx(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let th: u32 = th.parse().map_err(|_| ctx(format!("bad threshold `{th}`")))?;
            let th = Threshold::new(th).map_err(|e| ctx(e.to_string()))?;
            match threshold {
                Some(t) if t != th => return Err(ctx(format!("threshold {th} differs from {t}"))),
                _ => threshold = Some(th),
            }
            entries.push(ManifestEntry {
                path: path.to_string(),
                label: label.parse().map_err(|e: Error| ctx(e.to_string()))?,
            });
        }
        let threshold = threshold.ok_or_else(|| Error::Data("empty manifest".into()))?;
        Self::new(entries, split, threshold)
    }

    /// Loads a manifest file; the split comes from the file stem and
    /// defaults to train when the stem is neither `train` nor `test`.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let split = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .unwrap_or(Split::Train);
        Self::parse(&text, split).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_text().as_bytes())
    }

    /// Decodes every referenced frame, relative to `root`, checking that
    /// each one carries the manifest threshold.
    pub fn load_frames(&self, root: &Path) -> Result<Vec<(EventFrame, Label)>> {
        self.entries
            .iter()
            .map(|e| {
                let path = root.join(&e.path);
                let frame = decode_evf(&fsutil::read(&path)?).map_err(|err| Error::Data(format!("{}: {err}", path.display())))?;
                if frame.threshold() != self.threshold {
                    return Err(Error::Data(format!(
                        "{}: threshold {} but manifest says {}",
                        path.display(),
                        frame.threshold(),
                        self.threshold
                    )));
                }
                Ok((frame, e.label))
            })
            .collect()
    }
}

/// One directory holding a single frame sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDir {
    pub path: PathBuf,
    pub label: Label,
}

/// `*.pgm` files directly inside `dir`, in lexicographic order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// A directory that directly holds frames is one sequence; otherwise each
/// subdirectory (sorted) holding frames is a sequence.
pub fn expand_sequence_dirs(dir: &Path, label: Label) -> Result<Vec<SequenceDir>> {
    if !list_frame_files(dir)?.is_empty() {
        return Ok(vec![SequenceDir {
            path: dir.to_path_buf(),
            label,
        }]);
    }
    let mut subdirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            subdirs.push(path);
        }
    }
    subdirs.sort();
    let mut out = Vec::new();
    for path in subdirs {
        if !list_frame_files(&path)?.is_empty() {
            out.push(SequenceDir { path, label });
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no frame sequences found", dir.display())));
    }
    Ok(out)
}

/// Loads a sequence, rejecting empty directories and mixed dimensions.
pub fn load_sequence(dir: &Path) -> Result<Vec<GrayFrame>> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no .pgm frames", dir.display())));
    }
    let frames = files
        .iter()
        .map(|p| load_pgm(&fsutil::read(p)?).map_err(|e| Error::Data(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| (f.width(), f.height()) != (w, h)) {
        return Err(Error::Data(format!(
            "{}: frame {} is {}x{}, sequence is {w}x{h}",
            files[i].display(),
            i,
            f.width(),
            f.height()
        )));
    }
    Ok(frames)
}

#[derive(Debug, Clone)]
pub struct BuildSummary {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub positives: usize,
    pub negatives: usize,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Synthesizes event frames for every sequence and writes them with a
/// manifest (`<split>.tsv`) under `out_dir`.
///
/// Files land at `<split>/<label>/<ordinal>-<dirname>/<frame index>.evf`, so
/// both splits can share `out_dir`. Output is
/// byte-identical across runs and across parallel/sequential execution.
pub fn build_dataset(
    sequences: &[SequenceDir],
    th: Threshold,
    mode: EventMode,
    split: Split,
    out_dir: &Path,
) -> Result<BuildSummary> {
    if sequences.is_empty() {
        return Err(Error::Data("no input sequences".into()));
    }
    let render = |(ordinal, seq): (usize, &SequenceDir)| -> Result<Vec<(String, Label, Vec<u8>)>> {
        let frames = load_sequence(&seq.path)?;
        let base = seq
            .path
            .file_name()
            .map(|n| sanitize(&n.to_string_lossy()))
            .unwrap_or_default();
        sequence_events(&frames, th, mode)
            .map_err(|e| Error::Data(format!("{}: {e}", seq.path.display())))?
            .into_iter()
            .map(|ev| {
                let rel = format!(
                    "{}/{}/{ordinal:04}-{base}/{:06}.evf",
                    split.as_str(),
                    seq.label.as_str(),
                    ev.source_index()
                );
                Ok((rel, seq.label, encode_evf(&ev)?))
            })
            .collect()
    };
    let rendered: Vec<Vec<_>> = if fsutil::deterministic_mode() {
        sequences.iter().enumerate().map(render).collect::<Result<_>>()?
    } else {
        sequences.par_iter().enumerate().map(render).collect::<Result<_>>()?
    };

    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for (rel, label, bytes) in rendered.into_iter().flatten() {
        fsutil::write_atomic(&out_dir.join(&rel), &bytes)?;
        if !seen.insert(rel.clone()) {
            return Err(Error::Data(format!("duplicate output path {rel}")));
        }
        entries.push(ManifestEntry { path: rel, label });
    }
    let manifest = DatasetManifest::new(entries, split, th)?;
    let manifest_path = out_dir.join(split.manifest_name());
    manifest.save(&manifest_path)?;
    let (positives, negatives) = manifest.counts();
    Ok(BuildSummary {
        manifest,
        manifest_path,
        positives,
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_frames::encode_pgm;

    fn write_sequence(dir: &Path, values: &[u8]) {
        fs::create_dir_all(dir).unwrap();
        for (i, &v) in values.iter().enumerate() {
            let f = GrayFrame::filled(4, 4, v).unwrap();
            fs::write(dir.join(format!("f{i:03}.pgm")), encode_pgm(&f)).unwrap();
        }
    }

    fn collect_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn two_labeled_dirs_give_four_plus_four() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(&tmp.path().join("pos"), &[0, 10, 20, 30, 40]);
        write_sequence(&tmp.path().join("neg"), &[0, 0, 0, 0, 0]);
        let seqs = [
            SequenceDir { path: tmp.path().join("pos"), label: Label::Positive },
            SequenceDir { path: tmp.path().join("neg"), label: Label::Negative },
        ];
        let out = tmp.path().join("out");
        let th = Threshold::new(8).unwrap();
        let s = build_dataset(&seqs, th, EventMode::Successive, Split::Train, &out).unwrap();
        assert_eq!((s.positives, s.negatives), (4, 4));
        assert_eq!(s.manifest_path, out.join("train.tsv"));

        let loaded = DatasetManifest::load(&s.manifest_path).unwrap();
        assert_eq!(loaded, s.manifest);
        let frames = loaded.load_frames(&out).unwrap();
        for (f, label) in frames {
            assert_eq!(f.event_count() > 0, label == Label::Positive);
        }
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(&tmp.path().join("a"), &[5, 50, 9]);
        write_sequence(&tmp.path().join("b"), &[200, 100, 0, 7]);
        let seqs = [
            SequenceDir { path: tmp.path().join("b"), label: Label::Negative },
            SequenceDir { path: tmp.path().join("a"), label: Label::Positive },
        ];
        let th = Threshold::new(4).unwrap();
        build_dataset(&seqs, th, EventMode::Reference, Split::Test, &tmp.path().join("o1")).unwrap();
        build_dataset(&seqs, th, EventMode::Reference, Split::Test, &tmp.path().join("o2")).unwrap();
        let t1 = collect_tree(&tmp.path().join("o1"));
        assert_eq!(t1.len(), 2 + 3 + 1);
        assert_eq!(t1, collect_tree(&tmp.path().join("o2")));
    }

    #[test]
    fn empty_and_mixed_sequences_fail() {
        let tmp = tempfile::tempdir().unwrap();
        let empty = tmp.path().join("empty");
        fs::create_dir_all(&empty).unwrap();
        let th = Threshold::new(4).unwrap();
        let seq = [SequenceDir { path: empty, label: Label::Positive }];
        assert!(build_dataset(&seq, th, EventMode::Successive, Split::Train, tmp.path()).is_err());

        let mixed = tmp.path().join("mixed");
        write_sequence(&mixed, &[1]);
        fs::write(mixed.join("f999.pgm"), encode_pgm(&GrayFrame::filled(2, 2, 0).unwrap())).unwrap();
        let err = load_sequence(&mixed).unwrap_err();
        assert!(err.to_string().contains("f999.pgm"), "{err}");
    }

    #[test]
    fn manifest_text_format() {
        let th = Threshold::new(12).unwrap();
        let m = DatasetManifest::new(
            vec![
                ManifestEntry { path: "b.evf".into(), label: Label::Negative },
                ManifestEntry { path: "a.evf".into(), label: Label::Positive },
            ],
            Split::Test,
            th,
        )
        .unwrap();
        assert_eq!(m.to_text(), "a.evf\tpositive\t12\nb.evf\tnegative\t12\n");
        assert_eq!(DatasetManifest::parse(&m.to_text(), Split::Test).unwrap(), m);

        assert!(DatasetManifest::parse("a\tpositive\t4\nb\tnegative\t8\n", Split::Train).is_err());
        assert!(DatasetManifest::parse("a\tmaybe\t4\n", Split::Train).is_err());
        assert!(DatasetManifest::parse("", Split::Train).is_err());
        assert!(DatasetManifest::parse("a\tpositive\t4\na\tnegative\t4\n", Split::Train).is_err());
    }

    #[test]
    fn expands_parent_directories() {
        let tmp = tempfile::tempdir().unwrap();
        write_sequence(&tmp.path().join("p/s2"), &[0, 1]);
        write_sequence(&tmp.path().join("p/s1"), &[0, 1]);
        let seqs = expand_sequence_dirs(&tmp.path().join("p"), Label::Positive).unwrap();
        let names: Vec<_> = seqs.iter().map(|s| s.path.file_name().unwrap().to_owned()).collect();
        assert_eq!(names, ["s1", "s2"]);
        assert_eq!(expand_sequence_dirs(&tmp.path().join("p/s1"), Label::Negative).unwrap().len(), 1);
    }
}
