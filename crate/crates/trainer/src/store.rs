//! On-disk state under the data directory.
//!
//! * `events.jsonl`: append-only log, one `{"seq": n, "event": {...}}` object
//!   per line, synced to disk before the append returns.
//! * `artifacts/<id>.wav|json`: write-once feedback artifacts.
//! * `snapshots/<learner_id>.toml`: periodic learner snapshots; the log
//!   remains the source of truth and is replayed past the snapshot's `seq`.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use pronunciation_core::diagnosis::ProficiencyProfile;
use pronunciation_core::phoneme::FORMAT_VERSION;
use pronunciation_core::ClassId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::course::CourseScript;
use crate::model::{AttemptRecord, Learner, LearnerState};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt event log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("corrupt snapshot {path}: {message}")]
    CorruptSnapshot { path: PathBuf, message: String },
    #[error("artifact {0} already exists")]
    ArtifactExists(String),
    #[error("invalid artifact id {0:?}")]
    InvalidArtifactId(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    LearnerCreated(Learner),
    CourseCreated(CourseScript),
    AttemptRecorded(Box<AttemptRecord>),
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    seq: u64,
    event: Event,
}

pub struct EventLog {
    file: File,
    path: PathBuf,
    next_seq: u64,
}

impl EventLog {
    /// Opens or creates the log and returns it with every recorded event.
    /// A final line cut short by a crash is discarded.
    pub fn open(path: &Path) -> Result<(Self, Vec<(u64, Event)>), StoreError> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut events = Vec::new();
        let mut valid_len = 0u64;
        let mut torn = None;
        {
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            let mut line_no = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line).map_err(io_err(path))?;
                if n == 0 {
                    break;
                }
                line_no += 1;
                if !line.ends_with('\n') {
                    torn = Some(line_no);
                    break;
                }
                let parsed: LogLine =
                    serde_json::from_str(&line).map_err(|e| StoreError::CorruptLog {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                if let Some((prev, _)) = events.last() {
                    if parsed.seq <= *prev {
                        return Err(StoreError::CorruptLog {
                            line: line_no,
                            message: format!("sequence {} after {}", parsed.seq, prev),
                        });
                    }
                }
                events.push((parsed.seq, parsed.event));
                valid_len += n as u64;
            }
        }
        if let Some(line) = torn {
            log::warn!(
                "discarding incomplete event at line {line} of {}",
                path.display()
            );
            file.set_len(valid_len).map_err(io_err(path))?;
            file.sync_all().map_err(io_err(path))?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        let next_seq = events.last().map_or(1, |(s, _)| s + 1);
        Ok((
            Self {
                file,
                path: path.to_owned(),
                next_seq,
            },
            events,
        ))
    }

    /// Appends `event` durably and returns its sequence number.
    pub fn append(&mut self, event: &Event) -> Result<u64, StoreError> {
        let seq = self.next_seq;
        let mut line = serde_json::to_string(&LogLine {
            seq,
            event: event.clone(),
        })
        .expect("events serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(io_err(&self.path))?;
        self.next_seq += 1;
        Ok(seq)
    }
}

/// Rebuilds every learner from the log alone.
pub fn replay(events: &[(u64, Event)]) -> BTreeMap<String, LearnerState> {
    let mut learners = BTreeMap::new();
    for (seq, event) in events {
        apply_event(&mut learners, *seq, event);
    }
    learners
}

pub(crate) fn apply_event(learners: &mut BTreeMap<String, LearnerState>, seq: u64, event: &Event) {
    match event {
        Event::LearnerCreated(l) => {
            learners.insert(l.learner_id.clone(), LearnerState::new(l.clone(), seq));
        }
        Event::AttemptRecorded(a) => {
            if let Some(state) = learners.get_mut(&a.learner_id) {
                if seq > state.last_seq {
                    state.apply(&a.scorecard, seq);
                }
            }
        }
        Event::CourseCreated(_) => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Wav,
    Json,
}

impl ArtifactKind {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Wav => "wav",
            Self::Json => "json",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Self::Wav => "audio/wav",
            Self::Json => "application/json",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: PathBuf,
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidArtifactId(id.to_owned()))
    }
}

impl ArtifactStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_owned(),
        })
    }

    fn path(&self, id: &str, kind: ArtifactKind) -> PathBuf {
        self.dir.join(format!("{id}.{}", kind.extension()))
    }

    /// Writes a new artifact; existing ids are never overwritten.
    pub fn put(&self, id: &str, kind: ArtifactKind, bytes: &[u8]) -> Result<(), StoreError> {
        check_id(id)?;
        if self.find(id).is_some() {
            return Err(StoreError::ArtifactExists(id.to_owned()));
        }
        let path = self.path(id, kind);
        let mut f = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(StoreError::ArtifactExists(id.to_owned()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        f.write_all(bytes)
            .and_then(|_| f.sync_all())
            .map_err(io_err(&path))
    }

    /// Writes the artifact unless one with this id already exists.
    pub fn put_if_absent(
        &self,
        id: &str,
        kind: ArtifactKind,
        bytes: &[u8],
    ) -> Result<(), StoreError> {
        match self.put(id, kind, bytes) {
            Err(StoreError::ArtifactExists(_)) => Ok(()),
            other => other,
        }
    }

    fn find(&self, id: &str) -> Option<(PathBuf, ArtifactKind)> {
        [ArtifactKind::Wav, ArtifactKind::Json]
            .into_iter()
            .map(|k| (self.path(id, k), k))
            .find(|(p, _)| p.exists())
    }

    pub fn get(&self, id: &str) -> Result<Option<(Vec<u8>, ArtifactKind)>, StoreError> {
        check_id(id)?;
        match self.find(id) {
            None => Ok(None),
            Some((path, kind)) => {
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                Ok(Some((bytes, kind)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

impl SnapshotStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_owned(),
        })
    }

    fn path(&self, learner_id: &str) -> PathBuf {
        self.dir.join(format!("{learner_id}.toml"))
    }

    /// Writes the snapshot atomically through a temporary file.
    pub fn save(&self, state: &LearnerState) -> Result<(), StoreError> {
        check_id(&state.learner.learner_id)?;
        let path = self.path(&state.learner.learner_id);
        let tmp = path.with_extension("toml.tmp");
        let text = snapshot_to_toml(state);
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.sync_all())
            .map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    /// Restores the snapshot of `learner`, if one exists.
    pub fn load(&self, learner: &Learner) -> Result<Option<LearnerState>, StoreError> {
        let path = self.path(&learner.learner_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path)(e)),
        };
        snapshot_from_toml(&text, learner)
            .map(Some)
            .map_err(|message| StoreError::CorruptSnapshot { path, message })
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format_version: u32,
    learner_id: String,
    seq: u64,
    attempts: u64,
    #[serde(default)]
    recent: BTreeMap<String, Vec<f64>>,
}

/// Profile document extended with the learner id, sequence number, attempt
/// count and recent per-class results.
pub fn snapshot_to_toml(state: &LearnerState) -> String {
    let mut table: toml::Table =
        toml::from_str(&state.profile.to_toml()).expect("profile document is valid toml");
    let header = SnapshotHeader {
        format_version: FORMAT_VERSION,
        learner_id: state.learner.learner_id.clone(),
        seq: state.last_seq,
        attempts: state.attempts,
        recent: state
            .recent
            .iter()
            .map(|(k, v)| (k.0.clone(), v.iter().copied().collect()))
            .collect(),
    };
    let header: toml::Table = toml::Table::try_from(&header).expect("header serializes");
    table.extend(header);
    toml::to_string(&table).expect("snapshot serializes")
}

fn snapshot_from_toml(text: &str, learner: &Learner) -> Result<LearnerState, String> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let header: SnapshotHeader = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string())?;
    if header.learner_id != learner.learner_id {
        return Err(format!("belongs to learner {}", header.learner_id));
    }
    for k in ["learner_id", "seq", "attempts", "recent"] {
        table.remove(k);
    }
    let profile =
        ProficiencyProfile::from_toml(&toml::to_string(&table).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    Ok(LearnerState {
        learner: learner.clone(),
        profile,
        recent: header
            .recent
            .into_iter()
            .map(|(k, v)| (ClassId(k), v.into_iter().collect::<VecDeque<_>>()))
            .collect(),
        attempts: header.attempts,
        last_seq: header.seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn learner(id: &str) -> Learner {
        Learner {
            learner_id: id.into(),
            display_name: "A".into(),
            created_at: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn log_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        {
            let (mut log, events) = EventLog::open(&path).unwrap();
            assert!(events.is_empty());
            assert_eq!(log.append(&Event::LearnerCreated(learner("a"))).unwrap(), 1);
            assert_eq!(log.append(&Event::LearnerCreated(learner("b"))).unwrap(), 2);
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":3,\"ev").unwrap();
        drop(f);
        let (mut log, events) = EventLog::open(&path).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(log.append(&Event::LearnerCreated(learner("c"))).unwrap(), 3);
        let (_, events) = EventLog::open(&path).unwrap();
        assert_eq!(events.len(), 3);
    }

    #[test]
    fn corrupt_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            EventLog::open(&path),
            Err(StoreError::CorruptLog { line: 1, .. })
        ));
    }

    #[test]
    fn artifacts_are_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        store.put("x1", ArtifactKind::Json, b"{}").unwrap();
        assert!(matches!(
            store.put("x1", ArtifactKind::Wav, b"RIFF"),
            Err(StoreError::ArtifactExists(_))
        ));
        let (bytes, kind) = store.get("x1").unwrap().unwrap();
        assert_eq!((bytes.as_slice(), kind), (&b"{}"[..], ArtifactKind::Json));
        assert!(store.get("missing").unwrap().is_none());
        assert!(store.get("../etc/passwd").is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::open(dir.path()).unwrap();
        let mut state = LearnerState::new(learner("a"), 1);
        state.profile.record(ClassId::new("nasals"), 41.25);
        state.profile.record(ClassId::new("nasals"), 77.5);
        state
            .recent
            .insert(ClassId::new("nasals"), VecDeque::from([41.25, 77.5]));
        state.attempts = 2;
        state.last_seq = 9;
        store.save(&state).unwrap();
        assert_eq!(store.load(&learner("a")).unwrap().unwrap(), state);
        assert!(store.load(&learner("b")).unwrap().is_none());
    }
}
