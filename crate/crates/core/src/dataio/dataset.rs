use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub const SCHEMA_VERSION: u32 = 1;
pub const NUM_CLASSES: usize = 3;

/// Which of the three empathy ratings a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelTarget {
    /// Expression of experience.
    #[default]
    Ee,
    /// Emotional reaction.
    Er,
    /// Cognitive reaction.
    Cr,
}

impl LabelTarget {
    pub const ALL: [LabelTarget; 3] = [LabelTarget::Ee, LabelTarget::Er, LabelTarget::Cr];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelTarget::Ee => "ee",
            LabelTarget::Er => "er",
            LabelTarget::Cr => "cr",
        }
    }
}

impl fmt::Display for LabelTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ee" => Ok(LabelTarget::Ee),
            "er" => Ok(LabelTarget::Er),
            "cr" => Ok(LabelTarget::Cr),
            other => Err(Error::Config(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub ee: u8,
    pub er: u8,
    pub cr: u8,
}

impl Labels {
    pub fn uniform(class: u8) -> Self {
        Labels {
            ee: class,
            er: class,
            cr: class,
        }
    }

    pub fn get(&self, target: LabelTarget) -> usize {
        match target {
            LabelTarget::Ee => self.ee as usize,
            LabelTarget::Er => self.er as usize,
            LabelTarget::Cr => self.cr as usize,
        }
    }
}

/// Feature widths of the three modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
}

/// Counts reads of a sample's supervisory document.
#[derive(Debug, Default)]
struct ReadCounter(AtomicUsize);

impl Clone for ReadCounter {
    fn clone(&self) -> Self {
        ReadCounter(AtomicUsize::new(self.0.load(Ordering::Relaxed)))
    }
}

/// One conversation segment with precomputed modality features.
#[derive(Debug, Clone)]
pub struct ConversationSample {
    pub id: String,
    pub text: Matrix,
    pub audio: Matrix,
    pub video: Matrix,
    pub labels: Labels,
    doc_tokens: Option<Vec<String>>,
    doc_reads: ReadCounter,
}

impl PartialEq for ConversationSample {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.text == other.text
            && self.audio == other.audio
            && self.video == other.video
            && self.labels == other.labels
            && self.doc_tokens == other.doc_tokens
    }
}

impl ConversationSample {
    pub fn new(
        id: impl Into<String>,
        text: Matrix,
        audio: Matrix,
        video: Matrix,
        labels: Labels,
        doc_tokens: Option<Vec<String>>,
    ) -> Self {
        ConversationSample {
            id: id.into(),
            text,
            audio,
            video,
            labels,
            doc_tokens,
            doc_reads: ReadCounter::default(),
        }
    }

    /// The supervisory document, if present. Every call is counted.
    pub fn doc_tokens(&self) -> Option<&[String]> {
        self.doc_reads.0.fetch_add(1, Ordering::Relaxed);
        self.doc_tokens.as_deref()
    }

    pub fn has_doc(&self) -> bool {
        self.doc_tokens.is_some()
    }

    /// How many times [`ConversationSample::doc_tokens`] has been called.
    pub fn doc_reads(&self) -> usize {
        self.doc_reads.0.load(Ordering::Relaxed)
    }

    pub fn set_doc_tokens(&mut self, tokens: Option<Vec<String>>) {
        self.doc_tokens = tokens;
    }

    pub fn label(&self, target: LabelTarget) -> usize {
        self.labels.get(target)
    }

    fn check(&self, dims: &Dims, line: usize) -> Result<()> {
        for (field, m, width) in [
            ("text", &self.text, dims.d_t),
            ("audio", &self.audio, dims.d_a),
            ("video", &self.video, dims.d_v),
        ] {
            if m.rows() == 0 {
                return Err(schema(line, field, "matrix has no rows"));
            }
            if m.cols() != width {
                return Err(schema(
                    line,
                    field,
                    format!("row width {} does not match declared {width}", m.cols()),
                ));
            }
            if !m.is_finite() {
                return Err(Error::Validation(format!(
                    "sample `{}` field `{field}` has non-finite entries",
                    self.id
                )));
            }
        }
        for t in LabelTarget::ALL {
            let v = self.labels.get(t);
            if v >= NUM_CLASSES {
                return Err(Error::Validation(format!(
                    "sample `{}` label {t} = {v} outside 0..{NUM_CLASSES}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema_version: u32,
    pub dims: Dims,
    pub samples: Vec<ConversationSample>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    dims: Dims,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    text: Vec<Vec<f64>>,
    audio: Vec<Vec<f64>>,
    video: Vec<Vec<f64>>,
    labels: Labels,
    doc_tokens: Option<Vec<String>>,
}

fn rows_to_matrix(rows: &[Vec<f64>], line: usize, field: &str) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(|e| match e {
        Error::Precondition(msg) => schema(line, field, msg),
        other => other,
    })
}

impl Dataset {
    /// Builds a dataset, checking every invariant.
    pub fn new(dims: Dims, samples: Vec<ConversationSample>) -> Result<Self> {
        let ds = Dataset {
            schema_version: SCHEMA_VERSION,
            dims,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, s) in self.samples.iter().enumerate() {
            s.check(&self.dims, i + 2)?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Validation(format!("duplicate sample id `{}`", s.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A new dataset holding clones of the samples at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema_version: self.schema_version,
            dims: self.dims,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn labels(&self, target: LabelTarget) -> Vec<usize> {
        self.samples.iter().map(|s| s.label(target)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = File::open(path)?;
        Self::read(BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Dataset> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));

        let (line_no, header) = lines.next().ok_or(Error::EmptyDataset)?;
        let header: Header = serde_json::from_str(&header?).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("invalid header: {e}"),
        })?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(schema(
                line_no,
                "schema_version",
                format!("unsupported version {}", header.schema_version),
            ));
        }
        let dims = header.dims;
        if dims.d_t == 0 || dims.d_a == 0 || dims.d_v == 0 {
            return Err(schema(line_no, "dims", "feature widths must be positive"));
        }

        let mut samples = Vec::new();
        let mut seen = HashSet::new();
        for (line_no, line) in lines {
            let rec: Record = serde_json::from_str(&line?).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let sample = ConversationSample::new(
                rec.id,
                rows_to_matrix(&rec.text, line_no, "text")?,
                rows_to_matrix(&rec.audio, line_no, "audio")?,
                rows_to_matrix(&rec.video, line_no, "video")?,
                rec.labels,
                rec.doc_tokens,
            );
            sample.check(&dims, line_no)?;
            if !seen.insert(sample.id.clone()) {
                return Err(Error::Validation(format!(
                    "line {line_no}: duplicate sample id `{}`",
                    sample.id
                )));
            }
            samples.push(sample);
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            schema_version: header.schema_version,
            dims,
            samples,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let header = Header {
            schema_version: self.schema_version,
            dims: self.dims,
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for s in &self.samples {
            let rec = Record {
                id: s.id.clone(),
                text: s.text.to_rows(),
                audio: s.audio.to_rows(),
                video: s.video.to_rows(),
                labels: s.labels,
                doc_tokens: s.doc_tokens.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"schema_version": 1, "dims": {"d_t": 2, "d_a": 1, "d_v": 1}}"#;

    fn record(id: &str, text: &str, ee: u8) -> String {
        format!(
            r#"{{"id": "{id}", "text": {text}, "audio": [[0.5]], "video": [[1.0],[2.0]], "labels": {{"ee": {ee}, "er": 1, "cr": 2}}, "doc_tokens": ["a", "b"]}}"#
        )
    }

    fn parse(body: &str) -> Result<Dataset> {
        Dataset::read(body.as_bytes())
    }

    #[test]
    fn header_without_records_is_empty() {
        assert!(matches!(parse(HEADER), Err(Error::EmptyDataset)));
        assert!(matches!(parse(""), Err(Error::EmptyDataset)));
    }

    #[test]
    fn single_record_loads() {
        let body = format!("{HEADER}\n{}\n", record("s1", "[[1, 2], [3, 4]]", 0));
        let ds = parse(&body).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples[0].text.shape(), (2, 2));
        assert_eq!(ds.samples[0].video.shape(), (2, 1));
    }

    #[test]
    fn ragged_text_is_a_schema_error_naming_the_field() {
        let body = format!("{HEADER}\n{}\n", record("s1", "[[1, 2], [3]]", 0));
        match parse(&body) {
            Err(Error::Schema { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "text");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn width_mismatch_is_a_schema_error() {
        let body = format!("{HEADER}\n{}\n", record("s1", "[[1, 2, 3]]", 0));
        assert!(matches!(parse(&body), Err(Error::Schema { ref field, .. }) if field == "text"));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let body = format!("{HEADER}\n{}\n{{not json\n", record("s1", "[[1, 2]]", 0));
        assert!(matches!(parse(&body), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let body = format!("{HEADER}\n{}\n", record("s1", "[[1, 2]]", 3));
        assert!(matches!(parse(&body), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let r = record("same", "[[1, 2]]", 0);
        let body = format!("{HEADER}\n{r}\n{r}\n");
        assert!(matches!(parse(&body), Err(Error::Validation(_))));
    }

    #[test]
    fn doc_reads_are_counted() {
        let body = format!("{HEADER}\n{}\n", record("s1", "[[1, 2]]", 0));
        let ds = parse(&body).unwrap();
        let s = &ds.samples[0];
        assert_eq!(s.doc_reads(), 0);
        assert!(s.has_doc());
        assert_eq!(s.doc_reads(), 0);
        assert_eq!(s.doc_tokens().unwrap().len(), 2);
        assert_eq!(s.doc_reads(), 1);
    }
}
