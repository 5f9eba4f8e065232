use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dims, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Audio,
    Video,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Video => "video",
        }
    }

    pub fn width(self, dims: &Dims) -> usize {
        match self {
            Modality::Text => dims.d_t,
            Modality::Audio => dims.d_a,
            Modality::Video => dims.d_v,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which modalities the network consumes. Absent modalities are excluded
/// before fusion and shrink the aggregation input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModalitySet {
    pub text: bool,
    pub audio: bool,
    pub video: bool,
}

impl Default for ModalitySet {
    fn default() -> Self {
        ModalitySet::ALL
    }
}

impl ModalitySet {
    pub const ALL: ModalitySet = ModalitySet {
        text: true,
        audio: true,
        video: true,
    };

    pub const fn new(text: bool, audio: bool, video: bool) -> Self {
        ModalitySet { text, audio, video }
    }

    /// The seven non-empty subsets: unimodal, bimodal, then trimodal.
    pub fn ablation_variants() -> [ModalitySet; 7] {
        [
            ModalitySet::new(true, false, false),
            ModalitySet::new(false, true, false),
            ModalitySet::new(false, false, true),
            ModalitySet::new(true, true, false),
            ModalitySet::new(true, false, true),
            ModalitySet::new(false, true, true),
            ModalitySet::ALL,
        ]
    }

    pub fn contains(&self, m: Modality) -> bool {
        match m {
            Modality::Text => self.text,
            Modality::Audio => self.audio,
            Modality::Video => self.video,
        }
    }

    pub fn count(&self) -> usize {
        usize::from(self.text) + usize::from(self.audio) + usize::from(self.video)
    }

    /// The modality every other one attends to: text when present, then audio,
    /// then video.
    pub fn anchor(&self) -> Option<Modality> {
        [Modality::Text, Modality::Audio, Modality::Video]
            .into_iter()
            .find(|&m| self.contains(m))
    }

    /// Modalities fused with the anchor, in aggregation order (video before audio).
    pub fn pairings(&self) -> Vec<Modality> {
        let anchor = self.anchor();
        [Modality::Video, Modality::Audio]
            .into_iter()
            .filter(|&m| self.contains(m) && Some(m) != anchor)
            .collect()
    }

    pub fn name(&self) -> String {
        let parts: Vec<&str> = [Modality::Text, Modality::Audio, Modality::Video]
            .into_iter()
            .filter(|&m| self.contains(m))
            .map(Modality::as_str)
            .collect();
        parts.join("+")
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ModalitySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = ModalitySet::new(false, false, false);
        for part in s.split('+') {
            match part.trim() {
                "text" => set.text = true,
                "audio" => set.audio = true,
                "video" => set.video = true,
                other => return Err(Error::Config(format!("unknown modality `{other}`"))),
            }
        }
        Ok(set)
    }
}

/// What the topic head pools over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TopicInput {
    /// Mean over tokens of the first pairing's projected text (K_T' of the
    /// video pairing in the full model).
    #[default]
    Projection,
    /// Mean over tokens of the raw text features.
    RawText,
}

/// Everything that determines parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub dims: Dims,
    pub hidden: usize,
    pub topics_k: usize,
    #[serde(default)]
    pub modalities: ModalitySet,
    #[serde(default)]
    pub topic_input: TopicInput,
    pub dropout_rate: f64,
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modalities.count() == 0 {
            return Err(Error::Config("at least one modality is required".into()));
        }
        if self.hidden == 0 || self.topics_k == 0 {
            return Err(Error::Config(
                "hidden size and topic count must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        let d = self.dims;
        if d.d_t == 0 || d.d_a == 0 || d.d_v == 0 {
            return Err(Error::Config("feature widths must be positive".into()));
        }
        Ok(())
    }

    pub fn anchor(&self) -> Modality {
        self.modalities.anchor().expect("validated modality set")
    }

    /// LSTM input width: 2·d_m per fused pairing plus the anchor width.
    pub fn lstm_input_width(&self) -> usize {
        self.modalities
            .pairings()
            .iter()
            .map(|m| 2 * m.width(&self.dims))
            .sum::<usize>()
            + self.anchor().width(&self.dims)
    }

    /// The topic head exists only when text is consumed.
    pub fn has_topic_head(&self) -> bool {
        self.modalities.text
    }

    /// Pairing whose projection feeds the topic head, if projection pooling applies.
    pub fn topic_source(&self) -> Option<Modality> {
        if self.topic_input == TopicInput::Projection && self.anchor() == Modality::Text {
            self.modalities.pairings().first().copied()
        } else {
            None
        }
    }

    pub fn topic_pool_width(&self) -> usize {
        match self.topic_source() {
            Some(m) => m.width(&self.dims),
            None => self.dims.d_t,
        }
    }

    pub fn num_classes(&self) -> usize {
        NUM_CLASSES
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(modalities: ModalitySet) -> ArchConfig {
        ArchConfig {
            dims: Dims {
                d_t: 4,
                d_a: 3,
                d_v: 2,
            },
            hidden: 5,
            topics_k: 3,
            modalities,
            topic_input: TopicInput::Projection,
            dropout_rate: 0.3,
        }
    }

    #[test]
    fn full_model_widths() {
        let a = arch(ModalitySet::ALL);
        // 2·d_v + 2·d_a + d_t
        assert_eq!(a.lstm_input_width(), 2 * 2 + 2 * 3 + 4);
        assert_eq!(
            a.modalities.pairings(),
            vec![Modality::Video, Modality::Audio]
        );
        assert_eq!(a.topic_source(), Some(Modality::Video));
        assert_eq!(a.topic_pool_width(), 2);
    }

    #[test]
    fn ablation_layouts() {
        let text = arch("text".parse().unwrap());
        assert_eq!(text.lstm_input_width(), 4);
        assert_eq!(text.topic_source(), None);
        assert_eq!(text.topic_pool_width(), 4);

        let av = arch("audio+video".parse().unwrap());
        assert_eq!(av.anchor(), Modality::Audio);
        assert_eq!(av.lstm_input_width(), 2 * 2 + 3);
        assert!(!av.has_topic_head());

        let names: Vec<String> = ModalitySet::ablation_variants()
            .iter()
            .map(ModalitySet::name)
            .collect();
        assert_eq!(
            names,
            [
                "text",
                "audio",
                "video",
                "text+audio",
                "text+video",
                "audio+video",
                "text+audio+video"
            ]
        );
    }

    #[test]
    fn validation() {
        assert!(arch(ModalitySet::new(false, false, false))
            .validate()
            .is_err());
        let mut a = arch(ModalitySet::ALL);
        a.dropout_rate = 1.0;
        assert!(a.validate().is_err());
        assert!("text+smell".parse::<ModalitySet>().is_err());
    }
}
