//! Pronunciation training engine: phoneme diagnosis, personalized
//! exaggerated audio and articulatory-animation feedback, proficiency
//! tracking, and the rating-analysis toolkit that derives exaggeration
//! ratios from listener judgments.

pub mod alignment;
pub mod audio;
pub mod diagnosis;
pub mod evaluation;
pub mod exaggeration;
pub mod phoneme;
pub mod ratios;
pub mod synth;
pub mod visual;

pub use alignment::{AlignmentResult, PhonemeSegment};
pub use audio::AudioBuffer;
pub use phoneme::{ClassId, Phoneme, PhonemeClassTable};
pub use ratios::{ExaggerationLevel, ProficiencyBand, RatioTable, RatioTriple};
