//! ICD-10 chapter ranges and code-to-chapter mapping.
//!
//! A code maps through its three-character category prefix (letter, digit,
//! alphanumeric, as in `K52` from `K52.9`). Range containment compares the
//! prefix lexicographically as ASCII bytes, which orders digits before
//! letters and therefore handles the `O00-O9A` endpoint correctly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chapter {
    pub start: &'static str,
    pub end: &'static str,
    pub name: &'static str,
}

impl Chapter {
    /// Display label, e.g. `"K00-K95 Diseases of the digestive system"`.
    pub fn label(&self) -> String {
        format!("{}-{} {}", self.start, self.end, self.name)
    }

    /// Range label alone, e.g. `"K00-K95"`.
    pub fn range(&self) -> String {
        format!("{}-{}", self.start, self.end)
    }

    pub fn contains(&self, code: &str) -> bool {
        match category_prefix(code) {
            Some(prefix) => {
                self.start.as_bytes() <= &prefix[..] && &prefix[..] <= self.end.as_bytes()
            }
            None => false,
        }
    }
}

/// The 22 chapters of the classification, in code order.
pub const CHAPTERS: [Chapter; 22] = [
    Chapter { start: "A00", end: "B99", name: "Certain infectious and parasitic diseases" },
    Chapter { start: "C00", end: "D49", name: "Neoplasms" },
    Chapter { start: "D50", end: "D89", name: "Diseases of the blood and blood-forming organs and certain disorders involving the immune mechanism" },
    Chapter { start: "E00", end: "E89", name: "Endocrine, nutritional and metabolic diseases" },
    Chapter { start: "F01", end: "F99", name: "Mental, Behavioral and Neurodevelopmental disorders" },
    Chapter { start: "G00", end: "G99", name: "Diseases of the nervous system" },
    Chapter { start: "H00", end: "H59", name: "Diseases of the eye and adnexa" },
    Chapter { start: "H60", end: "H95", name: "Diseases of the ear and mastoid process" },
    Chapter { start: "I00", end: "I99", name: "Diseases of the circulatory system" },
    Chapter { start: "J00", end: "J99", name: "Diseases of the respiratory system" },
    Chapter { start: "K00", end: "K95", name: "Diseases of the digestive system" },
    Chapter { start: "L00", end: "L99", name: "Diseases of the skin and subcutaneous tissue" },
    Chapter { start: "M00", end: "M99", name: "Diseases of the musculoskeletal system and connective tissue" },
    Chapter { start: "N00", end: "N99", name: "Diseases of the genitourinary system" },
    Chapter { start: "O00", end: "O9A", name: "Pregnancy, childbirth and the puerperium" },
    Chapter { start: "P00", end: "P96", name: "Certain conditions originating in the perinatal period" },
    Chapter { start: "Q00", end: "Q99", name: "Congenital malformations, deformations and chromosomal abnormalities" },
    Chapter { start: "R00", end: "R99", name: "Symptoms, signs and abnormal clinical and laboratory findings, not elsewhere classified" },
    Chapter { start: "S00", end: "T88", name: "Injury, poisoning and certain other consequences of external causes" },
    Chapter { start: "U00", end: "U85", name: "Codes for special purposes" },
    Chapter { start: "V00", end: "Y99", name: "External causes of morbidity" },
    Chapter { start: "Z00", end: "Z99", name: "Factors influencing health status and contact with health services" },
];

/// Range labels of the ten somatic-illness chapters used for the per-chapter
/// frequency analysis.
pub const ANALYSIS_CHAPTER_RANGES: [&str; 10] = [
    "C00-D49", "D50-D89", "G00-G99", "I00-I99", "J00-J99", "K00-K95", "M00-M99", "N00-N99",
    "O00-O9A", "Q00-Q99",
];

/// The chapters selected by [`ANALYSIS_CHAPTER_RANGES`], in code order.
pub fn analysis_chapters() -> Vec<&'static Chapter> {
    CHAPTERS
        .iter()
        .filter(|c| ANALYSIS_CHAPTER_RANGES.contains(&c.range().as_str()))
        .collect()
}

/// Uppercased three-character category prefix, or `None` when the code is
/// too short or violates the letter-digit-alphanumeric shape.
fn category_prefix(code: &str) -> Option<[u8; 3]> {
    let mut chars = code.trim().chars();
    let a = chars.next()?.to_ascii_uppercase();
    let b = chars.next()?;
    let c = chars.next()?.to_ascii_uppercase();
    if !a.is_ascii_alphabetic() || !b.is_ascii_digit() || !c.is_ascii_alphanumeric() {
        return None;
    }
    Some([a as u8, b as u8, c as u8])
}

/// Maps a diagnosis code to its chapter. Unmappable codes yield `None`.
pub fn chapter_of(code: &str) -> Option<&'static Chapter> {
    category_prefix(code)?;
    CHAPTERS.iter().find(|chapter| chapter.contains(code))
}

/// Looks a chapter up by its range label, e.g. `"K00-K95"`.
pub fn chapter_by_range(range: &str) -> Result<&'static Chapter> {
    CHAPTERS
        .iter()
        .find(|c| c.range() == range.trim().to_uppercase())
        .ok_or_else(|| Error::config(format!("unknown chapter range {range:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples_map_to_expected_chapters() {
        assert_eq!(
            chapter_of("K52.9").unwrap().label(),
            "K00-K95 Diseases of the digestive system"
        );
        assert_eq!(chapter_of("O9A.1").unwrap().range(), "O00-O9A");
        assert_eq!(chapter_of("o99").unwrap().range(), "O00-O9A");
        assert_eq!(chapter_of("C76").unwrap().name, "Neoplasms");
        assert_eq!(chapter_of("D49").unwrap().name, "Neoplasms");
        assert_eq!(chapter_of("D50").unwrap().range(), "D50-D89");
        assert_eq!(chapter_of("T88.7XXA").unwrap().range(), "S00-T88");
        assert_eq!(chapter_of("Z59.0").unwrap().range(), "Z00-Z99");
    }

    #[test]
    fn invalid_codes_map_to_none() {
        for code in ["", "K", "K5", "5K2", "KK2", "K5.", "???"] {
            assert_eq!(chapter_of(code), None, "code {code:?}");
        }
        // Valid shape but outside every range: T89 to U00 has no gap, but
        // U86-U99 is unassigned.
        assert_eq!(chapter_of("U90"), None);
    }

    #[test]
    fn chapters_are_disjoint_and_ordered() {
        for pair in CHAPTERS.windows(2) {
            assert!(
                pair[0].end.as_bytes() < pair[1].start.as_bytes(),
                "{} overlaps {}",
                pair[0].label(),
                pair[1].label()
            );
        }
        // Every valid prefix lands in at most one chapter by the check
        // above; spot-check full coverage boundaries.
        for chapter in &CHAPTERS {
            assert_eq!(chapter_of(chapter.start).unwrap(), chapter);
            assert_eq!(chapter_of(chapter.end).unwrap(), chapter);
        }
    }

    #[test]
    fn analysis_subset_is_ten_known_chapters() {
        let subset = analysis_chapters();
        assert_eq!(subset.len(), 10);
        let ranges: Vec<String> = subset.iter().map(|c| c.range()).collect();
        for expected in ANALYSIS_CHAPTER_RANGES {
            assert!(ranges.contains(&expected.to_string()), "{expected}");
        }
    }

    #[test]
    fn chapter_by_range_is_case_insensitive() {
        assert_eq!(chapter_by_range("k00-k95").unwrap().range(), "K00-K95");
        assert!(chapter_by_range("K00-K99").is_err());
    }
}
