//! Referring-expression analysis: tokenization, subject (root token)
//! selection and direction clues.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Top,
    Bottom,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Left,
        Direction::Right,
        Direction::Top,
        Direction::Bottom,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Top => Direction::Bottom,
            Direction::Bottom => Direction::Top,
        }
    }
}

pub type DirectionSet = BTreeSet<Direction>;

/// Drop every axis on which both directions are present.
pub fn resolve_conflicts(mut set: DirectionSet) -> DirectionSet {
    for d in [Direction::Left, Direction::Top] {
        if set.contains(&d) && set.contains(&d.opposite()) {
            set.remove(&d);
            set.remove(&d.opposite());
        }
    }
    set
}

/// Word → direction table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionLexicon {
    words: HashMap<String, Direction>,
}

impl Default for DirectionLexicon {
    fn default() -> Self {
        const TABLE: &[(&str, Direction)] = &[
            ("left", Direction::Left),
            ("leftmost", Direction::Left),
            ("left-most", Direction::Left),
            ("right", Direction::Right),
            ("rightmost", Direction::Right),
            ("right-most", Direction::Right),
            ("top", Direction::Top),
            ("upper", Direction::Top),
            ("uppermost", Direction::Top),
            ("bottom", Direction::Bottom),
            ("lower", Direction::Bottom),
            ("bottommost", Direction::Bottom),
        ];
        DirectionLexicon {
            words: TABLE.iter().map(|&(w, d)| (w.to_string(), d)).collect(),
        }
    }
}

impl DirectionLexicon {
    /// Load a lexicon from JSON of the form
    /// `{"left": ["left", ...], "right": [...], "top": [...], "bottom": [...]}`.
    /// Directions absent from the file have no trigger words.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: HashMap<Direction, Vec<String>> =
            serde_json::from_str(&text).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let mut words = HashMap::new();
        for (dir, list) in table {
            for w in list {
                words.insert(w.to_lowercase(), dir);
            }
        }
        Ok(DirectionLexicon { words })
    }

    pub fn lookup(&self, token: &str) -> Option<Direction> {
        self.words.get(&token.to_lowercase()).copied()
    }

    /// Union of lexicon hits over `tokens`, with conflicting axes dropped.
    pub fn detect(&self, tokens: &[String]) -> DirectionSet {
        resolve_conflicts(tokens.iter().filter_map(|t| self.lookup(t)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferringExpression {
    pub raw: String,
    pub tokens: Vec<String>,
    pub root_index: usize,
    pub directions: DirectionSet,
}

impl ReferringExpression {
    pub fn analyze(raw: &str, lexicon: &DirectionLexicon) -> Result<Self> {
        let tokens = tokenize(raw)?;
        let root_index = find_root_token(&tokens);
        let directions = lexicon.detect(&tokens);
        Ok(ReferringExpression {
            raw: raw.to_string(),
            tokens,
            root_index,
            directions,
        })
    }
}

/// Lowercase, whitespace-split, strip punctuation. Hyphens and apostrophes
/// inside a word survive ("left-most").
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .filter_map(|chunk| {
            let trimmed = chunk.trim_matches(|c: char| !c.is_alphanumeric());
            let word: String = trimmed
                .chars()
                .filter(|&c| c.is_alphanumeric() || c == '-' || c == '\'')
                .flat_map(char::to_lowercase)
                .collect();
            (!word.is_empty()).then_some(word)
        })
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyExpression);
    }
    Ok(tokens)
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "its", "their", "my", "your",
    "our", "some", "any", "each", "every", "one", "two", "three", "four", "five",
];

const PREPOSITIONS: &[&str] = &[
    "on", "in", "at", "of", "with", "by", "near", "behind", "beside", "besides", "under", "over",
    "above", "below", "between", "from", "to", "into", "onto", "next", "across", "against",
    "along", "around", "inside", "outside", "beneath", "toward", "towards", "without", "wearing",
    "holding", "for", "like",
];

const RELATIVE_PRONOUNS: &[&str] = &["who", "which", "that", "whose", "whom", "where"];

const CONJUNCTIONS: &[&str] = &["and", "or", "but", "while"];

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "has", "have", "had", "be", "being",
];

/// Nouns that happen to end in `-ing` / `-ed`.
const NOT_VERBS: &[&str] = &[
    "thing", "king", "ring", "wing", "string", "sling", "ceiling", "building", "painting",
    "clothing", "bed", "red", "shed", "sled", "sped", "bread", "head", "seed", "weed", "reed",
    "steed", "pudding", "wedding", "railing", "awning", "icing", "frosting",
];

fn is_verb_like(word: &str) -> bool {
    if AUXILIARIES.contains(&word) {
        return true;
    }
    if NOT_VERBS.contains(&word) {
        return false;
    }
    (word.len() > 4 && word.ends_with("ing")) || (word.len() > 3 && word.ends_with("ed"))
}

fn is_modifier_like(word: &str) -> bool {
    DirectionLexicon::default().lookup(word).is_some()
        || word.ends_with("most")
        || (word.len() > 4 && word.ends_with("est"))
}

/// Pick the head noun of the expression.
///
/// The first maximal run of content words (after leading determiners and
/// participles) is closed by a preposition, relative pronoun, conjunction,
/// determiner, verb-like token or the end of input; its last non-modifier
/// token is the root. Falls back to the last token when nothing qualifies.
pub fn find_root_token(tokens: &[String]) -> usize {
    let mut run: Option<(usize, usize)> = None;
    for (i, tok) in tokens.iter().enumerate() {
        let word = tok.to_lowercase();
        let w = word.as_str();
        let terminator = PREPOSITIONS.contains(&w)
            || RELATIVE_PRONOUNS.contains(&w)
            || CONJUNCTIONS.contains(&w)
            || DETERMINERS.contains(&w)
            || is_verb_like(w);
        match (run, terminator) {
            (None, true) => continue,
            (None, false) => run = Some((i, i)),
            (Some((start, _)), false) => run = Some((start, i)),
            (Some(_), true) => break,
        }
    }
    let Some((start, end)) = run else {
        return tokens.len().saturating_sub(1);
    };
    (start..=end)
        .rev()
        .find(|&i| !is_modifier_like(&tokens[i].to_lowercase()))
        .unwrap_or(end)
}

/// Lexicon lookup with the built-in table.
pub fn detect_direction(tokens: &[String]) -> DirectionSet {
    DirectionLexicon::default().detect(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("The black horse").unwrap(),
            toks(&["the", "black", "horse"])
        );
        assert_eq!(
            tokenize("left-most broccoli.").unwrap(),
            toks(&["left-most", "broccoli"])
        );
        assert!(matches!(tokenize(""), Err(Error::EmptyExpression)));
        assert!(matches!(tokenize("  ... !"), Err(Error::EmptyExpression)));
        assert_eq!(
            tokenize("man's (red) hat,").unwrap(),
            toks(&["man's", "red", "hat"])
        );
    }

    #[test]
    fn root_examples() {
        assert_eq!(
            find_root_token(&toks(&["the", "black", "horse", "jumping"])),
            2
        );
        assert_eq!(find_root_token(&toks(&["broccoli"])), 0);
        assert_eq!(
            find_root_token(&toks(&[
                "the", "leftmost", "broccoli", "on", "the", "plate"
            ])),
            2
        );
    }

    #[test]
    fn root_more_cases() {
        assert_eq!(find_root_token(&toks(&["man", "running"])), 0);
        assert_eq!(find_root_token(&toks(&["guy", "who", "is", "sitting"])), 0);
        assert_eq!(find_root_token(&toks(&["the", "horse", "left"])), 1);
        assert_eq!(
            find_root_token(&toks(&["standing", "woman", "in", "red"])),
            1
        );
        assert_eq!(find_root_token(&toks(&["the", "red", "building"])), 2);
        // nothing but function words
        assert_eq!(find_root_token(&toks(&["the", "of"])), 1);
    }

    #[test]
    fn root_is_case_stable() {
        let lower = toks(&["the", "black", "horse", "jumping"]);
        let upper = toks(&["The", "BLACK", "Horse", "Jumping"]);
        assert_eq!(find_root_token(&lower), find_root_token(&upper));
    }

    #[test]
    fn direction_examples() {
        assert!(detect_direction(&toks(&["a", "black", "horse"])).is_empty());
        assert_eq!(
            detect_direction(&toks(&["leftmost", "broccoli"])),
            DirectionSet::from([Direction::Left])
        );
        assert_eq!(
            detect_direction(&toks(&["bottom", "right", "sandwich"])),
            DirectionSet::from([Direction::Bottom, Direction::Right])
        );
    }

    #[test]
    fn conflicting_axis_dropped() {
        assert_eq!(
            detect_direction(&toks(&["left", "of", "the", "right", "top", "cup"])),
            DirectionSet::from([Direction::Top])
        );
    }

    #[test]
    fn custom_lexicon_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.json");
        fs::write(&p, r#"{"left": ["links"], "top": ["oben"]}"#).unwrap();
        let lex = DirectionLexicon::from_json_file(&p).unwrap();
        assert_eq!(
            lex.detect(&toks(&["links", "oben", "left"])),
            DirectionSet::from([Direction::Left, Direction::Top])
        );
        assert_eq!(lex.lookup("left"), None);
    }

    #[test]
    fn analyze_end_to_end() {
        let e = ReferringExpression::analyze(
            "The left-most broccoli on the plate.",
            &DirectionLexicon::default(),
        )
        .unwrap();
        assert_eq!(e.tokens[e.root_index], "broccoli");
        assert_eq!(e.directions, DirectionSet::from([Direction::Left]));
    }

    const FILLER: &[&str] = &[
        "horse", "the", "on", "plate", "red", "running", "a", "cup", "with",
    ];
    const CLUES: &[&str] = &[
        "left", "right", "top", "bottom", "upper", "lower", "leftmost",
    ];

    proptest! {
        #[test]
        fn non_lexicon_words_do_not_change_directions(
            base in proptest::collection::vec(0..CLUES.len() + FILLER.len(), 1..8),
            extra in proptest::collection::vec((0..FILLER.len(), 0..16usize), 0..6),
        ) {
            let pick = |i: usize| if i < CLUES.len() { CLUES[i] } else { FILLER[i - CLUES.len()] };
            let tokens: Vec<String> = base.iter().map(|&i| pick(i).to_string()).collect();
            let mut augmented = tokens.clone();
            for (w, pos) in extra {
                let at = pos % (augmented.len() + 1);
                augmented.insert(at, FILLER[w].to_string());
            }
            prop_assert_eq!(detect_direction(&tokens), detect_direction(&augmented));
        }

        #[test]
        fn root_index_in_range(words in proptest::collection::vec("[a-z]{1,9}", 1..10)) {
            let k = find_root_token(&words);
            prop_assert!(k < words.len());
            let upper: Vec<String> = words.iter().map(|w| w.to_uppercase()).collect();
            prop_assert_eq!(k, find_root_token(&upper));
        }
    }
}
