//! Part-of-speech tagging behind a small trait, plus a rule-based default.

use super::Pos;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tagger failed: {0}")]
pub struct TagError(pub String);

/// One tag per token; `None` for closed-class words, punctuation and numbers.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Result<Vec<Option<Pos>>, TagError>;
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
    "their", "some", "any", "no", "every", "each", "another", "such", "what", "which", "whose",
];

const CLOSED: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "who", "whom", "and",
    "or", "but", "nor", "so", "yet", "if", "because", "although", "though", "while", "when",
    "where", "as", "than", "of", "in", "on", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "from", "up",
    "down", "out", "off", "over", "under", "to", "not", "there", "here", "then", "also", "very",
    "too", "quite", "rather", "all", "both", "most", "more", "many", "much", "few", "several",
    "one", "two", "three",
];

const SUBJECT_PRONOUNS: &[&str] = &["i", "you", "he", "she", "it", "we", "they", "who"];

const MODALS: &[&str] = &["can", "could", "will", "would", "shall", "should", "may", "might", "must"];

const VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "go", "goes", "went", "make", "makes", "made", "take", "takes", "took", "get", "gets",
    "got", "give", "gives", "gave", "come", "comes", "came", "see", "sees", "saw", "know", "knows",
    "knew", "think", "thinks", "thought", "feel", "feels", "felt", "become", "becomes", "became",
    "seem", "seems", "seemed", "keep", "keeps", "kept", "find", "finds", "found", "say", "says",
    "said", "help", "helps", "helped", "appears", "appeared", "remains", "remained", "lives",
    "lived", "works", "worked",
];

/// Lexicon-and-suffix tagger with a couple of positional rules.
///
/// Good enough to separate attributive adjectives from nominal uses of the
/// same word ("had little time" vs. "a little goes a long way"). Swap in a
/// statistical tagger through [`PosTagger`] for production corpora.
#[derive(Debug, Clone, Default)]
pub struct RuleTagger;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Punct,
    Det,
    Closed,
    Modal,
    Verb,
    Open,
}

fn classify(word: &str) -> Class {
    if !word.chars().any(char::is_alphabetic) {
        return Class::Punct;
    }
    if DETERMINERS.contains(&word) {
        Class::Det
    } else if MODALS.contains(&word) {
        Class::Modal
    } else if VERBS.contains(&word) {
        Class::Verb
    } else if CLOSED.contains(&word) {
        Class::Closed
    } else {
        Class::Open
    }
}

fn by_suffix(word: &str) -> Option<Pos> {
    const NOUN: &[&str] = &["tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "ism"];
    const ADJ: &[&str] = &["ous", "ful", "ive", "able", "ible", "ical", "less"];
    if word.len() > 4 && word.ends_with("ly") {
        return Some(Pos::Adv);
    }
    if NOUN.iter().any(|s| word.len() > s.len() + 2 && word.ends_with(s)) {
        return Some(Pos::Noun);
    }
    if ADJ.iter().any(|s| word.len() > s.len() + 2 && word.ends_with(s)) {
        return Some(Pos::Adj);
    }
    if word.len() > 5 && (word.ends_with("ing") || word.ends_with("ed")) {
        return Some(Pos::Verb);
    }
    None
}

impl PosTagger for RuleTagger {
    fn tag(&self, tokens: &[String]) -> Result<Vec<Option<Pos>>, TagError> {
        if tokens.is_empty() {
            return Err(TagError("empty token sequence".into()));
        }
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let classes: Vec<Class> = lower.iter().map(|w| classify(w)).collect();
        let tags = (0..tokens.len())
            .map(|i| {
                let prev = i.checked_sub(1).map(|j| (classes[j], lower[j].as_str()));
                let next = classes.get(i + 1).copied();
                match classes[i] {
                    Class::Punct | Class::Det | Class::Closed | Class::Modal => None,
                    Class::Verb => Some(Pos::Verb),
                    Class::Open => Some(tag_open(&lower[i], prev, next)),
                }
            })
            .collect();
        Ok(tags)
    }
}

fn tag_open(word: &str, prev: Option<(Class, &str)>, next: Option<Class>) -> Pos {
    if let Some(pos) = by_suffix(word) {
        return pos;
    }
    match prev {
        Some((_, "to")) | Some((Class::Modal, _)) => return Pos::Verb,
        Some((Class::Closed, w)) if SUBJECT_PRONOUNS.contains(&w) => return Pos::Verb,
        _ => {}
    }
    match next {
        // attributive: directly before another open-class word
        Some(Class::Open) => Pos::Adj,
        _ => Pos::Noun,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn tag_of(sentence: &str, word: &str) -> Option<Pos> {
        let t = toks(sentence);
        let i = t.iter().position(|w| w == word).unwrap();
        RuleTagger.tag(&t).unwrap()[i]
    }

    #[test]
    fn attributive_adjective() {
        assert_eq!(tag_of("he had little time for composing", "little"), Some(Pos::Adj));
        assert_eq!(tag_of("or a small unincorporated community", "small"), Some(Pos::Adj));
    }

    #[test]
    fn nominal_use() {
        assert_eq!(tag_of("a little goes a long way", "little"), Some(Pos::Noun));
        assert_eq!(tag_of("she respected the elders .", "elders"), Some(Pos::Noun));
    }

    #[test]
    fn verbs_and_adverbs() {
        assert_eq!(tag_of("they had to postpone the trip", "postpone"), Some(Pos::Verb));
        assert_eq!(tag_of("we delay the meeting", "delay"), Some(Pos::Verb));
        assert_eq!(tag_of("he left shortly after", "shortly"), Some(Pos::Adv));
    }

    #[test]
    fn empty_input_fails() {
        assert!(RuleTagger.tag(&[]).is_err());
    }
}
