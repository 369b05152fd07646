//! Per-pair surface forms used to recognise and swap target words.

use serde::{Deserialize, Serialize};

use super::{Member, Pos};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    Base,
    Plural,
    ThirdSingular,
    Past,
    Gerund,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InflectionTable {
    forms: [Vec<(FormTag, String)>; 2],
}

impl InflectionTable {
    /// Lemma-only table: each member matches its own surface string and nothing else.
    pub fn exact(w1: &str, w2: &str) -> Self {
        Self {
            forms: [
                vec![(FormTag::Base, w1.to_lowercase())],
                vec![(FormTag::Base, w2.to_lowercase())],
            ],
        }
    }

    /// Regular English inflections for the given part of speech.
    pub fn regular(w1: &str, w2: &str, pos: Pos) -> Self {
        let mut table = Self::exact(w1, w2);
        for (slot, lemma) in [(0, w1), (1, w2)] {
            let lemma = lemma.to_lowercase();
            let extra: Vec<(FormTag, String)> = match pos {
                Pos::Noun => vec![(FormTag::Plural, sibilant_plural(&lemma))],
                Pos::Verb => vec![
                    (FormTag::ThirdSingular, sibilant_plural(&lemma)),
                    (FormTag::Past, past_tense(&lemma)),
                    (FormTag::Gerund, gerund(&lemma)),
                ],
                Pos::Adj | Pos::Adv => Vec::new(),
            };
            table.forms[slot].extend(extra);
        }
        table.drop_collisions();
        table
    }

    /// Adds or replaces one form, e.g. an irregular plural.
    pub fn set_form(&mut self, member: Member, tag: FormTag, surface: &str) {
        let forms = &mut self.forms[member.slot()];
        let surface = surface.to_lowercase();
        match forms.iter_mut().find(|(t, _)| *t == tag) {
            Some(entry) => entry.1 = surface,
            None => forms.push((tag, surface)),
        }
        self.drop_collisions();
    }

    pub fn identify(&self, token: &str) -> Option<(Member, FormTag)> {
        let lower = token.to_lowercase();
        for member in Member::BOTH {
            if let Some((tag, _)) = self.forms[member.slot()].iter().find(|(_, s)| *s == lower) {
                return Some((member, *tag));
            }
        }
        None
    }

    pub fn form(&self, member: Member, tag: FormTag) -> Option<&str> {
        self.forms[member.slot()]
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, s)| s.as_str())
    }

    pub fn forms(&self, member: Member) -> impl Iterator<Item = (FormTag, &str)> {
        self.forms[member.slot()].iter().map(|(t, s)| (*t, s.as_str()))
    }

    // A surface shared by both members would make the filled word ambiguous.
    fn drop_collisions(&mut self) {
        let [a, b] = &mut self.forms;
        let shared: Vec<String> = a
            .iter()
            .filter(|(_, s)| b.iter().any(|(_, o)| o == s))
            .map(|(_, s)| s.clone())
            .collect();
        a.retain(|(t, s)| *t == FormTag::Base || !shared.contains(s));
        b.retain(|(t, s)| *t == FormTag::Base || !shared.contains(s));
    }
}

/// Renders `replacement` with the letter case pattern of `original`.
pub fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let rest_upper = original.chars().count() > 1 && original.chars().skip(1).all(|c| !c.is_lowercase());
    if first_upper && rest_upper {
        replacement.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(replacement.len());
        let mut rc = replacement.chars();
        if let Some(c) = rc.next() {
            out.extend(c.to_uppercase());
        }
        out.extend(rc);
        out
    } else {
        replacement.to_string()
    }
}

fn ends_with_consonant_y(w: &str) -> bool {
    let b = w.as_bytes();
    b.len() >= 2 && b[b.len() - 1] == b'y' && !b"aeiou".contains(&b[b.len() - 2])
}

fn sibilant_plural(w: &str) -> String {
    if ends_with_consonant_y(w) {
        format!("{}ies", &w[..w.len() - 1])
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| w.ends_with(s)) {
        format!("{w}es")
    } else {
        format!("{w}s")
    }
}

fn past_tense(w: &str) -> String {
    if w.ends_with('e') {
        format!("{w}d")
    } else if ends_with_consonant_y(w) {
        format!("{}ied", &w[..w.len() - 1])
    } else {
        format!("{w}ed")
    }
}

fn gerund(w: &str) -> String {
    if w.ends_with('e') && !w.ends_with("ee") && w.len() > 2 {
        format!("{}ing", &w[..w.len() - 1])
    } else {
        format!("{w}ing")
    }
}
