//! Rule-based conversion of a question into a declarative statement with a
//! single answer slot `_`.
//!
//! Rules are tried in a fixed order and the first match wins. Word case is
//! kept as written; only the question word, the auxiliary's position and the
//! trailing `?` change.

use serde::Serialize;

use crate::text::collapse_whitespace;

pub const SLOT: &str = "_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingRule {
    WhatIsCalled,
    WhatIs,
    WhatDo,
    WhichN,
    Whose,
    Who,
    WhyBecauseOf,
    Where,
    When,
    How,
    Choice,
    InSitu,
}

impl GroundingRule {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundingRule::WhatIsCalled => "what-is-called",
            GroundingRule::WhatIs => "what-is",
            GroundingRule::WhatDo => "what-do",
            GroundingRule::WhichN => "which-n",
            GroundingRule::Whose => "whose",
            GroundingRule::Who => "who",
            GroundingRule::WhyBecauseOf => "why-because-of",
            GroundingRule::Where => "where",
            GroundingRule::When => "when",
            GroundingRule::How => "how",
            GroundingRule::Choice => "choice",
            GroundingRule::InSitu => "in-situ",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundedStatement {
    pub qid: String,
    pub template: String,
    pub rule: GroundingRule,
}

impl GroundedStatement {
    /// The template with its slot replaced by `answer`.
    pub fn fill(&self, answer: &str) -> String {
        self.template.replacen(SLOT, answer.trim(), 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NotAQuestion,
    ContainsSlot,
    UnsupportedPattern,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NotAQuestion => "not_a_question",
            SkipReason::ContainsSlot => "contains_slot",
            SkipReason::UnsupportedPattern => "unsupported_pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grounding {
    Grounded(GroundedStatement),
    Skipped(SkipReason),
}

impl Grounding {
    pub fn statement(&self) -> Option<&GroundedStatement> {
        match self {
            Grounding::Grounded(g) => Some(g),
            Grounding::Skipped(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Aux {
    Be,
    Do,
    Modal,
}

fn aux_kind(word: &str) -> Option<Aux> {
    match word {
        "is" | "are" | "was" | "were" => Some(Aux::Be),
        "do" | "does" | "did" => Some(Aux::Do),
        "can" | "could" | "will" | "would" | "should" | "shall" | "may" | "might" | "must" | "has" | "have"
        | "had" => Some(Aux::Modal),
        _ => None,
    }
}

const PERSONAL_PRONOUNS: &[&str] = &["it", "he", "she", "they", "we", "you", "i", "there", "someone", "people"];
const DEMONSTRATIVES: &[&str] = &["this", "that", "these", "those"];
const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "their", "its", "my", "your", "our", "some",
];
const ARTICLES: &[&str] = &["a", "an", "the"];
const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "for", "to", "from", "with", "by", "near", "under", "over", "behind", "inside", "into",
    "onto", "above", "below", "beside", "next", "without", "about", "during", "through", "around",
];
const PARTICIPLES: &[&str] = &[
    "made", "called", "used", "worn", "known", "shown", "built", "held", "found", "seen", "done", "eaten", "grown",
    "named", "served", "taken", "cooked", "designed", "invented", "painted", "pictured", "located", "parked",
    "played", "sold", "kept", "given", "written", "driven", "ridden", "placed", "displayed", "prepared",
    "decorated", "filled", "covered", "attached",
];
const ING_NOUNS: &[&str] = &[
    "thing", "things", "building", "buildings", "ceiling", "clothing", "king", "ring", "wing", "wings", "string",
    "morning", "evening", "something", "anything", "everything", "nothing", "painting", "ping", "spring",
    "swing", "sibling", "pudding", "icing", "frosting", "stuffing", "topping", "toppings", "wedding",
    "bedding", "railing", "lightning", "during",
];
const ADJECTIVE_QUANTIFIERS: &[&str] = &[
    "old", "big", "tall", "long", "far", "fast", "heavy", "high", "large", "deep", "wide", "hot", "cold", "often",
    "small", "short", "expensive", "warm", "strong", "thick", "much",
];

fn lower(w: &str) -> String {
    w.to_lowercase()
}

fn is_in(w: &str, set: &[&str]) -> bool {
    set.contains(&lower(w).as_str())
}

fn is_verb_form(w: &str) -> bool {
    let l = lower(w);
    (l.len() >= 5 && l.ends_with("ing") && !ING_NOUNS.contains(&l.as_str())) || PARTICIPLES.contains(&l.as_str())
}

/// Where the predicate starts in an inverted clause `subject predicate`,
/// judged from verb forms and, when `prepositions` is set, from
/// prepositions. A pronoun followed by an article splits after the pronoun.
fn predicate_start(words: &[&str], prepositions: bool) -> Option<usize> {
    if words.len() >= 2 && is_in(words[0], PERSONAL_PRONOUNS) {
        return Some(1);
    }
    if words.len() >= 2 && is_in(words[0], DEMONSTRATIVES) && is_in(words[1], ARTICLES) {
        return Some(1);
    }
    (1..words.len()).find(|&i| is_verb_form(words[i]) || (prepositions && is_in(words[i], PREPOSITIONS)))
}

/// [`predicate_start`] with a fallback for adjective predicates:
/// "this red" splits after the demonstrative, "the sky blue" after the noun.
fn predicate_start_loose(words: &[&str]) -> Option<usize> {
    predicate_start(words, true).or_else(|| {
        if words.len() >= 2 && is_in(words[0], DEMONSTRATIVES) && words.len() == 2 {
            Some(1)
        } else if words.len() >= 3 && is_in(words[0], DETERMINERS) {
            Some(2)
        } else {
            None
        }
    })
}

/// Subject of a do/modal clause: a pronoun, or a determiner and its noun
/// (with an `of` complement), or a bare noun.
fn subject_len(words: &[&str]) -> usize {
    if words.is_empty() {
        return 0;
    }
    if !is_in(words[0], DETERMINERS) || is_in(words[0], PERSONAL_PRONOUNS) || words.len() < 2 {
        return 1;
    }
    let mut n = 2;
    if words.len() > n + 1 && lower(words[n]) == "of" {
        n += 1;
        if words.len() > n + 1 && is_in(words[n], DETERMINERS) {
            n += 1;
        }
        n += 1;
    }
    n.min(words.len())
}

fn join(parts: &[&[&str]]) -> String {
    let words: Vec<&str> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    let mut s = words.join(" ");
    s.push('.');
    s
}

fn ends_with_preposition(words: &[&str]) -> bool {
    words.last().is_some_and(|w| is_in(w, PREPOSITIONS) || lower(w) == "of")
}

/// Declarative clause from an inverted `aux rest` with a trailing phrase
/// (`because of _`, `in _`, ...).
fn inverted_clause(aux: &str, kind: Aux, rest: &[&str], tail: &[&str]) -> Option<String> {
    if rest.is_empty() {
        return None;
    }
    let tail: &[&str] = if ends_with_preposition(rest) { &[SLOT] } else { tail };
    match kind {
        Aux::Do => Some(join(&[rest, tail])),
        Aux::Be => match predicate_start_loose(rest) {
            Some(p) => Some(join(&[&rest[..p], &[aux], &rest[p..], tail])),
            None => Some(join(&[rest, &[aux], tail])),
        },
        Aux::Modal => {
            let s = subject_len(rest);
            Some(join(&[&rest[..s], &[aux], &rest[s..], tail]))
        }
    }
}

fn expand_contraction(words: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len() + 1);
    for (i, w) in words.into_iter().enumerate() {
        let l = lower(&w);
        if i == 0 {
            if let Some(stem) = l.strip_suffix("'s").or_else(|| l.strip_suffix("’s")) {
                if matches!(stem, "what" | "who" | "where" | "how" | "why" | "when") {
                    out.push(w[..stem.len()].to_string());
                    out.push("is".to_string());
                    continue;
                }
            }
        }
        out.push(w);
    }
    out
}

/// Ground `question` into a statement with one `_` slot.
pub fn ground_question(qid: &str, question: &str) -> Grounding {
    let text = collapse_whitespace(question);
    if text.contains(SLOT) {
        return Grounding::Skipped(SkipReason::ContainsSlot);
    }
    let Some(body) = text.strip_suffix('?') else {
        return Grounding::Skipped(SkipReason::NotAQuestion);
    };
    let owned = expand_contraction(body.split_whitespace().map(str::to_string).collect());
    let words: Vec<&str> = owned.iter().map(String::as_str).collect();
    if words.is_empty() {
        return Grounding::Skipped(SkipReason::NotAQuestion);
    }
    match apply_rules(&words) {
        Some((rule, template)) => Grounding::Grounded(GroundedStatement {
            qid: qid.to_string(),
            template,
            rule,
        }),
        None => Grounding::Skipped(SkipReason::UnsupportedPattern),
    }
}

fn apply_rules(w: &[&str]) -> Option<(GroundingRule, String)> {
    let first = lower(w[0]);
    let second = w.get(1).map(|s| lower(s)).unwrap_or_default();
    let second_aux = aux_kind(&second);
    let n = w.len();

    // what is X called
    if matches!(first.as_str(), "what" | "which")
        && second_aux == Some(Aux::Be)
        && n >= 4
        && lower(w[n - 1]) == "called"
    {
        return Some((GroundingRule::WhatIsCalled, join(&[&w[2..n - 1], &[w[1], "called", SLOT]])));
    }

    // what is X / what is S doing
    if first == "what" && second_aux == Some(Aux::Be) && n >= 3 {
        let rest = &w[2..];
        if is_in(rest[0], PREPOSITIONS) || is_verb_form(rest[0]) {
            return Some((GroundingRule::WhatIs, join(&[&[SLOT, w[1]], rest])));
        }
        let template = match predicate_start(rest, false) {
            Some(p) if is_verb_form(rest[p]) => join(&[&rest[..p], &[w[1]], &rest[p..], &[SLOT]]),
            _ => join(&[rest, &[w[1], SLOT]]),
        };
        return Some((GroundingRule::WhatIs, template));
    }

    // what does S V / what can S V
    if first == "what" && matches!(second_aux, Some(Aux::Do | Aux::Modal)) && n >= 3 {
        return inverted_clause(w[1], second_aux.unwrap(), &w[2..], &[SLOT]).map(|t| (GroundingRule::WhatDo, t));
    }

    // what/which N aux X, or what/which N V X
    if matches!(first.as_str(), "what" | "which") && n >= 2 {
        if let Some(a) = (2..n).find(|&i| aux_kind(&lower(w[i])).is_some()) {
            let noun = &w[1..a];
            let aux = w[a];
            let kind = aux_kind(&lower(aux)).unwrap();
            let rest = &w[a + 1..];
            if rest.is_empty() || is_in(rest[0], PREPOSITIONS) || is_verb_form(rest[0]) {
                return Some((GroundingRule::WhichN, join(&[&[SLOT], noun, &[aux], rest])));
            }
            return inverted_clause(aux, kind, rest, &[SLOT]).map(|t| (GroundingRule::WhichN, t));
        }
        return Some((GroundingRule::WhichN, join(&[&[SLOT], &w[1..]])));
    }

    // whose N aux X
    if first == "whose" && n >= 3 {
        let a = (2..n).find(|&i| aux_kind(&lower(w[i])).is_some())?;
        let rest = &w[a + 1..];
        if rest.is_empty() {
            return None;
        }
        let kind = aux_kind(&lower(w[a])).unwrap();
        let slot_np: Vec<&str> = std::iter::once(SLOT).chain(w[1..a].iter().copied()).collect();
        let template = match kind {
            Aux::Be => join(&[rest, &[w[a]], &slot_np]),
            _ => inverted_clause(w[a], kind, rest, &slot_np)?,
        };
        return Some((GroundingRule::Whose, template));
    }

    // who V X
    if first == "who" && n >= 2 {
        return Some((GroundingRule::Who, join(&[&[SLOT], &w[1..]])));
    }

    // why aux X
    if first == "why" && n >= 3 {
        let kind = second_aux?;
        return inverted_clause(w[1], kind, &w[2..], &["because", "of", SLOT])
            .map(|t| (GroundingRule::WhyBecauseOf, t));
    }

    // where aux X
    if first == "where" && n >= 3 {
        let kind = second_aux?;
        return inverted_clause(w[1], kind, &w[2..], &["in", SLOT]).map(|t| (GroundingRule::Where, t));
    }

    // when aux X
    if first == "when" && n >= 3 {
        let kind = second_aux?;
        return inverted_clause(w[1], kind, &w[2..], &["in", SLOT]).map(|t| (GroundingRule::When, t));
    }

    if first == "how" && n >= 3 {
        return ground_how(w).map(|t| (GroundingRule::How, t));
    }

    // aux S A or B
    if let Some(kind) = aux_kind(&first) {
        if let Some(o) = (2..n.saturating_sub(1)).find(|&i| lower(w[i]) == "or") {
            let mut a_start = o - 1;
            if a_start > 1 && is_in(w[a_start - 1], ARTICLES) && a_start - 1 > 1 {
                a_start -= 1;
            }
            let prefix = &w[1..a_start];
            if prefix.is_empty() {
                return None;
            }
            let template = match kind {
                Aux::Do => join(&[prefix, &[SLOT]]),
                Aux::Be | Aux::Modal => match predicate_start(prefix, true) {
                    Some(p) => join(&[&prefix[..p], &[w[0]], &prefix[p..], &[SLOT]]),
                    None => join(&[prefix, &[w[0], SLOT]]),
                },
            };
            return Some((GroundingRule::Choice, lowercase_initial_aux(template, w[0])));
        }
        return None;
    }

    // X which/what Y
    if let Some(i) = (1..n).find(|&i| matches!(lower(w[i]).as_str(), "which" | "what")) {
        return Some((GroundingRule::InSitu, join(&[&w[..i], &[SLOT], &w[i + 1..]])));
    }

    None
}

/// The moved auxiliary comes from sentence-initial position; write it in
/// lower case inside the statement.
fn lowercase_initial_aux(template: String, aux: &str) -> String {
    let l = lower(aux);
    if l == aux {
        return template;
    }
    let mut words: Vec<String> = template.split(' ').map(str::to_string).collect();
    if let Some(w) = words.iter_mut().skip(1).find(|w| w.as_str() == aux) {
        *w = l;
    }
    words.join(" ")
}

fn ground_how(w: &[&str]) -> Option<String> {
    let second = lower(w[1]);
    if let Some(kind) = aux_kind(&second) {
        return inverted_clause(w[1], kind, &w[2..], &["by", SLOT]);
    }
    if matches!(second.as_str(), "many" | "much") {
        let a = (2..w.len()).find(|&i| aux_kind(&lower(w[i])).is_some())?;
        let noun = &w[2..a];
        let aux = w[a];
        let rest = &w[a + 1..];
        return match aux_kind(&lower(aux))? {
            Aux::Be => Some(join(&[&[SLOT], noun, &[aux], rest])),
            Aux::Do | Aux::Modal if !rest.is_empty() => {
                let slot_np: Vec<&str> = std::iter::once(SLOT).chain(noun.iter().copied()).collect();
                inverted_clause(aux, aux_kind(&lower(aux))?, rest, &slot_np)
            }
            _ => None,
        };
    }
    if ADJECTIVE_QUANTIFIERS.contains(&second.as_str()) && w.len() >= 4 {
        let aux = w[2];
        let kind = aux_kind(&lower(aux))?;
        let rest = &w[3..];
        return match kind {
            Aux::Be => Some(join(&[rest, &[aux, SLOT, w[1]]])),
            _ => inverted_clause(aux, kind, rest, &[SLOT, w[1]]),
        };
    }
    None
}
