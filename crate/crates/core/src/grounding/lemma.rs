//! Rule-based English lemmatizer.
//!
//! One pass applies, in order: the exception table, then the first matching
//! suffix rule below. [`lemmatize`] repeats passes until nothing changes, so
//! its output is always a fixed point.
//!
//! | suffix            | rule                                  | example            |
//! |-------------------|---------------------------------------|--------------------|
//! | (len ≤ 3)         | unchanged                             | `tv`               |
//! | `ies` (len > 4)   | → `y`                                 | `cities` → `city`  |
//! | `sses`            | → `ss`                                | `dresses`→`dress`  |
//! | `ches shes xes zzes` | drop `es`                          | `boxes` → `box`    |
//! | `ss us is`        | unchanged                             | `glass`            |
//! | `s`               | drop `s`                              | `sticks`→`stick`   |
//! | `ing`             | drop, then stem repair                | `sitting` → `sit`  |
//! | `eed`             | unchanged                             | `need`             |
//! | `ied`             | → `y`                                 | `tried` → `try`    |
//! | `ed`              | drop, then stem repair                | `liked` → `like`   |
//!
//! `ing`/`ed` only fire when the remaining stem has at least two letters and
//! contains a vowel (`thing`, `shed` stay). Stem repair drops one letter of a
//! doubled final consonant other than `l s z f` (`runn` → `run`), and
//! restores a silent `e` after a three-letter consonant-vowel-consonant stem
//! (`mak` → `make`), after a final `v` (`lov` → `love`), after `nc`
//! (`danc` → `dance`) and after a vowel + `s` (`caus` → `cause`).

use std::collections::HashMap;
use std::sync::OnceLock;

const EXCEPTIONS: &[(&str, &str)] = &[
    // irregular nouns
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "person"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
    ("geese", "goose"),
    ("knives", "knife"),
    ("wives", "wife"),
    ("lives", "life"),
    ("wolves", "wolf"),
    ("shelves", "shelf"),
    ("leaves", "leaf"),
    ("buses", "bus"),
    // irregular verbs
    ("went", "go"),
    ("gone", "go"),
    ("goes", "go"),
    ("does", "do"),
    ("did", "do"),
    ("done", "do"),
    ("was", "be"),
    ("were", "be"),
    ("is", "be"),
    ("are", "be"),
    ("been", "be"),
    ("has", "have"),
    ("had", "have"),
    ("ran", "run"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("made", "make"),
    ("took", "take"),
    ("taken", "take"),
    ("saw", "see"),
    ("seen", "see"),
    ("gave", "give"),
    ("given", "give"),
    ("got", "get"),
    ("bought", "buy"),
    ("brought", "bring"),
    ("thought", "think"),
    ("felt", "feel"),
    ("kept", "keep"),
    ("met", "meet"),
    ("sat", "sit"),
    ("stood", "stand"),
    ("told", "tell"),
    ("wrote", "write"),
    ("written", "write"),
    ("knew", "know"),
    ("known", "know"),
    ("found", "find"),
    ("lying", "lie"),
    ("dying", "die"),
    ("tying", "tie"),
    ("used", "use"),
    ("using", "use"),
    // words the suffix rules would damage
    ("news", "news"),
    ("series", "series"),
    ("species", "species"),
    ("always", "always"),
    ("perhaps", "perhaps"),
    ("yes", "yes"),
    ("gas", "gas"),
    ("lens", "lens"),
    ("chaos", "chaos"),
    ("morning", "morning"),
    ("evening", "evening"),
    ("ceiling", "ceiling"),
    ("hundred", "hundred"),
    ("sibling", "sibling"),
    ("pudding", "pudding"),
    ("wedding", "wedding"),
];

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| EXCEPTIONS.iter().copied().collect())
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|c| is_vowel(c) || c == b'y')
}

fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 {
        let (x, y) = (b[n - 2], b[n - 1]);
        if x == y && !is_vowel(y) && !matches!(y, b'l' | b's' | b'z' | b'f') {
            return stem[..n - 1].to_string();
        }
        let silent_e = y == b'v'
            || (x == b'n' && y == b'c')
            || (is_vowel(x) && y == b's')
            || (n == 3 && !is_vowel(b[0]) && is_vowel(b[1]) && !is_vowel(y) && !matches!(y, b'w' | b'x' | b'y'));
        if silent_e {
            return format!("{stem}e");
        }
    }
    stem.to_string()
}

fn single_pass(word: &str) -> Option<String> {
    if let Some(&lemma) = exceptions().get(word) {
        return (lemma != word).then(|| lemma.to_string());
    }
    if word.len() <= 3 || !word.is_ascii() {
        return None;
    }
    let n = word.len();
    if word.ends_with("ies") && n > 4 {
        return Some(format!("{}y", &word[..n - 3]));
    }
    if word.ends_with("sses") {
        return Some(word[..n - 2].to_string());
    }
    if ["ches", "shes", "xes", "zzes"].iter().any(|s| word.ends_with(s)) {
        return Some(word[..n - 2].to_string());
    }
    if ["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return None;
    }
    if word.ends_with('s') {
        return Some(word[..n - 1].to_string());
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 2 && has_vowel(stem) {
            return Some(repair_stem(stem));
        }
        return None;
    }
    if word.ends_with("eed") {
        return None;
    }
    if let Some(stem) = word.strip_suffix("ied") {
        return Some(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 2 && has_vowel(stem) {
            return Some(repair_stem(stem));
        }
    }
    None
}

/// Lemma of a single lowercase token.
pub fn lemmatize(token: &str) -> String {
    let mut current = token.to_string();
    while let Some(next) = single_pass(&current) {
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_examples() {
        assert_eq!(lemmatize("sticks"), "stick");
        assert_eq!(lemmatize("glue"), "glue");
        assert_eq!(lemmatize("sitting"), "sit");
        assert_eq!(lemmatize("adults"), "adult");
    }

    #[test]
    fn rule_table() {
        let cases = [
            ("cities", "city"),
            ("dresses", "dress"),
            ("boxes", "box"),
            ("watches", "watch"),
            ("glass", "glass"),
            ("making", "make"),
            ("running", "run"),
            ("eating", "eat"),
            ("going", "go"),
            ("thing", "thing"),
            ("string", "string"),
            ("needed", "need"),
            ("need", "need"),
            ("tried", "try"),
            ("stopped", "stop"),
            ("played", "play"),
            ("liked", "like"),
            ("loved", "love"),
            ("danced", "dance"),
            ("caused", "cause"),
            ("shed", "shed"),
            ("falling", "fall"),
            ("children", "child"),
            ("tv", "tv"),
        ];
        for (word, lemma) in cases {
            assert_eq!(lemmatize(word), lemma, "lemmatize({word})");
        }
    }

    #[test]
    fn exception_values_are_fixed_points() {
        for (_, lemma) in EXCEPTIONS {
            assert_eq!(&lemmatize(lemma), lemma);
        }
    }

    proptest! {
        #[test]
        fn idempotent(word in "[a-z]{1,12}") {
            let once = lemmatize(&word);
            prop_assert_eq!(lemmatize(&once), once);
        }

        #[test]
        fn idempotent_on_inflections(stem in "[a-z]{2,8}", suffix in prop::sample::select(vec!["s", "es", "ing", "ed", "ies", "ied", "ings"])) {
            let word = format!("{stem}{suffix}");
            let once = lemmatize(&word);
            prop_assert_eq!(lemmatize(&once), once);
        }
    }
}
