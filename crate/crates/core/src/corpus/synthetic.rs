//! Templated desk-scale corpora with gold die/dat labels.
//!
//! Each template forces its die/dat by the agreement rules:
//!
//! | antecedent                  | demonstrative | relative | conjunction |
//! |-----------------------------|---------------|----------|-------------|
//! | singular masculine noun     | die           | die      |             |
//! | singular neuter noun        | dat           | dat      |             |
//! | plural noun                 | die           | die      |             |
//! | preceding sentence          | dat           |          |             |
//! | introduces a clause         |               |          | dat         |
//!
//! Cross-sentence templates put the antecedent in the previous sentence and
//! open the next sentence with an independent demonstrative whose own
//! sentence carries no agreement cue, so the label is only recoverable from
//! context that crosses the sentence boundary.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{CorpusError, DieDat, Document, PosClass, Sentence, Token};
use crate::tensor::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gender {
    Masculine,
    Neuter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Noun {
    pub word: String,
    pub gender: Gender,
    pub number: Number,
}

impl Noun {
    /// The die/dat form that agrees with this noun.
    pub fn agreeing_form(&self) -> DieDat {
        match (self.gender, self.number) {
            (Gender::Neuter, Number::Singular) => DieDat::Dat,
            _ => DieDat::Die,
        }
    }

    fn definite_article(&self) -> &'static str {
        match self.agreeing_form() {
            DieDat::Dat => "het",
            DieDat::Die => "de",
        }
    }

    fn indefinite_article(&self) -> &'static str {
        match self.number {
            Number::Singular => "een",
            Number::Plural => "twee",
        }
    }
}

/// Word lists the generator draws from.
///
/// Text format, one entry per line, `#` starts a comment:
///
/// ```text
/// noun man masculine singular
/// noun huis neuter singular
/// verb zag
/// say weet
/// subject hij
/// adj mooie
/// filler niets
/// ```
///
/// `noun` and `verb` entries are required; the other categories fall back to
/// built-in lists when absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    pub nouns: Vec<Noun>,
    pub verbs: Vec<String>,
    pub say_verbs: Vec<String>,
    pub subjects: Vec<String>,
    pub adjectives: Vec<String>,
    pub fillers: Vec<String>,
}

const DEFAULT_LEXICON: &str = include_str!("default_lexicon.txt");

impl Default for Lexicon {
    fn default() -> Self {
        DEFAULT_LEXICON.parse().expect("built-in lexicon is valid")
    }
}

impl Lexicon {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?.parse()
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.nouns.is_empty() || self.verbs.is_empty() {
            return Err(CorpusError::Config(
                "lexicon needs at least one noun and one verb".into(),
            ));
        }
        Ok(())
    }
}

impl FromStr for Lexicon {
    type Err = CorpusError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lex = Lexicon {
            nouns: vec![],
            verbs: vec![],
            say_verbs: vec![],
            subjects: vec![],
            adjectives: vec![],
            fillers: vec![],
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| CorpusError::Parse {
                path: "lexicon".into(),
                line: i + 1,
                message: m.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let word = |n: usize| -> Result<String, CorpusError> {
                if fields.len() != n {
                    return Err(err(&format!("`{}` entries take {} fields", fields[0], n - 1)));
                }
                if DieDat::from_surface(fields[1]).is_some() {
                    return Err(err("die/dat cannot be a lexicon entry"));
                }
                Ok(fields[1].to_string())
            };
            match fields[0] {
                "noun" => {
                    let w = word(4)?;
                    let gender = match fields[2] {
                        "masculine" | "m" => Gender::Masculine,
                        "neuter" | "n" => Gender::Neuter,
                        _ => return Err(err("gender must be masculine or neuter")),
                    };
                    let number = match fields[3] {
                        "singular" | "sg" => Number::Singular,
                        "plural" | "pl" => Number::Plural,
                        _ => return Err(err("number must be singular or plural")),
                    };
                    lex.nouns.push(Noun { word: w, gender, number });
                }
                "verb" => lex.verbs.push(word(2)?),
                "say" => lex.say_verbs.push(word(2)?),
                "subject" => lex.subjects.push(word(2)?),
                "adj" => lex.adjectives.push(word(2)?),
                "filler" => lex.fillers.push(word(2)?),
                other => return Err(err(&format!("unknown category `{other}`"))),
            }
        }
        lex.validate()?;
        let fallback = |v: &mut Vec<String>, d: &[&str]| {
            if v.is_empty() {
                *v = d.iter().map(|s| s.to_string()).collect();
            }
        };
        fallback(&mut lex.say_verbs, &["weet", "denkt", "zegt", "hoopt"]);
        fallback(&mut lex.subjects, &["ik", "hij", "zij", "we"]);
        fallback(&mut lex.adjectives, &["mooie", "oude", "grote"]);
        fallback(&mut lex.fillers, &["niets", "alles", "veel", "weinig"]);
        Ok(lex)
    }
}

/// What selected the die/dat form at a generated site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Antecedent {
    Noun(Noun),
    /// A whole preceding sentence.
    Sentence,
    /// Not anaphoric: the token introduces a subordinate clause.
    Clause,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSite {
    pub document: usize,
    pub sentence: usize,
    pub token: usize,
    pub label: DieDat,
    pub pos: PosClass,
    pub antecedent: Antecedent,
    /// The antecedent sits in the previous sentence.
    pub cross_sentence: bool,
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_sentences: usize,
    pub seed: u64,
    /// Probability that a generated unit is a two-sentence pair whose
    /// demonstrative refers back across the sentence boundary.
    pub cross_sentence_fraction: f64,
}

impl SynthConfig {
    pub fn new(n_sentences: usize, seed: u64) -> Self {
        SynthConfig { n_sentences, seed, cross_sentence_fraction: 0.3 }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub sites: Vec<SyntheticSite>,
}

impl SyntheticCorpus {
    pub fn to_tagged_string(&self) -> String {
        super::to_tagged_string(&self.documents)
    }
}

#[derive(Clone, Copy)]
enum Unit {
    Relative,
    Dependent,
    Conjunction,
    ConjunctionRelative,
    CrossNoun,
    CrossSentence,
}

struct SentenceBuilder {
    tokens: Vec<Token>,
    sites: Vec<(usize, DieDat, PosClass, Antecedent)>,
}

impl SentenceBuilder {
    fn new() -> Self {
        SentenceBuilder { tokens: vec![], sites: vec![] }
    }

    fn word(&mut self, w: &str, tag: &str) -> &mut Self {
        self.tokens.push(Token::tagged(w, tag));
        self
    }

    fn target(&mut self, label: DieDat, pos: PosClass, antecedent: Antecedent) -> &mut Self {
        self.sites.push((self.tokens.len(), label, pos, antecedent));
        self.tokens.push(Token::tagged(label.as_str(), pos.tag()));
        self
    }
}

pub fn generate_synthetic(lexicon: &Lexicon, config: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    lexicon.validate()?;
    if !(0.0..=1.0).contains(&config.cross_sentence_fraction) {
        return Err(CorpusError::Config("cross_sentence_fraction must lie in [0, 1]".into()));
    }
    let mut rng = Rng::new(config.seed);
    let mut documents = Vec::new();
    let mut sites = Vec::new();
    let mut produced = 0;
    while produced < config.n_sentences {
        let doc_index = documents.len();
        let target_len = 2 + rng.below(4);
        let mut sentences: Vec<Sentence> = Vec::new();
        while sentences.len() < target_len && produced < config.n_sentences {
            let remaining = config.n_sentences - produced;
            let unit = pick_unit(&mut rng, config.cross_sentence_fraction, remaining);
            for (builder, cross) in build_unit(unit, lexicon, &mut rng) {
                let sentence_index = sentences.len();
                for (token, label, pos, antecedent) in builder.sites {
                    sites.push(SyntheticSite {
                        document: doc_index,
                        sentence: sentence_index,
                        token,
                        label,
                        pos,
                        antecedent,
                        cross_sentence: cross,
                    });
                }
                sentences.push(Sentence { tokens: builder.tokens });
                produced += 1;
            }
        }
        documents.push(Document::new(format!("synthetic#{doc_index}"), sentences));
    }
    Ok(SyntheticCorpus { documents, sites })
}

fn pick_unit(rng: &mut Rng, cross_fraction: f64, remaining: usize) -> Unit {
    if remaining >= 2 && rng.bernoulli(cross_fraction) {
        return if rng.bernoulli(0.75) { Unit::CrossNoun } else { Unit::CrossSentence };
    }
    match rng.below(10) {
        0..=3 => Unit::Relative,
        4..=6 => Unit::Dependent,
        7..=8 => Unit::Conjunction,
        _ => Unit::ConjunctionRelative,
    }
}

fn build_unit(unit: Unit, lex: &Lexicon, rng: &mut Rng) -> Vec<(SentenceBuilder, bool)> {
    let noun = rng.choose(&lex.nouns).clone();
    let subject = rng.choose(&lex.subjects).clone();
    let verb = rng.choose(&lex.verbs).clone();
    let adj = rng.choose(&lex.adjectives).clone();
    let mut s = SentenceBuilder::new();
    match unit {
        // hij zocht de man die ik gisteren zag .
        Unit::Relative => {
            let verb2 = rng.choose(&lex.verbs).clone();
            s.word(&subject, "pron")
                .word(&verb, "verb")
                .word(noun.definite_article(), "det")
                .word(&noun.word, "noun")
                .target(noun.agreeing_form(), PosClass::RelativePronoun, Antecedent::Noun(noun.clone()))
                .word("ik", "pron")
                .word("gisteren", "adv")
                .word(&verb2, "verb")
                .word(".", "punct");
            vec![(s, false)]
        }
        // ik zag die mooie man gisteren .
        Unit::Dependent => {
            s.word(&subject, "pron")
                .word(&verb, "verb")
                .target(noun.agreeing_form(), PosClass::DemonstrativePronoun, Antecedent::Noun(noun.clone()))
                .word(&adj, "adj")
                .word(&noun.word, "noun")
                .word("gisteren", "adv")
                .word(".", "punct");
            vec![(s, false)]
        }
        // hij weet dat de man hier wacht .
        Unit::Conjunction => {
            let say = rng.choose(&lex.say_verbs).clone();
            s.word(&subject, "pron")
                .word(&say, "verb")
                .target(DieDat::Dat, PosClass::SubordinatingConjunction, Antecedent::Clause)
                .word(noun.definite_article(), "det")
                .word(&noun.word, "noun")
                .word("hier", "adv")
                .word(&verb, "verb")
                .word(".", "punct");
            vec![(s, false)]
        }
        // hij zegt dat de man die ik zag hier is .
        Unit::ConjunctionRelative => {
            let say = rng.choose(&lex.say_verbs).clone();
            s.word(&subject, "pron")
                .word(&say, "verb")
                .target(DieDat::Dat, PosClass::SubordinatingConjunction, Antecedent::Clause)
                .word(noun.definite_article(), "det")
                .word(&noun.word, "noun")
                .target(noun.agreeing_form(), PosClass::RelativePronoun, Antecedent::Noun(noun.clone()))
                .word("ik", "pron")
                .word(&verb, "verb")
                .word("hier", "adv")
                .word("is", "verb")
                .word(".", "punct");
            vec![(s, false)]
        }
        // hij zag gisteren een huis . | dat vond ik erg mooie .
        Unit::CrossNoun => {
            s.word(&subject, "pron")
                .word(&verb, "verb")
                .word("gisteren", "adv")
                .word(noun.indefinite_article(), "det")
                .word(&noun.word, "noun")
                .word(".", "punct");
            let mut t = SentenceBuilder::new();
            t.target(noun.agreeing_form(), PosClass::DemonstrativePronoun, Antecedent::Noun(noun.clone()))
                .word("vond", "verb")
                .word("ik", "pron")
                .word("erg", "adv")
                .word(&adj, "adj")
                .word(".", "punct");
            vec![(s, false), (t, true)]
        }
        // hij zag gisteren niets . | dat vond ik erg mooie .
        Unit::CrossSentence => {
            let filler = rng.choose(&lex.fillers).clone();
            s.word(&subject, "pron")
                .word(&verb, "verb")
                .word("gisteren", "adv")
                .word(&filler, "pron")
                .word(".", "punct");
            let mut t = SentenceBuilder::new();
            t.target(DieDat::Dat, PosClass::DemonstrativePronoun, Antecedent::Sentence)
                .word("vond", "verb")
                .word("ik", "pron")
                .word("erg", "adv")
                .word(&adj, "adj")
                .word(".", "punct");
            vec![(s, false), (t, true)]
        }
    }
}

/// Two disjoint vocabularies; every sentence draws all its words from one of
/// them. Used to sanity-check that embeddings pick up co-occurrence.
pub fn two_cluster_corpus(
    n_sentences: usize,
    words_per_cluster: usize,
    sentence_len: usize,
    seed: u64,
) -> (Vec<Document>, [Vec<String>; 2]) {
    let clusters = [
        (0..words_per_cluster).map(|i| format!("rood{i}")).collect::<Vec<_>>(),
        (0..words_per_cluster).map(|i| format!("blauw{i}")).collect::<Vec<_>>(),
    ];
    let mut rng = Rng::new(seed);
    let sentences: Vec<Sentence> = (0..n_sentences)
        .map(|_| {
            let c = &clusters[rng.below(2)];
            Sentence { tokens: (0..sentence_len).map(|_| Token::new(rng.choose(c).as_str())).collect() }
        })
        .collect();
    let docs = sentences
        .chunks(10)
        .enumerate()
        .map(|(i, s)| Document::new(format!("clusters#{i}"), s.to_vec()))
        .collect();
    (docs, clusters)
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Masculine => "masculine",
            Gender::Neuter => "neuter",
        })
    }
}
