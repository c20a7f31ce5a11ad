//! Action Units, facial regions, rule patterns and the expression knowledge base.
//!
//! Each facial region owns an M x M automaton lattice whose side equals the
//! number of AUs it carries. An active AU is a single live cell on the main
//! diagonal; only the diagonal is kept, so a region contributes M bits. The
//! region segments are joined with `$` in the order
//! EyeLids, EyeBrows, Eyes, Cheeks, LipPart1, LipPart2.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ca::RuleMatrix;
use crate::error::{Error, Result};

/// Every AU code the codec knows, ascending. Bit `i` of an [`AuSet`] is `KNOWN_AUS[i]`.
pub const KNOWN_AUS: [u8; 21] = [
    1, 2, 4, 5, 6, 7, 10, 12, 15, 16, 20, 23, 24, 25, 26, 27, 28, 43, 61, 63, 64,
];

pub const SEPARATOR: char = '$';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Cheeks,
    EyeLids,
    EyeBrows,
    Eyes,
    LipPart1,
    LipPart2,
}

impl Region {
    /// Pattern order.
    pub const CANONICAL: [Region; 6] = [
        Region::EyeLids,
        Region::EyeBrows,
        Region::Eyes,
        Region::Cheeks,
        Region::LipPart1,
        Region::LipPart2,
    ];

    pub fn au_list(self) -> &'static [u8] {
        match self {
            Region::Cheeks => &[6],
            Region::EyeLids => &[5, 7],
            Region::EyeBrows => &[1, 2, 4],
            Region::Eyes => &[43, 61, 63, 64],
            Region::LipPart1 => &[10, 16, 25, 26, 27],
            Region::LipPart2 => &[12, 15, 20, 23, 24, 28],
        }
    }

    /// Lattice side M.
    pub fn dim(self) -> usize {
        self.au_list().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Cheeks => "cheeks",
            Region::EyeLids => "eyelids",
            Region::EyeBrows => "eyebrows",
            Region::Eyes => "eyes",
            Region::LipPart1 => "lippart1",
            Region::LipPart2 => "lippart2",
        }
    }

    pub fn of_au(au: u8) -> Option<Region> {
        Region::CANONICAL
            .into_iter()
            .find(|r| r.au_list().contains(&au))
    }

    fn canonical_index(self) -> usize {
        Region::CANONICAL.iter().position(|&r| r == self).unwrap()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::CANONICAL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown region `{s}`")))
    }
}

fn au_bit(code: u8) -> Option<u32> {
    KNOWN_AUS.iter().position(|&a| a == code).map(|i| 1 << i)
}

fn valid_codes() -> String {
    KNOWN_AUS
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// A set of known AU codes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AuSet(u32);

impl AuSet {
    pub const EMPTY: AuSet = AuSet(0);

    pub fn try_from_codes<I: IntoIterator<Item = u8>>(codes: I) -> Result<Self> {
        let mut bits = 0;
        for code in codes {
            bits |= au_bit(code).ok_or_else(|| Error::UnknownAu {
                code: code.to_string(),
                valid: valid_codes(),
            })?;
        }
        Ok(AuSet(bits))
    }

    /// Set from its bit representation (bit `i` = `KNOWN_AUS[i]`).
    pub fn from_bits(bits: u32) -> Self {
        AuSet(bits & ((1 << KNOWN_AUS.len()) - 1))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, code: u8) -> bool {
        au_bit(code).is_some_and(|b| self.0 & b != 0)
    }

    pub fn insert(&mut self, code: u8) -> Result<()> {
        *self = self.union(AuSet::try_from_codes([code])?);
        Ok(())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: AuSet) -> AuSet {
        AuSet(self.0 | other.0)
    }

    pub fn intersection(self, other: AuSet) -> AuSet {
        AuSet(self.0 & other.0)
    }

    pub fn difference(self, other: AuSet) -> AuSet {
        AuSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: AuSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: AuSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Codes in ascending order.
    pub fn iter(self) -> impl Iterator<Item = u8> {
        KNOWN_AUS
            .into_iter()
            .enumerate()
            .filter(move |(i, _)| self.0 & (1 << i) != 0)
            .map(|(_, a)| a)
    }

    /// Members belonging to `region`.
    pub fn restrict(self, region: Region) -> AuSet {
        AuSet::try_from_codes(self.iter().filter(|a| region.au_list().contains(a))).unwrap()
    }
}

impl fmt::Debug for AuSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for AuSet {
    /// Comma-separated codes, the CLI literal form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<String> = self.iter().map(|a| a.to_string()).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for AuSet {
    type Err = Error;

    /// Parses `6,12` style literals. Blank input is the empty set.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(AuSet::EMPTY);
        }
        let mut codes = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let code: u8 = part.parse().map_err(|_| Error::UnknownAu {
                code: part.to_string(),
                valid: valid_codes(),
            })?;
            codes.push(code);
        }
        AuSet::try_from_codes(codes)
    }
}

impl Serialize for AuSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for AuSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let codes = Vec::<u8>::deserialize(deserializer)?;
        AuSet::try_from_codes(codes).map_err(serde::de::Error::custom)
    }
}

/// One-hot lattice for `au` within `region`: cell (k, k) where k is the AU's
/// index in the region's AU list.
pub fn au_rule_matrix(region: Region, au: u8) -> Result<RuleMatrix> {
    let k = region
        .au_list()
        .iter()
        .position(|&a| a == au)
        .ok_or(Error::ForeignAu { region, au })?;
    RuleMatrix::with_active(region.dim(), &[(k, k)])
}

/// OR of the stored diagonals of each active AU's lattice.
pub fn region_segment(region: Region, active: AuSet) -> Result<Vec<bool>> {
    let mut segment = vec![false; region.dim()];
    for au in active.iter() {
        let diag = au_rule_matrix(region, au)?.diagonal_bits();
        for (s, d) in segment.iter_mut().zip(diag) {
            *s |= d;
        }
    }
    Ok(segment)
}

/// The expression signature: one diagonal segment per region, canonical order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RulePattern {
    /// Bit k of `segments[i]` is diagonal cell k of region `Region::CANONICAL[i]`.
    segments: [u8; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderMode {
    /// All six segments, each followed by `$`.
    #[default]
    Canonical,
    /// Lip segments compressed to the non-zero ones (LipPart1 if both are zero).
    PaperCompat,
}

impl FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(RenderMode::Canonical),
            "paper" | "paper_compat" => Ok(RenderMode::PaperCompat),
            other => Err(Error::Config {
                line: 0,
                message: format!("unknown render mode `{other}`"),
            }),
        }
    }
}

impl RulePattern {
    pub fn segment(&self, region: Region) -> Vec<bool> {
        let bits = self.segments[region.canonical_index()];
        (0..region.dim()).map(|k| bits & (1 << k) != 0).collect()
    }

    fn set_segment(&mut self, region: Region, segment: &[bool]) {
        let mut bits = 0u8;
        for (k, &b) in segment.iter().enumerate() {
            if b {
                bits |= 1 << k;
            }
        }
        self.segments[region.canonical_index()] = bits;
    }

    pub fn active_bits(&self) -> usize {
        self.segments.iter().map(|s| s.count_ones() as usize).sum()
    }

    pub fn is_neutral(&self) -> bool {
        self.segments.iter().all(|&s| s == 0)
    }

    /// The AU set this pattern encodes.
    pub fn aus(&self) -> AuSet {
        let mut set = AuSet::EMPTY;
        for region in Region::CANONICAL {
            for (k, on) in self.segment(region).into_iter().enumerate() {
                if on {
                    set = set.union(AuSet::try_from_codes([region.au_list()[k]]).unwrap());
                }
            }
        }
        set
    }

    pub fn hamming(&self, other: &RulePattern) -> u32 {
        self.segments
            .iter()
            .zip(other.segments)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn render(&self, mode: RenderMode) -> String {
        render_pattern(self, mode)
    }
}

impl fmt::Debug for RulePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RulePattern({})", render_pattern(self, RenderMode::Canonical))
    }
}

impl fmt::Display for RulePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_pattern(self, RenderMode::Canonical))
    }
}

impl FromStr for RulePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_pattern(s)
    }
}

impl Serialize for RulePattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_pattern(self, RenderMode::Canonical))
    }
}

impl<'de> Deserialize<'de> for RulePattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_pattern(&s).map_err(serde::de::Error::custom)
    }
}

pub fn synthesize_pattern(active: AuSet) -> RulePattern {
    let mut pattern = RulePattern::default();
    for region in Region::CANONICAL {
        let segment = region_segment(region, active.restrict(region))
            .expect("restricted set holds only region AUs");
        pattern.set_segment(region, &segment);
    }
    pattern
}

fn push_segment(out: &mut String, segment: &[bool]) {
    out.extend(segment.iter().map(|&b| if b { '1' } else { '0' }));
    out.push(SEPARATOR);
}

pub fn render_pattern(pattern: &RulePattern, mode: RenderMode) -> String {
    let mut out = String::with_capacity(27);
    for region in &Region::CANONICAL[..4] {
        push_segment(&mut out, &pattern.segment(*region));
    }
    let lip1 = pattern.segment(Region::LipPart1);
    let lip2 = pattern.segment(Region::LipPart2);
    match mode {
        RenderMode::Canonical => {
            push_segment(&mut out, &lip1);
            push_segment(&mut out, &lip2);
        }
        RenderMode::PaperCompat => {
            let lip1_on = lip1.iter().any(|&b| b);
            let lip2_on = lip2.iter().any(|&b| b);
            if lip1_on || !lip2_on {
                push_segment(&mut out, &lip1);
            }
            if lip2_on {
                push_segment(&mut out, &lip2);
            }
        }
    }
    out
}

/// Parses the canonical rendering: six `$`-terminated bit segments.
pub fn parse_pattern(text: &str) -> Result<RulePattern> {
    let err = |offset: usize, message: String| Error::PatternParse { offset, message };
    let mut pattern = RulePattern::default();
    let mut offset = 0;
    let mut rest = text;
    for region in Region::CANONICAL {
        let end = rest.find(SEPARATOR).ok_or_else(|| {
            err(
                text.len(),
                format!("missing `{SEPARATOR}`-terminated segment for {region}"),
            )
        })?;
        let raw = &rest[..end];
        let mut segment = Vec::with_capacity(raw.len());
        for (i, ch) in raw.char_indices() {
            match ch {
                '0' => segment.push(false),
                '1' => segment.push(true),
                other => return Err(err(offset + i, format!("non-bit character {other:?}"))),
            }
        }
        if segment.len() != region.dim() {
            return Err(err(
                offset,
                format!(
                    "{region} segment has length {}, expected {}",
                    segment.len(),
                    region.dim()
                ),
            ));
        }
        pattern.set_segment(region, &segment);
        offset += end + 1;
        rest = &rest[end + 1..];
    }
    if !rest.is_empty() {
        return Err(err(offset, "trailing data after sixth segment".into()));
    }
    Ok(pattern)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExpressionLabel {
    Happiness,
    Sadness,
    Angry,
    Disgust,
    Fear,
    Surprise,
    Contempt,
    Frustration,
    Confusion,
    Neutral,
    /// A non-empty AU set matching no template.
    Unknown,
}

impl ExpressionLabel {
    /// The ten expressions in knowledge-base row order.
    pub const EXPRESSIONS: [ExpressionLabel; 10] = [
        ExpressionLabel::Happiness,
        ExpressionLabel::Sadness,
        ExpressionLabel::Angry,
        ExpressionLabel::Disgust,
        ExpressionLabel::Fear,
        ExpressionLabel::Surprise,
        ExpressionLabel::Contempt,
        ExpressionLabel::Frustration,
        ExpressionLabel::Confusion,
        ExpressionLabel::Neutral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExpressionLabel::Happiness => "Happiness",
            ExpressionLabel::Sadness => "Sadness",
            ExpressionLabel::Angry => "Angry",
            ExpressionLabel::Disgust => "Disgust",
            ExpressionLabel::Fear => "Fear",
            ExpressionLabel::Surprise => "Surprise",
            ExpressionLabel::Contempt => "Contempt",
            ExpressionLabel::Frustration => "Frustration",
            ExpressionLabel::Confusion => "Confusion",
            ExpressionLabel::Neutral => "Neutral",
            ExpressionLabel::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for ExpressionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExpressionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExpressionLabel::EXPRESSIONS
            .into_iter()
            .chain([ExpressionLabel::Unknown])
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Manifest(format!("unknown expression label `{s}`")))
    }
}

/// One knowledge-base row: mandatory AUs plus groups of which at least one
/// member must be present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionDef {
    pub label: ExpressionLabel,
    pub mandatory: AuSet,
    pub alt_groups: Vec<AuSet>,
}

/// AU combinations per expression. Braced groups are alternatives.
pub const EXPRESSION_FORMULAS: [(ExpressionLabel, &str); 10] = [
    (ExpressionLabel::Happiness, "6+{12+16+25+26}"),
    (ExpressionLabel::Sadness, "{1+4}+7+{15+25+28}+63"),
    (ExpressionLabel::Angry, "{2+4}+7+{16+23+24+25+26}"),
    (ExpressionLabel::Disgust, "10+61"),
    (ExpressionLabel::Fear, "{1+4}+{5+7}+{20+25+26}"),
    (ExpressionLabel::Surprise, "{1+2}+5+{26+27}"),
    (ExpressionLabel::Contempt, "4+6+{10+24}"),
    (ExpressionLabel::Frustration, "2+28+{43+64}"),
    (ExpressionLabel::Confusion, "1+5+25"),
    (ExpressionLabel::Neutral, ""),
];

impl ExpressionDef {
    /// Parses a `+`-joined formula such as `6+{12+16+25+26}`. Whitespace is ignored.
    pub fn parse(label: ExpressionLabel, formula: &str) -> Result<Self> {
        let err = |offset: usize, message: &str| Error::FormulaParse {
            offset,
            message: message.to_string(),
        };
        let mut mandatory = AuSet::EMPTY;
        let mut alt_groups = Vec::new();
        let mut group: Option<AuSet> = None;
        let mut number = String::new();
        let mut expect_term = true;

        let flush = |number: &mut String, offset: usize, group: &mut Option<AuSet>, mandatory: &mut AuSet| -> Result<()> {
            if number.is_empty() {
                return Ok(());
            }
            let code: u8 = number
                .parse()
                .map_err(|_| err(offset, "AU code out of range"))?;
            let au = AuSet::try_from_codes([code]).map_err(|_| err(offset, "unknown AU code"))?;
            match group {
                Some(g) => *g = g.union(au),
                None => *mandatory = mandatory.union(au),
            }
            number.clear();
            Ok(())
        };

        for (i, ch) in formula.char_indices() {
            match ch {
                c if c.is_ascii_whitespace() => flush(&mut number, i, &mut group, &mut mandatory)?,
                c if c.is_ascii_digit() => {
                    if !expect_term && number.is_empty() {
                        return Err(err(i, "expected `+` between terms"));
                    }
                    number.push(c);
                    expect_term = false;
                }
                '+' => {
                    if expect_term {
                        return Err(err(i, "empty term"));
                    }
                    flush(&mut number, i, &mut group, &mut mandatory)?;
                    expect_term = true;
                }
                '{' => {
                    if group.is_some() {
                        return Err(err(i, "nested group"));
                    }
                    if !expect_term {
                        return Err(err(i, "expected `+` before group"));
                    }
                    group = Some(AuSet::EMPTY);
                }
                '}' => {
                    if expect_term {
                        return Err(err(i, "empty term"));
                    }
                    flush(&mut number, i, &mut group, &mut mandatory)?;
                    let g = group.take().ok_or_else(|| err(i, "unbalanced `}`"))?;
                    alt_groups.push(g);
                }
                _ => return Err(err(i, "unexpected character")),
            }
        }
        flush(&mut number, formula.len(), &mut group, &mut mandatory)?;
        if group.is_some() {
            return Err(err(formula.len(), "unterminated group"));
        }
        if expect_term && !(mandatory.is_empty() && alt_groups.is_empty()) {
            return Err(err(formula.len(), "dangling `+`"));
        }
        Ok(Self {
            label,
            mandatory,
            alt_groups,
        })
    }

    /// Every AU mentioned by the template.
    pub fn universe(&self) -> AuSet {
        self.alt_groups
            .iter()
            .fold(self.mandatory, |acc, g| acc.union(*g))
    }

    /// Template match predicate (Neutral is handled by the classifier).
    pub fn matches(&self, observed: AuSet) -> bool {
        self.mandatory.is_subset(observed) && self.alt_groups.iter().all(|g| g.intersects(observed))
    }

    pub fn score(&self, observed: AuSet) -> MatchScore {
        let universe = self.universe();
        MatchScore {
            overlap: universe.intersection(observed).len(),
            missing: universe.difference(observed).len(),
        }
    }
}

/// How well an observed AU set fits a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchScore {
    /// Template AUs present in the observation.
    pub overlap: usize,
    /// Template AUs absent from the observation.
    pub missing: usize,
}

impl MatchScore {
    /// True if `self` beats `other`: more overlap, then fewer missing AUs.
    pub fn beats(&self, other: &MatchScore) -> bool {
        (self.overlap, std::cmp::Reverse(self.missing)) > (other.overlap, std::cmp::Reverse(other.missing))
    }
}

pub fn knowledge_base() -> &'static [ExpressionDef] {
    static KB: OnceLock<Vec<ExpressionDef>> = OnceLock::new();
    KB.get_or_init(|| {
        EXPRESSION_FORMULAS
            .iter()
            .map(|(label, formula)| ExpressionDef::parse(*label, formula).expect("built-in formula"))
            .collect()
    })
}

pub fn expression_def(label: ExpressionLabel) -> Option<&'static ExpressionDef> {
    knowledge_base().iter().find(|d| d.label == label)
}

/// Non-empty subsets of `group`, ascending by bit value.
fn non_empty_subsets(group: AuSet) -> Vec<AuSet> {
    let members: Vec<u8> = group.iter().collect();
    (1u32..(1 << members.len()))
        .map(|mask| {
            AuSet::try_from_codes(
                members
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &a)| a),
            )
            .unwrap()
        })
        .collect()
}

/// Every AU set the template admits with no extra AUs: mandatory plus a
/// non-empty choice from each alternative group. Sorted and deduplicated.
pub fn expand_expression(def: &ExpressionDef) -> Vec<AuSet> {
    let mut sets = vec![def.mandatory];
    for group in &def.alt_groups {
        let choices = non_empty_subsets(*group);
        sets = sets
            .iter()
            .flat_map(|base| choices.iter().map(move |c| base.union(*c)))
            .collect();
    }
    let unique: BTreeSet<AuSet> = sets.into_iter().collect();
    unique.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub label: ExpressionLabel,
    pub pattern: RulePattern,
    /// Score of the winning template; `None` for Neutral and Unknown.
    pub score: Option<MatchScore>,
}

/// Labels an AU set.
///
/// Among matching templates the winner has the largest overlap with the
/// observation, then the fewest template AUs missing from it, then the earliest
/// row. The empty set is Neutral; a non-empty set with no match is Unknown.
pub fn classify_au_set(observed: AuSet) -> Classification {
    let pattern = synthesize_pattern(observed);
    if observed.is_empty() {
        return Classification {
            label: ExpressionLabel::Neutral,
            pattern,
            score: None,
        };
    }
    let mut best: Option<(&ExpressionDef, MatchScore)> = None;
    for def in knowledge_base() {
        if def.label == ExpressionLabel::Neutral || !def.matches(observed) {
            continue;
        }
        let score = def.score(observed);
        if best.is_none_or(|(_, b)| score.beats(&b)) {
            best = Some((def, score));
        }
    }
    match best {
        Some((def, score)) => Classification {
            label: def.label,
            pattern,
            score: Some(score),
        },
        None => Classification {
            label: ExpressionLabel::Unknown,
            pattern,
            score: None,
        },
    }
}

/// `(expression, canonical pattern)` for every expansion, sorted by name then pattern.
pub fn pattern_database() -> Vec<(ExpressionLabel, String)> {
    let mut rows: Vec<(ExpressionLabel, String)> = knowledge_base()
        .iter()
        .flat_map(|def| {
            expand_expression(def)
                .into_iter()
                .map(move |s| (def.label, render_pattern(&synthesize_pattern(s), RenderMode::Canonical)))
        })
        .collect();
    rows.sort_by(|a, b| (a.0.name(), &a.1).cmp(&(b.0.name(), &b.1)));
    rows.dedup();
    rows
}

/// Tab-separated database text, one record per line.
pub fn render_pattern_database(rows: &[(ExpressionLabel, String)]) -> String {
    let mut out = String::new();
    for (label, pattern) in rows {
        out.push_str(label.name());
        out.push('\t');
        out.push_str(pattern);
        out.push('\n');
    }
    out
}

pub fn parse_pattern_database(text: &str) -> Result<Vec<(ExpressionLabel, RulePattern)>> {
    let mut rows = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.is_empty() {
            let (name, pattern) = body.split_once('\t').ok_or_else(|| Error::PatternParse {
                offset,
                message: "expected `<expression>\\t<pattern>`".into(),
            })?;
            let label: ExpressionLabel = name.parse().map_err(|_| Error::PatternParse {
                offset,
                message: format!("unknown expression `{name}`"),
            })?;
            let pattern = parse_pattern(pattern).map_err(|e| match e {
                Error::PatternParse { offset: o, message } => Error::PatternParse {
                    offset: offset + name.len() + 1 + o,
                    message,
                },
                other => other,
            })?;
            rows.push((label, pattern));
        }
        offset += line.len();
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(codes: &[u8]) -> AuSet {
        AuSet::try_from_codes(codes.iter().copied()).unwrap()
    }

    fn bits(v: &[bool]) -> String {
        v.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    #[test]
    fn region_table() {
        let mut seen = BTreeSet::new();
        for region in Region::CANONICAL {
            assert!((1..=6).contains(&region.dim()));
            for &au in region.au_list() {
                assert!(seen.insert(au), "AU {au} listed twice");
            }
        }
        assert_eq!(seen.len(), KNOWN_AUS.len());
        let dims: Vec<usize> = Region::CANONICAL.iter().map(|r| r.dim()).collect();
        assert_eq!(dims, vec![2, 3, 4, 1, 5, 6]);
    }

    #[test]
    fn eyebrow_rule_vectors() {
        let flat = |au| bits(&au_rule_matrix(Region::EyeBrows, au).unwrap().column_vector());
        assert_eq!(flat(1), "100000000");
        assert_eq!(flat(2), "000010000");
        assert_eq!(flat(4), "000000001");
        assert!(matches!(
            au_rule_matrix(Region::EyeBrows, 6),
            Err(Error::ForeignAu { au: 6, .. })
        ));
    }

    #[test]
    fn segments() {
        assert_eq!(bits(&region_segment(Region::LipPart2, set(&[12])).unwrap()), "100000");
        assert_eq!(bits(&region_segment(Region::LipPart1, set(&[26])).unwrap()), "00010");
        assert_eq!(bits(&region_segment(Region::Eyes, AuSet::EMPTY).unwrap()), "0000");
        assert!(region_segment(Region::Eyes, set(&[6])).is_err());
    }

    #[test]
    fn synthesis() {
        let p = synthesize_pattern(set(&[6, 12]));
        assert_eq!(p.render(RenderMode::Canonical), "00$000$0000$1$00000$100000$");
        let p = synthesize_pattern(set(&[1, 2, 5, 26]));
        assert_eq!(p.render(RenderMode::Canonical), "10$110$0000$0$00010$000000$");
        assert!(synthesize_pattern(AuSet::EMPTY).is_neutral());
    }

    #[test]
    fn compressed_rendering() {
        let happy = synthesize_pattern(set(&[6, 12]));
        assert_eq!(happy.render(RenderMode::PaperCompat), "00$000$0000$1$100000$");
        let happy2 = synthesize_pattern(set(&[6, 26]));
        assert_eq!(happy2.render(RenderMode::PaperCompat), "00$000$0000$1$00010$");
        assert_eq!(
            synthesize_pattern(AuSet::EMPTY).render(RenderMode::Canonical),
            "00$000$0000$0$00000$000000$"
        );
        assert_eq!(
            synthesize_pattern(AuSet::EMPTY).render(RenderMode::PaperCompat),
            "00$000$0000$0$00000$"
        );
        let both = synthesize_pattern(set(&[25, 12]));
        assert_eq!(both.render(RenderMode::PaperCompat), "00$000$0000$0$00100$100000$");
    }

    #[test]
    fn parsing() {
        assert!(parse_pattern("00$000$0000$0$00000$000000$").unwrap().is_neutral());
        assert_eq!(
            parse_pattern("00$000$0000$1$00000$100000$").unwrap(),
            synthesize_pattern(set(&[6, 12]))
        );
        match parse_pattern("00$000$0000$2$") {
            Err(Error::PatternParse { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
        assert!(parse_pattern("00$000$0000$1$00000$").is_err());
        assert!(parse_pattern("00$000$0000$1$00000$100000$0").is_err());
        assert!(parse_pattern("000$00$0000$1$00000$100000$").is_err());
        assert!(parse_pattern("").is_err());
    }

    #[test]
    fn formula_parsing() {
        let happy = expression_def(ExpressionLabel::Happiness).unwrap();
        assert_eq!(happy.mandatory, set(&[6]));
        assert_eq!(happy.alt_groups, vec![set(&[12, 16, 25, 26])]);
        let sad = expression_def(ExpressionLabel::Sadness).unwrap();
        assert_eq!(sad.mandatory, set(&[7, 63]));
        assert_eq!(sad.alt_groups, vec![set(&[1, 4]), set(&[15, 25, 28])]);
        let neutral = expression_def(ExpressionLabel::Neutral).unwrap();
        assert!(neutral.mandatory.is_empty() && neutral.alt_groups.is_empty());

        for bad in ["6+", "+6", "{6", "6}", "{{6}}", "6 7", "6+{}", "6+99", "a"] {
            assert!(
                ExpressionDef::parse(ExpressionLabel::Unknown, bad).is_err(),
                "{bad:?} should not parse"
            );
        }
    }

    #[test]
    fn expansions() {
        let happy = expand_expression(expression_def(ExpressionLabel::Happiness).unwrap());
        assert_eq!(happy.len(), 15);
        assert!(happy.contains(&set(&[6, 12])));
        assert!(happy.contains(&set(&[6, 26])));
        assert_eq!(
            expand_expression(expression_def(ExpressionLabel::Disgust).unwrap()),
            vec![set(&[10, 61])]
        );
        assert_eq!(
            expand_expression(expression_def(ExpressionLabel::Neutral).unwrap()),
            vec![AuSet::EMPTY]
        );
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_au_set(set(&[6, 12])).label, ExpressionLabel::Happiness);
        assert_eq!(classify_au_set(AuSet::EMPTY).label, ExpressionLabel::Neutral);
        assert_eq!(classify_au_set(set(&[10, 61])).label, ExpressionLabel::Disgust);
        assert_eq!(classify_au_set(set(&[43])).label, ExpressionLabel::Unknown);
        assert_eq!(classify_au_set(set(&[1, 5, 25])).label, ExpressionLabel::Confusion);
        assert_eq!(
            classify_au_set(set(&[6, 12])).pattern,
            synthesize_pattern(set(&[6, 12]))
        );
    }

    #[test]
    fn au_literals() {
        assert_eq!("6,12".parse::<AuSet>().unwrap(), set(&[6, 12]));
        assert_eq!(" 12 , 6 ".parse::<AuSet>().unwrap(), set(&[6, 12]));
        assert_eq!("".parse::<AuSet>().unwrap(), AuSet::EMPTY);
        let err = "6,99".parse::<AuSet>().unwrap_err();
        assert!(err.to_string().contains("99") && err.to_string().contains("64"));
        assert!("6,,12".parse::<AuSet>().is_err());
        assert_eq!(set(&[12, 6]).to_string(), "6,12");
    }

    #[test]
    fn database_contents() {
        let db = pattern_database();
        assert!(db.contains(&(ExpressionLabel::Happiness, "00$000$0000$1$00000$100000$".into())));
        assert_eq!(db.iter().filter(|r| r.0 == ExpressionLabel::Disgust).count(), 1);
        let neutral: Vec<_> = db.iter().filter(|r| r.0 == ExpressionLabel::Neutral).collect();
        assert_eq!(neutral.len(), 1);
        assert_eq!(neutral[0].1, "00$000$0000$0$00000$000000$");

        let text = render_pattern_database(&db);
        let parsed = parse_pattern_database(&text).unwrap();
        assert_eq!(parsed.len(), db.len());
        assert!(parse_pattern_database("Happiness 00$").is_err());
        match parse_pattern_database("Neutral\t00$000$0000$0$00000$000000$\nFear\t0x$") {
            Err(Error::PatternParse { offset, .. }) => assert_eq!(offset, 36 + 5 + 1),
            other => panic!("{other:?}"),
        }
    }
}
