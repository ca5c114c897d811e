//! The `D([Q+,Q-],[N,L,P])` architecture notation.
//!
//! Two bracket forms describe where the detectors live:
//!
//! * `D([Q+,Q-],[N,L,P])`: every output plane carries Q+ positive and Q−
//!   negative detectors (Q− = 0 is the plain, non-differential design);
//! * `D([Q+][Q-],[2N,L,P])`: positive and negative detectors sit on the
//!   output planes of different networks, so the network count doubles.
//!
//! N jointly trained networks split the M dataset classes into N contiguous
//! groups; P (neurons per layer) accepts a `k` suffix, e.g. `40k` = 40000.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub q_pos: usize,
    pub q_neg: usize,
    /// Bracket form `[Q+][Q-]`: positives and negatives on separate planes.
    pub split_planes: bool,
    /// Total network count as written in the notation (2N when split).
    pub n_networks: usize,
    pub layers_per_network: usize,
    pub neurons_per_layer: usize,
    pub num_classes: usize,
    /// Class → network holding its positive (or single) detector.
    pub class_assignment: Vec<usize>,
    /// Class → network holding its negative detector; split designs only.
    pub negative_assignment: Option<Vec<usize>>,
}

impl ArchitectureSpec {
    /// Number of class groups N (half the network count for split designs).
    pub fn groups(&self) -> usize {
        if self.split_planes {
            self.n_networks / 2
        } else {
            self.n_networks
        }
    }

    pub fn classes_per_group(&self) -> usize {
        self.num_classes / self.groups()
    }

    pub fn is_differential(&self) -> bool {
        self.q_neg > 0
    }

    /// Grid side length; errors unless P is a perfect square.
    pub fn grid_size(&self) -> Result<usize> {
        let side = (self.neurons_per_layer as f64).sqrt().round() as usize;
        if side * side != self.neurons_per_layer {
            return Err(Error::Config(format!(
                "neurons per layer must be a perfect square, got {}",
                self.neurons_per_layer
            )));
        }
        Ok(side)
    }

    /// Classes whose detectors live on the given group's plane(s),
    /// under the contiguous assignment.
    pub fn classes_of_group(&self, group: usize) -> std::ops::Range<usize> {
        let per = self.classes_per_group();
        group * per..(group + 1) * per
    }

    /// Network index carrying the positive (or single) detector of a class.
    pub fn positive_network_of(&self, class: usize) -> usize {
        self.class_assignment[class]
    }

    /// Network index carrying the negative detector of a class, for
    /// differential designs.
    pub fn negative_network_of(&self, class: usize) -> Option<usize> {
        if !self.is_differential() {
            return None;
        }
        match &self.negative_assignment {
            Some(map) => Some(map[class]),
            None => Some(self.class_assignment[class]),
        }
    }

    /// Canonical notation string; `parse_notation(render(s), M) == s`.
    pub fn render(&self) -> String {
        let p = if self.neurons_per_layer >= 1000 && self.neurons_per_layer.is_multiple_of(1000) {
            format!("{}k", self.neurons_per_layer / 1000)
        } else {
            format!("{}", self.neurons_per_layer)
        };
        if self.split_planes {
            format!(
                "D([{}][{}],[{},{},{}])",
                self.q_pos, self.q_neg, self.n_networks, self.layers_per_network, p
            )
        } else {
            format!(
                "D([{},{}],[{},{},{}])",
                self.q_pos, self.q_neg, self.n_networks, self.layers_per_network, p
            )
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        match self.bytes.get(self.pos) {
            Some(&b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            Some(&b) => Err(self.error(format!(
                "expected `{}`, found `{}`",
                c as char, b as char
            ))),
            None => Err(self.error(format!("expected `{}`, found end of input", c as char))),
        }
    }

    fn integer(&mut self, allow_k: bool) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an integer".into()));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let mut value: usize = digits
            .parse()
            .map_err(|_| self.error(format!("integer `{digits}` out of range")))?;
        if allow_k && self.bytes.get(self.pos).is_some_and(|b| *b == b'k') {
            self.pos += 1;
            value = value
                .checked_mul(1000)
                .ok_or_else(|| self.error(format!("integer `{digits}k` out of range")))?;
        }
        Ok(value)
    }

    fn error(&self, message: String) -> Error {
        Error::Notation {
            position: self.pos,
            message,
        }
    }

    fn end(&mut self) -> Result<()> {
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing characters after notation".into()));
        }
        Ok(())
    }
}

/// Parse a notation string for a dataset with `num_classes` classes and
/// validate the detector/network arithmetic against it. Class groups are
/// assigned contiguously in ascending order (classes 0..M/N−1 to group 0,
/// and so on); split designs put all positive planes first, so group g uses
/// network g for positives and network N+g for negatives.
pub fn parse_notation(text: &str, num_classes: usize) -> Result<ArchitectureSpec> {
    let mut p = Parser::new(text);
    p.skip_ws();
    p.expect(b'D')?;
    p.expect(b'(')?;
    p.expect(b'[')?;
    let q_pos = p.integer(false)?;
    let (q_neg, split_planes) = match p.peek() {
        Some(b',') => {
            p.expect(b',')?;
            let q = p.integer(false)?;
            p.expect(b']')?;
            (q, false)
        }
        Some(b']') => {
            p.expect(b']')?;
            p.expect(b'[')?;
            let q = p.integer(false)?;
            p.expect(b']')?;
            (q, true)
        }
        _ => return Err(p.error("expected `,` or `]` after Q+".into())),
    };
    p.expect(b',')?;
    p.expect(b'[')?;
    let n_networks = p.integer(false)?;
    p.expect(b',')?;
    let layers = p.integer(false)?;
    p.expect(b',')?;
    let neurons = p.integer(true)?;
    p.expect(b']')?;
    p.expect(b')')?;
    p.end()?;

    build_spec(
        q_pos,
        q_neg,
        split_planes,
        n_networks,
        layers,
        neurons,
        num_classes,
    )
}

fn build_spec(
    q_pos: usize,
    q_neg: usize,
    split_planes: bool,
    n_networks: usize,
    layers: usize,
    neurons: usize,
    num_classes: usize,
) -> Result<ArchitectureSpec> {
    if num_classes == 0 {
        return Err(Error::Architecture("dataset has zero classes".into()));
    }
    if n_networks == 0 {
        return Err(Error::Architecture("network count must be positive".into()));
    }
    if layers == 0 {
        return Err(Error::Architecture("layer count must be positive".into()));
    }
    if neurons == 0 {
        return Err(Error::Architecture("neuron count must be positive".into()));
    }
    if q_pos == 0 {
        return Err(Error::Architecture(
            "each class needs a positive or single detector (Q+ = 0)".into(),
        ));
    }
    if split_planes && q_neg == 0 {
        return Err(Error::Architecture(
            "split-plane form requires negative detectors (Q- = 0)".into(),
        ));
    }
    if split_planes && !n_networks.is_multiple_of(2) {
        return Err(Error::Architecture(format!(
            "split-plane form needs an even network count, got {n_networks}"
        )));
    }
    let groups = if split_planes {
        n_networks / 2
    } else {
        n_networks
    };
    if !num_classes.is_multiple_of(groups) {
        return Err(Error::Architecture(format!(
            "{num_classes} classes cannot be divided into {groups} equal groups \
             ({num_classes} mod {groups} != 0)"
        )));
    }
    let per_group = num_classes / groups;
    if q_pos != per_group {
        return Err(Error::Architecture(format!(
            "Q+ = {q_pos} does not match {per_group} classes per group"
        )));
    }
    if q_neg != 0 && q_neg != per_group {
        return Err(Error::Architecture(format!(
            "Q- = {q_neg} must be 0 or match {per_group} classes per group"
        )));
    }
    let class_assignment: Vec<usize> = (0..num_classes).map(|c| c / per_group).collect();
    let negative_assignment = if split_planes {
        Some((0..num_classes).map(|c| groups + c / per_group).collect())
    } else {
        None
    };
    Ok(ArchitectureSpec {
        q_pos,
        q_neg,
        split_planes,
        n_networks,
        layers_per_network: layers,
        neurons_per_layer: neurons,
        num_classes,
        class_assignment,
        negative_assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_design() {
        let spec = parse_notation("D([10,0],[1,5,40k])", 10).unwrap();
        assert_eq!(spec.q_pos, 10);
        assert_eq!(spec.q_neg, 0);
        assert!(!spec.split_planes);
        assert_eq!(spec.n_networks, 1);
        assert_eq!(spec.layers_per_network, 5);
        assert_eq!(spec.neurons_per_layer, 40000);
        assert!(!spec.is_differential());
        assert_eq!(spec.grid_size().unwrap(), 200);
        assert_eq!(spec.render(), "D([10,0],[1,5,40k])");
    }

    #[test]
    fn parses_split_design() {
        let spec = parse_notation("D([1][1],[20,5,40k])", 10).unwrap();
        assert!(spec.split_planes);
        assert_eq!(spec.n_networks, 20);
        assert_eq!(spec.groups(), 10);
        assert_eq!(spec.classes_per_group(), 1);
        assert_eq!(spec.positive_network_of(3), 3);
        assert_eq!(spec.negative_network_of(3), Some(13));
        assert_eq!(spec.render(), "D([1][1],[20,5,40k])");
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_notation("D([5, 5], [2, 5, 40k])", 10).unwrap();
        let b = parse_notation("D([5,5],[2,5,40k])", 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn class_count_arithmetic_is_validated() {
        // 10 mod 4 != 0
        let err = parse_notation("D([3,0],[4,5,40k])", 10).unwrap_err();
        assert!(matches!(err, Error::Architecture(_)), "{err}");
        // Q+ inconsistent with M/N
        assert!(parse_notation("D([4,0],[2,5,40k])", 10).is_err());
        // Q- must be 0 or M/N
        assert!(parse_notation("D([5,3],[2,5,40k])", 10).is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_notation("D([10,0],[1,5,40k]", 10) {
            Err(Error::Notation { position, .. }) => assert_eq!(position, 18),
            other => panic!("expected notation error, got {other:?}"),
        }
        assert!(parse_notation("", 10).is_err());
        assert!(parse_notation("E([10,0],[1,5,40k])", 10).is_err());
        assert!(parse_notation("D([10,0],[1,5,40k]) extra", 10).is_err());
        assert!(parse_notation("D([10,0],[1,5,40k])k", 10).is_err());
    }

    #[test]
    fn contiguous_assignment() {
        let spec = parse_notation("D([5,5],[2,5,40k])", 10).unwrap();
        // classes 0-4 on network 0, classes 5-9 on network 1
        for c in 0..5 {
            assert_eq!(spec.positive_network_of(c), 0);
            assert_eq!(spec.negative_network_of(c), Some(0));
        }
        for c in 5..10 {
            assert_eq!(spec.positive_network_of(c), 1);
        }
        assert_eq!(spec.classes_of_group(1), 5..10);
    }

    #[test]
    fn non_square_neuron_count_is_rejected_lazily() {
        let spec = parse_notation("D([10,0],[1,5,500])", 10).unwrap();
        assert!(spec.grid_size().is_err());
    }
}
