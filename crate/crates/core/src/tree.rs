//! Rooted binary trees whose leaves may carry integer labels.
//!
//! A [`Tree`] is stored by its canonical text encoding. Unlabeled trees are
//! the elements of 𝕋; trees with some labeled leaves double as flags.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, ToPrimitive};

use crate::error::{Error, Result};

/// Unnormalized tree structure as produced by a parser or a builder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTree {
    pub label: Option<usize>,
    pub children: Vec<RawTree>,
}

impl RawTree {
    pub fn leaf() -> Self {
        RawTree {
            label: None,
            children: Vec::new(),
        }
    }

    pub fn labeled(label: usize) -> Self {
        RawTree {
            label: Some(label),
            children: Vec::new(),
        }
    }

    pub fn pair(a: RawTree, b: RawTree) -> Self {
        RawTree {
            label: None,
            children: vec![a, b],
        }
    }

    pub fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(RawTree::leaf_count).sum()
        }
    }
}

/// Canonical rooted binary tree, possibly with labeled leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tree {
    code: String,
    leaves: usize,
    labeled: usize,
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.leaves
            .cmp(&other.leaves)
            .then_with(|| self.code.cmp(&other.code))
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

impl FromStr for Tree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tree::parse(s)
    }
}

pub(crate) fn label_code(label: usize) -> String {
    if (1..10).contains(&label) {
        label.to_string()
    } else {
        format!("[{label}]")
    }
}

struct Canon {
    leaves: usize,
    labeled: usize,
    code: String,
}

fn canon_pair(a: Canon, b: Canon) -> Canon {
    let (x, y) = if (a.leaves, &a.code) <= (b.leaves, &b.code) {
        (a, b)
    } else {
        (b, a)
    };
    let mut code = String::with_capacity(x.code.len() + y.code.len() + 2);
    code.push('(');
    code.push_str(&x.code);
    code.push_str(&y.code);
    code.push(')');
    Canon {
        leaves: x.leaves + y.leaves,
        labeled: x.labeled + y.labeled,
        code,
    }
}

fn canon_leaf(label: Option<usize>) -> Canon {
    match label {
        None => Canon {
            leaves: 1,
            labeled: 0,
            code: "*".to_string(),
        },
        Some(l) => Canon {
            leaves: 1,
            labeled: 1,
            code: label_code(l),
        },
    }
}

fn canon_raw(raw: &RawTree) -> Result<Canon> {
    match raw.children.len() {
        0 => {
            if raw.label == Some(0) {
                return Err(Error::Malformed("leaf labels start at 1".into()));
            }
            Ok(canon_leaf(raw.label))
        }
        2 => {
            if raw.label.is_some() {
                return Err(Error::Malformed("inner node carries a label".into()));
            }
            let a = canon_raw(&raw.children[0])?;
            let b = canon_raw(&raw.children[1])?;
            Ok(canon_pair(a, b))
        }
        k => Err(Error::Malformed(format!("inner node with {k} children"))),
    }
}

fn collect_labels(raw: &RawTree, out: &mut Vec<usize>) {
    if let Some(l) = raw.label {
        out.push(l);
    }
    for c in &raw.children {
        collect_labels(c, out);
    }
}

/// Brings a raw structure into canonical form.
pub fn canonicalize(raw: &RawTree) -> Result<Tree> {
    let mut labels = Vec::new();
    collect_labels(raw, &mut labels);
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Malformed("repeated leaf label".into()));
    }
    let c = canon_raw(raw)?;
    Ok(Tree {
        code: c.code,
        leaves: c.leaves,
        labeled: c.labeled,
    })
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(i, _)| i)
            .unwrap_or(self.src.len())
    }

    fn tree(&mut self) -> Result<RawTree> {
        let at = self.offset();
        match self.peek() {
            Some('*') | Some('•') => {
                self.pos += 1;
                Ok(RawTree::leaf())
            }
            Some(c @ '1'..='9') => {
                self.pos += 1;
                Ok(RawTree::labeled(c.to_digit(10).unwrap() as usize))
            }
            Some('[') => {
                self.pos += 1;
                let mut digits = String::new();
                while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                    digits.push(c);
                    self.pos += 1;
                }
                if self.peek() != Some(']') {
                    return Err(Error::parse(self.offset(), "expected ']'"));
                }
                self.pos += 1;
                let label: usize = digits
                    .parse()
                    .map_err(|_| Error::parse(at, "bad label"))?;
                if label == 0 {
                    return Err(Error::parse(at, "labels start at 1"));
                }
                Ok(RawTree::labeled(label))
            }
            Some('(') => {
                self.pos += 1;
                let a = self.tree()?;
                let b = self.tree()?;
                if self.peek() != Some(')') {
                    return Err(Error::parse(self.offset(), "expected ')'"));
                }
                self.pos += 1;
                Ok(RawTree::pair(a, b))
            }
            Some(c) => Err(Error::parse(at, format!("unexpected character '{c}'"))),
            None => Err(Error::parse(at, "unexpected end of input")),
        }
    }
}

/// Parses the text grammar into a raw structure; the empty tree yields `None`.
pub fn parse_raw(s: &str) -> Result<Option<RawTree>> {
    let chars: Vec<(usize, char)> = s.char_indices().filter(|(_, c)| !c.is_whitespace()).collect();
    let compact: String = chars.iter().map(|&(_, c)| c).collect();
    if compact == "()" || compact == "∅" {
        return Ok(None);
    }
    let mut p = Parser {
        chars,
        pos: 0,
        src: s,
    };
    let t = p.tree()?;
    if p.pos != p.chars.len() {
        return Err(Error::parse(p.offset(), "trailing input"));
    }
    Ok(Some(t))
}

impl Tree {
    pub fn empty() -> Tree {
        Tree {
            code: "()".to_string(),
            leaves: 0,
            labeled: 0,
        }
    }

    pub fn leaf() -> Tree {
        Tree {
            code: "*".to_string(),
            leaves: 1,
            labeled: 0,
        }
    }

    pub fn parse(s: &str) -> Result<Tree> {
        match parse_raw(s)? {
            None => Ok(Tree::empty()),
            Some(raw) => canonicalize(&raw),
        }
    }

    /// Parses and rejects labeled leaves.
    pub fn parse_unlabeled(s: &str) -> Result<Tree> {
        let t = Tree::parse(s)?;
        if t.labeled > 0 {
            return Err(Error::Invalid(format!("'{s}' has labeled leaves")));
        }
        Ok(t)
    }

    pub(crate) fn from_canonical(code: String, leaves: usize, labeled: usize) -> Tree {
        Tree {
            code,
            leaves,
            labeled,
        }
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn label_count(&self) -> usize {
        self.labeled
    }

    pub fn unlabeled_count(&self) -> usize {
        self.leaves - self.labeled
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    pub fn is_unlabeled(&self) -> bool {
        self.labeled == 0
    }

    pub fn to_raw(&self) -> Option<RawTree> {
        parse_raw(&self.code).expect("canonical code parses")
    }

    pub fn pair(a: &Tree, b: &Tree) -> Tree {
        assert!(!a.is_empty() && !b.is_empty(), "cannot pair the empty tree");
        let c = canon_pair(
            Canon {
                leaves: a.leaves,
                labeled: a.labeled,
                code: a.code.clone(),
            },
            Canon {
                leaves: b.leaves,
                labeled: b.labeled,
                code: b.code.clone(),
            },
        );
        Tree::from_canonical(c.code, c.leaves, c.labeled)
    }

    /// The same shape with every label erased.
    pub fn unlabeled(&self) -> Tree {
        if self.labeled == 0 {
            return self.clone();
        }
        self.shape().induced_unlabeled(self.shape().full_mask())
    }

    /// Labels in increasing order.
    pub fn labels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.shape().labels.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// Number of label-preserving automorphisms.
    pub fn automorphism_count(&self) -> u128 {
        fn rec(raw: &RawTree) -> (String, u32) {
            if raw.children.is_empty() {
                return (canon_leaf(raw.label).code, 0);
            }
            let (a, ea) = rec(&raw.children[0]);
            let (b, eb) = rec(&raw.children[1]);
            let same = u32::from(a == b);
            let code = canon_raw(raw).expect("valid").code;
            (code, ea + eb + same)
        }
        match self.to_raw() {
            None => 1,
            Some(raw) => 1u128 << rec(&raw).1,
        }
    }

    /// Positional view with leaves numbered in depth-first order.
    pub fn shape(&self) -> LeafTree {
        LeafTree::from_raw(self.to_raw().as_ref())
    }

    /// Subtree induced by the leaves carrying the given labels, labels kept.
    pub fn induced_by_labels(&self, labels: &[usize]) -> Result<Tree> {
        if labels.is_empty() {
            return Err(Error::Invalid("empty leaf set".into()));
        }
        let shape = self.shape();
        let mut mask = 0u64;
        for &l in labels {
            let pos = shape
                .labels
                .iter()
                .position(|&x| x == Some(l))
                .ok_or_else(|| Error::Invalid(format!("label {l} not present in {self}")))?;
            mask |= 1 << pos;
        }
        Ok(shape.induced(mask))
    }

    /// Attaches a new leaf (optionally labeled) above every node in turn.
    pub fn insertions(&self, label: Option<usize>) -> Vec<Tree> {
        let Some(raw) = self.to_raw() else {
            return vec![canonicalize(&RawTree {
                label,
                children: Vec::new(),
            })
            .expect("single leaf")];
        };
        fn rec(raw: &RawTree, label: Option<usize>, out: &mut Vec<RawTree>) {
            let new_leaf = RawTree {
                label,
                children: Vec::new(),
            };
            out.push(RawTree::pair(raw.clone(), new_leaf));
            if raw.children.len() == 2 {
                let mut left = Vec::new();
                rec(&raw.children[0], label, &mut left);
                for l in left {
                    out.push(RawTree::pair(l, raw.children[1].clone()));
                }
                let mut right = Vec::new();
                rec(&raw.children[1], label, &mut right);
                for r in right {
                    out.push(RawTree::pair(raw.children[0].clone(), r));
                }
            }
        }
        let mut raws = Vec::new();
        rec(&raw, label, &mut raws);
        raws.iter()
            .map(|r| canonicalize(r).expect("insertion keeps validity"))
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(usize),
    Pair(usize, usize),
}

/// Arena form of a tree with leaves at positions `0..n` in depth-first order.
#[derive(Clone, Debug)]
pub struct LeafTree {
    nodes: Vec<Node>,
    root: Option<usize>,
    labels: Vec<Option<usize>>,
}

impl LeafTree {
    fn from_raw(raw: Option<&RawTree>) -> LeafTree {
        let mut lt = LeafTree {
            nodes: Vec::new(),
            root: None,
            labels: Vec::new(),
        };
        fn add(lt: &mut LeafTree, raw: &RawTree) -> usize {
            let node = if raw.children.is_empty() {
                lt.labels.push(raw.label);
                Node::Leaf(lt.labels.len() - 1)
            } else {
                let a = add(lt, &raw.children[0]);
                let b = add(lt, &raw.children[1]);
                Node::Pair(a, b)
            };
            lt.nodes.push(node);
            lt.nodes.len() - 1
        }
        if let Some(raw) = raw {
            let r = add(&mut lt, raw);
            lt.root = Some(r);
        }
        lt
    }

    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn full_mask(&self) -> u64 {
        if self.labels.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.labels.len()) - 1
        }
    }

    /// Label of each leaf position.
    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Mask of leaves without a label.
    pub fn unlabeled_mask(&self) -> u64 {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_none())
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    fn rec(&self, node: usize, mask: u64, labels: &dyn Fn(usize) -> Option<usize>) -> Option<Canon> {
        match self.nodes[node] {
            Node::Leaf(i) => (mask >> i & 1 == 1).then(|| canon_leaf(labels(i))),
            Node::Pair(a, b) => match (self.rec(a, mask, labels), self.rec(b, mask, labels)) {
                (Some(x), Some(y)) => Some(canon_pair(x, y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            },
        }
    }

    fn induced_by(&self, mask: u64, labels: &dyn Fn(usize) -> Option<usize>) -> Tree {
        match self.root.and_then(|r| self.rec(r, mask, labels)) {
            None => Tree::empty(),
            Some(c) => Tree::from_canonical(c.code, c.leaves, c.labeled),
        }
    }

    /// Induced subtree on a set of leaf positions, keeping labels.
    pub fn induced(&self, mask: u64) -> Tree {
        self.induced_by(mask, &|i| self.labels[i])
    }

    /// Induced subtree on a set of leaf positions with all labels dropped.
    pub fn induced_unlabeled(&self, mask: u64) -> Tree {
        self.induced_by(mask, &|_| None)
    }

    /// Induced subtree where leaf positions get the supplied labels.
    pub fn induced_relabeled(&self, mask: u64, labels: &[Option<usize>]) -> Tree {
        self.induced_by(mask, &|i| labels[i])
    }
}

/// Induced subtree of `t` on the given leaf positions (depth-first order).
pub fn induced_subtree(t: &Tree, positions: &[usize]) -> Result<Tree> {
    if positions.is_empty() {
        return Err(Error::Invalid("empty leaf set".into()));
    }
    let mut mask = 0u64;
    for &p in positions {
        if p >= t.leaf_count() {
            return Err(Error::Invalid(format!(
                "leaf position {p} out of range for a {}-leaf tree",
                t.leaf_count()
            )));
        }
        mask |= 1 << p;
    }
    Ok(t.shape().induced(mask))
}

/// All unlabeled trees with `n` leaves, sorted by canonical code.
pub fn enumerate_trees(n: usize) -> Vec<Tree> {
    if n == 0 {
        return vec![Tree::empty()];
    }
    let mut by_size: Vec<Vec<Tree>> = vec![Vec::new(), vec![Tree::leaf()]];
    for size in 2..=n {
        let mut level = Vec::new();
        for a in 1..=size / 2 {
            let b = size - a;
            for (i, x) in by_size[a].iter().enumerate() {
                let start = if a == b { i } else { 0 };
                for y in &by_size[b][start..] {
                    level.push(Tree::pair(x, y));
                }
            }
        }
        level.sort_by(|x, y| x.code.cmp(&y.code));
        by_size.push(level);
    }
    by_size.swap_remove(n)
}

/// Caterpillar: every inner node has a leaf child.
pub fn caterpillar(n: usize) -> Result<Tree> {
    if n == 0 {
        return Err(Error::Invalid("caterpillar needs at least one leaf".into()));
    }
    let mut t = Tree::leaf();
    for _ in 1..n {
        t = Tree::pair(&Tree::leaf(), &t);
    }
    Ok(t)
}

/// Even tree: the two subtrees at every inner node differ in size by at most one.
pub fn even_tree(n: usize) -> Result<Tree> {
    if n == 0 {
        return Err(Error::Invalid("even tree needs at least one leaf".into()));
    }
    fn build(n: usize, memo: &mut BTreeMap<usize, Tree>) -> Tree {
        if n == 1 {
            return Tree::leaf();
        }
        if let Some(t) = memo.get(&n) {
            return t.clone();
        }
        let a = build(n / 2, memo);
        let b = build(n - n / 2, memo);
        let t = Tree::pair(&a, &b);
        memo.insert(n, t.clone());
        t
    }
    Ok(build(n, &mut BTreeMap::new()))
}

/// Two caterpillars with ⌊pn⌋ and ⌈(1−p)n⌉ leaves joined at the root.
pub fn double_caterpillar(n: usize, p: &BigRational) -> Result<Tree> {
    let zero = BigRational::from_integer(0.into());
    let one = BigRational::from_integer(1.into());
    if *p < zero || *p > one {
        return Err(Error::Invalid(format!("p = {p} outside [0,1]")));
    }
    let pn = p * BigRational::from_integer(n.into());
    let left = pn.floor().to_integer().to_usize().expect("fits");
    let right = n - left;
    if left == 0 || right == 0 {
        return Err(Error::Invalid(format!(
            "double caterpillar with n = {n}, p = {p} has an empty side"
        )));
    }
    Ok(Tree::pair(&caterpillar(left)?, &caterpillar(right)?))
}
