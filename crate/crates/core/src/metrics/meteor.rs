use std::collections::HashMap;

use super::metric_tokens;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Search nodes allowed for the exact chunk-minimizing alignment before
/// falling back to greedy tiling.
const SEARCH_BUDGET: usize = 200_000;

/// Suffix-stripping stemmer. Words shorter than four characters and
/// non-alphabetic tokens are returned unchanged.
pub fn stem(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() < 4 || !chars.iter().all(|c| c.is_alphabetic()) {
        return word.to_string();
    }
    const RULES: [(&str, &str); 8] =
        [("sses", "ss"), ("ies", "y"), ("ingly", ""), ("edly", ""), ("ing", ""), ("ed", ""), ("ly", ""), ("s", "")];
    let mut out = word.to_string();
    for (suffix, replacement) in RULES {
        if let Some(base) = word.strip_suffix(suffix) {
            if suffix == "s" && (base.ends_with('s') || base.ends_with('u') || base.ends_with('i')) {
                continue;
            }
            if base.chars().count() < 3 {
                continue;
            }
            out = format!("{base}{replacement}");
            if matches!(suffix, "ing" | "ed" | "ingly" | "edly") {
                let cs: Vec<char> = out.chars().collect();
                let n = cs.len();
                if n >= 4
                    && cs[n - 1] == cs[n - 2]
                    && !matches!(cs[n - 1], 'l' | 's' | 'z' | 'a' | 'e' | 'i' | 'o' | 'u')
                {
                    out.pop();
                }
            }
            break;
        }
    }
    if out.chars().count() > 3 && out.ends_with('e') {
        out.pop();
    }
    out
}

/// Lowercased tokens with their stems.
pub fn meteor_tokens(text: &str) -> (Vec<String>, Vec<String>) {
    let tokens = metric_tokens(text);
    let stems = tokens.iter().map(|t| stem(t)).collect();
    (tokens, stems)
}

/// A unigram alignment: `(hyp_index, ref_index)` pairs sorted by hypothesis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
    pub exact: usize,
    pub chunks: usize,
    /// False when the search budget ran out and greedy tiling was used.
    pub optimal: bool,
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(h, r) in pairs {
        match prev {
            Some((ph, pr)) if ph + 1 == h && pr + 1 == r => {}
            _ => chunks += 1,
        }
        prev = Some((h, r));
    }
    chunks
}

/// Match targets: maximal exact matches, then maximal stem matches among the leftovers.
fn targets(h: &[String], hs: &[String], r: &[String], rs: &[String]) -> (usize, usize) {
    let mut surf: HashMap<&str, (usize, usize)> = HashMap::new();
    for t in h {
        surf.entry(t).or_default().0 += 1;
    }
    for t in r {
        surf.entry(t).or_default().1 += 1;
    }
    let exact: usize = surf.values().map(|&(a, b)| a.min(b)).sum();
    // Leftovers of a surface all sit on one side; pool them by stem.
    let stem_of: HashMap<&str, &str> =
        h.iter().zip(hs).chain(r.iter().zip(rs)).map(|(t, s)| (t.as_str(), s.as_str())).collect();
    let mut left_h: HashMap<&str, usize> = HashMap::new();
    let mut left_r: HashMap<&str, usize> = HashMap::new();
    for (t, &(a, b)) in &surf {
        if a > b {
            *left_h.entry(stem_of[t]).or_default() += a - b;
        } else if b > a {
            *left_r.entry(stem_of[t]).or_default() += b - a;
        }
    }
    let stem_matches = left_h.iter().map(|(s, &a)| a.min(left_r.get(s).copied().unwrap_or(0))).sum();
    (exact, stem_matches)
}

struct Search<'a> {
    h: &'a [String],
    hs: &'a [String],
    r: &'a [String],
    rs: &'a [String],
    need_exact: usize,
    need_stem: usize,
    used: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    best: Option<(usize, Vec<(usize, usize)>)>,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, exact: usize, stemmed: usize, chunks: usize) -> bool {
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            return false;
        }
        if let Some((best, _)) = &self.best {
            if chunks >= *best {
                return true;
            }
        }
        let missing = (self.need_exact - exact) + (self.need_stem - stemmed);
        if missing == 0 {
            self.best = Some((chunks, self.pairs.clone()));
            return true;
        }
        if self.h.len() - i < missing {
            return true;
        }
        let last = self.pairs.last().copied();
        // Continuing the current chunk first finds good bounds early.
        let mut order: Vec<usize> = Vec::with_capacity(self.r.len());
        if let Some((lh, lr)) = last {
            if lh + 1 == i && lr + 1 < self.r.len() {
                order.push(lr + 1);
            }
        }
        let first = order.first().copied();
        order.extend((0..self.r.len()).filter(|j| Some(*j) != first));
        for j in order {
            if self.used[j] {
                continue;
            }
            let is_exact = self.h[i] == self.r[j];
            let ok =
                if is_exact { exact < self.need_exact } else { self.hs[i] == self.rs[j] && stemmed < self.need_stem };
            if !ok {
                continue;
            }
            let extends = matches!(last, Some((lh, lr)) if lh + 1 == i && lr + 1 == j);
            self.used[j] = true;
            self.pairs.push((i, j));
            let (e, s) = if is_exact { (exact + 1, stemmed) } else { (exact, stemmed + 1) };
            let done = self.run(i + 1, e, s, chunks + usize::from(!extends));
            self.pairs.pop();
            self.used[j] = false;
            if !done {
                return false;
            }
        }
        self.run(i + 1, exact, stemmed, chunks)
    }
}

/// Greedy tiling: repeatedly take the longest run of unmatched positions
/// matching in both strings, exact stage first, then stems.
fn greedy(h: &[String], hs: &[String], r: &[String], rs: &[String]) -> Vec<(usize, usize)> {
    let mut hu = vec![false; h.len()];
    let mut ru = vec![false; r.len()];
    let mut pairs = Vec::new();
    for stage in 0..2 {
        let eq = |i: usize, j: usize| if stage == 0 { h[i] == r[j] } else { h[i] != r[j] && hs[i] == rs[j] };
        loop {
            let mut best: Option<(usize, usize, usize)> = None;
            for i in 0..h.len() {
                for j in 0..r.len() {
                    let mut len = 0;
                    while i + len < h.len() && j + len < r.len() && !hu[i + len] && !ru[j + len] && eq(i + len, j + len)
                    {
                        len += 1;
                    }
                    if len > 0 && best.is_none_or(|(_, _, b)| len > b) {
                        best = Some((i, j, len));
                    }
                }
            }
            let Some((i, j, len)) = best else { break };
            for k in 0..len {
                hu[i + k] = true;
                ru[j + k] = true;
                pairs.push((i + k, j + k));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Maximum-match alignment with the fewest chunks.
pub fn align(h: &[String], hs: &[String], r: &[String], rs: &[String]) -> Alignment {
    let (need_exact, need_stem) = targets(h, hs, r, rs);
    let mut search = Search {
        h,
        hs,
        r,
        rs,
        need_exact,
        need_stem,
        used: vec![false; r.len()],
        pairs: Vec::new(),
        best: None,
        nodes: 0,
    };
    let finished = search.run(0, 0, 0, 0);
    let (pairs, optimal) = match (finished, search.best) {
        (true, Some((_, pairs))) => (pairs, true),
        _ => (greedy(h, hs, r, rs), false),
    };
    let exact = pairs.iter().filter(|&&(i, j)| h[i] == r[j]).count();
    let chunks = count_chunks(&pairs);
    Alignment { pairs, exact, chunks, optimal }
}

/// METEOR without the synonym stage, on a 0–100 scale.
///
/// A hypothesis aligned to the reference as a single chunk covering both
/// strings gets no fragmentation penalty, so identical strings score 100.
pub fn meteor_reduced(hypothesis: &str, reference: &str) -> f64 {
    let (h, hs) = meteor_tokens(hypothesis);
    let (r, rs) = meteor_tokens(reference);
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let a = align(&h, &hs, &r, &rs);
    let m = a.pairs.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / h.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f_mean = p * rc / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * rc);
    let penalty = if a.chunks == 1 && m == h.len() && m == r.len() {
        0.0
    } else {
        METEOR_GAMMA * (a.chunks as f64 / m as f64).powf(METEOR_BETA)
    };
    (100.0 * f_mean * (1.0 - penalty)).clamp(0.0, 100.0)
}
