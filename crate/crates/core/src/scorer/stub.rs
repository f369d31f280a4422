use super::{Scorer, ScorerError};
use crate::qa_prep::Window;
use crate::span_select::LogitSheet;

/// Boost added at gold start/end positions in teacher mode.
const TEACHER_BOOST: f64 = 10.0;

/// Deterministic hash-derived logits in `[-1, 1)`.
///
/// Each logit depends only on the seed, the token id, its position and
/// whether it is a start or end logit. With `teacher` set, a window's
/// aligned gold span gets +10 on its start and end logits, so span
/// selection is expected to recover it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubScorer {
    pub seed: u64,
    pub teacher: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

impl StubScorer {
    pub fn new(seed: u64) -> Self {
        Self { seed, teacher: false }
    }

    pub fn teacher(seed: u64) -> Self {
        Self { seed, teacher: true }
    }

    fn logit(&self, token_id: u32, position: usize, role: u64) -> f64 {
        let key = self.seed ^ splitmix64(token_id as u64) ^ splitmix64((position as u64) << 1 | role).rotate_left(17);
        unit(splitmix64(key))
    }
}

impl Scorer for StubScorer {
    fn window_logits(&self, window: &Window) -> Result<LogitSheet, ScorerError> {
        let mut start_logits: Vec<f64> =
            window.token_ids.iter().enumerate().map(|(i, &id)| self.logit(id, i, 0)).collect();
        let mut end_logits: Vec<f64> =
            window.token_ids.iter().enumerate().map(|(i, &id)| self.logit(id, i, 1)).collect();
        if self.teacher && !window.is_no_answer {
            if let Some((s, e)) = window.answer_span {
                start_logits[s] += TEACHER_BOOST;
                end_logits[e] += TEACHER_BOOST;
            }
        }
        Ok(LogitSheet {
            post_id: window.post_id.clone(),
            task: window.task,
            window_index: window.window_index,
            start_logits,
            end_logits,
        })
    }

    fn class_logits(&self, _post_id: &str, input: &str) -> Result<Vec<f64>, ScorerError> {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for b in input.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok((0..3u64).map(|k| unit(splitmix64(self.seed ^ h ^ splitmix64(k)))).collect())
    }
}
