//! Character-offset helpers.
//!
//! Offsets everywhere in the crate count Unicode scalar values. Rust strings
//! are indexed by byte, so slicing goes through [`CharIndex`].

/// Byte positions of every char boundary of a string, for O(1) char-offset slicing.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    bounds: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bounds.push(text.len());
        Self { text, bounds }
    }

    /// Length in chars.
    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slice by char offsets, `None` when out of range or inverted.
    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len() {
            return None;
        }
        Some(&self.text[self.bounds[start]..self.bounds[end]])
    }

    /// Char offset of a byte offset that sits on a char boundary.
    pub fn char_of_byte(&self, byte: usize) -> Option<usize> {
        self.bounds.binary_search(&byte).ok()
    }
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    CharIndex::new(text).slice(start, end)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_by_scalar_value() {
        let s = "naïve café";
        assert_eq!(char_slice(s, 0, 5), Some("naïve"));
        assert_eq!(char_slice(s, 6, 10), Some("café"));
        assert_eq!(char_slice(s, 6, 11), None);
        assert_eq!(char_len(s), 10);
    }

    #[test]
    fn char_of_byte_rejects_mid_char() {
        let idx = CharIndex::new("aé b");
        assert_eq!(idx.char_of_byte(1), Some(1));
        assert_eq!(idx.char_of_byte(2), None);
        assert_eq!(idx.char_of_byte(3), Some(2));
    }
}
