//! Document loading and whitespace tokenization.
//!
//! All offsets in this crate are Unicode codepoint indices, never byte
//! offsets, so that characters like `ä` and `ö` count as one position.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    id: String,
    text: String,
}

impl Document {
    /// Builds a document, normalizing `\r\n` and lone `\r` to `\n`.
    pub fn new(id: impl Into<String>, text: impl AsRef<str>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::validation("document id must not be empty"));
        }
        Ok(Document { id, text: normalize_line_endings(text.as_ref()) })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

fn normalize_line_endings(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_owned();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// A set of documents with unique ids, kept sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(mut docs: Vec<Document>) -> Result<Self> {
        docs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::validation(format!("duplicate document id {:?}", w[0].id)));
        }
        Ok(Corpus { docs })
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.id.as_str())
    }

    /// SHA-256 over the ids and texts in id order, hex encoded. Independent of
    /// how the corpus was stored on disk.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for doc in &self.docs {
            hasher.update((doc.id.len() as u64).to_le_bytes());
            hasher.update(doc.id.as_bytes());
            hasher.update((doc.text.len() as u64).to_le_bytes());
            hasher.update(doc.text.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    text: String,
}

/// Loads a corpus from a directory of `.txt` files (ids are the paths
/// relative to the directory, `/`-separated) or from a JSON-lines file of
/// `{"id": ..., "text": ...}` records.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        load_dir(path)
    } else {
        load_jsonl(path)
    }
}

fn load_dir(root: &Path) -> Result<Corpus> {
    let mut docs = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().unwrap_or(root).to_path_buf();
            Error::io(&p, e.into())
        })?;
        let p = entry.path();
        if !entry.file_type().is_file() || p.extension().is_none_or(|e| e != "txt") {
            continue;
        }
        let rel = p.strip_prefix(root).unwrap_or(p);
        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        let text = decode_utf8(&bytes, p)?;
        docs.push(Document::new(id, text)?);
    }
    Corpus::new(docs)
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = decode_utf8(&bytes, path)?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(line).map_err(|e| Error::validation(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::validation(format!("{}:{}: duplicate document id {:?}", path.display(), lineno + 1, rec.id)));
        }
        docs.push(Document::new(rec.id, rec.text)?);
    }
    Corpus::new(docs)
}

fn decode_utf8<'a>(bytes: &'a [u8], path: &Path) -> Result<&'a str> {
    std::str::from_utf8(bytes)
        .map_err(|e| Error::validation(format!("{}: invalid UTF-8 at byte offset {}", path.display(), e.valid_up_to())))
}

/// A maximal run of non-whitespace codepoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Codepoint offset of the first character.
    pub start: usize,
    /// Codepoint offset one past the last character.
    pub end: usize,
}

/// Splits on Unicode whitespace. No case folding, punctuation stays attached.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(Token { text: std::mem::take(&mut current), start, end: pos });
            }
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(ch);
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token { text: current, start, end: pos });
    }
    tokens
}

/// Tokens of every document, in corpus order.
pub fn corpus_tokens(corpus: &Corpus) -> Vec<String> {
    corpus.documents().iter().flat_map(|d| tokenize(d.text()).into_iter().map(|t| t.text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_spaces_with_codepoint_offsets() {
        let toks = tokenize("Suomen kansalle voitiin");
        let got: Vec<_> = toks.iter().map(|t| (t.text.as_str(), t.start, t.end)).collect();
        assert_eq!(got, vec![("Suomen", 0, 6), ("kansalle", 7, 15), ("voitiin", 16, 23)]);
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    #[test]
    fn nbsp_separates_tokens() {
        let toks = tokenize("a\u{00A0}b");
        assert_eq!(toks.len(), 2);
        assert_eq!((toks[1].text.as_str(), toks[1].start, toks[1].end), ("b", 2, 3));
    }

    // White_Space=yes codepoints from Unicode PropList.txt.
    const PROPLIST_WHITESPACE: &[(u32, u32)] = &[
        (0x0009, 0x000D),
        (0x0020, 0x0020),
        (0x0085, 0x0085),
        (0x00A0, 0x00A0),
        (0x1680, 0x1680),
        (0x2000, 0x200A),
        (0x2028, 0x2029),
        (0x202F, 0x202F),
        (0x205F, 0x205F),
        (0x3000, 0x3000),
    ];

    #[test]
    fn separator_set_matches_unicode_whitespace_table() {
        for cp in 0..=0x10FFFFu32 {
            let Some(ch) = char::from_u32(cp) else { continue };
            let in_table = PROPLIST_WHITESPACE.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp));
            let text = format!("x{ch}y");
            let splits = tokenize(&text).len() == 2;
            assert_eq!(splits, in_table, "U+{cp:04X}");
        }
    }

    #[test]
    fn finnish_letters_are_single_positions() {
        let toks = tokenize("kylän ööö");
        assert_eq!((toks[0].start, toks[0].end), (0, 5));
        assert_eq!((toks[1].start, toks[1].end), (6, 9));
    }

    #[test]
    fn line_endings_normalized() {
        let d = Document::new("x", "a\r\nb\rc").unwrap();
        assert_eq!(d.text(), "a\nb\nc");
    }

    #[test]
    fn empty_id_rejected() {
        assert!(matches!(Document::new("", "x"), Err(Error::Validation(_))));
    }

    #[test]
    fn loads_directory_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "xyz").unwrap();
        fs::write(dir.path().join("a.txt"), "abc").unwrap();
        fs::write(dir.path().join("ignored.md"), "nope").unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), vec!["a.txt", "b.txt"]);
        assert_eq!(c.documents()[1].text(), "xyz");
    }

    #[test]
    fn nested_directories_use_relative_ids() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/c.txt"), "c").unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), vec!["sub/c.txt"]);
    }

    #[test]
    fn empty_directory_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_corpus(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn jsonl_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(&p, "{\"id\":\"d1\",\"text\":\"a\"}\n{\"id\":\"d1\",\"text\":\"b\"}\n").unwrap();
        let err = load_corpus(&p).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("d1")), "{err}");
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, b"abc\xffdef").unwrap();
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("byte offset 3")), "{err}");
    }

    #[test]
    fn missing_path_is_io_error() {
        let err = load_corpus("/definitely/not/here").unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/definitely/not/here"));
    }

    #[test]
    fn content_hash_ignores_insertion_order() {
        let a = Corpus::new(vec![Document::new("a", "1").unwrap(), Document::new("b", "2").unwrap()]).unwrap();
        let b = Corpus::new(vec![Document::new("b", "2").unwrap(), Document::new("a", "1").unwrap()]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    proptest! {
        #[test]
        fn tokens_and_gaps_reconstruct_text(text in "[a-zä \t\n\u{00A0}\u{3000}.,]{0,40}") {
            let chars: Vec<char> = text.chars().collect();
            let toks = tokenize(&text);
            let mut rebuilt = String::new();
            let mut pos = 0;
            for t in &toks {
                prop_assert!(t.start < t.end);
                let gap: String = chars[pos..t.start].iter().collect();
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(&gap);
                let slice: String = chars[t.start..t.end].iter().collect();
                prop_assert_eq!(&slice, &t.text);
                prop_assert!(!t.text.chars().any(char::is_whitespace));
                rebuilt.push_str(&t.text);
                pos = t.end;
            }
            rebuilt.extend(&chars[pos..]);
            prop_assert_eq!(rebuilt, text);
        }
    }
}
