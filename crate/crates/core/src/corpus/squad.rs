//! Loader for the public SQuAD v1.1 JSON layout.
//!
//! The document tree is walked by hand rather than with derived serde
//! types so that malformed input produces an error naming the offending
//! location (`data[3].paragraphs[1].qas[0].question`). Answer spans are
//! ignored: retrieval here is paragraph-level, so a question only needs
//! the id of the paragraph that contains it.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::Value;

use crate::corpus::{Corpus, LanguageTag, Paragraph, QueryRecord};
use crate::error::{Error, Result};

/// Load a SQuAD v1.1-layout document into a [`Corpus`].
///
/// Paragraph ids are synthesized as `a{articleIndex}:p{paragraphIndex}`
/// since the source format carries none. The language tag defaults to
/// English; override with [`Corpus::with_language_tag`].
pub fn load_squad_format(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let root: Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;

    let data = field(&root, "data", "$")?;
    let articles = as_array(data, "data")?;

    let mut paragraphs = Vec::new();
    let mut queries = Vec::new();
    for (ai, article) in articles.iter().enumerate() {
        let at = format!("data[{ai}]");
        let article_title = match article.get("title") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            _ => format!("a{ai}"),
        };
        let paras = as_array(
            field(article, "paragraphs", &at)?,
            &format!("{at}.paragraphs"),
        )?;
        for (pi, para) in paras.iter().enumerate() {
            let at = format!("{at}.paragraphs[{pi}]");
            let context = as_str(field(para, "context", &at)?, &format!("{at}.context"))?;
            if context.is_empty() {
                return Err(Error::parse(
                    format!("{at}.context"),
                    "empty paragraph text",
                ));
            }
            let paragraph_id = format!("a{ai}:p{pi}");
            paragraphs.push(Paragraph {
                id: paragraph_id.clone(),
                article_id: article_title.clone(),
                text: context.to_string(),
            });
            let qas = as_array(field(para, "qas", &at)?, &format!("{at}.qas"))?;
            for (qi, qa) in qas.iter().enumerate() {
                let at = format!("{at}.qas[{qi}]");
                let question = as_str(field(qa, "question", &at)?, &format!("{at}.question"))?;
                if question.is_empty() {
                    return Err(Error::parse(
                        format!("{at}.question"),
                        "empty question text",
                    ));
                }
                let id = as_str(field(qa, "id", &at)?, &format!("{at}.id"))?;
                queries.push(QueryRecord {
                    id: id.to_string(),
                    text: question.to_string(),
                    gold_paragraph_id: paragraph_id.clone(),
                });
            }
        }
    }
    Corpus::new(paragraphs, queries, LanguageTag::English)
}

fn field<'a>(value: &'a Value, name: &str, at: &str) -> Result<&'a Value> {
    value
        .get(name)
        .ok_or_else(|| Error::parse(format!("{at}.{name}"), "missing field"))
}

fn as_array<'a>(value: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    value
        .as_array()
        .ok_or_else(|| Error::parse(at, "expected an array"))
}

fn as_str<'a>(value: &'a Value, at: &str) -> Result<&'a str> {
    value
        .as_str()
        .ok_or_else(|| Error::parse(at, "expected a string"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_json(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_counts_from_nested_structure() {
        // One article, two paragraphs, three questions.
        let f = write_json(
            r#"{"data":[{"title":"T","paragraphs":[
                {"context":"first paragraph","qas":[
                    {"question":"q one?","id":"id1"},
                    {"question":"q two?","id":"id2"}]},
                {"context":"second paragraph","qas":[
                    {"question":"q three?","id":"id3"}]}
            ]}]}"#,
        );
        let corpus = load_squad_format(f.path()).unwrap();
        assert_eq!(corpus.n_paragraphs(), 2);
        assert_eq!(corpus.n_queries(), 3);
        assert_eq!(corpus.queries()[2].gold_paragraph_id, "a0:p1");
    }

    #[test]
    fn empty_data_gives_empty_corpus() {
        let f = write_json(r#"{"data":[]}"#);
        let corpus = load_squad_format(f.path()).unwrap();
        assert_eq!(corpus.n_paragraphs(), 0);
        assert_eq!(corpus.n_queries(), 0);
    }

    #[test]
    fn malformed_document_names_offending_path() {
        let f = write_json(r#"{"data":[{"title":"T","paragraphs":[{"context":"x"}]}]}"#);
        let err = load_squad_format(f.path()).unwrap_err();
        match err {
            Error::Parse { at, .. } => assert_eq!(at, "data[0].paragraphs[0].qas"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_question_id_is_rejected() {
        let f = write_json(
            r#"{"data":[{"title":"T","paragraphs":[{"context":"x","qas":[
                {"question":"a?","id":"dup"},{"question":"b?","id":"dup"}]}]}]}"#,
        );
        let err = load_squad_format(f.path()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { id } if id == "dup"));
    }
}
