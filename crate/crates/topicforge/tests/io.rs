use std::io::Cursor;
use std::path::Path;

use topicforge::io::{
    load_corpus, read_delimited, read_ndjson, write_ndjson, ColumnMap, CorpusFormat, IoError,
};
use topicforge_core::synthetic::{generate_synthetic, SyntheticSpec};
use topicforge_core::{CorpusError, Label, NormalizationConfig};

fn norm() -> NormalizationConfig {
    NormalizationConfig::default()
}

#[test]
fn ndjson_round_trip_keeps_raw_text() {
    let corpus = generate_synthetic(&SyntheticSpec::uniform(2, 20), 4).unwrap();
    let mut buf = Vec::new();
    write_ndjson(&mut buf, corpus.claims()).unwrap();
    let back = read_ndjson(Cursor::new(&buf), &norm()).unwrap();
    assert_eq!(back, corpus.claims());
}

#[test]
fn ndjson_normalizes_and_skips_blank_lines() {
    let text = "{\"id\":\"a\",\"topic\":\"t\",\"text\":\"see https://x.org now!\",\"label\":1,\"extra\":true}\n\n\
                {\"id\":\"b\",\"topic\":\"t\",\"text\":\"plain\",\"label\":0}\n";
    let claims = read_ndjson(Cursor::new(text), &norm()).unwrap();
    assert_eq!(claims.len(), 2);
    assert_eq!(claims[0].text, "see [رابط] now");
    assert_eq!(claims[0].raw_text, "see https://x.org now!");
    assert_eq!(claims[0].label, Label::CheckWorthy);
}

#[test]
fn ndjson_errors_name_the_line() {
    let text = "{\"id\":\"a\",\"topic\":\"t\",\"text\":\"x\",\"label\":0}\n{\"id\":\"b\",\"topic\":\"t\",\"text\":\"y\",\"label\":2}\n";
    match read_ndjson(Cursor::new(text), &norm()) {
        Err(IoError::Corpus(CorpusError::MalformedRecord { line, .. })) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    let missing = "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n";
    assert!(matches!(
        read_ndjson(Cursor::new(missing), &norm()),
        Err(IoError::Corpus(CorpusError::MalformedRecord {
            line: 1,
            ..
        }))
    ));
}

#[test]
fn delimited_with_custom_columns() {
    let tsv = "tweet_id\tclaim\tcw\tdomain\n1\tfirst claim\t1\tT1\n2\t\"quoted, text\"\t0\tT2\n";
    let cols = ColumnMap {
        id: "tweet_id".into(),
        topic: "domain".into(),
        text: "claim".into(),
        label: "cw".into(),
    };
    let claims = read_delimited(Cursor::new(tsv), b'\t', &cols, &norm()).unwrap();
    assert_eq!(claims.len(), 2);
    assert_eq!(claims[1].topic_id, "T2");
    assert_eq!(claims[1].raw_text, "quoted, text");
    assert_eq!(claims[1].text, "quoted text");

    let missing = read_delimited(Cursor::new(tsv), b'\t', &ColumnMap::default(), &norm());
    assert!(matches!(missing, Err(IoError::MissingColumn(c)) if c == "id"));

    let bad = "id,topic,text,label\n1,T,x,yes\n";
    let err = read_delimited(Cursor::new(bad), b',', &ColumnMap::default(), &norm()).unwrap_err();
    assert!(matches!(err, IoError::Corpus(CorpusError::UnknownLabel(l)) if l == "yes"));
}

#[test]
fn load_corpus_detects_format_and_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("c.csv");
    std::fs::write(&csv_path, "id,topic,text,label\n1,A,x,1\n2,B,y,0\n").unwrap();
    let corpus = load_corpus(&csv_path, None, &ColumnMap::default(), &norm()).unwrap();
    assert_eq!(corpus.num_topics(), 2);

    let dup = dir.path().join("d.jsonl");
    std::fs::write(
        &dup,
        "{\"id\":\"a\",\"topic\":\"t\",\"text\":\"x\",\"label\":0}\n{\"id\":\"a\",\"topic\":\"u\",\"text\":\"y\",\"label\":1}\n",
    )
    .unwrap();
    let err = load_corpus(&dup, None, &ColumnMap::default(), &norm()).unwrap_err();
    assert!(matches!(err, IoError::Corpus(CorpusError::DuplicateId(id)) if id == "a"));

    let absent = load_corpus(
        &dir.path().join("nope.jsonl"),
        None,
        &ColumnMap::default(),
        &norm(),
    );
    assert!(matches!(absent, Err(IoError::File { .. })));
}

#[test]
fn format_from_extension() {
    assert_eq!(
        CorpusFormat::from_path(Path::new("a.TSV")),
        CorpusFormat::Tsv
    );
    assert_eq!(
        CorpusFormat::from_path(Path::new("a.csv")),
        CorpusFormat::Csv
    );
    assert_eq!(
        CorpusFormat::from_path(Path::new("a.jsonl")),
        CorpusFormat::Ndjson
    );
    assert_eq!(
        CorpusFormat::from_path(Path::new("a")),
        CorpusFormat::Ndjson
    );
}
