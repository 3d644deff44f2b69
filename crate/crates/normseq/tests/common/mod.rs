#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use normseq_core::corpus::{Clause, Dialog, NonverbalMeta, Relationship};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Runs the command in-process, returning exit status and captured stdout.
pub fn run(args: &[&str]) -> (u8, String) {
    let mut out = Vec::new();
    let mut full = vec!["normseq"];
    full.extend_from_slice(args);
    let code = normseq::cli::run(full, &mut out);
    let code = if code == std::process::ExitCode::SUCCESS {
        0
    } else if code == std::process::ExitCode::from(1) {
        1
    } else {
        2
    };
    (code, String::from_utf8(out).unwrap())
}

/// Runs the compiled binary.
pub fn binary(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normseq"))
        .args(args)
        .env("NORMSEQ_LOG", "error")
        .output()
        .unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn clause(words: &[&str], label: bool, relationship: Relationship) -> Clause {
    Clause::new(
        words.iter().map(|w| w.to_string()).collect(),
        None,
        NonverbalMeta {
            relationship,
            head_nod: false,
            smile: label,
            gaze_partner: !label,
        },
        label,
        None,
    )
    .unwrap()
}

/// Sessions where a clause is a violation iff it contains "idiot".
pub fn separable_corpus(sessions: usize, len: usize) -> Vec<Dialog> {
    let calm = [
        ["you", "did", "fine"],
        ["thanks", "for", "that"],
        ["now", "try", "this"],
    ];
    (0..sessions)
        .map(|s| Dialog {
            session_id: format!("toy{s:02}"),
            clauses: (0..len)
                .map(|t| {
                    let k = (s * 7 + t * 3) % 5;
                    if k == 0 {
                        clause(&["you", "idiot"], true, Relationship::Friend)
                    } else {
                        clause(&calm[k % 3], false, Relationship::Stranger)
                    }
                })
                .collect(),
        })
        .collect()
}
