use std::path::Path;

use asyncdec::am::synthesize_loglikes;
use asyncdec::fst::write_text_fst;
use asyncdec::synth::{corpus_setup, tiny_setup, Setup};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{write_file, Result};

/// Two one-phone words with self-loops, looping back through epsilon.
const HAND_HCLG: &str = "\
0\t1\t1\t1\t0.693147
0\t2\t2\t2\t0.693147
1\t1\t1\t0\t0.693147
1\t0\t0\t0\t0.693147
2\t2\t2\t0\t0.693147
2\t0\t0\t0\t0.693147
1\t0.693147
2\t0.693147
";

const HAND_WORDS: &str = "<eps>\t0\nyes\t1\nno\t2\n";

pub const SIGMAS: [f64; 3] = [0.0, 1.5, 3.0];

/// Utterances per synthesized corpus.
pub const CORPUS_SIZE: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    /// Relative to the suite directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<FixtureFile>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, contents: &str) -> Result<()> {
        write_file(&self.root.join(rel), contents)?;
        let digest = Sha256::digest(contents.as_bytes());
        self.files.push(FixtureFile {
            path: rel.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    fn setup(&mut self, dir: &str, setup: &Setup) -> Result<()> {
        self.put(&format!("{dir}/lexicon.txt"), &setup.lexicon.to_text())?;
        self.put(&format!("{dir}/small.arpa"), &setup.small_arpa)?;
        self.put(&format!("{dir}/large.arpa"), &setup.large_arpa)?;
        self.put(&format!("{dir}/hclg.fst"), &write_text_fst(&setup.hclg, false))?;
        self.put(&format!("{dir}/words.txt"), &setup.small.symbols().write_text())
    }
}

/// Corpus directory name for a noise level, e.g. `sigma-1.5`.
pub fn sigma_dir(sigma: f64) -> String {
    format!("sigma-{sigma}")
}

/// Writes the canonical fixtures under `outdir` and a `checksums.sha256`
/// listing. Output is a pure function of `seed`.
pub fn make_fixture_suite(outdir: &Path, seed: u64) -> Result<Vec<FixtureFile>> {
    let mut w = Writer {
        root: outdir,
        files: Vec::new(),
    };
    w.put("hand/hclg.fst", HAND_HCLG)?;
    w.put("hand/words.txt", HAND_WORDS)?;
    for (name, small, large) in [("uni-bi", 1, 2), ("bi-tri", 2, 3), ("uni-tri", 1, 3)] {
        w.setup(name, &tiny_setup(seed, small, large)?)?;
    }
    let desk = corpus_setup(seed)?;
    w.setup("desk", &desk)?;
    for sigma in SIGMAS {
        let dir = format!("desk/{}", sigma_dir(sigma));
        for i in 0..CORPUS_SIZE as u64 {
            let (ll, words) = synthesize_loglikes(&desk.hclg, seed.wrapping_mul(1000) + i, sigma, None)?;
            w.put(&format!("{dir}/utt{i:04}.csv"), &ll.to_csv())?;
            w.put(&format!("{dir}/utt{i:04}.txt"), &(desk.spell(&words).join(" ") + "\n"))?;
        }
    }
    let listing: String = w.files.iter().map(|f| format!("{}  {}\n", f.sha256, f.path)).collect();
    write_file(&outdir.join("checksums.sha256"), &listing)?;
    Ok(w.files)
}
