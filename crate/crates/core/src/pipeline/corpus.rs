//! Synthetic labeled corpus: parameterized C templates for five memory-safety
//! bug families, each emitted as a vulnerable file and its patched twin.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;

pub const MARKER: &str = "// @vuln";
pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MemoryLeak,
    DoubleFree,
    BufferOverflow,
    UseAfterFree,
    OutOfBounds,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::MemoryLeak,
        Family::DoubleFree,
        Family::BufferOverflow,
        Family::UseAfterFree,
        Family::OutOfBounds,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Family::MemoryLeak => "ml",
            Family::DoubleFree => "df",
            Family::BufferOverflow => "bo",
            Family::UseAfterFree => "uaf",
            Family::OutOfBounds => "oob",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    /// Shared by a vulnerable file and its patched twin.
    pub pair: usize,
    pub family: Family,
    pub variant: usize,
    pub vulnerable: bool,
    pub marked_lines: Vec<u32>,
}

/// Source text under construction; tracks marked lines.
#[derive(Default)]
struct Src {
    lines: Vec<String>,
    marked: Vec<u32>,
}

impl Src {
    fn line(&mut self, depth: usize, text: impl AsRef<str>) {
        self.lines
            .push(format!("{}{}", "    ".repeat(depth), text.as_ref()));
    }

    fn vuln(&mut self, depth: usize, text: impl AsRef<str>) {
        self.line(depth, format!("{} {MARKER}", text.as_ref()));
        self.marked.push(self.lines.len() as u32);
    }

    fn finish(self) -> (String, Vec<u32>) {
        let mut text = self.lines.join("\n");
        text.push('\n');
        (text, self.marked)
    }
}

const VERBS: &[&str] = &[
    "handle", "process", "parse", "load", "update", "build", "read", "store", "emit", "scan",
];
const NOUNS: &[&str] = &[
    "request", "packet", "record", "frame", "entry", "message", "header", "token", "block",
    "config",
];
const PTRS: &[&str] = &[
    "buf", "data", "ptr", "mem", "node", "item", "payload", "chunk", "str", "obj",
];
const SIZES: &[&str] = &["n", "len", "size", "count", "cap"];
const INTS: &[&str] = &["tmp", "acc", "flag", "total", "res", "step"];
const USES: &[&str] = &["use_data", "consume", "send_bytes", "print_buf"];

/// Randomized names for one sample.
struct Names {
    func: String,
    helper: String,
    maker: String,
    ptr: String,
    size: String,
    int: String,
    other: String,
    use_fn: &'static str,
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, pool: &[&'a str]) -> &'a str {
        pool.choose(&mut self.rng).unwrap()
    }

    fn names(&mut self) -> Names {
        let verb = self.pick(VERBS);
        let noun = self.pick(NOUNS);
        let ptr = self.pick(PTRS);
        let other = loop {
            let o = self.pick(PTRS);
            if o != ptr {
                break o;
            }
        };
        Names {
            func: format!("{verb}_{noun}"),
            helper: format!(
                "{}_{noun}",
                self.pick(&["release", "drop", "dispose", "put"])
            ),
            maker: format!("{}_{noun}", self.pick(&["make", "alloc", "new", "create"])),
            ptr: ptr.into(),
            size: self.pick(SIZES).into(),
            int: self.pick(INTS).into(),
            other: other.into(),
            use_fn: self.pick(USES),
        }
    }

    fn constant(&mut self) -> u32 {
        *[4u32, 8, 16, 32, 64].choose(&mut self.rng).unwrap()
    }

    /// Zero to two statements unrelated to the bug, over `nm.int` and `nm.size`.
    fn filler(&mut self, src: &mut Src, depth: usize, nm: &Names, declared: &mut bool) {
        for _ in 0..self.rng.gen_range(0..=2) {
            let k = self.rng.gen_range(1..10);
            let (t, n) = (&nm.int, &nm.size);
            if !*declared {
                src.line(depth, format!("int {t} = {n} + {k};"));
                *declared = true;
                continue;
            }
            match self.rng.gen_range(0..4) {
                0 => src.line(depth, format!("{t} = {t} * {k};")),
                1 => src.line(depth, format!("log_value({t});")),
                2 => {
                    src.line(depth, format!("if ({t} > {k}) {{"));
                    src.line(depth + 1, format!("{t} = {t} - {k};"));
                    src.line(depth, "}");
                }
                _ => src.line(depth, format!("{t} = {t} + {n};")),
            }
        }
    }

    fn use_stmt(&mut self, nm: &Names) -> String {
        let (p, n) = (&nm.ptr, &nm.size);
        match self.rng.gen_range(0..4) {
            0 => format!("{p}[0] = 0;"),
            1 => format!("{}({p});", nm.use_fn),
            2 => format!("{n} = strlen({p});"),
            _ => format!("memset({p}, 0, {n});"),
        }
    }

    fn pair(&mut self, family: Family, variant: usize) -> [(String, Vec<u32>); 2] {
        let nm = self.names();
        [true, false].map(|vulnerable| {
            // both twins draw the same filler and shape choices
            let saved = self.rng.clone();
            let out = self.render(family, variant, &nm, vulnerable);
            if vulnerable {
                self.rng = saved;
            }
            out
        })
    }

    fn render(
        &mut self,
        family: Family,
        variant: usize,
        nm: &Names,
        vulnerable: bool,
    ) -> (String, Vec<u32>) {
        let mut s = Src::default();
        let mut decl = false;
        let (f, h, p, n, o) = (&nm.func, &nm.helper, &nm.ptr, &nm.size, &nm.other);
        let k = self.constant();
        match (family, variant) {
            (Family::UseAfterFree, 0) => {
                let guarded = self.rng.gen_bool(0.5);
                let use_line = self.use_stmt(nm);
                s.line(0, format!("void {f}(int {n})"));
                s.line(0, "{");
                s.line(1, format!("char *{p} = malloc({n});"));
                self.filler(&mut s, 1, nm, &mut decl);
                let free_at = |s: &mut Src, vuln: bool| {
                    let d = if guarded {
                        s.line(1, format!("if ({n} > {k}) {{"));
                        2
                    } else {
                        1
                    };
                    if vuln {
                        s.vuln(d, format!("free({p});"));
                    } else {
                        s.line(d, format!("free({p});"));
                    }
                    if guarded {
                        s.line(1, "}");
                    }
                };
                if vulnerable {
                    free_at(&mut s, true);
                    self.filler(&mut s, 1, nm, &mut decl);
                    s.line(1, &use_line);
                } else {
                    self.filler(&mut s, 1, nm, &mut decl);
                    s.line(1, &use_line);
                    free_at(&mut s, false);
                }
                s.line(0, "}");
            }
            (Family::UseAfterFree, _) => {
                let use_line = self.use_stmt(nm);
                s.line(0, format!("void {h}(char *{o})"));
                s.line(0, "{");
                s.line(1, format!("free({o});"));
                s.line(0, "}");
                s.line(0, format!("void {f}(int {n})"));
                s.line(0, "{");
                s.line(1, format!("char *{p} = malloc({n});"));
                self.filler(&mut s, 1, nm, &mut decl);
                if vulnerable {
                    s.vuln(1, format!("{h}({p});"));
                    self.filler(&mut s, 1, nm, &mut decl);
                    s.line(1, &use_line);
                } else {
                    s.line(1, &use_line);
                    self.filler(&mut s, 1, nm, &mut decl);
                    s.line(1, format!("{h}({p});"));
                }
                s.line(0, "}");
            }
            (Family::DoubleFree, 0) => {
                let early_return = self.rng.gen_bool(0.5);
                s.line(0, format!("void {f}(int {n})"));
                s.line(0, "{");
                s.line(1, format!("int *{p} = malloc({n} * 4);"));
                self.filler(&mut s, 1, nm, &mut decl);
                s.line(1, format!("if ({n} > {k}) {{"));
                s.line(2, format!("free({p});"));
                if !vulnerable {
                    s.line(
                        2,
                        if early_return {
                            "return;".to_string()
                        } else {
                            format!("{p} = NULL;")
                        },
                    );
                }
                s.line(1, "}");
                self.filler(&mut s, 1, nm, &mut decl);
                if vulnerable {
                    s.vuln(1, format!("free({p});"));
                } else {
                    s.line(1, format!("free({p});"));
                }
                s.line(0, "}");
            }
            (Family::DoubleFree, _) => {
                s.line(0, format!("void {h}(char *{o})"));
                s.line(0, "{");
                s.line(1, format!("free({o});"));
                s.line(0, "}");
                s.line(0, format!("void {f}(int {n})"));
                s.line(0, "{");
                s.line(1, format!("char *{p} = malloc({n});"));
                s.line(1, format!("{}({p});", nm.use_fn));
                s.line(1, format!("{h}({p});"));
                self.filler(&mut s, 1, nm, &mut decl);
                if vulnerable {
                    s.vuln(1, format!("free({p});"));
                } else {
                    s.line(1, format!("{p} = NULL;"));
                }
                s.line(0, "}");
            }
            (Family::MemoryLeak, 0) => {
                s.line(0, format!("void {f}(int {n})"));
                s.line(0, "{");
                let alloc = format!("char *{p} = malloc({n});");
                if vulnerable {
                    s.vuln(1, alloc);
                } else {
                    s.line(1, alloc);
                }
                self.filler(&mut s, 1, nm, &mut decl);
                s.line(1, format!("{p}[0] = 1;"));
                s.line(1, format!("{}({p});", nm.use_fn));
                if !vulnerable {
                    s.line(1, format!("free({p});"));
                }
                s.line(0, "}");
            }
            (Family::MemoryLeak, 1) => {
                s.line(0, format!("int {f}(int {n})"));
                s.line(0, "{");
                let alloc = format!("char *{p} = malloc({n});");
                if vulnerable {
                    s.vuln(1, alloc);
                } else {
                    s.line(1, alloc);
                }
                self.filler(&mut s, 1, nm, &mut decl);
                s.line(1, format!("if ({n} > {k}) {{"));
                if !vulnerable {
                    s.line(2, format!("free({p});"));
                }
                s.line(2, "return -1;");
                s.line(1, "}");
                s.line(1, format!("{p}[0] = 1;"));
                s.line(1, format!("free({p});"));
                s.line(1, "return 0;");
                s.line(0, "}");
            }
            (Family::MemoryLeak, _) => {
                // allocation handed back through an out-parameter
                s.line(0, format!("void {f}(void)"));
                s.line(0, "{");
                s.line(1, format!("char *{p};"));
                s.line(1, format!("{}({k}, &{p});", nm.maker));
                s.line(1, format!("strcpy({p}, \"sample\");"));
                if !vulnerable {
                    s.line(1, format!("free({p});"));
                }
                s.line(0, "}");
                s.line(0, format!("void {}(int {n}, char **out)", nm.maker));
                s.line(0, "{");
                let alloc = format!("char *{o} = malloc({n} + 1);");
                if vulnerable {
                    s.vuln(1, alloc);
                } else {
                    s.line(1, alloc);
                }
                s.line(1, format!("*out = {o};"));
                s.line(0, "}");
            }
            (Family::BufferOverflow, 0) => {
                s.line(0, format!("void {f}(char *{o})"));
                s.line(0, "{");
                s.line(1, format!("char {p}[{k}];"));
                self.filler(&mut s, 1, nm, &mut decl);
                if vulnerable {
                    s.vuln(1, format!("strcpy({p}, {o});"));
                } else {
                    s.line(1, format!("strncpy({p}, {o}, sizeof({p}) - 1);"));
                    s.line(1, format!("{p}[sizeof({p}) - 1] = 0;"));
                }
                s.line(1, format!("{}({p});", nm.use_fn));
                s.line(0, "}");
            }
            (Family::BufferOverflow, _) => {
                let clamp = self.rng.gen_bool(0.5);
                s.line(0, format!("void {f}(char *{o}, int {n})"));
                s.line(0, "{");
                s.line(1, format!("char {p}[{k}];"));
                self.filler(&mut s, 1, nm, &mut decl);
                let copy = format!("memcpy({p}, {o}, {n});");
                if vulnerable {
                    s.vuln(1, copy);
                } else if clamp {
                    s.line(1, format!("if ({n} > sizeof({p})) {{"));
                    s.line(2, format!("{n} = sizeof({p});"));
                    s.line(1, "}");
                    s.line(1, copy);
                } else {
                    s.line(1, format!("memcpy({p}, {o}, sizeof({p}));"));
                }
                s.line(1, format!("{}({p});", nm.use_fn));
                s.line(0, "}");
            }
            (Family::OutOfBounds, 0) => {
                let i = "i";
                s.line(0, format!("void {f}(int *{o}, int {n})"));
                s.line(0, "{");
                s.line(1, format!("int {p}[{k}];"));
                s.line(1, format!("int {i};"));
                self.filler(&mut s, 1, nm, &mut decl);
                let cmp = if vulnerable { "<=" } else { "<" };
                s.line(1, format!("for ({i} = 0; {i} {cmp} {k}; {i}++) {{"));
                let write = format!("{p}[{i}] = {o}[{i}];");
                if vulnerable {
                    s.vuln(2, write);
                } else {
                    s.line(2, write);
                }
                s.line(1, "}");
                s.line(1, format!("use_ints({p}, {n});"));
                s.line(0, "}");
            }
            (Family::OutOfBounds, _) => {
                s.line(0, format!("void {f}(int idx, int {n})"));
                s.line(0, "{");
                s.line(1, format!("int {p}[{k}];"));
                self.filler(&mut s, 1, nm, &mut decl);
                let write = format!("{p}[idx] = {n};");
                if vulnerable {
                    s.vuln(1, write);
                } else {
                    s.line(1, format!("if (idx >= 0 && idx < {k}) {{"));
                    s.line(2, write);
                    s.line(1, "}");
                }
                s.line(1, format!("use_ints({p}, {n});"));
                s.line(0, "}");
            }
        }
        s.finish()
    }
}

fn variants(family: Family) -> usize {
    match family {
        Family::MemoryLeak => 3,
        _ => 2,
    }
}

/// Writes `n_per_pattern` vulnerable/patched pairs per family plus the
/// manifest, and returns the manifest rows.
pub fn gen_corpus(
    out_dir: &Path,
    n_per_pattern: usize,
    seed: u64,
) -> Result<Vec<ManifestEntry>, PipelineError> {
    if n_per_pattern == 0 {
        return Err(PipelineError::Config(
            "n_per_pattern must be at least 1".into(),
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut manifest = Vec::new();
    for family in Family::ALL {
        for i in 0..n_per_pattern {
            let pair = manifest.len() / 2;
            let variant = i % variants(family);
            let [(vuln, marks), (fixed, _)] = gen.pair(family, variant);
            for (tag, text, marked, vulnerable) in
                [("vuln", vuln, marks, true), ("fixed", fixed, vec![], false)]
            {
                let file = format!("{}_{i:03}_{tag}.c", family.short());
                let path = out_dir.join(&file);
                std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
                manifest.push(ManifestEntry {
                    file,
                    pair,
                    family,
                    variant,
                    vulnerable,
                    marked_lines: marked,
                });
            }
        }
    }
    let mut buf = Vec::new();
    for m in &manifest {
        buf.extend(serde_json::to_vec(m).expect("manifest rows serialize"));
        buf.push(b'\n');
    }
    let path = out_dir.join(MANIFEST);
    std::fs::write(&path, buf).map_err(|e| PipelineError::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| PipelineError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Splits whole pairs, per family, so twins never straddle the split.
/// Returns (train, test) file paths under `dir`.
pub fn split_pairs(
    dir: &Path,
    manifest: &[ManifestEntry],
    fraction: f64,
    seed: u64,
) -> (Vec<PathBuf>, Vec<PathBuf>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_pairs = std::collections::BTreeSet::new();
    for family in Family::ALL {
        let mut pairs: Vec<usize> = manifest
            .iter()
            .filter(|m| m.family == family)
            .map(|m| m.pair)
            .collect();
        pairs.dedup();
        pairs.shuffle(&mut rng);
        let k = (fraction * pairs.len() as f64).round() as usize;
        train_pairs.extend(pairs.into_iter().take(k));
    }
    let (train, test): (Vec<_>, Vec<_>) =
        manifest.iter().partition(|m| train_pairs.contains(&m.pair));
    let paths = |v: Vec<&ManifestEntry>| v.into_iter().map(|m| dir.join(&m.file)).collect();
    (paths(train), paths(test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_determinism() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = gen_corpus(a.path(), 4, 7).unwrap();
        assert_eq!(m.len(), 40);
        assert_eq!(m.iter().filter(|e| e.vulnerable).count(), 20);
        assert_eq!(read_manifest(a.path()).unwrap(), m);
        gen_corpus(b.path(), 4, 7).unwrap();
        for e in &m {
            let x = std::fs::read(a.path().join(&e.file)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(&e.file)).unwrap());
        }
        assert!(gen_corpus(a.path(), 0, 7).is_err());
    }

    #[test]
    fn split_keeps_twins_together() {
        let dir = tempfile::tempdir().unwrap();
        let m = gen_corpus(dir.path(), 10, 1).unwrap();
        let (train, test) = split_pairs(dir.path(), &m, 0.8, 3);
        assert_eq!((train.len(), test.len()), (80, 20));
        for t in &test {
            let name = t.file_name().unwrap().to_str().unwrap();
            let twin = if name.ends_with("_vuln.c") {
                name.replace("_vuln.c", "_fixed.c")
            } else {
                name.replace("_fixed.c", "_vuln.c")
            };
            assert!(test.contains(&dir.path().join(twin)));
        }
    }
}
