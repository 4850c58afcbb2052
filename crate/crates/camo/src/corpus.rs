//! Repository manifests, directory enumeration, size filtering,
//! cross-repository sampling, and live filesystem scanning.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CamoError, Result};
use crate::rng::{fnv1a64, mix64, SplitMix64};

/// Inclusive repository size bounds (files plus distinct directories).
pub const REPO_MIN_ITEMS: usize = 10;
pub const REPO_MAX_ITEMS: usize = 500;
/// Directories with fewer immediate children than this are skipped.
pub const DIR_MIN_ITEMS: usize = 5;

/// One repository's file listing: slash-separated relative paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepoManifest {
    pub repo_id: String,
    pub paths: Vec<String>,
}

/// One directory with its immediate children (files and subdirectories).
/// The repository root uses the empty string as `dir_path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectoryRecord {
    pub repo_id: String,
    pub dir_path: String,
    pub item_names: Vec<String>,
    pub item_count: usize,
}

/// Parameters for sampling decoy names from other repositories.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub seed: u64,
    pub samples_per_directory: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { seed: 42, samples_per_directory: 1 }
    }
}

/// Parse a JSON-Lines manifest file, one repository object per line.
pub fn load_manifest(path: &Path) -> Result<Vec<RepoManifest>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut manifests = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(CamoError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let manifest: RepoManifest = serde_json::from_str(&line).map_err(|e| CamoError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if !seen.insert(manifest.repo_id.clone()) {
            return Err(CamoError::Duplicate(format!("repo_id {:?}", manifest.repo_id)));
        }
        for p in &manifest.paths {
            if p.starts_with('/') || p.is_empty() {
                return Err(CamoError::Parse {
                    line: line_no,
                    msg: format!("path {p:?} must be relative and non-empty"),
                });
            }
        }
        manifests.push(manifest);
    }
    Ok(manifests)
}

/// Total item count of a repository: files plus distinct directories derived
/// from the paths (the root itself is not counted).
pub fn repo_item_count(manifest: &RepoManifest) -> usize {
    let mut dirs = HashSet::new();
    for path in &manifest.paths {
        let mut prefix = String::new();
        let parts: Vec<&str> = path.split('/').collect();
        for part in &parts[..parts.len().saturating_sub(1)] {
            if !prefix.is_empty() {
                prefix.push('/');
            }
            prefix.push_str(part);
            dirs.insert(prefix.clone());
        }
    }
    manifest.paths.len() + dirs.len()
}

/// Keep repositories whose item count lies in [REPO_MIN_ITEMS, REPO_MAX_ITEMS].
pub fn filter_repositories(manifests: Vec<RepoManifest>) -> Vec<RepoManifest> {
    manifests
        .into_iter()
        .filter(|m| (REPO_MIN_ITEMS..=REPO_MAX_ITEMS).contains(&repo_item_count(m)))
        .collect()
}

/// Immediate children of every directory (repo root included), keeping only
/// directories with at least [`DIR_MIN_ITEMS`] items. Output is sorted by
/// (repo_id, dir_path).
pub fn enumerate_directories(manifests: &[RepoManifest]) -> Vec<DirectoryRecord> {
    let mut records = Vec::new();
    for manifest in manifests {
        // map dir_path -> set of immediate child names, "" is the root
        let mut children: BTreeMap<String, HashSet<String>> = BTreeMap::new();
        for path in &manifest.paths {
            let parts: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
            let mut parent = String::new();
            for (i, part) in parts.iter().enumerate() {
                children.entry(parent.clone()).or_default().insert(part.to_string());
                if i < parts.len() - 1 {
                    if !parent.is_empty() {
                        parent.push('/');
                    }
                    parent.push_str(part);
                }
            }
        }
        for (dir_path, names) in children {
            if names.len() < DIR_MIN_ITEMS {
                continue;
            }
            let mut item_names: Vec<String> = names.into_iter().collect();
            item_names.sort();
            records.push(DirectoryRecord {
                repo_id: manifest.repo_id.clone(),
                item_count: item_names.len(),
                dir_path,
                item_names,
            });
        }
    }
    records.sort_by(|a, b| (&a.repo_id, &a.dir_path).cmp(&(&b.repo_id, &b.dir_path)));
    records
}

/// The set of file basenames of a manifest (leaves of every path).
fn leaf_basenames(manifest: &RepoManifest) -> Vec<&str> {
    manifest
        .paths
        .iter()
        .filter_map(|p| p.rsplit('/').next())
        .collect()
}

/// Sample decoy filenames for one target directory: a uniform repository
/// other than the target's, then a uniform file basename from it.
/// Deterministic in (plan.seed, target identity, manifests).
pub fn sample_cross_repo(
    target: &DirectoryRecord,
    manifests: &[RepoManifest],
    plan: &SamplePlan,
) -> Result<Vec<String>> {
    let others: Vec<&RepoManifest> = manifests
        .iter()
        .filter(|m| m.repo_id != target.repo_id && !m.paths.is_empty())
        .collect();
    if others.is_empty() {
        return Err(CamoError::InvalidInput(
            "cross-repository sampling needs at least 2 repositories".into(),
        ));
    }
    let key = fnv1a64(target.repo_id.as_bytes()) ^ mix64(fnv1a64(target.dir_path.as_bytes()));
    let mut rng = SplitMix64::new(mix64(plan.seed ^ key));
    let mut samples = Vec::with_capacity(plan.samples_per_directory);
    for _ in 0..plan.samples_per_directory {
        let repo = others[rng.next_below(others.len() as u64) as usize];
        let leaves = leaf_basenames(repo);
        let name = leaves[rng.next_below(leaves.len() as u64) as usize];
        samples.push(name.to_string());
    }
    Ok(samples)
}

/// Options for [`scan_filesystem`].
#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub include_hidden: bool,
    /// Maximum directory depth below the root; `None` means unlimited.
    pub max_depth: Option<usize>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { include_hidden: true, max_depth: None }
    }
}

/// Walk a directory tree and emit one record per directory with its
/// immediate children. Symlinks are not followed; unreadable directories are
/// skipped with a warning on stderr.
pub fn scan_filesystem(root: &Path, opts: &ScanOptions) -> Result<Vec<DirectoryRecord>> {
    if !root.is_dir() {
        return Err(CamoError::InvalidInput(format!("{} is not a directory", root.display())));
    }
    let mut records = Vec::new();
    let mut stack = vec![(root.to_path_buf(), 0usize)];
    while let Some((dir, depth)) = stack.pop() {
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) => {
                eprintln!("warning: skipping unreadable directory {}: {e}", dir.display());
                continue;
            }
        };
        let mut names = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if !opts.include_hidden && name.starts_with('.') {
                continue;
            }
            let ft = match entry.file_type() {
                Ok(t) => t,
                Err(_) => continue,
            };
            if ft.is_dir() && !ft.is_symlink() {
                let within_depth = opts.max_depth.map_or(true, |d| depth + 1 <= d);
                if within_depth {
                    stack.push((entry.path(), depth + 1));
                }
            }
            names.push(name);
        }
        names.sort();
        let rel = dir
            .strip_prefix(root)
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .unwrap_or_default();
        records.push(DirectoryRecord {
            repo_id: root.display().to_string(),
            dir_path: rel,
            item_count: names.len(),
            item_names: names,
        });
    }
    records.sort_by(|a, b| a.dir_path.cmp(&b.dir_path));
    Ok(records)
}

/// File names (not subdirectories) among a scanned directory's children.
/// Directory records from manifests carry no type information, so this is
/// only meaningful for filesystem scans; see [`scan_filesystem`].
pub fn file_names_of(dir: &Path, record: &DirectoryRecord) -> Vec<String> {
    record
        .item_names
        .iter()
        .filter(|n| dir.join(n).is_file())
        .cloned()
        .collect()
}

/// Token families for the synthetic themed corpus. Chosen for low character
/// overlap so names from different themes share few n-grams.
const THEMES: &[&str] = &[
    "invoice", "holiday", "kernel", "puppy", "galaxy", "recipe", "budget", "exam", "vacation",
    "firmware", "lyrics", "garden", "chess", "workout", "mortgage", "telescope", "sushi",
    "volcano", "quilt", "zebra", "wedding", "pixel", "harbor", "fossil", "jungle",
];

const EXTENSIONS: &[&str] = &["xls", "txt", "pdf", "doc", "csv"];

/// Generate a deterministic themed corpus: each repository draws its
/// filenames from one token family, so names sampled from another repository
/// are usually off-theme for the target directory.
pub fn synthetic_themed_manifests(seed: u64, repos: usize) -> Vec<RepoManifest> {
    let mut out = Vec::with_capacity(repos);
    for r in 0..repos {
        let mut rng = SplitMix64::new(mix64(seed ^ (r as u64).wrapping_mul(0x5851_F42D)));
        let theme = THEMES[r % THEMES.len()];
        let n_dirs = 2 + rng.next_below(2) as usize;
        let mut paths = Vec::new();
        for d in 0..n_dirs {
            let ext = EXTENSIONS[rng.next_below(EXTENSIONS.len() as u64) as usize];
            let n_files = 6 + rng.next_below(7) as usize;
            // serial names sharing a per-directory stem, the way real
            // project folders accumulate report_01, report_02, ...
            let tag = rng.next_below(90) + 10;
            for f in 0..n_files {
                paths.push(format!("{theme}_{d}/{theme}{tag}_{f:02}.{ext}"));
            }
        }
        paths.sort();
        paths.dedup();
        out.push(RepoManifest { repo_id: format!("repo{r:03}_{theme}"), paths });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn manifest(repo_id: &str, paths: &[&str]) -> RepoManifest {
        RepoManifest {
            repo_id: repo_id.to_string(),
            paths: paths.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_manifest_basics() {
        let f = write_jsonl(&[r#"{"repo_id":"r1","paths":["a/b.txt"]}"#]);
        let ms = load_manifest(f.path()).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].paths, vec!["a/b.txt"]);

        let empty = write_jsonl(&[]);
        assert!(load_manifest(empty.path()).unwrap().is_empty());
    }

    #[test]
    fn load_manifest_duplicate_and_malformed() {
        let f = write_jsonl(&[
            r#"{"repo_id":"r1","paths":["a"]}"#,
            r#"{"repo_id":"r1","paths":["b"]}"#,
        ]);
        assert!(matches!(load_manifest(f.path()), Err(CamoError::Duplicate(_))));

        let f = write_jsonl(&[r#"{"repo_id":"#]);
        match load_manifest(f.path()) {
            Err(CamoError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn filter_repositories_bounds_are_inclusive() {
        let mk = |n: usize| {
            let paths: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
            RepoManifest { repo_id: format!("r{n}"), paths }
        };
        let kept = filter_repositories(vec![mk(9), mk(10), mk(500), mk(501)]);
        let ids: Vec<&str> = kept.iter().map(|m| m.repo_id.as_str()).collect();
        assert_eq!(ids, vec!["r10", "r500"]);
    }

    #[test]
    fn repo_item_count_counts_files_and_dirs() {
        let m = manifest("r", &["a/b.txt", "a/c.txt", "d.txt"]);
        // 3 files + 1 directory "a"
        assert_eq!(repo_item_count(&m), 4);
        let m = manifest("r", &["x/y/z.txt"]);
        // 1 file + dirs "x" and "x/y"
        assert_eq!(repo_item_count(&m), 3);
    }

    #[test]
    fn enumerate_directories_threshold() {
        let m = manifest("r", &["d/a", "d/b", "d/c", "d/e", "d/f"]);
        let recs = enumerate_directories(&[m]);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].dir_path, "d");
        assert_eq!(recs[0].item_count, 5);
        assert_eq!(recs[0].item_names, vec!["a", "b", "c", "e", "f"]);

        let m = manifest("r", &["d/a", "d/b"]);
        assert!(enumerate_directories(&[m]).is_empty());
    }

    #[test]
    fn nested_paths_attribute_children_correctly() {
        let m = manifest("r", &["x/y/z.txt", "x/w.txt"]);
        // below threshold, so check via the raw child map through a bigger repo
        let m2 = manifest(
            "r2",
            &["x/y/z.txt", "x/a", "x/b", "x/c", "x/d", "x/y/q1", "x/y/q2", "x/y/q3", "x/y/q4"],
        );
        let recs = enumerate_directories(&[m, m2]);
        let x = recs.iter().find(|r| r.repo_id == "r2" && r.dir_path == "x").unwrap();
        assert!(x.item_names.contains(&"y".to_string()));
        assert_eq!(x.item_count, 5); // a b c d y
        let xy = recs.iter().find(|r| r.repo_id == "r2" && r.dir_path == "x/y").unwrap();
        assert_eq!(xy.item_count, 5); // z.txt q1..q4
    }

    /// Brute-force path-trie counter used as the independent oracle.
    fn trie_oracle(paths: &[String]) -> BTreeMap<String, usize> {
        let mut children: BTreeMap<String, HashSet<String>> = BTreeMap::new();
        for p in paths {
            let parts: Vec<&str> = p.split('/').collect();
            for i in 0..parts.len() {
                let parent = parts[..i].join("/");
                children.entry(parent).or_default().insert(parts[i].to_string());
            }
        }
        children.into_iter().map(|(k, v)| (k, v.len())).collect()
    }

    #[test]
    fn enumerate_matches_trie_oracle_on_random_path_sets() {
        let mut rng = SplitMix64::new(314);
        let segs = ["a", "b", "c", "src", "doc", "x1", "y2"];
        for _ in 0..100 {
            let n = 1 + rng.next_below(40) as usize;
            let mut paths: Vec<String> = (0..n)
                .map(|i| {
                    let depth = 1 + rng.next_below(4) as usize;
                    let mut parts: Vec<String> = (0..depth)
                        .map(|_| segs[rng.next_below(segs.len() as u64) as usize].to_string())
                        .collect();
                    let last = parts.len() - 1;
                    parts[last] = format!("{}_{i}", parts[last]); // unique leaf
                    parts.join("/")
                })
                .collect();
            paths.sort();
            paths.dedup();
            let m = RepoManifest { repo_id: "r".into(), paths: paths.clone() };
            let recs = enumerate_directories(std::slice::from_ref(&m));
            let oracle = trie_oracle(&paths);
            for rec in &recs {
                assert_eq!(rec.item_count, oracle[&rec.dir_path], "dir {:?}", rec.dir_path);
            }
            // records are exactly the oracle dirs with >= 5 children
            let expected: Vec<&String> =
                oracle.iter().filter(|(_, &c)| c >= 5).map(|(d, _)| d).collect();
            let got: Vec<&String> = recs.iter().map(|r| &r.dir_path).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn enumerate_is_byte_stable() {
        let m = manifest("r", &["d/a", "d/b", "d/c", "d/e", "d/f", "q/1", "q/2", "q/3", "q/4", "q/5"]);
        let a = serde_json::to_string(&enumerate_directories(std::slice::from_ref(&m))).unwrap();
        let b = serde_json::to_string(&enumerate_directories(std::slice::from_ref(&m))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_excludes_own_repo_and_is_deterministic() {
        let m1 = manifest("r1", &["d/a", "d/b", "d/c", "d/e", "d/f"]);
        let m2 = manifest("r2", &["x/other.txt", "y/more.txt"]);
        let manifests = vec![m1, m2];
        let target = &enumerate_directories(&manifests)[0];
        assert_eq!(target.repo_id, "r1");
        let plan = SamplePlan { seed: 7, samples_per_directory: 20 };
        let s1 = sample_cross_repo(target, &manifests, &plan).unwrap();
        let s2 = sample_cross_repo(target, &manifests, &plan).unwrap();
        assert_eq!(s1, s2);
        for name in &s1 {
            assert!(name == "other.txt" || name == "more.txt", "sampled {name}");
        }
    }

    #[test]
    fn single_repo_sampling_fails() {
        let m1 = manifest("r1", &["d/a", "d/b", "d/c", "d/e", "d/f"]);
        let manifests = vec![m1];
        let target = &enumerate_directories(&manifests)[0];
        assert!(sample_cross_repo(target, &manifests, &SamplePlan::default()).is_err());
    }

    #[test]
    fn repo_selection_is_roughly_uniform() {
        // 3 equal-size donor repos with donor-unique leaves; chi-square over
        // 10^4 draws
        let donors: Vec<RepoManifest> = (0..3)
            .map(|i| {
                manifest(&format!("donor{i}"), &[&format!("u{i}_1") as &str, &format!("u{i}_2")])
            })
            .collect();
        let mut manifests = vec![manifest("target", &["d/a", "d/b", "d/c", "d/e", "d/f"])];
        manifests.extend(donors);
        let target = enumerate_directories(&manifests)
            .into_iter()
            .find(|r| r.repo_id == "target")
            .unwrap();
        let plan = SamplePlan { seed: 99, samples_per_directory: 10_000 };
        let samples = sample_cross_repo(&target, &manifests, &plan).unwrap();
        let mut counts = [0usize; 3];
        for s in &samples {
            let donor: usize = s[1..2].parse().unwrap();
            counts[donor] += 1;
        }
        let expected = samples.len() as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 3 sigma-ish bound for 2 degrees of freedom
        assert!(chi2 < 15.0, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn synthetic_corpus_is_deterministic_and_passes_filters() {
        let a = synthetic_themed_manifests(42, 200);
        let b = synthetic_themed_manifests(42, 200);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let kept = filter_repositories(a);
        assert_eq!(kept.len(), 200, "all synthetic repos are medium-sized");
        let dirs = enumerate_directories(&kept);
        assert!(dirs.len() >= 400, "got {} directories", dirs.len());
    }

    #[test]
    fn scan_filesystem_counts_children() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        for f in ["a.txt", "b.txt", "c.txt"] {
            std::fs::write(root.join(f), b"x").unwrap();
        }
        std::fs::create_dir(root.join("sub1")).unwrap();
        std::fs::create_dir(root.join("sub2")).unwrap();
        std::fs::write(root.join("sub1/inner.txt"), b"x").unwrap();

        let recs = scan_filesystem(root, &ScanOptions::default()).unwrap();
        let rootrec = recs.iter().find(|r| r.dir_path.is_empty()).unwrap();
        assert_eq!(rootrec.item_count, 5);
        let sub1 = recs.iter().find(|r| r.dir_path == "sub1").unwrap();
        assert_eq!(sub1.item_names, vec!["inner.txt"]);

        let empty = tempfile::tempdir().unwrap();
        let recs = scan_filesystem(empty.path(), &ScanOptions::default()).unwrap();
        assert_eq!(recs[0].item_count, 0);
    }

    #[cfg(unix)]
    #[test]
    fn scan_filesystem_does_not_follow_symlink_loops() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        std::fs::create_dir(root.join("d")).unwrap();
        std::os::unix::fs::symlink(root, root.join("d/loop")).unwrap();
        let recs = scan_filesystem(root, &ScanOptions::default()).unwrap();
        // terminates, and the symlink shows up as an item but is not descended
        let d = recs.iter().find(|r| r.dir_path == "d").unwrap();
        assert_eq!(d.item_names, vec!["loop"]);
        assert!(recs.iter().all(|r| !r.dir_path.contains("loop/")));
    }

    #[test]
    fn scan_filesystem_hidden_and_depth_flags() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path();
        std::fs::write(root.join(".hidden"), b"x").unwrap();
        std::fs::write(root.join("seen.txt"), b"x").unwrap();
        std::fs::create_dir_all(root.join("a/b")).unwrap();

        let recs = scan_filesystem(root, &ScanOptions { include_hidden: false, max_depth: Some(1) })
            .unwrap();
        let rootrec = recs.iter().find(|r| r.dir_path.is_empty()).unwrap();
        assert_eq!(rootrec.item_names, vec!["a", "seen.txt"]);
        assert!(recs.iter().any(|r| r.dir_path == "a"));
        assert!(!recs.iter().any(|r| r.dir_path == "a/b"));

        let recs = scan_filesystem(root, &ScanOptions::default()).unwrap();
        let rootrec = recs.iter().find(|r| r.dir_path.is_empty()).unwrap();
        assert!(rootrec.item_names.contains(&".hidden".to_string()));
    }
}
