use std::io;
use std::path::{Path, PathBuf};

/// Creates `<root>/<task>/<attempt>` (or `<attempt>-<n>` if taken) with an
/// empty `out/` inside. Directory creation is the reservation, so concurrent
/// callers never share a path.
pub fn make_workspace(root: &Path, task_id: &str, attempt_id: &str) -> io::Result<PathBuf> {
    let parent = root.join(sanitize(task_id));
    std::fs::create_dir_all(&parent)?;
    let base = sanitize(attempt_id);
    let mut n = 0u64;
    loop {
        let name = if n == 0 {
            base.clone()
        } else {
            format!("{base}-{n}")
        };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => {
                std::fs::create_dir(dir.join("out"))?;
                return Ok(dir);
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => n += 1,
            Err(e) => return Err(e),
        }
    }
}

fn sanitize(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    match s.as_str() {
        "" | "." | ".." => "_".to_string(),
        _ => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_and_concurrent_calls_are_distinct() {
        let root = tempfile::tempdir().unwrap();
        let a = make_workspace(root.path(), "t", "1").unwrap();
        let b = make_workspace(root.path(), "t", "1").unwrap();
        assert_ne!(a, b);
        assert!(b.ends_with("t/1-1"));
        assert!(a.join("out").is_dir());

        let paths: Vec<PathBuf> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..16)
                .map(|_| s.spawn(|| make_workspace(root.path(), "t", "2").unwrap()))
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut uniq = paths.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
        assert!(paths.iter().all(|p| p.starts_with(root.path())));
    }

    #[test]
    fn ids_cannot_escape_the_root() {
        let root = tempfile::tempdir().unwrap();
        let p = make_workspace(root.path(), "../evil", "..").unwrap();
        assert!(p.starts_with(root.path()));
    }
}
