use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::prompt::{hex, ChatMessage};

/// Content-addressed completion store laid out as `<root>/<ab>/<key>.txt`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Hash of the model id and the full message list. Sampling parameters
    /// are deliberately left out.
    pub fn key(model_id: &str, messages: &[ChatMessage]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model_id.as_bytes());
        hasher.update([0u8]);
        for m in messages {
            hasher.update(format!("{:?}", m.role).as_bytes());
            hasher.update([0u8]);
            hasher.update(m.content.as_bytes());
            hasher.update([0u8]);
        }
        hex(&hasher.finalize())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.root.join(&key[..2.min(key.len())]).join(format!("{key}.txt"))
    }

    pub fn lookup(&self, key: &str) -> io::Result<Option<String>> {
        match fs::read_to_string(self.path_for(key)) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes to a unique temp file in the shard directory, then renames it
    /// into place so concurrent writers never expose a partial file.
    pub fn store(&self, key: &str, completion: &str) -> io::Result<()> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a shard directory");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(completion.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_lookup_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = ResponseCache::key("m", &[ChatMessage::user("hi")]);
        assert_eq!(cache.lookup(&key).unwrap(), None);
        cache.store(&key, "héllo\n").unwrap();
        assert_eq!(cache.lookup(&key).unwrap().as_deref(), Some("héllo\n"));
        let expected = dir.path().join(&key[..2]).join(format!("{key}.txt"));
        assert!(expected.is_file());
    }

    #[test]
    fn key_covers_model_and_messages() {
        let msgs = [ChatMessage::system("s"), ChatMessage::user("u")];
        let k = ResponseCache::key("a", &msgs);
        assert_eq!(k, ResponseCache::key("a", &msgs));
        assert_ne!(k, ResponseCache::key("b", &msgs));
        assert_ne!(k, ResponseCache::key("a", &msgs[..1]));
        assert_eq!(k.len(), 64);
    }
}
