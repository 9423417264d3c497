//! Memory-mapped key-value store of encoded patch records, one LMDB file
//! plus its lock file.

use std::fs;
use std::path::{Path, PathBuf};

use heed::types::{Bytes, Str};
use heed::{Database, Env, EnvFlags, EnvOpenOptions, MdbError, PutFlags, RoTxn, WithoutTls};
use thiserror::Error;

use crate::format::{decode_record, decode_view, encode_record, FormatError, RecordView, TensorRecord};

/// Default map size. The file only grows as data is written.
pub const DEFAULT_MAP_SIZE: usize = 64 << 30;
/// Map sizes are rounded up to this so they are a multiple of any page size.
const MAP_SIZE_GRANULE: usize = 64 << 10;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("key {0:?} is already stored")]
    DuplicateKey(String),
    #[error("store capacity of {map_size} bytes exceeded")]
    CapacityExceeded { map_size: usize },
    #[error("store {0} is open read-only")]
    ReadOnly(PathBuf),
    #[error("invalid key {0:?}")]
    InvalidKey(String),
    #[error("store {0} does not exist")]
    NotFound(PathBuf),
    #[error("record {key:?}: {source}")]
    Format {
        key: String,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Lmdb(#[from] heed::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpenMode {
    /// Create the file if needed and allow writes.
    ReadWrite,
    ReadOnly,
}

/// An open store. Readers take snapshots; writers commit whole batches.
pub struct PatchStore {
    env: Env<WithoutTls>,
    db: Database<Str, Bytes>,
    path: PathBuf,
    mode: OpenMode,
    map_size: usize,
}

/// Outcome of a bulk write.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct WriteReport {
    pub records: u64,
    pub bytes: u64,
    pub batches: u64,
}

impl PatchStore {
    pub fn create(path: &Path, map_size: usize) -> Result<Self, StoreError> {
        Self::open_with(path, OpenMode::ReadWrite, map_size)
    }

    pub fn open_read_only(path: &Path) -> Result<Self, StoreError> {
        Self::open_with(path, OpenMode::ReadOnly, 0)
    }

    pub fn open_with(path: &Path, mode: OpenMode, map_size: usize) -> Result<Self, StoreError> {
        let mut options = EnvOpenOptions::new().read_txn_without_tls();
        options.max_dbs(1);
        let mut flags = EnvFlags::NO_SUB_DIR;
        match mode {
            OpenMode::ReadWrite => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                options.map_size(map_size.max(1).next_multiple_of(MAP_SIZE_GRANULE));
            }
            OpenMode::ReadOnly => {
                if !path.is_file() {
                    return Err(StoreError::NotFound(path.to_owned()));
                }
                flags |= EnvFlags::READ_ONLY;
            }
        }
        // SAFETY: the file is only modified through this handle's write
        // transactions; LMDB's lock file serializes other processes.
        let env = unsafe {
            options.flags(flags);
            options.open(path)?
        };
        let db = match mode {
            OpenMode::ReadWrite => {
                let mut wtxn = env.write_txn()?;
                let db = env.create_database(&mut wtxn, None)?;
                wtxn.commit()?;
                db
            }
            OpenMode::ReadOnly => {
                let rtxn = env.read_txn()?;
                let db = env
                    .open_database(&rtxn, None)?
                    .ok_or_else(|| StoreError::NotFound(path.to_owned()))?;
                rtxn.commit()?;
                db
            }
        };
        let map_size = env.info().map_size;
        Ok(Self {
            env,
            db,
            path: path.to_owned(),
            mode,
            map_size,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn mode(&self) -> OpenMode {
        self.mode
    }

    fn map_err(&self, e: heed::Error, key: &str) -> StoreError {
        match e {
            heed::Error::Mdb(MdbError::KeyExist) => StoreError::DuplicateKey(key.to_owned()),
            heed::Error::Mdb(MdbError::MapFull) => StoreError::CapacityExceeded {
                map_size: self.map_size,
            },
            heed::Error::Mdb(MdbError::BadValSize) => StoreError::InvalidKey(key.to_owned()),
            other => StoreError::Lmdb(other),
        }
    }

    fn check_key(&self, key: &str) -> Result<(), StoreError> {
        if key.is_empty() || key.len() > self.env.max_key_size() {
            return Err(StoreError::InvalidKey(key.to_owned()));
        }
        Ok(())
    }

    /// Writes pre-encoded values in one transaction. Nothing is written if
    /// any key already exists or the map is full.
    pub fn put_batch<K: AsRef<str>, V: AsRef<[u8]>>(&self, entries: &[(K, V)]) -> Result<WriteReport, StoreError> {
        if self.mode == OpenMode::ReadOnly {
            return Err(StoreError::ReadOnly(self.path.clone()));
        }
        let mut wtxn = self.env.write_txn()?;
        let mut report = WriteReport {
            batches: 1,
            ..Default::default()
        };
        for (key, value) in entries {
            let (key, value) = (key.as_ref(), value.as_ref());
            self.check_key(key)?;
            self.db
                .put_with_flags(&mut wtxn, PutFlags::NO_OVERWRITE, key, value)
                .map_err(|e| self.map_err(e, key))?;
            report.records += 1;
            report.bytes += value.len() as u64;
        }
        wtxn.commit().map_err(|e| self.map_err(e, ""))?;
        Ok(report)
    }

    /// Encodes and writes records, committing every `batch_size` records.
    pub fn write_records<K, I>(&self, records: I, batch_size: usize) -> Result<WriteReport, StoreError>
    where
        K: AsRef<str>,
        I: IntoIterator<Item = (K, TensorRecord)>,
    {
        let batch_size = batch_size.max(1);
        let mut total = WriteReport::default();
        let mut batch: Vec<(K, Vec<u8>)> = Vec::with_capacity(batch_size);
        let flush = |batch: &mut Vec<(K, Vec<u8>)>, total: &mut WriteReport| -> Result<(), StoreError> {
            if !batch.is_empty() {
                let r = self.put_batch(batch)?;
                total.records += r.records;
                total.bytes += r.bytes;
                total.batches += 1;
                batch.clear();
            }
            Ok(())
        };
        for (key, record) in records {
            batch.push((key, encode_record(&record)));
            if batch.len() == batch_size {
                flush(&mut batch, &mut total)?;
            }
        }
        flush(&mut batch, &mut total)?;
        Ok(total)
    }

    /// A consistent read view; writes committed later are not visible.
    pub fn snapshot(&self) -> Result<Snapshot<'_>, StoreError> {
        Ok(Snapshot {
            txn: self.env.read_txn()?,
            db: self.db,
        })
    }

    pub fn len(&self) -> Result<u64, StoreError> {
        self.snapshot()?.len()
    }

    pub fn is_empty(&self) -> Result<bool, StoreError> {
        Ok(self.len()? == 0)
    }
}

pub struct Snapshot<'env> {
    txn: RoTxn<'env, WithoutTls>,
    db: Database<Str, Bytes>,
}

impl Snapshot<'_> {
    /// Raw encoded value, borrowed from the memory map.
    pub fn get_bytes(&self, key: &str) -> Result<Option<&[u8]>, StoreError> {
        Ok(self.db.get(&self.txn, key)?)
    }

    pub fn get_view(&self, key: &str) -> Result<Option<RecordView<'_>>, StoreError> {
        self.get_bytes(key)?
            .map(|b| {
                decode_view(b).map_err(|source| StoreError::Format {
                    key: key.to_owned(),
                    source,
                })
            })
            .transpose()
    }

    pub fn get(&self, key: &str) -> Result<Option<TensorRecord>, StoreError> {
        self.get_bytes(key)?
            .map(|b| {
                decode_record(b).map_err(|source| StoreError::Format {
                    key: key.to_owned(),
                    source,
                })
            })
            .transpose()
    }

    pub fn len(&self) -> Result<u64, StoreError> {
        Ok(self.db.len(&self.txn)?)
    }

    pub fn is_empty(&self) -> Result<bool, StoreError> {
        Ok(self.len()? == 0)
    }

    /// All keys in byte order.
    pub fn keys(&self) -> Result<Vec<String>, StoreError> {
        let mut keys = Vec::new();
        for entry in self.db.iter(&self.txn)? {
            keys.push(entry?.0.to_owned());
        }
        Ok(keys)
    }

    /// Visits every entry in key order.
    pub fn for_each(&self, mut f: impl FnMut(&str, &[u8])) -> Result<(), StoreError> {
        for entry in self.db.iter(&self.txn)? {
            let (k, v) = entry?;
            f(k, v);
        }
        Ok(())
    }
}
