//! In-memory table store with access tracking and smart reset.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub type Row = BTreeMap<String, Value>;

/// Tables touched by one reset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetReport {
    pub touched: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("malformed init data: {0}")]
    InitData(String),
}

#[derive(Debug, Clone, Default)]
pub struct SimTableStore {
    tables: BTreeMap<String, Vec<Row>>,
    /// `(child, parent)` pairs.
    foreign_keys: BTreeSet<(String, String)>,
    init_data: BTreeMap<String, Vec<Row>>,
    accessed: BTreeSet<String>,
}

impl SimTableStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_table(&mut self, name: &str) {
        self.tables.entry(name.to_string()).or_default();
    }

    pub fn add_foreign_key(&mut self, child: &str, parent: &str) {
        self.add_table(child);
        self.add_table(parent);
        self.foreign_keys.insert((child.to_string(), parent.to_string()));
    }

    /// Seed rows for a table; also replaces its current content.
    pub fn set_init_data(&mut self, table: &str, rows: Vec<Row>) {
        self.tables.insert(table.to_string(), rows.clone());
        self.init_data.insert(table.to_string(), rows);
    }

    /// Loads `{"table": [row, ...], ...}`; unknown tables are created.
    pub fn load_init_data_json(&mut self, text: &str) -> Result<(), StoreError> {
        let doc: BTreeMap<String, Vec<Row>> =
            serde_json::from_str(text).map_err(|e| StoreError::InitData(e.to_string()))?;
        for (table, rows) in doc {
            self.set_init_data(&table, rows);
        }
        Ok(())
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn accessed(&self) -> &BTreeSet<String> {
        &self.accessed
    }

    fn touch(&mut self, table: &str) -> Result<&mut Vec<Row>, StoreError> {
        match self.tables.get_mut(table) {
            Some(rows) => {
                if !self.accessed.contains(table) {
                    self.accessed.insert(table.to_string());
                }
                Ok(rows)
            }
            None => Err(StoreError::UnknownTable(table.to_string())),
        }
    }

    pub fn insert(&mut self, table: &str, row: Row) -> Result<usize, StoreError> {
        let rows = self.touch(table)?;
        rows.push(row);
        Ok(rows.len())
    }

    pub fn select(&mut self, table: &str, pred: impl Fn(&Row) -> bool) -> Result<Vec<Row>, StoreError> {
        Ok(self.touch(table)?.iter().filter(|r| pred(r)).cloned().collect())
    }

    pub fn count(&mut self, table: &str) -> Result<usize, StoreError> {
        Ok(self.touch(table)?.len())
    }

    pub fn update(&mut self, table: &str, pred: impl Fn(&Row) -> bool, f: impl Fn(&mut Row)) -> Result<usize, StoreError> {
        let mut n = 0;
        for r in self.touch(table)?.iter_mut().filter(|r| pred(r)) {
            f(r);
            n += 1;
        }
        Ok(n)
    }

    pub fn delete(&mut self, table: &str, pred: impl Fn(&Row) -> bool) -> Result<usize, StoreError> {
        let rows = self.touch(table)?;
        let before = rows.len();
        rows.retain(|r| !pred(r));
        Ok(before - rows.len())
    }

    /// Tables reachable from `seeds` over foreign keys in either direction.
    pub fn fk_closure(&self, seeds: &BTreeSet<String>) -> BTreeSet<String> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (c, p) in &self.foreign_keys {
            adj.entry(c).or_default().push(p);
            adj.entry(p).or_default().push(c);
        }
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut queue: VecDeque<&str> = seeds.iter().map(String::as_str).collect();
        while let Some(t) = queue.pop_front() {
            if !seen.insert(t.to_string()) {
                continue;
            }
            for n in adj.get(t).into_iter().flatten() {
                if !seen.contains(*n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    fn restore(&mut self, table: &str) {
        let rows = self.init_data.get(table).cloned().unwrap_or_default();
        self.tables.insert(table.to_string(), rows);
    }

    /// Restores accessed tables and their linked tables to their seed state.
    pub fn smart_reset(&mut self) -> ResetReport {
        let closure = self.fk_closure(&self.accessed);
        for t in &closure {
            self.restore(t);
        }
        self.accessed.clear();
        ResetReport {
            touched: closure.into_iter().collect(),
        }
    }

    /// Restores every table.
    pub fn full_reset(&mut self) -> ResetReport {
        let all: Vec<String> = self.tables.keys().cloned().collect();
        for t in &all {
            self.restore(t);
        }
        self.accessed.clear();
        ResetReport { touched: all }
    }

    /// SHA-256 over table contents.
    pub fn state_hash(&self) -> String {
        let text = serde_json::to_string(&self.tables).expect("rows serialize");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn row(v: Value) -> Row {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn linked_tables_are_reset() {
        let mut s = SimTableStore::new();
        s.add_foreign_key("orders", "customers");
        s.add_table("products");
        s.set_init_data("customers", vec![row(json!({"id": 1}))]);
        s.insert("orders", row(json!({"id": 9, "customer": 1}))).unwrap();
        let r = s.smart_reset();
        assert_eq!(r.touched, ["customers", "orders"]);
        assert_eq!(s.count("orders").unwrap(), 0);
    }

    #[test]
    fn untouched_store_is_unchanged() {
        let mut s = SimTableStore::new();
        s.add_table("a");
        s.set_init_data("a", vec![row(json!({"x": 1}))]);
        let before = s.state_hash();
        assert!(s.smart_reset().touched.is_empty());
        assert_eq!(s.state_hash(), before);
    }

    #[test]
    fn reset_cost_follows_access() {
        let mut s = SimTableStore::new();
        for i in 0..100 {
            s.add_table(&format!("t{i:03}"));
        }
        s.insert("t005", Row::new()).unwrap();
        s.count("t050").unwrap();
        assert_eq!(s.smart_reset().touched.len(), 2);
    }

    #[test]
    fn init_data_fixture() {
        let mut s = SimTableStore::new();
        s.load_init_data_json(r#"{"users": [{"name": "alice"}]}"#).unwrap();
        assert_eq!(s.count("users").unwrap(), 1);
        assert!(s.load_init_data_json("[1]").is_err());
    }
}
