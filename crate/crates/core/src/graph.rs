//! Immutable triple store with interned names and self-loop augmented
//! adjacency.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type EntityId = usize;
pub type RelationId = usize;
pub type EdgeId = usize;

/// Name of the reserved relation used by the synthetic self-loop edges.
pub const SELF_LOOP: &str = "__self__";
pub const SELF_LOOP_RELATION: RelationId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub edge: EdgeId,
}

/// One outgoing move: follow `edge` (labelled `relation`) to `tail`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeAction {
    pub relation: RelationId,
    pub edge: EdgeId,
    pub tail: EntityId,
}

impl EdgeAction {
    pub fn is_self_loop(&self) -> bool {
        self.relation == SELF_LOOP_RELATION
    }
}

#[derive(Clone, Debug, Default)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }
}

#[derive(Clone, Debug)]
pub struct Graph {
    entities: Interner,
    relations: Interner,
    triples: Vec<Triple>,
    /// Number of leading `triples` that came from the source; the rest are self-loops.
    source_triples: usize,
    adjacency: Vec<Vec<EdgeAction>>,
}

impl Graph {
    /// Builds a graph from `(head, relation, tail)` names. Exact duplicates are
    /// kept once; one self-loop per entity is appended after all source
    /// triples.
    pub fn from_triples<'a, I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut b = Builder::new();
        for (h, r, t) in triples {
            b.push(h, r, t);
        }
        b.finish()
    }

    /// Parses `head<TAB>relation<TAB>tail` lines. Blank lines are ignored.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut b = Builder::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            b.push(fields[0], fields[1], fields[2]);
        }
        b.finish()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_tsv(std::io::BufReader::new(f))
    }

    /// Writes the source triples (no self-loops) in edge order. Reloading the
    /// output reproduces every id.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.triples[..self.source_triples] {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entities.names[t.head], self.relations.names[t.relation], self.entities.names[t.tail]
            )?;
        }
        Ok(())
    }

    pub fn num_entities(&self) -> usize {
        self.entities.names.len()
    }

    /// Includes the reserved self-loop relation.
    pub fn num_relations(&self) -> usize {
        self.relations.names.len()
    }

    /// Includes self-loop edges.
    pub fn num_edges(&self) -> usize {
        self.triples.len()
    }

    pub fn num_source_triples(&self) -> usize {
        self.source_triples
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn outgoing(&self, entity: EntityId) -> Result<&[EdgeAction]> {
        self.adjacency
            .get(entity)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownEntity(entity))
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entities
            .index
            .get(name)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("entity {name:?}")))
    }

    pub fn entity_name(&self, id: EntityId) -> Result<&str> {
        self.entities
            .names
            .get(id)
            .map(String::as_str)
            .ok_or(Error::UnknownEntity(id))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        self.relations
            .index
            .get(name)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("relation {name:?}")))
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.names.get(id).map(String::as_str)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities.names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations.names
    }

    /// Exact number of distinct length-`horizon` action sequences from `start`.
    pub fn count_paths(&self, start: EntityId, horizon: usize) -> Result<u128> {
        self.outgoing(start)?;
        let mut counts = vec![1u128; self.num_entities()];
        for _ in 0..horizon {
            counts = self
                .adjacency
                .iter()
                .map(|acts| acts.iter().map(|a| counts[a.tail]).fold(0u128, |s, c| s.saturating_add(c)))
                .collect();
        }
        Ok(counts[start])
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            entities: self.num_entities(),
            relations: self.num_relations(),
            triples: self.num_edges(),
            source_triples: self.source_triples,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub source_triples: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "entities\t{}", self.entities)?;
        writeln!(f, "relations\t{}", self.relations)?;
        writeln!(f, "triples\t{}", self.triples)?;
        write!(f, "source_triples\t{}", self.source_triples)
    }
}

struct Builder {
    entities: Interner,
    relations: Interner,
    seen: HashSet<(EntityId, RelationId, EntityId)>,
    triples: Vec<Triple>,
}

impl Builder {
    fn new() -> Self {
        let mut relations = Interner::default();
        relations.intern(SELF_LOOP);
        Builder {
            entities: Interner::default(),
            relations,
            seen: HashSet::new(),
            triples: Vec::new(),
        }
    }

    fn push(&mut self, h: &str, r: &str, t: &str) {
        let head = self.entities.intern(h);
        let relation = self.relations.intern(r);
        let tail = self.entities.intern(t);
        if self.seen.insert((head, relation, tail)) {
            let edge = self.triples.len();
            self.triples.push(Triple { head, relation, tail, edge });
        }
    }

    fn finish(mut self) -> Result<Graph> {
        if self.triples.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let source_triples = self.triples.len();
        for e in 0..self.entities.names.len() {
            let edge = self.triples.len();
            self.triples.push(Triple {
                head: e,
                relation: SELF_LOOP_RELATION,
                tail: e,
                edge,
            });
        }
        let mut adjacency = vec![Vec::new(); self.entities.names.len()];
        for t in &self.triples {
            adjacency[t.head].push(EdgeAction {
                relation: t.relation,
                edge: t.edge,
                tail: t.tail,
            });
        }
        for list in &mut adjacency {
            list.sort_by_key(|a| (a.relation, a.tail, a.edge));
        }
        Ok(Graph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            source_triples,
            adjacency,
        })
    }
}
