use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::PhyloError;
use crate::bits::BinaryPosition;

/// Aligned rows over `A C G T -`, one per taxon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub taxa: Vec<String>,
    pub rows: Vec<Vec<u8>>,
}

impl Alignment {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(move |r| r[c])
    }

    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for (name, row) in self.taxa.iter().zip(&self.rows) {
            out.push('>');
            out.push_str(name);
            out.push('\n');
            out.push_str(std::str::from_utf8(row).expect("alignment rows are ASCII"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneBlock {
    pub name: String,
    pub rows: Vec<Vec<u8>>,
}

impl GeneBlock {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// 1-based inclusive column range of one gene in the concatenated FASTA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// Per-gene aligned blocks over a fixed taxon list. Genes are kept sorted
/// by name; that order is the bit order of every word over this matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneMatrix {
    taxa: Vec<String>,
    outgroup: usize,
    genes: Vec<GeneBlock>,
}

impl GeneMatrix {
    pub fn new(
        taxa: Vec<String>,
        mut genes: Vec<GeneBlock>,
        outgroup: Option<&str>,
    ) -> Result<Self, PhyloError> {
        if taxa.is_empty() {
            return Err(PhyloError::EmptyAlignment);
        }
        let mut seen = HashSet::new();
        for t in &taxa {
            if !seen.insert(t.as_str()) {
                return Err(PhyloError::DuplicateTaxon(t.clone()));
            }
        }
        let mut names = HashSet::new();
        for g in &genes {
            if !names.insert(g.name.as_str()) {
                return Err(PhyloError::DuplicateGene(g.name.clone()));
            }
            if g.width() == 0 {
                return Err(PhyloError::EmptyPartition(g.name.clone()));
            }
            if g.rows.len() != taxa.len() {
                return Err(PhyloError::RaggedRows {
                    taxon: format!("<gene {}>", g.name),
                    expected: taxa.len(),
                    got: g.rows.len(),
                });
            }
            for (t, row) in taxa.iter().zip(&g.rows) {
                if row.len() != g.width() {
                    return Err(PhyloError::RaggedRows {
                        taxon: t.clone(),
                        expected: g.width(),
                        got: row.len(),
                    });
                }
            }
        }
        genes.sort_by(|a, b| a.name.cmp(&b.name));
        let outgroup = match outgroup {
            None => 0,
            Some(name) => taxa
                .iter()
                .position(|t| t == name)
                .ok_or_else(|| PhyloError::UnknownOutgroup(name.to_owned()))?,
        };
        Ok(Self {
            taxa,
            outgroup,
            genes,
        })
    }

    /// Splits concatenated records into gene blocks along `partitions`.
    pub fn from_parts(
        records: Vec<(String, Vec<u8>)>,
        partitions: &[Partition],
        outgroup: Option<&str>,
    ) -> Result<Self, PhyloError> {
        let width = records.first().map_or(0, |(_, r)| r.len());
        check_partitions(partitions, width)?;
        let genes = partitions
            .iter()
            .map(|p| GeneBlock {
                name: p.name.clone(),
                rows: records
                    .iter()
                    .map(|(_, r)| r[p.start - 1..p.end].to_vec())
                    .collect(),
            })
            .collect();
        let taxa = records.into_iter().map(|(t, _)| t).collect();
        Self::new(taxa, genes, outgroup)
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn outgroup(&self) -> usize {
        self.outgroup
    }

    pub fn outgroup_name(&self) -> &str {
        &self.taxa[self.outgroup]
    }

    pub fn genes(&self) -> &[GeneBlock] {
        &self.genes
    }

    pub fn gene_names(&self) -> Vec<&str> {
        self.genes.iter().map(|g| g.name.as_str()).collect()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn total_width(&self) -> usize {
        self.genes.iter().map(GeneBlock::width).sum()
    }

    /// Column ranges of the genes in the concatenation written by
    /// [`GeneMatrix::to_fasta`].
    pub fn partitions(&self) -> Vec<Partition> {
        let mut start = 1;
        self.genes
            .iter()
            .map(|g| {
                let p = Partition {
                    name: g.name.clone(),
                    start,
                    end: start + g.width() - 1,
                };
                start = p.end + 1;
                p
            })
            .collect()
    }

    pub fn partition_text(&self) -> String {
        self.partitions()
            .iter()
            .map(|p| format!("{} = {}-{}\n", p.name, p.start, p.end))
            .collect()
    }

    /// All genes concatenated in gene order.
    pub fn to_fasta(&self) -> String {
        concat_subset(self, &BinaryPosition::ones(self.n_genes()))
            .expect("a matrix has at least one gene")
            .to_fasta()
    }
}

/// Column-wise concatenation of the selected genes, in gene order.
pub fn concat_subset(m: &GeneMatrix, w: &BinaryPosition) -> Result<Alignment, PhyloError> {
    if w.len() != m.n_genes() {
        return Err(PhyloError::WordLength {
            expected: m.n_genes(),
            got: w.len(),
        });
    }
    let selected = w.selected();
    if selected.is_empty() {
        return Err(PhyloError::EmptySubset);
    }
    let rows = (0..m.taxa.len())
        .map(|t| {
            selected
                .iter()
                .flat_map(|&g| m.genes[g].rows[t].iter().copied())
                .collect()
        })
        .collect();
    Ok(Alignment {
        taxa: m.taxa.clone(),
        rows,
    })
}

fn normalize(c: u8) -> Option<u8> {
    match c.to_ascii_uppercase() {
        b @ (b'A' | b'C' | b'G' | b'T' | b'-') => Some(b),
        // missing data is compared like a gap
        b'N' | b'?' => Some(b'-'),
        _ => None,
    }
}

/// Parses aligned FASTA. Header names stop at the first whitespace.
pub fn parse_fasta(text: &str) -> Result<Vec<(String, Vec<u8>)>, PhyloError> {
    let mut records: Vec<(String, Vec<u8>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let name = header.split_whitespace().next().unwrap_or("").to_owned();
            records.push((name, Vec::new()));
            continue;
        }
        let (name, row) = records
            .last_mut()
            .ok_or(PhyloError::MissingHeader(idx + 1))?;
        for ch in line.bytes() {
            let b = normalize(ch).ok_or_else(|| PhyloError::UnknownCharacter {
                taxon: name.clone(),
                character: ch as char,
                column: row.len() + 1,
            })?;
            row.push(b);
        }
    }
    if records.is_empty() {
        return Err(PhyloError::EmptyAlignment);
    }
    let mut seen = HashSet::new();
    let width = records[0].1.len();
    for (name, row) in &records {
        if !seen.insert(name.as_str()) {
            return Err(PhyloError::DuplicateTaxon(name.clone()));
        }
        if row.len() != width {
            return Err(PhyloError::RaggedRows {
                taxon: name.clone(),
                expected: width,
                got: row.len(),
            });
        }
    }
    Ok(records)
}

/// Parses `gene_name = start-end` lines (1-based, inclusive). Blank lines and
/// `#` comments are skipped; a RAxML-style `DNA, ` prefix is accepted.
pub fn parse_partitions(text: &str) -> Result<Vec<Partition>, PhyloError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || PhyloError::PartitionSyntax {
            line: idx + 1,
            text: raw.to_owned(),
        };
        let (lhs, rhs) = line.split_once('=').ok_or_else(bad)?;
        let name = lhs.rsplit(',').next().unwrap_or(lhs).trim();
        let (a, b) = rhs.trim().split_once('-').ok_or_else(bad)?;
        let start: usize = a.trim().parse().map_err(|_| bad())?;
        let end: usize = b.trim().parse().map_err(|_| bad())?;
        if name.is_empty() {
            return Err(bad());
        }
        out.push(Partition {
            name: name.to_owned(),
            start,
            end,
        });
    }
    Ok(out)
}

fn check_partitions(parts: &[Partition], width: usize) -> Result<(), PhyloError> {
    let mut names = HashSet::new();
    for p in parts {
        if !names.insert(p.name.as_str()) {
            return Err(PhyloError::DuplicateGene(p.name.clone()));
        }
        if p.start == 0 || p.end < p.start {
            return Err(PhyloError::EmptyPartition(p.name.clone()));
        }
        if p.end > width {
            return Err(PhyloError::PartitionOutOfBounds {
                gene: p.name.clone(),
                end: p.end,
                width,
            });
        }
    }
    let mut sorted: Vec<&Partition> = parts.iter().collect();
    sorted.sort_by_key(|p| (p.start, p.end));
    let mut covered = 0;
    let mut prev: Option<&Partition> = None;
    for p in sorted {
        if let Some(q) = prev {
            if p.start <= q.end {
                return Err(PhyloError::PartitionOverlap {
                    first: q.name.clone(),
                    second: p.name.clone(),
                });
            }
        }
        if p.start > covered + 1 {
            return Err(PhyloError::PartitionGap {
                start: covered + 1,
                end: p.start - 1,
            });
        }
        covered = p.end;
        prev = Some(p);
    }
    if covered < width {
        return Err(PhyloError::PartitionGap {
            start: covered + 1,
            end: width,
        });
    }
    Ok(())
}

pub fn load_gene_matrix(
    fasta: &Path,
    partitions: &Path,
    outgroup: Option<&str>,
) -> Result<GeneMatrix, PhyloError> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|source| PhyloError::Io {
            path: p.to_owned(),
            source,
        })
    };
    let records = parse_fasta(&read(fasta)?)?;
    let parts = parse_partitions(&read(partitions)?)?;
    GeneMatrix::from_parts(records, &parts, outgroup)
}
