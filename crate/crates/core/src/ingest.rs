//! Ingestion of consideration surveys, product tables, and attribute schemas.
//!
//! Surveys are CSV with a `customer_id` column followed by one or more
//! consideration columns. Product tables are CSV with a `product_id` column
//! plus one column per schema attribute. The schema itself is a `name,kind`
//! line format where kind is `continuous` or `categorical`.

use std::collections::{BTreeMap, HashMap, HashSet};

use csv::{ReaderBuilder, WriterBuilder};

use crate::{Error, Result};

/// Token substituted for an empty categorical cell. It becomes an ordinary
/// category, so products with unknown trim levels still encode.
pub const MISSING_CATEGORY: &str = "__missing__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrKind {
    Continuous,
    Categorical,
}

impl AttrKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttrKind::Continuous => "continuous",
            AttrKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous" => Ok(AttrKind::Continuous),
            "categorical" => Ok(AttrKind::Categorical),
            other => Err(Error::Schema(format!(
                "unknown attribute kind '{other}' (expected continuous or categorical)"
            ))),
        }
    }
}

/// Ordered list of attribute names and kinds. Order is significant: the
/// feature layout follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    attrs: Vec<(String, AttrKind)>,
}

impl AttributeSchema {
    pub fn new(attrs: Vec<(String, AttrKind)>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut seen = HashSet::new();
        for (name, _) in &attrs {
            if name.is_empty() {
                return Err(Error::Schema("empty attribute name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name '{name}'")));
            }
        }
        Ok(AttributeSchema { attrs })
    }

    /// Parse the `name,kind` line format. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut attrs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (name, kind) = line.split_once(',').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected 'name,kind', got '{line}'"),
            })?;
            attrs.push((name.trim().to_string(), AttrKind::parse(kind)?));
        }
        AttributeSchema::new(attrs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, kind) in &self.attrs {
            out.push_str(name);
            out.push(',');
            out.push_str(kind.as_str());
            out.push('\n');
        }
        out
    }

    pub fn attributes(&self) -> &[(String, AttrKind)] {
        &self.attrs
    }

    pub fn kind_of(&self, name: &str) -> Option<AttrKind> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    /// Stable fingerprint of names and kinds, used to refuse mixing encoders
    /// and product tables that disagree on the schema.
    pub fn fingerprint(&self) -> u64 {
        let mut buf = Vec::new();
        for (name, kind) in &self.attrs {
            buf.extend_from_slice(name.as_bytes());
            buf.push(0x1f);
            buf.extend_from_slice(kind.as_str().as_bytes());
            buf.push(0x1e);
        }
        crate::stable_hash(&buf)
    }
}

/// One survey response: the set of products a customer reported considering.
/// Construction enforces a non-empty, duplicate-free set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsiderationRecord {
    pub customer_id: String,
    pub considered: Vec<String>,
}

impl ConsiderationRecord {
    pub fn new(customer_id: String, considered: Vec<String>) -> Result<Self> {
        if considered.is_empty() {
            return Err(Error::Validation(format!(
                "customer '{customer_id}' has an empty consideration set"
            )));
        }
        let mut seen = HashSet::new();
        for p in &considered {
            if !seen.insert(p.as_str()) {
                return Err(Error::Validation(format!(
                    "customer '{customer_id}' lists product '{p}' twice"
                )));
            }
        }
        Ok(ConsiderationRecord {
            customer_id,
            considered,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Continuous(f64),
    Categorical(String),
}

/// One product row: id plus a value for every schema attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRecord {
    pub product_id: String,
    values: HashMap<String, AttributeValue>,
}

impl ProductRecord {
    pub fn new(
        product_id: String,
        values: impl IntoIterator<Item = (String, AttributeValue)>,
    ) -> Self {
        ProductRecord {
            product_id,
            values: values.into_iter().collect(),
        }
    }

    pub fn value(&self, attribute: &str) -> Option<&AttributeValue> {
        self.values.get(attribute)
    }
}

/// A row the parser skipped, with the 1-based file line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct SurveyParse {
    pub records: Vec<ConsiderationRecord>,
    /// Total duplicate product mentions dropped across all rows.
    pub duplicate_warnings: usize,
    /// Rows whose consideration set exceeded the three slots the survey
    /// format anticipates. They are kept; wide sets are legal.
    pub oversize_warnings: usize,
    pub rejected_rows: Vec<RejectedRow>,
}

/// Parse a consideration survey. The header must start with `customer_id`;
/// every following column is a consideration slot. Empty cells are skipped,
/// duplicate products within a row are dropped (counted as warnings), and
/// rows with no considered products at all are rejected with their line
/// number rather than failing the whole file.
pub fn parse_survey(text: &str) -> Result<SurveyParse> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    if headers.len() < 2 || headers.get(0) != Some("customer_id") {
        return Err(Error::Schema(
            "survey header must be 'customer_id' followed by at least one consideration column"
                .into(),
        ));
    }

    let mut out = SurveyParse::default();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let customer_id = row.get(0).unwrap_or("").to_string();
        if customer_id.is_empty() {
            out.rejected_rows.push(RejectedRow {
                line,
                reason: "empty customer id".into(),
            });
            continue;
        }
        let mut considered = Vec::new();
        let mut seen = HashSet::new();
        for cell in row.iter().skip(1) {
            if cell.is_empty() {
                continue;
            }
            if seen.insert(cell.to_string()) {
                considered.push(cell.to_string());
            } else {
                out.duplicate_warnings += 1;
            }
        }
        if considered.is_empty() {
            out.rejected_rows.push(RejectedRow {
                line,
                reason: "no considered products".into(),
            });
            continue;
        }
        if considered.len() > 3 {
            out.oversize_warnings += 1;
        }
        out.records.push(ConsiderationRecord {
            customer_id,
            considered,
        });
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct ProductParse {
    pub products: Vec<ProductRecord>,
    /// Rows dropped for missing continuous values. There is no principled
    /// imputation for those, so the row is reported and skipped.
    pub rejected_rows: Vec<RejectedRow>,
}

/// Parse a product table against a schema. The header must contain
/// `product_id` and every schema attribute; extra columns are ignored.
/// Continuous cells must parse as finite numbers (a non-numeric cell is a
/// hard error naming the row and column), empty continuous cells reject the
/// row, and empty categorical cells become [`MISSING_CATEGORY`].
pub fn parse_products(text: &str, schema: &AttributeSchema) -> Result<ProductParse> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let col_of = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col_of("product_id")
        .ok_or_else(|| Error::Schema("product table is missing a 'product_id' column".into()))?;
    let mut attr_cols = Vec::with_capacity(schema.len());
    for (name, kind) in schema.attributes() {
        let col = col_of(name).ok_or_else(|| {
            Error::Schema(format!("product table is missing schema column '{name}'"))
        })?;
        attr_cols.push((name.clone(), *kind, col));
    }

    let mut out = ProductParse::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    'rows: for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let product_id = row.get(id_col).unwrap_or("").to_string();
        if product_id.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty product id".into(),
            });
        }
        let mut values = Vec::with_capacity(attr_cols.len());
        for (name, kind, col) in &attr_cols {
            let raw = row.get(*col).unwrap_or("");
            match kind {
                AttrKind::Continuous => {
                    if raw.is_empty() {
                        out.rejected_rows.push(RejectedRow {
                            line,
                            reason: format!("missing value for continuous attribute '{name}'"),
                        });
                        continue 'rows;
                    }
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("non-numeric value '{raw}' in continuous column '{name}'"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            line,
                            msg: format!("non-finite value '{raw}' in continuous column '{name}'"),
                        });
                    }
                    values.push((name.clone(), AttributeValue::Continuous(v)));
                }
                AttrKind::Categorical => {
                    let v = if raw.is_empty() {
                        MISSING_CATEGORY
                    } else {
                        raw
                    };
                    values.push((name.clone(), AttributeValue::Categorical(v.to_string())));
                }
            }
        }
        if !seen_ids.insert(product_id.clone()) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate product id '{product_id}'"),
            });
        }
        out.products.push(ProductRecord::new(product_id, values));
    }
    Ok(out)
}

/// Cross-check survey records against the product table.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    /// Products mentioned in the survey but absent from the table, sorted
    /// and deduplicated.
    pub unknown_ids: Vec<String>,
    /// For every product in the table, the number of distinct customers
    /// that considered it (zero for products nobody mentioned).
    pub consideration_counts: BTreeMap<String, usize>,
}

impl DatasetSummary {
    pub fn is_valid(&self) -> bool {
        self.unknown_ids.is_empty()
    }
}

pub fn validate_dataset(
    records: &[ConsiderationRecord],
    products: &[ProductRecord],
) -> DatasetSummary {
    let known: HashSet<&str> = products.iter().map(|p| p.product_id.as_str()).collect();
    let mut unknown: HashSet<&str> = HashSet::new();
    let mut considerers: HashMap<&str, HashSet<&str>> = HashMap::new();
    for r in records {
        for p in &r.considered {
            if known.contains(p.as_str()) {
                considerers
                    .entry(p.as_str())
                    .or_default()
                    .insert(r.customer_id.as_str());
            } else {
                unknown.insert(p.as_str());
            }
        }
    }
    let mut unknown_ids: Vec<String> = unknown.into_iter().map(str::to_string).collect();
    unknown_ids.sort();
    let consideration_counts = products
        .iter()
        .map(|p| {
            let n = considerers
                .get(p.product_id.as_str())
                .map_or(0, |s| s.len());
            (p.product_id.clone(), n)
        })
        .collect();
    DatasetSummary {
        unknown_ids,
        consideration_counts,
    }
}

/// Write records back to the survey CSV format. The number of consideration
/// columns is the widest set present (minimum one).
pub fn write_survey(records: &[ConsiderationRecord]) -> String {
    let width = records
        .iter()
        .map(|r| r.considered.len())
        .max()
        .unwrap_or(1);
    let mut writer = WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["customer_id".to_string()];
    for i in 1..=width {
        header.push(format!("consider_{i}"));
    }
    writer.write_record(&header).expect("in-memory write");
    for r in records {
        let mut row = Vec::with_capacity(width + 1);
        row.push(r.customer_id.clone());
        for i in 0..width {
            row.push(r.considered.get(i).cloned().unwrap_or_default());
        }
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Write a product table in schema column order. Continuous values print in
/// the shortest form that parses back to the identical float.
pub fn write_products(products: &[ProductRecord], schema: &AttributeSchema) -> Result<String> {
    let mut writer = WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["product_id".to_string()];
    header.extend(schema.attributes().iter().map(|(n, _)| n.clone()));
    writer.write_record(&header).expect("in-memory write");
    for p in products {
        let mut row = vec![p.product_id.clone()];
        for (name, kind) in schema.attributes() {
            match p.value(name) {
                Some(AttributeValue::Continuous(v)) if *kind == AttrKind::Continuous => {
                    row.push(format!("{v}"));
                }
                Some(AttributeValue::Categorical(s)) if *kind == AttrKind::Categorical => {
                    row.push(s.clone());
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "product '{}' has no {} value for attribute '{name}'",
                        p.product_id,
                        kind.as_str()
                    )))
                }
            }
        }
        writer.write_record(&row).expect("in-memory write");
    }
    Ok(String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8"))
}
