//! Attribute encoding: min-max scaling for continuous attributes, one-hot
//! blocks for categorical ones.
//!
//! A [`FeatureCodec`] is fitted once on a reference market (the training
//! year) and then applied to any product table with the same schema. Future
//! years reuse the fitted ranges and category vocabularies, so their vectors
//! live in the same space as the training vectors: out-of-range continuous
//! values clamp to [0, 1] and unseen categories encode as an all-zero block.

use std::collections::HashMap;

use crate::ingest::{AttrKind, AttributeSchema, AttributeValue, ProductRecord};
use crate::textio::{escape, f64_from_hex, f64_to_hex, unescape};
use crate::{Error, Result};

/// Row-major feature matrix with a node-id table mapping rows to products.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    node_ids: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(node_ids: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != node_ids.len() * dim {
            return Err(Error::Dimension(format!(
                "feature data of length {} does not fill {} rows of width {dim}",
                data.len(),
                node_ids.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        let index = node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(FeatureMatrix {
            node_ids,
            index,
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.node_ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Cosine similarity between two rows. Rows with zero norm (possible for
    /// products whose categories were all unseen) compare as 0 to everything.
    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

/// Where one attribute lives inside the encoded vector: columns
/// `start..end`. Continuous attributes occupy one column, categorical ones a
/// column per known category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeBlock {
    pub name: String,
    pub kind: AttrKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodecParam {
    Continuous {
        min: f64,
        max: f64,
        /// True when the fitted column had a single value; such columns
        /// encode as 0.5 everywhere.
        constant: bool,
    },
    Categorical {
        /// Categories in first-seen order over the fitting table.
        categories: Vec<String>,
    },
}

/// Fitted encoder: per-attribute scaling ranges and category vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCodec {
    schema: AttributeSchema,
    params: Vec<CodecParam>,
}

/// Result of encoding a product table.
#[derive(Debug, Clone)]
pub struct EncodedFeatures {
    pub matrix: FeatureMatrix,
    /// Number of cells whose category was not in the fitted vocabulary and
    /// therefore encoded as an all-zero block.
    pub unseen_categories: usize,
}

impl FeatureCodec {
    /// Fit scaling ranges and vocabularies over a product table.
    pub fn fit(products: &[ProductRecord], schema: &AttributeSchema) -> Result<Self> {
        if products.is_empty() {
            return Err(Error::Validation(
                "cannot fit a codec on zero products".into(),
            ));
        }
        let mut params = Vec::with_capacity(schema.len());
        for (name, kind) in schema.attributes() {
            match kind {
                AttrKind::Continuous => {
                    let mut min = f64::INFINITY;
                    let mut max = f64::NEG_INFINITY;
                    for p in products {
                        let v = continuous_value(p, name)?;
                        min = min.min(v);
                        max = max.max(v);
                    }
                    params.push(CodecParam::Continuous {
                        min,
                        max,
                        constant: min == max,
                    });
                }
                AttrKind::Categorical => {
                    let mut categories = Vec::new();
                    let mut seen = HashMap::new();
                    for p in products {
                        let v = categorical_value(p, name)?;
                        if !seen.contains_key(v) {
                            seen.insert(v.to_string(), categories.len());
                            categories.push(v.to_string());
                        }
                    }
                    params.push(CodecParam::Categorical { categories });
                }
            }
        }
        Ok(FeatureCodec {
            schema: schema.clone(),
            params,
        })
    }

    /// Total encoded width: one column per continuous attribute, one per
    /// known category of each categorical attribute.
    pub fn dim(&self) -> usize {
        self.params
            .iter()
            .map(|p| match p {
                CodecParam::Continuous { .. } => 1,
                CodecParam::Categorical { categories } => categories.len(),
            })
            .sum()
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema.fingerprint()
    }

    pub fn param(&self, attribute: &str) -> Option<&CodecParam> {
        self.schema
            .attributes()
            .iter()
            .position(|(n, _)| n == attribute)
            .map(|i| &self.params[i])
    }

    /// Column layout, in schema order. Blocks tile `0..dim()` contiguously.
    pub fn blocks(&self) -> Vec<AttributeBlock> {
        let mut out = Vec::with_capacity(self.params.len());
        let mut start = 0;
        for ((name, kind), param) in self.schema.attributes().iter().zip(&self.params) {
            let width = match param {
                CodecParam::Continuous { .. } => 1,
                CodecParam::Categorical { categories } => categories.len(),
            };
            out.push(AttributeBlock {
                name: name.clone(),
                kind: *kind,
                start,
                end: start + width,
            });
            start += width;
        }
        out
    }

    /// Encode a product table into a feature matrix, one row per product in
    /// table order.
    pub fn encode(&self, products: &[ProductRecord]) -> Result<EncodedFeatures> {
        let dim = self.dim();
        let mut data = Vec::with_capacity(products.len() * dim);
        let mut unseen = 0usize;
        for p in products {
            for ((name, _), param) in self.schema.attributes().iter().zip(&self.params) {
                match param {
                    CodecParam::Continuous { min, max, constant } => {
                        let v = continuous_value(p, name)?;
                        let scaled = if *constant {
                            0.5
                        } else {
                            ((v - min) / (max - min)).clamp(0.0, 1.0)
                        };
                        data.push(scaled);
                    }
                    CodecParam::Categorical { categories } => {
                        let v = categorical_value(p, name)?;
                        let hit = categories.iter().position(|c| c == v);
                        if hit.is_none() {
                            unseen += 1;
                        }
                        for (k, _) in categories.iter().enumerate() {
                            data.push(if hit == Some(k) { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
        let node_ids = products.iter().map(|p| p.product_id.clone()).collect();
        Ok(EncodedFeatures {
            matrix: FeatureMatrix::new(node_ids, dim, data)?,
            unseen_categories: unseen,
        })
    }

    /// Serialize to the versioned codec document. Floats are stored as raw
    /// bits, so a round trip reproduces the codec exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("coconet-codec v1\n");
        out.push_str(&format!("schema-hash {:016x}\n", self.schema_hash()));
        out.push_str(&format!("attributes {}\n", self.params.len()));
        for ((name, _), param) in self.schema.attributes().iter().zip(&self.params) {
            match param {
                CodecParam::Continuous { min, max, constant } => {
                    out.push_str(&format!(
                        "attribute continuous {} min {} max {} constant {}\n",
                        escape(name),
                        f64_to_hex(*min),
                        f64_to_hex(*max),
                        u8::from(*constant)
                    ));
                }
                CodecParam::Categorical { categories } => {
                    out.push_str(&format!(
                        "attribute categorical {} categories {}\n",
                        escape(name),
                        categories.len()
                    ));
                    for c in categories {
                        out.push_str(&format!("category {}\n", escape(c)));
                    }
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "coconet-codec v1" {
            return Err(Error::Format(format!("unknown codec header '{header}'")));
        }
        let hash_line = lines.next().unwrap_or_default();
        let declared_hash = hash_line
            .strip_prefix("schema-hash ")
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .ok_or_else(|| Error::Format("missing schema-hash line".into()))?;
        let count: usize = lines
            .next()
            .unwrap_or_default()
            .strip_prefix("attributes ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Format("missing attributes line".into()))?;

        let mut attrs = Vec::with_capacity(count);
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format("truncated codec document".into()))?;
            let fields: Vec<&str> = line.split(' ').collect();
            match fields.as_slice() {
                ["attribute", "continuous", name, "min", min, "max", max, "constant", c] => {
                    attrs.push((unescape(name)?, AttrKind::Continuous));
                    params.push(CodecParam::Continuous {
                        min: f64_from_hex(min)?,
                        max: f64_from_hex(max)?,
                        constant: *c == "1",
                    });
                }
                ["attribute", "categorical", name, "categories", n] => {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::Format(format!("bad category count '{n}'")))?;
                    let mut categories = Vec::with_capacity(n);
                    for _ in 0..n {
                        let cat = lines
                            .next()
                            .and_then(|l| l.strip_prefix("category "))
                            .ok_or_else(|| Error::Format("truncated category list".into()))?;
                        categories.push(unescape(cat)?);
                    }
                    attrs.push((unescape(name)?, AttrKind::Categorical));
                    params.push(CodecParam::Categorical { categories });
                }
                _ => return Err(Error::Format(format!("bad attribute line '{line}'"))),
            }
        }
        if lines.next() != Some("end") {
            return Err(Error::Format("codec document missing 'end'".into()));
        }
        let schema = AttributeSchema::new(attrs)?;
        if schema.fingerprint() != declared_hash {
            return Err(Error::Format(
                "codec schema hash does not match its attribute list".into(),
            ));
        }
        Ok(FeatureCodec { schema, params })
    }
}

fn continuous_value(p: &ProductRecord, name: &str) -> Result<f64> {
    match p.value(name) {
        Some(AttributeValue::Continuous(v)) => Ok(*v),
        _ => Err(Error::Validation(format!(
            "product '{}' has no continuous value for '{name}'",
            p.product_id
        ))),
    }
}

fn categorical_value<'a>(p: &'a ProductRecord, name: &str) -> Result<&'a str> {
    match p.value(name) {
        Some(AttributeValue::Categorical(v)) => Ok(v),
        _ => Err(Error::Validation(format!(
            "product '{}' has no categorical value for '{name}'",
            p.product_id
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema_price_seg() -> AttributeSchema {
        AttributeSchema::new(vec![
            ("price".into(), AttrKind::Continuous),
            ("seg".into(), AttrKind::Categorical),
        ])
        .unwrap()
    }

    fn product(id: &str, price: f64, seg: &str) -> ProductRecord {
        ProductRecord::new(
            id.into(),
            vec![
                ("price".into(), AttributeValue::Continuous(price)),
                ("seg".into(), AttributeValue::Categorical(seg.into())),
            ],
        )
    }

    #[test]
    fn fit_records_min_max() {
        let products = vec![
            product("P1", 10.0, "a"),
            product("P2", 20.0, "a"),
            product("P3", 30.0, "a"),
        ];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        match codec.param("price").unwrap() {
            CodecParam::Continuous { min, max, constant } => {
                assert_eq!((*min, *max), (10.0, 30.0));
                assert!(!constant);
            }
            _ => panic!("price should be continuous"),
        }
    }

    #[test]
    fn categories_in_first_seen_order() {
        let products = vec![product("P1", 1.0, "SUV"), product("P2", 2.0, "Sedan")];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        match codec.param("seg").unwrap() {
            CodecParam::Categorical { categories } => {
                assert_eq!(categories, &["SUV".to_string(), "Sedan".to_string()]);
            }
            _ => panic!("seg should be categorical"),
        }
        let enc = codec.encode(&products).unwrap();
        assert_eq!(enc.matrix.row(0)[1..], [1.0, 0.0]);
        assert_eq!(enc.matrix.row(1)[1..], [0.0, 1.0]);
    }

    #[test]
    fn three_products_encode_to_known_matrix() {
        // one continuous + one 3-way categorical = 4 columns; scaled prices
        // are 0, 0.5, 1 and the one-hot blocks follow first-seen order
        let products = vec![
            product("P1", 10.0, "a"),
            product("P2", 20.0, "b"),
            product("P3", 30.0, "c"),
        ];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let enc = codec.encode(&products).unwrap();
        assert_eq!(enc.matrix.dim(), 4);
        assert_eq!(enc.matrix.row(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(enc.matrix.row(1), &[0.5, 0.0, 1.0, 0.0]);
        assert_eq!(enc.matrix.row(2), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(enc.unseen_categories, 0);
    }

    #[test]
    fn min_maps_to_zero_and_max_to_one() {
        let products = vec![product("P1", -5.0, "a"), product("P2", 12.0, "a")];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let enc = codec.encode(&products).unwrap();
        assert_eq!(enc.matrix.row(0)[0], 0.0);
        assert_eq!(enc.matrix.row(1)[0], 1.0);
    }

    #[test]
    fn out_of_range_future_values_clamp() {
        let fit_on = vec![product("P1", 10.0, "a"), product("P2", 30.0, "a")];
        let codec = FeatureCodec::fit(&fit_on, &schema_price_seg()).unwrap();
        let future = vec![product("F1", 40.0, "a"), product("F2", 5.0, "a")];
        let enc = codec.encode(&future).unwrap();
        assert_eq!(enc.matrix.row(0)[0], 1.0);
        assert_eq!(enc.matrix.row(1)[0], 0.0);
    }

    #[test]
    fn unseen_category_is_zero_block_with_warning() {
        let fit_on = vec![product("P1", 1.0, "SUV"), product("P2", 2.0, "Sedan")];
        let codec = FeatureCodec::fit(&fit_on, &schema_price_seg()).unwrap();
        let future = vec![product("F1", 1.5, "Coupe")];
        let enc = codec.encode(&future).unwrap();
        assert_eq!(enc.matrix.row(0)[1..], [0.0, 0.0]);
        assert_eq!(enc.unseen_categories, 1);
    }

    #[test]
    fn constant_column_encodes_as_half() {
        let products = vec![product("P1", 7.0, "a"), product("P2", 7.0, "b")];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        match codec.param("price").unwrap() {
            CodecParam::Continuous { constant, .. } => assert!(constant),
            _ => unreachable!(),
        }
        let enc = codec.encode(&products).unwrap();
        assert_eq!(enc.matrix.row(0)[0], 0.5);
        assert_eq!(enc.matrix.row(1)[0], 0.5);
    }

    #[test]
    fn car_scale_schema_reaches_210_columns() {
        // 29 attributes: 13 continuous plus 16 categorical whose vocabulary
        // sizes sum to 197, giving a 210-wide encoding
        let cards = [75, 24, 18, 12, 8, 7, 12, 10, 15, 4, 2, 2, 2, 2, 2, 2];
        let mut attrs = Vec::new();
        for i in 0..13 {
            attrs.push((format!("num_{i}"), AttrKind::Continuous));
        }
        for (i, _) in cards.iter().enumerate() {
            attrs.push((format!("cat_{i}"), AttrKind::Categorical));
        }
        let schema = AttributeSchema::new(attrs).unwrap();
        assert_eq!(schema.len(), 29);

        let n = *cards.iter().max().unwrap();
        let products: Vec<ProductRecord> = (0..n)
            .map(|row| {
                let mut values = Vec::new();
                for i in 0..13 {
                    values.push((
                        format!("num_{i}"),
                        AttributeValue::Continuous(row as f64 + i as f64),
                    ));
                }
                for (i, card) in cards.iter().enumerate() {
                    values.push((
                        format!("cat_{i}"),
                        AttributeValue::Categorical(format!("v{}", row % card)),
                    ));
                }
                ProductRecord::new(format!("P{row}"), values)
            })
            .collect();

        let codec = FeatureCodec::fit(&products, &schema).unwrap();
        assert_eq!(codec.dim(), 210);

        // blocks tile the width contiguously in schema order
        let blocks = codec.blocks();
        assert_eq!(blocks.len(), 29);
        assert_eq!(blocks[0].start, 0);
        for w in blocks.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(blocks.last().unwrap().end, 210);
    }

    #[test]
    fn cosine_of_identical_rows_is_one() {
        let products = vec![
            product("P1", 10.0, "a"),
            product("P2", 10.0, "a"),
            product("P3", 20.0, "b"),
        ];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let m = codec.encode(&products).unwrap().matrix;
        assert!((m.cosine(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_disjoint_one_hots_is_zero() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            4,
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(m.cosine(0, 1), 0.0);
    }

    #[test]
    fn cosine_with_zero_row_is_zero() {
        let m = FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            3,
            vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        assert_eq!(m.cosine(0, 1), 0.0);
        assert_eq!(m.cosine(0, 0), 0.0);
    }

    // compensated-summation recomputation in reversed order, used as an
    // independent oracle for the cosine implementation
    fn kahan_dot(a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut c = 0.0;
        for i in (0..a.len()).rev() {
            let y = a[i] * b[i] - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn cosine_matches_compensated_recomputation() {
        let a = [0.9714, 0.0001, 0.554, 0.313, 0.0042];
        let b = [0.1183, 0.9999, 0.777, 0.0001, 0.66];
        let mut data = a.to_vec();
        data.extend_from_slice(&b);
        let m = FeatureMatrix::new(vec!["a".into(), "b".into()], 5, data).unwrap();
        let oracle = kahan_dot(&a, &b) / (kahan_dot(&a, &a).sqrt() * kahan_dot(&b, &b).sqrt());
        assert!((m.cosine(0, 1) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn codec_text_round_trip_is_exact() {
        let products = vec![
            product("P1", 0.1 + 0.2, "with space"),
            product("P2", -17.25, "quoted\ncat"),
        ];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let back = FeatureCodec::from_text(&codec.to_text()).unwrap();
        assert_eq!(back, codec);
    }

    #[test]
    fn codec_rejects_corrupt_documents() {
        assert!(FeatureCodec::from_text("not a codec").is_err());
        let products = vec![product("P1", 1.0, "a")];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let text = codec.to_text().replace("end", "");
        assert!(FeatureCodec::from_text(&text).is_err());
    }

    #[test]
    fn encode_refuses_products_missing_attributes() {
        let products = vec![product("P1", 1.0, "a")];
        let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
        let bad = vec![ProductRecord::new("B1".into(), vec![])];
        assert!(codec.encode(&bad).is_err());
    }

    proptest! {
        #[test]
        fn categorical_blocks_sum_to_zero_or_one(
            prices in proptest::collection::vec(-1e6..1e6f64, 2..20),
            cats in proptest::collection::vec(0usize..6, 2..20),
        ) {
            let n = prices.len().min(cats.len());
            let products: Vec<ProductRecord> = (0..n)
                .map(|i| product(&format!("P{i}"), prices[i], &format!("k{}", cats[i])))
                .collect();
            // fit on a prefix so later rows can carry unseen categories
            let fit_n = (n / 2).max(1);
            let codec = FeatureCodec::fit(&products[..fit_n], &schema_price_seg()).unwrap();
            let enc = codec.encode(&products).unwrap();
            let block = &codec.blocks()[1];
            for i in 0..n {
                let sum: f64 = enc.matrix.row(i)[block.start..block.end].iter().sum();
                prop_assert!(sum == 0.0 || sum == 1.0);
                let cell = enc.matrix.row(i)[0];
                prop_assert!((0.0..=1.0).contains(&cell));
            }
        }

        #[test]
        fn encoding_is_deterministic(
            prices in proptest::collection::vec(-1e3..1e3f64, 2..12),
        ) {
            let products: Vec<ProductRecord> = prices
                .iter()
                .enumerate()
                .map(|(i, p)| product(&format!("P{i}"), *p, &format!("k{}", i % 3)))
                .collect();
            let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
            let a = codec.encode(&products).unwrap().matrix;
            let b = codec.encode(&products).unwrap().matrix;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cosine_is_symmetric_and_bounded_on_encodings(
            prices in proptest::collection::vec(-50.0..50.0f64, 3..10),
        ) {
            let products: Vec<ProductRecord> = prices
                .iter()
                .enumerate()
                .map(|(i, p)| product(&format!("P{i}"), *p, &format!("k{}", i % 2)))
                .collect();
            let codec = FeatureCodec::fit(&products, &schema_price_seg()).unwrap();
            let m = codec.encode(&products).unwrap().matrix;
            for i in 0..m.len() {
                for j in 0..m.len() {
                    let s = m.cosine(i, j);
                    prop_assert_eq!(s.to_bits(), m.cosine(j, i).to_bits());
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
                }
            }
        }
    }
}
