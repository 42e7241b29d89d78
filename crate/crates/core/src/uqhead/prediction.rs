use indexmap::IndexMap;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

/// Per-sample model output.
///
/// In human-readable formats this serializes to
/// `{"class_confidence_scores": {...}, "outlier_score": .., "embeddings": [..],
/// "img_src": .., "json_src": .., "predicted_label": ..}` with absent
/// payload fields omitted. Binary formats always write every field.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Prediction {
    /// Confidence per class label, in class-id order.
    pub class_confidence_scores: IndexMap<String, f64>,
    pub outlier_score: f64,
    #[serde(rename = "embeddings")]
    pub embedding: Vec<f64>,
    #[serde(default)]
    pub img_src: Option<String>,
    #[serde(default)]
    pub json_src: Option<String>,
    pub predicted_label: String,
}

impl Prediction {
    /// Copy with the hover payload stripped.
    pub fn without_payload(mut self) -> Self {
        self.img_src = None;
        self.json_src = None;
        self
    }

    pub fn confidences(&self) -> impl Iterator<Item = f64> + '_ {
        self.class_confidence_scores.values().copied()
    }

    pub fn max_confidence(&self) -> f64 {
        self.confidences().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Class id of the largest confidence; ties go to the lower id.
    pub fn predicted_class(&self) -> usize {
        self.top_classes(1)[0]
    }

    /// The `n` most confident class ids, ties broken by class id.
    pub fn top_classes(&self, n: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.class_confidence_scores.len()).collect();
        ids.sort_by(|&a, &b| {
            let ca = self.class_confidence_scores[a];
            let cb = self.class_confidence_scores[b];
            cb.total_cmp(&ca).then(a.cmp(&b))
        });
        ids.truncate(n);
        ids
    }
}

impl Serialize for Prediction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let compact = serializer.is_human_readable();
        let mut st = serializer.serialize_struct("Prediction", 6)?;
        st.serialize_field("class_confidence_scores", &self.class_confidence_scores)?;
        st.serialize_field("outlier_score", &self.outlier_score)?;
        st.serialize_field("embeddings", &self.embedding)?;
        match (&self.img_src, compact) {
            (None, true) => st.skip_field("img_src")?,
            (v, _) => st.serialize_field("img_src", v)?,
        }
        match (&self.json_src, compact) {
            (None, true) => st.skip_field("json_src")?,
            (v, _) => st.serialize_field("json_src", v)?,
        }
        st.serialize_field("predicted_label", &self.predicted_label)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(img: Option<&str>, json: Option<&str>) -> Prediction {
        Prediction {
            class_confidence_scores: [("Ankle boot".to_string(), 0.94), ("Sneaker".to_string(), 0.06)]
                .into_iter()
                .collect(),
            outlier_score: 0.24,
            embedding: vec![0.02, -0.28, 0.70],
            img_src: img.map(String::from),
            json_src: json.map(String::from),
            predicted_label: "Ankle boot".into(),
        }
    }

    #[test]
    fn json_omits_absent_payloads() {
        let v = serde_json::to_value(pred(None, Some("{}"))).unwrap();
        let obj = v.as_object().unwrap();
        assert!(!obj.contains_key("img_src"));
        assert_eq!(obj["json_src"], "{}");
        assert_eq!(obj["embeddings"][1], -0.28);
        let back: Prediction = serde_json::from_value(v).unwrap();
        assert_eq!(back, pred(None, Some("{}")));
    }

    #[test]
    fn binary_round_trip_keeps_options() {
        for p in [pred(None, None), pred(Some("data:x"), None)] {
            let bytes = bincode::serialize(&p).unwrap();
            let back: Prediction = bincode::deserialize(&bytes).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn top_classes_break_ties_by_id() {
        let mut p = pred(None, None);
        p.class_confidence_scores = [("a", 0.4), ("b", 0.2), ("c", 0.4)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(p.top_classes(2), vec![0, 2]);
        assert_eq!(p.predicted_class(), 0);
    }
}
