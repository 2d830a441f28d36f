use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const OOV: &str = "<oov>";

/// Token vocabulary; index 0 is reserved for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRecord", into = "VocabRecord")]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl From<VocabRecord> for Vocab {
    fn from(r: VocabRecord) -> Self {
        let index = r
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            tokens: r.tokens,
            counts: r.counts,
            index,
        }
    }
}

impl From<Vocab> for VocabRecord {
    fn from(v: Vocab) -> Self {
        VocabRecord {
            tokens: v.tokens,
            counts: v.counts,
        }
    }
}

impl Vocab {
    /// Builds a vocabulary in first-seen order.
    pub fn build<'a, I, D>(docs: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a String>,
    {
        let mut v = Vocab {
            tokens: vec![OOV.to_string()],
            counts: vec![0],
            index: HashMap::from([(OOV.to_string(), 0)]),
        };
        for doc in docs {
            for tok in doc {
                match v.index.get(tok) {
                    Some(&i) => v.counts[i] += 1,
                    None => {
                        v.index.insert(tok.clone(), v.tokens.len());
                        v.tokens.push(tok.clone());
                        v.counts.push(1);
                    }
                }
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.get(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oov_is_zero_and_indices_dense() {
        let docs = vec![
            vec!["a".to_string(), "b".into()],
            vec!["b".to_string(), "c".into()],
        ];
        let v = Vocab::build(docs.iter());
        assert_eq!(v.len(), 4);
        assert_eq!(v.get("zzz"), 0);
        assert_eq!(v.token(0), OOV);
        assert_eq!((v.get("a"), v.get("b"), v.get("c")), (1, 2, 3));
        assert_eq!(v.count(2), 2);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
