//! Weighted k-NN conditional anomaly detector on the same Gaussian similarity
//! as the graph methods. The soft label of a query is the weight-averaged
//! label of its `k` nearest references; the score is `|soft - y|`.

use rayon::prelude::*;

use crate::data::{FeatureMatrix, FeatureWeights, Label};
use crate::error::{check_len, Error, Result};
use crate::graph::{gaussian_weight, k_smallest, wdist2};
use crate::harmonic::{fit_scaling, AnomalyReport, Method};

#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    references: FeatureMatrix,
    labels: Vec<Label>,
    k: usize,
    psi: FeatureWeights,
    sigma: f64,
}

impl KnnModel {
    pub fn new(
        references: FeatureMatrix,
        labels: Vec<Label>,
        k: usize,
        psi: FeatureWeights,
        sigma: f64,
    ) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len(references.rows(), labels.len())?;
        check_len(references.cols(), psi.len())?;
        if k == 0 || k > references.rows() {
            return Err(Error::invalid(format!(
                "k must satisfy 1 <= k <= {} references, got {k}",
                references.rows()
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(KnnModel {
            references,
            labels,
            k,
            psi,
            sigma,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn soft_label_impl(&self, query: &[f64], exclude: Option<usize>) -> f64 {
        let psi = self.psi.as_slice();
        let candidates = (0..self.references.rows())
            .filter(|&j| Some(j) != exclude)
            .map(|j| (wdist2(query, self.references.row(j), psi), j))
            .collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for (d, j) in k_smallest(candidates, self.k) {
            let w = gaussian_weight(d, self.sigma);
            num += w * self.labels[j].value();
            den += w;
        }
        if den > 0.0 {
            (num / den).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    /// `Σ w_qj y_j / Σ w_qj` over the `k` nearest references; zero when all
    /// of those weights underflow.
    pub fn soft_label(&self, query: &[f64]) -> Result<f64> {
        check_len(self.references.cols(), query.len())?;
        Ok(self.soft_label_impl(query, None))
    }

    /// Soft label of reference `index` with itself left out of its own
    /// neighbourhood.
    pub fn soft_label_leave_one_out(&self, index: usize) -> Result<f64> {
        if index >= self.len() {
            return Err(Error::invalid(format!("reference index {index} out of range")));
        }
        if self.len() < 2 {
            return Err(Error::invalid("leave-one-out needs at least two references"));
        }
        let k_eff = self.k.min(self.len() - 1);
        let model = KnnModel {
            k: k_eff,
            ..self.clone()
        };
        Ok(model.soft_label_impl(self.references.row(index), Some(index)))
    }

    pub fn anomaly_score(&self, query: &[f64], y_observed: Label) -> Result<f64> {
        Ok((self.soft_label(query)? - y_observed.value()).abs())
    }

    /// Leave-one-out scores of the references themselves.
    pub fn reference_scores(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| Ok((self.soft_label_leave_one_out(i)? - self.labels[i].value()).abs()))
            .collect()
    }

    /// Scores a batch of queries; scaled scores are calibrated on the
    /// leave-one-out reference scores.
    pub fn score_batch(&self, queries: &FeatureMatrix, labels: &[Label]) -> Result<AnomalyReport> {
        check_len(queries.rows(), labels.len())?;
        check_len(self.references.cols(), queries.cols())?;
        let raw: Vec<f64> = (0..queries.rows())
            .into_par_iter()
            .map(|i| (self.soft_label_impl(queries.row(i), None) - labels[i].value()).abs())
            .collect();
        let cal = fit_scaling(&self.reference_scores()?)?;
        Ok(AnomalyReport::new(Method::WeightedKnn, raw).with_calibration(cal))
    }
}

pub fn knn_soft_label(model: &KnnModel, query: &[f64]) -> Result<f64> {
    model.soft_label(query)
}

pub fn knn_anomaly_score(model: &KnnModel, query: &[f64], y_observed: Label) -> Result<f64> {
    model.anomaly_score(query, y_observed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(xs: &[f64], labels: &[f64], k: usize, sigma: f64) -> KnnModel {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        KnnModel::new(
            FeatureMatrix::from_rows(&rows).unwrap(),
            labels.iter().map(|&l| Label::from_response(l)).collect(),
            k,
            FeatureWeights::uniform(1),
            sigma,
        )
        .unwrap()
    }

    #[test]
    fn unanimous_and_symmetric() {
        let m = model(&[0.0, 1.0, 2.0, 10.0], &[1.0, 1.0, 1.0, -1.0], 3, 1.0);
        assert_eq!(m.soft_label(&[1.0]).unwrap(), 1.0);
        assert_eq!(m.anomaly_score(&[1.0], Label::Negative).unwrap(), 2.0);

        let m = model(&[-1.0, 1.0], &[1.0, -1.0], 2, 1.0);
        assert_eq!(m.soft_label(&[0.0]).unwrap(), 0.0);
        assert_eq!(m.anomaly_score(&[0.0], Label::Positive).unwrap(), 1.0);
        assert_eq!(m.anomaly_score(&[0.0], Label::Negative).unwrap(), 1.0);
    }

    #[test]
    fn weighted_vote() {
        // distances chosen so that the weights are 0.8 and 0.2 with σ = 1
        let a = (-(0.8_f64).ln()).sqrt();
        let b = (-(0.2_f64).ln()).sqrt();
        let m = model(&[a, -b], &[1.0, -1.0], 2, 1.0);
        let expected = (0.8 - 0.2) / (0.8 + 0.2);
        let soft = m.soft_label(&[0.0]).unwrap();
        assert!((soft - expected).abs() < 1e-12);
        assert!((soft - 0.6).abs() < 1e-12);
        assert!((m.anomaly_score(&[0.0], Label::Positive).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn underflow_gives_zero() {
        let m = model(&[0.0, 1.0], &[1.0, 1.0], 2, 1.0);
        assert_eq!(m.soft_label(&[1e6]).unwrap(), 0.0);
    }

    #[test]
    fn leave_one_out_excludes_self() {
        let m = model(&[0.0, 0.01, 5.0], &[1.0, -1.0, -1.0], 1, 1.0);
        // without exclusion the point would be its own nearest neighbour
        assert_eq!(m.soft_label_leave_one_out(0).unwrap(), -1.0);
        assert_eq!(m.soft_label(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn construction_errors() {
        let rows = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(KnnModel::new(FeatureMatrix::empty(1), vec![], 1, FeatureWeights::uniform(1), 1.0).is_err());
        assert!(KnnModel::new(rows.clone(), vec![Label::Positive], 2, FeatureWeights::uniform(1), 1.0).is_err());
        assert!(KnnModel::new(rows, vec![Label::Positive], 1, FeatureWeights::uniform(1), 0.0).is_err());
    }
}
