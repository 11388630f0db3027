//! Common interface for probability-emitting classifiers.

use crate::schema::{argmax_class, FaultLabel, Row, N_CLASSES};

/// A trained classifier producing a per-class probability vector.
pub trait Model: Sync {
    /// Writes P(class | row) into `out` in `FaultLabel::ALL` order.
    /// The vector sums to 1.
    fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]);

    fn predict_proba(&self, row: &Row) -> [f64; N_CLASSES] {
        let mut out = [0.0; N_CLASSES];
        self.predict_into(row, &mut out);
        out
    }

    /// Predicted class: argmax of the probability vector, ties to the
    /// earlier class in report order.
    fn predict(&self, row: &Row) -> FaultLabel {
        argmax_class(&self.predict_proba(row))
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn predict_into(&self, row: &Row, out: &mut [f64; N_CLASSES]) {
        (**self).predict_into(row, out)
    }
}
