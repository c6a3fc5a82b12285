//! Small numeric helpers shared across modules.

/// `true` when `a` and `b` are within `rel_tol` of each other relative to the
/// larger magnitude. Two exact zeros are close.
pub(crate) fn rel_close(a: f64, b: f64, rel_tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        return true;
    }
    (a - b).abs() <= rel_tol * scale
}

/// Serde adapter writing non-finite floats as string tokens so that JSON
/// output never carries a bare `inf`/`NaN`.
#[cfg(feature = "serde")]
pub(crate) mod token_f64 {
    use serde::Serializer;

    pub(crate) fn token(value: f64) -> Option<&'static str> {
        if value.is_finite() {
            None
        } else if value == f64::NEG_INFINITY {
            Some("unbounded")
        } else if value == f64::INFINITY {
            Some("unbounded_above")
        } else {
            Some("undefined")
        }
    }

    pub(crate) fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        match token(*value) {
            None => s.serialize_f64(*value),
            Some(t) => s.serialize_str(t),
        }
    }

    pub(crate) mod option {
        use serde::Serializer;

        pub(crate) fn serialize<S: Serializer>(
            value: &Option<f64>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            match value {
                None => s.serialize_none(),
                Some(v) => super::serialize(v, s),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_close_scales_with_magnitude() {
        assert!(rel_close(1e6, 1e6 + 1e-4, 1e-9));
        assert!(!rel_close(1.0, 1.0 + 1e-6, 1e-9));
        assert!(rel_close(0.0, 0.0, 1e-9));
        assert!(!rel_close(0.0, 1e-300, 1e-9));
    }
}
