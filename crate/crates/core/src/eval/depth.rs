use crate::error::{Error, Result};

/// Normalized layer position `(ℓ − 1)/(L − 1)` for a 1-based layer index.
pub fn relative_depth(layer: usize, num_layers: usize) -> Result<f64> {
    if num_layers < 2 {
        return Err(Error::InvalidArgument(format!(
            "relative depth needs at least 2 layers, got {num_layers}"
        )));
    }
    if layer == 0 || layer > num_layers {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} outside 1..={num_layers}"
        )));
    }
    Ok((layer - 1) as f64 / (num_layers - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_depths() {
        assert_eq!(format!("{:.1}", 100.0 * relative_depth(3, 4).unwrap()), "66.7");
        assert_eq!(format!("{:.1}", 100.0 * relative_depth(28, 46).unwrap()), "60.0");
        assert_eq!(relative_depth(1, 9).unwrap(), 0.0);
        assert_eq!(relative_depth(9, 9).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range() {
        assert!(relative_depth(1, 1).is_err());
        assert!(relative_depth(0, 4).is_err());
        assert!(relative_depth(5, 4).is_err());
    }
}
