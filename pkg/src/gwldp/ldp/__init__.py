"""Large-deviation estimators, regime classification and sweeps."""
