"""Analytics, path simulation and Monte Carlo estimators."""
